"""``cat-kit`` command line.

    cat-kit <suite> [--seed N] [--config file.json] [--out dir]
    cat-kit kernel --op op.json --mode roundtrip|matrix-element

Exit codes: 0 when every check passes, 1 when a check fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from catkit.checks import KERNEL_FOCK, SUITES, TRIANGULAR_H, continuity_sweep
from catkit.evolution import suppression_report
from catkit.fock import TruncationError
from catkit.kernel import (
    DegreeLimitError,
    IllConditionedMomentsError,
    OperatorPoly,
    kernel_to_operator,
    matrix_element_check,
    operator_to_kernel,
)
from catkit.qmetric import QMetricSystem
from catkit.report import ConfigError, ExperimentConfig, emit_plot_data, run_suite, thread_cap

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cat-kit", description="Run the catkit acceptance checks.")
    ap.add_argument("suite", choices=SUITES)
    ap.add_argument("--seed", type=int, help="seed of the single generator all randomness flows from")
    ap.add_argument("--config", type=Path, help="JSON config: seed, suite, tolerances, output_dir")
    ap.add_argument("--out", type=Path, help="directory for report.json, report.csv and plot data")
    kern = ap.add_argument_group("kernel mode (suite 'kernel' with --op)")
    kern.add_argument("--op", type=Path, help='operator JSON {"terms": [{"m", "n", "re", "im"}]}')
    kern.add_argument("--mode", choices=("roundtrip", "matrix-element"), default="roundtrip")
    kern.add_argument("--eps", type=float, default=1e-2, help="eps for roundtrip mode")
    kern.add_argument("--q1", type=float, default=0.3, help="bra label for matrix-element mode")
    kern.add_argument("--q2", type=float, default=0.25, help="ket label for matrix-element mode")
    return ap


def load_config(args) -> ExperimentConfig:
    data: dict = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except OSError as exc:
            raise ConfigError("--config", str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config", "expected a JSON object")
    data = dict(data)
    data["suite"] = args.suite
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["output_dir"] = str(args.out)
    return ExperimentConfig.from_dict(data)


def run_kernel_mode(args) -> int:
    try:
        op = OperatorPoly.from_json(args.op.read_text())
    except (OSError, ValueError) as exc:
        print(f"cat-kit: --op: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.mode == "roundtrip":
            back = kernel_to_operator(operator_to_kernel(op, args.eps), degree=op.degree)
            err = op.max_coeff_error(back)
            out = {"mode": "roundtrip", "eps": args.eps, "max_coeff_error": err, "recovered": back.to_dict(), "pass": err <= 1e-6}
        else:
            rel = matrix_element_check(op, args.q1, args.q2, KERNEL_FOCK)
            out = {"mode": "matrix-element", "q1": args.q1, "q2": args.q2, "params": KERNEL_FOCK.to_dict(), "relative_difference": rel, "pass": rel <= 1e-3}
    except (DegreeLimitError, IllConditionedMomentsError, TruncationError) as exc:
        print(f"cat-kit: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(out, indent=2))
    return EXIT_OK if out["pass"] else EXIT_FAIL


def write_outputs(report, config: ExperimentConfig, out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json() + "\n")
    report.write_csv(out_dir / "report.csv")
    files = [out_dir / "report.json", out_dir / "report.csv"]
    if config.suite in ("delta", "all"):
        files += emit_plot_data(None, "wedge", out_dir)
    if config.suite in ("evolve", "all"):
        tri = QMetricSystem.from_hamiltonian(TRIANGULAR_H)
        files += emit_plot_data(suppression_report(tri, np.array([1, 1]) / np.sqrt(2)), "suppression", out_dir)
    if config.suite in ("continuity", "all"):
        files += emit_plot_data(continuity_sweep(), "refinement", out_dir)
    return files


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.op is not None:
        if args.suite != "kernel":
            print("cat-kit: --op is only valid with the 'kernel' suite", file=sys.stderr)
            return EXIT_USAGE
        return run_kernel_mode(args)
    try:
        config = load_config(args)
        threads = thread_cap()
    except ConfigError as exc:
        print(f"cat-kit: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = run_suite(config, threads)
    for line in report.lines():
        print(line, file=sys.stderr)
    if config.output_dir is not None:
        write_outputs(report, config, Path(config.output_dir))
    else:
        print(report.to_json())
    return EXIT_OK if report.all_passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
