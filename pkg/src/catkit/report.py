"""Experiment configuration, JSON/CSV reports and plot-data emission."""

from __future__ import annotations

import csv
import json
import math
import os
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from catkit.checks import CHECK_NAMES, SUITES, CheckRecord, run_check, select
from catkit.contour import wedge_margin

SCHEMA_VERSION = "catkit.report/1"
RECORD_FIELDS = ("suite", "check", "criterion", "value", "tolerance", "pass", "runtime_ms", "runtime_limit_ms")
#: fields that legitimately differ between two runs with the same seed
VOLATILE_FIELDS = ("runtime_ms",)


class ConfigError(ValueError):
    """Malformed configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass
class ExperimentConfig:
    seed: int = 0
    suite: str = "all"
    tolerances: dict[str, float] = field(default_factory=dict)
    output_dir: str | None = None

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("config.seed", f"expected a non-negative integer, got {self.seed!r}")
        if self.suite not in SUITES:
            raise ConfigError("config.suite", f"expected one of {', '.join(SUITES)}, got {self.suite!r}")
        if not isinstance(self.tolerances, dict):
            raise ConfigError("config.tolerances", "expected a mapping of check name to tolerance")
        for name, tol in self.tolerances.items():
            if name not in CHECK_NAMES:
                raise ConfigError(f"config.tolerances.{name}", f"unknown check; known: {', '.join(CHECK_NAMES)}")
            if isinstance(tol, bool) or not isinstance(tol, (int, float)) or not tol > 0 or not math.isfinite(tol):
                raise ConfigError(f"config.tolerances.{name}", f"tolerance must be a positive number, got {tol!r}")
        if self.output_dir is not None and not isinstance(self.output_dir, str):
            raise ConfigError("config.output_dir", "expected a path string")

    @classmethod
    def from_dict(cls, data) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config", "expected a JSON object")
        unknown = set(data) - {"seed", "suite", "tolerances", "output_dir"}
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"config.{key}", "unknown field")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def thread_cap(env=None) -> int:
    """Worker count from ``CAT_KIT_THREADS`` (default: min(4, cpu count))."""
    env = os.environ if env is None else env
    raw = env.get("CAT_KIT_THREADS")
    if raw is None:
        return max(1, min(4, os.cpu_count() or 1))
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("env.CAT_KIT_THREADS", f"expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("env.CAT_KIT_THREADS", f"expected a positive integer, got {raw!r}")
    return n


@dataclass
class Report:
    seed: int
    suite: str
    records: list[CheckRecord]

    @property
    def summary(self) -> dict:
        passed = sum(r.passed for r in self.records)
        return {"total": len(self.records), "passed": passed, "failed": len(self.records) - passed}

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.records)

    def to_dict(self, include_volatile: bool = True) -> dict:
        recs = [r.to_dict() for r in self.records]
        if not include_volatile:
            for r in recs:
                for key in VOLATILE_FIELDS:
                    r.pop(key, None)
        return {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "suite": self.suite,
            "summary": self.summary,
            "records": recs,
        }

    def to_json(self, include_volatile: bool = True) -> str:
        return json.dumps(self.to_dict(include_volatile), indent=2, sort_keys=True)

    def write_csv(self, path: Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(RECORD_FIELDS)
            for r in self.records:
                d = r.to_dict()
                w.writerow([d[k] for k in RECORD_FIELDS])

    def lines(self) -> list[str]:
        out = []
        for r in self.records:
            status = "PASS" if r.passed else "FAIL"
            out.append(f"{status} [{r.criterion:2d}] {r.suite}/{r.check}: worst ratio {r.value:.3g} (tol {r.tolerance:g}), {r.runtime_ms:.0f} ms")
        return out


def _run_one(args) -> CheckRecord:
    check, seed, tol = args
    return run_check(check, seed, tol)


def run_suite(config: ExperimentConfig, threads: int | None = None) -> Report:
    """Run the checks of ``config.suite``; records come back in criterion order.

    Checks run in separate worker processes: LAPACK calls issued from several
    threads of one process round differently from serial calls, which would
    break run-to-run reproducibility.
    """
    checks = select(config.suite)
    threads = thread_cap() if threads is None else threads
    jobs = [(c, config.seed, float(config.tolerances.get(c.name, 1.0))) for c in checks]
    if threads == 1 or len(jobs) == 1:
        records = [_run_one(j) for j in jobs]
    else:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs)), mp_context=ctx) as pool:
            records = list(pool.map(_run_one, jobs))
    return Report(config.seed, config.suite, records)


# -- plot data -------------------------------------------------------------------------

GNUPLOT = {
    "wedge": """set datafile separator ','
set xlabel 'Re q'
set ylabel 'Im q'
set title 'L(q) = (Re q)^2 - (Im q)^2'
set view map
set palette defined (-1 'red', 0 'white', 1 'blue')
splot '{csv}' every ::1 using 1:2:3 with image notitle
""",
    "suppression": """set datafile separator ','
set xlabel 't'
set ylabel 'log10 d(t)'
plot '{csv}' every ::1 using 1:2 with linespoints title 'suppression distance'
""",
    "refinement": """set datafile separator ','
set logscale xy
set xlabel 'h'
set ylabel 'continuity residual'
plot '{csv}' every ::1 using 1:2 with linespoints title 'proper pair'
""",
}


def wedge_table(half: float = 2.0, n: int = 81) -> list[tuple[float, float, float, int]]:
    xs = np.linspace(-half, half, n)
    rows = []
    for y in xs:
        for x in xs:
            L = wedge_margin(complex(x, y))
            rows.append((float(x), float(y), float(L), int(L > 0)))
    return rows


def emit_plot_data(data, kind: str, out_dir, stem: str | None = None) -> list[Path]:
    """Write ``<stem>.csv`` and ``<stem>.gp`` for one plot kind.

    Parameters
    ----------
    data
        ``None`` for ``"wedge"``; an (n, 2) array of ``t, d`` or a
        :class:`~catkit.evolution.SuppressionReport` for ``"suppression"``;
        a :func:`~catkit.current.refinement_sweep` dict for ``"refinement"``.
    kind : {"wedge", "suppression", "refinement"}
    out_dir : path
    """
    if kind not in GNUPLOT:
        raise ValueError(f"unknown plot kind {kind!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = stem or kind
    csv_path, gp_path = out / f"{stem}.csv", out / f"{stem}.gp"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        if kind == "wedge":
            w.writerow(["re", "im", "L", "converges"])
            w.writerows(wedge_table(*(data or ())))
        elif kind == "suppression":
            arr = np.asarray(getattr(data, "distances", data), dtype=float)
            keep = arr[:, 1] > 0
            w.writerow(["t", "log10_d"])
            w.writerows(zip(arr[keep, 0].tolist(), np.log10(arr[keep, 1]).tolist()))
        else:
            h = np.asarray(data["h"], dtype=float)
            res = np.asarray(data["proper"], dtype=float)
            slope = float(np.polyfit(np.log(h), np.log(res), 1)[0])
            fh.write(f"# slope = {slope:.6f} (least squares on log h, log residual)\n")
            w.writerow(["h", "residual"])
            w.writerows(zip(h.tolist(), res.tolist()))
    gp_path.write_text(GNUPLOT[kind].format(csv=csv_path.name))
    return [csv_path, gp_path]
