"""Parametric expressions with a conjugation that can keep chosen parameters analytic.

An expression is a finite sum of terms ``c * prod(x_i**k_i) * prod(exp(d_j * m_j))``
where ``c, d_j`` are complex coefficients and ``m_j`` are monomials.  Conjugation
``conj_keeping(e, keep)`` conjugates every coefficient, leaves the parameters
named in ``keep`` untouched and replaces every other parameter ``x`` by the
tagged name ``x*`` (and ``x*`` back by ``x``).

Text format
-----------
Expressions read and write a small s-expression language::

    expr := NUMBER | NAME
          | (c RE IM)            complex literal
          | (+ expr ...)         sum
          | (- expr expr ...)    difference (unary form negates)
          | (* expr ...)         product
          | (^ expr INT)         non-negative integer power
          | (exp expr)           exponential of a single coefficient*monomial

Names are any token that does not parse as a number; a trailing ``*`` marks a
conjugated parameter, e.g. ``(* (c 2 -1) (^ p* 2))``.
"""

from __future__ import annotations

import cmath
import re
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

CONJ_TAG = "*"

Monomial = tuple[tuple[str, int], ...]
ExpFactor = tuple[complex, Monomial]


class UnboundParameterError(KeyError):
    """Raised when an evaluation assignment misses parameter names."""

    def __init__(self, names: Iterable[str]):
        self.names = sorted(names)
        super().__init__(f"unbound parameters: {', '.join(self.names)}")


class ParseError(ValueError):
    pass


def base_name(name: str) -> str:
    return name[:-1] if name.endswith(CONJ_TAG) else name


def toggle_conj(name: str) -> str:
    return name[:-1] if name.endswith(CONJ_TAG) else name + CONJ_TAG


def _mono(items: Iterable[tuple[str, int]]) -> Monomial:
    acc: dict[str, int] = {}
    for name, power in items:
        if power < 0:
            raise ValueError(f"negative power {power} for {name!r}")
        acc[name] = acc.get(name, 0) + power
    return tuple(sorted((n, k) for n, k in acc.items() if k != 0))


def _cplx_key(c: complex) -> tuple[float, float]:
    return (c.real, c.imag)


def _exps(items: Iterable[ExpFactor]) -> tuple[ExpFactor, ...]:
    acc: dict[Monomial, complex] = {}
    for coeff, mono in items:
        acc[mono] = acc.get(mono, 0j) + complex(coeff)
    return tuple(sorted(((c, m) for m, c in acc.items() if c != 0), key=lambda f: f[1]))


def _term_key(mono: Monomial, exps: tuple[ExpFactor, ...]):
    return (mono, tuple((m, _cplx_key(c)) for c, m in exps))


@dataclass(frozen=True)
class ParamExpr:
    """Canonical sum of ``(coeff, monomial, exp_factors)`` terms.

    Like terms (same monomial and same exponential factors) are merged, zero
    coefficients dropped and terms sorted, so structural equality is ``==``.
    """

    terms: tuple[tuple[complex, Monomial, tuple[ExpFactor, ...]], ...] = ()

    @classmethod
    def from_terms(cls, terms) -> "ParamExpr":
        acc: dict = {}
        shapes: dict = {}
        for coeff, mono, exps in terms:
            mono = _mono(mono)
            exps = _exps(exps)
            key = _term_key(mono, exps)
            acc[key] = acc.get(key, 0j) + complex(coeff)
            shapes[key] = (mono, exps)
        out = [(acc[k],) + shapes[k] for k in sorted(acc) if acc[k] != 0]
        return cls(tuple(out))

    @classmethod
    def symbol(cls, name: str) -> "ParamExpr":
        return cls.from_terms([(1.0, ((name, 1),), ())])

    @classmethod
    def const(cls, value: complex) -> "ParamExpr":
        return cls.from_terms([(value, (), ())])

    @property
    def names(self) -> set[str]:
        out = set()
        for _, mono, exps in self.terms:
            out.update(n for n, _ in mono)
            for _, m in exps:
                out.update(n for n, _ in m)
        return out

    def __add__(self, other) -> "ParamExpr":
        other = _as_expr(other)
        return ParamExpr.from_terms(self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self) -> "ParamExpr":
        return ParamExpr.from_terms((-c, m, e) for c, m, e in self.terms)

    def __sub__(self, other) -> "ParamExpr":
        return self + (-_as_expr(other))

    def __rsub__(self, other) -> "ParamExpr":
        return _as_expr(other) - self

    def __mul__(self, other) -> "ParamExpr":
        other = _as_expr(other)
        return ParamExpr.from_terms(
            (c1 * c2, m1 + m2, e1 + e2)
            for c1, m1, e1 in self.terms
            for c2, m2, e2 in other.terms
        )

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "ParamExpr":
        return ParamExpr.from_terms((c / scalar, m, e) for c, m, e in self.terms)

    def __pow__(self, k: int) -> "ParamExpr":
        if int(k) != k or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = ParamExpr.const(1.0)
        for _ in range(int(k)):
            out = out * self
        return out

    def __call__(self, **assignment):
        return evaluate(self, assignment)

    def __str__(self) -> str:
        return to_sexpr(self)


def _as_expr(x) -> ParamExpr:
    if isinstance(x, ParamExpr):
        return x
    return ParamExpr.const(complex(x))


def exp_of(arg: ParamExpr) -> ParamExpr:
    """``exp(c * monomial)`` for a single-term argument without exponentials."""
    arg = _as_expr(arg)
    if len(arg.terms) == 0:
        return ParamExpr.const(1.0)
    if len(arg.terms) != 1 or arg.terms[0][2]:
        raise ValueError("exp() argument must be a single coefficient*monomial term")
    c, mono, _ = arg.terms[0]
    if not mono:
        return ParamExpr.const(cmath.exp(c))
    return ParamExpr.from_terms([(1.0, (), ((c, mono),))])


def exp_poly(arg: ParamExpr) -> ParamExpr:
    """``exp`` of a polynomial, as a product of single-term exponentials."""
    out = ParamExpr.const(1.0)
    for term in _as_expr(arg).terms:
        out = out * exp_of(ParamExpr((term,)))
    return out


def conj_keeping(e: ParamExpr, keep: Iterable[str] = ()) -> ParamExpr:
    """Conjugate coefficients, keep analyticity in ``keep``, tag every other name."""
    keep = set(keep)

    def tag(mono: Monomial) -> Monomial:
        return tuple((n if base_name(n) in keep else toggle_conj(n), k) for n, k in mono)

    return ParamExpr.from_terms(
        (c.conjugate(), tag(m), tuple((d.conjugate(), tag(em)) for d, em in exps))
        for c, m, exps in e.terms
    )


def unused_keep(e: ParamExpr, keep: Iterable[str]) -> set[str]:
    """Names in ``keep`` that do not occur in ``e`` (they are ignored)."""
    present = {base_name(n) for n in e.names}
    return set(keep) - present


def re_keeping(e: ParamExpr, keep: Iterable[str] = ()) -> ParamExpr:
    return (e + conj_keeping(e, keep)) / 2


def im_keeping(e: ParamExpr, keep: Iterable[str] = ()) -> ParamExpr:
    return (e - conj_keeping(e, keep)) / 2j


def is_keep_real(e: ParamExpr, keep: Iterable[str] = ()) -> bool:
    return conj_keeping(e, keep) == e


def _lookup(name: str, assignment: Mapping[str, complex]):
    if name in assignment:
        return assignment[name]
    if name.endswith(CONJ_TAG) and base_name(name) in assignment:
        return np.conj(assignment[base_name(name)])
    raise UnboundParameterError([name])


def evaluate(e: ParamExpr, assignment: Mapping[str, complex]):
    """Numeric value of ``e``; tagged names default to the conjugate of their base.

    Values may be numpy arrays, in which case evaluation broadcasts.
    """
    missing = {
        n
        for n in e.names
        if n not in assignment
        and not (n.endswith(CONJ_TAG) and base_name(n) in assignment)
    }
    if missing:
        raise UnboundParameterError(missing)

    def mono_value(mono: Monomial):
        v = 1.0
        for n, k in mono:
            v = v * _lookup(n, assignment) ** k
        return v

    total = 0j
    for c, mono, exps in e.terms:
        v = c * mono_value(mono)
        for d, em in exps:
            v = v * np.exp(d * mono_value(em))
        total = total + v
    return total


# -- s-expression text format -------------------------------------------------

_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def _tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text)


def _number(tok: str):
    try:
        return complex(float(tok))
    except ValueError:
        return None


def parse(text: str) -> ParamExpr:
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty expression")
    expr, pos = _parse_at(tokens, 0)
    if pos != len(tokens):
        raise ParseError(f"trailing tokens after position {pos}: {tokens[pos:]}")
    return expr


def _parse_at(tokens: list[str], pos: int) -> tuple[ParamExpr, int]:
    if pos >= len(tokens):
        raise ParseError("unexpected end of input")
    tok = tokens[pos]
    if tok == ")":
        raise ParseError(f"unexpected ')' at token {pos}")
    if tok != "(":
        num = _number(tok)
        return (ParamExpr.const(num) if num is not None else ParamExpr.symbol(tok)), pos + 1
    if pos + 1 >= len(tokens):
        raise ParseError("unexpected end of input")
    op = tokens[pos + 1]
    pos += 2
    if op == "c":
        re_, im_ = _number(tokens[pos]), _number(tokens[pos + 1])
        if re_ is None or im_ is None or tokens[pos + 2] != ")":
            raise ParseError("(c RE IM) expects two numbers")
        return ParamExpr.const(re_.real + 1j * im_.real), pos + 3
    args = []
    while pos < len(tokens) and tokens[pos] != ")":
        if op == "^" and len(args) == 1:
            k = _number(tokens[pos])
            if k is None or k.real != int(k.real) or k.real < 0:
                raise ParseError(f"(^ expr INT) expects a non-negative integer, got {tokens[pos]!r}")
            args.append(int(k.real))
            pos += 1
            continue
        sub, pos = _parse_at(tokens, pos)
        args.append(sub)
    if pos >= len(tokens):
        raise ParseError("missing ')'")
    pos += 1
    if op == "+":
        out = ParamExpr()
        for a in args:
            out = out + a
        return out, pos
    if op == "*":
        out = ParamExpr.const(1.0)
        for a in args:
            out = out * a
        return out, pos
    if op == "-":
        if not args:
            raise ParseError("(-) needs at least one argument")
        if len(args) == 1:
            return -args[0], pos
        out = args[0]
        for a in args[1:]:
            out = out - a
        return out, pos
    if op == "^":
        if len(args) != 2:
            raise ParseError("(^ expr INT) takes two arguments")
        return args[0] ** args[1], pos
    if op == "exp":
        if len(args) != 1:
            raise ParseError("(exp expr) takes one argument")
        return exp_of(args[0]), pos
    raise ParseError(f"unknown operator {op!r}")


def _fmt_c(c: complex) -> str:
    return f"(c {float(c.real)!r} {float(c.imag)!r})"


def _fmt_mono(mono: Monomial) -> list[str]:
    return [n if k == 1 else f"(^ {n} {k})" for n, k in mono]


def to_sexpr(e: ParamExpr) -> str:
    parts = []
    for c, mono, exps in e.terms:
        factors = [_fmt_c(c)] + _fmt_mono(mono)
        for d, em in exps:
            factors.append(f"(exp (* {_fmt_c(d)} {' '.join(_fmt_mono(em))}))")
        parts.append(f"(* {' '.join(factors)})")
    return f"(+ {' '.join(parts)})" if parts else "(+)"
