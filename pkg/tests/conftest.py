from __future__ import annotations

import sympy

from crinv.cli import load_manifold
from crinv.dsl import parse_expr
from crinv.exactalg import GaussianRational, Poly
from crinv.geometry import conj_name

CORPUS = ("lewy", "ex223", "ex224", "ex315", "ex316", "ex317", "ex35", "r142", "rline", "degen3")


def poly(text: str, vars_) -> Poly:
    """Polynomial from DSL text; conj(x) is allowed for any x in vars_."""
    vars_ = tuple(vars_)
    base = {v[5:-1] if v.startswith("conj(") else v for v in vars_}
    swap = {}
    for v in base:
        swap[v] = conj_name(v)
        swap[conj_name(v)] = v
    allowed = set(vars_) | set(swap)
    return parse_expr(text, allowed, swap).to_poly(vars_)


def spec(name: str):
    return load_manifold(name)


def sym_name(v: str) -> str:
    return v.replace("conj(", "c_").replace(")", "")


def to_sympy(p: Poly):
    """Independent reading of a Poly as a sympy expression."""
    syms = [sympy.Symbol(sym_name(v)) for v in p.vars]
    out = sympy.Integer(0)
    for e, c in p.terms.items():
        term = sympy.Rational(c.re.numerator, c.re.denominator) + sympy.I * sympy.Rational(c.im.numerator, c.im.denominator)
        for s, k in zip(syms, e):
            term *= s**k
        out += term
    return sympy.expand(out)


def gq(re, im=0) -> GaussianRational:
    return GaussianRational(re, im)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
