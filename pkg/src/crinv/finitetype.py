"""Hörmander numbers and minimality from iterated brackets of CR vector fields.

The complexification is parametrized by (z, chi, tau) with w = Q(z, chi, tau).
There the (1,0) fields are d/dz_j and the (0,1) fields are
d/dchi_j + sum_k Qbar_{k,chi_j}(chi, z, Q) d/dtau_k.  Complex dimensions of
their bracket spans at the origin equal the real dimensions of the filtration
E_0 within T_0 M.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .exactalg import ZERO, GaussianRational, Poly, SparseBasis, formal_line_eval, random_gaussian, series_matrix_rank
from .geometry import PointQ
from .normalform import NormalModel, solve_normal


@dataclass
class TypeReport:
    point: PointQ
    filtration_dims: list
    hormander: list
    with_multiplicity: list
    r: int
    minimal: bool
    bracket_bound: int
    status: str
    certificate: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "point": self.point.to_json(),
            "filtration_dims": self.filtration_dims,
            "hormander": [list(h) for h in self.hormander],
            "with_multiplicity": self.with_multiplicity,
            "r": self.r,
            "minimal": self.minimal,
            "bracket_bound": self.bracket_bound,
            "status": self.status,
            "certificate": self.certificate,
        }


class _Field:
    __slots__ = ("coeffs", "word", "known")

    def __init__(self, coeffs, word, known):
        self.coeffs = coeffs
        self.word = word
        self.known = known

    def vector(self):
        out = {}
        for i, c in enumerate(self.coeffs):
            for e, v in c.terms.items():
                out[(i, e)] = v
        return out

    def value(self):
        return [c.constant_term() for c in self.coeffs]


def _bracket(X: _Field, Y: _Field, vars_: tuple) -> _Field:
    known = min(X.known, Y.known) - 1
    out = []
    for k in range(len(vars_)):
        acc = Poly.zero(vars_)
        for v, xv, yv in zip(vars_, X.coeffs, Y.coeffs):
            if xv:
                d = Y.coeffs[k].diff(v)
                if d:
                    acc = acc + xv.mul(d, known)
            if yv:
                d = X.coeffs[k].diff(v)
                if d:
                    acc = acc - yv.mul(d, known)
        out.append(acc.truncate(known))
    return _Field(out, f"[{X.word},{Y.word}]", known)


def generators(m: NormalModel, jet: int, mix=None) -> tuple[tuple, list[_Field]]:
    vars_ = m.mvars
    zero = Poly.zero(vars_)
    Qb = m.Qbar()
    back = dict(zip(m.ws, m.Q))
    fields = []
    for j, zj in enumerate(m.zs):
        c = [zero] * len(vars_)
        c[vars_.index(zj)] = Poly.const(1, vars_)
        fields.append(_Field(c, f"Lbar{j + 1}", jet))
    known = jet if m.order is None else min(jet, m.order - 1)
    for j, cj in enumerate(m.chis):
        c = [zero] * len(vars_)
        c[vars_.index(cj)] = Poly.const(1, vars_)
        for k, tk in enumerate(m.taus):
            coef = Qb[k].diff(cj).subs(back, known).with_vars(vars_)
            c[vars_.index(tk)] = coef.truncate(known)
        fields.append(_Field(c, f"L{j + 1}", known))
    if mix is not None:
        # Recombine each family with a constant invertible matrix.
        n = m.n
        out = []
        for block in (fields[:n], fields[n:]):
            for row in mix:
                c = [zero] * len(vars_)
                for a, f in zip(row, block):
                    c = [x + y.scale(a) for x, y in zip(c, f.coeffs)]
                out.append(_Field(c, "(" + "+".join(f.word for f in block) + ")", min(f.known for f in block)))
        fields = out
    return vars_, fields


def _module_rank(fields: list[_Field], rng: random.Random, vars_: tuple) -> int:
    direction = {v: random_gaussian(rng, 1000) for v in vars_}
    rows = [[formal_line_eval(c, direction, f.known) for c in f.coeffs] for f in fields]
    return series_matrix_rank(rows)[0]


def hormander(
    m: NormalModel,
    p: PointQ | None = None,
    length_max: int = 8,
    rng: random.Random | None = None,
    mix=None,
    order: int = 8,
) -> TypeReport:
    """Bracket filtration at p (default: the model origin) up to bracket length length_max."""
    rng = rng or random.Random(0)
    if p is not None and any(p.coords):
        m = solve_normal(m.spec(), p, order)
    p = PointQ((ZERO,) * m.N)
    jet = length_max + 2
    vars_, gens = generators(m, jet, mix)
    full = 2 * m.n + m.d
    values = SparseBasis()
    dims = []
    certificate = []
    for g in gens:
        values.add(dict(enumerate(g.value())))
    dims.append(len(values))
    hnums = []
    all_fields = list(gens)
    level = list(gens)
    status = "full" if dims[0] == full else "truncated"
    flat_since = 0
    for length in range(2, length_max + 1):
        if dims[-1] == full:
            break
        jets = SparseBasis()
        new_level = []
        for g in gens:
            for b in level:
                br = _bracket(g, b, vars_)
                if br.known < 0:
                    continue
                if jets.add(br.vector()):
                    new_level.append(br)
        before = len(values)
        for br in new_level:
            if values.add(dict(enumerate(br.value()))):
                certificate.append(br.word)
        dims.append(len(values))
        if len(values) > before:
            hnums.append((length, len(values) - before))
            flat_since = 0
        else:
            flat_since += 1
        all_fields.extend(new_level)
        level = new_level
        if dims[-1] == full:
            status = "full"
            break
        if not new_level:
            status = "stabilized"
            break
        if flat_since >= 2 and _module_rank(all_fields, rng, vars_) == dims[-1]:
            status = "stabilized"
            break
    if dims[-1] == full:
        status = "full"
    if m.n == 0:
        status = "stabilized" if full else "full"
    mult = [mu for mu, l in hnums for _ in range(l)]
    r = len(mult)
    return TypeReport(
        point=p,
        filtration_dims=dims,
        hormander=hnums,
        with_multiplicity=mult,
        r=r,
        minimal=(r == m.d),
        bracket_bound=length_max,
        status=status,
        certificate=certificate if r == m.d else [],
    )


@dataclass(frozen=True)
class MinimalityVerdict:
    minimal: bool | str
    certificate: list
    subspace_dim: int

    def __bool__(self):
        return self.minimal is True


def is_minimal(m: NormalModel, p: PointQ | None = None, length_max: int = 8) -> MinimalityVerdict:
    rep = hormander(m, p, length_max)
    if rep.minimal:
        return MinimalityVerdict(True, rep.certificate, rep.filtration_dims[-1])
    if rep.status == "stabilized":
        return MinimalityVerdict(False, [], rep.filtration_dims[-1])
    return MinimalityVerdict("truncated", [], rep.filtration_dims[-1])
