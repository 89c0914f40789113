"""Real algebraic sets given by complexified defining polynomials.

A set A in C^N is described by real-valued polynomials rho_j(Z, conj Z).  We
store each rho_j as a polynomial in 2N independent variables (Z, zeta), where
the conjugate of the variable ``v`` is named ``conj(v)``.  The complexification
is the complex variety {rho(Z, zeta) = 0} in C^2N.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

from .exactalg import (
    ONE,
    ZERO,
    GaussianRational,
    Poly,
    TSeries,
    WeightVector,
    formal_line_eval,
    gr,
    invert_matrix,
    matrix_rank,
    random_gaussian,
    series_matrix_rank,
    solve_linear,
)


def conj_name(v: str) -> str:
    return f"conj({v})"


class RealityError(ValueError):
    pass


class PointError(ValueError):
    pass


@dataclass(frozen=True)
class PointQ:
    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(gr(c) for c in self.coords))

    def __len__(self):
        return len(self.coords)

    def conj(self) -> "PointQ":
        return PointQ(tuple(c.conj() for c in self.coords))

    def to_json(self) -> list:
        return [c.to_json() for c in self.coords]


@dataclass(frozen=True)
class ManifoldSpec:
    """d real defining polynomials in (Z, zeta) for a real algebraic set in C^N."""

    N: int
    rho: tuple
    coords: tuple
    weights: WeightVector | None = None
    basepoint: PointQ | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "rho", tuple(self.rho))
        object.__setattr__(self, "coords", tuple(self.coords))
        if len(self.coords) != self.N:
            raise ValueError("coordinate names must match the ambient dimension")
        if not self.rho:
            raise ValueError("at least one defining polynomial is required")
        if any(r.is_zero() for r in self.rho):
            raise ValueError("defining polynomials must be nonzero")
        allvars = self.coords + self.zeta
        object.__setattr__(self, "rho", tuple(r.with_vars(allvars) for r in self.rho))
        if self.basepoint is not None and len(self.basepoint) != self.N:
            raise PointError("basepoint has the wrong number of coordinates")

    @property
    def d(self) -> int:
        return len(self.rho)

    @property
    def zeta(self) -> tuple:
        return tuple(conj_name(v) for v in self.coords)

    @property
    def allvars(self) -> tuple:
        return self.coords + self.zeta

    def swap(self) -> dict[str, str]:
        m = {}
        for v, c in zip(self.coords, self.zeta):
            m[v] = c
            m[c] = v
        return m

    def point_values(self, p: PointQ) -> dict[str, GaussianRational]:
        vals = dict(zip(self.coords, p.coords))
        vals.update(zip(self.zeta, p.conj().coords))
        return vals

    def with_basepoint(self, p: PointQ | None) -> "ManifoldSpec":
        return ManifoldSpec(self.N, self.rho, self.coords, self.weights, p, self.name)


# ---------------------------------------------------------------------------
# reality and involutions


def reality_defect(spec: ManifoldSpec, j: int) -> Poly:
    """bar(rho_j)(Z, zeta) - rho_j(zeta, Z); zero exactly when rho_j is real valued."""
    r = spec.rho[j]
    return (r.bar() - r.rename(spec.swap())).with_vars(spec.allvars)


def validate(spec: ManifoldSpec) -> bool:
    for j in range(spec.d):
        defect = reality_defect(spec, j)
        if not defect.is_zero():
            e, c = defect.sorted_terms()[0]
            mono = Poly._raw(defect.vars, {e: c})
            raise RealityError(f"reality violated at j={j + 1}: offending monomial {mono}")
    if spec.basepoint is not None and not on_set(spec, spec.basepoint):
        raise PointError("basepoint not on set")
    return True


def on_set(spec: ManifoldSpec, p: PointQ) -> bool:
    vals = spec.point_values(p)
    return all(not r.eval(vals) for r in spec.rho)


def sharp(pair: tuple[Sequence, Sequence]) -> tuple[tuple, tuple]:
    """(Z, zeta) -> (conj zeta, conj Z)."""
    Z, zeta = pair
    return tuple(gr(x).conj() for x in zeta), tuple(gr(x).conj() for x in Z)


def star(polys: Sequence[Poly], coords: Sequence[str]) -> list[Poly]:
    """Conjugate the coefficients and trade each variable for its conjugate partner."""
    m = {}
    for v in coords:
        m[v] = conj_name(v)
        m[conj_name(v)] = v
    return [p.bar().rename(m) for p in polys]


# ---------------------------------------------------------------------------
# local solving near a point of the complexification


@dataclass
class LocalGraph:
    """Local parametrization of {rho = 0} near (p, conj p).

    ``subs`` maps every original variable to a polynomial in the free local
    variables (shifted so that the base point is the origin).  Free variables
    keep their names.  ``residual`` holds the equations that could not be
    solved at the point (nonregular points), already reduced.
    """

    solved: tuple
    free: tuple
    subs: dict
    order: int | None
    exact: bool
    residual: tuple = ()

    def reduce(self, f: Poly, order: int | None = None) -> Poly:
        k = self.order if order is None else (order if self.order is None else min(order, self.order))
        return f.subs(self.subs, k).with_vars(self.free)


def _jacobian_at(polys: Sequence[Poly], variables: Sequence[str], point: Mapping[str, GaussianRational]):
    return [[p.diff(v).eval(point) for v in variables] for p in polys]


def choose_pivots(matrix, candidates: Sequence[int]) -> tuple[list[int], list[int]]:
    """Greedy column pivoting in preference order; returns (rows used, columns used)."""
    m = [list(r) for r in matrix]
    used_rows: list[int] = []
    used_cols: list[int] = []
    for col in candidates:
        piv = None
        for r in range(len(m)):
            if r not in used_rows and m[r][col]:
                piv = r
                break
        if piv is None:
            continue
        used_rows.append(piv)
        used_cols.append(col)
        inv = m[piv][col].inverse()
        for r in range(len(m)):
            if r != piv and m[r][col]:
                f = m[r][col] * inv
                m[r] = [x - f * y for x, y in zip(m[r], m[piv])]
    return used_rows, used_cols


def local_graph(
    spec: ManifoldSpec,
    p: PointQ | None = None,
    order: int = 8,
    candidates: Sequence[str] | None = None,
    require_full: bool = False,
) -> LocalGraph:
    """Solve as many defining equations as possible near (p, conj p).

    Variables are chosen from ``candidates`` (default: Z variables from the
    last one backwards, then the conjugate variables) by column pivoting on
    the differential at the point.  The solution is computed by chord
    iteration with the constant inverse Jacobian and reported as exact when it
    satisfies the equations identically.
    """
    p = p or spec.basepoint or PointQ((ZERO,) * spec.N)
    base = spec.point_values(p)
    allv = spec.allvars
    if candidates is None:
        candidates = tuple(reversed(spec.coords)) + tuple(reversed(spec.zeta))
    shift = {v: Poly.var(v, allv) + base[v] for v in allv}
    F = [r.subs(shift).with_vars(allv) for r in spec.rho]
    if any(f.constant_term() for f in F):
        raise PointError("point not on set")
    zero = {v: ZERO for v in allv}
    jac = _jacobian_at(F, allv, zero)
    cand_idx = [allv.index(v) for v in candidates]
    rows, cols = choose_pivots(jac, cand_idx)
    if require_full and len(rows) < spec.d:
        raise PointError("implicit solve failed: differential has deficient rank at p")
    solved = tuple(allv[c] for c in cols)
    free = tuple(v for v in allv if v not in solved)
    eqs = [F[r] for r in rows]
    rest = [F[r] for r in range(len(F)) if r not in rows]
    A = [[jac[r][c] for c in cols] for r in rows]
    Ainv = invert_matrix(A) if A else []
    sol = {v: Poly.zero(free) for v in solved}
    exact = False
    k = len(solved)
    for it in range(order + 2):
        vals = {v: sol[v] for v in solved}
        resid = [e.subs(vals, order).with_vars(free) for e in eqs]
        if all(r.is_zero() for r in resid):
            break
        new = {}
        for i, v in enumerate(solved):
            acc = sol[v]
            for j in range(k):
                if Ainv[i][j]:
                    acc = acc - resid[j].scale(Ainv[i][j])
            new[v] = acc.truncate(order)
        sol = new
    vals = {v: sol[v] for v in solved}
    # A solution reaching the truncation degree is a genuine series; skip the costly exact test.
    short = all(s.degree() < order for s in sol.values() if not s.is_zero())
    exact = short and all(e.subs(vals).is_zero() for e in eqs)
    subs = {}
    for v in allv:
        if v in sol:
            subs[v] = sol[v] + base[v]
        else:
            subs[v] = Poly.var(v, free) + base[v]
    g = LocalGraph(solved, free, subs, None if exact else order, exact)
    g.residual = tuple(r.subs({v: sol[v] for v in solved}, g.order).with_vars(free) for r in rest)
    return g


# ---------------------------------------------------------------------------
# pointwise classification


@dataclass(frozen=True)
class PointClass:
    on_set: bool
    regular: bool
    codim: int
    cr: bool
    generic: bool
    cr_dim: int
    confidence: str = ""

    def to_json(self) -> dict:
        return {
            "on_set": self.on_set,
            "regular": self.regular,
            "codim": self.codim,
            "cr": self.cr,
            "generic": self.generic,
            "cr_dim": self.cr_dim,
            "confidence": self.confidence,
        }


def classify_point(spec: ManifoldSpec, p: PointQ, radius: int = 2, rng: random.Random | None = None) -> PointClass:
    """Regular / CR / generic classification at p.

    Local constancy of the holomorphic rank is tested along a random formal
    curve through (p, conj p) inside the complexification, using jets up to
    ``radius``; the verdict carries that order as its confidence.
    """
    if not on_set(spec, p):
        raise PointError("point not on set")
    rng = rng or random.Random(0)
    vals = spec.point_values(p)
    full = _jacobian_at(spec.rho, spec.allvars, vals)
    rank_full = matrix_rank(full)
    holo = _jacobian_at(spec.rho, spec.coords, vals)
    rank_holo = matrix_rank(holo)
    regular = rank_full == spec.d
    generic = regular and rank_holo == spec.d
    cr = False
    confidence = ""
    if regular:
        if generic:
            cr = True
            confidence = "exact"
        else:
            g = local_graph(spec, p, order=radius + 1)
            direction = {v: random_gaussian(rng, 1000) for v in g.free}
            rows = []
            for r in spec.rho:
                row = []
                for v in spec.coords:
                    entry = g.reduce(r.diff(v), radius)
                    row.append(formal_line_eval(entry, direction, radius))
                rows.append(row)
            near, _ = series_matrix_rank(rows)
            cr = near == rank_holo
            confidence = f"proved-at-jet-order-{radius}" if cr else "rank jumps off the point"
    return PointClass(True, regular, rank_full, cr, generic, spec.N - rank_holo, confidence)


# ---------------------------------------------------------------------------
# random points of the complexification


def linear_solve_set(spec: ManifoldSpec) -> tuple | None:
    """A set of d variables in which every rho_j is affine linear, preferring late variables."""
    order = tuple(reversed(spec.coords)) + tuple(reversed(spec.zeta))
    for subset in combinations(order, spec.d):
        ok = True
        for r in spec.rho:
            idx = [r.vars.index(v) for v in subset]
            for e in r.terms:
                if sum(e[k] for k in idx) > 1:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        rng = random.Random(17)
        pt = {v: random_gaussian(rng, 50) for v in spec.allvars if v not in subset}
        mat, _ = _linear_system(spec, subset, pt)
        if matrix_rank(mat) == spec.d:
            return subset
    return None


def _linear_system(spec: ManifoldSpec, subset: Sequence[str], pt: Mapping[str, GaussianRational]):
    mat, rhs = [], []
    for r in spec.rho:
        red = r.subs(pt)
        row = []
        for v in subset:
            row.append(red.diff(v).eval({w: ZERO for w in red.vars}))
        const = red.eval({w: ZERO for w in red.vars})
        mat.append(row)
        rhs.append(-const)
    return mat, rhs


def random_complexification_points(spec: ManifoldSpec, count: int, rng: random.Random, bound: int = 1000) -> list[dict]:
    """Exact random points (Z, zeta) with rho(Z, zeta) = 0.

    Requires a set of d variables in which the equations are affine linear;
    the other variables are sampled and the linear system is solved exactly.
    """
    subset = linear_solve_set(spec)
    if subset is None:
        raise ValueError(f"{spec.name or 'spec'}: no linear solve set for exact sampling")
    out = []
    while len(out) < count:
        pt = {v: random_gaussian(rng, bound) for v in spec.allvars if v not in subset}
        mat, rhs = _linear_system(spec, subset, pt)
        try:
            sol = solve_linear(mat, rhs)
        except ZeroDivisionError:
            continue
        pt.update(zip(subset, sol))
        out.append(pt)
    return out


def sharp_point(spec: ManifoldSpec, pt: Mapping[str, GaussianRational]) -> dict:
    Z = [pt[v] for v in spec.coords]
    zeta = [pt[v] for v in spec.zeta]
    Z2, zeta2 = sharp((Z, zeta))
    out = dict(zip(spec.coords, Z2))
    out.update(zip(spec.zeta, zeta2))
    return out
