"""Segre sets N_j at the origin of normal coordinates.

N_j is parametrized by Lambda in C^{jn}, Lambda -> (z, v^j(Lambda)), using the
recursions with w = tau + q(z, chi, tau) and tau = w + qbar(chi, z, w).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .exactalg import GaussianRational, Poly, Series, generic_rank, resultant
from .normalform import NormalModel


def _pz(z: str, l: int) -> str:
    return f"{z}#{l}"


def param_names(m: NormalModel, j: int) -> tuple:
    """Parameter names of the j-th map, in the order (z, z^1.., chi^1..)."""
    if j == 0:
        return ()
    k, odd = divmod(j, 2)
    nz = k if odd else k - 1
    names = list(m.zs)
    for l in range(1, nz + 1):
        names += [_pz(z, l) for z in m.zs]
    for l in range(1, k + 1):
        names += [_pz(c, l) for c in m.chis]
    return tuple(names)


@dataclass
class SegreParam:
    j: int
    params: tuple
    v: tuple
    order: int | None

    def image(self) -> tuple:
        """(z, v) as polynomials in the parameters."""
        zs = tuple(Poly.var(p, self.params) for p in self.params[: self.n])
        return zs + self.v

    n: int = 0


def segre_param(m: NormalModel, j: int) -> SegreParam:
    if j < 0:
        raise ValueError("j must be >= 0")
    O = m.order
    names = param_names(m, j)
    q = m.q()
    qb = m.qbar()
    zero = [Poly.zero(names) for _ in m.ws]

    def zl(l):
        return [Poly.var(_pz(z, l), names) for z in m.zs]

    def cl(l):
        return [Poly.var(_pz(c, l), names) for c in m.chis]

    def q_at(z, chi, tau):
        sub = dict(zip(m.zs, z))
        sub.update(zip(m.chis, chi))
        sub.update(zip(m.taus, tau))
        return [p.subs(sub, O).with_vars(names) for p in q]

    def qb_at(chi, z, w):
        sub = dict(zip(m.chis, chi))
        sub.update(zip(m.zs, z))
        sub.update(zip(m.ws, w))
        return [p.subs(sub, O).with_vars(names) for p in qb]

    def add(a, b):
        return [(x + y).truncate(O) for x, y in zip(a, b)]

    if j == 0:
        return SegreParam(0, (), tuple(zero), O, m.n)
    zbase = [Poly.var(z, names) for z in m.zs]
    k, odd = divmod(j, 2)
    if odd:
        if k == 0:
            return SegreParam(j, names, tuple(zero), O, m.n)
        w = zero
        tau = None
        for l in range(1, k + 1):
            if l >= 2:
                w = add(tau, q_at(zl(l), cl(l - 1), tau))
            tau = add(w, qb_at(cl(l), zl(l), w))
        v = add(tau, q_at(zbase, cl(k), tau))
    else:
        tau = zero
        for l in range(1, k):
            w = add(tau, q_at(zl(l), cl(l), tau))
            tau = add(w, qb_at(cl(l + 1), zl(l), w))
        v = add(tau, q_at(zbase, cl(k), tau))
    return SegreParam(j, names, tuple(v), O, m.n)


def embed_params(m: NormalModel, j: int, values: dict) -> dict:
    """Parameters of N_{j+1} whose image equals the image of ``values`` under N_j."""
    zero = GaussianRational(0)
    if j == 0:
        return {p: zero for p in param_names(m, 1)}
    out = {z: values[z] for z in m.zs}
    k, odd = divmod(j, 2)
    if odd:
        # odd -> even: prepend chi^1 = 0 and shift chi indices.
        for l in range(1, k + 1):
            for z in m.zs:
                out[_pz(z, l)] = values[_pz(z, l)]
        for c in m.chis:
            out[_pz(c, 1)] = zero
        for l in range(1, k + 1):
            for c in m.chis:
                out[_pz(c, l + 1)] = values[_pz(c, l)]
    else:
        # even -> odd: prepend z^1 = 0 and shift z indices.
        for z in m.zs:
            out[_pz(z, 1)] = zero
        for l in range(1, k):
            for z in m.zs:
                out[_pz(z, l + 1)] = values[_pz(z, l)]
        for l in range(1, k + 1):
            for c in m.chis:
                out[_pz(c, l)] = values[_pz(c, l)]
    return out


@dataclass
class SegreChain:
    point: tuple
    params: list
    dims: list
    j0: int
    orbit_dim: int
    order: int | None
    implicit: dict = field(default_factory=dict)

    @property
    def minimal(self) -> bool:
        return self.orbit_dim == self.N

    N: int = 0

    def to_json(self) -> dict:
        return {
            "dims": self.dims,
            "j0": self.j0,
            "orbit_dim": self.orbit_dim,
            "minimal": self.minimal,
            "kind": "exact" if self.order is None else f"truncated({self.order})",
            "implicit": {str(k): v for k, v in self.implicit.items()},
        }


def segre_dims(m: NormalModel, rng: random.Random | None = None, retries: int = 3) -> SegreChain:
    """Generic ranks d_j of the Segre maps, until they stop growing or fill C^N (depth cap d + 2)."""
    rng = rng or random.Random(0)
    dims = [0]
    params = [segre_param(m, 0)]
    for j in range(1, m.d + 3):
        sp = segre_param(m, j)
        params.append(sp)
        comps = sp.image()
        if m.order is not None:
            comps = tuple(Series(c, m.order) for c in comps)
        if not sp.params:
            dj = 0
        else:
            dj = generic_rank(list(comps), sp.params, rng=rng, retries=retries)
        dims.append(dj)
        if dj == dims[-2] or dj == m.N:
            break
    j0 = 1
    for j in range(1, len(dims)):
        if dims[j] > dims[j - 1]:
            j0 = j
        else:
            break
    origin = tuple(GaussianRational(0) for _ in range(m.N))
    return SegreChain(origin, params, dims, j0, dims[j0], m.order, {}, m.N)


def minimal_via_segre(m: NormalModel, rng: random.Random | None = None) -> bool:
    return segre_dims(m, rng).minimal


# ---------------------------------------------------------------------------
# implicitization for n = 1


class EliminationError(ValueError):
    pass


def _strip_content(p: Poly, keep: tuple = ()) -> Poly:
    """Remove monomial factors (except in ``keep``) and normalize the leading coefficient."""
    if p.is_zero():
        return p
    mins = [0 if v in keep else min(e[i] for e in p.terms) for i, v in enumerate(p.vars)]
    if any(mins):
        p = Poly(p.vars, {tuple(a - b for a, b in zip(e, mins)): c for e, c in p.terms.items()})
    return normalize_equation(p)


def normalize_equation(p: Poly) -> Poly:
    """Scale so the lexicographically last variable's leading term has coefficient 1."""
    best = max(p.terms, key=lambda e: (tuple(reversed(e)), -sum(e)))
    return p.scale(p.terms[best].inverse())


def implicitize(m: NormalModel, j: int, order: tuple | None = None) -> list[Poly] | str:
    """Equations of the Zariski closure of N_j, eliminating parameters by resultants.

    Only available for n = 1 and exact models; returns a string reason otherwise.
    """
    if m.n != 1:
        return "skipped: implicitization needs CR dimension 1"
    if m.order is not None:
        return "skipped: implicitization needs an exact model"
    sp = segre_param(m, j)
    amb = m.zs + m.ws
    z = m.zs[0]
    extra = tuple(p for p in sp.params if p != z)
    allv = amb + extra
    # In the image z is the first parameter itself.
    eqs = []
    for w, v in zip(m.ws, sp.v):
        e = Poly.var(w, allv) - v.rename({}).with_vars(allv)
        if not e.is_zero():
            eqs.append(e)
    elim = list(order) if order is not None else list(reversed(extra))
    for lam in elim:
        with_lam = [e for e in eqs if e.degree_in(lam) > 0]
        without = [e for e in eqs if e.degree_in(lam) == 0]
        if not with_lam:
            continue
        with_lam.sort(key=lambda e: (e.degree_in(lam), len(e)))
        piv = with_lam[0]
        new = []
        for e in with_lam[1:]:
            r = resultant(piv, e, lam)
            if r.is_zero():
                raise EliminationError(f"resultant vanished identically: common factor in {lam}")
            new.append(_strip_content(r, m.ws))
        eqs = without + new
    out = []
    for e in eqs:
        e = _strip_content(e.with_vars(allv).drop_unused().with_vars(amb), m.ws)
        if not e.is_constant() and e not in out:
            out.append(e)
    return out
