"""Weighted homogeneous models, real-valued holomorphic witnesses and the
nonalgebraic self-maps they produce.

A homogeneous model in triangular form has rows w_j = tau_j + q_j with q_j a
weighted homogeneous polynomial in (z, chi, tau_1, ..., tau_{j-1}) of degree
m_j, the weight of w_j.  A holomorphic polynomial h that is real on M gives
the self-maps Z_j -> exp(nu_j * s * h(Z)) * Z_j.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Sequence

from .exactalg import ONE, ZERO, GaussianRational, I, Poly, WeightVector, gr, matrix_rank, nullspace
from .finitetype import is_minimal
from .geometry import ManifoldSpec, PointQ, conj_name
from .mapcheck import ESeries, MapCheck, MapSpec, SeriesNode, Var, exp, first_bad, graph_env, lift, verify_map
from .nondegen import VectorFieldSpec, witness_is_tangent
from .normalform import NormalModel


class HomogeneityError(ValueError):
    pass


class AnsatzError(ValueError):
    pass


@dataclass(frozen=True)
class HomogeneousModel:
    base: NormalModel
    weights: WeightVector
    r: int
    degrees: tuple

    @property
    def m(self) -> tuple:
        w = self.weights.as_dict()
        return tuple(w[v] for v in self.base.ws)

    def projection(self, j: int) -> NormalModel:
        """M^j: the first j - 1 rows, a model in C^{n + j - 1}."""
        b = self.base
        k = j - 1
        return NormalModel(b.n, k, b.Q[:k], b.zs, b.ws[:k], b.order, {"projection": j})

    def to_json(self) -> dict:
        return {"r": self.r, "degrees": list(self.degrees), "weights": self.weights.as_dict()}


def _weights_for(m: NormalModel, w: WeightVector) -> dict:
    names = w.names or (m.zs + m.ws)
    wd = dict(zip(names, w.weights))
    missing = [v for v in m.zs + m.ws if v not in wd]
    if missing:
        raise ValueError(f"no weight for {missing}")
    for a, b in zip(m.zs + m.ws, m.chis + m.taus):
        wd[b] = wd[a]
    return wd


def _mono(p: Poly, e) -> str:
    return str(Poly._raw(p.vars, {e: p.terms[e]}))


def _weight(e, vars_, wd) -> int:
    return sum(k * wd[v] for v, k in zip(vars_, e))


def check_homogeneous(m: NormalModel, w: WeightVector) -> HomogeneousModel:
    """Triangular, weighted homogeneous rows; a truncated model can only be refuted."""
    wd = _weights_for(m, w)
    degrees = []
    r = 0
    for j, q in enumerate(m.q()):
        allowed = set(m.zs + m.chis + m.taus[:j])
        for e, _ in q.sorted_terms():
            bad = [v for v, k in zip(q.vars, e) if k and v not in allowed]
            if bad:
                raise HomogeneityError(f"row {j + 1} leaves the triangular form: monomial {_mono(q, e)}")
        mj = wd[m.ws[j]]
        degrees.append(mj)
        if q.is_zero():
            continue
        r += 1
        for e, _ in q.sorted_terms():
            if _weight(e, q.vars, wd) != mj:
                raise HomogeneityError(
                    f"row {j + 1} is not weighted homogeneous of degree {mj}: monomial {_mono(q, e)} has weight {_weight(e, q.vars, wd)}"
                )
    if m.order is not None:
        # The known jet passed, but the tail is unknown.
        raise HomogeneityError("an exact model is required")
    return HomogeneousModel(m, WeightVector(tuple(wd[v] for v in m.zs + m.ws), m.zs + m.ws), r, tuple(degrees))


def _last_nonflat(hm: HomogeneousModel) -> int:
    last = 0
    for j, q in enumerate(hm.base.q()):
        if not q.is_zero():
            last = j + 1
    return last


def condition_231(hm: HomogeneousModel, length_max: int = 8) -> dict:
    """Minimality of each projection M^j at 0, j = 2 .. r + 1 (r: last nonflat row)."""
    out = {}
    for j in range(2, _last_nonflat(hm) + 2):
        out[j] = is_minimal(hm.projection(j), None, length_max).minimal
    return out


# ---------------------------------------------------------------------------
# extraction of the homogeneous model by scaling


@dataclass(frozen=True)
class ScaledModel:
    model: HomogeneousModel
    scaling: dict
    dropped: tuple


def scale_model(m: NormalModel, w: WeightVector) -> ScaledModel:
    """Keep the weight-m_j part of each row; everything else must have higher weight.

    The scaling z = eps*z~, w_j = eps^{m_j}*w~_j sends the dropped terms to 0
    with eps.
    """
    wd = _weights_for(m, w)
    rows = []
    dropped = []
    for j, (Q, q) in enumerate(zip(m.Q, m.q())):
        mj = wd[m.ws[j]]
        keep = {}
        for e, c in q.sorted_terms():
            wt = _weight(e, q.vars, wd)
            if wt < mj:
                raise HomogeneityError(f"remainder not higher weight: row {j + 1}, monomial {_mono(q, e)} has weight {wt} < {mj}")
            if wt == mj:
                keep[e] = c
            else:
                dropped.append((j + 1, _mono(q, e)))
        if m.order is not None and mj > m.order:
            raise HomogeneityError(f"row {j + 1}: weight {mj} exceeds the jet order {m.order}")
        rows.append(Poly.var(m.taus[j], m.mvars) + Poly(q.vars, keep))
    base = NormalModel(m.n, m.d, tuple(rows), m.zs, m.ws, None, {"scaled_from": m.frame.get("name", "")})
    hm = check_homogeneous(base, WeightVector(tuple(wd[v] for v in m.zs + m.ws), m.zs + m.ws))
    scaling = {v: f"eps^{wd[v]}*{v}~" if wd[v] != 1 else f"eps*{v}~" for v in m.zs + m.ws}
    return ScaledModel(hm, scaling, tuple(dropped))


# ---------------------------------------------------------------------------
# real-valued witnesses


def _split_real(polys: Sequence[Poly]) -> list[dict]:
    """Real linear equations (as sparse rows over the unknown indices) from complex coefficients."""
    rows: dict = {}
    for i, p in enumerate(polys):
        for e, c in p.terms.items():
            if c.re:
                rows.setdefault((e, 0), {})[i] = GaussianRational(c.re)
            if c.im:
                rows.setdefault((e, 1), {})[i] = GaussianRational(c.im)
    return list(rows.values())


def _normalize_real(h: Poly) -> Poly:
    """Scale by a nonzero real number: leading coefficient 1, or -i when it is imaginary."""
    _, c = h.sorted_terms()[0]
    if not c.im:
        return h.scale(GaussianRational(1 / c.re))
    if not c.re:
        return h.scale(GaussianRational(-1 / c.im))
    return h.scale(GaussianRational(1 / c.re))


def _degree_monomials(names: tuple, lo: int, hi: int) -> list[tuple]:
    out = []
    for d in range(lo, hi + 1):
        for combo in combinations_with_replacement(range(len(names)), d):
            e = [0] * len(names)
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


def _model_env(m: NormalModel):
    """Values of (z, w, chi, tau) on the complexification, parametrized by (z, chi, tau)."""
    mv = m.mvars
    env = {}
    for v in m.zs + m.chis + m.taus:
        env[v] = Poly.var(v, mv)
    for w, Q in zip(m.ws, m.Q):
        env[w] = Q
    return env


def _weighted_witness(hm: HomogeneousModel, l: int, order: int) -> Poly:
    """h = w_l - f(w_1..w_{l-1}) with f weighted homogeneous of weight m_l."""
    m = hm.base
    wd = hm.weights.as_dict()
    ml = wd[m.ws[l - 1]]
    lower = m.ws[: l - 1]
    monos = [e for e in _degree_monomials(lower, 1, ml) if _weight(e, lower, wd) == ml]
    env = _model_env(m)
    mv = m.mvars
    O = m.order

    def mono_on_M(e, conj: bool) -> Poly:
        p = Poly.const(1, mv)
        for v, k in zip(lower, e):
            if k:
                x = Poly.var(conj_name(v), mv) if conj else env[v]
                p = p.mul(x.pow(k, O), O)
        return p

    # unknowns: re and im of each coefficient of f
    polys = []
    for e in monos:
        a, b = mono_on_M(e, False), mono_on_M(e, True)
        polys.append(b - a)  # real part x: -x*w^e + x*tau^e
        polys.append((a + b).scale(-I))  # imaginary part y: -i*y*w^e - i*y*tau^e
    const = (env[m.ws[l - 1]] - Poly.var(m.taus[l - 1], mv)).truncate(O)
    polys.append(const)
    rows = _split_real(polys)
    kern = [v for v in nullspace(rows, len(polys)) if v.get(len(polys) - 1)]
    if not kern:
        raise AnsatzError(f"ansatz degree insufficient (searched weight {ml} in w_1..w_{l - 1})")
    vec = kern[0]
    s = vec[len(polys) - 1]
    zw = m.zs + m.ws
    h = Poly.var(m.ws[l - 1], zw)
    for i, e in enumerate(monos):
        x = vec.get(2 * i, ZERO) / s
        y = vec.get(2 * i + 1, ZERO) / s
        coef = GaussianRational(x.re, y.re)
        if coef:
            h = h - Poly._raw(zw, {_embed(e, lower, zw): coef})
    return h


def _embed(e, sub: tuple, full: tuple) -> tuple:
    d = dict(zip(sub, e))
    return tuple(d.get(v, 0) for v in full)


def _general_witness(spec: ManifoldSpec, p: PointQ, degree: int, order: int) -> Poly | None:
    """Least-degree holomorphic polynomial without constant term that is real on M near p."""
    env, free, o = graph_env(spec, p, order)
    K = order if o is None else min(o, order)
    coords = spec.coords
    for D in range(1, degree + 1):
        monos = _degree_monomials(coords, 1, D)
        polys = []
        for e in monos:
            a = ESeries.const(1, free)
            b = ESeries.const(1, free)
            for v, k in zip(coords, e):
                if k:
                    a = a * env[v] ** k
                    b = b * env[conj_name(v)] ** k
            a, b = a.truncate(K).plain(), b.truncate(K).plain()
            polys.append(a - b)
            polys.append((a + b).scale(I))
        kern = nullspace(_split_real(polys), len(polys))
        if not kern:
            continue

        def as_poly(vec):
            terms = {}
            for i, e in enumerate(monos):
                c = GaussianRational(vec.get(2 * i, ZERO).re, vec.get(2 * i + 1, ZERO).re)
                if c:
                    terms[e] = c
            return Poly(coords, terms)

        cands = [as_poly(v) for v in kern]
        cands = [c for c in cands if not c.is_zero()]
        best = min(cands, key=lambda h: (h.degree(), len(h), [(-sum(e), tuple(-x for x in e)) for e in h.terms]))
        return _normalize_real(best)
    return None


def real_witness(model, *, point: PointQ | None = None, degree: int = 3, order: int = 8, length_max: int = 8):
    """A holomorphic polynomial h, real on M, or the string "minimal".

    For a HomogeneousModel: h = w_1 when q_1 = 0; otherwise h = w_l - f where l
    is least with M^{l+1} not minimal and f solves the weighted ansatz.  For a
    NormalModel or ManifoldSpec: least-degree ansatz over all holomorphic
    monomials (degree <= ``degree``) near the base point; None if none exists.
    """
    if isinstance(model, HomogeneousModel):
        m = model.base
        if m.q()[0].is_zero():
            return Poly.var(m.ws[0], m.zs + m.ws)
        for l in range(1, m.d + 1):
            if is_minimal(model.projection(l + 1), None, length_max).minimal is True:
                continue
            return _weighted_witness(model, l, order)
        return "minimal"
    spec = model.spec() if isinstance(model, NormalModel) else model
    p = point or spec.basepoint or PointQ((ZERO,) * spec.N)
    return _general_witness(spec, p, degree, order)


@dataclass(frozen=True)
class RealCheck:
    ok: bool
    order: int | None
    monomial: str = ""
    degree: int | None = None

    def __bool__(self):
        return self.ok


def verify_real_on_M(h, spec, order: int = 8, point: PointQ | None = None) -> RealCheck:
    """h(Z) - hbar(zeta) vanishes on the complexification near the point, to the given order."""
    spec = spec.spec() if isinstance(spec, NormalModel) else spec
    h = lift(h)
    p = point or spec.basepoint or PointQ((ZERO,) * spec.N)
    env, free, o = graph_env(spec, p, order)
    K = order if o is None else min(o, order)
    r = (h.evaluate(env, K, free) - h.bar(spec.swap()).evaluate(env, K, free)).truncate(K)
    if r.is_zero():
        return RealCheck(True, K)
    mono, deg, _ = first_bad(r)
    return RealCheck(False, K, mono, deg)


def ideal_membership(P: Poly, spec: ManifoldSpec, degree: int = 0) -> list[Poly] | None:
    """Multipliers g_j of total degree <= ``degree`` with P = sum g_j rho_j exactly, or None."""
    allv = spec.allvars
    P = P.with_vars(allv)
    monos = _degree_monomials(allv, 0, degree)
    cols = []
    for r in spec.rho:
        for e in monos:
            cols.append(Poly._raw(allv, {e: ONE}).mul(r))
    cols.append(-P)
    rows: dict = {}
    for i, c in enumerate(cols):
        for e, v in c.terms.items():
            rows.setdefault(e, {})[i] = v
    last = len(cols) - 1
    kern = [v for v in nullspace(list(rows.values()), len(cols)) if v.get(last)]
    if not kern:
        return None
    vec = kern[0]
    s = vec[last]
    out = []
    for j in range(spec.d):
        terms = {}
        for k, e in enumerate(monos):
            c = vec.get(j * len(monos) + k, ZERO)
            if c:
                terms[e] = c / s
        out.append(Poly(allv, terms))
    return out


# ---------------------------------------------------------------------------
# self-maps


@dataclass
class ExpTwist:
    h: Poly
    factors: tuple
    multiplier: GaussianRational
    coords: tuple
    basepoint: PointQ
    check: MapCheck | None = None
    jacobian_invertible: bool | None = None

    @property
    def nonalgebraic(self) -> bool:
        return not self.h.is_constant() and any(self.factors)

    def to_map(self) -> MapSpec:
        hx = lift(self.h)
        comps = []
        for v, nu in zip(self.coords, self.factors):
            comps.append(Var(v) if not nu else exp(hx * (self.multiplier * nu)) * Var(v))
        return MapSpec(self.coords, tuple(comps), self.basepoint, self.coords, "twist", self.nonalgebraic)

    def to_json(self) -> dict:
        return {
            "h": str(self.h),
            "factors": list(self.factors),
            "multiplier": str(self.multiplier),
            "map": [str(c) for c in self.to_map().components],
            "nonalgebraic": self.nonalgebraic,
            "tangent": None if self.check is None else self.check.to_json(),
            "jacobian_invertible": self.jacobian_invertible,
        }


def jacobian_at(H: MapSpec, point: PointQ | None = None) -> list[list[GaussianRational]]:
    """Linear part of each component at the point, with its constant exponential factor removed."""
    point = point or H.base()
    vars_ = H.source
    base = dict(zip(vars_, point.coords))
    env = {v: ESeries.of(Poly.var(v, vars_) + base[v]) for v in vars_}
    rows = []
    for c in H.components:
        _, p = c.evaluate(env, 1, vars_).single()
        rows.append([p.coeff({v: 1}) for v in vars_])
    return rows


def nonalgebraic_selfmap(
    target,
    h,
    factors: Sequence[int] | None = None,
    multiplier=1,
    order: int = 10,
    basepoint: PointQ | None = None,
    jacobian_point: PointQ | None = None,
    recenter: bool = True,
) -> ExpTwist:
    """H_j = exp(nu_j * s * h) * Z_j, checked tangent to order ``order`` and with invertible Jacobian.

    ``factors`` defaults to the weights of a HomogeneousModel.  With
    ``recenter`` the real constant h(p) is subtracted so that H(p) = p.
    """
    if isinstance(target, HomogeneousModel):
        spec = target.base.spec()
        if factors is None:
            factors = target.weights.weights
    elif isinstance(target, NormalModel):
        spec = target.spec()
    else:
        spec = target
    if factors is None:
        raise ValueError("factors are required unless the target carries weights")
    coords = spec.coords
    p = basepoint or spec.basepoint or PointQ((ZERO,) * spec.N)
    h = h if isinstance(h, Poly) else lift(h).to_poly(coords)
    h = h.with_vars(coords)
    hp = h.eval(dict(zip(coords, p.coords)))
    if recenter and hp:
        if not hp.is_real():
            raise ValueError("h is not real at the base point")
        h = h - Poly.const(hp, coords)
    tw = ExpTwist(h, tuple(int(x) for x in factors), gr(multiplier), coords, p)
    H = tw.to_map()
    chk = verify_map(H, spec, order=order)
    if not chk.ok:
        raise ValueError(f"tangency residual at order {chk.degree}: {chk.monomial}")
    tw.check = chk
    tw.jacobian_invertible = matrix_rank(jacobian_at(H, jacobian_point or p)) == len(coords)
    return tw


@dataclass
class DegenerateMap:
    map: MapSpec
    exact: bool
    order: int | None
    nonalgebraic: bool
    check: MapCheck | None = None
    note: str = ""

    def to_json(self) -> dict:
        return {
            "map": self.map.to_json(),
            "exact": self.exact,
            "order": self.order,
            "nonalgebraic": self.nonalgebraic,
            "tangent": None if self.check is None else self.check.to_json(),
            "note": self.note,
        }


def degenerate_selfmap(target, witness: VectorFieldSpec | None = None, f=None, order: int = 10) -> DegenerateMap:
    """Nonalgebraic self-maps from a non-generic or holomorphically degenerate set.

    Without a witness the set must lie in {Z_N = 0}; H = (Z_1, .., Z_N exp(Z_N))
    is then the identity on it.  With a tangent witness X (normal coordinates
    of a model) the map is the time-one flow of f*X, by default f = exp(w_1).
    """
    if witness is None:
        spec = target.spec() if isinstance(target, NormalModel) else target
        coords = spec.coords
        last = coords[-1]
        if ideal_membership(Poly.var(last, spec.allvars), spec, 1) is None:
            raise ValueError(f"set not contained in {{{last} = 0}}")
        comps = [Var(v) for v in coords[:-1]] + [Var(last) * exp(Var(last))]
        H = MapSpec(coords, tuple(comps), spec.basepoint, coords, "hyperplane", True)
        # Exactly the identity once Z_N = 0.
        env = {v: ESeries.of(Poly.var(v, coords)) for v in coords}
        env[last] = ESeries({}, coords)
        for v, c in zip(coords, comps):
            got = c.evaluate(env, None, coords)
            if not (got - env[v]).is_zero():
                raise AssertionError("hyperplane map does not fix the set")
        return DegenerateMap(H, True, None, True, MapCheck(True, None), "identity on {Z_N = 0}")
    if not isinstance(target, NormalModel):
        raise ValueError("a witness field needs a normal model")
    m = target
    if not witness_is_tangent(m, witness, None if m.order is None else m.order - 1):
        raise ValueError("witness not tangent")
    coords = m.zs + m.ws
    f = exp(Var(m.ws[0])) if f is None else lift(f)
    env = {v: ESeries.of(Poly.var(v, coords)) for v in coords}
    fe = f.evaluate(env, order, coords)
    coeffs = {v: ESeries.of(c.with_vars(coords)) * fe for v, c in zip(witness.vars, witness.coeffs) if c}

    def apply(g: ESeries) -> ESeries:
        acc = ESeries({}, coords, order)
        for v, c in coeffs.items():
            acc = acc + c * g.diff(v)
        return acc.truncate(order)

    comps = []
    for v in coords:
        term = env[v].truncate(order)
        total = term
        for k in range(1, order + 1):
            term = apply(term).scale(GaussianRational(1) / k)
            if term.is_zero():
                break
            total = total + term
        if total.groups == env[v].groups:
            comps.append(Var(v))
        else:
            comps.append(SeriesNode(total, tuple((x, ZERO) for x in coords)))
    H = MapSpec(coords, tuple(comps), None, coords, "flow", not f.is_polynomial())
    chk = verify_map(H, m.spec(), order=order)
    if not chk.ok:
        raise ValueError(f"tangency residual at order {chk.degree}: {chk.monomial}")
    return DegenerateMap(H, False, order, H.nonalgebraic, chk, "time-one flow of f*X")
