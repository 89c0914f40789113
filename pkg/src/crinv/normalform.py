"""Normal coordinates w = Q(z, chi, tau) for generic manifolds.

A NormalModel stores d polynomials Q_j in the variables (z, chi, tau), where
chi and tau stand for the conjugates of z and w.  The model is exact when Q
is a polynomial solution, otherwise it is a jet known through total degree
``order``.  Normality means Q(z, 0, tau) = Q(0, chi, tau) = tau and reality
means Q(z, chi, Qbar(chi, z, w)) = w.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .exactalg import ONE, ZERO, GaussianRational, I, Poly, invert_matrix, matrix_rank, gr
from .geometry import ManifoldSpec, PointError, PointQ, classify_point, conj_name, local_graph


@dataclass(frozen=True)
class NormalModel:
    n: int
    d: int
    Q: tuple
    zs: tuple
    ws: tuple
    order: int | None = None
    frame: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "Q", tuple(q.with_vars(self.mvars) for q in self.Q))
        if len(self.zs) != self.n or len(self.ws) != self.d or len(self.Q) != self.d:
            raise ValueError("inconsistent normal model dimensions")

    @property
    def kind(self) -> str:
        return "exact" if self.order is None else f"truncated({self.order})"

    @property
    def N(self) -> int:
        return self.n + self.d

    @property
    def chis(self) -> tuple:
        return tuple(conj_name(v) for v in self.zs)

    @property
    def taus(self) -> tuple:
        return tuple(conj_name(v) for v in self.ws)

    @property
    def mvars(self) -> tuple:
        return self.zs + self.chis + self.taus

    @property
    def bvars(self) -> tuple:
        return self.chis + self.zs + self.ws

    def swap(self) -> dict:
        m = {}
        for a, b in zip(self.zs + self.ws, self.chis + self.taus):
            m[a] = b
            m[b] = a
        return m

    def Qbar(self) -> tuple:
        """Qbar(chi, z, w) as polynomials in (chi, z, w)."""
        sw = self.swap()
        return tuple(q.bar().rename(sw).with_vars(self.bvars) for q in self.Q)

    def q(self) -> tuple:
        """q = Q - tau."""
        return tuple(Q - Poly.var(t, self.mvars) for Q, t in zip(self.Q, self.taus))

    def qbar(self) -> tuple:
        return tuple(Q - Poly.var(w, self.bvars) for Q, w in zip(self.Qbar(), self.ws))

    def spec(self, name: str = "") -> ManifoldSpec:
        """The (complexified) defining equations (w - Q)/(2i) of the model as a spec."""
        coords = self.zs + self.ws
        allv = coords + tuple(conj_name(v) for v in coords)
        quarter = GaussianRational(0, -1) / 4
        rho = []
        for w, Q, t, Qb in zip(self.ws, self.Q, self.taus, self.Qbar()):
            # ((w - Q) - (tau - Qbar))/(4i) is real valued even for jets and
            # equals (w - Q)/(2i) when Q is exact.
            r1 = Poly.var(w, allv) - Q.with_vars(allv)
            r2 = Poly.var(t, allv) - Qb.with_vars(allv)
            rho.append(((r1 - r2).scale(quarter)).truncate(self.order))
        return ManifoldSpec(len(coords), tuple(rho), coords, name=name or self.frame.get("name", ""))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "kind": self.kind,
            "Q": [str(q) for q in self.Q],
            "z": list(self.zs),
            "w": list(self.ws),
        }


def default_names(n: int, d: int) -> tuple[tuple, tuple]:
    zs = ("z",) if n == 1 else tuple(f"z{k + 1}" for k in range(n))
    ws = ("w",) if d == 1 else tuple(f"w{k + 1}" for k in range(d))
    return zs, ws


class NormalityError(ValueError):
    pass


def from_rigid(phi: Sequence[Poly], zs: Sequence[str] | None = None, ws: Sequence[str] | None = None) -> NormalModel:
    """Exact model Q_j = tau_j + 2i*phi_j(z, chi) for rigid manifolds Im w = phi(z, conj z)."""
    phi = tuple(phi)
    d = len(phi)
    if zs is None:
        used = set()
        for p in phi:
            used.update(p.used_vars())
        names = sorted(v for v in used if not v.startswith("conj("))
        conjs = sorted(v[5:-1] for v in used if v.startswith("conj("))
        names = tuple(sorted(set(names) | set(conjs)))
        zs = names or default_names(0, d)[0]
        if ws is None:
            ws = default_names(len(zs), d)[1]
    zs = tuple(zs)
    if ws is None:
        ws = default_names(len(zs), d)[1]
    ws = tuple(ws)
    n = len(zs)
    chis = tuple(conj_name(v) for v in zs)
    taus = tuple(conj_name(v) for v in ws)
    mvars = zs + chis + taus
    sw = {}
    for a, b in zip(zs, chis):
        sw[a] = b
        sw[b] = a
    Q = []
    for j, p in enumerate(phi):
        extra = set(p.used_vars()) - set(zs + chis)
        if extra:
            raise NormalityError(f"phi_{j + 1} uses variables outside (z, chi): {sorted(extra)}")
        p = p.with_vars(zs + chis)
        for sub in (dict.fromkeys(chis, 0), dict.fromkeys(zs, 0)):
            rest = p.subs(sub)
            if not rest.is_zero():
                e, c = rest.sorted_terms()[0]
                raise NormalityError(
                    f"normality precondition violated for j={j + 1}: monomial {Poly._raw(rest.vars, {e: c})}"
                )
        if not (p.bar().rename(sw).with_vars(zs + chis) - p).is_zero():
            raise NormalityError(f"phi_{j + 1} is not Hermitian symmetric")
        Q.append(Poly.var(taus[j], mvars) + p.with_vars(mvars).scale(2 * I))
    return NormalModel(n, d, tuple(Q), zs, ws, None, {"construction": "rigid"})


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class NormalCheck:
    ok: bool
    identity: str = ""
    component: int = 0
    monomial: str = ""

    def __bool__(self):
        return self.ok

    def to_json(self) -> dict:
        return {"ok": self.ok, "identity": self.identity, "component": self.component, "monomial": self.monomial}


def _first_bad(p: Poly) -> str:
    e, c = p.sorted_terms()[0]
    return str(Poly._raw(p.vars, {e: c}))


def verify_normal(m: NormalModel) -> NormalCheck:
    O = m.order
    for j, Q in enumerate(m.Q):
        tau = Poly.var(m.taus[j], m.mvars)
        for label, sub in (("Q(z,0,tau)=tau", dict.fromkeys(m.chis, 0)), ("Q(0,chi,tau)=tau", dict.fromkeys(m.zs, 0))):
            diff = (Q.subs(sub) - tau).truncate(O)
            if not diff.is_zero():
                return NormalCheck(False, label, j + 1, _first_bad(diff))
    Qb = m.Qbar()
    sub = {t: q for t, q in zip(m.taus, Qb)}
    for j, Q in enumerate(m.Q):
        diff = Q.subs(sub, O) - Poly.var(m.ws[j], Q.vars)
        diff = diff.truncate(O)
        if not diff.is_zero():
            return NormalCheck(False, "Q(z,chi,Qbar(chi,z,w))=w", j + 1, _first_bad(diff))
    return NormalCheck(True)


# ---------------------------------------------------------------------------
# q_alpha expansion


@dataclass(frozen=True)
class QAlphaTable:
    entries: dict
    order: int | None
    zs: tuple
    ws: tuple

    def get(self, alpha: tuple) -> tuple:
        return self.entries.get(tuple(alpha), tuple(Poly.zero(self.zs + self.ws) for _ in self.ws))


def q_alpha(m: NormalModel, A: int) -> QAlphaTable:
    """Coefficients q_alpha(z, w) of Qbar(chi, z, w) = sum_alpha q_alpha(z, w) chi^alpha, |alpha| <= A."""
    zw = m.zs + m.ws
    entries: dict = {}
    for j, Qb in enumerate(m.Qbar()):
        for alpha, part in Qb.split_by(m.chis).items():
            if sum(alpha) > A:
                continue
            row = entries.setdefault(alpha, [Poly.zero(zw) for _ in m.ws])
            row[j] = part.with_vars(m.bvars).drop_unused().with_vars(zw)
    return QAlphaTable({a: tuple(v) for a, v in entries.items()}, m.order, m.zs, m.ws)


# ---------------------------------------------------------------------------
# solving for normal coordinates


def _series_inverse(F: Sequence[Poly], xs: Sequence[str], ys: Sequence[str], order: int, params: Sequence[str] = ()) -> list[Poly]:
    """Solve F(params, y) = x for y as series in (params, x); F(0, y) has invertible linear part."""
    k = len(ys)
    allv = tuple(params) + tuple(xs)
    zero = {v: ZERO for v in tuple(params) + tuple(ys)}
    L = [[f.diff(y).eval({**zero, **{v: ZERO for v in f.vars}}) for y in ys] for f in F]
    Linv = invert_matrix(L)
    sol = [Poly.zero(allv) for _ in ys]
    for _ in range(order + 2):
        vals = {y: s for y, s in zip(ys, sol)}
        resid = [(f.subs(vals, order).with_vars(allv) - Poly.var(x, allv)) for f, x in zip(F, xs)]
        if all(r.is_zero() for r in resid):
            break
        sol = [
            (sol[i] - sum((resid[j].scale(Linv[i][j]) for j in range(k) if Linv[i][j]), Poly.zero(allv))).truncate(order)
            for i in range(k)
        ]
    return sol


def solve_normal(spec: ManifoldSpec, p: PointQ | None = None, order: int = 8) -> NormalModel:
    """Normal coordinates at a generic point p, as an exact polynomial or a jet of the given order.

    The graph w = W(z, chi, tau) is solved by chord iteration.  If W(0, 0, tau)
    is not tau, the holomorphic change w -> c*w + conj(c)*Wbar(0, 0, w) makes it
    so; then w -> F(z, w), the inverse of tau -> W(z, 0, tau), gives normality.
    """
    if order < 2:
        raise ValueError("order must be >= 2")
    p = p or spec.basepoint or PointQ((ZERO,) * spec.N)
    pc = classify_point(spec, p)
    if not pc.generic:
        raise PointError("implicit solve failed: ∂ρ/∂w singular at p")
    g = local_graph(spec, p, order, candidates=tuple(reversed(spec.coords)), require_full=True)
    ws = tuple(v for v in spec.coords if v in g.solved)
    zs = tuple(v for v in spec.coords if v not in g.solved)
    n, d = len(zs), len(ws)
    chis = tuple(conj_name(v) for v in zs)
    taus = tuple(conj_name(v) for v in ws)
    mvars = zs + chis + taus
    W = [(g.subs[w] - g.subs[w].constant_term()).with_vars(mvars) for w in ws]
    exact = g.exact
    steps = []
    O = None if exact else order

    def swapped(polys):
        sw = {}
        for a, b in zip(zs + ws, chis + taus):
            sw[a] = b
            sw[b] = a
        return [q.bar().rename(sw) for q in polys]

    # Step A: make W(0, 0, tau) = tau.
    W0 = [w.subs({v: 0 for v in zs + chis}).with_vars(taus) for w in W]
    if any((w0 - Poly.var(t, taus)).truncate(order) for w0, t in zip(W0, taus)):
        exact = False
        O = order
        W0bar = [w.bar().rename(dict(zip(taus, ws))).with_vars(ws) for w in W0]
        A = [[w.diff(t).eval({x: ZERO for x in taus}) for t in taus] for w in W0]
        Abar = [[x.conj() for x in row] for row in A]
        c = None
        for cand in (ONE, I, ONE + I, GaussianRational(2, 1), GaussianRational(1, 2), GaussianRational(3, 1)):
            lin = [[(cand if i == j else ZERO) + cand.conj() * Abar[i][j] for j in range(d)] for i in range(d)]
            if matrix_rank(lin) == d:
                c = cand
                break
        if c is None:
            raise PointError("could not straighten the totally real slice")
        Phi = [Poly.var(w, ws).scale(c) + wb.scale(c.conj()) for w, wb in zip(ws, W0bar)]
        Phibar = [q.bar().rename(dict(zip(ws, taus))).with_vars(taus) for q in Phi]
        tmp = tuple(f"_y{k}" for k in range(d))
        inv = _series_inverse([q.rename(dict(zip(taus, tmp))) for q in Phibar], taus, tmp, order)
        W = [
            q.subs(dict(zip(ws, W)), order).with_vars(mvars)
            for q in [ph.with_vars(ws) for ph in Phi]
        ]
        W = [w.subs(dict(zip(taus, inv)), order).with_vars(mvars) for w in W]
        steps.append({"step": "straighten", "c": c.to_json(), "Phi": [str(q) for q in Phi]})

    # Step B: make W(z, 0, tau) = tau.
    G = [w.subs({v: 0 for v in chis}).with_vars(zs + taus) for w in W]
    if any((gq - Poly.var(t, zs + taus)).truncate(order) for gq, t in zip(G, taus)):
        exact = False
        O = order
        tmp = tuple(f"_y{k}" for k in range(d))
        Finv = _series_inverse([gq.rename(dict(zip(taus, tmp))) for gq in G], ws, tmp, order, params=zs)
        Gbar = swapped(G)
        Gbar = [q.with_vars(chis + ws).rename(dict(zip(ws, taus))).with_vars(chis + taus) for q in Gbar]
        inner = [w.subs(dict(zip(taus, Gbar)), order).with_vars(mvars) for w in W]
        W = [f.subs(dict(zip(ws, inner)), order).with_vars(mvars) for f in Finv]
        steps.append({"step": "normalize", "F": [str(f) for f in Finv]})

    frame = {
        "name": spec.name,
        "basepoint": [c.to_json() for c in p.coords],
        "z": list(zs),
        "w": list(ws),
        "steps": steps,
    }
    if O is not None:
        W = [w.truncate(O) for w in W]
    return NormalModel(n, d, tuple(W), zs, ws, O, frame)
