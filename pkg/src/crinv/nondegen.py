"""Holomorphic nondegeneracy: CR vector fields, jet vectors V, Levi number,
degeneracy witnesses and essential finiteness, all in normal coordinates."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

from .exactalg import (
    ONE,
    ZERO,
    GaussianRational,
    Poly,
    matrix_rank,
    matrix_rank_samples,
    nullspace,
    resultant,
    univariate_gcd,
)
from .geometry import PointQ
from .normalform import NormalModel, q_alpha


@dataclass(frozen=True)
class VectorFieldSpec:
    """sum_k coeffs[k] * d/d vars[k]."""

    vars: tuple
    coeffs: tuple
    frame: str = ""

    def apply(self, f: Poly, order: int | None = None) -> Poly:
        out = Poly.zero(f.vars)
        for v, c in zip(self.vars, self.coeffs):
            if v in f.vars and c:
                out = out + f.diff(v).mul(c, order)
        return out

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coeffs)

    def __str__(self):
        parts = []
        for v, c in zip(self.vars, self.coeffs):
            if c.is_zero():
                continue
            s = str(c)
            if s == "1":
                parts.append(f"d/d{v}")
            elif len(c) == 1 and "+" not in s[1:] and "-" not in s[1:]:
                parts.append(f"{s}*d/d{v}")
            else:
                parts.append(f"({s})*d/d{v}")
        if not parts:
            return "0"
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out

    def to_json(self) -> dict:
        return {"frame": self.frame, "field": str(self), "coefficients": {v: str(c) for v, c in zip(self.vars, self.coeffs)}}


@dataclass
class NondegReport:
    point: PointQ
    k_order: int | None
    levi_number: int | str
    essentially_finite: str
    witness: VectorFieldSpec | None = None
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "point": self.point.to_json(),
            "k_order": self.k_order,
            "levi_number": self.levi_number,
            "essentially_finite": self.essentially_finite,
            "witness": None if self.witness is None else self.witness.to_json(),
            "notes": list(self.notes),
        }


def multi_indices(n: int, k: int, start: int = 0):
    """All alpha in N^n with start <= |alpha| <= k, graded then lexicographic."""
    for total in range(start, k + 1):
        found = []
        for combo in combinations_with_replacement(range(n), total):
            a = [0] * n
            for i in combo:
                a[i] += 1
            found.append(tuple(a))
        yield from sorted(set(found), reverse=True)


def cr_basis(m: NormalModel) -> list[VectorFieldSpec]:
    """L_j = d/dchi_j + sum_k Qbar_{k,chi_j}(chi, z, w) d/dtau_k."""
    Qb = m.Qbar()
    dirs = m.chis + m.taus
    out = []
    for j, chi in enumerate(m.chis):
        coeffs = [Poly.const(ONE if i == j else ZERO, m.bvars) for i in range(m.n)]
        coeffs += [q.diff(chi).truncate(None if m.order is None else m.order - 1) for q in Qb]
        out.append(VectorFieldSpec(dirs, tuple(coeffs), "normal"))
    return out


def _chi_derivative(p: Poly, chis: tuple, alpha: tuple) -> Poly:
    return p.diff_multi(dict(zip(chis, alpha)))


def v_rows(m: NormalModel, k: int, start: int = 0) -> list[tuple[int, tuple, list, int | None]]:
    """(j, alpha, V_{j alpha}(chi, z, w) as polynomials, degree through which it is known)."""
    Qb = m.Qbar()
    Z = m.zs + m.ws
    rows = []
    for alpha in multi_indices(m.n, k, start):
        for j, q in enumerate(Qb):
            dq = _chi_derivative(q, m.chis, alpha)
            known = None if m.order is None else m.order - sum(alpha) - 1
            rows.append((j + 1, alpha, [-(dq.diff(v)) for v in Z], known))
    return rows


def _model_point(m: NormalModel, p: PointQ | None) -> dict:
    if p is None:
        p = PointQ((ZERO,) * m.N)
    if len(p) != m.N:
        raise ValueError("point has the wrong number of coordinates")
    vals = dict(zip(m.zs + m.ws, p.coords))
    vals.update(zip(m.chis, [c.conj() for c in p.coords[: m.n]]))
    if m.order is not None and any(p.coords):
        raise ValueError("a truncated model can only be evaluated at its origin")
    return vals


def v_vectors(m: NormalModel, p: PointQ | None = None, k: int = 1) -> list[tuple[int, tuple, tuple]]:
    """V_{j alpha}(p, conj p) for |alpha| <= k."""
    vals = _model_point(m, p)
    out = []
    for j, alpha, row, known in v_rows(m, k):
        if known is not None and known < 0:
            raise ValueError(f"model order too low for |alpha| = {sum(alpha)}")
        out.append((j, alpha, tuple(e.eval(vals) if e.vars else e.constant_term() for e in row)))
    return out


def k_nondeg_order(m: NormalModel, p: PointQ | None = None, kmax: int | None = None) -> int | None:
    """Least k <= kmax with span{V_{j alpha}(p): |alpha| <= k} = C^N, or None."""
    if kmax is None:
        kmax = m.N - m.d
    if m.order is not None:
        kmax = min(kmax, m.order - 1)
    vecs: list = []
    done = 0
    for k in range(0, kmax + 1):
        vecs.extend(v for j, a, v in v_vectors(m, p, k) if sum(a) == k)
        done = k
        if matrix_rank(vecs) == m.N:
            return k
    return None


def levi_number(m: NormalModel, trials: int = 3, kmax: int | None = None, rng: random.Random | None = None) -> int | str:
    """Generic k-nondegeneracy order.

    The V vectors are sampled at random points (chi, z, w) of the
    complexification, or along random formal lines through the origin for
    truncated models.  A manifold with n = 0 is reported as 0.
    """
    rng = rng or random.Random(0)
    if kmax is None:
        kmax = m.N - m.d
    if m.order is not None:
        kmax = min(kmax, m.order - 1)
    rows: list = []
    known: list = []
    for k in range(0, kmax + 1):
        for j, alpha, row, kn in v_rows(m, k, k):
            rows.append(row)
            known.append(kn)
        if max(matrix_rank_samples(rows, known, rng=rng, retries=trials)) == m.N:
            return k
    return "degenerate"


# ---------------------------------------------------------------------------
# degeneracy witnesses


def _monomials(names: tuple, deg: int) -> list[tuple]:
    out = []
    for total in range(deg + 1):
        for combo in combinations_with_replacement(range(len(names)), total):
            e = [0] * len(names)
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


def witness_bounds(m: NormalModel, D: int, A: int) -> tuple[int, int]:
    """Effective (degree, jet) bounds; a truncated model only knows q_alpha through degree O - |alpha|."""
    if m.order is None:
        return D, A
    A_eff = min(A, max(1, m.order - 1 - D))
    D_eff = max(0, min(D, m.order - A_eff - 1))
    return D_eff, A_eff


def degeneracy_witness(m: NormalModel, D: int = 4, A: int = 6) -> VectorFieldSpec | None:
    """Nonzero X = sum a_j(z, w) d/dz_j with sum_j a_j q_{alpha, z_j} = 0 for |alpha| <= A, deg a <= D.

    For exact models the identities are imposed exactly.  For truncated
    models they are imposed on jets through degree D_eff (see witness_bounds),
    so the answer concerns the Taylor jet of a witness at the origin.
    """
    if m.n == 0:
        return None
    D_eff, A_eff = witness_bounds(m, D, A)
    zw = m.zs + m.ws
    table = q_alpha(m, A_eff)
    monos = _monomials(zw, D_eff)
    cols = [(j, e) for j in range(m.n) for e in monos]
    cap = None if m.order is None else D_eff
    rows: dict = {}
    for alpha, qs in table.entries.items():
        for k, q in enumerate(qs):
            for j, zj in enumerate(m.zs):
                dq = q.diff(zj)
                if dq.is_zero():
                    continue
                for ci, (jj, e) in enumerate(cols):
                    if jj != j:
                        continue
                    for te, c in dq.terms.items():
                        ex = tuple(a + b for a, b in zip(te, e))
                        if cap is not None and sum(ex) > cap:
                            continue
                        key = (alpha, k, ex)
                        row = rows.setdefault(key, {})
                        row[ci] = row.get(ci, ZERO) + c
    basis = nullspace([r for r in rows.values() if any(r.values())], len(cols))
    if not basis:
        return None

    def cost(vec):
        return (max(sum(cols[i][1]) for i in vec), len(vec), min(vec))

    best = min(basis, key=cost)
    lead = best[min(best)]
    coeffs = []
    for j in range(m.n):
        terms = {e: best[i] / lead for i, (jj, e) in enumerate(cols) if jj == j and i in best}
        coeffs.append(Poly(zw, terms))
    X = VectorFieldSpec(m.zs, tuple(coeffs), "normal")
    if not witness_is_tangent(m, X, None if m.order is None else min(D_eff, A_eff)):
        raise AssertionError("witness failed the tangency check")
    return X


def witness_is_tangent(m: NormalModel, X: VectorFieldSpec, order: int | None) -> bool:
    """(X + conj X)(w - Q) vanishes on the complexification w = Q(z, chi, tau)."""
    sub = {w: q for w, q in zip(m.ws, m.Q)}
    a = [c.with_vars(m.zs + m.ws).subs(sub, order).with_vars(m.mvars) for c in X.coeffs]
    abar = [
        c.bar().rename(dict(zip(m.zs + m.ws, m.chis + m.taus))).with_vars(m.mvars)
        for c in X.coeffs
    ]
    for Q in m.Q:
        total = Poly.zero(m.mvars)
        for j, (zj, cj) in enumerate(zip(m.zs, m.chis)):
            total = total + a[j].mul(Q.diff(zj), order) + abar[j].mul(Q.diff(cj), order)
        if not total.truncate(order).is_zero():
            return False
    return True


def ambient_tangency(spec, X: VectorFieldSpec, point_values: dict, order: int | None = None) -> bool:
    """(X + conj X) rho_j = 0 at a point of the complexification, for an ambient field X."""
    conj_names = dict(zip(spec.coords, spec.zeta))
    for r in spec.rho:
        val = ZERO
        for v, c in zip(X.vars, X.coeffs):
            val = val + c.eval(point_values) * r.diff(v).eval(point_values)
            cb = c.bar().rename({**conj_names, **{b: a for a, b in conj_names.items()}})
            val = val + cb.eval(point_values) * r.diff(conj_names[v]).eval(point_values)
        if val:
            return False
    return True


# ---------------------------------------------------------------------------
# essential finiteness


@dataclass(frozen=True)
class Finiteness:
    verdict: str
    reason: str

    def __str__(self):
        return self.verdict


def _coefficient_family(m: NormalModel, A: int) -> list[tuple[Poly, int | None]]:
    """Components of the chi^alpha coefficients (alpha != 0) of Q(z, chi, 0), with known degrees."""
    out = []
    for Q in m.Q:
        q0 = Q.subs({t: 0 for t in m.taus}).with_vars(m.zs + m.chis)
        for alpha, part in q0.split_by(m.chis).items():
            if sum(alpha) == 0 or sum(alpha) > A:
                continue
            c = part.with_vars(m.zs + m.chis).drop_unused().with_vars(m.zs)
            known = None if m.order is None else m.order - sum(alpha)
            if not c.is_zero():
                out.append((c, known))
    return out


def essentially_finite(m: NormalModel, A: int = 6) -> Finiteness:
    """Decide whether {z : Q(z, chi, 0) = 0 for all chi} is {0} near the origin.

    Verdicts are "yes", "no" or "undetermined(A)".
    """
    if m.n == 0:
        return Finiteness("yes", "no z variables")
    fam = _coefficient_family(m, A)
    lin = [[f.coeff({z: 1}) for z in m.zs] for f, _ in fam]
    if lin and matrix_rank(lin) == m.n:
        return Finiteness("yes", "linear parts span")
    if m.order is not None:
        if m.n == 1 and fam:
            return Finiteness("yes", "nonzero coefficient jet")
        return Finiteness(f"undetermined({A})", "truncated model")
    polys = [f for f, _ in fam]
    if m.n == 1:
        if not polys:
            return Finiteness("no", "all coefficients vanish")
        g = polys[0]
        for f in polys[1:]:
            g = univariate_gcd(g, f)
        return Finiteness("yes", f"gcd {g}")
    if len(polys) < m.n:
        return Finiteness("no", "fewer equations than variables")
    for k in range(1, m.n):
        for sub in _subsets(m.zs, k):
            if all(f.subs({z: 0 for z in m.zs if z not in sub}).is_zero() for f in polys):
                return Finiteness("no", f"vanish on the {','.join(sub)} coordinate space")
    if m.n == 2:
        z1, z2 = m.zs
        for i in range(len(polys)):
            for j in range(i + 1, len(polys)):
                p, q = polys[i], polys[j]
                if p.degree_in(z2) and q.degree_in(z2) and p.degree_in(z1) and q.degree_in(z1):
                    r2 = resultant(p, q, z2)
                    r1 = resultant(p, q, z1)
                    if not r1.is_zero() and not r2.is_zero():
                        return Finiteness("yes", "resultants in both variables are nonzero")
    return Finiteness(f"undetermined({A})", "elimination inconclusive")


def _subsets(names: tuple, k: int):
    from itertools import combinations

    return [tuple(c) for c in combinations(names, k)]


def nondeg_report(
    m: NormalModel,
    p: PointQ | None = None,
    *,
    D: int = 4,
    A: int = 6,
    trials: int = 3,
    rng: random.Random | None = None,
) -> NondegReport:
    rng = rng or random.Random(0)
    p = p or PointQ((ZERO,) * m.N)
    k = k_nondeg_order(m, p)
    lev = levi_number(m, trials, rng=rng)
    ef = essentially_finite(m, A)
    wit = degeneracy_witness(m, D, A)
    notes = []
    if lev == "degenerate" and wit is None:
        notes.append("no polynomial witness within bounds")
    return NondegReport(p, k, lev, ef.verdict, wit, notes)
