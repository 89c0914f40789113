from __future__ import annotations

import pytest
import sympy

from conftest import CORPUS, poly, spec, to_sympy
from crinv.exactalg import Poly
from crinv.geometry import ManifoldSpec, PointError, PointQ
from crinv.normalform import NormalityError, NormalModel, from_rigid, q_alpha, solve_normal, verify_normal

ZC = ("z", "conj(z)")
LEWY_M = ("z", "conj(z)", "conj(w)")
EX223_M = ("z", "conj(z)", "conj(w1)", "conj(w2)")


def lewy():
    return from_rigid([poly("z*conj(z)", ZC)], ("z",), ("w",))


def ex223():
    return from_rigid([poly("z*conj(z)", ZC), poly("z^2*conj(z)^2", ZC)], ("z",), ("w1", "w2"))


def test_from_rigid_examples():
    assert lewy().Q == (poly("conj(w) + 2*i*z*conj(z)", LEWY_M),)
    m = ex223()
    assert m.Q == (poly("conj(w1) + 2*i*z*conj(z)", EX223_M), poly("conj(w2) + 2*i*z^2*conj(z)^2", EX223_M))
    assert m.kind == "exact"
    flat = from_rigid([Poly.zero(ZC)], ("z",), ("w",))
    assert flat.Q == (poly("conj(w)", LEWY_M),)


def test_from_rigid_rejects_pure_terms():
    with pytest.raises(NormalityError, match=r"j=1: monomial z\^2"):
        from_rigid([poly("z^2 + conj(z)^2", ZC)], ("z",), ("w",))


def test_verify_normal_examples():
    assert verify_normal(lewy())
    assert verify_normal(ex223())
    bad = NormalModel(1, 1, (poly("conj(w) + 2*i*z*conj(z) + z^2", LEWY_M),), ("z",), ("w",))
    check = verify_normal(bad)
    assert not check.ok
    assert check.identity == "Q(z,0,tau)=tau" and check.monomial == "z^2"


def test_verify_normal_reality_failure():
    # Q = tau + z*chi is normal but 2i is needed for reality.
    bad = NormalModel(1, 1, (poly("conj(w) + z*conj(z)", LEWY_M),), ("z",), ("w",))
    check = verify_normal(bad)
    assert not check.ok and check.identity == "Q(z,chi,Qbar(chi,z,w))=w"


def test_qbar_lewy():
    assert lewy().Qbar() == (poly("w - 2*i*conj(z)*z", ("conj(z)", "z", "w")),)


def test_q_alpha_examples():
    t = q_alpha(lewy(), 4)
    zw = ("z", "w")
    assert t.get((0,)) == (poly("w", zw),)
    assert t.get((1,)) == (poly("-2*i*z", zw),)
    assert t.get((2,)) == (Poly.zero(zw),)
    t2 = q_alpha(ex223(), 4)
    zw2 = ("z", "w1", "w2")
    assert t2.get((1,)) == (poly("-2*i*z", zw2), Poly.zero(zw2))
    assert t2.get((2,)) == (Poly.zero(zw2), poly("-2*i*z^2", zw2))


@pytest.mark.parametrize("name", CORPUS)
def test_q_alpha_reconstructs_qbar(name):
    s = spec(name)
    m = solve_normal(s, order=6)
    t = q_alpha(m, 12)
    for j, Qb in enumerate(m.Qbar()):
        total = Poly.zero(m.bvars)
        for alpha, row in t.entries.items():
            mono = Poly.const(1, m.bvars)
            for c, k in zip(m.chis, alpha):
                mono = mono * Poly.var(c, m.bvars) ** k
            total = total + row[j].with_vars(m.bvars) * mono
        assert total == Qb


def test_solve_normal_ex224_against_closed_form():
    # Row two reads w - tau = i*(w + tau)*x with x = z^2 chi^2, so
    # w = tau*(1 + i x)/(1 - i x); the oracle expands that with sympy.
    m = solve_normal(spec("ex224"), order=8)
    assert verify_normal(m)
    z, chi, tau, t = sympy.symbols("z c_z c_w2 t")
    # t marks powers of x; tau*x^k has degree 4k + 1, so k <= 1 survives order 8.
    closed = sympy.series(tau * (1 + sympy.I * t) / (1 - sympy.I * t), t, 0, 2).removeO()
    want = sympy.expand(closed.subs(t, z**2 * chi**2))
    assert to_sympy(m.Q[1]) == want


def test_solve_normal_lewy_matches_from_rigid():
    m = solve_normal(spec("lewy"), order=8)
    assert m.Q == lewy().Q


def test_solve_normal_ex223_matches_from_rigid():
    m = solve_normal(spec("ex223"), order=8)
    assert m.Q == ex223().Q


def test_solve_normal_flat():
    v = ("w", "conj(w)")
    s = ManifoldSpec(1, (poly("-i/2*w + i/2*conj(w)", v),), ("w",))
    m = solve_normal(s, order=4)
    assert m.n == 0 and m.Q == (Poly.var("conj(w)", m.mvars),)


def test_solve_normal_errors():
    with pytest.raises(ValueError, match="order must be >= 2"):
        solve_normal(spec("lewy"), order=1)
    with pytest.raises(PointError, match="singular"):
        solve_normal(spec("ex35"), PointQ((0, 0, 0, 0)), order=4)


@pytest.mark.parametrize("name", CORPUS)
def test_corpus_models_are_normal(name):
    s = spec(name)
    m = solve_normal(s, order=8)
    assert verify_normal(m)
    assert m.n + m.d == s.N


@pytest.mark.parametrize("name", CORPUS)
def test_model_spec_is_real_and_contains_origin(name):
    from crinv.geometry import on_set, validate

    m = solve_normal(spec(name), spec(name).basepoint, order=6)
    s = m.spec()
    assert validate(s)
    assert on_set(s, PointQ((0,) * s.N))


def test_model_spec_recovers_rigid_equations():
    assert lewy().spec().rho == spec("lewy").rho
    assert ex223().spec().rho == spec("ex223").rho
