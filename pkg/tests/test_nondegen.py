from __future__ import annotations

import random

import pytest

from conftest import CORPUS, gq, poly, spec
from crinv.exactalg import Poly
from crinv.geometry import PointQ, random_complexification_points
from crinv.nondegen import (
    VectorFieldSpec,
    ambient_tangency,
    cr_basis,
    degeneracy_witness,
    essentially_finite,
    k_nondeg_order,
    levi_number,
    multi_indices,
    nondeg_report,
    v_vectors,
    witness_is_tangent,
)
from crinv.normalform import from_rigid, solve_normal

ZC = ("z", "conj(z)")


def lewy():
    return from_rigid([poly("z*conj(z)", ZC)], ("z",), ("w",))


def ex223():
    return from_rigid([poly("z*conj(z)", ZC), poly("z^2*conj(z)^2", ZC)], ("z",), ("w1", "w2"))


def flat():
    return from_rigid([Poly.zero(ZC)], ("z",), ("w",))


def degen3():
    return from_rigid([poly("z1*conj(z1)", ("z1", "conj(z1)"))], ("z1", "z2"), ("w",))


def test_multi_indices_graded():
    assert list(multi_indices(2, 2)) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert list(multi_indices(1, 3, 2)) == [(2,), (3,)]


def test_cr_basis_examples():
    (L,) = cr_basis(lewy())
    assert L.vars == ("conj(z)", "conj(w)")
    assert L.coeffs[0] == Poly.const(1, L.coeffs[0].vars)
    assert L.coeffs[1] == poly("-2*i*z", ("conj(z)", "z", "w"))
    (F,) = cr_basis(flat())
    assert F.coeffs[1].is_zero()
    (E,) = cr_basis(ex223())
    bv = ("conj(z)", "z", "w1", "w2")
    assert E.coeffs[1:] == (poly("-2*i*z", bv), poly("-4*i*z^2*conj(z)", bv))


def test_cr_basis_annihilates_defining_functions():
    for m in (lewy(), ex223(), degen3()):
        # L applied to tau - Qbar(chi, z, w) vanishes identically.
        for L in cr_basis(m):
            for tau, Qb in zip(m.taus, m.Qbar()):
                f = Poly.var(tau, m.bvars + m.taus) - Qb.with_vars(m.bvars + m.taus)
                assert L.apply(f).is_zero()


def test_v_vectors_lewy_at_origin():
    # V = -grad_Z of chi-derivatives of Qbar = w - 2i*chi*z.
    vs = {alpha: v for j, alpha, v in v_vectors(lewy(), None, 1)}
    assert vs[(0,)] == (gq(0), gq(-1))
    assert vs[(1,)] == (gq(0, 2), gq(0))


def test_v_vectors_flat_never_span_z():
    for _, _, v in v_vectors(flat(), None, 3):
        assert v[0] == 0


def test_k_nondeg_order_examples():
    assert k_nondeg_order(lewy()) == 1
    # The w1 row supplies the z direction at |alpha| = 1 already.
    assert k_nondeg_order(ex223(), kmax=3) == 1
    rows = [v for _, a, v in v_vectors(ex223(), None, 1)]
    assert (gq(0, 2), gq(0), gq(0)) in rows
    assert k_nondeg_order(flat(), kmax=4) is None


def test_levi_number_examples():
    assert levi_number(lewy()) == 1
    # Generic points see the z^2 chi^2 term at first order.
    assert levi_number(ex223()) == 1
    assert levi_number(degen3()) == "degenerate"


def test_degeneracy_witness_examples():
    X = degeneracy_witness(degen3())
    assert X is not None and str(X) == "d/dz2"
    assert degeneracy_witness(lewy()) is None
    assert degeneracy_witness(lewy(), D=6, A=8) is None
    assert degeneracy_witness(ex223()) is None


def test_r142_jet_witness_at_cr_point():
    # In normal coordinates at a CR point the tangent field is seen as a jet
    # whose z component is constant.
    m = solve_normal(spec("r142"), PointQ((1, 0, 1, 0)), order=8)
    X = degeneracy_witness(m, 2, 4)
    assert X is not None and X.vars == ("Z2",) and str(X) == "d/dZ2"


def test_r142_multivalued_field_tangent_on_complexification():
    # d/dZ2 + 2 Z3^(1/2) d/dZ4 with Z3^(1/2) = zeta1 on the complexification.
    s = spec("r142")
    X = VectorFieldSpec(s.coords, (poly("0", s.allvars), poly("1", s.allvars), poly("0", s.allvars), poly("2*conj(Z1)", s.allvars)))
    pts = random_complexification_points(s, 20, random.Random(4))
    assert all(ambient_tangency(s, X, pt) for pt in pts)
    wrong = VectorFieldSpec(s.coords, (poly("0", s.allvars), poly("1", s.allvars), poly("0", s.allvars), poly("0", s.allvars)))
    assert not all(ambient_tangency(s, wrong, pt) for pt in pts)


def test_witness_tangency_rejects_wrong_field():
    m = degen3()
    zw = m.zs + m.ws
    bad = VectorFieldSpec(m.zs, (Poly.const(1, zw), Poly.zero(zw)))
    good = VectorFieldSpec(m.zs, (Poly.zero(zw), Poly.const(1, zw)))
    assert not witness_is_tangent(m, bad, None)
    assert witness_is_tangent(m, good, None)


def test_degen3_witness_tangent_at_random_points():
    s = spec("degen3")
    X = VectorFieldSpec(s.coords, tuple(Poly.const(c, s.allvars) for c in (0, 1, 0)))
    pts = random_complexification_points(s, 20, random.Random(3))
    assert all(ambient_tangency(s, X, pt) for pt in pts)


@pytest.mark.parametrize(
    "point",
    [(0, 0, 0), (1, 0, gq(0, 1)), (0, 5, 3), (gq(1, 1), 2, gq(7, 2)), (gq(0, 2), gq(0, -1), gq(-1, 4))],
)
def test_degen3_witness_propagates(point):
    m = solve_normal(spec("degen3"), PointQ(point), order=6)
    X = degeneracy_witness(m)
    assert X is not None
    assert X.coeffs[0].is_zero() and not X.coeffs[1].is_zero()


def test_essentially_finite_examples():
    assert essentially_finite(lewy()).verdict == "yes"
    assert essentially_finite(degen3()).verdict == "no"
    ef = essentially_finite(ex223())
    assert ef.verdict == "yes" and ef.reason == "linear parts span"


def test_essentially_finite_gcd_route():
    # Only chi^2 coefficients: z^2 and z^3 share the root 0 alone.
    m = from_rigid([poly("z^2*conj(z)^2 + z^3*conj(z)^3", ZC)], ("z",), ("w",))
    ef = essentially_finite(m)
    assert ef.verdict == "yes" and ef.reason == "gcd z^2"


@pytest.mark.parametrize("name", CORPUS)
def test_levi_witness_finiteness_coherence(name):
    s = spec(name)
    m = solve_normal(s, order=8)
    rep = nondeg_report(m, rng=random.Random(0))
    finite = rep.levi_number != "degenerate"
    if finite and m.n:
        assert 1 <= rep.levi_number <= m.N - m.d
    assert finite == (rep.witness is None)
    if finite:
        assert rep.essentially_finite == "yes"
    else:
        assert rep.essentially_finite != "yes"
