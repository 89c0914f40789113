from __future__ import annotations

import pytest

from conftest import gq, poly, spec
from crinv.dsl import parse_manifold
from crinv.exactalg import Poly
from crinv.geometry import PointQ, WeightVector
from crinv.homogeneous import (
    HomogeneityError,
    check_homogeneous,
    condition_231,
    degenerate_selfmap,
    ideal_membership,
    nonalgebraic_selfmap,
    real_witness,
    scale_model,
    verify_real_on_M,
)
from crinv.mapcheck import ESeries, verify_map
from crinv.nondegen import VectorFieldSpec
from crinv.normalform import from_rigid, solve_normal

ZC = ("z", "conj(z)")


def lewy():
    return from_rigid([poly("z*conj(z)", ZC)], ("z",), ("w",))


def ex223():
    return from_rigid([poly("z*conj(z)", ZC), poly("z^2*conj(z)^2", ZC)], ("z",), ("w1", "w2"))


def flat():
    return from_rigid([Poly.zero(ZC)], ("z",), ("w",))


def model(name, order=8):
    s = spec(name)
    return solve_normal(s, s.basepoint, order)


def is_identity(H):
    env = {v: ESeries.of(Poly.var(v, H.source)) for v in H.source}
    return all((c.evaluate(env, None, H.source) - env[v]).is_zero() for v, c in zip(H.source, H.components))


def test_check_homogeneous_examples():
    hm = check_homogeneous(ex223(), WeightVector((1, 2, 4)))
    assert hm.r == 2 and hm.degrees == (2, 4) and hm.m == (2, 4)
    assert check_homogeneous(flat(), WeightVector((1, 2))).r == 0


def test_ex224_rejected_with_the_mixed_term():
    with pytest.raises(HomogeneityError, match=r"monomial 2\*i\*z\^2\*conj\(z\)\^2\*conj\(w2\)"):
        check_homogeneous(model("ex224"), WeightVector((1, 2, 4)))


def test_wrong_weights_rejected():
    with pytest.raises(HomogeneityError, match="not weighted homogeneous of degree 3"):
        check_homogeneous(ex223(), WeightVector((1, 2, 3)))


def test_condition_per_level():
    assert condition_231(check_homogeneous(ex223(), WeightVector((1, 2, 4)))) == {2: True, 3: True}
    assert condition_231(check_homogeneous(lewy(), WeightVector((1, 2)))) == {2: True}
    # First row flat, second row Levi form: M^2 is the flat hypersurface.
    m = from_rigid([Poly.zero(ZC), poly("z*conj(z)", ZC)], ("z",), ("w1", "w2"))
    out = condition_231(check_homogeneous(m, WeightVector((1, 2, 2))))
    assert out[2] is False


def test_scale_model_drops_higher_weight_perturbation():
    pert = from_rigid([poly("z*conj(z)", ZC), poly("z^2*conj(z)^2 + z^2*conj(z)^3 + z^3*conj(z)^2", ZC)], ("z",), ("w1", "w2"))
    sm = scale_model(pert, WeightVector((1, 2, 4)))
    assert sm.model.base.Q == ex223().Q
    assert len(sm.dropped) == 2 and all(j == 2 for j, _ in sm.dropped)
    assert sm.scaling["w2"] == "eps^4*w2~"


def test_scale_model_is_identity_on_homogeneous_input():
    sm = scale_model(ex223(), WeightVector((1, 2, 4)))
    assert sm.model.base.Q == ex223().Q and sm.dropped == ()
    again = scale_model(sm.model.base, WeightVector((1, 2, 4)))
    assert again.model.base.Q == sm.model.base.Q


def test_scale_model_ex315_drops_couplings():
    sm = scale_model(model("ex315"), WeightVector((1, 2, 4, 5)))
    assert [str(q) for q in sm.model.base.q()] == ["2*i*z*conj(z)", "0", "0"]
    assert sm.dropped == (
        (1, "2*i*z*conj(z)*conj(w2)"),
        (1, "-2*z^3*conj(z)^3*conj(w3)"),
        (2, "2*i*z^2*conj(z)^2*conj(w3)"),
    )


def test_scale_model_rejects_lower_weight():
    with pytest.raises(HomogeneityError, match="remainder not higher weight"):
        scale_model(lewy(), WeightVector((1, 3)))


def test_real_witness_examples():
    assert str(real_witness(model("ex315"))) == "w3"
    assert str(real_witness(spec("ex35"))) == "-i*Z3"
    assert real_witness(check_homogeneous(ex223(), WeightVector((1, 2, 4)))) == "minimal"
    assert str(real_witness(check_homogeneous(flat(), WeightVector((1, 2))))) == "w"


def test_real_witness_weighted_ansatz():
    # The second row is flat, so M^3 is not minimal and w2 itself is real.
    m = from_rigid([poly("z*conj(z)", ZC), Poly.zero(ZC)], ("z",), ("w1", "w2"))
    h = real_witness(check_homogeneous(m, WeightVector((1, 2, 4))))
    assert str(h) == "w2"
    assert verify_real_on_M(h, m)


def test_verify_real_on_M_examples():
    assert verify_real_on_M(poly("w", ("z", "w")), flat()).ok
    chk = verify_real_on_M(poly("z", ("z", "w")), spec("lewy"))
    assert not chk.ok and chk.degree == 1
    assert verify_real_on_M(poly("w3", ("z", "w1", "w2", "w3")), spec("ex315")).ok


def test_h2_identity_by_ideal_membership():
    # Z1^2 - i Z3 = Z1 (Z1 + conj Z1) on M, so (Z1^2 - i Z3)/(2 Z1) = Re Z1.
    s = spec("ex35")
    g = ideal_membership(poly("Z1^2 - i*Z3 - Z1*(Z1 + conj(Z1))", s.allvars), s, 0)
    assert g is not None
    assert [str(x) for x in g] == ["-i", "1", "0"]
    assert ideal_membership(poly("Z1", s.allvars), s, 1) is None


def test_ex315_twist():
    s = spec("ex315")
    tw = nonalgebraic_selfmap(s, poly("w3", s.coords), (1, 0, 0, 0), gq(0, 1))
    assert [str(c) for c in tw.to_map().components] == ["exp(i*w3)*z", "w1", "w2", "w3"]
    assert tw.check.ok and tw.check.order == 10
    assert tw.jacobian_invertible and tw.nonalgebraic


def test_ex316_twist():
    s = spec("ex316")
    tw = nonalgebraic_selfmap(s, poly("w2", s.coords), (1, 0, 0, 0), gq(0, 1), recenter=False, jacobian_point=PointQ((0, 0, 0, 0)))
    assert [str(c) for c in tw.to_map().components] == ["exp(i*w2)*z1", "z2", "w1", "w2"]
    assert tw.check.ok and tw.jacobian_invertible


def test_zero_h_gives_identity():
    s = spec("ex315")
    tw = nonalgebraic_selfmap(s, Poly.zero(s.coords), (1, 0, 0, 0), gq(0, 1))
    assert not tw.nonalgebraic
    assert is_identity(tw.to_map())


def test_twist_with_non_real_h_fails():
    s = spec("lewy")
    with pytest.raises(ValueError, match="tangency residual"):
        nonalgebraic_selfmap(s, poly("z", s.coords), (1, 0), gq(0, 1))


def test_hyperplane_map_fixes_the_set():
    s = parse_manifold("manifold line in C^2\nvars z, w\neq Re(w) = 0\neq Im(w) = 0\n")
    dm = degenerate_selfmap(s)
    assert dm.exact and dm.nonalgebraic and dm.check.ok
    assert [str(c) for c in dm.map.components] == ["z", "w*exp(w)"]
    assert verify_map(dm.map, s).ok


def test_hyperplane_map_requires_containment():
    with pytest.raises(ValueError, match="not contained"):
        degenerate_selfmap(spec("lewy"))


def test_degen3_flow():
    m = from_rigid([poly("z1*conj(z1)", ("z1", "conj(z1)"))], ("z1", "z2"), ("w",))
    zw = m.zs + m.ws
    X = VectorFieldSpec(m.zs, (Poly.zero(zw), Poly.const(1, zw)))
    dm = degenerate_selfmap(m, X)
    assert dm.nonalgebraic and dm.check.ok
    assert str(dm.map.components[0]) == "z1" and str(dm.map.components[2]) == "w"


def test_zero_field_flow_is_identity():
    m = from_rigid([poly("z1*conj(z1)", ("z1", "conj(z1)"))], ("z1", "z2"), ("w",))
    zw = m.zs + m.ws
    dm = degenerate_selfmap(m, VectorFieldSpec(m.zs, (Poly.zero(zw), Poly.zero(zw))))
    assert is_identity(dm.map)


def test_dichotomy_on_homogeneous_models():
    # Either a real witness exists, and with it a nonalgebraic twist, or the model is minimal.
    for m, w in ((ex223(), (1, 2, 4)), (lewy(), (1, 2)), (flat(), (1, 2))):
        hm = check_homogeneous(m, WeightVector(w))
        h = real_witness(hm)
        minimal = all(condition_231(hm).values()) and hm.r == m.d
        if h == "minimal":
            assert minimal
        else:
            assert not minimal
            # Real dilations along the weights: t = exp(h) with h real on M.
            tw = nonalgebraic_selfmap(hm, h, multiplier=1)
            assert tw.check.ok and tw.nonalgebraic
