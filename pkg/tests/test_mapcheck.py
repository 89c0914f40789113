from __future__ import annotations

import random

import pytest
import sympy
from hypothesis import given, settings, strategies as st

from conftest import CORPUS, gq, poly, spec, to_sympy
from crinv.cli import resolve
from crinv.dsl import parse_expr, parse_manifold, parse_map
from crinv.exactalg import Poly
from crinv.finitetype import is_minimal
from crinv.geometry import PointQ
from crinv.mapcheck import (
    ESeries,
    MapSpec,
    Num,
    Var,
    algebraic_dependence,
    exp,
    identity_map,
    leaf_chart,
    map_rank,
    reflection_fields,
    reflection_step_check,
    sqrt,
    verify_map,
)
from crinv.normalform import from_rigid, solve_normal

HALF = gq(1) / 2
P1 = PointQ((gq(0, 1), 0, gq(0, 1), 0))


def model(name, order=8):
    s = spec(name)
    return solve_normal(s, s.basepoint, order)


def load_map(name, s):
    return parse_map(resolve(name).read_text(), s)


def h35(s):
    allowed = set(s.allvars)
    return [parse_expr("-i*Z3", allowed), parse_expr("(Z1^2 - i*Z3)/(2*Z1)", allowed)]


@pytest.mark.parametrize("name", CORPUS)
def test_identity_is_tangent(name):
    s = spec(name)
    assert verify_map(identity_map(s), s, order=6).ok


def test_twist_and_its_inverse_compose_to_identity():
    s = spec("ex315")
    H = load_map("ex315_twist", s)
    Hinv = MapSpec(s.coords, (exp(Num(gq(0, -1)) * Var("w3")) * Var("z"), Var("w1"), Var("w2"), Var("w3")))
    assert verify_map(Hinv, s).ok
    G = H.compose(Hinv)
    env = {v: ESeries.of(Poly.var(v, s.coords)) for v in s.coords}
    for v, c in zip(s.coords, G.components):
        assert (c.evaluate(env, 10, s.coords) - env[v]).is_zero()
    assert verify_map(G, s).ok


def test_non_tangent_map_reports_residual():
    s = spec("lewy")
    H = MapSpec(s.coords, (Var("z"), Num(gq(2)) * Var("w")))
    chk = verify_map(H, s)
    assert not chk.ok and chk.component == 1 and chk.degree == 2


def test_map_on_non_generic_set():
    s = parse_manifold("manifold line in C^2\nvars z, w\neq Re(w) = 0\neq Im(w) = 0\n")
    assert verify_map(MapSpec(s.coords, (Var("z") * exp(Var("z")), Var("w") * exp(Var("w")))), s).ok
    assert not verify_map(MapSpec(s.coords, (Var("z"), Var("w") + Var("z"))), s).ok


def test_map_rank_examples():
    s = spec("ex315")
    assert map_rank(load_map("ex315_twist", s)) == 4
    assert map_rank(MapSpec(s.coords, (Num(gq(1)), Num(gq(2)), Num(gq(0)), Num(gq(3))))) == 0
    assert map_rank(MapSpec(s.coords, (Var("z"), Var("z"), Var("z"), Var("z")))) == 1
    assert map_rank(MapSpec(s.coords, (Var("w1") * Var("w2"), Var("w1"), Var("w2") ** 2, Var("z")))) == 3


def test_ex35_map_tangent():
    s = spec("ex35")
    H = load_map("ex35_map", s)
    chk = verify_map(H, s, order=8)
    assert chk.ok and chk.order == 8
    assert map_rank(H) == 4


def test_ex315_leaf_is_minimal():
    s = spec("ex315")
    leaf = leaf_chart(s, [Var("w3")], [HALF], PointQ((0, 0, 0, HALF)))
    assert leaf.solved == ("w3",) and leaf.free == ("z", "w1", "w2") and leaf.order is None
    assert leaf.generic
    assert is_minimal(solve_normal(leaf.slice_spec(), None, 8)).minimal is True
    zero = leaf_chart(s, [Var("w3")], [0], PointQ((0, 0, 0, 0)))
    assert is_minimal(solve_normal(zero.slice_spec(), None, 8)).minimal is False


def test_lewy_leaf_of_w():
    s = spec("lewy")
    leaf = leaf_chart(s, [Var("w")], [0])
    assert leaf.free == ("z",) and str(leaf.chart["w"]) == "0" and str(leaf.chart["z"]) == "z"


def test_leaf_center_must_lie_on_level():
    with pytest.raises(ValueError, match="does not take the value"):
        leaf_chart(spec("ex315"), [Var("w3")], [HALF], PointQ((0, 0, 0, 0)))


def test_ex35_leaf_chart_against_sympy():
    # h1 = 1 + dc1 gives Z3 = i(1 + dc1); h2 = dc2 gives Z1^2 - 2 dc2 Z1 + 1 + dc1 = 0
    # with the root through Z1 = i.
    s = spec("ex35")
    leaf = leaf_chart(s, h35(s), [1, 0], P1, order=8, deviations=True)
    assert leaf.solved == ("Z1", "Z3") and leaf.params == ("dc1", "dc2")
    a, b, t = sympy.symbols("dc1 dc2 t")
    z1 = b + sympy.I * sympy.sqrt(1 + a - b**2)
    ser = sympy.expand(sympy.series(z1.subs({a: t * a, b: t * b}), t, 0, 9).removeO().subs(t, 1))
    got = to_sympy(leaf.chart["Z1"]).subs({sympy.Symbol("dc1"): a, sympy.Symbol("dc2"): b})
    assert sympy.expand(got - ser) == 0
    assert to_sympy(leaf.chart["Z3"]) == sympy.expand(sympy.I * (1 + sympy.Symbol("dc1")))


def test_algebraic_dependence_sqrt():
    u = ("u",)
    f = sqrt(Num(gq(1)) + Var("u")).evaluate({"u": ESeries.of(Poly.var("u", u))}, 12, u)
    cert = algebraic_dependence(f, u, 1, 2, 12)
    assert cert.P == poly("X^2 - 1 - u", ("u", "X"))
    assert cert.degrees == (1, 2)


def test_algebraic_dependence_polynomial():
    u = ("x", "y")
    f = poly("x^2 + 3*x*y", u)
    cert = algebraic_dependence(f, u, 2, 1, 6)
    assert cert.P == poly("X - x^2 - 3*x*y", u + ("X",))


def test_exp_has_no_relation_at_overdetermined_bounds():
    u = ("u",)
    f = exp(Var("u")).evaluate({"u": ESeries.of(Poly.var("u", u))}, 20, u)
    assert algebraic_dependence(f, u, 2, 2, 20) is None
    # 49 unknowns against 21 equations: a kernel would be meaningless.
    assert algebraic_dependence(f, u, 6, 6, 20) is None


def test_ex315_per_leaf_certificates():
    s = spec("ex315")
    H = load_map("ex315_twist", s)
    leaf = leaf_chart(s, [Var("w3")], [HALF], PointQ((0, 0, 0, HALF)), order=10)
    env = {v: ESeries.of(leaf.chart[v]) for v in s.coords}
    certs = [algebraic_dependence(c.evaluate(env, 10, leaf.free), leaf.free, 1, 2, 10) for c in H.components]
    assert all(c is not None and c.degrees[1] <= 2 for c in certs)
    assert str(certs[0].P) == "-z + X" and certs[0].exp_factor == gq(0, 1) / 2
    full = {v: ESeries.of(Poly.var(v, s.coords)) for v in s.coords}
    assert algebraic_dependence(H.components[0].evaluate(full, 10, s.coords), s.coords, 1, 2, 10) is None


def test_reflection_fields_lewy():
    m = from_rigid([poly("z*conj(z)", ("z", "conj(z)"))], ("z",), ("w",))
    rf = reflection_fields(m)
    (L,) = rf.L
    assert rf.vars == ("z", "w", "conj(z)", "conj(w)")
    assert L.coeffs[2] == Poly.const(1, rf.vars)
    assert L.coeffs[3] == poly("-2*i*z", rf.vars)
    (Lt,) = rf.Ltilde
    assert Lt.coeffs[1] == poly("2*i*conj(z)", rf.vars)


@pytest.mark.parametrize("name", ["lewy", "ex223", "ex224", "ex315", "degen3", "ex35", "ex316"])
def test_reflection_fields_tangent(name):
    rf = reflection_fields(model(name, 6), check=True)
    assert len(rf.L) == len(rf.Ltilde) == len(rf.V) == model(name, 6).n


def test_reflection_step_on_twist():
    m = model("ex315")
    H = load_map("ex315_twist", spec("ex315"))
    chk = reflection_step_check(m, H, count=5)
    assert chk.ok and chk.ranks == (1,) * 5


@settings(max_examples=20, deadline=None)
@given(st.integers(-3, 3), st.integers(-3, 3))
def test_lewy_rotations_and_dilations_are_tangent(a, b):
    # z -> e^{ia + b} z, w -> e^{2b} w preserves Im w = |z|^2.
    s = spec("lewy")
    H = MapSpec(s.coords, (exp(Num(gq(b, a))) * Var("z"), exp(Num(gq(2 * b))) * Var("w")))
    assert verify_map(H, s, order=6).ok
    assert map_rank(H, rng=random.Random(0)) == 2
    bad = MapSpec(s.coords, (exp(Num(gq(b, a))) * Var("z"), exp(Num(gq(2 * b + 1))) * Var("w")))
    assert not verify_map(bad, s, order=6).ok
