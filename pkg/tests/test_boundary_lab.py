import math

import numpy as np
import pytest

from conelab import boundary_lab as bl
from conelab.cone_geometry import TIP, ConePoint, link_distance, link_geodesic, make_cone, pole, random_link
from conelab.link_spectrum import make_mode
from conelab.radial_calculus import GreenEvaluator, OperatorSpec, indicial_roots


@pytest.fixture(scope="module")
def cone():
    return make_cone(3, 3)


@pytest.fixture(scope="module")
def tip_chain(cone):
    return bl.build_phi_chain(cone, TIP, 12, 5.0 * cone.a)


# unfolded metric

def test_unfolded_point_roundtrip(cone):
    u, v = pole(cone)
    x = ConePoint(0.37, u, v)
    y = bl.UnfoldedPoint.from_cone(x)
    assert y.t == math.log(0.37) and y.to_cone().r == pytest.approx(0.37, rel=1e-15)


def test_unfolded_distance_antipodal_slice(cone):
    u, v = pole(cone)
    d = bl.unfolded_distance(cone, bl.UnfoldedPoint(0.3, u, v), bl.UnfoldedPoint(0.3, -u, -v))
    assert d == pytest.approx(math.sqrt(6) * math.pi, rel=1e-15)


def test_unfolded_distance_matches_helix_length(cone):
    # the straight line in (t, link geodesic) coordinates, measured through the embedding
    u0, v0 = pole(cone)
    u1, v1 = random_link(cone, np.random.default_rng(0))
    s = np.linspace(0.0, 1.0, 20001)
    uu, vv = link_geodesic(cone, u0, v0, u1, v1, s)
    t = -1.0 + 3.0 * s
    length = bl.unfolded_curve_length(cone, np.exp(t), uu, vv)
    d = bl.unfolded_distance(cone, bl.UnfoldedPoint(-1.0, u0, v0), bl.UnfoldedPoint(2.0, u1, v1))
    assert length == pytest.approx(d, rel=1e-8)
    assert d == pytest.approx(cone.a * math.hypot(3.0, float(link_distance(cone, u0, v0, u1, v1))), rel=1e-15)


def test_four_point_delta_zero_on_a_line():
    x = np.array([0.0, 1.3, 2.0, 5.5])
    d = lambda i, j: np.array([abs(x[i] - x[j])])
    assert bl.four_point_delta(d(0, 1), d(2, 3), d(0, 2), d(1, 3), d(0, 3), d(1, 2))[0] == 0.0


def test_gromov_delta_bounds_and_stability(cone):
    g1 = bl.gromov_delta_estimate(cone, 0, 100_000)
    g2 = bl.gromov_delta_estimate(cone, 0, 200_000)
    assert cone.a <= g1["delta_hat"] <= cone.a * (math.pi + 0.5)
    assert abs(g2["delta_hat"] - g1["delta_hat"]) / g1["delta_hat"] < 0.05
    assert g1["stability"] < 0.05


def test_gromov_rejects_tiny_sample(cone):
    with pytest.raises(ValueError):
        bl.gromov_delta_estimate(cone, 0, 10)


# chains

@pytest.mark.parametrize("at", [TIP, bl.INFINITY])
def test_chains_pass_verifier(cone, at):
    chain = bl.build_phi_chain(cone, at, 12, 5.0 * cone.a)
    rep = bl.verify_phi_chain(cone, chain)
    assert rep["passed"] and rep["nested"] and rep["spacing_ok"]
    assert rep["levels"] == 12
    if at == TIP:
        assert np.all(np.diff(chain.radii) < 0)
    else:
        assert np.all(np.diff(chain.radii) > 0)


def test_chain_hub_spacing(cone):
    delta = bl.gromov_delta_estimate(cone, 0, 10_000)["delta_hat"]
    chain = bl.build_phi_chain(cone, TIP, 4, 300 * delta)
    assert bl.verify_phi_chain(cone, chain)["passed"]


def test_chain_fit_failure(cone):
    with pytest.raises(bl.FitFailure):
        bl.build_phi_chain(cone, TIP, 12, 0.5 * cone.a)


def test_chain_rejects_bad_arguments(cone):
    with pytest.raises(ValueError):
        bl.build_phi_chain(cone, "nowhere", 12, 5.0)
    with pytest.raises(ValueError):
        bl.build_phi_chain(cone, TIP, 2, 5.0)


def test_chain_verifier_detects_broken_spacing(cone, tip_chain):
    import dataclasses
    squeezed = dataclasses.replace(tip_chain, levels=tip_chain.levels * 0.5)
    assert not bl.verify_phi_chain(cone, squeezed)["passed"]


# vanishing solutions

def test_pure_mode0_solution_positive(cone):
    sol = bl.vanishing_solution(cone, OperatorSpec.laplace(), TIP, [], [], [], c0=1.0)
    u, v = random_link(cone, np.random.default_rng(0), 50)
    r = np.geomspace(1e-6, 1e6, 50)
    assert np.all(sol(r, u, v) > 0)


def test_first_mode_exponent_and_positivity(cone):
    L = OperatorSpec.laplace()
    u0, v0 = pole(cone)
    sol = bl.vanishing_solution(cone, L, TIP, [0.9], [make_mode(cone, 1, 0)], [(u0, v0)])
    # gamma+ of (1,0) minus gamma+ of mode 0
    assert sol.exponents[0] == pytest.approx(1.0, abs=1e-15)
    assert sol.margin == pytest.approx(0.1)
    u, v = random_link(cone, np.random.default_rng(1), 200)
    r = np.geomspace(1e-4, 1.0, 200)
    assert np.all(sol(r, u, v) > 0)
    with pytest.raises(bl.PositivityUnverifiable):
        bl.vanishing_solution(cone, L, TIP, [1.1], [make_mode(cone, 1, 0)], [(u0, v0)])


def test_vanishing_relative_to_supersolution(cone):
    for op in (OperatorSpec.laplace(), OperatorSpec.jacobi()):
        sol = bl.sample_vanishing_solution(cone, op, TIP, np.random.default_rng(0))
        slope = bl.vanishing_ratio_slope(sol)
        assert slope > 0
        u0, v0 = pole(cone)
        r = np.array([1e-3, 1e-4])
        w = r ** -2.5
        ratio = sol(r, u0[None], v0[None]) / w
        assert math.log(ratio[1] / ratio[0]) / math.log(0.1) == pytest.approx(slope, abs=1e-3)


def test_sampled_solution_certified(cone):
    rng = np.random.default_rng(4)
    for at in (TIP, bl.INFINITY):
        sol = bl.sample_vanishing_solution(cone, OperatorSpec.laplace(), at, rng)
        assert sol.margin > 0
        if at == TIP:
            assert np.all(sol.exponents > 0)
        else:
            assert np.all(sol.exponents < 0)


# boundary Harnack and oscillation

def test_bhp_identical_pair(cone, tip_chain):
    s = bl.sample_vanishing_solution(cone, OperatorSpec.laplace(), TIP, np.random.default_rng(1))
    rep = bl.bhp_verify(cone, OperatorSpec.laplace(), tip_chain, pairs=[(s, s)])
    assert rep["per_level_max"] == [1.0] * 11
    tr = bl.oscillation_decay(cone, OperatorSpec.laplace(), tip_chain, s, s)
    assert tr.osc == [0.0] * 11


def test_bhp_single_mode_pair(cone, tip_chain):
    L = OperatorSpec.laplace()
    u0, v0 = pole(cone)
    u = bl.vanishing_solution(cone, L, TIP, [], [], [], c0=1.0)
    v = bl.vanishing_solution(cone, L, TIP, [0.5], [make_mode(cone, 1, 0)], [(u0, v0)], c0=1.0)
    rep = bl.bhp_verify(cone, L, tip_chain, pairs=[(u, v)])
    per = rep["per_level_max"]
    assert rep["C_hat"] <= 3.0
    assert all(b < a for a, b in zip(per, per[1:]) if a > 1 + 1e-15)
    # sup over N_1 of v/u: 1 + 0.5 (r_1 / 1)^1 on the first deep level
    r1 = tip_chain.radii[1]
    assert per[0] == pytest.approx((1 + 0.5 * r1) / (1 - 0.5 * r1), rel=1e-12)


def test_bhp_invariances(cone, tip_chain):
    L = OperatorSpec.laplace()
    rng = np.random.default_rng(11)
    u = bl.sample_vanishing_solution(cone, L, TIP, rng)
    v = bl.sample_vanishing_solution(cone, L, TIP, rng)
    a = bl.bhp_verify(cone, L, tip_chain, pairs=[(u, v)])
    b = bl.bhp_verify(cone, L, tip_chain, pairs=[(v, u)])
    np.testing.assert_allclose(a["per_level_max"], b["per_level_max"], rtol=1e-12)
    scaled = bl.vanishing_solution(cone, L, TIP, 3.0 * u.coeffs, u.modes, u.centers, c0=3.0 * u.c0)
    c = bl.bhp_verify(cone, L, tip_chain, pairs=[(scaled, v)])
    np.testing.assert_allclose(a["per_level_max"], c["per_level_max"], rtol=1e-12)
    assert int(np.argmax(a["per_level_max"])) == int(np.argmax(c["per_level_max"]))


def test_bhp_cross_cone_stability():
    L = OperatorSpec.laplace()
    hats = []
    for p, q in ((3, 3), (2, 4)):
        c = make_cone(p, q)
        hats.append(bl.bhp_verify(c, L, bl.build_phi_chain(c, TIP, 12, 5.0 * c.a), trials=100)["C_hat"])
    assert max(hats) / min(hats) <= 2.0


def test_bhp_at_infinity(cone):
    chain = bl.build_phi_chain(cone, bl.INFINITY, 10, 5.0 * cone.a)
    rep = bl.bhp_verify(cone, OperatorSpec.laplace(), chain, trials=20)
    assert rep["passed"]


def test_bhp_mismatched_boundary_points(cone, tip_chain):
    L = OperatorSpec.laplace()
    rng = np.random.default_rng(0)
    u = bl.sample_vanishing_solution(cone, L, TIP, rng)
    v = bl.sample_vanishing_solution(cone, L, bl.INFINITY, rng)
    with pytest.raises(ValueError):
        bl.bhp_verify(cone, L, tip_chain, pairs=[(u, v)])


def test_oscillation_single_mode_rate(cone, tip_chain):
    L = OperatorSpec.laplace()
    u0, v0 = pole(cone)
    u = bl.vanishing_solution(cone, L, TIP, [], [], [], c0=1.0)
    for k, coeff in (((1, 0), 0.5), ((1, 1), -0.3)):
        m = make_mode(cone, *k)
        v = bl.vanishing_solution(cone, L, TIP, [coeff], [m], [(u0, v0)], c0=1.0)
        tr = bl.oscillation_decay(cone, L, tip_chain, u, v)
        gap = float(indicial_roots(cone, L, m).gamma_plus - indicial_roots(cone, L, make_mode(cone, 0, 0)).gamma_plus)
        expected = (tip_chain.radii[1] / tip_chain.radii[0]) ** gap
        assert tr.rho_hat == pytest.approx(expected, rel=0.1)
        chk = bl.oscillation_checks(tr)
        assert chk["contracting"] and chk["monotone"] and chk["rate_matches"] and chk["limit_ok"]


def test_oscillation_random_pairs(cone, tip_chain):
    L = OperatorSpec.laplace()
    rng = np.random.default_rng(8)
    for i in range(10):
        u = bl.sample_vanishing_solution(cone, L, TIP, rng)
        v = bl.sample_vanishing_solution(cone, L, TIP, rng)
        tr = bl.oscillation_decay(cone, L, tip_chain, u, v, seed=i)
        chk = bl.oscillation_checks(tr)
        assert chk["contracting"] and chk["rate_matches"] and chk["limit_ok"]
        assert abs(tr.limit - u.c0 / v.c0) <= 1e-15 * tr.limit


def test_green_domination(cone):
    L = OperatorSpec.laplace()
    ge = GreenEvaluator(cone, L)
    rng = np.random.default_rng(2)
    for _ in range(3):
        sol = bl.sample_vanishing_solution(cone, L, TIP, rng, r_work=0.5)
        rep = bl.green_domination(ge, sol, [0.5, 0.1, 0.01])
        assert rep["positive"] and rep["nondecreasing"]
    with pytest.raises(ValueError):
        bl.green_domination(ge, bl.sample_vanishing_solution(cone, L, bl.INFINITY, rng), [0.5])


# Martin kernels and representation

@pytest.fixture(scope="module")
def martin_tip(cone):
    return bl.martin_kernel(cone, OperatorSpec.laplace(), TIP, n_max=12, directions=3)


def test_martin_tip(martin_tip):
    assert np.all(martin_tip.base_values == 1.0)
    assert martin_tip.direction_diff[-1] < 1e-4
    assert martin_tip.direction_diff[-1] < martin_tip.direction_diff[0]
    assert martin_tip.slope == pytest.approx(-5.0, abs=1e-3)
    assert martin_tip.slope_expected == -5.0


def test_martin_infinity(cone):
    est = bl.martin_kernel(cone, OperatorSpec.laplace(), bl.INFINITY, n_max=12, directions=3)
    assert est.slope == pytest.approx(0.0, abs=1e-3)
    # differences halve per doubling of the pole radius
    d = np.asarray(est.direction_diff)
    assert np.all(np.diff(d) < 0)
    np.testing.assert_allclose(d[-4:] / d[-5:-1], 0.5, atol=0.01)
    assert d[-1] < 1e-3 * d[0]


def test_martin_serializes(martin_tip):
    d = martin_tip.to_dict()
    assert d["normalization_max_error"] == 0.0 and len(d["pole_radii"]) == 12


def test_representation_fit(cone):
    L = OperatorSpec.laplace()
    r = np.geomspace(0.25, 4.0, 33)
    fit = bl.martin_representation_fit(cone, L, r ** -5.0, r)
    assert (fit["mu_0"], fit["mu_inf"]) == (pytest.approx(1.0, abs=1e-12), pytest.approx(0.0, abs=1e-12))
    assert fit["residual"] < 1e-10
    fit = bl.martin_representation_fit(cone, L, 2.0 * r ** -5.0 + 3.0, r)
    assert fit["mu_0"] == pytest.approx(2.0, rel=1e-12) and fit["mu_inf"] == pytest.approx(3.0, rel=1e-12)
    assert fit["residual"] < 1e-8
    fit = bl.martin_representation_fit(cone, L, r ** -2.0, r)
    assert not fit["representable"] and fit["residual"] > 1e-2
    r9 = np.geomspace(0.25, 1.0, 9)
    with pytest.raises(bl.NegativeCoefficient):
        bl.martin_representation_fit(cone, L, 2.0 * r9 ** -5.0 - 0.5, r9)


def test_fatou_atomic(cone):
    L = OperatorSpec.laplace()
    omega = 1.0 / (2.0 * cone.a)
    rep = bl.fatou_atomic(cone, L, (1.0, 1.0), (2.0, 1.0), omega)
    assert rep["tip"]["error"] <= 1e-5 and rep["tip"]["target"] == 0.5
    assert rep["infinity"]["error"] <= 1e-5 and rep["infinity"]["target"] == 1.0
    same = bl.fatou_atomic(cone, L, (2.0, 1.0), (2.0, 1.0), omega)
    assert all(x == 1.0 for x in same["tip"]["ratio"] + same["infinity"]["ratio"])
    with pytest.raises(bl.EmptyPencil):
        bl.fatou_atomic(cone, L, (1.0, 1.0), (2.0, 1.0), 2.0 / cone.a)
    none_inf = bl.fatou_atomic(cone, L, (1.0, 1.0), (2.0, 0.0), omega)
    assert none_inf["infinity"] is None and none_inf["passed"]


def test_pencil_tube(cone):
    omega = 1.0 / (2.0 * cone.a)
    zetas = [bl.pencil_tube_check(cone, omega, eta)["zeta_hat"] for eta in (1.0, 0.5, 0.25)]
    assert max(zetas) <= math.sqrt(6) * math.pi + 1e-6
    assert max(zetas) - min(zetas) <= 1e-9
    u0, v0 = pole(cone)
    assert bl.unfolded_distance(cone, bl.UnfoldedPoint(-3.0, u0, v0), bl.UnfoldedPoint(-3.0, u0, v0)) == 0.0
    with pytest.raises(bl.EmptyPencil):
        bl.pencil_tube_check(cone, 1.0 / cone.a, 1.0)
    with pytest.raises(ValueError):
        bl.pencil_tube_check(cone, omega, 0.0)


def test_dirichlet_hypotheses(cone):
    lap = bl.dirichlet_hypotheses(cone, OperatorSpec.laplace())
    assert lap["constants_harmonic"] and not lap["green_to_zero_at_tip"] and lap["green_to_zero_at_infinity"]
    assert not lap["solvable"] and lap["gamma_plus_0"] == 0.0 and lap["gamma_minus_0"] == -5.0
    jac = bl.dirichlet_hypotheses(cone, OperatorSpec.jacobi())
    assert not jac["constants_harmonic"] and not jac["solvable"]
    shifted = bl.dirichlet_hypotheses(cone, OperatorSpec.laplace(-1.0))
    assert not shifted["constants_harmonic"] and not shifted["solvable"]
    # the tip hypothesis now holds but the constants one fails
    assert shifted["green_to_zero_at_tip"]


def test_outputs_deterministic(cone, tip_chain):
    a = bl.bhp_verify(cone, OperatorSpec.laplace(), tip_chain, trials=10, seed=7)
    b = bl.bhp_verify(cone, OperatorSpec.laplace(), tip_chain, trials=10, seed=7)
    assert a == b
    assert bl.gromov_delta_estimate(cone, 3, 5000) == bl.gromov_delta_estimate(cone, 3, 5000)
