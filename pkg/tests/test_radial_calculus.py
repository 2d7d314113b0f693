import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from conelab.cone_geometry import ConePoint, make_cone, pole, random_link
from conelab.link_spectrum import enumerate_modes, make_mode
from conelab.radial_calculus import (
    CriticalityError,
    GreenEvaluator,
    NotCoercive,
    OperatorSpec,
    TailNotConvergent,
    adaptedness_certificate,
    harmonic_residual,
    indicial_roots,
    lambda_star,
    mode_green,
    operator_on_power,
    operator_residual,
    remainder_bound,
    supersolution_factory,
    unfolded_principal_eigenvalue,
)


def test_indicial_jacobi_mode0(simons, jacobi):
    r = indicial_roots(simons, jacobi, make_mode(simons, 0, 0))
    assert r.disc == pytest.approx(0.25, abs=1e-15)
    assert (r.gamma_plus, r.gamma_minus) == (-2.0, -3.0)
    assert r.positive


def test_indicial_jacobi_translation_mode(simons, jacobi):
    # translations give degree-0 Jacobi fields on the (1,0) level
    r = indicial_roots(simons, jacobi, make_mode(simons, 1, 0))
    assert r.disc == pytest.approx(6.25, abs=1e-15)
    assert r.gamma_plus == 0.0 and r.gamma_minus == -5.0


def test_indicial_laplace_first_mode(simons, laplace):
    # disc = 25/4 + 6 = 49/4, so gamma+ = -5/2 + 7/2 = 1 exactly
    r = indicial_roots(simons, laplace, make_mode(simons, 1, 0))
    assert r.gamma_plus == 1.0 and r.gamma_minus == -6.0


def test_indicial_critical_and_oscillatory(simons, jacobi):
    crit = indicial_roots(simons, jacobi.shifted(1 / 24), make_mode(simons, 0, 0))
    assert crit.degenerate_flag and not crit.positive
    osc = indicial_roots(simons, jacobi.shifted(1 / 12), make_mode(simons, 0, 0))
    assert osc.oscillatory_flag and isinstance(osc.gamma_plus, complex)
    assert osc.gamma_plus.real == pytest.approx(-2.5)


@pytest.mark.parametrize("cone", [(3, 3), (2, 4), (2, 2), (4, 5)])
@pytest.mark.parametrize("op", [OperatorSpec.laplace(), OperatorSpec.jacobi(), OperatorSpec.laplace(-1.0)])
def test_root_sum_over_mode_table(cone, op):
    c = make_cone(*cone)
    for m in enumerate_modes(c, 200.0):
        r = indicial_roots(c, op, m)
        if r.positive:
            assert r.gamma_plus + r.gamma_minus == pytest.approx(-(c.n - 2), abs=1e-12)
            assert operator_on_power(c, op, float(r.gamma_plus), m.mu) == pytest.approx(0.0, abs=1e-9)


def test_lambda_star_values(simons, c24):
    assert lambda_star(simons, 1.0) == pytest.approx(1 / 24, abs=1e-16)
    assert lambda_star(simons, 0.0) == pytest.approx(25 / 24, abs=1e-15)
    assert lambda_star(c24, 1.0) == pytest.approx(1 / 24, abs=1e-16)


def test_adaptedness_coercivity(simons, jacobi):
    ok = adaptedness_certificate(simons, jacobi)
    assert ok.weakly_coercive and ok.eps_L == pytest.approx(1 / 24) and ok.k_L == pytest.approx(1.0)
    bad = adaptedness_certificate(simons, jacobi.shifted(1 / 24))
    assert not bad.weakly_coercive and bad.supersolution_exponent is None


@pytest.mark.parametrize("op,margin", [(OperatorSpec.jacobi(), 1 / 24), (OperatorSpec.laplace(), 25 / 24)])
def test_supersolution_plug_in(simons, op, margin):
    u = supersolution_factory(simons, op)
    assert u.exponent == -2.5 and u.margin == pytest.approx(margin, abs=1e-15)
    # symbolic: L r^g = (-g(g+n-2) + V) r^{g-2}, and <A>^2 = a^2 / r^2
    assert operator_on_power(simons, op, u.exponent) == pytest.approx(margin * simons.a ** 2, abs=1e-13)
    x = ConePoint(1.3, *pole(simons))
    fd = [operator_residual(simons, op, lambda r, a, b: u(r), x, h) for h in (2e-3, 1e-3)]
    extrapolated = (4 * fd[1] - fd[0]) / 3
    assert extrapolated == pytest.approx(margin * simons.a ** 2 / x.r ** 2 * u(x.r), rel=1e-7)


def test_supersolution_refused_at_lambda_star(simons, jacobi):
    with pytest.raises(NotCoercive):
        supersolution_factory(simons, jacobi.shifted(1 / 24))


@pytest.mark.parametrize("op", [OperatorSpec.jacobi(), OperatorSpec.laplace(), OperatorSpec.laplace(0.5)])
def test_unfolded_principal_eigenvalue(simons, op):
    expected = simons.a ** 2 * (lambda_star(simons, op.c_A) - op.lam)
    assert unfolded_principal_eigenvalue(simons, op) == pytest.approx(expected, abs=1e-10)


def test_mode_green_closed_form(simons, laplace):
    r0 = indicial_roots(simons, laplace, make_mode(simons, 0, 0))
    assert mode_green(r0, 1.0, 2.0) == pytest.approx(1 / 160, rel=1e-15)
    assert mode_green(r0, 2.0, 1.0) == mode_green(r0, 1.0, 2.0)


def _ode_green(n, V, r, s):
    """Matched solution of -(g'' + (n-1)/r g') + V/r^2 g = 0 with s^{n-1}[g'] = -1 by ODE integration."""
    half = (n - 2) / 2
    gp, gm = -half + math.sqrt(half * half + V), -half - math.sqrt(half * half + V)

    def rhs(x, y):
        return [y[1], -(n - 1) / x * y[1] + V / x ** 2 * y[0]]
    r_lo, r_hi = s * 1e-3, s * 1e3
    inner = solve_ivp(rhs, (r_lo, s), [r_lo ** gp, gp * r_lo ** (gp - 1)], rtol=1e-12, atol=1e-300, dense_output=True)
    outer = solve_ivp(rhs, (r_hi, s), [r_hi ** gm, gm * r_hi ** (gm - 1)], rtol=1e-12, atol=1e-300, dense_output=True)
    i_s, di_s = inner.sol(s)
    o_s, do_s = outer.sol(s)
    # A i(s) = B o(s), s^{n-1} (B o'(s) - A i'(s)) = -1
    M = np.array([[i_s, -o_s], [-di_s, do_s]])
    A, B = np.linalg.solve(M, [0.0, -s ** (1 - n)])
    return A * inner.sol(r)[0] if r < s else B * outer.sol(r)[0]


@pytest.mark.parametrize("op", [OperatorSpec.laplace(), OperatorSpec.jacobi()])
@pytest.mark.parametrize("k", [(0, 0), (1, 0), (1, 1)])
@pytest.mark.parametrize("rs", [(1.0, 2.0), (3.0, 1.5)])
def test_mode_green_matches_radial_ode(simons, op, k, rs):
    m = make_mode(simons, *k)
    roots = indicial_roots(simons, op, m)
    V = m.mu - op.c_A * simons.kappa
    assert mode_green(roots, *rs) == pytest.approx(_ode_green(simons.n, V, *rs), rel=1e-7)


def test_mode_green_refuses_critical(simons, jacobi):
    roots = indicial_roots(simons, jacobi.shifted(1 / 24), make_mode(simons, 0, 0))
    with pytest.raises(CriticalityError):
        mode_green(roots, 1.0, 2.0)
    with pytest.raises(CriticalityError):
        GreenEvaluator(simons, jacobi.shifted(1 / 24))


@pytest.fixture(scope="module")
def ge_lap():
    return GreenEvaluator(make_cone(3, 3), OperatorSpec.laplace(), tol=1e-10)


def test_green_on_axis_matches_mode_series(ge_lap, simons):
    u, v = pole(simons)
    val, tail, mu = ge_lap.green_with_bound(ConePoint(1.0, u, v), ConePoint(4.0, u, v))
    mode0 = 4.0 ** -5 / 5 / simons.link_volume()
    assert val > mode0
    # on a common ray every zonal factor is 1, so the series is sum mult * g_k / vol
    explicit = sum(m.mult * mode_green(indicial_roots(simons, OperatorSpec.laplace(), m), 1.0, 4.0)
                   for m in enumerate_modes(simons, 2000.0)) / simons.link_volume()
    assert val == pytest.approx(explicit, rel=1e-10)
    val2 = ge_lap.fixed(2 * mu + 1).green(ConePoint(1.0, u, v), ConePoint(4.0, u, v))
    assert abs(val - val2) <= tail + 1e-15 * val
    assert tail <= 1e-10 * val


def test_green_symmetry_positivity_homogeneity(ge_lap, simons, rng):
    rx = np.exp(rng.uniform(-1, 1, 20))
    ry = rx * np.exp(rng.choice([-1, 1], 20) * rng.uniform(0.5, 1.5, 20))
    ux, vx = random_link(simons, rng, 20)
    uy, vy = random_link(simons, rng, 20)
    a = ge_lap.evaluate(rx, ux, vx, ry, uy, vy).value
    b = ge_lap.evaluate(ry, uy, vy, rx, ux, vx).value
    np.testing.assert_array_equal(a, b)
    assert np.all(a > 0)
    s = ge_lap.evaluate(4 * rx, ux, vx, 4 * ry, uy, vy).value
    np.testing.assert_allclose(s, 4.0 ** (2 - simons.n) * a, rtol=1e-9)


def test_green_refuses_equal_radii(ge_lap, simons):
    u, v = pole(simons)
    with pytest.raises(TailNotConvergent):
        ge_lap.green(ConePoint(1.0, u, v), ConePoint(1.0, -u, v))


def test_green_fixed_truncation_too_small(ge_lap, simons):
    u, v = pole(simons)
    with pytest.raises(TailNotConvergent):
        ge_lap.fixed(0.0).green(ConePoint(1.0, u, v), ConePoint(1.2, u, v))


def test_green_finite_difference_residual(ge_lap, simons, rng):
    x = ConePoint(1.0, *pole(simons))
    y = ConePoint(3.0, *random_link(simons, rng))
    g = ge_lap.green(x, y)
    res = [abs(harmonic_residual(ge_lap, x, y, h)) for h in (2e-3, 1e-3, 5e-4)]
    assert res[1] < 1e-4 * g
    assert 3.0 < res[0] / res[1] < 5.0 and 3.0 < res[1] / res[2] < 5.0


def test_mode0_power_is_harmonic(simons, laplace):
    # exact harmonicity of r^{-5}: the analytic operator vanishes
    assert operator_on_power(simons, laplace, -5.0) == 0.0
    x = ConePoint(1.0, *pole(simons))
    R = [operator_residual(simons, laplace, lambda r, u, v: r ** -5.0, x, h) for h in (2e-3, 1e-3)]
    assert R[0] / R[1] == pytest.approx(4.0, rel=1e-3)
    # Richardson-extrapolated residual is at the h^4 / rounding level
    assert abs(4 * R[1] - R[0]) / 3 < 1e-8


def test_green_minimal_growth_slopes(ge_lap, simons, laplace):
    u0, v0 = pole(simons)
    y_u, y_v = random_link(simons, np.random.default_rng(5))
    r0 = indicial_roots(simons, laplace, make_mode(simons, 0, 0))
    near = np.array([1e-4, 2e-4])
    far = np.array([1e4, 2e4])
    g_near = ge_lap.evaluate(near, u0[None], v0[None], 1.0, y_u[None], y_v[None]).value
    g_far = ge_lap.evaluate(far, u0[None], v0[None], 1.0, y_u[None], y_v[None]).value
    assert math.log(g_near[1] / g_near[0]) / math.log(2) == pytest.approx(r0.gamma_plus, abs=1e-3)
    assert math.log(g_far[1] / g_far[0]) / math.log(2) == pytest.approx(r0.gamma_minus, abs=1e-3)


def test_remainder_bound_dominates_neglected_terms(simons, laplace):
    # compare the bound at degree d with the explicit sum of degrees d+1 .. 80
    from conelab.radial_calculus import mode_table
    rho, r_hi = 0.5, 2.0
    tab = mode_table(simons, laplace, 80)
    deg = tab.k1 + tab.k2
    g = rho ** tab.gamma_plus * r_hi ** (tab.gamma_plus + tab.gamma_minus) / (2 * tab.sqrt_disc)
    terms = g * tab.mult / simons.link_volume()
    for d in (4, 8, 16):
        explicit = float(np.sum(terms[deg > d]))
        assert remainder_bound(simons, float(tab.sqrt_disc[0]), rho, r_hi, d) >= explicit
