import math

import mpmath
import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings
from hypothesis import strategies as st

from bratu import analytic as a
from bratu.errors import DomainError, QuadratureFailure

mpmath.mp.dps = 40


def mp_alpha_bar():
    return mpmath.findroot(lambda z: z * mpmath.tanh(z) - 1, 1.2)


def second_derivative(f, x, step):
    return (-f(x - 2 * step) + 16 * f(x - step) - 30 * f(x) + 16 * f(x + step) - f(x + 2 * step)) / (12 * step**2)


# ------------------------------------------------------------- exact branch


def test_branch_at_zero():
    p = a.exact_branch(0.0)
    assert (p.alpha, p.lambda0, p.u_star) == (0.0, 0.0, 0.0)
    np.testing.assert_array_equal(p.u(np.linspace(-1, 1, 7)), 0.0)


def test_branch_at_one_matches_extended_precision():
    p = a.exact_branch(1.0)
    lam = 2 * (1 / mpmath.cosh(1)) ** 2
    ustar = 2 * mpmath.log(mpmath.cosh(1))
    assert p.lambda0 == pytest.approx(float(lam), rel=1e-15)
    assert p.u_star == pytest.approx(float(ustar), rel=1e-15)
    assert p.lambda0 == pytest.approx(0.839949, abs=1e-6)


@pytest.mark.parametrize("alpha", [0.3, 1.0, 7.0, 45.0, 300.0, 800.0, 5000.0])
def test_branch_log_stable_against_mpmath(alpha):
    p = a.exact_branch(alpha)
    al = mpmath.mpf(alpha)
    assert p.u_star == pytest.approx(float(2 * mpmath.log(mpmath.cosh(al))), rel=1e-14)
    assert p.lambda0 == pytest.approx(float(2 * (al / mpmath.cosh(al)) ** 2), rel=1e-12)
    assert math.isfinite(p.u_star)


@pytest.mark.parametrize("alpha", [0.5, 3.0, 50.0, 900.0])
def test_boundary_values_vanish(alpha):
    np.testing.assert_allclose(a.exact_solution(alpha, np.array([-1.0, 1.0])), 0.0, atol=1e-12 * max(1, alpha))


@pytest.mark.parametrize("bad", [-1.0, math.inf, math.nan])
def test_branch_rejects_bad_alpha(bad):
    with pytest.raises(DomainError):
        a.exact_branch(bad)


def test_alpha_from_ustar_zero():
    assert a.alpha_from_ustar(0.0) == 0.0


@pytest.mark.parametrize("alpha", [0.5, 1.0, 5.0, 40.0])
def test_alpha_round_trip(alpha):
    assert a.alpha_from_ustar(a.exact_branch(alpha).u_star) == pytest.approx(alpha, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 600.0))
def test_alpha_round_trip_property(alpha):
    assert a.alpha_from_ustar(a.exact_branch(alpha).u_star) == pytest.approx(alpha, rel=1e-11)


def test_alpha_from_large_ustar():
    u = mpmath.mpf("83.9083")
    ref = mpmath.acosh(mpmath.exp(u / 2))
    alpha = a.alpha_from_ustar(83.9083)
    assert alpha == pytest.approx(float(ref), rel=1e-14)
    assert alpha == pytest.approx(42.647, abs=5e-4)
    assert a.exact_lambda(alpha) == pytest.approx(1.1e-33, rel=0.05)


def test_alpha_from_ustar_rejects_negative():
    with pytest.raises(DomainError):
        a.alpha_from_ustar(-0.1)


# -------------------------------------------------------------- criticality


def test_bracket_signs():
    assert a.criticality_function(1.0) < 0 < a.criticality_function(2.0)


def test_alpha_bar_against_bisection_and_mpmath():
    root = a.find_alpha_bar()
    bis = scipy.optimize.bisect(a.criticality_function, 1.0, 1.5, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    assert root.alpha_bar == pytest.approx(bis, abs=1e-14)
    assert root.alpha_bar == pytest.approx(float(mp_alpha_bar()), abs=1e-15)
    assert abs(a.criticality_function(root.alpha_bar)) <= 1e-14


def test_criticality_root_fields():
    root = a.find_alpha_bar()
    ab = mp_alpha_bar()
    assert root.lambda_bar == pytest.approx(float(2 * (ab / mpmath.cosh(ab)) ** 2), rel=1e-14)
    assert root.u_star_bar == pytest.approx(float(2 * mpmath.log(mpmath.cosh(ab))), rel=1e-14)
    assert root.inner_product == pytest.approx(float(-(1 + mpmath.sinh(ab) * mpmath.cosh(ab) / ab)), rel=1e-14)
    assert root.lambda_bar == pytest.approx(0.878457, abs=1e-6)
    assert root.u_star_bar == pytest.approx(1.18684, abs=1e-5)
    assert root.inner_product < 0


def test_lambda_maximum_is_at_alpha_bar():
    res = scipy.optimize.minimize_scalar(lambda z: -a.exact_lambda(z), bounds=(0.1, 5.0), method="bounded",
                                         options={"xatol": 1e-12})
    assert res.x == pytest.approx(a.find_alpha_bar().alpha_bar, abs=1e-6)
    # the maximum is flat, so compare values as well
    assert -res.fun == pytest.approx(a.find_alpha_bar().lambda_bar, rel=1e-14)
    grid = np.linspace(0.01, 30, 3000)
    lam = np.array([a.exact_lambda(z) for z in grid])
    assert int(np.argmax(lam)) not in (0, grid.size - 1)
    assert np.count_nonzero(np.diff(np.sign(np.diff(lam))) != 0) == 1


def test_monotonicity():
    ab = a.find_alpha_bar().alpha_bar
    grid = np.linspace(0.0, 50.0, 2001)
    ustar = [a.exact_branch(z).u_star for z in grid]
    assert np.all(np.diff(ustar) > 0)
    lower = np.linspace(0.0, ab, 500, endpoint=False)
    assert np.all(np.diff([a.exact_lambda(z) for z in lower]) > 0)


# ------------------------------------------------------------------- kernel


def test_kernel_centre_and_ends():
    ab = a.find_alpha_bar().alpha_bar
    for alpha in (0.2, 1.0, 3.0):
        assert a.kernel_function(alpha, 0.0) == -1.0
    np.testing.assert_allclose(a.kernel_function(ab, np.array([-1.0, 1.0])), 0.0, atol=1e-15)


def test_kernel_is_even():
    x = np.linspace(0, 1, 51)
    np.testing.assert_array_equal(a.kernel_function(2.3, x), a.kernel_function(2.3, -x))


def test_kernel_domain():
    with pytest.raises(DomainError):
        a.kernel_function(1.0, 1.5)
    with pytest.raises(DomainError):
        a.kernel_function(0.0, 0.5)


def test_legendre_general_solution_cases():
    assert a.legendre_general_solution(1.0, 0.0, 2.0, 0.0) == 0.0
    x = np.linspace(-1, 1, 21)
    np.testing.assert_array_equal(a.legendre_general_solution(0.0, 1.0, 1.7, x), a.kernel_function(1.7, x))


def test_legendre_boundary_conditions_force_c1_zero():
    # w(1) - w(-1) = 2 c1 tanh(alpha): the odd part survives unless c1 = 0
    for alpha in (0.5, 1.0, 2.0):
        diff = a.legendre_general_solution(1.0, 0.4, alpha, 1.0) - a.legendre_general_solution(1.0, 0.4, alpha, -1.0)
        assert diff == pytest.approx(2 * math.tanh(alpha), rel=1e-14)


def test_legendre_residual_in_t():
    c1, c2, alpha = 0.3, -0.7, 1.3
    t = np.linspace(-0.95 * math.tanh(alpha), 0.95 * math.tanh(alpha), 51)
    h = 2e-3

    def w(z):
        return a.legendre_solution_in_t(c1, c2, z)

    # sixth-order central stencils
    d1 = (-w(t - 3 * h) + 9 * w(t - 2 * h) - 45 * w(t - h) + 45 * w(t + h) - 9 * w(t + 2 * h) + w(t + 3 * h)) / (60 * h)
    d2 = (
        2 * w(t - 3 * h) - 27 * w(t - 2 * h) + 270 * w(t - h) - 490 * w(t)
        + 270 * w(t + h) - 27 * w(t + 2 * h) + 2 * w(t + 3 * h)
    ) / (180 * h**2)
    res = (1 - t**2) * d2 - 2 * t * d1 + 2 * w(t)
    assert np.max(np.abs(res)) <= 1e-9
    # and the t-form agrees with the x-form
    x = np.arctanh(t) / alpha
    np.testing.assert_allclose(w(t), a.legendre_general_solution(c1, c2, alpha, x), rtol=1e-12, atol=1e-14)


# ---------------------------------------------------- differential equations


@pytest.mark.parametrize("alpha", [0.5, 1.0, "bar", 5.0, 20.0])
def test_exact_solution_satisfies_ode(alpha):
    if alpha == "bar":
        alpha = a.find_alpha_bar().alpha_bar
    lam = a.exact_lambda(alpha)
    step = 6e-3 / alpha
    x = np.linspace(-1 + 2 * step, 1 - 2 * step, 301)
    d2 = second_derivative(lambda z: a.exact_solution(alpha, z), x, step)
    res = d2 + lam * np.exp(a.exact_solution(alpha, x))
    # |u''| peaks at 2 alpha^2 (x = 0); round-off in the stencil scales with it
    assert np.max(np.abs(res)) / (2 * alpha**2) <= 1e-7


@pytest.mark.parametrize("alpha", [0.5, 1.0, "bar", 5.0, 20.0])
def test_kernel_satisfies_linearized_ode(alpha):
    if alpha == "bar":
        alpha = a.find_alpha_bar().alpha_bar
    step = 6e-3 / alpha
    x = np.linspace(-1 + 2 * step, 1 - 2 * step, 301)
    d2 = second_derivative(lambda z: a.kernel_function(alpha, z), x, step)
    res = d2 + a.linearized_potential(alpha, x) * a.kernel_function(alpha, x)
    assert np.max(np.abs(res)) / (2 * alpha**2) <= 1e-7


def test_linearized_potential_equals_lambda_exp_u():
    for alpha in (0.5, 2.0, 30.0):
        x = np.linspace(-1, 1, 41)
        np.testing.assert_allclose(
            a.linearized_potential(alpha, x),
            a.exact_lambda(alpha) * np.exp(a.exact_solution(alpha, x)),
            rtol=1e-12,
        )


# ----------------------------------------------------------- inner product


def test_inner_product_closed_form_and_quadrature():
    ab = a.find_alpha_bar().alpha_bar
    res = a.inner_product_limit_test(ab)
    assert res.closed_form == pytest.approx(-3.2767, abs=1e-4)
    assert abs(res.quadrature - res.closed_form) <= 1e-8 * abs(res.closed_form)
    assert res.closed_form < 0 and res.quadrature < 0


def test_inner_product_matches_mpmath_quadrature():
    ab = mp_alpha_bar()
    ref = mpmath.quad(lambda x: (ab * x * mpmath.tanh(ab * x) - 1) * mpmath.cosh(ab) ** 2 / mpmath.cosh(ab * x) ** 2,
                      [-1, 0, 1])
    assert a.inner_product_limit_test(float(ab)).quadrature == pytest.approx(float(ref), rel=1e-11)


def test_adaptive_simpson_polynomial_and_failure():
    assert a.adaptive_simpson(lambda x: x**3 - x, 0.0, 2.0) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(QuadratureFailure):
        a.adaptive_simpson(lambda x: np.sign(x - 0.3) * abs(x - 0.3) ** -0.9, 0.0, 1.0, max_depth=8)


def test_inner_product_requires_root():
    with pytest.raises(DomainError):
        a.inner_product_limit_test(2.0)
