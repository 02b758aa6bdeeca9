"""Closed-form results for the continuous problem u'' + lam*exp(u) = 0, u(+-1) = 0.

The nontrivial branch is parameterised by alpha >= 0:

    u0(x) = -2 ln[cosh(alpha x) / cosh(alpha)],   lam0 = 2 (alpha / cosh(alpha))^2,

and its only critical point sits at the unique positive root of
alpha tanh(alpha) = 1. All formulas are evaluated through ln cosh so that they
stay finite far beyond alpha ~ 710 where cosh overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, QuadratureFailure

LN2 = math.log(2.0)


def log_cosh(z):
    """ln cosh(z) without overflow; accepts scalars or arrays."""
    a = np.abs(z)
    return a + np.log1p(np.exp(-2.0 * a)) - LN2


def _check_alpha(alpha, strict=False):
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha < 0 or (strict and alpha == 0):
        bound = "> 0" if strict else ">= 0"
        raise DomainError(f"alpha must be finite and {bound}, got {alpha}")
    return alpha


@dataclass(frozen=True)
class ExactBranchPoint:
    alpha: float
    lambda0: float
    u_star: float

    def u(self, x):
        """Pointwise u0(x) on [-1, 1]."""
        return exact_solution(self.alpha, x)


def exact_lambda(alpha: float) -> float:
    alpha = _check_alpha(alpha)
    if alpha == 0.0:
        return 0.0
    return math.exp(LN2 + 2.0 * math.log(alpha) - 2.0 * float(log_cosh(alpha)))


def exact_solution(alpha: float, x):
    """u0(x; alpha) = -2 ln[cosh(alpha x)/cosh(alpha)], vectorised over x."""
    alpha = _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    return -2.0 * (log_cosh(alpha * x) - log_cosh(alpha))


def exact_branch(alpha: float) -> ExactBranchPoint:
    alpha = _check_alpha(alpha)
    u_star = 2.0 * float(log_cosh(alpha))
    return ExactBranchPoint(alpha, exact_lambda(alpha), u_star)


def alpha_from_ustar(u_star: float) -> float:
    """Invert u* = 2 ln cosh(alpha), i.e. alpha = arccosh(exp(u*/2)).

    Uses alpha = u*/2 + ln(1 + sqrt(1 - exp(-u*))), finite for any u* >= 0.
    """
    u_star = float(u_star)
    if not math.isfinite(u_star) or u_star < 0:
        raise DomainError(f"u_star must be finite and >= 0, got {u_star}")
    return 0.5 * u_star + math.log1p(math.sqrt(-math.expm1(-u_star)))


def criticality_function(alpha):
    return alpha * np.tanh(alpha) - 1.0


def _criticality_derivative(alpha):
    return np.tanh(alpha) + alpha / np.cosh(alpha) ** 2


@dataclass(frozen=True)
class CriticalityRoot:
    alpha_bar: float
    lambda_bar: float
    u_star_bar: float
    inner_product: float


def solve_criticality(tol: float = 1e-15, max_iter: int = 50) -> float:
    """Unique positive root of alpha tanh(alpha) - 1.

    Newton from alpha = 1; any iterate leaving the bracket [0.5, 3] is
    replaced by a bisection step, so convergence does not hinge on the start.
    """
    lo, hi = 0.5, 3.0
    a = 1.0
    for _ in range(max_iter):
        f = criticality_function(a)
        if f < 0:
            lo = a
        else:
            hi = a
        if abs(f) <= tol:
            break
        step = a - f / _criticality_derivative(a)
        a = step if lo < step < hi else 0.5 * (lo + hi)
    return float(a)


def find_alpha_bar() -> CriticalityRoot:
    alpha = solve_criticality()
    branch = exact_branch(alpha)
    return CriticalityRoot(
        alpha_bar=alpha,
        lambda_bar=branch.lambda0,
        u_star_bar=branch.u_star,
        inner_product=inner_product_closed_form(alpha),
    )


def kernel_function(alpha: float, x):
    """w(x) = alpha x tanh(alpha x) - 1, the null function at the fold."""
    alpha = _check_alpha(alpha, strict=True)
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise DomainError("kernel_function is defined on [-1, 1]")
    return alpha * x * np.tanh(alpha * x) - 1.0


def legendre_general_solution(c1: float, c2: float, alpha: float, x):
    """c1 tanh(alpha x) + c2 (alpha x tanh(alpha x) - 1)."""
    alpha = _check_alpha(alpha, strict=True)
    ax = alpha * np.asarray(x, dtype=float)
    t = np.tanh(ax)
    return c1 * t + c2 * (ax * t - 1.0)


def legendre_solution_in_t(c1: float, c2: float, t):
    """The same family written in t = tanh(alpha x): c1 t + c2 (t artanh(t) - 1)."""
    t = np.asarray(t, dtype=float)
    return c1 * t + c2 * (t * np.arctanh(t) - 1.0)


def linearized_potential(alpha: float, x):
    """lam0 exp(u0(x)) = 2 (alpha / cosh(alpha x))^2, evaluated in log form."""
    alpha = _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    if alpha == 0.0:
        return np.zeros_like(x)
    return np.exp(LN2 + 2.0 * math.log(alpha) - 2.0 * log_cosh(alpha * x))


def inner_product_closed_form(alpha_bar: float) -> float:
    """-(1 + sinh(a) cosh(a)/a), i.e. <w, exp(u0)> at the fold."""
    a = _check_alpha(alpha_bar, strict=True)
    return -(1.0 + math.sinh(a) * math.cosh(a) / a)


def adaptive_simpson(f, a: float, b: float, atol: float = 1e-12, max_depth: int = 40) -> float:
    """Adaptive Simpson quadrature with Richardson correction.

    Raises:
        QuadratureFailure: when a subinterval needs more than ``max_depth``
            bisections to meet its share of ``atol``.
    """

    def simpson(fa, fm, fb, lo, hi):
        return (hi - lo) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(lo, hi, fa, fm, fb, whole, tol, depth):
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, lo, mid)
        right = simpson(fm, frm, fb, mid, hi)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        if depth >= max_depth:
            raise QuadratureFailure(f"depth {max_depth} exceeded on [{lo}, {hi}]")
        return recurse(lo, mid, fa, flm, fm, left, 0.5 * tol, depth + 1) + recurse(
            mid, hi, fm, frm, fb, right, 0.5 * tol, depth + 1
        )

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), atol, 0)


class InnerProductTest(NamedTuple):
    closed_form: float
    quadrature: float


def inner_product_limit_test(alpha_bar: float, atol: float = 1e-12, max_depth: int = 40) -> InnerProductTest:
    """Evaluate <w, exp(u0)> at ``alpha_bar`` in closed form and by quadrature.

    The integrand is (a x tanh(a x) - 1) cosh(a)^2 / cosh(a x)^2 on [-1, 1].

    Raises:
        DomainError: if ``alpha_bar`` is not a root of a tanh(a) = 1 to 1e-10.
        QuadratureFailure: from the adaptive quadrature.
    """
    a = _check_alpha(alpha_bar, strict=True)
    if abs(criticality_function(a)) > 1e-10:
        raise DomainError(f"alpha_bar = {a!r} does not satisfy a tanh(a) = 1")
    ch2 = math.cosh(a) ** 2

    def integrand(x):
        return (a * x * math.tanh(a * x) - 1.0) * ch2 / math.cosh(a * x) ** 2

    quad = adaptive_simpson(integrand, -1.0, 1.0, atol=atol, max_depth=max_depth)
    return InnerProductTest(inner_product_closed_form(a), quad)
