"""Finite-difference and linear finite-element discretisations.

Unknowns are the N-1 interior nodal values of a uniform mesh on [-1, 1]; the
Dirichlet values at x = +-1 are never stored. Both schemes keep the sign of
u'' + lam exp(u), so the tangent is negative definite near the trivial
solution and starts with N-1 negative eigenvalues.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .errors import DiscreteOverflow, DomainError
from .linalg import SymTridiag, Tridiag

# below this lam the product lam*exp(u) is formed as exp(ln lam + u)
FUSED_LAMBDA = 1e-250
# above this 1 - tanh(alpha)^2 is under machine epsilon and the t-grid degenerates
LEGENDRE_ALPHA_CAP = 19.0


class SchemeKind(str, enum.Enum):
    FINITE_DIFFERENCE = "fd"
    FINITE_ELEMENT = "fe"


@dataclass(frozen=True)
class Scheme:
    kind: SchemeKind = SchemeKind.FINITE_DIFFERENCE
    fe_quadrature_points: int = 3

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        if self.fe_quadrature_points not in (2, 3, 4):
            raise DomainError("fe_quadrature_points must be 2, 3 or 4")

    @classmethod
    def fd(cls) -> "Scheme":
        return cls(SchemeKind.FINITE_DIFFERENCE)

    @classmethod
    def fe(cls, quadrature_points: int = 3) -> "Scheme":
        return cls(SchemeKind.FINITE_ELEMENT, quadrature_points)

    @property
    def is_fe(self) -> bool:
        return self.kind is SchemeKind.FINITE_ELEMENT


@dataclass(frozen=True)
class Grid:
    """Uniform mesh of ``n_elements`` elements on [-1, 1], mirror-symmetric bit for bit."""

    n_elements: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = self.n_elements
        if isinstance(n, bool) or int(n) != n or n < 2:
            raise DomainError(f"n_elements must be an integer >= 2, got {n}")
        n = int(n)
        object.__setattr__(self, "n_elements", n)
        h = 2.0 / n
        nodes = np.empty(n + 1)
        half = n // 2
        left = -1.0 + h * np.arange(half + 1)
        nodes[: half + 1] = left
        nodes[n - half :] = -left[::-1]
        if n % 2 == 0:
            nodes[half] = 0.0
        nodes.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_interior(self) -> int:
        return self.n_elements - 1

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]


@dataclass(frozen=True)
class DiscreteState:
    grid: Grid
    u: np.ndarray
    lam: float

    def __post_init__(self):
        u = np.array(self.u, dtype=float).ravel()
        if u.size != self.grid.n_interior:
            raise DomainError(f"state needs {self.grid.n_interior} interior values, got {u.size}")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "lam", float(self.lam))

    @classmethod
    def zero(cls, grid: Grid) -> "DiscreteState":
        return cls(grid, np.zeros(grid.n_interior), 0.0)

    def full(self) -> np.ndarray:
        """Nodal values including the two zero boundary values."""
        return np.concatenate(([0.0], self.u, [0.0]))


def scaled_exp(lam: float, u):
    """lam * exp(u), formed in log space when lam is tiny.

    Raises:
        DiscreteOverflow: if the product itself is not finite.
    """
    u = np.asarray(u, dtype=float)
    if lam == 0.0:
        return np.zeros_like(u)
    with np.errstate(over="ignore"):
        if abs(lam) < FUSED_LAMBDA:
            out = math.copysign(1.0, lam) * np.exp(math.log(abs(lam)) + u)
        else:
            out = lam * np.exp(u)
    if not np.all(np.isfinite(out)):
        raise DiscreteOverflow(f"lam*exp(u) overflows (lam={lam:.3e}, max u={np.max(u):.3e})")
    return out


def _exp(u):
    with np.errstate(over="ignore"):
        out = np.exp(u)
    if not np.all(np.isfinite(out)):
        raise DiscreteOverflow(f"exp(u) overflows (max u={np.max(u):.3e})")
    return out


def _gauss(points: int):
    xi, w = np.polynomial.legendre.leggauss(points)
    return xi, w


def _element_values(state: DiscreteState, points: int):
    """u_h and the two hat functions at every element's Gauss points, shape (N, Q)."""
    full = state.full()
    xi, w = _gauss(points)
    phi_a = 0.5 * (1.0 - xi)
    phi_b = 0.5 * (1.0 + xi)
    uh = full[:-1, None] * phi_a[None, :] + full[1:, None] * phi_b[None, :]
    return uh, phi_a, phi_b, w


def _fe_load(state: DiscreteState, points: int, lam: float | None):
    """Element integrals of g(u_h) phi, assembled on interior nodes.

    ``g`` is lam*exp (lam given) or exp (lam None).
    """
    uh, phi_a, phi_b, w = _element_values(state, points)
    g = _exp(uh) if lam is None else scaled_exp(lam, uh)
    half_h = 0.5 * state.grid.h
    left = half_h * (g * (w * phi_a)).sum(axis=1)
    right = half_h * (g * (w * phi_b)).sum(axis=1)
    # interior node i collects the right end of element i-1 and left end of element i
    return right[:-1] + left[1:]


def _laplacian(u_full, h):
    return (u_full[:-2] - 2.0 * u_full[1:-1] + u_full[2:]) / h


def residual(scheme: Scheme, state: DiscreteState) -> np.ndarray:
    """Discrete F(u, lam).

    FD: (u[i-1] - 2u[i] + u[i+1]) / h^2 + lam exp(u[i]).
    FE: -int u_h' phi_i' + lam int exp(u_h) phi_i, load by Gauss-Legendre.
    """
    h = state.grid.h
    lap = _laplacian(state.full(), h)
    if scheme.is_fe:
        return lap + _fe_load(state, scheme.fe_quadrature_points, state.lam)
    return lap / h + scaled_exp(state.lam, state.u)


def tangent(scheme: Scheme, state: DiscreteState) -> SymTridiag:
    """Exact Jacobian of ``residual`` with respect to the interior values."""
    h = state.grid.h
    n = state.grid.n_interior
    if not scheme.is_fe:
        diag = -2.0 / h**2 + scaled_exp(state.lam, state.u)
        return SymTridiag(diag, np.full(n - 1, 1.0 / h**2))
    uh, phi_a, phi_b, w = _element_values(state, scheme.fe_quadrature_points)
    g = scaled_exp(state.lam, uh)
    half_h = 0.5 * h
    m_aa = half_h * (g * (w * phi_a * phi_a)).sum(axis=1)
    m_bb = half_h * (g * (w * phi_b * phi_b)).sum(axis=1)
    m_ab = half_h * (g * (w * phi_a * phi_b)).sum(axis=1)
    diag = -2.0 / h + (m_bb[:-1] + m_aa[1:])
    off = 1.0 / h + m_ab[1:-1]
    return SymTridiag(diag, off)


def dF_dlambda(scheme: Scheme, state: DiscreteState) -> np.ndarray:
    """Derivative of ``residual`` with respect to lam."""
    if scheme.is_fe:
        return _fe_load(state, scheme.fe_quadrature_points, None)
    return _exp(state.u)


def u_star(state: DiscreteState) -> float:
    """u at x = 0: the centre node for even N, else the mean of the two central nodes."""
    n = state.grid.n_elements
    u = state.u
    if n % 2 == 0:
        return float(u[n // 2 - 1])
    return float(0.5 * (u[(n - 1) // 2 - 1] + u[(n + 1) // 2 - 1]))


def sample_exact(grid: Grid, alpha: float) -> DiscreteState:
    """Nodal interpolant of the exact branch solution at ``alpha``."""
    point = analytic.exact_branch(alpha)
    return DiscreteState(grid, analytic.exact_solution(alpha, grid.interior), point.lambda0)


def linearized_operator_original(grid: Grid, alpha: float) -> SymTridiag:
    """FD matrix of w'' + 2 (alpha / cosh(alpha x))^2 w with w(+-1) = 0."""
    if not alpha > 0:
        raise DomainError(f"alpha must be > 0, got {alpha}")
    h = grid.h
    potential = analytic.linearized_potential(alpha, grid.interior)
    return SymTridiag(-2.0 / h**2 + potential, np.full(grid.n_interior - 1, 1.0 / h**2))


def legendre_grid(n_elements: int, alpha: float) -> np.ndarray:
    """Uniform t-nodes on [-tanh(alpha), tanh(alpha)] including both ends."""
    if not alpha > 0:
        raise DomainError(f"alpha must be > 0, got {alpha}")
    tmax = math.tanh(alpha)
    if 1.0 - tmax * tmax <= np.finfo(float).eps or alpha > LEGENDRE_ALPHA_CAP:
        raise DomainError(
            f"Legendre t-grid degenerates for alpha={alpha} (cap {LEGENDRE_ALPHA_CAP})"
        )
    unit = Grid(n_elements).nodes
    return tmax * unit


def linearized_operator_legendre(n_elements: int, alpha: float) -> Tridiag:
    """Central differences for (1 - t^2) w'' - 2 t w' + 2 w on the t-grid.

    The first-derivative term makes the matrix nonsymmetric.
    """
    t_all = legendre_grid(n_elements, alpha)
    ht = 2.0 * math.tanh(alpha) / n_elements
    t = t_all[1:-1]
    a = (1.0 - t * t) / ht**2
    b = t / ht
    lower = (a + b)[1:]
    upper = (a - b)[:-1]
    diag = -2.0 * a + 2.0
    return Tridiag(lower, diag, upper)
