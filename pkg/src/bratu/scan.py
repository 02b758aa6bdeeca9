"""Alpha-sweeps for nontrivial kernels of the discretised linearised operator.

Two discretisations of the same continuous operator are scanned:

* ``ORIGINAL_X``: w'' + 2 (alpha / cosh(alpha x))^2 w on the x-grid.
* ``LEGENDRE_T``: (1 - t^2) w'' - 2 t w' + 2 w on a uniform grid in
  t = tanh(alpha x), where alpha only enters through the end points.

A kernel exists exactly where the scan indicator changes sign.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from . import discretize as disc
from .errors import DomainError
from .linalg import (
    EPS,
    TridiagLU,
    _bisect_eigenvalues,
    _sturm_counts_batched,
    eigen_nearest_zero,
    fix_sign,
    inverse_iteration,
)

DEFAULT_STEPS = 2000
LOG_SPACING_FROM = 5.0
ROOT_TOL = 1e-10


class Form(str, enum.Enum):
    ORIGINAL_X = "original"
    LEGENDRE_T = "legendre"


@dataclass(frozen=True)
class ScanRoot:
    alpha: float
    indicator: float
    bracket: tuple[float, float]


@dataclass(frozen=True)
class ScanResult:
    form: Form
    n_elements: int
    alpha_grid: np.ndarray
    indicator: np.ndarray
    roots: list[ScanRoot]
    metadata: dict = field(default_factory=dict)


def alpha_samples(alpha_min: float, alpha_max: float, steps: int) -> np.ndarray:
    """Strictly increasing samples: uniform below 5, geometric above.

    The map xi -> alpha is the identity up to 5 and 5 exp((xi - 5)/5) beyond,
    so the spacing is continuous at the switch.
    """
    def to_xi(a):
        return a if a <= LOG_SPACING_FROM else LOG_SPACING_FROM * (1.0 + math.log(a / LOG_SPACING_FROM))

    xi = np.linspace(to_xi(alpha_min), to_xi(alpha_max), steps)
    alpha = np.where(
        xi <= LOG_SPACING_FROM, xi, LOG_SPACING_FROM * np.exp((xi - LOG_SPACING_FROM) / LOG_SPACING_FROM)
    )
    alpha[0], alpha[-1] = alpha_min, alpha_max
    return alpha


def _original_batch(grid: disc.Grid, alphas):
    """Diagonals (len(alphas), n) of the original-form operator; the off-diagonal is 1/h^2."""
    h = grid.h
    x = grid.interior
    logs = np.log(2.0) + 2.0 * np.log(alphas)[:, None] - 2.0 * analytic.log_cosh(alphas[:, None] * x[None, :])
    return -2.0 / h**2 + np.exp(logs)


def _original_indicator(grid: disc.Grid, alphas) -> tuple[np.ndarray, np.ndarray]:
    """Signed |mu_min| and Sturm counts at zero for each alpha.

    The sign is (-1)^(negative eigenvalue count), so it flips exactly when an
    eigenvalue crosses zero and the magnitude vanishes there.
    """
    alphas = np.asarray(alphas, dtype=float)
    n = grid.n_interior
    m = alphas.size
    diag = _original_batch(grid, alphas)
    off_sq = np.full((m, max(n - 1, 0)), 1.0 / grid.h**4)
    counts = _sturm_counts_batched(diag, off_sq, np.zeros(m))
    radius = np.full(n, 2.0 / grid.h**2)
    radius[0] = radius[-1] = 1.0 / grid.h**2 if n > 1 else 0.0
    glo = np.min(diag - radius, axis=1)
    ghi = np.max(diag + radius, axis=1)
    norm = np.max(np.abs(diag) + radius, axis=1)
    pad = 2 * EPS * norm
    rows, idx, lo, hi = [], [], [], []
    for j in range(m):
        k = int(counts[j])
        if k > 0:
            rows.append(j)
            idx.append(k - 1)
            lo.append(glo[j] - pad[j])
            hi.append(0.0)
        if k < n:
            rows.append(j)
            idx.append(k)
            lo.append(0.0)
            hi.append(ghi[j] + pad[j])
    rows = np.array(rows)
    vals = _bisect_eigenvalues(diag[rows], off_sq[rows], np.array(idx), lo, hi, norm[rows])
    mag = np.full(m, np.inf)
    np.minimum.at(mag, rows, np.abs(vals))
    sign = np.where(counts % 2 == 1, -1.0, 1.0)
    return sign * mag, counts


def _legendre_indicator(n_elements: int, alpha: float) -> float:
    """sign(det) times the smallest pivot of the row-equilibrated matrix."""
    A = disc.linearized_operator_legendre(n_elements, alpha)
    scale = np.abs(A.diag).copy()
    scale[1:] = np.maximum(scale[1:], np.abs(A.lower))
    scale[:-1] = np.maximum(scale[:-1], np.abs(A.upper))
    inv = 1.0 / scale
    scaled = type(A)(A.lower * inv[1:], A.diag * inv, A.upper * inv[:-1])
    lu = TridiagLU(scaled, perturb=True)
    return lu.det_sign() * lu.min_abs_pivot()


def validate_scan(form: Form, n_elements: int, alpha_min: float, alpha_max: float, steps: int):
    if not (math.isfinite(alpha_min) and math.isfinite(alpha_max) and 0 < alpha_min < alpha_max):
        raise DomainError(f"need 0 < alpha_min < alpha_max, got [{alpha_min}, {alpha_max}]")
    if steps < 2:
        raise DomainError("a scan needs at least 2 samples")
    if form is Form.LEGENDRE_T and alpha_max > disc.LEGENDRE_ALPHA_CAP:
        raise DomainError(f"Legendre form is capped at alpha <= {disc.LEGENDRE_ALPHA_CAP}")
    disc.Grid(n_elements)


def _refine_original(grid, a, ca, b, cb, out):
    """Bisection on the Sturm count until each unit crossing is isolated to ROOT_TOL."""
    if ca == cb:
        return
    if abs(ca - cb) > 1 and b - a > ROOT_TOL:
        m = 0.5 * (a + b)
        _, (cm,) = _original_indicator(grid, np.array([m]))
        _refine_original(grid, a, ca, m, int(cm), out)
        _refine_original(grid, m, int(cm), b, cb, out)
        return
    lo, hi, clo = a, b, ca
    while hi - lo > ROOT_TOL * max(1.0, lo):
        m = 0.5 * (lo + hi)
        _, (cm,) = _original_indicator(grid, np.array([m]))
        if cm == clo:
            lo = m
        else:
            hi = m
    root = 0.5 * (lo + hi)
    ind, _ = _original_indicator(grid, np.array([root]))
    out.append(ScanRoot(float(root), float(ind[0]), (float(a), float(b))))


def _refine_legendre(n_elements, a, fa, b, out):
    lo, hi = a, b
    slo = math.copysign(1.0, fa)
    while hi - lo > ROOT_TOL * max(1.0, lo):
        m = 0.5 * (lo + hi)
        fm = _legendre_indicator(n_elements, m)
        if math.copysign(1.0, fm) == slo:
            lo = m
        else:
            hi = m
    root = 0.5 * (lo + hi)
    out.append(ScanRoot(float(root), float(_legendre_indicator(n_elements, root)), (float(a), float(b))))


def scan_alpha(
    form: Form | str,
    n_elements: int,
    alpha_min: float = 0.1,
    alpha_max: float = 15.0,
    steps: int = DEFAULT_STEPS,
) -> ScanResult:
    """Sample the kernel indicator over alpha and refine every sign change.

    Raises:
        DomainError: on an empty or reversed range, fewer than 2 steps, or a
            Legendre scan beyond the alpha cap.
    """
    form = Form(form)
    validate_scan(form, n_elements, alpha_min, alpha_max, steps)
    alphas = alpha_samples(alpha_min, alpha_max, steps)
    roots: list[ScanRoot] = []
    if form is Form.ORIGINAL_X:
        grid = disc.Grid(n_elements)
        indicator, counts = _original_indicator(grid, alphas)
        for j in range(steps - 1):
            if counts[j] != counts[j + 1]:
                _refine_original(grid, alphas[j], int(counts[j]), alphas[j + 1], int(counts[j + 1]), roots)
        kind = "signed |mu_min|, sign = (-1)^(Sturm count at 0)"
    else:
        indicator = np.array([_legendre_indicator(n_elements, a) for a in alphas])
        for j in range(steps - 1):
            if np.sign(indicator[j]) != np.sign(indicator[j + 1]):
                _refine_legendre(n_elements, alphas[j], indicator[j], alphas[j + 1], roots)
        kind = "sign(det) * min |pivot| of the row-equilibrated matrix"
    meta = {
        "form": form.value,
        "n_elements": int(n_elements),
        "alpha_min": float(alpha_min),
        "alpha_max": float(alpha_max),
        "steps": int(steps),
        "spacing": f"uniform below {LOG_SPACING_FROM}, geometric above",
        "indicator": kind,
        "root_tolerance": ROOT_TOL,
    }
    return ScanResult(form, int(n_elements), alphas, indicator, roots, meta)


def kernel_vector(form: Form | str, n_elements: int, alpha_root: float) -> np.ndarray:
    """Unit null vector of the scanned operator at a root from ``scan_alpha``."""
    form = Form(form)
    if form is Form.ORIGINAL_X:
        return eigen_nearest_zero(disc.linearized_operator_original(disc.Grid(n_elements), alpha_root)).psi
    A = disc.linearized_operator_legendre(n_elements, alpha_root)
    return fix_sign(inverse_iteration(A, 0.0, max_iter=20, rtol=1e-8, stall_tol=1e-13))


def analytic_kernel_samples(form: Form | str, n_elements: int, alpha: float) -> np.ndarray:
    """w = alpha x tanh(alpha x) - 1 at the interior nodes of the scanned grid."""
    form = Form(form)
    if form is Form.ORIGINAL_X:
        return analytic.kernel_function(alpha, disc.Grid(n_elements).interior)
    t = disc.legendre_grid(n_elements, alpha)[1:-1]
    return analytic.legendre_solution_in_t(0.0, 1.0, t)
