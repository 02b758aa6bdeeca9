"""Tridiagonal linear algebra.

Everything here works on O(n) storage: pivoted LU for (possibly indefinite)
tridiagonal matrices, solves of tridiagonal systems bordered by one extra row
and column, and Sturm-sequence bisection with inverse iteration for the
eigenpair of a symmetric tridiagonal matrix closest to zero.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import ConvergenceFailure, DomainError, SingularMatrix

EPS = np.finfo(float).eps
SAFMIN = np.finfo(float).tiny

# relative pivot threshold: |pivot| <= PIVOT_FACTOR * eps * ||A||_inf is singular
PIVOT_FACTOR = 1e2


def _frozen(values, length=None, name="vector"):
    arr = np.array(values, dtype=float).ravel()
    if length is not None and arr.size != length:
        raise DomainError(f"{name} must have length {length}, got {arr.size}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SymTridiag:
    """Symmetric tridiagonal matrix stored as its diagonal and one off-diagonal."""

    diag: np.ndarray
    off: np.ndarray

    def __post_init__(self):
        diag = _frozen(self.diag, name="diag")
        if diag.size < 1:
            raise DomainError("SymTridiag needs n >= 1")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "off", _frozen(self.off, diag.size - 1, "off"))

    @classmethod
    def from_constant(cls, n: int, diag: float, off: float) -> "SymTridiag":
        return cls(np.full(n, float(diag)), np.full(n - 1, float(off)))

    @property
    def n(self) -> int:
        return self.diag.size

    @property
    def lower(self) -> np.ndarray:
        return self.off

    @property
    def upper(self) -> np.ndarray:
        return self.off

    def matvec(self, x) -> np.ndarray:
        return _tridiag_matvec(self.off, self.diag, self.off, x)

    def norm_inf(self) -> float:
        return _tridiag_norm_inf(self.off, self.diag, self.off)

    def shifted(self, sigma: float) -> "SymTridiag":
        return SymTridiag(self.diag - sigma, self.off)

    def to_dense(self) -> np.ndarray:
        return _to_dense(self.off, self.diag, self.off)


@dataclass(frozen=True)
class Tridiag:
    """General (nonsymmetric) tridiagonal matrix."""

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        diag = _frozen(self.diag, name="diag")
        if diag.size < 1:
            raise DomainError("Tridiag needs n >= 1")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "lower", _frozen(self.lower, diag.size - 1, "lower"))
        object.__setattr__(self, "upper", _frozen(self.upper, diag.size - 1, "upper"))

    @property
    def n(self) -> int:
        return self.diag.size

    def matvec(self, x) -> np.ndarray:
        return _tridiag_matvec(self.lower, self.diag, self.upper, x)

    def norm_inf(self) -> float:
        return _tridiag_norm_inf(self.lower, self.diag, self.upper)

    def shifted(self, sigma: float) -> "Tridiag":
        return Tridiag(self.lower, self.diag - sigma, self.upper)

    def to_dense(self) -> np.ndarray:
        return _to_dense(self.lower, self.diag, self.upper)


@dataclass(frozen=True)
class BorderedSystem:
    """The (n+1)x(n+1) matrix [[core, border_col], [border_row^T, corner]]."""

    core: SymTridiag | Tridiag
    border_col: np.ndarray
    border_row: np.ndarray
    corner: float

    def __post_init__(self):
        n = self.core.n
        object.__setattr__(self, "border_col", _frozen(self.border_col, n, "border_col"))
        object.__setattr__(self, "border_row", _frozen(self.border_row, n, "border_row"))
        object.__setattr__(self, "corner", float(self.corner))

    @property
    def n(self) -> int:
        return self.core.n

    def matvec(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        x, y = z[:-1], z[-1]
        top = self.core.matvec(x) + self.border_col * y
        return np.append(top, self.border_row @ x + self.corner * y)

    def norm_inf(self) -> float:
        core = self.core
        rows = np.abs(core.diag) + np.abs(self.border_col)
        rows[1:] += np.abs(core.lower)
        rows[:-1] += np.abs(core.upper)
        last = np.abs(self.border_row).sum() + abs(self.corner)
        return float(max(rows.max(), last))

    def to_dense(self) -> np.ndarray:
        n = self.n
        m = np.zeros((n + 1, n + 1))
        m[:n, :n] = self.core.to_dense()
        m[:n, n] = self.border_col
        m[n, :n] = self.border_row
        m[n, n] = self.corner
        return m


def _tridiag_matvec(lower, diag, upper, x):
    x = np.asarray(x, dtype=float)
    y = diag * x
    if x.size > 1:
        y[1:] += lower * x[:-1]
        y[:-1] += upper * x[1:]
    return y


def _tridiag_norm_inf(lower, diag, upper):
    rows = np.abs(diag).copy()
    rows[1:] += np.abs(lower)
    rows[:-1] += np.abs(upper)
    return float(rows.max())


def _to_dense(lower, diag, upper):
    return np.diag(diag) + np.diag(lower, -1) + np.diag(upper, 1)


class TridiagLU:
    """Partial-pivoting LU factors of a tridiagonal matrix (LAPACK gttrf layout).

    Args:
        matrix: a ``SymTridiag`` or ``Tridiag``.
        perturb: when True, pivots below the singularity threshold are
            replaced by the threshold (sign kept) instead of raising. Used by
            inverse iteration, where the shifted matrix is singular by design.
    """

    def __init__(self, matrix, perturb: bool = False):
        n = matrix.n
        dl = matrix.lower.tolist()
        d = matrix.diag.tolist()
        du = matrix.upper.tolist()
        du2 = [0.0] * max(n - 2, 0)
        ipiv = list(range(n))
        norm = matrix.norm_inf()
        thresh = PIVOT_FACTOR * EPS * norm if norm > 0 else SAFMIN
        swaps = 0
        for i in range(n - 1):
            if abs(d[i]) >= abs(dl[i]):
                if d[i] == 0.0:
                    fact = 0.0
                else:
                    fact = dl[i] / d[i]
                dl[i] = fact
                d[i + 1] -= fact * du[i]
            else:
                fact = d[i] / dl[i]
                d[i] = dl[i]
                dl[i] = fact
                temp = du[i]
                du[i] = d[i + 1]
                d[i + 1] = temp - fact * d[i + 1]
                if i < n - 2:
                    du2[i] = du[i + 1]
                    du[i + 1] = -fact * du[i + 1]
                ipiv[i] = i + 1
                swaps += 1
        for i in range(n):
            if not abs(d[i]) > thresh:
                if not perturb or not np.isfinite(d[i]):
                    raise SingularMatrix(
                        f"pivot {i} has magnitude {abs(d[i]):.3e} <= {thresh:.3e}"
                    )
                d[i] = thresh if d[i] >= 0.0 else -thresh
        self.n = n
        self.dl, self.d, self.du, self.du2, self.ipiv = dl, d, du, du2, ipiv
        self.swaps = swaps
        self.norm = norm

    def solve(self, b) -> np.ndarray:
        n = self.n
        x = [float(v) for v in np.asarray(b, dtype=float).ravel()]
        if len(x) != n:
            raise DomainError(f"rhs must have length {n}, got {len(x)}")
        dl, d, du, du2, ipiv = self.dl, self.d, self.du, self.du2, self.ipiv
        for i in range(n - 1):
            if ipiv[i] == i:
                x[i + 1] -= dl[i] * x[i]
            else:
                temp = x[i]
                x[i] = x[i + 1]
                x[i + 1] = temp - dl[i] * x[i]
        x[n - 1] /= d[n - 1]
        if n > 1:
            x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2]
        for i in range(n - 3, -1, -1):
            x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i]
        return np.array(x)

    def det_sign(self) -> int:
        negatives = sum(1 for p in self.d if p < 0.0)
        return -1 if (negatives + self.swaps) % 2 else 1

    def min_abs_pivot(self) -> float:
        return min(abs(p) for p in self.d)


def tridiag_solve(A, b) -> np.ndarray:
    """Solve ``A x = b`` by Gaussian elimination with partial pivoting.

    Raises:
        SingularMatrix: if a pivot falls below ``1e2 * eps * ||A||_inf``.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (A.n,):
        raise DomainError(f"rhs must have shape ({A.n},), got {b.shape}")
    return TridiagLU(A).solve(b)


def _pivmin(off_sq) -> float:
    big = float(np.max(off_sq)) if np.size(off_sq) else 0.0
    return SAFMIN * max(1.0, big)


def sturm_counts(A: SymTridiag, sigmas) -> np.ndarray:
    """Vectorised Sturm count: number of eigenvalues below each shift."""
    sigmas = np.asarray(sigmas, dtype=float)
    return _sturm_counts_batched(A.diag, A.off**2, sigmas)


def _sturm_counts_batched(diag, off_sq, sigmas):
    """Sturm counts for ``diag``/``off_sq`` of shape (..., n) against ``sigmas``.

    Leading dimensions of the matrix arrays broadcast against ``sigmas``.
    Zero pivots are replaced by ``-pivmin`` (LAPACK dstebz convention).
    """
    diag = np.asarray(diag, dtype=float)
    off_sq = np.asarray(off_sq, dtype=float)
    pivmin = _pivmin(off_sq)
    n = diag.shape[-1]
    q = diag[..., 0] - sigmas
    q = np.where(np.abs(q) < pivmin, -pivmin, q)
    count = (q < 0).astype(np.int64)
    for i in range(1, n):
        q = diag[..., i] - sigmas - off_sq[..., i - 1] / q
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        count = count + (q < 0)
    return count


def sturm_count(A: SymTridiag, sigma: float) -> int:
    """Number of eigenvalues of ``A`` strictly less than ``sigma``."""
    return int(sturm_counts(A, np.array([sigma]))[0])


def gershgorin_bounds(A: SymTridiag) -> tuple[float, float]:
    radius = np.zeros(A.n)
    radius[1:] += np.abs(A.off)
    radius[:-1] += np.abs(A.off)
    lo = float(np.min(A.diag - radius))
    hi = float(np.max(A.diag + radius))
    return lo, hi


def _bisect_eigenvalues(diag, off_sq, index, lo, hi, norm, sections=32, rtol=1e-13):
    """Multisection for eigenvalue number ``index`` (0-based, ascending).

    All arrays carry a leading batch dimension; ``lo``/``hi`` must satisfy
    count(lo) <= index < count(hi) elementwise.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    index = np.asarray(index)
    atol = 2.0 * EPS * np.asarray(norm, dtype=float)
    frac = np.arange(1, sections + 1) / (sections + 1)
    for _ in range(200):
        width = hi - lo
        tol = np.maximum(rtol * np.maximum(np.abs(lo), np.abs(hi)), atol)
        if np.all(width <= tol):
            break
        shifts = lo[:, None] + width[:, None] * frac[None, :]
        counts = _sturm_counts_batched(diag[:, None, :], off_sq[:, None, :], shifts)
        below = counts <= index[:, None]
        # number of shifts at which the target eigenvalue is still to the right
        k = below.sum(axis=1)
        new_lo = np.where(k > 0, shifts[np.arange(len(lo)), np.maximum(k - 1, 0)], lo)
        new_hi = np.where(k < sections, shifts[np.arange(len(lo)), np.minimum(k, sections - 1)], hi)
        lo, hi = new_lo, new_hi
    return 0.5 * (lo + hi)


class EigenPair(NamedTuple):
    mu: float
    psi: np.ndarray


def fix_sign(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` so its first largest-magnitude component is positive."""
    idx = int(np.argmax(np.abs(v)))
    return -v if v[idx] < 0 else v


def _start_vector(n):
    # fixed seed: reproducible and generically not orthogonal to any eigenvector
    return np.random.default_rng(12345).standard_normal(n)


def inverse_iteration(A, shift: float, max_iter: int = 8, rtol: float = 1e-10, stall_tol: float = 0.0):
    """Unit vector spanning the near-kernel of ``A - shift I``.

    Stops when ||A x - shift x|| <= rtol ||A||_inf, or when successive
    iterates differ by at most ``stall_tol`` (up to sign). One retry with a
    slightly perturbed shift is made before giving up.

    Raises:
        ConvergenceFailure: if neither attempt converges.
    """
    norm = max(A.norm_inf(), SAFMIN)
    n = A.n
    if n == 1:
        return np.ones(1)
    for attempt in range(2):
        s = shift if attempt == 0 else shift + 10.0 * EPS * norm * (1 + abs(shift) / norm)
        lu = TridiagLU(A.shifted(s), perturb=True)
        x = _start_vector(n)
        x /= np.linalg.norm(x)
        for _ in range(max_iter):
            y = lu.solve(x)
            ny = np.linalg.norm(y)
            if not np.isfinite(ny) or ny == 0.0:
                break
            y = y / ny
            change = min(np.linalg.norm(y - x), np.linalg.norm(y + x))
            x = y
            res = np.linalg.norm(A.matvec(x) - shift * x)
            if res <= rtol * norm or change <= stall_tol:
                return fix_sign(x)
    raise ConvergenceFailure(f"inverse iteration did not converge near shift {shift:.6e}")


def nearest_zero_eigenvalue(A: SymTridiag) -> tuple[float, int]:
    """Eigenvalue of smallest magnitude and the Sturm count at zero.

    Bisection runs to relative tolerance 1e-13, floored at 2 eps ||A||.
    """
    n = A.n
    norm = A.norm_inf()
    if norm == 0.0:
        return 0.0, 0
    glo, ghi = gershgorin_bounds(A)
    glo -= 2 * EPS * norm + SAFMIN
    ghi += 2 * EPS * norm + SAFMIN
    k = sturm_count(A, 0.0)
    idx, lo, hi = [], [], []
    if k > 0:
        idx.append(k - 1)
        lo.append(glo)
        hi.append(0.0)
    if k < n:
        idx.append(k)
        lo.append(0.0)
        hi.append(ghi)
    m = len(idx)
    diag = np.broadcast_to(A.diag, (m, n))
    off_sq = np.broadcast_to(A.off**2, (m, n - 1))
    vals = _bisect_eigenvalues(diag, off_sq, np.array(idx), lo, hi, np.full(m, norm))
    return float(vals[np.argmin(np.abs(vals))]), k


def eigen_nearest_zero(A: SymTridiag) -> EigenPair:
    """Eigenpair of ``A`` whose eigenvalue has the smallest magnitude.

    The eigenvector comes from inverse iteration, normalised to unit 2-norm
    with its first largest-magnitude component positive.
    """
    mu, _ = nearest_zero_eigenvalue(A)
    if A.norm_inf() == 0.0:
        psi = np.zeros(A.n)
        psi[0] = 1.0
        return EigenPair(0.0, psi)
    return EigenPair(mu, inverse_iteration(A, mu))


def eigenvalues_bisection(A: SymTridiag) -> np.ndarray:
    """All eigenvalues by Sturm bisection, ascending."""
    n = A.n
    norm = max(A.norm_inf(), SAFMIN)
    glo, ghi = gershgorin_bounds(A)
    glo -= 2 * EPS * norm + SAFMIN
    ghi += 2 * EPS * norm + SAFMIN
    diag = np.broadcast_to(A.diag, (n, n))
    off_sq = np.broadcast_to(A.off**2, (n, max(n - 1, 0)))
    return _bisect_eigenvalues(
        diag, off_sq, np.arange(n), np.full(n, glo), np.full(n, ghi), np.full(n, norm)
    )


def _block_solve(lu, S: BorderedSystem, rhs):
    f, g = rhs[:-1], rhs[-1]
    x1 = lu.solve(f)
    x2 = lu.solve(S.border_col)
    denom = S.corner - S.border_row @ x2
    if denom == 0.0 or not np.isfinite(denom):
        raise SingularMatrix("bordered Schur complement vanished")
    y = (g - S.border_row @ x1) / denom
    return np.append(x1 - x2 * y, y)


def bordered_solve(S: BorderedSystem, rhs, rtol: float = 1e3 * EPS) -> np.ndarray:
    """Solve the bordered system ``S z = rhs``.

    Block elimination through the pivoted tridiagonal factors of the core is
    tried first, with one step of iterative refinement. If the core is
    singular to working precision or the residual stays above
    ``rtol * (||S|| ||z|| + ||rhs||)``, the full bordered matrix is factored
    with partial pivoting instead.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (S.n + 1,):
        raise DomainError(f"rhs must have shape ({S.n + 1},), got {rhs.shape}")
    norm = S.norm_inf()

    def acceptable(z):
        if not np.all(np.isfinite(z)):
            return False
        r = rhs - S.matvec(z)
        scale = norm * np.max(np.abs(z)) + np.max(np.abs(rhs))
        return np.max(np.abs(r)) <= rtol * scale

    try:
        lu = TridiagLU(S.core)
        z = _block_solve(lu, S, rhs)
        if acceptable(z):
            return z
        z = z + _block_solve(lu, S, rhs - S.matvec(z))
        if acceptable(z):
            return z
    except SingularMatrix:
        pass
    dense = S.to_dense()
    try:
        # singularity is judged by the pivot test below, not by scipy's warning
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            factors = scipy.linalg.lu_factor(dense, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SingularMatrix(f"bordered fallback failed: {exc}") from exc
    pivots = np.abs(np.diag(factors[0]))
    if pivots.min() <= PIVOT_FACTOR * EPS * norm:
        raise SingularMatrix("bordered matrix is singular to working precision")
    z = scipy.linalg.lu_solve(factors, rhs)
    if not np.all(np.isfinite(z)):
        raise SingularMatrix("bordered fallback produced non-finite values")
    return z
