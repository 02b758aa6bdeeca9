"""Pseudo-arclength continuation of the discrete branch and its critical points.

The branch is traced from (u, lam) = (0, 0) with a secant predictor and a
Newton corrector on the bordered system [[F_u, F_lam], [a_u^T, a_lam]]. At
every accepted point the Sturm count of the tangent matrix at zero and the
eigenvalue nearest zero are recorded; a change in the count brackets a
critical point, which is then refined along the chord and classified by the
discrete range test |psi . F_lam| / (|psi| |F_lam|).
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import discretize as disc
from .errors import (
    BracketLost,
    DiscreteOverflow,
    DomainError,
    NoConvergence,
    SingularMatrix,
    StepFailure,
)
from .linalg import BorderedSystem, bordered_solve, eigen_nearest_zero, nearest_zero_eigenvalue

log = logging.getLogger(__name__)

LIMIT_POINT_THRESHOLD = 1e-6
AMBIGUOUS_BAND = (1e-8, 1e-4)


@dataclass(frozen=True)
class ContinuationConfig:
    ds_initial: float = 0.05
    ds_min: float = 1e-10
    ds_max: float = 0.5
    newton_tol: float = 1e-10
    newton_max_iters: int = 12
    target_u_star: float = 10.0
    theta: float = 0.5
    critical_bisection_tol: float = 1e-10
    lambda_floor: float = 1e-60
    max_steps: int = 20000
    # stop once the Sturm count has changed this many times (None: never)
    max_crossings: int | None = None
    # project Newton updates onto mirror-symmetric vectors
    enforce_symmetry: bool = True
    # reject steps whose secant turns by more than this many radians
    max_turn: float = 0.05

    def __post_init__(self):
        if not 0 < self.ds_min <= self.ds_initial <= self.ds_max:
            raise DomainError("need 0 < ds_min <= ds_initial <= ds_max")
        if not (self.newton_tol > 0 and self.critical_bisection_tol > 0 and self.lambda_floor > 0):
            raise DomainError("tolerances must be positive")
        if not 0 < self.theta < 1:
            raise DomainError("theta must lie in (0, 1)")
        if self.newton_max_iters < 1 or self.max_steps < 1:
            raise DomainError("iteration limits must be positive")
        if not math.isfinite(self.target_u_star):
            raise DomainError("target_u_star must be finite")
        if not self.max_turn > 0:
            raise DomainError("max_turn must be positive")
        if self.max_crossings is not None and self.max_crossings < 1:
            raise DomainError("max_crossings must be positive when given")


@dataclass(frozen=True)
class ArclengthConstraint:
    """Linear constraint a_u . (u - u_ref) + a_lam (lam - lam_ref) = ds."""

    u_ref: np.ndarray
    lam_ref: float
    a_u: np.ndarray
    a_lam: float
    ds: float

    def value(self, u, lam) -> float:
        return float(self.a_u @ (u - self.u_ref) + self.a_lam * (lam - self.lam_ref) - self.ds)

    @classmethod
    def natural(cls, state: disc.DiscreteState, dlam: float) -> "ArclengthConstraint":
        """Fix lam = state.lam + dlam."""
        n = state.u.size
        return cls(state.u, state.lam, np.zeros(n), 1.0, dlam)


class Weights:
    """Weighted inner product theta/(N-1) on u and (1 - theta) on lam."""

    def __init__(self, n_unknowns: int, theta: float):
        self.wu = theta / n_unknowns
        self.wl = 1.0 - theta

    def norm(self, du, dlam) -> float:
        return math.sqrt(self.wu * float(du @ du) + self.wl * dlam * dlam)

    def constraint(self, state, du, dlam, ds) -> ArclengthConstraint:
        """Hyperplane through ``state`` normal to the unit direction (du, dlam), offset ds."""
        return ArclengthConstraint(state.u, state.lam, self.wu * du, self.wl * dlam, ds)


@dataclass(frozen=True)
class Correction:
    state: disc.DiscreteState
    iterations: int
    history: tuple


def residual_scale(state: disc.DiscreteState) -> float:
    return max(1.0, float(np.max(np.abs(disc.scaled_exp(state.lam, state.u)), initial=0.0)))


def _symmetrize(v):
    return 0.5 * (v + v[::-1])


def newton_correct(
    scheme: disc.Scheme,
    guess: disc.DiscreteState,
    constraint: ArclengthConstraint,
    config: ContinuationConfig = ContinuationConfig(),
) -> Correction:
    """Newton's method on F(u, lam) = 0 augmented by ``constraint``.

    Converged when ||F||_inf <= tol * max(1, |lam| max exp(u)) and the
    constraint residual is below tol.

    Raises:
        NoConvergence: after ``newton_max_iters`` updates, or when a linear
            solve or the nonlinear term breaks down.
    """
    grid = guess.grid
    u = guess.u.copy()
    lam = guess.lam
    tol = config.newton_tol
    history = []
    for it in range(config.newton_max_iters + 1):
        state = disc.DiscreteState(grid, u, lam)
        try:
            F = disc.residual(scheme, state)
            scale = residual_scale(state)
        except DiscreteOverflow as exc:
            raise NoConvergence(str(exc), history) from exc
        g = constraint.value(u, lam)
        err = float(np.max(np.abs(F), initial=0.0))
        history.append(max(err / scale, abs(g)))
        if not math.isfinite(history[-1]):
            raise NoConvergence("non-finite residual", history)
        if err <= tol * scale and abs(g) <= tol:
            return Correction(state, it, tuple(history))
        if it == config.newton_max_iters:
            break
        try:
            system = BorderedSystem(
                disc.tangent(scheme, state),
                disc.dF_dlambda(scheme, state),
                constraint.a_u,
                constraint.a_lam,
            )
            dz = bordered_solve(system, -np.append(F, g))
        except (SingularMatrix, DiscreteOverflow) as exc:
            raise NoConvergence(f"linear solve failed: {exc}", history) from exc
        du = dz[:-1]
        if config.enforce_symmetry:
            du = _symmetrize(du)
        u = u + du
        lam = lam + dz[-1]
    raise NoConvergence(
        f"Newton stalled after {config.newton_max_iters} iterations (last {history[-1]:.3e})",
        history,
    )


@dataclass(frozen=True)
class BranchPoint:
    state: disc.DiscreteState
    s: float
    mu_min: float
    neg_count: int
    newton_iters: int
    u_star: float

    @property
    def lam(self) -> float:
        return self.state.lam


def _diagnose(scheme, state, s, iters) -> BranchPoint:
    mu, count = nearest_zero_eigenvalue(disc.tangent(scheme, state))
    return BranchPoint(state, s, mu, count, iters, disc.u_star(state))


class Trace(list):
    """List of accepted BranchPoints plus why tracing stopped."""

    def __init__(self, points=(), stop_reason: str = ""):
        super().__init__(points)
        self.stop_reason = stop_reason


def _should_stop(trace, config, crossings):
    last = trace[-1]
    if last.u_star >= config.target_u_star:
        return "target_u_star"
    if len(trace) > 1 and last.lam < config.lambda_floor and last.lam < trace[-2].lam:
        return "lambda_floor"
    if config.max_crossings is not None and crossings >= config.max_crossings:
        return "max_crossings"
    if len(trace) > config.max_steps:
        return "max_steps"
    return None


def trace_branch(
    scheme: disc.Scheme,
    grid: disc.Grid,
    config: ContinuationConfig = ContinuationConfig(),
) -> Trace:
    """Follow the branch from (0, 0) until a stop criterion fires.

    Raises:
        StepFailure: when the step size drops below ``ds_min``; the partial
            trace is attached as ``exc.trace``.
    """
    weights = Weights(grid.n_interior, config.theta)
    origin = disc.DiscreteState.zero(grid)
    trace = Trace([_diagnose(scheme, origin, 0.0, 0)])
    crossings = 0
    reason = _should_stop(trace, config, crossings)
    ds = config.ds_initial
    direction = None
    while reason is None:
        cur = trace[-1]
        if direction is None:
            guess = cur.state
            constraint = ArclengthConstraint.natural(cur.state, ds)
        else:
            du, dlam = direction
            guess = disc.DiscreteState(grid, cur.state.u + ds * du, cur.state.lam + ds * dlam)
            constraint = weights.constraint(cur.state, du, dlam, ds)
        try:
            corr = newton_correct(scheme, guess, constraint, config)
        except NoConvergence as exc:
            ds *= 0.5
            log.debug("step rejected (%s); ds -> %.3e", exc, ds)
            if ds < config.ds_min:
                raise StepFailure(f"step size {ds:.3e} below ds_min", Trace(trace, "step_failure")) from exc
            continue
        new = corr.state
        step_u, step_lam = new.u - cur.state.u, new.lam - cur.state.lam
        chord = weights.norm(step_u, step_lam)
        if direction is not None and ds > config.ds_min:
            cos = (weights.wu * float(du @ step_u) + weights.wl * dlam * step_lam) / chord
            if math.acos(min(1.0, max(-1.0, cos))) > config.max_turn:
                ds = max(0.5 * ds, config.ds_min)
                continue
        direction = (step_u / chord, step_lam / chord)
        point = _diagnose(scheme, new, cur.s + chord, corr.iterations)
        crossings += abs(point.neg_count - cur.neg_count)
        trace.append(point)
        if corr.iterations <= 3:
            ds = min(2.0 * ds, config.ds_max)
        reason = _should_stop(trace, config, crossings)
    trace.stop_reason = reason
    return trace


class CriticalKind(str, enum.Enum):
    LIMIT_POINT = "LimitPoint"
    BIFURCATION = "Bifurcation"


@dataclass(frozen=True)
class CriticalPoint:
    kind: CriticalKind
    state: disc.DiscreteState
    mu: float
    psi: np.ndarray
    sigma_hat: float
    antisymmetry_index: float
    sawtooth_fraction: float
    s: float = 0.0
    ambiguous: bool = False
    converged: bool = True
    tangent_norm: float = field(default=0.0, repr=False)

    @property
    def lam(self) -> float:
        return self.state.lam

    @property
    def u_star(self) -> float:
        return disc.u_star(self.state)


def classify_symmetry(psi) -> tuple[float, float]:
    """Mirror-antisymmetry index and sawtooth fraction of a mode.

    antisymmetry_index = ||psi + reversed(psi)||_inf / (2 ||psi||_inf): 0 for an
    antisymmetric vector, 1 for a symmetric one. sawtooth_fraction counts
    adjacent pairs of nonzero entries with opposite signs; pairs touching an
    (numerically) zero entry are skipped.
    """
    psi = np.asarray(psi, dtype=float)
    peak = float(np.max(np.abs(psi), initial=0.0))
    if peak == 0.0:
        raise DomainError("psi must be nonzero")
    anti = float(np.max(np.abs(psi + psi[::-1]))) / (2.0 * peak)
    signs = np.where(np.abs(psi) > 1e-12 * peak, np.sign(psi), 0.0)
    pairs = signs[:-1] * signs[1:]
    counted = pairs != 0
    saw = float(np.count_nonzero(pairs < 0) / np.count_nonzero(counted)) if counted.any() else 0.0
    return anti, saw


@dataclass
class _Probe:
    sigma: float
    state: disc.DiscreteState
    count: int
    mu: float

    @property
    def indicator(self) -> float:
        # continuous in sigma, vanishes exactly where an eigenvalue crosses zero
        return -abs(self.mu) if self.count % 2 else abs(self.mu)


class _Segment:
    """Points on the branch parameterised by distance along the chord a -> b."""

    def __init__(self, scheme, a: BranchPoint, b: BranchPoint, config):
        self.scheme = scheme
        self.config = config
        self.grid = a.state.grid
        self.weights = Weights(self.grid.n_interior, config.theta)
        self.origin = a.state
        du = b.state.u - a.state.u
        dlam = b.state.lam - a.state.lam
        self.length = self.weights.norm(du, dlam)
        self.du, self.dlam = du / self.length, dlam / self.length
        self.s0 = a.s
        self.chord_scale = (b.s - a.s) / self.length if self.length > 0 else 1.0

    def endpoint(self, point: BranchPoint, sigma: float) -> _Probe:
        return _Probe(sigma, point.state, point.neg_count, point.mu_min)

    def probe(self, sigma: float, lo: _Probe, hi: _Probe) -> _Probe:
        w = (sigma - lo.sigma) / (hi.sigma - lo.sigma)
        guess = disc.DiscreteState(
            self.grid,
            (1 - w) * lo.state.u + w * hi.state.u,
            (1 - w) * lo.state.lam + w * hi.state.lam,
        )
        constraint = self.weights.constraint(self.origin, self.du, self.dlam, sigma)
        corr = newton_correct(self.scheme, guess, constraint, self.config)
        mu, count = nearest_zero_eigenvalue(disc.tangent(self.scheme, corr.state))
        return _Probe(sigma, corr.state, count, mu)

    def arclength(self, sigma: float) -> float:
        return self.s0 + sigma * self.chord_scale


def _refine_crossing(seg: _Segment, lo: _Probe, hi: _Probe, tol: float):
    """Shrink a single-crossing bracket by Illinois regula falsi on the indicator."""
    best = min((lo, hi), key=lambda p: abs(p.mu))
    fa, fb = lo.indicator, hi.indicator
    side = 0
    for _ in range(200):
        if hi.sigma - lo.sigma <= tol:
            break
        norm = disc.tangent(seg.scheme, best.state).norm_inf()
        if abs(best.mu) <= 1e-13 * norm:
            break
        c = (lo.sigma * fb - hi.sigma * fa) / (fb - fa) if fb != fa else 0.5 * (lo.sigma + hi.sigma)
        width = hi.sigma - lo.sigma
        if not (lo.sigma + 1e-3 * width < c < hi.sigma - 1e-3 * width):
            c = 0.5 * (lo.sigma + hi.sigma)
        mid = seg.probe(c, lo, hi)
        if abs(mid.mu) < abs(best.mu):
            best = mid
        fm = mid.indicator
        if (mid.count % 2) == (hi.count % 2):
            hi, fb = mid, fm
            if side == -1:
                fa *= 0.5
            side = -1
        else:
            lo, fa = mid, fm
            if side == 1:
                fb *= 0.5
            side = 1
    return best, (lo.sigma, hi.sigma)


def _split(seg: _Segment, lo: _Probe, hi: _Probe, tol: float, out: list):
    """Isolate every unit change of the Sturm count between ``lo`` and ``hi``."""
    jump = abs(hi.count - lo.count)
    if jump == 0:
        return
    if jump == 1 or hi.sigma - lo.sigma <= tol:
        out.append(_refine_crossing(seg, lo, hi, tol))
        return
    mid = seg.probe(0.5 * (lo.sigma + hi.sigma), lo, hi)
    _split(seg, lo, mid, tol, out)
    _split(seg, mid, hi, tol, out)


def _critical_point(scheme, state, s, converged) -> CriticalPoint:
    T = disc.tangent(scheme, state)
    mu, psi = eigen_nearest_zero(T)
    f_lam = disc.dF_dlambda(scheme, state)
    sigma_hat = float(abs(psi @ f_lam) / (np.linalg.norm(psi) * np.linalg.norm(f_lam)))
    anti, saw = classify_symmetry(psi)
    kind = CriticalKind.LIMIT_POINT if sigma_hat > LIMIT_POINT_THRESHOLD else CriticalKind.BIFURCATION
    ambiguous = AMBIGUOUS_BAND[0] <= sigma_hat <= AMBIGUOUS_BAND[1]
    return CriticalPoint(
        kind, state, mu, psi, sigma_hat, anti, saw, s, ambiguous, converged, T.norm_inf()
    )


def locate_critical_points(
    trace,
    scheme: disc.Scheme,
    grid: disc.Grid | None = None,
    config: ContinuationConfig = ContinuationConfig(),
) -> list[CriticalPoint]:
    """Refine and classify every critical point bracketed by ``trace``.

    A bracket whose probes stop converging is not fatal: the best probe so far
    is reported with ``converged=False`` and a warning is logged.
    """
    found = []
    for a, b in zip(trace[:-1], trace[1:]):
        if a.neg_count == b.neg_count:
            continue
        seg = _Segment(scheme, a, b, config)
        lo, hi = seg.endpoint(a, 0.0), seg.endpoint(b, seg.length)
        results = []
        try:
            _split(seg, lo, hi, config.critical_bisection_tol, results)
        except NoConvergence as exc:
            err = BracketLost(f"refinement lost between s={a.s:.6g} and s={b.s:.6g}: {exc}", (a.s, b.s))
            log.warning("%s", err)
            best = min((lo, hi), key=lambda p: abs(p.mu))
            found.append(_critical_point(scheme, best.state, seg.arclength(best.sigma), False))
            continue
        for probe, _bracket in results:
            found.append(_critical_point(scheme, probe.state, seg.arclength(probe.sigma), True))
    return found


def spurious_points(points):
    return [p for p in points if p.kind is CriticalKind.BIFURCATION]
