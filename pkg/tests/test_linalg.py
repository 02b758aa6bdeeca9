import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from bratu import discretize as disc
from bratu.errors import DomainError, SingularMatrix
from bratu.linalg import (
    BorderedSystem,
    SymTridiag,
    Tridiag,
    TridiagLU,
    bordered_solve,
    eigen_nearest_zero,
    eigenvalues_bisection,
    nearest_zero_eigenvalue,
    sturm_count,
    tridiag_solve,
)

EPS = np.finfo(float).eps


def random_symtridiag(rng, n, dominance=0.0):
    off = rng.uniform(-1, 1, n - 1)
    diag = rng.uniform(-1, 1, n)
    diag += np.sign(diag) * dominance
    return SymTridiag(diag, off)


# ------------------------------------------------------------- construction


def test_symtridiag_rejects_bad_lengths():
    with pytest.raises(DomainError):
        SymTridiag([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(DomainError):
        SymTridiag([], [])


def test_symtridiag_is_immutable():
    A = SymTridiag([1.0, 2.0], [3.0])
    with pytest.raises(ValueError):
        A.diag[0] = 5.0


def test_dense_and_matvec_agree():
    rng = np.random.default_rng(0)
    A = random_symtridiag(rng, 7)
    x = rng.standard_normal(7)
    np.testing.assert_allclose(A.matvec(x), A.to_dense() @ x, rtol=1e-14, atol=1e-14)
    assert A.norm_inf() == pytest.approx(np.abs(A.to_dense()).sum(axis=1).max())


# ------------------------------------------------------------------- solves


def test_solve_identity():
    A = SymTridiag.from_constant(3, 1.0, 0.0)
    np.testing.assert_array_equal(tridiag_solve(A, [2.0, 3.0, 4.0]), [2.0, 3.0, 4.0])


def test_solve_two_by_two():
    A = SymTridiag.from_constant(2, 2.0, -1.0)
    np.testing.assert_allclose(tridiag_solve(A, [1.0, 0.0]), [2 / 3, 1 / 3], rtol=1e-15)


@pytest.mark.parametrize("seed", range(10))
def test_solve_recovers_known_solution(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 60))
    A = random_symtridiag(rng, n, dominance=3.0)
    x_known = rng.standard_normal(n)
    x = tridiag_solve(A, A.matvec(x_known))
    assert np.max(np.abs(x - x_known)) <= 1e-12 * np.max(np.abs(x_known))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_solve_backward_error_on_indefinite_matrices(n, seed):
    rng = np.random.default_rng(seed)
    A = random_symtridiag(rng, n)
    b = rng.standard_normal(n)
    try:
        x = tridiag_solve(A, b)
    except SingularMatrix:
        return
    r = np.max(np.abs(A.matvec(x) - b))
    assert r <= 50 * EPS * A.norm_inf() * np.max(np.abs(x))


def test_solve_general_tridiagonal_matches_scipy():
    rng = np.random.default_rng(3)
    n = 9
    A = Tridiag(rng.standard_normal(n - 1), rng.standard_normal(n) + 4, rng.standard_normal(n - 1))
    b = rng.standard_normal(n)
    np.testing.assert_allclose(tridiag_solve(A, b), np.linalg.solve(A.to_dense(), b), rtol=1e-12)


def test_singular_matrix_raises():
    A = SymTridiag([1.0, 1.0], [1.0])
    with pytest.raises(SingularMatrix):
        tridiag_solve(A, [1.0, 2.0])


def test_solve_length_mismatch():
    with pytest.raises(DomainError):
        tridiag_solve(SymTridiag.from_constant(3, 2.0, -1.0), [1.0, 2.0])


def test_lu_determinant_sign():
    rng = np.random.default_rng(4)
    for _ in range(20):
        A = random_symtridiag(rng, 6, dominance=0.3)
        assert TridiagLU(A).det_sign() == np.sign(np.linalg.det(A.to_dense()))


# -------------------------------------------------------------- sturm counts


def test_sturm_count_diagonal():
    assert sturm_count(SymTridiag([1.0, 2.0, 3.0], [0.0, 0.0]), 2.5) == 2


def test_sturm_count_toeplitz():
    assert sturm_count(SymTridiag.from_constant(3, 2.0, -1.0), 0.0) == 0
    assert sturm_count(SymTridiag.from_constant(3, 2.0, -1.0), 2.0 - math.sqrt(2) + 1e-9) == 1


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_sturm_count_monotone_and_complete(n, seed):
    rng = np.random.default_rng(seed)
    A = random_symtridiag(rng, n)
    sigmas = np.linspace(-5, 5, 41)
    counts = [sturm_count(A, s) for s in sigmas]
    assert all(a <= b for a, b in zip(counts, counts[1:]))
    assert sturm_count(A, 1e6) == n
    assert sturm_count(A, -1e6) == 0
    ev = np.linalg.eigvalsh(A.to_dense())
    for s, c in zip(sigmas, counts):
        if np.min(np.abs(ev - s)) > 1e-9:
            assert c == np.count_nonzero(ev < s)


def test_sturm_count_past_fold_is_one():
    # FD Bratu tangent on the upper branch, just past the fold
    grid = disc.Grid(20)
    state = disc.sample_exact(grid, 2.0)
    T = disc.tangent(disc.Scheme.fd(), state)
    full = np.count_nonzero(eigenvalues_bisection(T) > 0)
    assert sturm_count(T.shifted(0.0), 0.0) == T.n - 1
    assert full == 1


def test_sturm_count_with_exact_zero_pivot():
    # first leading minor vanishes at sigma = 0
    A = SymTridiag([0.0, 1.0], [1.0])
    ev = np.linalg.eigvalsh(A.to_dense())
    assert sturm_count(A, 0.0) == np.count_nonzero(ev < 0)


# --------------------------------------------------------------- eigenpairs


def test_eigen_nearest_zero_diagonal():
    mu, psi = eigen_nearest_zero(SymTridiag([-3.0, 0.5, 7.0], [0.0, 0.0]))
    assert mu == pytest.approx(0.5, rel=1e-13)
    np.testing.assert_allclose(psi, [0.0, 1.0, 0.0], atol=1e-12)


def test_eigen_nearest_zero_toeplitz():
    mu, psi = eigen_nearest_zero(SymTridiag.from_constant(3, 2.0, -1.0))
    assert mu == pytest.approx(2 - math.sqrt(2), rel=1e-13)
    np.testing.assert_allclose(psi, np.array([1.0, math.sqrt(2), 1.0]) / 2.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(25))
def test_eigen_nearest_zero_is_smallest_in_magnitude(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(1, 13))
    A = random_symtridiag(rng, n)
    mu, psi = eigen_nearest_zero(A)
    ev = eigenvalues_bisection(A)
    ref = scipy.linalg.eigh_tridiagonal(np.asarray(A.diag), np.asarray(A.off), eigvals_only=True) if n > 1 else ev
    np.testing.assert_allclose(ev, ref, atol=1e-12)
    assert abs(mu) <= np.min(np.abs(ev)) * (1 + 1e-12) + 1e-15
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-14)
    assert np.linalg.norm(A.matvec(psi) - mu * psi) <= 1e-10 * A.norm_inf()
    k = int(np.argmax(np.abs(psi)))
    assert psi[k] > 0


def test_eigen_nearest_zero_count():
    A = SymTridiag([-3.0, -1.0, 0.5, 7.0], [0.0, 0.0, 0.0])
    mu, count = nearest_zero_eigenvalue(A)
    assert count == 2
    assert mu == pytest.approx(0.5)


def test_eigen_fold_operator_converges():
    from bratu import analytic

    ab = analytic.find_alpha_bar().alpha_bar
    mus = []
    for n in (50, 100, 200):
        mus.append(abs(eigen_nearest_zero(disc.linearized_operator_original(disc.Grid(n), ab)).mu))
    assert mus[2] < mus[1] < mus[0]
    assert mus[0] / mus[1] == pytest.approx(4.0, rel=0.05)
    assert mus[1] / mus[2] == pytest.approx(4.0, rel=0.05)


def test_eigen_deterministic():
    rng = np.random.default_rng(7)
    A = random_symtridiag(rng, 30)
    a = eigen_nearest_zero(A)
    b = eigen_nearest_zero(A)
    assert a.mu == b.mu
    np.testing.assert_array_equal(a.psi, b.psi)


# ------------------------------------------------------------------ borders


def test_bordered_identity():
    S = BorderedSystem(SymTridiag.from_constant(2, 1.0, 0.0), [0.0, 0.0], [0.0, 0.0], 1.0)
    np.testing.assert_allclose(bordered_solve(S, [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0], rtol=1e-15)


def test_bordered_singular_core():
    S = BorderedSystem(SymTridiag([0.0, 1.0], [0.0]), [1.0, 0.0], [1.0, 0.0], 0.0)
    rhs = np.array([1.0, 1.0, 0.0])
    z = bordered_solve(S, rhs)
    np.testing.assert_allclose(S.to_dense() @ z, rhs, atol=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_bordered_random(seed):
    rng = np.random.default_rng(200 + seed)
    n = int(rng.integers(1, 40))
    S = BorderedSystem(random_symtridiag(rng, n), rng.standard_normal(n), rng.standard_normal(n), rng.standard_normal())
    rhs = rng.standard_normal(n + 1)
    z = bordered_solve(S, rhs)
    r = np.max(np.abs(S.matvec(z) - rhs))
    assert r <= 1e-12 * S.norm_inf() * max(1.0, np.max(np.abs(z)))


def test_bordered_fully_singular_raises():
    S = BorderedSystem(SymTridiag([0.0, 1.0], [0.0]), [0.0, 0.0], [0.0, 0.0], 0.0)
    with pytest.raises(SingularMatrix):
        bordered_solve(S, [1.0, 1.0, 1.0])
