"""Dense small-matrix substrate: eigenvalues, singular values, linear solves
and seeded orthogonal-matrix generation.

Matrices are plain float64 ``numpy.ndarray`` values, immutable by convention
(nothing in this package mutates an input array).  Each routine validates its
contract and maps LAPACK failure modes onto the package's error types.

Randomness: one generator for the whole artifact, PCG64 behind
``numpy.random.Generator``.  Identical seeds give identical draw sequences on
every platform.  All stochastic operations take the generator explicitly; a
generator instance is never shared between concurrent owners.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    AsymmetryError,
    NonSquareError,
    NoConvergenceError,
    SingularMatrixError,
)

# Relative tolerance for accepting a matrix as symmetric.
SYMMETRY_RTOL = 1e-12

# Condition-number ceiling above which a solve is refused.
CONDITION_LIMIT = 1e12


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic 64-bit generator (PCG64) for the given seed."""
    return np.random.Generator(np.random.PCG64(seed))


def as_matrix(m) -> np.ndarray:
    """Validate and return ``m`` as a finite float64 2-d array."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise NonSquareError(f"expected a 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def _require_square(a: np.ndarray) -> np.ndarray:
    if a.shape[0] != a.shape[1]:
        raise NonSquareError(f"expected a square matrix, got shape {a.shape}")
    return a


def relative_asymmetry(m: np.ndarray) -> float:
    """max |M - M^T| scaled by max(1-ish floor, max |M|)."""
    a = _require_square(as_matrix(m))
    scale = np.abs(a).max()
    if scale == 0.0:
        return 0.0
    return float(np.abs(a - a.T).max() / scale)


def symmetric_eigenvalues(m) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, ascending.

    Raises AsymmetryError when the relative asymmetry exceeds 1e-12; the
    computation itself uses the symmetrized matrix so the result is exactly
    the spectrum of (M + M^T)/2.
    """
    a = _require_square(as_matrix(m))
    if relative_asymmetry(a) > SYMMETRY_RTOL:
        raise AsymmetryError(
            f"relative asymmetry {relative_asymmetry(a):.3e} exceeds {SYMMETRY_RTOL}"
        )
    return np.linalg.eigvalsh(0.5 * (a + a.T))


def general_spectrum(m) -> np.ndarray:
    """All eigenvalues of a square matrix, with multiplicity, as complex.

    Order is unspecified.  For real input the multiset is closed under
    complex conjugation.
    """
    a = _require_square(as_matrix(m))
    try:
        return np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:  # QR iteration budget exhausted
        raise NoConvergenceError(str(exc)) from exc


def singular_values(m) -> np.ndarray:
    """Singular values of any matrix, descending, all nonnegative."""
    a = as_matrix(m)
    try:
        return np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NoConvergenceError(str(exc)) from exc


def condition_number(m) -> float:
    """2-norm condition number; inf for exactly singular matrices."""
    s = singular_values(m)
    if s.size == 0 or s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])


def solve_linear(m, b) -> np.ndarray:
    """Solve M x = b for square nonsingular M.

    Refuses matrices whose condition estimate exceeds 1e12; the returned
    solution has relative residual below 1e-10 for accepted systems.
    """
    a = _require_square(as_matrix(m))
    rhs = np.asarray(b, dtype=float)
    if rhs.shape[0] != a.shape[0]:
        raise SingularMatrixError(
            f"right-hand side length {rhs.shape[0]} != matrix order {a.shape[0]}"
        )
    if condition_number(a) > CONDITION_LIMIT:
        raise SingularMatrixError("matrix is singular or too ill-conditioned")
    try:
        return np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform random orthogonal matrix.

    QR-factors a matrix of independent standard normals and flips column
    signs so the triangular factor has a positive diagonal, which makes the
    distribution exactly Haar.  Deterministic given the generator state.
    """
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    g = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs
