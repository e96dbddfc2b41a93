"""
Dense symmetric-matrix primitives used by the covariance formalism.

All functions are pure: inputs are never modified and fresh arrays are
returned.
"""
import numpy as np
import scipy.linalg

from .errors import InvalidInputError

# Relative cutoff for the pseudoinverse: |eigenvalue| < RANK_RTOL * max|eigenvalue| is zero.
RANK_RTOL = 1e-12


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return the symmetric part (A + A^T) / 2."""
    return 0.5 * (a + a.T)


def _as_square(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise InvalidInputError(f"{name} must be a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def as_symmetric(a, name: str = "matrix") -> np.ndarray:
    """
    Validate a square finite matrix and return its symmetric part.

    Args:
        a: Array-like square matrix
        name: Name used in error messages

    Returns:
        Symmetrized float copy

    Raises:
        InvalidInputError: If the matrix is not square or has non-finite entries
    """
    return symmetrize(_as_square(a, name))


def matrix_abs(a) -> np.ndarray:
    """
    Matrix absolute value V |D| V^T of a symmetric matrix A = V D V^T.

    Args:
        a: Symmetric matrix

    Returns:
        Symmetric positive-semidefinite matrix commuting with A

    Raises:
        InvalidInputError: On non-finite entries
    """
    sym = as_symmetric(a)
    w, v = scipy.linalg.eigh(sym)
    return symmetrize((v * np.abs(w)) @ v.T)


def antisymmetric_abs(b) -> np.ndarray:
    """
    Absolute value |iB| of the Hermitian matrix iB for real antisymmetric B.

    (iB)^2 = B^T B is real symmetric, so |iB| = sqrt(B^T B) stays real.
    """
    arr = _as_square(b, "antisymmetric matrix")
    anti = 0.5 * (arr - arr.T)
    w, v = scipy.linalg.eigh(symmetrize(anti.T @ anti))
    return symmetrize((v * np.sqrt(np.clip(w, 0.0, None))) @ v.T)


def pseudoinverse(a, rtol: float = RANK_RTOL) -> np.ndarray:
    """
    Moore-Penrose pseudoinverse of a symmetric matrix (scipy.linalg.pinvh).

    Args:
        a: Symmetric matrix
        rtol: Eigenvalues below rtol * max|eigenvalue| are treated as zero

    Returns:
        Pseudoinverse A^- (symmetric)
    """
    sym = as_symmetric(a)
    if not np.any(sym):
        return np.zeros_like(sym)
    return symmetrize(scipy.linalg.pinvh(sym, atol=0.0, rtol=rtol, check_finite=False))


def min_eigenvalue(a) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    return float(scipy.linalg.eigvalsh(as_symmetric(a))[0])


def is_psd(a, tol: float = 0.0) -> bool:
    """True iff the minimum eigenvalue of the symmetric matrix A is >= -tol."""
    if tol < 0:
        raise InvalidInputError(f"tol must be non-negative, got {tol}")
    return min_eigenvalue(a) >= -tol


def is_hermitian_psd(real, imag, tol: float = 0.0) -> bool:
    """
    PSD test for the Hermitian matrix H = S + iB using real arithmetic only.

    H is PSD iff the real symmetric matrix [[S, -B], [B, S]] is PSD; its
    spectrum is that of H with every eigenvalue doubled.

    Args:
        real: Symmetric part S
        imag: Antisymmetric part B
        tol: Allowed negative eigenvalue magnitude

    Returns:
        True if H >= -tol
    """
    s = as_symmetric(real, "real part")
    b = _as_square(imag, "imaginary part")
    if s.shape != b.shape:
        raise InvalidInputError(f"shape mismatch {s.shape} vs {b.shape}")
    b = 0.5 * (b - b.T)
    block = np.block([[s, -b], [b, s]])
    return is_psd(block, tol)
