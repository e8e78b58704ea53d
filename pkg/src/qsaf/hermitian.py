"""Complex Hermitian linear algebra.

Matrices are plain complex ``numpy`` arrays of shape ``(..., c, c)``; every
function broadcasts over leading axes so that a whole product state (one
matrix per graph vertex) is processed in one call.

The BKM operators ``tmap`` / ``tmap_inv`` are evaluated in the eigenbasis of
the base point, where they act entrywise through the logarithmic mean of
eigenvalue pairs.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

# relative switch between the direct logarithmic-mean quotient and its series
LOG_MEAN_SWITCH = 1e-8
# smallest admissible eigenvalue of a density matrix, relative to its trace
EIGEN_FLOOR = 1e-14


class DomainError(ValueError):
    """Input lies outside the domain of a map (non-PD, non-Hermitian, ...)."""


class SpectralDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # ascending, shape (..., c)
    eigenvectors: np.ndarray  # unitary columns, shape (..., c, c)

    def reconstruct(self) -> np.ndarray:
        return from_eigen(self.eigenvectors, self.eigenvalues)


def dagger(A):
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(A, -1, -2))


def hermitize(A):
    """Return ``(A + A*) / 2``."""
    A = np.asarray(A)
    return 0.5 * (A + dagger(A))


def _check_square(A):
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise DomainError(f"expected square matrices, got shape {A.shape}")


def _readonly(A):
    A.setflags(write=False)
    return A


def as_hermitian(A, *, tol: float = 1e-10) -> np.ndarray:
    """Validate and return a read-only complex Hermitian array.

    The input must be Hermitian up to ``tol`` relative to its Frobenius
    norm; the returned copy is exactly Hermitian.
    """
    A = np.array(A, dtype=complex)
    _check_square(A)
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    scale = max(np.linalg.norm(A), 1.0)
    if np.max(np.abs(A - dagger(A)), initial=0.0) > tol * scale:
        raise DomainError("matrix is not Hermitian")
    return _readonly(hermitize(A))


def as_tangent(A, *, tol: float = 1e-12) -> np.ndarray:
    """Validate a traceless Hermitian matrix (an element of the tangent space)."""
    A = as_hermitian(A)
    c = A.shape[-1]
    if np.max(np.abs(np.trace(A, axis1=-2, axis2=-1)), initial=0.0) > tol * c * max(
        1.0, float(np.max(np.abs(A), initial=0.0))
    ):
        raise DomainError("matrix is not traceless")
    return A


def as_density(A, trace_scale: float = 1.0, *, tol: float = 1e-10) -> np.ndarray:
    """Validate a strictly positive definite Hermitian matrix of trace ``trace_scale``.

    Matrices whose smallest eigenvalue falls below ``1e-14 * trace_scale`` are
    rejected rather than clamped.
    """
    if trace_scale <= 0:
        raise DomainError("trace_scale must be positive")
    A = as_hermitian(A)
    tr = np.real(np.trace(A, axis1=-2, axis2=-1))
    if np.max(np.abs(tr - trace_scale), initial=0.0) > tol * trace_scale:
        raise DomainError(f"trace differs from {trace_scale}")
    lam = np.linalg.eigvalsh(A)
    if np.min(lam) < EIGEN_FLOOR * trace_scale:
        raise DomainError(f"matrix is not positive definite (min eigenvalue {np.min(lam):.3e})")
    return A


def frobenius_inner(A, B):
    """Matrix inner product ``tr(AB)`` of Hermitian arguments (real-valued)."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape[-2:] != B.shape[-2:]:
        raise DomainError(f"dimension mismatch {A.shape} vs {B.shape}")
    val = np.einsum("...ij,...ji->...", A, B)
    bound = 1e-10 * np.linalg.norm(A, axis=(-2, -1)) * np.linalg.norm(B, axis=(-2, -1))
    if np.any(np.abs(np.imag(val)) > np.maximum(bound, 1e-300)):
        raise DomainError("inner product of non-Hermitian arguments has an imaginary part")
    return np.real(val)


def spectral_decompose(A) -> SpectralDecomposition:
    """Eigendecomposition ``A = U diag(w) U*`` with ascending eigenvalues."""
    A = np.asarray(A)
    _check_square(A)
    if not np.all(np.isfinite(A)):
        raise DomainError("cannot decompose a matrix with non-finite entries")
    try:
        w, U = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise np.linalg.LinAlgError(f"eigen-solver did not converge: {exc}") from exc
    return SpectralDecomposition(w, U)


def from_eigen(U, w):
    """Assemble ``U diag(w) U*`` for (possibly batched) eigenpairs."""
    return (U * w[..., None, :]) @ dagger(U)


def matrix_function(A, func):
    w, U = spectral_decompose(A)
    return from_eigen(U, func(w))


def matrix_exp(A):
    """Matrix exponential of a Hermitian matrix, computed spectrally."""
    return matrix_function(A, np.exp)


def matrix_log(P):
    """Matrix logarithm of a positive definite matrix."""
    w, U = spectral_decompose(P)
    if np.min(w) <= 0:
        raise DomainError(f"matrix logarithm needs a positive definite argument (min eigenvalue {np.min(w):.3e})")
    return from_eigen(U, np.log(w))


def identity_like(A):
    c = np.shape(A)[-1]
    return np.broadcast_to(np.eye(c, dtype=complex), np.shape(A))


def trace(A):
    return np.trace(A, axis1=-2, axis2=-1)


def project_traceless(A):
    """Orthogonal projection ``A - tr(A)/c * I`` onto traceless matrices."""
    A = np.asarray(A)
    c = A.shape[-1]
    return A - (trace(A) / c)[..., None, None] * np.eye(c)


def log_mean(x, y):
    """Logarithmic mean ``(x - y) / (log x - log y)`` of positive numbers.

    Near the diagonal the quotient is replaced by
    ``sqrt(xy) * (1 + u**2/24 + u**4/1920)`` with ``u = log(x/y)``; the value at
    ``x == y`` is ``x`` exactly.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("logarithmic mean needs positive arguments")
    x, y = np.broadcast_arrays(x, y)
    hi = np.maximum(x, y)
    lo = np.minimum(x, y)
    near = (hi - lo) <= LOG_MEAN_SWITCH * hi
    # hi - lo is exact for close arguments; log1p keeps the denominator accurate too
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.log1p((hi - lo) / lo)
        direct = (hi - lo) / u
    u2 = u * u
    series = np.sqrt(hi) * np.sqrt(lo) * (1.0 + u2 / 24.0 + u2 * u2 / 1920.0)
    out = np.where(near, series, direct)
    out = np.clip(out, lo, hi)
    out = np.where(x == y, x, out)
    return out if out.ndim else float(out)


def _log_mean_kernel(w):
    """Matrix ``K[i, j] = log_mean(w_i, w_j)`` for eigenvalue vectors ``w``."""
    return log_mean(w[..., :, None], w[..., None, :])


def _positive_spectrum(rho):
    w, U = spectral_decompose(rho)
    if np.min(w) <= 0:
        raise DomainError(f"base point is not positive definite (min eigenvalue {np.min(w):.3e})")
    return w, U


def tmap(rho, X):
    """Differential of the matrix logarithm at ``rho`` applied to ``X``.

    In the eigenbasis of ``rho`` this divides entry ``(i, j)`` by the
    logarithmic mean of the eigenvalues ``w_i, w_j``.
    """
    rho = np.asarray(rho)
    X = np.asarray(X)
    if rho.shape[-1] != X.shape[-1]:
        raise DomainError("dimension mismatch")
    w, U = _positive_spectrum(rho)
    Xt = dagger(U) @ X @ U
    return U @ (Xt / _log_mean_kernel(w)) @ dagger(U)


def tmap_inv(rho, X):
    """Inverse of :func:`tmap`: ``int_0^1 rho^(1-s) X rho^s ds``."""
    rho = np.asarray(rho)
    X = np.asarray(X)
    if rho.shape[-1] != X.shape[-1]:
        raise DomainError("dimension mismatch")
    w, U = _positive_spectrum(rho)
    Xt = dagger(U) @ X @ U
    return U @ (Xt * _log_mean_kernel(w)) @ dagger(U)


def bkm_metric(rho, X, Y):
    """Bogoliubov-Kubo-Mori inner product ``<tmap(rho, X), Y>``."""
    return frobenius_inner(tmap(rho, X), Y)
