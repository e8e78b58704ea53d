"""Maps on the manifold of positive definite density matrices.

The chart ``gamma`` identifies traceless Hermitian coordinates with density
matrices through the normalized matrix exponential.  Flows are integrated in
these coordinates, where e-geodesics are straight lines.

All functions accept stacks of matrices (leading batch axes).
"""
from __future__ import annotations

import numpy as np

from .hermitian import (
    DomainError,
    dagger,
    frobenius_inner,
    from_eigen,
    hermitize,
    matrix_exp,
    matrix_log,
    project_traceless,
    spectral_decompose,
    tmap,
    tmap_inv,
    trace,
)


def _check_finite(Z):
    if not np.all(np.isfinite(Z)):
        raise DomainError("non-finite coordinates")


def psi(X):
    """Log-partition ``log tr exp(X)``, evaluated as a log-sum-exp of eigenvalues."""
    w = np.linalg.eigvalsh(np.asarray(X))
    top = w[..., -1]
    return top + np.log(np.sum(np.exp(w - top[..., None]), axis=-1))


def gamma(Z, trace_scale: float = 1.0):
    """Normalized exponential ``trace_scale * exp(Z) / tr exp(Z)``.

    Defined for every Hermitian ``Z`` and invariant under ``Z -> Z + a I``.
    """
    Z = np.asarray(Z)
    _check_finite(Z)
    w, U = spectral_decompose(Z)
    e = np.exp(w - w[..., -1:])
    e /= e.sum(axis=-1, keepdims=True)
    return from_eigen(U, trace_scale * e)


def gamma_inv(rho):
    """Traceless coordinates ``Pi[log rho]`` of a density matrix.

    The projection removes ``log(trace)`` so the result does not depend on the
    trace normalization of ``rho``.
    """
    return project_traceless(matrix_log(rho))


def dgamma(H, Y):
    """Differential of :func:`gamma` at ``H`` applied to ``Y``."""
    rho = gamma(H)
    I = np.eye(rho.shape[-1])
    # differences of coordinates can be pure rounding noise with no Hermitian structure left
    Y = hermitize(Y)
    return tmap_inv(rho, Y - frobenius_inner(rho, Y)[..., None, None] * I)


def dgamma_inv(rho, X):
    """Differential of :func:`gamma_inv` at ``rho``: ``Pi[tmap(rho, X)]``."""
    return project_traceless(tmap(rho, X))


def replicator_density(rho, X):
    """Replicator map ``tmap_inv(rho, X) - <rho, X> rho``.

    Traceless for every Hermitian ``X`` when ``tr rho = 1``; it is the inverse
    BKM metric tensor written in ambient coordinates.
    """
    rho = np.asarray(rho)
    return tmap_inv(rho, X) - frobenius_inner(rho, X)[..., None, None] * rho


def riemannian_grad(rho, euclid_grad):
    """BKM Riemannian gradient from the Euclidean gradient of an ambient extension."""
    return replicator_density(rho, euclid_grad)


def exp_e(rho, X):
    """Exponential map of the e-connection.

    Straight line in gamma-coordinates: ``gamma(gamma_inv(rho) + Pi tmap(rho, X))``.
    """
    return gamma(gamma_inv(rho) + dgamma_inv(rho, X))


def exp_e_inv(rho, mu):
    """Inverse of :func:`exp_e`: the tangent vector at ``rho`` pointing to ``mu``."""
    H = gamma_inv(rho)
    return dgamma(H, gamma_inv(mu) - H)


def lift_exp_density(rho, X, trace_scale: float = 1.0):
    """Lifting map ``gamma(gamma_inv(rho) + X)``; equals ``exp_e(rho, replicator(rho, X))``."""
    return gamma(gamma_inv(rho) + X, trace_scale)


def likelihood_density(rho, D, trace_scale: float = 1.0):
    """Likelihood matrix: data ``D`` lifted at ``rho`` by ``-Pi[D]``."""
    return lift_exp_density(rho, -project_traceless(D), trace_scale)


def log_euclidean_exp(rho, Y):
    """Exponential map of the log-Euclidean metric, ``exp(log rho + tmap(rho, Y))``."""
    return matrix_exp(matrix_log(rho) + tmap(rho, Y))


def log_euclidean_direction(rho, X):
    """Tangent ``Y`` with ``log_euclidean_exp(rho, Y) == exp_e(rho, X)``.

    ``Y = X - psi(log rho + tmap(rho, X)) rho``.
    """
    rho = np.asarray(rho)
    s = psi(matrix_log(rho) + tmap(rho, X))
    return X - np.asarray(s)[..., None, None] * rho


def purity_gap(rho, trace_scale: float = 1.0):
    """``trace_scale**2 - tr(rho^2)``; zero exactly at (scaled) pure states."""
    rho = np.asarray(rho)
    return trace_scale**2 - np.real(np.einsum("...ij,...ij->...", rho, np.conj(rho)))


def top_eigenvector(rho):
    """Eigenvector of the largest eigenvalue."""
    _, U = spectral_decompose(rho)
    return U[..., :, -1]


def pure_state(v):
    """Projector ``v v* / |v|^2``."""
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    return v[..., :, None] * np.conj(v[..., None, :])


__all__ = [
    "dagger",
    "dgamma",
    "dgamma_inv",
    "exp_e",
    "exp_e_inv",
    "gamma",
    "gamma_inv",
    "likelihood_density",
    "lift_exp_density",
    "log_euclidean_direction",
    "log_euclidean_exp",
    "psi",
    "pure_state",
    "purity_gap",
    "replicator_density",
    "riemannian_grad",
    "top_eigenvector",
    "trace",
]
