"""Encoders turning data into Hermitian data matrices or density matrices, and back."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .graph import WeightedGraph
from .hermitian import DomainError, as_hermitian, dagger, hermitize, spectral_decompose
from .manifold import purity_gap

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

# encoded Bloch vectors are kept strictly inside the unit ball
BLOCH_RADIUS = 1.0 - 1e-6


def shrink_to_ball(d, radius: float = BLOCH_RADIUS):
    """Radially rescale vectors longer than ``radius`` onto the sphere of that radius."""
    d = np.asarray(d, dtype=float)
    norm = np.linalg.norm(d, axis=-1, keepdims=True)
    scale = np.where(norm > radius, radius / np.maximum(norm, 1e-300), 1.0)
    return d * scale


def bloch_encode(d):
    """``rho(d) = (I + d . sigma) / 2`` for Bloch vectors ``d`` of shape ``(..., 3)``.

    Vectors on the unit sphere are pulled inside to norm ``1 - 1e-6`` so the
    result is positive definite.
    """
    d = np.asarray(d, dtype=float)
    if d.shape[-1] != 3:
        raise ValueError("Bloch vectors have three components")
    if np.any(np.linalg.norm(d, axis=-1) > 1.0 + 1e-12):
        raise DomainError("Bloch vector outside the unit ball")
    d = shrink_to_ball(d)
    return 0.5 * (np.eye(2) + np.einsum("...k,kij->...ij", d, PAULI))


def bloch_decode(rho):
    """Bloch vector ``d_k = tr(rho sigma_k)``."""
    rho = np.asarray(rho)
    return np.real(np.einsum("...ij,kji->...k", rho, PAULI))


def rgb_to_bloch(rgb):
    """Map RGB values in ``[0, 1]`` to Bloch vectors: ``d = 2 rgb - 1``, shrunk into the ball."""
    return shrink_to_ball(2.0 * np.asarray(rgb, dtype=float) - 1.0)


def bloch_to_rgb(d):
    """Visualization map ``(d + 1) / 2`` clipped to the RGB cube."""
    return np.clip(0.5 * (np.asarray(d) + 1.0), 0.0, 1.0)


@dataclass(frozen=True)
class Patch:
    """Mean-free, unit-norm image patch plus the removed mean and norm."""

    values: np.ndarray
    mean: float
    norm: float

    @classmethod
    def from_pixels(cls, pixels) -> "Patch":
        pixels = np.asarray(pixels, dtype=float)
        if pixels.ndim != 2 or pixels.shape[0] != pixels.shape[1] or pixels.shape[0] < 1:
            raise ValueError("patches are square 2-D arrays")
        mean = float(pixels.mean())
        centered = pixels - mean
        norm = float(np.linalg.norm(centered))
        values = centered / norm if norm > 0 else centered
        return cls(values, mean, norm)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def degenerate(self) -> bool:
        return self.norm <= 1e-12

    def pixels(self) -> np.ndarray:
        """Undo normalization: ``norm * values + mean``."""
        return self.norm * self.values + self.mean


def patch_rank_one_encode(P: Patch):
    """Data matrix ``-v v^T`` of the vectorized patch.

    The smallest eigenvalue belongs to ``v``, so the single-vertex flow
    selects the patch itself.
    """
    if P.degenerate:
        raise DomainError("cannot encode a constant patch")
    v = P.values.ravel()
    return as_hermitian(-np.outer(v, v))


def _phase_align(w):
    """Remove the global phase so that the largest-magnitude entry is real positive."""
    k = np.argmax(np.abs(w))
    return w * np.exp(-1j * np.angle(w[k]))


def _check_pure(mu, max_gap):
    gap = float(purity_gap(mu, float(np.real(np.trace(mu)))) / np.real(np.trace(mu)) ** 2)
    if gap > max_gap:
        raise DomainError(f"state is far from pure (purity gap {gap:.3e})")


def patch_rank_one_decode(mu, P_ref: Patch, max_gap: float = 1e-2) -> Patch:
    """Patch from the top eigenvector of a (near) pure state.

    The sign ambiguity of the eigenvector is resolved by the distance to
    ``P_ref``; mean and norm are taken from ``P_ref``.
    """
    _check_pure(mu, max_gap)
    _, U = spectral_decompose(hermitize(np.asarray(mu)))
    w = np.real(_phase_align(U[:, -1]))
    w /= np.linalg.norm(w)
    s = P_ref.size
    cand = w.reshape(s, s)
    if np.linalg.norm(cand - P_ref.values) > np.linalg.norm(-cand - P_ref.values):
        cand = -cand
    return Patch(cand, P_ref.mean, P_ref.norm)


@lru_cache(maxsize=8)
def fourier_matrix_2d(s: int) -> np.ndarray:
    """Unitary 2-D DFT matrix ``F kron F`` acting on row-major vectorized ``s x s`` arrays."""
    F = np.fft.fft(np.eye(s), norm="ortho")
    F2 = np.kron(F, F)
    F2.setflags(write=False)
    return F2


def fourier_coefficients(P: Patch):
    """``p_hat = F2 vec(P)`` (unitary normalization, row-major stacking)."""
    return np.fft.fft2(P.values, norm="ortho").ravel()


def fourier_frame_encode(P: Patch):
    """Data matrix ``F2 diag(-|p_hat|^2) F2*``."""
    F2 = fourier_matrix_2d(P.size)
    ph = fourier_coefficients(P)
    return as_hermitian((F2 * (-np.abs(ph) ** 2)) @ dagger(F2))


def fourier_frame_state(P: Patch, purity: float = 1.0 - 1e-9):
    """Near-pure state whose vector has Fourier-frame coefficients ``p_hat``.

    Decoding this state with :func:`fourier_frame_decode` reproduces ``P``.
    """
    F2 = fourier_matrix_2d(P.size)
    w = F2 @ fourier_coefficients(P)
    c = len(w)
    return purity * np.outer(w, np.conj(w)) + (1.0 - purity) * np.eye(c) / c


def fourier_frame_decode(mu, P_orig: Patch, max_gap: float = 1e-2) -> Patch:
    """Patch from a (near) pure state in the Fourier frame.

    The top eigenvector, expressed in the frame (``F2* w``), supplies the
    spectral magnitudes; phases come from ``P_orig``.  The inverse transform
    is rescaled to ``P_orig.norm`` (mean re-added by :meth:`Patch.pixels`).
    """
    _check_pure(mu, max_gap)
    s = P_orig.size
    F2 = fourier_matrix_2d(s)
    _, U = spectral_decompose(hermitize(np.asarray(mu)))
    wt = dagger(F2) @ U[:, -1]
    ph = fourier_coefficients(P_orig)
    mag = np.abs(ph)
    phase = np.where(mag > 0, ph / np.where(mag > 0, mag, 1.0), 0.0)
    q = np.real(np.fft.ifft2((np.abs(wt) * phase).reshape(s, s), norm="ortho"))
    q -= q.mean()
    nq = np.linalg.norm(q)
    values = q / nq if nq > 0 else q
    return Patch(values, P_orig.mean, P_orig.norm)


def random_unitary(c: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix."""
    Z = (rng.standard_normal((c, c)) + 1j * rng.standard_normal((c, c))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def commuting_dataset(U, eigenvalues):
    """Per-vertex data ``U diag(lambda_i) U*`` sharing the eigenbasis ``U``."""
    U = np.asarray(U, dtype=complex)
    lam = np.asarray(eigenvalues, dtype=float)
    if np.max(np.abs(dagger(U) @ U - np.eye(U.shape[0]))) > 1e-12:
        raise DomainError("basis is not unitary")
    if lam.shape[-1] != U.shape[0]:
        raise ValueError("eigenvalue vectors must match the basis dimension")
    return hermitize((U * lam[..., None, :]) @ dagger(U))


def gaussian_patch_weights(patches, graph: WeightedGraph, tau_w: float) -> WeightedGraph:
    """Reweight ``graph`` with ``exp(-tau_w |P_i - P_k|_F^2)``, normalized per vertex."""
    if tau_w < 0:
        raise ValueError("tau_w must be nonnegative")
    vals = np.array([p.values for p in patches])
    raw = []
    for i, nb in enumerate(graph.neighborhoods):
        d2 = np.sum((vals[nb] - vals[i]) ** 2, axis=(-2, -1))
        raw.append(np.exp(-tau_w * d2))
    return graph.reweighted(raw)
