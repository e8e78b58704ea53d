"""Experiment drivers behind the command line: data synthesis, runs and scores.

Functions here return arrays and results; file output and figures are left
to :mod:`qsaf.cli`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter, minimum_filter

from .encodings import (
    Patch,
    bloch_decode,
    bloch_encode,
    commuting_dataset,
    fourier_frame_decode,
    fourier_frame_encode,
    fourier_frame_state,
    gaussian_patch_weights,
    patch_rank_one_decode,
    patch_rank_one_encode,
    random_unitary,
    shrink_to_ball,
)
from .flow import FlowConfig, FlowResult, initial_state, mu_flow_integrate
from .graph import WeightedGraph, grid_graph, knn_graph
from .hermitian import from_eigen
from .simplex import barycenter as simplex_barycenter
from .simplex import s_flow_integrate, similarity_simplex

# Bloch prototypes: the six octahedron vertices (pairwise orthogonal or antipodal states)
OCTAHEDRON = np.array(
    [[1, 0, 0], [0, 1, 0], [0, 0, 1], [-1, 0, 0], [0, -1, 0], [0, 0, -1]], dtype=float
)


# -- Bloch sphere labeling ---------------------------------------------------


def synthetic_label_image(height: int = 32, width: int = 32) -> np.ndarray:
    """Four quadrants plus a central disk, labels 0..4."""
    lab = np.zeros((height, width), dtype=int)
    yy, xx = np.mgrid[:height, :width]
    lab[:, width // 2 :] = 1
    lab[height // 2 :, : width // 2] = 2
    lab[height // 2 :, width // 2 :] = 3
    r = min(height, width) / 5
    lab[(yy - height / 2 + 0.5) ** 2 + (xx - width / 2 + 0.5) ** 2 < r**2] = 4
    return lab


@dataclass
class BlochScene:
    labels: np.ndarray
    prototypes: np.ndarray  # unit directions, one per label
    clean: np.ndarray  # (h, w, 3)
    noisy: np.ndarray  # (h, w, 3), inside the unit ball


def synthetic_bloch_scene(
    rng: np.random.Generator,
    height: int = 32,
    width: int = 32,
    clean_norm: float = 0.6,
    noise_sigma: float = 0.3,
) -> BlochScene:
    """Piecewise-constant Bloch-vector image with i.i.d. Gaussian noise.

    Noisy vectors leaving the unit ball are pulled back onto its boundary.
    """
    labels = synthetic_label_image(height, width)
    protos = OCTAHEDRON[: labels.max() + 1]
    clean = clean_norm * protos[labels]
    noisy = shrink_to_ball(clean + noise_sigma * rng.standard_normal(clean.shape), 1.0)
    return BlochScene(labels, protos, clean, noisy)


def run_bloch_flow(
    vectors, cfg: FlowConfig, *, radius: int = 1, min_norm: float = 0.999, workers: int = 1
):
    """Integrate the flow from per-pixel Bloch states on a grid graph.

    Stops once every Bloch vector has norm at least ``min_norm``; for qubits
    this is the purity-gap rule with tolerance ``(1 - min_norm**2) / 2``.
    Returns the flow result and the final Bloch vectors, shaped like ``vectors``.
    """
    vectors = np.asarray(vectors, dtype=float)
    h, w, _ = vectors.shape
    G = grid_graph(h, w, radius=radius)
    tol = (1.0 - min_norm**2) / 2.0
    cfg = FlowConfig(
        step_size=cfg.step_size,
        purity_tol=tol,
        max_iters=cfg.max_iters,
        record_every=cfg.record_every,
        stationary_tol=cfg.stationary_tol,
    )
    result = mu_flow_integrate(G, bloch_encode(vectors.reshape(-1, 3)), cfg, workers=workers)
    return result, bloch_decode(result.final).reshape(h, w, 3)


def interior_mask(labels, margin: int = 2) -> np.ndarray:
    """Pixels whose ``(2 margin + 1)``-square window carries a single label."""
    size = 2 * margin + 1
    return maximum_filter(labels, size, mode="nearest") == minimum_filter(labels, size, mode="nearest")


def nearest_prototype(vectors, prototypes) -> np.ndarray:
    return np.argmax(np.asarray(vectors) @ np.asarray(prototypes).T, axis=-1)


def label_accuracy(vectors, labels, prototypes, mask=None) -> float:
    """Fraction of (masked) pixels whose nearest prototype direction is the true label."""
    pred = nearest_prototype(vectors, prototypes)
    if mask is None:
        mask = np.ones(labels.shape, dtype=bool)
    return float(np.mean(pred[mask] == labels[mask]))


# -- patches -----------------------------------------------------------------


def image_to_patches(gray, size: int):
    """Split a grayscale image into ``size x size`` patches (cropping the remainder)."""
    gray = np.asarray(gray, dtype=float)
    rows, cols = gray.shape[0] // size, gray.shape[1] // size
    if rows == 0 or cols == 0:
        raise ValueError(f"image {gray.shape} smaller than one {size}x{size} patch")
    patches = [
        Patch.from_pixels(gray[r * size : (r + 1) * size, c * size : (c + 1) * size])
        for r in range(rows)
        for c in range(cols)
    ]
    return patches, (rows, cols)


def patches_to_image(patches, grid_shape) -> np.ndarray:
    rows, cols = grid_shape
    s = patches[0].size
    out = np.zeros((rows * s, cols * s))
    for idx, p in enumerate(patches):
        r, c = divmod(idx, cols)
        out[r * s : (r + 1) * s, c * s : (c + 1) * s] = p.pixels()
    return out


def oriented_patch(size: int, angle: float, frequency: float = 1.0, phase: float = 0.0) -> np.ndarray:
    """Sinusoidal grating in ``[0, 1]`` oriented along ``angle`` (radians)."""
    yy, xx = np.mgrid[:size, :size] / size
    arg = 2 * np.pi * frequency * (xx * np.cos(angle) + yy * np.sin(angle)) + phase
    return 0.5 + 0.5 * np.cos(arg)


def two_population_image(
    rng: np.random.Generator, patch_size: int = 4, grid: tuple = (6, 6), angles=(0.0, np.pi / 2)
):
    """Image tiled by two patch types placed at random grid cells (equal counts)."""
    rows, cols = grid
    n = rows * cols
    membership = np.zeros(n, dtype=int)
    membership[rng.permutation(n)[: n // 2]] = 1
    tiles = [oriented_patch(patch_size, a, frequency=1.0, phase=0.3) for a in angles]
    img = np.zeros((rows * patch_size, cols * patch_size))
    for idx, m in enumerate(membership):
        r, c = divmod(idx, cols)
        img[r * patch_size : (r + 1) * patch_size, c * patch_size : (c + 1) * patch_size] = tiles[m]
    return img, membership


ENCODERS = {
    "rank-one": (patch_rank_one_encode, patch_rank_one_decode),
    "fourier": (fourier_frame_encode, fourier_frame_decode),
}


def _restrict_graph(G: WeightedGraph, keep: np.ndarray) -> WeightedGraph:
    index = -np.ones(G.n_vertices, dtype=int)
    index[keep] = np.arange(len(keep))
    nbrs = []
    for i in keep:
        nb = index[G.neighborhoods[i]]
        nbrs.append(nb[nb >= 0])
    return WeightedGraph.uniform(nbrs)


def parse_weight_mode(mode: str):
    """``"uniform"`` -> None, ``"gaussian:<t>"`` -> t."""
    if mode == "uniform":
        return None
    kind, _, value = mode.partition(":")
    if kind != "gaussian" or not value:
        raise ValueError(f"unknown weight mode {mode!r} (use uniform or gaussian:<t>)")
    tau = float(value)
    if tau <= 0:
        raise ValueError("gaussian weight parameter must be positive")
    return tau


@dataclass
class PatchRun:
    result: FlowResult
    patches: list
    decoded: list
    kept: np.ndarray
    skipped: np.ndarray
    graph: WeightedGraph
    notes: list = field(default_factory=list)


def run_patch_flow(
    patches,
    grid_shape,
    cfg: FlowConfig,
    *,
    encoder: str = "rank-one",
    adjacency: str = "grid",
    k: int = 8,
    weights: str = "uniform",
    workers: int = 1,
) -> PatchRun:
    """Encode patches, integrate the flow on the patch graph and decode.

    Constant patches cannot be encoded; they are left out of the graph and
    returned unchanged.
    """
    encode, decode = ENCODERS[encoder]
    kept = np.array([i for i, p in enumerate(patches) if not p.degenerate], dtype=int)
    skipped = np.array([i for i, p in enumerate(patches) if p.degenerate], dtype=int)
    if len(kept) == 0:
        raise ValueError("every patch is constant; nothing to smooth")
    live = [patches[i] for i in kept]
    if adjacency == "grid":
        G = _restrict_graph(grid_graph(*grid_shape), kept)
    elif adjacency == "knn":
        G = knn_graph([p.values for p in live], k=k)
    else:
        raise ValueError(f"unknown adjacency {adjacency!r}")
    tau_w = parse_weight_mode(weights)
    if tau_w is not None:
        G = gaussian_patch_weights(live, G, tau_w)
    D = np.array([encode(p) for p in live])
    mu0 = initial_state(G, D, cfg.trace_scale)
    result = mu_flow_integrate(G, mu0, cfg, workers=workers)
    decoded = list(patches)
    states = result.final / cfg.trace_scale
    notes = []
    # unconverged runs (accepted with --allow-partial) decode whatever the top eigenvector is
    max_gap = 10.0 * cfg.purity_tol if result.converged else np.inf
    if not result.converged:
        notes.append("decoded from states that did not reach the purity tolerance")
    for j, i in enumerate(kept):
        decoded[i] = decode(states[j], patches[i], max_gap=max_gap)
    if len(skipped):
        notes.append(f"{len(skipped)} constant patches skipped")
    return PatchRun(result, list(patches), decoded, kept, skipped, G, notes)


def population_spread(states, membership) -> float:
    """Largest Frobenius distance between final states of the same population."""
    states = np.asarray(states)
    worst = 0.0
    for m in np.unique(membership):
        group = states[membership == m]
        if len(group) > 1:
            worst = max(worst, float(np.max(np.linalg.norm(group - group[0], axis=(-2, -1)))))
    return worst


def fourier_self_consistency(patches) -> float:
    """Smallest correlation between a patch and the decoding of its own Fourier-frame state."""
    worst = 1.0
    for p in patches:
        if p.degenerate:
            continue
        rec = fourier_frame_decode(fourier_frame_state(p), p)
        worst = min(worst, float(np.corrcoef(p.values.ravel(), rec.values.ravel())[0, 1]))
    return worst


# -- restriction to commuting states ------------------------------------------


@dataclass
class RestrictionCheck:
    max_deviation: float
    deviations: np.ndarray  # per recorded iterate
    quantum: FlowResult
    classical: FlowResult
    unitary: np.ndarray


def restriction_check(
    rng: np.random.Generator,
    c: int = 4,
    grid: tuple = (8, 8),
    cfg: FlowConfig = FlowConfig(step_size=0.05, max_iters=500, record_every=1),
    *,
    basis: str = "random",
    perturbation: float = 0.0,
    workers: int = 1,
) -> RestrictionCheck:
    """Run the matrix flow on commuting data and the simplex flow on its eigenvalues.

    Both integrators take the same steps; the deviation is the largest
    Frobenius distance ``|mu_i(t) - U diag(S_i(t)) U*|`` over all recorded
    iterates.  A nonzero ``perturbation`` adds a random Hermitian term to the
    data, breaking commutativity (a negative control).
    """
    n = grid[0] * grid[1]
    G = grid_graph(*grid)
    U = random_unitary(c, rng) if basis == "random" else np.eye(c, dtype=complex)
    lam = rng.uniform(0.0, 1.0, size=(n, c))
    D = commuting_dataset(U, lam)
    if perturbation:
        Z = rng.standard_normal((n, c, c)) + 1j * rng.standard_normal((n, c, c))
        D = D + perturbation * 0.5 * (Z + np.conj(np.swapaxes(Z, -1, -2)))
    # run both flows for the full horizon so iterates align step by step
    run_cfg = FlowConfig(
        step_size=cfg.step_size,
        purity_tol=1e-300,
        max_iters=cfg.max_iters,
        record_every=cfg.record_every,
        trace_scale=1.0,
    )
    quantum = mu_flow_integrate(G, initial_state(G, D), run_cfg, workers=workers)
    S0 = similarity_simplex(simplex_barycenter(c, n), lam, G)
    classical = s_flow_integrate(S0, G, run_cfg)
    embedded = from_eigen(U, classical.states)
    devs = np.max(np.linalg.norm(quantum.states - embedded, axis=(-2, -1)), axis=1)
    return RestrictionCheck(float(devs.max()), devs, quantum, classical, U)


# -- potential trace -----------------------------------------------------------


def random_hermitian(rng: np.random.Generator, shape, scale: float = 1.0):
    Z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return scale * 0.5 * (Z + np.conj(np.swapaxes(Z, -1, -2)))


def potential_instance(rng: np.random.Generator, c: int = 3, grid: tuple = (6, 6), scale: float = 0.5):
    """Symmetric (periodic grid) graph and random Hermitian data."""
    G = grid_graph(*grid, periodic=True)
    D = random_hermitian(rng, (G.n_vertices, c, c), scale)
    return G, D
