"""Assignment flow on the probability simplex.

Vectors live on the last axis; an assignment matrix is an ``(n, c)`` array
with one strictly positive probability row per vertex.  The integrators use
the same coordinate scheme as :mod:`qsaf.flow`, restricted to diagonal
matrices, so that commuting density-matrix flows reproduce these iterates.
"""
from __future__ import annotations

import numpy as np
from scipy.special import softmax

from .flow import FlowConfig, FlowResult, _Recorder
from .graph import WeightedGraph, omega_apply


def as_simplex_point(p, tol: float = 1e-12) -> np.ndarray:
    """Validate strictly positive rows summing to one."""
    p = np.array(p, dtype=float)
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        raise ValueError("simplex points need strictly positive finite entries")
    if np.max(np.abs(p.sum(axis=-1) - 1.0)) > tol:
        raise ValueError("simplex points must sum to one")
    return p


def barycenter(c: int, n: int | None = None) -> np.ndarray:
    p = np.full(c, 1.0 / c)
    return p if n is None else np.tile(p, (n, 1))


def project_zero_sum(v):
    v = np.asarray(v, dtype=float)
    return v - v.mean(axis=-1, keepdims=True)


def replicator_simplex(p, v):
    """``R_p v = p * v - <p, v> p``."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if p.shape[-1] != v.shape[-1]:
        raise ValueError("dimension mismatch")
    return p * (v - np.sum(p * v, axis=-1, keepdims=True))


def lift_exp_simplex(p, v):
    """Lifting map ``p * e^v / <p, e^v>`` (max-shifted for overflow safety)."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    return softmax(np.log(p) + v, axis=-1)


def exp_e_simplex(p, v):
    """e-exponential map ``Exp_p(v) = p * e^(v/p) / <p, e^(v/p)>``."""
    p = np.asarray(p, dtype=float)
    return softmax(np.log(p) + np.asarray(v) / p, axis=-1)


def exp_e_simplex_inv(p, q):
    """Inverse of :func:`exp_e_simplex`: ``R_p log(q/p)``."""
    return replicator_simplex(p, np.log(np.asarray(q) / np.asarray(p)))


def likelihood_simplex(p, D):
    """Likelihood vector ``L_p(D)``: data lifted at ``p`` by ``-pi_0 D``."""
    return lift_exp_simplex(p, -project_zero_sum(D))


def similarity_simplex(W, D, G: WeightedGraph):
    """Similarity vectors ``S_i = softmax(sum_k w_ik (log W_k - D_k))``."""
    W = np.asarray(W, dtype=float)
    if np.any(W <= 0):
        raise ValueError("assignment rows must be strictly positive")
    return softmax(omega_apply(G, np.log(W) - np.asarray(D, dtype=float)), axis=-1)


def purity_gap_simplex(p):
    return 1.0 - np.sum(np.asarray(p) ** 2, axis=-1)


def single_vertex_af(D, cfg: FlowConfig = FlowConfig()) -> FlowResult:
    """Single-vertex assignment flow ``p' = R_p L_p(D)`` from the barycenter.

    Integrated through the equivalent pair ``q' = R_q q`` with
    ``q(0) = L_1(D)`` and ``p = softmax(int q)``: ``q`` follows the coordinate
    Euler scheme and ``p`` accumulates ``eps * q_t``.  Converges to the uniform
    mixture over the minimizers of ``D``.  ``coords`` of the result holds the
    final ``q``.
    """
    D = np.asarray(D, dtype=float)
    eps = cfg.step_size
    a = -project_zero_sum(D)
    b = np.zeros_like(a)
    p = softmax(b)
    rec = _Recorder(cfg.record_every)
    converged = False
    t = 0
    while True:
        rec(t, p)
        if purity_gap_simplex(p) <= cfg.purity_tol:
            converged = True
            break
        if t == cfg.max_iters:
            break
        q = softmax(a)
        a = a + eps * project_zero_sum(q)
        b = b + eps * project_zero_sum(q)
        new = softmax(b)
        t += 1
        if not np.all(np.isfinite(new)):
            raise FloatingPointError(f"non-finite state at iteration {t}")
        if np.max(np.abs(new - p)) <= cfg.stationary_tol * eps:
            p = new
            converged = True
            break
        p = new
    rec(t, p, force=True)
    states, steps = rec.arrays()
    return FlowResult(states, steps, converged, t, p, coords=softmax(a))


def s_flow_integrate(S0, G: WeightedGraph, cfg: FlowConfig = FlowConfig()) -> FlowResult:
    """Reparametrized assignment flow ``S' = R_S[Omega S]``.

    Coordinates ``a_0 = pi_0 log S0`` are advanced by
    ``a_{t+1} = a_t + eps * pi_0[(Omega softmax(a_t))_i]``; the stopping rule
    matches :func:`qsaf.flow.mu_flow_integrate`.
    """
    S0 = as_simplex_point(S0, tol=1e-10)
    eps = cfg.step_size
    a = project_zero_sum(np.log(S0))
    rec = _Recorder(cfg.record_every)
    diag = []
    converged = False
    t = 0
    while True:
        S = softmax(a, axis=-1)
        avg = omega_apply(G, S)
        gap = float(np.max(purity_gap_simplex(S)))
        diag.append((t, gap, float(-0.5 * np.sum(S * avg))))
        rec(t, S)
        if gap <= cfg.purity_tol:
            converged = True
            break
        if t == cfg.max_iters:
            break
        a = a + eps * project_zero_sum(avg)
        t += 1
        if not np.all(np.isfinite(a)):
            raise FloatingPointError(f"non-finite coordinates at iteration {t}")
    rec(t, S, force=True)
    states, steps = rec.arrays()
    return FlowResult(states, steps, converged, t, S, coords=a, diagnostics=np.array(diag))
