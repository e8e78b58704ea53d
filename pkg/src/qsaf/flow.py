"""Quantum state assignment flows on weighted graphs and their integrator.

The integrator works in gamma-coordinates: with ``mu_i = gamma(A_i)`` one
explicit Euler step on the coordinates

    A_{t+1} = A_t + eps * Pi[Omega[gamma(A_t)]]

is a step along e-geodesics of every factor, so iterates stay inside the
manifold by construction.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .graph import WeightedGraph, omega_apply, omega_apply_rows
from .hermitian import DomainError, frobenius_inner, hermitize, matrix_log, project_traceless, spectral_decompose
from .manifold import gamma, gamma_inv, purity_gap, replicator_density

log = logging.getLogger(__name__)

MAX_STEP = 0.5


@dataclass(frozen=True)
class FlowConfig:
    """Integration parameters shared by every flow.

    ``stationary_tol`` only applies to single-vertex flows, which may settle
    at mixed equilibria (tied data); graph flows stop on purity alone.
    """

    step_size: float = 0.1
    purity_tol: float = 1e-3
    max_iters: int = 10_000
    record_every: int = 10
    trace_scale: float = 1.0
    stationary_tol: float = 1e-9

    def __post_init__(self):
        if not 0 < self.step_size <= MAX_STEP:
            raise ValueError(f"step_size must lie in (0, {MAX_STEP}]")
        if self.purity_tol <= 0 or self.stationary_tol < 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1 or self.record_every < 1:
            raise ValueError("max_iters and record_every must be positive")
        if self.trace_scale <= 0:
            raise ValueError("trace_scale must be positive")


@dataclass
class FlowResult:
    """Recorded trajectory of an integration run.

    ``states[k]`` is the state after ``steps[k]`` updates.  ``diagnostics``
    holds one row ``(iter, purity_gap_max, potential_J)`` per iteration for
    graph flows.
    """

    states: np.ndarray
    steps: np.ndarray
    converged: bool
    n_iter: int
    final: np.ndarray
    coords: np.ndarray | None = None
    diagnostics: np.ndarray | None = None
    notes: list = field(default_factory=list)

    @property
    def purity_gap_max(self) -> float:
        if self.diagnostics is not None and len(self.diagnostics):
            return float(self.diagnostics[-1, 1])
        return float(np.max(purity_gap(self.final)))


class _Recorder:
    def __init__(self, every):
        self.every = every
        self.states = []
        self.steps = []

    def __call__(self, t, state, force=False):
        if force or t % self.every == 0:
            if self.steps and self.steps[-1] == t:
                return
            self.states.append(np.array(state, copy=True))
            self.steps.append(t)

    def arrays(self):
        return np.array(self.states), np.array(self.steps, dtype=np.int64)


def _as_stack(M):
    M = np.asarray(M, dtype=complex)
    if M.ndim == 2:
        M = M[None]
    return M


def similarity_density(G: WeightedGraph, rho, D, trace_scale: float = 1.0):
    """Similarity states ``S_i = gamma(sum_k w_ik (log rho_k - D_k))``.

    This equals the weighted e-geometric mean of the neighborhood likelihood
    matrices ``likelihood_density(rho_k, D_k)``.
    """
    rho = _as_stack(rho)
    D = _as_stack(D)
    if len(rho) != G.n_vertices or len(D) != G.n_vertices:
        raise ValueError("one state and one data matrix per vertex required")
    return gamma(omega_apply(G, matrix_log(rho) - D), trace_scale)


def barycenter(n: int, c: int, trace_scale: float = 1.0):
    """Product state with ``trace_scale * I/c`` at each of ``n`` vertices."""
    return np.broadcast_to(np.eye(c, dtype=complex) * (trace_scale / c), (n, c, c)).copy()


def initial_state(G: WeightedGraph, D, trace_scale: float = 1.0):
    """Starting point ``S(barycenter)`` of the reparametrized flow for data ``D``."""
    D = _as_stack(D)
    return similarity_density(G, barycenter(len(D), D.shape[-1], trace_scale), D, trace_scale)


def qsaf_vector_field(G: WeightedGraph, rho, D):
    """Right-hand side ``R_rho_i[S_i(rho)]`` of the assignment flow, per vertex."""
    rho = _as_stack(rho)
    return replicator_density(rho, similarity_density(G, rho, D))


def s_flow_field(G: WeightedGraph, mu):
    """Right-hand side ``R_mu[Omega[mu]]`` of the reparametrized flow."""
    mu = _as_stack(mu)
    return replicator_density(mu, hermitize(omega_apply(G, mu)))


def potential(G: WeightedGraph, mu) -> float:
    """Nonconvex potential ``J(mu) = -1/2 <mu, Omega[mu]>``."""
    mu = _as_stack(mu)
    return float(-0.5 * np.sum(frobenius_inner(mu, omega_apply(G, mu))))


def potential_laplacian_form(G: WeightedGraph, mu) -> float:
    """``1/4 sum_ij w_ij |mu_i - mu_j|^2 - 1/2 |mu|^2``; equals :func:`potential` for symmetric graphs."""
    mu = _as_stack(mu)
    total = 0.0
    for i, (nb, w) in enumerate(zip(G.neighborhoods, G.weights)):
        diff = mu[i][None] - mu[nb]
        total += float(np.sum(w * np.sum(np.abs(diff) ** 2, axis=(-2, -1))))
    return 0.25 * total - 0.5 * float(np.sum(np.abs(mu) ** 2))


def sqsaf_integrate(D, cfg: FlowConfig = FlowConfig()) -> FlowResult:
    """Single-vertex flow ``rho' = R_rho[L_rho(D)]`` from ``rho(0) = I/c``.

    Coordinates ``b`` with ``rho = gamma(b)`` follow ``b' = Pi[L_gamma(b)(D)]``
    and are advanced by explicit Euler.  For a unique smallest eigenvalue of
    ``D`` the state converges to the projector onto its eigenvector.
    """
    D = np.asarray(D, dtype=complex)
    if D.ndim != 2:
        raise ValueError("sqsaf_integrate takes a single data matrix")
    D = hermitize(D)
    tau = cfg.trace_scale
    eps = cfg.step_size
    c = D.shape[-1]
    b = np.zeros((c, c), dtype=complex)
    rho = gamma(b, tau)
    # L_rho(D) = gamma(gamma_inv(rho) - Pi[D]) with gamma_inv(gamma(b)) = b; working
    # from b avoids taking logarithms of nearly singular states
    drift = project_traceless(D)
    rec = _Recorder(cfg.record_every)
    converged = False
    t = 0
    while True:
        rec(t, rho)
        if purity_gap(rho, tau) <= cfg.purity_tol * tau**2:
            converged = True
            break
        if t == cfg.max_iters:
            break
        lik = gamma(b - drift, tau)
        b = b + eps * project_traceless(hermitize(lik))
        new = gamma(b, tau)
        t += 1
        if not np.all(np.isfinite(new)):
            raise FloatingPointError(f"non-finite state at iteration {t}")
        if np.max(np.abs(new - rho)) <= cfg.stationary_tol * eps:
            rho = new
            converged = True
            break
        rho = new
    rec(t, rho, force=True)
    states, steps = rec.arrays()
    return FlowResult(states, steps, converged, t, rho, coords=b)


def _chunks(n, workers):
    bounds = np.linspace(0, n, max(1, min(workers, n)) + 1).astype(int)
    return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def mu_flow_integrate(
    G: WeightedGraph,
    mu0,
    cfg: FlowConfig = FlowConfig(),
    *,
    workers: int = 1,
    coords0=None,
) -> FlowResult:
    """Geometric integration of ``mu' = R_mu[Omega[mu]]``.

    Starts at ``A_0 = gamma_inv(mu0)`` (or ``coords0`` if given) and iterates
    ``A_{t+1} = A_t + eps * Pi[Omega[gamma(A_t)]]`` with the averaged states
    Hermitized before use.  Stops once every vertex has purity gap at most
    ``purity_tol * trace_scale**2`` or after ``max_iters`` updates.

    ``workers > 1`` splits vertices into contiguous blocks evaluated on a
    thread pool; each block performs the same per-vertex arithmetic, so the
    result does not depend on the number of workers.
    """
    tau = cfg.trace_scale
    eps = cfg.step_size
    if coords0 is None:
        mu0 = _as_stack(mu0)
        if mu0.shape[0] != G.n_vertices:
            raise ValueError("one initial state per vertex required")
        A = project_traceless(gamma_inv(mu0))
    else:
        A = project_traceless(_as_stack(coords0))
    blocks = _chunks(G.n_vertices, workers)
    pool = ThreadPoolExecutor(max_workers=len(blocks)) if len(blocks) > 1 else None

    def states_of(A):
        if pool is None:
            return gamma(A, tau)
        parts = list(pool.map(lambda s: gamma(A[s], tau), blocks))
        return np.concatenate(parts)

    def averaged(mu):
        if pool is None:
            return omega_apply_rows(G, mu, slice(None))
        return np.concatenate(list(pool.map(lambda s: omega_apply_rows(G, mu, s), blocks)))

    rec = _Recorder(cfg.record_every)
    diag = []
    converged = False
    t = 0
    try:
        while True:
            mu = states_of(A)
            avg = averaged(mu)
            gap = float(np.max(purity_gap(mu, tau)))
            J = float(-0.5 * np.sum(frobenius_inner(mu, avg)))
            diag.append((t, gap, J))
            rec(t, mu)
            if gap <= cfg.purity_tol * tau**2:
                converged = True
                break
            if t == cfg.max_iters:
                break
            A = A + eps * project_traceless(avg)
            t += 1
            if not np.all(np.isfinite(A)):
                raise FloatingPointError(f"non-finite coordinates at iteration {t}")
    finally:
        if pool is not None:
            pool.shutdown()
    rec(t, mu, force=True)
    states, steps = rec.arrays()
    if not converged:
        log.info("mu flow stopped after %d iterations with purity gap %.3e", t, gap)
    return FlowResult(states, steps, converged, t, mu, coords=A, diagnostics=np.array(diag))


def rho_flow_lift(mu_states, cfg: FlowConfig = FlowConfig()) -> np.ndarray:
    """Assignment states driven by a recorded ``mu`` trajectory.

    ``mu_states`` must hold the state after every update (``record_every=1``).
    Integrates ``B_{t+1} = B_t + eps * Pi[mu_t]`` from ``B_0 = 0`` and returns
    ``gamma(B_t)`` for ``t = 0 .. len(mu_states)``.
    """
    mu_states = np.asarray(mu_states)
    if mu_states.ndim != 4:
        raise ValueError("expected a trajectory of shape (T, n, c, c)")
    T, n, c, _ = mu_states.shape
    B = np.zeros((n, c, c), dtype=complex)
    out = [gamma(B, cfg.trace_scale)]
    for t in range(T):
        B = B + cfg.step_size * project_traceless(mu_states[t])
        out.append(gamma(B, cfg.trace_scale))
    return np.array(out)


def commuting_basis_check(states, U, tol: float = 1e-8) -> bool:
    """True when every state is diagonal in the columns of ``U`` within ``tol``."""
    Ut = np.conj(U.T) @ np.asarray(states) @ U
    off = Ut - np.einsum("...ii->...i", Ut)[..., :, None] * np.eye(U.shape[0])
    return bool(np.max(np.abs(off)) <= tol)


def spectral_limit(D):
    """Predicted single-vertex limit: projector onto the eigenvector of the smallest eigenvalue.

    Returns ``(projector, gap)`` where ``gap`` separates the two smallest eigenvalues.
    """
    w, U = spectral_decompose(hermitize(np.asarray(D, dtype=complex)))
    q = U[:, 0]
    gap = float(w[1] - w[0]) if len(w) > 1 else np.inf
    return np.outer(q, np.conj(q)), gap


__all__ = [
    "DomainError",
    "FlowConfig",
    "FlowResult",
    "barycenter",
    "initial_state",
    "mu_flow_integrate",
    "potential",
    "potential_laplacian_form",
    "qsaf_vector_field",
    "rho_flow_lift",
    "s_flow_field",
    "similarity_density",
    "spectral_limit",
    "sqsaf_integrate",
]
