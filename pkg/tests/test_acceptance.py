"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py`` (lines are printed even without
``-s``) or directly as ``python tests/test_acceptance.py``.
"""
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import (  # noqa: E402
    central_difference,
    random_density,
    random_hermitian,
    random_symmetric_graph_matrix,
    random_tangent_at,
    random_traceless,
    tmap_inv_quadrature,
)
from qsaf import experiments as ex  # noqa: E402
from qsaf.cli import main as cli_main  # noqa: E402
from qsaf.flow import FlowConfig, initial_state, mu_flow_integrate, potential, s_flow_field, similarity_density  # noqa: E402
from qsaf.flow import spectral_limit, sqsaf_integrate  # noqa: E402
from qsaf.graph import WeightedGraph, knn_graph  # noqa: E402
from qsaf.hermitian import bkm_metric, project_traceless, tmap, tmap_inv  # noqa: E402
from qsaf.manifold import (  # noqa: E402
    dgamma,
    dgamma_inv,
    exp_e,
    exp_e_inv,
    gamma,
    gamma_inv,
    lift_exp_density,
    likelihood_density,
    log_euclidean_direction,
    log_euclidean_exp,
    replicator_density,
    riemannian_grad,
)

DIMS = (2, 3, 4, 8, 16)


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number:>2} {title}: {detail}")
        assert ok, detail

    return emit


def rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def test_01_manifold_identities(verdict):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = dict(gamma_gamma_inv=0.0, gamma_inv_gamma=0.0, tmap_pair=0.0, quadrature=0.0)
    for k in range(200):
        c = DIMS[k % len(DIMS)]
        rho = random_density(rng, c)
        X = random_hermitian(rng, c)
        X /= np.linalg.norm(X)
        H = random_traceless(rng, c, norm=rng.uniform(0.0, 3.0))
        worst["gamma_gamma_inv"] = max(worst["gamma_gamma_inv"], np.linalg.norm(gamma(gamma_inv(rho)) - rho))
        worst["gamma_inv_gamma"] = max(worst["gamma_inv_gamma"], np.linalg.norm(gamma_inv(gamma(H)) - H))
        worst["tmap_pair"] = max(worst["tmap_pair"], np.linalg.norm(tmap(rho, tmap_inv(rho, X)) - X))
        worst["quadrature"] = max(worst["quadrature"], np.linalg.norm(tmap_inv(rho, X) - tmap_inv_quadrature(rho, X)))
    elapsed = time.perf_counter() - start
    ok = (
        worst["gamma_gamma_inv"] <= 1e-10
        and worst["gamma_inv_gamma"] <= 1e-10
        and worst["tmap_pair"] <= 1e-10
        and worst["quadrature"] <= 1e-9
        and elapsed < 30
    )
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", {elapsed:.1f}s (tol 1e-10/1e-9, 30s)"
    verdict(1, "manifold identities", ok, detail)


def test_02_differentials(verdict):
    rng = np.random.default_rng(102)
    h = 1e-5
    worst = dict(dgamma=0.0, dgamma_inv=0.0, dexp=0.0)
    for k in range(100):
        c = DIMS[k % len(DIMS)]
        rho = random_density(rng, c)
        H = gamma_inv(rho)
        Y = random_traceless(rng, c)
        X = random_traceless(rng, c)
        V = random_tangent_at(rng, rho)
        V /= np.linalg.norm(V)
        worst["dgamma"] = max(worst["dgamma"], rel(dgamma(H, Y), central_difference(gamma, H, Y, h)))
        worst["dgamma_inv"] = max(worst["dgamma_inv"], rel(dgamma_inv(rho, V), central_difference(gamma_inv, rho, V, h)))
        fd = central_difference(lambda Z: lift_exp_density(rho, Z), X, Y, h)
        worst["dexp"] = max(worst["dexp"], rel(replicator_density(lift_exp_density(rho, X), Y), fd))
    ok = max(worst.values()) <= 1e-5
    verdict(2, "differentials vs finite differences", ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (tol 1e-5)")


def test_03_riemannian_gradient(verdict):
    rng = np.random.default_rng(103)
    h = 1e-5
    worst = dict(linear=0.0, quadratic=0.0, log_trace=0.0)
    for k in range(60):
        c = DIMS[k % len(DIMS)]
        rho = random_density(rng, c)
        Y = random_tangent_at(rng, rho)
        Y /= np.linalg.norm(Y)
        A = random_hermitian(rng, c)
        C = random_hermitian(rng, c)
        cases = {
            "linear": (lambda r: np.trace(A @ r).real, A),
            "quadratic": (lambda r: 0.5 * np.linalg.norm(r - C) ** 2, rho - C),
            "log_trace": (lambda r: float(np.sum(np.log(np.linalg.eigvalsh(r)))), np.linalg.inv(rho)),
        }
        for name, (f, egrad) in cases.items():
            lhs = bkm_metric(rho, riemannian_grad(rho, egrad), Y)
            fd = central_difference(f, rho, Y, h)
            worst[name] = max(worst[name], abs(lhs - fd) / max(abs(fd), 1e-12))
    ok = max(worst.values()) <= 1e-6
    verdict(3, "Riemannian gradient", ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (tol 1e-6)")


def test_04_sqsaf_limit(verdict):
    rng = np.random.default_rng(104)
    cfg = FlowConfig(step_size=0.05, max_iters=10_000)
    start = time.perf_counter()
    worst, iters, unconverged, count = 0.0, 0, 0, 0
    while count < 50:
        c = int(rng.integers(2, 9))
        D = random_hermitian(rng, c)
        P, gap = spectral_limit(D)
        if gap < 0.1:
            continue
        count += 1
        res = sqsaf_integrate(D, cfg)
        unconverged += not res.converged
        iters = max(iters, res.n_iter)
        worst = max(worst, float(np.linalg.norm(res.final - P)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-3 and unconverged == 0 and elapsed < 60
    detail = f"max distance {worst:.2e}, max iterations {iters}, unconverged {unconverged}, {elapsed:.1f}s (tol 1e-3, 60s)"
    verdict(4, "single-vertex limit", ok, detail)


def test_05_restriction(verdict):
    chk = ex.restriction_check(
        np.random.default_rng(105), c=4, grid=(8, 8), cfg=FlowConfig(step_size=0.05, max_iters=500, record_every=1)
    )
    ok = chk.max_deviation <= 1e-8 and chk.quantum.n_iter == 500
    verdict(5, "restriction to commuting data", ok, f"max deviation {chk.max_deviation:.2e} over {chk.quantum.n_iter} steps (tol 1e-8)")


def test_06_geometric_mean(verdict):
    rng = np.random.default_rng(106)
    worst = 0.0
    for _ in range(50):
        n, c = int(rng.integers(2, 9)), int(rng.integers(2, 5))
        raw = rng.uniform(0.0, 1.0, (n, n)) * (rng.uniform(size=(n, n)) < 0.7) + np.eye(n) * 0.1
        G = WeightedGraph.from_dense(raw / raw.sum(axis=1, keepdims=True))
        rho = np.array([random_density(rng, c) for _ in range(n)])
        D = np.array([random_hermitian(rng, c) for _ in range(n)])
        S = similarity_density(G, rho, D)
        for i, (nb, w) in enumerate(zip(G.neighborhoods, G.weights)):
            res = sum(wk * exp_e_inv(S[i], likelihood_density(rho[k], D[k])) for k, wk in zip(nb, w))
            worst = max(worst, float(np.linalg.norm(res)))
    verdict(6, "geometric mean residual", worst <= 1e-8, f"max residual {worst:.2e} (tol 1e-8)")


def _symmetric_instance(rng):
    n, c = int(rng.integers(2, 7)), int(rng.integers(2, 4))
    G = WeightedGraph.from_dense(random_symmetric_graph_matrix(rng, n), symmetric=True)
    return G, n, c


def test_07_gradient_flow(verdict):
    rng = np.random.default_rng(107)
    worst = 0.0
    for _ in range(100):
        G, n, c = _symmetric_instance(rng)
        mu = np.array([random_density(rng, c) for _ in range(n)])
        F = s_flow_field(G, mu)
        gFF = float(np.sum(bkm_metric(mu, F, F)))
        dJ = central_difference(lambda m: potential(G, m), mu, F, h=1e-5)
        worst = max(worst, abs(gFF + dJ) / max(gFF, 1e-300))
    monotone = 0
    for _ in range(100):
        G, n, c = _symmetric_instance(rng)
        D = np.array([random_hermitian(rng, c) for _ in range(n)])
        res = mu_flow_integrate(G, initial_state(G, D), FlowConfig(step_size=0.01, max_iters=300))
        monotone += bool(np.all(np.diff(res.diagnostics[:, 2]) <= 1e-12))
    ok = worst <= 1e-6 and monotone >= 95
    verdict(7, "gradient flow of J", ok, f"identity rel. error {worst:.2e} (tol 1e-6), monotone J on {monotone}/100 (need 95)")


def test_08_log_euclidean(verdict):
    rng = np.random.default_rng(108)
    worst = 0.0
    for k in range(100):
        c = DIMS[k % len(DIMS)]
        rho = random_density(rng, c)
        X = random_tangent_at(rng, rho)
        lhs = log_euclidean_exp(rho, log_euclidean_direction(rho, X))
        worst = max(worst, float(np.linalg.norm(lhs - exp_e(rho, X))))
    verdict(8, "log-Euclidean equivalence", worst <= 1e-10, f"max difference {worst:.2e} (tol 1e-10)")


def test_09_bloch(verdict):
    rng = np.random.default_rng(109)
    scene = ex.synthetic_bloch_scene(rng, 32, 32, clean_norm=0.6, noise_sigma=0.3)
    start = time.perf_counter()
    res, final = ex.run_bloch_flow(scene.noisy, FlowConfig(step_size=0.1, max_iters=10_000), min_norm=0.999)
    elapsed = time.perf_counter() - start
    mask = ex.interior_mask(scene.labels)
    acc = ex.label_accuracy(final, scene.labels, scene.prototypes, mask)
    min_norm = float(np.linalg.norm(final, axis=-1).min())
    ok = res.converged and min_norm >= 0.999 and acc >= 0.95 and elapsed < 300
    detail = (
        f"{res.n_iter} iterations, min |d| {min_norm:.4f}, interior accuracy {acc:.3f} "
        f"on {int(mask.sum())} pixels, {elapsed:.1f}s (need |d| >= 0.999, accuracy >= 0.95, 300s)"
    )
    verdict(9, "Bloch labeling", ok, detail)


def test_10_patches(verdict):
    rng = np.random.default_rng(110)
    img, membership = ex.two_population_image(rng, patch_size=4, grid=(6, 6))
    patches, shape = ex.image_to_patches(img, 4)
    pr = ex.run_patch_flow(patches, shape, FlowConfig(), encoder="rank-one", adjacency="knn", k=8)
    final = pr.result.final
    spread = 0.0
    for m in np.unique(membership):
        group = final[membership == m]
        diffs = np.linalg.norm(group[:, None] - group[None, :], axis=(-2, -1))
        spread = max(spread, float(diffs.max()))
    corr = ex.fourier_self_consistency(patches)
    ok = pr.result.converged and spread <= 1e-6 and corr >= 0.99
    detail = f"converged {pr.result.converged}, within-population spread {spread:.1e} (tol 1e-6), Fourier self-consistency {corr:.4f} (need 0.99)"
    verdict(10, "patch populations", ok, detail)


CLI_RUNS = [
    ["single-vertex", "--eigenvalues", "0.5,1,2", "--basis-seed", "3"],
    ["bloch-denoise", "--size", "16"],
    ["patch-smooth", "--grid", "4x4", "--encoder", "fourier", "--weights", "gaussian:2"],
    ["restrict-check", "--grid", "4x4", "--max-iters", "100"],
    ["potential-trace", "--grid", "4x4", "--max-iters", "300", "--allow-partial"],
]


def test_11_determinism(verdict, tmp_path):
    mismatched, compared = [], 0
    for k, argv in enumerate(CLI_RUNS):
        a, b = tmp_path / f"{k}a", tmp_path / f"{k}b"
        codes = [cli_main([*argv, "--seed", "11", "--workers", str(w), "--out", str(d)]) for w, d in ((1, a), (4, b))]
        if codes != [0, 0]:
            mismatched.append(f"{argv[0]} exit {codes}")
            continue
        for f in sorted(a.glob("*")):
            if f.suffix in (".csv", ".json") and f.name != "timing.json":
                compared += 1
                if f.read_bytes() != (b / f.name).read_bytes():
                    mismatched.append(f"{argv[0]}/{f.name}")
    ok = not mismatched and compared > 0
    detail = f"{compared} CSV/JSON files compared across 1 and 4 workers, mismatches: {mismatched or 'none'}"
    verdict(11, "worker determinism", ok, detail)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
