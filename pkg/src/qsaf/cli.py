"""Command line interface: ``qsaf <command> [options]``.

Every command writes into ``--out``:

* ``report.json``: iterations, final purity gap, command metrics and the
  effective configuration.  Identical bytes for identical seeds and
  configurations, independent of ``--workers``.
* ``diagnostics.csv`` (graph flows) or a trajectory CSV.
* ``timing.json``: wall-clock time, kept apart so reports stay reproducible.
* PNG figures unless ``--no-figures`` is given.

Exit status: 0 on success, 1 on bad input or I/O failure, 2 on usage errors,
3 when a flow stops without converging (unless ``--allow-partial``), 4 when
``restrict-check`` measures a deviation above its tolerance.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments as ex
from .encodings import bloch_to_rgb, random_unitary, rgb_to_bloch
from .flow import FlowConfig, initial_state, mu_flow_integrate, spectral_limit, sqsaf_integrate
from .graph import complete_graph, grid_graph
from .hermitian import DomainError, as_hermitian, from_eigen, spectral_decompose
from .io import (
    FormatError,
    gray_to_rgb,
    matrix_to_json,
    read_image,
    read_json,
    read_matrix,
    rgb_to_gray,
    to_uint8,
    write_csv,
    write_diagnostics,
    write_image,
    write_json,
)
from .simplex import single_vertex_af

log = logging.getLogger("qsaf")

EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 3
EXIT_CHECK_FAILED = 4

# keys that affect where or how fast a run happens, never what it computes
_NOT_ECHOED = {"out", "workers", "config", "no_figures", "command", "verbose"}

COMMON_DEFAULTS = {
    "eps": 0.1,
    "purity_tol": 1e-3,
    "max_iters": 10_000,
    "record_every": 10,
    "seed": 0,
    "tau": 1.0,
    "weights": "uniform",
    "out": "qsaf-out",
    "allow_partial": False,
    "workers": 1,
    "no_figures": False,
}

COMMAND_DEFAULTS = {
    "single-vertex": {
        "eigenvalues": None,
        "basis_seed": None,
        "matrix": None,
        "classical": None,
        "record_every": 1,
    },
    "bloch-denoise": {
        "input": None,
        "size": 32,
        "noise_sigma": 0.3,
        "clean_norm": 0.6,
        "radius": 1,
        "min_bloch_norm": 0.999,
        "format": "png",
    },
    "patch-smooth": {
        "input": None,
        "patch_size": 4,
        "grid": "6x6",
        "encoder": "rank-one",
        "adjacency": "grid",
        "k": 8,
        "format": "png",
    },
    "restrict-check": {
        "c": 4,
        "grid": "8x8",
        "eps": 0.05,
        "max_iters": 500,
        "record_every": 1,
        "basis": "random",
        "noncommuting": 0.0,
        "tolerance": 1e-8,
    },
    "potential-trace": {
        "graph": "periodic-grid",
        "grid": "6x6",
        "n": 8,
        "c": 3,
        "scale": 0.5,
        "eps": 0.01,
        "max_iters": 2000,
    },
}


class UsageError(Exception):
    pass


def _float_list(text):
    try:
        return [float(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _grid(text):
    try:
        h, w = (int(v) for v in str(text).lower().split("x"))
    except ValueError as exc:
        raise UsageError(f"grid must look like 8x8, got {text!r}") from exc
    if h < 1 or w < 1:
        raise UsageError("grid dimensions must be positive")
    return h, w


def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    g = p.add_argument_group("flow and output")
    g.add_argument("--eps", type=float, default=S, help="step size (default 0.1; command-specific)")
    g.add_argument("--purity-tol", type=float, default=S, help="stop when max purity gap <= tol * tau^2 (default 1e-3)")
    g.add_argument("--max-iters", type=int, default=S, help="iteration budget (default 10000)")
    g.add_argument("--record-every", type=int, default=S, help="keep every k-th state in trajectories")
    g.add_argument("--seed", type=int, default=S, help="random seed (default 0)")
    g.add_argument("--tau", type=float, default=S, help="trace of the density matrices (default 1)")
    g.add_argument("--weights", default=S, help="uniform | gaussian:<t> (patch graphs)")
    g.add_argument("--out", default=S, help="output directory (default qsaf-out)")
    g.add_argument("--allow-partial", action="store_true", default=S, help="exit 0 even without convergence")
    g.add_argument("--workers", type=int, default=S, help="threads for graph-flow steps (default 1)")
    g.add_argument("--config", default=S, help="JSON file with option values; command-line flags win")
    g.add_argument("--no-figures", action="store_true", default=S, help="skip PNG figures")
    g.add_argument("-v", "--verbose", action="store_true", default=S)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="qsaf", description="Quantum state assignment flows.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("single-vertex", parents=[common], help="single-vertex flow and its limit")
    p.add_argument("--eigenvalues", default=S, help="eigenvalues of D, e.g. 1,2")
    p.add_argument("--basis-seed", type=int, default=S, help="rotate D by a random unitary from this seed")
    p.add_argument("--matrix", default=S, help="data matrix file (.npy, .json, .csv)")
    p.add_argument("--classical", default=S, help="run the simplex flow on this data vector instead")

    p = sub.add_parser("bloch-denoise", parents=[common], help="Bloch-vector image smoothing")
    p.add_argument("--input", default=S, help="RGB image (PNG/PPM); synthetic scene if omitted")
    p.add_argument("--size", type=int, default=S, help="synthetic image side length (default 32)")
    p.add_argument("--noise-sigma", type=float, default=S, help="synthetic noise level (default 0.3)")
    p.add_argument("--clean-norm", type=float, default=S, help="Bloch norm of synthetic clean pixels (default 0.6)")
    p.add_argument("--radius", type=int, default=S, help="grid neighborhood radius (default 1: 3x3)")
    p.add_argument("--min-bloch-norm", type=float, default=S, help="stop when all |d_i| reach this (default 0.999)")
    p.add_argument("--format", choices=("png", "ppm"), default=S)

    p = sub.add_parser("patch-smooth", parents=[common], help="patch smoothing of a grayscale image")
    p.add_argument("--input", default=S, help="image; two-population synthetic image if omitted")
    p.add_argument("--patch-size", type=int, default=S, help="patch side length (default 4)")
    p.add_argument("--grid", default=S, help="synthetic patch grid, e.g. 6x6")
    p.add_argument("--encoder", choices=tuple(ex.ENCODERS), default=S)
    p.add_argument("--adjacency", choices=("grid", "knn"), default=S)
    p.add_argument("--k", type=int, default=S, help="neighbors for knn adjacency (default 8)")
    p.add_argument("--format", choices=("png", "ppm"), default=S)

    p = sub.add_parser("restrict-check", parents=[common], help="matrix flow vs simplex flow on commuting data")
    p.add_argument("--c", type=int, default=S, help="matrix dimension (default 4)")
    p.add_argument("--grid", default=S, help="grid graph, e.g. 8x8")
    p.add_argument("--basis", choices=("random", "identity"), default=S)
    p.add_argument("--noncommuting", type=float, default=S, help="add a random Hermitian term of this size")
    p.add_argument("--tolerance", type=float, default=S, help="maximal accepted deviation (default 1e-8)")

    p = sub.add_parser("potential-trace", parents=[common], help="potential J along the flow")
    p.add_argument("--graph", choices=("periodic-grid", "complete"), default=S)
    p.add_argument("--grid", default=S, help="periodic grid, e.g. 6x6")
    p.add_argument("--n", type=int, default=S, help="vertices of the complete graph")
    p.add_argument("--c", type=int, default=S, help="matrix dimension (default 3)")
    p.add_argument("--scale", type=float, default=S, help="size of the random data matrices")
    return parser


def resolve_config(ns: argparse.Namespace) -> dict:
    """Defaults, then the ``--config`` file, then explicit flags."""
    cfg = dict(COMMON_DEFAULTS)
    cfg.update(COMMAND_DEFAULTS[ns.command])
    given = {k: v for k, v in vars(ns).items() if k != "command"}
    if "config" in given:
        try:
            data = read_json(given["config"])
        except OSError as exc:
            raise FormatError(f"cannot read config file: {exc}") from exc
        if not isinstance(data, dict):
            raise FormatError("config file must hold a JSON object")
        for key, value in data.items():
            key = key.replace("-", "_")
            if key not in cfg:
                raise UsageError(f"unknown config key {key!r} for {ns.command}")
            cfg[key] = value
    cfg.update(given)
    cfg["command"] = ns.command
    return cfg


def flow_config(cfg: dict) -> FlowConfig:
    try:
        return FlowConfig(
            step_size=float(cfg["eps"]),
            purity_tol=float(cfg["purity_tol"]),
            max_iters=int(cfg["max_iters"]),
            record_every=int(cfg["record_every"]),
            trace_scale=float(cfg["tau"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _echo(cfg):
    return {k: v for k, v in sorted(cfg.items()) if k not in _NOT_ECHOED}


class Run:
    """Output directory plus report bookkeeping for one command."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.figures = not cfg["no_figures"]
        self.report = {"command": cfg["command"], "config": _echo(cfg), "notes": []}

    def path(self, name):
        return self.out / name

    def flow(self, result, diagnostics_file="diagnostics.csv"):
        self.report.update(
            iterations=int(result.n_iter),
            converged=bool(result.converged),
            purity_gap_max=float(result.purity_gap_max),
        )
        if result.diagnostics is not None:
            write_diagnostics(self.path(diagnostics_file), result.diagnostics)
            self.report["diagnostics"] = diagnostics_file
        self.report["notes"].extend(result.notes)

    def finish(self, started):
        write_json(self.path("report.json"), self.report)
        write_json(self.path("timing.json"), {"wall_time_s": time.perf_counter() - started})
        return self.report


def _image_name(cfg, stem):
    return f"{stem}.{cfg['format']}"


def cmd_single_vertex(cfg, run: Run):
    fc = flow_config(cfg)
    if cfg["classical"] is not None:
        d = np.asarray(_float_list(cfg["classical"]))
        if d.size < 2:
            raise UsageError("classical data needs at least two entries")
        res = single_vertex_af(d, fc)
        winners = np.flatnonzero(np.isclose(d, d.min(), rtol=0, atol=1e-12))
        target = np.zeros_like(d)
        target[winners] = 1.0 / len(winners)
        run.report.update(
            mode="classical",
            final_state=res.final,
            predicted_limit=target,
            limit_distance=float(np.linalg.norm(res.final - target)),
            iterations=int(res.n_iter),
            converged=bool(res.converged),
        )
        header = ["iter"] + [f"p_{j + 1}" for j in range(d.size)]
        write_csv(run.path("trajectory.csv"), header, ([int(t), *p] for t, p in zip(res.steps, res.states)))
        write_json(run.path("final_state.json"), {"p": res.final})
        if run.figures:
            from .plotting import plot_trajectory

            plot_trajectory(res.steps, res.states, run.path("trajectory.png"), ylabel="probability")
        return res.converged

    if cfg["matrix"] is not None:
        D = as_hermitian(read_matrix(cfg["matrix"]), tol=1e-8)
    elif cfg["eigenvalues"] is not None:
        lam = np.asarray(_float_list(cfg["eigenvalues"]))
        if lam.size < 1:
            raise UsageError("--eigenvalues is empty")
        if cfg["basis_seed"] is None:
            U = np.eye(lam.size, dtype=complex)
        else:
            U = random_unitary(lam.size, np.random.default_rng(int(cfg["basis_seed"])))
        D = from_eigen(U, lam)
    else:
        raise UsageError("give --eigenvalues, --matrix or --classical")

    tau = fc.trace_scale
    res = sqsaf_integrate(D, fc)
    w, V = spectral_decompose(D)
    # ties in the smallest eigenvalue lead to the normalized eigenspace projector
    tied = np.flatnonzero(w - w[0] <= 1e-12 * max(1.0, abs(w[0])))
    target = tau * (V[:, tied] @ np.conj(V[:, tied]).T) / len(tied)
    _, gap = spectral_limit(D)
    traj = np.array([spectral_decompose(s)[0][::-1] for s in res.states])
    run.report.update(
        mode="matrix",
        eigenvalues_D=w,
        min_eigenvalue_gap=gap,
        multiplicity_min=len(tied),
        limit_distance=float(np.linalg.norm(res.final - target)),
        iterations=int(res.n_iter),
        converged=bool(res.converged),
        purity_gap_max=float(tau**2 - np.real(np.trace(res.final @ res.final))),
    )
    if len(tied) > 1:
        run.report["notes"].append(
            "smallest eigenvalue of D is repeated: the mixed limit is an unstable equilibrium, "
            "rounding outside the eigenbasis can drive the state to a pure one"
        )
    c = D.shape[0]
    header = ["iter"] + [f"lambda_{j + 1}" for j in range(c)]
    write_csv(run.path("trajectory.csv"), header, ([int(t), *lam] for t, lam in zip(res.steps, traj)))
    write_json(run.path("final_state.json"), matrix_to_json(res.final))
    if run.figures:
        from .plotting import plot_trajectory

        plot_trajectory(res.steps, traj / tau, run.path("trajectory.png"), ylabel="eigenvalue / tau")
    return res.converged


def cmd_bloch_denoise(cfg, run: Run):
    fc = flow_config(cfg)
    if fc.trace_scale != 1.0:
        raise UsageError("bloch-denoise works with unit-trace states (--tau 1)")
    if not 0 < cfg["min_bloch_norm"] < 1:
        raise UsageError("--min-bloch-norm must lie in (0, 1)")
    scene = None
    if cfg["input"] is not None:
        rgb = read_image(cfg["input"]) / 255.0
        noisy = rgb_to_bloch(rgb)
    else:
        rng = np.random.default_rng(int(cfg["seed"]))
        n = int(cfg["size"])
        scene = ex.synthetic_bloch_scene(rng, n, n, cfg["clean_norm"], cfg["noise_sigma"])
        noisy = scene.noisy
    res, final = ex.run_bloch_flow(
        noisy, fc, radius=int(cfg["radius"]), min_norm=cfg["min_bloch_norm"], workers=int(cfg["workers"])
    )
    run.flow(res)
    norms = np.linalg.norm(final, axis=-1)
    run.report.update(min_bloch_norm=float(norms.min()), shape=list(noisy.shape[:2]))
    if scene is not None:
        mask = ex.interior_mask(scene.labels)
        run.report.update(
            interior_pixels=int(mask.sum()),
            interior_accuracy=ex.label_accuracy(final, scene.labels, scene.prototypes, mask),
            interior_accuracy_noisy=ex.label_accuracy(scene.noisy, scene.labels, scene.prototypes, mask),
        )
        write_image(run.path(_image_name(cfg, "clean")), to_uint8(bloch_to_rgb(scene.clean)))
    write_image(run.path(_image_name(cfg, "noisy")), to_uint8(bloch_to_rgb(noisy)))
    write_image(run.path(_image_name(cfg, "result")), to_uint8(bloch_to_rgb(final)))
    if run.figures:
        from .plotting import plot_bloch_vectors, plot_diagnostics, plot_image_panels

        panels = [("noisy", bloch_to_rgb(noisy)), ("result", bloch_to_rgb(final))]
        if scene is not None:
            panels.insert(0, ("clean", bloch_to_rgb(scene.clean)))
        plot_image_panels(panels, run.path("panels.png"))
        plot_diagnostics(res.diagnostics, run.path("diagnostics.png"))
        plot_bloch_vectors(final, run.path("bloch_final.png"), colors=bloch_to_rgb(final))
    return res.converged


def cmd_patch_smooth(cfg, run: Run):
    fc = flow_config(cfg)
    s = int(cfg["patch_size"])
    if s < 2:
        raise UsageError("--patch-size must be at least 2")
    membership = None
    if cfg["input"] is not None:
        gray = rgb_to_gray(read_image(cfg["input"]))
    else:
        rng = np.random.default_rng(int(cfg["seed"]))
        gray, membership = ex.two_population_image(rng, s, _grid(cfg["grid"]))
    patches, grid_shape = ex.image_to_patches(gray, s)
    cropped = (gray.shape[0] - grid_shape[0] * s, gray.shape[1] - grid_shape[1] * s)
    try:
        pr = ex.run_patch_flow(
            patches,
            grid_shape,
            fc,
            encoder=cfg["encoder"],
            adjacency=cfg["adjacency"],
            k=int(cfg["k"]),
            weights=cfg["weights"],
            workers=int(cfg["workers"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    run.flow(pr.result)
    run.report["notes"].extend(pr.notes)
    if any(cropped):
        run.report["notes"].append(f"cropped {cropped[0]} rows and {cropped[1]} columns")
    run.report.update(patches=len(patches), grid=list(grid_shape), skipped=len(pr.skipped))
    if membership is not None:
        run.report["population_spread"] = ex.population_spread(pr.result.final, membership[pr.kept])
    if cfg["encoder"] == "fourier":
        run.report["fourier_self_consistency"] = ex.fourier_self_consistency(patches)
    result_img = np.clip(ex.patches_to_image(pr.decoded, grid_shape), 0, 1)
    input_img = gray[: grid_shape[0] * s, : grid_shape[1] * s]
    write_image(run.path(_image_name(cfg, "input")), gray_to_rgb(np.clip(input_img, 0, 1)))
    write_image(run.path(_image_name(cfg, "result")), gray_to_rgb(result_img))
    if run.figures:
        from .plotting import plot_diagnostics, plot_image_panels

        plot_image_panels([("input", input_img), ("result", result_img)], run.path("panels.png"))
        plot_diagnostics(pr.result.diagnostics, run.path("diagnostics.png"))
    return pr.result.converged


def cmd_restrict_check(cfg, run: Run):
    fc = flow_config(cfg)
    if fc.trace_scale != 1.0:
        raise UsageError("restrict-check compares unit-trace states (--tau 1)")
    rng = np.random.default_rng(int(cfg["seed"]))
    chk = ex.restriction_check(
        rng,
        c=int(cfg["c"]),
        grid=_grid(cfg["grid"]),
        cfg=fc,
        basis=cfg["basis"],
        perturbation=float(cfg["noncommuting"]),
        workers=int(cfg["workers"]),
    )
    run.flow(chk.quantum)
    passed = chk.max_deviation <= float(cfg["tolerance"])
    run.report["notes"].append("fixed horizon of max_iters steps; purity stopping disabled")
    run.report.update(max_deviation=chk.max_deviation, within_tolerance=passed, steps=int(chk.quantum.n_iter))
    write_csv(
        run.path("deviation.csv"),
        ["iter", "deviation"],
        ([int(t), float(d)] for t, d in zip(chk.quantum.steps, chk.deviations)),
    )
    if run.figures:
        from .plotting import plot_diagnostics, plot_series

        plot_diagnostics(chk.quantum.diagnostics, run.path("diagnostics.png"))
        plot_series(chk.quantum.steps, chk.deviations, run.path("deviation.png"), "max deviation", log=True)
    # a fixed horizon, not a convergence run
    return None if passed else EXIT_CHECK_FAILED


def cmd_potential_trace(cfg, run: Run):
    fc = flow_config(cfg)
    rng = np.random.default_rng(int(cfg["seed"]))
    c = int(cfg["c"])
    if cfg["graph"] == "complete":
        G = complete_graph(int(cfg["n"]))
    else:
        G = grid_graph(*_grid(cfg["grid"]), periodic=True)
    D = ex.random_hermitian(rng, (G.n_vertices, c, c), float(cfg["scale"]))
    res = mu_flow_integrate(G, initial_state(G, D, fc.trace_scale), fc, workers=int(cfg["workers"]))
    run.flow(res)
    J = res.diagnostics[:, 2]
    increases = int(np.sum(np.diff(J) > 1e-12))
    run.report.update(
        J_initial=float(J[0]), J_final=float(J[-1]), J_increases=increases, J_monotone=increases == 0
    )
    if run.figures:
        from .plotting import plot_diagnostics, plot_potential

        plot_potential(res.diagnostics, run.path("potential.png"))
        plot_diagnostics(res.diagnostics, run.path("diagnostics.png"))
    return res.converged


COMMANDS = {
    "single-vertex": cmd_single_vertex,
    "bloch-denoise": cmd_bloch_denoise,
    "patch-smooth": cmd_patch_smooth,
    "restrict-check": cmd_restrict_check,
    "potential-trace": cmd_potential_trace,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(ns, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    started = time.perf_counter()
    try:
        cfg = resolve_config(ns)
        run = Run(cfg)
        status = COMMANDS[ns.command](cfg, run)
        run.finish(started)
    except UsageError as exc:
        parser.error(str(exc))
    except (FormatError, DomainError, OSError, ValueError) as exc:
        print(f"qsaf: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if isinstance(status, int) and not isinstance(status, bool):
        print(f"qsaf: check failed, see {run.path('report.json')}", file=sys.stderr)
        return status
    if status is False and not cfg["allow_partial"]:
        print(
            f"qsaf: no convergence within {cfg['max_iters']} iterations "
            f"(rerun with --allow-partial to accept), see {run.path('report.json')}",
            file=sys.stderr,
        )
        return EXIT_NOT_CONVERGED
    return 0


if __name__ == "__main__":
    sys.exit(main())
