"""Batch experiment runner.

Subcommands ingest JSON specs, dispatch to the library, and emit JSON
reports plus plot-ready CSV. Outputs are deterministic for a fixed seed;
wall-clock metadata lives only in a sidecar file so artifact bytes are
reproducible. Verbosity via the QROOT_LOG environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .block_encoding import projector
from .circulant_pde import (
    CirculantSpec,
    circulant_encode,
    circulant_eigenvalues,
    laplacian_circulant,
    poisson_periodic_solve,
)
from .newton_solver import NewtonConfig, encode_state_diag, newton_step, solve, solve_lm
from .nonlinear_system import FunctionFamily, linear_family
from .physics_apps import (
    LyapunovConfig,
    MassChainSpec,
    TimeGrid,
    build_equilibrium_system,
    equilibrium_energy,
    first_order_chain,
    linear_rate_family,
    lyapunov_estimate,
    potential_energy,
    simulate_dynamics,
)
from .root_dissect import MultivariatePolynomial, SampleGrid, classical_scan, dissect

log = logging.getLogger("qroot")


class CliError(Exception):
    """Configuration or input problem; maps to exit status 2."""


def _setup_logging():
    level = os.environ.get("QROOT_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(name)s %(levelname)s %(message)s")


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise CliError(f"input file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _np_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1, default=_np_default)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else repr(v) if isinstance(v, float)
                             else v for v in row])


def _sidecar(out: Path, config: dict):
    _write_json(out / "run_meta.json",
                {"config": config, "timestamp": time.time(),
                 "version": __version__})


def _fit_r2(x: np.ndarray, y: np.ndarray, design: np.ndarray
            ) -> tuple[np.ndarray, float]:
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    pred = design @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return coef, r2


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_dissect(args, out: Path, seeds) -> dict:
    cfgd = _load_json(args.config)
    if "function" not in cfgd or "grid" not in cfgd:
        raise CliError("dissect config needs 'function' and 'grid'")
    f = MultivariatePolynomial.from_json_dict(cfgd["function"])
    grid = SampleGrid.from_json_dict(cfgd["grid"])
    eps = args.eps if args.eps is not None else cfgd.get("eps", 1e-3)
    report = dissect(grid, f, eps=eps, seed=int(seeds[0]))
    baseline = classical_scan(grid, f)
    payload = {"dissect": report.to_json_dict(),
               "classical_scan": baseline.to_json_dict()}
    _write_json(out / "dissect_report.json", payload)
    return payload


def _family_from(cfgd: dict) -> FunctionFamily:
    fam = cfgd.get("family")
    if fam is None:
        raise CliError("config needs a 'family' object or file path")
    if isinstance(fam, str):
        fam = _load_json(fam)
    return FunctionFamily.from_json_dict(fam)


def _newton_common(args, cfgd, seeds) -> tuple[FunctionFamily, np.ndarray, NewtonConfig]:
    family = _family_from(cfgd)
    cfg = NewtonConfig(
        iterations=cfgd.get("iterations"),
        eps=args.eps if args.eps is not None else cfgd.get("eps", 1e-6),
        strategy=cfgd.get("strategy", "shared"),
        seed=int(seeds[0]),
    )
    x0 = cfgd.get("x0")
    if x0 is not None:
        x0 = np.asarray(x0, dtype=np.float64)
    return family, x0, cfg


def _solve_payload(report) -> dict:
    return report.to_json_dict()


def _cmd_newton(args, out: Path, seeds) -> dict:
    cfgd = _load_json(args.config)
    family, x0, cfg = _newton_common(args, cfgd, seeds)
    report = solve(family, x0, cfg)
    _write_json(out / "newton_report.json", _solve_payload(report))
    _write_csv(out / "newton_iterates.csv",
               ["iteration"] + [f"x{i}" for i in range(family.n_vars)],
               [[s.index, *map(float, s.x)] for s in report.steps])
    return _solve_payload(report)


def _cmd_lm(args, out: Path, seeds) -> dict:
    cfgd = _load_json(args.config)
    family, x0, cfg = _newton_common(args, cfgd, seeds)
    damping = cfgd.get("damping", 0.1)
    report = solve_lm(family, x0, damping, cfg)
    _write_json(out / "lm_report.json", _solve_payload(report))
    return _solve_payload(report)


def _cmd_linear(args, out: Path, seeds) -> dict:
    cfgd = _load_json(args.config)
    mat = np.asarray(cfgd["matrix"], dtype=np.float64)
    rhs = np.asarray(cfgd["rhs"], dtype=np.float64)
    family = linear_family(mat, rhs)
    cfg = NewtonConfig(iterations=cfgd.get("iterations", 2),
                       eps=args.eps if args.eps is not None else 1e-8,
                       strategy="shared", seed=int(seeds[0]))
    report = solve(family, np.zeros(mat.shape[0]), cfg)
    _write_json(out / "linear_report.json", _solve_payload(report))
    return _solve_payload(report)


def _cmd_circulant(args, out: Path, seeds) -> dict:
    cfgd = _load_json(args.config)
    spec = CirculantSpec(np.asarray(cfgd["first_row"], dtype=np.complex128))
    enc = circulant_encode(spec)
    lam = circulant_eigenvalues(spec)
    err = float(np.max(np.abs(enc.op - spec.dense())))
    payload = {"n": spec.n, "alpha": enc.alpha,
               "reconstruction_error": err,
               "cost": enc.cost.as_dict(),
               "eigenvalues_real": np.real(lam).tolist(),
               "eigenvalues_imag": np.imag(lam).tolist()}
    _write_json(out / "circulant_report.json", payload)
    return payload


def _cmd_poisson(args, out: Path, seeds) -> dict:
    cfgd = _load_json(args.config)
    g = np.asarray(cfgd["g"], dtype=np.float64)
    _, report = poisson_periodic_solve(
        g, cfgd.get("dx", 1.0), cfgd.get("order", 1),
        args.eps if args.eps is not None else cfgd.get("eps", 1e-8))
    payload = report.to_json_dict()
    payload["solution"] = report.solution.tolist()
    _write_json(out / "poisson_report.json", payload)
    _write_csv(out / "poisson_solution.csv", ["i", "u"],
               [[i, float(v)] for i, v in enumerate(report.solution)])
    _write_csv(out / "poisson_comparison.csv",
               ["kappa", "modeled_this_cost", "modeled_prior_cost"],
               [[report.kappa, report.modeled_this_cost,
                 report.modeled_prior_cost]])
    return payload


def _chain_from(cfgd: dict) -> MassChainSpec:
    return MassChainSpec(np.asarray(cfgd["masses"], dtype=np.float64),
                         np.asarray(cfgd["springs"], dtype=np.float64))


def _cmd_masses(args, out: Path, seeds) -> dict:
    cfgd = _load_json(args.config)
    chain = _chain_from(cfgd)
    family = build_equilibrium_system(chain)
    cfg = NewtonConfig(iterations=cfgd.get("iterations", 8),
                       eps=args.eps if args.eps is not None else 1e-8,
                       seed=int(seeds[0]))
    report = solve_lm(family, cfgd.get("x0"), cfgd.get("damping", 0.1), cfg)
    energy = equilibrium_energy(encode_state_diag(report.x_final), chain,
                                seed=int(seeds[1]))
    payload = {"solve": _solve_payload(report), "energy": energy,
               "energy_direct": potential_energy(chain, report.x_final)}
    _write_json(out / "masses_report.json", payload)
    return payload


def _cmd_dynamics(args, out: Path, seeds) -> dict:
    cfgd = _load_json(args.config)
    chain = _chain_from(cfgd)
    grid = TimeGrid(cfgd["horizon"], cfgd["dt"], cfgd.get("order", 1))
    x0 = np.asarray(cfgd["x0"], dtype=np.float64)
    v0 = np.asarray(cfgd.get("v0", np.zeros_like(x0)), dtype=np.float64)
    path = simulate_dynamics(chain, grid, x0, v0)
    rows = [[m * grid.step, *map(float, path[m]),
             potential_energy(chain, path[m])]
            for m in range(path.shape[0])]
    _write_csv(out / "dynamics_trajectory.csv",
               ["t"] + [f"x{i}" for i in range(chain.n)] + ["potential"],
               rows)
    payload = {"n_steps": grid.n_steps, "final": path[-1].tolist()}
    _write_json(out / "dynamics_report.json", payload)
    return payload


def _cmd_lyapunov(args, out: Path, seeds) -> dict:
    cfgd = _load_json(args.config)
    if "rates" in cfgd:
        rhs = linear_rate_family(np.asarray(cfgd["rates"], dtype=np.float64))
    elif "masses" in cfgd:
        rhs = first_order_chain(_chain_from(cfgd))
    else:
        rhs = _family_from(cfgd)
    grid = TimeGrid(cfgd["horizon"], cfgd["dt"])
    x0 = np.asarray(cfgd["x0"], dtype=np.float64)
    x0b = np.asarray(cfgd["x0_bar"], dtype=np.float64)
    cfg = LyapunovConfig(cfgd["renorm_interval"], cfgd["n_intervals"],
                         float(np.linalg.norm(x0 - x0b)))
    rep = lyapunov_estimate(rhs, x0, x0b, grid, cfg, seed=int(seeds[0]))
    payload = {"lambda": rep.value, "lambda_benettin": rep.benettin_value,
               "k_used": rep.k_used, "flagged": rep.flagged,
               "separations": rep.separations.tolist()}
    _write_json(out / "lyapunov_report.json", payload)
    _write_csv(out / "lyapunov_separations.csv", ["k", "d"],
               [[k, float(d)] for k, d in enumerate(rep.separations)])
    return payload


# ---------------------------------------------------------------------------
# scaling suites
# ---------------------------------------------------------------------------

def _figure_f() -> MultivariatePolynomial:
    # x (x - 0.5)(x + 0.7) = x^3 + 0.2 x^2 - 0.35 x
    return MultivariatePolynomial(np.array([1.0, 0.2, -0.35]),
                                  np.array([[3], [2], [1]]))


def _suite_dissect_logn(sizes, seed) -> tuple[list, dict]:
    f = _figure_f()
    rows = []
    for n in sizes:
        grid = SampleGrid.uniform(-0.5, 0.5, n)
        rep = dissect(grid, f, seed=seed)
        base = classical_scan(grid, f)
        rows.append([n, rep.cost.modeled_depth, rep.cost.base_unitary_uses,
                     rep.cost.state_prep_queries,
                     base.cost.base_unitary_uses])
    x = np.log2(np.array([r[0] for r in rows], dtype=np.float64))
    y = np.array([r[1] for r in rows], dtype=np.float64)
    design = np.column_stack([np.ones_like(x), x, x**2])
    coef, r2 = _fit_r2(x, y, design)
    fit = {"model": "a + b*log2(n) + c*log2(n)^2",
           "a": coef[0], "b": coef[1], "c": coef[2], "r_squared": r2}
    return rows, fit


def _suite_newton_exponent(sizes, seed) -> tuple[list, dict]:
    rows = []
    rng = np.random.default_rng(seed)
    for n in sizes:
        a = np.zeros((n, 2, n))
        a[:, 0, :] = np.eye(n) + 0.1 * rng.standard_normal((n, n)) / n
        a[:, 1, :] = 0.1 * rng.standard_normal((n, n)) / (n * n)
        family = FunctionFamily("sum_of_powers", a)
        cfg = NewtonConfig(iterations=2, eps=1e-6, seed=seed)
        enc = encode_state_diag(np.full(n, 0.1))
        enc1, rec1 = newton_step(family, enc, cfg, index=0)
        _, rec2 = newton_step(family, enc1, cfg, index=1)
        ratio = rec2.cost.modeled_depth / rec1.cost.modeled_depth
        rows.append([n, ratio, rec1.cost.modeled_depth, rec2.cost.modeled_depth])
    x = np.log(np.array([r[0] for r in rows], dtype=np.float64))
    y = np.log(np.array([r[1] for r in rows], dtype=np.float64))
    design = np.column_stack([np.ones_like(x), x])
    coef, r2 = _fit_r2(x, y, design)
    fit = {"model": "per-iteration multiplier ~ n^b", "b": coef[1],
           "r_squared": r2}
    return rows, fit


def _suite_circulant_depth(sizes, seed) -> tuple[list, dict]:
    rows = []
    for n in sizes:
        enc = circulant_encode(laplacian_circulant(n, 1))
        rows.append([n, enc.cost.modeled_depth])
    x = np.log2(np.array([r[0] for r in rows], dtype=np.float64))
    y = np.array([r[1] for r in rows], dtype=np.float64)
    coef, r2 = _fit_r2(x, y, np.column_stack([np.ones_like(x), x]))
    return rows, {"model": "a + b*log2(n)", "a": coef[0], "b": coef[1],
                  "r_squared": r2}


def _suite_projector_const(sizes, seed) -> tuple[list, dict]:
    rows = [[int(s), projector(0, 16).cost.modeled_depth] for s in sizes]
    y = np.array([r[1] for r in rows], dtype=np.float64)
    x = np.arange(len(rows), dtype=np.float64)
    coef, r2 = _fit_r2(x, y, np.column_stack([np.ones_like(x), x]))
    return rows, {"model": "a + b*index", "a": coef[0], "b": coef[1],
                  "r_squared": r2}


SUITES = {
    "dissect-logn": (_suite_dissect_logn, [2**k for k in range(4, 13)],
                     ["n", "modeled_depth", "base_uses", "queries",
                      "classical_cost"]),
    "newton-exponent": (_suite_newton_exponent, [4, 8, 16, 32],
                        ["n", "per_iteration_multiplier", "depth_step1",
                         "depth_step2"]),
    "circulant-depth": (_suite_circulant_depth, [2**k for k in range(2, 11)],
                        ["n", "modeled_depth"]),
    "projector-const": (_suite_projector_const, list(range(1, 9)),
                        ["index", "modeled_depth"]),
}


def _cmd_scaling(args, out: Path, seeds) -> dict:
    name = args.suite
    if name not in SUITES:
        raise CliError(f"unregistered suite {name!r}; known: {sorted(SUITES)}")
    fn, default_sizes, header = SUITES[name]
    sizes = default_sizes if not args.sizes else [int(s) for s in args.sizes]
    rows, fit = fn(sizes, int(seeds[0]))
    _write_csv(out / f"scaling_{name}.csv", header, rows)
    _write_json(out / f"scaling_{name}_fit.json", fit)
    return fit


COMMANDS = {
    "dissect": _cmd_dissect,
    "newton": _cmd_newton,
    "lm": _cmd_lm,
    "linear": _cmd_linear,
    "circulant": _cmd_circulant,
    "poisson": _cmd_poisson,
    "masses": _cmd_masses,
    "dynamics": _cmd_dynamics,
    "lyapunov": _cmd_lyapunov,
    "scaling": _cmd_scaling,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qroot",
        description="batch experiments over the block-encoding simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name != "scaling":
            p.add_argument("--config", required=True, help="JSON input path")
        else:
            p.add_argument("--suite", required=True)
            p.add_argument("--sizes", nargs="*", default=None)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--eps", type=float, default=None)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    seq = np.random.SeedSequence(args.seed)
    seeds = seq.generate_state(4)
    try:
        payload = COMMANDS[args.command](args, out, seeds)
    except CliError as exc:
        print(f"qroot: config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"qroot: {args.command}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1
    resolved = {"command": args.command, "seed": args.seed, "eps": args.eps}
    if getattr(args, "config", None):
        resolved["input"] = _load_json(args.config)
    if getattr(args, "suite", None):
        resolved["suite"] = args.suite
    _sidecar(out, resolved)
    log.info("%s finished: %s", args.command,
             json.dumps(payload, sort_keys=True)[:200])
    return 0


if __name__ == "__main__":
    sys.exit(main())
