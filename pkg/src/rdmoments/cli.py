"""Batch pipeline: simulate | moments | assemble | solve | compare | validate | report.

Every command reads one JSON config (defaults built in, flags override),
writes its artifacts atomically under the output directory, and is
idempotent for a fixed config and seed.  Exit codes: 0 success, 1 contract
failure, 2 invalid config, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, atomic_write
from .liouville import DiracAtFunction, constraints_manifest
from .moments import MomentSequence, enumerate_monomials, evaluate_template, moment_matrix
from .oracle import (
    contraction_check,
    dissipativity_check,
    fd_solve,
    invariance_check,
    pushforward_moments,
    random_inset_states,
    reference_logistic_moments,
)
from .relaxation import build_relaxation, compare_moments, solve
from .sdpa import export_sdpa
from .spectral import GridFunction, drift_polynomials
from .liouville import assemble_system, initial_moments

EXIT_OK = 0
EXIT_CONTRACT = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _stage_dir(cfg: RunConfig, stage: str) -> str:
    d = os.path.join(cfg.out_dir, stage)
    os.makedirs(d, exist_ok=True)
    return d


def _write_config_copy(cfg: RunConfig) -> None:
    atomic_write(os.path.join(cfg.out_dir, "config.json"), cfg.to_json() + "\n")


def _json_dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def cmd_simulate(cfg: RunConfig) -> int:
    """Propagate the measure's mean state (or the Dirac state) and dump the
    trajectory as .npy + JSON header."""
    _write_config_copy(cfg)
    o = cfg.raw["oracle"]
    measure = cfg.measure()
    if isinstance(measure, DiracAtFunction):
        y0 = measure.y0
    else:
        y0 = GridFunction(np.zeros(o["N"]))
    traj = fd_solve(y0, cfg.eps, o["dt"])
    d = _stage_dir(cfg, "simulate")
    import io as _io

    buf = _io.BytesIO()
    np.save(buf, traj.states)
    atomic_write(os.path.join(d, "trajectory.npy"), buf.getvalue())
    atomic_write(
        os.path.join(d, "trajectory.json"),
        _json_dump(
            {
                "N": traj.N,
                "M": len(traj.times) - 1,
                "dt": traj.dt,
                "scheme": traj.method,
                "eps": cfg.eps,
            }
        ),
    )
    lo, hi = float(traj.states.min()), float(traj.states.max())
    print(f"simulate: N={traj.N} steps={len(traj.times) - 1} range=[{lo:.6g}, {hi:.6g}]")
    return EXIT_OK


def cmd_moments(cfg: RunConfig) -> int:
    """Initial moments (closed form) + empirical push-forward moments."""
    _write_config_copy(cfg)
    o = cfg.raw["oracle"]
    d = _stage_dir(cfg, "moments")
    K, r, h = cfg.K, cfg.r, cfg.h
    ini = initial_moments(cfg.measure(), enumerate_monomials(K, r, h), K)
    atomic_write(os.path.join(d, "initial.json"), ini.to_json() + "\n")
    import math

    s = math.ceil((r + 1) / 2)
    emp = pushforward_moments(
        cfg.measure(),
        cfg.eps,
        o["n_samples"],
        K,
        2 * s,
        h,
        N=o["N"],
        dt=o["dt"],
        seed=cfg.seed,
    )
    atomic_write(os.path.join(d, "occupation.csv"), emp.occ.to_csv())
    atomic_write(os.path.join(d, "occupation.json"), emp.occ.to_json() + "\n")
    atomic_write(os.path.join(d, "terminal.csv"), emp.term.to_csv())
    atomic_write(os.path.join(d, "terminal.json"), emp.term.to_json() + "\n")
    atomic_write(
        os.path.join(d, "meta.json"),
        _json_dump(
            {
                "n_samples": emp.n_samples,
                "seed": cfg.seed,
                "quadrature": emp.quadrature,
                "occ_mass": emp.occ.mass(),
                "term_mass": emp.term.mass(),
            }
        ),
    )
    print(f"moments: {emp.n_samples} samples, {len(emp.occ.data)} occupation entries")
    return EXIT_OK


def cmd_assemble(cfg: RunConfig, sdpa: bool = True) -> int:
    """Constraint manifest + problem dimensions + optional SDPA export."""
    _write_config_copy(cfg)
    d = _stage_dir(cfg, "assemble")
    problem = build_relaxation(
        cfg.r, cfg.h, cfg.K, cfg.eps, cfg.measure(), cfg.radius, cfg.relaxation_options()
    )
    manifest = constraints_manifest(problem.constraints, cfg.r, cfg.h, cfg.K)
    atomic_write(os.path.join(d, "constraints.json"), _json_dump(manifest))
    atomic_write(os.path.join(d, "problem.json"), _json_dump(problem.manifest()))
    if sdpa:
        export_sdpa(problem, os.path.join(d, "problem.dat-s"))
    print(
        f"assemble: {problem.n} variables, {problem.A.shape[0]} equalities, "
        f"moment matrix {problem.blocks[0].size}"
    )
    return EXIT_OK


def cmd_solve(cfg: RunConfig) -> int:
    """Solve the relaxation; dump pseudo-moments + SolveReport."""
    _write_config_copy(cfg)
    d = _stage_dir(cfg, "solve")
    problem = build_relaxation(
        cfg.r, cfg.h, cfg.K, cfg.eps, cfg.measure(), cfg.radius, cfg.relaxation_options()
    )
    occ, term, rep = solve(problem)
    atomic_write(os.path.join(d, "occupation.csv"), occ.to_csv())
    atomic_write(os.path.join(d, "occupation.json"), occ.to_json() + "\n")
    atomic_write(os.path.join(d, "terminal.csv"), term.to_csv())
    atomic_write(os.path.join(d, "terminal.json"), term.to_json() + "\n")
    atomic_write(os.path.join(d, "report.json"), rep.to_json() + "\n")
    print(
        f"solve: {rep.status}, objective {rep.objective:.3e}, "
        f"max residual {rep.max_abs_residual:.3e}, {rep.iterations} iterations"
    )
    if rep.status not in ("solved",):
        return EXIT_SOLVER
    return EXIT_OK


def cmd_compare(cfg: RunConfig, computed: str, reference: str) -> int:
    """Match statistics between two moment files (JSON)."""
    _write_config_copy(cfg)
    with open(computed) as fh:
        a = MomentSequence.from_json(fh.read())
    with open(reference) as fh:
        b = MomentSequence.from_json(fh.read())
    cc = cfg.raw["compare"]
    stats = compare_moments(a, b, cc["rel_tol"], cc["floor"])
    d = _stage_dir(cfg, "compare")
    atomic_write(os.path.join(d, "match.json"), _json_dump(stats.to_json_obj()))
    print(
        f"compare: {100 * stats.fraction:.1f}% of {stats.n_shared} shared entries "
        f"within rel_tol={cc['rel_tol']:g} (floor {cc['floor']:g})"
    )
    return EXIT_OK


def _validate_blocks(cfg: RunConfig) -> dict:
    o = cfg.raw["oracle"]
    N, dt = o["N"], o["dt"]
    checks: dict[str, dict] = {}

    # invariance: random in-set states under eps = 0.1
    states = random_inset_states(50, N, seed=cfg.seed)
    lo, hi = 1.0, 0.0
    for y in states:
        a, b = invariance_check(fd_solve(y, 0.1, dt))
        lo, hi = min(lo, a), max(hi, b)
    checks["invariance"] = {
        "pass": lo >= -1e-8 and hi <= 1 + 1e-8,
        "min": lo,
        "max": hi,
    }

    # dissipativity: heat norm monotone + single-mode decay
    ver = dissipativity_check(GridFunction.from_callable(lambda x: np.cos(2 * np.pi * x), N))
    t = np.linspace(0, 1, len(ver.norms))
    decay_err = float(np.abs(ver.norms - np.sqrt(0.5) * np.exp(-4 * np.pi**2 * t)).max())
    rnd = random_inset_states(3, N, seed=cfg.seed + 1)
    mono_rand = all(dissipativity_check(y, dt).monotone for y in rnd)
    checks["dissipativity"] = {
        "pass": ver.monotone and mono_rand and decay_err <= 1e-4,
        "max_step_increase": ver.max_step_increase,
        "mode_decay_error": decay_err,
    }

    # contraction over random pairs and eps in {0, 0.1, 1}
    worst = 0.0
    pairs = random_inset_states(20, N, seed=cfg.seed + 2)
    for e in (0.0, 0.1, 1.0):
        for i in range(0, len(pairs) - 1, 2):
            worst = max(worst, contraction_check(pairs[i], pairs[i + 1], e, dt=dt))
    checks["contraction"] = {"pass": worst <= 1 + 1e-4, "max_ratio": worst}

    # equilibrium exactness at r=3 (all occupation moments equality-reached)
    eq = {}
    ok = True
    for y0v in (0.0, 1.0):
        prob = build_relaxation(
            3, 0, 0, 0.1, DiracAtFunction(GridFunction(np.full(N, y0v))), None,
            cfg.relaxation_options(),
        )
        occ, term, rep = solve(prob)
        moment_err = max(
            abs(v - (y0v ** (a.spatial[0][1]) if a.spatial else 1.0) / (a.a0 + 1))
            for a, v in occ.data.items()
        )
        eq[f"y{y0v:g}"] = {
            "objective": rep.objective,
            "moment_error": moment_err,
            "status": rep.status,
        }
        ok = ok and rep.objective <= 1e-8 and moment_err <= 1e-6 and rep.status == "solved"
    checks["equilibrium"] = {"pass": ok, **eq}

    # no-gap concentration at the logistic Dirac
    prob = build_relaxation(
        4, 0, 0, cfg.eps if cfg.eps > 0 else 0.1,
        DiracAtFunction(GridFunction(np.full(N, 0.5))), None, cfg.relaxation_options(),
    )
    occ, term, rep = solve(prob)
    occ_ref, term_ref = reference_logistic_moments(0.5, cfg.eps if cfg.eps > 0 else 0.1, occ.max_degree)
    so = compare_moments(occ, occ_ref, 1e-3)
    st = compare_moments(term, term_ref, 1e-3)
    checks["nogap"] = {
        "pass": so.fraction >= 0.95 and st.fraction >= 0.95 and rep.status == "solved",
        "occupation_match": so.fraction,
        "terminal_match": st.fraction,
    }
    return checks


def cmd_validate(cfg: RunConfig) -> int:
    """Full property suite; emits pass/fail JSON, nonzero exit on failure."""
    _write_config_copy(cfg)
    checks = _validate_blocks(cfg)
    ok = all(c["pass"] for c in checks.values())
    d = _stage_dir(cfg, "validate")
    atomic_write(os.path.join(d, "validate.json"), _json_dump({"pass": ok, "checks": checks}))
    for name, c in sorted(checks.items()):
        print(f"validate: {name}: {'PASS' if c['pass'] else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CONTRACT


def cmd_report(cfg: RunConfig) -> int:
    """Aggregate whatever artifacts exist under the output directory."""
    out = {}
    for stage in ("simulate", "moments", "assemble", "solve", "compare", "validate"):
        sd = os.path.join(cfg.out_dir, stage)
        if not os.path.isdir(sd):
            continue
        out[stage] = sorted(os.listdir(sd))
        for name in ("report.json", "match.json", "validate.json", "meta.json"):
            p = os.path.join(sd, name)
            if os.path.exists(p):
                with open(p) as fh:
                    out[f"{stage}/{name}"] = json.load(fh)
    atomic_write(os.path.join(cfg.out_dir, "report.json"), _json_dump(out))
    print(f"report: {len(out)} sections -> {os.path.join(cfg.out_dir, 'report.json')}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rdmoments",
        description="Moment relaxations of the periodic reaction-diffusion flow",
    )
    ap.add_argument("--version", action="version", version=f"rdmoments {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON config path")
    common.add_argument("--seed", type=int, default=None, help="override oracle.seed")
    common.add_argument("--out", default=None, help="override io.out_dir")
    common.add_argument("--backend", default=None, help="override solver.backend")
    for name in ("simulate", "moments", "assemble", "solve", "validate", "report"):
        sub.add_parser(name, parents=[common])
    cp = sub.add_parser("compare", parents=[common])
    cp.add_argument("computed", help="computed MomentSequence JSON")
    cp.add_argument("reference", help="reference MomentSequence JSON")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    overrides: dict = {}
    if args.seed is not None:
        overrides.setdefault("oracle", {})["seed"] = args.seed
    if args.out is not None:
        overrides.setdefault("io", {})["out_dir"] = args.out
    if args.backend is not None:
        overrides.setdefault("solver", {})["backend"] = args.backend
    try:
        cfg = RunConfig.load(args.config, overrides)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "moments":
            return cmd_moments(cfg)
        if args.command == "assemble":
            return cmd_assemble(cfg)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "compare":
            return cmd_compare(cfg, args.computed, args.reference)
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "report":
            return cmd_report(cfg)
    except (ValueError, RuntimeError) as exc:
        print(f"contract failure: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
