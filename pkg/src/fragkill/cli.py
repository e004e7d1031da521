"""Command-line entry points.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 hard population cap exceeded, 4 statistical check failure.  Every
output file gets a sibling ``<name>.manifest.json`` recording the
resolved configuration; re-running from a manifest's config reproduces
the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    CapExceeded,
    ConfigError,
    FragkillError,
    InsufficientSurvivors,
    NumericError,
    StatCheckFailure,
)
from .io import manifest_path, write_csv, write_json
from .levy import make_model, phi, scale_function
from .martingales import Snapshot, additive_intrinsic, additive_killed, multiplicative
from .measure import measure_from_config
from .montecarlo import EXPERIMENTS, ExperimentConfig, _g_table_from_config
from .population import Caps, run_killed, run_unkilled
from .spine import simulate_spine

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CAP, EXIT_STAT = 0, 1, 2, 3, 4


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON in {path} at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}") from exc


def _write_manifest(out_path, command: str, config: dict, master_seed,
                    wall_clock: float, checks: dict, outputs: list) -> None:
    write_json(manifest_path(out_path), {
        "artifact_version": __version__,
        "command": command,
        "config": config,
        "master_seed": master_seed,
        "wall_clock_s": wall_clock,
        "checks": checks,
        "outputs": [str(o) for o in outputs],
    })


def cmd_compute(args) -> int:
    raw = _load_config(args.config)
    t0 = time.time()
    nu = measure_from_config(raw["measure"])
    model = make_model(float(raw["c"]), nu)
    payload = {
        "p_bar": model.p_bar,
        "c_p_bar": model.c_p_bar,
        "kappa": nu.kappa,
        "rho": nu.rho,
        "phi": [[float(p), phi(nu, float(p))] for p in raw.get("p_grid", [])],
        "scale": [],
        "measure": nu.to_config(),
        "c": model.c,
    }
    if "scale" in raw:
        sc = raw["scale"]
        table = scale_function(model, float(sc["p"]), float(sc["h"]),
                               float(sc["x_max"]))
        payload["scale"] = [[float(x), float(w)]
                            for x, w in zip(table.grid, table.values)]
        payload["scale_p"] = table.p
    write_json(args.out, payload)
    resolved = dict(raw, measure=nu.to_config())
    _write_manifest(args.out, "compute", resolved, None, time.time() - t0,
                    {}, [args.out])
    return EXIT_OK


def _trajectory_rows(traj, mart_cols):
    rows = []
    for cp in traj.checkpoints:
        row = [cp.t, cp.n_blocks, cp.log_lambda1, cp.total_mass,
               traj.extinct, traj.zeta]
        row.extend(cp.extras.get(name, float("nan")) for name in mart_cols)
        rows.append(row)
    return rows


def cmd_simulate(args) -> int:
    raw = _load_config(args.config)
    t0 = time.time()
    nu = measure_from_config(raw["measure"])
    model = make_model(float(raw["c"]), nu)
    seed = int(args.seed if args.seed is not None else raw.get("seed", 0))
    horizon = float(args.horizon if args.horizon is not None
                    else raw.get("horizon", 0.0))
    if horizon <= 0.0:
        raise ConfigError(f"horizon must be positive, got {horizon}")
    mode = "spine" if args.spine else raw.get("mode", "killed")
    checks: dict = {}

    if mode == "spine":
        rng = np.random.Generator(np.random.Philox(key=np.array(
            [seed & (2**64 - 1), 0], dtype=np.uint64)))
        path = simulate_spine(model, raw.get("p_tilt"), float(raw.get("x", 0.0)),
                              horizon, rng)
        rows = []
        drop = 0.0
        for t, dec in path.events:
            drop += dec
            rows.append([t, dec, path.x + model.c * t - drop])
        write_csv(args.out, ("t", "decrement", "position"), rows)
        checks = {"survived": path.survived}
        resolved = dict(raw, mode="spine", seed=seed, horizon=horizon,
                        measure=nu.to_config())
        _write_manifest(args.out, "simulate", resolved, seed,
                        time.time() - t0, checks, [args.out])
        return EXIT_OK

    if mode not in ("killed", "unkilled"):
        raise ConfigError(f"mode must be killed | unkilled | spine, got {mode!r}")

    caps = Caps(max_blocks=int(raw.get("max_blocks", 1_000_000)),
                hard=bool(raw.get("hard_caps", False)))
    checkpoints = [float(t) for t in raw.get("checkpoints", [horizon])]
    x = float(raw.get("x", 0.0))

    mart_cols: list[str] = []
    hook = None
    mp = raw.get("martingale_p")
    if mp is not None:
        mp = float(mp)
        mart_cols.append("m_intrinsic")
        scale = None
        g_fn = None
        if mode == "killed":
            from .levy import psi_prime_at_zero
            if psi_prime_at_zero(model, mp) > 0.0:
                scale = scale_function(model, mp, 1e-3,
                                       x + model.c * horizon + 2.0)
                mart_cols.append("m_killed")
            if raw.get("g_table"):
                cfg_g = ExperimentConfig.from_dict({
                    "measure": raw["measure"], "c": model.c, "master_seed": 0,
                    "g_table": raw["g_table"]})
                g_fn = _g_table_from_config(cfg_g)
                mart_cols.append("z_mult")

        def hook(t, lms, _scale=scale, _g=g_fn, _p=mp):
            snap = Snapshot(t=t, log_masses=lms)
            out = {"m_intrinsic": additive_intrinsic(snap, model, _p)}
            if _scale is not None:
                out["m_killed"] = additive_killed(snap, model, _p, _scale, x)
            if _g is not None:
                out["z_mult"] = multiplicative(snap, _g, model, x)
            return out

    if mode == "killed":
        traj = run_killed(model, x, horizon, checkpoints, caps, seed,
                          snapshot_eval=hook)
    else:
        traj = run_unkilled(model, horizon, float(raw.get("floor_eps", 0.0)),
                            checkpoints, caps, seed, snapshot_eval=hook)

    write_csv(args.out,
              ("t", "N", "log_lambda1", "total_mass", "extinct", "zeta",
               *mart_cols),
              _trajectory_rows(traj, mart_cols))
    checks = {"capped": traj.capped, "extinct": traj.extinct}
    resolved = dict(raw, mode=mode, seed=seed, horizon=horizon, x=x,
                    measure=nu.to_config())
    _write_manifest(args.out, "simulate", resolved, seed, time.time() - t0,
                    checks, [args.out])
    if traj.capped and caps.hard:
        raise CapExceeded(
            f"population exceeded {caps.max_blocks} blocks at t = "
            f"{traj.end_time:.6g}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.name not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {args.name!r}; valid names: "
            f"{', '.join(sorted(EXPERIMENTS))}")
    raw = _load_config(args.config)
    if args.seed is not None:
        raw["master_seed"] = int(args.seed)
    if args.trials is not None:
        raw["trials"] = int(args.trials)
    if args.horizon is not None:
        raw["horizon"] = float(args.horizon)
    raw["threads"] = args.threads
    cfg = ExperimentConfig.from_dict(raw)

    t0 = time.time()
    result = EXPERIMENTS[args.name](cfg)
    wall = time.time() - t0

    out = Path(args.out)
    write_csv(out, result.columns, result.rows)
    summary_file = out.with_suffix(".summary.json")
    write_json(summary_file, {
        "experiment": result.name,
        "checks": result.checks,
        "passed": result.passed,
        "summary": result.summary,
        "config": cfg.to_dict(),
    })
    _write_manifest(out, f"experiment {args.name}", cfg.to_dict(),
                    cfg.master_seed, wall, result.checks, [out, summary_file])
    if not result.passed and not args.soft_checks:
        raise StatCheckFailure(
            "failed checks: "
            + ", ".join(k for k, v in result.checks.items() if not v))
    return EXIT_OK


def cmd_report(args) -> int:
    from . import report
    made = report.render(args.experiment, args.csv, args.out_dir)
    for p in made:
        print(p)
    return EXIT_OK


def _thread_default() -> int:
    env = os.environ.get("FRAGKILL_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fragkill",
        description="Fragmentation chains killed at an exponential "
                    "space-time barrier: spectral quantities, simulation, "
                    "and statistical verification.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("compute", help="spectral quantities and scale table")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_compute)

    p = sub.add_parser("simulate", help="one killed/unkilled/spine trajectory")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--spine", action="store_true",
                   help="dump a single spine path (overrides config mode)")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("experiment", help="seeded statistical experiment")
    p.add_argument("name", help=", ".join(sorted(EXPERIMENTS)))
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--threads", type=int, default=_thread_default())
    p.add_argument("--soft-checks", action="store_true",
                   help="report failed statistical checks without exit 4")
    p.set_defaults(fn=cmd_experiment)

    p = sub.add_parser("report", help="render figures from experiment CSV")
    p.add_argument("--experiment", required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--out-dir", default=None,
                   help="defaults to the CSV's directory")
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CapExceeded as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (StatCheckFailure, InsufficientSurvivors) as exc:
        print(f"statistical failure: {exc}", file=sys.stderr)
        return EXIT_STAT
    except FragkillError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
