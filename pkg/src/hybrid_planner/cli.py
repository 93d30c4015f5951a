"""Command-line entry point: ``train``, ``eval``, ``plan`` and ``export``.

Exit codes: 0 success, 2 configuration error, 3 runtime or numerical failure.
Every command writes the resolved configuration (``config.json``) next to its
outputs.  The default output directory comes from ``HYBRID_PLANNER_OUT``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import config as cfgmod
from . import env as envmod
from . import masac, metrics, minsnap
from .nn import DivergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class CliError(RuntimeError):
    def __init__(self, message: str, code: int = EXIT_RUNTIME, detail: dict | None = None):
        super().__init__(message)
        self.code = code
        self.detail = detail or {}


def _resolve(args) -> cfgmod.RunConfig:
    base = cfgmod.load(args.config) if getattr(args, "config", None) else cfgmod.RunConfig()
    return cfgmod.with_overrides(
        base,
        seed=getattr(args, "seed", None),
        robots=getattr(args, "robots", None),
        episodes=getattr(args, "episodes", None),
        out_dir=getattr(args, "out", None),
        scenarios=getattr(args, "scenarios", None),
        dt_out=getattr(args, "dt_out", None),
    )


def _load_checkpoint(path) -> masac.Checkpoint:
    try:
        return masac.load_checkpoint(path)
    except masac.CheckpointError as exc:
        raise CliError(str(exc), EXIT_RUNTIME, {"error": "checkpoint", "document": exc.document}) from exc


# --------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    run = _resolve(args)
    out = Path(run.out_dir)
    run.echo(out)
    print("# effective configuration")
    print(run.to_json())

    def progress(ep, reward, alphas, elapsed):
        a = " ".join(f"{x:.5f}" for x in alphas)
        print(f"episode {ep:>7d}  reward {reward:+.4f}  alpha {a}  {elapsed:8.1f}s", flush=True)

    try:
        result = masac.train(run.masac, run.env, out_dir=out, progress=progress)
    except DivergenceError as exc:
        raise CliError(str(exc), EXIT_RUNTIME, {"error": "divergence", "snapshot": str(out / "diverged")}) from exc
    print(f"final checkpoint: {out / 'final'}  (episodes {result.checkpoint.train_episode})")
    return EXIT_OK


def cmd_eval(args) -> int:
    run = _resolve(args)
    ckpt = _load_checkpoint(args.checkpoint)
    if run.metrics.scenario_kind in envmod.FIXED_SIZES and envmod.FIXED_SIZES[run.metrics.scenario_kind] != ckpt.n_robots:
        raise CliError(f"checkpoint has {ckpt.n_robots} robots but scenario kind "
                       f"{run.metrics.scenario_kind!r} needs {envmod.FIXED_SIZES[run.metrics.scenario_kind]}",
                       EXIT_CONFIG)
    eval_seed = run.metrics.eval_seed if args.seed is None else args.seed
    report = metrics.run_benchmark(ckpt, run.metrics.n_scenarios, eval_seed, run.env, run.metrics.scenario_kind)
    out = Path(run.out_dir)
    run.echo(out)
    js, txt = report.save(out)
    print(report.table(), end="")
    print(f"wrote {js} and {txt}")
    return EXIT_OK


def _scenario(spec: str, n_robots: int, seed: int, env_cfg) -> envmod.Scenario:
    p = Path(spec)
    if p.is_file():
        try:
            sc = envmod.Scenario.load(p)
        except (OSError, ValueError, KeyError) as exc:
            raise CliError(f"cannot read scenario {p}: {exc}", EXIT_CONFIG) from exc
    elif spec in envmod.SCENARIO_KINDS:
        try:
            sc = envmod.make_scenario(spec, n_robots, seed, env_cfg)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_CONFIG) from exc
    else:
        raise CliError(f"scenario {spec!r} is neither a file nor one of {envmod.SCENARIO_KINDS}", EXIT_CONFIG)
    if sc.n_robots != n_robots:
        raise CliError(f"checkpoint has {n_robots} robots but the scenario has {sc.n_robots}", EXIT_CONFIG)
    return sc


def cmd_plan(args) -> int:
    run = _resolve(args)
    ckpt = _load_checkpoint(args.checkpoint)
    sc = _scenario(args.scenario, ckpt.n_robots, run.seed, run.env)
    ws = masac.infer_waypoints(ckpt, sc, deterministic=True, env_cfg=run.env)
    raw = {i: ws.robot_waypoints(i) for i in range(ws.n_robots)}
    outcome = minsnap.plan_all(raw, run.backend, args.backend)

    out = Path(run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run.echo(out)
    dt_out = run.metrics.dt_out
    (out / "trajectories.csv").write_text(minsnap.export_csv(outcome.trajectories, dt_out))
    minsnap.save_trajectories(outcome.trajectories, out / "trajectories.json",
                              extra={"backend": args.backend, "scenario": sc.to_dict()})
    (out / "waypoints.csv").write_text(_waypoints_csv(ws))

    reports = [metrics.polyline_report(raw, run.env.dt, dt_out, label="waypoints")]
    if outcome.trajectories:
        reports.append(metrics.trajectory_report(outcome.trajectories, dt_out, label=args.backend))
    failures = {
        str(r): {"axis": e.axis, "block": e.block, "status": e.status, "message": str(e)}
        for r, e in outcome.errors.items()
    }
    doc = {
        "backend": args.backend,
        "front_end": {"success": ws.success, "steps": ws.steps, "collision_events": ws.collision_events,
                      "pair_steps": ws.pair_steps, "reach_steps": ws.reach_steps.tolist()},
        "reports": [r.to_dict() for r in reports],
        "failures": failures,
    }
    (out / "report.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    table = metrics.trajectory_table(reports)
    (out / "report.txt").write_text(table)
    print(table, end="")
    if failures:
        for r, f in failures.items():
            print(f"robot {r}: back-end failed: {f['message']}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {out / 'trajectories.csv'}")
    return EXIT_OK


def _waypoints_csv(ws: masac.WaypointSet) -> str:
    lines = ["robot_id,step,x,y"]
    for i in range(ws.n_robots):
        for k, (x, y) in enumerate(ws.robot_waypoints(i)):
            lines.append(f"{i},{k},{float(x)!r},{float(y)!r}")
    return "\n".join(lines) + "\n"


def cmd_export(args) -> int:
    dt_out = args.dt_out if args.dt_out is not None else metrics.DEFAULT_DT_OUT
    if dt_out <= 0:
        raise CliError("--dt-out must be positive", EXIT_CONFIG)
    try:
        trajs = minsnap.load_trajectories(args.trajectories)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read trajectories {args.trajectories}: {exc}", EXIT_CONFIG) from exc
    out = Path(args.out if args.out is not None else cfgmod.default_out_dir())
    out.mkdir(parents=True, exist_ok=True)
    target = out / "trajectories.csv"
    target.write_text(minsnap.export_csv(trajs, dt_out))
    (out / "export_config.json").write_text(json.dumps(
        {"source": str(args.trajectories), "dt_out": dt_out}, indent=2, sort_keys=True) + "\n")
    print(f"wrote {target}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybrid-planner", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, robots=False, episodes=False, scenarios=False, dt=False):
        sp.add_argument("--config", help="run configuration JSON")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--out", help=f"output directory (default ${cfgmod.OUT_DIR_ENV} or ./runs)")
        if robots:
            sp.add_argument("--robots", type=int, help="number of robots")
        if episodes:
            sp.add_argument("--episodes", type=int, help="training episodes")
        if scenarios:
            sp.add_argument("--scenarios", type=int, help="evaluation scenarios")
        if dt:
            sp.add_argument("--dt-out", dest="dt_out", type=float, help="output sampling step (s)")

    t = sub.add_parser("train", help="train MASAC actors and critics")
    common(t, robots=True, episodes=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="benchmark a checkpoint on generated scenarios")
    e.add_argument("checkpoint")
    common(e, scenarios=True)
    e.set_defaults(func=cmd_eval)

    pl = sub.add_parser("plan", help="front-end inference plus back-end optimization")
    pl.add_argument("checkpoint")
    pl.add_argument("scenario", help="scenario JSON file or a layout name (swap3, cross6, bilateral12, random)")
    pl.add_argument("--backend", choices=("corridor", "classical", "cubic"), default="corridor")
    common(pl, dt=True)
    pl.set_defaults(func=cmd_plan)

    x = sub.add_parser("export", help="sample a coefficient JSON into the CSV schema")
    x.add_argument("trajectories")
    x.add_argument("--dt-out", dest="dt_out", type=float)
    x.add_argument("--out")
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except cfgmod.ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except CliError as exc:
        kind = "config" if exc.code == EXIT_CONFIG else "runtime"
        print(json.dumps({"error": kind, **exc.detail, "message": str(exc)}), file=sys.stderr)
        return exc.code
    except (minsnap.BackendError, DivergenceError, FloatingPointError) as exc:
        print(json.dumps({"error": "runtime", "message": str(exc)}), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
