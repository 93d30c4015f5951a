"""Trajectory-quality and episode metrics, plus a batch benchmark harness.

Continuous trajectories are discretized at ``dt_out`` before any metric is
taken.  Raw front-end waypoints form a fold line traversed at the simulator
step (0.1 s per waypoint); it is sampled at the same ``dt_out`` so both curves
are compared at matching temporal resolution.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import env as envmod
from . import masac
from .minsnap import PiecewiseTrajectory

DEFAULT_DT_OUT = 0.02

# Reference 3-robot figures, kept for side-by-side printing only.
REFERENCE_BENCHMARK = {
    "MASAC-auto": {"avg_total_distance": 2.969, "avg_total_time": 118.897, "avg_total_reward": -39.545,
                   "collision_events": 2, "pair_steps": 9274, "success_rate": 0.93592},
    "MATD3": {"avg_total_distance": 3.497, "avg_total_time": 124.013, "avg_total_reward": -28.804,
              "collision_events": 25, "pair_steps": 9673, "success_rate": 0.92301},
    "MAAC(CAS)": {"avg_total_distance": 3.209, "avg_total_time": 123.679, "avg_total_reward": -33.695,
                  "collision_events": 14, "pair_steps": 9647, "success_rate": 0.92051},
    "ORCA": {"avg_total_distance": 1.928, "avg_total_time": 114.538, "avg_total_reward": None,
             "collision_events": 10, "pair_steps": 9049, "success_rate": 0.73627},
}
REFERENCE_BACKEND = {
    "Original Wpts": {"cost_comfort": 1.053e-2, "cost_smoothness": -28.955, "cost_energy": 5.489, "distance_length": 2.081},
    "Cubic Spline": {"cost_comfort": 1.886e-5, "cost_smoothness": -51.558, "cost_energy": 14.298, "distance_length": 2.945},
    "Minimal Snap": {"cost_comfort": 1.501e-5, "cost_smoothness": -109.914, "cost_energy": 0.278, "distance_length": 2.945},
    "Corridor Snap": {"cost_comfort": 1.201e-6, "cost_smoothness": -107.171, "cost_energy": 0.018, "distance_length": 2.824},
}


def _as_points(points, min_len: int, what: str) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError(f"{what} must have shape (n, 2), got {p.shape}")
    if len(p) < min_len:
        raise ValueError(f"{what} needs at least {min_len} samples, got {len(p)}")
    return p


def cost_comfort(points) -> float:
    """Sum of squared second differences of consecutive samples."""
    p = _as_points(points, 3, "cost_comfort")
    dd = p[:-2] + p[2:] - 2.0 * p[1:-1]
    return float((dd**2).sum())


def cost_smoothness(points) -> float:
    """Negative sum of the turning cosines at every interior sample."""
    p = _as_points(points, 3, "cost_smoothness")
    chords = np.diff(p, axis=0)
    lengths = np.sqrt((chords**2).sum(1))
    if np.any(lengths == 0.0):
        raise ValueError("cost_smoothness: zero-length chord between consecutive points")
    cos = (chords[:-1] * chords[1:]).sum(1) / (lengths[:-1] * lengths[1:])
    return float(-cos.sum())


def cost_energy(accelerations) -> float:
    """Sum of squared changes between consecutive acceleration samples."""
    a = _as_points(accelerations, 2, "cost_energy")
    return float((np.diff(a, axis=0) ** 2).sum())


def path_length(points) -> float:
    p = _as_points(points, 2, "path_length")
    return float(np.sqrt((np.diff(p, axis=0) ** 2).sum(1)).sum())


def _drop_repeats(p: np.ndarray) -> np.ndarray:
    keep = np.ones(len(p), dtype=bool)
    keep[1:] = np.any(np.diff(p, axis=0) != 0.0, axis=1)
    return p[keep]


# --------------------------------------------------------------------------
# sampling


def trajectory_samples(traj: PiecewiseTrajectory, dt_out: float = DEFAULT_DT_OUT):
    """(positions, accelerations) at ``dt_out`` spacing, final time included."""
    ts = traj.sample_times(dt_out)
    if traj.times[-1] - ts[-1] > 1e-9:
        ts = np.append(ts, traj.times[-1])
    return traj.evaluate(ts, 0), traj.evaluate(ts, 2)


def polyline_samples(waypoints, step_dt: float = 0.1, dt_out: float = DEFAULT_DT_OUT):
    """Fold line through ``waypoints`` (one per ``step_dt``) resampled at ``dt_out``.

    Accelerations are central second differences of the resampled positions,
    so every corner shows up as the velocity jump divided by ``dt_out``.
    """
    w = _as_points(waypoints, 2, "waypoints")
    t_w = step_dt * np.arange(len(w))
    count = int(math.floor(t_w[-1] / dt_out + 1e-9)) + 1
    ts = dt_out * np.arange(count)
    if t_w[-1] - ts[-1] > 1e-9:
        ts = np.append(ts, t_w[-1])
    pos = np.column_stack([np.interp(ts, t_w, w[:, k]) for k in range(2)])
    if len(pos) < 3:
        return pos, np.zeros((2, 2))
    acc = np.zeros_like(pos)
    h0 = np.diff(ts)
    # non-uniform three-point formula (handles the shortened last interval)
    hl, hr = h0[:-1], h0[1:]
    acc[1:-1] = 2.0 * (
        pos[2:] * hl[:, None] - pos[1:-1] * (hl + hr)[:, None] + pos[:-2] * hr[:, None]
    ) / (hl * hr * (hl + hr))[:, None]
    acc[0], acc[-1] = acc[1], acc[-2]
    return pos, acc


# --------------------------------------------------------------------------
# reports


@dataclass
class TrajectoryReport:
    """Robot-averaged trajectory metrics with the per-robot breakdown."""

    cost_comfort: float
    cost_smoothness: float
    cost_energy: float
    distance_length: float
    per_robot: dict = field(default_factory=dict)
    label: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_robot"] = {str(k): v for k, v in self.per_robot.items()}
        return d


def _robot_metrics(pos: np.ndarray, acc: np.ndarray) -> dict:
    pts = _drop_repeats(pos)
    return {
        "cost_comfort": cost_comfort(pos),
        "cost_smoothness": cost_smoothness(pts) if len(pts) >= 3 else 0.0,
        "cost_energy": cost_energy(acc),
        "distance_length": path_length(pos),
        "samples": int(len(pos)),
    }


def _aggregate(per_robot: dict, label: str) -> TrajectoryReport:
    keys = ("cost_comfort", "cost_smoothness", "cost_energy", "distance_length")
    robots = sorted(per_robot)
    means = {k: float(np.mean([per_robot[r][k] for r in robots])) if robots else float("nan") for k in keys}
    return TrajectoryReport(per_robot={r: per_robot[r] for r in robots}, label=label, **means)


def trajectory_report(trajs: dict[int, PiecewiseTrajectory], dt_out: float = DEFAULT_DT_OUT,
                      label: str = "") -> TrajectoryReport:
    per = {}
    for robot, tr in sorted(trajs.items()):
        per[robot] = _robot_metrics(*trajectory_samples(tr, dt_out))
    if not label and trajs:
        label = next(iter(trajs.values())).method
    return _aggregate(per, label)


def polyline_report(waypoints: dict[int, np.ndarray], step_dt: float = 0.1,
                    dt_out: float = DEFAULT_DT_OUT, label: str = "waypoints") -> TrajectoryReport:
    per = {}
    for robot, w in sorted(waypoints.items()):
        per[robot] = _robot_metrics(*polyline_samples(w, step_dt, dt_out))
        # metrics at the waypoints' own resolution, for reference
        native = _as_points(w, 2, "waypoints")
        per[robot]["native"] = {
            "cost_comfort": cost_comfort(native) if len(native) >= 3 else 0.0,
            "distance_length": path_length(native),
            "samples": int(len(native)),
        }
    return _aggregate(per, label)


REPORT_COLUMNS = ("cost_comfort", "cost_smoothness", "cost_energy", "distance_length")
REPORT_HEADERS = ("cost_comfort", "cost_smooth", "cost_energy", "L_distance")


def trajectory_table(reports: list[TrajectoryReport]) -> str:
    """Aligned plain-text table, one row per report."""
    name_w = max([len("Methods")] + [len(r.label) for r in reports])
    head = f"{'Methods':<{name_w}}  " + "  ".join(f"{h:>12}" for h in REPORT_HEADERS)
    lines = [head, "-" * len(head)]
    for r in reports:
        vals = [getattr(r, c) for c in REPORT_COLUMNS]
        lines.append(f"{r.label:<{name_w}}  " + "  ".join(f"{v:>12.4e}" for v in vals))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# benchmark


@dataclass
class BenchmarkReport:
    """Episode statistics over a scenario stream; aggregates are None when empty."""

    n_scenarios: int
    seed: int
    success_rate: float | None
    avg_total_distance: float | None  # per-robot mean path length, averaged over scenarios
    avg_total_distance_robot_sum: float | None
    avg_total_time_robot_sum: float | None  # steps summed over robots
    avg_total_time_per_robot: float | None
    avg_total_reward: float | None  # returns summed over robots
    collision_events: int = 0
    pair_steps: int = 0
    failures: list = field(default_factory=list)
    per_scenario: list = field(default_factory=list)

    def __post_init__(self):
        if self.success_rate is not None and not 0.0 <= self.success_rate <= 1.0:
            raise ValueError("success_rate outside [0, 1]")
        if self.collision_events > self.pair_steps:
            raise ValueError("more collision events than pair-steps")

    @property
    def collisions_label(self) -> str:
        return f"{self.collision_events}({self.pair_steps})"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def table(self, reference: str | None = "MASAC-auto") -> str:
        cols = ("Avg Total Distance", "Avg Total Time", "Avg Total Reward", "Collision Numbers", "Success Rate")

        def fmt(v, pct=False):
            if v is None:
                return "-"
            return f"{100 * v:.3f}%" if pct else f"{v:.3f}"

        rows = [("this run", [fmt(self.avg_total_distance), fmt(self.avg_total_time_robot_sum),
                              fmt(self.avg_total_reward), self.collisions_label, fmt(self.success_rate, True)])]
        if reference is not None:
            ref = REFERENCE_BENCHMARK[reference]
            rows.append((f"{reference} (reference, 3 robots)", [
                fmt(ref["avg_total_distance"]), fmt(ref["avg_total_time"]), fmt(ref["avg_total_reward"]),
                f"{ref['collision_events']}({ref['pair_steps']})", fmt(ref["success_rate"], True)]))
        name_w = max(len("Motion Planner"), *(len(r[0]) for r in rows))
        widths = [max(len(c), *(len(r[1][k]) for r in rows)) for k, c in enumerate(cols)]
        head = f"{'Motion Planner':<{name_w}}  " + "  ".join(f"{c:>{w}}" for c, w in zip(cols, widths))
        out = [head, "-" * len(head)]
        for name, vals in rows:
            out.append(f"{name:<{name_w}}  " + "  ".join(f"{v:>{w}}" for v, w in zip(vals, widths)))
        out.append(f"scenarios: {self.n_scenarios}  seed: {self.seed}  "
                   f"per-robot mean time: {fmt(self.avg_total_time_per_robot)}")
        return "\n".join(out) + "\n"

    def save(self, directory, stem: str = "benchmark") -> tuple[Path, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        js, txt = d / f"{stem}.json", d / f"{stem}.txt"
        js.write_text(self.to_json() + "\n")
        txt.write_text(self.table())
        return js, txt


def scenario_seeds(seed: int, n: int) -> list[int]:
    """Deterministic, well-separated scenario seeds for an evaluation stream."""
    if n <= 0:
        return []
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n, dtype=np.uint32)]


def run_benchmark(checkpoint: masac.Checkpoint, n_scenarios: int, seed: int,
                  env_cfg: envmod.EnvConfig = envmod.DEFAULT_ENV, scenario_kind: str = "random",
                  seeds: list[int] | None = None) -> BenchmarkReport:
    n = len(checkpoint.actors)
    if seeds is None:
        seeds = scenario_seeds(seed, n_scenarios)
    rows, failures = [], []
    for k, s in enumerate(seeds[:n_scenarios]):
        try:
            sc = envmod.make_scenario(scenario_kind, n, s, env_cfg)
            ws = masac.infer_waypoints(checkpoint, sc, deterministic=True, env_cfg=env_cfg)
        except Exception as exc:  # recorded, batch continues
            failures.append({"index": k, "seed": s, "error": f"{type(exc).__name__}: {exc}"})
            continue
        dists = [path_length(ws.robot_waypoints(i)) if ws.robot_steps(i) > 0 else 0.0 for i in range(n)]
        steps = [ws.robot_steps(i) for i in range(n)]
        rows.append({
            "index": k, "seed": s, "success": bool(ws.success),
            "distance_per_robot": float(np.mean(dists)), "distance_sum": float(np.sum(dists)),
            "time_sum": int(np.sum(steps)), "time_per_robot": float(np.mean(steps)),
            "reward_sum": float(ws.rewards.sum()),
            "collision_events": int(ws.collision_events), "pair_steps": int(ws.pair_steps),
        })
    if not rows:
        return BenchmarkReport(n_scenarios, seed, None, None, None, None, None, None,
                               0, 0, failures, rows)

    def mean(key):
        return float(math.fsum(r[key] for r in rows) / len(rows))

    return BenchmarkReport(
        n_scenarios=n_scenarios,
        seed=seed,
        success_rate=sum(r["success"] for r in rows) / len(rows),
        avg_total_distance=mean("distance_per_robot"),
        avg_total_distance_robot_sum=mean("distance_sum"),
        avg_total_time_robot_sum=mean("time_sum"),
        avg_total_time_per_robot=mean("time_per_robot"),
        avg_total_reward=mean("reward_sum"),
        collision_events=sum(r["collision_events"] for r in rows),
        pair_steps=sum(r["pair_steps"] for r in rows),
        failures=failures,
        per_scenario=rows,
    )
