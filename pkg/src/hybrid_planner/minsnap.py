"""Minimum-snap trajectory back-end with rectangular safety-zone corridors.

Each robot's discrete waypoints become K polynomial segments per axis.  Segment
``i`` is a degree-n polynomial in *local* time ``tau = t - T_i`` with
coefficients in ascending powers.  The x and y axes are solved as two
independent QPs: the snap cost and the axis-aligned zones are both separable.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import linprog

from ._accel import njit, pick
from .qp import QpProblem, QpSolution, solve_qp

AXES = ("x", "y")


@dataclass(frozen=True)
class BackendConfig:
    order: int = 5
    zone_half_length: float = 0.05  # x half-size of the safety zone (m)
    zone_half_width: float = 0.05  # y half-size (m)
    sample_interval: float = 0.05  # corridor / bound sampling step (s)
    v_min: float = -1.0
    v_max: float = 1.0
    a_min: float = -1.0
    a_max: float = 1.0
    qp_tol: float = 1e-8
    qp_max_iter: int = 1000
    v_nom: float = 0.25
    t_min: float = 0.2
    keep_every: int = 3  # front-end waypoint downsampling stride
    end_segment_factor: float = 2.0  # stretch of the first/last segment for the ramp from/to rest

    def __post_init__(self):
        if not 4 <= self.order <= 7:
            raise ValueError("order must lie in 4..7")
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be positive")
        if self.zone_half_length <= 0 or self.zone_half_width <= 0:
            raise ValueError("zone sizes must be positive")
        if self.v_nom <= 0 or self.t_min < 0 or self.keep_every < 1:
            raise ValueError("v_nom must be positive, t_min non-negative, keep_every >= 1")
        if self.end_segment_factor < 1.0:
            raise ValueError("end_segment_factor must be >= 1")
        if self.v_min >= self.v_max or self.a_min >= self.a_max:
            raise ValueError("empty velocity or acceleration range")

    def zone(self, axis: int) -> float:
        return self.zone_half_length if axis == 0 else self.zone_half_width

    def to_dict(self) -> dict:
        return asdict(self)


class BackendError(RuntimeError):
    """QP failure for one robot axis; carries enough context to report it."""

    def __init__(self, message: str, axis: str | None = None, block: str | None = None,
                 status: str | None = None):
        super().__init__(message)
        self.axis = axis
        self.block = block
        self.status = status


# --------------------------------------------------------------------------
# polynomial basis


def basis_row(n: int, t: float, d: int) -> np.ndarray:
    """Row r with ``r @ p == f^(d)(t)`` for ascending coefficients ``p`` of length n+1."""
    row = np.zeros(n + 1)
    if d > n:
        return row
    for k in range(d, n + 1):
        row[k] = math.perm(k, d) * t ** (k - d)
    return row


def snap_hessian(n: int, t_a: float, t_b: float) -> np.ndarray:
    """Matrix Q with ``p @ Q @ p == integral_{t_a}^{t_b} (f''''(t))^2 dt``."""
    if n < 4:
        raise ValueError("snap needs degree >= 4")
    if not t_b > t_a:
        raise ValueError(f"degenerate interval [{t_a}, {t_b}]")
    Q = np.zeros((n + 1, n + 1))
    for r in range(4, n + 1):
        for c in range(4, n + 1):
            e = r + c - 7
            Q[r, c] = (
                r * (r - 1) * (r - 2) * (r - 3) * c * (c - 1) * (c - 2) * (c - 3) / e
                * (t_b**e - t_a**e)
            )
    return Q


# --------------------------------------------------------------------------
# waypoints and timing


@dataclass
class WaypointPath:
    points: np.ndarray  # (K+1, 2)
    timesteps: np.ndarray  # (K+1,) source front-end step of each point

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        self.timesteps = np.asarray(self.timesteps, dtype=np.int64).ravel()
        if self.points.shape[0] != self.timesteps.size:
            raise ValueError("points and timesteps differ in length")
        if self.points.shape[0] < 2:
            raise ValueError("a path needs at least two distinct waypoints")

    @property
    def n_segments(self) -> int:
        return self.points.shape[0] - 1


def merge_duplicates(points, timesteps=None, tol: float = 1e-9):
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if timesteps is None:
        timesteps = np.arange(len(points))
    keep = [0]
    for k in range(1, len(points)):
        if np.sqrt(((points[k] - points[keep[-1]]) ** 2).sum()) > tol:
            keep.append(k)
    return points[keep], np.asarray(timesteps)[keep]


def make_path(points, timesteps=None, keep_every: int = 1) -> WaypointPath:
    """Merge consecutive duplicates, then keep every ``keep_every``-th point plus the last."""
    pts, ts = merge_duplicates(points, timesteps)
    if len(pts) < 2:
        raise ValueError("path collapses to a single point after merging duplicates")
    if keep_every > 1:
        idx = list(range(0, len(pts), keep_every))
        if idx[-1] != len(pts) - 1:
            last_gap = len(pts) - 1 - idx[-1]
            # avoid a sliver segment at the end
            if last_gap < keep_every / 2 and len(idx) > 1:
                idx[-1] = len(pts) - 1
            else:
                idx.append(len(pts) - 1)
        pts, ts = pts[idx], ts[idx]
    return WaypointPath(pts, ts)


def allocate_times(waypoints, v_nom: float, t_min: float) -> np.ndarray:
    """Distance-proportional segment durations ``max(|w_{i+1} - w_i| / v_nom, t_min)``."""
    w = np.asarray(waypoints, dtype=np.float64).reshape(-1, 2)
    if len(w) < 2:
        raise ValueError("need at least two waypoints")
    if v_nom <= 0:
        raise ValueError("v_nom must be positive")
    seg = np.sqrt((np.diff(w, axis=0) ** 2).sum(1))
    if np.any(seg <= 0.0):
        raise ValueError("zero-length segment; merge duplicate waypoints first")
    return np.maximum(seg / v_nom, t_min)


def plan_times(waypoints, config: "BackendConfig") -> np.ndarray:
    """Distance-proportional durations with the first and last segments stretched.

    A robot leaving or reaching rest covers its end segment at roughly half the
    cruise speed, so those two durations are multiplied by ``end_segment_factor``.
    """
    dur = allocate_times(waypoints, config.v_nom, config.t_min)
    dur[0] *= config.end_segment_factor
    if len(dur) > 1:
        dur[-1] *= config.end_segment_factor
    return dur


def spread_times(fine: WaypointPath, coarse: WaypointPath, coarse_durations) -> np.ndarray:
    """Durations for ``fine`` that keep the knot times of ``coarse``.

    Points between two coarse knots share that segment's duration in proportion
    to chord length.  Both paths must come from the same front-end waypoints.
    """
    knots = np.searchsorted(fine.timesteps, coarse.timesteps)
    if np.any(knots >= fine.timesteps.size) or np.any(fine.timesteps[knots] != coarse.timesteps):
        raise ValueError("coarse path is not a subset of the fine path")
    chords = np.sqrt((np.diff(fine.points, axis=0) ** 2).sum(1))
    out = np.empty(fine.n_segments)
    for j, T in enumerate(np.asarray(coarse_durations, dtype=np.float64)):
        c = chords[knots[j]:knots[j + 1]]
        out[knots[j]:knots[j + 1]] = T * c / c.sum()
    return out


def boundaries(durations) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(durations)])


# --------------------------------------------------------------------------
# piecewise trajectories


@njit
def _eval_loop(coeffs, times, t, d):
    k_seg, ncoef = coeffs.shape
    out = np.empty(t.size)
    for s in range(t.size):
        lo = 0
        hi = k_seg
        # last segment start <= t, right-closed at the final time
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if times[mid] <= t[s]:
                lo = mid
            else:
                hi = mid
        tau = t[s] - times[lo]
        acc = 0.0
        for k in range(ncoef - 1, d - 1, -1):
            f = 1.0
            for j in range(d):
                f *= k - j
            acc = acc * tau + f * coeffs[lo, k]
        out[s] = acc
    return out


def _eval_vec(coeffs, times, t, d):
    k_seg, ncoef = coeffs.shape
    seg = np.clip(np.searchsorted(times, t, side="right") - 1, 0, k_seg - 1)
    tau = t - times[seg]
    out = np.zeros(t.size)
    for k in range(ncoef - 1, d - 1, -1):
        f = 1.0
        for j in range(d):
            f *= k - j
        out = out * tau + f * coeffs[seg, k]
    return out


_eval_kernel = pick(_eval_loop, _eval_vec)


@dataclass
class PiecewiseTrajectory:
    times: np.ndarray  # (K+1,) segment boundaries, times[0] = T_0
    coeffs: np.ndarray  # (2, K, n+1) ascending local-time coefficients per axis
    snap_cost: float = float("nan")
    method: str = "corridor"
    meta: dict = field(default_factory=dict)

    @property
    def order(self) -> int:
        return self.coeffs.shape[2] - 1

    @property
    def n_segments(self) -> int:
        return self.coeffs.shape[1]

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def evaluate(self, t, d: int = 0) -> np.ndarray:
        """Values at times ``t`` (scalar or array) -> shape (..., 2)."""
        t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if np.any(t_arr < self.times[0] - 1e-12) or np.any(t_arr > self.times[-1] + 1e-12):
            raise ValueError(f"time outside [{self.times[0]}, {self.times[-1]}]")
        t_arr = np.clip(t_arr, self.times[0], self.times[-1])
        out = np.empty(t_arr.shape + (2,))
        flat = t_arr.ravel()
        for ax in range(2):
            if d > self.order:
                out[..., ax] = 0.0
            else:
                out[..., ax] = _eval_kernel(
                    np.ascontiguousarray(self.coeffs[ax]), self.times, flat, d
                ).reshape(t_arr.shape)
        return out[0] if np.ndim(t) == 0 else out

    def evaluate_segment(self, seg: int, tau, d: int = 0) -> np.ndarray:
        """Evaluate segment ``seg`` at local time ``tau`` (may sit on either boundary)."""
        row = basis_row(self.order, float(tau), d)
        return self.coeffs[:, seg, :] @ row

    def sample_times(self, dt_out: float) -> np.ndarray:
        if dt_out <= 0:
            raise ValueError("dt_out must be positive")
        count = int(math.floor(self.duration / dt_out + 1e-9)) + 1
        return self.times[0] + dt_out * np.arange(count)

    def to_segments_doc(self, robot: int) -> list[dict]:
        docs = []
        for ax, name in enumerate(AXES):
            docs.append({
                "robot": robot,
                "axis": name,
                "segments": [
                    {"t0": float(self.times[k]), "t1": float(self.times[k + 1]),
                     "coeffs": self.coeffs[ax, k].tolist()}
                    for k in range(self.n_segments)
                ],
            })
        return docs

    @classmethod
    def from_segments_doc(cls, docs: list[dict]) -> "PiecewiseTrajectory":
        by_axis = {d["axis"]: d["segments"] for d in docs}
        if set(by_axis) != set(AXES):
            raise ValueError("trajectory document needs exactly one x and one y entry")
        segs_x, segs_y = by_axis["x"], by_axis["y"]
        if len(segs_x) != len(segs_y) or not segs_x:
            raise ValueError("x and y segment lists differ")
        times = np.array([s["t0"] for s in segs_x] + [segs_x[-1]["t1"]], dtype=np.float64)
        coeffs = np.array([[s["coeffs"] for s in segs_x], [s["coeffs"] for s in segs_y]], dtype=np.float64)
        return cls(times, coeffs)


def eval_trajectory(traj: PiecewiseTrajectory, t: float, d: int = 0) -> np.ndarray:
    return traj.evaluate(t, d)


# --------------------------------------------------------------------------
# QP assembly


@dataclass
class AxisQp:
    problem: QpProblem
    blocks_eq: list[tuple[str, int, int]]  # (name, first row, end row)
    blocks_in: list[tuple[str, int, int]]
    sample_segments: np.ndarray  # segment of every corridor sample
    sample_taus: np.ndarray  # local time of every corridor sample
    references: np.ndarray  # straight-line reference at every corridor sample

    def block_of(self, kind: str, row: int) -> str:
        for name, a, b in (self.blocks_eq if kind == "eq" else self.blocks_in):
            if a <= row < b:
                return name
        return "unknown"


def _sample_points(durations, r: float, interior_only: bool = True):
    """(segment, tau) pairs at interval r inside segments, plus the joints between them.

    Corridor rows use only the interior segments (the first and last segments
    are left free); kinodynamic bound rows use every segment.
    """
    segs, taus = [], []
    k_seg = len(durations)
    first, last = (1, k_seg - 1) if interior_only else (0, k_seg)
    for i in range(first, last):
        dur = durations[i]
        count = int(math.floor(dur / r - 1e-9))
        for k in range(1, count + 1):
            segs.append(i)
            taus.append(k * r)
        if i + 1 < last:
            segs.append(i)
            taus.append(dur)
    return np.asarray(segs, dtype=np.int64), np.asarray(taus, dtype=np.float64)


def build_qp(
    axis_waypoints,
    durations,
    boundary_states,
    config: BackendConfig = BackendConfig(),
    axis: int = 0,
    method: str = "corridor",
    zone: float | None = None,
) -> AxisQp:
    """Assemble the per-axis QP.

    ``boundary_states`` is ``((p0, v0, a0), (pT, vT, aT))``.  ``method`` is
    "corridor" (interior waypoints replaced by sampled safety-zone rows plus
    velocity/acceleration bounds) or "classical" (every waypoint interpolated,
    equality constraints only).
    """
    w = np.asarray(axis_waypoints, dtype=np.float64).ravel()
    dur = np.asarray(durations, dtype=np.float64).ravel()
    k_seg = dur.size
    if w.size != k_seg + 1:
        raise ValueError(f"{w.size} waypoints but {k_seg} durations")
    if np.any(dur <= 0):
        raise ValueError("durations must be positive")
    if method not in ("corridor", "classical"):
        raise ValueError(f"unknown method {method!r}")
    n = config.order
    nc = n + 1
    nx = k_seg * nc
    start, end = (np.asarray(s, dtype=np.float64) for s in boundary_states)

    P = np.zeros((nx, nx))
    for i in range(k_seg):
        P[i * nc:(i + 1) * nc, i * nc:(i + 1) * nc] = snap_hessian(n, 0.0, dur[i])
    P = 0.5 * (P + P.T)

    rows, rhs, blocks_eq = [], [], []

    def add_eq(name, new_rows, new_rhs):
        a = len(rows)
        rows.extend(new_rows)
        rhs.extend(new_rhs)
        blocks_eq.append((name, a, len(rows)))

    def seg_row(i, t, d, sign=1.0):
        r = np.zeros(nx)
        r[i * nc:(i + 1) * nc] = sign * basis_row(n, t, d)
        return r

    add_eq("initial_state", [seg_row(0, 0.0, d) for d in range(3)], list(start[:3]))
    add_eq("terminal_state", [seg_row(k_seg - 1, dur[-1], d) for d in range(3)], list(end[:3]))
    cont = []
    for j in range(k_seg - 1):
        for d in range(4):
            cont.append(seg_row(j, dur[j], d) - seg_row(j + 1, 0.0, d))
    if cont:
        add_eq("continuity", cont, [0.0] * len(cont))
    if method == "classical" and k_seg > 1:
        add_eq("waypoints", [seg_row(j, dur[j], 0) for j in range(k_seg - 1)], list(w[1:-1]))

    A_eq = np.array(rows).reshape(-1, nx)
    b_eq = np.array(rhs, dtype=np.float64)

    in_rows, in_rhs, blocks_in = [], [], []
    segs = taus = refs = np.zeros(0)
    if method == "corridor":
        h = config.zone(axis) if zone is None else zone
        segs, taus = _sample_points(dur, config.sample_interval)
        refs = w[segs] + (w[segs + 1] - w[segs]) * (taus / dur[segs])
        pos = np.array([seg_row(i, t, 0) for i, t in zip(segs, taus)]).reshape(-1, nx)
        m = len(segs)
        if np.isfinite(h) and m:
            blocks_in.append(("corridor", 0, 2 * m))
            in_rows += [pos, -pos]
            in_rhs += [refs + h, -(refs - h)]
        bsegs, btaus = _sample_points(dur, config.sample_interval, interior_only=False)
        vel = np.array([seg_row(i, t, 1) for i, t in zip(bsegs, btaus)]).reshape(-1, nx)
        acc = np.array([seg_row(i, t, 2) for i, t in zip(bsegs, btaus)]).reshape(-1, nx)
        mb = len(bsegs)
        base = sum(len(r) for r in in_rows)
        blocks_in.append(("velocity", base, base + 2 * mb))
        blocks_in.append(("acceleration", base + 2 * mb, base + 4 * mb))
        in_rows += [vel, -vel, acc, -acc]
        in_rhs += [np.full(mb, config.v_max), np.full(mb, -config.v_min),
                   np.full(mb, config.a_max), np.full(mb, -config.a_min)]
    A_in = np.vstack(in_rows) if in_rows else np.zeros((0, nx))
    b_in = np.concatenate(in_rhs) if in_rhs else np.zeros(0)
    problem = QpProblem(P, np.zeros(nx), A_eq, b_eq, A_in, b_in)
    return AxisQp(problem, blocks_eq, blocks_in, segs, taus, refs)


def _feasible(A_eq, b_eq, A_in, b_in) -> bool:
    n = A_eq.shape[1]
    res = linprog(np.zeros(n), A_ub=A_in if len(b_in) else None, b_ub=b_in if len(b_in) else None,
                  A_eq=A_eq if len(b_eq) else None, b_eq=b_eq if len(b_eq) else None,
                  bounds=(None, None), method="highs")
    return res.status == 0


def _diagnose(qp: AxisQp, sol: QpSolution) -> str:
    """Name the constraint block responsible for the failure.

    For an infeasible QP this is the first inequality block (or pair of
    blocks) whose removal restores feasibility; otherwise the block with the largest violation at
    the returned iterate.
    """
    pr = qp.problem
    if sol.status == "infeasible":
        blocks = qp.blocks_in
        groups = [[blk] for blk in blocks] + [[p, q] for i, p in enumerate(blocks) for q in blocks[i + 1:]]
        for group in groups:
            drop = np.zeros(pr.m_in, bool)
            for _, a, b in group:
                drop[a:b] = True
            if _feasible(pr.A_eq, pr.b_eq, pr.A_in[~drop], pr.b_in[~drop]):
                return "+".join(name for name, _, _ in group)
    eq = np.abs(pr.A_eq @ sol.x - pr.b_eq)
    ineq = np.maximum(pr.A_in @ sol.x - pr.b_in, 0.0) if pr.m_in else np.zeros(0)
    if ineq.size and ineq.max() >= eq.max(initial=0.0):
        return qp.block_of("in", int(np.argmax(ineq)))
    if eq.size:
        return qp.block_of("eq", int(np.argmax(eq)))
    return "unknown"


def default_boundary_states(path: WaypointPath, axis: int):
    return (
        (path.points[0, axis], 0.0, 0.0),
        (path.points[-1, axis], 0.0, 0.0),
    )


def optimize_trajectory(
    path: WaypointPath,
    boundary_states=None,
    config: BackendConfig = BackendConfig(),
    method: str = "corridor",
    durations=None,
    zone: float | None = None,
) -> PiecewiseTrajectory:
    """Solve one QP per axis and stitch the result.

    ``boundary_states`` is ``[(start, end) for x, (start, end) for y]`` with
    each state ``(p, v, a)``; by default the path endpoints at rest.
    """
    if durations is None:
        durations = plan_times(path.points, config)
    durations = np.asarray(durations, dtype=np.float64)
    times = boundaries(durations)
    n = config.order
    coeffs = np.empty((2, path.n_segments, n + 1))
    cost = 0.0
    iters = []
    for ax in range(2):
        bs = default_boundary_states(path, ax) if boundary_states is None else boundary_states[ax]
        qp = build_qp(path.points[:, ax], durations, bs, config, axis=ax, method=method, zone=zone)
        sol = solve_qp(qp.problem, tol=config.qp_tol, max_iter=config.qp_max_iter)
        if sol.status != "optimal":
            block = _diagnose(qp, sol)
            raise BackendError(
                f"{method} QP on axis {AXES[ax]} ended with status {sol.status} "
                f"(failing constraint block '{block}')",
                axis=AXES[ax], block=block, status=sol.status,
            )
        coeffs[ax] = sol.x.reshape(path.n_segments, n + 1)
        cost += float(sol.x @ qp.problem.P @ sol.x)
        iters.append(sol.iterations)
    return PiecewiseTrajectory(times, coeffs, cost, method, {"qp_iterations": iters})


def cubic_spline_baseline(path: WaypointPath, durations) -> PiecewiseTrajectory:
    """Natural cubic spline through every waypoint per axis, same timing."""
    durations = np.asarray(durations, dtype=np.float64)
    times = boundaries(durations)
    coeffs = np.empty((2, path.n_segments, 4))
    for ax in range(2):
        cs = CubicSpline(times, path.points[:, ax], bc_type="natural")
        # scipy stores descending local powers as c[power_index, segment]
        coeffs[ax] = cs.c[::-1].T
    return PiecewiseTrajectory(times, coeffs, float("nan"), "cubic")


def plan_robot(points, timesteps=None, config: BackendConfig = BackendConfig(), method: str = "corridor"):
    """Front-end waypoints of one robot -> (path, durations, trajectory).

    The snap-based methods work on the downsampled path.  The cubic baseline
    interpolates every front-end waypoint on the same knot times.
    """
    if method not in ("corridor", "classical", "cubic"):
        raise ValueError(f"unknown back-end method {method!r}")
    path = make_path(points, timesteps, config.keep_every)
    durations = plan_times(path.points, config)
    if method == "cubic":
        fine = make_path(points, timesteps, 1)
        fine_durations = spread_times(fine, path, durations)
        return fine, fine_durations, cubic_spline_baseline(fine, fine_durations)
    traj = optimize_trajectory(path, None, config, method=method, durations=durations)
    return path, durations, traj


@dataclass
class PlanOutcome:
    paths: dict = field(default_factory=dict)  # robot -> WaypointPath
    trajectories: dict = field(default_factory=dict)  # robot -> PiecewiseTrajectory
    raw_waypoints: dict = field(default_factory=dict)  # robot -> (m, 2) front-end positions
    errors: dict = field(default_factory=dict)  # robot -> BackendError

    @property
    def ok(self) -> bool:
        return not self.errors


def plan_all(robot_waypoints: dict, config: BackendConfig = BackendConfig(), method: str = "corridor") -> PlanOutcome:
    """Run the back-end for every robot; failures are collected per robot, not raised."""
    out = PlanOutcome()
    for robot, pts in sorted(robot_waypoints.items()):
        pts = np.asarray(pts, dtype=np.float64)
        out.raw_waypoints[robot] = pts
        try:
            path, _, traj = plan_robot(pts, None, config, method)
        except BackendError as exc:
            out.errors[robot] = exc
            continue
        except ValueError as exc:  # e.g. a robot that never moved
            out.errors[robot] = BackendError(str(exc))
            continue
        out.paths[robot] = path
        out.trajectories[robot] = traj
    return out


# --------------------------------------------------------------------------
# export


CSV_HEADER = "robot_id,t,x,y,vx,vy,ax,ay,jx,jy"


def trajectories_doc(trajs: dict[int, PiecewiseTrajectory], extra: dict | None = None) -> dict:
    doc = {"format_version": 1, "time_basis": "local", "trajectories": []}
    for robot in sorted(trajs):
        doc["trajectories"].extend(trajs[robot].to_segments_doc(robot))
    if extra:
        doc.update(extra)
    return doc


def trajectories_from_doc(doc: dict) -> dict[int, PiecewiseTrajectory]:
    if doc.get("time_basis", "local") != "local":
        raise ValueError("only local-time coefficient documents are supported")
    grouped: dict[int, list[dict]] = {}
    for entry in doc["trajectories"]:
        grouped.setdefault(int(entry["robot"]), []).append(entry)
    return {r: PiecewiseTrajectory.from_segments_doc(v) for r, v in sorted(grouped.items())}


def save_trajectories(trajs, path, extra=None) -> None:
    Path(path).write_text(json.dumps(trajectories_doc(trajs, extra), indent=1))


def load_trajectories(path) -> dict[int, PiecewiseTrajectory]:
    return trajectories_from_doc(json.loads(Path(path).read_text()))


def export_csv(trajs: dict[int, PiecewiseTrajectory], dt_out: float = 0.02) -> str:
    if dt_out <= 0:
        raise ValueError("dt_out must be positive")
    lines = [CSV_HEADER]
    for robot in sorted(trajs):
        tr = trajs[robot]
        ts = tr.sample_times(dt_out)
        cols = [tr.evaluate(ts, d) for d in range(4)]
        for k, t in enumerate(ts):
            vals = [t] + [c[k, ax] for c in cols for ax in range(2)]
            lines.append(f"{robot}," + ",".join(repr(float(v)) for v in vals))
    return "\n".join(lines) + "\n"
