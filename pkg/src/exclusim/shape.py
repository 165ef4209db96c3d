"""Limit-shape estimation from packed-half-line runs, and profile sampling.

Running the process from the packed half line (particles at i for i <= 0,
nothing to the right) and reading particle [n*x] at time n*t, scaled by 1/n,
samples a function gamma(x, t) = t * g(x / t) whose t = 1 section g is convex,
nondecreasing, has slope >= 1 and g(0) = free speed.  ``estimate_shape``
averages replicas on an x grid; ``convexify`` projects the noisy estimate
onto that function class; ``empirical_profile`` does the analogous scaled
sampling for arbitrary initial profiles, with a sandwich certificate for the
right window edge.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import OPEN, Configuration, evolve, positions_to_float, sandwich_evolve
from ._kernels import PLUS_INF
from ._parallel import map_indexed
from .rates import RateTable, derive_seed, sample_clock_field

_DOMAIN_REPLICA = 0x726C63


@dataclass
class ShapeEstimate:
    """Scaled front positions on an x grid, with replica error bars.

    ``values[k]`` estimates gamma(x_grid[k], t_macro); physical simulated time
    is n * t_macro.  ``raw_values`` holds the pre-projection estimate once
    ``convexify`` has run.
    """

    x_grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n: int
    t_macro: float
    replicas: int
    table: RateTable
    raw_values: np.ndarray | None = None
    projection_shift: float = 0.0

    @property
    def t_phys(self) -> float:
        return self.n * self.t_macro

    @property
    def is_convexified(self) -> bool:
        return self.raw_values is not None

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "g_hat_raw", "g_hat_convex", "stderr", "n", "replicas"])
        raw = self.raw_values if self.raw_values is not None else self.values
        conv = self.values if self.raw_values is not None else np.full_like(self.values, np.nan)
        for k in range(self.x_grid.size):
            writer.writerow(
                [
                    repr(float(self.x_grid[k])),
                    repr(float(raw[k])),
                    repr(float(conv[k])),
                    repr(float(self.stderr[k])),
                    self.n,
                    self.replicas,
                ]
            )


def load_shape_csv(fh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read (x, g_hat_convex, stderr) columns back from ``write_csv`` output."""
    reader = csv.DictReader(fh)
    xs, gs, es = [], [], []
    for row in reader:
        xs.append(float(row["x"]))
        gs.append(float(row["g_hat_convex"]))
        es.append(float(row["stderr"]))
    return np.array(xs), np.array(gs), np.array(es)


def sample_step_positions_at(
    table: RateTable,
    n: int,
    t_macros,
    x_grid,
    seed: int,
    window_margin: float = 1.0,
) -> np.ndarray:
    """One packed-half-line run, read at [n*x] at several times, scaled by 1/n.

    The window tracks particles [-M, 0] with M = ceil(n*|x_min|) +
    ceil(margin * total_rate * n * max(t_macro)); the run is exact to the
    right (everything above 0 is at +inf forever) and the extra depth is
    certified by requiring the leftmost tracked particle to be still unmoved
    at the end.  Returns shape (len(t_macros), len(x_grid)).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.asarray(x_grid, dtype=np.float64)
    if x.size == 0 or np.any(x > 0):
        raise ValueError("x grid must be nonempty and <= 0")
    tm = np.asarray(t_macros, dtype=np.float64)
    if tm.size == 0 or np.any(np.diff(tm) < 0) or np.any(tm < 0):
        raise ValueError("t_macros must be nondecreasing and >= 0")
    idx = np.floor(n * x).astype(np.int64)
    horizon = n * float(tm[-1])
    if horizon == 0:
        return np.tile(idx.astype(np.float64) / n, (tm.size, 1))
    depth = int(-idx.min()) + int(math.ceil(window_margin * table.total_rate * horizon))
    cfg = Configuration(-depth, np.arange(-depth, 1, dtype=np.int64), OPEN)
    clocks = sample_clock_field(table, range(-depth, 1), horizon, seed)
    traj = evolve(cfg, clocks, horizon, n * tm)
    if traj.final_positions[0] != -depth:
        raise ValueError("enlarge window")  # left edge woke up: margin too small
    return traj.snapshots[:, idx + depth].astype(np.float64) / n


def sample_step_positions(
    table: RateTable,
    n: int,
    t_macro: float,
    x_grid,
    seed: int,
    window_margin: float = 1.0,
) -> np.ndarray:
    """Single-time version of :func:`sample_step_positions_at`."""
    return sample_step_positions_at(table, n, [t_macro], x_grid, seed, window_margin)[0]


def estimate_shape_at_times(
    table: RateTable,
    n: int,
    x_grid,
    replicas: int,
    seed: int,
    t_macros,
    workers: int | None = None,
) -> list[ShapeEstimate]:
    """Replica-averaged shape estimates at several times, one run per replica.

    The estimates share clocks within each replica, so time-difference checks
    compare nested readings of the same path.  Accumulation is over sorted
    per-point replica values, making the mean independent of replica order
    (and of the worker count) bit for bit.
    """
    if replicas < 2:
        raise ValueError("need at least 2 replicas for error bars")
    x = np.asarray(x_grid, dtype=np.float64)
    tm = list(t_macros)
    rows = map_indexed(
        lambda r: sample_step_positions_at(
            table, n, tm, x, derive_seed(seed, _DOMAIN_REPLICA, r)
        ),
        replicas,
        workers,
    )
    vals = np.stack(rows)
    out = []
    for k, t_macro in enumerate(tm):
        ordered = np.sort(vals[:, k, :], axis=0)
        mean = ordered.sum(axis=0) / replicas
        stderr = ordered.std(axis=0, ddof=1) / math.sqrt(replicas)
        out.append(
            ShapeEstimate(
                x_grid=x,
                values=mean,
                stderr=stderr,
                n=n,
                t_macro=float(t_macro),
                replicas=replicas,
                table=table,
            )
        )
    return out


def estimate_shape(
    table: RateTable,
    n: int,
    x_grid,
    replicas: int,
    seed: int,
    t_macro: float = 1.0,
) -> ShapeEstimate:
    """Replica-averaged shape estimate on an x grid (raw, not yet projected)."""
    return estimate_shape_at_times(table, n, x_grid, replicas, seed, [t_macro])[0]


def greatest_convex_minorant(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Largest convex function below the points (x, y), sampled back on x."""
    n = x.size
    if n <= 2:
        return y.copy()
    hull = [0]
    for i in range(1, n):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # pop b when it lies on or above the chord a -> i
            if (y[b] - y[a]) * (x[i] - x[a]) >= (y[i] - y[a]) * (x[b] - x[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(x, x[hull], y[hull])


def convexify(est: ShapeEstimate, slope_floor: float = 1.0) -> ShapeEstimate:
    """Project onto the convex / nondecreasing / slope >= floor class.

    Greatest convex minorant first, then the slope floor applied right to
    left (value[k] <= value[k+1] - floor * dx keeps convexity: only the
    leftmost run of slopes can lie below the floor).
    """
    x, y = est.x_grid, est.values
    proj = greatest_convex_minorant(x, y)
    # the floor is 1 at any t_macro: d/dx of t*g(x/t) is g'(x/t) >= 1
    for k in range(x.size - 2, -1, -1):
        cap = proj[k + 1] - slope_floor * (x[k + 1] - x[k])
        if proj[k] > cap:
            proj[k] = cap
    shift = float(np.abs(proj - y).max()) if x.size else 0.0
    return replace(est, values=proj, raw_values=y.copy(), projection_shift=shift)


def check_shape_properties(
    est: ShapeEstimate,
    tol: float,
    slope_tol: float | None = None,
    lipschitz: tuple["ShapeEstimate", float] | None = None,
) -> dict:
    """Verify the stated bounds on a (convexified) estimate, within ``tol``.

    Checks: envelope x <= value <= x + free_speed * t_macro, monotonicity,
    convexity of the projected values, slope floor, midpoint subadditivity
    on grid pairs (via homogeneity), and optionally the time-Lipschitz bound
    against a second estimate at t_macro + eps.
    """
    x, v = est.x_grid, est.values
    b1 = est.table.free_speed
    t = est.t_macro
    slope_tol = tol if slope_tol is None else slope_tol
    report: dict[str, dict] = {}

    def add(name, passed, worst):
        report[name] = {"passed": bool(passed), "worst": float(worst)}

    lower = v - x
    add("envelope_lower", np.all(lower >= -tol), lower.min())
    upper = x + b1 * t - v
    add("envelope_upper", np.all(upper >= -tol), upper.min())
    if x.size > 1:
        diffs = np.diff(v)
        add("monotone", np.all(diffs >= -tol), diffs.min())
        slopes = diffs / np.diff(x)
        add("slope_floor", np.all(slopes >= 1.0 - slope_tol), slopes.min())
        second = np.diff(slopes)
        add("convex", np.all(second >= -1e-12), second.min() if second.size else 0.0)
    # midpoint subadditivity: 2 * value((a+b)/2) <= value(a) + value(b), i.e.
    # the t -> 2t comparison collapsed through homogeneity onto one grid;
    # 1e-12 absorbs float dust on exactly collinear points
    worst = np.inf
    ok = True
    for a in range(x.size):
        for b in range(a, x.size):
            mid = 0.5 * (x[a] + x[b])
            k = int(np.argmin(np.abs(x - mid)))
            if abs(x[k] - mid) > 1e-9:
                continue
            slack = v[a] + v[b] + tol - 2 * v[k]
            worst = min(worst, slack)
            if slack < -1e-12:
                ok = False
    add("subadditive_pairs", ok, worst if worst < np.inf else 0.0)
    if lipschitz is not None:
        later, eps = lipschitz
        if later.x_grid.shape != x.shape or not np.allclose(later.x_grid, x):
            raise ValueError("Lipschitz comparison needs matching grids")
        # compare raw against raw: the projection only lowers the base values
        base = est.raw_values if est.raw_values is not None else est.values
        slack = base + b1 * eps + tol - later.values
        add("time_lipschitz", np.all(slack >= 0), slack.min())
    report["all_passed"] = all(
        r["passed"] for name, r in report.items() if name != "all_passed"
    )
    return report


def kink_location(est: ShapeEstimate, tol: float = 0.05) -> float | None:
    """First grid abscissa where the slope exceeds 1 + tol (diagnostic only)."""
    if est.x_grid.size < 2:
        return None
    slopes = np.diff(est.values) / np.diff(est.x_grid)
    above = np.flatnonzero(slopes > 1.0 + tol)
    return float(est.x_grid[above[0]]) if above.size else None


@dataclass
class EmpiricalProfile:
    """Replica-averaged scaled positions for a general initial profile."""

    x_grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n: int
    t_macro: float
    replicas: int
    exact_right: bool  # window ended in the +inf tail: no truncation at all
    agreement_margin: int  # worst-case indices between read range and agreement edge
    repairs: int  # initializer positions bumped right to restore ordering


def build_initial_positions(u0_at, n: int, i_lo: int, i_hi: int) -> tuple[np.ndarray, int]:
    """Microscopic initial data: round n * u0(i / n), repaired left to right.

    ``u0_at`` maps a float array of macroscopic coordinates to values; +inf
    values become the +inf sentinel.  Repairs move particles right by the
    minimal amount restoring ordering; the count is returned.
    """
    i = np.arange(i_lo, i_hi + 1, dtype=np.int64)
    u = np.asarray(u0_at(i / n), dtype=np.float64)
    pos = np.empty(i.size, dtype=np.int64)
    inf_mask = np.isinf(u)
    pos[inf_mask] = PLUS_INF
    pos[~inf_mask] = np.round(n * u[~inf_mask]).astype(np.int64)
    finite = np.flatnonzero(~inf_mask)
    repairs = 0
    if finite.size:
        if inf_mask.any() and inf_mask[: finite[0]].any():
            raise ValueError("initial profile must be finite below its +inf tail")
        seg = pos[finite[0] : finite[-1] + 1]
        gaps = seg - np.arange(seg.size, dtype=np.int64)
        repaired = np.maximum.accumulate(gaps)
        repairs = int(np.count_nonzero(repaired != gaps))
        pos[finite[0] : finite[-1] + 1] = repaired + np.arange(seg.size, dtype=np.int64)
    return pos, repairs


def empirical_profile(
    u0_at,
    table: RateTable,
    n: int,
    x_grid,
    t_macro: float,
    replicas: int,
    seed: int,
    window_margin: float = 2.0,
    window_slack: int = 64,
    workers: int | None = None,
) -> EmpiricalProfile:
    """Scaled positions n^{-1} sigma([n x], n t) averaged over replicas.

    The tracked window is [floor(n x_min), floor(n x_max) + margin]; the left
    edge is exact (particles consult only their right neighbour), the right
    edge is certified per replica by sandwich agreement over the read range
    (or exactly, when the initial profile puts a +inf tail inside the window).
    """
    x = np.asarray(x_grid, dtype=np.float64)
    idx = np.floor(n * x).astype(np.int64)
    horizon = n * t_macro
    i_lo = int(idx.min())
    i_read_hi = int(idx.max())
    i_hi = i_read_hi + int(math.ceil(window_margin * table.total_rate * horizon)) + window_slack
    pos0, repairs = build_initial_positions(u0_at, n, i_lo, i_hi + 1)

    # a +inf tail inside the window never moves, so the open boundary is exact;
    # otherwise the extra particle at i_hi + 1 seeds the frozen phantom
    exact_right = bool(np.any(pos0 >= PLUS_INF))
    cfg = Configuration(i_lo, pos0[:-1], OPEN)
    frozen = None if exact_right else int(pos0[-1])

    def run_replica(r: int) -> tuple[np.ndarray, int]:
        rs = derive_seed(seed, _DOMAIN_REPLICA, r)
        if t_macro == 0:
            finals, margin = cfg.positions, 0
        elif exact_right:
            clocks = sample_clock_field(table, range(cfg.lo, cfg.hi + 1), horizon, rs)
            finals = evolve(cfg, clocks, horizon, [horizon]).final_positions
            margin = cfg.hi - i_read_hi
        else:
            clocks = sample_clock_field(table, range(cfg.lo, cfg.hi + 1), horizon, rs)
            sw = sandwich_evolve(cfg, clocks, horizon, [horizon], frozen_pos=frozen)
            if sw.agreement_hi < i_read_hi:
                raise ValueError("enlarge window")
            margin = sw.agreement_hi - i_read_hi
            finals = sw.upper.final_positions
        return positions_to_float(finals[idx - cfg.lo]) / n, margin

    rows = map_indexed(run_replica, replicas, workers)
    vals = np.stack([row for row, _ in rows])
    agreement_margin = min(margin for _, margin in rows)

    ordered = np.sort(vals, axis=0)
    mean = ordered.sum(axis=0) / replicas
    stderr = np.zeros(x.size) if replicas < 2 else ordered.std(axis=0, ddof=1) / math.sqrt(replicas)
    return EmpiricalProfile(
        x_grid=x,
        values=mean,
        stderr=stderr,
        n=n,
        t_macro=t_macro,
        replicas=replicas,
        exact_right=exact_right,
        agreement_margin=int(agreement_margin),
        repairs=repairs,
    )
