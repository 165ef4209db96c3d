"""Particle configurations on the integer lattice and their event-driven evolution.

A configuration tracks particles lo..hi (ordered, at most one per site, never
passing: position(i) + 1 <= position(i+1)).  Positions live in Z extended by
the ``PLUS_INF`` / ``MINUS_INF`` sentinels; -inf may appear only as a leftmost
run and +inf only as a rightmost run.  The right boundary is either OPEN (the
phantom neighbour of particle hi sits at +inf) or FROZEN (a phantom particle
pinned at a fixed finite position for all time).

Evolution is a deterministic function of the initial state and the clock
streams: the merged epochs are applied in time order, each one moving its
particle to min(current + label, right neighbour - 1).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from ._kernels import MINUS_INF, PLUS_INF, apply_events
from .rates import ClockStream, MergedEvents, merge_streams

OPEN = "open"
FROZEN = "frozen"


def is_finite(p) -> np.ndarray | bool:
    return (p > MINUS_INF) & (p < PLUS_INF)


def position_str(p: int) -> str:
    if p >= PLUS_INF:
        return "inf"
    if p <= MINUS_INF:
        return "-inf"
    return str(int(p))


def positions_to_float(pos: np.ndarray) -> np.ndarray:
    """Sentinel int64 positions -> float array with IEEE infinities."""
    out = pos.astype(np.float64)
    out[pos >= PLUS_INF] = np.inf
    out[pos <= MINUS_INF] = -np.inf
    return out


@dataclass
class Configuration:
    """Tracked window [lo, lo + len - 1] of an ordered particle system."""

    lo: int
    positions: np.ndarray
    boundary: str = OPEN
    frozen_pos: int | None = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.int64)
        if self.positions.ndim != 1 or self.positions.size == 0:
            raise ValueError("positions must be a nonempty 1-d array")
        if self.boundary not in (OPEN, FROZEN):
            raise ValueError(f"unknown boundary policy {self.boundary!r}")
        if self.boundary == FROZEN and self.frozen_pos is None:
            raise ValueError("frozen boundary needs a phantom position")

    @property
    def hi(self) -> int:
        return self.lo + self.positions.size - 1

    @property
    def size(self) -> int:
        return int(self.positions.size)

    def position(self, i: int) -> int:
        if not self.lo <= i <= self.hi:
            raise ValueError("untracked index")
        return int(self.positions[i - self.lo])

    def copy(self) -> "Configuration":
        return replace(self, positions=self.positions.copy())


def validate(config: Configuration) -> tuple[bool, str | None]:
    """Check ordering and sentinel placement; return (ok, first violation)."""
    pos = config.positions
    n = pos.size
    neg = pos <= MINUS_INF
    plus = pos >= PLUS_INF
    # -inf only as a leftmost run, +inf only as a rightmost run
    if neg.any():
        k = int(np.flatnonzero(neg).max())
        if not neg[: k + 1].all():
            first = int(np.flatnonzero(~neg[: k + 1]).min())
            return False, (
                f"-inf not a leftmost run: finite particle at index "
                f"{config.lo + first} precedes -inf at index {config.lo + k}"
            )
    if plus.any():
        k = int(np.flatnonzero(plus).min())
        if not plus[k:].all():
            bad = k + int(np.flatnonzero(~plus[k:]).min())
            return False, (
                f"+inf not a rightmost run: +inf at index {config.lo + k} "
                f"precedes finite particle at index {config.lo + bad}"
            )
    both = is_finite(pos[:-1]) & is_finite(pos[1:]) if n > 1 else np.array([], bool)
    bad = np.flatnonzero(both & (pos[:-1] + 1 > pos[1:]))
    if bad.size:
        j = int(bad[0])
        return False, (
            f"ordering violated at index pair ({config.lo + j}, {config.lo + j + 1}): "
            f"{position_str(pos[j])} + 1 > {position_str(pos[j + 1])}"
        )
    if config.boundary == FROZEN and is_finite(pos[-1]):
        if pos[-1] + 1 > config.frozen_pos:
            return False, (
                f"ordering violated against frozen phantom: "
                f"{position_str(pos[-1])} + 1 > {config.frozen_pos}"
            )
    return True, None


def apply_jump(config: Configuration, i: int, k: int) -> Configuration:
    """One attempted size-k jump of particle i, clipped by its right neighbour."""
    if not config.lo <= i <= config.hi:
        raise ValueError("untracked index")
    if k < 1:
        raise ValueError("jump size must be >= 1")
    out = config.copy()
    j = i - config.lo
    cur = out.positions[j]
    if cur >= PLUS_INF or cur <= MINUS_INF:
        return out
    if j + 1 < out.positions.size:
        nxt = out.positions[j + 1]
    elif config.boundary == OPEN:
        nxt = PLUS_INF
    else:
        nxt = np.int64(config.frozen_pos)
    new = cur + k
    if nxt < PLUS_INF:
        new = min(new, nxt - 1)
    out.positions[j] = new
    return out


@dataclass
class EventLog:
    """Per-epoch record of the applied jump rule (blocked attempts included)."""

    times: np.ndarray
    indices: np.ndarray
    labels: np.ndarray
    old_positions: np.ndarray
    new_positions: np.ndarray

    def __len__(self) -> int:
        return int(self.times.size)


@dataclass
class Trajectory:
    """Snapshots of one evolution at the requested query times."""

    lo: int
    query_times: np.ndarray
    snapshots: np.ndarray  # (n_query, window) int64 with sentinels
    boundary: str
    frozen_pos: int | None
    moved_count: int
    events: EventLog | None = None

    @property
    def hi(self) -> int:
        return self.lo + self.snapshots.shape[1] - 1

    @property
    def final_positions(self) -> np.ndarray:
        return self.snapshots[-1]

    def position(self, i: int, q: int) -> int:
        return int(self.snapshots[q, i - self.lo])

    def write_csv(self, fh, replica: int = 0) -> None:
        """Rows (replica, time, index, position); infinities as inf/-inf."""
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["replica", "time", "index", "position"])
        for q, t in enumerate(self.query_times):
            for j in range(self.snapshots.shape[1]):
                writer.writerow(
                    [replica, repr(float(t)), self.lo + j, position_str(self.snapshots[q, j])]
                )


def _events_for_window(
    config: Configuration, clocks: list[ClockStream], t: float
) -> MergedEvents:
    if t < 0:
        raise ValueError("invalid time")
    by_site = {}
    for s in clocks:
        by_site[s.site] = s
    missing = [i for i in range(config.lo, config.hi + 1) if i not in by_site]
    if missing:
        raise ValueError(f"clocks must cover [{config.lo}, {config.hi}]; missing {missing[:5]}")
    used = [by_site[i] for i in range(config.lo, config.hi + 1)]
    if t > min(s.horizon for s in used):
        raise ValueError("horizon exceeded")
    return merge_streams(used).before(t)


def _check_query_times(query_times, t: float) -> np.ndarray:
    q = np.asarray(query_times, dtype=np.float64)
    if q.ndim != 1 or q.size == 0:
        raise ValueError("need at least one query time")
    if np.any(np.diff(q) < 0):
        raise ValueError("query times must be nondecreasing")
    if q[-1] > t:
        raise ValueError("query time beyond evolution time")
    return q


def _evolve_merged(
    config: Configuration,
    merged: MergedEvents,
    q: np.ndarray,
    record_events: bool = False,
) -> Trajectory:
    ok, why = validate(config)
    if not ok:
        raise ValueError(f"invalid configuration: {why}")
    pos = config.positions.copy()
    snaps = np.empty((q.size, pos.size), dtype=np.int64)
    ev_idx = merged.sites - config.lo
    nrec = merged.times.size if record_events else 0
    log_old = np.empty(nrec, dtype=np.int64)
    log_new = np.empty(nrec, dtype=np.int64)
    moved = apply_events(
        pos,
        merged.times,
        ev_idx,
        merged.labels,
        config.boundary == OPEN,
        np.int64(config.frozen_pos if config.frozen_pos is not None else PLUS_INF),
        q,
        snaps,
        log_old,
        log_new,
        record_events,
    )
    events = None
    if record_events:
        events = EventLog(merged.times, merged.sites, merged.labels, log_old, log_new)
    traj = Trajectory(
        lo=config.lo,
        query_times=q,
        snapshots=snaps,
        boundary=config.boundary,
        frozen_pos=config.frozen_pos,
        moved_count=int(moved),
        events=events,
    )
    final = Configuration(config.lo, snaps[-1], config.boundary, config.frozen_pos)
    ok, why = validate(final)
    if not ok:  # pragma: no cover - guards kernel bugs
        raise AssertionError(f"exclusion violated during evolution: {why}")
    return traj


def evolve(
    config: Configuration,
    clocks: list[ClockStream],
    t: float,
    query_times,
    record_events: bool = False,
) -> Trajectory:
    """Run the jump rule over the merged epochs up to time t.

    ``clocks`` must cover the window with site index == particle index.
    Deterministic given (config, clocks, query_times).
    """
    q = _check_query_times(query_times, t)
    merged = _events_for_window(config, clocks, t)
    return _evolve_merged(config, merged, q, record_events)


@dataclass
class SandwichResult:
    """Bracketing pair of runs plus the window where they agree.

    ``upper`` uses an open right boundary, ``lower`` a phantom frozen at its
    initial position; the untruncated system lies between them pointwise, so
    indices in [lo, agreement_hi] are certified exact at every query time.
    """

    upper: Trajectory
    lower: Trajectory
    agreement_hi: int  # lo - 1 when the agreement window is empty

    @property
    def agreement_window(self) -> tuple[int, int]:
        return (self.upper.lo, self.agreement_hi)


def sandwich_evolve(
    config: Configuration,
    clocks: list[ClockStream],
    t: float,
    query_times,
    frozen_pos: int | None = None,
) -> SandwichResult:
    """Evolve with both boundary policies under the same clocks.

    ``frozen_pos`` defaults to position(hi) + 1, the most conservative phantom
    consistent with the ordering; pass the true initial position of particle
    hi + 1 when it is known.
    """
    if frozen_pos is None:
        last = config.positions[-1]
        frozen_pos = int(last + 1) if is_finite(last) else None
    q = _check_query_times(query_times, t)
    merged = _events_for_window(config, clocks, t)
    upper_cfg = Configuration(config.lo, config.positions.copy(), OPEN)
    upper = _evolve_merged(upper_cfg, merged, q)
    if frozen_pos is None:
        # rightmost tracked particle already at +inf: both policies coincide
        lower = Trajectory(
            lo=upper.lo,
            query_times=upper.query_times,
            snapshots=upper.snapshots.copy(),
            boundary=FROZEN,
            frozen_pos=None,
            moved_count=upper.moved_count,
        )
        return SandwichResult(upper, lower, upper.hi)
    lower_cfg = Configuration(config.lo, config.positions.copy(), FROZEN, frozen_pos)
    lower = _evolve_merged(lower_cfg, merged, q)
    agree = np.all(upper.snapshots == lower.snapshots, axis=0)
    if agree.all():
        hi = upper.hi
    elif not agree[0]:
        hi = config.lo - 1
    else:
        hi = config.lo + int(np.flatnonzero(~agree).min()) - 1
    return SandwichResult(upper, lower, hi)
