"""Wedge-process couplings and their path-wise checks.

For each finite anchor position sigma(j, 0) a wedge process starts from the
fully packed half line sigma(j, 0) + i (i <= 0, everything above at +inf) and
reads the clock of lattice site i + j through its particle i.  Evolving the
base configuration and the whole wedge family on one merged event list makes
three exact statements testable path by path:

* the variational identity  sigma(i, t) = min over j >= i of wedge_j(i - j, t),
* monotonicity of the centered wedges across anchors,
* subadditivity of a centered wedge against its own restarted copy.

All three are integer identities/inequalities: any violation is a bug, never
a tolerance question.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import PLUS_INF, apply_events_coupled
from .core import OPEN, Configuration, Trajectory, evolve, is_finite, validate
from .rates import ClockStream, RateTable, merge_streams, sample_clock_field

# a coupled run stores n_wedges * (depth + 1) int64 per query time; this guard
# keeps accidental quadratic blowups out (the check is a desk-scale tool)
MAX_WEDGE_CELLS = 10**7


@dataclass(frozen=True)
class WedgeProcess:
    """One member of the family: packed half line hung from anchor ``j``."""

    anchor: int  # index j of the base particle this wedge is anchored to
    offset: int  # sigma(j, 0); particle i starts at offset + i
    depth: int  # tracked wedge indices are -depth .. 0


def build_wedge_family(
    sigma0: Configuration, j_lo: int, j_hi: int, depth: int
) -> list[WedgeProcess]:
    """Wedges for every anchor j in [j_lo, j_hi], sharing one clock collection."""
    if j_hi < j_lo:
        raise ValueError("empty anchor range")
    if depth < j_hi - j_lo:
        raise ValueError("depth must be at least the anchor range width")
    wedges = []
    for j in range(j_lo, j_hi + 1):
        off = sigma0.position(j)
        if not is_finite(np.int64(off)):
            raise ValueError("anchor at infinity")
        wedges.append(WedgeProcess(anchor=j, offset=int(off), depth=depth))
    return wedges


@dataclass
class CoupledRun:
    """Joint trajectory of the base configuration and its wedge family."""

    sigma0: Configuration
    query_times: np.ndarray
    sigma_snaps: np.ndarray  # (n_q, window)
    anchor_lo: int
    depth: int
    offsets: np.ndarray  # (n_wedges,)
    wedge_snaps: np.ndarray  # (n_q, n_wedges, depth + 1); column d = wedge index -d

    @property
    def anchor_hi(self) -> int:
        return self.anchor_lo + self.offsets.size - 1

    def sigma_value(self, q: int, i: int) -> int:
        return int(self.sigma_snaps[q, i - self.sigma0.lo])

    def wedge_value(self, q: int, j: int, i: int) -> int:
        """Position of wedge j's particle i (i in [-depth, 0]) at query q."""
        return int(self.wedge_snaps[q, j - self.anchor_lo, -i])


def evolve_coupled(
    sigma: Configuration,
    wedges: list[WedgeProcess],
    clocks: list[ClockStream],
    t: float,
    query_times,
) -> CoupledRun:
    """Drive sigma and every wedge from the single merged epoch list.

    At an epoch of site m with label k, the sigma particle m and the wedge
    particles (anchor j, wedge index m - j) all apply the jump rule in the
    same event step; the processes never interact.
    """
    if not wedges:
        raise ValueError("need at least one wedge")
    anchors = [w.anchor for w in wedges]
    depth = wedges[0].depth
    if anchors != list(range(anchors[0], anchors[0] + len(anchors))):
        raise ValueError("wedge anchors must be contiguous and ascending")
    if any(w.depth != depth for w in wedges):
        raise ValueError("wedges must share one depth")
    if len(wedges) * (depth + 1) > MAX_WEDGE_CELLS:
        raise ValueError("coupled run too large; shrink the family or its depth")
    ok, why = validate(sigma)
    if not ok:
        raise ValueError(f"invalid configuration: {why}")

    anchor_lo = anchors[0]
    anchor_hi = anchors[-1]
    by_site = {s.site: s for s in clocks}
    needed = set(range(sigma.lo, sigma.hi + 1))
    needed.update(range(anchor_lo - depth, anchor_hi + 1))
    missing = sorted(m for m in needed if m not in by_site)
    if missing:
        raise ValueError(f"clocks missing for sites {missing[:5]} (need {len(missing)})")
    used = [by_site[m] for m in sorted(needed)]
    if t > min(s.horizon for s in used):
        raise ValueError("horizon exceeded")

    q = np.asarray(query_times, dtype=np.float64)
    if np.any(np.diff(q) < 0) or q.size == 0 or q[-1] > t:
        raise ValueError("bad query times")

    merged = merge_streams(used).before(t)
    offsets = np.array([w.offset for w in wedges], dtype=np.int64)
    wedge_pos = offsets[:, None] - np.arange(depth + 1, dtype=np.int64)[None, :]
    sig_pos = sigma.positions.copy()
    sig_snaps = np.empty((q.size, sig_pos.size), dtype=np.int64)
    wedge_snaps = np.empty((q.size, len(wedges), depth + 1), dtype=np.int64)
    apply_events_coupled(
        sig_pos,
        sigma.lo,
        sigma.boundary == OPEN,
        np.int64(sigma.frozen_pos if sigma.frozen_pos is not None else PLUS_INF),
        wedge_pos,
        anchor_lo,
        merged.times,
        merged.sites,
        merged.labels,
        q,
        sig_snaps,
        wedge_snaps,
    )
    return CoupledRun(
        sigma0=sigma.copy(),
        query_times=q,
        sigma_snaps=sig_snaps,
        anchor_lo=anchor_lo,
        depth=depth,
        offsets=offsets,
        wedge_snaps=wedge_snaps,
    )


def check_variational_identity(run: CoupledRun, i_values, q_indices=None) -> dict:
    """Verify sigma(i, t) == min over available j >= i of wedge_j(i - j, t).

    Exact integer equality is required at every checked point.  Each point
    also carries a tail certificate that anchors beyond the family cannot
    contribute: either every such anchor is at +inf, or the deepest available
    wedge's consulted particle has not moved yet (then deeper terms are
    dominated).  A failed certificate is a coverage gap, not a violation.
    """
    i_values = [int(i) for i in i_values]
    if q_indices is None:
        q_indices = range(run.query_times.size)
    j_hi = run.anchor_hi
    if min(i_values) < run.anchor_lo:
        raise ValueError("checked indices need wedges for every j >= i")
    if j_hi - min(i_values) > run.depth:
        raise ValueError("deepest consulted wedge particle is not tracked")
    # anchors above j_hi are all at +inf exactly when the family reaches the
    # last tracked base particle of an open window
    tail_infinite = run.sigma0.boundary == OPEN and j_hi == run.sigma0.hi

    checked = 0
    equal = 0
    certs_valid = 0
    certs_trivial = 0
    first_violation = None
    first_cert_failure = None
    for q in q_indices:
        for i in i_values:
            js = np.arange(i, j_hi + 1)
            vals = run.wedge_snaps[q, js - run.anchor_lo, js - i]
            m = int(vals.min())
            sig = run.sigma_value(q, i)
            checked += 1
            if m == sig:
                equal += 1
            elif first_violation is None:
                first_violation = {
                    "i": i,
                    "query_time": float(run.query_times[q]),
                    "sigma": sig,
                    "wedge_min": m,
                    "argmin_anchor": int(js[int(vals.argmin())]),
                }
            if tail_infinite:
                certs_valid += 1
                certs_trivial += 1
            else:
                unmoved = run.wedge_value(q, j_hi, i - j_hi) == int(
                    run.offsets[j_hi - run.anchor_lo]
                ) + (i - j_hi)
                if unmoved:
                    certs_valid += 1
                elif first_cert_failure is None:
                    first_cert_failure = {
                        "i": i,
                        "query_time": float(run.query_times[q]),
                        "hint": "range too small; enlarge j_max",
                    }
    return {
        "checked": checked,
        "equal": equal,
        "certificates_valid": certs_valid,
        "certificates_trivial": certs_trivial,
        "first_violation": first_violation,
        "first_certificate_failure": first_cert_failure,
        "identity_holds": equal == checked,
        "coverage_ok": certs_valid == checked,
    }


def check_wedge_monotonicity(run: CoupledRun) -> dict:
    """Centered wedges never cross: for i <= j0 <= j1 and every query time,
    wedge_{j0}(i - j0) - offset_{j0} >= wedge_{j1}(i - j1) - offset_{j1}.

    Zero tolerance; scans every anchor pair.
    """
    n_w = run.offsets.size
    if n_w < 2:
        raise ValueError("need at least two wedges")
    centered = run.wedge_snaps - run.offsets[None, :, None]
    cols = run.depth + 1
    checked = 0
    violations = 0
    first = None
    for w0 in range(n_w):
        for w1 in range(w0 + 1, n_w):
            delta = w1 - w0
            a = centered[:, w0, : cols - delta]
            b = centered[:, w1, delta:]
            bad = a < b
            checked += a.size
            if bad.any():
                violations += int(bad.sum())
                if first is None:
                    q, d = map(int, np.argwhere(bad)[0])
                    first = {
                        "j0": run.anchor_lo + w0,
                        "j1": run.anchor_lo + w1,
                        "i": run.anchor_lo + w0 - d,
                        "query_time": float(run.query_times[q]),
                    }
    return {
        "checked": checked,
        "violations": violations,
        "first_violation": first,
        "passed": violations == 0,
    }


@dataclass
class WedgeRun:
    """A single centered wedge evolved on its own clocks, kept re-runnable."""

    table: RateTable
    depth: int
    seed: int
    horizon: float
    streams: list[ClockStream]

    def trajectory(self, query_times) -> Trajectory:
        cfg = Configuration(-self.depth, np.arange(-self.depth, 1, dtype=np.int64), OPEN)
        return evolve(cfg, self.streams, self.horizon, query_times)


def run_wedge(table: RateTable, depth: int, horizon: float, seed: int) -> WedgeRun:
    """Centered wedge (anchor 0, offset 0) on sites -depth..0."""
    streams = sample_clock_field(table, range(-depth, 1), horizon, seed)
    return WedgeRun(table=table, depth=depth, seed=seed, horizon=horizon, streams=streams)


def check_subadditivity(run: WedgeRun, h: int, s: float, t: float) -> dict:
    """Path-wise restart inequality for a centered wedge.

    Let xi be the wedge of ``run``.  A fresh wedge starting from the packed
    half line anchored at xi(h, s) reads the same clocks with sites shifted
    by h and time shifted by s; then xi(h + i, s + t) <= fresh(i, t) holds
    for every tracked i, exactly.  Zero tolerance.
    """
    if not -run.depth <= h <= 0:
        raise ValueError("h must lie in [-depth, 0]")
    if s < 0 or t < 0 or s + t > run.horizon:
        raise ValueError("need 0 <= s, t with s + t within the horizon")
    base = run.trajectory([s, s + t])
    anchor_val = base.position(h, 0)

    cont_depth = run.depth + h  # particle i of the restart reads site h + i
    by_site = {c.site: c for c in run.streams}
    shifted = []
    for i in range(-cont_depth, 1):
        src = by_site[h + i]
        keep = src.times > s
        shifted.append(
            ClockStream(
                site=i,
                times=src.times[keep] - s,
                labels=src.labels[keep],
                horizon=run.horizon - s,
            )
        )
    cont_cfg = Configuration(
        -cont_depth, anchor_val + np.arange(-cont_depth, 1, dtype=np.int64), OPEN
    )
    cont = evolve(cont_cfg, shifted, t, [t])

    lhs = base.snapshots[1, (h - cont_depth) - base.lo : (h + 1) - base.lo]
    rhs = cont.snapshots[0]
    bad = lhs > rhs
    violations = int(bad.sum())
    first = None
    if violations:
        d = int(np.flatnonzero(bad)[0])
        i = -cont_depth + d
        first = {"i": i, "lhs": int(lhs[d]), "rhs": int(rhs[d])}
    return {
        "checked": int(lhs.size),
        "violations": violations,
        "first_violation": first,
        "max_slack": int((rhs - lhs).max()),
        "passed": violations == 0,
    }
