"""Hot event-application loops, compiled with numba when available.

Positions are int64 with ``PLUS_INF`` / ``MINUS_INF`` sentinels standing in
for particles parked at plus or minus infinity.  The sentinel arithmetic
contract (inf + k = inf, inf - 1 = inf) is implemented by explicit branches,
never by saturating integer math.

Every kernel exists twice: the plain-Python source (``*_py``) and a
numba-compiled wrapper selected at import time.  Set ``EXCLUSIM_NUMBA=0`` in
the environment to force the plain path; ``benchmarks/bench_kernels.py``
compares the two.
"""

from __future__ import annotations

import os

import numpy as np

# 2**62 leaves headroom: finite positions plus any jump label stay well below
# the sentinel, so ordinary int64 arithmetic cannot collide with it.
PLUS_INF = np.int64(2**62)
MINUS_INF = np.int64(-(2**62))

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

NUMBA_ENABLED = _HAVE_NUMBA and os.environ.get("EXCLUSIM_NUMBA", "1") != "0"


def apply_events_py(
    pos,
    ev_time,
    ev_idx,
    ev_k,
    open_right,
    frozen_pos,
    query_times,
    snaps,
    log_old,
    log_new,
    record,
):
    """Apply a time-sorted event list to one configuration.

    ``pos[j]`` is the position of the particle with window offset j; the right
    neighbour of the last particle is +inf (open boundary) or a phantom frozen
    at ``frozen_pos``.  ``snaps[q]`` receives the state at ``query_times[q]``
    (every event with time <= query time applied).  ``pos`` ends up holding
    the final state.  When ``record`` is true, ``log_old``/``log_new`` get the
    pre/post position of the jumping particle for every event.

    Returns the number of events that actually moved a particle.
    """
    n = pos.shape[0]
    n_q = query_times.shape[0]
    qi = 0
    moved = 0
    for e in range(ev_time.shape[0]):
        t = ev_time[e]
        while qi < n_q and query_times[qi] < t:
            for j in range(n):
                snaps[qi, j] = pos[j]
            qi += 1
        i = ev_idx[e]
        if i < 0 or i >= n:
            if record:  # no tracked particle: log the -inf sentinel
                log_old[e] = MINUS_INF
                log_new[e] = MINUS_INF
            continue
        cur = pos[i]
        if cur >= PLUS_INF or cur <= MINUS_INF:
            if record:
                log_old[e] = cur
                log_new[e] = cur
            continue
        if i + 1 < n:
            nxt = pos[i + 1]
        elif open_right:
            nxt = PLUS_INF
        else:
            nxt = frozen_pos
        new = cur + ev_k[e]
        if nxt < PLUS_INF and nxt - 1 < new:
            new = nxt - 1
        if record:
            log_old[e] = cur
            log_new[e] = new
        if new != cur:
            pos[i] = new
            moved += 1
    while qi < n_q:
        for j in range(n):
            snaps[qi, j] = pos[j]
        qi += 1
    return moved


def apply_events_coupled_py(
    sig_pos,
    sig_lo,
    sig_open,
    sig_frozen,
    wedge_pos,
    anchor_lo,
    ev_time,
    ev_site,
    ev_k,
    query_times,
    sig_snaps,
    wedge_snaps,
):
    """Evolve one configuration and a family of wedge processes together.

    ``wedge_pos[w, d]`` holds the wedge with anchor ``anchor_lo + w``: column
    d is its particle at wedge index -d, with an open right boundary above
    column 0.  An event at lattice site m drives the sigma particle m and, in
    the same step, the wedge particle at column d = (anchor) - m for every
    wedge whose anchor lies in [m, m + depth]; that is the index-shifted clock rule.
    The processes never see each other.
    """
    n = sig_pos.shape[0]
    n_w = wedge_pos.shape[0]
    cols = wedge_pos.shape[1]
    n_q = query_times.shape[0]
    qi = 0
    for e in range(ev_time.shape[0]):
        t = ev_time[e]
        while qi < n_q and query_times[qi] < t:
            for a in range(n):
                sig_snaps[qi, a] = sig_pos[a]
            for a in range(n_w):
                for b in range(cols):
                    wedge_snaps[qi, a, b] = wedge_pos[a, b]
            qi += 1
        m = ev_site[e]
        k = ev_k[e]
        i = m - sig_lo
        if 0 <= i < n:
            cur = sig_pos[i]
            if MINUS_INF < cur < PLUS_INF:
                if i + 1 < n:
                    nxt = sig_pos[i + 1]
                elif sig_open:
                    nxt = PLUS_INF
                else:
                    nxt = sig_frozen
                new = cur + k
                if nxt < PLUS_INF and nxt - 1 < new:
                    new = nxt - 1
                sig_pos[i] = new
        base = m - anchor_lo
        d_lo = -base if base < 0 else 0
        d_hi = n_w - base
        if d_hi > cols:
            d_hi = cols
        for d in range(d_lo, d_hi):
            w = base + d
            cur = wedge_pos[w, d]
            new = cur + k
            if d > 0:
                cap = wedge_pos[w, d - 1] - 1
                if cap < new:
                    new = cap
            wedge_pos[w, d] = new
    while qi < n_q:
        for a in range(n):
            sig_snaps[qi, a] = sig_pos[a]
        for a in range(n_w):
            for b in range(cols):
                wedge_snaps[qi, a, b] = wedge_pos[a, b]
        qi += 1
    return 0


if NUMBA_ENABLED:
    # nogil lets replica threads overlap inside the compiled loops
    apply_events = njit(cache=True, nogil=True)(apply_events_py)
    apply_events_coupled = njit(cache=True, nogil=True)(apply_events_coupled_py)
else:
    apply_events = apply_events_py
    apply_events_coupled = apply_events_coupled_py
