"""Jump-rate tables and the labeled Poisson clocks that drive every process.

A rate table assigns an attempt rate to each jump size k >= 1, either as an
explicit finite list or with a geometric tail rate(k) = c * q**k appended
after the last explicit size.  Each lattice site owns one labeled Poisson
clock: epoch times form a homogeneous Poisson process at the table's total
rate, and each epoch carries an i.i.d. size label.

Clock streams are counter-based: the stream for (seed, site) is a pure
function of those values, so any process in a coupling can regenerate the
same clock on demand, in any order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

# Domain tags keep substreams derived for different purposes disjoint
# (a clock for site 5 must not collide with the sub-seed for replica 5).
_DOMAIN_CLOCK = 0x636C6B
_DOMAIN_SUBSEED = 0x736565

_MASK64 = (1 << 64) - 1


def _seed_sequence(seed: int, *path: int) -> np.random.SeedSequence:
    # SeedSequence wants nonnegative entropy words; map negatives (sites can
    # be negative) through 64-bit two's complement.
    words = tuple((int(p)) & _MASK64 for p in (seed, *path))
    return np.random.SeedSequence(words)


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Counter-based substream: a Generator determined by (seed, path) only."""
    return np.random.Generator(np.random.Philox(_seed_sequence(seed, *path)))


def derive_seed(seed: int, *path: int) -> int:
    """Collapse (seed, path) into a single integer usable as a fresh master seed."""
    state = _seed_sequence(seed, _DOMAIN_SUBSEED, *path).generate_state(4, np.uint32)
    return int.from_bytes(state.tobytes(), "little")


def _tail_moments(c: float, q: float, k0: int) -> tuple[float, float, float]:
    """Closed-form sums of c * k**m * q**k over k >= k0, for m = 0, 1, 2."""
    r = 1.0 - q
    qk = q**k0
    m0 = c * qk / r
    m1 = c * (k0 * qk / r + qk * q / r**2)
    m2 = c * (k0 * k0 * qk / r + (2 * k0 + 1) * qk * q / r**2 + 2 * qk * q * q / r**3)
    return m0, m1, m2


@dataclass(frozen=True)
class RateTable:
    """Jump-size rates with their first three moments precomputed.

    ``total_rate`` is the per-particle attempt rate (moment 0), ``free_speed``
    the drift of a particle with unbounded room (moment 1), ``second_moment``
    the size-squared rate sum.  ``tail``, when present, is (c, q): every size
    k >= ``tail_start`` attempts at rate c * q**k.
    """

    jump_sizes: tuple[int, ...]
    rates: tuple[float, ...]
    tail: tuple[float, float] | None
    tail_start: int
    total_rate: float
    free_speed: float
    second_moment: float
    # label-sampling support: sizes with positive rate and their CDF under
    # P(size) = rate / total_rate; the geometric tail is sampled in closed form
    label_sizes: np.ndarray = field(repr=False, compare=False, default=None)
    label_cdf: np.ndarray = field(repr=False, compare=False, default=None)
    tail_prob: float = field(compare=False, default=0.0)

    def spec(self) -> dict:
        """JSON-friendly description (used for provenance records)."""
        out = {
            "explicit": [[int(k), float(b)] for k, b in zip(self.jump_sizes, self.rates)],
        }
        if self.tail is not None:
            out["tail"] = [float(self.tail[0]), float(self.tail[1])]
        return out


def make_rate_table(
    explicit: list[tuple[int, float]] | tuple[tuple[int, float], ...],
    tail: tuple[float, float] | None = None,
) -> RateTable:
    """Build a rate table and compute its moments in closed form.

    ``explicit`` lists (size, rate) pairs with distinct sizes >= 1; ``tail``
    is an optional (c, q) geometric continuation starting right after the
    largest explicit size (or at size 1 if there are no explicit entries).
    """
    sizes: list[int] = []
    rates: list[float] = []
    for k, beta in explicit:
        if int(k) != k or k < 1:
            raise ValueError(f"jump size must be an integer >= 1, got {k!r}")
        if beta < 0:
            raise ValueError(f"rate for size {k} is negative")
        sizes.append(int(k))
        rates.append(float(beta))
    if len(set(sizes)) != len(sizes):
        raise ValueError("duplicate jump sizes")
    order = np.argsort(sizes) if sizes else []
    sizes = [sizes[i] for i in order]
    rates = [rates[i] for i in order]

    if tail is not None:
        c, q = float(tail[0]), float(tail[1])
        if c < 0:
            raise ValueError("tail coefficient is negative")
        if c == 0.0:
            tail = None
        elif not 0.0 < q < 1.0:
            raise ValueError("divergent tail")
        else:
            tail = (c, q)

    tail_start = (max(sizes) + 1) if sizes else 1
    b0 = float(sum(rates))
    b1 = float(sum(k * b for k, b in zip(sizes, rates)))
    b2 = float(sum(k * k * b for k, b in zip(sizes, rates)))
    if tail is not None:
        m0, m1, m2 = _tail_moments(tail[0], tail[1], tail_start)
        b0 += m0
        b1 += m1
        b2 += m2
    if b0 <= 0.0:
        raise ValueError("degenerate rates")

    support = [(k, b) for k, b in zip(sizes, rates) if b > 0.0]
    label_sizes = np.array([k for k, _ in support], dtype=np.int64)
    probs = np.array([b for _, b in support], dtype=np.float64) / b0
    label_cdf = np.cumsum(probs)
    tail_prob = (_tail_moments(tail[0], tail[1], tail_start)[0] / b0) if tail else 0.0

    return RateTable(
        jump_sizes=tuple(sizes),
        rates=tuple(rates),
        tail=tail,
        tail_start=tail_start,
        total_rate=b0,
        free_speed=b1,
        second_moment=b2,
        label_sizes=label_sizes,
        label_cdf=label_cdf,
        tail_prob=tail_prob,
    )


def tasep_rates() -> RateTable:
    """Unit-rate single-step jumps."""
    return make_rate_table([(1, 1.0)])


@dataclass(frozen=True)
class ClockStream:
    """Labeled Poisson epochs for one site on [0, horizon].

    Times are strictly increasing; every label has positive rate in the
    generating table.
    """

    site: int
    times: np.ndarray
    labels: np.ndarray
    horizon: float

    def __post_init__(self):
        if self.times.shape != self.labels.shape:
            raise ValueError("times and labels length mismatch")
        if self.times.size and not np.all(np.diff(self.times) > 0):
            raise ValueError("epoch times must be strictly increasing")

    def __len__(self) -> int:
        return int(self.times.size)


def _sample_labels(table: RateTable, rng: np.random.Generator, n: int) -> np.ndarray:
    u = rng.random(n)
    labels = np.empty(n, dtype=np.int64)
    n_explicit = table.label_sizes.size
    if n_explicit:
        idx = np.searchsorted(table.label_cdf, u, side="right")
    else:
        idx = np.zeros(n, dtype=np.int64)
    if table.tail is None:
        np.clip(idx, 0, n_explicit - 1, out=idx)
        labels[:] = table.label_sizes[idx]
        return labels
    explicit_mass = table.label_cdf[-1] if n_explicit else 0.0
    in_tail = idx >= n_explicit
    if n_explicit:
        safe = np.where(in_tail, 0, idx)
        labels[:] = table.label_sizes[safe]
    # closed-form geometric quantile for the tail; clip keeps log1p finite at
    # the float boundary u -> 1
    if np.any(in_tail):
        _, q = table.tail
        u2 = (u[in_tail] - explicit_mass) / table.tail_prob
        u2 = np.clip(u2, 0.0, 1.0 - 2**-53)
        offs = np.floor(np.log1p(-u2) / math.log(q)).astype(np.int64)
        labels[in_tail] = table.tail_start + offs
    return labels


def sample_clock_stream(
    table: RateTable, site: int, horizon: float, seed: int
) -> ClockStream:
    """Generate the labeled Poisson clock for one site.

    Deterministic in (seed, site): repeated calls with the same arguments
    return bit-identical streams, and streams for distinct sites are
    independent substreams of the same master seed.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    rng = derive_rng(seed, _DOMAIN_CLOCK, site)
    n = int(rng.poisson(table.total_rate * horizon))
    times = np.sort(rng.uniform(0.0, horizon, n))
    # exact duplicates are a measure-zero float artifact; redraw until strict
    while times.size > 1 and not np.all(np.diff(times) > 0):  # pragma: no cover
        times = np.sort(rng.uniform(0.0, horizon, n))
    labels = _sample_labels(table, rng, n)
    return ClockStream(site=site, times=times, labels=labels, horizon=float(horizon))


def sample_clock_field(
    table: RateTable, sites: range | np.ndarray, horizon: float, seed: int
) -> list[ClockStream]:
    """Clocks for a contiguous block of sites under one master seed."""
    return [sample_clock_stream(table, int(s), horizon, seed) for s in sites]


@dataclass(frozen=True)
class MergedEvents:
    """Globally time-ordered (time, site, label) triples from several streams.

    Ties across distinct sites are broken deterministically by (time, site,
    within-site index) and counted in ``cross_site_ties``; the caller decides
    whether that is acceptable.
    """

    times: np.ndarray
    sites: np.ndarray
    labels: np.ndarray
    horizon: float
    cross_site_ties: int

    def __len__(self) -> int:
        return int(self.times.size)

    def before(self, t: float) -> "MergedEvents":
        """Events with time <= t."""
        cut = int(np.searchsorted(self.times, t, side="right"))
        return MergedEvents(
            self.times[:cut],
            self.sites[:cut],
            self.labels[:cut],
            self.horizon,
            self.cross_site_ties,
        )


def merge_streams(streams: list[ClockStream]) -> MergedEvents:
    """Merge per-site streams into one deterministic global event order."""
    if not streams:
        return MergedEvents(
            np.empty(0), np.empty(0, np.int64), np.empty(0, np.int64), 0.0, 0
        )
    horizon = streams[0].horizon
    for s in streams:
        if s.horizon != horizon:
            raise ValueError("streams were generated with different horizons")
    # concatenating in site order makes a stable time sort equivalent to
    # ordering by (time, site, within-site index)
    streams = sorted(streams, key=lambda s: s.site)
    times = np.concatenate([s.times for s in streams])
    sites = np.concatenate(
        [np.full(len(s), s.site, dtype=np.int64) for s in streams]
    )
    labels = np.concatenate([s.labels for s in streams])
    order = np.argsort(times, kind="stable")
    times, sites, labels = times[order], sites[order], labels[order]
    same_t = times[1:] == times[:-1]
    ties = int(np.count_nonzero(same_t & (sites[1:] != sites[:-1])))
    if ties:
        logger.warning(
            "merge_streams: %d exact cross-site time ties; applying the "
            "deterministic (time, site, index) order",
            ties,
        )
    return MergedEvents(times, sites, labels, horizon, ties)
