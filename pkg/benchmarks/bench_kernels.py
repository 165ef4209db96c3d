"""Compare the numba-compiled kernels against the plain-Python fallback.

Run:  python benchmarks/bench_kernels.py [--events N] [--window W]

The plain path is the same source the jitted functions were compiled from
(see exclusim._kernels); this script times both on one synthetic event load,
so the reported ratio is the cost of running with EXCLUSIM_NUMBA=0.
"""

import argparse
import time

import numpy as np

from exclusim._kernels import (
    NUMBA_ENABLED,
    PLUS_INF,
    apply_events,
    apply_events_coupled,
    apply_events_coupled_py,
    apply_events_py,
)


def _event_load(window: int, events: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    times = np.sort(rng.uniform(0.0, 1000.0, events))
    sites = rng.integers(0, window, events).astype(np.int64)
    labels = rng.integers(1, 4, events).astype(np.int64)
    return times, sites, labels


def _time(fn, *args, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_single(window: int, events: int) -> None:
    times, sites, labels = _event_load(window, events)
    q = np.array([1000.0])
    empty = np.empty(0, dtype=np.int64)

    def run(kernel, n_events):
        pos = np.arange(-window, 0, dtype=np.int64)
        snaps = np.empty((1, window), dtype=np.int64)
        kernel(
            pos,
            times[:n_events],
            sites[:n_events],
            labels[:n_events],
            True,
            np.int64(PLUS_INF),
            q,
            snaps,
            empty,
            empty,
            False,
        )

    run(apply_events, 10)  # compile
    t_jit = _time(lambda: run(apply_events, events))
    n_py = max(events // 20, 10_000)
    t_py = _time(lambda: run(apply_events_py, n_py), repeats=1) * events / n_py
    print(
        f"single-config kernel: jit {events / t_jit / 1e6:8.1f} Mev/s   "
        f"plain {events / t_py / 1e6:8.2f} Mev/s   ratio {t_py / t_jit:7.1f}x"
    )


def bench_coupled(window: int, events: int) -> None:
    n_wedges, depth = 40, 120
    times, sites, labels = _event_load(window, events)
    q = np.array([1000.0])

    def run(kernel, n_events):
        sig = np.arange(0, window, dtype=np.int64) * 2
        wpos = np.arange(depth + 1, dtype=np.int64)[None, :] * -1 + np.arange(
            n_wedges, dtype=np.int64
        )[:, None]
        sig_snaps = np.empty((1, window), dtype=np.int64)
        wsnaps = np.empty((1, n_wedges, depth + 1), dtype=np.int64)
        kernel(
            sig,
            0,
            True,
            np.int64(PLUS_INF),
            wpos,
            0,
            times[:n_events],
            sites[:n_events],
            labels[:n_events],
            q,
            sig_snaps,
            wsnaps,
        )

    run(apply_events_coupled, 10)  # compile
    t_jit = _time(lambda: run(apply_events_coupled, events))
    n_py = max(events // 50, 5_000)
    t_py = _time(lambda: run(apply_events_coupled_py, n_py), repeats=1) * events / n_py
    print(
        f"coupled-family kernel: jit {events / t_jit / 1e6:7.1f} Mev/s   "
        f"plain {events / t_py / 1e6:8.2f} Mev/s   ratio {t_py / t_jit:7.1f}x"
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--events", type=int, default=2_000_000)
    parser.add_argument("--window", type=int, default=2000)
    args = parser.parse_args()
    print(f"numba enabled in this process: {NUMBA_ENABLED}")
    bench_single(args.window, args.events)
    bench_coupled(args.window, args.events)


if __name__ == "__main__":
    main()
