import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import exclusim as ex


def make_streams(events, sites, horizon=1.0):
    """events: list of (time, site, label) with strictly increasing times per site."""
    out = []
    for s in sites:
        ts = [t for (t, i, k) in events if i == s]
        ks = [k for (t, i, k) in events if i == s]
        out.append(ex.ClockStream(s, np.array(ts, float), np.array(ks, np.int64), horizon))
    return out


class TestApplyJump:
    def test_unobstructed(self):
        cfg = ex.Configuration(0, np.array([0, ex.PLUS_INF]))
        assert ex.apply_jump(cfg, 0, 3).positions[0] == 3

    def test_fully_blocked(self):
        cfg = ex.Configuration(0, np.array([0, 1]))
        for k in (1, 2, 10):
            assert ex.apply_jump(cfg, 0, k).positions[0] == 0

    def test_partial_jump_lands_behind_neighbour(self):
        cfg = ex.Configuration(0, np.array([0, 2]))
        assert ex.apply_jump(cfg, 0, 5).positions[0] == 1

    def test_untracked_index(self):
        cfg = ex.Configuration(0, np.array([0, 2]))
        with pytest.raises(ValueError, match="untracked index"):
            ex.apply_jump(cfg, 2, 1)

    def test_jump_size_positive(self):
        cfg = ex.Configuration(0, np.array([0, 2]))
        with pytest.raises(ValueError):
            ex.apply_jump(cfg, 0, 0)

    def test_frozen_boundary_clips_last_particle(self):
        cfg = ex.Configuration(0, np.array([0, 2]), ex.FROZEN, frozen_pos=5)
        assert ex.apply_jump(cfg, 1, 9).positions[1] == 4

    def test_infinite_particle_stays(self):
        cfg = ex.Configuration(0, np.array([0, ex.PLUS_INF]))
        assert ex.apply_jump(cfg, 1, 2).positions[1] == ex.PLUS_INF


class TestValidate:
    def test_valid_simple(self):
        ok, why = ex.validate(ex.Configuration(0, np.array([0, 1, 2])))
        assert ok and why is None

    def test_overlap_reports_index_pair(self):
        ok, why = ex.validate(ex.Configuration(1, np.array([0, 0, 2])))
        assert not ok
        assert "(1, 2)" in why

    def test_inf_must_be_rightmost_run(self):
        ok, why = ex.validate(
            ex.Configuration(0, np.array([ex.MINUS_INF, 3, ex.PLUS_INF, 5]))
        )
        assert not ok
        assert "rightmost" in why

    def test_minus_inf_must_be_leftmost_run(self):
        ok, why = ex.validate(ex.Configuration(0, np.array([3, ex.MINUS_INF, 5])))
        assert not ok

    def test_runs_of_infinities_are_fine(self):
        ok, _ = ex.validate(
            ex.Configuration(
                0, np.array([ex.MINUS_INF, ex.MINUS_INF, 0, 5, ex.PLUS_INF, ex.PLUS_INF])
            )
        )
        assert ok

    def test_frozen_phantom_checked(self):
        ok, why = ex.validate(ex.Configuration(0, np.array([0, 4]), ex.FROZEN, frozen_pos=4))
        assert not ok and "phantom" in why


class TestEvolve:
    def test_no_epochs_identity(self, tasep):
        cfg = ex.Configuration(0, np.array([0, 2, 5]))
        streams = [ex.ClockStream(s, np.array([]), np.array([], np.int64), 1.0) for s in range(3)]
        traj = ex.evolve(cfg, streams, 1.0, [0.2, 0.7, 1.0])
        assert np.all(traj.snapshots == np.array([0, 2, 5]))

    def test_free_particle_accumulates_jump_sizes(self):
        cfg = ex.Configuration(0, np.array([0]))
        streams = make_streams([(0.3, 0, 2), (0.8, 0, 5)], [0])
        traj = ex.evolve(cfg, streams, 1.0, [0.5, 1.0])
        assert traj.snapshots[:, 0].tolist() == [2, 7]

    def test_hand_worked_three_particle_script(self):
        # events applied by hand with the jump rule:
        # (0.2, i=1, k=2) blocked -> (0,1,3); (0.5, i=3, k=1) free -> (0,1,4);
        # (0.7, i=1, k=4) blocked -> final (0,1,4)
        cfg = ex.Configuration(1, np.array([0, 1, 3]))
        streams = make_streams([(0.2, 1, 2), (0.5, 3, 1), (0.7, 1, 4)], [1, 2, 3])
        traj = ex.evolve(cfg, streams, 1.0, [0.3, 0.6, 1.0], record_events=True)
        assert traj.snapshots.tolist() == [[0, 1, 3], [0, 1, 4], [0, 1, 4]]
        assert traj.events.old_positions.tolist() == [0, 3, 0]
        assert traj.events.new_positions.tolist() == [0, 4, 0]
        assert traj.moved_count == 1

    def test_horizon_exceeded(self, tasep):
        cfg = ex.Configuration(0, np.array([0]))
        clocks = [ex.sample_clock_stream(tasep, 0, 1.0, 5)]
        with pytest.raises(ValueError, match="horizon exceeded"):
            ex.evolve(cfg, clocks, 2.0, [2.0])

    def test_clock_coverage_required(self, tasep):
        cfg = ex.Configuration(0, np.array([0, 2]))
        clocks = [ex.sample_clock_stream(tasep, 0, 1.0, 5)]
        with pytest.raises(ValueError, match="cover"):
            ex.evolve(cfg, clocks, 1.0, [1.0])

    def test_query_times_validated(self, tasep):
        cfg = ex.Configuration(0, np.array([0]))
        clocks = [ex.sample_clock_stream(tasep, 0, 1.0, 5)]
        with pytest.raises(ValueError):
            ex.evolve(cfg, clocks, 1.0, [1.0, 0.5])
        with pytest.raises(ValueError):
            ex.evolve(cfg, clocks, 1.0, [2.0])

    @settings(max_examples=40, deadline=None)
    @given(
        gaps=st.lists(st.integers(1, 4), min_size=1, max_size=8),
        moves=st.lists(
            st.tuples(st.integers(0, 7), st.integers(1, 5)), min_size=1, max_size=30
        ),
    )
    def test_matches_sequential_apply_jump(self, gaps, moves):
        # oracle: fold the single-jump rule over the events one at a time
        pos = np.cumsum(gaps).astype(np.int64)
        n = pos.size
        events = [
            (round(0.01 * (e + 1), 6), i % n, k) for e, (i, k) in enumerate(moves)
        ]
        cfg = ex.Configuration(0, pos.copy())
        ref = cfg
        for _, i, k in events:
            ref = ex.apply_jump(ref, i, k)
        streams = make_streams(events, range(n))
        traj = ex.evolve(cfg, streams, 1.0, [1.0])
        assert traj.final_positions.tolist() == ref.positions.tolist()
        ok, why = ex.validate(ref)
        assert ok, why

    def test_ordering_preserved_under_shared_clocks(self, longjump):
        # pointwise-min of two valid configurations is valid and stays below
        rng = np.random.default_rng(4)
        for trial in range(25):
            n = 30
            a = np.cumsum(rng.integers(1, 4, n)).astype(np.int64)
            b = np.cumsum(rng.integers(1, 4, n)).astype(np.int64) - 3
            lower = ex.Configuration(0, np.minimum(a, b))
            upper = ex.Configuration(0, a)
            clocks = ex.sample_clock_field(longjump, range(n), 4.0, 1000 + trial)
            qts = [1.0, 2.0, 3.0, 4.0]
            lo = ex.evolve(lower, clocks, 4.0, qts)
            hi = ex.evolve(upper, clocks, 4.0, qts)
            assert np.all(lo.snapshots <= hi.snapshots)

    def test_no_passing_monotonicity(self, longjump):
        cfg = ex.Configuration(0, np.arange(0, 40, 2, dtype=np.int64))
        clocks = ex.sample_clock_field(longjump, range(20), 5.0, 77)
        traj = ex.evolve(cfg, clocks, 5.0, np.linspace(0.5, 5.0, 10))
        assert np.all(np.diff(traj.snapshots, axis=0) >= 0)  # time-monotone
        for q in range(traj.snapshots.shape[0]):
            row = traj.snapshots[q]
            assert np.all(row[:-1] + 1 <= row[1:])  # ordering with unit spacing

    def test_free_particle_speed_statistic(self, longjump):
        # mean displacement of an unobstructed particle approaches the
        # first moment; compound-Poisson variance gives the band
        t, reps = 50.0, 200
        disp = np.empty(reps)
        for r in range(reps):
            cfg = ex.Configuration(0, np.array([0]))
            clocks = [ex.sample_clock_stream(longjump, 0, t, 5000 + r)]
            disp[r] = ex.evolve(cfg, clocks, t, [t]).final_positions[0]
        sd = math.sqrt(longjump.second_moment * t)
        band = 3 * sd / math.sqrt(reps)
        assert abs(disp.mean() - longjump.free_speed * t) <= band

    def test_event_rate_sanity(self, longjump):
        # total epochs over the window follow Poisson(B0 * window * t)
        window, t = 50, 20.0
        clocks = ex.sample_clock_field(longjump, range(window), t, 31337)
        total = sum(len(s) for s in clocks)
        lam = longjump.total_rate * window * t
        assert abs(total - lam) <= 3 * math.sqrt(lam)


class TestSandwich:
    def test_quiet_right_edge_gives_full_agreement(self):
        events = [(0.1, 0, 2), (0.4, 1, 1)]
        cfg = ex.Configuration(0, np.array([0, 3, 7]))
        streams = make_streams(events, [0, 1, 2])
        sw = ex.sandwich_evolve(cfg, streams, 1.0, [0.5, 1.0])
        assert sw.agreement_hi == 2
        assert np.array_equal(sw.upper.snapshots, sw.lower.snapshots)

    def test_lower_never_exceeds_upper(self, longjump):
        rng = np.random.default_rng(8)
        pos = np.cumsum(rng.integers(1, 4, 40)).astype(np.int64)
        cfg = ex.Configuration(0, pos)
        clocks = ex.sample_clock_field(longjump, range(40), 6.0, 606)
        sw = ex.sandwich_evolve(cfg, clocks, 6.0, np.linspace(1.0, 6.0, 6))
        assert np.all(sw.lower.snapshots <= sw.upper.snapshots)

    def test_agreement_window_recedes_with_time(self, tasep):
        # density-1/2 window; agreement over the query ladder shrinks in t
        pos = np.arange(0, 100, 2, dtype=np.int64)
        cfg = ex.Configuration(0, pos)
        clocks = ex.sample_clock_field(tasep, range(50), 5.0, 2121)
        his = []
        for t in (1.0, 2.0, 3.0, 4.0, 5.0):
            sw = ex.sandwich_evolve(cfg, clocks, t, np.arange(1.0, t + 0.5))
            his.append(sw.agreement_hi)
        assert all(a >= b for a, b in zip(his, his[1:]))
        assert his[-1] >= 0  # still nonempty at t = 5

    def test_infinite_right_tail_short_circuits(self):
        cfg = ex.Configuration(0, np.array([0, 4, ex.PLUS_INF]))
        streams = make_streams([(0.5, 1, 3)], [0, 1, 2])
        sw = ex.sandwich_evolve(cfg, streams, 1.0, [1.0])
        assert sw.agreement_hi == cfg.hi
        assert sw.upper.final_positions[1] == 7

    def test_empty_agreement_window_is_reported_not_raised(self):
        cfg = ex.Configuration(0, np.array([0]))
        streams = make_streams([(0.5, 0, 3)], [0])
        sw = ex.sandwich_evolve(cfg, streams, 1.0, [1.0])  # frozen phantom at 1
        assert sw.agreement_hi == -1
        assert sw.agreement_window == (0, -1)


class TestExportHelpers:
    def test_positions_to_float(self):
        arr = np.array([ex.MINUS_INF, -2, 5, ex.PLUS_INF])
        out = ex.positions_to_float(arr)
        assert out[0] == -np.inf and out[3] == np.inf
        assert out[1] == -2.0 and out[2] == 5.0

    def test_trajectory_csv_uses_inf_literals(self):
        cfg = ex.Configuration(-1, np.array([ex.MINUS_INF, 2, ex.PLUS_INF]))
        streams = [
            ex.ClockStream(s, np.array([]), np.array([], np.int64), 1.0)
            for s in (-1, 0, 1)
        ]
        traj = ex.evolve(cfg, streams, 1.0, [1.0])
        buf = io.StringIO()
        traj.write_csv(buf, replica=3)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "replica,time,index,position"
        assert lines[1].split(",") == ["3", "1.0", "-1", "-inf"]
        assert lines[3].split(",") == ["3", "1.0", "1", "inf"]
