"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are written to the real stdout, bypassing capture, so they show
in any pytest invocation.  Every experiment is seeded; reruns are bit-identical (criterion 10
checks exactly that by running each configured experiment twice and hashing
the output bytes).
"""

import hashlib
import sys
import time

import numpy as np
import pytest

import exclusim as ex
from exclusim.harness import RUNNERS, ExperimentConfig

SEED = 20260810


def _line(num, name, ok, detail):
    state = "PASS" if ok else "FAIL"
    # bypass capture so the line shows up in any pytest invocation
    print(f"ACCEPTANCE {num:02d} {name}: {state} ({detail})", file=sys.__stdout__)
    sys.__stdout__.flush()
    assert ok, f"criterion {num} ({name}) failed: {detail}"


def _coupling_params(**over):
    base = {
        "runs": 0,
        "particles": 100,
        "extra_particles": 60,
        "t": 8.0,
        "query_count": 8,
        "depth_margin": 4.0,
        "monotonicity_runs": 0,
        "monotonicity_wedges": 20,
        "monotonicity_depth": 200,
        "monotonicity_t": 10.0,
        "subadd_runs": 0,
        "subadd_depth": 200,
        "subadd_h": -20,
        "subadd_s": 10.0,
        "subadd_t": 10.0,
        "ordering_pairs": 0,
        "ordering_particles": 50,
        "ordering_t": 5.0,
    }
    base.update(over)
    return base


def _estimate_params(**over):
    base = {
        "n": 1000,
        "replicas": 20,
        "x_min": -1.5,
        "x_max": 0.0,
        "x_step": 0.1,
        "t_macro": 1.0,
        "compare": "none",
        "sup_tolerance": 0.05,
        "shape_tolerance": 0.05,
        "slope_tolerance": 0.05,
        "g0_lo": float("nan"),
        "g0_hi": float("nan"),
        "lipschitz_eps": 0.0,
        "lipschitz_tolerance": 0.05,
    }
    base.update(over)
    return base


def _theorem1_params(u0, x_min, x_max, g_source, tol, **over):
    base = {
        "u0": u0,
        "n": 1000,
        "t_macro": 1.0,
        "replicas": 4,
        "x_min": x_min,
        "x_max": x_max,
        "x_step": 0.1,
        "g_source": g_source,
        "sup_tolerance": tol,
    }
    base.update(over)
    return base


def criterion_configs(tasep, longjump, ghat_csv):
    """Every configured experiment the criteria run, keyed for reuse."""
    return {
        "identity_tasep": ExperimentConfig(
            "verify-coupling", SEED, tasep, _coupling_params(runs=10)
        ),
        "identity_longjump": ExperimentConfig(
            "verify-coupling", SEED, longjump, _coupling_params(runs=10)
        ),
        "mono_subadd": ExperimentConfig(
            "verify-coupling",
            SEED,
            tasep,
            _coupling_params(monotonicity_runs=20, subadd_runs=20),
        ),
        "ordering": ExperimentConfig(
            "verify-coupling", SEED, tasep, _coupling_params(ordering_pairs=100)
        ),
        "shape_tasep": ExperimentConfig(
            "estimate-g", SEED, tasep, _estimate_params(compare="tasep-analytic")
        ),
        "equilibrium": ExperimentConfig(
            "equilibrium-test",
            SEED,
            tasep,
            {
                "v": 2.0,
                "particles": 2000,
                "t": 1000.0,
                "replicas": 20,
                "rate_lo": 0.48,
                "rate_hi": 0.52,
                "gap_bins": 10,
                "gap_sigma": 3.0,
            },
        ),
        "conjugate": ExperimentConfig(
            "conjugate",
            SEED,
            tasep,
            {"g_source": "tasep-analytic", "v_min": 1.0, "v_max": 4.0, "v_step": 0.01},
        ),
        "solve": ExperimentConfig(
            "solve",
            SEED,
            tasep,
            {"u0": "linear:2", "g_source": "tasep-analytic", "x": 0.0, "t": 1.0},
        ),
        "theorem1_step": ExperimentConfig(
            "theorem1", SEED, tasep, _theorem1_params("step", -1.5, 0.0, "tasep-analytic", 0.07)
        ),
        "theorem1_riemann": ExperimentConfig(
            "theorem1",
            SEED,
            tasep,
            _theorem1_params("riemann:1,3", -1.0, 1.0, "tasep-analytic", 0.07),
        ),
        "theorem1_step_est": ExperimentConfig(
            "theorem1",
            SEED,
            tasep,
            _theorem1_params("step", -1.5, 0.0, f"csv:{ghat_csv}", 0.1),
        ),
        "theorem1_riemann_est": ExperimentConfig(
            "theorem1",
            SEED,
            tasep,
            _theorem1_params("riemann:1,3", -1.0, 1.0, f"csv:{ghat_csv}", 0.1),
        ),
        "shape_longjump": ExperimentConfig(
            "estimate-g",
            SEED,
            longjump,
            _estimate_params(
                replicas=10, g0_lo=1.4, g0_hi=1.6, lipschitz_eps=0.2
            ),
        ),
    }


def result_digest(result) -> str:
    h = hashlib.sha256(result.json_bytes(include_tables=False))
    for name in sorted(result.tables):
        h.update(result.table_csv_bytes(name))
    return h.hexdigest()


@pytest.fixture(scope="module")
def configs(tasep, longjump, ghat_csv_path):
    return criterion_configs(tasep, longjump, ghat_csv_path)


@pytest.fixture(scope="module")
def evidence():
    # digest of every experiment run once; criterion 10 reruns and compares
    return {}


def _run(configs, evidence, key):
    cfg = configs[key]
    res = RUNNERS[cfg.kind](cfg)
    evidence[key] = result_digest(res)
    return res


def test_criterion_01_coupling_exactness(configs, evidence):
    t0 = time.perf_counter()
    details = []
    ok = True
    for key in ("identity_tasep", "identity_longjump"):
        res = _run(configs, evidence, key)
        ident = res.payload["identity"]
        ok &= ident["equal"] == ident["checked"] == ident["certified"]
        ok &= ident["checked"] == 10 * 100 * 8
        details.append(f"{key}: {ident['equal']}/{ident['checked']} certified {ident['certified']}")
    dt = time.perf_counter() - t0
    ok &= dt < 30.0
    _line(1, "coupling exactness", ok, "; ".join(details) + f"; {dt:.1f}s < 30s")


def test_criterion_02_monotonicity_and_subadditivity(configs, evidence):
    t0 = time.perf_counter()
    res = _run(configs, evidence, "mono_subadd")
    mono = res.payload["monotonicity"]
    sub = res.payload["subadditivity"]
    dt = time.perf_counter() - t0
    ok = mono["violations"] == 0 and sub["violations"] == 0 and dt < 20.0
    ok = ok and mono["checked"] > 0 and sub["checked"] > 0
    _line(
        2,
        "wedge monotonicity + subadditivity",
        ok,
        f"monotonicity 0/{mono['checked']}, subadditivity 0/{sub['checked']}; {dt:.1f}s < 20s",
    )


def test_criterion_03_ordering(configs, evidence):
    t0 = time.perf_counter()
    res = _run(configs, evidence, "ordering")
    order = res.payload["ordering"]
    dt = time.perf_counter() - t0
    ok = order["violations"] == 0 and order["checked"] > 0 and dt < 10.0
    _line(3, "ordering under shared clocks", ok, f"0/{order['checked']} violations; {dt:.1f}s < 10s")


def test_criterion_04_tasep_shape(configs, evidence, tasep_shape_result):
    t0 = time.perf_counter()
    res = _run(configs, evidence, "shape_tasep")
    dt = time.perf_counter() - t0
    sup = res.payload["sup_distance_analytic"]
    ok = res.passed and sup <= 0.05 and dt < 120.0
    # the module fixture shares this config: same bytes expected already here
    ok = ok and result_digest(tasep_shape_result) == evidence["shape_tasep"]
    _line(4, "single-step shape vs closed form", ok, f"sup {sup:.4f} <= 0.05; {dt:.1f}s < 120s")


def test_criterion_05_equilibrium_tagged_particle(configs, evidence):
    t0 = time.perf_counter()
    res = _run(configs, evidence, "equilibrium")
    dt = time.perf_counter() - t0
    rate = res.payload["mean_rate"]
    verdicts = {v.name: v.passed for v in res.verdicts}
    ok = res.passed and 0.48 <= rate <= 0.52 and verdicts["gap_histogram"] and dt < 120.0
    _line(
        5,
        "equilibrium tagged particle",
        ok,
        f"rate {rate:.4f} in [0.48, 0.52], gaps 3-sigma ok; {dt:.1f}s < 120s",
    )


def test_criterion_06_duality_closed_forms(configs, evidence):
    t0 = time.perf_counter()
    res = _run(configs, evidence, "conjugate")
    g = ex.tasep_shape()
    v = np.linspace(1.0, 4.0, 301)
    conj_err = float(np.abs(ex.convex_conjugate(g, v).values - (1.0 / v - 1.0)).max())
    f1 = res.payload["f_at_1"]
    cur_max = res.payload["current_max"]
    cur_arg = res.payload["current_argmax_rho"]
    dt = time.perf_counter() - t0
    ok = (
        conj_err <= 1e-4
        and f1 == 0.0
        and abs(cur_max - 0.25) <= 1e-3
        and abs(cur_arg - 0.5) <= 1e-3
        and dt < 1.0
    )
    _line(
        6,
        "duality closed forms",
        ok,
        f"conj err {conj_err:.2e} <= 1e-4, f(1)={f1}, current {cur_max:.4f}@{cur_arg:.3f}; {dt:.2f}s < 1s",
    )


def test_criterion_07_hopf_lax_spot_value(configs, evidence):
    t0 = time.perf_counter()
    res = _run(configs, evidence, "solve")
    dt = time.perf_counter() - t0
    value = res.payload["value"]
    ok = abs(value - 0.5) <= 1e-4 and dt < 1.0
    _line(7, "variational spot value", ok, f"u(0,1) = {value!r} within 1e-4 of 0.5; {dt:.2f}s < 1s")


def test_criterion_08_end_to_end(configs, evidence):
    t0 = time.perf_counter()
    details = []
    ok = True
    for key, bound in (
        ("theorem1_step", 0.07),
        ("theorem1_riemann", 0.07),
        ("theorem1_step_est", 0.1),
        ("theorem1_riemann_est", 0.1),
    ):
        res = _run(configs, evidence, key)
        sup = res.payload["sup_distance"]
        ok &= res.passed and sup <= bound
        details.append(f"{key} sup {sup:.4f} <= {bound}")
    dt = time.perf_counter() - t0
    ok &= dt < 180.0
    _line(8, "end-to-end micro vs macro", ok, "; ".join(details) + f"; {dt:.1f}s < 180s")


def test_criterion_09_long_jump_properties(configs, evidence):
    t0 = time.perf_counter()
    res = _run(configs, evidence, "shape_longjump")
    dt = time.perf_counter() - t0
    verdicts = {v.name: v for v in res.verdicts}
    g0 = res.payload["g_at_zero"]
    needed = [
        "envelope_lower",
        "envelope_upper",
        "monotone",
        "slope_floor",
        "convex",
        "subadditive_pairs",
        "time_lipschitz",
        "g_at_zero_band",
    ]
    ok = all(verdicts[name].passed for name in needed) and 1.4 <= g0 <= 1.6 and dt < 120.0
    _line(
        9,
        "long-jump shape property suite",
        ok,
        f"g(0) = {g0:.4f} in [1.4, 1.6], all shape checks pass; {dt:.1f}s < 120s",
    )


def test_criterion_10_determinism(configs, evidence):
    t0 = time.perf_counter()
    mismatches = []
    for key, cfg in configs.items():
        first = evidence.get(key)
        if first is None:  # criterion ran in isolation: compute both sides
            first = result_digest(RUNNERS[cfg.kind](cfg))
        second = result_digest(RUNNERS[cfg.kind](cfg))
        if first != second:
            mismatches.append(key)
    dt = time.perf_counter() - t0
    ok = not mismatches
    _line(
        10,
        "determinism (rerun hash equality)",
        ok,
        f"{len(configs)} experiments rerun bit-identically; {dt:.1f}s"
        + (f"; mismatches: {mismatches}" if mismatches else ""),
    )
