import numpy as np
import pytest

import exclusim as ex
from exclusim.harness import ExperimentConfig, run_estimate_g

ACCEPT_SEED = 20260810


@pytest.fixture(scope="session")
def tasep():
    return ex.tasep_rates()


@pytest.fixture(scope="session")
def longjump():
    return ex.make_rate_table([(1, 0.6), (2, 0.3), (3, 0.1)])


@pytest.fixture(scope="session")
def accept_grid():
    return np.round(np.linspace(-1.5, 0.0, 16), 12)


@pytest.fixture(scope="session")
def tasep_shape_cfg(tasep):
    # the n = 1000 / 20-replica estimate reused by the shape and end-to-end tests
    return ExperimentConfig(
        kind="estimate-g",
        seed=ACCEPT_SEED,
        table=tasep,
        params={
            "n": 1000,
            "replicas": 20,
            "x_min": -1.5,
            "x_max": 0.0,
            "x_step": 0.1,
            "t_macro": 1.0,
            "compare": "tasep-analytic",
            "sup_tolerance": 0.05,
            "shape_tolerance": 0.05,
            "slope_tolerance": 0.05,
            "g0_lo": float("nan"),
            "g0_hi": float("nan"),
            "lipschitz_eps": 0.0,
            "lipschitz_tolerance": 0.05,
        },
    )


@pytest.fixture(scope="session")
def tasep_shape_result(tasep_shape_cfg):
    return run_estimate_g(tasep_shape_cfg)


@pytest.fixture(scope="session")
def ghat_csv_path(tmp_path_factory, tasep_shape_result):
    p = tmp_path_factory.mktemp("shape") / "ghat.csv"
    p.write_bytes(tasep_shape_result.table_csv_bytes("shape"))
    return p
