"""Shared fixtures: hand-built datasets and session-cached benchmarks.

The replicated benchmarks are expensive, so each configuration is run
once per session and shared between the module tests and the acceptance
suite.
"""

import numpy as np
import pytest

from trialbridge.bench import run_benchmark
from trialbridge.datamodel import CombinedDataset
from trialbridge.dgp import ScenarioConfig, generate

ACCEPTANCE_SEED = 42
ACCEPTANCE_REPS = 100


def make_dataset(
    trial_x,
    trial_a,
    trial_y,
    obs_x,
    obs_a=None,
    obs_y=None,
    design="non-nested",
    e1=0.5,
) -> CombinedDataset:
    trial_x = np.atleast_2d(np.asarray(trial_x, dtype=float))
    obs_x = np.atleast_2d(np.asarray(obs_x, dtype=float))
    n, m = trial_x.shape[0], obs_x.shape[0]
    obs_a = np.full(m, np.nan) if obs_a is None else np.asarray(obs_a, dtype=float)
    obs_y = np.full(m, np.nan) if obs_y is None else np.asarray(obs_y, dtype=float)
    return CombinedDataset(
        covariates=np.vstack([trial_x, obs_x]),
        treatment=np.concatenate([np.asarray(trial_a, dtype=float), obs_a]),
        outcome=np.concatenate([np.asarray(trial_y, dtype=float), obs_y]),
        in_trial=np.concatenate([np.ones(n, bool), np.zeros(m, bool)]),
        design=design,
        trial_propensity=e1,
    )


@pytest.fixture(scope="session")
def scenario1_dataset():
    return generate(ScenarioConfig(scenario="s1", seed=ACCEPTANCE_SEED))


@pytest.fixture(scope="session")
def bench_s1():
    config = ScenarioConfig(scenario="s1", seed=ACCEPTANCE_SEED)
    specs = ["dm", "ipsw", "ipsw_norm", "strat3", "strat10", "gformula", "cw", "aipsw", "acw"]
    return run_benchmark(config, specs, reps=ACCEPTANCE_REPS)


@pytest.fixture(scope="session")
def bench_s2sampling():
    config = ScenarioConfig(scenario="s2sampling", seed=ACCEPTANCE_SEED)
    return run_benchmark(
        config, ["ipsw", "ipsw_norm", "gformula", "cw", "aipsw", "acw"], reps=ACCEPTANCE_REPS
    )


@pytest.fixture(scope="session")
def bench_s2outcome():
    config = ScenarioConfig(scenario="s2outcome", seed=ACCEPTANCE_SEED)
    return run_benchmark(
        config, ["ipsw", "ipsw_norm", "gformula", "cw", "aipsw", "acw"], reps=ACCEPTANCE_REPS
    )


@pytest.fixture(scope="session")
def bench_s2both():
    config = ScenarioConfig(scenario="s2both", seed=ACCEPTANCE_SEED)
    return run_benchmark(
        config, ["ipsw", "ipsw_norm", "gformula", "cw", "aipsw", "acw"], reps=ACCEPTANCE_REPS
    )


@pytest.fixture(scope="session")
def bench_hidden():
    config = ScenarioConfig(scenario="hiddenmod", seed=ACCEPTANCE_SEED)
    return run_benchmark(config, ["ipsw_x1", "ipsw_nox1"], reps=ACCEPTANCE_REPS)


@pytest.fixture(scope="session")
def bench_homogeneous():
    config = ScenarioConfig(scenario="homogeneous", seed=ACCEPTANCE_SEED)
    return run_benchmark(config, ["dm"], reps=ACCEPTANCE_REPS)


@pytest.fixture(scope="session")
def bench_nested():
    config = ScenarioConfig(scenario="nested", seed=ACCEPTANCE_SEED)
    specs = [
        "nested_ipsw",
        "nested_ipsw_norm",
        "nested_gformula",
        "nested_aipsw",
        "nested_eff_tau1",
        "nested_eff_tau2",
    ]
    return run_benchmark(config, specs, reps=ACCEPTANCE_REPS)
