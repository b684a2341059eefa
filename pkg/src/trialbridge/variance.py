"""Stratified nonparametric bootstrap confidence intervals.

Each replicate resamples the trial rows and the observational rows
independently, with replacement within each source, so the relative
sizes of the two samples are preserved.  Every nuisance model is refit
inside every replicate.  Replicates are driven by a counter-based
generator keyed on (seed, replicate index), so the procedure is
deterministic and safe to parallelize.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .datamodel import CombinedDataset
from .errors import AllReplicatesFailed, TrialbridgeError
from .registry import estimate_one


@dataclass(frozen=True)
class EstimateWithCI:
    """Point estimate with a percentile bootstrap confidence interval."""

    point: float
    lower: float
    upper: float
    n_replicates: int
    seed: int
    failures: int
    estimator: str


def _replicate_rng(seed: int, index: int) -> np.random.Generator:
    key = np.array([seed % 2**64, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _canonical_order(rows: np.ndarray) -> np.ndarray:
    """Lexicographic row order, so the CI depends on the row multiset only."""
    return np.lexsort(rows.T[::-1])


def stratified_bootstrap(
    ds: CombinedDataset,
    spec: str,
    n_replicates: int = 100,
    seed: int = 0,
    moment_spec: str = "x",
) -> EstimateWithCI:
    """Percentile bootstrap CI for any registered estimator.

    Replicates that fail structurally (an arm or stratum emptied by the
    resampling) are skipped and counted; the interval is computed over
    the survivors.
    """
    if n_replicates < 2:
        raise ValueError("need at least 2 bootstrap replicates")

    point = estimate_one(ds, spec, moment_spec=moment_spec).value

    trial_rows = np.column_stack(
        [ds.trial_covariates, ds.trial_treatment, ds.trial_outcome]
    )
    obs_rows = np.column_stack([ds.obs_covariates, ds.obs_treatment, ds.obs_outcome])
    trial_rows = trial_rows[_canonical_order(trial_rows)]
    obs_rows = obs_rows[_canonical_order(obs_rows)]
    n, m, p = ds.n, ds.m, ds.p

    values = []
    failures = 0
    for b in range(n_replicates):
        rng = _replicate_rng(seed, b)
        t_idx = rng.integers(0, n, size=n)
        o_idx = rng.integers(0, m, size=m)
        t = trial_rows[t_idx]
        o = obs_rows[o_idx]
        resampled = replace(
            ds,
            covariates=np.vstack([t[:, :p], o[:, :p]]),
            treatment=np.concatenate([t[:, p], o[:, p]]),
            outcome=np.concatenate([t[:, p + 1], o[:, p + 1]]),
            in_trial=np.concatenate([np.ones(n, bool), np.zeros(m, bool)]),
        )
        try:
            values.append(estimate_one(resampled, spec, moment_spec=moment_spec).value)
        except TrialbridgeError:
            failures += 1
    if not values:
        raise AllReplicatesFailed(f"all {n_replicates} replicates failed for {spec}")

    lower, upper = np.percentile(np.sort(values), [2.5, 97.5])
    return EstimateWithCI(
        point=point,
        lower=float(lower),
        upper=float(upper),
        n_replicates=n_replicates,
        seed=seed,
        failures=failures,
        estimator=spec,
    )
