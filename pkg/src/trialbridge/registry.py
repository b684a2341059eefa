"""Name-based estimator dispatch with shared nuisance fitting.

Estimator specs are short strings (``dm``, ``ipsw``, ``ipsw_norm``,
``strat<L>``, ``gformula``, ``cw``, ``aipsw``, ``acw``, ``ipw_obs``,
``aipw_obs``, ``nested_*``, and the covariate-restricted ``ipsw_x1`` /
``ipsw_nox1`` variants).  ``estimate_many`` fits each nuisance model at
most once per dataset, which is what keeps replicated benchmarks cheap.
"""

from __future__ import annotations

import re

import numpy as np

from . import estimators as est
from .datamodel import CombinedDataset
from .errors import UnknownEstimator
from .nuisance import fit_logistic, moment_features
from .weights import assign_strata, entropy_balance, estimate_alpha

_STRAT_RE = re.compile(r"^strat(\d+)$")

BASE_SPECS = (
    "dm",
    "ipsw",
    "ipsw_norm",
    "strat10",
    "gformula",
    "cw",
    "aipsw",
    "acw",
)

NESTED_SPECS = (
    "nested_ipsw",
    "nested_ipsw_norm",
    "nested_gformula",
    "nested_aipsw",
    "nested_eff_tau1",
    "nested_eff_tau2",
)

OBS_SPECS = ("ipw_obs", "aipw_obs")

RESTRICTED_SPECS = ("ipsw_x1", "ipsw_nox1")

ALL_SPECS = BASE_SPECS + NESTED_SPECS + OBS_SPECS + RESTRICTED_SPECS


class _Nuisances:
    """Lazy per-dataset cache of fitted nuisance objects."""

    def __init__(self, ds: CombinedDataset, moment_spec: str = "x"):
        self.ds = ds
        self.moment_spec = moment_spec
        self._alpha = {}
        self._outcome = None
        self._calibration = None
        self._strata = {}
        self._obs_propensity = None
        self._obs_outcome = None
        self._nested_pi = None
        self._nested_eff = None

    def alpha(self, columns: tuple | None = None):
        if columns not in self._alpha:
            ds = self.ds if columns is None else self.ds.restrict(columns)
            self._alpha[columns] = estimate_alpha(ds)
        return self._alpha[columns]

    def outcome_models(self):
        if self._outcome is None:
            self._outcome = est.fit_outcome_models(self.ds)
        return self._outcome

    def calibration(self):
        if self._calibration is None:
            g_trial = moment_features(self.ds.trial_covariates, self.moment_spec)
            target = moment_features(self.ds.obs_covariates, self.moment_spec).mean(axis=0)
            self._calibration = entropy_balance(g_trial, target)
        return self._calibration

    def strata(self, n_strata: int):
        if n_strata not in self._strata:
            self._strata[n_strata] = assign_strata(self.alpha().model, self.ds, n_strata)
        return self._strata[n_strata]

    def obs_propensity(self):
        if self._obs_propensity is None:
            self._obs_propensity = est.fit_obs_propensity(self.ds)
        return self._obs_propensity

    def obs_outcome_models(self):
        if self._obs_outcome is None:
            self._obs_outcome = est.fit_obs_outcome_models(self.ds)
        return self._obs_outcome

    def nested_pi(self):
        if self._nested_pi is None:
            self._nested_pi = fit_logistic(
                self.ds.covariates, self.ds.in_trial.astype(float)
            )
        return self._nested_pi

    def nested_eff_nuisances(self):
        if self._nested_eff is None:
            self._nested_eff = est._nested_eff_nuisances(self.ds)
        return self._nested_eff


def _restricted_columns(spec: str, ds: CombinedDataset) -> tuple:
    if spec == "ipsw_x1":
        return (0,)
    return tuple(range(1, ds.p))


def _dispatch(spec: str, nuis: _Nuisances) -> est.AteEstimate:
    ds = nuis.ds
    if spec == "dm":
        return est.difference_in_means(ds)
    if spec == "ipsw":
        return est.ipsw(ds, nuis.alpha(), normalized=False)
    if spec == "ipsw_norm":
        return est.ipsw(ds, nuis.alpha(), normalized=True)
    if spec in RESTRICTED_SPECS:
        cols = _restricted_columns(spec, ds)
        value = est.ipsw(ds.restrict(cols), nuis.alpha(cols), normalized=False)
        return est.AteEstimate(value=value.value, estimator=spec)
    match = _STRAT_RE.match(spec)
    if match:
        result = est.stratification_estimate(ds, nuis.strata(int(match.group(1))))
        return est.AteEstimate(value=result.value, estimator=spec)
    if spec == "gformula":
        return est.g_formula(ds, nuis.outcome_models())
    if spec == "cw":
        return est.calibration_weighting(ds, nuis.calibration())
    if spec == "aipsw":
        return est.aipsw(ds, nuis.alpha(), nuis.outcome_models())
    if spec == "acw":
        return est.acw(ds, nuis.calibration(), nuis.outcome_models())
    if spec == "ipw_obs":
        return est.ipw_observational(ds, nuis.obs_propensity())
    if spec == "aipw_obs":
        return est.aipw_observational(ds, nuis.obs_propensity(), nuis.obs_outcome_models())
    if spec.startswith("nested_"):
        method = spec.removeprefix("nested_")
        eff = nuis.nested_eff_nuisances() if method.startswith("eff") else None
        return est.estimate_nested(
            ds,
            method,
            pi_model=nuis.nested_pi(),
            outcome_models=nuis.outcome_models(),
            eff_nuisances=eff,
        )
    raise UnknownEstimator(f"unknown estimator spec {spec!r}")


def estimate_many(
    ds: CombinedDataset, specs, moment_spec: str = "x"
) -> dict[str, est.AteEstimate]:
    """Run several estimators on one dataset, sharing fitted nuisances."""
    nuis = _Nuisances(ds, moment_spec=moment_spec)
    return {spec: _dispatch(spec, nuis) for spec in specs}


def estimate_one(ds: CombinedDataset, spec: str, moment_spec: str = "x") -> est.AteEstimate:
    return estimate_many(ds, [spec], moment_spec=moment_spec)[spec]
