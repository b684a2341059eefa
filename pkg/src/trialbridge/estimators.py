"""Point estimators of the target-population average treatment effect.

The non-nested estimators combine a randomized trial with an
observational covariate sample: inverse-odds weighting (plain and
normalized), selection-score stratification, outcome regression
(g-formula), calibration weighting, and their augmented doubly robust
combinations.  Nested-design variants, classical observational IPW/AIPW
and a bias-function deconfounder for observational CATE models round
out the set.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .datamodel import NESTED, CombinedDataset
from .errors import (
    EmptyArm,
    ExtremePropensity,
    MissingTreatmentOutcome,
    NotNested,
    ZeroWeightSum,
)
from .nuisance import LinearModelFit, LogisticModelFit, add_intercept, fit_logistic, fit_ols
from .weights import StrataAssignment, WeightVector


@dataclass(frozen=True)
class AteEstimate:
    """A single average-treatment-effect estimate with provenance."""

    value: float
    estimator: str
    diagnostics: dict | None = None


@dataclass(frozen=True)
class CateModel:
    """Linear conditional-treatment-effect surface tau(x) = c0 + c'x."""

    coefficients: np.ndarray
    provenance: str

    def predict(self, X: np.ndarray) -> np.ndarray:
        return add_intercept(X) @ self.coefficients


# -- trial-side helpers -----------------------------------------------------


def _trial_contrast(ds: CombinedDataset) -> np.ndarray:
    """Per-trial-unit randomization contrast (A/e1 - (1-A)/(1-e1)) * Y."""
    a = ds.trial_treatment
    e1 = ds.e1
    return (a / e1 - (1.0 - a) / (1.0 - e1)) * ds.trial_outcome


def fit_outcome_models(ds: CombinedDataset) -> tuple[LinearModelFit, LinearModelFit]:
    """Arm-wise OLS outcome models fitted on the trial sample."""
    x = ds.trial_covariates
    a = ds.trial_treatment
    y = ds.trial_outcome
    treated = fit_ols(x[a == 1], y[a == 1], arm="treated")
    control = fit_ols(x[a == 0], y[a == 0], arm="control")
    return treated, control


# -- trial-only and weighting estimators ------------------------------------


def difference_in_means(ds: CombinedDataset) -> AteEstimate:
    """Unadjusted trial contrast: mean(Y | A=1, trial) - mean(Y | A=0, trial)."""
    a = ds.trial_treatment
    y = ds.trial_outcome
    if not (a == 1).any() or not (a == 0).any():
        raise EmptyArm("both trial arms must be non-empty")
    value = float(y[a == 1].mean() - y[a == 0].mean())
    return AteEstimate(value=value, estimator="dm")


def ipsw(ds: CombinedDataset, alpha: WeightVector, normalized: bool = False) -> AteEstimate:
    """Inverse-probability-of-sampling weighting.

    The plain form averages (n/m) * Y_i / alpha_hat(X_i) times the
    randomization contrast over trial units.  The normalized (Hajek)
    form divides each arm's weighted outcome sum by that arm's weight
    sum, which removes the sensitivity to the overall weight scale.
    """
    a = ds.trial_treatment
    y = ds.trial_outcome
    e1 = ds.e1
    w = 1.0 / np.asarray(alpha.values, dtype=float)
    if normalized:
        w1 = a * w / e1
        w0 = (1.0 - a) * w / (1.0 - e1)
        if w1.sum() <= 0 or w0.sum() <= 0:
            raise ZeroWeightSum("an arm has zero total weight")
        value = float(w1 @ y / w1.sum() - w0 @ y / w0.sum())
    else:
        ratio = ds.n / ds.m
        contrast = (a / e1 - (1.0 - a) / (1.0 - e1)) * y
        value = float(np.mean(ratio * w * contrast))
    name = "ipsw_norm" if normalized else "ipsw"
    return AteEstimate(value=value, estimator=name, diagnostics={"normalized": normalized})


def stratification_estimate(ds: CombinedDataset, strata: StrataAssignment) -> AteEstimate:
    """Observational-share-weighted sum of within-stratum trial contrasts."""
    a = ds.trial_treatment
    y = ds.trial_outcome
    m = ds.m
    value = 0.0
    for label in range(1, strata.n_strata + 1):
        in_l = strata.trial_stratum == label
        m_l = int((strata.obs_stratum == label).sum())
        treated = in_l & (a == 1)
        control = in_l & (a == 0)
        if not treated.any() or not control.any():
            raise EmptyArm(f"stratum {label} lost a trial arm")
        value += (m_l / m) * (y[treated].mean() - y[control].mean())
    return AteEstimate(value=float(value), estimator=f"strat{strata.n_strata}")


def g_formula(
    ds: CombinedDataset,
    outcome_models: tuple[LinearModelFit, LinearModelFit] | None = None,
) -> AteEstimate:
    """Outcome-regression estimate: trial-fitted arm models averaged over
    the observational covariate sample."""
    treated, control = outcome_models or fit_outcome_models(ds)
    x_obs = ds.obs_covariates
    value = float(np.mean(treated.predict(x_obs) - control.predict(x_obs)))
    return AteEstimate(value=value, estimator="gformula")


def calibration_weighting(ds: CombinedDataset, cw: WeightVector) -> AteEstimate:
    """Calibration-weighted trial contrast using entropy-balancing weights."""
    value = float(np.asarray(cw.values) @ _trial_contrast(ds))
    return AteEstimate(value=value, estimator="cw")


def aipsw(
    ds: CombinedDataset,
    alpha: WeightVector,
    outcome_models: tuple[LinearModelFit, LinearModelFit] | None = None,
) -> AteEstimate:
    """Augmented IPSW: inverse-odds-weighted outcome-model residuals on the
    trial side plus the g-formula term on the observational side.

    Consistent when either the selection odds model or the outcome
    models are correctly specified.
    """
    treated, control = outcome_models or fit_outcome_models(ds)
    a = ds.trial_treatment
    y = ds.trial_outcome
    e1 = ds.e1
    x_trial = ds.trial_covariates
    w = (ds.n / ds.m) / np.asarray(alpha.values, dtype=float)
    resid = a * (y - treated.predict(x_trial)) / e1 - (1.0 - a) * (
        y - control.predict(x_trial)
    ) / (1.0 - e1)
    trial_term = float(np.mean(w * resid))
    obs_term = g_formula(ds, (treated, control)).value
    return AteEstimate(value=trial_term + obs_term, estimator="aipsw")


def acw(
    ds: CombinedDataset,
    cw: WeightVector,
    outcome_models: tuple[LinearModelFit, LinearModelFit] | None = None,
) -> AteEstimate:
    """Augmented calibration weighting: like AIPSW with the inverse-odds
    trial weights replaced by the calibration weights."""
    treated, control = outcome_models or fit_outcome_models(ds)
    a = ds.trial_treatment
    y = ds.trial_outcome
    e1 = ds.e1
    x_trial = ds.trial_covariates
    resid = a * (y - treated.predict(x_trial)) / e1 - (1.0 - a) * (
        y - control.predict(x_trial)
    ) / (1.0 - e1)
    trial_term = float(np.asarray(cw.values) @ resid)
    obs_term = g_formula(ds, (treated, control)).value
    return AteEstimate(value=trial_term + obs_term, estimator="acw")


# -- purely observational estimators ----------------------------------------


def _require_obs_records(ds: CombinedDataset):
    if not ds.obs_has_treatment_outcome():
        raise MissingTreatmentOutcome(
            "observational rows must carry treatment and outcome"
        )


def _check_propensity(e_hat: np.ndarray):
    if (e_hat < 1e-3).any() or (e_hat > 1.0 - 1e-3).any():
        warnings.warn(
            "fitted treatment probabilities outside [1e-3, 1 - 1e-3]",
            ExtremePropensity,
            stacklevel=3,
        )


def fit_obs_propensity(ds: CombinedDataset) -> LogisticModelFit:
    _require_obs_records(ds)
    return fit_logistic(ds.obs_covariates, ds.obs_treatment)


def ipw_observational(
    ds: CombinedDataset, propensity: LogisticModelFit | None = None
) -> AteEstimate:
    """Classical inverse-propensity weighting on the observational rows."""
    _require_obs_records(ds)
    model = propensity or fit_obs_propensity(ds)
    x = ds.obs_covariates
    a = ds.obs_treatment
    y = ds.obs_outcome
    e_hat = model.predict_proba(x)
    _check_propensity(e_hat)
    value = float(np.mean(a * y / e_hat - (1.0 - a) * y / (1.0 - e_hat)))
    return AteEstimate(value=value, estimator="ipw_obs")


def fit_obs_outcome_models(ds: CombinedDataset) -> tuple[LinearModelFit, LinearModelFit]:
    _require_obs_records(ds)
    x = ds.obs_covariates
    a = ds.obs_treatment
    y = ds.obs_outcome
    treated = fit_ols(x[a == 1], y[a == 1], arm="treated")
    control = fit_ols(x[a == 0], y[a == 0], arm="control")
    return treated, control


def aipw_observational(
    ds: CombinedDataset,
    propensity: LogisticModelFit | None = None,
    outcome_models: tuple[LinearModelFit, LinearModelFit] | None = None,
) -> AteEstimate:
    """Doubly robust AIPW on the observational rows."""
    _require_obs_records(ds)
    model = propensity or fit_obs_propensity(ds)
    treated, control = outcome_models or fit_obs_outcome_models(ds)
    x = ds.obs_covariates
    a = ds.obs_treatment
    y = ds.obs_outcome
    e_hat = model.predict_proba(x)
    _check_propensity(e_hat)
    mu1 = treated.predict(x)
    mu0 = control.predict(x)
    value = float(
        np.mean(a * (y - mu1) / e_hat - (1.0 - a) * (y - mu0) / (1.0 - e_hat) + mu1 - mu0)
    )
    return AteEstimate(value=value, estimator="aipw_obs")


# -- nested design -----------------------------------------------------------

NESTED_METHODS = ("ipsw", "ipsw_norm", "gformula", "aipsw", "eff_tau1", "eff_tau2")


def estimate_nested(
    ds: CombinedDataset,
    method: str,
    pi_model: LogisticModelFit | None = None,
    outcome_models: tuple[LinearModelFit, LinearModelFit] | None = None,
    target: str = "population",
    eff_nuisances=None,
) -> AteEstimate:
    """Estimators for the nested design, where the trial is embedded in a
    cohort and the selection probability is directly estimable.

    ``gformula`` averages the trial-fitted arm contrast over the whole
    cohort by default; ``target="nonrandomized"`` switches to the S=0
    subpopulation.  ``eff_tau1`` and ``eff_tau2`` are the influence-
    function-based estimators of the trial-population and whole-cohort
    effects; both need treatment and outcome on the S=0 rows.
    """
    if ds.design != NESTED:
        raise NotNested("nested estimators need a nested-design dataset")
    if method not in NESTED_METHODS:
        raise ValueError(f"unknown nested method {method!r}")

    n, m = ds.n, ds.m
    s = ds.in_trial.astype(float)
    model = pi_model or fit_logistic(ds.covariates, s)
    pi_trial = model.predict_proba(ds.trial_covariates)
    a = ds.trial_treatment
    y = ds.trial_outcome
    e1 = ds.e1

    if method == "ipsw":
        share = n / (n + m)
        value = float(
            np.mean(share * a * y / (pi_trial * e1))
            - np.mean(share * (1.0 - a) * y / (pi_trial * (1.0 - e1)))
        )
        return AteEstimate(value=value, estimator="nested_ipsw")

    if method == "ipsw_norm":
        w1 = a / (pi_trial * e1)
        w0 = (1.0 - a) / (pi_trial * (1.0 - e1))
        if w1.sum() <= 0 or w0.sum() <= 0:
            raise ZeroWeightSum("an arm has zero total weight")
        value = float(w1 @ y / w1.sum() - w0 @ y / w0.sum())
        return AteEstimate(value=value, estimator="nested_ipsw_norm")

    treated, control = outcome_models or fit_outcome_models(ds)

    if method == "gformula":
        x_target = ds.covariates if target == "population" else ds.obs_covariates
        value = float(np.mean(treated.predict(x_target) - control.predict(x_target)))
        return AteEstimate(value=value, estimator="nested_gformula")

    if method == "aipsw":
        resid1 = s[ds.in_trial] * a * (y - treated.predict(ds.trial_covariates))
        resid0 = s[ds.in_trial] * (1.0 - a) * (y - control.predict(ds.trial_covariates))
        total = n + m
        trial_term = float(
            resid1 @ (1.0 / (pi_trial * e1)) / total
            - resid0 @ (1.0 / (pi_trial * (1.0 - e1))) / total
        )
        obs_term = float(
            np.mean(treated.predict(ds.covariates) - control.predict(ds.covariates))
        )
        return AteEstimate(value=trial_term + obs_term, estimator="nested_aipsw")

    # influence-function estimators require full records on the cohort
    if np.isnan(ds.treatment).any() or np.isnan(ds.outcome).any():
        raise MissingTreatmentOutcome(
            "efficient nested estimators need treatment and outcome on all rows"
        )
    return _nested_efficient(ds, method, model, eff_nuisances or _nested_eff_nuisances(ds))


def _nested_eff_nuisances(ds: CombinedDataset):
    """Cohort-wide nuisances for the influence-function estimators: the
    known trial propensity on S=1 rows, a logistic fit on S=0 rows, and
    arm-wise outcome models fitted on the full cohort."""
    s = ds.in_trial
    e_hat = np.empty(ds.n + ds.m)
    e_hat[s] = ds.e1
    obs_prop = fit_logistic(ds.obs_covariates, ds.obs_treatment)
    e_hat[~s] = obs_prop.predict_proba(ds.obs_covariates)
    x = ds.covariates
    a_all = ds.treatment
    y_all = ds.outcome
    mu1 = fit_ols(x[a_all == 1], y_all[a_all == 1], arm="treated")
    mu0 = fit_ols(x[a_all == 0], y_all[a_all == 0], arm="control")
    return e_hat, mu1, mu0


def _nested_efficient(
    ds: CombinedDataset, method: str, pi_model: LogisticModelFit, nuisances
) -> AteEstimate:
    x = ds.covariates
    a_all = ds.treatment
    y_all = ds.outcome
    s = ds.in_trial
    n = ds.n

    e_hat, mu1, mu0 = nuisances
    mu1_x = mu1.predict(x)
    mu0_x = mu0.predict(x)

    if method == "eff_tau2":
        value = float(
            np.mean(
                a_all * (y_all - mu1_x) / e_hat
                - (1.0 - a_all) * (y_all - mu0_x) / (1.0 - e_hat)
                + mu1_x
                - mu0_x
            )
        )
        return AteEstimate(value=value, estimator="nested_eff_tau2")

    pi_s = pi_model.predict_proba(x)
    s_num = s.astype(float)
    term1 = pi_s * a_all * y_all / e_hat + (s_num - a_all * pi_s / e_hat) * mu1_x
    term0 = pi_s * (1.0 - a_all) * y_all / (1.0 - e_hat) + (
        s_num - (1.0 - a_all) * pi_s / (1.0 - e_hat)
    ) * mu0_x
    value = float(np.sum(term1 - term0) / n)
    return AteEstimate(value=value, estimator="nested_eff_tau1")


# -- deconfounding an observational CATE with trial data ---------------------


def fit_observational_cate(ds: CombinedDataset) -> CateModel:
    """T-learner CATE from the observational rows: arm-wise OLS difference.

    With unmeasured confounding in the observational sample this surface
    is biased; see :func:`deconfound_cate`.
    """
    treated, control = fit_obs_outcome_models(ds)
    return CateModel(
        coefficients=treated.coefficients - control.coefficients,
        provenance="observational",
    )


def deconfound_cate(obs_cate: CateModel, ds: CombinedDataset) -> CateModel:
    """Correct an observational CATE surface using randomized trial rows.

    Builds the propensity-transformed outcome Y* = (A/e1 - (1-A)/(1-e1)) Y
    on the trial rows, whose conditional mean is the true CATE, and fits
    the gap Y* - obs_cate(X) with an affine function of the covariates.
    The returned surface adds that fitted correction to the input model,
    so it extrapolates linearly outside the trial support.
    """
    x_trial = ds.trial_covariates
    y_star = _trial_contrast(ds)
    gap = y_star - obs_cate.predict(x_trial)
    correction = fit_ols(x_trial, gap, arm="pooled")
    return CateModel(
        coefficients=obs_cate.coefficients + correction.coefficients,
        provenance="deconfounded",
    )


def average_cate(model: CateModel, X: np.ndarray) -> float:
    """Population-averaged treatment effect implied by a CATE surface."""
    return float(np.mean(model.predict(X)))
