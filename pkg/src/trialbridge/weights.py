"""Trial-unit weighting schemes: selection odds, calibration, strata.

Three objects come out of here: inverse-selection-odds weights from a
trial-vs-observational logistic discriminator, entropy-minimizing
calibration weights matching target moments, and quantile strata of the
estimated odds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datamodel import CombinedDataset
from .errors import Diverged, EmptyStratum, Infeasible, RankDeficientMoments
from .nuisance import LogisticModelFit, fit_logistic

ODDS_ALPHA = "odds-alpha"
CALIBRATION = "calibration"


@dataclass(frozen=True)
class WeightVector:
    """Per-trial-unit weights plus provenance.

    Odds weights hold alpha_hat(x) = p_hat/(1 - p_hat) from the
    discriminating logistic model; calibration weights sum to one.
    """

    values: np.ndarray
    kind: str
    normalized: bool
    model: LogisticModelFit | None = None
    duals: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(values)) or not np.all(values > 0):
            raise ValueError("weights must be finite and strictly positive")
        object.__setattr__(self, "values", values)
        values.setflags(write=False)


@dataclass(frozen=True)
class StrataAssignment:
    """Quantile strata of the estimated selection odds.

    Stratum indices are 1-based.  ``n_strata`` counts the strata that
    survive breakpoint deduplication and are actually populated.
    """

    trial_stratum: np.ndarray
    obs_stratum: np.ndarray
    n_strata: int
    breakpoints: np.ndarray = field(repr=False)


def estimate_alpha(ds: CombinedDataset, capped_at: float | None = None) -> WeightVector:
    """Estimate the conditional trial-membership odds for each trial unit.

    Fits a logistic model discriminating trial from observational rows
    on the pooled covariates and returns alpha_hat(X_i) for trial rows.
    The fitted model is kept for reuse on observational rows.  An
    optional quantile cap truncates the implied inverse-odds weights.
    """
    model = fit_logistic(ds.covariates, ds.in_trial.astype(float))
    if model.diverged:
        raise Diverged("trial membership is perfectly separable from covariates")
    alpha = model.predict_odds(ds.trial_covariates)
    if capped_at is not None:
        # cap on the inverse-odds scale: floor alpha at its (1-q) quantile
        floor = np.quantile(alpha, 1.0 - capped_at)
        alpha = np.maximum(alpha, floor)
    return WeightVector(values=alpha, kind=ODDS_ALPHA, normalized=False, model=model)


def entropy_balance(
    trial_g: np.ndarray,
    target_moments: np.ndarray,
    max_iter: int = 500,
    tol: float = 1e-8,
) -> WeightVector:
    """Entropy-minimizing weights matching the target moments exactly.

    Solves min sum w_i log w_i subject to w >= 0, sum w = 1 and
    sum w_i g(X_i) = target via the dual: w_i proportional to
    exp(lambda . g(X_i)).  Newton iterations on the dual stop when the
    balance residual is below `tol` in the max norm.
    """
    g = np.asarray(trial_g, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    target = np.asarray(target_moments, dtype=float).ravel()
    n, k = g.shape
    if target.shape != (k,):
        raise ValueError("target length must match moment columns")
    centered = g - g.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-12 * max(1.0, np.abs(g).max())) < k:
        raise RankDeficientMoments("moment matrix has collinear columns")

    h = g - target
    lam = np.zeros(k)
    for _ in range(max_iter):
        z = h @ lam
        z -= z.max()
        w = np.exp(z)
        w /= w.sum()
        resid = w @ h
        if np.max(np.abs(resid)) < tol:
            weights = w / w.sum()
            return WeightVector(
                values=weights, kind=CALIBRATION, normalized=True, duals=lam
            )
        cov = (h * w[:, None]).T @ h - np.outer(resid, resid)
        try:
            step = np.linalg.solve(cov, -resid)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(cov, -resid, rcond=None)
        norm0 = np.linalg.norm(resid)
        scale = 1.0
        for _ in range(60):
            cand = lam + scale * step
            zc = h @ cand
            zc -= zc.max()
            wc = np.exp(zc)
            wc /= wc.sum()
            if np.linalg.norm(wc @ h) < norm0:
                break
            scale *= 0.5
        lam = lam + scale * step
        if np.linalg.norm(lam) > 1e6:
            raise Infeasible("target moments outside the convex hull of the sample")
    raise Infeasible("dual iteration did not reach the balance tolerance")


def assign_strata(
    alpha_model: LogisticModelFit, ds: CombinedDataset, n_strata: int
) -> StrataAssignment:
    """Group all units into quantile strata of the estimated odds.

    Breakpoints are the L-1 empirical quantiles of alpha_hat over the
    concatenated sample; duplicated breakpoints are removed, so on
    discrete or constant scores the effective number of strata shrinks.
    Raises EmptyStratum when a surviving stratum lacks a treated trial
    unit, a control trial unit, or any observational unit.
    """
    if n_strata < 2:
        raise ValueError("need at least 2 strata")
    alpha_all = alpha_model.predict_odds(ds.covariates)
    quantiles = np.quantile(alpha_all, np.arange(1, n_strata) / n_strata)
    breakpoints = np.unique(quantiles)

    raw = np.searchsorted(breakpoints, alpha_all, side="left")
    used = np.unique(raw)
    remap = {int(code): rank + 1 for rank, code in enumerate(used)}
    stratum = np.array([remap[int(c)] for c in raw])
    trial_stratum = stratum[ds.in_trial]
    obs_stratum = stratum[~ds.in_trial]

    a = ds.trial_treatment
    for label in range(1, len(used) + 1):
        in_l = trial_stratum == label
        if not (in_l & (a == 1)).any():
            raise EmptyStratum(f"stratum {label} has no treated trial unit")
        if not (in_l & (a == 0)).any():
            raise EmptyStratum(f"stratum {label} has no control trial unit")
        if not (obs_stratum == label).any():
            raise EmptyStratum(f"stratum {label} has no observational unit")

    return StrataAssignment(
        trial_stratum=trial_stratum,
        obs_stratum=obs_stratum,
        n_strata=len(used),
        breakpoints=breakpoints,
    )
