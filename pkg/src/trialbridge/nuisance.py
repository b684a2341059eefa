"""Parametric nuisance models: OLS outcome regressions and logistic fits.

Everything here is deliberately plain: intercept-augmented design
matrices, closed-form least squares, and Newton-Raphson with
step-halving for the logistic likelihoods.  Fitted objects are frozen
and safe to share across parallel replications.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import CombinedDataset
from .errors import NoObservationalRows, NonConvergence, SingleClass

MLE = "mle"
MODIFIED_MLE = "modified-mle"
ESTIMATING_EQ = "estimating-eq"

_PROB_FLOOR = np.finfo(float).tiny
_PROB_CEIL = np.nextafter(1.0, 0.0)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function with outputs strictly in (0, 1)."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return np.clip(out, _PROB_FLOOR, _PROB_CEIL)


def add_intercept(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.column_stack([np.ones(X.shape[0]), X])


def moment_features(X: np.ndarray, spec: str = "x") -> np.ndarray:
    """Build a moment matrix from a covariate matrix.

    `spec` is a comma-separated list of terms: ``x`` for the raw
    covariates, ``x^2`` for their squares (e.g. ``"x,x^2"``).  No
    constant column is included; callers add one where needed.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    blocks = []
    for term in spec.split(","):
        term = term.strip().lower()
        if term == "x":
            blocks.append(X)
        elif term == "x^2":
            blocks.append(X**2)
        else:
            raise ValueError(f"unknown moment term {term!r}")
    return np.column_stack(blocks)


@dataclass(frozen=True)
class LinearModelFit:
    """OLS fit: intercept-first coefficients plus diagnostics."""

    coefficients: np.ndarray
    residual_variance: float
    arm: str = "pooled"
    rank_deficient: bool = False

    def predict(self, X: np.ndarray) -> np.ndarray:
        return add_intercept(X) @ self.coefficients


@dataclass(frozen=True)
class LogisticModelFit:
    """Logistic fit: intercept-first coefficients plus solver diagnostics.

    ``feature_spec`` records the moment map applied to raw covariates
    before the intercept (plain covariates by default).
    """

    coefficients: np.ndarray
    converged: bool
    iterations: int
    method: str = MLE
    diverged: bool = False
    feature_spec: str = "x"

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        features = moment_features(X, self.feature_spec)
        return sigmoid(add_intercept(features) @ self.coefficients)

    def predict_odds(self, X: np.ndarray) -> np.ndarray:
        p = self.predict_proba(X)
        return p / (1.0 - p)


def fit_ols(X: np.ndarray, y: np.ndarray, arm: str = "pooled") -> LinearModelFit:
    """Least-squares fit of y on (1, X).

    Rank-deficient designs fall back to a tiny ridge (lambda = 1e-8) on
    the normal equations so the pipeline stays total; the condition is
    reported in the fit diagnostics.
    """
    design = add_intercept(X)
    y = np.asarray(y, dtype=float)
    rows, cols = design.shape
    if rows < cols:
        raise ValueError(f"need at least {cols} rows, got {rows}")
    beta, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    rank_deficient = rank < cols
    if rank_deficient:
        gram = design.T @ design + 1e-8 * np.eye(cols)
        beta = np.linalg.solve(gram, design.T @ y)
    resid = y - design @ beta
    dof = max(rows - cols, 1)
    return LinearModelFit(
        coefficients=beta,
        residual_variance=float(resid @ resid / dof),
        arm=arm,
        rank_deficient=rank_deficient,
    )


def fit_logistic(
    X: np.ndarray,
    labels: np.ndarray,
    max_iter: int = 100,
    score_tol: float = 1e-10,
    method: str = MLE,
) -> LogisticModelFit:
    """Newton-Raphson maximum likelihood for a binary logistic model.

    Convergence: max |score component| < `score_tol`.  Perfect
    separation marks the fit as diverged; it shows up either as a
    coefficient norm above 1e4 or as every fitted probability
    saturating at its label (the score then underflows the tolerance
    even though the likelihood has no interior maximum).  The caller
    decides how to react.
    """
    design = add_intercept(X)
    y = np.asarray(labels, dtype=float)
    if y.min() == y.max():
        raise SingleClass("labels contain a single class")

    beta = np.zeros(design.shape[1])
    loglik = _logistic_loglik(design, y, beta)
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        p = sigmoid(design @ beta)
        score = design.T @ (y - p)
        if np.max(np.abs(score)) < score_tol:
            converged = True
            break
        w = p * (1.0 - p)
        hessian = design.T @ (design * w[:, None])
        step = _solve_spd(hessian, score)
        # step-halving keeps the likelihood monotone near separation
        scale = 1.0
        for _ in range(40):
            candidate = beta + scale * step
            cand_ll = _logistic_loglik(design, y, candidate)
            if cand_ll >= loglik:
                break
            scale *= 0.5
        beta = beta + scale * step
        loglik = _logistic_loglik(design, y, beta)
        if np.linalg.norm(beta) > 1e4:
            break
    saturated = bool(np.max(np.abs(y - sigmoid(design @ beta))) < 1e-6)
    diverged = np.linalg.norm(beta) > 1e4 or saturated
    return LogisticModelFit(
        coefficients=beta,
        converged=converged and not diverged,
        iterations=iterations,
        method=method,
        diverged=diverged,
    )


def _logistic_loglik(design: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    z = design @ beta
    return float(y @ z - np.logaddexp(0.0, z).sum())


def _solve_spd(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(matrix, rhs)
    except np.linalg.LinAlgError:
        jitter = 1e-10 * max(1.0, float(np.trace(matrix)) / matrix.shape[0])
        return np.linalg.solve(matrix + jitter * np.eye(matrix.shape[0]), rhs)


def fit_sampling_score(
    ds: CombinedDataset,
    method: str = MODIFIED_MLE,
    N: int | None = None,
    g: str = "x",
    max_iter: int = 200,
    tol: float = 1e-8,
) -> LogisticModelFit:
    """Fit a logistic selection-score model pi(x) = sigmoid(a0 + a1'x).

    Three routes:

    * ``MLE``: plain logistic regression of the in-trial label on the
      concatenated covariates.  This targets the probability of being a
      trial row within the pooled sample, not the population selection
      probability.
    * ``MODIFIED_MLE``: maximizes the trial-sample linear term scaled by
      the population size while the log-partition term is averaged over
      the observational rows, which stand in for the population.
    * ``ESTIMATING_EQ``: solves the moment-balance equations
      (1/N) sum_trial g(X_i)/pi(X_i) = mean_obs g(X), with g defaulting
      to (1, X).  The score model is logistic in the same moment
      features, which keeps the system exactly identified; `g` specs
      like ``"x,x^2"`` therefore expand the model as well.

    When `N` is unknown it is replaced by N_hat(a) = sum_trial 1/pi(X_i; a),
    updated self-consistently.  Note the substitution makes the constant
    component of the balance system an identity, so the remaining
    equations pin down the solution only up to a one-parameter family;
    the damped least-squares Newton returns one root, and any root
    satisfies the defining balance property.
    """
    if method == MLE:
        return fit_logistic(ds.covariates, ds.in_trial.astype(float), method=MLE)
    if method not in (MODIFIED_MLE, ESTIMATING_EQ):
        raise ValueError(f"unknown sampling-score method {method!r}")
    if ds.m == 0:
        raise NoObservationalRows(f"{method} requires observational rows")

    if method == MODIFIED_MLE:
        x_trial = add_intercept(ds.trial_covariates)
        x_obs = add_intercept(ds.obs_covariates)
        beta, iters = _fit_modified_mle(x_trial, x_obs, N, max_iter, tol)
        return LogisticModelFit(
            coefficients=beta, converged=True, iterations=iters, method=MODIFIED_MLE
        )

    g_trial = np.column_stack([np.ones(ds.n), moment_features(ds.trial_covariates, g)])
    g_obs = np.column_stack([np.ones(ds.m), moment_features(ds.obs_covariates, g)])
    start, _ = _fit_modified_mle(g_trial, g_obs, N, max_iter, tol)
    beta, iters = _solve_balance_equations(
        g_trial, g_trial, g_obs.mean(axis=0), N, start, max_iter, tol
    )
    return LogisticModelFit(
        coefficients=beta,
        converged=True,
        iterations=iters,
        method=ESTIMATING_EQ,
        feature_spec=g,
    )


def _fit_modified_mle(x_trial, x_obs, N, max_iter, tol):
    """Newton solve of the modified-likelihood score equations.

    Score: (1/N) sum_trial x_i - mean_obs sigmoid(a'x) x = 0.  With N
    unknown, N_hat(a) = sum_trial 1/pi(a) is substituted and the
    self-consistent system is solved by damped Newton whose Jacobian
    carries the N_hat(a) dependence (a plug-in fixed point stalls: the
    substitution makes the intercept direction almost self-fulfilling).
    """
    beta = np.zeros(x_trial.shape[1])
    trial_sum = x_trial.sum(axis=0)
    if N is not None:
        return _newton_modified_score(x_obs, trial_sum / N, beta, max_iter, tol)

    m = x_obs.shape[0]
    # warm start from the pooled-size guess N = n + m
    beta, start_iters = _newton_modified_score(
        x_obs, trial_sum / (x_trial.shape[0] + m), beta, max_iter, tol
    )

    def residual(b):
        pi_trial = sigmoid(x_trial @ b)
        n_hat = float(np.sum(1.0 / pi_trial))
        p_obs = sigmoid(x_obs @ b)
        return trial_sum / n_hat - x_obs.T @ p_obs / m, pi_trial, p_obs, n_hat

    res, pi_trial, p_obs, n_hat = residual(beta)
    for it in range(1, max_iter + 1):
        if np.max(np.abs(res)) < tol * 1e-2:
            return beta, start_iters + it
        dn_hat = -((1.0 - pi_trial) / pi_trial) @ x_trial
        jac = -np.outer(trial_sum, dn_hat) / n_hat**2
        jac -= x_obs.T @ (x_obs * (p_obs * (1.0 - p_obs))[:, None]) / m
        step = np.linalg.solve(jac, -res)
        norm0 = np.linalg.norm(res)
        scale = 1.0
        for _ in range(40):
            cand = beta + scale * step
            cand_out = residual(cand)
            if np.linalg.norm(cand_out[0]) < norm0:
                beta, (res, pi_trial, p_obs, n_hat) = cand, cand_out
                break
            scale *= 0.5
        else:
            raise NonConvergence("modified MLE stalled")
    raise NonConvergence("modified MLE did not converge")


def _newton_modified_score(x_obs, trial_term, beta, max_iter, tol):
    beta = beta.copy()
    m = x_obs.shape[0]
    for it in range(1, max_iter + 1):
        p = sigmoid(x_obs @ beta)
        score = trial_term - x_obs.T @ p / m
        if np.max(np.abs(score)) < tol * 1e-2:
            return beta, it
        w = p * (1.0 - p)
        hessian = x_obs.T @ (x_obs * w[:, None]) / m
        step = _solve_spd(hessian, score)
        norm0 = np.linalg.norm(score)
        scale = 1.0
        for _ in range(40):
            p_new = sigmoid(x_obs @ (beta + scale * step))
            if np.linalg.norm(trial_term - x_obs.T @ p_new / m) <= norm0:
                break
            scale *= 0.5
        beta = beta + scale * step
    raise NonConvergence("modified MLE score iteration did not converge")


def _solve_balance_equations(x_trial, g_trial, g_target, N, beta, max_iter, tol):
    """Damped Newton for the inverse-probability balance equations.

    With N unknown the constant component of the system is an identity,
    leaving the Jacobian rank-deficient; steps then come from a
    least-squares solve and land on one root of the solution family.
    """
    beta = beta.copy()

    def residual(b):
        pi = sigmoid(x_trial @ b)
        scale = N if N is not None else float(np.sum(1.0 / pi))
        return (g_trial / pi[:, None]).sum(axis=0) / scale - g_target, pi, scale

    res, pi, scale = residual(beta)
    for it in range(1, max_iter + 1):
        norm = np.linalg.norm(res)
        if norm < tol:
            return beta, it
        # d(1/pi)/db = -((1 - pi)/pi) x
        slope = (1.0 - pi) / pi
        jac = -(g_trial * slope[:, None]).T @ x_trial / scale
        if N is None:
            weighted_sum = (g_trial / pi[:, None]).sum(axis=0)
            jac += np.outer(weighted_sum, slope @ x_trial) / scale**2
        step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
        scale_step = 1.0
        for _ in range(40):
            cand = beta + scale_step * step
            cand_res, cand_pi, cand_scale = residual(cand)
            if np.linalg.norm(cand_res) < norm:
                beta, res, pi, scale = cand, cand_res, cand_pi, cand_scale
                break
            scale_step *= 0.5
        else:
            raise NonConvergence("balance equations stalled")
    raise NonConvergence("balance equations did not converge")
