"""Containers for combined trial + observational samples.

A dataset holds the pooled rows of a randomized trial and an
observational sample of the target population.  Trial rows always carry
treatment and outcome; observational rows may carry covariates only
(non-nested design, setting (i)) or full (X, A, Y) records (setting (ii)
and nested designs).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import (
    EmptyArm,
    EmptyTargetSample,
    MissingColumn,
    MissingOutcomeInTrial,
    NonBinaryTreatment,
    NonFiniteCovariate,
)

NON_NESTED = "non-nested"
NESTED = "nested"

#: CSV tokens accepted as a missing value (matches R-exported files).
NA_TOKENS = ("", "NA")


@dataclass(frozen=True)
class CombinedDataset:
    """Pooled trial and observational rows.

    covariates has one row per unit; ``in_trial`` marks trial rows.
    ``treatment`` and ``outcome`` use NaN for unobserved entries, which
    is only legal on observational rows.  ``trial_propensity`` is the
    known treatment probability in the trial (constant, or one value
    per trial unit).
    """

    covariates: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray
    in_trial: np.ndarray
    design: str = NON_NESTED
    trial_propensity: float | np.ndarray = 0.5

    def __post_init__(self):
        covariates = np.asarray(self.covariates, dtype=float)
        treatment = np.asarray(self.treatment, dtype=float)
        outcome = np.asarray(self.outcome, dtype=float)
        in_trial = np.asarray(self.in_trial, dtype=bool)
        object.__setattr__(self, "covariates", covariates)
        object.__setattr__(self, "treatment", treatment)
        object.__setattr__(self, "outcome", outcome)
        object.__setattr__(self, "in_trial", in_trial)
        self._validate()
        for arr in (covariates, treatment, outcome, in_trial):
            arr.setflags(write=False)

    def _validate(self):
        if self.covariates.ndim != 2 or self.covariates.shape[1] < 1:
            raise NonFiniteCovariate("covariates must be a 2-D matrix with p >= 1")
        rows = self.covariates.shape[0]
        if self.treatment.shape != (rows,) or self.outcome.shape != (rows,):
            raise MissingColumn("treatment/outcome must have one entry per row")
        if self.in_trial.shape != (rows,):
            raise MissingColumn("in_trial must have one entry per row")
        if not np.all(np.isfinite(self.covariates)):
            raise NonFiniteCovariate("covariates contain non-finite values")
        if self.design not in (NON_NESTED, NESTED):
            raise ValueError(f"unknown design {self.design!r}")

        trial = self.in_trial
        if trial.sum() < 2:
            raise EmptyArm("need at least 2 trial rows")
        if (~trial).sum() < 1:
            raise EmptyTargetSample("no observational rows")
        a_trial = self.treatment[trial]
        y_trial = self.outcome[trial]
        if np.isnan(y_trial).any():
            raise MissingOutcomeInTrial("trial rows must carry an outcome")
        if np.isnan(a_trial).any():
            raise MissingOutcomeInTrial("trial rows must carry a treatment")
        observed_a = self.treatment[~np.isnan(self.treatment)]
        if not np.isin(observed_a, (0.0, 1.0)).all():
            raise NonBinaryTreatment("treatment values must be 0/1")
        if not (a_trial == 1).any() or not (a_trial == 0).any():
            raise EmptyArm("trial sample needs both a treated and a control unit")

        e1 = np.asarray(self.trial_propensity, dtype=float)
        if e1.ndim not in (0, 1):
            raise ValueError("trial_propensity must be scalar or per-trial-unit")
        if e1.ndim == 1 and e1.shape[0] != int(trial.sum()):
            raise ValueError("per-unit trial_propensity must match trial size")
        if not np.all((e1 > 0.0) & (e1 < 1.0)):
            raise ValueError("trial_propensity must lie in (0, 1)")

    # -- basic shape accessors --------------------------------------------

    @property
    def n(self) -> int:
        return int(self.in_trial.sum())

    @property
    def m(self) -> int:
        return int((~self.in_trial).sum())

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def trial_covariates(self) -> np.ndarray:
        return self.covariates[self.in_trial]

    @property
    def obs_covariates(self) -> np.ndarray:
        return self.covariates[~self.in_trial]

    @property
    def trial_treatment(self) -> np.ndarray:
        return self.treatment[self.in_trial]

    @property
    def trial_outcome(self) -> np.ndarray:
        return self.outcome[self.in_trial]

    @property
    def obs_treatment(self) -> np.ndarray:
        return self.treatment[~self.in_trial]

    @property
    def obs_outcome(self) -> np.ndarray:
        return self.outcome[~self.in_trial]

    @property
    def e1(self) -> np.ndarray:
        """Trial treatment probability, broadcast to one value per trial unit."""
        e1 = np.asarray(self.trial_propensity, dtype=float)
        if e1.ndim == 0:
            return np.full(self.n, float(e1))
        return e1

    def obs_has_treatment_outcome(self) -> bool:
        obs = ~self.in_trial
        return not (
            np.isnan(self.treatment[obs]).any() or np.isnan(self.outcome[obs]).any()
        )

    def restrict(self, columns: Sequence[int]) -> "CombinedDataset":
        """Return a copy keeping only the given covariate columns."""
        cols = list(columns)
        return replace(self, covariates=self.covariates[:, cols].copy())


@dataclass(frozen=True)
class OverlapReport:
    """Diagnostic summary of estimated selection odds on trial units."""

    min_odds: float
    max_odds: float
    threshold: float
    n_flagged: int
    inverse_odds: np.ndarray = field(repr=False)


def validate_overlap(ds: CombinedDataset, alpha, threshold: float) -> OverlapReport:
    """Flag trial units whose inverse selection odds 1/alpha exceed `threshold`.

    Diagnostic only: large inverse odds mean the unit stands in for many
    target units and will dominate any inverse-odds-weighted estimate.
    Never raises.
    """
    values = np.asarray(alpha.values, dtype=float)
    inverse = 1.0 / values
    return OverlapReport(
        min_odds=float(values.min()),
        max_odds=float(values.max()),
        threshold=float(threshold),
        n_flagged=int((inverse > threshold).sum()),
        inverse_odds=inverse,
    )


# -- CSV interface ---------------------------------------------------------
#
# Schema: header row with columns S, A, Y and covariate columns (default
# X1..Xp).  S=1 marks trial rows.  In non-nested files observational rows
# carry S=NA (or empty), in nested files S=0.  A and Y may be NA on
# observational rows only.


def _parse_cell(token: str) -> float:
    token = token.strip()
    if token in NA_TOKENS:
        return math.nan
    return float(token)


def load_dataset(
    path,
    schema: dict | None = None,
    design: str | None = None,
    trial_propensity: float = 0.5,
) -> CombinedDataset:
    """Read a CSV file into a validated :class:`CombinedDataset`.

    `schema` optionally renames roles, e.g. ``{"S": "sel", "A": "treat",
    "Y": "out", "X": ["age", "bmi"]}``; by default the S/A/Y columns are
    taken by name and every remaining column is a covariate.  Unless
    `design` is given, it is inferred from the S column: files with NA
    entries are non-nested, files with explicit 0/1 are nested.
    """
    schema = schema or {}
    s_col = schema.get("S", "S")
    a_col = schema.get("A", "A")
    y_col = schema.get("Y", "Y")

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = [row for row in reader if row]

    for role, col in (("S", s_col), ("A", a_col), ("Y", y_col)):
        if col not in header:
            raise MissingColumn(f"{path}: missing column {col!r} for role {role}")
    x_cols = schema.get("X")
    if x_cols is None:
        x_cols = [c for c in header if c not in (s_col, a_col, y_col)]
    if not x_cols:
        raise MissingColumn(f"{path}: no covariate columns")
    missing_x = [c for c in x_cols if c not in header]
    if missing_x:
        raise MissingColumn(f"{path}: missing covariate columns {missing_x}")

    idx = {c: header.index(c) for c in header}
    n_rows = len(rows)
    s_raw = np.empty(n_rows)
    treatment = np.empty(n_rows)
    outcome = np.empty(n_rows)
    covariates = np.empty((n_rows, len(x_cols)))
    for i, row in enumerate(rows):
        try:
            s_raw[i] = _parse_cell(row[idx[s_col]])
            treatment[i] = _parse_cell(row[idx[a_col]])
            outcome[i] = _parse_cell(row[idx[y_col]])
            for j, c in enumerate(x_cols):
                covariates[i, j] = _parse_cell(row[idx[c]])
        except (ValueError, IndexError) as exc:
            raise MissingColumn(f"{path}: bad row {i + 2}: {exc}") from exc

    if np.isnan(covariates).any():
        bad = int(np.isnan(covariates).any(axis=1).argmax())
        raise NonFiniteCovariate(f"{path}: NA covariate in data row {bad + 1}")

    s_is_na = np.isnan(s_raw)
    if design is None:
        design = NON_NESTED if s_is_na.any() else NESTED
    if design == NESTED and s_is_na.any():
        raise MissingColumn(f"{path}: nested design requires S in {{0,1}} on every row")
    if not np.isin(s_raw[~s_is_na], (0.0, 1.0)).all():
        raise NonBinaryTreatment(f"{path}: S column must contain only 0, 1 or NA")
    in_trial = s_raw == 1.0

    return CombinedDataset(
        covariates=covariates,
        treatment=treatment,
        outcome=outcome,
        in_trial=in_trial,
        design=design,
        trial_propensity=trial_propensity,
    )


def _format_cell(value: float) -> str:
    value = float(value)
    if math.isnan(value):
        return "NA"
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def write_dataset(ds: CombinedDataset, path) -> None:
    """Write a dataset back to the CSV schema read by :func:`load_dataset`.

    Finite cells round-trip bit-exactly (floats are written with full
    shortest-repr precision).
    """
    header = ["S", "A", "Y"] + [f"X{j + 1}" for j in range(ds.p)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ds.covariates.shape[0]):
            if ds.in_trial[i]:
                s = "1"
            else:
                s = "0" if ds.design == NESTED else "NA"
            row = [s, _format_cell(ds.treatment[i]), _format_cell(ds.outcome[i])]
            row += [repr(float(v)) for v in ds.covariates[i]]
            writer.writerow(row)
