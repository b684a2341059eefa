"""Dataset container, CSV loader and overlap diagnostics."""

import numpy as np
import pytest

from conftest import make_dataset
from trialbridge import weights
from trialbridge.datamodel import (
    NESTED,
    NON_NESTED,
    CombinedDataset,
    load_dataset,
    validate_overlap,
    write_dataset,
)
from trialbridge.dgp import ScenarioConfig, generate
from trialbridge.errors import (
    EmptyArm,
    EmptyTargetSample,
    MissingColumn,
    MissingOutcomeInTrial,
    NonBinaryTreatment,
    NonFiniteCovariate,
)

TABLE_CSV = """S,A,Y,X1,X2,X3
1,1,1,1.1,20,0
1,0,1,-6,45,0
1,1,0,0,15,1
NA,NA,NA,-2,33,1
NA,0,1,-2,52,1
NA,1,1,-1,35,1
NA,0,0,-2,22,1
"""


@pytest.fixture
def table_path(tmp_path):
    path = tmp_path / "table.csv"
    path.write_text(TABLE_CSV)
    return path


def test_load_table_shaped_csv(table_path):
    ds = load_dataset(table_path)
    assert ds.n == 3
    assert ds.m == 4
    assert ds.p == 3
    assert ds.design == NON_NESTED
    # NA treatment/outcome accepted on observational rows only
    assert np.isnan(ds.obs_treatment[0])
    assert not np.isnan(ds.trial_outcome).any()


def test_load_infers_nested_design(tmp_path):
    path = tmp_path / "nested.csv"
    path.write_text("S,A,Y,X1\n1,1,2.0,0.1\n1,0,1.0,0.2\n0,1,3.0,0.3\n0,0,1.5,0.4\n")
    ds = load_dataset(path)
    assert ds.design == NESTED
    assert ds.n == 2 and ds.m == 2


def test_design_flag_overrides_inference(tmp_path):
    path = tmp_path / "flat.csv"
    path.write_text("S,A,Y,X1\n1,1,2.0,0.1\n1,0,1.0,0.2\n0,NA,NA,0.3\n")
    ds = load_dataset(path, design=NON_NESTED)
    assert ds.design == NON_NESTED


def test_zero_observational_rows_rejected(tmp_path):
    path = tmp_path / "trialonly.csv"
    path.write_text("S,A,Y,X1\n1,1,2.0,0.1\n1,0,1.0,0.2\n")
    with pytest.raises(EmptyTargetSample):
        load_dataset(path)


def test_trial_row_missing_outcome_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("S,A,Y,X1\n1,1,NA,0.1\n1,0,1.0,0.2\nNA,NA,NA,0.3\n")
    with pytest.raises(MissingOutcomeInTrial):
        load_dataset(path)


def test_missing_column_rejected(tmp_path):
    path = tmp_path / "noy.csv"
    path.write_text("S,A,X1\n1,1,0.1\n")
    with pytest.raises(MissingColumn):
        load_dataset(path)


def test_na_covariate_rejected(tmp_path):
    path = tmp_path / "nax.csv"
    path.write_text("S,A,Y,X1\n1,1,2.0,NA\n1,0,1.0,0.2\nNA,NA,NA,0.3\n")
    with pytest.raises(NonFiniteCovariate):
        load_dataset(path)


def test_nonbinary_treatment_rejected(tmp_path):
    path = tmp_path / "badA.csv"
    path.write_text("S,A,Y,X1\n1,2,2.0,0.1\n1,0,1.0,0.2\nNA,NA,NA,0.3\n")
    with pytest.raises(NonBinaryTreatment):
        load_dataset(path)


def test_schema_renames_columns(tmp_path):
    path = tmp_path / "renamed.csv"
    path.write_text("sel,treat,resp,age\n1,1,2.0,0.1\n1,0,1.0,0.2\nNA,NA,NA,0.3\n")
    ds = load_dataset(path, schema={"S": "sel", "A": "treat", "Y": "resp"})
    assert ds.n == 2 and ds.m == 1 and ds.p == 1


def test_empty_arm_rejected():
    with pytest.raises(EmptyArm):
        make_dataset([[0.0], [1.0]], [1, 1], [2.0, 3.0], [[0.5]])


def test_partition_is_exhaustive(scenario1_dataset):
    ds = scenario1_dataset
    assert ds.n + ds.m == ds.covariates.shape[0]
    assert ds.n == int(ds.in_trial.sum())


def test_round_trip_is_bit_exact(tmp_path):
    ds = generate(ScenarioConfig(scenario="s1", seed=5, superpop=3000, m=200))
    path = tmp_path / "roundtrip.csv"
    write_dataset(ds, path)
    back = load_dataset(path)
    np.testing.assert_array_equal(back.covariates, ds.covariates)
    np.testing.assert_array_equal(back.in_trial, ds.in_trial)
    np.testing.assert_array_equal(
        back.treatment[back.in_trial], ds.treatment[ds.in_trial]
    )
    np.testing.assert_array_equal(back.outcome[back.in_trial], ds.outcome[ds.in_trial])
    # second pass through the writer must be byte-identical
    path2 = tmp_path / "roundtrip2.csv"
    write_dataset(back, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_nested_round_trip(tmp_path):
    ds = generate(ScenarioConfig(scenario="nested", seed=5, superpop=4000))
    path = tmp_path / "nested.csv"
    write_dataset(ds, path)
    back = load_dataset(path)
    assert back.design == NESTED
    np.testing.assert_array_equal(back.covariates, ds.covariates)
    np.testing.assert_array_equal(back.treatment, ds.treatment)


def test_dataset_arrays_are_immutable(scenario1_dataset):
    with pytest.raises(ValueError):
        scenario1_dataset.covariates[0, 0] = 1.0


def test_restrict_keeps_columns(scenario1_dataset):
    sub = scenario1_dataset.restrict([0, 2])
    assert sub.p == 2
    np.testing.assert_array_equal(sub.covariates[:, 0], scenario1_dataset.covariates[:, 0])
    np.testing.assert_array_equal(sub.covariates[:, 1], scenario1_dataset.covariates[:, 2])


# -- overlap diagnostics ------------------------------------------------------


def test_overlap_no_shift_flags_nothing():
    rng = np.random.default_rng(0)
    ds = make_dataset(
        rng.normal(size=(300, 2)),
        rng.integers(0, 2, 300),
        rng.normal(size=300),
        rng.normal(size=(300, 2)),
    )
    alpha = weights.estimate_alpha(ds)
    report = validate_overlap(ds, alpha, threshold=10.0)
    assert report.n_flagged == 0
    assert report.min_odds > 0


def test_overlap_scenario1_flags_match_direct_recount(scenario1_dataset):
    alpha = weights.estimate_alpha(scenario1_dataset)
    report = validate_overlap(scenario1_dataset, alpha, threshold=50.0)
    # oracle: recompute the inverse odds straight from the fitted model
    probs = alpha.model.predict_proba(scenario1_dataset.trial_covariates)
    inverse = (1.0 - probs) / probs
    assert report.n_flagged == int((inverse > 50.0).sum())
    assert report.n_flagged > 0


def test_overlap_flags_unit_deep_in_target_territory():
    # trial units cluster near 0, the target sample near 4; one stray
    # trial unit at 6 sits where trial membership is vanishingly rare,
    # so its inverse odds blow up
    rng = np.random.default_rng(1)
    trial_x = np.vstack([rng.normal(0.0, 1.0, size=(80, 1)), [[6.0]]])
    trial_a = np.concatenate([rng.integers(0, 2, 80), [1]])
    trial_y = rng.normal(size=81)
    ds = make_dataset(trial_x, trial_a, trial_y, rng.normal(4.0, 1.0, size=(400, 1)))
    alpha = weights.estimate_alpha(ds)
    report = validate_overlap(ds, alpha, threshold=50.0)
    # closed form from the fitted coefficients: 1/alpha = exp(-(b0 + b1 x))
    b0, b1 = alpha.model.coefficients
    assert np.exp(-(b0 + b1 * 6.0)) > 50.0
    assert report.inverse_odds[-1] > 50.0
    assert report.n_flagged >= 1
