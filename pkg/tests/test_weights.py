"""Odds weights, entropy balancing and quantile strata."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_dataset
from trialbridge import weights
from trialbridge.errors import EmptyStratum, Infeasible, RankDeficientMoments
from trialbridge.weights import assign_strata, entropy_balance, estimate_alpha

# -- odds weights ---------------------------------------------------------


def _two_sample_dataset(seed, n, m, shift=0.0):
    rng = np.random.default_rng(seed)
    return make_dataset(
        rng.normal(0.0, 1.0, size=(n, 2)),
        rng.integers(0, 2, n),
        rng.normal(size=n),
        rng.normal(shift, 1.0, size=(m, 2)),
    )


def test_alpha_balanced_samples_near_one():
    ds = _two_sample_dataset(seed=0, n=2_000, m=2_000)
    alpha = estimate_alpha(ds)
    assert abs(np.median(alpha.values) - 1.0) < 0.1
    assert np.max(np.abs(alpha.model.coefficients[1:])) < 0.1


def test_alpha_unbalanced_sizes_match_ratio():
    ds = _two_sample_dataset(seed=1, n=1_000, m=10_000)
    alpha = estimate_alpha(ds)
    np.testing.assert_allclose(np.median(alpha.values), 0.1, atol=0.02)


def test_alpha_slopes_track_selection_coefficients(scenario1_dataset):
    alpha = estimate_alpha(scenario1_dataset)
    # the generating selection logit has negative slopes on every covariate
    assert np.all(alpha.model.coefficients[1:] < 0)


def test_alpha_argsort_invariant_to_covariate_shift():
    ds = _two_sample_dataset(seed=2, n=300, m=600, shift=0.5)
    shifted = make_dataset(
        ds.trial_covariates + 3.0,
        ds.trial_treatment,
        ds.trial_outcome,
        ds.obs_covariates + 3.0,
    )
    a1 = estimate_alpha(ds)
    a2 = estimate_alpha(shifted)
    np.testing.assert_allclose(a1.values, a2.values, rtol=1e-6)
    np.testing.assert_array_equal(np.argsort(a1.values), np.argsort(a2.values))


# -- entropy balancing ------------------------------------------------------


def test_uniform_weights_when_target_equals_trial_means():
    rng = np.random.default_rng(3)
    g = rng.normal(size=(40, 3))
    wv = entropy_balance(g, g.mean(axis=0))
    np.testing.assert_allclose(wv.values, np.full(40, 1.0 / 40), atol=1e-12)


def test_scalar_balance_analytic_solution():
    # two units at 0 and two at 1, target mean 0.75: weights must be
    # (0.125, 0.125, 0.375, 0.375); verified against the 1-d dual root
    g = np.array([[0.0], [0.0], [1.0], [1.0]])
    wv = entropy_balance(g, np.array([0.75]))
    np.testing.assert_allclose(wv.values, [0.125, 0.125, 0.375, 0.375], atol=1e-9)

    # oracle: solve the scalar dual equation by bisection
    def dual_gap(lam):
        w = np.exp(lam * g[:, 0])
        w = w / w.sum()
        return w @ g[:, 0] - 0.75

    low, high = 0.0, 50.0
    for _ in range(200):
        mid = 0.5 * (low + high)
        if dual_gap(mid) < 0:
            low = mid
        else:
            high = mid
    lam = 0.5 * (low + high)
    w_oracle = np.exp(lam * g[:, 0])
    w_oracle /= w_oracle.sum()
    np.testing.assert_allclose(wv.values, w_oracle, atol=1e-9)


def test_target_outside_hull_is_infeasible():
    g = np.linspace(0.0, 1.0, 20)[:, None]
    with pytest.raises(Infeasible):
        entropy_balance(g, np.array([1.5]))


def test_collinear_moments_rejected():
    g = np.column_stack([np.arange(10.0), 2.0 * np.arange(10.0)])
    with pytest.raises(RankDeficientMoments):
        entropy_balance(g, g.mean(axis=0))


def test_balance_residual_below_tolerance():
    rng = np.random.default_rng(4)
    g = rng.normal(size=(200, 4))
    target = g.mean(axis=0) + np.array([0.3, -0.2, 0.1, 0.25])
    wv = entropy_balance(g, target)
    assert np.max(np.abs(wv.values @ g - target)) < 1e-8
    assert abs(wv.values.sum() - 1.0) < 1e-12


def test_entropy_is_minimal_among_feasible_perturbations():
    rng = np.random.default_rng(5)
    g = rng.normal(size=(60, 2))
    target = g.mean(axis=0) + np.array([0.2, -0.1])
    wv = entropy_balance(g, target)
    entropy = wv.values @ np.log(wv.values)
    # perturb inside the feasible affine subspace: directions orthogonal
    # to (1, g) keep both constraints intact
    basis = np.column_stack([np.ones(60), g])
    for trial in range(12):
        direction = rng.normal(size=60)
        direction -= basis @ np.linalg.lstsq(basis, direction, rcond=None)[0]
        scale = 0.2 * wv.values.min() / max(np.abs(direction).max(), 1e-12)
        other = wv.values + scale * direction
        assert np.all(other > 0)
        assert other @ np.log(other) >= entropy - 1e-12


@settings(max_examples=25, deadline=None)
@given(shift=st.floats(-0.4, 0.4), seed=st.integers(0, 50))
def test_balance_constraint_holds_for_feasible_targets(shift, seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(80, 2))
    target = g.mean(axis=0) + shift * g.std(axis=0) / 3.0
    wv = entropy_balance(g, target)
    assert np.max(np.abs(wv.values @ g - target)) < 1e-8


# -- strata -----------------------------------------------------------------


def test_median_split_two_strata():
    # inject a model whose odds over the 8 units are exactly {1,2,3,4}
    # twice: the median breakpoint 2.5 splits {1,2} from {3,4}
    from trialbridge.nuisance import LogisticModelFit

    x = np.log([1.0, 2.0, 3.0, 4.0])[:, None]
    ds = make_dataset(x, [1, 0, 1, 0], [1.0, 2.0, 3.0, 4.0], x)
    model = LogisticModelFit(
        coefficients=np.array([0.0, 1.0]), converged=True, iterations=0
    )
    np.testing.assert_allclose(model.predict_odds(x), [1.0, 2.0, 3.0, 4.0], rtol=1e-12)
    strata = assign_strata(model, ds, 2)
    assert strata.n_strata == 2
    np.testing.assert_allclose(strata.breakpoints, [2.5])
    assert list(strata.trial_stratum) == [1, 1, 2, 2]
    assert list(strata.obs_stratum) == [1, 1, 2, 2]


def test_constant_scores_collapse_to_single_stratum():
    ds = make_dataset(
        [[1.0], [1.0], [1.0], [1.0]],
        [1, 0, 1, 0],
        [1.0, 2.0, 3.0, 4.0],
        [[1.0], [1.0], [1.0]],
    )
    model = estimate_alpha(ds).model
    strata = assign_strata(model, ds, 4)
    assert strata.n_strata == 1
    assert set(strata.trial_stratum) == {1}
    assert set(strata.obs_stratum) == {1}


def test_empty_stratum_raises():
    # all treated trial units sit in the upper half of the score range
    ds = make_dataset(
        [[0.0], [0.1], [5.0], [5.1]],
        [0, 0, 1, 1],
        [1.0, 2.0, 3.0, 4.0],
        [[0.0], [0.1], [5.0], [5.1], [2.5]],
    )
    model = estimate_alpha(ds).model
    with pytest.raises(EmptyStratum):
        assign_strata(model, ds, 2)


def test_strata_populated_on_benchmark_replications():
    from trialbridge.dgp import ScenarioConfig, generate

    for rep in range(10):
        ds = generate(ScenarioConfig(scenario="s1", seed=(9, rep)))
        model = estimate_alpha(ds).model
        strata = assign_strata(model, ds, 10)
        assert strata.n_strata == 10


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 200), n_strata=st.integers(2, 6))
def test_strata_invariant_under_increasing_transforms(seed, n_strata):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=60)

    def strata_of(vals, L):
        bps = np.unique(np.quantile(vals, np.arange(1, L) / L))
        return np.searchsorted(bps, vals, side="left")

    base = strata_of(values, n_strata)
    for transform in (np.exp, np.arctan, lambda v: v**3, lambda v: 5 * v - 3):
        np.testing.assert_array_equal(base, strata_of(transform(values), n_strata))
