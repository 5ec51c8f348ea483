import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steinselect import (
    Dataset,
    GroundTruth,
    ParseError,
    SchemaError,
    SimSpec,
    ar1_sigma,
    center_columns,
    load_csv,
    response_surface,
    save_csv,
    simulate,
    simulate_from_truth,
)
from steinselect.errors import ConfigError, ValidationError


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_three_row_file(self, tmp_path):
        path = write(tmp_path, "y,a,b\n1,10,20\n2,11,21\n3,12,22\n")
        d = load_csv(path, "y")
        assert d.n == 3 and d.p == 2
        assert np.array_equal(d.y, [1.0, 2.0, 3.0])
        assert np.array_equal(d.X, [[10, 20], [11, 21], [12, 22]])
        assert d.feature_ids == ("a", "b")
        assert d.centered is False

    def test_nan_cell_names_row_and_column(self, tmp_path):
        path = write(tmp_path, "y,a\n1,2\n2,nan\n")
        with pytest.raises(ParseError) as exc:
            load_csv(path, "y")
        assert exc.value.row == 2
        assert exc.value.column == "a"

    def test_missing_response_column(self, tmp_path):
        path = write(tmp_path, "z,a\n1,2\n")
        with pytest.raises(SchemaError, match="'y'"):
            load_csv(path, "y")

    def test_duplicate_column(self, tmp_path):
        path = write(tmp_path, "y,a,a\n1,2,3\n")
        with pytest.raises(SchemaError, match="duplicate"):
            load_csv(path, "y")

    def test_non_numeric_cell(self, tmp_path):
        path = write(tmp_path, "y,a\n1,hello\n")
        with pytest.raises(ParseError) as exc:
            load_csv(path, "y")
        assert exc.value.row == 1 and exc.value.column == "a"

    def test_round_trip(self, tmp_path):
        d = Dataset(
            X=np.array([[1.5, -2.25], [0.125, 3.0]]),
            y=np.array([0.5, -1.5]),
            feature_ids=("a", "b"),
        )
        path = tmp_path / "out.csv"
        save_csv(d, path, response_column="resp")
        back = load_csv(path, "resp")
        assert np.array_equal(back.X, d.X)
        assert np.array_equal(back.y, d.y)
        assert back.feature_ids == d.feature_ids


class TestCenterColumns:
    def test_basic(self):
        d = Dataset(X=np.array([[1.0], [2.0], [3.0]]), y=np.zeros(3), feature_ids=("a",))
        c = center_columns(d)
        assert np.allclose(c.X[:, 0], [-1.0, 0.0, 1.0])
        assert c.centered is True
        assert np.array_equal(c.y, d.y)

    def test_idempotent(self):
        d = Dataset(X=np.array([[-1.0], [1.0]]), y=np.zeros(2), feature_ids=("a",))
        c = center_columns(center_columns(d))
        assert np.array_equal(c.X[:, 0], [-1.0, 1.0])

    def test_single_sample(self):
        d = Dataset(X=np.array([[5.0]]), y=np.zeros(1), feature_ids=("a",))
        assert center_columns(d).X[0, 0] == 0.0


class TestDatasetInvariants:
    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            Dataset(X=np.zeros((3, 2)), y=np.zeros(2), feature_ids=("a", "b"))

    def test_duplicate_ids(self):
        with pytest.raises(SchemaError):
            Dataset(X=np.zeros((2, 2)), y=np.zeros(2), feature_ids=("a", "a"))

    def test_centered_flag_checked(self):
        with pytest.raises(ValidationError):
            Dataset(X=np.ones((3, 1)), y=np.zeros(3), feature_ids=("a",), centered=True)

    def test_immutable(self):
        d = Dataset(X=np.zeros((2, 2)), y=np.zeros(2), feature_ids=("a", "b"))
        with pytest.raises(ValueError):
            d.X[0, 0] = 1.0


class TestSimSpecValidation:
    def test_case4_needs_s5(self):
        with pytest.raises(ConfigError, match="s=5"):
            SimSpec(case=4, n=10, p=10, s=3)

    def test_case5_needs_s5(self):
        with pytest.raises(ConfigError, match="s=5"):
            SimSpec(case=5, n=10, p=10, s=4)

    def test_k1_bounded_by_s(self):
        with pytest.raises(ConfigError):
            SimSpec(case=1, n=10, p=10, s=3, k1=4)

    def test_rho_range(self):
        with pytest.raises(ConfigError):
            SimSpec(case=1, n=10, p=10, rho=1.0)

    def test_t_design_dof(self):
        with pytest.raises(ConfigError):
            SimSpec(case=1, n=10, p=10, design="t2")
        SimSpec(case=1, n=10, p=10, design="t7")  # fine


class TestSimulate:
    def test_seeded_determinism(self):
        spec = SimSpec(case=1, n=4, p=6, s=2, k1=2, rho=0.0, seed=7)
        d1, t1 = simulate(spec)
        d2, t2 = simulate(spec)
        assert np.array_equal(d1.X, d2.X) and np.array_equal(d1.y, d2.y)
        assert t1.support == t2.support
        assert np.array_equal(t1.w1, t2.w1) and np.array_equal(t1.a, t2.a)

    def test_hand_evaluated_case1(self):
        # single index row e1', a=[1]: y(x) = (x[0])^2
        w1 = np.zeros((1, 4))
        w1[0, 0] = 1.0
        truth = GroundTruth(support=(0,), w1=w1, a=np.array([1.0]))
        X = np.array([[2.0, 0.0, 0.0, 0.0]])
        assert response_surface(1, truth, X)[0] == pytest.approx(4.0)

    def test_case4_additive_forms(self):
        # f1(1)=1, f2(0)=-10, f3(0)=1, f4(2)=16+8-10cos2, f5(-1)=2-cos1
        truth = GroundTruth(support=(0, 1, 2, 3, 4))
        X = np.array([[1.0, 0.0, 0.0, 2.0, -1.0, 9.9]])
        expected = 1.0 + (-10.0) + 1.0 + (24 - 10 * np.cos(2.0)) + (2 - np.cos(1.0))
        assert response_surface(4, truth, X)[0] == pytest.approx(expected)

    def test_case5_interaction_forms(self):
        truth = GroundTruth(support=(0, 1, 2, 3, 4))
        X = np.array([[1.0, 1.0, 0.5, 2.0, 1.0]])
        f1 = lambda z: z**2
        f2 = lambda z: z**4 + 2 * z**2 - 10 * np.cos(z)
        f3 = lambda z: np.exp(z) + z**4 - z**2
        f5 = lambda z: z**4 + z**2 - np.cos(z)
        expected = f1(1.0) * f2(1.0) + f3(0.5) + f1(2.0) * f5(1.0)
        assert response_surface(5, truth, X)[0] == pytest.approx(expected)

    def test_covariance_matches_ar1(self):
        d, _ = simulate(SimSpec(case=1, n=5000, p=10, rho=0.3, seed=2))
        emp = np.cov(d.X, rowvar=False, bias=True)
        assert np.abs(emp - ar1_sigma(10, 0.3)).max() < 0.05

    def test_column_sparsity_matches_support(self):
        for seed in range(5):
            _, truth = simulate(SimSpec(case=2, n=5, p=30, s=5, k1=3, seed=seed))
            nonzero = tuple(int(j) for j in np.flatnonzero(np.linalg.norm(truth.w1, axis=0)))
            assert nonzero == truth.support

    def test_w1_rows_unit_norm(self):
        _, truth = simulate(SimSpec(case=1, n=5, p=20, seed=3))
        assert np.allclose(np.linalg.norm(truth.w1, axis=1), 1.0)

    def test_rho_zero_off_diagonal(self):
        d, _ = simulate(SimSpec(case=1, n=100_000, p=6, rho=0.0, seed=5))
        emp = np.cov(d.X, rowvar=False, bias=True)
        off = emp - np.diag(np.diag(emp))
        assert np.abs(off).max() < 0.02

    def test_t_design_unit_variance(self):
        d, _ = simulate(SimSpec(case=1, n=100_000, p=5, design="t7", seed=9))
        assert np.abs(d.X.var(axis=0) - 1.0).max() < 0.05

    def test_noise_sd_zero_is_noiseless(self):
        d, truth = simulate(SimSpec(case=1, n=50, p=8, noise_sd=0.0, seed=2))
        assert np.allclose(d.y, response_surface(1, truth, d.X))

    def test_simulate_from_truth_same_model(self):
        spec = SimSpec(case=3, n=40, p=12, seed=11, noise_sd=0.0)
        _, truth = simulate(spec)
        extra = simulate_from_truth(spec, truth, 25, seed=99)
        assert extra.n == 25
        assert np.allclose(extra.y, response_surface(3, truth, extra.X))


@settings(deadline=None, max_examples=20)
@given(
    case=st.sampled_from([1, 2, 3]),
    n=st.integers(2, 12),
    p=st.integers(6, 15),
    seed=st.integers(0, 2**32),
)
def test_simulation_reproducible(case, n, p, seed):
    spec = SimSpec(case=case, n=n, p=p, s=5, k1=3, rho=0.2, seed=seed)
    d1, t1 = simulate(spec)
    d2, t2 = simulate(spec)
    assert np.array_equal(d1.X, d2.X) and np.array_equal(d1.y, d2.y)
    assert t1.support == t2.support
