import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqrtcox import DataError, Standardization, SurvivalDataset, apply_standardization, load_csv
from sqrtcox import standardize, write_csv
from sqrtcox.data import covariate_matrix_from_csv


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_three_rows(tmp_path):
    p = _write(tmp_path, "time,event,x1\n1,1,0.5\n2,0,-0.3\n3,1,1.1\n")
    d = load_csv(p)
    assert (d.n, d.p) == (3, 1)
    assert d.feature_names == ("x1",)
    np.testing.assert_array_equal(d.events, [1, 0, 1])
    np.testing.assert_array_equal(d.covariates[:, 0], [0.5, -0.3, 1.1])


def test_columns_in_header_order(tmp_path):
    p = _write(tmp_path, "b,time,a,event\n1,1,2,1\n3,2,4,0\n")
    d = load_csv(p)
    assert d.feature_names == ("b", "a")
    np.testing.assert_array_equal(d.covariates, [[1, 2], [3, 4]])


@pytest.mark.parametrize("text, msg", [
    ("time,event,x1\n1,2,0.5\n2,0,1\n", "non-binary event indicator"),
    ("time,event,x1\n1,1,0.5\n", "n < 2"),
    ("time,event,x1\n-1,1,0.5\n2,0,1\n", "negative time"),
    ("time,x1\n1,0.5\n2,1\n", "missing column 'event'"),
    ("time,event,x1\n1,1,abc\n2,0,1\n", "non-numeric"),
    ("time,event,x1\n1,1,\n2,0,1\n", "non-numeric"),
    ("time,event,x1\n1,1,nan\n2,0,1\n", "non-finite"),
    ("time,event,x1\n1,1\n2,0,1\n", "expected 3 fields"),
])
def test_load_errors(tmp_path, text, msg):
    with pytest.raises(DataError, match=msg):
        load_csv(_write(tmp_path, text))


def test_error_names_file_and_line(tmp_path):
    p = _write(tmp_path, "# note\ntime,event,x1\n1,1,0\n2,7,1\n")
    with pytest.raises(DataError, match=r"d\.csv:4"):
        load_csv(p)


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="no such file"):
        load_csv(tmp_path / "nope.csv")


def test_dataset_invariants():
    with pytest.raises(DataError):
        SurvivalDataset([1.0], [1], [[0.0]])
    with pytest.raises(DataError):
        SurvivalDataset([1.0, np.inf], [1, 0], [[0.0], [1.0]])
    with pytest.raises(DataError):
        SurvivalDataset([1.0, 2.0], [1, 0], [[0.0], [1.0], [2.0]])


@pytest.mark.parametrize("col, out, mean, scale", [
    ([1.0, -1.0], [1.0, -1.0], 0.0, 1.0),
    ([0.0, 2.0], [-1.0, 1.0], 1.0, 1.0),
])
def test_standardize_examples(col, out, mean, scale):
    ds, s = standardize(SurvivalDataset([1, 2], [1, 1], np.array(col)[:, None]))
    np.testing.assert_allclose(ds.covariates[:, 0], out, atol=1e-15)
    assert s.means[0] == mean and s.scales[0] == scale


def test_constant_column_named():
    d = SurvivalDataset([1, 2], [1, 1], [[1.0, 5.0], [2.0, 5.0]])
    with pytest.raises(DataError, match="constant column x2"):
        standardize(d)


def test_apply_standardization():
    s = Standardization(np.array([1.0]), np.array([2.0]))
    np.testing.assert_array_equal(apply_standardization(np.array([3.0]), s), [1.0])
    np.testing.assert_array_equal(apply_standardization(s.means, s), [0.0])
    with pytest.raises(DataError):
        apply_standardization(np.zeros(2), s)
    with pytest.raises(DataError):
        Standardization(np.zeros(1), np.zeros(1))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_standardize_idempotent_and_invertible(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(3, 5, size=(int(rng.integers(3, 30)), int(rng.integers(1, 5))))
    d = SurvivalDataset(rng.exponential(size=X.shape[0]), rng.integers(0, 2, X.shape[0]), X)
    ds, s = standardize(d)
    np.testing.assert_allclose(ds.covariates.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(ds.covariates.std(axis=0), 1, atol=1e-12)
    ds2, _ = standardize(ds)
    np.testing.assert_allclose(ds2.covariates, ds.covariates, atol=1e-12)
    np.testing.assert_allclose(s.invert(apply_standardization(X, s)), X, atol=1e-12)


def test_csv_round_trip(tmp_path, rng):
    d = SurvivalDataset(rng.exponential(size=20), rng.integers(0, 2, 20),
                        rng.standard_normal((20, 3)), ("a", "b", "c"))
    p = tmp_path / "rt.csv"
    write_csv(d, p, comment='{"seed": 1}')
    back = load_csv(p)
    assert back.feature_names == d.feature_names
    np.testing.assert_allclose(back.times, d.times, atol=1e-12)
    np.testing.assert_array_equal(back.events, d.events)
    np.testing.assert_allclose(back.covariates, d.covariates, atol=1e-12)


def test_covariate_matrix_by_name(tmp_path):
    p = _write(tmp_path, "z,time,y\n1,5,2\n3,6,4\n")
    np.testing.assert_array_equal(covariate_matrix_from_csv(p, ("y", "z")), [[2, 1], [4, 3]])
    with pytest.raises(DataError, match="unknown column 'z'"):
        covariate_matrix_from_csv(p, ("y",))
    with pytest.raises(DataError, match="missing feature column 'w'"):
        covariate_matrix_from_csv(p, ("y", "z", "w"))
