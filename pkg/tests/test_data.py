import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lgta import data as D


def write(tmp_path, text, name="panel.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_two_series_three_rows(tmp_path):
    ds = D.load_csv(write(tmp_path, "a,b\n1,2\n3,4\n5,6\n"))
    assert ds.values.shape == (2, 3)
    assert ds.names == ["a", "b"]
    np.testing.assert_array_equal(ds.values[1], [2, 4, 6])
    assert ds.timestamps is None


def test_load_with_dates_and_groups(tmp_path):
    ds = D.load_csv(write(tmp_path, "date,a|x,b|y\n2021-01-01,1,2\n2021-01-02,3,4\n"))
    assert ds.groups == ["x", "y"]
    assert str(ds.timestamps[1]) == "2021-01-02"
    np.testing.assert_array_equal(ds.conditions, np.eye(2))


def test_blank_cell_names_row_and_column(tmp_path):
    with pytest.raises(D.DataError, match=r"row 3, column 2"):
        D.load_csv(write(tmp_path, "a,b\n1,2\n3,\n"))


@pytest.mark.parametrize("text, pattern", [
    ("a,b\n1,2\n3\n", "row 3"),
    ("a,b\n1,x\n", r"row 2, column 2: non-numeric"),
    ("a,a\n1,2\n", r"row 1, column 2: duplicate"),
])
def test_malformed_files(tmp_path, text, pattern):
    with pytest.raises(D.DataError, match=pattern):
        D.load_csv(write(tmp_path, text))


def test_missing_file_names_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        D.load_csv(tmp_path / "nope.csv")


def test_save_load_round_trip(tmp_path):
    ds = D.synth_corpus(5, 20, seed=3)
    path = tmp_path / "out.csv"
    D.save_csv(ds, path)
    back = D.load_csv(path)
    # 12 significant digits: half a unit in the last place, relative
    np.testing.assert_allclose(back.values, ds.values, rtol=5e-12, atol=0)
    assert back.names == ds.names and back.groups == ds.groups
    np.testing.assert_array_equal(back.timestamps, ds.timestamps)


def test_round_trip_normalized_panel_within_1e12(tmp_path):
    ds = D.normalize(D.synth_corpus(6, 40, seed=8))
    path = tmp_path / "norm.csv"
    D.save_csv(ds, path)
    assert np.abs(D.load_csv(path).values - ds.values).max() <= 1e-12


def _daily(values):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    stamps = np.datetime64("2021-03-01") + np.arange(values.shape[1])
    return D.TimeSeriesDataset(values, [f"s{i}" for i in range(len(values))], stamps)


def test_resample_fourteen_ones():
    out = D.resample_weekly(_daily(np.ones(14)))
    np.testing.assert_array_equal(out.values, [[7.0, 7.0]])
    assert str(out.timestamps[1]) == "2021-03-08"


def test_resample_drops_partial_week():
    x = np.arange(15.0)
    out = D.resample_weekly(_daily(x))
    assert out.length == 2
    assert out.values.sum() == x.sum() - x[14:].sum()


def test_resample_needs_timestamps():
    with pytest.raises(D.DataError):
        D.resample_weekly(D.TimeSeriesDataset(np.ones((1, 14)), ["a"]))


def test_top_k():
    ds = D.TimeSeriesDataset(np.array([[3.0, 3.0], [5.0, 5.0]]), ["low", "high"])
    assert D.select_top_k(ds, 1).names == ["high"]
    full = D.select_top_k(ds, 2)
    assert sorted(full.names) == sorted(ds.names)
    with pytest.raises(D.DataError):
        D.select_top_k(ds, 3)


def test_top_k_order_insensitive():
    rng = np.random.default_rng(0)
    values = np.round(rng.uniform(0, 3, (12, 4)))  # rounding forces ties in the means
    names = [f"n{i:02d}" for i in range(12)]
    ds = D.TimeSeriesDataset(values, names)
    perm = rng.permutation(12)
    shuffled = D.TimeSeriesDataset(values[perm], [names[i] for i in perm])
    for k in (1, 5, 12):
        a, b = D.select_top_k(ds, k), D.select_top_k(shuffled, k)
        assert a.names == b.names
        np.testing.assert_array_equal(a.values, b.values)


def test_normalize_examples():
    ds = D.TimeSeriesDataset(np.array([[2.0, 4.0, 6.0], [5.0, 5.0, 5.0]]), ["a", "b"])
    n = D.normalize(ds)
    np.testing.assert_array_equal(n.values[0], [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(n.values[1], [0.0, 0.0, 0.0])
    assert list(n.constant) == [False, True]
    np.testing.assert_array_equal(D.denormalize(n).values, ds.values)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=30))
def test_normalize_round_trip(xs):
    ds = D.TimeSeriesDataset(np.array([xs]), ["a"])
    n = D.normalize(ds)
    assert n.values.min() >= 0.0 and n.values.max() <= 1.0
    scale = max(1.0, np.max(np.abs(xs)))
    np.testing.assert_allclose(D.denormalize(n).values, ds.values, rtol=0, atol=1e-12 * scale)


def test_synth_deterministic():
    a, b = D.synth_corpus(8, 30, seed=5, sigma=0.0), D.synth_corpus(8, 30, seed=5, sigma=0.0)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.names == b.names and a.groups == b.groups


def test_synth_noiseless_second_difference_bound():
    # trend is linear, so the second difference is the sinusoid's alone:
    # |d2 A sin(w t + phi)| = 4 A sin^2(w/2) |sin(.)| <= 4 A sin^2(pi/p)
    ds, p = D.synth_corpus(40, 60, seed=2, sigma=0.0, return_params=True)
    bound = 4 * p.amplitude * np.sin(np.pi / p.period) ** 2
    d2 = np.abs(np.diff(ds.values, n=2, axis=1))
    assert np.all(d2 <= bound[:, None] + 1e-12)


def test_synth_groups_partition():
    ds, p = D.synth_corpus(30, 10, seed=1, return_params=True)
    levels = ds.group_levels
    assert set(ds.groups) == set(levels)
    c = ds.conditions
    np.testing.assert_array_equal(c.sum(axis=1), 1.0)
    for g, period in zip(ds.groups, p.period):
        assert g == f"p{period}"
