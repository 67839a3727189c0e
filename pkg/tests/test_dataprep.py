import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deformtime import dataprep as dp
from oracles import pearson_ref, windows_ref


def _ds(exog, target):
    exog = np.asarray(exog, dtype=float)
    if exog.ndim == 1:
        exog = exog[:, None]
    names = [f"c{i}" for i in range(exog.shape[1])] + ["y"]
    return dp.TimeSeriesDataset(np.arange(len(target)), exog, target, names)


# ----------------------------------------------------------------- csv

def test_load_csv_shape(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("t,a,b,y\n0,1,2,3\n1,4,5,6\n2,7,8,9\n")
    ds = dp.load_csv(p, "y")
    assert ds.T == 3 and ds.C == 2
    assert ds.column_names == ["a", "b", "y"]
    np.testing.assert_array_equal(ds.target, [3, 6, 9])


def test_load_csv_target_in_middle(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("# generated\nt,a,y,b\n2020-01-01,1,2,3\n2020-01-02,4,5,6\n")
    ds = dp.load_csv(p, "y")
    assert ds.column_names == ["a", "b", "y"]
    np.testing.assert_array_equal(ds.exog, [[1, 3], [4, 6]])


@pytest.mark.parametrize("body", ["0,1,2\n2,1,2\n", "0,1,2\n0,1,2\n", "1,1,2\n0,1,2\n", "0,1,x\n1,1,2\n"])
def test_load_csv_rejections(tmp_path, body):
    p = tmp_path / "d.csv"
    p.write_text("t,a,y\n" + body)
    with pytest.raises(dp.DataError):
        dp.load_csv(p, "y")


def test_load_csv_missing_target(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("t,a,b\n0,1,2\n")
    with pytest.raises(dp.DataError, match="target"):
        dp.load_csv(p, "y")


def test_csv_roundtrip(tmp_path):
    ds = dp.generate_synthetic(dp.SyntheticSpec(T=30, C=2, seed=3, noise=0.1))
    dp.save_csv(ds, tmp_path / "s.csv", comment="spec")
    back = dp.load_csv(tmp_path / "s.csv", "y")
    np.testing.assert_array_equal(back.exog, ds.exog)
    np.testing.assert_array_equal(back.target, ds.target)


# ----------------------------------------------------------------- interpolation

def test_weekly_to_daily_slope():
    daily = dp.weekly_to_daily([10, 17], anchor_offset=3)
    assert daily[3] == 10 and daily[10] == 17
    assert daily[5] == 12
    assert daily[0] == 10 and daily[13] == 17


def test_weekly_to_daily_constant():
    np.testing.assert_array_equal(dp.weekly_to_daily([4.0] * 5, 2), np.full(35, 4.0))


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=20), st.integers(0, 6))
def test_weekly_to_daily_hits_anchors(weekly, off):
    daily = dp.weekly_to_daily(weekly, off)
    np.testing.assert_array_equal(daily[off::7], weekly)


# ----------------------------------------------------------------- normalisation

def test_standardize_hand_value():
    ds = dp.standardize(_ds([[1.0], [2.0], [3.0]], [5.0, 5.0, 5.0]), (0, 3))
    np.testing.assert_allclose(ds.exog[:, 0], [-1.224744871391589, 0, 1.224744871391589], atol=1e-12)
    np.testing.assert_array_equal(ds.target, [0, 0, 0])
    assert abs(ds.norm_stats["c0"][1] - 0.816496580927726) < 1e-12


@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=30).filter(lambda v: np.std(v) > 1e-3))
def test_standardize_roundtrip(vals):
    raw = _ds(np.array(vals)[:, None] * 2 + 1, np.array(vals))
    z = dp.standardize(raw, (0, len(vals) - 1) if np.std(vals[:-1]) > 1e-3 else (0, len(vals)))
    back = dp.destandardize(z)
    np.testing.assert_allclose(back.target, raw.target, atol=1e-10 * max(1, np.abs(vals).max()))
    np.testing.assert_allclose(z.denormalize_target(z.target), raw.target, atol=1e-10 * max(1, np.abs(vals).max()))


def test_standardize_window():
    Z = np.array([[3.0, 0.0], [3.0, 2.0]])
    out = dp.standardize_window(Z)
    np.testing.assert_array_equal(out, [[0, -1], [0, 1]])
    np.testing.assert_allclose(dp.standardize_window(out), out, atol=1e-10)


# ----------------------------------------------------------------- correlation

def test_rank_signed():
    ds = _ds([[3, 2], [2, 4], [1, 6]], [1.0, 2.0, 3.0])
    assert dp.rank_by_correlation(ds, (0, 3)) == [1, 0]
    assert dp.rank_by_correlation(ds, (0, 3), absolute=True) == [0, 1]


def test_rank_ties_and_constants():
    y = np.array([1.0, 2.0, 4.0, 3.0])
    ds = _ds(np.column_stack([y, y, y]), y)
    assert dp.rank_by_correlation(ds, (0, 4)) == [0, 1, 2]
    ds2 = _ds(np.column_stack([np.ones(4), y * 0.5 + np.array([0, 0.1, 0, 0])]), y)
    assert dp.rank_by_correlation(ds2, (0, 4)) == [1, 0]


def test_correlations_match_flat_oracle(rng):
    X = rng.normal(size=(40, 5))
    y = rng.normal(size=40)
    r = dp.column_correlations(_ds(X, y), (5, 40))
    for i in range(5):
        assert abs(r[i] - pearson_ref(X[5:, i].tolist(), y[5:].tolist())) < 1e-12


@given(st.integers(1, 8), st.integers(0, 10_000))
def test_rank_is_permutation(C, seed):
    g = np.random.default_rng(seed)
    ds = _ds(g.normal(size=(12, C)), g.normal(size=12))
    assert sorted(dp.rank_by_correlation(ds, (0, 12))) == list(range(C))


def test_select_features(rng):
    y = rng.normal(size=500)
    noise = rng.normal(size=(500, 3))

    def col(r):
        return r * y + np.sqrt(1 - r**2) * noise[:, len(cols)]

    cols = []
    for r in (0.9, 0.4, 0.6):
        cols.append(col(r))
    ds = _ds(np.column_stack(cols), y)
    r = dp.column_correlations(ds, (0, 500))
    out = dp.select_features(ds, 0.5, (0, 500))
    assert out.column_names == ["c0", "c2", "y"]
    assert r[0] > 0.5 and r[2] > 0.5 and r[1] < 0.5
    assert dp.select_features(ds, 0.0, (0, 500)).C == 3
    with pytest.raises(dp.DataError, match="lower tau"):
        dp.select_features(ds, 0.95, (0, 500))


# ----------------------------------------------------------------- windows

def test_window_index_example():
    T = 10
    ds = _ds(np.arange(T, dtype=float) * 10, np.arange(T, dtype=float))
    ws = {w.anchor_t: w for w in dp.build_windows(ds, L=3, H=2, delta=1)}
    w = ws[5]
    np.testing.assert_array_equal(w.Z[:, 0], [30, 40, 50])
    np.testing.assert_array_equal(w.Z[:, -1], [2, 3, 4])
    np.testing.assert_array_equal(w.targets, [6, 7])


def test_window_delta_zero_and_exact_length():
    ds = _ds(np.arange(6.0), np.arange(6.0))
    ws = dp.build_windows(ds, L=3, H=2, delta=0)
    for w in ws:
        np.testing.assert_array_equal(w.Z[:, 0], w.Z[:, 1])
    ds = _ds(np.arange(7.0), np.arange(7.0))
    assert len(dp.build_windows(ds, L=3, H=2, delta=2)) == 1
    with pytest.raises(dp.DataError):
        dp.build_windows(ds, L=3, H=3, delta=2)


@settings(max_examples=60)
@given(st.integers(1, 10), st.integers(1, 5), st.sampled_from([0, 1, 7, 14]), st.integers(0, 50))
def test_windows_match_enumeration(L, H, delta, T):
    if T < L + delta + H:
        return
    y = np.arange(T, dtype=float)
    ds = _ds(-y, y)
    got = dp.build_windows(ds, L, H, delta)
    ref = windows_ref(T, L, H, delta)
    assert len(got) == len(ref) == T - H - L - delta + 1
    for w, (t, exo, endo, tgt) in zip(got, ref):
        assert w.anchor_t == t
        np.testing.assert_array_equal(w.Z[:, 0], -y[exo])
        np.testing.assert_array_equal(w.Z[:, -1], y[endo])
        np.testing.assert_array_equal(w.targets, y[tgt])


def test_windows_respect_span():
    y = np.arange(40, dtype=float)
    ds = _ds(y, y)
    for w in dp.build_windows(ds, 4, 2, 1, span=(10, 25)):
        assert w.Z[:, -1].min() >= 10 and w.targets.max() <= 24


# ----------------------------------------------------------------- validation split

def _seasons(n_seasons=4, length=120, peak_at=60):
    t = np.arange(length)
    one = np.maximum(0, 10 - np.abs(t - peak_at) * 0.2)
    return np.tile(one, n_seasons)


def test_validation_split_peak_centered():
    y = _seasons()
    ds = _ds(y, y)
    b = [0, 120, 240, 360, 480]
    plan = dp.validation_split(ds, b, onset_threshold=1.0)
    peak_seg = plan.validation[1]
    assert peak_seg == (120 + 60 - 29, 120 + 60 + 31)
    assert plan.test == (360, 480)
    assert not plan.flags


def test_validation_split_known_onset():
    y = _seasons()
    ds = _ds(y, y)
    thr = 2.0
    season = y[240:360]
    # brute-force scan of the two-week rule
    d = next(i for i in range(len(season) - 14) if all(v > thr for v in season[i + 1 : i + 15]))
    plan = dp.validation_split(ds, [0, 120, 240, 360, 480], thr)
    lo, hi = plan.validation[2]
    assert (lo, hi - 1) == (240 + d - 29, 240 + d + 30)
    assert hi - lo == 60


def test_validation_split_fallback_flag():
    y = _seasons()
    plan = dp.validation_split(_ds(y, y), [0, 120, 240, 360, 480], onset_threshold=1e9)
    assert any("onset_not_found" in f for f in plan.flags)
    assert any("outset_not_found" in f for f in plan.flags)


def test_split_ranges_disjoint():
    y = _seasons()
    plan = dp.validation_split(_ds(y, y), [0, 120, 240, 360, 480], 1.0)
    covered = np.zeros(480, dtype=int)
    for lo, hi in plan.train + plan.validation + [plan.test]:
        covered[lo:hi] += 1
    assert covered.max() == 1


# ----------------------------------------------------------------- synthetic

def test_synthetic_exact_lag():
    ds = dp.generate_synthetic(dp.SyntheticSpec(T=50, C=1, lags=[3], weights=[1.0], seed=1))
    np.testing.assert_array_equal(ds.target[3:], ds.exog[:-3, 0])
    assert abs(pearson_ref(ds.exog[:-3, 0].tolist(), ds.target[3:].tolist()) - 1) < 1e-12


def test_synthetic_deterministic():
    spec = dp.SyntheticSpec(T=100, C=3, noise=0.3, period=20, seasonal_amp=1, seed=9)
    a, b = dp.generate_synthetic(spec), dp.generate_synthetic(spec)
    assert a.exog.tobytes() == b.exog.tobytes() and a.target.tobytes() == b.target.tobytes()
