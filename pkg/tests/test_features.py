import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from stmtmv.errors import InvalidInputError
from stmtmv.features import (
    FeatureConfig,
    GeoSummary,
    MeteoSnapshot,
    TimeSeriesWindow,
    autocorrelation,
    build_spatial_view,
    build_temporal_view,
    dwt_topk,
    fft_topk,
    paa,
    pla,
    series_features,
    stat_features,
    temporal_layout,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
series = arrays(np.float64, st.integers(4, 40), elements=finite)


# --- independent oracles -------------------------------------------------

def naive_dft_mags(x):
    n = len(x)
    out = []
    for k in range(n // 2 + 1):
        re = sum(x[t] * np.cos(2 * np.pi * k * t / n) for t in range(n))
        im = -sum(x[t] * np.sin(2 * np.pi * k * t / n) for t in range(n))
        out.append(np.hypot(re, im))
    return np.array(out)


def recursive_haar(x):
    """Returns [(level, position, coeff)] with level 0 = coarsest."""
    x = list(x)
    if len(x) == 1:
        return []
    half = len(x) // 2
    approx = [(x[2 * i] + x[2 * i + 1]) / np.sqrt(2) for i in range(half)]
    detail = [(x[2 * i] - x[2 * i + 1]) / np.sqrt(2) for i in range(half)]
    coarser = recursive_haar(approx)
    depth = 1 + (max((lv for lv, _, _ in coarser), default=-1))
    return coarser + [(depth, i, d) for i, d in enumerate(detail)]


def biased_acf(x, lag):
    m = sum(x) / len(x)
    num = sum((x[t] - m) * (x[t + lag] - m) for t in range(len(x) - lag))
    den = sum((v - m) ** 2 for v in x)
    return num / den


# --- stat_features --------------------------------------------------------

def test_stat_constant():
    np.testing.assert_array_equal(stat_features([5, 5, 5]), [5, 0, 5, 5, 0, 0])


def test_stat_small():
    f = stat_features([1, 2, 3])
    np.testing.assert_allclose(f[:5], [2, 2 / 3, 3, 1, 0], atol=1e-15)


def test_stat_normal_sample_matches_scipy():
    # sampling sd of excess kurtosis at n=1000 is ~0.15, so the seed matters
    x = np.random.default_rng(5).standard_normal(1000)
    f = stat_features(x)
    assert abs(f[4]) < 0.2 and abs(f[5]) < 0.2
    assert f[4] == pytest.approx(stats.skew(x, bias=True), rel=1e-10)
    assert f[5] == pytest.approx(stats.kurtosis(x, fisher=True, bias=True), rel=1e-10)
    assert f[1] == pytest.approx(np.var(x), rel=1e-12)


def test_stat_empty():
    with pytest.raises(InvalidInputError):
        stat_features([])


@settings(max_examples=60, deadline=None)
@given(series, st.floats(-100, 100), st.floats(0.1, 10))
def test_stat_shift_scale(x, c, a):
    if np.ptp(x) < 1e-3:
        return
    base = stat_features(x)
    shifted = stat_features(x + c)
    assert shifted[0] == pytest.approx(base[0] + c, abs=1e-8)
    np.testing.assert_allclose(shifted[[1, 4, 5]], base[[1, 4, 5]], rtol=1e-6, atol=1e-6)
    scaled = stat_features(a * x)
    assert scaled[1] == pytest.approx(a * a * base[1], rel=1e-9)
    np.testing.assert_allclose(scaled[[4, 5]], base[[4, 5]], rtol=1e-6, atol=1e-6)


# --- autocorrelation ------------------------------------------------------

def test_acf_lag0_and_constant():
    assert autocorrelation([3, 1, 4, 1, 5], 0) == 1.0
    assert autocorrelation([2, 2, 2, 2], 1) == 0.0


def test_acf_alternating():
    expected = biased_acf([1, -1, 1, -1], 1)
    assert expected == pytest.approx(-0.75)
    assert autocorrelation([1, -1, 1, -1], 1) == pytest.approx(expected, abs=1e-15)


def test_acf_bad_lag():
    with pytest.raises(InvalidInputError):
        autocorrelation([1, 2, 3], 3)


@settings(max_examples=60, deadline=None)
@given(series, st.integers(0, 3))
def test_acf_reversal_and_bounds(x, lag):
    r = autocorrelation(x, lag)
    assert -1 - 1e-12 <= r <= 1 + 1e-12
    assert autocorrelation(x[::-1], lag) == pytest.approx(r, abs=1e-9)
    if np.ptp(x) > 1e-3:
        assert r == pytest.approx(biased_acf(list(x), lag), abs=1e-9)


# --- PAA / PLA --------------------------------------------------------------

def paa_oracle(x, segments):
    # repeat each sample `segments` times: every segment then owns n whole copies
    return np.repeat(np.asarray(x, float), segments).reshape(segments, -1).mean(axis=1)


def test_paa_cases():
    np.testing.assert_allclose(paa([1, 2, 3, 4], 2), [1.5, 3.5])
    np.testing.assert_allclose(paa([1, 2, 3], 2), [4 / 3, 8 / 3])
    x = np.array([3.0, -1.0, 2.5])
    np.testing.assert_array_equal(paa(x, 3), x)


def test_paa_too_many_segments():
    with pytest.raises(InvalidInputError):
        paa([1, 2], 3)


@settings(max_examples=60, deadline=None)
@given(series, st.integers(1, 7))
def test_paa_oracle_and_mean(x, segments):
    segments = min(segments, x.size)
    out = paa(x, segments)
    np.testing.assert_allclose(out, paa_oracle(x, segments), rtol=1e-10, atol=1e-9)
    assert out.mean() == pytest.approx(x.mean(), abs=1e-8)
    np.testing.assert_allclose(paa(x, x.size), x)


def test_pla_cases():
    np.testing.assert_allclose(pla([4.0] * 8, 4), [0, 4] * 4)
    t = np.arange(6)
    np.testing.assert_allclose(pla(2 * t + 1, 1), [2, 1], atol=1e-12)
    out = pla([0, 1, 4, 9], 2)
    oracle = np.concatenate([np.polyfit([0, 1], [0, 1], 1), np.polyfit([0, 1], [4, 9], 1)])
    np.testing.assert_allclose(out, oracle, atol=1e-12)


def test_pla_too_short():
    with pytest.raises(InvalidInputError):
        pla([1, 2, 3], 2)


# --- spectral ---------------------------------------------------------------

def test_fft_constant():
    np.testing.assert_array_equal(fft_topk([7.0] * 12), [0, 0, 0])


def test_fft_cosine_bin2():
    n = 16
    x = np.cos(2 * np.pi * 2 * np.arange(n) / n)
    ref = naive_dft_mags(x)
    top = fft_topk(x, 1)
    assert top[0] == pytest.approx(ref[2], rel=1e-12)
    assert int(np.argmax(ref[1:])) + 1 == 2


def test_fft_two_sinusoids_ranking():
    n = 32
    t = np.arange(n)
    x = 3 * np.sin(2 * np.pi * 5 * t / n) + 1.5 * np.cos(2 * np.pi * 11 * t / n) + 0.2
    ref = naive_dft_mags(x)[1:]
    np.testing.assert_allclose(fft_topk(x, 2), np.sort(ref)[::-1][:2], rtol=1e-10)
    assert list(np.argsort(-ref)[:2] + 1) == [5, 11]


def test_fft_pads_short_series():
    out = fft_topk([1.0, 3.0], 3)
    assert out[1] == out[2] == 0 and out[0] == pytest.approx(2.0)


def test_dwt_constant_and_step():
    np.testing.assert_array_equal(dwt_topk([2.0] * 8), [0, 0, 0])
    out = dwt_topk([1, 1, -1, -1], 3)
    ref = recursive_haar([1, 1, -1, -1])
    coarsest = [c for lv, _, c in ref if lv == 0]
    assert out[0] == pytest.approx(abs(coarsest[0]))
    np.testing.assert_allclose(out, [2, 0, 0], atol=1e-12)


def test_dwt_ramp_matches_recursive():
    x = np.arange(8, dtype=float)
    ref = recursive_haar(x)
    ranked = sorted(ref, key=lambda r: (-round(abs(r[2]), 12), r[0], r[1]))
    np.testing.assert_allclose(dwt_topk(x, 3), [abs(r[2]) for r in ranked[:3]], rtol=1e-12)


def test_dwt_truncates_to_recent_power_of_two():
    x = np.array([100.0, 1, 2, 3, 4, 5, 6, 7, 8])
    np.testing.assert_allclose(dwt_topk(x), dwt_topk(x[1:]))


@settings(max_examples=50, deadline=None)
@given(series, st.floats(-50, 50))
def test_spectral_shift_invariance(x, c):
    np.testing.assert_allclose(fft_topk(x + c), fft_topk(x), atol=1e-6 * (1 + np.abs(x).max()) * x.size)
    np.testing.assert_allclose(dwt_topk(x + c), dwt_topk(x), atol=1e-6 * (1 + np.abs(x).max()))


# --- views -------------------------------------------------------------------

def _meteo(w="rain"):
    return MeteoSnapshot(21.5, 70.0, 1012.0, 3.2, w)


def test_temporal_dimension():
    cfg = FeatureConfig()
    assert cfg.temporal_dim == 146
    wins = [TimeSeriesWindow(np.random.default_rng(i).random(12)) for i in range(5)]
    fv = build_temporal_view(*wins, meteo=_meteo(), hour_of_day=13, cfg=cfg)
    assert fv.values.size == 146 and len(fv.layout) == 146


def test_temporal_constant_inputs_zero_dynamics():
    cfg = FeatureConfig()
    wins = [TimeSeriesWindow(np.full(12, v)) for v in (0.6, 0.3, 7.2, 50.0, 280.0)]
    fv = build_temporal_view(*wins, meteo=_meteo(), hour_of_day=0, cfg=cfg)
    for name, value in zip(fv.layout, fv.values):
        if any(tag in name for tag in (".fft", ".dwt", ".slope", ".acf", ".var", ".skew", ".kurt")):
            assert value == 0.0, name


def test_temporal_golden_composition():
    rng = np.random.default_rng(42)
    raw = [rng.normal(size=12) for _ in range(5)]
    cfg = FeatureConfig()
    fv = build_temporal_view(*[TimeSeriesWindow(r) for r in raw], meteo=_meteo("fog"), hour_of_day=6, cfg=cfg)
    expected = []
    for r in raw:
        expected += list(stat_features(r))
        expected += [biased_acf(list(r), lag) for lag in (1, 2, 3)]
        expected += list(paa_oracle(r, 4))
        for seg in np.array_split(r, 4):
            expected += list(np.polyfit(np.arange(seg.size), seg, 1))
        expected += sorted(naive_dft_mags(r)[1:], reverse=True)[:3]
        expected += sorted((abs(c) for _, _, c in recursive_haar(r[-8:])), reverse=True)[:3]
    expected += [21.5, 70.0, 1012.0, 3.2, 0, 0, 1, 0, 0, 1.0, 0.0]
    np.testing.assert_allclose(fv.values, expected, rtol=1e-9, atol=1e-12)


def test_temporal_layout_deterministic():
    assert temporal_layout(FeatureConfig()) == temporal_layout(FeatureConfig())
    assert len(set(temporal_layout())) == 146


def test_temporal_rejects_mismatched_span():
    wins = [TimeSeriesWindow(np.ones(12)) for _ in range(4)] + [TimeSeriesWindow(np.ones(6), span=6)]
    with pytest.raises(InvalidInputError):
        build_temporal_view(*wins, meteo=_meteo(), hour_of_day=1)


def test_meteo_validation():
    wins = [TimeSeriesWindow(np.ones(12)) for _ in range(5)]
    with pytest.raises(InvalidInputError):
        build_temporal_view(*wins, meteo=_meteo("hail"), hour_of_day=1)
    with pytest.raises(InvalidInputError):
        build_temporal_view(*wins, meteo=MeteoSnapshot(20, 120, 1000, 1, "rain"), hour_of_day=1)


def _geo():
    return GeoSummary(12.5, 40, tuple(range(20)), 3.5)


def test_spatial_view():
    fv = build_spatial_view(_geo(), [0.4, 0.8], [1, 3])
    assert fv.values.size == 24
    assert fv.values[-1] == pytest.approx((0.4 * 1 + 0.8 * 3) / 4)
    assert fv.values[-1] == pytest.approx(0.7)
    assert build_spatial_view(_geo(), [0.8], [1]).values[-1] == pytest.approx(0.8)
    assert build_spatial_view(_geo(), [0.5, 0.9], [0, 0]).values[-1] == 0.0
    assert build_spatial_view(_geo(), [], []).values[-1] == 0.0


def test_spatial_view_errors():
    with pytest.raises(InvalidInputError):
        build_spatial_view(_geo(), [0.4, 0.8], [1])
    with pytest.raises(InvalidInputError):
        build_spatial_view(_geo(), [0.4], [-1])
    with pytest.raises(InvalidInputError):
        build_spatial_view(GeoSummary(1, 1, (1, 2), 1), [], [])


def test_series_features_length():
    assert series_features(np.arange(12.0)).size == FeatureConfig().per_series == 27
