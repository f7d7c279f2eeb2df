"""Preprocessing pipeline: oracles and invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neurodecode import data, pipeline
from neurodecode.errors import DataError
from neurodecode.pipeline import (
    Epoch,
    PipelineConfig,
    RawRecording,
    bandpass,
    baseline_correct,
    crop_and_zscore,
    downsample,
    extract_epochs,
    rereference,
    run_pipeline,
)


def _rec(data_arr, rate=1000, onsets=(), names=None):
    n = data_arr.shape[0]
    if names is None:
        names = ("Cz",) + tuple(f"E{i:02d}" for i in range(1, n))
    return RawRecording(
        data=np.asarray(data_arr, dtype=np.float64),
        channel_names=names,
        sample_rate=rate,
        event_onsets=tuple(onsets),
    )


class TestRereference:
    def test_subtracts_reference_and_drops_it(self):
        arr = np.array([[1.0, 2.0], [5.0, 7.0], [3.0, -1.0]])
        rec = _rec(arr, names=("Cz", "E01", "E02"))
        out = rereference(rec, "Cz")
        assert out.channel_names == ("E01", "E02")
        np.testing.assert_allclose(out.data, [[4.0, 5.0], [2.0, -3.0]])

    def test_common_mode_cancellation(self):
        rng = np.random.default_rng(0)
        common = rng.standard_normal(500)
        arr = np.tile(common, (4, 1))
        rec = _rec(arr, names=("Cz", "E01", "E02", "E03"))
        out = rereference(rec, "Cz")
        assert np.abs(out.data).max() == 0.0

    def test_unknown_reference(self):
        rec = _rec(np.zeros((2, 10)), names=("A", "B"))
        with pytest.raises(DataError):
            rereference(rec, "Cz")


class TestBandpass:
    def test_zero_phase_impulse_symmetry(self):
        # forward-backward filtering has zero phase: the impulse
        # response must be symmetric around the impulse.  The short
        # 24-sample padding leaves ~1e-4 edge transients (the 1 Hz
        # corner settles over hundreds of samples), so compare the
        # central region against the peak; a causal filter would show
        # asymmetry on the order of the peak itself.
        n = 2001
        arr = np.zeros((1, n))
        arr[0, n // 2] = 1.0
        rec = _rec(arr, names=("E01",))
        out = bandpass(rec, 1.0, 40.0).data[0]
        mid = out[400:-400]
        sym_err = np.abs(mid - mid[::-1]).max()
        assert sym_err < 1e-2 * np.abs(out).max()

    def test_linearity(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((2, 800))
        b = rng.standard_normal((2, 800))
        fa = bandpass(_rec(a, names=("x", "y")), 1.0, 40.0).data
        fb = bandpass(_rec(b, names=("x", "y")), 1.0, 40.0).data
        fab = bandpass(_rec(a + 2.0 * b, names=("x", "y")), 1.0, 40.0).data
        np.testing.assert_allclose(fab, fa + 2.0 * fb, atol=1e-9)

    def test_stopband_attenuation(self):
        # an order-4 butterworth run twice gives |H|^2 = 1/(1+r^8):
        # ~0.19 at 50 Hz (r=1.25), ~0.004 at 80 Hz, tiny at 0.2 Hz
        t = np.arange(4000) / 1000.0
        line = np.sin(2 * np.pi * 50.0 * t)  # just above the band edge
        high = np.sin(2 * np.pi * 80.0 * t)  # well above
        drift = np.sin(2 * np.pi * 0.2 * t)  # slow drift, below the band
        keep = np.sin(2 * np.pi * 10.0 * t)  # inside the band
        rec = _rec(np.stack([line, high, drift, keep]), names=("a", "b", "c", "d"))
        out = bandpass(rec, 1.0, 40.0).data
        # the short pinned padding lets edge transients reach deep into
        # the signal; judge the response on the central steady state
        mid = slice(1700, 2300)
        assert np.abs(out[0, mid]).max() < 0.25
        assert np.abs(out[1, mid]).max() < 0.05
        assert np.abs(out[2, mid]).max() < 0.01
        assert 0.9 < np.abs(out[3, mid]).max() < 1.1

    def test_too_short_signal(self):
        rec = _rec(np.zeros((1, 10)), names=("a",))
        with pytest.raises(DataError):
            bandpass(rec, 1.0, 40.0)


class TestDownsample:
    def test_keeps_every_kth_sample(self):
        arr = np.arange(40.0)[None, :]
        rec = _rec(arr, rate=1000, names=("a",), onsets=((10, 0), (25, 1)))
        out = downsample(rec, 100)
        np.testing.assert_array_equal(out.data[0], np.arange(0.0, 40.0, 10.0))
        assert out.sample_rate == 100
        # onsets divide by the factor, flooring
        assert out.event_onsets == ((1, 0), (2, 1))

    def test_non_integer_factor(self):
        rec = _rec(np.zeros((1, 30)), rate=1000, names=("a",))
        with pytest.raises(DataError):
            downsample(rec, 300)


class TestEpochs:
    def test_window_and_skip_reporting(self):
        n = 200
        arr = np.arange(n, dtype=np.float64)[None, :]
        # onset 5 leaves no room for the 20-sample pre-window; onset 190
        # leaves no room for the 50-sample post-window
        rec = _rec(arr, rate=100, names=("a",), onsets=((5, 0), (100, 1), (190, 2)))
        kept, skipped = extract_epochs(rec, pre_ms=200, post_ms=500)
        assert [t for t, _ in kept] == [1]
        assert sorted(t for t, _ in skipped) == [0, 2]
        for _, reason in skipped:
            assert isinstance(reason, str) and reason
        ep = kept[0][1]
        assert ep.data.shape == (1, 70)
        assert ep.t0_offset == 20
        np.testing.assert_array_equal(ep.data[0], np.arange(80.0, 150.0))

    def test_baseline_oracle(self):
        # window mean [1, 3] -> 2 and [2, 2] -> 2, subtracted everywhere
        arr = np.array([[1.0, 3.0, 1.0, 3.0], [2.0, 2.0, 2.0, 2.0]])
        ep = Epoch(data=arr, t0_offset=2)
        out = baseline_correct(ep)
        np.testing.assert_allclose(out.data, [[-1.0, 1.0, -1.0, 1.0], [0.0, 0.0, 0.0, 0.0]])

    def test_baseline_requires_window(self):
        ep = Epoch(data=np.zeros((1, 4)), t0_offset=0)
        with pytest.raises(DataError):
            baseline_correct(ep)

    def test_crop_and_zscore(self):
        rng = np.random.default_rng(2)
        ep = Epoch(data=rng.standard_normal((3, 70)) * 5 + 2, t0_offset=20)
        out = crop_and_zscore(ep, n_keep=50)
        assert out.shape == (3, 50)
        np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-12)
        # std slightly under 1 because of the epsilon in the denominator
        assert np.all(out.std(axis=1) < 1.0)
        assert np.all(out.std(axis=1) > 0.99)


class TestFullPipeline:
    def test_on_synthetic_raw(self):
        cfg = data.SynthConfig(mode="linear", n_trials=20, seed=0)
        rec, meta = data.generate_raw(cfg)
        tensor, trial_ids, skipped = run_pipeline(rec, PipelineConfig())
        assert tensor.dtype == np.float32
        assert tensor.shape[1] == 63 and tensor.shape[2] == 50
        assert tensor.shape[0] + len(skipped) == len(rec.event_onsets)
        assert np.isfinite(tensor).all()
        np.testing.assert_allclose(tensor.mean(axis=2), 0.0, atol=1e-5)

    def test_short_lead_in_skips_first_trials(self):
        cfg = data.SynthConfig(mode="linear", n_trials=8, seed=0)
        rec, _ = data.generate_raw(cfg, lead_in_ms=50)
        tensor, trial_ids, skipped = run_pipeline(rec, PipelineConfig())
        assert len(skipped) >= 1
        assert len(trial_ids) + len(skipped) == 8

    def test_deterministic(self):
        cfg = data.SynthConfig(mode="linear", n_trials=10, seed=3)
        rec, _ = data.generate_raw(cfg)
        t1, _, _ = run_pipeline(rec, PipelineConfig())
        t2, _, _ = run_pipeline(rec, PipelineConfig())
        assert np.array_equal(t1.view(np.uint8), t2.view(np.uint8))

    def test_config_validation(self):
        with pytest.raises(DataError):
            PipelineConfig(band=(0.0, 40.0))
        with pytest.raises(DataError):
            PipelineConfig(band=(1.0, 60.0))  # above nyquist of 100 Hz


@settings(max_examples=25, deadline=None)
@given(
    scale=st.floats(0.1, 100.0),
    shift=st.floats(-50.0, 50.0),
    seed=st.integers(0, 2**16),
)
def test_zscore_scale_shift_invariance(scale, shift, seed):
    """Per-channel z-scoring is invariant to affine rescaling (up to eps)."""
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((4, 70))
    ep_a = Epoch(data=base.copy(), t0_offset=20)
    ep_b = Epoch(data=base * scale + shift, t0_offset=20)
    za = crop_and_zscore(ep_a)
    zb = crop_and_zscore(ep_b)
    np.testing.assert_allclose(za, zb, atol=1e-4)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**16), factor=st.sampled_from([2, 5, 10]))
def test_downsample_preserves_values(seed, factor):
    rng = np.random.default_rng(seed)
    arr = rng.standard_normal((3, 120))
    rec = _rec(arr, rate=1000, names=("a", "b", "c"))
    out = downsample(rec, 1000 // factor)
    np.testing.assert_array_equal(out.data, arr[:, ::factor])
