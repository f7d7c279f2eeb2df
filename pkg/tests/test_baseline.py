"""CSP + shrinkage LDA reference decoder."""

import numpy as np
import pytest

from neurodecode import baseline
from neurodecode.baseline import csp_features, fit_csp, fit_csp_lda
from neurodecode.data import SynthConfig, generate_synthetic, split
from neurodecode.errors import DataError


def variance_contrast_trials(n=200, c=8, t=400, seed=0):
    """Two classes differing only in which channel carries high variance.

    Channel 0 is loud for class 1, channel 1 for class 0: the textbook
    CSP geometry with a known best filter direction per class.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, c, t))
    y = np.repeat([0, 1], n // 2)
    x[y == 1, 0, :] *= 4.0
    x[y == 0, 1, :] *= 4.0
    return x, y


class TestCsp:
    def test_filters_find_planted_axes(self):
        x, y = variance_contrast_trials()
        model = fit_csp(x, y, n_pairs=1)
        assert model.filters.shape == (2, 8)
        # first filter extremizes class-1 variance: mass on channel 0
        top = np.abs(model.filters[0]) / np.linalg.norm(model.filters[0])
        bot = np.abs(model.filters[1]) / np.linalg.norm(model.filters[1])
        assert top[0] > 0.95
        assert bot[1] > 0.95

    def test_eigenvalue_order(self):
        x, y = variance_contrast_trials()
        model = fit_csp(x, y, n_pairs=2)
        # eigenvalues of sigma_1 w = lam (sigma_0+sigma_1) w live in (0,1),
        # stored extremes-first: [largest m, smallest m]
        assert model.eigenvalues.shape == (4,)
        assert (model.eigenvalues > 0).all() and (model.eigenvalues < 1).all()
        assert model.eigenvalues[0] > 0.5 > model.eigenvalues[-1]

    def test_feature_shape_and_finiteness(self):
        x, y = variance_contrast_trials(n=60)
        model = fit_csp(x, y, n_pairs=3)
        feats = csp_features(model, x)
        assert feats.shape == (60, 6)
        assert np.isfinite(feats).all()

    def test_separable_task_high_accuracy(self):
        x, y = variance_contrast_trials(n=300, seed=1)
        pipe = fit_csp_lda(x[:200], y[:200])
        acc = float((pipe.predict(x[200:]) == y[200:]).mean())
        assert acc > 0.95

    def test_missing_class_rejected(self):
        x, y = variance_contrast_trials(n=40)
        with pytest.raises(DataError, match="classes"):
            fit_csp(x, np.zeros_like(y))
        with pytest.raises(DataError, match="classes"):
            fit_csp(x, y + 1)

    def test_bad_rank_rejected(self):
        x = np.zeros((10, 3, 50))
        y = np.repeat([0, 1], 5)
        with pytest.raises((DataError, baseline.NumericError)):
            fit_csp_lda(x, y)

    def test_deterministic(self):
        x, y = variance_contrast_trials(n=80, seed=2)
        a = fit_csp_lda(x, y)
        b = fit_csp_lda(x, y)
        assert np.array_equal(a.csp.filters, b.csp.filters)
        assert np.array_equal(a.lda.weights, b.lda.weights)
        assert a.lda.bias == b.lda.bias


class TestOnSynthetic:
    def test_linear_mode_separable(self):
        es = split(
            generate_synthetic(SynthConfig(mode="linear", n_trials=600, seed=0)), 0.25, 0
        )
        tr, te = es.split_view("train"), es.split_view("test")
        pipe = fit_csp_lda(tr.tensor.astype(np.float64), tr.labels)
        acc = float((pipe.predict(te.tensor.astype(np.float64)) == te.labels).mean())
        assert acc > 0.9

    def test_xor_mode_at_chance(self):
        # covariance statistics are class-identical by construction, so
        # the linear pipeline cannot beat coin flipping beyond noise
        es = split(
            generate_synthetic(SynthConfig(mode="xor", n_trials=1200, seed=0)), 0.25, 0
        )
        tr, te = es.split_view("train"), es.split_view("test")
        pipe = fit_csp_lda(tr.tensor.astype(np.float64), tr.labels)
        acc = float((pipe.predict(te.tensor.astype(np.float64)) == te.labels).mean())
        assert 0.38 < acc < 0.62
