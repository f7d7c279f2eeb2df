"""Synthetic generator, design tables, splits."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neurodecode import data
from neurodecode.data import (
    SynthConfig,
    TrialMeta,
    animacy_design,
    build_task,
    category_to_label,
    concept_table,
    generate_synthetic,
    split,
)
from neurodecode.errors import DataError


class TestCategoryTable:
    def test_counts_per_category(self):
        rows = concept_table()
        assert len(rows) == data.N_CONCEPTS == 429
        by_cat = {}
        for _, _, cat, _ in rows:
            by_cat[cat] = by_cat.get(cat, 0) + 1
        assert by_cat["animal"] == 113
        assert by_cat["body part"] == 34
        assert by_cat["animal, bird"] == 25
        assert by_cat["animal, food"] == 20
        assert by_cat["animal, insect"] == 17
        assert by_cat["people"] == 5
        assert by_cat["tool"] == 59
        assert by_cat["sports equipment"] == 51
        assert by_cat["electronic device"] == 43
        assert by_cat["musical instrument"] == 33
        assert by_cat["weapon"] == 29

    def test_class_balance(self):
        rows = concept_table()
        alive = sum(1 for _, _, _, lab in rows if lab == 1)
        assert alive == 214
        assert len(rows) - alive == 215

    def test_label_mapping(self):
        assert category_to_label("animal") == 1
        assert category_to_label("tool") == 0
        assert category_to_label("subject") is None

    def test_unique_ids_and_names(self):
        rows = concept_table()
        assert len({cid for cid, _, _, _ in rows}) == 429
        assert len({name for _, name, _, _ in rows}) == 429


class TestDesign:
    def test_full_design_counts(self):
        meta = animacy_design()
        assert len(meta) == 429 * 12 * 46 == 236808
        per_subject = {}
        for m in meta:
            per_subject[m.subject] = per_subject.get(m.subject, 0) + 1
        assert set(per_subject.values()) == {5148}
        assert len(per_subject) == 46

    def test_trial_ids_unique(self):
        meta = animacy_design(n_subjects=2, repetitions=2)
        ids = [m.trial_id for m in meta]
        assert len(set(ids)) == len(ids)

    def test_test_count_at_default_fraction(self):
        assert int(round(0.2 * 236808)) == 47362


class TestSplit:
    def _epochs(self, n=100, seed=0):
        cfg = SynthConfig(mode="linear", n_trials=n, seed=seed)
        return generate_synthetic(cfg)

    def test_sizes_round(self):
        es = split(self._epochs(100), 0.2, 0)
        n_test = sum(1 for m in es.meta if m.split == "test")
        assert n_test == 20
        assert sum(1 for m in es.meta if m.split == "train") == 80

    def test_split_deterministic(self):
        a = split(self._epochs(60), 0.25, 7)
        b = split(self._epochs(60), 0.25, 7)
        assert [m.split for m in a.meta] == [m.split for m in b.meta]

    def test_views_partition(self):
        es = split(self._epochs(50), 0.2, 1)
        tr, te = es.split_view("train"), es.split_view("test")
        assert len(tr) + len(te) == 50
        assert set(m.trial_id for m in tr.meta).isdisjoint(m.trial_id for m in te.meta)

    def test_empty_side_rejected(self):
        es = self._epochs(10)
        with pytest.raises(DataError):
            split(es, 0.0, 0)


class TestSynthetic:
    def test_shapes_and_dtype(self):
        for mode in ("linear", "xor", "subject_signature"):
            es = generate_synthetic(SynthConfig(mode=mode, n_trials=24, seed=0))
            assert es.tensor.shape == (24, 63, 50)
            assert es.tensor.dtype == np.float32
            assert np.isfinite(es.tensor).all()

    def test_linear_exactly_balanced(self):
        es = generate_synthetic(SynthConfig(mode="linear", n_trials=50, seed=2))
        assert int(es.labels.sum()) == 25

    def test_subject_round_robin(self):
        es = generate_synthetic(
            SynthConfig(mode="subject_signature", n_trials=40, n_subjects=4, seed=0)
        )
        assert np.bincount(es.labels).tolist() == [10, 10, 10, 10]
        assert sorted({m.subject for m in es.meta}) == [1, 2, 3, 4]

    def test_bitwise_deterministic(self):
        a = generate_synthetic(SynthConfig(mode="xor", n_trials=64, seed=5))
        b = generate_synthetic(SynthConfig(mode="xor", n_trials=64, seed=5))
        assert np.array_equal(a.tensor.view(np.uint8), b.tensor.view(np.uint8))
        assert [m.to_dict() for m in a.meta] == [m.to_dict() for m in b.meta]

    def test_seeds_differ(self):
        a = generate_synthetic(SynthConfig(mode="linear", n_trials=32, seed=0))
        b = generate_synthetic(SynthConfig(mode="linear", n_trials=32, seed=1))
        assert not np.array_equal(a.tensor, b.tensor)

    def test_zscored_per_trial(self):
        es = generate_synthetic(SynthConfig(mode="linear", n_trials=16, seed=3))
        x = es.tensor.astype(np.float64)
        np.testing.assert_allclose(x.mean(axis=2), 0.0, atol=1e-6)
        np.testing.assert_allclose(x.std(axis=2), 1.0, atol=1e-3)

    def test_envelopes_orthonormal(self):
        w1, w2 = data._envelopes()
        assert abs(float(w1 @ w2)) < 1e-12
        np.testing.assert_allclose(np.sqrt(np.mean(w1**2)), 1.0, rtol=1e-12)
        np.testing.assert_allclose(np.sqrt(np.mean(w2**2)), 1.0, rtol=1e-12)

    def test_xor_class_means_indistinguishable(self):
        # the xor construction leaves first-order statistics identical
        # between classes; with n trials the per-entry difference is
        # noise with standard error ~ sqrt(2/n).  3150 entries make
        # occasional 3-4 SE excursions expected under the null, so the
        # check bounds the tail fraction and the maximum.
        es = generate_synthetic(SynthConfig(mode="xor", n_trials=2000, seed=0))
        x = es.tensor.astype(np.float64)
        y = es.labels
        m1 = x[y == 1].mean(axis=0)
        m0 = x[y == 0].mean(axis=0)
        n1, n0 = int((y == 1).sum()), int((y == 0).sum())
        se = np.sqrt(x[y == 1].var(axis=0) / n1 + x[y == 0].var(axis=0) / n0)
        z = np.abs(m1 - m0) / se
        assert (z > 3.0).mean() <= 0.01
        assert z.max() < 5.0

    def test_mode_validation(self):
        with pytest.raises(DataError):
            SynthConfig(mode="nope", n_trials=10)
        with pytest.raises(DataError):
            SynthConfig(mode="linear", n_trials=3)  # odd


class TestBuildTask:
    def test_subject_filter(self):
        es = generate_synthetic(
            SynthConfig(mode="subject_signature", n_trials=40, n_subjects=4, seed=0)
        )
        one = build_task(es, subject=2)
        assert all(m.subject == 2 for m in one.meta)
        assert len(one) == 10

    def test_unknown_subject_lists_known(self):
        es = generate_synthetic(SynthConfig(mode="linear", n_trials=10, seed=0))
        with pytest.raises(DataError, match="known"):
            build_task(es, subject=99)


class TestRawRoundTrip:
    def test_save_load_epochs(self, tmp_path):
        es = split(generate_synthetic(SynthConfig(mode="linear", n_trials=20, seed=1)), 0.2, 1)
        p = tmp_path / "e.eegb"
        data.save_epochs(p, es)
        back = data.load_epochs(p)
        assert np.array_equal(back.tensor.view(np.uint8), es.tensor.view(np.uint8))
        assert [m.to_dict() for m in back.meta] == [m.to_dict() for m in es.meta]

    def test_save_load_raw(self, tmp_path):
        cfg = SynthConfig(mode="linear", n_trials=6, seed=0)
        rec, meta = data.generate_raw(cfg)
        p = tmp_path / "raw.eegb"
        data.save_raw(p, rec, meta)
        rec2, meta2 = data.load_raw(p)
        assert np.array_equal(rec2.data, rec.data)
        assert rec2.sample_rate == rec.sample_rate
        assert rec2.channel_names == rec.channel_names
        assert rec2.event_onsets == rec.event_onsets
        assert [m.to_dict() for m in meta2] == [m.to_dict() for m in meta]

    def test_raw_only_linear(self):
        with pytest.raises(DataError):
            data.generate_raw(SynthConfig(mode="xor", n_trials=6, seed=0))

    def test_raw_structure(self):
        cfg = SynthConfig(mode="linear", n_trials=6, seed=0)
        rec, meta = data.generate_raw(cfg)
        assert rec.sample_rate == 1000
        assert rec.channel_names[0] == "Cz"
        assert len(rec.channel_names) == 64
        assert len(rec.event_onsets) == 6
        onsets = [o for o, _ in rec.event_onsets]
        assert onsets[0] == 1000  # default lead-in
        assert all(b - a == 100 for a, b in zip(onsets, onsets[1:]))


@settings(max_examples=20, deadline=None)
@given(
    n=st.integers(4, 60).map(lambda v: v * 2),
    frac=st.floats(0.1, 0.5),
    seed=st.integers(0, 1000),
)
def test_split_counts_property(n, frac, seed):
    es = generate_synthetic(SynthConfig(mode="linear", n_trials=n, seed=0))
    out = split(es, frac, seed)
    n_test = sum(1 for m in out.meta if m.split == "test")
    assert n_test == int(round(frac * n))
