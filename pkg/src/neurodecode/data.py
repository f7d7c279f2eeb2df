"""Trial metadata, epoch containers, task builders, and synthetic data.

The decoding task is binary animacy classification over visual-object
concepts grouped into eleven categories.  This module owns the category
to label table, the full-scale experimental design (subjects x concepts
x repetitions), train/test splitting, and seeded synthetic generators
used to exercise every downstream stage at desk scale:

``linear``
    Class-signed spatial pattern with a fixed temporal envelope, plus a
    class-indexed oscillatory variance carrier.  Linearly separable;
    both the covariance baseline and the trained decoders should solve
    it.
``xor``
    Two spatial patterns whose signs are drawn independently; the label
    is their parity.  The two patterns ride on quadrature temporal
    envelopes, so class-conditional means and second-order statistics
    are identical and any linear-in-covariance decoder sits at chance.
``subject_signature``
    Each subject gets a random spatial fingerprint; the label is the
    subject index.  A sanity task for subject-identity leakage.

All randomness flows through numpy's default PCG64 generator, seeded
from a single ``SeedSequence`` so that independent streams (patterns,
noise, labels) are reproducible bit for bit across runs and platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from . import eegb
from .errors import DataError
from .pipeline import RawRecording

# Category table for the animacy task: category name -> number of
# concepts.  Label 1 = alive, 0 = not alive; anything absent (e.g.
# "vehicle") is excluded from the task.
ALIVE_CATEGORIES: dict[str, int] = {
    "animal": 113,
    "body part": 34,
    "animal, bird": 25,
    "animal, food": 20,
    "animal, insect": 17,
    "people": 5,
}
NONLIVING_CATEGORIES: dict[str, int] = {
    "tool": 59,
    "sports equipment": 51,
    "electronic device": 43,
    "musical instrument": 33,
    "weapon": 29,
}
N_CONCEPTS = sum(ALIVE_CATEGORIES.values()) + sum(NONLIVING_CATEGORIES.values())  # 429

N_CHANNELS = 63
N_SAMPLES = 50

# Per-mode signal-to-noise defaults, fixed by the pilot sweep in
# scripts/pilot_snr.py (see its header for the recorded accuracies).
DEFAULT_SNR: dict[str, float] = {
    "linear": 1.2,
    "xor": 1.5,
    "subject_signature": 1.2,
}


def category_to_label(category: str) -> int | None:
    """Map a category name to its animacy label, or None if excluded."""
    if category in ALIVE_CATEGORIES:
        return 1
    if category in NONLIVING_CATEGORIES:
        return 0
    return None


@dataclass
class TrialMeta:
    """Everything known about one trial besides its samples."""

    trial_id: int
    subject: int
    concept_id: int
    concept_name: str
    category: str
    label: int
    split: str | None = None

    def __post_init__(self):
        if self.trial_id < 0:
            raise DataError(f"negative trial_id {self.trial_id}")
        if self.subject < 1:
            raise DataError(f"subject ids are 1-based, got {self.subject}")
        if not 0 <= self.concept_id < N_CONCEPTS:
            raise DataError(f"concept_id {self.concept_id} outside [0, {N_CONCEPTS})")
        if self.label < 0:
            raise DataError(f"negative label {self.label}")
        if self.split not in (None, "train", "test"):
            raise DataError(f"split must be train/test/None, got {self.split!r}")

    def to_dict(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "subject": self.subject,
            "concept_id": self.concept_id,
            "concept_name": self.concept_name,
            "category": self.category,
            "label": self.label,
            "split": self.split,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrialMeta":
        try:
            return cls(
                trial_id=d["trial_id"],
                subject=d["subject"],
                concept_id=d["concept_id"],
                concept_name=d["concept_name"],
                category=d["category"],
                label=d["label"],
                split=d.get("split"),
            )
        except KeyError as exc:
            raise DataError(f"metadata record missing field {exc}") from exc


@dataclass
class EpochSet:
    """Preprocessed trials: float32 tensor n x channels x samples + metadata."""

    tensor: np.ndarray
    meta: list[TrialMeta]

    def __post_init__(self):
        self.tensor = np.asarray(self.tensor, dtype=np.float32)
        if self.tensor.ndim != 3:
            raise DataError(f"epoch tensor must be 3-d, got shape {self.tensor.shape}")
        if len(self.meta) != self.tensor.shape[0]:
            raise DataError(
                f"{len(self.meta)} metadata rows for {self.tensor.shape[0]} trials"
            )

    def __len__(self) -> int:
        return self.tensor.shape[0]

    @property
    def labels(self) -> np.ndarray:
        return np.array([m.label for m in self.meta], dtype=np.int64)

    def subset(self, indices) -> "EpochSet":
        indices = np.asarray(indices)
        return EpochSet(self.tensor[indices], [self.meta[i] for i in indices])

    def with_split(self, assignment: list[str]) -> "EpochSet":
        meta = [replace(m, split=s) for m, s in zip(self.meta, assignment)]
        return EpochSet(self.tensor, meta)

    def split_view(self, which: str) -> "EpochSet":
        idx = [i for i, m in enumerate(self.meta) if m.split == which]
        if not idx:
            raise DataError(f"no trials assigned to split {which!r}")
        return self.subset(idx)


def concept_table() -> list[tuple[int, str, str, int]]:
    """The full concept inventory as (concept_id, name, category, label).

    Concepts are synthetic stand-ins named after their category; ids are
    assigned in fixed table order, alive block first.
    """
    rows = []
    cid = 0
    for table in (ALIVE_CATEGORIES, NONLIVING_CATEGORIES):
        for category, count in table.items():
            label = category_to_label(category)
            for i in range(count):
                rows.append((cid, f"{category} {i:03d}", category, label))
                cid += 1
    return rows


def animacy_design(n_subjects: int = 46, repetitions: int = 12) -> list[TrialMeta]:
    """Full-scale trial design: every subject sees every concept ``repetitions`` times."""
    concepts = concept_table()
    rows = []
    trial_id = 0
    for subject in range(1, n_subjects + 1):
        for _rep in range(repetitions):
            for cid, name, category, label in concepts:
                rows.append(
                    TrialMeta(
                        trial_id=trial_id,
                        subject=subject,
                        concept_id=cid,
                        concept_name=name,
                        category=category,
                        label=label,
                    )
                )
                trial_id += 1
    return rows


def build_task(epochs: EpochSet, subject: int | None = None) -> EpochSet:
    """Select the cross-subject task (all trials) or one subject's trials."""
    if subject is None:
        return epochs
    known = sorted({m.subject for m in epochs.meta})
    if subject not in known:
        raise DataError(f"unknown subject {subject}; dataset has subjects {known}")
    idx = [i for i, m in enumerate(epochs.meta) if m.subject == subject]
    return epochs.subset(idx)


def split(epochs: EpochSet, test_frac: float, seed: int) -> EpochSet:
    """Assign a seeded random train/test split; test size = round(frac * n)."""
    n = len(epochs)
    n_test = int(round(test_frac * n))
    if n_test <= 0 or n_test >= n:
        raise DataError(
            f"test_frac {test_frac} gives {n_test} test trials out of {n}; both splits must be nonempty"
        )
    perm = np.random.default_rng(seed).permutation(n)
    assignment = ["train"] * n
    for i in perm[:n_test]:
        assignment[i] = "test"
    return epochs.with_split(assignment)


@dataclass(frozen=True)
class SynthConfig:
    mode: str = "linear"
    n_trials: int = 2000
    n_subjects: int = 4
    snr: float | None = None  # None: per-mode default from the pilot sweep
    seed: int = 0
    test_frac: float = 0.2

    def __post_init__(self):
        if self.mode not in ("linear", "xor", "subject_signature"):
            raise DataError(f"unknown synthetic mode {self.mode!r}")
        if self.n_trials < 2 or self.n_trials % 2 != 0:
            raise DataError(f"n_trials must be even and >= 2, got {self.n_trials}")
        if self.n_subjects < 1:
            raise DataError(f"n_subjects must be >= 1, got {self.n_subjects}")
        if self.snr is not None and self.snr <= 0:
            raise DataError(f"snr must be positive, got {self.snr}")

    @property
    def effective_snr(self) -> float:
        return DEFAULT_SNR[self.mode] if self.snr is None else self.snr


def _envelopes(n_samples: int = N_SAMPLES, rate: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature pair of Gaussian-windowed 5 Hz envelopes, unit RMS.

    The pair is explicitly orthogonalized so the cross term in any
    second-moment statistic vanishes exactly, not just in expectation.
    """
    t = np.arange(n_samples, dtype=np.float64) / rate
    window = np.exp(-0.5 * ((t - 0.17) / 0.035) ** 2)
    w1 = window * np.cos(2 * np.pi * 5.0 * (t - 0.17))
    w2 = window * np.sin(2 * np.pi * 5.0 * (t - 0.17))
    w2 = w2 - (w1 @ w2) / (w1 @ w1) * w1
    w1 /= np.sqrt(np.mean(w1**2))
    w2 /= np.sqrt(np.mean(w2**2))
    return w1, w2


def _patterns(rng: np.random.Generator, count: int, n_channels: int = N_CHANNELS) -> np.ndarray:
    """Mutually orthogonal spatial patterns, each scaled to unit per-channel RMS."""
    if count > n_channels:
        raise DataError(f"cannot draw {count} orthogonal patterns in {n_channels} channels")
    raw = rng.standard_normal((n_channels, count))
    q, _ = np.linalg.qr(raw)
    return (q * np.sqrt(n_channels)).T.copy()


def _pink_noise(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """1/f-amplitude noise along the last axis, unit RMS per row."""
    white = rng.standard_normal(shape)
    spec = np.fft.rfft(white, axis=-1)
    freqs = np.fft.rfftfreq(shape[-1])
    scale = np.zeros_like(freqs)
    scale[1:] = 1.0 / np.sqrt(freqs[1:])
    spec *= scale
    out = np.fft.irfft(spec, n=shape[-1], axis=-1)
    rms = np.sqrt(np.mean(out**2, axis=-1, keepdims=True))
    return out / (rms + 1e-12)


def _background(
    rng: np.random.Generator, n: int, mixing: np.ndarray, n_channels: int, n_samples: int
) -> np.ndarray:
    """Per-channel pink noise plus a spatially correlated pink component."""
    own = _pink_noise(rng, (n, n_channels, n_samples))
    sources = _pink_noise(rng, (n, mixing.shape[1], n_samples))
    mixed = np.einsum("cs,nst->nct", mixing, sources)
    return (own + mixed) / np.sqrt(2.0)


def _zscore(x: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    mean = x.mean(axis=-1, keepdims=True)
    std = x.std(axis=-1, keepdims=True)
    return ((x - mean) / (std + eps)).astype(np.float32)


def _synthetic_concepts(per_class: int = 16) -> dict[int, list[tuple[int, str, str]]]:
    """Small per-class concept pools drawn from the real category table."""
    pools: dict[int, list[tuple[int, str, str]]] = {0: [], 1: []}
    full = concept_table()
    for label in (1, 0):
        cats = list((ALIVE_CATEGORIES if label else NONLIVING_CATEGORIES).keys())
        k = 0
        while len(pools[label]) < per_class:
            category = cats[k % len(cats)]
            # pick the (k // len(cats))-th concept of that category
            nth = k // len(cats)
            matches = [r for r in full if r[2] == category]
            cid, name, cat, _ = matches[nth]
            pools[label].append((cid, name, cat))
            k += 1
    return pools


_CHUNK = 1024


def generate_synthetic(cfg: SynthConfig) -> EpochSet:
    """Seeded synthetic epochs at 100 Hz, already z-scored, float32.

    The generator draws from three independent child streams (patterns,
    labels, noise) spawned from one root seed, so regenerating with the
    same config is bitwise reproducible.
    """
    root = np.random.SeedSequence(cfg.seed)
    ss_pat, ss_lab, ss_noise = root.spawn(3)
    rng_pat = np.random.default_rng(ss_pat)
    rng_lab = np.random.default_rng(ss_lab)
    rng_noise = np.random.default_rng(ss_noise)

    n = cfg.n_trials
    snr = cfg.effective_snr
    w1, w2 = _envelopes()
    n_fingerprints = cfg.n_subjects if cfg.mode == "subject_signature" else 0
    pats = _patterns(rng_pat, 4 + n_fingerprints)
    p, q, q0, q1 = pats[0], pats[1], pats[2], pats[3]
    fingerprints = pats[4:]
    mixing = rng_pat.standard_normal((N_CHANNELS, 16))
    mixing /= np.linalg.norm(mixing, axis=1, keepdims=True)

    subjects = np.arange(n) % cfg.n_subjects + 1

    t = np.arange(N_SAMPLES, dtype=np.float64) / 100.0
    if cfg.mode == "linear":
        labels = np.repeat([0, 1], n // 2)
        labels = labels[rng_lab.permutation(n)]
        phases = rng_lab.uniform(0.0, 2 * np.pi, size=n)
        sign = 2.0 * labels - 1.0
        osc = np.sqrt(2.0) * np.cos(2 * np.pi * 10.0 * t[None, :] + phases[:, None])
        carrier_pat = np.where(labels[:, None] == 1, q1[None, :], q0[None, :])
        signal = (
            sign[:, None, None] * p[None, :, None] * w1[None, None, :]
            + carrier_pat[:, :, None] * osc[:, None, :]
        )
    elif cfg.mode == "xor":
        signs = rng_lab.choice([-1.0, 1.0], size=(n, 2))
        labels = (signs[:, 0] * signs[:, 1] > 0).astype(np.int64)
        signal = (
            signs[:, 0][:, None, None] * p[None, :, None] * w1[None, None, :]
            + signs[:, 1][:, None, None] * q[None, :, None] * w2[None, None, :]
        )
    else:  # subject_signature
        labels = subjects.astype(np.int64) - 1
        signal = fingerprints[labels][:, :, None] * w1[None, None, :]

    tensor = np.empty((n, N_CHANNELS, N_SAMPLES), dtype=np.float32)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        noise = _background(rng_noise, stop - start, mixing, N_CHANNELS, N_SAMPLES)
        tensor[start:stop] = _zscore(noise + snr * signal[start:stop])

    if cfg.mode == "subject_signature":
        meta = [
            TrialMeta(
                trial_id=i,
                subject=int(subjects[i]),
                concept_id=int(labels[i]),
                concept_name=f"subject {int(subjects[i]):02d}",
                category="subject",
                label=int(labels[i]),
            )
            for i in range(n)
        ]
    else:
        pools = _synthetic_concepts()
        counters = {0: 0, 1: 0}
        meta = []
        for i in range(n):
            y = int(labels[i])
            cid, name, cat = pools[y][counters[y] % len(pools[y])]
            counters[y] += 1
            meta.append(
                TrialMeta(
                    trial_id=i,
                    subject=int(subjects[i]),
                    concept_id=cid,
                    concept_name=name,
                    category=cat,
                    label=y,
                )
            )
    return EpochSet(tensor, meta)


def generate_raw(
    cfg: SynthConfig,
    sample_rate: int = 1000,
    lead_in_ms: float = 1000.0,
    stimulus_interval_ms: float = 100.0,
) -> tuple[RawRecording, list[TrialMeta]]:
    """Continuous 64-channel recording for exercising the preprocessing chain.

    The reference channel carries only the shared common-mode component,
    so re-referencing recovers the clean per-channel signal.  Stimuli
    arrive every ``stimulus_interval_ms`` after a ``lead_in_ms`` quiet
    period; a short lead-in leaves early trials too close to the edge
    so they surface through the skip report rather than silently.
    """
    if cfg.mode != "linear":
        raise DataError(f"raw generation supports the linear mode, got {cfg.mode!r}")
    root = np.random.SeedSequence(cfg.seed)
    ss_pat, ss_lab, ss_noise = root.spawn(3)
    rng_pat = np.random.default_rng(ss_pat)
    rng_lab = np.random.default_rng(ss_lab)
    rng_noise = np.random.default_rng(ss_noise)

    n = cfg.n_trials
    snr = cfg.effective_snr
    pats = _patterns(rng_pat, 4)
    p, q0, q1 = pats[0], pats[2], pats[3]
    mixing = rng_pat.standard_normal((N_CHANNELS, 16))
    mixing /= np.linalg.norm(mixing, axis=1, keepdims=True)

    labels = np.repeat([0, 1], n // 2)
    labels = labels[rng_lab.permutation(n)]
    phases = rng_lab.uniform(0.0, 2 * np.pi, size=n)

    lead_in = int(round(lead_in_ms / 1000.0 * sample_rate))
    interval = int(round(stimulus_interval_ms / 1000.0 * sample_rate))
    trial_len = int(round(0.5 * sample_rate))
    total = lead_in + (n - 1) * interval + trial_len + sample_rate

    own = _pink_noise(rng_noise, (N_CHANNELS, total))
    sources = _pink_noise(rng_noise, (16, total))
    common = _pink_noise(rng_noise, (1, total))[0]
    noise = (own + mixing @ sources) / np.sqrt(2.0)

    tt = np.arange(trial_len, dtype=np.float64) / sample_rate
    window = np.exp(-0.5 * ((tt - 0.17) / 0.035) ** 2)
    w1 = window * np.cos(2 * np.pi * 5.0 * (tt - 0.17))
    w1 /= np.sqrt(np.mean(w1**2))

    data = np.zeros((N_CHANNELS + 1, total), dtype=np.float64)
    data[1:] = noise
    line = 0.3 * np.sin(2 * np.pi * 50.0 * np.arange(total) / sample_rate)
    data += common + line  # common mode on every channel, reference included

    onsets = []
    meta = []
    for i in range(n):
        onset = lead_in + i * interval
        sign = 2.0 * labels[i] - 1.0
        carrier_pat = q1 if labels[i] == 1 else q0
        osc = np.sqrt(2.0) * np.cos(2 * np.pi * 10.0 * tt + phases[i])
        seg = sign * np.outer(p, w1) + np.outer(carrier_pat, osc)
        data[1:, onset : onset + trial_len] += snr * seg
        onsets.append((onset, i))

    pools = _synthetic_concepts()
    counters = {0: 0, 1: 0}
    for i in range(n):
        y = int(labels[i])
        cid, name, cat = pools[y][counters[y] % len(pools[y])]
        counters[y] += 1
        meta.append(
            TrialMeta(
                trial_id=i,
                subject=int(i % cfg.n_subjects + 1),
                concept_id=cid,
                concept_name=name,
                category=cat,
                label=y,
            )
        )
    names = ("Cz",) + tuple(f"E{i:02d}" for i in range(1, N_CHANNELS + 1))
    rec = RawRecording(
        data=data, channel_names=names, sample_rate=sample_rate, event_onsets=tuple(onsets)
    )
    return rec, meta


def save_epochs(path, epochs: EpochSet) -> None:
    eegb.write_tensor_file(path, epochs.tensor, [m.to_dict() for m in epochs.meta])


def load_epochs(path) -> EpochSet:
    tensor, lines = eegb.read_tensor_file(path)
    eegb.check_meta_length(path, tensor.shape[0], len(lines))
    return EpochSet(tensor, [TrialMeta.from_dict(d) for d in lines])


def save_raw(path, rec: RawRecording, meta: list[TrialMeta]) -> None:
    """Raw variant: one continuous block plus a header line and event lines."""
    header = {
        "kind": "raw",
        "sample_rate": rec.sample_rate,
        "channel_names": list(rec.channel_names),
    }
    by_trial = {m.trial_id: m for m in meta}
    lines: list[dict] = [header]
    for onset, trial_id in rec.event_onsets:
        d = by_trial[trial_id].to_dict()
        d["onset"] = onset
        lines.append(d)
    # float64 in the container: the recording round-trips bit for bit
    eegb.write_tensor_file(path, rec.data[None, :, :].astype(np.float64), lines)


def load_raw(path) -> tuple[RawRecording, list[TrialMeta]]:
    tensor, lines = eegb.read_tensor_file(path)
    if tensor.shape[0] != 1 or not lines:
        raise DataError(f"{path} is not a raw-variant file")
    header = lines[0]
    if header.get("kind") != "raw":
        raise DataError(f"{path} sidecar does not declare kind=raw")
    onsets = []
    meta = []
    for d in lines[1:]:
        d = dict(d)
        onset = d.pop("onset")
        meta.append(TrialMeta.from_dict(d))
        onsets.append((onset, meta[-1].trial_id))
    rec = RawRecording(
        data=np.ascontiguousarray(tensor[0], dtype=np.float64),
        channel_names=tuple(header["channel_names"]),
        sample_rate=int(header["sample_rate"]),
        event_onsets=tuple(onsets),
    )
    return rec, meta
