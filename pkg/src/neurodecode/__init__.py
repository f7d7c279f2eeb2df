"""Desk-scale EEG decoding benchmark.

Synthetic data generation, ERP-style preprocessing, five trainable decoder
families built on an internal reverse-mode autodiff core, a CSP+LDA linear
baseline, a fixed SGD warm-restart training protocol, and comparative
object-level analysis.
"""

__version__ = "0.1.0"

from . import analysis, autodiff, baseline, data, eegb, models, pipeline, training

__all__ = [
    "analysis",
    "autodiff",
    "baseline",
    "data",
    "eegb",
    "models",
    "pipeline",
    "training",
    "__version__",
]
