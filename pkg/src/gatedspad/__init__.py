"""Photon-counting receiver simulator for time-gated SPADs.

Per-gate trigger probabilities of an arbitrary optical waveform define a
Poisson binomial count distribution; its PMF is obtained by inverting the
characteristic function on the (N+1)-point unit-circle grid with an FFT.
"""

from gatedspad.errors import DegenerateConstellationError, DomainError, ModelError
from gatedspad.waveform import GaussianPulse, Rectangular, Sampled, SymbolWaveformSet
from gatedspad.gating import DetectorRates, GateSchedule, trigger_probabilities
from gatedspad.pmf import binomial_pmf, brute_force_pmf, dft_cf_pmf, pmf_stats
from gatedspad.detection import (
    ThresholdSet,
    compute_thresholds,
    decide,
    estimate_trigger_probs,
    ml_decide,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateConstellationError",
    "DetectorRates",
    "DomainError",
    "GateSchedule",
    "GaussianPulse",
    "ModelError",
    "Rectangular",
    "Sampled",
    "SymbolWaveformSet",
    "ThresholdSet",
    "binomial_pmf",
    "brute_force_pmf",
    "compute_thresholds",
    "decide",
    "dft_cf_pmf",
    "estimate_trigger_probs",
    "ml_decide",
    "pmf_stats",
    "trigger_probabilities",
]
