"""Pilot-based trigger-probability estimation and ML threshold decisions."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from gatedspad.errors import DegenerateConstellationError, DomainError
from gatedspad.pmf import dft_cf_pmf, pmf_stats

log = logging.getLogger(__name__)


def validate_pilot_counts(counts, K: int) -> np.ndarray:
    counts = np.asarray(counts)
    if int(K) != K or K < 1:
        raise DomainError(f"pilot repetitions K must be a positive integer, got {K}")
    if counts.ndim != 2 or counts.size == 0:
        raise DomainError("pilot tallies must be an M x N matrix")
    if np.any(counts != np.round(counts)):
        raise DomainError("pilot tallies must be integers")
    if np.any(counts < 0) or np.any(counts > K):
        raise DomainError(f"pilot tallies must lie in [0, K={K}]")
    return counts.astype(np.int64)


def estimate_trigger_probs(counts, K: int) -> np.ndarray:
    """Per-symbol, per-gate estimates ``X[m, n] / K``."""
    return validate_pilot_counts(counts, K) / float(K)


def nudge_estimates(probs, K: int) -> np.ndarray:
    """Pull estimates of exactly 0 or 1 into [1/(2K), 1 - 1/(2K)]."""
    eps = 0.5 / K
    return np.clip(np.asarray(probs, dtype=float), eps, 1.0 - eps)


def accumulate_pilots(indicators) -> np.ndarray:
    """Sum gate indicators over pilot repetitions.

    ``indicators`` has shape (M, K, N); the result is the (M, N) tally.
    """
    return np.asarray(indicators).sum(axis=1)


def estimated_pmfs(counts, K: int) -> np.ndarray:
    """PMFs of every symbol built from nudged pilot estimates, shape (M, N+1)."""
    probs = nudge_estimates(estimate_trigger_probs(counts, K), K)
    return np.stack([dft_cf_pmf(row) for row in probs])


@dataclass
class ThresholdSet:
    """Ordered decision thresholds; ``thresholds[i]`` separates symbol i from i+1.

    ``no_crossing[i]`` flags a pair whose PMFs never crossed, in which case
    the threshold sits at N + 1 and symbol i+1 is never chosen over i.
    """

    thresholds: np.ndarray
    n_gates: int
    no_crossing: list[bool] = field(default_factory=list)

    def __post_init__(self):
        self.thresholds = np.asarray(self.thresholds, dtype=np.int64)
        if not self.no_crossing:
            self.no_crossing = [False] * self.thresholds.size
        if np.any(np.diff(self.thresholds) < 0):
            raise DomainError("thresholds must be non-decreasing")
        if np.any(self.thresholds < 0) or np.any(self.thresholds > self.n_gates + 1):
            raise DomainError(f"thresholds must lie in [0, {self.n_gates + 1}]")

    @property
    def M(self) -> int:
        return self.thresholds.size + 1

    @classmethod
    def never(cls, M: int, n_gates: int) -> "ThresholdSet":
        """Thresholds that always decide symbol 0."""
        return cls(np.full(M - 1, n_gates + 1), n_gates, [True] * (M - 1))


def compute_thresholds(pmfs: Sequence[np.ndarray]) -> ThresholdSet:
    """ML thresholds between adjacent symbols of a mean-ordered PMF family.

    For each pair the threshold is the smallest count at or beyond the lower
    symbol's mode where the upper PMF is at least as likely.  Restricting the
    search to the right of the mode skips left-tail crossings of unimodal PMFs.
    """
    pmfs = [np.asarray(p, dtype=float) for p in pmfs]
    if len(pmfs) < 2:
        raise DomainError("need PMFs for at least two symbols")
    size = pmfs[0].size
    if any(p.size != size for p in pmfs):
        raise DomainError("all PMFs must share the same support")
    n_gates = size - 1
    stats = [pmf_stats(p) for p in pmfs]
    means = np.array([s["mean"] for s in stats])
    if np.any(np.diff(means) <= 0):
        raise DegenerateConstellationError(f"PMF means not strictly increasing: {means}")

    k = np.arange(size)
    thresholds, flags = [], []
    for lower, upper, st in zip(pmfs[:-1], pmfs[1:], stats[:-1]):
        hits = np.flatnonzero((upper >= lower) & (k >= st["mode"]))
        if hits.size:
            thresholds.append(int(hits[0]))
            flags.append(False)
        else:
            log.warning("no PMF crossing past count %d; threshold set to %d", st["mode"], size)
            thresholds.append(size)
            flags.append(True)
    thresholds = np.maximum.accumulate(np.array(thresholds))
    return ThresholdSet(thresholds, n_gates, flags)


def decide(X, t: ThresholdSet):
    """Symbol index for observed count(s) ``X``; a count equal to a threshold goes up."""
    out = np.searchsorted(t.thresholds, X, side="right")
    return int(out) if np.ndim(out) == 0 else out


def ml_decide(X, pmfs):
    """Direct argmax over symbols of ``Pr_m(X)``; ties resolve to the lowest m."""
    table = np.asarray(pmfs, dtype=float)
    out = np.argmax(table[:, X], axis=0)
    return int(out) if np.ndim(out) == 0 else out


# Serialisation -------------------------------------------------------------

def write_pilot_capture(path, counts, K: int) -> None:
    counts = validate_pilot_counts(counts, K)
    doc = {"M": counts.shape[0], "N": counts.shape[1], "K": int(K), "counts": counts.tolist()}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def read_pilot_capture(path) -> tuple[np.ndarray, int]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in ("K", "counts"):
        if key not in doc:
            raise DomainError(f"pilot capture missing field {key!r}")
    counts = validate_pilot_counts(doc["counts"], doc["K"])
    if doc.get("M", counts.shape[0]) != counts.shape[0] or doc.get("N", counts.shape[1]) != counts.shape[1]:
        raise DomainError("pilot capture M/N disagree with the counts matrix")
    return counts, int(doc["K"])


def detector_document(counts, K: int) -> dict:
    """Estimates, PMF summaries and thresholds in the detector file layout."""
    probs = estimate_trigger_probs(counts, K)
    pmfs = estimated_pmfs(counts, K)
    t = compute_thresholds(pmfs)
    return {
        "M": int(probs.shape[0]),
        "N": int(probs.shape[1]),
        "K": int(K),
        "probs": probs.tolist(),
        "pmf_stats": [pmf_stats(p) for p in pmfs],
        "thresholds": t.thresholds.tolist(),
        "no_crossing": list(t.no_crossing),
    }


def write_detector(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def read_detector(path) -> tuple[np.ndarray, ThresholdSet, int]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    t = ThresholdSet(doc["thresholds"], doc["N"], doc.get("no_crossing", []))
    return np.asarray(doc["probs"], dtype=float), t, int(doc["K"])
