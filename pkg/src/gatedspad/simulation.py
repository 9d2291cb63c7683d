"""Monte Carlo engine: count sampling and symbol-error-rate experiments.

Two samplers produce detected counts.  The gate-level sampler sums
independent Bernoulli gate indicators.  The arrival-level sampler draws
photoelectron arrivals from the inhomogeneous Poisson process by thinning
and applies the gate-ON / dead-time rules to them one by one; it does not
assume gate independence and serves as the physical reference.

Every random stream is a Philox generator keyed by (seed, sweep index,
phase), so results do not depend on evaluation order or worker count.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np
from scipy.stats import norm

from gatedspad.detection import (
    ThresholdSet,
    compute_thresholds,
    decide,
    estimated_pmfs,
    nudge_estimates,
    estimate_trigger_probs,
)
from gatedspad.errors import DegenerateConstellationError, DomainError, ModelError
from gatedspad.gating import DetectorRates, GateSchedule, trigger_probabilities
from gatedspad.pmf import binomial_pmf, dft_cf_pmf
from gatedspad.waveform import PAM4_COEFFS, Sampled, SymbolWaveformSet, Waveform, make_waveform

log = logging.getLogger(__name__)

# Uniform draws generated per chunk by the samplers.
_CHUNK_ELEMS = 1 << 22

PHASE_PILOT = 0
PHASE_DATA = 1
PHASE_EMPIRICAL = 2


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent counter-based generator for ``key`` under master ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


# Gate-level sampler ----------------------------------------------------------

def gate_indicators(p, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` x N matrix of independent gate outcomes (bool)."""
    p = np.asarray(p, dtype=float)
    return rng.random((size, p.size)) < p


def draw_count_gate_level(p, rng: np.random.Generator, size: Optional[int] = None):
    """Detected count(s) as a sum of independent Bernoulli(P_n) gates."""
    p = np.asarray(p, dtype=float)
    if size is None:
        return int(gate_indicators(p, rng, 1).sum())
    rows = max(1, _CHUNK_ELEMS // p.size)
    out = np.empty(size, dtype=np.int64)
    for lo in range(0, size, rows):
        hi = min(size, lo + rows)
        out[lo:hi] = gate_indicators(p, rng, hi - lo).sum(axis=1)
    return out


# Arrival-level sampler -------------------------------------------------------

@numba.njit(cache=True)
def _register(times, offsets, n_gates, tau_d):
    """Apply dead time to arrivals grouped by (symbol, gate); returns hits per group."""
    n_groups = offsets.size - 1
    hits = np.zeros(n_groups, dtype=np.int32)
    buf = np.empty(64, dtype=np.float64)
    dead_until = -np.inf
    for g in range(n_groups):
        if g % n_gates == 0:
            dead_until = -np.inf
        lo = offsets[g]
        m = offsets[g + 1] - lo
        if m == 0:
            continue
        if m > buf.size:
            buf = np.empty(2 * m, dtype=np.float64)
        # insertion sort; groups hold a handful of arrivals
        for i in range(m):
            t = times[lo + i]
            j = i
            while j > 0 and buf[j - 1] > t:
                buf[j] = buf[j - 1]
                j -= 1
            buf[j] = t
        for i in range(m):
            if buf[i] >= dead_until:
                hits[g] += 1
                dead_until = buf[i] + tau_d
    return hits


def _gate_majorants(w: Waveform, s: GateSchedule, d: DetectorRates) -> np.ndarray:
    starts, ends = s.windows()
    peak = np.array([w.max_rate(a, b) for a, b in zip(starts, ends)])
    if isinstance(w, Sampled):
        peak = peak * 1.01
    return d.pde_vector(s.n_gates) * (peak + d.lambda_b) + d.lambda_d


def simulate_gate_hits(
    w: Waveform, s: GateSchedule, d: DetectorRates, rng: np.random.Generator, size: int
) -> np.ndarray:
    """Registrations per gate for ``size`` symbols, shape (size, N).

    Arrivals outside gate-ON windows can neither register nor start a dead
    interval, so only arrivals inside gates are generated.  Each gate is
    thinned against its own rate bound.
    """
    if not math.isclose(w.T_s, s.T_s, rel_tol=1e-12):
        raise DomainError(f"waveform spans {w.T_s} ns but schedule spans {s.T_s} ns")
    n = s.n_gates
    starts, _ = s.windows()
    bound = _gate_majorants(w, s, d)
    pde = d.pde_vector(n)
    mean_cand = bound * s.tau_g
    rows = max(1, int(_CHUNK_ELEMS // max(1.0, mean_cand.sum() + n)))
    out = np.empty((size, n), dtype=np.int32)
    for lo in range(0, size, rows):
        hi = min(size, lo + rows)
        n_cand = rng.poisson(mean_cand, size=(hi - lo, n)).ravel()
        group = np.repeat(np.arange(n_cand.size), n_cand)
        gate = group % n
        t = starts[gate] + s.tau_g * rng.random(gate.size)
        lam = pde[gate] * (w._rate(t) + d.lambda_b) + d.lambda_d
        if np.any(lam > bound[gate] * (1 + 1e-12)):
            raise ModelError("thinning bound does not majorise the arrival rate")
        keep = rng.random(gate.size) * bound[gate] < lam
        counts = np.bincount(group[keep], minlength=n_cand.size)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        hits = _register(t[keep], offsets, n, float(s.tau_d))
        out[lo:hi] = hits.reshape(hi - lo, n)
    return out


def draw_count_arrival_level(
    w: Waveform, s: GateSchedule, d: DetectorRates, rng: np.random.Generator,
    size: Optional[int] = None,
):
    """Detected count(s) from the arrival-level physical simulation."""
    hits = simulate_gate_hits(w, s, d, rng, 1 if size is None else size).sum(axis=1)
    return int(hits[0]) if size is None else hits


def empirical_pmf(source, n_draws: int, n_gates: int) -> np.ndarray:
    """Normalised histogram over 0..N of counts from ``source``.

    ``source`` is either a callable ``f(size) -> counts`` or an array of counts.
    """
    if n_draws < 1:
        raise DomainError("n_draws must be >= 1")
    counts = np.asarray(source(n_draws) if callable(source) else source)[:n_draws]
    if counts.size and (counts.min() < 0 or counts.max() > n_gates):
        raise ModelError(f"count outside 0..{n_gates}")
    return np.bincount(counts, minlength=n_gates + 1) / counts.size


# SER experiment ----------------------------------------------------------------

def wilson_interval(errors: int, n: int, conf: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    z = norm.ppf(0.5 + conf / 2)
    phat = errors / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return centre - half, centre + half


def wilson_halfwidth(errors: int, n: int) -> float:
    lo, hi = wilson_interval(errors, n)
    return 0.5 * (hi - lo)


@dataclass(frozen=True)
class ExperimentConfig:
    schedule: GateSchedule
    rates: DetectorRates
    lambda_s: float = 5.0
    coeffs: tuple[float, ...] = PAM4_COEFFS
    waveform: str = "gaussian"
    pilot_k: int = 1000
    n_symbols: int = 100_000
    axis: str = "intensity"
    sweep: tuple[float, ...] = tuple(float(v) for v in range(1, 16))
    seed: int = 0
    conventional_model: str = "rectangle"

    def __post_init__(self):
        if self.axis not in ("intensity", "background"):
            raise DomainError(f"axis must be intensity or background, got {self.axis!r}")
        if self.conventional_model not in ("rectangle", "mean_p"):
            raise DomainError(f"unknown conventional_model {self.conventional_model!r}")
        if self.pilot_k < 1 or self.n_symbols < 1:
            raise DomainError("pilot_k and n_symbols must be >= 1")
        if not self.sweep:
            raise DomainError("sweep list is empty")
        if any(v < 0 for v in self.sweep):
            raise DomainError("sweep values must be nonnegative")
        SymbolWaveformSet(make_waveform("rectangular", 1.0, 1.0), tuple(self.coeffs))

    def point(self, value: float) -> tuple[float, DetectorRates]:
        """(lambda_s, detector rates) for one sweep value."""
        if self.axis == "intensity":
            return value, self.rates
        r = self.rates
        return self.lambda_s, DetectorRates(r.p_de, value, r.lambda_d, r.pde_per_gate)


@dataclass(frozen=True)
class SerResult:
    sweep_value: float
    ser_proposed: float
    ser_conventional: float
    n_symbols: int
    ci95_proposed: float
    ci95_conventional: float
    errors_proposed: int = field(default=0, compare=False)
    errors_conventional: int = field(default=0, compare=False)


def conventional_probs(
    cfg: ExperimentConfig, symbols: SymbolWaveformSet, rates: DetectorRates, est=None
) -> np.ndarray:
    """Per-symbol success probability of the binomial baseline.

    ``rectangle`` treats each symbol as a constant rate equal to its time
    average; ``mean_p`` uses the average of the pilot estimates.
    """
    if cfg.conventional_model == "mean_p":
        return np.asarray(est).mean(axis=1)
    avg = symbols.base.time_average()
    s = cfg.schedule
    return np.array(
        [-math.expm1(-rates.photoelectron_rate(c * avg) * s.tau_g) for c in symbols.coeffs]
    )


def _thresholds_or_fallback(pmfs, n_gates: int) -> ThresholdSet:
    try:
        return compute_thresholds(pmfs)
    except DegenerateConstellationError:
        log.warning("indistinguishable symbol PMFs; deciding symbol 0 throughout")
        return ThresholdSet.never(len(pmfs), n_gates)


def run_point(cfg: ExperimentConfig, index: int) -> SerResult:
    """Pilot estimation, threshold design and data-phase SER at one sweep value."""
    value = cfg.sweep[index]
    s = cfg.schedule
    n = s.n_gates
    lambda_s, rates = cfg.point(value)
    symbols = SymbolWaveformSet(make_waveform(cfg.waveform, lambda_s, s.T_s), tuple(cfg.coeffs))
    true_p = np.stack([trigger_probabilities(w, s, rates) for w in symbols])
    M = symbols.M

    rng = stream(cfg.seed, index, PHASE_PILOT)
    tallies = np.stack([
        draw_pilot_tallies(true_p[m], cfg.pilot_k, rng) for m in range(M)
    ])
    proposed = _thresholds_or_fallback(estimated_pmfs(tallies, cfg.pilot_k), n)

    est = nudge_estimates(estimate_trigger_probs(tallies, cfg.pilot_k), cfg.pilot_k)
    q = conventional_probs(cfg, symbols, rates, est)
    conventional = _thresholds_or_fallback([binomial_pmf(n, qm) for qm in q], n)

    rng = stream(cfg.seed, index, PHASE_DATA)
    sent = rng.integers(M, size=cfg.n_symbols)
    counts = np.empty(cfg.n_symbols, dtype=np.int64)
    for m in range(M):
        idx = np.flatnonzero(sent == m)
        counts[idx] = draw_count_gate_level(true_p[m], rng, idx.size)

    err_p = int(np.count_nonzero(decide(counts, proposed) != sent))
    err_c = int(np.count_nonzero(decide(counts, conventional) != sent))
    ns = cfg.n_symbols
    return SerResult(
        float(value), err_p / ns, err_c / ns, ns,
        wilson_halfwidth(err_p, ns), wilson_halfwidth(err_c, ns), err_p, err_c,
    )


def draw_pilot_tallies(p, K: int, rng: np.random.Generator) -> np.ndarray:
    """Per-gate trigger tallies over ``K`` pilot repetitions of one symbol."""
    p = np.asarray(p, dtype=float)
    rows = max(1, _CHUNK_ELEMS // p.size)
    tally = np.zeros(p.size, dtype=np.int64)
    for lo in range(0, K, rows):
        tally += gate_indicators(p, rng, min(K, lo + rows) - lo).sum(axis=0)
    return tally


def _run_point_star(args):
    return run_point(*args)


def run_ser_experiment(cfg: ExperimentConfig, workers: int = 1) -> list[SerResult]:
    """SER of the proposed and binomial-baseline detectors at every sweep value."""
    jobs = [(cfg, i) for i in range(len(cfg.sweep))]
    if workers <= 1:
        return [run_point(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_point_star, jobs))


def pmf_compare_rows(
    schedule: GateSchedule,
    rates: DetectorRates,
    lambda_values: Sequence[float],
    *,
    waveform: str = "gaussian",
    n_draws: int = 100_000,
    seed: int = 0,
    conventional_model: str = "rectangle",
) -> list[tuple[float, int, float, float, float]]:
    """Rows ``(lambda_s, k, poibin, binomial, empirical)`` for each intensity.

    The empirical column comes from the arrival-level simulator, so it checks
    the gate model itself rather than the transform.
    """
    n = schedule.n_gates
    rows = []
    for i, lam in enumerate(lambda_values):
        w = make_waveform(waveform, lam, schedule.T_s)
        p = trigger_probabilities(w, schedule, rates)
        if conventional_model == "mean_p":
            q = float(p.mean())
        else:
            q = -math.expm1(-rates.photoelectron_rate(w.time_average()) * schedule.tau_g)
        poibin = dft_cf_pmf(p)
        binom = binomial_pmf(n, q)
        counts = draw_count_arrival_level(w, schedule, rates, stream(seed, i, PHASE_EMPIRICAL), n_draws)
        emp = empirical_pmf(counts, n_draws, n)
        rows.extend(
            (float(lam), k, float(poibin[k]), float(binom[k]), float(emp[k])) for k in range(n + 1)
        )
    return rows
