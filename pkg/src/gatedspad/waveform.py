"""Signal photon-rate waveforms over one symbol interval [0, T_s].

Rates are in counts/ns and times in ns throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gatedspad.errors import DomainError

# Gauss-Legendre order used for every quadrature panel.
GL_ORDER = 16
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GL_ORDER)

# Composite quadrature panel width as a fraction of T_s.
_PANELS_PER_SYMBOL = 32

GAUSS_PEAK = 6.0 / math.sqrt(2.0 * math.pi)


def _gl_windows(func, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Single-panel Gauss-Legendre integral of ``func`` over each window."""
    half = 0.5 * (ends - starts)
    mid = 0.5 * (ends + starts)
    t = mid[..., None] + half[..., None] * _GL_NODES
    return half * (func(t) @ _GL_WEIGHTS)


class Waveform:
    """Base class: a nonnegative photon rate defined on [0, T_s]."""

    T_s: float

    def _rate(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_times(self, t: np.ndarray) -> None:
        if t.size and (np.min(t) < 0.0 or np.max(t) > self.T_s):
            raise DomainError(f"time outside [0, {self.T_s}] ns")

    def eval(self, t):
        """Photon rate at time(s) ``t``; scalar in, scalar out."""
        arr = np.asarray(t, dtype=float)
        self._check_times(arr)
        out = self._rate(arr)
        return float(out) if out.ndim == 0 else out

    __call__ = eval

    def integrate(self, a: float, b: float) -> float:
        """Expected photon count between ``a`` and ``b`` (composite GL16)."""
        if a > b:
            raise DomainError(f"integration bounds reversed: a={a} > b={b}")
        self._check_times(np.array([a, b], dtype=float))
        if a == b:
            return 0.0
        n_panels = max(1, math.ceil((b - a) * _PANELS_PER_SYMBOL / self.T_s))
        edges = np.linspace(a, b, n_panels + 1)
        return float(_gl_windows(self._rate, edges[:-1], edges[1:]).sum())

    def integrate_windows(self, starts, ends) -> np.ndarray:
        """Vectorised per-window integrals, one GL16 panel per window."""
        starts = np.asarray(starts, dtype=float)
        ends = np.asarray(ends, dtype=float)
        if np.any(starts > ends):
            raise DomainError("window with start > end")
        self._check_times(np.concatenate([starts.ravel(), ends.ravel()]))
        return _gl_windows(self._rate, starts, ends)

    def max_rate(self, a: float, b: float) -> float:
        """Supremum of the rate on [a, b]."""
        raise NotImplementedError

    def time_average(self) -> float:
        return self.integrate(0.0, self.T_s) / self.T_s

    def scaled(self, c: float) -> "Waveform":
        raise NotImplementedError


@dataclass(frozen=True)
class GaussianPulse(Waveform):
    """Gaussian pulse centred at T_s/2 with standard deviation T_s/6.

    ``rate(t) = lambda_s * 6/sqrt(2 pi) * exp(-18 (t - T_s/2)^2 / T_s^2)``.
    Tails outside the symbol are dropped, not renormalised, so the
    integral over [0, T_s] is ``lambda_s * T_s * erf(3/sqrt(2))``.
    """

    lambda_s: float
    T_s: float

    def __post_init__(self):
        if self.lambda_s < 0 or self.T_s <= 0:
            raise DomainError("GaussianPulse needs lambda_s >= 0 and T_s > 0")

    def _rate(self, t):
        x = (t - 0.5 * self.T_s) / self.T_s
        return self.lambda_s * GAUSS_PEAK * np.exp(-18.0 * x * x)

    def max_rate(self, a, b):
        centre = 0.5 * self.T_s
        nearest = min(max(centre, a), b)
        return float(self._rate(np.float64(nearest)))

    def scaled(self, c):
        return GaussianPulse(self.lambda_s * c, self.T_s)


@dataclass(frozen=True)
class Rectangular(Waveform):
    lambda_s: float
    T_s: float

    def __post_init__(self):
        if self.lambda_s < 0 or self.T_s <= 0:
            raise DomainError("Rectangular needs lambda_s >= 0 and T_s > 0")

    def _rate(self, t):
        return np.full_like(t, self.lambda_s, dtype=float)

    def integrate(self, a, b):
        if a > b:
            raise DomainError(f"integration bounds reversed: a={a} > b={b}")
        self._check_times(np.array([a, b], dtype=float))
        return self.lambda_s * (b - a)

    def max_rate(self, a, b):
        return self.lambda_s

    def scaled(self, c):
        return Rectangular(self.lambda_s * c, self.T_s)


@dataclass(frozen=True, eq=False)
class Sampled(Waveform):
    """Piecewise-linear interpolant through ``(times, rates)`` samples.

    Sample times must be strictly increasing and run from 0 to ``T_s``.
    Integrals are exact for the interpolant (trapezoid rule on the knots).
    """

    times: np.ndarray
    rates: np.ndarray
    T_s: float = field(init=False)
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        rates = np.array(self.rates, dtype=float)
        if times.ndim != 1 or times.shape != rates.shape or times.size < 2:
            raise DomainError("need at least two (t, rate) samples")
        if np.any(np.diff(times) <= 0):
            raise DomainError("sample times must be strictly increasing")
        if times[0] != 0.0:
            raise DomainError("samples must start at t = 0")
        if np.any(rates < 0):
            raise DomainError("rates must be nonnegative")
        times.setflags(write=False)
        rates.setflags(write=False)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(times) * (rates[1:] + rates[:-1]))])
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "T_s", float(times[-1]))
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def from_csv(cls, path: str | Path) -> "Sampled":
        """Load a two-column ``t_ns, rate`` CSV; a header row is optional."""
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh if ln.strip()]
        if lines:
            try:
                [float(v) for v in lines[0].split(",")]
            except ValueError:
                lines = lines[1:]
        data = np.loadtxt(lines, delimiter=",", ndmin=2)
        if data.shape[1] != 2:
            raise DomainError(f"{path}: expected two columns, got {data.shape[1]}")
        return cls(data[:, 0], data[:, 1])

    def _rate(self, t):
        return np.interp(t, self.times, self.rates)

    def _antiderivative(self, t):
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, self.times.size - 2)
        dt = t - self.times[i]
        return self._cum[i] + dt * 0.5 * (self.rates[i] + self._rate(t))

    def integrate(self, a, b):
        if a > b:
            raise DomainError(f"integration bounds reversed: a={a} > b={b}")
        self._check_times(np.array([a, b], dtype=float))
        return float(self._antiderivative(b) - self._antiderivative(a))

    def integrate_windows(self, starts, ends):
        starts = np.asarray(starts, dtype=float)
        ends = np.asarray(ends, dtype=float)
        if np.any(starts > ends):
            raise DomainError("window with start > end")
        self._check_times(np.concatenate([starts.ravel(), ends.ravel()]))
        return self._antiderivative(ends) - self._antiderivative(starts)

    def max_rate(self, a, b):
        inside = self.rates[(self.times > a) & (self.times < b)]
        ends = self._rate(np.array([a, b], dtype=float))
        return float(max(ends.max(), inside.max() if inside.size else 0.0))

    def scaled(self, c):
        return Sampled(self.times, self.rates * c)


# Square-root-signalling 4-PAM intensity coefficients.
PAM4_COEFFS = (0.0, 0.25, 0.56, 1.0)


@dataclass(frozen=True)
class SymbolWaveformSet:
    """One waveform per PAM symbol: ``coeffs[m]`` times a base waveform."""

    base: Waveform
    coeffs: tuple[float, ...] = PAM4_COEFFS

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.size < 2 or c[0] != 0.0 or c[-1] != 1.0 or np.any(np.diff(c) <= 0):
            raise DomainError("constellation coefficients must rise strictly from 0 to 1")
        object.__setattr__(self, "coeffs", tuple(float(v) for v in c))

    @property
    def M(self) -> int:
        return len(self.coeffs)

    @property
    def T_s(self) -> float:
        return self.base.T_s

    def __getitem__(self, m: int) -> Waveform:
        return self.base.scaled(self.coeffs[m])

    def __iter__(self):
        return (self[m] for m in range(self.M))

    def __len__(self):
        return self.M


def make_waveform(kind: str, lambda_s: float, T_s: float) -> Waveform:
    """Build a waveform from a config string: gaussian, rectangular, sampled:<path>.

    A sampled waveform is rescaled so its time-average rate equals ``lambda_s``.
    """
    if kind == "gaussian":
        return GaussianPulse(lambda_s, T_s)
    if kind == "rectangular":
        return Rectangular(lambda_s, T_s)
    if kind.startswith("sampled:"):
        w = Sampled.from_csv(kind.split(":", 1)[1])
        if not math.isclose(w.T_s, T_s, rel_tol=1e-9):
            raise DomainError(f"sampled waveform spans {w.T_s} ns, symbol is {T_s} ns")
        avg = w.time_average()
        if avg == 0:
            return w
        return w.scaled(lambda_s / avg)
    raise DomainError(f"unknown waveform kind {kind!r}")

