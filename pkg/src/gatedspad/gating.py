"""Time-gated SPAD model: gate schedule, detector rates, trigger probabilities."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from gatedspad.errors import DomainError
from gatedspad.waveform import Waveform


@dataclass(frozen=True)
class GateSchedule:
    """Gates of length ``tau_g`` repeating every ``tau_g + tau_d``.

    The first gate opens at t = 0 of the symbol and the symbol lasts
    exactly ``n_gates`` detection cycles.
    """

    tau_g: float
    tau_d: float
    n_gates: int

    def __post_init__(self):
        if not self.tau_g > 0:
            raise DomainError(f"tau_g must be > 0, got {self.tau_g}")
        if not self.tau_d >= 0:
            raise DomainError(f"tau_d must be >= 0, got {self.tau_d}")
        if int(self.n_gates) != self.n_gates or self.n_gates < 1:
            raise DomainError(f"n_gates must be a positive integer, got {self.n_gates}")
        object.__setattr__(self, "n_gates", int(self.n_gates))

    @classmethod
    def from_cycle(cls, tau_g: float, tau_cyc: float, n_gates: int) -> "GateSchedule":
        if tau_cyc < tau_g:
            raise DomainError(f"tau_cyc={tau_cyc} shorter than tau_g={tau_g}")
        return cls(tau_g, tau_cyc - tau_g, n_gates)

    @property
    def tau_cyc(self) -> float:
        return self.tau_g + self.tau_d

    @property
    def N(self) -> int:
        return self.n_gates

    @property
    def T_s(self) -> float:
        return self.n_gates * self.tau_cyc

    def gate_window(self, n: int) -> tuple[float, float]:
        """(start, end) of gate ``n``, 1-based."""
        if not 1 <= n <= self.n_gates:
            raise DomainError(f"gate index {n} outside 1..{self.n_gates}")
        start = (n - 1) * self.tau_cyc
        return start, start + self.tau_g

    def windows(self) -> tuple[np.ndarray, np.ndarray]:
        starts = np.arange(self.n_gates) * self.tau_cyc
        return starts, starts + self.tau_g


@dataclass(frozen=True, eq=False)
class DetectorRates:
    """PDE, background rate and dark rate (counts/ns).

    ``pde_per_gate`` optionally overrides the scalar PDE gate by gate, as for
    a SPAD array with non-uniform pixel efficiency.
    """

    p_de: float
    lambda_b: float = 0.0
    lambda_d: float = 0.0
    pde_per_gate: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0.0 <= self.p_de <= 1.0:
            raise DomainError(f"p_de must lie in [0, 1], got {self.p_de}")
        if self.lambda_b < 0 or self.lambda_d < 0:
            raise DomainError("background and dark rates must be nonnegative")
        if self.pde_per_gate is not None:
            pde = np.array(self.pde_per_gate, dtype=float)
            if pde.ndim != 1 or np.any((pde < 0) | (pde > 1)):
                raise DomainError("pde_per_gate entries must lie in [0, 1]")
            pde.setflags(write=False)
            object.__setattr__(self, "pde_per_gate", pde)

    def pde_vector(self, n_gates: int) -> np.ndarray:
        if self.pde_per_gate is None:
            return np.full(n_gates, self.p_de)
        if self.pde_per_gate.size != n_gates:
            raise DomainError(
                f"pde_per_gate has {self.pde_per_gate.size} entries for {n_gates} gates"
            )
        return self.pde_per_gate

    def photoelectron_rate(self, signal_rate, p_de=None):
        """Compose ``p_de * (signal + lambda_b) + lambda_d``."""
        p = self.p_de if p_de is None else p_de
        return p * (signal_rate + self.lambda_b) + self.lambda_d


def trigger_probability_constant(rate: float, tau_g: float) -> float:
    """Probability of at least one arrival in a gate at constant ``rate``."""
    if rate < 0:
        raise DomainError(f"negative rate {rate}")
    if not tau_g > 0:
        raise DomainError(f"tau_g must be > 0, got {tau_g}")
    return -math.expm1(-rate * tau_g)


def expected_gate_photoelectrons(
    w: Waveform, s: GateSchedule, d: DetectorRates
) -> np.ndarray:
    """Mean photoelectron count per gate, the exponent of the trigger law."""
    if not math.isclose(w.T_s, s.T_s, rel_tol=1e-12):
        raise DomainError(f"waveform spans {w.T_s} ns but schedule spans {s.T_s} ns")
    starts, ends = s.windows()
    signal = w.integrate_windows(starts, ends)
    pde = d.pde_vector(s.n_gates)
    return pde * (signal + d.lambda_b * s.tau_g) + d.lambda_d * s.tau_g


def trigger_probabilities(w: Waveform, s: GateSchedule, d: DetectorRates) -> np.ndarray:
    """Per-gate trigger probabilities ``1 - exp(-int lambda_t dt)``, length N."""
    return -np.expm1(-expected_gate_photoelectrons(w, s, d))
