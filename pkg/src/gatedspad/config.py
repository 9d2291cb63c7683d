"""Experiment configuration files: flat ``key = value`` text, sections optional.

Example (the simulation defaults)::

    [detector]
    pde = 0.1
    tau_g_ns = 2
    tau_cyc_ns = 8
    lambda_d = 4.4e-5

    [experiment]
    n_gates = 400
    lambda_s_start = 1
    lambda_s_stop = 15
    lambda_s_steps = 15
    lambda_b = 0.1

Sections only group keys; every key is global and may appear once.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from gatedspad.errors import DomainError
from gatedspad.gating import DetectorRates, GateSchedule
from gatedspad.waveform import PAM4_COEFFS

REQUIRED = ("pde", "tau_g_ns", "n_gates")

KNOWN = {
    "pde", "tau_g_ns", "tau_cyc_ns", "dead_time_ns", "n_gates", "pde_per_gate",
    "lambda_s", "lambda_s_start", "lambda_s_stop", "lambda_s_steps", "lambda_s_values",
    "lambda_b", "lambda_b_start", "lambda_b_stop", "lambda_b_steps", "lambda_b_values",
    "lambda_d", "modulation_order", "constellation", "waveform", "pilot_k",
    "n_symbols", "n_draws", "seed", "conventional_model", "workers",
}

DEFAULTS = {
    "lambda_s": 5.0,
    "lambda_b": 0.1,
    "lambda_d": 4.4e-5,
    "modulation_order": 4,
    "waveform": "gaussian",
    "pilot_k": 1000,
    "n_symbols": 100_000,
    "n_draws": 100_000,
    "seed": 0,
    "conventional_model": "rectangle",
    "workers": 1,
}


class ConfigError(Exception):
    """Invalid or incomplete configuration file."""


@dataclass
class RunConfig:
    schedule: GateSchedule
    rates: DetectorRates
    lambda_s: float
    lambda_s_values: tuple[float, ...] | None
    lambda_b_values: tuple[float, ...] | None
    coeffs: tuple[float, ...]
    waveform: str
    pilot_k: int
    n_symbols: int
    n_draws: int
    seed: int
    conventional_model: str
    workers: int

    def echo(self) -> dict:
        """Every resolved parameter, for the run manifest."""
        s, r = self.schedule, self.rates
        return {
            "pde": r.p_de,
            "pde_per_gate": None if r.pde_per_gate is None else r.pde_per_gate.tolist(),
            "tau_g_ns": s.tau_g,
            "dead_time_ns": s.tau_d,
            "tau_cyc_ns": s.tau_cyc,
            "n_gates": s.n_gates,
            "symbol_ns": s.T_s,
            "lambda_s": self.lambda_s,
            "lambda_s_values": None if self.lambda_s_values is None else list(self.lambda_s_values),
            "lambda_b": r.lambda_b,
            "lambda_b_values": None if self.lambda_b_values is None else list(self.lambda_b_values),
            "lambda_d": r.lambda_d,
            "modulation_order": len(self.coeffs),
            "constellation": list(self.coeffs),
            "waveform": self.waveform,
            "pilot_k": self.pilot_k,
            "n_symbols": self.n_symbols,
            "n_draws": self.n_draws,
            "seed": self.seed,
            "conventional_model": self.conventional_model,
        }


def default_constellation(M: int) -> tuple[float, ...]:
    """The 4-PAM levels for M = 4; square-root signalling ``(m/(M-1))^2`` otherwise."""
    if M == 4:
        return PAM4_COEFFS
    return tuple((m / (M - 1)) ** 2 for m in range(M))


def _line_numbers(text: str) -> dict[str, int]:
    lines = {}
    for i, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*([A-Za-z_][\w]*)\s*[=:]", line)
        if m:
            lines.setdefault(m.group(1).lower(), i)
    return lines


def read_raw(path: str | Path) -> tuple[dict[str, str], dict[str, int]]:
    """Parse the file into a flat key -> string mapping plus key line numbers."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    if not re.search(r"^\s*\[", text, flags=re.M):
        text = "[experiment]\n" + text
        offset = 1
    else:
        offset = 0
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raw: dict[str, str] = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            if key in raw:
                raise ConfigError(f"{path}: key {key!r} given more than once")
            raw[key] = value
    lines = {k: v - offset for k, v in _line_numbers(text).items()}
    return raw, lines


class _Reader:
    def __init__(self, path, raw, lines):
        self.path, self.raw, self.lines = path, raw, lines

    def where(self, key):
        line = self.lines.get(key)
        return f"{self.path}:{line}" if line else str(self.path)

    def fail(self, key, msg):
        raise ConfigError(f"{self.where(key)}: field {key!r}: {msg}")

    def has(self, key):
        return key in self.raw

    def number(self, key, kind=float):
        value = self.raw.get(key, DEFAULTS.get(key))
        if value is None:
            raise ConfigError(f"{self.path}: missing required key {key!r}")
        if not isinstance(value, str):
            return value
        try:
            if kind is int:
                try:
                    return int(value)
                except ValueError:
                    as_float = float(value)
                    if not as_float.is_integer():
                        raise
                    return int(as_float)
            out = float(value)
        except ValueError:
            self.fail(key, f"expected {kind.__name__}, got {value!r}")
        if not np.isfinite(out):
            self.fail(key, f"must be finite, got {value!r}")
        return out

    def numbers(self, key):
        parts = [p.strip() for p in self.raw[key].split(",") if p.strip()]
        if not parts:
            self.fail(key, "empty list")
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            self.fail(key, f"expected comma-separated numbers, got {self.raw[key]!r}")

    def text(self, key):
        return str(self.raw.get(key, DEFAULTS.get(key))).strip()


def _sweep(r: _Reader, name: str, geometric: bool):
    values_key = f"{name}_values"
    range_keys = [f"{name}_{s}" for s in ("start", "stop", "steps")]
    have_range = [k for k in range_keys if r.has(k)]
    if r.has(values_key):
        if have_range:
            r.fail(values_key, f"conflicts with {have_range[0]!r}")
        return r.numbers(values_key)
    if not have_range:
        return None
    for k in range_keys:
        if not r.has(k):
            raise ConfigError(f"{r.path}: missing required key {k!r}")
    start, stop = r.number(range_keys[0]), r.number(range_keys[1])
    steps = r.number(range_keys[2], int)
    if steps < 1:
        r.fail(range_keys[2], "must be >= 1")
    if geometric:
        if start <= 0 or stop <= 0:
            r.fail(range_keys[0], "geometric sweep needs positive bounds")
        return tuple(float(v) for v in np.geomspace(start, stop, steps))
    return tuple(float(v) for v in np.linspace(start, stop, steps))


def load_config(path: str | Path, seed: int | None = None) -> RunConfig:
    """Parse and validate a config file; ``seed`` overrides the file's seed."""
    raw, lines = read_raw(path)
    r = _Reader(path, raw, lines)
    for key in raw:
        if key not in KNOWN:
            r.fail(key, "unknown key")
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError(f"{path}: missing required key {key!r}")
    if r.has("tau_cyc_ns") == r.has("dead_time_ns"):
        if r.has("tau_cyc_ns"):
            r.fail("dead_time_ns", "mutually exclusive with 'tau_cyc_ns'")
        raise ConfigError(f"{path}: missing required key 'tau_cyc_ns' (or 'dead_time_ns')")

    tau_g = r.number("tau_g_ns")
    n_gates = r.number("n_gates", int)
    try:
        if r.has("tau_cyc_ns"):
            schedule = GateSchedule.from_cycle(tau_g, r.number("tau_cyc_ns"), n_gates)
        else:
            schedule = GateSchedule(tau_g, r.number("dead_time_ns"), n_gates)
    except DomainError as exc:
        r.fail("tau_g_ns", str(exc))

    pde_map = r.numbers("pde_per_gate") if r.has("pde_per_gate") else None
    if pde_map is not None and len(pde_map) != n_gates:
        r.fail("pde_per_gate", f"has {len(pde_map)} entries for {n_gates} gates")
    try:
        rates = DetectorRates(r.number("pde"), r.number("lambda_b"), r.number("lambda_d"), pde_map)
    except DomainError as exc:
        r.fail("pde", str(exc))

    M = r.number("modulation_order", int)
    if M < 2:
        r.fail("modulation_order", "must be >= 2")
    coeffs = r.numbers("constellation") if r.has("constellation") else default_constellation(M)
    if len(coeffs) != M:
        r.fail("constellation", f"has {len(coeffs)} levels but modulation_order is {M}")
    c = np.asarray(coeffs)
    if c[0] != 0.0 or c[-1] != 1.0 or np.any(np.diff(c) <= 0):
        r.fail("constellation", "levels must rise strictly from 0 to 1")

    waveform = r.text("waveform")
    if waveform not in ("gaussian", "rectangular") and not waveform.startswith("sampled:"):
        r.fail("waveform", "expected gaussian, rectangular or sampled:<path>")
    if waveform.startswith("sampled:"):
        target = Path(waveform.split(":", 1)[1])
        if not target.is_absolute():
            target = Path(path).parent / target
        if not target.exists():
            r.fail("waveform", f"no such file {str(target)!r}")
        waveform = f"sampled:{target}"

    model = r.text("conventional_model")
    if model not in ("rectangle", "mean_p"):
        r.fail("conventional_model", "expected rectangle or mean_p")

    for key in ("pilot_k", "n_symbols", "n_draws", "workers"):
        if r.number(key, int) < 1:
            r.fail(key, "must be >= 1")
    lambda_s = r.number("lambda_s")
    if lambda_s < 0:
        r.fail("lambda_s", "must be >= 0")
    run_seed = r.number("seed", int) if seed is None else int(seed)
    if not 0 <= run_seed < 2**64:
        r.fail("seed", "must be an unsigned 64-bit integer")

    s_values = _sweep(r, "lambda_s", geometric=False)
    b_values = _sweep(r, "lambda_b", geometric=True)
    for key, vals in (("lambda_s_values", s_values), ("lambda_b_values", b_values)):
        if vals is not None and min(vals) < 0:
            r.fail(key, "sweep values must be >= 0")

    return RunConfig(
        schedule=schedule,
        rates=rates,
        lambda_s=lambda_s,
        lambda_s_values=s_values,
        lambda_b_values=b_values,
        coeffs=tuple(float(v) for v in coeffs),
        waveform=waveform,
        pilot_k=r.number("pilot_k", int),
        n_symbols=r.number("n_symbols", int),
        n_draws=r.number("n_draws", int),
        seed=run_seed,
        conventional_model=model,
        workers=r.number("workers", int),
    )
