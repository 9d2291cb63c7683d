"""Count PMFs: Poisson binomial via characteristic-function FFT, plus baselines.

Transform convention
--------------------
With ``w = 2 pi / (N + 1)`` the characteristic function sampled on the
unit-circle grid is ``x_l = prod_j (1 - p_j + p_j exp(i w l))`` and

    Pr(k) = 1/(N+1) * sum_l exp(-i w l k) x_l ,   k = 0..N.

That is exactly ``numpy.fft.fft(x) / (N + 1)``: numpy's forward FFT uses
the ``exp(-2 pi i l k / n)`` kernel with no scaling.  For N = 2 and
p = (1/2, 1/2) the grid is the cube roots of unity, x = (1, r, conj(r))
with r = ((1 + exp(2 pi i / 3)) / 2)^2, and the FFT returns (1/4, 1/2, 1/4).
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from gatedspad.errors import DomainError, ModelError

# Raw transform outputs in [-CLAMP_TOL, 0) are float noise and set to 0.
CLAMP_TOL = 1e-12
IMAG_TOL = 1e-9


def _as_probs(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise DomainError("need a non-empty 1-d vector of probabilities")
    if not np.all((p >= 0.0) & (p <= 1.0)):
        raise DomainError("probabilities must lie in [0, 1]")
    return p


def characteristic_grid(p) -> np.ndarray:
    """``x_l`` for l = 0..N, accumulated as sums of log-moduli and arguments.

    Products of N factors of modulus < 1 underflow for large N, so each
    ``x_l`` is rebuilt from ``exp(sum ln|z_j|)`` and ``sum arg z_j``.
    Only l <= N/2 is evaluated; the rest follows from x_{N+1-l} = conj(x_l).
    """
    p = _as_probs(p)
    n = p.size
    size = n + 1
    half = size // 2 + 1
    theta = 2.0 * np.pi * np.arange(half) / size
    # rows are grid points so the sums run along contiguous memory, where
    # numpy sums pairwise; naive accumulation of N arguments costs ~N ulp
    re = 1.0 - p + p * np.cos(theta)[:, None]
    im = p * np.sin(theta)[:, None]
    with np.errstate(divide="ignore"):
        log_mod = 0.5 * np.log(re * re + im * im).sum(axis=1)
    arg = np.arctan2(im, re).sum(axis=1)
    head = np.exp(log_mod) * (np.cos(arg) + 1j * np.sin(arg))
    x = np.empty(size, dtype=complex)
    x[:half] = head
    x[half:] = np.conj(head[1 : size - half + 1][::-1])
    return x


def dft_cf_pmf(p) -> np.ndarray:
    """Exact Poisson binomial PMF over counts 0..N by the DFT-CF method."""
    x = characteristic_grid(p)
    raw = np.fft.fft(x) / x.size
    if np.max(np.abs(raw.imag)) > IMAG_TOL:
        raise ModelError(f"imaginary residue {np.max(np.abs(raw.imag)):.3g} exceeds {IMAG_TOL}")
    return clamp_negatives(raw.real)


def clamp_negatives(pmf: np.ndarray) -> np.ndarray:
    lo = pmf.min()
    if lo < -CLAMP_TOL:
        raise ModelError(f"PMF entry {lo:.3g} below -{CLAMP_TOL}")
    return np.where(pmf < 0.0, 0.0, pmf)


def brute_force_pmf(p) -> np.ndarray:
    """Exact O(N^2) PMF by convolving in one Bernoulli factor at a time."""
    p = _as_probs(p)
    pmf = np.zeros(p.size + 1)
    pmf[0] = 1.0
    for j, pj in enumerate(p, start=1):
        pmf[1 : j + 1] = pmf[1 : j + 1] * (1.0 - pj) + pmf[:j] * pj
        pmf[0] *= 1.0 - pj
    return pmf


def binomial_pmf(n: int, q: float) -> np.ndarray:
    """Binomial(n, q) masses for k = 0..n computed in log space."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"q must lie in [0, 1], got {q}")
    k = np.arange(n + 1)
    log_c = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    return np.exp(log_c + xlogy(k, q) + xlog1py(n - k, -q))


def pmf_stats(pmf) -> dict:
    """Mean, variance and mode (lowest k among ties) of a count PMF."""
    pmf = np.asarray(pmf, dtype=float)
    k = np.arange(pmf.size)
    mean = float(k @ pmf)
    var = float((k * k) @ pmf - mean * mean)
    return {"mean": mean, "variance": max(var, 0.0), "mode": int(np.argmax(pmf))}


def tv_distance(a, b) -> float:
    """Total variation distance between two PMFs on the same support."""
    return 0.5 * float(np.abs(np.asarray(a) - np.asarray(b)).sum())
