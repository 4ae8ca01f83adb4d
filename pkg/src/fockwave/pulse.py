"""Quantum pulse envelopes: sampling, time-bin discretization and spectra.

Times are in units of 1/gamma and angular frequencies in units of gamma
throughout the package. An envelope ``f(t)`` is unit normalized,
``int |f(t)|^2 dt = 1``, and its spectrum is taken relative to the carrier,
``f(w) = int f(t) exp(i (w - w_p) t) dt``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

# Gaussian envelopes are centred at GAUSSIAN_CENTER * sigma and cut off
# symmetrically at t = 0 and t = 2 * GAUSSIAN_CENTER * sigma.
GAUSSIAN_CENTER = 5.0

MIN_BINS_IN_PULSE = 20


class PulseShape(str, enum.Enum):
    RECTANGULAR = "rectangular"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class PulseSpec:
    """Shape, duration and photon content of an incident Fock-state pulse.

    Attributes:
        shape: Envelope family.
        t_p: Duration of a rectangular pulse, or the standard deviation
            ``sigma`` of a Gaussian amplitude envelope.
        carrier_detuning: ``w_p - w_0``, carrier frequency relative to the
            frame frequency ``w_0``.
        photon_number: Number of photons in the Fock state (1 or 2).
    """

    shape: PulseShape = PulseShape.RECTANGULAR
    t_p: float = 2.0
    carrier_detuning: float = 0.0
    photon_number: int = 1

    def __post_init__(self):
        object.__setattr__(self, "shape", PulseShape(self.shape))
        if not (math.isfinite(self.t_p) and self.t_p > 0):
            raise ValueError(f"t_p must be positive and finite, got {self.t_p}")
        if not math.isfinite(self.carrier_detuning):
            raise ValueError("carrier_detuning must be finite")
        if self.photon_number not in (1, 2):
            raise ValueError(
                f"photon_number must be 1 or 2, got {self.photon_number}")

    @property
    def support(self) -> tuple[float, float]:
        """Interval outside of which the envelope is identically zero."""
        if self.shape is PulseShape.RECTANGULAR:
            return 0.0, self.t_p
        return 0.0, 2.0 * GAUSSIAN_CENTER * self.t_p


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of time bins ``[k dt, (k+1) dt)`` starting at t = 0."""

    dt: float
    n_bins: int

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_bins < 1:
            raise ValueError(f"n_bins must be >= 1, got {self.n_bins}")

    @classmethod
    def for_pulse(cls, spec: PulseSpec, dt: float, tail: float = 12.0,
                  gamma: float = 1.0) -> "TimeGrid":
        """Grid covering the pulse support plus a decay tail of
        ``tail / gamma``."""
        span = spec.support[1] + tail / gamma
        # round() first so that e.g. 14 / 0.01 does not become 1401 bins
        n_bins = int(math.ceil(round(span / dt, 9)))
        return cls(dt=dt, n_bins=n_bins)

    @property
    def times(self) -> np.ndarray:
        """Bin start times ``t_k = k dt``."""
        return self.dt * np.arange(self.n_bins)

    @property
    def midpoints(self) -> np.ndarray:
        return self.dt * (np.arange(self.n_bins) + 0.5)

    @property
    def edges(self) -> np.ndarray:
        """All ``n_bins + 1`` bin boundaries, from 0 to ``t_end``."""
        return self.dt * np.arange(self.n_bins + 1)

    @property
    def t_end(self) -> float:
        return self.dt * self.n_bins


def _envelope(spec: PulseSpec, t: np.ndarray) -> np.ndarray:
    lo, hi = spec.support
    inside = (t >= lo) & (t <= hi)
    if spec.shape is PulseShape.RECTANGULAR:
        return np.where(inside, 1.0 / math.sqrt(spec.t_p), 0.0)
    sigma = spec.t_p
    norm = (math.pi * sigma**2) ** -0.25
    x = (t - GAUSSIAN_CENTER * sigma) / sigma
    return np.where(inside, norm * np.exp(-0.5 * x**2), 0.0)


def sample_envelope(spec: PulseSpec, t):
    """Evaluate the pulse amplitude ``f(t)`` in the frame rotating at ``w_0``.

    The slowly varying envelope is multiplied by the carrier phase
    ``exp(-i (w_p - w_0) t)``. The Gaussian envelope is normalized on the
    untruncated line; the truncated energy is below 1e-11.

    Args:
        spec: Pulse description.
        t: Scalar or array of non-negative times.

    Returns:
        Complex amplitude(s), same shape as ``t``.
    """
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)):
        raise ValueError("sample_envelope requires finite times")
    if np.any(t_arr < 0):
        raise ValueError("sample_envelope requires t >= 0")
    f = _envelope(spec, t_arr).astype(complex)
    if spec.carrier_detuning:
        f = f * np.exp(-1j * spec.carrier_detuning * t_arr)
    return f if f.ndim else complex(f)


def discretize(spec: PulseSpec, grid: TimeGrid,
               min_bins: int = MIN_BINS_IN_PULSE) -> np.ndarray:
    """Time-bin coefficients ``f_k`` of the input Fock state.

    Samples ``f`` at bin midpoints, scales by ``sqrt(dt)`` and renormalizes so
    that ``sum |f_k|^2 == 1``.

    Raises:
        ValueError: if the grid ends before the pulse support does, or fewer
            than ``min_bins`` bins fall inside the support.
    """
    lo, hi = spec.support
    if grid.t_end < hi * (1 - 1e-12):
        raise ValueError(
            f"grid ends at t={grid.t_end:g} but the pulse extends to t={hi:g}")
    mid = grid.midpoints
    inside = np.count_nonzero((mid >= lo) & (mid <= hi))
    if inside < min_bins:
        raise ValueError(
            f"only {inside} bins inside the pulse support; need >= {min_bins}")
    f_k = sample_envelope(spec, mid) * math.sqrt(grid.dt)
    return f_k / np.linalg.norm(f_k)


def _gauss_legendre(lo: float, hi: float, panels: int, order: int = 16):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    nodes = (edges[:-1, None] + half[:, None] * (x[None, :] + 1)).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def envelope_spectrum(spec: PulseSpec, omega) -> np.ndarray:
    """Input power spectrum ``|f(w)|^2`` at detunings ``omega = w - w_p``.

    Closed form for rectangular pulses; composite Gauss-Legendre quadrature
    of the Fourier integral otherwise.
    """
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise ValueError("omega grid must be finite")
    if spec.shape is PulseShape.RECTANGULAR:
        # np.sinc(x) = sin(pi x) / (pi x)
        return spec.t_p * np.sinc(omega * spec.t_p / (2 * np.pi)) ** 2
    lo, hi = spec.support
    width = hi - lo
    max_w = float(np.max(np.abs(omega))) if omega.size else 0.0
    panels = max(64, int(math.ceil(width * max_w / 2)) + 1)
    nodes, weights = _gauss_legendre(lo, hi, panels)
    wenv = weights * _envelope(spec, nodes)
    flat = omega.ravel()
    out = np.empty(flat.shape)
    # chunk the frequency axis so the phase matrix stays a few MB
    step = max(1, 2**19 // len(nodes))
    for i in range(0, len(flat), step):
        ft = np.exp(1j * np.outer(flat[i:i + step], nodes)) @ wenv
        out[i:i + step] = np.abs(ft) ** 2
    return out.reshape(omega.shape)


def discrete_envelope_spectrum(f_k, dt: float, omega,
                               frame_shift: float = 0.0) -> np.ndarray:
    """Spectrum ``dt |sum_k f_k exp(i (w + frame_shift) t_k)|^2`` of time-bin
    coefficients, i.e. what free propagation of the binned pulse yields."""
    f_k = np.asarray(f_k, dtype=complex)
    t = dt * (np.arange(len(f_k)) + 0.5)
    w = np.asarray(omega, dtype=float) + frame_shift
    return np.abs(np.exp(1j * np.outer(w, t)) @ f_k) ** 2 * dt
