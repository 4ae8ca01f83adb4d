"""Closed-form results for a chiral two-level emitter driven by a rectangular
Fock-state pulse, and a brute-force propagator for the one-excitation sector.

The closed forms hold on resonance (``delta = 0``) for a rectangular pulse
of duration ``t_p`` that starts at t = 0. They serve as oracles for the
tensor-network engine in :mod:`fockwave.mps`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pulse import PulseSpec, TimeGrid, envelope_spectrum, sample_envelope


class UnsupportedConfigurationError(ValueError):
    """Raised when a closed form is requested outside its derivation."""


class OutOfDomainError(ValueError):
    """Raised when a closed form is evaluated outside its time domain."""


@dataclass(frozen=True)
class SystemParams:
    """Emitter parameters.

    Only right-moving emission is modelled, so ``gamma`` is the total decay
    rate and the left-moving rate is identically zero.

    Attributes:
        gamma: Decay rate into the right-moving waveguide mode. Zero
            decouples the emitter (reference runs without interaction).
        delta: Emitter detuning ``w_a - w_0`` from the frame frequency.
    """

    gamma: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if not math.isfinite(self.delta):
            raise ValueError("delta must be finite")


@dataclass(frozen=True)
class PopulationSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ""


def _check_closed_form(p: SystemParams, t_p: float, t):
    if p.gamma <= 0:
        raise UnsupportedConfigurationError("closed forms need gamma > 0")
    if p.delta != 0:
        raise UnsupportedConfigurationError(
            "closed-form populations assume a resonant emitter (delta = 0)")
    if not t_p > 0:
        raise ValueError(f"t_p must be positive, got {t_p}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise ValueError("t must be finite and non-negative")
    return t


def _scalar_or_array(x: np.ndarray):
    if x.ndim:
        return x
    return complex(x) if np.iscomplexobj(x) else float(x)


def n_tls_one_photon(p: SystemParams, t_p: float, t):
    """Excited-state population for a one-photon rectangular pulse.

    After the pulse the population decays freely from its value at ``t_p``:
    ``4/(g t_p) (exp(g t_p/2) - 1)^2 exp(-g t)``. Writing the prefactor as
    ``(1 - exp(g t_p))^2`` instead would make the population jump at
    ``t = t_p``.
    """
    t = _check_closed_form(p, t_p, t)
    g = p.gamma
    pref = 4.0 / (g * t_p)
    during = pref * (np.exp(-g * t / 2) - 1.0) ** 2
    after = pref * np.expm1(g * t_p / 2) ** 2 * np.exp(-g * t)
    return _scalar_or_array(np.where(t <= t_p, during, after))


def n_tls_two_photon(p: SystemParams, t_p: float, t):
    """Excited-state population for a two-photon rectangular pulse."""
    t = _check_closed_form(p, t_p, t)
    g = p.gamma
    a = 1.0 / (g * t_p)
    during = 8 * a * (
        (-32 * a + 16 * t / t_p - 2) * np.exp(-g * t / 2)
        - 8 * a + 1
        + (40 * a + 8 * t / t_p + 1) * np.exp(-g * t))
    # exponents combined with -g t to avoid overflow for long pulses
    after = 8 * a * (
        (-32 * a + 14) * np.exp(g * t_p / 2 - g * t)
        + (-8 * a + 1) * np.exp(g * t_p - g * t)
        + (40 * a + 9) * np.exp(-g * t))
    return _scalar_or_array(np.where(t <= t_p, during, after))


def stationary_spectrum_one_photon(spec: PulseSpec, p: SystemParams,
                                   omega) -> np.ndarray:
    """Long-time transmitted spectrum for one-photon input.

    All emitter contributions cancel and the transmitted spectrum is the
    input spectrum ``|f(w)|^2``, for any pulse shape and detuning.
    """
    if spec.photon_number != 1:
        raise UnsupportedConfigurationError(
            "the cancellation result holds for one-photon input only")
    return envelope_spectrum(spec, omega)


def flux_after_pulse(p: SystemParams, t_p: float, t):
    """Output photon flux ``v_g <a_R^+(t) a_R(t)>`` for ``t > t_p``
    (one photon, rectangular, resonant)."""
    t = _check_closed_form(p, t_p, t)
    if np.any(t <= t_p):
        raise OutOfDomainError("flux closed form only holds for t > t_p")
    g = p.gamma
    val = 4.0 / t_p * np.expm1(g * t_p / 2) ** 2 * np.exp(-g * t)
    return _scalar_or_array(val)


def correlation_after_pulse(p: SystemParams, t_p: float, t, tau):
    """First-order output correlation ``v_g <a_R^+(t) a_R(t + tau)>`` for
    ``t > t_p`` and ``tau >= 0``."""
    t = _check_closed_form(p, t_p, t)
    tau = np.asarray(tau, dtype=float)
    if np.any(t <= t_p):
        raise OutOfDomainError("correlation closed form only holds for t > t_p")
    if np.any(tau < 0):
        raise OutOfDomainError("tau must be non-negative")
    g = p.gamma
    val = 4.0 / t_p * np.expm1(g * t_p / 2) ** 2 * np.exp(-g * (t + tau / 2))
    return _scalar_or_array(val.astype(complex))


@dataclass(frozen=True)
class SectorSolution:
    """Result of :func:`propagate_one_photon_sector`.

    Attributes:
        population: ``|e(t)|^2`` at the grid edges ``k dt``, k = 0..n_bins.
        output: Output amplitude ``f(t) + sqrt(gamma) e(t)`` at bin midpoints.
        emitted: Cumulative emitted photon number ``int_0^t |f_out|^2`` at
            the grid edges.
        amplitude: Complex excited-state amplitude at the grid edges.
    """

    population: PopulationSeries
    output: np.ndarray
    emitted: np.ndarray
    amplitude: np.ndarray


def propagate_one_photon_sector(spec: PulseSpec, p: SystemParams,
                                grid: TimeGrid, substeps: int = 10,
                                ) -> SectorSolution:
    """Integrate the one-excitation amplitude equation with fixed-step RK4.

    ``de/dt = -(gamma/2 + i delta) e - sqrt(gamma) f(t)``, with the output
    field ``f_out = f + sqrt(gamma) e``. The emitted photon number is carried
    as an extra ODE component so that it inherits the RK4 accuracy.

    The step is ``grid.dt / substeps``. Stage times at the ends of each step
    are nudged inward so that a pulse edge falling on a step boundary is
    seen with the correct one-sided limit.
    """
    if spec.photon_number != 1:
        raise UnsupportedConfigurationError(
            "the sector propagator handles one-photon input only")
    if substeps % 2:
        raise ValueError("substeps must be even to sample bin midpoints")
    h = grid.dt / substeps
    n_steps = grid.n_bins * substeps
    t0 = h * np.arange(n_steps)
    eps = 1e-9 * h
    # python scalars make the stepping loop several times faster
    f_start = sample_envelope(spec, t0 + eps).tolist()
    f_mid = sample_envelope(spec, t0 + h / 2).tolist()
    f_end = sample_envelope(spec, t0 + h - eps).tolist()

    g = p.gamma
    sg = math.sqrt(g)
    rate = -(g / 2 + 1j * p.delta)

    def rhs(e, f):
        out = f + sg * e
        return rate * e - sg * f, abs(out) ** 2

    e = 0j
    emitted = 0.0
    amp = np.empty(grid.n_bins + 1, dtype=complex)
    cum = np.empty(grid.n_bins + 1)
    out_mid = np.empty(grid.n_bins, dtype=complex)
    amp[0], cum[0] = e, emitted
    half = substeps // 2
    for i in range(n_steps):
        k1, q1 = rhs(e, f_start[i])
        k2, q2 = rhs(e + 0.5 * h * k1, f_mid[i])
        k3, q3 = rhs(e + 0.5 * h * k2, f_mid[i])
        k4, q4 = rhs(e + h * k3, f_end[i])
        e = e + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        emitted += h / 6 * (q1 + 2 * q2 + 2 * q3 + q4)
        b, r = divmod(i + 1, substeps)
        if r == half:
            out_mid[b] = f_start[i + 1] + sg * e
        elif r == 0:
            amp[b], cum[b] = e, emitted
    pop = PopulationSeries(times=grid.edges, values=np.abs(amp) ** 2,
                           label="one-photon sector ODE")
    return SectorSolution(population=pop, output=out_mid, emitted=cum,
                          amplitude=amp)
