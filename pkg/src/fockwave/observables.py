"""Spectra and populations derived from a scattered time-bin state.

All spectra are built from one discretized correlation matrix
``G[j, k] = v_g <a_R^+(t_j) a_R(t_k)>`` over the output bins. Each bin is a
quadrature cell; in the lag ``tau = t_k - t_j >= 0`` the zero-lag diagonal
carries trapezoid weight 1/2.

Normalization: spectra are two-sided, ``S = 2 Re[...]``, so that the
stationary spectrum of a freely propagating pulse is ``|f(w)|^2`` and
``(1/2pi) int S dw`` equals the photon number. The same factor is applied
to ``S(w, t)`` and ``I(w, t)``, so ``int I(w, t) dt = S(w) = S(w, t_end)``
holds exactly at the level of the discrete sums.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .analytic import PopulationSeries
from .mps import EvolutionResult, TimeBinState, correlation_block

DEFAULT_OMEGA = (-10.0, 10.0, 401)
TAIL_TOLERANCE = 1e-4


def default_omega_grid() -> np.ndarray:
    lo, hi, n = DEFAULT_OMEGA
    return np.linspace(lo, hi, n)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Output-field correlations over scattered bins (flux units).

    Attributes:
        g: Hermitian matrix ``<dB_j^+ dB_k> / dt^2``.
        dt: Bin width.
        frame_shift: ``w_p - w_0``; the matrix is stored in the frame
            rotating at ``w_0`` and shifted to the carrier frame when
            spectra are formed.
    """

    g: np.ndarray
    dt: float
    frame_shift: float = 0.0

    @property
    def n_bins(self) -> int:
        return self.g.shape[0]

    @property
    def times(self) -> np.ndarray:
        """Bin midpoints, the time each output bin represents."""
        return self.dt * (np.arange(self.n_bins) + 0.5)

    @property
    def flux(self) -> np.ndarray:
        return self.g.diagonal().real.copy()

    def photon_number(self) -> float:
        return float(self.flux.sum() * self.dt)

    def tail_ratio(self) -> float:
        """Final diagonal value relative to the diagonal peak."""
        flux = self.flux
        peak = flux.max()
        return float(abs(flux[-1]) / peak) if peak > 0 else 0.0


class SpectrumKind(str, enum.Enum):
    TIME_DEPENDENT_SPECTRUM = "S"
    SPECTRAL_INTENSITY = "I"


@dataclass(frozen=True)
class SpectrumResult:
    omega: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DynamicalSpectrum:
    """Real surface ``values[i_omega, i_t]``."""

    omega: np.ndarray
    times: np.ndarray
    values: np.ndarray
    kind: SpectrumKind
    metadata: dict = field(default_factory=dict)


def correlation_matrix(state: TimeBinState, dt: float,
                       frame_shift: float = 0.0) -> CorrelationMatrix:
    """Correlation matrix over every bin that has passed the emitter."""
    return CorrelationMatrix(g=correlation_block(state, dt), dt=dt,
                             frame_shift=frame_shift)


def _phases(cm: CorrelationMatrix, omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 1 or not np.all(np.isfinite(omega)):
        raise ValueError("omega must be a finite 1-d grid")
    return np.exp(1j * np.outer(cm.times, omega + cm.frame_shift))


def _metadata(cm: CorrelationMatrix) -> dict:
    ratio = cm.tail_ratio()
    meta = {"normalization": "two-sided (2 Re)",
            "photon_number": cm.photon_number(),
            "tail_ratio": ratio,
            "tail_ok": ratio < TAIL_TOLERANCE}
    if not meta["tail_ok"]:
        meta["warning"] = (f"output flux at the grid end is {ratio:.2e} of its "
                           "peak; spectra are truncated")
    return meta


def spectral_intensity(cm: CorrelationMatrix, omega,
                       stride: int = 1) -> DynamicalSpectrum:
    """``I(w, t) = 2 Re int_0^{T - t} dtau G(t, t + tau) exp(i dw tau)``.

    Evaluated at every ``stride``-th bin midpoint; the lag integral is cut
    at the end of the grid.
    """
    e = _phases(cm, omega)
    upper = np.triu(cm.g, 1)
    y = upper @ e
    vals = (2 * (e.conj() * y).real + cm.flux[:, None]) * cm.dt
    sel = slice(None, None, stride)
    return DynamicalSpectrum(omega=np.asarray(omega, float),
                             times=cm.times[sel], values=vals[sel].T,
                             kind=SpectrumKind.SPECTRAL_INTENSITY,
                             metadata=_metadata(cm))


def stationary_spectrum(cm: CorrelationMatrix, omega) -> SpectrumResult:
    """Long-time transmitted spectrum ``S(w)``."""
    e = _phases(cm, omega)
    upper = np.triu(cm.g, 1)
    y = upper @ e
    vals = (2 * (e.conj() * y).real + cm.flux[:, None]).sum(axis=0) * cm.dt**2
    meta = _metadata(cm)
    full = np.einsum("jw,jw->w", e.conj(), cm.g @ e) * cm.dt**2
    scale = max(float(np.abs(full.real).max()), 1e-300)
    meta["imag_residue"] = float(np.abs(full.imag).max() / scale)
    return SpectrumResult(omega=np.asarray(omega, float), values=vals,
                          metadata=meta)


def time_dependent_spectrum(cm: CorrelationMatrix, omega,
                            stride: int = 1) -> DynamicalSpectrum:
    """``S(w, t) = 2 Re int_0^t dt' int_0^{t - t'} dtau G(t', t' + tau)
    exp(i dw tau)`` at the bin edges ``t = 0, dt, ..., T``.

    Built incrementally: the sum over the triangle up to edge ``K`` adds the
    column ``k = K - 1`` to the one up to ``K - 1``, so the full surface costs
    one matrix product.
    """
    e = _phases(cm, omega)
    upper = np.triu(cm.g, 1)
    x = upper.T @ e.conj()  # x[k, w] = sum_{j<k} G[j, k] conj(e[j, w])
    incr = (2 * (x * e).real + cm.flux[:, None]) * cm.dt**2
    vals = np.vstack([np.zeros((1, len(omega))), np.cumsum(incr, axis=0)])
    edges = cm.dt * np.arange(cm.n_bins + 1)
    idx = np.arange(0, cm.n_bins + 1, stride)
    if idx[-1] != cm.n_bins:
        idx = np.append(idx, cm.n_bins)
    return DynamicalSpectrum(omega=np.asarray(omega, float), times=edges[idx],
                             values=vals[idx].T,
                             kind=SpectrumKind.TIME_DEPENDENT_SPECTRUM,
                             metadata=_metadata(cm))


def population_series(result: EvolutionResult,
                      label: str = "MPS") -> PopulationSeries:
    return PopulationSeries(times=result.times,
                            values=result.tls_population.copy(), label=label)
