"""Few-photon Fock-state pulses scattering off a chiral two-level emitter.

Exact time-bin matrix product state simulation, closed-form oracles, and the
derived population dynamics, output correlations and dynamical spectra.
"""

__version__ = "0.1.0"

from .analytic import (OutOfDomainError, PopulationSeries, SystemParams,
                       UnsupportedConfigurationError, correlation_after_pulse,
                       flux_after_pulse, n_tls_one_photon, n_tls_two_photon,
                       propagate_one_photon_sector,
                       stationary_spectrum_one_photon)
from .mps import (CollisionConfig, EvolutionResult, TimeBinState,
                  build_input_mps, collision_unitary, evolve,
                  expectation_local, step, two_point_correlation)
from .observables import (CorrelationMatrix, DynamicalSpectrum,
                          SpectrumResult, correlation_matrix,
                          population_series, spectral_intensity,
                          stationary_spectrum, time_dependent_spectrum)
from .pulse import (PulseShape, PulseSpec, TimeGrid, discretize,
                    envelope_spectrum, sample_envelope)

__all__ = [
    "CollisionConfig", "CorrelationMatrix", "DynamicalSpectrum",
    "EvolutionResult", "OutOfDomainError", "PopulationSeries", "PulseShape",
    "PulseSpec", "SpectrumResult", "SystemParams", "TimeBinState", "TimeGrid",
    "UnsupportedConfigurationError", "build_input_mps", "collision_unitary",
    "correlation_after_pulse", "correlation_matrix", "discretize",
    "envelope_spectrum", "evolve", "expectation_local", "flux_after_pulse",
    "n_tls_one_photon", "n_tls_two_photon", "population_series",
    "propagate_one_photon_sector", "sample_envelope", "spectral_intensity",
    "stationary_spectrum", "stationary_spectrum_one_photon", "step",
    "time_dependent_spectrum", "two_point_correlation",
]
