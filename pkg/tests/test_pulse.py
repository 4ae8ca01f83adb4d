import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fockwave.pulse import (PulseShape, PulseSpec, TimeGrid,
                            discrete_envelope_spectrum, discretize,
                            envelope_spectrum, sample_envelope)

RECT = PulseSpec(PulseShape.RECTANGULAR, t_p=2.0)
GAUSS = PulseSpec(PulseShape.GAUSSIAN, t_p=1.0)


def test_rectangular_samples():
    assert sample_envelope(RECT, 1.0) == pytest.approx(1 / math.sqrt(2))
    assert sample_envelope(RECT, 3.0) == 0


def test_sample_rejects_bad_times():
    with pytest.raises(ValueError):
        sample_envelope(RECT, float("nan"))
    with pytest.raises(ValueError):
        sample_envelope(RECT, -0.1)


def test_carrier_detuning_is_a_phase():
    spec = PulseSpec(t_p=2.0, carrier_detuning=1.5)
    t = np.linspace(0, 2, 7)
    f = sample_envelope(spec, t)
    np.testing.assert_allclose(np.abs(f), sample_envelope(RECT, t).real)
    np.testing.assert_allclose(f, np.exp(-1.5j * t) / math.sqrt(2))


@pytest.mark.parametrize("kwargs", [
    {"t_p": 0.0}, {"t_p": -1.0}, {"t_p": float("inf")},
    {"photon_number": 0}, {"photon_number": 3},
    {"carrier_detuning": float("nan")},
])
def test_pulse_spec_validation(kwargs):
    with pytest.raises(ValueError):
        PulseSpec(**kwargs)


def test_gaussian_normalized_on_grid():
    t = np.linspace(0, GAUSS.support[1], 20001)
    f = sample_envelope(GAUSS, t)
    assert np.trapezoid(np.abs(f) ** 2, t) == pytest.approx(1.0, abs=1e-6)


def test_grid_covers_pulse_and_tail():
    grid = TimeGrid.for_pulse(RECT, 0.01, tail=8.0)
    assert grid.n_bins == 1000
    assert grid.t_end >= RECT.t_p + 8.0 - 1e-12
    assert len(grid.edges) == grid.n_bins + 1
    np.testing.assert_allclose(grid.midpoints - grid.times, 0.005)


def test_discretize_flat_pulse():
    grid = TimeGrid.for_pulse(RECT, 0.01)
    f_k = discretize(RECT, grid)
    inside = grid.midpoints < RECT.t_p
    np.testing.assert_allclose(f_k[inside], math.sqrt(0.01 / 2))
    assert np.all(f_k[~inside] == 0)
    assert np.sum(np.abs(f_k) ** 2) == pytest.approx(1.0, abs=1e-14)


def test_discretize_errors():
    coarse = TimeGrid.for_pulse(RECT, 0.2)
    with pytest.raises(ValueError, match="bins inside"):
        discretize(RECT, coarse)
    clipped = TimeGrid(dt=0.01, n_bins=500)  # Gaussian support ends at 10
    with pytest.raises(ValueError, match="pulse extends"):
        discretize(GAUSS, clipped)


@settings(max_examples=25, deadline=None)
@given(shape=st.sampled_from(list(PulseShape)),
       t_p=st.floats(0.5, 4.0), dt=st.sampled_from([0.005, 0.01, 0.02]),
       detuning=st.floats(-3, 3))
def test_discretize_is_normalized(shape, t_p, dt, detuning):
    spec = PulseSpec(shape, t_p=t_p, carrier_detuning=detuning)
    f_k = discretize(spec, TimeGrid.for_pulse(spec, dt, tail=1.0))
    assert np.sum(np.abs(f_k) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_discretize_dt_independence():
    # the reconstructed continuous norm moves by < 1e-6 when dt doubles
    for spec in (RECT, GAUSS):
        norms = []
        for dt in (0.01, 0.005):
            grid = TimeGrid.for_pulse(spec, dt, tail=1.0)
            f_k = discretize(spec, grid)
            norms.append(np.sum(np.abs(f_k / math.sqrt(dt)) ** 2) * dt)
        assert abs(norms[0] - norms[1]) < 1e-6


def test_rectangular_spectrum_values():
    assert envelope_spectrum(RECT, [0.0])[0] == pytest.approx(2.0)
    assert envelope_spectrum(RECT, [math.pi])[0] == pytest.approx(0, abs=1e-15)


@pytest.mark.parametrize("spec, window, n", [
    (RECT, 2000.0, 400001),
    (PulseSpec(PulseShape.RECTANGULAR, t_p=0.5), 2000.0, 400001),
    (GAUSS, 20.0, 4001),
])
def test_parseval(spec, window, n):
    # sinc^2 tails decay like 1/w^2, hence the wide rectangular window
    omega = np.linspace(-window, window, n)
    total = np.trapezoid(envelope_spectrum(spec, omega), omega) / (2 * np.pi)
    assert total == pytest.approx(1.0, abs=1e-3)


def test_rect_closed_form_matches_quadrature():
    t, h = np.linspace(0, 2, 200001, retstep=True)
    f = sample_envelope(RECT, t)
    for w in (0.0, 0.7, 3.0):
        direct = abs(np.trapezoid(f * np.exp(1j * w * t), dx=h)) ** 2
        closed = envelope_spectrum(RECT, [w])[0]
        assert abs(direct - closed) <= 1e-6 * envelope_spectrum(RECT, [0])[0]


def test_gaussian_spectrum_is_gaussian():
    omega = np.linspace(-6, 6, 25)
    expected = 2 * math.sqrt(math.pi) * np.exp(-omega**2)  # sigma = 1
    # cutting the envelope at 0 and 10 sigma, where |f| ~ 3e-6, leaves
    # sinc-shaped ripples of a few 1e-6
    np.testing.assert_allclose(envelope_spectrum(GAUSS, omega), expected,
                               atol=1e-5)


def test_discrete_spectrum_close_to_continuous():
    grid = TimeGrid.for_pulse(RECT, 0.01, tail=1.0)
    f_k = discretize(RECT, grid)
    omega = np.linspace(-10, 10, 41)
    np.testing.assert_allclose(discrete_envelope_spectrum(f_k, 0.01, omega),
                               envelope_spectrum(RECT, omega), atol=5e-3)


def test_spectrum_rejects_non_finite():
    with pytest.raises(ValueError):
        envelope_spectrum(RECT, [0.0, np.inf])
