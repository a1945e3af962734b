import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cached_result
from xxpulse import analysis
from xxpulse.demod import (DegenerateZeroError, SampledPulse, demodulate, find_zeros, reconstruct,
                           reconstruction_error)
from xxpulse.model import TWO_PI, FourierPulse, PulseBasis


def single_tone(tau, n, parity="negative", amp=1.0):
    basis = PulseBasis(tau, n, parity)
    a = np.zeros(n)
    a[-1] = amp
    return FourierPulse(basis, a)


class CallablePulse:
    def __init__(self, f, df, tau, fmax):
        self.f, self.df, self.tau, self.max_frequency = f, df, tau, fmax

    def __call__(self, t):
        return self.f(np.asarray(t, dtype=float))

    def derivative(self, t):
        return self.df(np.asarray(t, dtype=float))


def test_pure_tone_zeros_and_parameters():
    tau = 1e-4
    p = single_tone(tau, 5)  # sin(10 pi t / tau)
    z = find_zeros(p)
    assert z.size == 11
    assert np.allclose(z, np.arange(11) * tau / 10, rtol=0, atol=1e-13 * tau)
    dem = demodulate(p)
    assert np.allclose(dem.detunings, 10 * np.pi / tau, rtol=1e-12)
    assert np.allclose(dem.amplitudes, 1.0, rtol=1e-12)


def test_pure_tone_round_trip():
    tau = 2e-4
    p = single_tone(tau, 7, amp=3.0)
    dem = demodulate(p)
    t = np.linspace(0, tau, 5001)
    assert np.max(np.abs(reconstruct(dem, t) - p(t))) < 1e-10 * 3.0


def test_no_interior_zero():
    p = single_tone(1e-4, 1, "positive")  # sin(pi t / tau)
    dem = demodulate(p)
    assert dem.num_zeros == 2
    assert dem.detunings.size == 1


def test_tangential_zero_detected():
    tau = 1.0
    f = lambda t: np.sin(np.pi * t) * (t - 0.5) ** 2
    df = lambda t: np.pi * np.cos(np.pi * t) * (t - 0.5) ** 2 + 2 * np.sin(np.pi * t) * (t - 0.5)
    with pytest.raises(DegenerateZeroError):
        find_zeros(CallablePulse(f, df, tau, TWO_PI))


def test_zero_pulse_rejected():
    p = FourierPulse(PulseBasis(1e-4, 3), np.zeros(3))
    with pytest.raises(ValueError):
        find_zeros(p)


def test_bad_convention():
    with pytest.raises(ValueError):
        demodulate(single_tone(1e-4, 3), convention="iv")


def test_reference_pulse_bookkeeping(result13):
    p = result13.pulse
    dem = demodulate(p)
    assert np.all(np.diff(dem.zeros) > 0)
    assert np.all(dem.detunings > 0)
    assert dem.phases[-1] == (dem.num_zeros - 1) * np.pi
    assert np.all(reconstruct(dem, dem.zeros) == 0.0)
    assert reconstruction_error(p, dem) <= 1e-3


def test_short_gate_pulse_profile(chain):
    # at 80 us the optimal (1,3) pulse has 387 zeros
    p = cached_result(tau=80e-6).pulse
    dem = demodulate(p)
    assert abs(dem.num_zeros - 387) <= 2
    mu = dem.detunings
    assert chain.mode_freqs[0] <= np.min(mu) and np.max(mu) <= chain.mode_freqs[-1]
    assert abs(np.median(mu) - chain.mode_freqs[2]) < 0.5 * (chain.mode_freqs[3] - chain.mode_freqs[1])
    omega = np.abs(dem.amplitudes)
    assert omega.max() / omega.mean() < 2
    assert reconstruction_error(p, dem) <= 1e-3


def test_error_decreases_with_zero_density():
    short = cached_result(tau=80e-6).pulse
    long = cached_result().pulse
    e_short = reconstruction_error(short, demodulate(short))
    e_long = reconstruction_error(long, demodulate(long))
    assert e_long < e_short


@pytest.mark.parametrize("convention", ["i", "ii", "iii"])
def test_conventions_all_accurate(result13, convention):
    p = result13.pulse
    assert reconstruction_error(p, demodulate(p, convention)) < 1e-4


def test_sampled_pulse_overlap_matches_quadrature(result13, chain):
    dem = demodulate(result13.pulse)
    sp = SampledPulse(dem)
    w = chain.mode_freqs[1]
    t = np.linspace(0, dem.tau, 400001)
    ref = np.trapezoid(sp(t) * np.exp(1j * w * t), t)
    assert abs(sp.overlap([w])[0] - ref) < 1e-6 * dem.tau * np.max(np.abs(dem.amplitudes))


def test_demod_csv(tmp_path, result13):
    dem = demodulate(result13.pulse)
    dem.to_csv(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "t_start_us,t_end_us,omega_over_2pi_mhz,mu_over_2pi_mhz,psi_start_rad"
    assert len(lines) == dem.num_zeros
    first = [float(x) for x in lines[1].split(",")]
    assert first[0] == 0.0 and first[4] == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.floats(0.1, 10.0), st.sampled_from(["negative", "positive"]))
def test_single_tone_zero_count(n, amp, parity):
    tau = 1e-4
    p = single_tone(tau, n, parity, amp)
    zeros = find_zeros(p)
    expected = 2 * n + 1 if parity == "negative" else 2 * n
    assert zeros.size == expected
    dem = demodulate(p)
    assert np.allclose(np.abs(dem.amplitudes), amp, rtol=1e-9)
