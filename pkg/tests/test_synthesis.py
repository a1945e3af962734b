import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import NA, TAU, cached_result
from xxpulse import analysis
from xxpulse.integrals import build_constraint_matrix, coupling_double_integral
from xxpulse.model import TWO_PI, GateSpec, PulseBasis, StabilizationSpec
from xxpulse.synthesis import (EntanglementError, NullSpaceError, null_space, optimize_pulse,
                               project_chi_stabilized, synthesize, synthesize_step_pulse)


def test_null_space_single_row():
    m = np.zeros((1, 8))
    m[0, 1] = 3.0
    ns = null_space(m)
    assert ns.dimension == 7
    assert np.max(np.abs(ns.vectors[1])) < 1e-15
    assert np.allclose(ns.vectors.T @ ns.vectors, np.eye(7))


def test_null_space_of_zero_rows_is_identity():
    ns = null_space(np.zeros((3, 6)))
    assert ns.dimension == 6
    assert np.array_equal(ns.vectors, np.eye(6))


def test_null_space_without_gap_raises(rng):
    q, _ = np.linalg.qr(rng.normal(size=(40, 40)))
    # singular values decay smoothly through the threshold
    m = np.diag(np.logspace(0, -7, 30)) @ q[:30]
    with pytest.raises(NullSpaceError):
        null_space(m)


def test_reference_null_space_dimension(result13):
    assert result13.null_dimension == NA - 5


@pytest.mark.parametrize("order", [0, 3])
def test_null_space_columns_satisfy_constraints(chain, order):
    cm = build_constraint_matrix(PulseBasis(TAU, NA), chain, StabilizationSpec(order))
    ns = null_space(cm)
    assert np.max(np.abs(cm.rows @ ns.vectors)) <= 1e-8
    assert np.allclose(ns.vectors.T @ ns.vectors, np.eye(ns.dimension), atol=1e-12)


def test_forced_single_vector():
    vec = np.array([[0.6], [0.8]])
    s = np.array([[2.0, 0.5], [0.5, -1.0]])
    res = optimize_pulse(vec, s, GateSpec(1, 2))
    r11 = float(vec[:, 0] @ s @ vec[:, 0])
    assert np.allclose(np.abs(res.pulse), np.sqrt(np.pi / 8 / abs(r11)) * vec[:, 0])


def test_diagonal_reduced_problem_against_grid():
    s = np.diag([1.0, -4.0, 2.0])
    res = optimize_pulse(np.eye(3), s, GateSpec(1, 2))
    assert res.norm_gamma ** 2 == pytest.approx(np.pi / 32, rel=1e-12)
    assert np.allclose(np.abs(res.pulse), [0, np.sqrt(np.pi / 32), 0])
    assert res.chi == pytest.approx(-np.pi / 8)
    # brute force: minimise sum v^2 subject to |sum v^2 lambda| = pi/8 over a grid of directions
    lam = np.diag(s)
    best = np.inf
    for th in np.linspace(0, np.pi, 181):
        for ph in np.linspace(0, 2 * np.pi, 361):
            d = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
            q = abs(np.sum(d ** 2 * lam))
            if q > 1e-12:
                best = min(best, np.pi / 8 / q)
    assert best == pytest.approx(np.pi / 32, rel=1e-6)
    assert res.norm_gamma ** 2 <= best * (1 + 1e-12)


def test_tie_break_is_deterministic():
    s = np.diag([2.0, -2.0, 1.0])
    a = optimize_pulse(np.eye(3), s, GateSpec(1, 2))
    b = optimize_pulse(np.eye(3), s, GateSpec(1, 2))
    assert np.array_equal(a.pulse, b.pulse)
    assert abs(a.lambda_max) == 2.0


def test_sign_convention_first_amplitude_positive(result13):
    amps = result13.amplitudes
    first = np.flatnonzero(np.abs(amps) > 1e-6 * np.max(np.abs(amps)))[0]
    assert amps[first] > 0


def test_zero_coupling_raises():
    with pytest.raises(EntanglementError):
        optimize_pulse(np.eye(3), np.zeros((3, 3)), GateSpec(1, 2))


def test_reference_pulse_entanglement_and_residual(chain, gate13, result13):
    assert abs(analysis.chi(result13.pulse, chain, gate13)) == pytest.approx(np.pi / 8, rel=1e-6)
    assert abs(result13.chi) == pytest.approx(np.pi / 8, rel=1e-9)
    assert result13.residual < 1e-8 * result13.norm_gamma


def test_reference_spectrum_shape(chain, result13):
    amps = np.abs(result13.amplitudes)
    n = np.arange(1, NA + 1)
    peak_n = n[np.argmax(amps)]
    mode_n = chain.mode_freqs * TAU / TWO_PI
    assert mode_n.min() - 5 <= peak_n <= mode_n.max() + 5
    # above the mode band |A_n| falls off like 1 / (n - n_peak)
    upper = n > mode_n.max() + 40
    fit = np.polyfit(np.log(n[upper] - peak_n), np.log(amps[upper]), 1)[0]
    assert -1.5 < fit < -0.5, fit
    # and the weight sits in the band
    band = np.abs(n - peak_n) < 40
    assert np.sum(amps[band] ** 2) > 0.9 * np.sum(amps ** 2)


def test_synthesis_is_deterministic(chain, gate13):
    basis = PulseBasis(100e-6, 400)
    a = synthesize(chain, gate13, basis)
    b = synthesize(chain, gate13, basis)
    assert a.amplitudes.tobytes() == b.amplitudes.tobytes()


def test_basis_size_robustness(chain, gate13, result13):
    # at 300 us the basis must reach the ~2.4 MHz modes, i.e. N_A > 720
    other = synthesize(chain, gate13, PulseBasis(TAU, 800))
    assert other.pulse.peak() == pytest.approx(result13.pulse.peak(), rel=0.01)


def test_parity_degeneracy_short_gate(chain, gate13):
    neg = synthesize(chain, gate13, PulseBasis(80e-6, NA, "negative"))
    pos = synthesize(chain, gate13, PulseBasis(80e-6, NA, "positive"))
    assert pos.pulse.peak() == pytest.approx(neg.pulse.peak(), rel=2e-3)


def test_optimality_against_random_null_vectors(chain, gate13, rng):
    basis = PulseBasis(100e-6, 300)
    ns = null_space(build_constraint_matrix(basis, chain, StabilizationSpec(0)))
    s = coupling_double_integral(basis, chain, gate13).s
    res = optimize_pulse(ns, s, gate13, basis)
    for _ in range(50):
        w = ns.vectors @ rng.normal(size=ns.dimension)
        q = abs(w @ s @ w)
        w *= np.sqrt(np.pi / 8 / q)
        assert np.linalg.norm(w) >= res.norm_gamma


def test_mixed_parity_purity(chain, gate13):
    na = 400
    res = synthesize(chain, gate13, PulseBasis(100e-6, na, "mixed"))
    a = res.amplitudes
    share = max(np.sum(a[:na] ** 2), np.sum(a[na:] ** 2)) / np.sum(a ** 2)
    assert share >= 0.999


def test_projection_edge_cases(rng):
    q, _ = np.linalg.qr(rng.normal(size=(10, 4)))
    d = [np.diag(np.arange(10.0))]
    assert project_chi_stabilized(q, d, 0) is q
    with pytest.raises(ValueError):
        project_chi_stabilized(q, d, 4)
    out = project_chi_stabilized(q, d, 2)
    assert out.dimension == 2
    assert np.allclose(out.vectors.T @ out.vectors, np.eye(2))
    # remaining span lies inside the original one
    assert np.allclose(q @ (q.T @ out.vectors), out.vectors)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2 ** 31 - 1))
def test_optimize_scales_to_target(n0, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(12, n0)))
    a = rng.normal(size=(12, 12))
    s = a + a.T
    res = optimize_pulse(q, s, GateSpec(1, 2, chi_target=0.3))
    amps = res.pulse
    assert abs(amps @ s @ amps) == pytest.approx(0.3, rel=1e-9)
    assert np.allclose(q @ (q.T @ amps), amps)


def test_step_pulse_reference(chain, gate13, result13):
    res = synthesize_step_pulse(chain, gate13, 11, TWO_PI * 2.396e6, 1434)
    p = res.pulse
    assert p.tau == pytest.approx(1434 * np.pi / (TWO_PI * 2.396e6))
    assert p.parity == "negative"
    assert np.allclose(p.amplitudes, p.amplitudes[::-1], rtol=0, atol=1e-9 * np.max(p.amplitudes))
    assert abs(analysis.chi(p, chain, gate13)) == pytest.approx(np.pi / 8, rel=1e-6)
    assert np.max(np.abs(analysis.alphas(p, chain))) < 1e-9 * p.tau * p.peak()
    ratio = p.peak() / result13.pulse.peak()
    assert 1.0 < ratio < 1.25


def test_step_pulse_odd_count_positive_parity(chain, gate13):
    res = synthesize_step_pulse(chain, gate13, 11, TWO_PI * 2.396e6, 1433)
    assert res.pulse.parity == "positive"
    assert abs(analysis.chi(res.pulse, chain, gate13)) == pytest.approx(np.pi / 8, rel=1e-6)


def test_step_pulse_needs_more_segments_than_modes(chain, gate13):
    with pytest.raises(ValueError):
        synthesize_step_pulse(chain, gate13, 5, TWO_PI * 2.396e6, 1434)


@pytest.mark.slow
def test_eigensolve_cubic_scaling(chain, gate13):
    def run(na):
        basis = PulseBasis(TAU * na / 1000, na)
        cm = build_constraint_matrix(basis, chain, StabilizationSpec(0))
        s = coupling_double_integral(basis, chain, gate13).s
        best = np.inf
        for _ in range(3):
            t0 = time.perf_counter()
            optimize_pulse(null_space(cm), s, gate13, basis)
            best = min(best, time.perf_counter() - t0)
        return best

    ratio = run(1600) / run(800)
    assert 8 * 0.6 <= ratio <= 8 * 1.4, ratio
