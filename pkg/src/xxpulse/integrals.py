"""Decoupling constraint rows, moment rows and the two-qubit coupling matrix.

``k = 0`` rows and the coupling double integrals are evaluated in closed form
(see ``_kernels``); moment rows use composite Gauss-Legendre quadrature.
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import interval_exp, tone_overlap, triangle_exp
from .model import TWO_PI

GL_NODES = 16
FD_STEP = TWO_PI * 0.5  # rad/s, finite-difference step for d/d omega_p


@dataclass(frozen=True, eq=False)
class ConstraintMatrix:
    """Stacked, row-normalised decoupling constraints ``M A = 0``.

    ``row_labels[r] = (mode, moment, tag)`` with tag one of ``h-``, ``h+``, ``cos``, ``sin``.
    """

    rows: np.ndarray
    row_labels: tuple
    basis: object
    order: int

    @property
    def shape(self):
        return self.rows.shape


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    d: np.ndarray
    s: np.ndarray
    pair: tuple


def _trig_rows(freqs, omega, tau):
    vals = tone_overlap(freqs, omega, tau)
    return vals.real, vals.imag


def _parity_combination(cos_row, sin_row, omega, tau, tag):
    half = 0.5 * omega * tau
    if tag == "h-":
        return np.sin(half) * cos_row - np.cos(half) * sin_row
    if tag == "h+":
        return np.cos(half) * cos_row + np.sin(half) * sin_row
    if tag == "cos":
        return cos_row
    if tag == "sin":
        return sin_row
    raise ValueError(f"unknown component {tag!r}")


def _default_component(basis):
    if basis.parity == "negative":
        return "h-"
    if basis.parity == "positive":
        return "h+"
    raise ValueError("mixed-parity bases need an explicit component ('cos' or 'sin')")


def basis_mode_overlap(basis, chain, mode_index, component=None):
    """Row ``M_pn = int_0^tau phi_n(t) h_p(t) dt`` for zero-based ``mode_index``.

    By default ``h_p`` is ``sin[omega_p (tau/2 - t)]`` for negative-parity bases and
    ``cos[omega_p (tau/2 - t)]`` for positive-parity ones, i.e. the only
    non-trivial half of the decoupling condition.  ``component`` may force
    ``"h-"``, ``"h+"``, ``"cos"`` (``cos omega_p t``) or ``"sin"``.
    """
    if component is None:
        component = _default_component(basis)
    omega = float(chain.mode_freqs[mode_index]) if hasattr(chain, "mode_freqs") else float(chain)
    cos_row, sin_row = _trig_rows(basis.frequencies(), omega, basis.tau)
    return _parity_combination(cos_row, sin_row, omega, basis.tau, component)


def quadrature_grid(tau, max_freq, nodes=GL_NODES):
    """Composite Gauss-Legendre nodes/weights on ``[0, tau]``.

    Panels are no wider than a quarter period of ``max_freq`` (rad/s).
    """
    quarter = 0.25 * TWO_PI / max_freq if max_freq > 0 else tau
    panels = max(1, int(np.ceil(tau / quarter)))
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(0.0, tau, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    return t, wt


def _moment_rows(basis, omegas, moments, chunk=2048, legendre=False):
    """Rows ``(2/tau)^k int t^k phi_n(t) {cos,sin}(omega t) dt`` for every (omega, k) pair.

    With ``legendre=True`` the weight ``(2t/tau)^k`` is replaced by the Legendre
    polynomial ``P_k(2t/tau - 1)``; rows up to order K span the same space but
    stay well conditioned at high K.
    Returns an array of shape ``(len(omegas), len(moments), 2, N)``.
    """
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    moments = list(moments)
    tau = basis.tau
    freqs = basis.frequencies()
    fmax = max(float(np.max(freqs)), float(np.max(np.abs(omegas))))
    t, w = quadrature_grid(tau, fmax)
    out = np.zeros((omegas.size, len(moments), 2, freqs.size))
    scaled = 2.0 * t / tau
    for start in range(0, t.size, chunk):
        ts = t[start:start + chunk]
        phi = np.sin(np.multiply.outer(ts, freqs))
        xs = scaled[start:start + chunk]
        if legendre:
            poly = np.polynomial.legendre.legvander(xs - 1.0, max(moments))[:, moments]
        else:
            poly = xs[:, None] ** np.array(moments)[None, :]
        wk = w[start:start + chunk][:, None] * poly
        arg = np.multiply.outer(ts, omegas)
        # weights: node x (omega, k, trig)
        weights = np.stack([np.cos(arg)[:, :, None] * wk[:, None, :],
                            np.sin(arg)[:, :, None] * wk[:, None, :]], axis=3)
        out += np.einsum("qokc,qn->okcn", weights, phi, optimize=True)
    return out


def moment_overlap(basis, chain, mode_index, moment):
    """Cos and sin rows of ``int_0^tau t^k phi_n(t) e^{i omega_p t} dt`` scaled by ``(2/tau)^k``."""
    if moment < 1:
        raise ValueError("moment must be >= 1; use basis_mode_overlap for k = 0")
    omega = float(chain.mode_freqs[mode_index])
    rows = _moment_rows(basis, [omega], [moment])
    return rows[0, 0, 0], rows[0, 0, 1]


def build_constraint_matrix(basis, chain, stab, mode_freqs=None):
    """Stack all decoupling rows up to moment ``stab.order`` and normalise each row.

    Parity-pure bases contribute one ``k = 0`` row per mode (the non-trivial
    combination); mixed bases contribute both ``cos`` and ``sin`` rows.  Moment rows
    ``k >= 1`` always contribute both trig components and use Legendre weights
    ``P_k(2t/tau - 1)`` in place of ``t^k``, which leaves the null space unchanged.
    """
    omegas = chain.mode_freqs if mode_freqs is None else np.asarray(mode_freqs, dtype=float)
    order = int(getattr(stab, "order", stab))
    freqs = basis.frequencies()
    rows, labels = [], []
    tags = ("cos", "sin") if basis.parity == "mixed" else (_default_component(basis),)
    for p, omega in enumerate(omegas):
        cos_row, sin_row = _trig_rows(freqs, omega, basis.tau)
        for tag in tags:
            rows.append(_parity_combination(cos_row, sin_row, omega, basis.tau, tag))
            labels.append((p, 0, tag))
    if order >= 1:
        mom = _moment_rows(basis, omegas, range(1, order + 1), legendre=True)
        for p in range(len(omegas)):
            for k in range(order):
                for c, tag in enumerate(("cos", "sin")):
                    rows.append(mom[p, k, c])
                    labels.append((p, k + 1, tag))
    m = np.array(rows)
    norms = np.linalg.norm(m, axis=1)
    keep = norms > 1e-14 * max(np.max(norms), np.finfo(float).tiny)
    m = m[keep] / norms[keep][:, None]
    labels = tuple(lab for lab, k in zip(labels, keep) if k)
    if basis.num_functions <= m.shape[0]:
        raise ValueError(
            f"basis too small: {basis.num_functions} functions for {m.shape[0]} constraint rows")
    return ConstraintMatrix(m, labels, basis, order)


def _tone_pair_sums(freqs, tau):
    epp = interval_exp(freqs[:, None] + freqs[None, :], tau)
    epm = interval_exp(freqs[:, None] - freqs[None, :], tau)
    return {(1, 1): epp, (1, -1): epm, (-1, 1): np.conj(epm), (-1, -1): np.conj(epp)}


def _single_mode_d(freqs, omega, tau, sums):
    acc = np.zeros((freqs.size, freqs.size), dtype=complex)
    for (s1, s2), e_sum in sums.items():
        acc += s1 * s2 * triangle_exp(s1 * freqs + omega, s2 * freqs - omega, tau, sum_integral=e_sum)
    return (-0.25 * acc).imag


def coupling_d_matrix(basis, mode_freqs, weights):
    """``D = sum_p w_p D^(p)`` for arbitrary mode frequencies and pair weights."""
    freqs = basis.frequencies()
    sums = _tone_pair_sums(freqs, basis.tau)
    d = np.zeros((freqs.size, freqs.size))
    for omega, wgt in zip(np.atleast_1d(mode_freqs), np.atleast_1d(weights)):
        if wgt != 0:
            d += wgt * _single_mode_d(freqs, float(omega), basis.tau, sums)
    return d


def coupling_double_integral(basis, chain, gate, mode_freqs=None):
    """Coupling matrix ``D_nm`` (and its symmetric part ``S``) for the gate's ion pair.

    ``chi = A^T S A`` for any amplitude vector ``A`` in ``basis``.
    """
    weights = chain.pair_couplings(gate.ion_i, gate.ion_j)
    omegas = chain.mode_freqs if mode_freqs is None else mode_freqs
    d = coupling_d_matrix(basis, omegas, weights)
    return CouplingMatrix(d, 0.5 * (d + d.T), (gate.ion_i, gate.ion_j))


def coupling_derivative(basis, chain, gate, mode_index, order=1, step=FD_STEP):
    """``d^k S / d omega_p^k`` by central differences with one Richardson step."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    weight = chain.pair_couplings(gate.ion_i, gate.ion_j)[mode_index]
    n = basis.num_functions
    if weight == 0:
        return np.zeros((n, n))
    freqs = basis.frequencies()
    sums = _tone_pair_sums(freqs, basis.tau)
    omega = float(chain.mode_freqs[mode_index])

    def s_at(w):
        d = _single_mode_d(freqs, w, basis.tau, sums)
        return 0.5 * (d + d.T)

    centre = s_at(omega) if order == 2 else None

    def diff(h):
        if order == 1:
            return (s_at(omega + h) - s_at(omega - h)) / (2 * h)
        return (s_at(omega + h) - 2 * centre + s_at(omega - h)) / h ** 2

    coarse, fine = diff(step), diff(0.5 * step)
    out = weight * (4.0 * fine - coarse) / 3.0
    return 0.5 * (out + out.T)


# --- fixed-detuning step pulses -----------------------------------------------

def segment_overlaps(num_segments, mu0, tau, omega):
    """``int_{t_{j-1}}^{t_j} sin(mu0 t) e^{i omega t} dt`` for every segment ``j``."""
    edges = np.linspace(0.0, tau, num_segments + 1)
    dt = tau / num_segments
    return np.exp(1j * omega * edges[:-1]) * tone_overlap(mu0, omega, dt, phase=mu0 * edges[:-1])


def step_constraint_rows(num_segments, mu0, tau, omega, component):
    vals = segment_overlaps(num_segments, mu0, tau, omega)
    return _parity_combination(vals.real, vals.imag, omega, tau, component)


def step_coupling_d(num_segments, mu0, tau, mode_freqs, weights):
    """``D_jk`` for segment functions ``sin(mu0 t) 1[t_{j-1}, t_j)``."""
    edges = np.linspace(0.0, tau, num_segments + 1)
    dt = tau / num_segments
    theta = mu0 * edges[:-1]
    d = np.zeros((num_segments, num_segments))
    one = np.array([mu0])
    lower = np.tril(np.ones((num_segments, num_segments), dtype=bool), -1)
    for omega, wgt in zip(mode_freqs, weights):
        if wgt == 0:
            continue
        later = segment_overlaps(num_segments, mu0, tau, omega)
        earlier = segment_overlaps(num_segments, mu0, tau, -omega)
        cross = np.outer(later, earlier).imag
        diag = np.zeros(num_segments, dtype=complex)
        for s1 in (1, -1):
            for s2 in (1, -1):
                tri = triangle_exp(s1 * one + omega, s2 * one - omega, dt)[0, 0]
                diag += s1 * s2 * np.exp(1j * (s1 + s2) * theta) * tri
        d += wgt * (np.where(lower, cross, 0.0) + np.diag((-0.25 * diag).imag))
    return d
