"""Verification tools: displacements, entanglement phase, infidelity, drift scans,
analytic power bounds and the two-qubit SK compensation sequence.

``chi`` is computed by nested Gauss-Legendre quadrature straight from ``g(t)``;
it never touches the coupling matrix, so it serves as an independent check of
the synthesis path.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .model import TWO_PI


@dataclass(frozen=True, eq=False)
class DriftScenario:
    """Per-mode frequency offsets in rad/s (scalar = uniform drift)."""

    offsets: object = 0.0

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=float)
        if not np.all(np.isfinite(off)):
            raise ValueError("drift offsets must be finite")
        object.__setattr__(self, "offsets", off)

    @classmethod
    def uniform_hz(cls, delta_f):
        return cls(TWO_PI * float(delta_f))

    def apply(self, mode_freqs):
        return np.asarray(mode_freqs, dtype=float) + np.broadcast_to(self.offsets, np.shape(mode_freqs))


NOMINAL = DriftScenario()


def _freqs(chain, scenario):
    return (scenario or NOMINAL).apply(chain.mode_freqs)


def alpha(pulse, chain, mode_index, scenario=None):
    """Bare displacement ``int_0^tau g(t) e^{i (omega_p + d omega_p) t} dt`` (no Lamb-Dicke factor)."""
    omega = _freqs(chain, scenario)[mode_index]
    return complex(pulse.overlap([omega])[0])


def alphas(pulse, chain, scenario=None):
    return pulse.overlap(_freqs(chain, scenario))


def infidelity_from_alphas(alpha_i, alpha_j):
    """``(4/5) sum_p (|alpha_ip|^2 + |alpha_jp|^2)`` for Lamb-Dicke-scaled displacements."""
    return 0.8 * float(np.sum(np.abs(alpha_i) ** 2) + np.sum(np.abs(alpha_j) ** 2))


def infidelity(pulse, chain, gate, scenario=None):
    """Zero-temperature gate-error estimate from residual displacements.

    Uses ``alpha_ip = eta_p^i * alpha_p``.
    """
    a = alphas(pulse, chain, scenario)
    eta = chain.lamb_dicke
    return infidelity_from_alphas(eta[:, gate.ion_i - 1] * a, eta[:, gate.ion_j - 1] * a)


# --- entanglement phase by nested quadrature ----------------------------------

def _integration_matrix(nodes):
    """Spectral matrix mapping samples at Legendre nodes to ``int_{-1}^{x_i} f``."""
    x, _ = np.polynomial.legendre.leggauss(nodes)
    vander = np.polynomial.legendre.legvander(x, nodes)
    anti = np.empty((nodes, nodes))
    anti[:, 0] = x + 1.0
    for k in range(1, nodes):
        anti[:, k] = (vander[:, k + 1] - vander[:, k - 1]) / (2 * k + 1)
    return anti @ np.linalg.inv(vander[:, :nodes])


def _panels(breakpoints, max_freq, nodes):
    quarter = 0.25 * TWO_PI / max_freq
    edges = []
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        k = max(1, int(np.ceil((b - a) / quarter)))
        edges.append(np.linspace(a, b, k + 1)[:-1])
    edges = np.concatenate(edges + [np.array([breakpoints[-1]])])
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = mid[:, None] + half[:, None] * x[None, :]
    wt = half[:, None] * w[None, :]
    return t, wt, half


def chi(pulse, chain, gate, scenario=None, nodes=16):
    """Entanglement phase ``chi_ij`` by nested composite Gauss-Legendre quadrature."""
    omegas = _freqs(chain, scenario)
    weights = chain.pair_couplings(gate.ion_i, gate.ion_j)
    return _chi_quadrature(pulse, omegas, weights, nodes)


def _chi_quadrature(pulse, omegas, weights, nodes=16):
    breaks = np.asarray(getattr(pulse, "edges", [0.0, pulse.tau]), dtype=float)
    fmax = max(pulse.max_frequency, float(np.max(np.abs(omegas))))
    t, wt, half = _panels(breaks, fmax, nodes)
    g = pulse(t)
    imat = _integration_matrix(nodes)
    total = 0.0
    for omega, c in zip(omegas, weights):
        if c == 0:
            continue
        f = g * np.exp(-1j * omega * t)
        partial = (f @ imat.T) * half[:, None]
        full = np.sum(f * wt, axis=1)
        before = np.concatenate([[0.0], np.cumsum(full)[:-1]])
        inner = before[:, None] + partial
        total += c * np.sum(wt * g * np.exp(1j * omega * t) * inner).imag
    return float(total)


def chi_drift_curve(pulse, chain, gate, drifts_hz, nodes=16):
    """``chi`` under uniform drifts ``omega_p -> omega_p + 2 pi df`` for each ``df``."""
    return np.array([chi(pulse, chain, gate, DriftScenario.uniform_hz(df), nodes) for df in drifts_hz])


def relative_chi_variation(pulse, chain, gate, max_drift_hz=500.0, points=11):
    drifts = np.linspace(0.0, max_drift_hz, points)
    curve = chi_drift_curve(pulse, chain, gate, drifts)
    return float(np.max(np.abs(curve / curve[0] - 1.0)))


# --- drift scans ------------------------------------------------------------

@dataclass
class ScanResult:
    """Infidelity vs uniform drift for several stabilisation orders, plus window widths."""

    delta_f_hz: np.ndarray
    infidelity: dict
    widths: list = field(default_factory=list)

    def width(self, order, epsilon):
        for w in self.widths:
            if w["K"] == order and w["epsilon"] == epsilon:
                return w["width_hz"]
        raise KeyError((order, epsilon))

    def to_csv(self, path):
        lines = ["delta_f_hz,K,infidelity"]
        for k in sorted(self.infidelity):
            for df, val in zip(self.delta_f_hz, self.infidelity[k]):
                lines.append(f"{float(df):.17g},{k},{float(val):.17g}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    def widths_json(self):
        return json.dumps(self.widths, indent=2, sort_keys=True)


def _uniform_infidelity(pulse, chain, gate, delta_f_hz):
    df = np.atleast_1d(np.asarray(delta_f_hz, dtype=float))
    omegas = chain.mode_freqs[None, :] + TWO_PI * df[:, None]
    a = pulse.overlap(omegas.ravel()).reshape(omegas.shape)
    eta = chain.lamb_dicke
    wsum = eta[:, gate.ion_i - 1] ** 2 + eta[:, gate.ion_j - 1] ** 2
    return 0.8 * np.sum(np.abs(a) ** 2 * wsum[None, :], axis=1)


def window_width(pulse, chain, gate, epsilon, grid_hz, tol_hz=1.0):
    """Width of the contiguous drift window around 0 where infidelity stays <= epsilon.

    The window edges are bracketed on ``grid_hz`` and refined by bisection to
    ``tol_hz``.  Returns ``(width, clipped)``; ``clipped`` is True when an edge
    lies beyond the grid and the grid end was used instead.
    """
    grid = np.asarray(grid_hz, dtype=float)
    f = lambda x: float(_uniform_infidelity(pulse, chain, gate, [x])[0]) - epsilon
    if f(0.0) > 0:
        return 0.0, False
    clipped = False
    edges = []
    for sgn, side in ((1.0, np.sort(grid[grid > 0])), (-1.0, np.sort(-grid[grid < 0]))):
        vals = _uniform_infidelity(pulse, chain, gate, sgn * side) - epsilon
        above = np.flatnonzero(vals > 0)
        if above.size == 0:
            clipped = True
            edges.append(side[-1] if side.size else 0.0)
            continue
        hi = side[above[0]]
        lo = side[above[0] - 1] if above[0] > 0 else 0.0
        while hi - lo > tol_hz:
            mid = 0.5 * (lo + hi)
            if f(sgn * mid) > 0:
                hi = mid
            else:
                lo = mid
        edges.append(0.5 * (lo + hi))
    return float(edges[0] + edges[1]), clipped


def drift_scan(pulses, chain, gate, grid_hz, epsilons=(1e-3,), tol_hz=1.0):
    """Infidelity curves for ``pulses = {K: pulse}`` and window widths per ``(K, epsilon)``."""
    grid = np.asarray(grid_hz, dtype=float)
    curves = {k: _uniform_infidelity(p, chain, gate, grid) for k, p in pulses.items()}
    widths = []
    for k, p in sorted(pulses.items()):
        for eps in epsilons:
            w, clipped = window_width(p, chain, gate, eps, grid, tol_hz)
            widths.append({"K": int(k), "epsilon": float(eps), "width_hz": w, "clipped": clipped})
    return ScanResult(grid, curves, widths)


# --- phase-space trajectories ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class PhaseTrajectory:
    times: np.ndarray
    paths: np.ndarray  # (modes, samples) complex, Lamb-Dicke scaled

    def path_length(self, mode):
        return float(np.sum(np.abs(np.diff(self.paths[mode]))))


def phase_trajectory(pulse, chain, ion, samples=2001):
    """``eta_p^i int_0^t g(s) e^{i omega_p s} ds`` on a uniform grid, for every mode."""
    if samples < 2:
        raise ValueError("samples must be >= 2")
    t = np.linspace(0.0, pulse.tau, samples)
    paths = np.array([chain.lamb_dicke[p, ion - 1] * pulse.partial_overlap(w, t)
                      for p, w in enumerate(chain.mode_freqs)])
    return PhaseTrajectory(t, paths)


# --- analytic power bound ---------------------------------------------------------

def beta_factor(chain, gate, tau):
    c = chain.pair_couplings(gate.ion_i, gate.ion_j)
    w = chain.mode_freqs
    first = np.sum(c ** 2)
    dw = (w[:, None] - w[None, :]) * tau
    np.fill_diagonal(dw, np.inf)
    second = np.sum(4.0 * np.abs(np.outer(c, c)) / dw ** 2)
    return float((first + second) ** 0.25)


def power_lower_bound(chain, gate, tau, mu_bounds=None):
    """Lower bound on the peak Rabi frequency ``max Omega / 2 pi`` in Hz.

    Without detuning bounds this is ``1 / (2^{7/4} sqrt(pi) tau beta)``; with
    ``mu_bounds = (mu_min, mu_max)`` in rad/s the sharper form
    ``sqrt(mu_min / (mu_max + 1/tau)) / (2^{5/4} sqrt(pi) tau beta)`` is used.
    Returns ``inf`` when the pair does not couple through any mode.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    b = beta_factor(chain, gate, tau)
    if b == 0:
        return float("inf")
    if mu_bounds is None:
        return 1.0 / (2 ** 1.75 * np.sqrt(np.pi) * tau * b)
    mu_min, mu_max = mu_bounds
    if not 0 < mu_min <= mu_max:
        raise ValueError("need 0 < mu_min <= mu_max")
    return float(np.sqrt(mu_min / (mu_max + 1.0 / tau)) / (2 ** 1.25 * np.sqrt(np.pi) * tau * b))


def peak_frequency_hz(pulse):
    """Numerical peak ``max |g| / 2 pi`` in Hz."""
    return pulse.peak() / TWO_PI


# --- SK broadband compensation ----------------------------------------------------

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_I = np.eye(2, dtype=complex)
_XX = np.kron(_X, _X)


def xx_gate(theta):
    return expm(-0.5j * theta * _XX)


def rz(phi):
    return expm(-0.5j * phi * _Z)


def conjugated_xx(theta, phi):
    """``(1 x Rz(phi)) XX(theta) (1 x Rz(-phi))``."""
    left = np.kron(_I, rz(phi))
    return left @ xx_gate(theta) @ left.conj().T


def sk_compensation(theta):
    """First-order SK-style compensation of an ``XX(theta)`` rotation-angle error.

    Returns a dict with ``phi_sk_rad`` and the gate sequence in time order.
    """
    if abs(theta) > 8 * np.pi:
        raise ValueError("|theta| must not exceed 8 pi")
    phi = float(np.arccos(-theta / (8 * np.pi)))
    return {
        "theta_rad": float(theta),
        "phi_sk_rad": phi,
        # first applied first; each conjugated gate uses Rz on the second qubit
        "sequence": [
            {"gate": "XX", "angle": "theta*(1+eps)", "angle_rad": float(theta), "rz_phase_rad": 0.0},
            {"gate": "XX_phi", "angle": "4*pi*(1+eps)", "angle_rad": 4 * np.pi, "rz_phase_rad": phi},
            {"gate": "XX_phi_bar", "angle": "4*pi*(1+eps)", "angle_rad": 4 * np.pi, "rz_phase_rad": -phi},
        ],
    }


def sk_sequence_unitary(theta, eps, phi=None):
    """Unitary of the compensated sequence with relative angle error ``eps``."""
    if phi is None:
        phi = sk_compensation(theta)["phi_sk_rad"]
    scale = 1.0 + eps
    return (conjugated_xx(4 * np.pi * scale, -phi) @ conjugated_xx(4 * np.pi * scale, phi)
            @ xx_gate(theta * scale))
