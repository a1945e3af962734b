"""Demodulation of a pulse ``g(t)`` into an amplitude ``Omega(t)`` and a piecewise
constant detuning ``mu(t)`` built from the zeros of ``g``.

Between consecutive zeros ``zeta_{j-1} < zeta_j`` the pulse is replaced by one
half-period of a tone, ``Omega_j sin[psi_{j-1} + mu_j (t - zeta_{j-1})]`` with
``mu_j = pi / (zeta_j - zeta_{j-1})`` and ``psi_j = j pi``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import TWO_PI

SAMPLES_PER_PERIOD = 32
CONVENTIONS = ("i", "ii", "iii")


class DegenerateZeroError(ValueError):
    """``g`` touches zero without changing sign (a tangential zero)."""


@dataclass(frozen=True, eq=False)
class DemodulatedPulse:
    """Zeros, per-segment detunings and per-zero amplitudes of a demodulated pulse.

    Attributes
    ----------
    zeros : ndarray
        ``zeta_0 = 0 < ... < zeta_{N_z - 1} = tau``.
    detunings : ndarray
        ``mu_j`` for the segments ``j = 1 .. N_z - 1`` (rad/s).
    amplitudes : ndarray
        ``Omega(zeta_j)`` for ``j = 0 .. N_z - 1`` in the right-side-up orientation (rad/s).
    phases : ndarray
        ``psi_j = j pi``.
    sign : float
        Orientation flag ``sigma``.
    convention : str
        Which detuning is paired with each zero: ``"i"`` left segment,
        ``"ii"`` right segment, ``"iii"`` their mean.
    """

    zeros: np.ndarray
    detunings: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray
    sign: float
    convention: str = "i"

    @property
    def num_zeros(self):
        return self.zeros.size

    @property
    def tau(self):
        return float(self.zeros[-1])

    def segment_amplitudes(self):
        """``Omega_j`` for each segment, in the sign convention used by ``reconstruct``."""
        return self.sign * self.amplitudes[1:]

    def to_csv(self, path):
        rows = ["t_start_us,t_end_us,omega_over_2pi_mhz,mu_over_2pi_mhz,psi_start_rad"]
        omega = self.amplitudes[1:]
        for j in range(self.detunings.size):
            rows.append(",".join(format(float(v), ".17g") for v in (
                self.zeros[j] * 1e6, self.zeros[j + 1] * 1e6, omega[j] / TWO_PI / 1e6,
                self.detunings[j] / TWO_PI / 1e6, self.phases[j])))
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")


def find_zeros(pulse, samples_per_period=SAMPLES_PER_PERIOD, xtol_rel=1e-13, degenerate_rtol=1e-9):
    """All sign changes of ``pulse`` on ``[0, tau]``, with the endpoints included.

    The pulse is sampled at ``samples_per_period`` points per period of its
    fastest tone; each bracketed crossing is refined with Brent's method to
    ``xtol_rel * tau``.  A local minimum of ``|g|`` below ``degenerate_rtol``
    times the peak that is not a crossing raises ``DegenerateZeroError``.
    """
    tau = pulse.tau
    fmax = max(pulse.max_frequency, TWO_PI / tau)
    count = int(np.ceil(tau * fmax / TWO_PI * samples_per_period)) + 1
    t = np.linspace(0.0, tau, count)
    g = pulse(t)
    peak = np.max(np.abs(g))
    if peak == 0:
        raise ValueError("pulse is identically zero")
    inner_t, inner_g = t[1:-1], g[1:-1]
    roots = list(inner_t[inner_g == 0.0])
    sgn = np.sign(inner_g)
    nz = np.flatnonzero(sgn != 0)
    flips = nz[:-1][sgn[nz[:-1]] * sgn[nz[1:]] < 0]
    nxt = nz[1:][sgn[nz[:-1]] * sgn[nz[1:]] < 0]
    f = lambda x: float(pulse(np.array([x]))[0])
    for a, b in zip(flips, nxt):
        roots.append(brentq(f, inner_t[a], inner_t[b], xtol=xtol_rel * tau, rtol=4 * np.finfo(float).eps))
    _check_tangential(t, g, peak, degenerate_rtol)
    roots = np.array(sorted(r for r in roots if xtol_rel * tau < r < tau * (1 - xtol_rel)))
    return np.concatenate([[0.0], roots, [tau]])


def _check_tangential(t, g, peak, rtol):
    # parabola through each sampled local minimum of |g| that is not a crossing
    mag = np.abs(g)
    k = np.flatnonzero((mag[1:-1] <= mag[:-2]) & (mag[1:-1] <= mag[2:])) + 1
    same = np.sign(g[k - 1]) == np.sign(g[k + 1])
    touch = k[same & (g[k] == 0)]
    if touch.size:
        raise DegenerateZeroError(f"tangential zero at t = {t[touch[0]]:.6g} s")
    k = k[same & (np.sign(g[k]) == np.sign(g[k + 1]))]
    if k.size == 0:
        return
    y0, y1, y2 = g[k - 1], g[k], g[k + 1]
    curv = y0 - 2 * y1 + y2
    safe = np.where(curv == 0, 1.0, curv)
    offset = np.where(curv == 0, 0.0, 0.5 * (y0 - y2) / safe)
    vertex = y1 - 0.25 * (y0 - y2) * offset
    bad = (np.abs(offset) <= 1) & (np.abs(vertex) < rtol * peak)
    if np.any(bad):
        raise DegenerateZeroError(f"tangential zero near t = {t[k[bad][0]]:.6g} s")


def _zero_detunings(mu, convention):
    left = np.concatenate([[mu[0]], mu])
    right = np.concatenate([mu, [mu[-1]]])
    if convention == "i":
        return left
    if convention == "ii":
        return right
    if convention == "iii":
        return 0.5 * (left + right)
    raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


def demodulate(pulse, convention="i", zeros=None):
    """Split ``pulse`` into zeros, detunings and right-side-up amplitudes.

    ``Omega(zeta_j) = (-1)^j sigma g'(zeta_j) / mu(zeta_j)`` with
    ``sigma = -sign g'(zeta_1)``.
    """
    z = find_zeros(pulse) if zeros is None else np.asarray(zeros, dtype=float)
    if z.size < 2 or np.any(np.diff(z) <= 0):
        raise ValueError("zeros must be strictly increasing with at least two entries")
    mu = np.pi / np.diff(z)
    slope = pulse.derivative(z)
    j = np.arange(z.size)
    ref = slope[1] if z.size > 2 else slope[0]
    if ref == 0:
        raise DegenerateZeroError("zero derivative at the first zero")
    sigma = -float(np.sign(ref))
    mu_at = _zero_detunings(mu, convention)
    omega = (-1.0) ** j * sigma * slope / mu_at
    return DemodulatedPulse(z, mu, omega, np.pi * j.astype(float), sigma, convention)


def reconstruct(dem, t):
    """Piecewise-tone approximation ``g~(t)`` sampled at ``t``."""
    t = np.asarray(t, dtype=float)
    z = dem.zeros
    seg = np.clip(np.searchsorted(z, t, side="right") - 1, 0, dem.detunings.size - 1)
    amp = dem.segment_amplitudes()
    # sin(j pi + x) = (-1)^j sin(x); written this way g~ vanishes exactly at every zero
    parity = np.where(seg % 2 == 0, 1.0, -1.0)
    out = amp[seg] * parity * np.sin(dem.detunings[seg] * (t - z[seg]))
    hit = np.minimum(np.searchsorted(z, t), z.size - 1)
    return np.where(z[hit] == t, 0.0, out)


def _segment_quadrature(zeros, nodes=24):
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * np.diff(zeros)
    mid = 0.5 * (zeros[1:] + zeros[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def reconstruction_error(pulse, dem, relative=True):
    """``(1/tau) int (g - g~)^2 dt``, divided by ``(1/tau) int g^2 dt`` when ``relative``."""
    t, w = _segment_quadrature(dem.zeros)
    g = pulse(t)
    err = float(np.sum(w * (g - reconstruct(dem, t)) ** 2)) / dem.tau
    if not relative:
        return err
    return err / (float(np.sum(w * g ** 2)) / dem.tau)


class SampledPulse:
    """Minimal pulse wrapper around ``reconstruct`` so analysis tools accept a demodulated pulse.

    ``overlap`` integrates each tone segment in closed form.
    """

    def __init__(self, dem):
        self.dem = dem
        self.tau = dem.tau
        self.max_frequency = float(np.max(dem.detunings))
        self.edges = dem.zeros

    def __call__(self, t):
        return reconstruct(self.dem, t)

    def overlap(self, omegas):
        from ._kernels import tone_overlap

        z = self.dem.zeros
        amp = self.dem.segment_amplitudes()
        mu = self.dem.detunings
        width = np.diff(z)
        out = []
        for w in np.atleast_1d(omegas):
            seg = np.exp(1j * w * z[:-1]) * tone_overlap(mu, w, width, phase=self.dem.phases[:-1])
            out.append(np.sum(amp * seg))
        return np.array(out)
