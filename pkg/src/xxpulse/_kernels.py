"""Closed-form oscillatory integrals shared by the pulse and matrix builders.

Every basis function used in this package is a windowed tone ``sin(nu*t + phase)``,
so all decoupling and coupling integrals reduce to a handful of exponential
integrals over an interval ``[0, L]``.  These are written with ``sinc`` so that
resonant arguments (``x -> 0``) need no special branch.
"""

import numpy as np

# |b*L| below this uses the power series of the triangle integral
_SERIES_THRESHOLD = 0.5
_SERIES_TERMS = 20


def interval_exp(x, length):
    """Return ``int_0^L exp(i x t) dt`` elementwise (broadcasting ``x`` and ``length``)."""
    x = np.asarray(x, dtype=float)
    length = np.asarray(length, dtype=float)
    half = 0.5 * x * length
    return length * np.exp(1j * half) * np.sinc(half / np.pi)


def tone_overlap(nu, omega, length, phase=0.0):
    """``int_0^L sin(nu t + phase) exp(i omega t) dt``, broadcasting ``nu`` against ``omega``."""
    nu = np.asarray(nu, dtype=float)
    omega = np.asarray(omega, dtype=float)
    return (np.exp(1j * phase) * interval_exp(omega + nu, length)
            - np.exp(-1j * phase) * interval_exp(omega - nu, length)) / 2j


def gauss_legendre_unit(n):
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def power_moments(y, kmax):
    """Return ``m[k, ...] = int_0^1 s^k exp(i y s) ds`` for ``k = 0..kmax``.

    Small ``|y|`` uses Gauss-Legendre (the integrand is a low-degree polynomial
    times a slow exponential); large ``|y|`` uses the upward recurrence
    ``m_k = (e^{iy} - k m_{k-1}) / (iy)``, which is stable once ``|y| > 2 kmax``.
    """
    y = np.asarray(y, dtype=float)
    flat = y.ravel()
    out = np.empty((kmax + 1, flat.size), dtype=complex)
    y0 = max(2.0 * kmax, 8.0)
    small = np.abs(flat) <= y0
    if np.any(small):
        s, w = gauss_legendre_unit(int(kmax + y0) + 24)
        ys = flat[small]
        phase = np.exp(1j * np.outer(s, ys)) * w[:, None]
        powers = s[None, :] ** np.arange(kmax + 1)[:, None]
        out[:, small] = powers @ phase
    if np.any(~small):
        yl = flat[~small]
        eiy = np.exp(1j * yl)
        m = (eiy - 1.0) / (1j * yl)
        out[0, ~small] = m
        for k in range(1, kmax + 1):
            m = (eiy - k * m) / (1j * yl)
            out[k, ~small] = m
    return out.reshape((kmax + 1,) + y.shape)


def triangle_exp(a, b, length, sum_integral=None):
    """Return ``T(a, b) = int_0^L dt e^{iat} int_0^t e^{ibs} ds`` on the outer grid ``a[:, None], b[None, :]``.

    ``sum_integral`` may carry a precomputed ``interval_exp(a[:, None] + b[None, :], L)``;
    the coupling-matrix builder shares it across modes because ``a + b`` does not
    depend on the mode frequency.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if sum_integral is None:
        sum_integral = interval_exp(a[:, None] + b[None, :], length)
    ea = interval_exp(a, length)
    bl = b * length
    near = np.abs(bl) < _SERIES_THRESHOLD
    safe_b = np.where(near, 1.0, b)
    out = (sum_integral - ea[:, None]) / (1j * safe_b[None, :])
    if np.any(near):
        # T = sum_k (ib)^k / (k+1)! * L^{k+2} * m_{k+1}(aL)
        mom = power_moments(a * length, _SERIES_TERMS + 1)
        cols = np.flatnonzero(near)
        coef = np.empty((_SERIES_TERMS + 1, cols.size), dtype=complex)
        fact = 1.0
        for k in range(_SERIES_TERMS + 1):
            fact *= (k + 1)
            coef[k] = (1j * bl[cols]) ** k / fact
        out[:, cols] = length ** 2 * (mom[1:].T @ coef)
    return out
