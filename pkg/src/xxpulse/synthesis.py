"""Power-optimal pulse synthesis.

Pipeline: constraint rows -> null space of ``Gamma = M^T M`` -> coupling matrix
reduced to the null space -> eigenvector of largest ``|lambda|`` scaled to the
target entanglement.  Optional projection removes the null-space directions to
which the entanglement phase is most sensitive under mode drift.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .integrals import (build_constraint_matrix, coupling_derivative,
                        coupling_double_integral, step_constraint_rows, step_coupling_d)
from .model import FourierPulse, StepPulse

logger = logging.getLogger(__name__)

MIN_EIGEN_GAP = 100.0
TIE_RTOL = 1e-12


class NullSpaceError(RuntimeError):
    """The constraint spectrum has no clear gap between null and range space."""


class EntanglementError(RuntimeError):
    """The coupling matrix vanishes on the null space: the pair cannot be entangled."""


@dataclass(frozen=True, eq=False)
class NullSpaceBasis:
    vectors: np.ndarray
    eigen_gap: float
    gamma_spectrum: np.ndarray = None

    @property
    def dimension(self):
        return self.vectors.shape[1]


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    pulse: object
    lambda_max: float
    v_scale: float
    reduced_spectrum: np.ndarray
    norm_gamma: float
    chi: float
    null_dimension: int
    residual: float = float("nan")

    @property
    def amplitudes(self):
        return self.pulse.amplitudes


def null_space(cm, rel_threshold=1e-10):
    """Orthonormal null space of the constraint rows via ``eigh(M^T M)``.

    ``cm`` is a ``ConstraintMatrix`` or a plain 2-D array.  Eigenvectors with
    eigenvalue below ``rel_threshold * max`` span the null space; the ratio of
    the smallest kept range eigenvalue to the largest null eigenvalue must
    exceed ``MIN_EIGEN_GAP``.
    """
    m = np.asarray(getattr(cm, "rows", cm), dtype=float)
    n = m.shape[1]
    if m.shape[0] == 0 or not np.any(m):
        return NullSpaceBasis(np.eye(n), np.inf, np.zeros(n))
    gamma = m.T @ m
    evals, evecs = np.linalg.eigh(gamma)
    cutoff = rel_threshold * evals[-1]
    null = evals < cutoff
    n0 = int(np.count_nonzero(null))
    if n0 == 0:
        raise NullSpaceError("constraints leave no null space")
    largest_null = abs(evals[n0 - 1])
    gap = np.inf if n0 == n or largest_null == 0 else evals[n0] / largest_null
    if gap < MIN_EIGEN_GAP:
        raise NullSpaceError(
            f"no spectral gap at the null-space edge (gap={gap:.3g}); constraints ill-conditioned")
    logger.debug("null space: N0=%d, rank=%d, gap=%.3g", n0, n - n0, gap)
    return NullSpaceBasis(evecs[:, :n0], float(gap), evals)


def _fix_sign(vec):
    scale = np.max(np.abs(vec))
    if scale == 0:
        return vec
    first = np.flatnonzero(np.abs(vec) > 1e-6 * scale)[0]
    return vec if vec[first] > 0 else -vec


def optimize_pulse(ns, coupling, gate, basis=None):
    """Minimum-norm null-space vector reaching ``|A^T S A| = |chi_target|``.

    Returns an ``OptimizationResult`` whose ``pulse.amplitudes`` are in the
    original basis.  ``basis`` defaults to the one attached to ``coupling``'s
    caller; pass it explicitly when working with bare matrices.  The sign of the
    achieved entanglement follows the selected eigenvalue and is reported in
    ``chi``.
    """
    vectors = ns.vectors if hasattr(ns, "vectors") else np.asarray(ns)
    s = coupling.s if hasattr(coupling, "s") else np.asarray(coupling)
    if vectors.shape[1] < 1:
        raise ValueError("empty null space")
    reduced = vectors.T @ s @ vectors
    reduced = 0.5 * (reduced + reduced.T)
    lam, vecs = np.linalg.eigh(reduced)
    mags = np.abs(lam)
    if mags.max() < 1e-30:
        raise EntanglementError("coupling vanishes on the null space")
    # ties: smallest index after a stable sort by decreasing |lambda|
    order = np.argsort(-mags, kind="stable")
    kmax = order[0]
    ties = order[mags[order] >= mags[kmax] * (1 - TIE_RTOL)]
    kmax = int(min(ties))
    lam_max = float(lam[kmax])
    target = abs(gate.chi_target) if hasattr(gate, "chi_target") else abs(float(gate))
    v = np.sqrt(target / abs(lam_max))
    amps = _fix_sign(v * (vectors @ vecs[:, kmax]))
    chi = float(amps @ s @ amps)
    pulse = FourierPulse(basis, amps) if basis is not None else amps
    return OptimizationResult(pulse, lam_max, float(v), lam, float(np.linalg.norm(amps)), chi,
                              vectors.shape[1])


def project_chi_stabilized(ns, derivatives, count):
    """Remove the ``count`` directions with the largest ``|eigenvalue|`` of the reduced
    first-derivative coupling matrices (ranked jointly over all modes)."""
    vectors = ns.vectors if hasattr(ns, "vectors") else np.asarray(ns)
    n0 = vectors.shape[1]
    if count >= n0:
        raise ValueError(f"cannot project {count} directions out of a {n0}-dimensional null space")
    if count == 0:
        return ns
    cand_vals, cand_vecs = [], []
    for sp in derivatives:
        rp = vectors.T @ sp @ vectors
        lam, u = np.linalg.eigh(0.5 * (rp + rp.T))
        top = np.argsort(-np.abs(lam), kind="stable")[:count]
        cand_vals.append(np.abs(lam[top]))
        cand_vecs.append(u[:, top])
    vals = np.concatenate(cand_vals)
    vecs = np.concatenate(cand_vecs, axis=1)
    ranking = np.argsort(-vals, kind="stable")
    # greedy Gram-Schmidt; skip candidates already (numerically) in the removed span
    removed = np.zeros((n0, 0))
    for idx in ranking:
        c = vecs[:, idx] - removed @ (removed.T @ vecs[:, idx])
        c = c - removed @ (removed.T @ c)
        nrm = np.linalg.norm(c)
        if nrm > 1e-6:
            removed = np.column_stack([removed, c / nrm])
        if removed.shape[1] == count:
            break
    if removed.shape[1] < count:
        raise ValueError("not enough independent sensitive directions to project")
    # complement of the removed span inside the null space
    q, _ = np.linalg.qr(removed, mode="complete")
    complement = q[:, count:]
    new = vectors @ complement
    new, _ = np.linalg.qr(new)
    return NullSpaceBasis(new, getattr(ns, "eigen_gap", np.inf))


def synthesize(chain, gate, basis, stab=None, rel_threshold=1e-10):
    """Full pipeline for a Fourier basis; returns an ``OptimizationResult``."""
    from .model import StabilizationSpec

    stab = StabilizationSpec() if stab is None else stab
    gate.check_chain(chain)
    basis.check_stabilization(chain.num_modes, stab.order)
    cm = build_constraint_matrix(basis, chain, stab)
    ns = null_space(cm, rel_threshold)
    logger.info("rows=%d N0=%d (nominal rank P(K+1)=%d, observed %d)", cm.rows.shape[0],
                ns.dimension, chain.num_modes * (stab.order + 1),
                basis.num_functions - ns.dimension)
    coupling = coupling_double_integral(basis, chain, gate)
    if stab.chi_projection_count:
        derivs = [coupling_derivative(basis, chain, gate, p, 1) for p in range(chain.num_modes)]
        ns = project_chi_stabilized(ns, derivs, stab.chi_projection_count)
    res = optimize_pulse(ns, coupling, gate, basis)
    resid = float(np.max(np.abs(cm.rows @ res.pulse.amplitudes)))
    return OptimizationResult(res.pulse, res.lambda_max, res.v_scale, res.reduced_spectrum,
                              res.norm_gamma, res.chi, res.null_dimension, resid)


def _symmetric_segment_basis(num_segments):
    half = (num_segments + 1) // 2
    u = np.zeros((num_segments, half))
    for r in range(half):
        mirror = num_segments - 1 - r
        if mirror == r:
            u[r, r] = 1.0
        else:
            u[r, r] = u[mirror, r] = np.sqrt(0.5)
    return u


def synthesize_step_pulse(chain, gate, num_segments, mu0, half_period_count, rel_threshold=1e-10):
    """Power-optimal symmetric step pulse at fixed detuning ``mu0`` (rad/s).

    The gate time is ``tau = half_period_count * pi / mu0``; even counts give
    negative-parity pulses, odd counts positive parity.  Segment amplitudes are
    constrained to be mirror-symmetric about ``tau/2``.
    """
    if num_segments <= chain.num_modes:
        raise ValueError(f"num_segments={num_segments} must exceed the number of modes "
                         f"({chain.num_modes})")
    if int(half_period_count) != half_period_count or half_period_count < 1:
        raise ValueError("half_period_count must be a positive integer")
    gate.check_chain(chain)
    tau = np.pi * half_period_count / mu0
    component = "h-" if half_period_count % 2 == 0 else "h+"
    rows = np.array([step_constraint_rows(num_segments, mu0, tau, w, component)
                     for w in chain.mode_freqs])
    sym = _symmetric_segment_basis(num_segments)
    reduced_rows = rows @ sym
    if reduced_rows.shape[1] <= reduced_rows.shape[0]:
        raise ValueError(f"{num_segments} symmetric segments give {reduced_rows.shape[1]} unknowns "
                         f"for {reduced_rows.shape[0]} constraints")
    reduced_rows /= np.linalg.norm(reduced_rows, axis=1, keepdims=True)
    ns = null_space(reduced_rows, rel_threshold)
    d = step_coupling_d(num_segments, mu0, tau, chain.mode_freqs,
                        chain.pair_couplings(gate.ion_i, gate.ion_j))
    s = sym.T @ (0.5 * (d + d.T)) @ sym
    res = optimize_pulse(ns, s, gate)
    amps = _fix_sign(sym @ res.pulse)
    pulse = StepPulse(num_segments, mu0, int(half_period_count), amps)
    resid = float(np.max(np.abs(rows @ amps)))
    return OptimizationResult(pulse, res.lambda_max, res.v_scale, res.reduced_spectrum,
                              res.norm_gamma, res.chi, res.null_dimension, resid)
