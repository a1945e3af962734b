"""scikit-learn style wrappers around the synthesis and demodulation pipelines.

``PulseSynthesizer().fit(chain, pair=(1, 3)).predict(t)`` returns ``g(t)``;
hyper-parameters round-trip through ``get_params`` / ``set_params`` so the
estimators can be cloned and grid-searched like any other sklearn object.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .demod import demodulate, reconstruct, reconstruction_error
from .model import GateSpec, IonChain, PulseBasis, StabilizationSpec
from .synthesis import synthesize


def check_times(t, tau=None):
    """Validate a 1-D array of sample times; optionally require ``0 <= t <= tau``."""
    arr = check_array(np.atleast_1d(np.asarray(t, dtype=float)), ensure_2d=False, dtype=float)
    if arr.ndim != 1:
        raise ValueError("sample times must be one-dimensional")
    if tau is not None and (arr.min() < 0 or arr.max() > tau):
        raise ValueError(f"sample times must lie in [0, {tau}]")
    return arr


def check_chain(chain):
    if not isinstance(chain, IonChain):
        raise TypeError(f"expected an IonChain, got {type(chain).__name__}")
    return chain


def check_pair(pair, chain=None):
    """Return a ``(i, j)`` tuple of distinct 1-based ion numbers within ``chain``."""
    try:
        i, j = (int(v) for v in pair)
    except (TypeError, ValueError):
        raise ValueError("pair must be two integers") from None
    if chain is not None and max(i, j) > chain.num_ions:
        raise ValueError(f"pair {pair} out of range for a {chain.num_ions}-ion chain")
    GateSpec(i, j)
    return i, j


class PulseSynthesizer(BaseEstimator):
    """Power-optimal pulse for one ion pair.

    Parameters
    ----------
    tau : float
        Gate time in seconds.
    basis_size : int
        Number of Fourier-sine functions per parity family.
    parity : {"negative", "positive", "mixed"}
    stab_order : int
        Moment-stabilisation order K.
    chi_projection : int
        Number of chi-sensitive directions removed (L).
    chi_target : float
        Target entanglement phase in radians.
    first_index : int
        Lowest harmonic index of the basis.

    Attributes
    ----------
    result_ : OptimizationResult
    pulse_ : FourierPulse
    """

    def __init__(self, tau=300e-6, basis_size=1000, parity="negative", stab_order=0,
                 chi_projection=0, chi_target=np.pi / 8, first_index=1):
        self.tau = tau
        self.basis_size = basis_size
        self.parity = parity
        self.stab_order = stab_order
        self.chi_projection = chi_projection
        self.chi_target = chi_target
        self.first_index = first_index

    def fit(self, chain, pair=(1, 2)):
        chain = check_chain(chain)
        i, j = check_pair(pair, chain)
        basis = PulseBasis(self.tau, self.basis_size, self.parity, self.first_index)
        stab = StabilizationSpec(self.stab_order, self.chi_projection)
        self.result_ = synthesize(chain, GateSpec(i, j, self.chi_target), basis, stab)
        self.pulse_ = self.result_.pulse
        self.pair_ = (i, j)
        return self

    def predict(self, t):
        check_is_fitted(self, "pulse_")
        return self.pulse_(check_times(t, self.pulse_.tau))

    @property
    def amplitudes_(self):
        check_is_fitted(self, "pulse_")
        return self.pulse_.amplitudes


class Demodulator(TransformerMixin, BaseEstimator):
    """Amplitude/detuning decomposition of a fitted pulse.

    ``fit(pulse)`` finds zeros and segment parameters; ``transform(t)`` samples
    the piecewise-tone reconstruction.
    """

    def __init__(self, convention="i"):
        self.convention = convention

    def fit(self, pulse, y=None):
        if isinstance(pulse, PulseSynthesizer):
            pulse = pulse.pulse_
        self.demodulated_ = demodulate(pulse, self.convention)
        self.error_ = reconstruction_error(pulse, self.demodulated_)
        return self

    def transform(self, t):
        check_is_fitted(self, "demodulated_")
        return reconstruct(self.demodulated_, check_times(t, self.demodulated_.tau))
