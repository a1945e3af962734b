"""Domain types, chain-config I/O and a synthetic ion-chain generator.

Internal units are rad/s and seconds throughout.  Chain files carry mode
frequencies in MHz (cycles), converted on load.
"""

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * np.pi
MHZ_TO_RAD_S = TWO_PI * 1e6

PARITIES = ("negative", "positive", "mixed")

DEFAULT_LAMB_DICKE_PREFACTOR = 0.15


class ChainValidationError(ValueError):
    """Invalid chain data; ``field`` names the offending entry (e.g. ``lamb_dicke``)."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ConvergenceError(RuntimeError):
    pass


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _snap_to_file_lattice(omega):
    # rad/s values that survive a MHz round trip bit-exactly (changes at most 1 ulp)
    return (omega / MHZ_TO_RAD_S) * MHZ_TO_RAD_S


@dataclass(frozen=True, eq=False)
class IonChain:
    """Mode frequencies ``mode_freqs`` (rad/s, increasing) and the P x N Lamb-Dicke matrix.

    ``lamb_dicke[p, i]`` couples ion ``i`` to mode ``p`` (both zero-based here;
    public APIs that take ion numbers use the 1-based convention of gate specs).
    """

    mode_freqs: np.ndarray
    lamb_dicke: np.ndarray
    label: str = ""

    def __post_init__(self):
        freqs = np.array(self.mode_freqs, dtype=float)
        if freqs.ndim != 1:
            raise ChainValidationError("mode_freqs", "must be a flat list")
        if freqs.size == 0:
            raise ChainValidationError("mode_freqs", "chain needs at least one mode")
        if not np.all(np.isfinite(freqs)) or np.any(freqs <= 0):
            raise ChainValidationError("mode_freqs", "frequencies must be finite and positive")
        if np.any(np.diff(freqs) <= 0):
            raise ChainValidationError("mode_freqs", "frequencies must be strictly increasing")
        eta = np.array(self.lamb_dicke, dtype=float)
        if eta.ndim != 2 or eta.shape[0] != freqs.size:
            raise ChainValidationError(
                "lamb_dicke", f"expected {freqs.size} rows (one per mode), got shape {eta.shape}")
        if eta.shape[1] == 0:
            raise ChainValidationError("lamb_dicke", "chain needs at least one ion")
        if eta.shape[1] < eta.shape[0]:
            raise ChainValidationError(
                "lamb_dicke", f"{eta.shape[1]} columns (ions) for {eta.shape[0]} modes; need P <= N")
        if not np.all(np.isfinite(eta)) or np.any(np.abs(eta) >= 1):
            raise ChainValidationError("lamb_dicke", "entries must be finite with |eta| < 1")
        object.__setattr__(self, "mode_freqs", _frozen(_snap_to_file_lattice(freqs)))
        object.__setattr__(self, "lamb_dicke", _frozen(eta))

    @property
    def num_modes(self):
        return self.lamb_dicke.shape[0]

    @property
    def num_ions(self):
        return self.lamb_dicke.shape[1]

    def pair_couplings(self, ion_i, ion_j):
        """Products ``eta_p^i * eta_p^j`` for 1-based ion numbers."""
        return self.lamb_dicke[:, ion_i - 1] * self.lamb_dicke[:, ion_j - 1]

    def with_mode_freqs(self, mode_freqs):
        return IonChain(mode_freqs, self.lamb_dicke, self.label)

    def __eq__(self, other):
        if not isinstance(other, IonChain):
            return NotImplemented
        return (self.label == other.label
                and np.array_equal(self.mode_freqs, other.mode_freqs)
                and np.array_equal(self.lamb_dicke, other.lamb_dicke))

    __hash__ = None

    def to_dict(self):
        return {
            "mode_freqs_mhz": [float(f) for f in self.mode_freqs / MHZ_TO_RAD_S],
            "lamb_dicke": [[float(x) for x in row] for row in self.lamb_dicke],
            "label": self.label,
        }


@dataclass(frozen=True)
class GateSpec:
    """Target XX interaction between 1-based ions ``ion_i`` and ``ion_j``."""

    ion_i: int
    ion_j: int
    chi_target: float = np.pi / 8

    def __post_init__(self):
        if int(self.ion_i) < 1 or int(self.ion_j) < 1:
            raise ValueError("ion indices are 1-based")
        if self.ion_i == self.ion_j:
            raise ValueError("ion_i and ion_j must differ")
        if not 0 < abs(self.chi_target) <= np.pi / 4:
            raise ValueError("chi_target must satisfy 0 < |chi| <= pi/4")

    def check_chain(self, chain):
        if max(self.ion_i, self.ion_j) > chain.num_ions:
            raise ValueError(f"ion index out of range for a {chain.num_ions}-ion chain")


@dataclass(frozen=True)
class PulseBasis:
    """Sine basis on ``[0, tau]``.

    negative: ``sin(2 pi n t / tau)``; positive: ``sin(2 pi (n - 1/2) t / tau)``;
    mixed: both families stacked (``2 * basis_size`` functions, negative first).
    ``first_index`` shifts the band to ``n = first_index .. first_index + basis_size - 1``.
    """

    tau: float
    basis_size: int
    parity: str = "negative"
    first_index: int = 1

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if int(self.basis_size) < 1:
            raise ValueError("basis_size must be >= 1")
        if self.parity not in PARITIES:
            raise ValueError(f"parity must be one of {PARITIES}")
        if int(self.first_index) < 1:
            raise ValueError("first_index must be >= 1")

    @property
    def num_functions(self):
        return 2 * self.basis_size if self.parity == "mixed" else self.basis_size

    def harmonic_numbers(self):
        n = np.arange(self.first_index, self.first_index + self.basis_size, dtype=float)
        if self.parity == "negative":
            return n
        if self.parity == "positive":
            return n - 0.5
        return np.concatenate([n, n - 0.5])

    def frequencies(self):
        """Angular frequencies of the basis tones (rad/s)."""
        return TWO_PI * self.harmonic_numbers() / self.tau

    def function_parities(self):
        """+1 / -1 symmetry of each basis function about ``tau/2``."""
        m = self.harmonic_numbers()
        return np.where(m == np.round(m), -1, 1)

    def evaluate(self, t):
        """Matrix ``phi[k, n] = phi_n(t_k)``."""
        t = np.asarray(t, dtype=float)
        return np.sin(np.multiply.outer(t, self.frequencies()))

    def check_stabilization(self, num_modes, order):
        if self.basis_size <= num_modes * (order + 1):
            raise ValueError(
                f"basis_size={self.basis_size} must exceed num_modes*(K+1)={num_modes * (order + 1)}")


@dataclass(frozen=True)
class StabilizationSpec:
    """Moment order ``order`` (K) and number of chi-sensitive directions to project (L)."""

    order: int = 0
    chi_projection_count: int = 0

    def __post_init__(self):
        if int(self.order) < 0:
            raise ValueError("order must be >= 0")
        if int(self.chi_projection_count) < 0:
            raise ValueError("chi_projection_count must be >= 0")


def _chunked_sine_sum(t, freqs, coefs, phase_deriv=False, chunk=4096):
    t = np.asarray(t, dtype=float)
    flat = t.ravel()
    out = np.empty(flat.size)
    for start in range(0, flat.size, chunk):
        block = np.multiply.outer(flat[start:start + chunk], freqs)
        out[start:start + chunk] = (np.cos(block) if phase_deriv else np.sin(block)) @ coefs
    return out.reshape(t.shape)


@dataclass(frozen=True, eq=False)
class FourierPulse:
    """``g(t) = sum_n A_n phi_n(t)`` with amplitudes in rad/s."""

    basis: PulseBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=float)
        if amps.shape != (self.basis.num_functions,):
            raise ValueError(
                f"amplitudes must have length {self.basis.num_functions}, got {amps.shape}")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @property
    def tau(self):
        return self.basis.tau

    @property
    def max_frequency(self):
        return float(np.max(self.basis.frequencies()))

    def __call__(self, t):
        return _chunked_sine_sum(t, self.basis.frequencies(), self.amplitudes)

    evaluate = __call__

    def derivative(self, t):
        freqs = self.basis.frequencies()
        return _chunked_sine_sum(t, freqs, freqs * self.amplitudes, phase_deriv=True)

    def overlap(self, omega):
        """``int_0^tau g(t) exp(i omega t) dt`` for each entry of ``omega``."""
        from ._kernels import tone_overlap

        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        vals = tone_overlap(self.basis.frequencies()[None, :], omega[:, None], self.tau)
        return vals @ self.amplitudes

    def partial_overlap(self, omega, t):
        """``int_0^t g(s) exp(i omega s) ds`` on a grid of end times ``t``."""
        from ._kernels import interval_exp

        t = np.asarray(t, dtype=float)
        nu = self.basis.frequencies()
        vals = (interval_exp(omega + nu[None, :], t[:, None])
                - interval_exp(omega - nu[None, :], t[:, None])) / 2j
        return vals @ self.amplitudes

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def peak(self, samples_per_period=32):
        """``max |g(t)|`` on a dense uniform grid."""
        n = int(np.ceil(samples_per_period * self.max_frequency * self.tau / TWO_PI)) + 1
        t = np.linspace(0.0, self.tau, max(n, 64))
        return float(np.max(np.abs(self(t))))


@dataclass(frozen=True, eq=False)
class StepPulse:
    """Fixed-detuning pulse ``Omega_j sin(mu0 t)`` on ``num_segments`` equal segments."""

    num_segments: int
    detuning: float
    half_period_count: int
    amplitudes: np.ndarray
    tau: float = None

    def __post_init__(self):
        if int(self.num_segments) < 1:
            raise ValueError("num_segments must be >= 1")
        if not self.detuning > 0:
            raise ValueError("detuning must be positive")
        if int(self.half_period_count) != self.half_period_count or self.half_period_count < 1:
            raise ValueError("half_period_count must be a positive integer")
        tau = np.pi * self.half_period_count / self.detuning
        if self.tau is not None and not np.isclose(self.tau, tau, rtol=1e-12, atol=0):
            raise ValueError("tau must equal half_period_count * pi / detuning")
        object.__setattr__(self, "tau", float(tau))
        amps = np.array(self.amplitudes, dtype=float)
        if amps.shape != (self.num_segments,):
            raise ValueError(f"amplitudes must have length {self.num_segments}")
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @property
    def parity(self):
        return "negative" if self.half_period_count % 2 == 0 else "positive"

    @property
    def max_frequency(self):
        return float(self.detuning)

    @property
    def edges(self):
        return np.linspace(0.0, self.tau, self.num_segments + 1)

    def _segment_index(self, t):
        idx = np.floor(np.asarray(t, dtype=float) / self.tau * self.num_segments).astype(int)
        return np.clip(idx, 0, self.num_segments - 1)

    def envelope(self, t):
        return self.amplitudes[self._segment_index(t)]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.envelope(t) * np.sin(self.detuning * t)

    evaluate = __call__

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return self.envelope(t) * self.detuning * np.cos(self.detuning * t)

    def overlap(self, omega):
        from ._kernels import tone_overlap

        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        edges = self.edges
        dt = edges[1] - edges[0]
        # shift each segment to start at 0: sin(mu0 (t0+s)) e^{iw(t0+s)}
        seg = (np.exp(1j * np.multiply.outer(omega, edges[:-1]))
               * tone_overlap(self.detuning, omega[:, None], dt, phase=self.detuning * edges[:-1]))
        return seg @ self.amplitudes

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def peak(self, samples_per_period=32):
        return float(np.max(np.abs(self.amplitudes)))


# --- chain files -----------------------------------------------------------

def chain_from_dict(data):
    if not isinstance(data, dict):
        raise ChainValidationError("<root>", "chain config must be a JSON object")
    unknown = set(data) - {"mode_freqs_mhz", "lamb_dicke", "label"}
    if unknown:
        raise ChainValidationError(sorted(unknown)[0], "unknown key")
    for key in ("mode_freqs_mhz", "lamb_dicke"):
        if key not in data:
            raise ChainValidationError(key, "missing")
    try:
        freqs = np.array(data["mode_freqs_mhz"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ChainValidationError("mode_freqs_mhz", f"not a list of numbers ({exc})") from None
    try:
        eta = np.array(data["lamb_dicke"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ChainValidationError("lamb_dicke", f"not a rectangular numeric matrix ({exc})") from None
    if freqs.ndim != 1:
        raise ChainValidationError("mode_freqs_mhz", "must be a flat list")
    if eta.ndim != 2 and not (eta.size == 0 and freqs.size == 0):
        raise ChainValidationError("lamb_dicke", "must be a list of rows")
    if freqs.size == 0:
        raise ChainValidationError("mode_freqs_mhz", "chain needs at least one mode")
    if eta.shape[0] != freqs.size:
        raise ChainValidationError(
            "lamb_dicke", f"expected {freqs.size} rows (one per mode), got {eta.shape[0]}")
    label = data.get("label", "")
    if not isinstance(label, str):
        raise ChainValidationError("label", "must be a string")
    try:
        return IonChain(freqs * MHZ_TO_RAD_S, eta, label)
    except ChainValidationError as exc:
        if exc.field == "mode_freqs":
            raise ChainValidationError("mode_freqs_mhz", str(exc).split(": ", 1)[1]) from None
        raise


def load_chain(path):
    """Read a chain-config JSON file (frequencies in MHz)."""
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise FileNotFoundError(f"chain file not found: {path}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChainValidationError("<root>", f"{path}: invalid JSON ({exc})") from None
    return chain_from_dict(data)


def save_chain(chain, path):
    Path(path).write_text(json.dumps(chain.to_dict(), indent=2) + "\n")


def five_ion_chain():
    """The reference five-ion chain shipped with the package (mode table + Lamb-Dicke table)."""
    text = resources.files("xxpulse").joinpath("data/five_ion_chain.json").read_text()
    return chain_from_dict(json.loads(text))


# --- synthetic chains --------------------------------------------------------

def _coulomb_force(u):
    d = u[:, None] - u[None, :]
    np.fill_diagonal(d, np.inf)
    return np.sum(np.sign(d) / d ** 2, axis=1)


def equilibrium_positions(num_ions, max_iter=100, tol=1e-13):
    """Dimensionless axial equilibrium of ``num_ions`` ions in a harmonic well.

    Lengths are in units of ``(e^2 / (4 pi eps0 m omega_ax^2))^{1/3}``.  Solved by
    damped Newton on ``u_i = sum_j sign(u_i - u_j) / (u_i - u_j)^2``.
    """
    if num_ions == 1:
        return np.zeros(1)
    # Standard large-N estimate as a starting point
    u = np.linspace(-1.0, 1.0, num_ions) * 1.05 * num_ions ** 0.56
    for _ in range(max_iter):
        resid = u - _coulomb_force(u)
        if np.max(np.abs(resid)) < tol * max(1.0, np.max(np.abs(u))):
            return u
        d = np.abs(u[:, None] - u[None, :])
        np.fill_diagonal(d, np.inf)
        off = -2.0 / d ** 3
        jac = off.copy()
        np.fill_diagonal(jac, 1.0 - off.sum(axis=1))
        step = np.linalg.solve(jac, resid)
        norm0 = np.linalg.norm(resid)
        damping = 1.0
        while damping > 1e-6:
            trial = u - damping * step
            if np.all(np.diff(trial) > 0) and np.linalg.norm(trial - _coulomb_force(trial)) < norm0:
                break
            damping *= 0.5
        u = trial
    raise ConvergenceError(f"equilibrium search did not converge in {max_iter} iterations")


def transverse_hessian(positions, axial_ratio):
    """Transverse stiffness matrix in units of ``omega_ax^2``."""
    u = np.asarray(positions, dtype=float)
    d = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(d, np.inf)
    c = 1.0 / d ** 3
    hess = c.copy()
    np.fill_diagonal(hess, 1.0 / axial_ratio ** 2 - c.sum(axis=1))
    return hess


def generate_chain(num_ions, radial_freq, axial_ratio,
                   lamb_dicke_prefactor=DEFAULT_LAMB_DICKE_PREFACTOR, spacing="harmonic",
                   label=None):
    """Synthetic chain: transverse modes of a linear Coulomb crystal.

    Parameters
    ----------
    num_ions : int
        Number of ions, at least 2.
    radial_freq : float
        Radial (transverse) trap frequency in rad/s; the centre-of-mass mode sits here.
    axial_ratio : float
        ``omega_x / omega_r`` in (0, 1).  For ``spacing="uniform"`` the axial scale is
        the Coulomb frequency at unit nearest-neighbour spacing instead of a trap frequency.
    lamb_dicke_prefactor : float
        Common factor multiplying the orthonormal mode vectors.
    spacing : {"harmonic", "uniform"}
        Harmonic axial well (positions from Newton iteration) or an equally spaced
        chain as produced by an anharmonic axial potential.

    Returns
    -------
    IonChain
        Modes sorted by increasing frequency.  Raises ``ValueError`` if the linear
        chain is transversely unstable (zigzag) for these parameters.
    """
    if num_ions < 2:
        raise ValueError("num_ions must be >= 2")
    if not 0 < axial_ratio < 1:
        raise ValueError("axial_ratio must lie in (0, 1)")
    if spacing == "harmonic":
        u = equilibrium_positions(num_ions)
    elif spacing == "uniform":
        u = np.arange(num_ions, dtype=float) - 0.5 * (num_ions - 1)
    else:
        raise ValueError("spacing must be 'harmonic' or 'uniform'")
    evals, vecs = np.linalg.eigh(transverse_hessian(u, axial_ratio))
    if evals[0] <= 0:
        raise ValueError("linear chain is transversely unstable for this axial_ratio (zigzag)")
    axial = axial_ratio * radial_freq
    freqs = axial * np.sqrt(evals)
    # deterministic sign: largest-magnitude component of each mode positive
    pivots = vecs[np.argmax(np.abs(vecs), axis=0), np.arange(num_ions)]
    vecs = vecs * np.sign(pivots)
    eta = lamb_dicke_prefactor * vecs.T
    if label is None:
        label = f"synthetic-{spacing}-N{num_ions}"
    return IonChain(freqs, eta, label)


def mode_vectors(chain):
    """Mode-vector matrix recovered from a chain's Lamb-Dicke rows (rows normalised)."""
    eta = chain.lamb_dicke
    return (eta / np.linalg.norm(eta, axis=1, keepdims=True)).T
