"""Driving a quantum system with an input stream and sampling virtual nodes.

One timestep injects ``s_k`` into qubit 0 and then evolves for ``tau`` in
``V`` equal substeps; after every substep the rescaled ``<Z_i>`` of all
qubits is recorded. A step therefore yields ``N * V`` signals, flattened
substep-major: column ``v * N + n`` holds qubit ``n`` at substep ``v + 1``.

Two numerically equivalent engines are used:

* the reference engine applies :mod:`qrc.qcore` maps substep by substep and
  supports dephasing;
* the fast engine (no dephasing) uses the fact that the state right after an
  injection is ``rho_s (x) sigma``. Signals are then linear in ``sigma`` with
  coefficients that depend on ``s`` only through ``1-s``, ``s`` and
  ``sqrt(s(1-s))``, so all ``N*V`` samples of many steps collapse into a
  single matrix product.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import qcore
from .exceptions import DimensionError, DomainError, ParameterError
from .qcore import Axis, Hamiltonian, Topology

# Upper bound on the precomputed fast-engine operator, in bytes.
FAST_ENGINE_BUDGET = 512 * 2**20
# Steps per matrix product in the batched signal evaluation.
BATCH = 256


@dataclass(frozen=True)
class NoiseSpec:
    """Decoherence and readout noise.

    ``dephasing_dt`` defaults to ``tau / V`` (one channel application per
    substep); ``observation_sigma`` is the standard deviation of the Gaussian
    noise added to recorded signals.
    """

    dephasing_rate: float = 0.0
    dephasing_axis: Axis = Axis.Z
    dephasing_dt: Optional[float] = None
    observation_sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "dephasing_axis", Axis(self.dephasing_axis))
        for name in ("dephasing_rate", "observation_sigma"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 0:
                raise ParameterError(f"{name} must be finite and non-negative, got {val}")
        if self.dephasing_dt is not None and not self.dephasing_dt > 0:
            raise ParameterError("dephasing_dt must be positive")


@dataclass(frozen=True)
class ReservoirConfig:
    n_qubits: int = 5
    tau: float = 1.0
    virtual_nodes: int = 10
    J: float = 1.0
    h: float = 0.5
    topology: Topology = Topology.FULL
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    washout_steps: int = 1000
    train_steps: int = 3000
    eval_steps: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))
        if isinstance(self.noise, dict):
            object.__setattr__(self, "noise", NoiseSpec(**self.noise))
        if self.virtual_nodes < 1:
            raise ParameterError("virtual_nodes must be >= 1")
        if not self.tau > 0:
            raise ParameterError("tau must be positive")
        if min(self.washout_steps, self.train_steps, self.eval_steps) < 0:
            raise ParameterError("phase lengths must be non-negative")

    @property
    def phases(self) -> tuple[int, int, int]:
        return (self.washout_steps, self.train_steps, self.eval_steps)

    @property
    def total_steps(self) -> int:
        return sum(self.phases)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["topology"] = self.topology.value
        d["noise"]["dephasing_axis"] = self.noise.dephasing_axis.value
        return d


def rng_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for the coupling draw and the observation noise."""
    ham_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(ham_ss), np.random.default_rng(noise_ss)


@dataclass(frozen=True)
class ReservoirState:
    rho: np.ndarray
    step_index: int = 0


class ReservoirSystem:
    """Hamiltonian, substep propagator and noise model. Immutable once built."""

    def __init__(self, hamiltonian: Hamiltonian, tau: float, virtual_nodes: int,
                 noise: NoiseSpec | None = None):
        if virtual_nodes < 1:
            raise ParameterError("virtual_nodes must be >= 1")
        if not tau > 0:
            raise ParameterError("tau must be positive")
        self.hamiltonian = hamiltonian
        self.tau = float(tau)
        self.virtual_nodes = int(virtual_nodes)
        self.noise = NoiseSpec() if noise is None else noise

        sample_dt = self.tau / self.virtual_nodes
        if self.noise.dephasing_rate > 0:
            ddt = self.noise.dephasing_dt or sample_dt
            ratio = sample_dt / ddt
            n_sub = int(round(ratio))
            if n_sub < 1 or abs(ratio - n_sub) > 1e-9 * max(1.0, ratio):
                raise ParameterError(
                    f"tau/V = {sample_dt} must be an integer multiple of dephasing_dt = {ddt}")
        else:
            n_sub = 1
        self._n_sub = n_sub
        self.step_propagator = qcore.propagator(hamiltonian, sample_dt / n_sub)

    @classmethod
    def from_config(cls, config: ReservoirConfig, rng: np.random.Generator | None = None) -> "ReservoirSystem":
        if rng is None:
            rng, _ = rng_streams(config.seed)
        H = qcore.build_hamiltonian(config.n_qubits, config.J, config.h, config.topology, rng)
        return cls(H, config.tau, config.virtual_nodes, config.noise)

    @property
    def n_qubits(self) -> int:
        return self.hamiltonian.n_qubits

    @property
    def n_signals(self) -> int:
        return self.n_qubits * self.virtual_nodes

    @property
    def dephasing_dt(self) -> float:
        return self.step_propagator.dt

    @property
    def uses_fast_engine(self) -> bool:
        if self.noise.dephasing_rate > 0:
            return False
        half = 1 << (self.n_qubits - 1)
        nbytes = 2 * half * half * 3 * self.n_signals * 8
        return nbytes <= FAST_ENGINE_BUDGET

    @cached_property
    def _fast(self) -> "_FastEngine":
        return _FastEngine(self)


class _FastEngine:
    """Precomputed operators for the dephasing-free engine."""

    def __init__(self, system: ReservoirSystem):
        n, V = system.n_qubits, system.virtual_nodes
        d = 1 << n
        half = d // 2
        evals, evecs = system.hamiltonian.spectrum
        times = system.tau / V * np.arange(1, V + 1)
        # U_v = W exp(-i E t_v) W^T for every substep v
        U = np.einsum("ab,vb,cb->vac", evecs, np.exp(-1j * np.outer(times, evals)), evecs.conj(), optimize=True)
        self.U_tau = U[-1]
        zdiag = np.array([qcore.z_diagonal(n, i) for i in range(n)])
        # Heisenberg-picture observables O[v, i] = U_v^H Z_i U_v
        O = np.einsum("vba,ib,vbc->viac", U.conj(), zdiag, U, optimize=True)
        blocks = np.stack([
            O[..., :half, :half],
            O[..., half:, half:],
            O[..., :half, half:] + O[..., half:, :half],
        ])  # (3, V, N, half, half)
        blocks = blocks.reshape(3 * V * n, half * half)
        self.M = np.concatenate([blocks.real, blocks.imag], axis=1).T.copy()
        self.n, self.V, self.half = n, V, half

    def reduced(self, rho: np.ndarray) -> np.ndarray:
        r = rho.reshape(2, self.half, 2, self.half)
        return r[0, :, 0, :] + r[1, :, 1, :]

    def advance(self, sigma: np.ndarray, s: float) -> np.ndarray:
        """Full state at the end of the step, given the pre-injection reduced state."""
        K = np.sqrt(1.0 - s) * self.U_tau[:, : self.half] + np.sqrt(s) * self.U_tau[:, self.half:]
        rho = (K @ sigma) @ K.conj().T
        return qcore.hermitize(rho)

    def advance_reduced(self, sigma: np.ndarray, s: float) -> np.ndarray:
        K = np.sqrt(1.0 - s) * self.U_tau[:, : self.half] + np.sqrt(s) * self.U_tau[:, self.half:]
        KS = K @ sigma
        h = self.half
        out = KS[:h] @ K[:h].conj().T + KS[h:] @ K[h:].conj().T
        return qcore.hermitize(out)

    def signals(self, sigmas: np.ndarray, s: np.ndarray) -> np.ndarray:
        """Rescaled signals, shape ``(len(s), V*N)``, for a batch of steps."""
        m = len(s)
        flat = sigmas.reshape(m, -1)
        R = (np.concatenate([flat.real, flat.imag], axis=1) @ self.M).reshape(m, 3, -1)
        c = np.sqrt(s * (1.0 - s))
        x = (1.0 - s)[:, None] * R[:, 0] + s[:, None] * R[:, 1] + c[:, None] * R[:, 2]
        return 0.5 * (x + 1.0)


# --------------------------------------------------------------------------- #
# State-level operations
# --------------------------------------------------------------------------- #


def init_state(config: ReservoirConfig | ReservoirSystem | int) -> ReservoirState:
    """Maximally mixed state at step 0."""
    n = config if isinstance(config, int) else config.n_qubits
    return ReservoirState(qcore.maximally_mixed(n), 0)


def _check_input(s: float) -> float:
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise DomainError(f"input value {s} outside [0, 1]")
    return s


def _observe(signals: np.ndarray, system: ReservoirSystem, rng: np.random.Generator | None) -> np.ndarray:
    sigma = system.noise.observation_sigma
    if sigma > 0:
        if rng is None:
            raise ParameterError("observation noise requires an rng")
        signals = signals + rng.normal(0.0, sigma, size=signals.shape)
    return signals


def _reference_step(rho: np.ndarray, s: float, system: ReservoirSystem) -> tuple[np.ndarray, np.ndarray]:
    noise = system.noise
    U = system.step_propagator
    out = np.empty((system.virtual_nodes, system.n_qubits))
    rho = qcore.inject_input(rho, s)
    for v in range(system.virtual_nodes):
        for _ in range(system._n_sub):
            rho = qcore.evolve(rho, U)
            if noise.dephasing_rate > 0:
                rho = qcore.dephase(rho, noise.dephasing_rate, U.dt, noise.dephasing_axis)
        out[v] = 0.5 * (qcore.expect_z_all(rho) + 1.0)
    return rho, out


def step(state: ReservoirState, s_k: float, system: ReservoirSystem,
         rng: np.random.Generator | None = None,
         engine: str = "auto") -> tuple[ReservoirState, np.ndarray]:
    """Advance one input symbol; return the new state and a ``(V, N)`` signal block."""
    s = _check_input(s_k)
    if state.rho.shape[0] != 1 << system.n_qubits:
        raise DimensionError("state and system have different qubit counts")
    fast = system.uses_fast_engine if engine == "auto" else engine == "fast"
    if fast:
        eng = system._fast
        sigma = eng.reduced(state.rho)
        sig = eng.signals(sigma[None], np.array([s]))[0].reshape(system.virtual_nodes, system.n_qubits)
        rho = eng.advance(sigma, s)
    else:
        rho, sig = _reference_step(state.rho, s, system)
    return ReservoirState(rho, state.step_index + 1), _observe(sig, system, rng)


def drive(system: ReservoirSystem, inputs: Sequence[float],
          state: ReservoirState | None = None,
          rng: np.random.Generator | None = None) -> tuple[np.ndarray, ReservoirState]:
    """Run a whole input sequence; return ``(L, N*V)`` signals and the final state."""
    inputs = np.asarray(inputs, dtype=float).ravel()
    if inputs.size and (inputs.min() < 0.0 or inputs.max() > 1.0):
        raise DomainError("inputs must lie in [0, 1]")
    if state is None:
        state = init_state(system)
    L = len(inputs)
    out = np.empty((L, system.n_signals))
    if not system.uses_fast_engine:
        for k, s in enumerate(inputs):
            state, sig = step(state, s, system, engine="reference")
            out[k] = sig.ravel()
        return _observe(out, system, rng), state

    eng = system._fast
    sigma = eng.reduced(state.rho)
    buf = np.empty((min(BATCH, max(L, 1)), eng.half, eng.half), dtype=complex)
    start = 0
    for k, s in enumerate(inputs):
        j = k - start
        buf[j] = sigma
        if k == L - 1:
            rho = eng.advance(sigma, s)
        else:
            sigma = eng.advance_reduced(sigma, s)
        if j == len(buf) - 1 or k == L - 1:
            out[start:k + 1] = eng.signals(buf[: j + 1], inputs[start:k + 1])
            start = k + 1
    if L == 0:
        return out, state
    return _observe(out, system, rng), ReservoirState(rho, state.step_index + L)


# --------------------------------------------------------------------------- #
# Design matrix
# --------------------------------------------------------------------------- #


def signal_columns(n_qubits: int, virtual_nodes: int) -> list[str]:
    return ["bias"] + [f"q{n + 1}v{v + 1}" for v in range(virtual_nodes) for n in range(n_qubits)]


@dataclass
class SignalMatrix:
    """``L x (N*V + 1)`` design matrix; column 0 is the constant bias."""

    data: np.ndarray
    n_qubits: int
    virtual_nodes: int
    phases: tuple[int, int, int]
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def washout_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.data), dtype=bool)
        mask[: self.phases[0]] = True
        return mask

    @property
    def train_slice(self) -> slice:
        w, t, _ = self.phases
        return slice(w, w + t)

    @property
    def eval_slice(self) -> slice:
        w, t, e = self.phases
        return slice(w + t, w + t + e)

    @property
    def train_rows(self) -> np.ndarray:
        return self.data[self.train_slice]

    @property
    def eval_rows(self) -> np.ndarray:
        return self.data[self.eval_slice]

    @property
    def columns(self) -> list[str]:
        return signal_columns(self.n_qubits, self.virtual_nodes)

    def to_csv(self, path: str | Path) -> Path:
        """Write the matrix and a sidecar ``.json`` with phases and metadata."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            writer.writerows(self.data.tolist())
        sidecar = {
            "n_qubits": self.n_qubits,
            "virtual_nodes": self.virtual_nodes,
            "phases": {"washout": self.phases[0], "train": self.phases[1], "eval": self.phases[2]},
            "metadata": self.metadata,
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
        return path

    @classmethod
    def from_csv(cls, path: str | Path) -> "SignalMatrix":
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        side = json.loads(path.with_suffix(".json").read_text())
        ph = side["phases"]
        return cls(data, side["n_qubits"], side["virtual_nodes"],
                   (ph["washout"], ph["train"], ph["eval"]), side.get("metadata", {}))


def with_bias(signals: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((len(signals), 1)), signals])


def run(config: ReservoirConfig, inputs: Sequence[float],
        system: ReservoirSystem | None = None) -> SignalMatrix:
    """Build the system from ``config`` (unless given) and drive it with ``inputs``."""
    inputs = np.asarray(inputs, dtype=float).ravel()
    if len(inputs) < config.total_steps:
        raise DimensionError(
            f"{len(inputs)} inputs supplied but the phases need {config.total_steps}")
    ham_rng, noise_rng = rng_streams(config.seed)
    if system is None:
        system = ReservoirSystem.from_config(config, ham_rng)
    signals, _ = drive(system, inputs, rng=noise_rng)
    return SignalMatrix(with_bias(signals), system.n_qubits, system.virtual_nodes,
                        config.phases, {"config": config.to_dict()})


# --------------------------------------------------------------------------- #
# scikit-learn front end
# --------------------------------------------------------------------------- #


class QuantumReservoir(BaseEstimator, TransformerMixin):
    """Transformer mapping an input sequence to virtual-node signals.

    ``fit`` draws the random couplings; ``transform`` drives the system from
    the maximally mixed state and returns an ``(L, N*V)`` array. No bias
    column is added, pair with an estimator that fits an intercept.

    Parameters
    ----------
    n_qubits, tau, virtual_nodes, J, h, topology
        Reservoir Hamiltonian and sampling (energies and times in units of
        Delta).
    dephasing_rate, dephasing_axis, dephasing_dt, observation_sigma
        Noise model, see :class:`NoiseSpec`.
    input_scale : float
        Inputs are multiplied by this factor before injection; the scaled
        values must lie in [0, 1].
    random_state : int or None
        Seed for the coupling draw and observation noise.
    """

    def __init__(self, n_qubits=5, tau=1.0, virtual_nodes=10, J=1.0, h=0.5,
                 topology="full", dephasing_rate=0.0, dephasing_axis="z",
                 dephasing_dt=None, observation_sigma=0.0, input_scale=1.0,
                 random_state=None):
        self.n_qubits = n_qubits
        self.tau = tau
        self.virtual_nodes = virtual_nodes
        self.J = J
        self.h = h
        self.topology = topology
        self.dephasing_rate = dephasing_rate
        self.dephasing_axis = dephasing_axis
        self.dephasing_dt = dephasing_dt
        self.observation_sigma = observation_sigma
        self.input_scale = input_scale
        self.random_state = random_state

    def _config(self) -> ReservoirConfig:
        seed = self.random_state
        if seed is None:
            seed = int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])
        noise = NoiseSpec(self.dephasing_rate, self.dephasing_axis, self.dephasing_dt,
                          self.observation_sigma)
        return ReservoirConfig(self.n_qubits, self.tau, self.virtual_nodes, self.J, self.h,
                               self.topology, noise, 0, 0, 0, int(seed))

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        ham_rng, self._noise_rng = rng_streams(self.config_.seed)
        self.system_ = ReservoirSystem.from_config(self.config_, ham_rng)
        self.n_features_in_ = 1
        return self

    def _inputs(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise DimensionError("QuantumReservoir takes a single input channel")
            X = X[:, 0]
        elif X.ndim != 1:
            raise DimensionError(f"expected 1-D inputs, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DomainError("inputs must be finite")
        return X * self.input_scale

    def transform(self, X):
        check_is_fitted(self, "system_")
        signals, _ = drive(self.system_, self._inputs(X), rng=self._noise_rng)
        return signals

    def get_feature_names_out(self, input_features=None):
        return np.array(signal_columns(self.n_qubits, self.virtual_nodes)[1:], dtype=object)
