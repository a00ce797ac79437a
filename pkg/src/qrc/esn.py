"""Echo state network baseline.

``x_k = tanh(W x_{k-1} + w_in s_k)`` with ``W`` and ``w_in`` drawn from
U[-1, 1]; ``W`` is rescaled to a target spectral radius. Only the internal
matrix is rescaled. Signals go through the same readout and capacity code as
the quantum reservoir.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import tasks
from .exceptions import DimensionError, NumericalError, ParameterError
from .readout import nmse, predict, train
from .reservoir import with_bias
from .seeding import derive_seed

RADIUS_GRID = tuple(np.round(np.arange(0.05, 2.0, 0.1), 10))


class InputCase(str, Enum):
    CASE_I = "I"  # symbol 0 injected as -1
    CASE_II = "II"  # raw 0/1


def spectral_radius(W: np.ndarray) -> float:
    """Largest eigenvalue modulus (dense eigensolver)."""
    W = np.asarray(W, dtype=float)
    return float(np.max(np.abs(np.linalg.eigvals(W)))) if W.size else 0.0


@dataclass(frozen=True)
class EsnSystem:
    internal_weights: np.ndarray
    input_weights: np.ndarray
    spectral_radius_target: float
    input_case: InputCase = InputCase.CASE_II
    seed: int | None = field(default=None, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.input_weights)

    def encode(self, s: np.ndarray | float) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.input_case is InputCase.CASE_I:
            return np.where(s == 0, -1.0, s)
        return s


def esn_build(n_nodes: int, spectral_radius_target: float, input_case: InputCase | str = InputCase.CASE_II,
              seed: int | None = None, max_redraws: int = 100) -> EsnSystem:
    if n_nodes < 1:
        raise ParameterError("n_nodes must be >= 1")
    if not spectral_radius_target > 0:
        raise ParameterError("spectral radius must be positive")
    rng = np.random.default_rng(seed)
    for _ in range(max_redraws):
        W = rng.uniform(-1.0, 1.0, (n_nodes, n_nodes))
        w_in = rng.uniform(-1.0, 1.0, n_nodes)
        rho = spectral_radius(W)
        if rho > 0:
            break
    else:
        raise NumericalError("could not draw a matrix with non-zero spectral radius")
    return EsnSystem(W * (spectral_radius_target / rho), w_in, float(spectral_radius_target),
                     InputCase(input_case), seed)


def esn_step(state: np.ndarray, s_k: float, system: EsnSystem) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if state.shape != (system.n_nodes,):
        raise DimensionError(f"state must have length {system.n_nodes}")
    return np.tanh(system.internal_weights @ state + system.input_weights * system.encode(s_k))


def esn_run(system: EsnSystem, inputs: Sequence[float], state: np.ndarray | None = None) -> np.ndarray:
    """Node states for every step, shape ``(L, n_nodes)``; starts from zero."""
    x = np.zeros(system.n_nodes) if state is None else np.asarray(state, dtype=float)
    u = np.outer(system.encode(np.asarray(inputs, dtype=float)), system.input_weights)
    W = system.internal_weights
    out = np.empty((len(u), system.n_nodes))
    for k in range(len(u)):
        x = np.tanh(W @ x + u[k])
        out[k] = x
    return out


# --------------------------------------------------------------------------- #
# Benchmarks
# --------------------------------------------------------------------------- #


@dataclass
class EsnBenchmarkResult:
    task: str
    radii: np.ndarray
    values: np.ndarray  # (len(radii), samples)
    higher_is_better: bool = True

    @property
    def mean(self) -> np.ndarray:
        return self.values.mean(axis=1)

    @property
    def std(self) -> np.ndarray:
        n = self.values.shape[1]
        return self.values.std(axis=1, ddof=1) if n > 1 else np.zeros(len(self.radii))

    @property
    def best_index(self) -> int:
        m = self.mean
        return int(np.nanargmax(m) if self.higher_is_better else np.nanargmin(m))

    @property
    def best_radius(self) -> float:
        return float(self.radii[self.best_index])


def _esn_capacities(system: EsnSystem, in_rng, phases, task_list, tau_max) -> dict[str, float]:
    s = tasks.binary_stream(sum(phases), in_rng)
    design = with_bias(esn_run(system, s))
    return {t: tasks.summed_capacity(tasks.delay_capacities(design, s, phases, t, tau_max), t)
            for t in task_list}


def _esn_narma(system: EsnSystem, stream: tasks.TaskStream, target: str) -> float:
    design = with_bias(esn_run(system, stream.raw_inputs))
    w = train(design[stream.train_slice], stream.targets[target][stream.train_slice])
    return nmse(predict(design[stream.eval_slice], w), stream.targets[target][stream.eval_slice])


def esn_benchmark(task: str, n_nodes: int = 50, radius_grid: Sequence[float] = RADIUS_GRID,
                  samples: int = 100, input_case: InputCase | str = InputCase.CASE_II,
                  seed: int = 0, phases: tuple[int, int, int] = tasks.CAPACITY_PHASES,
                  tau_max: int = tasks.CAPACITY_TAU_MAX) -> EsnBenchmarkResult:
    """Scan the spectral radius for one task.

    ``task`` is ``"stm"``, ``"pc"``, ``"stm+pc"`` (sum of both capacities on
    the same runs) or a NARMA target name such as ``"narma10"`` (scored by
    NMSE on the sine-input suite, lower is better).
    """
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    radii = np.asarray(radius_grid, dtype=float)
    values = np.empty((len(radii), samples))
    if task.startswith("narma"):
        stream = tasks.narma_suite_stream("sine", sum(phases), phases)
        if task not in stream.targets:
            raise ParameterError(f"unknown NARMA target {task!r}")
    else:
        task_list = task.split("+")
        for t in task_list:
            if t not in tasks.CAPACITY_START:
                raise ParameterError(f"unknown task {task!r}")
    for i, r in enumerate(radii):
        for j in range(samples):
            sd = derive_seed(seed, "esn", float(r), j)
            system = esn_build(n_nodes, float(r), input_case, sd)
            if task.startswith("narma"):
                values[i, j] = _esn_narma(system, stream, task)
            else:
                in_rng = np.random.default_rng(derive_seed(sd, "input"))
                values[i, j] = sum(_esn_capacities(system, in_rng, phases, task_list, tau_max).values())
    return EsnBenchmarkResult(task, radii, values, not task.startswith("narma"))


class EchoStateNetwork(BaseEstimator, TransformerMixin):
    """Transformer returning node states ``(L, n_nodes)`` for a 1-D input sequence."""

    def __init__(self, n_nodes=50, spectral_radius=0.9, input_case="II", random_state=None):
        self.n_nodes = n_nodes
        self.spectral_radius = spectral_radius
        self.input_case = input_case
        self.random_state = random_state

    def fit(self, X=None, y=None):
        self.system_ = esn_build(self.n_nodes, self.spectral_radius, self.input_case, self.random_state)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "system_")
        X = np.asarray(X, dtype=float)
        if X.ndim == 2 and X.shape[1] == 1:
            X = X[:, 0]
        if X.ndim != 1:
            raise DimensionError("EchoStateNetwork takes a single input channel")
        return esn_run(self.system_, X)

    def get_feature_names_out(self, input_features=None):
        return np.array([f"x{i + 1}" for i in range(self.n_nodes)], dtype=object)
