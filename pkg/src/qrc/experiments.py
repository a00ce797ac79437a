"""End-to-end benchmark drivers: NARMA emulation, timer task, Mackey-Glass prediction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import qcore
from . import reservoir as rsv
from . import tasks
from .exceptions import ParameterError, UndefinedMeasureError
from .readout import closed_loop_generate, nmse, predict, train
from .seeding import derive_seed

# --------------------------------------------------------------------------- #
# NARMA
# --------------------------------------------------------------------------- #


@dataclass
class NarmaResult:
    nmse: dict[str, float]
    baseline: dict[str, float]
    seed: int
    input_kind: str


def narma_benchmark(config: rsv.ReservoirConfig, input_kind: str = "sine",
                    orders: Sequence[int] = tasks.NARMA_ORDERS) -> NarmaResult:
    """One reservoir draw, five NARMA readouts trained on the same signals."""
    ham_rng, noise_rng, in_rng = tasks.sample_rngs(config.seed)
    stream = tasks.narma_suite_stream(input_kind, config.total_steps, config.phases, in_rng, orders)
    system = rsv.ReservoirSystem.from_config(config, ham_rng)
    signals, _ = rsv.drive(system, stream.inputs, rng=noise_rng)
    design = rsv.with_bias(signals)
    names = list(stream.targets)
    Y = np.column_stack([stream.targets[n] for n in names])
    w = train(design[stream.train_slice], Y[stream.train_slice])
    out = predict(design[stream.eval_slice], w)
    ev = Y[stream.eval_slice]
    qr = {n: nmse(out[:, i], ev[:, i]) for i, n in enumerate(names)}
    lr = {n: tasks.linear_regression_baseline(stream.raw_inputs, stream.targets[n], stream.phases).nmse
          for n in names}
    return NarmaResult(qr, lr, config.seed, input_kind)


# --------------------------------------------------------------------------- #
# Timer
# --------------------------------------------------------------------------- #


@dataclass
class TimerResult:
    per_delay: np.ndarray  # C(tau_timer) averaged over evaluation trials
    seed: int

    @property
    def capacity(self) -> float:
        return float(np.sum(self.per_delay))


def _timer_signals(system: rsv.ReservoirSystem, s: np.ndarray, rng: np.random.Generator,
                   noise_rng: np.random.Generator) -> np.ndarray:
    rho0 = qcore.random_density_matrix(system.n_qubits, rng)
    signals, _ = rsv.drive(system, s, state=rsv.ReservoirState(rho0), rng=noise_rng)
    return rsv.with_bias(signals)[tasks.TIMER_DISCARD:]


def timer_capacity(config: rsv.ReservoirConfig, n_train: int = 5, n_eval: int = 5,
                   tau_timer_max: int = 300, cue: int = tasks.TIMER_CUE,
                   total: int = tasks.TIMER_TOTAL) -> TimerResult:
    """Timer capacity of one reservoir draw.

    Trials differ only in their random initial density matrix. One readout
    per delay is trained on the stacked training trials; ``C(tau_timer)`` is
    averaged over the evaluation trials.
    """
    if n_train < 1 or n_eval < 1:
        raise ParameterError("need at least one training and one evaluation trial")
    ham_rng, noise_rng, init_rng = tasks.sample_rngs(config.seed)
    system = rsv.ReservoirSystem.from_config(config, ham_rng)
    s = tasks.timer_stream(cue, 0, total).inputs
    delays = np.arange(tau_timer_max + 1)
    k = np.arange(tasks.TIMER_DISCARD, total)
    Y = (k[:, None] == (cue + delays)[None, :]).astype(float)

    X_train = np.vstack([_timer_signals(system, s, init_rng, noise_rng) for _ in range(n_train)])
    w = train(X_train, np.tile(Y, (n_train, 1)))
    caps = np.zeros((n_eval, len(delays)))
    for t in range(n_eval):
        out = predict(_timer_signals(system, s, init_rng, noise_rng), w)
        oc = out - out.mean(axis=0)
        yc = Y - Y.mean(axis=0)
        denom = np.sum(oc**2, axis=0) * np.sum(yc**2, axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            caps[t] = np.where(denom > 0, np.sum(oc * yc, axis=0) ** 2 / np.where(denom > 0, denom, 1), 0.0)
    return TimerResult(caps.mean(axis=0), config.seed)


# --------------------------------------------------------------------------- #
# Mackey-Glass
# --------------------------------------------------------------------------- #

MG_PHASES = (1000, 10000, 2000)
MG_PERTURBATION = 1e-6
MG_TRACK_TOL = 0.1


@dataclass
class MackeyGlassResult:
    nmse: float
    lyapunov: float
    tracking_steps: int
    diverged: bool
    outputs: np.ndarray
    targets: np.ndarray
    seed: int
    extra: dict = field(default_factory=dict)


def mackey_glass_prediction(config: rsv.ReservoirConfig, train_noise: float = 1e-5,
                            tau_mg: float = 17.0, perturbation: float = MG_PERTURBATION) -> MackeyGlassResult:
    """Teacher-forced training followed by 2000 autonomous steps.

    ``config.phases`` gives (reservoir washout, training, evaluation).
    Uniform noise in ``[-train_noise, train_noise]`` is added to the training
    signal rows only. At the switch a second copy of the run starts from
    signals perturbed by a uniform vector of amplitude ``perturbation``; the
    divergence of the two output sequences gives the Lyapunov estimate.
    """
    if train_noise < 0:
        raise ParameterError("train_noise must be non-negative")
    ham_rng, noise_rng, aux_rng = tasks.sample_rngs(config.seed)
    stream = tasks.mackey_glass_stream(tau_mg, config.phases)
    system = rsv.ReservoirSystem.from_config(config, ham_rng)
    washout, n_train, n_eval = config.phases
    switch = washout + n_train

    signals, state = rsv.drive(system, stream.inputs[:switch], rng=noise_rng)
    X = rsv.with_bias(signals[washout:switch] + aux_rng.uniform(-train_noise, train_noise,
                                                                (n_train, system.n_signals)))
    w = train(X, stream.targets["mg"][washout:switch])

    # first autonomous step still receives the last teacher value
    teacher = stream.inputs[switch:switch + 1]
    ref = closed_loop_generate(system, w, teacher, 0, n_eval, state=state, rng=noise_rng)
    pert = aux_rng.uniform(-perturbation, perturbation, system.n_signals)
    alt = closed_loop_generate(system, w, teacher, 0, n_eval, state=state, rng=noise_rng, perturbation=pert)

    target = stream.targets["mg"][switch:switch + n_eval]
    if ref.diverged:
        err, lam = float("inf"), float("nan")
    else:
        err = nmse(ref.outputs, target)
        try:
            lam = tasks.lyapunov_estimate(ref.outputs[1:], alt.outputs[1:]) if not alt.diverged else float("nan")
        except UndefinedMeasureError:
            lam = float("nan")
    off = np.abs(np.nan_to_num(ref.outputs, nan=np.inf) - target) > MG_TRACK_TOL
    tracking = int(np.argmax(off)) if off.any() else n_eval
    return MackeyGlassResult(err, lam, tracking, ref.diverged, ref.outputs, target, config.seed,
                             {"train_residual": w.training_residual, "scale": stream.metadata})


def lyapunov_order_ok(lam: float) -> bool:
    """Positive and of order 1e-3, read as 1e-3 <= lam < 1e-2."""
    return bool(np.isfinite(lam) and 1e-3 <= lam < 1e-2)


def seeds_for(master: int, kind: str, n: int) -> list[int]:
    return [derive_seed(master, kind, j) for j in range(n)]
