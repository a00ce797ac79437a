"""Benchmark input streams, target functions and trajectory diagnostics.

Index conventions: arrays are indexed by timestep ``k`` starting at 0. For
emulation tasks ``targets[k]`` is the value the readout must produce after
input ``inputs[k]`` has been injected.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import reservoir as rsv
from .exceptions import DimensionError, DivergenceError, DomainError, ParameterError, UndefinedMeasureError
from .readout import EvalReport, capacity_sum, predict, train
from .seeding import derive_seed

NARMA_ORDERS = (2, 5, 10, 15, 20)
NARMA_COEFFS = (0.3, 0.05, 1.5, 0.1)
NARMA_BOUND = 10.0

SINE_FREQS = (2.11, 3.73, 4.11)
SINE_PERIOD = 100.0
NARMA_INPUT_MAX = 0.2

MG_PARAMS = (0.2, 10.0, 0.1)  # alpha, beta, gamma


@dataclass
class TaskStream:
    """Input sequence (already scaled for injection) with one or more targets."""

    inputs: np.ndarray
    targets: dict[str, np.ndarray]
    phases: tuple[int, int, int]
    metadata: dict = field(default_factory=dict)
    raw_inputs: Optional[np.ndarray] = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        if self.raw_inputs is None:
            self.raw_inputs = self.inputs
        if self.inputs.size and (self.inputs.min() < 0 or self.inputs.max() > 1):
            raise DomainError("task inputs must lie in [0, 1]")
        for name, t in self.targets.items():
            if len(t) != len(self.inputs):
                raise DimensionError(f"target {name!r} has length {len(t)} != {len(self.inputs)}")

    @property
    def train_slice(self) -> slice:
        w, t, _ = self.phases
        return slice(w, w + t)

    @property
    def eval_slice(self) -> slice:
        w, t, e = self.phases
        return slice(w + t, w + t + e)

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        names = list(self.targets)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "s"] + names)
            for k in range(len(self.inputs)):
                w.writerow([k, repr(float(self.raw_inputs[k]))]
                           + [repr(float(self.targets[n][k])) for n in names])
        meta = {"phases": list(self.phases), **self.metadata}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=str))
        return path


# --------------------------------------------------------------------------- #
# Timer
# --------------------------------------------------------------------------- #

TIMER_CUE = 500
TIMER_TOTAL = 801  # timesteps 0..800
TIMER_DISCARD = 400


def timer_stream(cue: int = TIMER_CUE, delay: int = 0, total: int = TIMER_TOTAL) -> TaskStream:
    """Step input switching 0 -> 1 at ``cue``; the target fires once at ``cue + delay``."""
    if delay < 0 or cue < 0 or cue + delay >= total:
        raise DomainError(f"cue + delay = {cue + delay} must be < total = {total}")
    s = np.zeros(total)
    s[cue:] = 1.0
    y = np.zeros(total)
    y[cue + delay] = 1.0
    return TaskStream(s, {"timer": y}, (TIMER_DISCARD, total - TIMER_DISCARD, 0),
                      {"task": "timer", "cue": cue, "delay": delay})


# --------------------------------------------------------------------------- #
# NARMA
# --------------------------------------------------------------------------- #


def _guard(y: float) -> float:
    if not abs(y) <= NARMA_BOUND:
        raise DivergenceError(f"NARMA output {y} left [-{NARMA_BOUND}, {NARMA_BOUND}]")
    return y


def narma2_step(y_k: float, y_km1: float, s_k: float) -> float:
    """``y_{k+1} = 0.4 y_k + 0.4 y_k y_{k-1} + 0.6 s_k^3 + 0.1``."""
    return _guard(0.4 * y_k + 0.4 * y_k * y_km1 + 0.6 * s_k**3 + 0.1)


def narma_n_step(y_hist: Sequence[float], s_hist: Sequence[float], n: int) -> float:
    """One step of the order-``n`` system.

    ``y_hist[-1]`` is ``y_k`` and the last ``n`` entries are summed;
    ``s_hist[-1]`` is ``s_k`` and ``s_hist[-n]`` is ``s_{k-n+1}``.
    """
    if len(y_hist) < n or len(s_hist) < n:
        raise DimensionError(f"order-{n} step needs {n} past values")
    a, b, g, d = NARMA_COEFFS
    y_k = y_hist[-1]
    return _guard(a * y_k + b * y_k * float(np.sum(y_hist[-n:])) + g * s_hist[-n] * s_hist[-1] + d)


def narma_series(s: Sequence[float], order: int) -> np.ndarray:
    """Targets ``t[k] = y_{k+1}`` driven by ``s`` from an all-zero history."""
    s = np.asarray(s, dtype=float)
    L = len(s)
    if order == 2:
        y = np.zeros(L + 1)
        prev = 0.0
        for k in range(L):
            y[k + 1] = narma2_step(y[k], prev, s[k])
            prev = y[k]
        return y[1:]
    if order < 1:
        raise ParameterError("order must be positive")
    pad = order
    y = np.zeros(L + pad + 1)
    sp = np.concatenate([np.zeros(pad), s])
    a, b, g, d = NARMA_COEFFS
    run_sum = 0.0  # sum of the last `order` y values
    for k in range(L):
        i = k + pad
        yk = y[i]
        run_sum += yk - y[i - order]
        y[i + 1] = _guard(a * yk + b * yk * run_sum + g * sp[i - order + 1] * sp[i] + d)
    return y[pad + 1:]


def sine_input(k: np.ndarray | int, period: float = SINE_PERIOD, freqs: Sequence[float] = SINE_FREQS) -> np.ndarray:
    """Product of three sines mapped into [0, 0.2]."""
    k = np.asarray(k, dtype=float)
    prod = np.ones_like(k)
    for f in freqs:
        prod = prod * np.sin(2.0 * np.pi * f * k / period)
    return 0.1 * (prod + 1.0)


def narma_suite_stream(input_kind: str = "sine", length: int = 5000,
                       phases: tuple[int, int, int] = (1000, 3000, 1000),
                       rng: np.random.Generator | None = None,
                       orders: Sequence[int] = NARMA_ORDERS) -> TaskStream:
    """Common input stream with one target per NARMA order.

    The recursions see the raw input in [0, 0.2]; the injected input is the
    raw value times 5.
    """
    if input_kind == "sine":
        raw = sine_input(np.arange(length))
    elif input_kind in ("random", "uniform-random", "uniform"):
        rng = np.random.default_rng() if rng is None else rng
        raw = rng.uniform(0.0, NARMA_INPUT_MAX, length)
    else:
        raise ParameterError(f"unknown input kind {input_kind!r}")
    targets = {f"narma{n}": narma_series(raw, n) for n in orders}
    scale = 1.0 / NARMA_INPUT_MAX
    return TaskStream(np.clip(raw * scale, 0.0, 1.0), targets, phases,
                      {"task": "narma", "input_kind": input_kind, "input_scale": scale},
                      raw_inputs=raw)


def linear_regression_baseline(raw_inputs: Sequence[float], targets: Sequence[float],
                               phases: tuple[int, int, int]) -> EvalReport:
    """Two-parameter model ``y = w1 s_k + w0`` trained and scored like a reservoir."""
    s = np.asarray(raw_inputs, dtype=float)
    t = np.asarray(targets, dtype=float)
    X = np.column_stack([np.ones_like(s), s])
    w0, tr, ev = phases
    w = train(X[w0:w0 + tr], t[w0:w0 + tr])
    ev_sl = slice(w0 + tr, w0 + tr + ev)
    return EvalReport.from_predictions(predict(X[ev_sl], w), t[ev_sl], weights=w.weights.tolist())


# --------------------------------------------------------------------------- #
# Mackey-Glass
# --------------------------------------------------------------------------- #


def mackey_glass_series(tau_mg: float = 17.0, n_samples: int = 12000, step: float = 0.1,
                        subsample: int = 10, washout: int = 1000, initial: float = 1.2,
                        history: Optional[np.ndarray] = None) -> np.ndarray:
    """Euler-discretised delay equation, sub-sampled to unit time steps.

    ``washout`` is counted in sub-sampled steps. ``history`` (length
    ``tau_mg / step + 1``) overrides the constant initial buffer.
    """
    ratio = tau_mg / step
    delay = int(round(ratio))
    if abs(ratio - delay) > 1e-9 or delay < 1:
        raise ParameterError(f"tau_mg / step = {ratio} is not a positive integer")
    alpha, beta, gamma = MG_PARAMS
    n_fine = (washout + n_samples) * subsample
    y = np.empty(delay + 1 + n_fine)
    if history is None:
        y[: delay + 1] = initial
    else:
        y[: delay + 1] = history
    for k in range(delay, delay + n_fine):
        yd = y[k - delay]
        y[k + 1] = y[k] + step * (alpha * yd / (1.0 + yd**beta) - gamma * y[k])
    fine = y[delay + 1:]
    return fine[subsample - 1::subsample][washout:washout + n_samples]


def mackey_glass_stream(tau_mg: float = 17.0, phases: tuple[int, int, int] = (1000, 10000, 2000),
                        **kwargs) -> TaskStream:
    """Teacher-forcing stream: ``inputs[k] = y_{k-1}``, ``targets[k] = y_k``.

    The series is rescaled to [0, 1]; the constants are kept in
    ``metadata`` so outputs can be mapped back.
    """
    total = sum(phases)
    raw = mackey_glass_series(tau_mg, total + 1, **kwargs)
    lo, hi = float(raw.min()), float(raw.max())
    scaled = (raw - lo) / (hi - lo)
    return TaskStream(scaled[:-1], {"mg": scaled[1:]}, phases,
                      {"task": "mackey_glass", "tau_mg": tau_mg, "min": lo, "max": hi},
                      raw_inputs=raw[:-1])


# --------------------------------------------------------------------------- #
# Binary memory / parity tasks
# --------------------------------------------------------------------------- #


def binary_stream(length: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=length).astype(float)


def stm_target(s: Sequence[float], delay: int) -> np.ndarray:
    """``s_{k - delay}`` with zeros before the start."""
    s = np.asarray(s, dtype=float)
    if delay < 0:
        raise DomainError("delay must be non-negative")
    out = np.zeros_like(s)
    if delay < len(s):
        out[delay:] = s[: len(s) - delay]
    return out


def pc_target(s: Sequence[float], delay: int) -> np.ndarray:
    """Parity of ``s_{k-delay} .. s_k`` (zero-padded history)."""
    s = np.asarray(s, dtype=float)
    if delay < 0:
        raise DomainError("delay must be non-negative")
    c = np.concatenate([[0], np.cumsum(s.astype(np.int64))])
    k = np.arange(len(s))
    lo = np.maximum(k - delay, 0)
    return ((c[k + 1] - c[lo]) % 2).astype(float)


def delay_targets(s: Sequence[float], task: str, max_delay: int) -> np.ndarray:
    """``(L, max_delay + 1)`` matrix whose column ``d`` is the delay-``d`` target."""
    fn = {"stm": stm_target, "pc": pc_target}.get(task)
    if fn is None:
        raise ParameterError(f"unknown task {task!r}")
    return np.column_stack([fn(s, d) for d in range(max_delay + 1)])


# --------------------------------------------------------------------------- #
# Capacities
# --------------------------------------------------------------------------- #

CAPACITY_TAU_MAX = 500
CAPACITY_PHASES = (1000, 3000, 1000)
# First delay counted in the capacity sum. The delay-0 parity target equals
# the input itself, so it is excluded for PC.
CAPACITY_START = {"stm": 0, "pc": 1}


def delay_capacities(design: np.ndarray, s: Sequence[float], phases: tuple[int, int, int],
                     task: str, tau_max: int = CAPACITY_TAU_MAX) -> np.ndarray:
    """Raw ``C(d)`` for ``d = 0 .. tau_max`` from one design matrix.

    All delays share the design matrix, so a single multi-target least
    squares fit gives every readout. A constant readout output scores 0.
    """
    design = np.asarray(design, dtype=float)
    if len(design) != len(s):
        raise DimensionError("design matrix and input stream differ in length")
    if sum(phases) > len(s):
        raise DimensionError(f"phases {phases} exceed the stream length {len(s)}")
    Y = delay_targets(s, task, tau_max)
    w0, tr, ev = phases
    tr_sl, ev_sl = slice(w0, w0 + tr), slice(w0 + tr, w0 + tr + ev)
    w = train(design[tr_sl], Y[tr_sl])
    out = predict(design[ev_sl], w)
    t = Y[ev_sl]
    oc = out - out.mean(axis=0)
    tc = t - t.mean(axis=0)
    var_o = np.sum(oc**2, axis=0)
    # outputs constant up to rounding count as constant
    flat = var_o <= 1e-24 * np.maximum(np.sum(out**2, axis=0), 1.0)
    denom = np.where(flat, 0.0, var_o * np.sum(tc**2, axis=0))
    num = np.sum(oc * tc, axis=0) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > 0, num / np.where(denom > 0, denom, 1.0), 0.0)


def summed_capacity(curve: np.ndarray, task: str) -> float:
    """Bias-corrected capacity of a raw curve indexed by delay."""
    curve = np.asarray(curve)
    return capacity_sum(dict(enumerate(curve.tolist())), len(curve) - 1, CAPACITY_START[task])


@dataclass
class CapacityResult:
    """Capacity curves of several reservoir samples for one task."""

    task: str
    curves: np.ndarray  # (samples, tau_max + 1), raw C(d)
    capacities: np.ndarray  # (samples,)
    seeds: list[int] = field(default_factory=list)

    @property
    def tau_max(self) -> int:
        return self.curves.shape[1] - 1

    @property
    def mean(self) -> float:
        return float(np.mean(self.capacities))

    @property
    def std(self) -> float:
        return float(np.std(self.capacities, ddof=1)) if len(self.capacities) > 1 else 0.0

    @property
    def stderr(self) -> float:
        return self.std / np.sqrt(len(self.capacities))

    @property
    def corrected_curves(self) -> np.ndarray:
        return self.curves - self.curves[:, -1:]

    def per_delay(self) -> dict[int, float]:
        return dict(enumerate(self.corrected_curves.mean(axis=0).tolist()))

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        cc = self.corrected_curves
        std = cc.std(axis=0, ddof=1) if len(cc) > 1 else np.zeros(cc.shape[1])
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tau_B", "C_mean", "C_std"])
            for d in range(cc.shape[1]):
                w.writerow([d, repr(float(cc[:, d].mean())), repr(float(std[d]))])
        return path


def sample_rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Coupling, observation-noise and input generators of one sample."""
    ham, noise, inp = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(ham), np.random.default_rng(noise), np.random.default_rng(inp)


def capacity_sample(config: rsv.ReservoirConfig, tasks: Sequence[str] = ("stm", "pc"),
                    tau_max: int = CAPACITY_TAU_MAX) -> dict[str, np.ndarray]:
    """Raw capacity curves of one reservoir draw (seeded by ``config.seed``)."""
    ham_rng, noise_rng, in_rng = sample_rngs(config.seed)
    system = rsv.ReservoirSystem.from_config(config, ham_rng)
    s = binary_stream(config.total_steps, in_rng)
    signals, _ = rsv.drive(system, s, rng=noise_rng)
    design = rsv.with_bias(signals)
    return {t: delay_capacities(design, s, config.phases, t, tau_max) for t in tasks}


def capacity_profile(config: rsv.ReservoirConfig, tasks: Sequence[str] = ("stm", "pc"),
                     tau_max: int = CAPACITY_TAU_MAX, samples: int = 20) -> dict[str, CapacityResult]:
    """Capacities of ``samples`` independent reservoirs; each task scored on the same runs.

    Sample ``j`` uses the seed ``derive_seed(config.seed, "sample", j)``.
    """
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    for t in tasks:
        if t not in CAPACITY_START:
            raise ParameterError(f"unknown capacity task {t!r}")
    seeds = [derive_seed(config.seed, "sample", j) for j in range(samples)]
    curves = {t: [] for t in tasks}
    for sd in seeds:
        res = capacity_sample(_with_seed(config, sd), tasks, tau_max)
        for t in tasks:
            curves[t].append(res[t])
    out = {}
    for t in tasks:
        c = np.array(curves[t])
        out[t] = CapacityResult(t, c, np.array([summed_capacity(row, t) for row in c]), seeds)
    return out


def capacity_curve(config: rsv.ReservoirConfig, task: str, tau_max: int = CAPACITY_TAU_MAX,
                   samples: int = 20) -> CapacityResult:
    return capacity_profile(config, (task,), tau_max, samples)[task]


def _with_seed(config: rsv.ReservoirConfig, seed: int) -> rsv.ReservoirConfig:
    return replace(config, seed=seed)


# --------------------------------------------------------------------------- #
# Divergence of trajectories
# --------------------------------------------------------------------------- #


def window_distances(reference: Sequence[float], perturbed: Sequence[float], window: int = 17) -> np.ndarray:
    """``d_k = || y[k:k+window] - y'[k:k+window] ||`` for every admissible ``k``."""
    a = np.asarray(reference, dtype=float)
    b = np.asarray(perturbed, dtype=float)
    n = min(len(a), len(b)) - window + 1
    if n < 1:
        raise DimensionError("sequences shorter than the window")
    diff2 = (a[: n + window - 1] - b[: n + window - 1]) ** 2
    c = np.concatenate([[0.0], np.cumsum(diff2)])
    return np.sqrt(np.maximum(c[window:window + n] - c[:n], 0.0))


def lyapunov_estimate(reference: Sequence[float], perturbed: Sequence[float],
                      window: int = 17, horizon: int = 500) -> float:
    """``(log d_horizon - log d_0) / horizon``."""
    a = np.asarray(reference, dtype=float)
    b = np.asarray(perturbed, dtype=float)
    if min(len(a), len(b)) < horizon + window:
        raise DimensionError(f"need at least {horizon + window} samples")
    d0 = np.linalg.norm(a[:window] - b[:window])
    dh = np.linalg.norm(a[horizon:horizon + window] - b[horizon:horizon + window])
    if d0 == 0:
        raise UndefinedMeasureError("unperturbed pair: d_0 = 0")
    if dh == 0:
        raise UndefinedMeasureError("trajectories re-merged: d_horizon = 0")
    return float((np.log(dh) - np.log(d0)) / horizon)
