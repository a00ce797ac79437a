"""Linear readout: least-squares training, error/capacity measures, closed loop."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import reservoir as rsv
from .exceptions import (
    DimensionError,
    UnderdeterminedError,
    UndefinedMeasureError,
    ValidationError,
)

RCOND = 1e-12
DIVERGENCE_BOUND = 10.0


@dataclass
class ReadoutWeights:
    """Trained weights (bias first) with training diagnostics.

    ``weights`` is a vector, or a ``(n_features, n_targets)`` matrix when
    several targets share one design matrix; ``training_residual`` then holds
    one mean square error per target.
    """

    weights: np.ndarray
    training_residual: float | np.ndarray
    rank: int

    def to_json(self, path: str | Path | None = None) -> str:
        payload = json.dumps({
            "weights": np.asarray(self.weights).tolist(),
            "training_residual": np.asarray(self.training_residual).tolist(),
            "rank": int(self.rank),
        }, indent=2)
        if path is not None:
            Path(path).write_text(payload)
        return payload

    @classmethod
    def from_json(cls, text_or_path: str | Path) -> "ReadoutWeights":
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            text = Path(text_or_path).read_text()
        d = json.loads(text)
        resid = d["training_residual"]
        return cls(np.asarray(d["weights"], dtype=float),
                   resid if np.isscalar(resid) else np.asarray(resid), int(d["rank"]))


def train(X: np.ndarray, targets: np.ndarray, ridge: float = 0.0, rcond: float = RCOND) -> ReadoutWeights:
    """Minimum-norm least squares through the SVD of ``X``.

    Singular values below ``rcond * s_max`` are discarded. A positive
    ``ridge`` switches to Tikhonov filtering ``s / (s^2 + ridge)``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(targets, dtype=float)
    if X.ndim != 2:
        raise DimensionError("design matrix must be 2-D")
    if y.shape[0] != X.shape[0]:
        raise DimensionError(f"{X.shape[0]} rows but {y.shape[0]} targets")
    if X.shape[0] < X.shape[1]:
        raise UnderdeterminedError(f"{X.shape[0]} rows < {X.shape[1]} columns")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValidationError("design matrix and targets must be finite")

    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    keep = s > rcond * s[0] if s.size and s[0] > 0 else np.zeros_like(s, dtype=bool)
    if ridge > 0:
        filt = np.where(keep, s / (s**2 + ridge), 0.0)
    else:
        filt = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    coef = U.T @ y
    coef = filt[:, None] * coef if coef.ndim == 2 else filt * coef
    w = Vt.T @ coef
    resid = np.mean((X @ w - y) ** 2, axis=0)
    return ReadoutWeights(w, float(resid) if np.ndim(resid) == 0 else resid, int(keep.sum()))


def predict(X: np.ndarray, w: ReadoutWeights | np.ndarray) -> np.ndarray:
    W = w.weights if isinstance(w, ReadoutWeights) else np.asarray(w)
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != W.shape[0]:
        raise DimensionError(f"design matrix has {X.shape[-1]} columns, weights have {W.shape[0]}")
    return X @ W


def nmse(outputs: Sequence[float], targets: Sequence[float]) -> float:
    """``sum (target - output)^2 / sum target^2``."""
    y = np.asarray(outputs, dtype=float)
    t = np.asarray(targets, dtype=float)
    if y.shape != t.shape or y.size == 0:
        raise DimensionError("outputs and targets must be non-empty with equal shapes")
    denom = np.sum(t**2)
    if denom == 0:
        raise UndefinedMeasureError("NMSE undefined for all-zero targets")
    return float(np.sum((t - y) ** 2) / denom)


def capacity_columns(outputs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Squared correlation coefficient of matching columns."""
    y = np.asarray(outputs, dtype=float)
    t = np.asarray(targets, dtype=float)
    if y.shape != t.shape:
        raise DimensionError("outputs and targets differ in shape")
    if y.ndim == 1:
        y, t = y[:, None], t[:, None]
    yc = y - y.mean(axis=0)
    tc = t - t.mean(axis=0)
    vy = np.sum(yc**2, axis=0)
    vt = np.sum(tc**2, axis=0)
    if np.any(vy == 0) or np.any(vt == 0):
        raise UndefinedMeasureError("capacity undefined for a constant sequence")
    return np.sum(yc * tc, axis=0) ** 2 / (vy * vt)


def capacity_single(outputs: Sequence[float], targets: Sequence[float]) -> float:
    """``cov^2(y, t) / (var(y) var(t))``."""
    return float(capacity_columns(np.asarray(outputs), np.asarray(targets))[0])


def capacity_sum(per_delay: Mapping[int, float], tau_max: int, start: int = 0) -> float:
    """Sum of ``C(d) - C(tau_max)`` for ``d = start .. tau_max``.

    Subtracting the longest-delay value removes the finite-sample bias of
    the squared correlation. Negative terms are kept.
    """
    missing = [d for d in range(start, tau_max + 1) if d not in per_delay]
    if missing:
        raise DimensionError(f"capacity values missing for delays {missing[:5]}...")
    floor = per_delay[tau_max]
    return float(sum(per_delay[d] - floor for d in range(start, tau_max + 1)))


@dataclass
class EvalReport:
    nmse: float
    capacity_value: float
    outputs: np.ndarray
    targets: np.ndarray
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.outputs) != len(self.targets):
            raise DimensionError("outputs and targets differ in length")

    @classmethod
    def from_predictions(cls, outputs, targets, **extra) -> "EvalReport":
        outputs = np.asarray(outputs, dtype=float)
        targets = np.asarray(targets, dtype=float)
        try:
            cap = capacity_single(outputs, targets)
        except UndefinedMeasureError:
            cap = float("nan")
        return cls(nmse(outputs, targets), cap, outputs, targets, extra)

    def to_json(self, path: str | Path | None = None) -> str:
        payload = json.dumps({"nmse": self.nmse, "capacity": self.capacity_value,
                              "n": len(self.outputs), **self.extra}, indent=2)
        if path is not None:
            Path(path).write_text(payload)
        return payload

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "y", "target"])
            for k, (y, t) in enumerate(zip(self.outputs, self.targets)):
                w.writerow([k, repr(float(y)), repr(float(t))])
        return path


class LinearReadout(BaseEstimator, RegressorMixin):
    """Least-squares readout as a scikit-learn regressor.

    Accepts one or several targets. With ``fit_intercept`` a constant column
    is prepended, so the stored ``weights_`` start with the bias weight.
    """

    def __init__(self, fit_intercept=True, ridge=0.0, rcond=RCOND):
        self.fit_intercept = fit_intercept
        self.ridge = ridge
        self.rcond = rcond

    def _design(self, X):
        return rsv.with_bias(X) if self.fit_intercept else X

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        self.readout_ = train(self._design(X), y, ridge=self.ridge, rcond=self.rcond)
        self.weights_ = self.readout_.weights
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "readout_")
        X = check_array(X)
        return predict(self._design(X), self.readout_)


# --------------------------------------------------------------------------- #
# Output feedback
# --------------------------------------------------------------------------- #


@dataclass
class ClosedLoopResult:
    outputs: np.ndarray
    state: rsv.ReservoirState
    diverged: bool = False
    divergence_step: Optional[int] = None


def closed_loop_generate(system: rsv.ReservoirSystem, w: ReadoutWeights | np.ndarray,
                         teacher_inputs: Sequence[float], switch_step: int, total_steps: int,
                         state: rsv.ReservoirState | None = None,
                         rng: np.random.Generator | None = None,
                         perturbation: np.ndarray | None = None,
                         bound: float = DIVERGENCE_BOUND) -> ClosedLoopResult:
    """Teacher-forced then autonomous generation.

    Step ``k`` injects ``teacher_inputs[k]`` while ``k <= switch_step``; after
    that it injects the previous output clipped to [0, 1]. ``perturbation``
    (one signal row) is added to the signals of step ``switch_step``. Outputs
    leaving ``[-bound, bound]`` stop the run; the remaining entries are NaN.
    """
    W = w.weights if isinstance(w, ReadoutWeights) else np.asarray(w)
    teacher_inputs = np.asarray(teacher_inputs, dtype=float)
    if switch_step > len(teacher_inputs):
        raise DimensionError("switch_step beyond the teacher sequence")
    if W.shape[0] != system.n_signals + 1:
        raise DimensionError("weights do not match the reservoir's signal count")
    outputs = np.full(total_steps, np.nan)
    forced = min(switch_step + 1, total_steps, len(teacher_inputs))
    signals, state = rsv.drive(system, teacher_inputs[:forced], state=state, rng=rng)
    if perturbation is not None and switch_step < forced:
        signals[switch_step] += perturbation
    outputs[:forced] = rsv.with_bias(signals) @ W

    prev = outputs[forced - 1] if forced else 0.0
    for k in range(forced, total_steps):
        if not np.isfinite(prev) or abs(prev) > bound:
            return ClosedLoopResult(outputs, state, True, k - 1)
        state, sig = rsv.step(state, float(np.clip(prev, 0.0, 1.0)), system, rng)
        prev = W[0] + sig.ravel() @ W[1:]
        outputs[k] = prev
    if total_steps and (not np.isfinite(prev) or abs(prev) > bound):
        return ClosedLoopResult(outputs, state, True, total_steps - 1)
    return ClosedLoopResult(outputs, state)
