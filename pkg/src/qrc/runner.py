"""Experiment configuration, seeded parameter sweeps, persistence and self-checks.

A sweep is the Cartesian product of the ``grid`` lists; every (cell, sample)
pair is an independent unit whose seed is derived from the master seed and
the unit's coordinates (see :mod:`qrc.seeding`). Units may run in a process
pool; results are reduced in cell/sample order, so the summary does not
depend on scheduling.
"""

from __future__ import annotations

import csv
import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import esn, experiments, qcore, tasks
from . import reservoir as rsv
from .exceptions import DivergenceError, InvariantError, NumericalError, QRCError
from .readout import train
from .seeding import SEED_SCHEME, derive_seed

KINDS = ("capacity", "narma", "timer", "mg", "esn")

RESERVOIR_KEYS = ("n_qubits", "tau", "virtual_nodes", "J", "h", "topology")
NOISE_KEYS = ("dephasing_rate", "dephasing_axis", "dephasing_dt", "observation_sigma")
GRID_KEYS = RESERVOIR_KEYS + NOISE_KEYS + ("spectral_radius", "n_nodes", "input_case", "train_noise")

# Defaults follow the demonstrations being reproduced.
DEFAULTS: dict[str, dict[str, Any]] = {
    "capacity": {"n_qubits": 5, "tau": 1.0, "virtual_nodes": 10, "tasks": ["stm", "pc"], "tau_max": 500},
    "narma": {"n_qubits": 6, "tau": 1.0, "virtual_nodes": 10, "input_kind": "sine"},
    "timer": {"n_qubits": 6, "tau": 1.0, "virtual_nodes": 10, "n_train": 5, "n_eval": 5,
              "tau_timer_max": 300},
    "mg": {"n_qubits": 7, "tau": 2.0, "virtual_nodes": 10, "train_noise": 1e-5, "tau_mg": 17.0,
           "washout_steps": 1000, "train_steps": 10000, "eval_steps": 2000},
    "esn": {"n_nodes": 50, "spectral_radius": list(esn.RADIUS_GRID), "input_case": "II",
            "tasks": ["stm", "pc"], "tau_max": 500},
}


class ConfigError(QRCError, ValueError):
    """Unreadable or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    """What to run.

    ``grid`` maps parameter names to lists of values (scalars are promoted
    to one-element lists); ``params`` holds fixed settings of the
    experiment kind.
    """

    kind: str
    grid: dict[str, list] = field(default_factory=dict)
    params: dict[str, Any] = field(default_factory=dict)
    samples: int = 20
    seed: int = 0
    out: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        merged = dict(DEFAULTS[self.kind])
        merged.update(self.params)
        grid = {}
        for key, val in merged.items():
            if key in GRID_KEYS:
                grid[key] = val
        grid.update(self.grid)
        self.params = {k: v for k, v in merged.items() if k not in GRID_KEYS}
        self.grid = {}
        for key, val in grid.items():
            if key not in GRID_KEYS:
                raise ConfigError(f"{key!r} cannot be swept; sweepable keys: {GRID_KEYS}")
            vals = list(val) if isinstance(val, (list, tuple)) else [val]
            if not vals:
                raise ConfigError(f"grid entry {key!r} is empty")
            self.grid[key] = vals

    def cells(self) -> list[dict[str, Any]]:
        keys = [k for k in GRID_KEYS if k in self.grid]
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.grid[k] for k in keys))]

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "grid": self.grid, "params": self.params,
                "samples": self.samples, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        unknown = set(d) - {"kind", "grid", "params", "samples", "seed", "out"}
        if unknown:
            raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
        if "kind" not in d:
            raise ConfigError("missing 'kind'")
        return cls(d["kind"], dict(d.get("grid", {})), dict(d.get("params", {})),
                   int(d.get("samples", 20)), int(d.get("seed", 0)), d.get("out"))


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a JSON config; syntax errors report line and column."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1:1: top level must be an object")
    return ExperimentConfig.from_dict(data)


@dataclass
class ResultRecord:
    cell: dict[str, Any]
    metrics: dict[str, list[float]]
    seeds: list[int]
    failures: list[dict[str, Any]] = field(default_factory=list)
    wall_time: float = 0.0
    curves: dict[str, list[list[float]]] = field(default_factory=dict)

    def mean(self, name: str) -> float:
        vals = np.asarray(self.metrics[name], dtype=float)
        vals = vals[np.isfinite(vals)]
        return float(vals.mean()) if vals.size else float("nan")

    def std(self, name: str) -> float:
        vals = np.asarray(self.metrics[name], dtype=float)
        vals = vals[np.isfinite(vals)]
        return float(vals.std(ddof=1)) if vals.size > 1 else 0.0

    def summary(self) -> dict[str, Any]:
        return {
            "cell": self.cell,
            "seeds": self.seeds,
            "n_samples": len(self.seeds),
            "n_failed": len(self.failures),
            "failures": self.failures,
            "metrics": {k: {"samples": v, "mean": self.mean(k), "std": self.std(k)}
                        for k, v in self.metrics.items()},
        }


# --------------------------------------------------------------------------- #
# Units of work
# --------------------------------------------------------------------------- #


def _reservoir_config(cell: dict, params: dict, seed: int,
                      phases: tuple[int, int, int] = (1000, 3000, 1000)) -> rsv.ReservoirConfig:
    noise = rsv.NoiseSpec(**{k: cell[k] for k in NOISE_KEYS if k in cell})
    res = {k: cell[k] for k in RESERVOIR_KEYS if k in cell}
    w = params.get("washout_steps", phases[0])
    t = params.get("train_steps", phases[1])
    e = params.get("eval_steps", phases[2])
    return rsv.ReservoirConfig(**res, noise=noise, washout_steps=w, train_steps=t, eval_steps=e, seed=seed)


def _unit_capacity(cell, params, seed):
    cfg = _reservoir_config(cell, params, seed)
    curves = tasks.capacity_sample(cfg, params["tasks"], params["tau_max"])
    return ({f"C_{t}": tasks.summed_capacity(c, t) for t, c in curves.items()},
            {t: c.tolist() for t, c in curves.items()})


def _unit_narma(cell, params, seed):
    res = experiments.narma_benchmark(_reservoir_config(cell, params, seed), params["input_kind"])
    metrics = {f"nmse_{k}": v for k, v in res.nmse.items()}
    metrics.update({f"lr_nmse_{k}": v for k, v in res.baseline.items()})
    return metrics, {}


def _unit_timer(cell, params, seed):
    res = experiments.timer_capacity(_reservoir_config(cell, params, seed), params["n_train"],
                                     params["n_eval"], params["tau_timer_max"])
    return {"C_timer": res.capacity}, {"timer": res.per_delay.tolist()}


def _unit_mg(cell, params, seed):
    cfg = _reservoir_config(cell, params, seed)
    res = experiments.mackey_glass_prediction(cfg, cell.get("train_noise", params.get("train_noise", 1e-5)),
                                              params["tau_mg"])
    if res.diverged:
        raise DivergenceError("closed-loop output left [-10, 10]")
    return {"nmse": res.nmse, "lyapunov": res.lyapunov, "tracking_steps": float(res.tracking_steps)}, {}


def _unit_esn(cell, params, seed):
    system = esn.esn_build(int(cell["n_nodes"]), float(cell["spectral_radius"]), cell["input_case"], seed)
    s = tasks.binary_stream(sum(tasks.CAPACITY_PHASES), np.random.default_rng(derive_seed(seed, "input")))
    design = rsv.with_bias(esn.esn_run(system, s))
    curves = {t: tasks.delay_capacities(design, s, tasks.CAPACITY_PHASES, t, params["tau_max"])
              for t in params["tasks"]}
    return ({f"C_{t}": tasks.summed_capacity(c, t) for t, c in curves.items()},
            {t: c.tolist() for t, c in curves.items()})


UNITS: dict[str, Callable] = {
    "capacity": _unit_capacity, "narma": _unit_narma, "timer": _unit_timer,
    "mg": _unit_mg, "esn": _unit_esn,
}


def _run_unit(args):
    kind, cell, params, seed = args
    t0 = time.perf_counter()
    try:
        metrics, curves = UNITS[kind](cell, params, seed)
        return {"ok": True, "metrics": metrics, "curves": curves, "time": time.perf_counter() - t0}
    except (DivergenceError, NumericalError, InvariantError) as exc:
        return {"ok": False, "error": f"{type(exc).__name__}: {exc}", "time": time.perf_counter() - t0}


def unit_seed(config: ExperimentConfig, cell: dict, sample: int) -> int:
    return derive_seed(config.seed, config.kind, cell, sample)


def run_sweep(config: ExperimentConfig, threads: int = 1) -> list[ResultRecord]:
    cells = config.cells()
    jobs = [(config.kind, cell, config.params, unit_seed(config, cell, j))
            for cell in cells for j in range(config.samples)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_unit, jobs))
    else:
        results = [_run_unit(j) for j in jobs]

    records = []
    for ci, cell in enumerate(cells):
        chunk = results[ci * config.samples:(ci + 1) * config.samples]
        seeds = [jobs[ci * config.samples + j][3] for j in range(config.samples)]
        names = sorted({k for r in chunk if r["ok"] for k in r["metrics"]})
        metrics = {n: [r["metrics"][n] if r["ok"] else float("nan") for r in chunk] for n in names}
        curve_names = sorted({k for r in chunk if r["ok"] for k in r["curves"]})
        curves = {n: [r["curves"][n] for r in chunk if r["ok"]] for n in curve_names}
        failures = [{"sample": j, "seed": seeds[j], "error": r["error"]} for j, r in enumerate(chunk) if not r["ok"]]
        records.append(ResultRecord(cell, metrics, seeds, failures, sum(r["time"] for r in chunk), curves))
    return records


# --------------------------------------------------------------------------- #
# Persistence
# --------------------------------------------------------------------------- #


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def write_results(config: ExperimentConfig, records: list[ResultRecord], out: str | Path) -> dict[str, Path]:
    """``summary.json`` (deterministic), ``curve.csv``, ``timing.json`` and, for
    capacity-type runs, ``delays.csv``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"config": config.to_dict(), "seed_scheme": SEED_SCHEME,
               "records": [r.summary() for r in records]}
    paths = {"summary": out / "summary.json", "curve": out / "curve.csv", "timing": out / "timing.json"}
    paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default))
    paths["timing"].write_text(json.dumps([{"cell": r.cell, "wall_time": r.wall_time} for r in records],
                                          indent=2, default=_json_default))

    keys = list(records[0].cell) if records else []
    names = sorted({n for r in records for n in r.metrics})
    with paths["curve"].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys + [f"{n}_{s}" for n in names for s in ("mean", "std")] + ["n_failed"])
        for r in records:
            row = [r.cell[k] for k in keys]
            for n in names:
                row += [r.mean(n), r.std(n)] if n in r.metrics else ["", ""]
            w.writerow(row + [len(r.failures)])

    if any(r.curves for r in records):
        paths["delays"] = out / "delays.csv"
        with paths["delays"].open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(keys + ["task", "delay", "C_mean", "C_std"])
            for r in records:
                for name, rows in r.curves.items():
                    arr = np.asarray(rows, dtype=float)
                    if arr.size == 0:
                        continue
                    if name in tasks.CAPACITY_START:
                        arr = arr - arr[:, -1:]
                    std = arr.std(axis=0, ddof=1) if len(arr) > 1 else np.zeros(arr.shape[1])
                    for d in range(arr.shape[1]):
                        w.writerow([r.cell[k] for k in keys] + [name, d, arr[:, d].mean(), std[d]])
    return paths


def dump_signals(config: ExperimentConfig, out: str | Path) -> Path:
    """Signal matrix of the first cell's first sample, written as ``signals.csv``."""
    cell = config.cells()[0]
    seed = unit_seed(config, cell, 0)
    path = Path(out) / "signals.csv"
    if config.kind == "esn":
        system = esn.esn_build(int(cell["n_nodes"]), float(cell["spectral_radius"]), cell["input_case"], seed)
        s = tasks.binary_stream(sum(tasks.CAPACITY_PHASES), np.random.default_rng(derive_seed(seed, "input")))
        data = rsv.with_bias(esn.esn_run(system, s))
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bias"] + [f"x{i + 1}" for i in range(system.n_nodes)])
            w.writerows(data.tolist())
        return path
    cfg = _reservoir_config(cell, config.params, seed)
    ham_rng, noise_rng, in_rng = tasks.sample_rngs(seed)
    if config.kind == "capacity":
        inputs = tasks.binary_stream(cfg.total_steps, in_rng)
    elif config.kind == "narma":
        inputs = tasks.narma_suite_stream(config.params["input_kind"], cfg.total_steps, cfg.phases, in_rng).inputs
    elif config.kind == "timer":
        inputs = tasks.timer_stream().inputs
        cfg = rsv.ReservoirConfig(**{**asdict(cfg), "noise": cfg.noise, "washout_steps": tasks.TIMER_DISCARD,
                                     "train_steps": len(inputs) - tasks.TIMER_DISCARD, "eval_steps": 0})
    else:
        inputs = tasks.mackey_glass_stream(config.params["tau_mg"], cfg.phases).inputs
    system = rsv.ReservoirSystem.from_config(cfg, ham_rng)
    signals, _ = rsv.drive(system, inputs[:cfg.total_steps], rng=noise_rng)
    sm = rsv.SignalMatrix(rsv.with_bias(signals), system.n_qubits, system.virtual_nodes, cfg.phases,
                          {"config": cfg.to_dict(), "seed": seed})
    return sm.to_csv(path)


def run_experiment(config: ExperimentConfig, out: str | Path | None = None, threads: int = 1,
                   signals: bool = False) -> dict[str, Path]:
    out = out or config.out or f"results/{config.kind}"
    records = run_sweep(config, threads)
    paths = write_results(config, records, out)
    if signals:
        paths["signals"] = dump_signals(config, out)
    return paths


# --------------------------------------------------------------------------- #
# Self-checks
# --------------------------------------------------------------------------- #


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class ValidationReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        return [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}" for c in self.checks]


def _check_cptp(corrupt: Optional[str], n_steps: int = 10_000) -> str:
    rng = np.random.default_rng(1)
    settings = [(0.0, "z"), (0.05, "z"), (0.05, "x"), (0.5, "z")]
    per = n_steps // len(settings)
    done = 0
    for gamma, axis in settings:
        H = qcore.build_hamiltonian(3, 1.0, 0.5, rng=rng)
        system = rsv.ReservoirSystem(H, 1.0, 2, rsv.NoiseSpec(gamma, axis))
        state = rsv.ReservoirState(qcore.random_density_matrix(3, rng))
        for _ in range(per):
            state, _ = rsv.step(state, rng.uniform(), system, engine="reference")
            rho = state.rho
            if corrupt == "trace":
                rho = rho * (1.0 + 1e-6)
            qcore.check_density_matrix(rho)
            done += 1
    return f"{done} random steps preserved hermiticity, trace and positivity"


def _check_unitarity(corrupt=None) -> str:
    rng = np.random.default_rng(2)
    worst = 0.0
    for n in (1, 2, 3, 5):
        H = qcore.build_hamiltonian(n, 1.0, 0.5, rng=rng)
        for dt in (0.0, 0.1, 1.0, 37.5, 128.0):
            worst = max(worst, qcore.unitarity_error(qcore.propagator(H, dt).matrix))
    if worst > 1e-9:
        raise InvariantError("unitarity", f"max |UU^H - I| = {worst:.3e}")
    return f"max |UU^H - I| = {worst:.1e}"


def _check_operator_space(corrupt=None) -> str:
    H = qcore.build_hamiltonian(2, 1.0, 0.5, rng=np.random.default_rng(3))
    T = qcore.pauli_transfer_matrix(qcore.propagator(H, 1.0).matrix)
    err = float(np.max(np.abs(T @ T.T - np.eye(len(T)))))
    if err > 1e-8:
        raise InvariantError("operator-space orthogonality", f"max |TT^T - I| = {err:.3e}")
    return f"N=2 transfer matrix orthogonal, max |TT^T - I| = {err:.1e}"


CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def _check_nonlinearity(corrupt=None) -> str:
    grid = (0.0, 0.25, 0.5, 0.75, 1.0)
    worst = 0.0
    for s1 in grid:
        for s2 in grid:
            rho = np.kron(qcore.input_state(s1), qcore.input_state(s2))
            z_out = qcore.expect_z(qcore.apply_unitary(rho, CNOT), 1)
            worst = max(worst, abs(z_out - (1 - 2 * s1) * (1 - 2 * s2)))
    if worst > 1e-12:
        raise InvariantError("nonlinearity identity", f"max deviation {worst:.3e}")
    return f"<Z_out> = (1-2 s1)(1-2 s2) on 5x5 grid, max deviation {worst:.1e}"


def _check_pseudoinverse(corrupt=None) -> str:
    rng = np.random.default_rng(4)
    X = rsv.with_bias(rng.uniform(size=(200, 12)))
    y = rng.normal(size=200)
    w = train(X, y)
    base = np.mean((X @ w.weights - y) ** 2)
    for _ in range(50):
        d = rng.normal(scale=10.0 ** rng.uniform(-6, 0), size=w.weights.shape)
        if np.mean((X @ (w.weights + d) - y) ** 2) < base - 1e-15:
            raise InvariantError("pseudoinverse optimality", "a perturbed weight vector has lower residual")
    if abs(base - w.training_residual) > 1e-12:
        raise InvariantError("pseudoinverse optimality", "training residual mismatch")
    return "50 perturbations never lowered the training residual"


def _check_dephasing(corrupt=None) -> str:
    rng = np.random.default_rng(5)
    n = 3
    diag = np.diag(rng.dirichlet(np.ones(1 << n))).astype(complex)
    plus = np.full((1 << n, 1 << n), 1.0 / (1 << n), dtype=complex)
    mixed = qcore.maximally_mixed(n)
    checks = [(diag, "z"), (plus, "x"), (mixed, "z"), (mixed, "x")]
    worst = max(float(np.max(np.abs(qcore.dephase(r, 0.7, 0.3, ax) - r))) for r, ax in checks)
    if worst > 1e-12:
        raise InvariantError("dephasing fixed points", f"max change {worst:.3e}")
    return f"diagonal/|+>/mixed states fixed, max change {worst:.1e}"


def _check_task_fixed_points(corrupt=None) -> str:
    y = np.zeros(101)
    for k in range(100):
        y[k + 1] = tasks.narma2_step(y[k], y[k - 1] if k else 0.0, 0.0)
    target = (0.6 - np.sqrt(0.2)) / 0.8
    if abs(y[-1] - target) > 1e-9:
        raise InvariantError("NARMA fixed point", f"{y[-1]} != {target}")
    delay = 170
    series = tasks.mackey_glass_series(17.0, 50, washout=0, history=np.ones(delay + 1))
    if np.max(np.abs(series - 1.0)) > 1e-12:
        raise InvariantError("MG fixed point", "constant-1 history drifted")
    return f"NARMA2 -> {y[-1]:.6f}, MG y*=1 stationary"


def _check_lyapunov(corrupt=None) -> str:
    lam, n, win = 0.003, 600, 17
    k = np.arange(n)
    ref = np.sin(0.37 * k)
    pert = ref + 1e-6 * np.exp(lam * k)
    est = tasks.lyapunov_estimate(ref, pert, win, 500)
    if abs(est - lam) > 1e-9:
        raise InvariantError("Lyapunov estimator", f"estimate {est} != {lam}")
    return f"synthetic lambda=0.003 recovered as {est:.12f}"


CHECKS: dict[str, Callable[[Optional[str]], str]] = {
    "cptp": _check_cptp,
    "unitarity": _check_unitarity,
    "operator_space": _check_operator_space,
    "nonlinearity_identity": _check_nonlinearity,
    "pseudoinverse": _check_pseudoinverse,
    "dephasing_fixed_points": _check_dephasing,
    "task_fixed_points": _check_task_fixed_points,
    "lyapunov": _check_lyapunov,
}


def validate(corrupt: Optional[str] = None, groups: Optional[list[str]] = None) -> ValidationReport:
    """Run the invariant groups; ``corrupt="trace"`` injects a trace fault."""
    results = []
    for name, fn in CHECKS.items():
        if groups and name not in groups:
            continue
        try:
            results.append(CheckResult(name, True, fn(corrupt)))
        except InvariantError as exc:
            results.append(CheckResult(name, False, f"violated {exc}"))
    return ValidationReport(results)
