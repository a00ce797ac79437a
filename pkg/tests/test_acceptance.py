"""Acceptance criteria, one test per criterion.

Each test prints a ``PASS Cn`` or ``FAIL Cn`` line; the lines are repeated in
a summary section at the end of the pytest run. Run only this file with
``pytest tests/test_acceptance.py -v``.
"""

import numpy as np
import pytest

from qrc import esn, experiments, runner, tasks
from qrc import reservoir as rsv

pytestmark = pytest.mark.slow

SAMPLES = 20
BASE = dict(n_qubits=5, tau=1.0, J=1.0, h=0.5, virtual_nodes=10)
REFERENCE_LR = {"narma2": 1.7e-5, "narma5": 3.0e-3, "narma10": 2.6e-3, "narma15": 2.7e-3, "narma20": 2.3e-3}


def joint_se(a: tasks.CapacityResult, b: tasks.CapacityResult) -> float:
    return float(np.hypot(a.stderr, b.stderr))


@pytest.fixture(scope="module")
def clean_profile():
    return tasks.capacity_profile(rsv.ReservoirConfig(**BASE), samples=SAMPLES)


class TestCapacityCriteria:
    def test_c1_stm_capacity(self, clean_profile, report):
        """Mean STM capacity of the reference 5-qubit reservoir lies in [15, 25]."""
        stm = clean_profile["stm"]
        report(1, 15 <= stm.mean <= 25, f"C_STM = {stm.mean:.2f} +- {stm.std:.2f} (20 samples), need [15, 25]")

    def test_c2_pc_collapse_at_v1(self, report):
        """With a single virtual node the parity capacity vanishes."""
        pc = tasks.capacity_curve(rsv.ReservoirConfig(**{**BASE, "virtual_nodes": 1}), "pc", samples=SAMPLES)
        report(2, pc.mean < 0.5, f"C_PC(V=1) = {pc.mean:.3f}, need < 0.5")

    def test_c3_pc_saturation_line(self, report):
        """Long evolution and many virtual nodes reach C_PC = 2(N - 2)."""
        parts, ok = [], True
        for n in (4, 5):
            cfg = rsv.ReservoirConfig(**{**BASE, "n_qubits": n, "tau": 128.0, "virtual_nodes": 50})
            pc = tasks.capacity_curve(cfg, "pc", samples=SAMPLES).mean
            line = 2 * (n - 2)
            ok &= abs(pc - line) <= 0.25 * line
            parts.append(f"N={n}: {pc:.2f} vs {line}")
        report(3, ok, "; ".join(parts) + " (tolerance 25%)")

    def test_c7_dephasing_robustness(self, clean_profile, report):
        """Weak z-dephasing leaves both capacities within one joint standard error."""
        cfg = rsv.ReservoirConfig(**BASE, noise=rsv.NoiseSpec(dephasing_rate=1e-3, dephasing_axis="z"))
        noisy = tasks.capacity_profile(cfg, samples=SAMPLES)
        parts, ok = [], True
        for t in ("stm", "pc"):
            diff = abs(noisy[t].mean - clean_profile[t].mean)
            se = joint_se(noisy[t], clean_profile[t])
            ok &= diff <= se
            parts.append(f"{t}: {noisy[t].mean:.3f} vs {clean_profile[t].mean:.3f} (|diff| {diff:.3f}, SE {se:.3f})")
        report(7, ok, "; ".join(parts))


class TestNarmaCriteria:
    def test_c4_lr_baseline(self, report):
        """The two-parameter linear baseline matches the tabulated NMSE within a factor of 2."""
        stream = tasks.narma_suite_stream("sine")
        parts, ok = [], True
        for name, ref in REFERENCE_LR.items():
            val = tasks.linear_regression_baseline(stream.raw_inputs, stream.targets[name], stream.phases).nmse
            ok &= ref / 2 <= val <= ref * 2
            parts.append(f"{name} {val:.2e} (ref {ref:.1e})")
        report(4, ok, ", ".join(parts))

    def test_c5_qr_beats_lr(self, report):
        """A 6-qubit reservoir beats the baseline on all orders for most seeds; V=10 beats V=1."""
        seeds = experiments.seeds_for(0, "narma", SAMPLES)
        wins = 0
        v10 = {k: [] for k in REFERENCE_LR}
        v1 = {k: [] for k in REFERENCE_LR}
        for sd in seeds:
            r10 = experiments.narma_benchmark(rsv.ReservoirConfig(n_qubits=6, tau=1.0, virtual_nodes=10, seed=sd))
            r1 = experiments.narma_benchmark(rsv.ReservoirConfig(n_qubits=6, tau=1.0, virtual_nodes=1, seed=sd))
            wins += all(r10.nmse[k] < r10.baseline[k] for k in REFERENCE_LR)
            for k in REFERENCE_LR:
                v10[k].append(r10.nmse[k])
                v1[k].append(r1.nmse[k])
        ordered = all(np.mean(v10[k]) <= np.mean(v1[k]) for k in REFERENCE_LR)
        means = ", ".join(f"{k} {np.mean(v10[k]):.1e}/{np.mean(v1[k]):.1e}" for k in REFERENCE_LR)
        report(5, wins >= 15 and ordered,
               f"{wins}/20 seeds beat LR on all orders (need 15); mean NMSE V=10/V=1: {means}")


class TestDynamicsCriteria:
    def test_c6_mackey_glass(self, report):
        """Closed-loop prediction of the chaotic series: NMSE < 0.1 and lambda ~ 1e-3 on half the seeds."""
        seeds = experiments.seeds_for(0, "mg", 10)
        good, rows = 0, []
        for sd in seeds:
            cfg = rsv.ReservoirConfig(n_qubits=7, tau=2.0, virtual_nodes=10, washout_steps=1000,
                                      train_steps=10000, eval_steps=2000, seed=sd)
            res = experiments.mackey_glass_prediction(cfg, train_noise=1e-5, tau_mg=17.0)
            good += res.nmse < 0.1 and experiments.lyapunov_order_ok(res.lyapunov)
            rows.append(f"{res.nmse:.2g}/{res.lyapunov:.1e}")
        report(6, good >= 5, f"{good}/10 seeds with NMSE < 0.1 and lambda in [1e-3, 1e-2) "
                             f"(need 5); NMSE/lambda per seed: {', '.join(rows)}")

    def test_c8_timer_scaling(self, report):
        """Timer capacity averaged over 10 systems grows with the number of virtual nodes."""
        seeds = experiments.seeds_for(0, "timer", 10)
        caps = []
        for V in (1, 2, 5, 10):
            vals = [experiments.timer_capacity(rsv.ReservoirConfig(n_qubits=6, tau=1.0, virtual_nodes=V,
                                                                   seed=sd)).capacity for sd in seeds]
            caps.append(float(np.mean(vals)))
        ok = all(a < b for a, b in zip(caps, caps[1:]))
        report(8, ok, "C(V=1, 2, 5, 10) = " + ", ".join(f"{c:.2f}" for c in caps))

    def test_c9_property_suites(self, report):
        """Every invariant group of the self-check passes."""
        rep = runner.validate()
        failed = [c.name for c in rep.checks if not c.passed]
        report(9, rep.passed, f"{len(rep.checks) - len(failed)}/{len(rep.checks)} groups pass"
                              + (f"; failed: {failed}" if failed else ""))


class TestBaselineCriteria:
    def test_c10_esn_parity(self, report):
        """A 50-node ESN at its best radius does not beat the best 5-qubit V=10 reservoir by more than 1 SE."""
        best_qr = None
        for tau in (0.5, 1, 2, 4, 8, 16, 32, 64, 128):
            prof = tasks.capacity_profile(rsv.ReservoirConfig(**{**BASE, "tau": float(tau)}), samples=SAMPLES)
            total = prof["stm"].capacities + prof["pc"].capacities
            if best_qr is None or total.mean() > best_qr[1].mean():
                best_qr = (tau, total)
        best_esn = None
        for case in ("I", "II"):
            res = esn.esn_benchmark("stm+pc", n_nodes=50, samples=SAMPLES, input_case=case)
            vals = res.values[res.best_index]
            if best_esn is None or vals.mean() > best_esn[2].mean():
                best_esn = (case, res.best_radius, vals)
        qr, ev = best_qr[1], best_esn[2]
        se = float(np.hypot(qr.std(ddof=1) / np.sqrt(len(qr)), ev.std(ddof=1) / np.sqrt(len(ev))))
        report(10, ev.mean() - qr.mean() <= se,
               f"ESN case {best_esn[0]} r={best_esn[1]:.2f}: {ev.mean():.2f}; "
               f"QR tau={best_qr[0]}: {qr.mean():.2f}; joint SE {se:.2f}")
