"""Acceptance criteria 1-12, each at its stated tolerance and runtime budget.

Every test records one PASS/FAIL line; the lines are printed in the terminal
summary (see conftest.py) and, with ``-s``, as each criterion finishes.
"""

import math
import time

import numpy as np
import pytest

from sbmkit.bernstein import BernsteinFamily, SubordinatorModel, check_condition_2_5
from sbmkit.cli import main
from sbmkit.domains import ball, make_domain
from sbmkit.estimators import exit_time_envelopes, poisson_kernel_report, verify_bhp, verify_harnack
from sbmkit.fluctuation1d import LadderData
from sbmkit.kernels import (KernelEvaluator, check_asymptotics, check_regvar_inequalities, green_free,
                            jump_kernel, stable_green, stable_jump)
from sbmkit.martin import MartinProbe, martin_limit_report, oscillation_decay, stable_ball_green
from sbmkit.simulate import PathConfig, simulate_paths

from conftest import FAMILIES, family, model

RESULTS = []

pytestmark = pytest.mark.acceptance


class Criterion:
    """Times a block and records its verdict, including the runtime budget."""

    def __init__(self, number, budget, title):
        self.number, self.budget, self.title = number, budget, title
        self.checks = []

    def check(self, ok, what):
        self.checks.append((bool(ok), what))

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        if exc_type is not None:
            self.checks.append((False, f"error: {exc_type.__name__}: {exc}"))
        self.check(elapsed < self.budget, f"runtime {elapsed:.1f}s < {self.budget:g}s")
        ok = all(c for c, _ in self.checks)
        line = f"criterion {self.number:2d} {'PASS' if ok else 'FAIL'}  {self.title}  ({elapsed:.1f}s)"
        detail = [("    " if c else "  X ") + w for c, w in self.checks]
        RESULTS.append(line)
        RESULTS.extend(detail)
        line = "\n".join([line] + detail)
        print("\n" + line, flush=True)
        if exc_type is None:
            assert ok, line
        return False


def test_criterion_01_special_identity():
    lam = np.logspace(-3, 6, 46)
    with Criterion(1, 30, "chi rho / lambda = 1 on [1e-3, 1e6]") as c:
        for name in FAMILIES:
            lad = LadderData(family(name))
            dev = np.abs(lad.chi(lam) * lad.rho(lam) / lam - 1)
            c.check(dev.max() < 1e-4, f"{name} max deviation {dev.max():.2e}")


def test_criterion_02_ladder_asymptotics():
    with Criterion(2, 10, "chi ~ lambda^(alpha/2) ell(lambda^2)^(1/2) at 1e8") as c:
        eligible = [n for n in FAMILIES if check_condition_2_5(family(n)).passed]
        c.check(len(eligible) > 0, "some family satisfies the envelope condition")
        for name in eligible:
            lad = LadderData(family(name))
            err = abs(lad.chi(1e8) / lad.chi_asymptotic(1e8) - 1)
            c.check(err < 1e-2, f"{name} relative error {err:.2e}")


def test_criterion_03_stable_oracles():
    with Criterion(3, 5, "stable Green and jump oracles, power-law scaling") as c:
        ke = KernelEvaluator(model("stable"), 3)
        g1 = float(green_free(ke, np.array([1.0, 0, 0])))
        j1 = float(jump_kernel(ke, 1.0))
        c.check(abs(g1 - 1 / (2 * math.pi**2)) < 1e-6, f"G(1) = {g1!r}")
        c.check(abs(j1 - 1 / math.pi**2) < 1e-6, f"J(1) = {j1!r}")
        for alpha, d in [(1.0, 3), (0.5, 2), (1.5, 3), (1.2, 1)]:
            r = np.logspace(-4, 2, 13)
            for name, fn, p in (("G", stable_green, alpha - d), ("J", stable_jump, -alpha - d)):
                if name == "G" and d <= alpha:
                    continue
                v = fn(alpha, d, r)
                err = np.max(np.abs(v / (fn(alpha, d, 1.0) * r**p) - 1))
                c.check(err < 1e-8, f"{name} scaling alpha={alpha} d={d}: {err:.1e}")
        # the numerical subordination route reproduces the power law
        r = np.array([1e-3, 1e-1, 1.0, 10.0])
        rel = np.abs(ke.green(r) / stable_green(1.0, 3, r) - 1).max()
        c.check(rel < 1e-8, f"subordination route vs closed form {rel:.1e}")


def test_criterion_04_asymptotic_constants():
    with Criterion(4, 60, "Green/jump ratios within 2% at 1e-3, monotone") as c:
        for name in ("mixture", "relativistic"):
            rep = check_asymptotics(KernelEvaluator(model(name), 3))
            for w in ("green", "jump"):
                e = rep.details[w]
                c.check(e["within_band"] and e["monotone"],
                        f"{name} {w} ratios {np.round(e['ratios'], 5).tolist()}")


def test_criterion_05_regvar():
    with Criterion(5, 60, "eight regular-variation inequalities, stable constants") as c:
        for name in FAMILIES:
            rep = check_regvar_inequalities(family(name))
            worst = max(rep.details["refinement_change"].values())
            c.check(rep.passed, f"{name} r4={rep.constants['r4']:g} worst refinement change {worst:.2e}")


def test_criterion_06_exit_time():
    n = 100_000
    with Criterion(6, 300, "E_0 tau = 1/2 for the Cauchy process in the unit 3-ball") as c:
        b = simulate_paths(model("stable"), ball(3), np.zeros((n, 3)), PathConfig(dt=5e-5, seed=0), coupled=True)
        coarse, fine = b.exit_time_coarse, b.exit_time
        m = coarse.mean()
        se = coarse.std(ddof=1) / math.sqrt(n)
        c.check(abs(m - 0.5) <= max(3 * se, 0.005), f"dt=1e-4: {m:.5f} +- {se:.5f}")
        shift = fine.mean() - m
        c.check(abs(shift) < se, f"dt-halving shift {shift:+.5f} vs SE {se:.5f}")


def test_criterion_07_exit_envelopes():
    with Criterion(7, 600, "exit-time envelope constants without trend in r") as c:
        for name in ("stable", "mixture"):
            rep = exit_time_envelopes(model(name), 3, PathConfig(dt=1e-3, seed=0), 10_000)
            k = rep.constants
            c.check(rep.passed and min(k["C_low"]) > 0,
                    f"{name} C_low {np.round(k['C_low'], 3).tolist()} C_up {np.round(k['C_up'], 3).tolist()}")


def test_criterion_08_poisson_kernel():
    with Criterion(8, 600, "jump-exit histogram vs Levy-system form, P2 fit") as c:
        rep = poisson_kernel_report(model("stable"), N=100_000, cfg=PathConfig(dt=1e-3, seed=0))
        z = np.abs(rep.details["diff"]) / rep.details["diff_se"]
        c.check(np.all(z <= 3), f"cell z-scores {np.round(z, 2).tolist()}")
        c.check(rep.constants["C2_fit"] > 0, f"C2 fit {rep.constants['C2_fit']:.3g}")


def test_criterion_09_harnack():
    r = 2.0 ** -np.arange(2, 7)
    with Criterion(9, 900, "Harnack ratio slope within [-0.1, 0.1]") as c:
        for name in ("stable", "mixture"):
            for d in (2, 3):
                rep = verify_harnack(model(name), r, None, 4000, d=d, cfg=PathConfig(dt=1e-3, seed=0))
                c.check(rep.passed, f"{name} d={d} slope {rep.constants['slope']:+.3f} "
                                    f"max ratio {rep.constants['max_ratio']:.2f}")


def test_criterion_10_bhp():
    m = SubordinatorModel(BernsteinFamily("mixture", 1.0, 0.5))
    cfg = PathConfig(dt=1e-3, seed=0)
    with Criterion(10, 1800, "boundary Harnack constant without upward trend") as c:
        for kind in ("ball", "lshape", "twoballs"):
            for d in (2, 3):
                dom = make_domain(kind, d)
                rep = verify_bhp(m, dom, N=2000, cfg=cfg)
                C = rep.constants["C_emp"][0]
                c.check(rep.passed, f"{kind} d={d} C_emp {np.round(C, 3).tolist()} slope {rep.constants['slope'][0]:+.3f}")
            same = verify_bhp(m, make_domain(kind, 2), N=500, cfg=cfg, same_patch=True)
            c.check(np.all(np.array(same.constants["C_emp"]) == 1.0), f"{kind} u = v gives C_emp = 1")


def test_criterion_11_martin():
    x0 = np.zeros(3)
    z = np.array([1.0, 0, 0])
    xg = np.array([[0.0, 0.5, 0], [-0.5, 0, 0], [0.3, 0.3, 0.3]])
    probe = MartinProbe.geometric(ball(3), z, x0, xg, levels=6)
    oracle = lambda x, y: stable_ball_green(1.0, 3, 1.0, x, y) / stable_ball_green(1.0, 3, 1.0, x0, y)
    cfg = PathConfig(dt=1e-3, seed=0)
    with Criterion(11, 900, "Martin kernel Cauchy limit, ball oracle, oscillation exponent") as c:
        rep = martin_limit_report(probe, model("stable"), cfg, N=20_000, oracle=oracle)
        k = rep.constants
        c.check(rep.passed, f"last difference {k['last_difference']:.2e}, max oracle z {k['max_oracle_z']:.2f}")
        osc = oscillation_decay(probe, model("stable"), cfg, N=20_000)
        c.check(osc.passed and osc.constants["beta_hat"] > 0,
                f"beta_hat {osc.constants['beta_hat']:.3f} +- {osc.constants['beta_se']:.3f}")


def test_criterion_12_determinism(tmp_path):
    runs = [["simulate", "--family", "mixture", "--beta", "0.5", "--paths", "2000", "--dt", "1e-3", "--seed", "3"],
            ["verify", "harnack", "--paths-per-point", "300", "--d", "2", "--r-grid", "0.25,0.125", "--seed", "5"],
            ["verify", "special-identity", "--family", "logpos", "--beta", "0.5"]]
    with Criterion(12, 120, "repeated runs give byte-identical JSON") as c:
        for k, argv in enumerate(runs):
            rep = tmp_path / f"r{k}.json"
            blobs = []
            for _ in range(2):
                main(argv + ["--workers", "1", "--report", str(rep)])
                blobs.append(rep.read_bytes())
            c.check(blobs[0] == blobs[1] and len(blobs[0]) > 0, " ".join(argv[:2]))
