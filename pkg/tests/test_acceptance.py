"""Acceptance criteria, one test each, with tolerances pinned below.

Each test records a single PASS/FAIL line; the lines are repeated in the
terminal summary of the pytest run.
"""

import json
import math
import time

import numpy as np
import pytest

from qbdmanet import experiments as ex
from qbdmanet.cli import main
from qbdmanet.metrics import summarize
from qbdmanet.oracles import level_mean, slot_oracle, truncated_chain
from qbdmanet.params import build_params
from qbdmanet.probabilities import compute_table
from qbdmanet.qbd import build_blocks, capacity, expected_delay, level_distribution
from qbdmanet.runner import simulate
from qbdmanet.simulator import World

CAPACITY_TOL = 0.005e-4
IDENTITY_TOL = 1e-10
ORACLE_SIGMAS = 3.0
ORACLE_TRIALS = 1_000_000
CHAIN_TOL = 1e-6
CHAIN_LEVELS = 60
DELAY_REL_TOL = 0.05
SIM_SLOTS = 2_000_000
SIM_WARMUP = 100_000
SIM_REPS = 10
DEPARTURE_SLOTS = 10_000_000
SAFETY_SLOTS = 100_000


def test_1_capacity_reproduction(capsys, verdict):
    cases = [((150, 16, 0.4), 2.37e-4), ((100, 16, 0.2), 3.46e-4), ((100, 8, 0.3), 7.52e-4)]
    details, ok = [], True
    for (n, m, q), target in cases:
        t0 = time.perf_counter()
        code = main(["analyze", "--n", str(n), "--m", str(m), "--q", str(q)])
        elapsed = time.perf_counter() - t0
        mu = json.loads(capsys.readouterr().out)["mu"]
        ok &= code == 0 and abs(mu - target) <= CAPACITY_TOL and elapsed < 1.0
        details.append(f"{mu:.4e} in {elapsed:.2f}s")
    assert verdict(1, "capacity reproduction", ok, ", ".join(details))


def test_2_closed_form_identities(verdict):
    worst = 0.0
    for n in (8, 50, 150):
        for m in (4, 8, 16):
            for q in (0.1, 0.4, 0.9):
                p = build_params(n, m, q).with_load(0.5)
                t = compute_table(p)
                worst = max(worst, abs(math.fsum(t.p_c) - 1), abs(math.fsum(t.p_0) - 1),
                            np.abs(t.p_b_plus + t.p_b_minus + t.p_f_plus + t.p_f_minus - 1).max(),
                            np.abs(t.p_b_plus + t.p_b_minus - p.lam).max())
    assert verdict(2, "closed-form identities", worst <= IDENTITY_TOL, f"max deviation {worst:.1e}")


def test_3_monte_carlo_oracles(verdict):
    t0 = time.perf_counter()
    checks = []
    # (8, 10, delta=0) is the extra case where simultaneous broadcast/reception is possible
    for n, m, delta, seed in ((8, 4, 1.0, 11), (10, 8, 1.0, 12), (8, 10, 0.0, 13)):
        checks += slot_oracle(build_params(n, m, 0.4, delta).with_load(0.6), ORACLE_TRIALS, seed)
    elapsed = time.perf_counter() - t0
    bad = [c.label() for c in checks if abs(c.z) > ORACLE_SIGMAS]
    worst = max(abs(c.z) for c in checks)
    ok = not bad and elapsed < 300
    assert verdict(3, "single-slot oracle equivalence", ok,
                   f"{len(checks) - len(bad)}/{len(checks)} within 3 SE, max |z|={worst:.2f}, {elapsed:.0f}s")


def test_4_qbd_solver_oracle(verdict):
    worst_tv = worst_mean = 0.0
    for m in (4, 8):
        for rho in (0.3, 0.5, 0.7):
            p = build_params(4, m, 0.5).with_load(rho)
            sol = expected_delay(p)
            brute = truncated_chain(build_blocks(compute_table(p)), CHAIN_LEVELS)
            analytic = level_distribution(sol.y0, sol.y1, sol.R, CHAIN_LEVELS)
            worst_tv = max(worst_tv, 0.5 * np.abs(brute - analytic).sum())
            worst_mean = max(worst_mean, abs(level_mean(brute, 3) - sol.L2_bar) / sol.L2_bar)
    ok = worst_tv < CHAIN_TOL and worst_mean < CHAIN_TOL
    assert verdict(4, "QBD solver vs truncated chain", ok,
                   f"TV {worst_tv:.1e}, relative mean {worst_mean:.1e}")


@pytest.mark.slow
def test_5_theory_vs_simulation(verdict):
    scenarios = ex.fig4_mini() + [s for s in ex.fig5_mini() if s.gated]
    t0 = time.perf_counter()
    rows = ex.validate(scenarios, SIM_SLOTS, SIM_WARMUP, SIM_REPS, seed=2024,
                       progress=lambda r: print(r.scenario, r.theory_delay, r.sim_delay, r.ci95))
    elapsed = time.perf_counter() - t0
    passed = sum(bool(r.passed) for r in rows)
    worst = max(r.rel_err for r in rows)
    ok = len(rows) >= 12 and passed == len(rows)
    assert verdict(5, "theory vs simulation delay", ok,
                   f"{passed}/{len(rows)} points, worst rel err {worst:.2%}, {elapsed / 60:.1f} min")


@pytest.mark.slow
def test_6_throughput_plateau(verdict):
    p = build_params(20, 8, 0.3)
    rows = ex.throughput_vs_lambda(p, [0.2, 0.4, 0.6, 0.8, 1.2, 2.0], SIM_SLOTS, SIM_WARMUP,
                                   SIM_REPS, seed=6)
    mu = rows[0]["mu"]
    thr = [r["throughput"] for r in rows]
    rising = all(b > a for a, b in zip(thr[:5], thr[1:5]))
    plateau = all(abs(r["throughput"] - mu) <= r["throughput_ci95"] for r in rows[4:])
    assert verdict(6, "throughput plateau", rising and plateau,
                   "throughput/mu = " + ", ".join(f"{x / mu:.4f}" for x in thr))


def test_7_shape_properties(verdict):
    qs = ex.q_grid(0.005, 0.95, 20)
    ns = (80, 300, 500)
    caps = ex.capacity_vs_q(ns, 16, qs)
    delays = ex.delay_vs_q(ns, 16, 0.5, qs)
    ok = True
    for n in ns:
        ok &= ex.single_turn([r["mu"] for r in caps if r["n"] == n], "peak")
        ok &= ex.single_turn([r["expected_delay_slots"] for r in delays if r["n"] == n], "valley")
    assert verdict(7, "delay U-shaped and capacity unimodal in q", ok, f"n in {ns}, 20-point grid")


@pytest.mark.slow
def test_8_protocol_safety(verdict):
    p = build_params(40, 16, 0.4).with_load(0.7)
    w = World(p, "iid", seed=8, debug=True)
    error = None
    try:
        w.run_slots(SAFETY_SLOTS)
        w.check_invariants()
    except AssertionError as exc:
        error = exc
    delivered = sum(p.deliver_slot is not None for pk in w.packets for p in pk)
    ok = error is None and w.violations == 0 and delivered > 0
    assert verdict(8, "protocol safety", ok,
                   f"{SAFETY_SLOTS} slots, {w.violations} interference violations, "
                   f"{delivered} deliveries" + (f", {error}" if error else ""))


@pytest.mark.slow
def test_9_bernoulli_departures(verdict):
    p = build_params(20, 4, 0.5).with_load(0.5)
    tr = simulate(p, slots=DEPARTURE_SLOTS + 100_000, warmup=0, seed=9, drain=False, trace=True)
    x = tr.departures[100_000:].astype(float)
    N = x.size
    lam = p.lam
    mean_ok = abs(x.mean() - lam) < 3 * math.sqrt(lam * (1 - lam) / N)
    xc = x - x.mean()
    r1 = float(xc[1:] @ xc[:-1] / (xc @ xc))
    lag_ok = abs(r1) < 3 / math.sqrt(N)
    ok = mean_ok and lag_ok
    assert verdict(9, "tagged-source departures are Bernoulli(lambda)", ok,
                   f"mean {x.mean():.4e} vs {lam:.4e}, r1*sqrt(N)={r1 * math.sqrt(N):+.2f}")
