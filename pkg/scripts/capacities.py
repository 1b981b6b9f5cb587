#!/usr/bin/env python3
"""Per-node capacity for the three reference scenarios, plus a delay-vs-load table."""

import argparse

import numpy as np

from qbdmanet.experiments import delay_vs_rho
from qbdmanet.params import build_params
from qbdmanet.qbd import capacity

SCENARIOS = [(150, 16, 0.4), (100, 16, 0.2), (100, 8, 0.3)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rho", default="0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    args = ap.parse_args()
    rhos = [float(x) for x in args.rho.split(",")]
    for n, m, q in SCENARIOS:
        mu, mu_s, mu_d = capacity(build_params(n, m, q))
        print(f"n={n:<4} m={m:<3} q={q:<4} mu={mu:.4e}  (source {mu_s:.3e}, network {mu_d:.3e})")
        rows = delay_vs_rho(n, m, q, rhos)
        print("    rho:   " + "  ".join(f"{r['rho']:>8.2f}" for r in rows))
        print("    E(Te): " + "  ".join(f"{r['expected_delay_slots']:>8.0f}" for r in rows))
        assert np.all(np.diff([r["expected_delay_slots"] for r in rows]) > 0)


if __name__ == "__main__":
    main()
