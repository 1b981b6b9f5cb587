#!/usr/bin/env python3
"""Simulated per-node throughput as lambda sweeps past capacity (n=20, m=8, q=0.3)."""

import argparse
from pathlib import Path

from qbdmanet.experiments import throughput_vs_lambda, write_rows
from qbdmanet.params import build_params


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--m", type=int, default=8)
    ap.add_argument("--q", type=float, default=0.3)
    ap.add_argument("--loads", default="0.2,0.4,0.6,0.8,1.0,1.2,1.5,2.0")
    ap.add_argument("--slots", type=int, default=2_000_000)
    ap.add_argument("--warmup", type=int, default=100_000)
    ap.add_argument("--replications", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("results/throughput_vs_lambda.csv"))
    args = ap.parse_args()
    loads = [float(x) for x in args.loads.split(",")]
    rows = throughput_vs_lambda(build_params(args.n, args.m, args.q), loads, args.slots,
                                args.warmup, args.replications, args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_rows(rows, args.out)
    for r in rows:
        print(f"lambda={r['rho']:.2f} mu  throughput={r['throughput'] / r['mu']:.4f} mu "
              f"(+/- {r['throughput_ci95'] / r['mu']:.4f})")


if __name__ == "__main__":
    main()
