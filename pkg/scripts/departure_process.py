#!/usr/bin/env python3
"""Statistics of the tagged source's departure indicator over a long run.

Checks the mean against lambda, the lag-1..5 autocorrelations against zero,
and the correlation between a departure and the source-queue length at the
start of the *following* slot (past departures should carry no information
about the current backlog).
"""

import argparse
import math

import numpy as np

from qbdmanet.params import build_params
from qbdmanet.runner import simulate


def batch_se(x, batches=100):
    means = x[: x.size // batches * batches].reshape(batches, -1).mean(axis=1)
    return means.std(ddof=1) / math.sqrt(batches)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--m", type=int, default=4)
    ap.add_argument("--q", type=float, default=0.5)
    ap.add_argument("--rho", type=float, default=0.5)
    ap.add_argument("--slots", type=int, default=10_000_000)
    ap.add_argument("--discard", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=9)
    args = ap.parse_args()
    p = build_params(args.n, args.m, args.q).with_load(args.rho)
    tr = simulate(p, slots=args.slots + args.discard, warmup=0, seed=args.seed, drain=False, trace=True)
    x = tr.departures[args.discard:].astype(float)
    ql = tr.source_queue[args.discard:].astype(float)
    N = x.size
    print(f"lambda={p.lam:.5e} mean={x.mean():.5e} z={(x.mean() - p.lam) / math.sqrt(p.lam * (1 - p.lam) / N):+.2f}")
    xc = x - x.mean()
    for lag in range(1, 6):
        r = xc[lag:] @ xc[:-lag] / (xc @ xc)
        print(f"lag {lag}: r*sqrt(N) = {r * math.sqrt(N):+.2f}")
    prod = (x[:-1] - x.mean()) * (ql[1:] - ql.mean())
    corr = prod.mean() / (x.std() * ql.std())
    print(f"corr(departure_t, queue_t+1) = {corr:+.2e} (batch-means SE {batch_se(prod) / (x.std() * ql.std()):.1e})")


if __name__ == "__main__":
    main()
