"""Independent oracles for the closed forms and for the matrix-geometric solver.

``slot_oracle`` replays single slots of the network literally (uniform node
placement, a uniformly chosen active equivalent class, fair contention in each
active cell, broadcast/delivery coin, uniform receiver choice) and counts the
sub-events behind each closed-form probability. Node 0 plays the tagged source
S, node 1 its destination D and nodes 2.. are relays.

``truncated_chain`` is a brute-force stationary solve of the QBD cut at a
finite level, used to check the R / boundary-vector route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import covers, ec_index
from .params import NetworkParams
from .probabilities import compute_table
from .qbd import QbdBlocks


@dataclass(frozen=True)
class OracleCheck:
    name: str
    j: int | None
    analytic: float
    empirical: float
    stderr: float
    trials: int

    @property
    def z(self) -> float:
        if self.stderr == 0.0:
            return 0.0 if self.empirical == self.analytic else math.inf
        return (self.empirical - self.analytic) / self.stderr

    @property
    def passed(self) -> bool:
        return abs(self.z) <= 3.0

    def label(self) -> str:
        return self.name if self.j is None else f"{self.name}({self.j})"


def _binomial_check(name, j, analytic, hits, trials) -> OracleCheck:
    se = math.sqrt(max(analytic * (1.0 - analytic), 0.0) / trials) if trials else math.inf
    return OracleCheck(name, j, float(analytic), hits / trials if trials else math.nan, se, int(trials))


def _sample_slots(params: NetworkParams, rng: np.random.Generator, trials: int):
    n, m, a = params.n, params.m, params.alpha
    cells = rng.integers(0, m * m, size=(trials, n))
    active_ec = rng.integers(0, a * a, size=trials)
    active = ec_index(cells, m, a) == active_ec[:, None]
    key = rng.random((trials, n))
    same = cells[:, :, None] == cells[:, None, :]
    best = np.where(same, key[:, None, :], -1.0).max(axis=2)
    is_tx = active & (key == best)
    broadcast = rng.random((trials, n)) < params.q
    cov = covers(cells[:, :, None], cells[:, None, :], m)
    cov[:, np.arange(n), np.arange(n)] = False
    rkey = np.where(cov, rng.random((trials, n, n)), -1.0)
    receiver = np.where(cov.any(axis=2), rkey.argmax(axis=2), -1)
    delivers_to_d = is_tx & ~broadcast & (receiver == 1)
    return cells, is_tx, broadcast, cov, delivers_to_d


def slot_oracle(params: NetworkParams, trials: int = 1_000_000, seed: int = 0,
                chunk: int = 50_000) -> list[OracleCheck]:
    """Monte-Carlo estimates of p_b, p_c(j), p_r(j), p_0(j) and p_b^+ with 3-sigma verdicts."""
    table = compute_table(params)
    n = params.n
    rng = np.random.default_rng(seed)
    pb_hits = 0
    copies_hist = np.zeros(n + 1, dtype=np.int64)
    p0_hist = np.zeros(n + 1, dtype=np.int64)
    pr_hits = np.zeros(n, dtype=np.int64)
    pbplus_hits = 0
    done = 0
    while done < trials:
        t = min(chunk, trials - done)
        cells, is_tx, broadcast, cov, to_d = _sample_slots(params, rng, t)
        thin = rng.random(t) < table.lambda_prime
        s_bcast = is_tx[:, 0] & broadcast[:, 0]
        copies = 1 + cov[:, 0, 2:].sum(axis=1)
        d_near = cov[:, 0, 1]
        pb_hits += int(s_bcast.sum())
        copies_hist += np.bincount(copies[s_bcast], minlength=n + 1)
        p0_hist += np.bincount(copies[s_bcast & thin & ~d_near], minlength=n + 1)
        # carriers of the requested packet for copy count j: S and relays 2..j
        carriers = np.cumsum(np.concatenate([to_d[:, :1], to_d[:, 2:]], axis=1), axis=1) > 0
        pr_hits[1:] += carriers.sum(axis=0)
        pbplus_hits += int((s_bcast & thin & to_d[:, 2]).sum())
        done += t

    checks = [_binomial_check("p_b", None, table.p_b, pb_hits, trials)]
    for j in range(1, n):
        checks.append(_binomial_check("p_c", j, table.p_c[j - 1], copies_hist[j], pb_hits))
    for j in range(1, n):
        checks.append(_binomial_check("p_r", j, table.p_r[j - 1], pr_hits[j], trials))
    p0_total = int(p0_hist[1:].sum())
    checks.append(_binomial_check("p_0", 0, table.p_0[0], trials - p0_total, trials))
    for j in range(1, n):
        checks.append(_binomial_check("p_0", j, table.p_0[j], p0_hist[j], trials))
    single = table.p_b_plus[1] if n > 2 else 0.0
    checks.append(_binomial_check("p_b_plus", None, single, pbplus_hits, trials))
    return checks


def truncated_chain(blocks: QbdBlocks, levels: int = 60, tol: float = 1e-14,
                    max_squarings: int = 80) -> np.ndarray:
    """Stationary vector of the chain cut at ``levels`` by repeated squaring of Q."""
    P = blocks.generator(levels)
    for _ in range(max_squarings):
        P = P @ P
        P /= P.sum(axis=1, keepdims=True)
        if np.abs(P - P[0]).max() < tol:
            break
    else:
        raise ArithmeticError("truncated chain did not mix")
    return P.mean(axis=0)


def level_mean(pi: np.ndarray, phases: int) -> float:
    levels = np.concatenate([[0], np.repeat(np.arange(1, (pi.size - 1) // phases + 1), phases)])
    return float(levels @ pi)
