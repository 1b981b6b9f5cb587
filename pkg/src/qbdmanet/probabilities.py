"""Closed-form one-slot probabilities for the tagged flow S -> D under i.i.d. mobility.

Every array indexed by copy count ``j`` runs over ``j = 1 .. n-1`` (array
position ``j - 1``), except ``p_0`` which runs over ``j = 0 .. n-1``.

Powers such as ((m^2-9)/m^2)^(n-1-j) are multiplied with very large binomials
and powers of 9, so the j-indexed quantities are assembled in the log domain.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special, stats

from .params import NetworkParams

LOG8_9 = math.log(8.0 / 9.0)
CLAMP_TOL = 1e-12


class StabilityError(ValueError):
    """Arrival rate at or above a service rate the computation needs."""


def f(x: int) -> float:
    """(9**x - 8**x) / x."""
    if int(x) != x or x < 1:
        raise ValueError(f"f(x) needs a positive integer, got {x}")
    x = int(x)
    if x <= 15:
        return (9**x - 8**x) / x
    if x >= 323:
        raise OverflowError(f"f({x}) exceeds the float range")
    return 9.0**x * -math.expm1(x * LOG8_9) / x


def _log_f_scaled(x: np.ndarray, m2: int) -> np.ndarray:
    """log(f(x) / m2**x), finite for any x >= 1."""
    return x * math.log(9.0 / m2) + np.log(-np.expm1(x * LOG8_9)) - np.log(x)


def _log_binom(a, b):
    return special.gammaln(a + 1) - special.gammaln(b + 1) - special.gammaln(a - b + 1)


def _empty_cell_power(k, m2: int, occupied: int):
    """((m2 - occupied) / m2) ** k with 0**0 == 1, in log form."""
    return special.xlogy(k, (m2 - occupied) / m2)


def compute_p_b(params: NetworkParams) -> float:
    """P(S is a transmitter this slot and picks packet-broadcast)."""
    n, m2, a = params.n, params.cells, params.alpha
    occupied = -math.expm1(n * math.log1p(-1.0 / m2))
    return params.q * m2 / (a * a * n) * occupied


def compute_p_c(params: NetworkParams) -> np.ndarray:
    """Copy-count distribution of a freshly broadcast packet, j = 1..n-1."""
    n, m2 = params.n, params.cells
    j = np.arange(1, n, dtype=float)
    own = special.xlogy(1.0, (m2 - 9) / m2) + _log_f_scaled(j, m2)
    nxt = _log_f_scaled(j + 1, m2)
    log_bracket = np.logaddexp(own, nxt)
    log_norm = math.log(-math.expm1(n * math.log1p(-1.0 / m2)))
    logp = (math.log(n) + _log_binom(n - 2, j - 1) + _empty_cell_power(n - 1 - j, m2, 9)
            + log_bracket - log_norm)
    return np.exp(logp)


def _reception_brace(n: int, m2: int) -> float:
    # 1 - (1-x)^n - n x (1-9x)^(n-1), split to avoid cancellation for large m
    x = 1.0 / m2
    two_or_more = stats.binom.sf(1, n, x)
    la = (n - 1) * math.log1p(-x)
    lb = float(_empty_cell_power(n - 1, m2, 9))
    gap = math.exp(la) * -math.expm1(lb - la)
    return float(two_or_more + n * x * gap)


def compute_p_r(params: NetworkParams) -> np.ndarray:
    """P(D receives its requested packet | j copies in the network), j = 1..n-1."""
    n, m2, a, q = params.n, params.cells, params.alpha, params.q
    j = np.arange(1, n, dtype=float)
    return j * (1.0 - q) * m2 / (a * a * n * (n - 1)) * _reception_brace(n, m2)


def _joint_brace(n: int, m2: int) -> float:
    # 1 - 2(1-x)^n + (1-2x)^n - n x (1-9x)^(n-1) + n x (1-10x)^(n-1)
    x = 1.0 / m2
    k = np.arange(1, n + 1)
    # P(cell A and cell B both occupied) summed term by term, all terms >= 0
    both = np.sum(stats.binom.pmf(k, n, x) * -np.expm1((n - k) * (math.log1p(-2 * x) - math.log1p(-x))))
    l9 = (n - 1) * math.log1p(-9 * x)
    l10 = (n - 1) * math.log1p(-10 * x)
    gap = math.exp(l9) * -math.expm1(l10 - l9)
    return float(both - n * x * gap)


def compute_p_b_plus_single(params: NetworkParams) -> float:
    """P(S broadcasts a packet while one given relay delivers D its requested packet)."""
    n, m2, a, q, lam = params.n, params.cells, params.alpha, params.q, params.lam
    if lam is None:
        raise ValueError("p_b^+ needs an arrival rate")
    if m2 <= a * a:
        return 0.0  # a single active cell per slot: S and a relay never transmit together
    p_b = compute_p_b(params)
    pref = lam * (q - q * q) * (m2 * m2 - m2 * a * a) / (a**4 * n * (n - 1) * (n - 2) * p_b)
    return pref * _joint_brace(n, m2)


def compute_p_0(params: NetworkParams) -> np.ndarray:
    """Level-0 exit distribution, j = 0..n-1 (entry 0 is the stay-empty probability)."""
    n, m2, a, q, lam = params.n, params.cells, params.alpha, params.q, params.lam
    p_b = compute_p_b(params)
    j = np.arange(1, n, dtype=float)
    logp = (math.log(lam * q / (a * a * p_b)) + _log_binom(n - 2, j - 1)
            + _empty_cell_power(n - j, m2, 9) + math.log(m2) + _log_f_scaled(j, m2))
    out = np.empty(n)
    out[1:] = np.exp(logp)
    tail = -math.expm1((n - 1) * math.log1p(-1.0 / m2))
    out[0] = 1.0 - lam * q * (m2 - 9) / (a * a * (n - 1) * p_b) * tail
    return out


@dataclass(frozen=True)
class ProbabilityTable:
    params: NetworkParams
    p_b: float
    lambda_prime: float
    p_c: np.ndarray
    p_r: np.ndarray
    p_0: np.ndarray
    p_b_plus: np.ndarray
    p_b_minus: np.ndarray
    p_f_plus: np.ndarray
    p_f_minus: np.ndarray

    @property
    def copies(self) -> np.ndarray:
        return np.arange(1, self.params.n)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "p_c", "p_r", "p_0", "p_b_plus", "p_b_minus", "p_f_plus", "p_f_minus"])
            w.writerow([0, "", "", repr(float(self.p_0[0])), "", "", "", ""])
            for i, j in enumerate(self.copies):
                w.writerow([int(j)] + [repr(float(v)) for v in (
                    self.p_c[i], self.p_r[i], self.p_0[j], self.p_b_plus[i],
                    self.p_b_minus[i], self.p_f_plus[i], self.p_f_minus[i])])


def compute_table(params: NetworkParams) -> ProbabilityTable:
    if params.lam is None:
        raise ValueError("compute_table needs params with an arrival rate")
    p_b = compute_p_b(params)
    if params.lam >= p_b:
        raise StabilityError(
            f"source-queue service rate exceeded: lambda={params.lam:.6g} >= p_b={p_b:.6g}")
    p_c = compute_p_c(params)
    p_r = compute_p_r(params)
    j = np.arange(1, params.n)
    p_b_plus = (j - 1) * compute_p_b_plus_single(params)
    p_b_minus = params.lam - p_b_plus
    p_f_plus = p_r - p_b_plus
    p_f_minus = 1.0 - p_b_plus - p_b_minus - p_f_plus
    for name, arr in (("p_b_minus", p_b_minus), ("p_f_plus", p_f_plus), ("p_f_minus", p_f_minus)):
        if arr.min() < -CLAMP_TOL:
            raise ArithmeticError(f"{name} has negative entry {arr.min():.3e}")
        np.maximum(arr, 0.0, out=arr)
    return ProbabilityTable(
        params=params, p_b=p_b, lambda_prime=params.lam / p_b, p_c=p_c, p_r=p_r,
        p_0=compute_p_0(params), p_b_plus=p_b_plus, p_b_minus=p_b_minus,
        p_f_plus=p_f_plus, p_f_minus=p_f_minus,
    )
