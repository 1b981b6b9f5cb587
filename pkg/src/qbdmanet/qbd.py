"""Matrix-geometric solution of the network-queue QBD; capacity and end-to-end delay.

Levels count packets distributed by S but not yet received by D; the phase of
a level l >= 1 is the number of copies of the packet D currently requests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .params import NetworkParams
from .probabilities import (
    ProbabilityTable, StabilityError, compute_p_b, compute_p_c, compute_p_r, compute_table,
)

STOCHASTIC_TOL = 1e-8


@dataclass(frozen=True)
class QbdBlocks:
    v0: np.ndarray   # (n-1,)   copy-count distribution of a new requested packet
    A0: np.ndarray   # level up, phase kept
    A1: np.ndarray   # same level
    A2: np.ndarray   # level down, phase redrawn from v0
    B0: np.ndarray   # (1, n-1) from the empty state
    B1: np.ndarray   # (1, 1)
    B2: np.ndarray   # (n-1, 1) into the empty state

    @property
    def phases(self) -> int:
        return self.v0.size

    def stochasticity_residual(self) -> float:
        ones = np.ones(self.phases)
        r0 = abs(self.B1[0, 0] + self.B0.sum() - 1.0)
        r1 = np.abs(self.B2[:, 0] + self.A1 @ ones + self.A0 @ ones - 1.0).max()
        r2 = np.abs(self.A2 @ ones + self.A1 @ ones + self.A0 @ ones - 1.0).max()
        return float(max(r0, r1, r2))

    def generator(self, levels: int) -> np.ndarray:
        """Transition matrix truncated after ``levels`` levels (top level reflects A0)."""
        k = self.phases
        size = 1 + levels * k
        Q = np.zeros((size, size))
        Q[0, 0] = self.B1[0, 0]
        Q[0, 1:1 + k] = self.B0[0]
        for l in range(1, levels + 1):
            s = slice(1 + (l - 1) * k, 1 + l * k)
            if l == 1:
                Q[s, 0] = self.B2[:, 0]
            else:
                Q[s, 1 + (l - 2) * k:1 + (l - 1) * k] = self.A2
            Q[s, s] = self.A1
            if l < levels:
                Q[s, 1 + l * k:1 + (l + 1) * k] = self.A0
            else:
                Q[s, s] += self.A0
        return Q


def build_blocks(table: ProbabilityTable) -> QbdBlocks:
    v0 = table.p_c.copy()
    B2 = table.p_f_plus[:, None].copy()
    blocks = QbdBlocks(
        v0=v0,
        A0=np.diag(table.p_b_minus),
        A1=np.diag(table.p_f_minus) + np.outer(table.p_b_plus, v0),
        A2=B2 @ v0[None, :],
        B0=table.p_0[None, 1:].copy(),
        B1=np.array([[table.p_0[0]]]),
        B2=B2,
    )
    res = blocks.stochasticity_residual()
    if res > STOCHASTIC_TOL:
        raise ArithmeticError(f"QBD blocks are not row-stochastic (residual {res:.3e})")
    return blocks


def capacity(params: NetworkParams) -> tuple[float, float, float]:
    """Per-node throughput capacity (mu, mu_s, mu_d); the arrival rate is not used."""
    mu_s = compute_p_b(params)
    mu_d = 1.0 / float(np.sum(compute_p_c(params) / compute_p_r(params)))
    return min(mu_s, mu_d), mu_s, mu_d


def solve_R(blocks: QbdBlocks) -> tuple[np.ndarray, float]:
    """Rate matrix from the rank-one G = 1 v0; returns (R, fixed-point residual)."""
    k = blocks.phases
    ones = np.ones(k)
    X = np.eye(k) - blocks.A1 - np.outer(blocks.A0 @ ones, blocks.v0)
    try:
        lu = linalg.lu_factor(X, check_finite=True)
    except linalg.LinAlgError as exc:
        raise ArithmeticError(f"I - A1 - A0 G is singular (cond={np.linalg.cond(X):.3e})") from exc
    # R X = A0  <=>  X^T R^T = A0^T
    R = linalg.lu_solve(lu, blocks.A0.T, trans=1).T
    return R, r_residual(blocks, R)


def r_residual(blocks: QbdBlocks, R: np.ndarray) -> float:
    return float(np.abs(R - (blocks.A0 + R @ blocks.A1 + R @ R @ blocks.A2)).sum(axis=1).max())


def solve_R_iterative(blocks: QbdBlocks, tol: float = 1e-14, max_iter: int = 1_000_000) -> np.ndarray:
    """Plain fixed-point iteration R <- A0 + R A1 + R^2 A2 (test oracle only, slow)."""
    R = np.zeros_like(blocks.A0)
    for _ in range(max_iter):
        nxt = blocks.A0 + R @ blocks.A1 + R @ R @ blocks.A2
        if np.abs(nxt - R).max() < tol:
            return nxt
        R = nxt
    raise ArithmeticError("R fixed-point iteration did not converge")


def boundary_matrix(blocks: QbdBlocks, R: np.ndarray) -> np.ndarray:
    k = blocks.phases
    M = np.empty((k + 1, k + 1))
    M[0, 0] = blocks.B1[0, 0]
    M[0, 1:] = blocks.B0[0]
    M[1:, 0] = blocks.B2[:, 0]
    M[1:, 1:] = blocks.A1 + R @ blocks.A2
    return M


def solve_boundary(blocks: QbdBlocks, R: np.ndarray) -> tuple[float, np.ndarray, float, float]:
    """Left fixed point [y0, y1] of the boundary matrix scaled to y0 = 1.

    Returns (y0, y1, phi, residual), phi = y0 + y1 (I - R)^-1 1.
    """
    M = boundary_matrix(blocks, R)
    size = M.shape[0]
    # y (M - I) = 0 transposed, with the first equation replaced by y0 = 1
    lhs = (M - np.eye(size)).T
    lhs[0, :] = 0.0
    lhs[0, 0] = 1.0
    rhs = np.zeros(size)
    rhs[0] = 1.0
    try:
        y = linalg.solve(lhs, rhs)
    except linalg.LinAlgError as exc:
        raise ArithmeticError(f"boundary matrix has no simple unit eigenvalue: {exc}") from exc
    if y.min() < -1e-12 * np.abs(y).max():
        raise ArithmeticError(f"boundary vector has negative entries (min {y.min():.3e})")
    y = np.maximum(y, 0.0)
    residual = float(np.abs(y @ M - y).sum() / np.abs(y).sum())
    y0, y1 = float(y[0]), y[1:]
    I_R = np.eye(R.shape[0]) - R
    phi = y0 + float(y1 @ linalg.solve(I_R, np.ones(R.shape[0])))
    return y0, y1, phi, residual


def network_queue_mean(y0: float, y1: np.ndarray, R: np.ndarray) -> float:
    """Mean level y1 (I-R)^-2 1 / phi, invariant to the scale of [y0, y1]."""
    I_R = np.eye(R.shape[0]) - R
    once = linalg.solve(I_R, np.ones(R.shape[0]))
    twice = linalg.solve(I_R, once)
    return float(y1 @ twice) / (y0 + float(y1 @ once))


def level_distribution(y0: float, y1: np.ndarray, R: np.ndarray, levels: int) -> np.ndarray:
    """Stationary probabilities of (0,0) and levels 1..levels, flattened like ``generator``."""
    I_R = np.eye(R.shape[0]) - R
    phi = y0 + float(y1 @ linalg.solve(I_R, np.ones(R.shape[0])))
    out = [np.array([y0 / phi])]
    pi = y1 / phi
    for _ in range(levels):
        out.append(pi)
        pi = pi @ R
    return np.concatenate(out)


def source_queue_mean(lam: float, p_b: float) -> float:
    """Mean occupancy of the Bernoulli/Bernoulli source queue."""
    return (lam - lam * lam) / (p_b - lam)


@dataclass(frozen=True)
class QbdSolution:
    params: NetworkParams
    table: ProbabilityTable = field(repr=False)
    blocks: QbdBlocks = field(repr=False)
    mu: float
    mu_s: float
    mu_d: float
    R: np.ndarray = field(repr=False)
    G: np.ndarray = field(repr=False)
    y0: float
    y1: np.ndarray = field(repr=False)
    phi: float
    L1_bar: float
    L2_bar: float
    expected_delay: float
    sp_R: float
    residuals: dict

    def to_record(self) -> dict:
        p = self.params
        return {
            "params": {"n": p.n, "m": p.m, "q": p.q, "delta": p.delta, "lambda": p.lam, "alpha": p.alpha},
            "rho": p.lam / self.mu,
            "mu": self.mu, "mu_s": self.mu_s, "mu_d": self.mu_d,
            "L1_bar": self.L1_bar, "L2_bar": self.L2_bar,
            "expected_delay_slots": self.expected_delay,
            "sp_R": self.sp_R, "residuals": dict(self.residuals),
        }


def expected_delay(params: NetworkParams) -> QbdSolution:
    """Expected end-to-end delay in slots, with every intermediate exposed."""
    mu, mu_s, mu_d = capacity(params)
    if params.lam is None:
        raise ValueError("expected_delay needs params with an arrival rate")
    if params.lam >= mu:
        raise StabilityError(f"unstable: lambda={params.lam:.6g} exceeds capacity mu={mu:.6g}")
    table = compute_table(params)
    blocks = build_blocks(table)
    R, r_res = solve_R(blocks)
    y0, y1, phi, b_res = solve_boundary(blocks, R)
    L1 = source_queue_mean(params.lam, table.p_b)
    L2 = network_queue_mean(y0, y1, R)
    sp = float(np.max(np.abs(np.linalg.eigvals(R))))
    return QbdSolution(
        params=params, table=table, blocks=blocks, mu=mu, mu_s=mu_s, mu_d=mu_d,
        R=R, G=np.outer(np.ones(blocks.phases), blocks.v0), y0=y0, y1=y1, phi=phi,
        L1_bar=L1, L2_bar=L2, expected_delay=(L1 + L2) / params.lam, sp_R=sp,
        residuals={"stochasticity": blocks.stochasticity_residual(), "R": r_res, "boundary": b_res},
    )
