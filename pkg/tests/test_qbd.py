import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbdmanet.oracles import level_mean, truncated_chain
from qbdmanet.params import build_params
from qbdmanet.probabilities import StabilityError, compute_table
from qbdmanet.qbd import (build_blocks, capacity, expected_delay, level_distribution,
                          network_queue_mean, r_residual, solve_R, solve_R_iterative)


def blocks_for(n, m, q, rho, delta=1.0):
    return build_blocks(compute_table(build_params(n, m, q, delta).with_load(rho)))


@pytest.mark.parametrize("n,m,q,mu", [(150, 16, 0.4, 2.37e-4), (100, 16, 0.2, 3.46e-4),
                                       (100, 8, 0.3, 7.52e-4)])
def test_published_capacities(n, m, q, mu):
    t0 = time.perf_counter()
    got = capacity(build_params(n, m, q))[0]
    assert time.perf_counter() - t0 < 1.0
    assert abs(got - mu) <= 0.005e-4


def test_block_structure_four_nodes():
    b = blocks_for(4, 8, 0.4, 0.5)
    assert b.phases == 3
    for M in (b.A0, b.A1, b.A2):
        assert M.shape == (3, 3)
    assert b.B0.shape == (1, 3) and b.B1.shape == (1, 1) and b.B2.shape == (3, 1)
    assert np.count_nonzero(b.A0 - np.diag(np.diag(b.A0))) == 0
    assert np.linalg.matrix_rank(b.A2) == 1
    np.testing.assert_allclose(b.A2 @ np.ones(3), b.B2[:, 0])
    assert b.stochasticity_residual() < 1e-14


def test_one_active_cell_makes_A1_diagonal():
    # no simultaneous broadcast and reception when m == alpha
    b = blocks_for(6, 8, 0.4, 0.5)
    np.testing.assert_array_equal(b.A1, np.diag(np.diag(b.A1)))
    b = blocks_for(6, 10, 0.4, 0.5, delta=0.0)
    assert np.count_nonzero(b.A1 - np.diag(np.diag(b.A1))) > 0


@pytest.mark.parametrize("n,m,delta", [(4, 4, 1.0), (6, 8, 1.0), (7, 10, 0.0), (12, 8, 1.0)])
@pytest.mark.parametrize("rho", [0.3, 0.7])
def test_rate_matrix_matches_fixed_point_iteration(n, m, delta, rho):
    b = blocks_for(n, m, 0.4, rho, delta)
    R, res = solve_R(b)
    assert res < 1e-12
    R_it = solve_R_iterative(b, tol=1e-15)
    np.testing.assert_allclose(R, R_it, atol=1e-10)


def test_G_is_rank_one_minimal_solution():
    b = blocks_for(9, 10, 0.3, 0.6, delta=0.0)
    G = np.outer(np.ones(b.phases), b.v0)
    np.testing.assert_allclose(G, b.A2 + b.A1 @ G + b.A0 @ G @ G, atol=1e-15)


@pytest.mark.parametrize("rho", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("m,delta", [(4, 1.0), (8, 1.0)])
def test_truncated_chain_agrees(rho, m, delta):
    b = blocks_for(4, m, 0.5, rho, delta)
    sol = expected_delay(build_params(4, m, 0.5, delta).with_load(rho))
    brute = truncated_chain(b, levels=60)
    analytic = level_distribution(sol.y0, sol.y1, sol.R, 60)
    assert 0.5 * np.abs(brute - analytic).sum() < 1e-6
    assert abs(level_mean(brute, 3) - sol.L2_bar) / sol.L2_bar < 1e-6


def test_truncated_chain_with_simultaneous_events():
    b = blocks_for(6, 10, 0.4, 0.6, delta=0.0)
    sol = expected_delay(build_params(6, 10, 0.4, 0.0).with_load(0.6))
    brute = truncated_chain(b, levels=80)
    analytic = level_distribution(sol.y0, sol.y1, sol.R, 80)
    assert 0.5 * np.abs(brute - analytic).sum() < 1e-6


def test_queue_mean_ignores_boundary_scale():
    sol = expected_delay(build_params(30, 8, 0.3).with_load(0.5))
    for s in (1e-3, 7.0, 1e5):
        assert network_queue_mean(s * sol.y0, s * sol.y1, sol.R) == pytest.approx(sol.L2_bar, rel=1e-12)


def test_littles_law_and_record():
    sol = expected_delay(build_params(50, 8, 0.4).with_load(0.5))
    assert sol.expected_delay * sol.params.lam == pytest.approx(sol.L1_bar + sol.L2_bar, rel=1e-14)
    rec = sol.to_record()
    assert rec["rho"] == pytest.approx(0.5)
    assert max(rec["residuals"].values()) < 1e-10


def test_low_load_limit_is_finite():
    p = build_params(40, 8, 0.3)
    d1, d2 = (expected_delay(p.with_load(r)).expected_delay for r in (1e-6, 2e-6))
    assert np.isfinite(d1) and abs(d1 - d2) / d1 < 1e-4


def test_delay_blows_up_near_capacity():
    p = build_params(40, 8, 0.3)
    assert expected_delay(p.with_load(0.99)).expected_delay > 10 * expected_delay(p.with_load(0.5)).expected_delay


def test_unstable_input():
    p = build_params(150, 16, 0.4)
    with pytest.raises(StabilityError, match="unstable"):
        expected_delay(p.with_load(1.0))
    with pytest.raises(StabilityError, match="unstable"):
        expected_delay(p.with_load(1.5))


@given(st.integers(4, 120), st.sampled_from([4, 8, 10, 16]), st.floats(0.05, 0.95),
       st.floats(0.05, 0.97), st.sampled_from([0.0, 1.0]))
@settings(max_examples=30)
def test_solution_properties(n, m, q, rho, delta):
    sol = expected_delay(build_params(n, m, q, delta).with_load(rho))
    assert 0.0 <= sol.sp_R < 1.0
    assert np.all(sol.R >= -1e-14)
    assert sol.L1_bar >= 0 and sol.L2_bar >= 0 and sol.expected_delay > 0
    assert max(sol.residuals.values()) < 1e-9
    assert r_residual(sol.blocks, sol.R) < 1e-9


@given(st.integers(4, 80), st.sampled_from([4, 8, 16]), st.floats(0.05, 0.95))
@settings(max_examples=20)
def test_delay_increases_with_load(n, m, q):
    p = build_params(n, m, q)
    d = [expected_delay(p.with_load(r)).expected_delay for r in np.linspace(0.1, 0.9, 9)]
    assert np.all(np.diff(d) > 0)


def test_solver_speed_at_published_scale():
    t0 = time.perf_counter()
    expected_delay(build_params(500, 16, 0.2).with_load(0.5))
    assert time.perf_counter() - t0 < 2.0
