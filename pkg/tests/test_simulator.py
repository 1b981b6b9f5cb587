import math
from collections import Counter

import numpy as np
import pytest

from qbdmanet.fastsim import FastState
from qbdmanet.params import build_params
from qbdmanet.runner import simulate
from qbdmanet.simulator import (Packet, ProtocolViolation, SlotBlock, World, _deliver,
                                execute_2hr, random_derangement, schedule_slot, step_traffic)
from qbdmanet.geometry import cell_id

FAR = cell_id(4, 4, 8)
BCAST, DELIVER = 0.0, 0.9   # broadcast coin values for q = 0.3


def play(world, positions, arrivals, uniforms):
    """Run one slot with scripted positions, arrivals and per-cell uniforms."""
    world.positions = list(positions)
    world.arrivals = list(arrivals)
    active = world.stream.active_cells(world.slot)
    world._cell_uniforms = {c: np.array(uniforms.get(c, (0.0, DELIVER, 0.0))) for c in active}
    world._receivers = []
    step_traffic(world)
    txs = schedule_slot(world)
    for tx, cell in txs:
        execute_2hr(world, tx, cell)
    world.check_invariants()
    world.slot += 1
    return txs


# S = 0 sends to D = 1; R = 2 relays; X = 3 idles. With m = alpha = 8 the
# single active cell in slot t is cell t.
SCRIPT = [
    # positions (S, D, R, X), arrivals, uniforms of the active cell
    ((0, FAR, 1, FAR), (1, 0, 0, 0), {0: (0.0, BCAST, 0.0)}),      # S broadcasts #1, R copies
    ((FAR, 1, FAR, FAR), (1, 0, 0, 0), {1: (0.0, BCAST, 0.0)}),    # D alone, nothing to send
    ((2, 3, 2, FAR), (0, 0, 0, 0), {2: (0.0, BCAST, 0.0)}),        # S broadcasts #2, D discards
    ((FAR, 4, 3, 3), (0, 0, 0, 0), {3: (0.0, DELIVER, 0.0)}),      # R delivers #1
    ((4, 4, FAR, FAR), (0, 0, 0, 0), {4: (0.0, DELIVER, 0.0)}),    # S delivers #2 from its broadcast queue
    ((FAR, 5, 5, FAR), (1, 0, 0, 0), {5: (0.6, DELIVER, 0.0)}),    # R wins, holds only stale #2
]


def scripted_world():
    w = World(build_params(4, 8, 0.3).with_lambda(1e-3), "iid", seed=7)
    assert list(w.flows) == [1, 2, 3, 0]
    return w


def test_hand_trace():
    w = scripted_world()
    S, D, R, X = w.nodes

    play(w, *SCRIPT[0])
    assert [p.seq for p in S.broadcast_queue] == [1] and not S.source_queue
    assert [p.seq for p in R.relay_queues[1]] == [1]
    assert D.ack == 0

    txs = play(w, *SCRIPT[1])
    assert txs == [(1, 1)]
    assert [p.seq for p in S.source_queue] == [2] and not D.broadcast_queue

    txs = play(w, *SCRIPT[2])
    assert txs == [(0, 2)]
    assert [p.seq for p in S.broadcast_queue] == [1, 2]
    assert [p.seq for p in R.relay_queues[1]] == [1, 2]
    assert D.ack == 0   # #2 is not the requested ID

    txs = play(w, *SCRIPT[3])
    assert txs == [(2, 3)]
    assert D.ack == 1 and [p.seq for p in R.relay_queues[1]] == [2]

    play(w, *SCRIPT[4])
    assert D.ack == 2 and not S.broadcast_queue

    txs = play(w, *SCRIPT[5])
    assert txs == [(2, 5)]
    assert D.ack == 2 and [p.seq for p in R.relay_queues[1]] == [2]
    assert [p.seq for p in S.source_queue] == [3] and S.id_counter == 3

    pkts = w.packets[0]
    assert [(p.gen_slot, p.deliver_slot) for p in pkts] == [(0, 3), (1, 4), (5, None)]
    assert w.departures == [0, 2]


def test_hand_trace_fast_engine():
    w = scripted_world()
    cells = np.array([[pos[i] for i in range(4)] for pos, _, _ in SCRIPT])
    arrivals = np.array([a for _, a, _ in SCRIPT], dtype=bool)
    uniforms = np.array([[u[t]] for t, (_, _, u) in enumerate(SCRIPT)], dtype=float)
    state = FastState(4, w.flows, w.stream.ec_cells)
    dep = np.zeros(6, dtype=bool)
    ql = np.zeros(6, dtype=np.int64)
    state.advance(SlotBlock(0, cells, arrivals, uniforms), 8, 0.3, dep, ql)
    assert state.ack[0] == 2 and state.gen_count[0] == 3 and state.bcast[0] == 2
    assert list(state.gen_slot[0, 1:4]) == [0, 1, 5]
    assert list(state.deliver_slot[0, 1:4]) == [3, 4, -1]
    assert list(np.nonzero(dep)[0]) == [0, 2]
    assert list(ql) == [1, 1, 1, 0, 0, 1]


def test_delivery_purges_stale_ids():
    w = scripted_world()
    play(w, (FAR, FAR, FAR, FAR), (0, 0, 0, 0), {})
    relay, dest = 2, 1
    queue = w.nodes[relay].relay_queues[dest]
    for seq in (3, 4, 5, 7):
        queue.append(Packet(3, dest, seq, 0))
    w.nodes[dest].ack = 4
    w.positions = [FAR, 11, 10, FAR]
    _deliver(w, relay, 10, 0.0)
    assert [p.seq for p in queue] == [7]
    assert w.nodes[dest].ack == 5


def test_broadcast_with_empty_source_is_idle():
    w = scripted_world()
    play(w, (0, FAR, 1, FAR), (0, 0, 0, 0), {0: (0.0, BCAST, 0.0)})
    assert all(not n.broadcast_queue for n in w.nodes)
    assert all(not q for n in w.nodes for q in n.relay_queues.values())
    assert w.departures == []


def test_delivery_without_neighbours_is_idle():
    w = scripted_world()
    play(w, (0, FAR, FAR, FAR), (1, 0, 0, 0), {0: (0.0, DELIVER, 0.0)})
    assert [p.seq for p in w.nodes[0].source_queue] == [1]


def test_empty_active_cell_has_no_transmitter():
    w = scripted_world()
    assert play(w, (FAR, FAR, FAR, FAR), (0, 0, 0, 0), {}) == []


def test_contention_is_fair():
    w = scripted_world()
    rng = np.random.default_rng(5)
    w.positions = [0, 0, 0, FAR]
    trials = 200_000
    picks = Counter()
    for u in rng.random(trials):
        w._cell_uniforms = {0: np.array([u, 0.0, 0.0])}
        (tx, _), = schedule_slot(w)
        picks[tx] += 1
    sigma = math.sqrt(1 / 3 * 2 / 3 / trials)
    for node in (0, 1, 2):
        assert abs(picks[node] / trials - 1 / 3) < 3 * sigma
    assert picks[3] == 0


def test_corrupted_state_is_caught():
    w = scripted_world()
    play(w, *SCRIPT[0])
    w.nodes[1].ack = 1
    with pytest.raises(ProtocolViolation):
        w.check_invariants()
    w = scripted_world()
    play(w, *SCRIPT[0])
    w.nodes[0].source_queue.append(w.packets[0][0])
    with pytest.raises(ProtocolViolation):
        w.check_invariants()


def test_derangement():
    rng = np.random.default_rng(0)
    for n in (4, 5, 50):
        s = random_derangement(n, rng)
        assert sorted(s) == list(range(n)) and not np.any(s == np.arange(n))


def test_zero_rate_means_no_packets():
    w = World(build_params(6, 8, 0.3).with_lambda(1e-3), "iid", seed=1, lam=0.0)
    w.run_slots(3000)
    assert all(not p for p in w.packets)


def test_arrival_rate():
    p = build_params(20, 8, 0.3).with_load(0.5)
    tr = simulate(p, slots=500_000, warmup=0, seed=3, drain=False)
    gen = int(((tr.gen_slot >= 0) & (tr.gen_slot < tr.slots)).sum())
    trials = 20 * 500_000
    assert abs(gen / trials - p.lam) < 3 * math.sqrt(p.lam * (1 - p.lam) / trials)


@pytest.mark.parametrize("n,m,q,delta,mobility", [
    (12, 8, 0.4, 1.0, "iid"),
    (30, 16, 0.3, 1.0, "iid"),
    (10, 10, 0.5, 0.0, "random_walk"),
    (16, 16, 0.4, 1.0, "random_waypoint"),
])
def test_engines_agree(n, m, q, delta, mobility):
    p = build_params(n, m, q, delta).with_load(0.6)
    a = simulate(p, mobility, 30_000, 2_000, seed=11, engine="reference")
    b = simulate(p, mobility, 30_000, 2_000, seed=11, engine="fast")
    np.testing.assert_array_equal(a.gen_slot[:, :b.gen_slot.shape[1]],
                                  b.gen_slot[:, :a.gen_slot.shape[1]])
    np.testing.assert_array_equal(a.deliver_slot[:, :b.deliver_slot.shape[1]],
                                  b.deliver_slot[:, :a.deliver_slot.shape[1]])
    assert a.metrics().mean_delay == b.metrics().mean_delay


@pytest.mark.parametrize("n,m,delta", [(40, 16, 1.0), (30, 10, 0.0)])
def test_debug_run_is_safe(n, m, delta):
    p = build_params(n, m, 0.4, delta).with_load(0.7)
    w = World(p, "iid", seed=2, debug=True)
    w.run_slots(20_000)
    assert w.violations == 0
    w.check_invariants()
    assert sum(len(x) for x in w.packets) > 0


def test_checker_sees_wraparound_interference():
    # alpha does not divide m: same-class cells can be close across the wrap
    p = build_params(60, 12, 0.4).with_load(0.5)
    w = World(p, "iid", seed=0, debug=True)
    w.run_slots(3_000)
    assert w.violations > 0


def test_same_seed_same_result():
    p = build_params(20, 8, 0.3).with_load(0.5)
    a = simulate(p, slots=100_000, warmup=5_000, seed=9).metrics()
    b = simulate(p, slots=100_000, warmup=5_000, seed=9).metrics()
    np.testing.assert_array_equal(a.delay_samples, b.delay_samples)
    assert a.mean_delay == b.mean_delay and a.per_node_throughput == b.per_node_throughput
    c = simulate(p, slots=100_000, warmup=5_000, seed=10).metrics()
    assert c.mean_delay != a.mean_delay


def test_in_order_delivery_and_counts():
    p = build_params(25, 8, 0.4).with_load(0.7)
    tr = simulate(p, slots=200_000, warmup=10_000, seed=4)
    for f in range(p.n):
        d = tr.deliver_slot[f, 1:]
        done = d[d >= 0]
        assert np.all(np.diff(done) >= 0)
        # delivered IDs form a prefix
        k = done.size
        assert np.all(d[:k] >= 0) and np.all(d[k:] < 0)
        g = tr.gen_slot[f, 1:k + 1]
        assert np.all(done >= g)
    m = tr.metrics()
    assert np.all(m.delivered_count <= m.generated_count)
    assert m.undelivered == 0 and np.all(m.delay_samples >= 1)


def test_bad_window():
    p = build_params(20, 8, 0.3).with_load(0.5)
    with pytest.raises(ValueError):
        simulate(p, slots=100, warmup=100)
    with pytest.raises(ValueError):
        simulate(p, slots=100, engine="warp")
