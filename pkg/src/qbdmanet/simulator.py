"""Slot-by-slot simulator of the cell-partitioned MANET with two-hop relay routing.

Within a slot the order is: mobility, packet generation, MAC scheduling, then
one routing action per transmitter (active cells in ascending cell order).
A packet generated in slot t may be broadcast in slot t; its end-to-end delay
is ``deliver_slot - gen_slot + 1``.

All randomness is drawn in fixed-size blocks by ``SlotStream`` so that the
reference engine here and the compiled engine in ``fastsim`` consume identical
numbers and produce identical packet traces from the same seed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import cell_gap_distance, covers, ec_cells
from .mobility import Mobility, make_mobility
from .params import NetworkParams

BLOCK = 4096


class ProtocolViolation(AssertionError):
    pass


def random_derangement(n: int, rng: np.random.Generator) -> np.ndarray:
    """Permutation traffic: sigma[i] is the destination of node i, never i itself."""
    while True:
        sigma = rng.permutation(n)
        if not np.any(sigma == np.arange(n)):
            return sigma


@dataclass
class SlotBlock:
    start: int
    cells: np.ndarray      # (B, n) cell of each node
    arrivals: np.ndarray   # (B, n) bool, a packet is generated
    uniforms: np.ndarray   # (B, A, 3) per active cell: contention, broadcast coin, receiver


class SlotStream:
    """Seeded source of every random quantity a run consumes."""

    def __init__(self, params: NetworkParams, mobility: str, seed, lam: float | None = None,
                 block: int = BLOCK):
        self.params = params
        self.lam = params.lam if lam is None else lam
        if self.lam is None:
            raise ValueError("simulation needs an arrival rate")
        self.block = block
        self.rng = np.random.default_rng(seed)
        self.flows = random_derangement(params.n, self.rng)
        self.mobility: Mobility = make_mobility(mobility, params.n, params.m, self.rng)
        self.ec_cells = ec_cells(params.m, params.alpha)
        self.max_active = max(len(c) for c in self.ec_cells)
        self.next_start = 0

    def next_block(self) -> SlotBlock:
        n, b = self.params.n, self.block
        cells = self.mobility.advance(self.rng, b)
        arrivals = self.rng.random((b, n)) < self.lam
        uniforms = self.rng.random((b, self.max_active, 3))
        blk = SlotBlock(self.next_start, cells, arrivals, uniforms)
        self.next_start += b
        return blk

    def active_cells(self, slot: int) -> list[int]:
        """Equivalent classes are activated round-robin."""
        a = self.params.alpha
        return self.ec_cells[slot % (a * a)]


@dataclass
class Packet:
    source: int
    dest: int
    seq: int
    gen_slot: int
    deliver_slot: int | None = None


@dataclass
class NodeState:
    source_queue: deque = field(default_factory=deque)
    broadcast_queue: deque = field(default_factory=deque)
    relay_queues: dict = field(default_factory=dict)   # destination -> deque of Packet
    id_counter: int = 0
    ack: int = 0


class World:
    """Reference engine: literal queues, IDs and ACKs for every node."""

    def __init__(self, params: NetworkParams, mobility: str = "iid", seed=0,
                 lam: float | None = None, debug: bool = False):
        self.params = params
        self.stream = SlotStream(params, mobility, seed, lam)
        self.flows = self.stream.flows
        self.source_of = np.argsort(self.flows)
        n = params.n
        self.nodes = [NodeState() for _ in range(n)]
        for i, node in enumerate(self.nodes):
            for d in range(n):
                if d != i and d != self.flows[i]:
                    node.relay_queues[d] = deque()
        self.packets: list[list[Packet]] = [[] for _ in range(n)]
        self.slot = 0
        self.positions: list[int] = []
        self.arrivals: list[bool] = []
        self.active_ec = 0
        self.debug = debug
        self.violations = 0
        self.departures: list[int] = []     # slots in which node 0 broadcast a packet
        self._block: SlotBlock | None = None
        self._row = 0
        self._cell_uniforms: dict[int, np.ndarray] = {}
        self._receivers: list[tuple[int, int]] = []  # (transmitter, receiver) pairs this slot
        self._touched_nodes: set[int] = set()   # queues changed this slot
        self._touched_flows: set[int] = set()   # flows whose packets moved this slot

    # -- randomness ---------------------------------------------------------
    def _load_row(self):
        if self._block is None or self._row >= self.stream.block:
            self._block = self.stream.next_block()
            self._row = 0
        blk, r = self._block, self._row
        self.positions = blk.cells[r].tolist()
        self.arrivals = blk.arrivals[r].tolist()
        active = self.stream.active_cells(self.slot)
        self._cell_uniforms = {c: blk.uniforms[r, k] for k, c in enumerate(active)}
        self._row += 1

    def covered(self, cell: int, exclude: int) -> list[int]:
        near = np.nonzero(covers(cell, np.asarray(self.positions), self.params.m))[0]
        return [int(k) for k in near if k != exclude]

    # -- protocol state views -----------------------------------------------
    def queue_for(self, holder: int, receiver: int) -> deque:
        """Queue ``holder`` consults when ``receiver`` asks for its next packet."""
        if self.flows[holder] == receiver:
            return self.nodes[holder].broadcast_queue
        return self.nodes[holder].relay_queues[receiver]

    def step(self):
        step_mobility(self)
        step_traffic(self)
        self._receivers = []
        txs = schedule_slot(self)
        for tx, cell in txs:
            execute_2hr(self, tx, cell)
        if self.debug:
            self.check_interference(txs)
            self.check_invariants(self._touched_nodes, self._touched_flows)
        self._touched_nodes.clear()
        self._touched_flows.clear()
        self.slot += 1
        return self

    def run_slots(self, count: int):
        for _ in range(count):
            self.step()
        return self

    # -- debug checks ---------------------------------------------------------
    def check_interference(self, txs):
        m, delta = self.params.m, self.params.delta
        limit = (1.0 + delta) * self.params.r - 1e-12
        for tx, rx in self._receivers:
            for other, ocell in txs:
                if other != tx and cell_gap_distance(self.positions[rx], ocell, m) < limit:
                    self.violations += 1

    def check_invariants(self, nodes=None, flows=None):
        """Raise ProtocolViolation on broken bookkeeping; by default checks everything."""
        nodes = range(len(self.nodes)) if nodes is None else nodes
        flows = range(len(self.nodes)) if flows is None else flows
        for s in flows:
            node = self.nodes[s]
            d = self.flows[s]
            ack = self.nodes[d].ack
            sent = self.packets[s]
            delivered = sum(p.deliver_slot is not None for p in sent)
            if delivered != ack:
                raise ProtocolViolation(f"flow {s}: {delivered} delivered but ACK={ack}")
            if any(p.deliver_slot is None for p in sent[:ack]) or any(
                    p.deliver_slot is not None for p in sent[ack:]):
                raise ProtocolViolation(f"flow {s}: delivered IDs are not the prefix 1..{ack}")
            # every generated packet is unsent (source queue), in the network, or delivered
            if len(sent) != node.id_counter:
                raise ProtocolViolation(f"flow {s}: {len(sent)} packets recorded, ID counter {node.id_counter}")
            distributed = len(sent) - len(node.source_queue)
            if list(node.source_queue) != sent[distributed:]:
                raise ProtocolViolation(f"flow {s}: source queue is not the unsent tail")
            if ack > distributed:
                raise ProtocolViolation(f"flow {s}: ACK={ack} exceeds {distributed} distributed")
            if node.broadcast_queue and node.broadcast_queue[-1].seq > distributed:
                raise ProtocolViolation(f"flow {s}: broadcast queue holds an unsent packet")
        for s in nodes:
            node = self.nodes[s]
            for p in node.broadcast_queue:
                if p.source != s:
                    raise ProtocolViolation(f"node {s}: foreign packet in broadcast queue")
            for d, rq in node.relay_queues.items():
                if any(p.dest != d for p in rq):
                    raise ProtocolViolation(f"node {s}: relay queue for {d} holds a packet for another destination")
            for q in [node.source_queue, node.broadcast_queue, *node.relay_queues.values()]:
                seqs = [p.seq for p in q]
                if any(a >= b for a, b in zip(seqs, seqs[1:])):
                    raise ProtocolViolation(f"node {s}: queue IDs not increasing")


def step_mobility(world: World) -> World:
    world._load_row()
    a = world.params.alpha
    world.active_ec = world.slot % (a * a)
    return world


def step_traffic(world: World) -> World:
    for s, arrived in enumerate(world.arrivals):
        if arrived:
            node = world.nodes[s]
            node.id_counter += 1
            world._touched_nodes.add(s)
            world._touched_flows.add(s)
            pkt = Packet(s, int(world.flows[s]), node.id_counter, world.slot)
            world.packets[s].append(pkt)
            node.source_queue.append(pkt)
    return world


def schedule_slot(world: World) -> list[tuple[int, int]]:
    """One uniformly chosen transmitter per occupied active cell."""
    members: dict[int, list[int]] = {c: [] for c in world._cell_uniforms}
    for i, c in enumerate(world.positions):
        if c in members:
            members[c].append(i)
    out = []
    for c, nodes in members.items():
        if nodes:
            u = world._cell_uniforms[c][0]
            out.append((nodes[min(int(u * len(nodes)), len(nodes) - 1)], c))
    return out


def execute_2hr(world: World, tx: int, cell: int) -> World:
    u = world._cell_uniforms[cell]
    if u[1] < world.params.q:
        _broadcast(world, tx, cell)
    else:
        _deliver(world, tx, cell, u[2])
    return world


def _broadcast(world: World, tx: int, cell: int):
    node = world.nodes[tx]
    if not node.source_queue:
        return
    pkt = node.source_queue.popleft()
    dest = pkt.dest
    world._touched_flows.add(tx)
    world._touched_nodes.add(tx)
    for k in world.covered(cell, tx):
        world._receivers.append((tx, k))
        world._touched_nodes.add(k)
        if k == dest:
            dnode = world.nodes[k]
            if pkt.seq == dnode.ack + 1:
                dnode.ack += 1
                pkt.deliver_slot = world.slot
        else:
            world.nodes[k].relay_queues[dest].append(pkt)
    node.broadcast_queue.append(pkt)
    if tx == 0:
        world.departures.append(world.slot)


def _deliver(world: World, tx: int, cell: int, u: float):
    candidates = world.covered(cell, tx)
    if not candidates:
        return
    rx = candidates[min(int(u * len(candidates)), len(candidates) - 1)]
    world._receivers.append((tx, rx))
    want = world.nodes[rx].ack + 1
    queue = world.queue_for(tx, rx)
    pkt = next((p for p in queue if p.seq == want), None)
    if pkt is None:
        return
    pkt.deliver_slot = world.slot
    world._touched_nodes.update((tx, rx))
    world._touched_flows.add(pkt.source)
    while queue and queue[0].seq <= want:
        queue.popleft()
    world.nodes[rx].ack = want
