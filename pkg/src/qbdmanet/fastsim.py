"""Compiled engine for long simulation campaigns.

Behaviourally identical to the reference ``World`` but with array state.
Relay queues are not stored as FIFOs: a relay can only ever serve the packet
its destination currently requests, and stale copies (ID <= ACK) are never
served again, so it suffices to remember, for each in-flight packet of a flow,
which nodes picked up a copy when it was broadcast. In-flight packets of flow
f are IDs ack[f]+1 .. bcast[f], kept in a ring indexed by ID modulo its size.
"""

from __future__ import annotations

import numba
import numpy as np

from .simulator import SlotBlock


@numba.njit(cache=True)
def _covers(c1, c2, m):
    dx = abs(c1 // m - c2 // m) % m
    dy = abs(c1 % m - c2 % m) % m
    return min(dx, m - dx) <= 1 and min(dy, m - dy) <= 1


@numba.njit(cache=True)
def run_block(start_row, slot0, cells, arrivals, uniforms, ec_table, ec_count, m, q,
              flows, source_of, gen_count, bcast, ack, gen_slot, deliver_slot, holders,
              departures, qlen):
    """Advance slots ``start_row ..`` of a block; return the row where it stopped.

    Stops early (returning a row < block size) when some flow's in-flight
    ring is full; the caller grows ``holders`` and resumes from that row.
    """
    B, n = cells.shape
    ring = holders.shape[1]
    n_ec = ec_table.shape[0]
    members = np.empty((ec_table.shape[1], n), dtype=np.int64)
    counts = np.zeros(ec_table.shape[1], dtype=np.int64)
    pos = -np.ones(m * m, dtype=np.int64)
    cand = np.empty(n, dtype=np.int64)
    for b in range(start_row, B):
        t = slot0 + b
        for f in range(n):
            if bcast[f] - ack[f] >= ring - 1:
                return b
        for i in range(n):
            if arrivals[b, i]:
                gen_count[i] += 1
                gen_slot[i, gen_count[i]] = t
        qlen[b] = gen_count[0] - bcast[0]
        departures[b] = False
        ec = t % n_ec
        na = ec_count[ec]
        for k in range(na):
            pos[ec_table[ec, k]] = k
            counts[k] = 0
        for i in range(n):
            k = pos[cells[b, i]]
            if k >= 0:
                members[k, counts[k]] = i
                counts[k] += 1
        for k in range(na):
            cnt = counts[k]
            if cnt == 0:
                continue
            tx = members[k, min(int(uniforms[b, k, 0] * cnt), cnt - 1)]
            cell = ec_table[ec, k]
            if uniforms[b, k, 1] < q:
                # packet-broadcast of the head-of-line source packet
                if bcast[tx] < gen_count[tx]:
                    x = bcast[tx] + 1
                    bcast[tx] = x
                    slot = x % ring
                    dest = flows[tx]
                    for i in range(n):
                        holders[tx, slot, i] = False
                    for i in range(n):
                        if i != tx and _covers(cell, cells[b, i], m):
                            if i == dest:
                                if x == ack[tx] + 1:
                                    ack[tx] = x
                                    deliver_slot[tx, x] = t
                            else:
                                holders[tx, slot, i] = True
                    if tx == 0:
                        departures[b] = True
            else:
                # packet-delivery to a uniformly chosen neighbour
                nc = 0
                for i in range(n):
                    if i != tx and _covers(cell, cells[b, i], m):
                        cand[nc] = i
                        nc += 1
                if nc > 0:
                    rx = cand[min(int(uniforms[b, k, 2] * nc), nc - 1)]
                    f = source_of[rx]
                    x = ack[f] + 1
                    if x <= bcast[f] and (tx == f or holders[f, x % ring, tx]):
                        ack[f] = x
                        deliver_slot[f, x] = t
        for k in range(na):
            pos[ec_table[ec, k]] = -1
    return B


class FastState:
    """Array state of one run; grows its buffers on demand."""

    def __init__(self, n: int, flows: np.ndarray, ec_cells: list[list[int]], ring: int = 64,
                 capacity: int = 1024):
        self.n = n
        self.flows = flows.astype(np.int64)
        self.source_of = np.argsort(self.flows).astype(np.int64)
        width = max(len(c) for c in ec_cells)
        self.ec_table = -np.ones((len(ec_cells), width), dtype=np.int64)
        for e, cs in enumerate(ec_cells):
            self.ec_table[e, :len(cs)] = cs
        self.ec_count = np.array([len(c) for c in ec_cells], dtype=np.int64)
        self.gen_count = np.zeros(n, dtype=np.int64)
        self.bcast = np.zeros(n, dtype=np.int64)
        self.ack = np.zeros(n, dtype=np.int64)
        self.gen_slot = -np.ones((n, capacity + 1), dtype=np.int64)
        self.deliver_slot = -np.ones((n, capacity + 1), dtype=np.int64)
        self.holders = np.zeros((n, ring, n), dtype=np.bool_)

    def ensure_capacity(self, extra: int):
        need = int(self.gen_count.max()) + extra + 1
        cap = self.gen_slot.shape[1]
        if need <= cap:
            return
        new = max(need, 2 * cap)
        for name in ("gen_slot", "deliver_slot"):
            old = getattr(self, name)
            grown = -np.ones((self.n, new), dtype=np.int64)
            grown[:, :cap] = old
            setattr(self, name, grown)

    def grow_ring(self):
        old = self.holders
        r1 = old.shape[1]
        r2 = 2 * r1
        new = np.zeros((self.n, r2, self.n), dtype=np.bool_)
        for f in range(self.n):
            ids = np.arange(self.ack[f] + 1, self.bcast[f] + 1)
            new[f, ids % r2] = old[f, ids % r1]
        self.holders = new

    def advance(self, blk: SlotBlock, m: int, q: float, departures: np.ndarray, qlen: np.ndarray):
        B = blk.cells.shape[0]
        self.ensure_capacity(B)
        row = 0
        while row < B:
            row = run_block(row, blk.start, blk.cells, blk.arrivals, blk.uniforms, self.ec_table,
                            self.ec_count, m, q, self.flows, self.source_of, self.gen_count,
                            self.bcast, self.ack, self.gen_slot, self.deliver_slot, self.holders,
                            departures, qlen)
            if row < B:
                self.grow_ring()
