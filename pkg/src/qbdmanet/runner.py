"""Simulation runs and replications on top of either engine."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fastsim import FastState
from .metrics import RunMetrics
from .params import NetworkParams
from .simulator import BLOCK, SlotStream, World


@dataclass
class RunTrace:
    """Raw outcome of one run: per-flow generation/delivery slots indexed by packet ID."""

    params: NetworkParams
    slots: int
    warmup: int
    gen_slot: np.ndarray       # (n, cap+1); column 0 unused, -1 where no packet
    deliver_slot: np.ndarray   # same shape, -1 if not delivered
    slots_run: int
    departures: np.ndarray | None = None   # per-slot bool, tagged source broadcast a packet
    source_queue: np.ndarray | None = None  # per-slot tagged source-queue length

    def packet_records(self):
        """(flow, id, gen_slot, deliver_slot) for every packet generated in the window."""
        for f in range(self.gen_slot.shape[0]):
            ids = np.nonzero((self.gen_slot[f] >= self.warmup) & (self.gen_slot[f] < self.slots))[0]
            for i in ids:
                yield f, int(i), int(self.gen_slot[f, i]), int(self.deliver_slot[f, i])

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["flow", "id", "gen_slot", "deliver_slot"])
            w.writerows(self.packet_records())

    def metrics(self) -> RunMetrics:
        gen, dlv = self.gen_slot, self.deliver_slot
        window = (gen >= self.warmup) & (gen < self.slots)
        done = window & (dlv >= 0)
        delays = (dlv[done] - gen[done] + 1).astype(np.int64)
        in_window = (dlv >= self.warmup) & (dlv < self.slots)
        observed = self.slots - self.warmup
        thr = in_window.sum(axis=1) / observed
        return RunMetrics(
            delay_samples=delays,
            generated_count=((gen >= 0) & (gen < self.slots)).sum(axis=1),
            delivered_count=((dlv >= 0) & (dlv < self.slots)).sum(axis=1),
            slots_observed=observed,
            mean_delay=float(delays.mean()) if delays.size else math.nan,
            per_node_throughput=float(thr.mean()),
            undelivered=int(window.sum() - done.sum()),
        )


def _drained(gen_slot: np.ndarray, ack: np.ndarray, gen_count: np.ndarray, slots: int) -> bool:
    for f in range(gen_slot.shape[0]):
        last = np.searchsorted(gen_slot[f, 1:gen_count[f] + 1], slots)
        if ack[f] < last:
            return False
    return True


def simulate(params: NetworkParams, mobility: str = "iid", slots: int = 100_000, warmup: int = 0,
             seed=0, engine: str = "fast", drain: bool = True, max_drain: int | None = None,
             trace: bool = False, lam: float | None = None, block: int = BLOCK) -> RunTrace:
    """Run one replication.

    With ``drain`` the run continues past ``slots`` (traffic still flowing)
    until every packet generated in [warmup, slots) is delivered, or until
    ``max_drain`` extra slots (default: ``slots``) have elapsed.
    """
    if not 0 <= warmup < slots:
        raise ValueError(f"need 0 <= warmup < slots, got warmup={warmup}, slots={slots}")
    if max_drain is None:
        max_drain = slots
    if engine == "fast":
        return _simulate_fast(params, mobility, slots, warmup, seed, drain, max_drain, trace, lam, block)
    if engine == "reference":
        return _simulate_reference(params, mobility, slots, warmup, seed, drain, max_drain, trace, lam)
    raise ValueError(f"unknown engine {engine!r}")


def _simulate_fast(params, mobility, slots, warmup, seed, drain, max_drain, trace, lam, block):
    stream = SlotStream(params, mobility, seed, lam, block=block)
    state = FastState(params.n, stream.flows, stream.ec_cells)
    deps, qls = [], []
    dep = np.zeros(block, dtype=np.bool_)
    ql = np.zeros(block, dtype=np.int64)
    while True:
        blk = stream.next_block()
        state.advance(blk, params.m, params.q, dep, ql)
        end = blk.start + block
        if trace and blk.start < slots:
            keep = min(block, slots - blk.start)
            deps.append(dep[:keep].copy())
            qls.append(ql[:keep].copy())
        if end >= slots:
            if not drain or end >= slots + max_drain:
                break
            if _drained(state.gen_slot, state.ack, state.gen_count, slots):
                break
    return RunTrace(params, slots, warmup, state.gen_slot, state.deliver_slot, end,
                    np.concatenate(deps) if trace else None,
                    np.concatenate(qls) if trace else None)


def _simulate_reference(params, mobility, slots, warmup, seed, drain, max_drain, trace, lam,
                        debug: bool = False):
    world = World(params, mobility, seed, lam=lam, debug=debug)
    while True:
        world.run_slots(BLOCK)
        end = world.slot
        if end >= slots:
            if not drain or end >= slots + max_drain:
                break
            ack = np.array([world.nodes[world.flows[f]].ack for f in range(params.n)])
            counts = np.array([len(p) for p in world.packets])
            if _drained(_world_gen(world), ack, counts, slots):
                break
    out = trace_from_world(world, slots, warmup)
    if trace:
        dep = np.zeros(slots, dtype=np.bool_)
        dep[[s for s in world.departures if s < slots]] = True
        out.departures = dep
    return out


def _world_gen(world: World) -> np.ndarray:
    cap = max((len(p) for p in world.packets), default=0)
    gen = -np.ones((world.params.n, cap + 1), dtype=np.int64)
    for f, pkts in enumerate(world.packets):
        for p in pkts:
            gen[f, p.seq] = p.gen_slot
    return gen


def trace_from_world(world: World, slots: int, warmup: int) -> RunTrace:
    gen = _world_gen(world)
    dlv = -np.ones_like(gen)
    for f, pkts in enumerate(world.packets):
        for p in pkts:
            if p.deliver_slot is not None:
                dlv[f, p.seq] = p.deliver_slot
    return RunTrace(world.params, slots, warmup, gen, dlv, world.slot)


def replicate(params: NetworkParams, mobility: str = "iid", slots: int = 100_000, warmup: int = 0,
              replications: int = 10, seed: int = 0, **kwargs) -> list[RunMetrics]:
    """Independent replications from spawned seeds."""
    children = np.random.SeedSequence(seed).spawn(replications)
    return [simulate(params, mobility, slots, warmup, child, **kwargs).metrics() for child in children]


def run(params: NetworkParams, mobility: str = "iid", slots: int = 100_000, warmup: int = 0,
        seed=0, **kwargs) -> RunMetrics:
    return simulate(params, mobility, slots, warmup, seed, **kwargs).metrics()
