"""Digital-twin edge association with blockchain-anchored federated training.

Base stations (BSs) host digital twins of trains, train them locally,
broadcast the local models across the BS network, and let elected producer
BSs package and verify blocks. Producers are elected by stake (DPoS) in
training coins.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .core.rng import stream


@dataclass(frozen=True)
class BsNode:
    bs_id: int
    cpu_freq: float               # cycles/s
    uplink: float                 # bit/s
    downlink: float               # bit/s
    coins: int = 0
    verify_scale: float = 1.0     # multiplies cpu_freq for block validation

    def __post_init__(self):
        if min(self.cpu_freq, self.uplink, self.downlink, self.verify_scale) <= 0:
            raise ValueError("BS rates and frequencies must be positive")
        if self.coins < 0:
            raise ValueError("coins must be >= 0")


@dataclass(frozen=True)
class TwinSpec:
    twin_id: int
    data_size: float              # samples
    batch: float                  # samples

    def __post_init__(self):
        if self.data_size <= 0 or self.batch <= 0 or self.batch > self.data_size:
            raise ValueError("need 0 < batch <= data_size")

    @property
    def workload(self) -> float:
        return self.batch * self.data_size


@dataclass(frozen=True)
class ChainParams:
    producer_count: int = 3
    block_size: float = 8e6               # bits
    hop_factor: float = 1.0
    verify_cycles_per_bit: float = 100.0
    model_size: float = 1e6               # bits
    cycles_per_sample: float = 1e3
    agg_cycles_per_bit: float = 1.0

    def __post_init__(self):
        if self.producer_count < 1:
            raise ValueError("need at least one producer")
        if min(self.block_size, self.hop_factor, self.verify_cycles_per_bit, self.model_size,
               self.cycles_per_sample) <= 0 or self.agg_cycles_per_bit < 0:
            raise ValueError("chain parameters must be positive")


@dataclass(frozen=True)
class AssocMap:
    assignment: dict[int, int]            # twin id -> BS id

    def counts(self, bs_ids: Sequence[int]) -> dict[int, int]:
        out = {b: 0 for b in bs_ids}
        for b in self.assignment.values():
            out[b] += 1
        return out


@dataclass
class IterationTiming:
    t_cmp_max: float
    t_broadcast_max: float
    t_block_download: float
    t_block_verify: float
    per_bs: dict[int, dict[str, float]] = field(default_factory=dict)

    @property
    def total(self) -> float:
        # local aggregation is reported per BS but left out of the total
        return self.t_cmp_max + self.t_broadcast_max + self.t_block_download + self.t_block_verify

    def write_csv(self, path: str | Path) -> Path:
        """Rows ``(bs_id, t_cmp, t_la, t_pt)`` followed by a totals row."""
        path = Path(path)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bs_id", "t_cmp", "t_la", "t_pt"])
            for b in sorted(self.per_bs):
                row = self.per_bs[b]
                w.writerow([b, repr(row["t_cmp"]), repr(row["t_la"]), repr(row["t_pt"])])
            w.writerow(["total", repr(self.t_cmp_max), "", repr(self.t_broadcast_max)])
        return path


def _check(assoc: AssocMap, bss: Sequence[BsNode], twins: Sequence[TwinSpec], chain: ChainParams) -> None:
    if not bss:
        raise ValueError("need at least one BS")
    if chain.producer_count > len(bss):
        raise ValueError("more producers than BSs")
    ids = {b.bs_id for b in bss}
    if set(assoc.assignment) != {t.twin_id for t in twins}:
        raise ValueError("association must cover every twin exactly once")
    if not set(assoc.assignment.values()) <= ids:
        raise ValueError("association names an unknown BS")


def iteration_time(assoc: AssocMap, bss: Sequence[BsNode], twins: Sequence[TwinSpec],
                   chain: ChainParams) -> IterationTiming:
    """Per-iteration wall time: slowest local training, slowest broadcast, block phase."""
    _check(assoc, bss, twins, chain)
    M = len(bss)
    load = {b.bs_id: 0.0 for b in bss}
    for t in twins:
        load[assoc.assignment[t.twin_id]] += t.workload
    counts = assoc.counts([b.bs_id for b in bss])
    hops = chain.hop_factor * math.log2(M)
    per_bs = {}
    for b in bss:
        k = counts[b.bs_id]
        per_bs[b.bs_id] = {
            "t_cmp": load[b.bs_id] * chain.cycles_per_sample / b.cpu_freq,
            "t_la": k * chain.model_size * chain.agg_cycles_per_bit / b.cpu_freq,
            "t_pt": hops * k * chain.model_size / b.uplink,
        }
    download = max(chain.hop_factor * math.log2(chain.producer_count) * chain.block_size / b.downlink
                   for b in bss)
    verify = max(chain.block_size * chain.verify_cycles_per_bit / (b.cpu_freq * b.verify_scale)
                 for b in bss)
    return IterationTiming(max(r["t_cmp"] for r in per_bs.values()),
                           max(r["t_pt"] for r in per_bs.values()), download, verify, per_bs)


def _assoc_cost(bss: Sequence[BsNode], chain: ChainParams, load: dict[int, float],
                counts: dict[int, int]) -> tuple[float, float]:
    """(T without the assignment-independent block phase, sum of per-BS terms)."""
    hops = chain.hop_factor * math.log2(len(bss))
    cmp = [load[b.bs_id] * chain.cycles_per_sample / b.cpu_freq for b in bss]
    pt = [hops * counts[b.bs_id] * chain.model_size / b.uplink for b in bss]
    return (max(cmp) + max(pt), sum(cmp) + sum(pt))


def _evaluate(bss, twins, chain, assign: dict[int, int]) -> tuple[float, float]:
    load = {b.bs_id: 0.0 for b in bss}
    counts = {b.bs_id: 0 for b in bss}
    for t in twins:
        load[assign[t.twin_id]] += t.workload
        counts[assign[t.twin_id]] += 1
    return _assoc_cost(bss, chain, load, counts)


def _lt(a: tuple[float, float], b: tuple[float, float], rtol: float = 1e-12) -> bool:
    if a[0] < b[0] * (1 - rtol):
        return True
    return a[0] <= b[0] * (1 + rtol) and a[1] < b[1] * (1 - rtol)


def _local_search(bss, twins, chain, assign: dict[int, int], max_rounds: int = 10_000):
    """Improving single moves, then pairwise swaps, until neither helps.

    Per-BS loads and counts are updated in place so each candidate costs
    O(|BS|) rather than a full re-evaluation.
    """
    load = {b.bs_id: 0.0 for b in bss}
    counts = {b.bs_id: 0 for b in bss}
    work = {t.twin_id: t.workload for t in twins}
    for tid, b in assign.items():
        load[b] += work[tid]
        counts[b] += 1
    assign = dict(assign)
    cost = _assoc_cost(bss, chain, load, counts)
    ids = [b.bs_id for b in bss]
    tids = sorted(assign)

    def shift(tid, src, dst, sign=1):
        load[src] -= sign * work[tid]
        load[dst] += sign * work[tid]
        counts[src] -= sign
        counts[dst] += sign

    for _ in range(max_rounds):
        improved = False
        for tid in tids:
            for b in ids:
                src = assign[tid]
                if b == src:
                    continue
                shift(tid, src, b)
                c = _assoc_cost(bss, chain, load, counts)
                if _lt(c, cost):
                    assign[tid], cost, improved = b, c, True
                else:
                    shift(tid, src, b, -1)
        for x, y in itertools.combinations(tids, 2):
            bx, by = assign[x], assign[y]
            if bx == by:
                continue
            shift(x, bx, by)
            shift(y, by, bx)
            c = _assoc_cost(bss, chain, load, counts)
            if _lt(c, cost):
                assign[x], assign[y], cost, improved = by, bx, c, True
            else:
                shift(x, bx, by, -1)
                shift(y, by, bx, -1)
        if not improved:
            break
    return assign, cost


def baseline_all_on_one(bss: Sequence[BsNode], twins: Sequence[TwinSpec], chain: ChainParams) -> AssocMap:
    """Every twin on the single BS that gives the lowest T."""
    best = min(bss, key=lambda b: (_evaluate(bss, twins, chain, {t.twin_id: b.bs_id for t in twins}),
                                   b.bs_id))
    return AssocMap({t.twin_id: best.bs_id for t in twins})


def baseline_round_robin(bss: Sequence[BsNode], twins: Sequence[TwinSpec]) -> AssocMap:
    ids = sorted(b.bs_id for b in bss)
    order = sorted(twins, key=lambda t: t.twin_id)
    return AssocMap({t.twin_id: ids[i % len(ids)] for i, t in enumerate(order)})


def _capped_seeds(bss, twins, chain) -> list[dict[int, int]]:
    """One seed per candidate broadcast bottleneck.

    The broadcast term depends only on twin counts, so each candidate value
    of its maximum caps how many twins every BS may hold. Within those caps
    twins go heaviest first to the BS finishing its training earliest.
    """
    hops = chain.hop_factor * math.log2(len(bss))
    per_twin = {b.bs_id: hops * chain.model_size / b.uplink for b in bss}
    J = len(twins)
    if hops == 0:
        limits = [math.inf]
    else:
        limits = sorted({k * per_twin[b.bs_id] for b in bss for k in range(J + 1)})
    order = sorted(twins, key=lambda t: (-t.workload, t.twin_id))
    seeds = []
    for limit in limits:
        caps = {b.bs_id: (J if per_twin[b.bs_id] == 0 else
                          int(math.floor(limit / per_twin[b.bs_id] * (1 + 1e-12))))
                for b in bss}
        if sum(min(c, J) for c in caps.values()) < J:
            continue
        load = {b.bs_id: 0.0 for b in bss}
        count = {b.bs_id: 0 for b in bss}
        assign = {}
        for t in order:
            b = min((b for b in bss if count[b.bs_id] < caps[b.bs_id]),
                    key=lambda b: ((load[b.bs_id] + t.workload) / b.cpu_freq, b.bs_id))
            assign[t.twin_id] = b.bs_id
            load[b.bs_id] += t.workload
            count[b.bs_id] += 1
        seeds.append(assign)
    return seeds


def optimize_assoc(bss: Sequence[BsNode], twins: Sequence[TwinSpec], chain: ChainParams,
                   polish: int = 3, kicks: int = 60) -> AssocMap:
    """Seeded move/swap local search followed by ``kicks`` perturbation restarts.

    Seeds: heaviest twins first, each to the BS minimising the resulting
    cost; round-robin; best all-on-one; and the ``polish`` best seeds from
    the broadcast-cap enumeration. Ties in T are broken by the sum of
    per-BS terms, then by the lowest seed index. Kicks draw from a fixed
    stream, so the result is deterministic.
    """
    if not bss:
        raise ValueError("need at least one BS")
    if not twins:
        return AssocMap({})
    ids = [b.bs_id for b in bss]
    greedy: dict[int, int] = {}
    placed: list[TwinSpec] = []
    for t in sorted(twins, key=lambda t: (-t.workload, t.twin_id)):
        placed.append(t)
        greedy[t.twin_id] = min(ids, key=lambda b: (_evaluate(bss, placed, chain, {**greedy, t.twin_id: b}), b))
    capped = sorted(_capped_seeds(bss, twins, chain), key=lambda a: _evaluate(bss, twins, chain, a))
    seeds = [greedy, baseline_round_robin(bss, twins).assignment,
             baseline_all_on_one(bss, twins, chain).assignment] + capped[:polish]
    best = None
    for seed in seeds:
        assign, cost = _local_search(bss, twins, chain, dict(seed))
        if best is None or _lt(cost, best[1]):
            best = (assign, cost)
    return AssocMap(_kick_search(bss, twins, chain, *best, kicks)[0])


def _kick_search(bss, twins, chain, assign, cost, kicks: int):
    """Iterated local search: random multi-move kicks from a fixed stream, keep improvements."""
    if len(bss) < 2 or len(twins) < 2:
        return assign, cost
    rng = stream(0, "twin", "kicks")
    ids = [b.bs_id for b in bss]
    tids = sorted(assign)
    for _ in range(kicks):
        trial = dict(assign)
        for tid in rng.choice(tids, min(len(tids), int(rng.integers(2, 4))), replace=False):
            trial[int(tid)] = ids[int(rng.integers(0, len(ids)))]
        trial, c = _local_search(bss, twins, chain, trial)
        if _lt(c, cost):
            assign, cost = trial, c
    return assign, cost


def brute_force_assoc(bss: Sequence[BsNode], twins: Sequence[TwinSpec], chain: ChainParams) -> AssocMap:
    """Exhaustive search over all ``|BS|^|twins|`` associations."""
    ids = [b.bs_id for b in bss]
    tids = [t.twin_id for t in twins]
    best = None
    for combo in itertools.product(ids, repeat=len(tids)):
        assign = dict(zip(tids, combo))
        c = _evaluate(bss, twins, chain, assign)
        if best is None or _lt(c, best[1]):
            best = (assign, c)
    return AssocMap(best[0])


@dataclass
class DposRound:
    producers: list[int]              # election order, also the packaging rotation
    schedule: list[int]               # producer packaging each block this round
    coins: dict[int, int]


def dpos_round(bss: Sequence[BsNode], chain: ChainParams, round_index: int,
               verified: dict[int, bool], reward: int = 1, blocks: int | None = None,
               coins: dict[int, int] | None = None) -> DposRound:
    """Elect the ``M_p`` richest BSs (ties to lower id), rotate packaging, pay verified BSs.

    ``coins`` overrides the BS stakes (to chain rounds); the rotation offset
    advances with ``round_index``.
    """
    if chain.producer_count > len(bss):
        raise ValueError("more producers than BSs")
    if reward < 0:
        raise ValueError("reward must be >= 0")
    stake = dict(coins) if coins is not None else {b.bs_id: b.coins for b in bss}
    ranked = sorted(stake, key=lambda b: (-stake[b], b))
    producers = ranked[:chain.producer_count]
    n_blocks = chain.producer_count if blocks is None else blocks
    schedule = [producers[(round_index + k) % len(producers)] for k in range(n_blocks)]
    new = {b: stake[b] + (reward if verified.get(b, False) else 0) for b in stake}
    return DposRound(producers, schedule, new)
