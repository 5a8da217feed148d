"""THz train-to-ground flow scheduling in a vacuum-tube railway.

A base station (BS) with ``bs_antennas`` transmit antennas feeds remote
access units (RAUs) placed along the tube; RAUs relay to the mobile relays
(MRs) on the train roof. Time is slotted; a frame holds a pilot period
``T_s`` followed by ``M`` slots of length ``dT``.

A flow's achieved throughput on a link is ``sum_t R_l^t dT / (T_s + M dT)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .channel import ThzLinkParams, path_gain, shannon_rate

BS = "BS"


def node_kind(name: str) -> str:
    if name == BS:
        return "bs"
    if name.startswith("RAU"):
        return "rau"
    if name.startswith("MR"):
        return "mr"
    raise ValueError(f"unknown node {name!r}")


@dataclass(frozen=True)
class Frame:
    pilot_time: float = 6.4e-3
    slot_count: int = 64
    slot_len: float = 1e-3

    def __post_init__(self):
        if self.pilot_time < 0 or self.slot_count < 1 or self.slot_len <= 0:
            raise ValueError("frame needs pilot_time >= 0, slot_count >= 1, slot_len > 0")

    @property
    def duration(self) -> float:
        return self.pilot_time + self.slot_count * self.slot_len


@dataclass(frozen=True)
class FlowReq:
    flow_id: int
    dest: str
    qos: float        # bit/s

    def __post_init__(self):
        if self.qos <= 0:
            raise ValueError("QoS requirement must be positive")


@dataclass(frozen=True)
class Radio:
    """Directional THz front-end shared by every node."""
    link: ThzLinkParams = ThzLinkParams(absorption_coeff=1e-4)
    beamwidth: float = math.radians(2.0)
    sidelobe_gain_dbi: float = -10.0


class Topology:
    """Nodes, admissible directed links and their rates.

    Rates come either from geometry through ``radio`` (interference via
    cone-sector beams) or from an explicit ``capacities`` table, in which case
    links do not interfere.
    """

    def __init__(self, links: Sequence[tuple[str, str]], bs_antennas: int,
                 capacities: Sequence[float] | None = None,
                 positions: dict[str, tuple[float, float]] | None = None,
                 radio: Radio | None = None):
        if bs_antennas < 1:
            raise ValueError("the BS needs at least one transmit antenna")
        self.links = [tuple(l) for l in links]
        if len(set(self.links)) != len(self.links):
            raise ValueError("duplicate links")
        for s, d in self.links:
            ks, kd = node_kind(s), node_kind(d)
            if (ks, kd) not in (("bs", "rau"), ("bs", "mr"), ("rau", "mr")):
                raise ValueError(f"inadmissible link {s}->{d}")
        self.index = {l: i for i, l in enumerate(self.links)}
        self.bs_antennas = int(bs_antennas)
        self.positions = dict(positions or {})
        self.radio = radio
        if capacities is not None:
            cap = np.asarray(capacities, dtype=float)
            if cap.shape != (len(self.links),):
                raise ValueError("one capacity per link required")
            self._explicit = True
        else:
            if radio is None or not positions:
                raise ValueError("geometry-based rates need positions and a radio")
            cap = np.array([self._rate_alone(i) for i in range(len(self.links))])
            self._explicit = False
        if np.any(cap <= 0):
            raise ValueError("link rates must be positive")
        self.capacity = cap

    @property
    def mrs(self) -> list[str]:
        names = {d for _, d in self.links if node_kind(d) == "mr"}
        return sorted(names, key=_natural)

    @property
    def raus(self) -> list[str]:
        names = {n for l in self.links for n in l if node_kind(n) == "rau"}
        return sorted(names, key=_natural)

    def _vec(self, a: str, b: str) -> np.ndarray:
        return np.subtract(self.positions[b], self.positions[a], dtype=float)

    def _rx_power(self, src: str, dst: str, tx_main: bool, rx_main: bool) -> float:
        link = self.radio.link
        d = float(np.linalg.norm(self._vec(src, dst)))
        g = path_gain(link, d)  # main-lobe gains included
        if not tx_main:
            g *= 10 ** ((self.radio.sidelobe_gain_dbi - link.tx_gain_dbi) / 10)
        if not rx_main:
            g *= 10 ** ((self.radio.sidelobe_gain_dbi - link.rx_gain_dbi) / 10)
        return link.tx_power * g

    def _rate_alone(self, i: int) -> float:
        s, d = self.links[i]
        link = self.radio.link
        return shannon_rate(link.efficiency, link.bandwidth, self._rx_power(s, d, True, True),
                            link.noise_psd)

    def _in_cone(self, apex: str, aim: str, target: str) -> bool:
        a = self._vec(apex, aim)
        b = self._vec(apex, target)
        nb = np.linalg.norm(b)
        if nb == 0:
            return True
        cosang = float(a @ b) / (np.linalg.norm(a) * nb)
        return cosang >= math.cos(self.radio.beamwidth / 2)

    def interference(self, victim: int, others: Iterable[int]) -> float:
        """Co-band interference power (W) at the receiver of ``victim``."""
        if self._explicit:
            return 0.0
        vs, vd = self.links[victim]
        total = 0.0
        for j in others:
            if j == victim:
                continue
            js, jd = self.links[j]
            if js == vd or self.positions[js] == self.positions[vd]:
                continue
            # the victim must sit inside the interferer's main beam
            if not self._in_cone(js, jd, vd):
                continue
            rx_main = self._in_cone(vd, vs, js)
            total += self._rx_power(js, vd, True, rx_main)
        return total

    def rates(self, active: Sequence[int]) -> np.ndarray:
        """Rates of ``active`` links when transmitting together."""
        active = list(active)
        if self._explicit or len(active) <= 1:
            return self.capacity[active].copy()
        link = self.radio.link
        out = np.empty(len(active))
        for k, i in enumerate(active):
            s, d = self.links[i]
            out[k] = shannon_rate(link.efficiency, link.bandwidth, self._rx_power(s, d, True, True),
                                  link.noise_psd, self.interference(i, active))
        return out


def _natural(name: str):
    head = name.rstrip("0123456789")
    tail = name[len(head):]
    return (head, int(tail) if tail else -1)


def railway_topology(rng: np.random.Generator, *, n_mrs: int = 24, n_raus: int = 7,
                     rau_spacing: float = 100.0, mr_spacing: float = 8.0,
                     bs_offset: float = 60.0, rau_offset: float = 3.0,
                     train_window: float = 150.0, max_range: float = 120.0,
                     bs_antennas: int = 4, direct_links: bool = False,
                     radio: Radio | None = None) -> Topology:
    """Vacuum-tube layout: BS beside the tube, RAUs along it, MRs on the train roof.

    The train head is placed uniformly in ``[-train_window, train_window]``.
    """
    radio = radio or Radio()
    pos: dict[str, tuple[float, float]] = {BS: (0.0, bs_offset)}
    for r in range(n_raus):
        pos[f"RAU{r}"] = ((r - (n_raus - 1) / 2) * rau_spacing, rau_offset)
    head = float(rng.uniform(-train_window, train_window))
    for i in range(n_mrs):
        pos[f"MR{i}"] = (head - i * mr_spacing, 0.0)
    links = [(BS, f"RAU{r}") for r in range(n_raus)]
    for i in range(n_mrs):
        mr = f"MR{i}"
        if direct_links:
            links.append((BS, mr))
        for r in range(n_raus):
            rau = f"RAU{r}"
            if math.dist(pos[rau], pos[mr]) <= max_range:
                links.append((rau, mr))
    return Topology(links, bs_antennas, positions=pos, radio=radio)


def random_flows(topo: Topology, count: int, rng: np.random.Generator,
                 qos_min: float = 10e6, qos_max: float = 500e6) -> list[FlowReq]:
    """``count`` flows to distinct reachable MRs with QoS uniform in [qos_min, qos_max]."""
    reachable = [m for m in topo.mrs if routes_for(topo, m)]
    if count > len(reachable):
        raise ValueError(f"{count} flows requested but only {len(reachable)} reachable MRs")
    dests = rng.permutation(len(reachable))[:count]
    qos = rng.uniform(qos_min, qos_max, count)
    return [FlowReq(i, reachable[int(d)], float(q)) for i, (d, q) in enumerate(zip(dests, qos))]


# ---------------------------------------------------------------------------
# Schedules and feasibility

@dataclass(frozen=True)
class Hop:
    flow_id: int
    hop: int          # 0 = from BS, 1 = RAU -> MR
    link: int
    src: str
    dst: str


@dataclass
class Schedule:
    hops: list[Hop]
    activation: np.ndarray        # bool (n_hops, M)
    rates: np.ndarray             # bit/s (n_hops, M)
    unmet: list[int] = field(default_factory=list)

    @property
    def slots_used(self) -> int:
        used = np.nonzero(self.activation.any(axis=0))[0]
        return int(used[-1]) + 1 if len(used) else 0

    def hop_throughput(self, frame: Frame) -> np.ndarray:
        return self.rates.sum(axis=1) * frame.slot_len / frame.duration

    def achieved(self, frame: Frame) -> dict[int, float]:
        """Delivered throughput per flow, measured on its last hop."""
        q = self.hop_throughput(frame)
        out: dict[int, float] = {}
        last: dict[int, int] = {}
        for i, h in enumerate(self.hops):
            if h.hop >= last.get(h.flow_id, -1):
                last[h.flow_id] = h.hop
                out[h.flow_id] = float(q[i])
        return out

    def write_csv(self, path: str | Path) -> Path:
        """Rows ``(slot, link_src, link_dst, rate_bps)`` for every active hop."""
        path = Path(path)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["slot", "link_src", "link_dst", "rate_bps"])
            for t in range(self.activation.shape[1]):
                for i in np.nonzero(self.activation[:, t])[0]:
                    h = self.hops[i]
                    w.writerow([t, h.src, h.dst, repr(float(self.rates[i, t]))])
        return path


@dataclass(frozen=True)
class Violation:
    constraint: str
    slot: int | None
    link: tuple[str, str] | None
    detail: str = ""


def check_feasible(schedule: Schedule, topo: Topology, frame: Frame,
                   flows: Sequence[FlowReq], rtol: float = 1e-9) -> list[Violation]:
    """All constraint violations of ``schedule``; an empty list means feasible.

    Checked: half duplex at relays, one reception per receiver and one
    transmission per RAU/MR per slot, BS antenna budget, recorded rates not
    above the interference-aware rate, QoS of every flow not listed as unmet,
    and BS-sourced traffic covering RAU-sourced traffic on every slot prefix
    (per relayed flow as well as in aggregate).
    """
    n_hops = len(schedule.hops)
    M = frame.slot_count
    if schedule.activation.shape != (n_hops, M) or schedule.rates.shape != (n_hops, M):
        raise ValueError(f"schedule arrays must be ({n_hops}, {M}); got "
                         f"{schedule.activation.shape} and {schedule.rates.shape}")
    out: list[Violation] = []
    act = schedule.activation.astype(bool)
    rates = schedule.rates
    for i, h in enumerate(schedule.hops):
        if topo.links[h.link] != (h.src, h.dst):
            out.append(Violation("link", None, (h.src, h.dst), "hop does not match topology link"))
    if np.any(rates[~act] != 0) or np.any(rates < 0):
        out.append(Violation("rate", None, None, "inactive hops must carry zero rate, rates >= 0"))

    for t in range(M):
        on = np.nonzero(act[:, t])[0]
        if len(on) == 0:
            continue
        senders: dict[str, int] = {}
        receivers: dict[str, int] = {}
        for i in on:
            h = schedule.hops[i]
            senders[h.src] = senders.get(h.src, 0) + 1
            receivers[h.dst] = receivers.get(h.dst, 0) + 1
        for node, c in receivers.items():
            if c > 1:
                out.append(Violation("single_receive", t, None, f"{node} receives {c} links"))
            if node in senders:
                out.append(Violation("half_duplex", t, None, f"{node} sends and receives"))
        for node, c in senders.items():
            if node == BS:
                if c > topo.bs_antennas:
                    out.append(Violation("bs_antennas", t, None, f"{c} > {topo.bs_antennas}"))
            elif c > 1:
                out.append(Violation("single_transmit", t, None, f"{node} sends {c} links"))
        links = [schedule.hops[i].link for i in on]
        feasible_rates = topo.rates(links)
        for k, i in enumerate(on):
            if rates[i, t] > feasible_rates[k] * (1 + rtol):
                h = schedule.hops[i]
                out.append(Violation("rate", t, (h.src, h.dst),
                                     f"{rates[i, t]:.6g} > achievable {feasible_rates[k]:.6g}"))

    q_hop = schedule.hop_throughput(frame)
    seen = {h.flow_id for h in schedule.hops}
    unmet = set(schedule.unmet)
    for f in flows:
        if f.flow_id in unmet:
            continue
        if f.flow_id not in seen:
            out.append(Violation("qos", None, None, f"flow {f.flow_id} neither served nor listed unmet"))
            continue
        hops = [i for i, h in enumerate(schedule.hops) if h.flow_id == f.flow_id]
        if schedule.hops[max(hops, key=lambda i: schedule.hops[i].hop)].dst != f.dest:
            out.append(Violation("qos", None, None, f"flow {f.flow_id} does not reach {f.dest}"))
        for i in hops:
            if q_hop[i] < f.qos * (1 - rtol):
                h = schedule.hops[i]
                out.append(Violation("qos", None, (h.src, h.dst),
                                     f"flow {f.flow_id}: {q_hop[i]:.6g} < {f.qos:.6g}"))

    bits = rates * frame.slot_len
    from_bs = np.array([h.src == BS for h in schedule.hops], dtype=bool)
    from_rau = np.array([node_kind(h.src) == "rau" for h in schedule.hops], dtype=bool)
    cum_bs = np.cumsum(bits[from_bs].sum(axis=0)) if from_bs.any() else np.zeros(M)
    cum_rau = np.cumsum(bits[from_rau].sum(axis=0)) if from_rau.any() else np.zeros(M)
    for t in np.nonzero(cum_rau > cum_bs * (1 + rtol) + 1e-6)[0]:
        out.append(Violation("prefix_throughput", int(t), None,
                             f"RAU-sourced {cum_rau[t]:.6g} b > BS-sourced {cum_bs[t]:.6g} b"))
    by_flow: dict[int, dict[int, int]] = {}
    for i, h in enumerate(schedule.hops):
        by_flow.setdefault(h.flow_id, {})[h.hop] = i
    for fid, hops in by_flow.items():
        if 0 in hops and 1 in hops:
            got = np.concatenate([[0.0], np.cumsum(bits[hops[0]])[:-1]])
            sent = np.cumsum(bits[hops[1]])
            bad = np.nonzero(sent > got * (1 + rtol) + 1e-6)[0]
            if len(bad):
                h = schedule.hops[hops[1]]
                out.append(Violation("relay_causality", int(bad[0]), (h.src, h.dst),
                                     f"flow {fid} forwards more than it has received"))
        elif 1 in hops:
            h = schedule.hops[hops[1]]
            out.append(Violation("relay_causality", None, (h.src, h.dst),
                                 f"flow {fid} relayed without a first hop"))
    return out


def system_throughput(schedule: Schedule, frame: Frame) -> float:
    """Sum over flows of the delivered throughput (bit/s)."""
    return float(sum(schedule.achieved(frame).values()))


# ---------------------------------------------------------------------------
# Priorities and routes

def priority(rate: float, qos: float, frame: Frame) -> float:
    """``R dT / (q (T_s + M dT))``: inverse of the slots a link needs for its flow."""
    return rate * frame.slot_len / (qos * frame.duration)


def slots_needed(rate: float, qos: float, frame: Frame) -> int:
    # guard against 1/Pr landing a hair above an integer
    return max(1, math.ceil(1.0 / priority(rate, qos, frame) - 1e-12))


def routes_for(topo: Topology, mr: str) -> list[tuple[int, ...]]:
    """Candidate routes to ``mr`` as link-index tuples: direct, then one per RAU."""
    out = []
    if (BS, mr) in topo.index:
        out.append((topo.index[(BS, mr)],))
    for rau in topo.raus:
        a, b = (BS, rau), (rau, mr)
        if a in topo.index and b in topo.index:
            out.append((topo.index[a], topo.index[b]))
    return out


def _route_need(topo: Topology, route: tuple[int, ...], flow: FlowReq, frame: Frame) -> int:
    return sum(slots_needed(topo.capacity[l], flow.qos, frame) for l in route)


def best_individual_routes(topo: Topology, flows: Sequence[FlowReq], frame: Frame) -> dict[int, tuple[int, ...]]:
    """Each flow on the route needing the fewest slots in isolation."""
    out = {}
    for f in flows:
        cands = routes_for(topo, f.dest)
        if cands:
            out[f.flow_id] = min(cands, key=lambda r: (_route_need(topo, r, f, frame), r))
    return out


def nearest_rau_routes(topo: Topology, flows: Sequence[FlowReq]) -> dict[int, tuple[int, ...]]:
    """Fixed association: direct link if present, else the geographically nearest RAU."""
    out = {}
    for f in flows:
        cands = routes_for(topo, f.dest)
        if not cands:
            continue
        if len(cands[0]) == 1:
            out[f.flow_id] = cands[0]
            continue
        if topo.positions:
            def dist(r):
                rau = topo.links[r[1]][0]
                return math.dist(topo.positions[rau], topo.positions[f.dest])
            out[f.flow_id] = min(cands, key=lambda r: (dist(r), r))
        else:
            out[f.flow_id] = cands[0]
    return out


def location_aware_routes(topo: Topology, flows: Sequence[FlowReq], frame: Frame) -> dict[int, tuple[int, ...]]:
    """Relay selection balancing relay and BS-antenna load.

    Flows are taken in descending priority of their best route; each picks
    the route whose busiest resource would finish earliest.
    """
    load: dict[str, float] = {}
    bs_load = 0.0
    chosen = {}

    def best_pr(f):
        return max((min(priority(topo.capacity[l], f.qos, frame) for l in r)
                    for r in routes_for(topo, f.dest)), default=0.0)

    for f in sorted(flows, key=lambda f: (-best_pr(f), f.flow_id)):
        cands = routes_for(topo, f.dest)
        if not cands:
            continue
        best = None
        for r in cands:
            needs = [slots_needed(topo.capacity[l], f.qos, frame) for l in r]
            bs_finish = bs_load + needs[0] / topo.bs_antennas
            if len(r) == 2:
                rau = topo.links[r[1]][0]
                finish = max(bs_finish, load.get(rau, 0.0) + sum(needs))
            else:
                finish = bs_finish + needs[0] * (1 - 1 / topo.bs_antennas)
            key = (finish, sum(needs), r)
            if best is None or key < best[0]:
                best = (key, r, needs)
        _, r, needs = best
        bs_load += needs[0] / topo.bs_antennas
        if len(r) == 2:
            rau = topo.links[r[1]][0]
            load[rau] = load.get(rau, 0.0) + sum(needs)
        chosen[f.flow_id] = r
    return chosen


# ---------------------------------------------------------------------------
# Slot-filling engine shared by the concurrent schedulers

def _hops_for(topo: Topology, flows: Sequence[FlowReq], routes: dict[int, tuple[int, ...]]) -> list[Hop]:
    hops = []
    for f in flows:
        for k, l in enumerate(routes.get(f.flow_id, ())):
            s, d = topo.links[l]
            hops.append(Hop(f.flow_id, k, l, s, d))
    return hops


def _fill(topo: Topology, flows: Sequence[FlowReq], frame: Frame,
          routes: dict[int, tuple[int, ...]], key: Callable[[Hop, FlowReq], tuple],
          min_keep: float = 0.5) -> Schedule:
    hops = _hops_for(topo, flows, routes)
    M = frame.slot_count
    act = np.zeros((len(hops), M), dtype=bool)
    rates = np.zeros((len(hops), M))
    fmap = {f.flow_id: f for f in flows}
    need_bits = {f.flow_id: f.qos * frame.duration for f in flows}
    got = np.zeros(len(hops))                      # delivered bits per hop
    idx = {(h.flow_id, h.hop): i for i, h in enumerate(hops)}
    dT = frame.slot_len

    def done(fid: int) -> bool:
        n = len(routes.get(fid, ()))
        return n > 0 and all(got[idx[(fid, k)]] >= need_bits[fid] * (1 - 1e-12) for k in range(n))

    def _room(j: int) -> float:
        # bits hop j may still carry: never beyond demand, relays only what they hold
        room = need_bits[hops[j].flow_id] - got[j]
        if hops[j].hop == 1:
            room = min(room, got[idx[(hops[j].flow_id, 0)]] - got[j])
        return max(room, 0.0)

    order = sorted(range(len(hops)), key=lambda i: key(hops[i], fmap[hops[i].flow_id]) + (i,))
    for t in range(M):
        if all(done(f.flow_id) for f in flows if f.flow_id in routes):
            break
        active: list[int] = []
        eff: list[float] = []
        senders: dict[str, int] = {}
        receivers: set[str] = set()
        for i in order:
            h = hops[i]
            fid = h.flow_id
            if got[i] >= need_bits[fid] * (1 - 1e-12):
                continue
            buffered = math.inf
            if h.hop == 1:
                upstream = got[idx[(fid, 0)]]
                buffered = upstream - got[i]
                # forward a full slot's worth, or the tail once the first hop is done
                if buffered <= 0 or (buffered < topo.capacity[h.link] * dT
                                     and upstream < need_bits[fid] * (1 - 1e-12)):
                    continue
            if h.dst in receivers or h.dst in senders or h.src in receivers:
                continue
            if h.src == BS:
                if senders.get(BS, 0) >= topo.bs_antennas:
                    continue
            elif h.src in senders:
                continue
            trial = active + [i]
            r = topo.rates([hops[j].link for j in trial])
            caps = [min(r[k], _room(j) / dT) for k, j in enumerate(trial)]
            if active:
                if sum(caps) <= sum(eff):
                    continue
                if any(r[k] < min_keep * topo.capacity[hops[j].link] for k, j in enumerate(trial)):
                    continue
            active, eff = trial, caps
            senders[h.src] = senders.get(h.src, 0) + 1
            receivers.add(h.dst)
        for k, i in enumerate(active):
            act[i, t] = True
            rates[i, t] = eff[k]
        for k, i in enumerate(active):
            got[i] += eff[k] * dT
    unmet = sorted(f.flow_id for f in flows if not done(f.flow_id))
    return Schedule(hops, act, rates, unmet)


def admission_order(topo: Topology, flows: Sequence[FlowReq], frame: Frame,
                    routes: dict[int, tuple[int, ...]] | None = None) -> list[tuple[int, int, int]]:
    """``(flow_id, hop, link)`` in the order the location-aware scheduler considers them."""
    if routes is None:
        routes = location_aware_routes(topo, flows, frame)
    hops = _hops_for(topo, flows, routes)
    fmap = {f.flow_id: f for f in flows}
    ranked = sorted(range(len(hops)), key=lambda i: (
        -priority(topo.capacity[hops[i].link], fmap[hops[i].flow_id].qos, frame), i))
    return [(hops[i].flow_id, hops[i].hop, hops[i].link) for i in ranked]


def schedule_location_aware(topo: Topology, flows: Sequence[FlowReq], frame: Frame) -> Schedule:
    """Location-aware QoS scheduler.

    Relays are chosen by location and load, then every slot admits pending
    hops in descending priority ``Pr(l)`` (ties: lower hop index) while the
    half-duplex, single-radio and BS-antenna constraints hold and the added
    link raises the slot's delivered rate. Relay hops forward only buffered
    data, waiting for a full slot's worth unless the first hop has finished.
    Transmissions stop at each flow's demand. Flows that miss their QoS within the frame are listed in ``unmet``.

    A second pass admits hops with the most hops still behind them first
    (priority breaks ties), so relay chains start early; the pass serving
    more flows in fewer slots is returned.
    """
    _check_flows(topo, flows)
    cap = topo.capacity
    best = None
    # load-balanced relays first; fall back to per-flow fastest routes if that fits better
    for routes in (location_aware_routes(topo, flows, frame),
                   best_individual_routes(topo, flows, frame)):
        def by_priority(h, f):
            return (-priority(cap[h.link], f.qos, frame),)

        def chain_first(h, f, routes=routes):
            return (h.hop - len(routes[f.flow_id]), -priority(cap[h.link], f.qos, frame))

        for key in (by_priority, chain_first):
            sched = _fill(topo, flows, frame, routes, key=key)
            score = (len(sched.unmet), sched.slots_used)
            if best is None or score < best[0]:
                best = (score, sched)
    return best[1]


def schedule_greedy_qos(topo: Topology, flows: Sequence[FlowReq], frame: Frame) -> Schedule:
    """Maximal compatible link set per slot, filled by descending QoS demand.

    Stand-in for QoS-aware independent-set baselines; relays are the
    geographically nearest RAU.
    """
    _check_flows(topo, flows)
    routes = nearest_rau_routes(topo, flows)
    return _fill(topo, flows, frame, routes, key=lambda h, f: (-f.qos,))


def schedule_serial_baseline(topo: Topology, flows: Sequence[FlowReq], frame: Frame) -> Schedule:
    """TDMA comparator: one link per slot, flows served to completion in arrival order.

    Flows that no longer fit in the frame are listed unmet and take no slots.
    """
    _check_flows(topo, flows)
    routes = best_individual_routes(topo, flows, frame)
    hops = _hops_for(topo, flows, routes)
    M = frame.slot_count
    act = np.zeros((len(hops), M), dtype=bool)
    rates = np.zeros((len(hops), M))
    idx = {(h.flow_id, h.hop): i for i, h in enumerate(hops)}
    t = 0
    unmet = []
    for f in flows:
        route = routes.get(f.flow_id)
        if route is None:
            unmet.append(f.flow_id)
            continue
        need = f.qos * frame.duration
        # a flow that cannot finish in the remaining slots is skipped, not started
        if t + sum(slots_needed(topo.capacity[l], f.qos, frame) for l in route) > M:
            unmet.append(f.flow_id)
            continue
        received = math.inf
        ok = True
        for k, l in enumerate(route):
            i = idx[(f.flow_id, k)]
            sent = 0.0
            while sent < need * (1 - 1e-12):
                if t >= M:
                    ok = False
                    break
                r = min(topo.capacity[l], (min(received, need) - sent) / frame.slot_len)
                act[i, t] = True
                rates[i, t] = r
                sent += r * frame.slot_len
                t += 1
            received = sent
            if not ok:
                break
        if not ok:
            unmet.append(f.flow_id)
    return Schedule(hops, act, rates, sorted(unmet))


def _check_flows(topo: Topology, flows: Sequence[FlowReq]) -> None:
    dests = [f.dest for f in flows]
    if len(set(dests)) != len(dests):
        raise ValueError("at most one flow per MR")
    if len({f.flow_id for f in flows}) != len(flows):
        raise ValueError("duplicate flow ids")
    mrs = set(topo.mrs)
    for d in dests:
        if d not in mrs:
            raise ValueError(f"flow destination {d} is not a reachable MR")
