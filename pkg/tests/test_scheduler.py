import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from instances import micro_scheduling_instance
from oracles import brute_force_min_slots
from railsim6g.core.rng import stream
from railsim6g.scheduler import (BS, FlowReq, Frame, Hop, Schedule, Topology, admission_order,
                                 check_feasible, priority, railway_topology, random_flows,
                                 schedule_greedy_qos, schedule_location_aware,
                                 schedule_serial_baseline, slots_needed, system_throughput)

SCHEDULERS = (schedule_location_aware, schedule_greedy_qos, schedule_serial_baseline)
FRAME = Frame(pilot_time=0.0, slot_count=8, slot_len=1e-3)


def _empty(topo, frame, hops=()):
    hops = list(hops)
    return Schedule(hops, np.zeros((len(hops), frame.slot_count), dtype=bool),
                    np.zeros((len(hops), frame.slot_count)))


def _relay_topo():
    links = [(BS, "RAU0"), ("RAU0", "MR0"), (BS, "RAU1"), ("RAU1", "MR1")]
    return Topology(links, 2, capacities=[2e9, 2e9, 2e9, 2e9])


# --- feasibility checker -------------------------------------------------------

def test_empty_schedule_is_feasible():
    topo = _relay_topo()
    assert check_feasible(_empty(topo, FRAME), topo, FRAME, []) == []


def test_half_duplex_violation_names_slot():
    topo = Topology([(BS, "RAU0"), ("RAU0", "MR0")], 1, capacities=[1e9, 1e9])
    sched = _empty(topo, FRAME, [Hop(0, 0, 0, BS, "RAU0"), Hop(0, 1, 1, "RAU0", "MR0")])
    sched.activation[0, 2] = True
    sched.rates[0, 2] = 1e9
    sched.activation[:, 3] = True
    sched.rates[:, 3] = 1e9
    sched.unmet = [0]
    out = check_feasible(sched, topo, FRAME, [FlowReq(0, "MR0", 1e6)])
    assert [(v.constraint, v.slot) for v in out] == [("half_duplex", 3)]


def test_qos_met_exactly_at_boundary():
    frame = Frame(pilot_time=2e-3, slot_count=8, slot_len=1e-3)
    topo = Topology([(BS, "MR0")], 1, capacities=[1e9])
    q = 3 * 1e9 * 1e-3 / frame.duration          # three full slots deliver exactly q
    sched = _empty(topo, frame, [Hop(0, 0, 0, BS, "MR0")])
    sched.activation[0, :3] = True
    sched.rates[0, :3] = 1e9
    assert check_feasible(sched, topo, frame, [FlowReq(0, "MR0", q)]) == []
    short = FlowReq(0, "MR0", q * 1.001)
    assert [v.constraint for v in check_feasible(sched, topo, frame, [short])] == ["qos"]


def test_other_constraints_detected():
    topo = Topology([(BS, "MR0"), (BS, "MR1"), (BS, "RAU0"), ("RAU0", "MR2")], 1,
                    capacities=[1e9] * 4)
    hops = [Hop(0, 0, 0, BS, "MR0"), Hop(1, 0, 1, BS, "MR1"), Hop(2, 0, 2, BS, "RAU0"),
            Hop(2, 1, 3, "RAU0", "MR2")]
    sched = _empty(topo, FRAME, hops)
    sched.activation[[0, 1], 0] = True          # two BS links with one antenna
    sched.rates[[0, 1], 0] = 1e9
    sched.activation[3, 1] = True               # relay forwards before receiving
    sched.rates[3, 1] = 1e9
    sched.activation[2, 2] = True
    sched.rates[2, 2] = 5e9                      # above capacity
    sched.unmet = [0, 1, 2]
    kinds = {v.constraint for v in check_feasible(sched, topo, FRAME, [])}
    assert kinds == {"bs_antennas", "rate", "relay_causality"}


def test_prefix_throughput_violation():
    topo = Topology([(BS, "RAU0"), ("RAU0", "MR0")], 1, capacities=[1e9, 1e9])
    sched = _empty(topo, FRAME, [Hop(0, 0, 0, BS, "RAU0"), Hop(0, 1, 1, "RAU0", "MR0")])
    sched.activation[1, 0] = sched.activation[0, 1] = True
    sched.rates[1, 0] = sched.rates[0, 1] = 1e9
    sched.unmet = [0]
    out = check_feasible(sched, topo, FRAME, [])
    assert ("prefix_throughput", 0) in {(v.constraint, v.slot) for v in out}


def test_dimension_mismatch_raises():
    topo = _relay_topo()
    bad = Schedule([], np.zeros((0, 3), dtype=bool), np.zeros((0, 3)))
    with pytest.raises(ValueError):
        check_feasible(bad, topo, FRAME, [])


def test_unserved_flow_must_be_listed():
    topo = _relay_topo()
    out = check_feasible(_empty(topo, FRAME), topo, FRAME, [FlowReq(0, "MR0", 1e6)])
    assert [v.constraint for v in out] == ["qos"]


# --- priority ----------------------------------------------------------------

def test_priority_one_slot_flow():
    frame = Frame(pilot_time=1e-3, slot_count=4, slot_len=1e-3)
    q = 1e9 * frame.slot_len / frame.duration
    assert priority(1e9, q, frame) == pytest.approx(1.0, rel=1e-15)
    assert slots_needed(1e9, q, frame) == 1


def test_priority_linear_in_rate():
    assert priority(2e9, 1e8, FRAME) == 2 * priority(1e9, 1e8, FRAME)


def test_priority_desk_numbers():
    frame = Frame(pilot_time=0.0, slot_count=64, slot_len=1e-3)
    # 10 Gbps * 1 ms / (500 Mbps * 64 ms) = 1e7 / 3.2e7
    assert priority(10e9, 500e6, frame) == pytest.approx(0.3125, rel=1e-15)
    assert slots_needed(10e9, 500e6, frame) == 4


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(-6, 6))
def test_admission_order_invariant_under_common_scaling(seed, power):
    scale = 2.0 ** power           # exact in binary floating point
    rng = stream(seed, "scale")
    topo = railway_topology(rng, n_mrs=12)
    flows = random_flows(topo, 6, rng)
    frame = Frame()
    scaled_topo = Topology(topo.links, topo.bs_antennas, capacities=topo.capacity * scale)
    plain_topo = Topology(topo.links, topo.bs_antennas, capacities=topo.capacity)
    scaled_flows = [FlowReq(f.flow_id, f.dest, f.qos * scale) for f in flows]
    assert admission_order(plain_topo, flows, frame) == admission_order(scaled_topo, scaled_flows, frame)


# --- schedulers ----------------------------------------------------------------

def test_single_direct_flow_closed_form():
    frame = Frame(pilot_time=6.4e-3, slot_count=64, slot_len=1e-3)
    topo = Topology([(BS, "MR0")], 1, capacities=[3e9])
    q = 400e6
    sched = schedule_location_aware(topo, [FlowReq(0, "MR0", q)], frame)
    assert sched.slots_used == math.ceil(q * frame.duration / (3e9 * frame.slot_len))
    assert sched.unmet == []


def test_independent_flows_run_concurrently():
    frame = Frame(pilot_time=0.0, slot_count=16, slot_len=1e-3)
    topo = Topology([(BS, "MR0"), (BS, "MR1")], 2, capacities=[1e9, 2e9])
    flows = [FlowReq(0, "MR0", 200e6), FlowReq(1, "MR1", 300e6)]
    sched = schedule_location_aware(topo, flows, frame)
    need = [slots_needed(1e9, 200e6, frame), slots_needed(2e9, 300e6, frame)]
    assert sched.slots_used == max(need)


def test_relay_flow_schedules_first_hop_first():
    frame = Frame(pilot_time=0.0, slot_count=8, slot_len=1e-3)
    topo = Topology([(BS, "RAU0"), ("RAU0", "MR0")], 1, capacities=[1e9, 1e9])
    sched = schedule_location_aware(topo, [FlowReq(0, "MR0", 250e6)], frame)
    first = [h.hop for h in sched.hops]
    rows = {h.hop: i for i, h in enumerate(sched.hops)}
    assert first == [0, 1]
    assert np.argmax(sched.activation[rows[0]]) < np.argmax(sched.activation[rows[1]])
    assert check_feasible(sched, topo, frame, [FlowReq(0, "MR0", 250e6)]) == []


def test_serial_two_one_slot_flows():
    frame = Frame(pilot_time=0.0, slot_count=8, slot_len=1e-3)
    topo = Topology([(BS, "MR0"), (BS, "MR1")], 2, capacities=[1e9, 1e9])
    flows = [FlowReq(0, "MR0", 1e9 / 8), FlowReq(1, "MR1", 1e9 / 8)]
    assert schedule_serial_baseline(topo, flows, frame).slots_used == 2


@pytest.mark.parametrize("scheduler", SCHEDULERS)
def test_empty_flows_use_no_slots(scheduler):
    topo = _relay_topo()
    sched = scheduler(topo, [], FRAME)
    assert sched.slots_used == 0
    assert system_throughput(sched, FRAME) == 0.0


def test_equal_rates_greedy_matches_location_aware():
    # enough antennas that admission order cannot delay anyone
    frame = Frame(pilot_time=0.0, slot_count=32, slot_len=1e-3)
    links = [(BS, f"MR{i}") for i in range(5)]
    topo = Topology(links, 5, capacities=[1e9] * 5)
    flows = [FlowReq(i, f"MR{i}", q) for i, q in enumerate((100e6, 300e6, 200e6, 150e6, 250e6))]
    assert schedule_greedy_qos(topo, flows, frame).slots_used == \
        schedule_location_aware(topo, flows, frame).slots_used


def test_exact_flow_throughput_equals_qos():
    frame = Frame(pilot_time=1e-3, slot_count=8, slot_len=1e-3)
    topo = Topology([(BS, "MR0")], 1, capacities=[1e9])
    sched = schedule_location_aware(topo, [FlowReq(0, "MR0", 123e6)], frame)
    assert system_throughput(sched, frame) == pytest.approx(123e6, rel=1e-12)


def test_infeasible_flow_listed_unmet():
    frame = Frame(pilot_time=0.0, slot_count=2, slot_len=1e-3)
    topo = Topology([(BS, "MR0"), (BS, "MR1")], 2, capacities=[1e9, 1e9])
    flows = [FlowReq(0, "MR0", 2e9), FlowReq(1, "MR1", 1e8)]
    for scheduler in SCHEDULERS:
        sched = scheduler(topo, flows, frame)
        assert 0 in sched.unmet and 1 not in sched.unmet
        assert check_feasible(sched, topo, frame, flows) == []


def test_throughput_matches_independent_sum():
    rng = stream(4, "tp")
    topo = railway_topology(rng)
    flows = random_flows(topo, 10, rng)
    frame = Frame()
    sched = schedule_location_aware(topo, flows, frame)
    by_flow = {}
    for i, h in enumerate(sched.hops):
        delivered = sched.rates[i].sum() * frame.slot_len / frame.duration
        if h.dst.startswith("MR"):
            by_flow[h.flow_id] = delivered
    assert system_throughput(sched, frame) == pytest.approx(sum(by_flow.values()), rel=1e-12)


@pytest.mark.parametrize("kwargs", [{"n_flows": 2}, {"n_flows": 24}])
def test_interference_rates_respected(kwargs):
    rng = stream(11, "int")
    topo = railway_topology(rng)
    flows = random_flows(topo, kwargs["n_flows"], rng)
    frame = Frame()
    sched = schedule_location_aware(topo, flows, frame)
    for t in range(frame.slot_count):
        on = np.nonzero(sched.activation[:, t])[0]
        if len(on):
            achievable = topo.rates([sched.hops[i].link for i in on])
            assert np.all(sched.rates[on, t] <= achievable * (1 + 1e-12))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 24), st.integers(1, 8))
def test_every_scheduler_emits_feasible_schedules(seed, n_flows, antennas):
    rng = stream(seed, "feasible")
    topo = railway_topology(rng, bs_antennas=antennas)
    flows = random_flows(topo, n_flows, rng)
    frame = Frame()
    for scheduler in SCHEDULERS:
        sched = scheduler(topo, flows, frame)
        assert check_feasible(sched, topo, frame, flows) == []
        met = set(f.flow_id for f in flows) - set(sched.unmet)
        achieved = sched.achieved(frame)
        assert all(achieved[f.flow_id] >= f.qos * (1 - 1e-9) for f in flows if f.flow_id in met)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 23))
def test_serial_slots_monotone_in_flows(seed, n_flows):
    rng = stream(seed, "mono")
    topo = railway_topology(rng)
    flows = random_flows(topo, n_flows + 1, rng)
    frame = Frame(slot_count=512)
    fewer = schedule_serial_baseline(topo, flows[:n_flows], frame).slots_used
    more = schedule_serial_baseline(topo, flows, frame).slots_used
    assert more >= fewer


@pytest.mark.parametrize("seed", range(8))
def test_micro_instance_close_to_brute_force(seed):
    frame = Frame(pilot_time=0.0, slot_count=4, slot_len=1e-3)
    topo, flows = micro_scheduling_instance(seed)
    sched = schedule_location_aware(topo, flows, frame)
    assert check_feasible(sched, topo, frame, flows) == []
    best = brute_force_min_slots(topo.links, topo.capacity, topo.bs_antennas,
                                 [(f.dest, f.qos) for f in flows], frame)
    if best is not None and not sched.unmet:
        assert best <= sched.slots_used <= best + 1


def test_brute_force_oracle_on_hand_instance():
    # one relay flow of exactly one slot per hop: two slots are needed
    frame = Frame(pilot_time=0.0, slot_count=4, slot_len=1e-3)
    links = [(BS, "RAU0"), ("RAU0", "MR0")]
    assert brute_force_min_slots(links, [1e9, 1e9], 1, [("MR0", 1e9 / 4)], frame) == 2
    assert brute_force_min_slots(links, [1e9, 1e9], 1, [("MR0", 1e9)], frame) is None


# --- validation and dumps ----------------------------------------------------------

@pytest.mark.parametrize("links", [[("MR0", BS)], [("RAU0", "RAU1")], [(BS, "MR0"), (BS, "MR0")]])
def test_inadmissible_topologies(links):
    with pytest.raises(ValueError):
        Topology(links, 1, capacities=[1e9] * len(links))


def test_flow_validation():
    topo = _relay_topo()
    with pytest.raises(ValueError):
        FlowReq(0, "MR0", 0.0)
    with pytest.raises(ValueError):
        schedule_location_aware(topo, [FlowReq(0, "MR0", 1e6), FlowReq(1, "MR0", 1e6)], FRAME)
    with pytest.raises(ValueError):
        schedule_location_aware(topo, [FlowReq(0, "MR9", 1e6)], FRAME)


def test_schedule_csv(tmp_path):
    frame = Frame(pilot_time=0.0, slot_count=4, slot_len=1e-3)
    topo = Topology([(BS, "RAU0"), ("RAU0", "MR0")], 1, capacities=[1e9, 1e9])
    sched = schedule_location_aware(topo, [FlowReq(0, "MR0", 1e9 / 4)], frame)
    lines = sched.write_csv(tmp_path / "s.csv").read_text().splitlines()
    assert lines == ["slot,link_src,link_dst,rate_bps", "0,BS,RAU0,1000000000.0",
                     "1,RAU0,MR0,1000000000.0"]
