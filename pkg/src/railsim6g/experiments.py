"""Built-in scenarios. Each trial function returns rows for the aggregator."""
from __future__ import annotations

import numpy as np

from . import access, channel, otfs, scheduler, twin
from .core.config import ScenarioConfig
from .core.runner import register
from .federation import (FlTask, FlUser, blocking_pairs, coalition_form, match_stable,
                         per_user_bandwidth, user_benefit)


def _seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**63 - 1))


# ---------------------------------------------------------------------------
# scheduling

def _sched_setup(cfg: ScenarioConfig, rng: np.random.Generator):
    link = channel.ThzLinkParams(
        carrier_freq=cfg["channel.carrier_freq"], bandwidth=cfg["channel.bandwidth"],
        efficiency=cfg["channel.efficiency"], tx_power=cfg["channel.tx_power"],
        tx_gain_dbi=cfg["channel.tx_gain"], rx_gain_dbi=cfg["channel.rx_gain"],
        noise_psd=cfg["channel.noise_psd"], absorption_coeff=cfg["channel.absorption"])
    radio = scheduler.Radio(link, cfg["sched.beamwidth"], cfg["sched.sidelobe_gain"])
    topo = scheduler.railway_topology(
        rng, n_mrs=cfg["sched.mrs"], n_raus=cfg["sched.raus"], rau_spacing=cfg["sched.rau_spacing"],
        mr_spacing=cfg["sched.mr_spacing"], bs_offset=cfg["sched.bs_offset"],
        train_window=cfg["sched.train_window"], max_range=cfg["sched.max_range"],
        bs_antennas=cfg["sched.bs_antennas"], direct_links=cfg["sched.direct_links"], radio=radio)
    frame = scheduler.Frame(cfg["sched.pilot_time"], cfg["sched.slots"], cfg["sched.slot_len"])
    flows = scheduler.random_flows(topo, max(cfg["sched.flow_counts"]), rng,
                                   cfg["sched.qos_min"], cfg["sched.qos_max"])
    return topo, frame, flows


def _sched_runs(cfg: ScenarioConfig, rng: np.random.Generator):
    topo, frame, flows = _sched_setup(cfg, rng)
    for n in cfg["sched.flow_counts"]:
        subset = flows[:n]
        yield n, frame, {
            "proposed": scheduler.schedule_location_aware(topo, subset, frame),
            "serial": scheduler.schedule_serial_baseline(topo, subset, frame),
            "greedy": scheduler.schedule_greedy_qos(topo, subset, frame),
        }


@register("sched_fig18", ("num_flows",), "Slots used by each scheduler versus number of flows")
def sched_slots(cfg, rng, trial):
    rows = []
    for n, _, runs in _sched_runs(cfg, rng):
        row = {"num_flows": n}
        row.update({f"slots_{k}": s.slots_used for k, s in runs.items()})
        row.update({f"unmet_{k}": len(s.unmet) for k, s in runs.items()})
        rows.append(row)
    return rows


@register("sched_fig19", ("num_flows",), "System throughput (bit/s) versus number of flows")
def sched_throughput(cfg, rng, trial):
    rows = []
    for n, frame, runs in _sched_runs(cfg, rng):
        row = {"num_flows": n}
        row.update({f"throughput_{k}": scheduler.system_throughput(s, frame) for k, s in runs.items()})
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# grant-free access

def _access_config(cfg: ScenarioConfig, snr_db: float = 0.0) -> access.AccessConfig:
    return access.AccessConfig(cfg["access.n_rail"], cfg["access.n_onboard"], cfg["access.pilot_len"],
                               cfg["access.activity_prob"], cfg["access.train_present_prob"], snr_db)


@register("access_fig25", ("snr_db",), "NMSE of each sparse-recovery solver versus SNR")
def access_nmse(cfg, rng, trial):
    ac = _access_config(cfg)
    problem = access.gen_problem(ac, rng)
    while problem.sparsity == 0:            # condition on at least one active user
        problem = access.gen_problem(ac, rng)
    rows = []
    for snr in cfg["access.snr_list"]:
        p = access.with_snr(problem, snr)
        row = {"snr_db": snr}
        row.update({f"nmse_{name}": access.solve(p, name).nmse for name in cfg["access.solvers"]})
        rows.append(row)
    return rows


@register("access_fig26", ("snr_db",), "Data recovery ratio of SAMP and BSAMP-CP versus SNR")
def access_recovery(cfg, rng, trial):
    seed = _seed(rng)
    rows = []
    for snr in cfg["access.snr_list"]:
        # same activity, channels and data at every SNR; only the noise level changes
        g = np.random.default_rng(seed)
        frame = access.gen_frame(_access_config(cfg, snr), g, cfg["access.frame_len"],
                                 cfg["access.lengths"])
        while len(frame.active) == 0:
            frame = access.gen_frame(_access_config(cfg, snr), g, cfg["access.frame_len"],
                                     cfg["access.lengths"])
        rows.append({"snr_db": snr,
                     "mu_samp": access.solve_samp_frame(frame).recovery_ratio,
                     "mu_bsamp_cp": access.solve_bsamp_cp(frame).recovery_ratio,
                     "active_users": len(frame.active)})
    return rows


@register("access_activity", ("active_count",), "Histogram of active users per draw")
def access_activity(cfg, rng, trial):
    ac = _access_config(cfg)
    counts = np.array([len(access.draw_activity(ac, rng)[0]) for _ in range(1000)])
    hist = np.bincount(counts, minlength=ac.n_users + 1)
    return [{"active_count": k, "frequency": int(c)} for k, c in enumerate(hist)]


# ---------------------------------------------------------------------------
# RIS channel

def _ris_config(cfg: ScenarioConfig, n: int, ray_seed: int) -> channel.RisConfig:
    return channel.RisConfig(element_count=n, carrier_freq=cfg["ris.carrier_freq"],
                             train_speed=cfg["ris.train_speed"], ray_seed=ray_seed)


@register("ris_fig3", ("elements",), "|CIR| with optimised RIS phases versus element count")
def ris_cir_stats(cfg, rng, trial):
    ray_seed = _seed(rng)
    rows = []
    for n in cfg["ris.elements"]:
        rc = channel.with_optimal_phases(_ris_config(cfg, n, ray_seed))
        cir = channel.ris_cir(rc)
        rows.append({"elements": n, "cir_abs": abs(cir.total), "cir_power": abs(cir.total) ** 2})
    return rows


def _aging_rows(cfg, rng):
    seed = _seed(rng)
    rows = []
    for n in cfg["aging.elements"]:
        for fdts in cfg["aging.fdts"]:
            curve = channel.average_se_curve(
                _ris_config(cfg, n, 0), channel.FadingProcess(fdts), cfg["aging.horizon"],
                cfg["aging.tx_antennas"], trials=cfg["aging.realizations"],
                snr_db=cfg["aging.snr_db"], seed=seed)
            rows += [{"elements": n, "fdts": fdts, "slot": k, "se": float(v)} for k, v in enumerate(curve)]
    return rows


@register("aging_fig11", ("elements", "fdts", "slot"), "Spectral efficiency per slot for several f_D T_s",
          defaults={"aging.elements": [32], "aging.fdts": [0.0, 0.01, 0.05]})
def aging_doppler(cfg, rng, trial):
    return _aging_rows(cfg, rng)


@register("aging_fig12", ("elements", "fdts", "slot"), "Spectral efficiency per slot for several RIS sizes",
          defaults={"aging.elements": [32, 128], "aging.fdts": [0.01]})
def aging_elements(cfg, rng, trial):
    return _aging_rows(cfg, rng)


# ---------------------------------------------------------------------------
# OTFS

@register("otfs_fig14", ("offset",), "Delay-Doppler sparsity versus fractional tap offset")
def otfs_leakage(cfg, rng, trial):
    M, N = cfg["otfs.subcarriers"], cfg["otfs.symbols"]
    grid = otfs.TfGrid.critical(M, N, cfg["otfs.subcarrier_spacing"])
    n_taps = cfg["otfs.taps"]
    k = rng.choice(M // 2, n_taps, replace=False)
    l = rng.integers(-N // 4, N // 4, n_taps)
    gains = (rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps)) / np.sqrt(2)
    fading_seed = _seed(rng)
    rows = []
    for off in cfg["otfs.offsets"]:
        bins = [(float(kk) + off, float(ll) + off, complex(g)) for kk, ll, g in zip(k, l, gains)]
        row = {"offset": off}
        for label, tc in (("static", np.inf), ("varying", cfg["otfs.coherence_ratio"] * grid.frame_duration)):
            ch = otfs.TdlChannel.on_grid(grid, bins, coherence_time=tc, fading_seed=fading_seed)
            m = otfs.leakage_metrics(otfs.sfft(otfs.tdl_to_tf(ch, grid), grid), ch)
            row[f"compactness_{label}"] = m.compactness
            row[f"paths_{label}"] = m.effective_path_count
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# federated learning

def _fl_population(cfg: ScenarioConfig, rng: np.random.Generator):
    users = [FlUser(i, rng.uniform(200, 2000), rng.uniform(0.5e9, 2e9), 10 ** rng.uniform(-11, -9),
                    rng.uniform(0.05, 0.2), energy_price=rng.uniform(0.1, 2.0))
             for i in range(cfg["fed.users"])]
    tasks = [FlTask(m, rng.uniform(1e6, 1e7), rng.uniform(1e4, 1e5), rng.uniform(2.0, 20.0),
                    rounds=cfg["fed.rounds"], quota=cfg["fed.quota"], bandwidth=cfg["fed.bandwidth"])
             for m in range(cfg["fed.tasks"])]
    return tasks, users


@register("fed_coalition", ("tasks",), "Coalition formation delay on a shared edge server")
def fed_coalition(cfg, rng, trial):
    tasks, users = _fl_population(cfg, rng)
    res = coalition_form(tasks, users, cfg["fed.bandwidth"])
    return [{"tasks": len(tasks), "makespan_s": res.makespan, "total_delay_s": res.total_delay,
             "assigned_users": len(res.assignment), "switches": res.switches}]


@register("fed_matching", ("tasks",), "Stable user-task matching across edge servers")
def fed_matching(cfg, rng, trial):
    tasks, users = _fl_population(cfg, rng)
    state = match_stable(tasks, users)
    tmap = {t.task_id: t for t in tasks}
    benefits = [user_benefit(u, tmap[state.assignment[u.user_id]], per_user_bandwidth(tmap[state.assignment[u.user_id]]))
                for u in users if state.assignment[u.user_id] is not None]
    return [{"tasks": len(tasks), "matched_users": len(benefits),
             "blocking_pairs": len(blocking_pairs(state)),
             "mean_benefit": float(np.mean(benefits)) if benefits else 0.0}]


# ---------------------------------------------------------------------------
# digital twins

@register("twin_assoc", ("twins",), "Iteration time of optimised versus naive twin association")
def twin_assoc(cfg, rng, trial):
    bss = [twin.BsNode(i, rng.uniform(1e9, 1e10), rng.uniform(1e8, 1e9), rng.uniform(1e8, 1e9))
           for i in range(cfg["twin.bss"])]
    twins = [twin.TwinSpec(j, rng.uniform(1e3, 1e4), rng.uniform(10, 100)) for j in range(cfg["twin.twins"])]
    chain = twin.ChainParams(producer_count=min(cfg["twin.producers"], len(bss)),
                             block_size=cfg["twin.block_size"], model_size=cfg["twin.model_size"])

    def total(assoc):
        return twin.iteration_time(assoc, bss, twins, chain).total

    return [{"twins": len(twins),
             "t_optimized": total(twin.optimize_assoc(bss, twins, chain)),
             "t_round_robin": total(twin.baseline_round_robin(bss, twins)),
             "t_all_on_one": total(twin.baseline_all_on_one(bss, twins, chain))}]
