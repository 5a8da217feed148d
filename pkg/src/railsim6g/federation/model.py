"""Delay, energy and benefit accounting for federated-learning rounds."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

# -174 dBm/Hz thermal noise
DEFAULT_NOISE_PSD = 10 ** ((-174 - 30) / 10)


@dataclass(frozen=True)
class FlTask:
    task_id: int
    model_size: float            # bits uploaded per round
    cycles_per_sample: float
    value: float                 # utility per participating user
    rounds: int = 10
    quota: int = 1               # users the serving edge server admits
    bandwidth: float = 20e6      # Hz at the serving edge server

    def __post_init__(self):
        if min(self.model_size, self.cycles_per_sample, self.value, self.bandwidth) <= 0:
            raise ValueError("task sizes, value and bandwidth must be positive")
        if self.rounds < 1 or self.quota < 0:
            raise ValueError("rounds >= 1 and quota >= 0 required")


@dataclass(frozen=True)
class FlUser:
    user_id: int
    dataset_size: float          # samples
    cpu_freq: float              # cycles/s
    channel_gain: float
    tx_power: float              # W
    energy_price: float = 1.0    # utility per J
    noise_psd: float = DEFAULT_NOISE_PSD
    kappa: float = 1e-28         # effective switched capacitance

    def __post_init__(self):
        if min(self.dataset_size, self.cpu_freq, self.channel_gain, self.tx_power, self.noise_psd) <= 0:
            raise ValueError("user resources must be positive")
        if self.energy_price < 0 or self.kappa < 0:
            raise ValueError("energy price and kappa must be >= 0")


@dataclass(frozen=True)
class RoundDelay:
    comp: float
    comm: float

    @property
    def total(self) -> float:
        return self.comp + self.comm


def spectral_efficiency(user: FlUser, bandwidth: float) -> float:
    snr = user.channel_gain * user.tx_power / (user.noise_psd * bandwidth)
    return math.log2(1 + snr)


def round_delay(user: FlUser, task: FlTask, bandwidth: float) -> RoundDelay:
    """Local training time plus model upload time for one round."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be > 0")
    comp = user.dataset_size * task.cycles_per_sample / user.cpu_freq
    comm = task.model_size / (bandwidth * spectral_efficiency(user, bandwidth))
    return RoundDelay(comp, comm)


def round_energy(user: FlUser, task: FlTask, bandwidth: float) -> tuple[float, float]:
    """(computation, communication) energy in J for one round."""
    d = round_delay(user, task, bandwidth)
    comp = user.kappa * user.cpu_freq ** 2 * user.dataset_size * task.cycles_per_sample
    return comp, user.tx_power * d.comm


def user_benefit(user: FlUser, task: FlTask, bandwidth: float) -> float:
    """``O = Val - price * rounds * (E_comp + E_comm)``."""
    e_comp, e_comm = round_energy(user, task, bandwidth)
    return task.value - user.energy_price * task.rounds * (e_comp + e_comm)


def task_benefit(user: FlUser, task: FlTask, bandwidth: float) -> float:
    """``K = 1 / tau``: a task prefers users that finish a round sooner."""
    return 1.0 / round_delay(user, task, bandwidth).total


@dataclass
class Allocation:
    bandwidth: np.ndarray
    delays: np.ndarray
    iterations: int
    converged: bool


def bandwidth_allocate(users: Sequence[FlUser], task: FlTask, system_bandwidth: float,
                       rtol: float = 1e-12, max_iter: int = 200) -> Allocation:
    """Split ``system_bandwidth`` among ``users`` to minimise the slowest member's delay.

    Each member's delay falls monotonically with its share, so the optimum
    spends the whole budget and equalises every member's round delay. The
    common delay ``t`` is found by root-finding on ``sum_v b_v(t) = B``, where
    ``b_v(t)`` inverts the member's delay curve. ``converged`` is False when
    the outer search hits ``max_iter``.
    """
    n = len(users)
    if n == 0:
        raise ValueError("coalition has no members")
    if system_bandwidth <= 0:
        raise ValueError("bandwidth must be > 0")
    B = system_bandwidth

    def delay(u: FlUser, b: float) -> float:
        return round_delay(u, task, b).total

    if n == 1:
        return Allocation(np.array([B]), np.array([delay(users[0], B)]), 0, True)

    def share(u: FlUser, t: float) -> float:
        # smallest bandwidth meeting delay t; solved in log-bandwidth
        lo, hi = math.log(B * 1e-15), math.log(B)
        if delay(u, B) >= t:
            return B
        return math.exp(brentq(lambda x: delay(u, math.exp(x)) - t, lo, hi, xtol=1e-14, rtol=1e-15,
                               maxiter=500))

    def excess(t: float) -> float:
        return sum(share(u, t) for u in users) - B

    t_lo = max(delay(u, B) for u in users)
    t_hi = max(delay(u, B / n) for u in users)
    # at t_hi every member fits in B/n, so excess(t_hi) <= 0 up to rounding;
    # a non-negative value there means t_hi is already the balanced delay
    if t_hi <= t_lo * (1 + rtol) or excess(t_hi) >= 0:
        t = t_hi
        converged, iterations = True, 0
    else:
        t, info = brentq(excess, t_lo, t_hi,
                         xtol=1e-300, rtol=rtol, maxiter=max_iter, full_output=True,
                         disp=False)
        converged, iterations = info.converged, info.iterations
    bw = np.array([share(u, t) for u in users])
    bw *= B / bw.sum()               # absorb root-finding residue so the budget is met exactly
    return Allocation(bw, np.array([delay(u, b) for u, b in zip(users, bw)]), iterations, converged)
