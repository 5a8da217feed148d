"""Task-driven coalition formation on a single edge server.

Every task holds an equal slice of the system band, split among its members
by :func:`bandwidth_allocate`. A partition is scored lexicographically by
``(makespan, summed task delay)`` where a task's delay is its rounds times
its slowest member's round delay. Users only join tasks whose benefit to
them is positive, and a user moves only if the move lowers that score: the
preference is cooperative first, with individual rationality as a floor.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

from .model import FlTask, FlUser, bandwidth_allocate, user_benefit

MAX_ROUNDS = 10_000


@dataclass
class Coalition:
    task_id: int
    members: list[int]
    bandwidth: dict[int, float] = field(default_factory=dict)
    delay: float = 0.0            # rounds x slowest member's round delay


@dataclass
class CoalitionResult:
    coalitions: list[Coalition]
    unassigned: list[int]
    switches: int
    converged: bool

    @property
    def assignment(self) -> dict[int, int]:
        return {u: c.task_id for c in self.coalitions for u in c.members}

    @property
    def makespan(self) -> float:
        return max((c.delay for c in self.coalitions), default=0.0)

    @property
    def total_delay(self) -> float:
        return float(sum(c.delay for c in self.coalitions))


class _Scorer:
    def __init__(self, tasks: Sequence[FlTask], users: Sequence[FlUser], system_bandwidth: float):
        if system_bandwidth <= 0:
            raise ValueError("bandwidth must be > 0")
        self.tasks = {t.task_id: t for t in tasks}
        self.users = {u.user_id: u for u in users}
        self.task_band = system_bandwidth / len(tasks)
        self._cache: dict[tuple[int, tuple[int, ...]], tuple[float, dict[int, float]]] = {}

    def coalition(self, tid: int, members: tuple[int, ...]) -> tuple[float, dict[int, float]]:
        key = (tid, members)
        if key not in self._cache:
            if not members:
                self._cache[key] = (0.0, {})
            else:
                task = self.tasks[tid]
                alloc = bandwidth_allocate([self.users[u] for u in members], task, self.task_band)
                self._cache[key] = (task.rounds * float(alloc.delays.max()),
                                    dict(zip(members, map(float, alloc.bandwidth))))
        return self._cache[key]

    def score(self, assign: dict[int, int]) -> tuple[float, float]:
        delays = [self.coalition(t, tuple(sorted(u for u, a in assign.items() if a == t)))[0]
                  for t in self.tasks]
        return (max(delays), sum(delays))

    def willing(self, uid: int) -> list[int]:
        """Tasks the user would join: positive benefit at an equal share of the task band."""
        u = self.users[uid]
        return [tid for tid, t in sorted(self.tasks.items())
                if user_benefit(u, t, self.task_band) > 0]


def _better(a: tuple[float, float], b: tuple[float, float], rtol: float = 1e-12) -> bool:
    """Strict lexicographic improvement with a relative tolerance against float noise."""
    if a[0] < b[0] * (1 - rtol):
        return True
    if a[0] <= b[0] * (1 + rtol):
        return a[1] < b[1] * (1 - rtol)
    return False


def coalition_form(tasks: Sequence[FlTask], users: Sequence[FlUser], system_bandwidth: float,
                   max_rounds: int = MAX_ROUNDS) -> CoalitionResult:
    """Local search from several seeds; each run applies improving switches and exchanges until none remains."""
    if not tasks:
        raise ValueError("at least one task required")
    sc = _Scorer(tasks, users, system_bandwidth)
    options = {u.user_id: sc.willing(u.user_id) for u in users}
    best = None
    switches = 0
    converged = True
    for start in _starts(sc, options):
        assign, score, moves, done = _improve(sc, options, start, max_rounds)
        switches += moves
        converged &= done
        if best is None or _better(score, best[1]):
            best = (assign, score)
    assign = best[0]
    coalitions = []
    for tid in sorted(sc.tasks):
        members = tuple(sorted(u for u, t in assign.items() if t == tid))
        delay, bw = sc.coalition(tid, members)
        coalitions.append(Coalition(tid, list(members), bw, delay))
    unassigned = sorted(u for u in options if u not in assign)
    return CoalitionResult(coalitions, unassigned, switches, converged)


def _starts(sc: _Scorer, options: dict[int, list[int]]) -> list[dict[int, int]]:
    """Seeds: greedy insertion in id order, round-robin, and everyone on each task."""
    willing = sorted(u for u, o in options.items() if o)
    greedy: dict[int, int] = {}
    for uid in willing:
        pick = None
        for tid in options[uid]:
            s = sc.score({**greedy, uid: tid})
            if pick is None or _better(s, pick[0]):
                pick = (s, tid)
        greedy[uid] = pick[1]
    starts = [greedy, {u: options[u][i % len(options[u])] for i, u in enumerate(willing)}]
    for tid in sorted(sc.tasks):
        starts.append({u: tid if tid in options[u] else options[u][0] for u in willing})
    return starts


def _improve(sc: _Scorer, options: dict[int, list[int]], assign: dict[int, int],
             max_rounds: int) -> tuple[dict[int, int], tuple[float, float], int, bool]:
    """Apply improving single switches, then pairwise exchanges, until neither helps."""
    current = sc.score(assign)
    switches = 0
    for _ in range(max_rounds):
        moved = False
        for uid in sorted(assign):
            for tid in options[uid]:
                if tid == assign[uid]:
                    continue
                trial = {**assign, uid: tid}
                s = sc.score(trial)
                if _better(s, current):
                    assign, current, moved = trial, s, True
                    switches += 1
        if not moved:
            for a, b in itertools.combinations(sorted(assign), 2):
                ta, tb = assign[a], assign[b]
                if ta == tb or tb not in options[a] or ta not in options[b]:
                    continue
                trial = {**assign, a: tb, b: ta}
                s = sc.score(trial)
                if _better(s, current):
                    assign, current, moved = trial, s, True
                    switches += 1
        if not moved:
            return assign, current, switches, True
    return assign, current, switches, False


def partition_score(tasks: Sequence[FlTask], users: Sequence[FlUser], system_bandwidth: float,
                    assignment: dict[int, int]) -> tuple[float, float]:
    """``(makespan, summed delay)`` of an explicit user -> task assignment."""
    return _Scorer(tasks, users, system_bandwidth).score(assignment)


def is_switch_stable(result: CoalitionResult, tasks: Sequence[FlTask], users: Sequence[FlUser],
                     system_bandwidth: float) -> bool:
    """No single user can move to another willing task and lower the partition score."""
    sc = _Scorer(tasks, users, system_bandwidth)
    assign = result.assignment
    base = sc.score(assign)
    for uid, tid in assign.items():
        for other in sc.willing(uid):
            if other != tid and _better(sc.score({**assign, uid: other}), base):
                return False
    return True

