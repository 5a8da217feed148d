"""Many-to-one stable matching of users to FL tasks (one edge server per task)."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .model import FlTask, FlUser, round_delay, task_benefit, user_benefit


def per_user_bandwidth(task: FlTask) -> float:
    """Each admitted user gets an equal slice of the serving server's band."""
    return task.bandwidth / max(task.quota, 1)


@dataclass
class MatchingState:
    assignment: dict[int, int | None]
    quotas: dict[int, int]
    user_prefs: dict[int, list[int]]             # acceptable tasks, best first
    task_prefs: dict[int, list[int]]             # users, best first
    proposals: int = 0
    members: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.members:
            self.members = {t: sorted(u for u, a in self.assignment.items() if a == t)
                            for t in self.quotas}


def preferences(tasks: Sequence[FlTask], users: Sequence[FlUser]):
    """Strict preference lists after ascending-id tie-breaks.

    Users rank only tasks with positive benefit ``O``; tasks rank every user
    by ``K = 1/tau``.
    """
    user_prefs = {}
    for u in users:
        scored = [(-user_benefit(u, t, per_user_bandwidth(t)), t.task_id) for t in tasks]
        user_prefs[u.user_id] = [tid for o, tid in sorted(scored) if -o > 0]
    task_prefs = {}
    for t in tasks:
        scored = [(-task_benefit(u, t, per_user_bandwidth(t)), u.user_id) for u in users]
        task_prefs[t.task_id] = [uid for _, uid in sorted(scored)]
    return user_prefs, task_prefs


def match_stable(tasks: Sequence[FlTask], users: Sequence[FlUser],
                 proposing: str = "users") -> MatchingState:
    """Deferred acceptance; ``proposing`` selects the side that proposes."""
    if proposing not in ("users", "tasks"):
        raise ValueError("proposing must be 'users' or 'tasks'")
    if len({t.task_id for t in tasks}) != len(tasks) or len({u.user_id for u in users}) != len(users):
        raise ValueError("ids must be unique")
    user_prefs, task_prefs = preferences(tasks, users)
    quotas = {t.task_id: t.quota for t in tasks}
    if proposing == "users":
        assignment, proposals = _users_propose(user_prefs, task_prefs, quotas)
    else:
        assignment, proposals = _tasks_propose(user_prefs, task_prefs, quotas)
    return MatchingState(assignment, quotas, user_prefs, task_prefs, proposals)


def _users_propose(user_prefs, task_prefs, quotas):
    rank = {t: {u: i for i, u in enumerate(p)} for t, p in task_prefs.items()}
    nxt = {u: 0 for u in user_prefs}
    held: dict[int, list[int]] = {t: [] for t in quotas}
    free = sorted(user_prefs)
    proposals = 0
    while free:
        u = free.pop(0)
        if nxt[u] >= len(user_prefs[u]):
            continue
        t = user_prefs[u][nxt[u]]
        nxt[u] += 1
        proposals += 1
        held[t].append(u)
        held[t].sort(key=lambda v: rank[t][v])
        if len(held[t]) > quotas[t]:
            free.append(held[t].pop())
            free.sort()
    assignment = {u: None for u in user_prefs}
    for t, us in held.items():
        for u in us:
            assignment[u] = t
    return assignment, proposals


def _tasks_propose(user_prefs, task_prefs, quotas):
    urank = {u: {t: i for i, t in enumerate(p)} for u, p in user_prefs.items()}
    nxt = {t: 0 for t in task_prefs}
    held: dict[int, list[int]] = {t: [] for t in task_prefs}
    current: dict[int, int | None] = {u: None for u in user_prefs}
    proposals = 0
    while True:
        active = [t for t in sorted(task_prefs)
                  if len(held[t]) < quotas[t] and nxt[t] < len(task_prefs[t])]
        if not active:
            break
        t = active[0]
        u = task_prefs[t][nxt[t]]
        nxt[t] += 1
        proposals += 1
        if t not in urank[u]:
            continue                       # task unacceptable to this user
        cur = current[u]
        if cur is None or urank[u][t] < urank[u][cur]:
            if cur is not None:
                held[cur].remove(u)
            held[t].append(u)
            current[u] = t
    return current, proposals


def blocking_pairs(state: MatchingState) -> list[tuple[int, int]]:
    """Every (user, task) pair that would both rather be matched to each other."""
    out = []
    trank = {t: {u: i for i, u in enumerate(p)} for t, p in state.task_prefs.items()}
    members = {t: [u for u, a in state.assignment.items() if a == t] for t in state.quotas}
    for u, prefs in state.user_prefs.items():
        cur = state.assignment[u]
        for t in prefs:
            if t == cur:
                break                      # everything after is worse for u
            ms = members[t]
            if len(ms) < state.quotas[t] or any(trank[t][u] < trank[t][m] for m in ms):
                out.append((u, t))
    return out


def write_matching_csv(state: MatchingState, tasks: Sequence[FlTask], users: Sequence[FlUser],
                       path: str | Path) -> Path:
    """Rows ``(user, task, delay_s, benefit)`` for matched users."""
    tmap = {t.task_id: t for t in tasks}
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "task", "delay_s", "benefit"])
        for u in sorted(users, key=lambda u: u.user_id):
            tid = state.assignment.get(u.user_id)
            if tid is None:
                continue
            t = tmap[tid]
            bw = per_user_bandwidth(t)
            w.writerow([u.user_id, tid, repr(round_delay(u, t, bw).total), repr(user_benefit(u, t, bw))])
    return path
