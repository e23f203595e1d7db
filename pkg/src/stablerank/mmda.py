"""Many-to-many deferred acceptance: user-proposing, item-capped.

Users propose down their rankings one item at a time; an item holds at most
``caps[i]`` users and, when over capacity, drops the user it ranks lowest.
The result is the user-optimal stable matching.
"""
from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .data import CapacityConfig, Matching, PreferenceProfile, ScoreMatrix, validate_feasibility
from .errors import ConfigError, ExhaustedPreferencesError, InfeasibleCapacityError
from . import metrics

QUEUES = ("fifo", "lifo", "random")


@dataclass(frozen=True)
class Proposal:
    """One proposal as seen by a listener (after any rejection)."""

    counter: int
    user: int
    item: int
    position: int  # 0-based position of ``item`` in the user's ranking
    ejected: Optional[int]
    held: tuple  # users item now holds, best first


@dataclass
class MmdaTrace:
    sample_interval: int
    snapshots: list = field(default_factory=list)  # (proposals, user_utility, item_utility, filled_slots)

    def rows(self):
        return list(self.snapshots)


class _Pending:
    """Pending-user queue with FIFO, LIFO or uniformly random service order."""

    def __init__(self, discipline: str, users, rng=None):
        if discipline not in QUEUES:
            raise ConfigError(f"unknown queue discipline {discipline!r}")
        self.discipline = discipline
        self.items = deque(users)
        self.rng = rng if rng is not None else random.Random(0)

    def __bool__(self):
        return bool(self.items)

    def push(self, u):
        self.items.append(u)

    def pop(self):
        if self.discipline == "fifo":
            return self.items.popleft()
        if self.discipline == "lifo":
            return self.items.pop()
        j = self.rng.randrange(len(self.items))
        self.items[j], self.items[-1] = self.items[-1], self.items[j]
        return self.items.pop()


def _fill_short_users(user_lists, held_count, caps, short, fill_scores):
    """Top up exhausted users with under-cap items, best-scored first."""
    for u in sorted(short):
        need = caps.k - len(user_lists[u])
        free = np.flatnonzero(held_count < caps.caps)
        free = free[~np.isin(free, user_lists[u])]
        if fill_scores is not None:
            s = fill_scores.values[u, free]
            s = np.where(np.isnan(s), -np.inf, s)
            free = free[np.argsort(-s, kind="stable")]
        if len(free) < need:
            raise ExhaustedPreferencesError(u, need - len(free))
        for i in free[:need].tolist():
            user_lists[u].append(i)
            held_count[i] += 1


def run_mmda(
    prefs: PreferenceProfile,
    caps: CapacityConfig,
    *,
    queue: str = "fifo",
    rng: Optional[random.Random] = None,
    listener: Optional[Callable[[Proposal, list], None]] = None,
    fill_remainder: bool = False,
    fill_scores: Optional[ScoreMatrix] = None,
) -> tuple:
    """Run deferred acceptance; returns ``(matching, proposal_count)``.

    ``listener(proposal, user_lists)`` is called after every proposal.
    With ``fill_remainder`` users whose ranking runs out are topped up with
    spare capacity afterwards instead of raising; they are listed in
    ``Matching.filled_users`` and are not covered by the stability guarantee.
    """
    if len(caps.caps) != prefs.n_items:
        raise ConfigError(f"{len(caps.caps)} caps for {prefs.n_items} items")
    required = prefs.n_users * caps.k
    if caps.total < required:
        raise InfeasibleCapacityError(caps.total, required, prefs.n_users, prefs.n_items, caps.k)
    if not fill_remainder:
        validate_feasibility(prefs, caps)

    k = caps.k
    cap = caps.caps.tolist()
    n = prefs.n_users
    rank = prefs.item_rank_table
    user_prefs = prefs.user_prefs
    pref_len = [len(p) for p in user_prefs]
    next_pos = [0] * n
    user_lists = [[] for _ in range(n)]
    held = [[] for _ in range(prefs.n_items)]  # heaps of (-rank, user): worst on top
    pending = _Pending(queue, range(n), rng)
    queued = [True] * n
    short = set()
    counter = 0

    while pending:
        u = pending.pop()
        queued[u] = False
        mine = user_lists[u]
        if len(mine) >= k:
            continue
        pos = next_pos[u]
        if pos >= pref_len[u]:
            if not fill_remainder:
                raise ExhaustedPreferencesError(u, k - len(mine))
            short.add(u)
            continue
        i = int(user_prefs[u][pos])
        next_pos[u] = pos + 1
        counter += 1
        heap = held[i]
        heapq.heappush(heap, (-int(rank[i, u]), u))
        mine.append(i)
        ejected = None
        if len(heap) > cap[i]:
            ejected = heapq.heappop(heap)[1]
            user_lists[ejected].remove(i)
            if not queued[ejected]:
                pending.push(ejected)
                queued[ejected] = True
        if len(mine) < k and not queued[u]:
            pending.push(u)
            queued[u] = True
        if listener is not None:
            best_first = tuple(v for _, v in sorted(heap, reverse=True))
            listener(Proposal(counter, u, i, pos, ejected, best_first), user_lists)

    held_count = np.array([len(h) for h in held], dtype=np.int64)
    if short:
        _fill_short_users(user_lists, held_count, caps, short, fill_scores)
    matching = Matching.from_lists(user_lists, prefs.n_items, filled_users=short)
    return matching, counter


def mmda_rerank(prefs: PreferenceProfile, caps: CapacityConfig, **kwargs) -> Matching:
    """User-optimal stable matching of ``caps.k`` items per user."""
    return run_mmda(prefs, caps, **kwargs)[0]


def _snapshot(counter, user_lists, prefs, caps):
    m = Matching.from_lists(user_lists, prefs.n_items)
    return (
        counter,
        metrics.aggregate_user_utility(m, prefs),
        metrics.aggregate_item_utility(m, prefs, caps),
        m.total(),
    )


def mmda_trace(prefs: PreferenceProfile, caps: CapacityConfig, sample_interval: int = 1, **kwargs):
    """Run MMDA while recording both sides' aggregate utilities.

    A snapshot is taken every ``sample_interval`` proposals and once more at
    the end, so the last row always describes the returned matching.
    """
    if sample_interval < 1:
        raise ConfigError("sample interval must be positive")
    trace = MmdaTrace(sample_interval)
    outer = kwargs.pop("listener", None)

    def record(p: Proposal, user_lists):
        if outer is not None:
            outer(p, user_lists)
        if p.counter % sample_interval == 0:
            trace.snapshots.append(_snapshot(p.counter, user_lists, prefs, caps))

    matching, total = run_mmda(prefs, caps, listener=record, **kwargs)
    final = (
        total,
        metrics.aggregate_user_utility(matching, prefs),
        metrics.aggregate_item_utility(matching, prefs, caps),
        matching.total(),
    )
    if trace.snapshots and trace.snapshots[-1][0] == total:
        trace.snapshots[-1] = final  # differs only after fill_remainder top-ups
    else:
        trace.snapshots.append(final)
    return matching, trace
