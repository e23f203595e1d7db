"""Comparison re-rankers and a brute-force stable-matching oracle."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .data import CapacityConfig, Matching, PreferenceProfile, ScoreMatrix, build_preferences
from .errors import ConfigError, DataError, EnumerationGuardError, ShortPreferenceListError
from . import metrics

GUARD = {"users": 6, "items": 6, "k": 2, "cap": 3}


@dataclass(frozen=True)
class BrConfig:
    alpha: float = 0.01

    def __post_init__(self):
        if not math.isfinite(self.alpha) or self.alpha < 0:
            raise ConfigError(f"alpha must be a finite non-negative number, got {self.alpha}")


def topk_identity(prefs: PreferenceProfile, k: int) -> Matching:
    """Each user's first ``k`` ranked items; caps are not enforced."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    lists = []
    for u, ranking in enumerate(prefs.user_prefs):
        if len(ranking) < k:
            raise ShortPreferenceListError(u, len(ranking), k)
        lists.append(ranking[:k].tolist())
    return Matching.from_lists(lists, prefs.n_items)


def bayesian_scores(scores: ScoreMatrix, config: BrConfig) -> ScoreMatrix:
    """s(u,i) * (sum of item i's scores over all scored users) ** -alpha."""
    values = scores.values
    defined = ~np.isnan(values)
    if (values[defined] < 0).any():
        raise DataError("Bayesian re-ranking needs non-negative scores")
    popularity = np.where(defined, values, 0.0).sum(axis=0)
    scored_items = defined.any(axis=0)
    if (popularity[scored_items] <= 0).any():
        raise DataError("an item's scores sum to zero")
    with np.errstate(divide="ignore"):
        factor = np.where(scored_items, popularity, 1.0) ** -config.alpha
    return ScoreMatrix(values * factor[None, :], scores.candidates)


def bayesian_rerank(scores: ScoreMatrix, config: BrConfig, k: int, complete: bool = False) -> Matching:
    prefs = build_preferences(bayesian_scores(scores, config), complete=complete)
    return topk_identity(prefs, k)


# ---------------------------------------------------------------------------
# Stability oracle
# ---------------------------------------------------------------------------


class _Ranks:
    """Rank lookups shared by the stability checks."""

    def __init__(self, prefs: PreferenceProfile):
        self.user = [prefs.user_rank(u) for u in range(prefs.n_users)]
        self.item = [prefs.item_rank(i) for i in range(prefs.n_items)]

    def of_user(self, i, u):
        # users missing from a truncated item ranking sit below it, by index
        pos = self.item[i]
        return pos.get(u, len(pos) + u)

    def blocks(self, u, i, mine, holders, cap) -> bool:
        """Would (u, i) block, given u's items and i's current users?"""
        r = self.user[u].get(i)
        if r is None or i in mine:
            return False
        if not any(r < self.user[u].get(j, math.inf) for j in mine):
            return False
        if len(holders) < cap:
            return True
        mine_rank = self.of_user(i, u)
        return any(mine_rank < self.of_user(i, v) for v in holders)


def blocking_pairs(matching: Matching, prefs: PreferenceProfile, caps: CapacityConfig, ranks=None) -> list:
    """All (u, i) outside the matching that both sides would rather form.

    u must rank i above one of its current items, and i must either have a
    free seat or rank u above one of its current users.
    """
    ranks = ranks or _Ranks(prefs)
    holders = matching.item_lists()
    return [
        (u, i)
        for u in range(prefs.n_users)
        for i in ranks.user[u]
        if ranks.blocks(u, i, matching.user_lists[u], holders[i], caps.caps[i])
    ]


def is_stable(matching: Matching, prefs: PreferenceProfile, caps: CapacityConfig, ranks=None) -> bool:
    return not blocking_pairs(matching, prefs, caps, ranks)


def _check_guard(prefs, caps):
    g = GUARD
    if (prefs.n_users > g["users"] or prefs.n_items > g["items"] or caps.k > g["k"]
            or int(caps.caps.max()) > g["cap"]):
        raise EnumerationGuardError(
            f"instance {prefs.n_users} users x {prefs.n_items} items, k={caps.k}, "
            f"max cap={int(caps.caps.max())} exceeds the enumeration guard "
            f"({g['users']} x {g['items']}, k<={g['k']}, cap<={g['cap']})"
        )


def enumerate_feasible(prefs: PreferenceProfile, caps: CapacityConfig):
    """Yield every assignment giving each user k ranked items within caps."""
    _check_guard(prefs, caps)
    options = [list(itertools.combinations(sorted(int(i) for i in p), caps.k)) for p in prefs.user_prefs]
    cap = caps.caps.tolist()
    load = [0] * prefs.n_items
    chosen = []

    def rec(u):
        if u == prefs.n_users:
            yield Matching.from_lists(chosen, prefs.n_items)
            return
        for combo in options[u]:
            if all(load[i] < cap[i] for i in combo):
                for i in combo:
                    load[i] += 1
                chosen.append(combo)
                yield from rec(u + 1)
                chosen.pop()
                for i in combo:
                    load[i] -= 1

    yield from rec(0)


def enumerate_stable_matchings(prefs: PreferenceProfile, caps: CapacityConfig) -> list:
    """Every complete, cap-respecting matching with no blocking pair.

    Depth-first over users with forward checking. Once user v is placed, every
    item i that v ranks above one of its own items (and does not hold) must
    end up full of users that i ranks above v, otherwise (v, i) blocks. Such a
    claim bars lower-ranked users from i and requires enough eligible users to
    remain. Each candidate is still run through :func:`is_stable`.
    """
    _check_guard(prefs, caps)
    ranks = _Ranks(prefs)
    n, m = prefs.n_users, prefs.n_items
    cap = caps.caps.tolist()
    options = [list(itertools.combinations(sorted(int(i) for i in p), caps.k)) for p in prefs.user_prefs]
    irank = [[ranks.of_user(i, u) for u in range(n)] for i in range(m)]
    open_ = math.inf
    thr = [open_] * m  # users ranked >= thr[i] by i may not hold i
    load = [0] * m
    worst_holder = [-1] * m
    chosen = []
    out = []

    def viable(placed):
        for i in range(m):
            if thr[i] == open_:
                continue
            if worst_holder[i] >= thr[i]:
                return False
            eligible = sum(
                1 for w in range(placed, n) if i in ranks.user[w] and irank[i][w] < thr[i]
            )
            if cap[i] - load[i] > eligible:
                return False
        return True

    def rec(u):
        if u == n:
            out.append(Matching.from_lists(chosen, m))
            return
        for combo in options[u]:
            if any(load[i] >= cap[i] or irank[i][u] >= thr[i] for i in combo):
                continue
            worst = max(ranks.user[u][i] for i in combo)
            saved_thr = thr[:]
            saved_worst = worst_holder[:]
            for i in combo:
                load[i] += 1
                worst_holder[i] = max(worst_holder[i], irank[i][u])
            for i, r in ranks.user[u].items():
                if r < worst and i not in combo:
                    thr[i] = min(thr[i], irank[i][u])
            chosen.append(combo)
            if viable(u + 1):
                rec(u + 1)
            chosen.pop()
            for i in combo:
                load[i] -= 1
            thr[:] = saved_thr
            worst_holder[:] = saved_worst

    rec(0)
    return [mt for mt in out if is_stable(mt, prefs, caps, ranks)]


def user_optimal_oracle(prefs: PreferenceProfile, caps: CapacityConfig) -> Matching:
    """Stable matching with the highest mean user NDCG (ties: smallest pair set)."""
    stable = enumerate_stable_matchings(prefs, caps)
    if not stable:
        raise DataError("no complete stable matching exists")
    return min(
        stable,
        key=lambda m: (-metrics.aggregate_user_utility(m, prefs), sorted(m.pairs())),
    )
