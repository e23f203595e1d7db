"""Interaction data, splits, score matrices, preference profiles, capacities and matchings."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DuplicateInteractionError,
    InfeasibleCapacityError,
    ParseError,
    ShortPreferenceListError,
)

ROLES = ("train", "validation", "test")


# ---------------------------------------------------------------------------
# Interactions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class InteractionDataset:
    """User-item-rating triples over fixed user/item index bijections.

    ``user_ids[j]`` is the external identifier of dense user index ``j`` (same
    for items). ``timestamps`` is None when the source had no timestamp column.
    """

    user_ids: tuple
    item_ids: tuple
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    timestamps: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.users)
        if len(self.items) != n or len(self.ratings) != n:
            raise DataError("users, items and ratings must have equal length")
        if self.timestamps is not None and len(self.timestamps) != n:
            raise DataError("timestamps length mismatch")
        if not self.user_ids or not self.item_ids:
            raise DataError("dataset needs at least one user and one item")
        if n:
            if self.users.min() < 0 or self.users.max() >= len(self.user_ids):
                raise DataError("user index out of range")
            if self.items.min() < 0 or self.items.max() >= len(self.item_ids):
                raise DataError("item index out of range")
            keys = self.users.astype(np.int64) * len(self.item_ids) + self.items
            if len(np.unique(keys)) != n:
                raise DataError("duplicate (user, item) pair")

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def __len__(self):
        return len(self.users)

    @cached_property
    def user_index(self) -> dict:
        return {u: j for j, u in enumerate(self.user_ids)}

    @cached_property
    def item_index(self) -> dict:
        return {i: j for j, i in enumerate(self.item_ids)}

    @property
    def rating_range(self) -> tuple:
        return float(self.ratings.min()), float(self.ratings.max())

    def subset(self, mask: np.ndarray) -> "InteractionDataset":
        """Rows selected by ``mask``, keeping the index bijections."""
        return InteractionDataset(
            self.user_ids,
            self.item_ids,
            self.users[mask],
            self.items[mask],
            self.ratings[mask],
            None if self.timestamps is None else self.timestamps[mask],
        )

    def rating_matrix(self) -> np.ndarray:
        """Dense users x items matrix, 0 where unrated."""
        R = np.zeros((self.n_users, self.n_items))
        R[self.users, self.items] = self.ratings
        return R

    def mask(self) -> np.ndarray:
        M = np.zeros((self.n_users, self.n_items), dtype=bool)
        M[self.users, self.items] = True
        return M

    def items_by_user(self) -> list:
        out = [set() for _ in range(self.n_users)]
        for u, i in zip(self.users.tolist(), self.items.tolist()):
            out[u].add(i)
        return out

    def same_content(self, other: "InteractionDataset") -> bool:
        if self.user_ids != other.user_ids or self.item_ids != other.item_ids:
            return False
        same = (
            np.array_equal(self.users, other.users)
            and np.array_equal(self.items, other.items)
            and np.array_equal(self.ratings, other.ratings)
        )
        if self.timestamps is None or other.timestamps is None:
            return same and self.timestamps is None and other.timestamps is None
        return same and np.array_equal(self.timestamps, other.timestamps)


def _parse_number(text, line):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"non-numeric value {text!r}", line) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {text!r}", line)
    return value


def _parse_timestamp(text, line):
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"non-integer timestamp {text!r}", line) from None


def _rows(source, fmt):
    if isinstance(source, (bytes, bytearray)):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    if fmt == "movielens-dat":
        for lineno, line in enumerate(text.splitlines(), 1):
            if line.strip():
                yield lineno, line.strip().split("::")
    elif fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        for row in reader:
            if row and any(f.strip() for f in row):
                yield reader.line_num, [f.strip() for f in row]
    else:
        raise ConfigError(f"unknown format {fmt!r}")


def load_interactions(source, format: str = "csv") -> InteractionDataset:
    """Parse ``source`` (bytes, str or binary/text stream).

    Dense indices follow first appearance. A csv header row
    ``user,item,rating[,timestamp]`` is skipped.
    """
    if format == "movielens-dat":
        widths = (4,)
    else:
        widths = (3, 4)
    user_index, item_index = {}, {}
    users, items, ratings, stamps = [], [], [], []
    seen = set()
    width = None
    first = True
    for lineno, fields in _rows(source, format):
        if first and format == "csv" and fields[:3] == ["user", "item", "rating"]:
            first = False
            continue
        first = False
        if len(fields) not in widths:
            raise ParseError(f"expected {' or '.join(map(str, widths))} fields, got {len(fields)}", lineno)
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise ParseError("inconsistent field count", lineno)
        u, i = fields[0], fields[1]
        r = _parse_number(fields[2], lineno)
        t = _parse_timestamp(fields[3], lineno) if len(fields) == 4 else None
        ui = user_index.setdefault(u, len(user_index))
        ii = item_index.setdefault(i, len(item_index))
        if (ui, ii) in seen:
            raise DuplicateInteractionError(f"duplicate pair ({u!r}, {i!r})", lineno)
        seen.add((ui, ii))
        users.append(ui)
        items.append(ii)
        ratings.append(r)
        stamps.append(t)
    if not users:
        raise DataError("no interactions found")
    return InteractionDataset(
        tuple(user_index),
        tuple(item_index),
        np.array(users, dtype=np.int64),
        np.array(items, dtype=np.int64),
        np.array(ratings, dtype=np.float64),
        np.array(stamps, dtype=np.int64) if width == 4 else None,
    )


def dump_interactions(data: InteractionDataset) -> str:
    """Serialize to csv (readable by ``load_interactions(..., "csv")``)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    has_t = data.timestamps is not None
    w.writerow(["user", "item", "rating"] + (["timestamp"] if has_t else []))
    for n in range(len(data)):
        row = [data.user_ids[data.users[n]], data.item_ids[data.items[n]], repr(float(data.ratings[n]))]
        if has_t:
            row.append(str(int(data.timestamps[n])))
        w.writerow(row)
    return buf.getvalue()


def kcore_filter(data: InteractionDataset, min_user: int = 20, min_item: int = 20) -> InteractionDataset:
    """Iteratively drop users/items with too few interactions, then reindex."""
    keep = np.ones(len(data), dtype=bool)
    while True:
        uc = np.bincount(data.users[keep], minlength=data.n_users)
        ic = np.bincount(data.items[keep], minlength=data.n_items)
        new = keep & (uc[data.users] >= min_user) & (ic[data.items] >= min_item)
        if new.sum() == keep.sum():
            break
        keep = new
    if not keep.any():
        raise DataError("k-core filter removed every interaction")
    users, items = data.users[keep], data.items[keep]
    # reindex by first appearance among the surviving rows
    _, ufirst, uinv = np.unique(users, return_index=True, return_inverse=True)
    uorder = np.argsort(ufirst, kind="stable")
    urank = np.empty_like(uorder)
    urank[uorder] = np.arange(len(uorder))
    _, ifirst, iinv = np.unique(items, return_index=True, return_inverse=True)
    iorder = np.argsort(ifirst, kind="stable")
    irank = np.empty_like(iorder)
    irank[iorder] = np.arange(len(iorder))
    uids = np.unique(users)[uorder]
    iids = np.unique(items)[iorder]
    return InteractionDataset(
        tuple(data.user_ids[j] for j in uids),
        tuple(data.item_ids[j] for j in iids),
        urank[uinv],
        irank[iinv],
        data.ratings[keep],
        None if data.timestamps is None else data.timestamps[keep],
    )


# ---------------------------------------------------------------------------
# Splitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DatasetSplit:
    train: InteractionDataset
    validation: InteractionDataset
    test: InteractionDataset
    seed: int
    roles: np.ndarray  # role code (0/1/2) per row of ``source``
    source: InteractionDataset

    @property
    def n_users(self):
        return self.source.n_users

    @property
    def n_items(self):
        return self.source.n_items


def _check_ratios(ratios):
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ConfigError(f"split ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {sum(ratios)}")


def _from_roles(data, roles, seed):
    parts = [data.subset(roles == c) for c in range(3)]
    return DatasetSplit(*parts, seed=seed, roles=roles, source=data)


def split_dataset(data: InteractionDataset, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> DatasetSplit:
    """Per-user stratified random split.

    Each user's interactions are shuffled and cut by ``ratios``; users with
    fewer than three interactions stay entirely in train.
    """
    _check_ratios(ratios)
    if len(data) == 0:
        raise DataError("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    roles = np.zeros(len(data), dtype=np.int8)
    order = np.lexsort((data.items, data.users))
    bounds = np.searchsorted(data.users[order], np.arange(data.n_users + 1))
    for u in range(data.n_users):
        rows = order[bounds[u]:bounds[u + 1]]
        n = len(rows)
        if n < 3:
            continue
        n_val = int(math.floor(n * ratios[1] + 0.5))
        n_test = int(math.floor(n * ratios[2] + 0.5))
        n_val = min(n_val, n - 1)
        n_test = min(n_test, n - 1 - n_val)
        rows = rows[rng.permutation(n)]
        roles[rows[n - n_val - n_test:n - n_test]] = 1
        roles[rows[n - n_test:]] = 2
    return _from_roles(data, roles, seed)


def dump_split_manifest(split: DatasetSplit) -> str:
    """csv ``user,item,rating,role`` in source row order."""
    data = split.source
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["user", "item", "rating", "role"])
    for n in range(len(data)):
        w.writerow([
            data.user_ids[data.users[n]],
            data.item_ids[data.items[n]],
            repr(float(data.ratings[n])),
            ROLES[split.roles[n]],
        ])
    return buf.getvalue()


def load_split_manifest(source, seed: int = 0) -> DatasetSplit:
    text = source if isinstance(source, str) else source.decode("utf-8") if isinstance(source, bytes) else source.read()
    reader = csv.reader(io.StringIO(text))
    body, roles = [], []
    for row in reader:
        if not row:
            continue
        if row == ["user", "item", "rating", "role"]:
            continue
        if len(row) != 4:
            raise ParseError(f"expected 4 fields, got {len(row)}", reader.line_num)
        if row[3] not in ROLES:
            raise ParseError(f"unknown role {row[3]!r}", reader.line_num)
        body.append(row[:3])
        roles.append(ROLES.index(row[3]))
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(body)
    data = load_interactions(buf.getvalue(), "csv")
    return _from_roles(data, np.array(roles, dtype=np.int8), seed)


# ---------------------------------------------------------------------------
# Scores and preferences
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Dense ``n_users x n_items`` scores; NaN marks "no score".

    ``candidates[u, i]`` is False for the user's training items, which never
    carry a score.
    """

    values: np.ndarray
    candidates: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.candidates.shape:
            raise DataError("score / candidate shape mismatch")
        defined = ~np.isnan(self.values)
        if np.isinf(self.values[defined]).any():
            raise DataError("scores must be finite")
        if (defined & ~self.candidates).any():
            raise DataError("score defined for a training pair")

    @classmethod
    def empty(cls, train: InteractionDataset, dtype=np.float64) -> "ScoreMatrix":
        values = np.full((train.n_users, train.n_items), np.nan, dtype=dtype)
        return cls(values, ~train.mask())

    @property
    def shape(self):
        return self.values.shape

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.values)


@dataclass(frozen=True, eq=False)
class PreferenceProfile:
    """Strict rankings: ``user_prefs[u]`` over items, ``item_prefs[i]`` over users.

    Rankings are int arrays, best first.
    """

    user_prefs: list
    item_prefs: list
    truncation: Optional[int] = None

    def __post_init__(self):
        for kind, prefs, bound in (("user", self.user_prefs, self.n_items), ("item", self.item_prefs, self.n_users)):
            for owner, ranking in enumerate(prefs):
                if len(ranking) and (ranking.min() < 0 or ranking.max() >= bound):
                    raise DataError(f"{kind} {owner} ranking has out-of-range entries")
                if len(np.unique(ranking)) != len(ranking):
                    raise DataError(f"{kind} {owner} ranking repeats an entry")
                if self.truncation is not None and len(ranking) > self.truncation:
                    raise DataError(f"{kind} {owner} ranking longer than truncation")

    @classmethod
    def from_lists(cls, user_prefs: Sequence[Sequence[int]], item_prefs: Sequence[Sequence[int]], truncation=None):
        return cls(
            [np.asarray(p, dtype=np.int64) for p in user_prefs],
            [np.asarray(p, dtype=np.int64) for p in item_prefs],
            truncation,
        )

    @property
    def n_users(self) -> int:
        return len(self.user_prefs)

    @property
    def n_items(self) -> int:
        return len(self.item_prefs)

    def user_rank(self, u: int) -> dict:
        return {int(i): r for r, i in enumerate(self.user_prefs[u])}

    def item_rank(self, i: int) -> dict:
        return {int(u): r for r, u in enumerate(self.item_prefs[i])}

    @cached_property
    def item_rank_table(self) -> np.ndarray:
        """``table[i, u]`` = 0-based position of u in item i's ranking.

        Users missing from a (truncated) ranking sit below every listed user,
        ordered by ascending index.
        """
        return _rank_table(self.item_prefs, self.n_users)

    @cached_property
    def user_rank_table(self) -> np.ndarray:
        """``table[u, i]`` = position of i in u's ranking; same convention."""
        return _rank_table(self.user_prefs, self.n_items)


def _rank_table(rankings, width):
    dtype = np.int32 if 2 * width < 2**31 else np.int64
    table = np.empty((len(rankings), width), dtype=dtype)
    base = np.arange(width, dtype=dtype)
    for row, ranking in enumerate(rankings):
        table[row] = base + len(ranking)
        table[row, ranking] = np.arange(len(ranking), dtype=dtype)
    return table


def _rank_line(values, valid, complete_mask):
    idx = np.flatnonzero(valid)
    ranked = idx[np.argsort(-values[idx], kind="stable")]
    if complete_mask is not None:
        ranked = np.concatenate([ranked, np.flatnonzero(complete_mask & ~valid)])
    return ranked


def build_preferences(scores: ScoreMatrix, truncation: Optional[int] = None, complete: bool = False) -> PreferenceProfile:
    """Rank by descending score, ties broken by ascending index.

    With ``complete=True`` unscored candidates are appended (ascending index)
    on both sides, so every candidate pair appears in both rankings.
    """
    if truncation is not None and truncation < 1:
        raise ConfigError("truncation must be a positive integer")
    values, cand = scores.values, scores.candidates
    defined = ~np.isnan(values)
    if not defined.any() and not (complete and cand.any()):
        raise DataError("score matrix is empty")
    dtype = np.int32 if max(values.shape) < 2**31 else np.int64
    n, m = values.shape
    user_prefs = []
    for u in range(n):
        r = _rank_line(values[u], defined[u], cand[u] if complete else None)
        user_prefs.append(r[:truncation].astype(dtype))
    item_prefs = []
    for i in range(m):
        r = _rank_line(values[:, i], defined[:, i], cand[:, i] if complete else None)
        item_prefs.append(r[:truncation].astype(dtype))
    return PreferenceProfile(user_prefs, item_prefs, truncation)


# ---------------------------------------------------------------------------
# Capacities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CapacityConfig:
    k: int
    caps: np.ndarray

    def __post_init__(self):
        if int(self.k) < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if len(self.caps) == 0 or np.min(self.caps) < 1:
            raise ConfigError("every item cap must be >= 1")

    @classmethod
    def uniform(cls, k: int, cap: int, n_items: int) -> "CapacityConfig":
        return cls(k, np.full(n_items, cap, dtype=np.int64))

    @classmethod
    def per_item(cls, k: int, caps: Iterable[int]) -> "CapacityConfig":
        return cls(k, np.asarray(list(caps), dtype=np.int64))

    @property
    def total(self) -> int:
        return int(self.caps.sum())


def lower_bound_cap(n_users: int, n_items: int, k: int) -> int:
    """Smallest feasible uniform cap, ceil(n_users * k / n_items)."""
    return -(-n_users * k // n_items)


def validate_feasibility(prefs: PreferenceProfile, caps: CapacityConfig) -> None:
    if len(caps.caps) != prefs.n_items:
        raise ConfigError(f"{len(caps.caps)} caps for {prefs.n_items} items")
    required = prefs.n_users * caps.k
    if caps.total < required:
        raise InfeasibleCapacityError(caps.total, required, prefs.n_users, prefs.n_items, caps.k)
    for u, ranking in enumerate(prefs.user_prefs):
        if len(ranking) < caps.k:
            raise ShortPreferenceListError(u, len(ranking), caps.k)


# ---------------------------------------------------------------------------
# Matchings
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Matching:
    """``user_lists[u]`` holds u's items in acquisition order."""

    user_lists: tuple
    n_items: int
    filled_users: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        for u, lst in enumerate(self.user_lists):
            if len(set(lst)) != len(lst):
                raise DataError(f"user {u} matched to an item twice")

    @classmethod
    def from_lists(cls, lists, n_items, filled_users=()):
        return cls(tuple(tuple(int(i) for i in lst) for lst in lists), n_items, frozenset(filled_users))

    @classmethod
    def from_pairs(cls, pairs, n_users, n_items):
        lists = [[] for _ in range(n_users)]
        for u, i in sorted(pairs):
            lists[u].append(i)
        return cls.from_lists(lists, n_items)

    @property
    def n_users(self) -> int:
        return len(self.user_lists)

    def pairs(self) -> frozenset:
        return frozenset((u, i) for u, lst in enumerate(self.user_lists) for i in lst)

    def item_lists(self) -> list:
        out = [[] for _ in range(self.n_items)]
        for u, lst in enumerate(self.user_lists):
            for i in lst:
                out[i].append(u)
        return out

    def counts(self) -> np.ndarray:
        flat = [i for lst in self.user_lists for i in lst]
        return np.bincount(np.asarray(flat, dtype=np.int64), minlength=self.n_items)

    def total(self) -> int:
        return sum(len(lst) for lst in self.user_lists)

    def is_complete(self, k: int) -> bool:
        return all(len(lst) == k for lst in self.user_lists)

    def sorted_user_lists(self, prefs: PreferenceProfile) -> list:
        """Each user's items re-sorted by that user's ranking."""
        table = prefs.user_rank_table
        return [sorted(lst, key=lambda i: table[u, i]) for u, lst in enumerate(self.user_lists)]
