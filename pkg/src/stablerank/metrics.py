"""Ranking utilities, accuracy and aggregate-diversity metrics.

All values are fractions in [0, 1]; percentage scaling happens only in
:func:`report_row`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .data import CapacityConfig, DatasetSplit, InteractionDataset, Matching, PreferenceProfile
from .errors import DataError

REPORT_COLUMNS = (
    "method", "params", "precision@k", "gini_rev", "avg_prec_gini",
    "utility_u", "utility_i", "avg_utilities", "ild", "coverage",
)


def relevance(entity: int, pref: Sequence[int]) -> float:
    """Reversed rank normalized so the top of ``pref`` scores 1."""
    pref = list(pref)
    try:
        r = pref.index(entity) + 1
    except ValueError:
        raise DataError(f"{entity} is not ranked") from None
    m = len(pref)
    return (m - r + 1) / m


def _discounts(n: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(2, n + 2))


def idcg(length: int) -> float:
    return math.fsum(_discounts(length)) if length > 0 else 0.0


def dcg(items: Sequence[int], pref: Sequence[int]) -> float:
    pref = list(pref)
    rels = [relevance(x, pref) for x in items]
    return math.fsum(r * d for r, d in zip(rels, _discounts(len(rels))))


def ndcg(items: Sequence[int], pref: Sequence[int], ideal_length: Optional[int] = None) -> float:
    """DCG over the ideal DCG of ``ideal_length`` top-relevance entries.

    ``ideal_length`` defaults to ``len(items)``. An empty list scores 0.
    """
    if len(items) == 0:
        return 0.0
    L = len(items) if ideal_length is None else max(ideal_length, len(items))
    return dcg(items, pref) / idcg(L)


# Fast paths over precomputed rank tables. Entities missing from a truncated
# ranking contribute zero relevance.


def _list_ndcg(positions: np.ndarray, length: int, ideal: int) -> float:
    """positions: 0-based ranks (>= length means unranked), sorted ascending."""
    rel = np.where(positions < length, (length - positions) / max(length, 1), 0.0)
    return math.fsum(rel * _discounts(len(positions))) / idcg(ideal)


def user_utilities(matching: Matching, prefs: PreferenceProfile) -> np.ndarray:
    table = prefs.user_rank_table
    out = np.zeros(matching.n_users)
    for u, lst in enumerate(matching.user_lists):
        if lst:
            pos = np.sort(table[u, list(lst)])
            out[u] = _list_ndcg(pos, len(prefs.user_prefs[u]), len(lst))
    return out


def item_utilities(matching: Matching, prefs: PreferenceProfile, caps: Optional[CapacityConfig] = None) -> np.ndarray:
    """Per-item NDCG of the matched users; ideal length is the item's cap when given."""
    table = prefs.item_rank_table
    out = np.zeros(matching.n_items)
    for i, users in enumerate(matching.item_lists()):
        if users:
            pos = np.sort(table[i, users])
            ideal = len(users) if caps is None else max(int(caps.caps[i]), len(users))
            out[i] = _list_ndcg(pos, len(prefs.item_prefs[i]), ideal)
    return out


def aggregate_user_utility(matching: Matching, prefs: PreferenceProfile) -> float:
    if matching.n_users == 0:
        return 0.0
    return math.fsum(user_utilities(matching, prefs)) / matching.n_users


def aggregate_item_utility(matching: Matching, prefs: PreferenceProfile, caps: Optional[CapacityConfig] = None) -> float:
    """Mean item NDCG over the whole catalog; unmatched items count as 0."""
    return math.fsum(item_utilities(matching, prefs, caps)) / matching.n_items


def precision_at_k(matching: Matching, test: InteractionDataset, k: int) -> float:
    relevant = test.items_by_user()
    hits = [len(set(lst) & relevant[u]) / k for u, lst in enumerate(matching.user_lists)]
    return math.fsum(hits) / matching.n_users


def item_distribution(matching: Matching, catalog_size: Optional[int] = None) -> np.ndarray:
    """Share of recommendations per item, least recommended first."""
    counts = matching.counts()
    if catalog_size is not None and catalog_size > len(counts):
        counts = np.concatenate([counts, np.zeros(catalog_size - len(counts), dtype=counts.dtype)])
    total = counts.sum()
    if total == 0:
        raise DataError("matching holds no recommendations")
    return np.sort(counts) / total


def gini_index(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    if np.any(np.diff(p) < 0):
        raise DataError("distribution must be sorted ascending")
    if abs(p.sum() - 1.0) > 1e-9 or np.any(p < 0):
        raise DataError("distribution must be non-negative and sum to 1")
    n = len(p)
    weights = 2 * np.arange(1, n + 1) - n - 1
    return math.fsum(weights * p) / n


def catalog_coverage(matching: Matching, catalog_size: Optional[int] = None) -> float:
    size = matching.n_items if catalog_size is None else catalog_size
    return int((matching.counts() > 0).sum()) / size


def _normalized_item_vectors(train: InteractionDataset) -> sp.csr_matrix:
    R = sp.csr_matrix(
        (train.ratings, (train.items, train.users)), shape=(train.n_items, train.n_users)
    )
    norms = np.sqrt(np.asarray(R.multiply(R).sum(axis=1)).ravel())
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return sp.diags(scale) @ R, norms > 0


def ild(matching: Matching, train: InteractionDataset) -> float:
    """Mean intra-list cosine distance over users with at least two items.

    Items without any training rating are at distance 1 from everything.
    """
    V, nonzero = _normalized_item_vectors(train)
    values = []
    for lst in matching.user_lists:
        L = len(lst)
        if L < 2:
            continue
        idx = np.asarray(lst)
        sims = (V[idx] @ V[idx].T).toarray()
        ok = nonzero[idx]
        dist = 1.0 - sims
        dist[~ok, :] = 1.0
        dist[:, ~ok] = 1.0
        np.fill_diagonal(dist, 0.0)
        values.append(math.fsum(dist.ravel()) / (L * (L - 1)))
    return math.fsum(values) / len(values) if values else 0.0


@dataclass(frozen=True)
class EvaluationReport:
    precision_at_k: float
    gini: float
    gini_reversed: float
    user_utility: float
    item_utility: float
    avg_utilities: float
    avg_prec_gini: float
    ild: float
    catalog_coverage: float
    k: int

    def as_dict(self) -> dict:
        return asdict(self)


def make_report(precision, gini, user_utility, item_utility, ild_value, coverage, k) -> EvaluationReport:
    gini_rev = 1.0 - gini
    return EvaluationReport(
        precision_at_k=precision,
        gini=gini,
        gini_reversed=gini_rev,
        user_utility=user_utility,
        item_utility=item_utility,
        avg_utilities=(user_utility + item_utility) / 2,
        avg_prec_gini=(precision + gini_rev) / 2,
        ild=ild_value,
        catalog_coverage=coverage,
        k=k,
    )


def evaluate(
    matching: Matching,
    prefs: PreferenceProfile,
    split: DatasetSplit,
    k: int,
    caps: Optional[CapacityConfig] = None,
) -> EvaluationReport:
    if not matching.is_complete(k):
        raise DataError(f"matching is not complete for k={k}")
    return make_report(
        precision_at_k(matching, split.test, k),
        gini_index(item_distribution(matching, split.n_items)),
        aggregate_user_utility(matching, prefs),
        aggregate_item_utility(matching, prefs, caps),
        ild(matching, split.train),
        catalog_coverage(matching, split.n_items),
        k,
    )


def report_row(method: str, params: str, report: EvaluationReport) -> list:
    """Row for the comparison table: percentages except ILD and coverage."""
    return [
        method,
        params,
        round(100 * report.precision_at_k, 6),
        round(100 * report.gini_reversed, 6),
        round(100 * report.avg_prec_gini, 6),
        round(100 * report.user_utility, 6),
        round(100 * report.item_utility, 6),
        round(100 * report.avg_utilities, 6),
        round(report.ild, 6),
        round(report.catalog_coverage, 6),
    ]
