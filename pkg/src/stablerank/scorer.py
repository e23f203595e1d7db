"""Base scores: user-based kNN, or scores computed elsewhere and read from csv."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .data import InteractionDataset, ScoreMatrix
from .errors import ConfigError, DataError, MaskViolationError, ParseError, ResolutionError


@dataclass(frozen=True)
class KnnConfig:
    neighbors: int = 10
    min_overlap: int = 1

    def __post_init__(self):
        if self.neighbors < 1:
            raise ConfigError("neighbors must be >= 1")
        if self.min_overlap < 0:
            raise ConfigError("min_overlap must be >= 0")


def cosine_similarity(train: InteractionDataset, min_overlap: int = 1) -> np.ndarray:
    """User-user cosine over co-rated items; 0 when the overlap is too small.

    Both norms are restricted to the items the two users share.
    """
    R = train.rating_matrix()
    B = train.mask().astype(np.float64)
    R2 = R * R
    dot = R @ R.T
    norm_u = R2 @ B.T  # [u, v]: sum over items both rated of r_u^2
    overlap = B @ B.T
    denom = np.sqrt(norm_u * norm_u.T)
    sim = np.divide(dot, denom, out=np.zeros_like(dot), where=denom > 0)
    sim[overlap < max(min_overlap, 1)] = 0.0
    np.clip(sim, 0.0, 1.0, out=sim)
    np.fill_diagonal(sim, 0.0)
    return sim


def neighborhoods(sim: np.ndarray, size: int) -> list:
    """Indices of each user's ``size`` most similar users (sim > 0), ties by index."""
    out = []
    for u in range(sim.shape[0]):
        row = sim[u]
        cand = np.flatnonzero(row > 0)
        cand = cand[cand != u]
        order = cand[np.argsort(-row[cand], kind="stable")]
        out.append(order[:size])
    return out


def knn_scores(train: InteractionDataset, config: KnnConfig = KnnConfig()) -> ScoreMatrix:
    """Similarity-weighted average of the neighbors' ratings.

    Items no neighbor rated stay unscored, as do the user's training items.
    """
    if len(train) == 0:
        raise DataError("training set is empty")
    sim = cosine_similarity(train, config.min_overlap)
    W = np.zeros_like(sim)
    for u, nb in enumerate(neighborhoods(sim, config.neighbors)):
        W[u, nb] = sim[u, nb]
    R = train.rating_matrix()
    num = W @ R
    rated = train.mask()
    den = W @ rated.astype(np.float64)
    cand = ~rated
    values = np.full(R.shape, np.nan)
    ok = (den > 0) & cand
    values[ok] = num[ok] / den[ok]
    # weighted averages of ratings can drift an ulp past the rating range
    lo, hi = train.rating_range
    values[ok] = np.clip(values[ok], lo, hi)
    return ScoreMatrix(values, cand)


def load_external_scores(source, train: InteractionDataset) -> ScoreMatrix:
    """Read csv ``user,item,score`` against ``train``'s identifiers."""
    if isinstance(source, (bytes, bytearray)):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    scores = ScoreMatrix.empty(train)
    values, cand = scores.values, scores.candidates
    uidx, iidx = train.user_index, train.item_index
    reader = csv.reader(io.StringIO(text))
    for row in reader:
        line = reader.line_num
        if not row or not any(f.strip() for f in row):
            continue
        row = [f.strip() for f in row]
        if line == 1 and row == ["user", "item", "score"]:
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", line)
        u, i = uidx.get(row[0]), iidx.get(row[1])
        if u is None:
            raise ResolutionError(f"unknown user {row[0]!r}", line)
        if i is None:
            raise ResolutionError(f"unknown item {row[1]!r}", line)
        try:
            s = float(row[2])
        except ValueError:
            raise ParseError(f"non-numeric score {row[2]!r}", line) from None
        if not math.isfinite(s):
            raise ParseError(f"non-finite score {row[2]!r}", line)
        if not cand[u, i]:
            raise MaskViolationError(f"score for training pair ({row[0]!r}, {row[1]!r})", line)
        values[u, i] = s
    return scores


def dump_scores(scores: ScoreMatrix, train: InteractionDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["user", "item", "score"])
    us, is_ = np.nonzero(~np.isnan(scores.values))
    for u, i in zip(us.tolist(), is_.tolist()):
        w.writerow([train.user_ids[u], train.item_ids[i], repr(float(scores.values[u, i]))])
    return buf.getvalue()
