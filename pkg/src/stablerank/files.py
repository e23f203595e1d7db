"""csv formats for matchings, traces, per-item caps and report tables."""
from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

from .data import CapacityConfig, InteractionDataset, Matching, PreferenceProfile
from .errors import DataError, ParseError, ResolutionError

TRACE_HEADER = ["proposals", "user_utility", "item_utility", "filled_slots"]


def atomic_write(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_matching(matching: Matching, prefs: PreferenceProfile, data: InteractionDataset) -> str:
    """csv ``user,item,rank``; rank is the 1-based position after sorting by the user's ranking."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["user", "item", "rank"])
    for u, lst in enumerate(matching.sorted_user_lists(prefs)):
        for r, i in enumerate(lst, 1):
            w.writerow([data.user_ids[u], data.item_ids[i], r])
    return buf.getvalue()


def load_matching(text: str, data: InteractionDataset) -> Matching:
    rows = [[] for _ in range(data.n_users)]
    reader = csv.reader(io.StringIO(text))
    for row in reader:
        line = reader.line_num
        if not row or row == ["user", "item", "rank"]:
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", line)
        u, i = data.user_index.get(row[0]), data.item_index.get(row[1])
        if u is None or i is None:
            raise ResolutionError(f"unknown identifier in {row!r}", line)
        try:
            rank = int(row[2])
        except ValueError:
            raise ParseError(f"bad rank {row[2]!r}", line) from None
        rows[u].append((rank, i))
    return Matching.from_lists([[i for _, i in sorted(r)] for r in rows], data.n_items)


def dump_trace(snapshots) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for proposals, uu, iu, filled in snapshots:
        w.writerow([proposals, repr(float(uu)), repr(float(iu)), filled])
    return buf.getvalue()


def load_trace(text: str) -> list:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != TRACE_HEADER:
        raise ParseError(f"unexpected trace header {header}", 1)
    return [(int(p), float(u), float(i), int(f)) for p, u, i, f in reader]


def load_caps_file(text: str, data: InteractionDataset, k: int) -> CapacityConfig:
    """csv ``item,cap`` covering every item of the catalog."""
    caps = np.zeros(data.n_items, dtype=np.int64)
    reader = csv.reader(io.StringIO(text))
    for row in reader:
        line = reader.line_num
        if not row or row == ["item", "cap"]:
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", line)
        i = data.item_index.get(row[0])
        if i is None:
            raise ResolutionError(f"unknown item {row[0]!r}", line)
        try:
            caps[i] = int(row[1])
        except ValueError:
            raise ParseError(f"bad cap {row[1]!r}", line) from None
    missing = np.flatnonzero(caps == 0)
    if len(missing):
        raise DataError(f"{len(missing)} item(s) have no cap, e.g. {data.item_ids[missing[0]]!r}")
    return CapacityConfig(k, caps)


def dump_table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()
