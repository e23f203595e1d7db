"""Command-line experiment runner.

    stablerank split    --config exp.ini
    stablerank score    --config exp.ini
    stablerank rerank   --config exp.ini --cap lower-bound
    stablerank evaluate --config exp.ini
    stablerank sweep    --config exp.ini --caps 12,15,20,50
    stablerank trace    --config exp.ini --cap 15 --interval 1000

Every stage reuses the files an earlier stage left in the output directory
and recomputes (and writes) them when absent.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from functools import cached_property
from pathlib import Path

from . import metrics
from .baselines import BrConfig, bayesian_rerank, topk_identity
from .config import CAP_FILE, LOWER_BOUND, ExperimentConfig, Reranker, load_config
from .data import (
    CapacityConfig,
    build_preferences,
    dump_split_manifest,
    load_interactions,
    load_split_manifest,
    lower_bound_cap,
    split_dataset,
)
from .errors import ConfigError, DataError, InfeasibleError, StableRankError
from .files import atomic_write, dump_matching, dump_table, dump_trace, load_caps_file, load_matching
from .mmda import mmda_rerank, mmda_trace
from .scorer import KnnConfig, dump_scores, knn_scores, load_external_scores

log = logging.getLogger("stablerank")

SPLIT_FILE = "split.csv"
SCORES_FILE = "scores.csv"
REPORT_FILE = "report.csv"
SWEEP_FILE = "sweep.csv"
TRACE_FILE = "trace.csv"


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    except UnicodeDecodeError as exc:
        raise DataError(f"{path} is not UTF-8: {exc}") from None


class Experiment:
    """Lazily materialized pipeline state for one configuration."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = cfg.out_dir

    @cached_property
    def split(self):
        path = self.out / SPLIT_FILE
        if path.exists():
            log.info("reusing %s", path)
            return load_split_manifest(_read_text(path), seed=self.cfg.seed)
        if not self.cfg.dataset:
            raise ConfigError("no dataset configured")
        try:
            data = load_interactions(_read_text(self.cfg.dataset), self.cfg.format)
        except StableRankError as exc:
            raise type(exc)(f"{self.cfg.dataset}: {exc}") from None
        split = split_dataset(data, self.cfg.ratios, self.cfg.seed)
        atomic_write(path, dump_split_manifest(split))
        return split

    @cached_property
    def scores(self):
        path = self.out / SCORES_FILE
        train = self.split.train
        if path.exists():
            log.info("reusing %s", path)
            return load_external_scores(_read_text(path), train)
        if self.cfg.scorer == "external":
            if not self.cfg.scores_path:
                raise ConfigError("external scorer needs a scores path")
            scores = load_external_scores(_read_text(self.cfg.scores_path), train)
        else:
            scores = knn_scores(train, KnnConfig(self.cfg.neighbors, self.cfg.min_overlap))
        text = dump_scores(scores, train)
        atomic_write(path, text)
        # reload so in-memory values are exactly what the file holds
        return load_external_scores(text, train)

    @cached_property
    def prefs(self):
        return build_preferences(self.scores, self.cfg.truncation, complete=self.cfg.complete)

    def caps_for(self, cap) -> CapacityConfig:
        split, k = self.split, self.cfg.k
        if cap == LOWER_BOUND:
            cap = lower_bound_cap(split.n_users, split.n_items, k)
        if cap == CAP_FILE:
            if not self.cfg.caps_file:
                raise ConfigError("cap 'file' needs caps_file")
            return load_caps_file(_read_text(self.cfg.caps_file), split.source, k)
        return CapacityConfig.uniform(k, int(cap), split.n_items)

    def run(self, r: Reranker):
        """Return (matching, caps or None) for one reranker."""
        k = self.cfg.k
        if r.kind == "identity":
            return topk_identity(self.prefs, k), None
        if r.kind == "br":
            return bayesian_rerank(self.scores, BrConfig(r.value), k, complete=self.cfg.complete), None
        caps = self.caps_for(r.value)
        matching = mmda_rerank(
            self.prefs, caps, fill_remainder=self.cfg.fill_remainder, fill_scores=self.scores
        )
        return matching, caps

    def matching_path(self, r: Reranker) -> Path:
        return self.out / f"matching_{r.label}.csv"

    def report(self, matching, caps):
        return metrics.evaluate(matching, self.prefs, self.split, self.cfg.k, caps)


def _report_rows(exp: Experiment, results):
    rows = []
    for r, matching, caps in results:
        rows.append(metrics.report_row(r.kind, r.params, exp.report(matching, caps)))
    return rows


def cmd_split(exp: Experiment) -> None:
    split = exp.split
    print(
        f"train={len(split.train)} validation={len(split.validation)} test={len(split.test)} "
        f"users={split.n_users} items={split.n_items} -> {exp.out / SPLIT_FILE}"
    )


def cmd_score(exp: Experiment) -> None:
    scores = exp.scores
    print(f"{int(scores.defined.sum())} scores -> {exp.out / SCORES_FILE}")


def cmd_rerank(exp: Experiment) -> None:
    for r in exp.cfg.rerankers:
        matching, _ = exp.run(r)
        path = exp.matching_path(r)
        atomic_write(path, dump_matching(matching, exp.prefs, exp.split.source))
        print(f"{r.label}: {matching.total()} recommendations -> {path}")


def cmd_evaluate(exp: Experiment) -> None:
    results = []
    for r in exp.cfg.rerankers:
        path = exp.matching_path(r)
        if not path.exists():
            raise DataError(f"missing matching file {path}; run `rerank` first")
        matching = load_matching(_read_text(path), exp.split.source)
        caps = exp.caps_for(r.value) if r.kind == "mmda" else None
        results.append((r, matching, caps))
    rows = _report_rows(exp, results)
    atomic_write(exp.out / REPORT_FILE, dump_table(metrics.REPORT_COLUMNS, rows))
    records = [dict(zip(metrics.REPORT_COLUMNS, row)) for row in rows]
    atomic_write(exp.out / "report.json", json.dumps(records, indent=2) + "\n")
    print(dump_table(metrics.REPORT_COLUMNS, rows), end="")


def cmd_sweep(exp: Experiment, caps=None) -> None:
    caps = list(caps if caps is not None else exp.cfg.sweep_caps)
    if not caps:
        raise ConfigError("no sweep caps given (use --caps)")
    bound = lower_bound_cap(exp.split.n_users, exp.split.n_items, exp.cfg.k)
    resolved = []
    for c in caps:
        c = bound if c == LOWER_BOUND else c
        if c in resolved:
            log.warning("duplicate sweep cap %s ignored", c)
            continue
        resolved.append(c)
    header = ["cap", "status"] + list(metrics.REPORT_COLUMNS[2:])
    rows = []
    for c in resolved:
        r = Reranker("mmda", c)
        try:
            matching, capcfg = exp.run(r)
            row = metrics.report_row("mmda", r.params, exp.report(matching, capcfg))[2:]
            rows.append([c, "ok"] + row)
        except InfeasibleError as exc:
            log.warning("cap %s: %s", c, exc)
            rows.append([c, "infeasible"] + [""] * (len(header) - 2))
        except StableRankError as exc:
            log.warning("cap %s: %s", c, exc)
            rows.append([c, "error"] + [""] * (len(header) - 2))
    text = dump_table(header, rows)
    atomic_write(exp.out / SWEEP_FILE, text)
    print(text, end="")


def cmd_trace(exp: Experiment) -> None:
    mmda = exp.cfg.mmda_rerankers()
    cap = mmda[0].value if mmda else LOWER_BOUND
    caps = exp.caps_for(cap)
    _, trace = mmda_trace(
        exp.prefs, caps, exp.cfg.trace_interval,
        fill_remainder=exp.cfg.fill_remainder, fill_scores=exp.scores,
    )
    atomic_write(exp.out / TRACE_FILE, dump_trace(trace.snapshots))
    last = trace.snapshots[-1]
    print(
        f"{len(trace.snapshots)} snapshots, {last[0]} proposals, "
        f"user utility {last[1]:.4f}, item utility {last[2]:.4f} -> {exp.out / TRACE_FILE}"
    )


COMMANDS = {
    "split": cmd_split,
    "score": cmd_score,
    "rerank": cmd_rerank,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "trace": cmd_trace,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stablerank", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="ini-style experiment file")
    common.add_argument("--dataset")
    common.add_argument("--format", choices=["movielens-dat", "csv"])
    common.add_argument("--k", type=int)
    common.add_argument("--cap", help="integer, 'lower-bound' or 'file'")
    common.add_argument("--alpha", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--ratios", help="e.g. 0.8,0.1,0.1")
    common.add_argument("--scorer", choices=["knn", "external"])
    common.add_argument("--scores", help="external score csv (user,item,score)")
    common.add_argument("--neighbors", type=int)
    common.add_argument("--min-overlap", dest="min_overlap", type=int)
    common.add_argument("--rerankers", help="e.g. 'identity, br(0.01), mmda(20)'")
    common.add_argument("--caps-file", dest="caps_file")
    common.add_argument("--caps", help="sweep caps, comma separated")
    common.add_argument("--interval", type=int, help="trace sample interval")
    common.add_argument("--truncation", type=int)
    common.add_argument("--complete", choices=["true", "false"])
    common.add_argument("--fill-remainder", dest="fill_remainder", choices=["true", "false"])
    common.add_argument("-v", "--verbose", action="store_true")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    overrides = {
        key: value for key, value in vars(args).items()
        if key not in ("command", "config", "verbose") and value is not None
    }
    try:
        cfg = load_config(args.config, overrides)
        COMMANDS[args.command](Experiment(cfg))
    except StableRankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
