import csv
import io
import json

import numpy as np
import pytest

from stablerank import metrics
from stablerank.cli import Experiment, main
from stablerank.config import Reranker, load_config
from stablerank.files import load_matching, load_trace


def write_dataset(path, n_users=30, n_items=40, per_user=12, seed=0):
    rng = np.random.default_rng(seed)
    popularity = np.linspace(3, 0.2, n_items)
    popularity /= popularity.sum()
    lines = []
    for u in range(n_users):
        items = rng.choice(n_items, per_user, replace=False, p=popularity)
        for i in items:
            lines.append(f"{u + 1}::{i + 1}::{rng.integers(1, 6)}::{1000 + len(lines)}")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def workspace(tmp_path):
    data = write_dataset(tmp_path / "ratings.dat")
    cfg = tmp_path / "exp.ini"
    cfg.write_text(
        "[data]\n"
        f"dataset = {data}\n"
        "format = movielens-dat\n"
        "[rerank]\n"
        "k = 3\n"
        "rerankers = identity, br(0.01), mmda(lower-bound)\n"
        "[trace]\n"
        "interval = 5\n"
        "[output]\n"
        f"out = {tmp_path / 'out'}\n"
    )
    return tmp_path, cfg


def run(cfg, *args):
    return main([args[0], "--config", str(cfg), *args[1:]])


def test_full_pipeline(workspace, capsys):
    tmp, cfg = workspace
    out = tmp / "out"
    assert run(cfg, "split") == 0
    assert (out / "split.csv").exists()
    assert run(cfg, "score") == 0
    assert run(cfg, "rerank") == 0
    names = sorted(p.name for p in out.glob("matching_*.csv"))
    assert names == ["matching_br_alpha=0.01.csv", "matching_identity.csv", "matching_mmda_cap=lower-bound.csv"]
    assert run(cfg, "evaluate") == 0
    rows = list(csv.reader(io.StringIO((out / "report.csv").read_text())))
    assert rows[0] == list(metrics.REPORT_COLUMNS)
    assert [r[0] for r in rows[1:]] == ["identity", "br", "mmda"]
    records = json.loads((out / "report.json").read_text())
    assert len(records) == 3
    # identity serves every user their top-k, so no row beats its user utility
    assert float(rows[1][5]) == max(float(r[5]) for r in rows[1:])

    assert run(cfg, "trace") == 0
    trace = load_trace((out / "trace.csv").read_text())
    items = [t[2] for t in trace]
    assert all(b >= a for a, b in zip(items, items[1:]))
    # final trace row matches the evaluated mmda row before scaling
    assert round(100 * trace[-1][1], 6) == float(rows[3][5])
    assert round(100 * trace[-1][2], 6) == float(rows[3][6])


def test_evaluate_from_files_equals_in_memory(workspace):
    tmp, cfg = workspace
    assert run(cfg, "rerank") == 0
    exp = Experiment(load_config(str(cfg)))
    for r in exp.cfg.rerankers:
        matching, caps = exp.run(r)
        loaded = load_matching(exp.matching_path(r).read_text(), exp.split.source)
        assert loaded.pairs() == matching.pairs()
        assert exp.report(loaded, caps) == exp.report(matching, caps)


def test_outputs_are_byte_identical_across_runs(tmp_path):
    data = write_dataset(tmp_path / "ratings.dat")
    texts = []
    for name in ("a", "b"):
        out = tmp_path / name
        args = ["--dataset", str(data), "--format", "movielens-dat", "--k", "3", "--out", str(out)]
        for cmd in ("rerank", "evaluate", "trace"):
            assert main([cmd, *args]) == 0
        texts.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert texts[0] == texts[1]
    assert len(texts[0]) >= 7


def test_lower_bound_cap_value(tmp_path):
    data = write_dataset(tmp_path / "d.dat", n_users=100, n_items=250, per_user=30)
    cfg = load_config(None, {"dataset": str(data), "format": "movielens-dat", "k": 10, "out": str(tmp_path / "o")})
    exp = Experiment(cfg)
    assert exp.split.n_items == 250
    assert exp.caps_for("lower-bound").caps.tolist() == [4] * 250


def test_sweep_dedupes_and_marks_infeasible(workspace, caplog):
    tmp, cfg = workspace
    # 30 users x k=3 over 40 items: lower bound 3
    assert run(cfg, "sweep", "--caps", "1,lower-bound,3,50") == 0
    rows = list(csv.reader(io.StringIO((tmp / "out" / "sweep.csv").read_text())))
    assert rows[0][:2] == ["cap", "status"]
    assert [r[:2] for r in rows[1:]] == [["1", "infeasible"], ["3", "ok"], ["50", "ok"]]
    assert "duplicate" in caplog.text


def test_rerank_with_caps_file(workspace):
    tmp, cfg = workspace
    exp = Experiment(load_config(str(cfg)))
    caps = tmp / "caps.csv"
    caps.write_text("item,cap\n" + "".join(f"{i},5\n" for i in exp.split.source.item_ids))
    assert run(cfg, "rerank", "--rerankers", "mmda(file)", "--caps-file", str(caps)) == 0
    m = load_matching((tmp / "out" / "matching_mmda_cap=file.csv").read_text(), exp.split.source)
    assert m.counts().max() <= 5


def test_exit_codes(workspace, tmp_path):
    tmp, cfg = workspace
    assert run(cfg, "split", "--ratios", "0.5,0.5,0.5") == 1
    assert main(["split", "--config", str(tmp / "missing.ini")]) == 1
    assert main(["bogus"]) == 1
    assert run(cfg, "rerank", "--cap", "1") == 3
    assert run(cfg, "evaluate", "--rerankers", "mmda(7)") == 2
    bad = tmp_path / "bad.dat"
    bad.write_text("1::2::5::0\n1::x\n")
    assert main(["split", "--dataset", str(bad), "--format", "movielens-dat", "--out", str(tmp_path / "o2")]) == 2


def test_infeasible_message_has_lower_bound(workspace, capsys):
    tmp, cfg = workspace
    assert run(cfg, "rerank", "--rerankers", "mmda(1)") == 3
    assert "lower bound" in capsys.readouterr().err


def test_cap_override_replaces_mmda_entry(workspace):
    _, cfg = workspace
    c = load_config(str(cfg), {"cap": "20", "alpha": 0.5})
    assert c.rerankers == [Reranker("identity"), Reranker("br", 0.5), Reranker("mmda", 20)]
