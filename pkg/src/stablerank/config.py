"""Experiment configuration: an ini-style file plus command-line overrides."""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .errors import ConfigError

FORMATS = ("movielens-dat", "csv")

DEFAULTS = {
    "data": {"dataset": "", "format": "csv"},
    "split": {"ratios": "0.8, 0.1, 0.1", "seed": "0"},
    "scorer": {"kind": "knn", "neighbors": "10", "min_overlap": "1", "path": ""},
    "preferences": {"complete": "true", "truncation": ""},
    "rerank": {
        "k": "10",
        "rerankers": "identity, br(0.01), mmda(lower-bound)",
        "cap": "",
        "alpha": "",
        "caps_file": "",
        "fill_remainder": "false",
    },
    "sweep": {"caps": ""},
    "trace": {"interval": "1000"},
    "output": {"out": "out"},
}

# flag name -> (section, key)
FLAG_KEYS = {
    "dataset": ("data", "dataset"),
    "format": ("data", "format"),
    "seed": ("split", "seed"),
    "ratios": ("split", "ratios"),
    "scorer": ("scorer", "kind"),
    "neighbors": ("scorer", "neighbors"),
    "min_overlap": ("scorer", "min_overlap"),
    "scores": ("scorer", "path"),
    "complete": ("preferences", "complete"),
    "truncation": ("preferences", "truncation"),
    "k": ("rerank", "k"),
    "rerankers": ("rerank", "rerankers"),
    "cap": ("rerank", "cap"),
    "alpha": ("rerank", "alpha"),
    "caps_file": ("rerank", "caps_file"),
    "fill_remainder": ("rerank", "fill_remainder"),
    "caps": ("sweep", "caps"),
    "interval": ("trace", "interval"),
    "out": ("output", "out"),
}

LOWER_BOUND = "lower-bound"
CAP_FILE = "file"


@dataclass(frozen=True)
class Reranker:
    """One re-ranking configuration: ``identity``, ``br`` (alpha) or ``mmda`` (cap)."""

    kind: str
    value: Union[None, float, int, str] = None

    @property
    def label(self) -> str:
        if self.kind == "identity":
            return "identity"
        if self.kind == "br":
            return f"br_alpha={self.value:g}"
        return f"mmda_cap={self.value}"

    @property
    def params(self) -> str:
        if self.kind == "br":
            return f"alpha={self.value:g}"
        if self.kind == "mmda":
            return f"cap={self.value}"
        return ""


@dataclass
class ExperimentConfig:
    dataset: str
    format: str = "csv"
    ratios: tuple = (0.8, 0.1, 0.1)
    seed: int = 0
    scorer: str = "knn"
    neighbors: int = 10
    min_overlap: int = 1
    scores_path: str = ""
    complete: bool = True
    truncation: Optional[int] = None
    k: int = 10
    rerankers: list = field(default_factory=lambda: [Reranker("identity")])
    caps_file: str = ""
    fill_remainder: bool = False
    sweep_caps: list = field(default_factory=list)
    trace_interval: int = 1000
    out: str = "out"

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not self.rerankers:
            raise ConfigError("at least one reranker is required")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.scorer not in ("knn", "external"):
            raise ConfigError("scorer must be knn or external")
        if len(self.ratios) != 3 or any(r <= 0 for r in self.ratios) or abs(sum(self.ratios) - 1) > 1e-9:
            raise ConfigError(f"split ratios must be three positive numbers summing to 1, got {self.ratios}")
        if self.trace_interval < 1:
            raise ConfigError("trace interval must be >= 1")

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def mmda_rerankers(self):
        return [r for r in self.rerankers if r.kind == "mmda"]


def parse_cap(text: str):
    text = text.strip()
    if text in (LOWER_BOUND, CAP_FILE):
        return text
    try:
        cap = int(text)
    except ValueError:
        raise ConfigError(f"cap must be an integer, {LOWER_BOUND!r} or {CAP_FILE!r}; got {text!r}") from None
    if cap < 1:
        raise ConfigError("cap must be >= 1")
    return cap


_ENTRY = re.compile(r"^\s*(identity|br|mmda)\s*(?:\(\s*([^)]*?)\s*\))?\s*$")


def parse_rerankers(text: str) -> list:
    out = []
    for token in re.findall(r"[a-z]+\s*(?:\([^)]*\))?", text):
        m = _ENTRY.match(token)
        if not m:
            raise ConfigError(f"cannot parse reranker {token!r}")
        kind, arg = m.group(1), m.group(2)
        if kind == "identity":
            out.append(Reranker("identity"))
        elif kind == "br":
            try:
                alpha = float(arg) if arg else 0.01
            except ValueError:
                raise ConfigError(f"bad alpha {arg!r}") from None
            if alpha < 0:
                raise ConfigError("alpha must be non-negative")
            out.append(Reranker("br", alpha))
        else:
            out.append(Reranker("mmda", parse_cap(arg) if arg else LOWER_BOUND))
    return out


def _bool(text, key):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _int(text, key):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Merge defaults, an optional config file and ``{flag: value}`` overrides."""
    parser = configparser.ConfigParser()
    parser.read_dict(DEFAULTS)
    if path:
        if not Path(path).is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    overrides = dict(overrides or {})
    cap_override = overrides.pop("cap", None)
    alpha_override = overrides.pop("alpha", None)
    for flag, value in overrides.items():
        if value is None:
            continue
        if flag not in FLAG_KEYS:
            raise ConfigError(f"unknown option {flag!r}")
        section, key = FLAG_KEYS[flag]
        parser[section][key] = str(value)
    if cap_override is None and parser["rerank"]["cap"]:
        cap_override = parser["rerank"]["cap"]
    if alpha_override is None and parser["rerank"]["alpha"]:
        alpha_override = parser["rerank"]["alpha"]

    g = parser.get
    try:
        ratios = tuple(float(x) for x in g("split", "ratios").split(","))
    except ValueError:
        raise ConfigError("split ratios must be numbers") from None
    rerankers = parse_rerankers(g("rerank", "rerankers"))
    if cap_override is not None:
        cap = parse_cap(str(cap_override))
        if any(r.kind == "mmda" for r in rerankers):
            rerankers = [Reranker("mmda", cap) if r.kind == "mmda" else r for r in rerankers]
        else:
            rerankers.append(Reranker("mmda", cap))
    if alpha_override is not None:
        alpha = float(alpha_override)
        if alpha < 0:
            raise ConfigError("alpha must be non-negative")
        if any(r.kind == "br" for r in rerankers):
            rerankers = [Reranker("br", alpha) if r.kind == "br" else r for r in rerankers]
        else:
            rerankers.append(Reranker("br", alpha))
    trunc = g("preferences", "truncation").strip()
    sweep = [parse_cap(c) for c in g("sweep", "caps").split(",") if c.strip()]
    return ExperimentConfig(
        dataset=g("data", "dataset"),
        format=g("data", "format"),
        ratios=ratios,
        seed=_int(g("split", "seed"), "seed"),
        scorer=g("scorer", "kind"),
        neighbors=_int(g("scorer", "neighbors"), "neighbors"),
        min_overlap=_int(g("scorer", "min_overlap"), "min_overlap"),
        scores_path=g("scorer", "path"),
        complete=_bool(g("preferences", "complete"), "complete"),
        truncation=_int(trunc, "truncation") if trunc else None,
        k=_int(g("rerank", "k"), "k"),
        rerankers=rerankers,
        caps_file=g("rerank", "caps_file"),
        fill_remainder=_bool(g("rerank", "fill_remainder"), "fill_remainder"),
        sweep_caps=sweep,
        trace_interval=_int(g("trace", "interval"), "interval"),
        out=g("output", "out"),
    )
