"""Seeded multi-trial experiments and report output."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import consistency
from .data import HierarchyTree, SynthParams, build_histograms, gen_synthetic_housing, load_tables
from .estimators import DEFAULT_K, parse_kinds
from .histogram import emd
from .privacy import DEFAULT_BOUND_EPSILON, SeededRng, estimate_size_bound, split_budget

ALGORITHMS = ("top_down", "bottom_up", "independent")
REPORT_FORMATS = ("json", "csv", "plotdata")


@dataclass
class ExperimentConfig:
    epsilon: float | None = 1.0
    level_epsilons: list[float] | None = None
    kinds: list[str] = field(default_factory=lambda: ["hc"])
    algorithm: str = "top_down"
    merge: str = "weighted"
    k: int | str = DEFAULT_K
    k_epsilon: float = DEFAULT_BOUND_EPSILON
    trials: int = 10
    seed: int = 0
    synth: dict | None = None
    tables: dict | None = None
    out: str | None = None

    def __post_init__(self):
        if isinstance(self.kinds, str):
            self.kinds = self.kinds.split(",")
        self.kinds = [k.value for k in parse_kinds(self.kinds)]
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.merge not in consistency.MERGE_RULES:
            raise ValueError(f"merge must be one of {consistency.MERGE_RULES}")
        if self.level_epsilons is None:
            if self.epsilon is None or self.epsilon <= 0:
                raise ValueError("epsilon must be positive")
        elif any(e <= 0 for e in self.level_epsilons):
            raise ValueError("per-level epsilons must be positive")
        if self.k != "auto":
            self.k = int(self.k)
            if self.k < 1:
                raise ValueError("K must be >= 1")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        return cls(**data)

    def load_tree(self) -> HierarchyTree:
        if self.tables:
            ds = load_tables(self.tables["entities"], self.tables["groups"], self.tables["hierarchy"])
        else:
            ds = gen_synthetic_housing(SynthParams.from_dict(self.synth or {}))
        return build_histograms(ds)


@dataclass
class LevelStats:
    level: int
    nodes: int
    eps: float
    mean_emd: float
    std_mean: float
    mean_sum_emd: float
    trials: list[float]
    omniscient: float


@dataclass
class ExperimentReport:
    config: dict
    levels: list[LevelStats]
    total_epsilon: float
    k: list[int]
    omniscient_total: float = 0.0
    timings: dict[str, float] = field(default_factory=dict)

    def to_dict(self, timings: bool = True) -> dict:
        d = asdict(self)
        if not timings:
            d.pop("timings")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        d = dict(d)
        d["levels"] = [LevelStats(**lv) for lv in d["levels"]]
        return cls(**d)


def mean_and_std_of_mean(values) -> tuple[float, float]:
    """Sample mean and its standard error (sample std over sqrt(n))."""
    values = np.asarray(values, dtype=np.float64)
    mean = float(values.mean())
    if values.size < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


def omniscient_error(tree: HierarchyTree, eps_per_level) -> list[float]:
    """Reference error per level: distinct sizes times sqrt(2)/eps, averaged per node.

    The overall reference for a hierarchy is the sum over levels.
    """
    if np.isscalar(eps_per_level):
        eps_per_level = [float(eps_per_level)] * tree.depth
    out = []
    for level, ids in enumerate(tree.levels):
        per_node = [distinct_sizes(tree[nid].hist) * math.sqrt(2) / eps_per_level[level]
                    for nid in ids]
        out.append(float(np.mean(per_node)) if per_node else 0.0)
    return out


def distinct_sizes(h) -> int:
    return int(np.count_nonzero(np.asarray(h)))


def level_errors(tree: HierarchyTree, hists: dict) -> list[tuple[float, float]]:
    """``(mean, sum)`` of per-node EMD at each level."""
    out = []
    for ids in tree.levels:
        errs = [emd(tree[nid].hist, hists[nid]) for nid in ids]
        out.append((float(np.mean(errs)), float(np.sum(errs))))
    return out


def run_pipeline(tree: HierarchyTree, cfg: ExperimentConfig, seed: int):
    """One release under ``cfg``. Returns the result and the K that was used."""
    rng = SeededRng(seed)
    eps = cfg.epsilon
    level_eps = cfg.level_epsilons
    bound_eps = 0.0
    if cfg.k == "auto":
        bound_eps = cfg.k_epsilon
        k = estimate_size_bound(tree[tree.root].unattributed(), bound_eps, rng.child("size-bound"))
        if level_eps is None:
            eps = eps - bound_eps
            if eps <= 0:
                raise ValueError("epsilon does not cover the size-bound budget")
    else:
        k = cfg.k
    if cfg.algorithm == "top_down":
        result = consistency.top_down(tree, eps, cfg.kinds, rng, k=k, merge=cfg.merge,
                                      level_eps=level_eps)
    elif cfg.algorithm == "independent":
        result = consistency.independent(tree, eps, cfg.kinds, rng, k=k, level_eps=level_eps)
    else:
        total = eps if level_eps is None else sum(level_eps)
        result = consistency.bottom_up(tree, total, cfg.kinds[-1], rng, k=k)
    result.account.size_bound_epsilon = bound_eps
    return result, k


def _level_eps_for_report(tree, cfg) -> list[float]:
    if cfg.level_epsilons is not None:
        return list(cfg.level_epsilons)
    eps = cfg.epsilon - (cfg.k_epsilon if cfg.k == "auto" else 0.0)
    if cfg.algorithm == "bottom_up":
        return [eps] * tree.depth
    return split_budget(eps, tree.depth)


def run_experiment(cfg: ExperimentConfig, tree: HierarchyTree | None = None) -> ExperimentReport:
    timings = {}
    t0 = time.perf_counter()
    if tree is None:
        tree = cfg.load_tree()
    timings["load"] = time.perf_counter() - t0

    per_trial_mean = [[] for _ in range(tree.depth)]
    per_trial_sum = [[] for _ in range(tree.depth)]
    ks = []
    total_eps = 0.0
    t0 = time.perf_counter()
    for trial in range(cfg.trials):
        result, k = run_pipeline(tree, cfg, cfg.seed + trial)
        ks.append(int(k))
        total_eps = result.account.total
        for level, (mean, total) in enumerate(level_errors(tree, result.hists)):
            per_trial_mean[level].append(mean)
            per_trial_sum[level].append(total)
    timings["trials"] = time.perf_counter() - t0

    level_eps = _level_eps_for_report(tree, cfg)
    omni = omniscient_error(tree, level_eps)
    levels = []
    for level in range(tree.depth):
        mean, sem = mean_and_std_of_mean(per_trial_mean[level])
        levels.append(LevelStats(
            level=level,
            nodes=len(tree.levels[level]),
            eps=level_eps[level],
            mean_emd=mean,
            std_mean=sem,
            mean_sum_emd=float(np.mean(per_trial_sum[level])),
            trials=per_trial_mean[level],
            omniscient=omni[level],
        ))
    cfg_dict = asdict(cfg)
    return ExperimentReport(cfg_dict, levels, total_eps, ks, float(sum(omni)), timings)


def emit_report(report: ExperimentReport, fmt: str, path) -> Path:
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"format must be one of {REPORT_FORMATS}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
    elif fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["level", "trial", "eps", "mean_emd"])
            for lv in report.levels:
                for trial, value in enumerate(lv.trials):
                    w.writerow([lv.level, trial, lv.eps, repr(value)])
    else:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eps", "level", "mean_emd", "std_mean"])
            for lv in report.levels:
                w.writerow([lv.eps, lv.level, repr(lv.mean_emd), repr(lv.std_mean)])
    return path


def load_report(path) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
