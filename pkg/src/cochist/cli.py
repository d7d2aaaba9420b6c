"""Command line entry point: ``cochist {synth,privatize,eval,check,bench}``.

Exit status is 0 on success, 1 for data errors (bad tables, failed audit)
and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import bench
from . import histogram as hist
from .consistency import MERGE_RULES, check_consistency
from .data import (
    HierarchyTree,
    Node,
    SynthParams,
    dataset_stats,
    gen_synthetic_housing,
    write_tables,
)
from .errors import CocError, DataError, StructureError
from .histogram import emd

MANIFEST = "manifest.json"
TABLES = ("entities", "groups", "hierarchy")

log = logging.getLogger("cochist")


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def _k_bound(text: str):
    if text == "auto":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("K bound must be an integer or 'auto'")


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML experiment config")
    p.add_argument("--tables", type=Path, help="directory with entities/groups/hierarchy CSVs")
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon", type=float, help="total budget, split evenly over levels")
    p.add_argument("--levels-epsilon", type=_float_list, help="per-level budgets, root first")
    p.add_argument("--kinds", help="estimator per level, e.g. hc,hg (one value applies to all)")
    p.add_argument("--algorithm", choices=bench.ALGORITHMS)
    p.add_argument("--merge", choices=MERGE_RULES)
    p.add_argument("--k-bound", type=_k_bound, help="public size bound K or 'auto'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cochist", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic housing dataset")
    p.add_argument("--config", type=Path, help="YAML file of generator parameters")
    p.add_argument("--seed", type=int)
    p.add_argument("--states", type=int)
    p.add_argument("--counties", type=int, help="counties per state, 0 for two levels")
    p.add_argument("--outliers", type=int)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("privatize", help="run one release and write every node histogram")
    _add_run_options(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--write-truth", type=Path, help="also write the true histograms here")

    p = sub.add_parser("eval", help="EMD between two histogram directories")
    p.add_argument("truth", type=Path)
    p.add_argument("release", type=Path)
    p.add_argument("--out", type=Path, help="write the per-level summary as JSON")

    p = sub.add_parser("check", help="audit a release directory for consistency")
    p.add_argument("release", type=Path)

    p = sub.add_parser("bench", help="multi-trial experiment")
    _add_run_options(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", type=Path, help="directory for report.json, report.csv, plotdata.csv")
    return parser


# -- config assembly ------------------------------------------------------------


def _config_from_args(args) -> bench.ExperimentConfig:
    data = {}
    if args.config:
        data = yaml.safe_load(args.config.read_text(encoding="utf-8")) or {}
        if not isinstance(data, dict):
            raise UsageError(f"{args.config}: config must be a mapping")
    overrides = {
        "seed": args.seed,
        "epsilon": args.epsilon,
        "level_epsilons": args.levels_epsilon,
        "kinds": args.kinds,
        "algorithm": args.algorithm,
        "merge": args.merge,
        "k": args.k_bound,
        "trials": getattr(args, "trials", None),
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.levels_epsilon is not None and args.epsilon is None:
        data["epsilon"] = None
    if args.tables:
        data["tables"] = {t: str(args.tables / f"{t}.csv") for t in TABLES}
    try:
        return bench.ExperimentConfig(**data)
    except TypeError as exc:
        raise UsageError(f"bad config: {exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# -- release directories ----------------------------------------------------------


def _node_file(index: int) -> str:
    return f"node-{index:05d}.coc"


def write_release(directory: Path, tree: HierarchyTree, hists: dict, meta: dict) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    nodes = []
    for i, entry in enumerate(tree.to_manifest()):
        entry["file"] = _node_file(i)
        hist.write_histogram(directory / entry["file"], hists[entry["id"]], "count")
        nodes.append(entry)
    manifest = {"format": hist.FORMAT_TAG, "root": tree.root, "nodes": nodes, **meta}
    path = directory / MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_release(directory: Path) -> tuple[HierarchyTree, dict, dict]:
    """Tree of public group counts, the histograms and the raw manifest."""
    path = directory / MANIFEST
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
        entries = manifest["nodes"]
        root = manifest["root"]
    except FileNotFoundError:
        raise DataError("no manifest found", path) from None
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"unreadable manifest: {exc}", path) from None
    nodes = {}
    hists = {}
    for e in entries:
        try:
            nid = e["id"]
            nodes[nid] = Node(nid, e["level"], e["parent"], list(e["children"]), int(e["groups"]))
            fname = e["file"]
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad node entry {e!r}: {exc}", path) from None
        hists[nid] = hist.read_count_histogram(directory / fname)
        nodes[nid].hist = hists[nid]
    for n in nodes.values():
        for c in n.children:
            if c not in nodes:
                raise StructureError(f"manifest lists unknown child {c!r} of {n.id!r}")
    return HierarchyTree(nodes, root), hists, manifest


# -- commands -------------------------------------------------------------------------


def cmd_synth(args) -> int:
    data = {}
    if args.config:
        data = yaml.safe_load(args.config.read_text(encoding="utf-8")) or {}
    for key, value in (("seed", args.seed), ("states", args.states),
                       ("counties_per_state", args.counties), ("outliers", args.outliers)):
        if value is not None:
            data[key] = value
    try:
        params = SynthParams.from_dict(data)
    except TypeError as exc:
        raise UsageError(f"bad generator parameters: {exc}") from None
    ds = gen_synthetic_housing(params)
    write_tables(ds, args.out)
    stats = dataset_stats(ds)
    (args.out / "params.yaml").write_text(yaml.safe_dump(params.to_dict()), encoding="utf-8")
    (args.out / "stats.json").write_text(stats.to_json() + "\n", encoding="utf-8")
    print(stats.to_json())
    return 0


def cmd_privatize(args) -> int:
    cfg = _config_from_args(args)
    tree = cfg.load_tree()
    result, k = bench.run_pipeline(tree, cfg, cfg.seed)
    meta = {
        "algorithm": result.algorithm,
        "kinds": cfg.kinds,
        "merge": cfg.merge,
        "seed": cfg.seed,
        "k": int(k),
        "privacy": result.account.to_dict(),
        "diagnostics": result.diagnostics,
    }
    write_release(args.out, tree, result.hists, meta)
    if args.write_truth:
        write_release(args.write_truth, tree, {n.id: n.hist for n in tree}, {"truth": True})
    print(json.dumps({"nodes": len(tree), "levels": tree.depth, "epsilon": result.account.total,
                      "k": int(k)}))
    return 0


def cmd_eval(args) -> int:
    truth_tree, truth, _ = read_release(args.truth)
    _, release, _ = read_release(args.release)
    missing = [nid for nid in truth if nid not in release]
    if missing:
        raise DataError(f"release has no histogram for {len(missing)} node(s), e.g. {missing[0]!r}",
                        args.release)
    levels = []
    for level, ids in enumerate(truth_tree.levels):
        errs = [emd(truth[nid], release[nid]) for nid in ids]
        levels.append({"level": level, "nodes": len(ids), "mean_emd": float(np.mean(errs)),
                       "sum_emd": int(np.sum(errs))})
    text = json.dumps({"levels": levels}, indent=2)
    if args.out:
        args.out.write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_check(args) -> int:
    tree, hists, _ = read_release(args.release)
    violations = check_consistency(hists, tree)
    for v in violations:
        print(v)
    print(f"{len(tree)} nodes checked, {len(violations)} violation(s)")
    return 1 if violations else 0


def cmd_bench(args) -> int:
    cfg = _config_from_args(args)
    report = bench.run_experiment(cfg)
    out = args.out or (Path(cfg.out) if cfg.out else None)
    if out:
        bench.emit_report(report, "json", out / "report.json")
        bench.emit_report(report, "csv", out / "report.csv")
        bench.emit_report(report, "plotdata", out / "plotdata.csv")
    for lv in report.levels:
        print(f"level {lv.level}: nodes={lv.nodes} eps={lv.eps:.6g} "
              f"mean_emd={lv.mean_emd:.6g} std_mean={lv.std_mean:.6g} "
              f"omniscient={lv.omniscient:.6g}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "privatize": cmd_privatize,
    "eval": cmd_eval,
    "check": cmd_check,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"cochist: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, CocError, OSError, yaml.YAMLError) as exc:
        print(f"cochist: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"cochist: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
