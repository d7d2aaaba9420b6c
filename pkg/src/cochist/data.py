"""Input tables, per-node true histograms and the synthetic housing generator.

Three CSV tables describe a dataset::

    entities.csv   entity_id,group_id
    groups.csv     group_id,region_id
    hierarchy.csv  region_id,level_0,...,level_L

Only the entities table is private. Node ids in the resulting tree are the
``/``-joined ancestor path, e.g. ``US/S01/S01C03``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import histogram as hist
from .errors import (
    DegenerateRatio,
    DuplicateId,
    MalformedRow,
    MissingGroup,
    MissingRegion,
    StructureError,
)
from .privacy import SeededRng, as_rng

ENTITIES_HEADER = ["entity_id", "group_id"]
GROUPS_HEADER = ["group_id", "region_id"]


@dataclass
class Dataset:
    group_ids: list[str]
    group_regions: list[str]
    entity_groups: np.ndarray
    hierarchy: dict[str, tuple[str, ...]]
    entity_ids: list[str] | None = None

    def __post_init__(self):
        self.entity_groups = np.asarray(self.entity_groups, dtype=np.int64)

    @property
    def n_groups(self) -> int:
        return len(self.group_ids)

    @property
    def n_entities(self) -> int:
        return int(self.entity_groups.size)

    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.entity_groups, minlength=self.n_groups).astype(np.int64)

    def iter_entity_ids(self):
        if self.entity_ids is not None:
            yield from self.entity_ids
        else:
            for i in range(self.n_entities):
                yield f"e{i}"


@dataclass
class Node:
    id: str
    level: int
    parent: str | None
    children: list[str] = field(default_factory=list)
    groups: int = 0
    hist: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def unattributed(self) -> np.ndarray:
        return hist.to_unattributed(self.hist)


class HierarchyTree:
    """Region tree with the public group count and true histogram per node.

    Nodes are stored in level order; ``levels[j]`` lists the ids at depth j.
    """

    def __init__(self, nodes: dict[str, Node], root: str):
        self.nodes = nodes
        self.root = root
        levels: list[list[str]] = []
        frontier = [root]
        while frontier:
            levels.append(frontier)
            frontier = [c for nid in frontier for c in nodes[nid].children]
        self.levels = levels

    def __getitem__(self, node_id) -> Node:
        return self.nodes[node_id]

    def __iter__(self):
        for level in self.levels:
            for nid in level:
                yield self.nodes[nid]

    def __len__(self):
        return len(self.nodes)

    @property
    def depth(self) -> int:
        """Number of levels, L + 1."""
        return len(self.levels)

    @property
    def leaves(self) -> list[str]:
        return self.levels[-1]

    def max_group_size(self) -> int:
        h = self.nodes[self.root].hist
        nz = np.flatnonzero(h)
        return int(nz[-1]) if nz.size else 0

    def validate(self) -> None:
        """Check that parent totals equal the sums over children."""
        for node in self:
            if node.is_leaf:
                if node.level != self.depth - 1:
                    raise StructureError(f"leaf {node.id} is not on the last level")
                continue
            g = sum(self.nodes[c].groups for c in node.children)
            if g != node.groups:
                raise StructureError(
                    f"node {node.id} has {node.groups} groups but its children sum to {g}"
                )

    def to_manifest(self) -> list[dict]:
        return [
            {
                "id": n.id,
                "level": n.level,
                "parent": n.parent,
                "children": list(n.children),
                "groups": n.groups,
            }
            for n in self
        ]


def build_tree(group_sizes, group_leaf, leaf_paths) -> HierarchyTree:
    """Assemble a tree from per-group sizes and leaf assignments.

    ``leaf_paths[j]`` is the ancestor path (level 0 first) of leaf ``j`` and
    ``group_leaf[i]`` indexes into it. Leaves without groups are kept.
    """
    group_sizes = np.asarray(group_sizes, dtype=np.int64)
    group_leaf = np.asarray(group_leaf, dtype=np.int64)
    if group_sizes.shape != group_leaf.shape:
        raise ValueError("group_sizes and group_leaf must align")
    paths = [tuple(p) for p in leaf_paths]
    if not paths:
        raise StructureError("hierarchy has no regions")
    depth = len(paths[0])
    if depth == 0 or any(len(p) != depth for p in paths):
        raise StructureError("all hierarchy rows need the same number of levels")
    roots = {p[0] for p in paths}
    if len(roots) != 1:
        raise StructureError(f"hierarchy must have a single root, found {sorted(roots)}")

    leaf_ids = ["/".join(p) for p in paths]
    unique_leaves = sorted(set(leaf_ids))
    leaf_pos = {lid: i for i, lid in enumerate(unique_leaves)}
    remap = np.asarray([leaf_pos[lid] for lid in leaf_ids], dtype=np.int64)
    group_node = remap[group_leaf]
    width = int(group_sizes.max()) + 1 if group_sizes.size else 0
    counts = np.zeros((len(unique_leaves), width), dtype=np.int64)
    np.add.at(counts, (group_node, group_sizes), 1)

    nodes: dict[str, Node] = {}
    for level in range(depth):
        prefixes = sorted({"/".join(p[: level + 1]) for p in paths})
        for nid in prefixes:
            parent = nid.rsplit("/", 1)[0] if level else None
            nodes[nid] = Node(nid, level, parent)
            if parent is not None:
                nodes[parent].children.append(nid)
    for lid, row in zip(unique_leaves, counts):
        nodes[lid].hist = row.copy()
        nodes[lid].groups = int(row.sum())
    for level in range(depth - 2, -1, -1):
        for node in nodes.values():
            if node.level == level:
                node.hist = np.zeros(width, dtype=np.int64)
                for c in node.children:
                    node.hist += nodes[c].hist
                node.groups = sum(nodes[c].groups for c in node.children)

    root = next(iter(roots))
    tree = HierarchyTree(nodes, root)
    for node in tree:
        node.hist = _trim(node.hist)
    return tree


def _trim(h: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(h)
    return h[: nz[-1] + 1].copy() if nz.size else np.zeros(1 if h.size else 0, dtype=np.int64)


def build_histograms(ds: Dataset) -> HierarchyTree:
    regions = sorted(ds.hierarchy)
    region_pos = {r: i for i, r in enumerate(regions)}
    group_leaf = [region_pos[r] for r in ds.group_regions]
    tree = build_tree(ds.group_sizes(), group_leaf, [ds.hierarchy[r] for r in regions])
    tree.validate()
    return tree


def _hierarchy_header(header):
    return ["region_id"] + [f"level_{i}" for i in range(max(len(header) - 1, 1))]


def _read_csv(path: Path, expected_header):
    """Yield ``(line_number, row)``; ``expected_header`` may be a list or a
    function of the actual header returning the expected one."""
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow("missing header", path, 1) from None
        header = [h.strip() for h in header]
        want = expected_header(header) if callable(expected_header) else expected_header
        if header != want:
            raise MalformedRow(f"expected header {','.join(want)}, got {','.join(header)}", path, 1)
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise MalformedRow(
                    f"expected {len(header)} fields, got {len(row)}", path, reader.line_num
                )
            row = [c.strip() for c in row]
            if any(not c for c in row):
                raise MalformedRow("empty field", path, reader.line_num)
            yield reader.line_num, row


def load_tables(entities_path, groups_path, hierarchy_path) -> Dataset:
    entities_path, groups_path, hierarchy_path = map(
        Path, (entities_path, groups_path, hierarchy_path)
    )

    hierarchy: dict[str, tuple[str, ...]] = {}
    for line, row in _read_csv(hierarchy_path, _hierarchy_header):
        region = row[0]
        if region in hierarchy:
            raise DuplicateId(f"duplicate region_id {region!r}", hierarchy_path, line)
        hierarchy[region] = tuple(row[1:])

    group_ids: list[str] = []
    group_regions: list[str] = []
    group_pos: dict[str, int] = {}
    for line, (gid, region) in _read_csv(groups_path, GROUPS_HEADER):
        if gid in group_pos:
            raise DuplicateId(f"duplicate group_id {gid!r}", groups_path, line)
        if region not in hierarchy:
            raise MissingRegion(f"region {region!r} is not in the hierarchy", groups_path, line)
        group_pos[gid] = len(group_ids)
        group_ids.append(gid)
        group_regions.append(region)

    entity_ids: list[str] = []
    entity_groups: list[int] = []
    seen: set[str] = set()
    for line, (eid, gid) in _read_csv(entities_path, ENTITIES_HEADER):
        if eid in seen:
            raise DuplicateId(f"duplicate entity_id {eid!r}", entities_path, line)
        pos = group_pos.get(gid)
        if pos is None:
            raise MissingGroup(f"group {gid!r} is not in the groups table", entities_path, line)
        seen.add(eid)
        entity_ids.append(eid)
        entity_groups.append(pos)

    return Dataset(group_ids, group_regions, np.asarray(entity_groups, dtype=np.int64),
                   hierarchy, entity_ids)


def write_tables(ds: Dataset, directory) -> dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "entities": directory / "entities.csv",
        "groups": directory / "groups.csv",
        "hierarchy": directory / "hierarchy.csv",
    }
    with paths["entities"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ENTITIES_HEADER)
        gids = ds.group_ids
        w.writerows((eid, gids[g]) for eid, g in zip(ds.iter_entity_ids(), ds.entity_groups.tolist()))
    with paths["groups"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GROUPS_HEADER)
        w.writerows(zip(ds.group_ids, ds.group_regions))
    depth = len(next(iter(ds.hierarchy.values())))
    with paths["hierarchy"].open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region_id"] + [f"level_{i}" for i in range(depth)])
        for region in sorted(ds.hierarchy):
            w.writerow([region, *ds.hierarchy[region]])
    return paths


class DatasetStats(NamedTuple):
    groups: int
    people: int
    unique_sizes: int

    def to_json(self) -> str:
        return json.dumps(self._asdict())


def dataset_stats(ds: Dataset) -> DatasetStats:
    sizes = ds.group_sizes()
    return DatasetStats(int(sizes.size), int(sizes.sum()), int(np.unique(sizes).size))


# Approximate national shares of households of size 1..7 (the last bucket holds 7+).
CENSUS_SHARES = (0.267, 0.336, 0.158, 0.133, 0.062, 0.025, 0.019)


@dataclass
class SynthParams:
    states: int = 5
    counties_per_state: int = 4
    base_counts: tuple[int, ...] = tuple(round(20_000 * s) for s in CENSUS_SHARES)
    state_weights: tuple[float, ...] | None = None
    tail_ratio: float | None = None
    outliers: int = 50
    outlier_max: int = 10_000
    county_weights: tuple[float, ...] | None = None
    tail_cap: int = 10_000
    root: str = "US"
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "SynthParams":
        d = dict(d)
        for key in ("base_counts", "state_weights", "county_weights"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _state_counts(base: np.ndarray, ratio: float | None, cap: int, gen) -> np.ndarray:
    """Counts for sizes 1..n, with a binomial tail continuing past size 7."""
    if base[5] == 0:
        raise DegenerateRatio("base distribution has no groups of size 6")
    r = base[6] / base[5] if ratio is None else ratio
    if not 0 <= r < 1:
        raise DegenerateRatio(f"tail ratio must be in [0, 1), got {r:g}")
    counts = [int(c) for c in base]
    prev = counts[-1]
    size = len(counts)
    while size < cap and prev > 0 and prev * r >= 1e-6:
        prev = int(gen.binomial(prev, r))
        counts.append(prev)
        size += 1
    return np.asarray(counts, dtype=np.int64)


def gen_synthetic_housing(p: SynthParams, rng=None) -> Dataset:
    """Partially synthetic households with a geometric-like heavy tail.

    Per state: base counts for sizes 1..7, a tail where each size's count is
    binomial in the previous size's count with the size-7/size-6 ratio, and
    uniform outliers. Groups are spread over counties with probabilities
    proportional to ``county_weights``.
    """
    gen = (as_rng(rng) if rng is not None else SeededRng(p.seed)).generator
    base = np.asarray(p.base_counts, dtype=np.float64)
    if base.size != 7 or (base < 0).any():
        raise ValueError("base_counts must hold 7 nonnegative counts (sizes 1..7)")
    state_w = p.state_weights or (1.0,) * p.states
    if len(state_w) != p.states:
        raise ValueError("state_weights must have one entry per state")
    if p.counties_per_state:
        cw = np.asarray(p.county_weights or [1 / (j + 1) for j in range(p.counties_per_state)],
                        dtype=np.float64)
        if cw.size != p.counties_per_state or (cw < 0).any() or cw.sum() <= 0:
            raise ValueError("county_weights must be nonnegative, one per county")
        cw = cw / cw.sum()

    sizes_parts = []
    leaf_parts = []
    leaf_paths = []
    for s in range(p.states):
        state = f"S{s + 1:02d}"
        counts = _state_counts(np.rint(base * state_w[s]).astype(np.int64), p.tail_ratio,
                               p.tail_cap, gen)
        sizes = np.repeat(np.arange(1, counts.size + 1, dtype=np.int64), counts)
        if p.outliers:
            sizes = np.concatenate([sizes, gen.integers(1, p.outlier_max + 1, p.outliers)])
        if p.counties_per_state:
            first = len(leaf_paths)
            for j in range(p.counties_per_state):
                leaf_paths.append((p.root, state, f"{state}C{j + 1:02d}"))
            leaf_parts.append(first + gen.choice(p.counties_per_state, size=sizes.size, p=cw))
        else:
            leaf_parts.append(np.full(sizes.size, len(leaf_paths)))
            leaf_paths.append((p.root, state))
        sizes_parts.append(sizes)

    sizes = np.concatenate(sizes_parts).astype(np.int64)
    leaves = np.concatenate(leaf_parts).astype(np.int64)
    regions = ["".join(path[1:]) if len(path) == 2 else path[-1] for path in leaf_paths]
    group_ids = [f"g{i}" for i in range(sizes.size)]
    return Dataset(
        group_ids=group_ids,
        group_regions=[regions[j] for j in leaves.tolist()],
        entity_groups=np.repeat(np.arange(sizes.size, dtype=np.int64), sizes),
        hierarchy={r: path for r, path in zip(regions, leaf_paths)},
    )


def tree_from_sizes(group_sizes, group_leaf, leaf_paths) -> HierarchyTree:
    """Shortcut that skips the entity table when only group sizes are known."""
    tree = build_tree(group_sizes, group_leaf, leaf_paths)
    tree.validate()
    return tree

