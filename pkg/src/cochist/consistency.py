"""Hierarchical consistency for count-of-counts estimates.

The top-down sweep estimates every node independently, then walks from the
root to the leaves: each node's groups are matched to its children's groups
by size, every matched pair of size estimates is merged by inverse-variance
weighting, and finally every internal node is replaced by the sum of its
children. Only the estimation step reads the private histograms.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import histogram as hist
from .data import HierarchyTree
from .errors import InfeasibleAllocation, NonPositiveVariance, StructureError, TotalMismatch
from .estimators import (
    DEFAULT_K,
    EstimatorKind,
    NodeEstimate,
    estimate,
    parse_kinds,
    round_half_up,
)
from .isotonic import IsotonicFit, partition_sizes
from .privacy import PrivacyAccount, as_rng, split_budget

log = logging.getLogger(__name__)

MERGE_RULES = ("weighted", "plain")


# -- variance estimates -------------------------------------------------------


def variance_hg(fit: IsotonicFit, eps: float) -> np.ndarray:
    """Per-group variance ``2 / (|S_i| eps^2)`` from the level sets of the fit."""
    return 2.0 / (partition_sizes(fit) * eps**2)


def _per_group_count(hat_h) -> np.ndarray:
    hat_h = np.asarray(hat_h, dtype=np.int64)
    counts = hat_h[hist.to_unattributed(hat_h)]
    assert (counts > 0).all()
    return counts


def variance_hc(hat_h, eps: float) -> np.ndarray:
    """Per-group variance ``4 / (eps^2 * #groups estimated at the same size)``."""
    return 4.0 / (eps**2 * _per_group_count(hat_h))


def variance_naive(hat_h, eps: float) -> np.ndarray:
    # each cell carries noise of scale 2/eps, i.e. variance 8/eps^2
    return 8.0 / (eps**2 * _per_group_count(hat_h))


def estimate_variance(est: NodeEstimate) -> np.ndarray:
    if est.groups == 0:
        return np.zeros(0)
    if est.kind is EstimatorKind.HG:
        return variance_hg(est.fit, est.eps_used)
    if est.kind is EstimatorKind.NAIVE:
        return variance_naive(est.hat_h, est.eps_used)
    return variance_hc(est.hat_h, est.eps_used)


# -- matching -----------------------------------------------------------------


def proportional_assign(counts_per_child, r: int) -> np.ndarray:
    """Split ``r`` among children in proportion to ``counts_per_child``.

    Exact largest-remainder rounding; equal remainders favour the lower child.
    """
    counts = np.asarray(counts_per_child, dtype=np.int64)
    total = int(counts.sum())
    if r < 0 or r > total:
        raise InfeasibleAllocation(f"cannot allocate {r} among {total}")
    if r == total:
        return counts.copy()
    scaled = counts * r
    out = scaled // total
    remainder = scaled - out * total
    k = r - int(out.sum())
    if k:
        order = np.argsort(-remainder, kind="stable")
        out[order[:k]] += 1
    return out


@dataclass
class Matching:
    """Assignment of every parent group to one child group.

    ``child_pos[i]`` indexes ``child_ids`` and ``child_index[i]`` is the
    position in that child's unattributed histogram matched to parent index i.
    """

    child_ids: list
    child_pos: np.ndarray
    child_index: np.ndarray
    cost: int

    def __len__(self):
        return self.child_pos.size

    def pairs_for(self, pos: int) -> tuple[np.ndarray, np.ndarray]:
        """Parent indices and child indices matched to child number ``pos``."""
        parent_idx = np.flatnonzero(self.child_pos == pos)
        return parent_idx, self.child_index[parent_idx]

    def split(self) -> list[tuple[np.ndarray, np.ndarray]]:
        order = np.argsort(self.child_pos, kind="stable")
        bounds = np.searchsorted(self.child_pos[order], np.arange(len(self.child_ids) + 1))
        out = []
        for pos in range(len(self.child_ids)):
            parent_idx = order[bounds[pos]: bounds[pos + 1]]
            out.append((parent_idx, self.child_index[parent_idx]))
        return out


def _sorted_int(x, what) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    if x.size > 1 and (x[1:] < x[:-1]).any():
        raise ValueError(f"{what} must be sorted ascending")
    return x


def match_groups(parent, children) -> Matching:
    """Least-cost perfect matching between parent and child group sizes.

    ``children`` is a sequence of ``(child_id, sorted_sizes)``. The cost of
    pairing two groups is the absolute size difference. Smallest unmatched
    parent groups are paired with smallest unmatched child groups; when a
    run of equal parent sizes is shorter than the run of equal child sizes
    it is shared among the children in proportion to their counts.
    """
    top = _sorted_int(parent, "parent sizes")
    ids = [cid for cid, _ in children]
    kids = [_sorted_int(h, f"sizes of child {cid}") for cid, h in children]
    n = top.size
    if n != sum(k.size for k in kids):
        raise TotalMismatch(
            f"parent has {n} groups, children have {sum(k.size for k in kids)}"
        )
    child_pos = np.empty(n, dtype=np.int32)
    child_index = np.empty(n, dtype=np.int64)
    ptr = [0] * len(kids)
    lens = [k.size for k in kids]
    cost = 0
    pt = 0
    while pt < n:
        s_t = top[pt]
        n_t = int(np.searchsorted(top, s_t, side="right")) - pt
        s_b = min(kids[c][ptr[c]] for c in range(len(kids)) if ptr[c] < lens[c])
        num = np.zeros(len(kids), dtype=np.int64)
        for c, kid in enumerate(kids):
            if ptr[c] < lens[c] and kid[ptr[c]] == s_b:
                num[c] = int(np.searchsorted(kid, s_b, side="right")) - ptr[c]
        n_b = int(num.sum())
        take = num if n_t >= n_b else proportional_assign(num, n_t)
        pos = pt
        for c in np.flatnonzero(take):
            a = int(take[c])
            child_pos[pos: pos + a] = c
            child_index[pos: pos + a] = np.arange(ptr[c], ptr[c] + a)
            ptr[c] += a
            pos += a
        cost += abs(int(s_t) - int(s_b)) * (pos - pt)
        pt = pos
    return Matching(ids, child_pos, child_index, cost)


def matching_cost(parent, children, m: Matching) -> int:
    top = np.asarray(parent, dtype=np.int64)
    sizes = np.empty_like(top)
    kids = [np.asarray(h, dtype=np.int64) for _, h in children]
    for pos, (pidx, cidx) in enumerate(m.split()):
        sizes[pidx] = kids[pos][cidx]
    return int(np.abs(top - sizes).sum())


# -- merging ------------------------------------------------------------------


def merge_estimates(x_parent: float, v_parent: float, x_child: float, v_child: float):
    """Inverse-variance weighted average of two estimates and its variance."""
    if v_parent <= 0 or v_child <= 0:
        raise NonPositiveVariance("variances must be positive")
    wp = 1.0 / v_parent
    wc = 1.0 / v_child
    return (x_parent * wp + x_child * wc) / (wp + wc), 1.0 / (wp + wc)


def merge_arrays(xp, vp, xc, vc, rule: str = "weighted"):
    """Vectorised merge. Zero variances mean exact estimates and dominate."""
    xp = np.asarray(xp, dtype=np.float64)
    xc = np.asarray(xc, dtype=np.float64)
    vp = np.asarray(vp, dtype=np.float64)
    vc = np.asarray(vc, dtype=np.float64)
    if rule == "plain":
        return (xp + xc) / 2.0, (vp + vc) / 4.0
    if rule != "weighted":
        raise ValueError(f"unknown merge rule {rule!r}")
    if (vp < 0).any() or (vc < 0).any():
        raise NonPositiveVariance("variances must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        wp = 1.0 / vp
        wc = 1.0 / vc
        value = (xp * wp + xc * wc) / (wp + wc)
        var = 1.0 / (wp + wc)
    both = (vp == 0) & (vc == 0)
    value = np.where(both, (xp + xc) / 2.0, value)
    value = np.where((vp == 0) & ~both, xp, value)
    value = np.where((vc == 0) & ~both, xc, value)
    return value, var


# -- drivers ------------------------------------------------------------------


@dataclass
class ConsistentResult:
    hists: dict[str, np.ndarray]
    estimates: dict[str, NodeEstimate] = field(default_factory=dict)
    account: PrivacyAccount = field(default_factory=PrivacyAccount)
    algorithm: str = "top_down"
    diagnostics: list[dict] = field(default_factory=list)

    def __getitem__(self, node_id) -> np.ndarray:
        return self.hists[node_id]


def _kinds_for(kinds, depth: int) -> list[EstimatorKind]:
    if isinstance(kinds, (EstimatorKind, str)) and not (
        isinstance(kinds, str) and "," in kinds
    ):
        kinds = [kinds]
    kinds = parse_kinds(kinds)
    if len(kinds) == 1:
        kinds = kinds * depth
    if len(kinds) != depth:
        raise ValueError(f"need one estimator per level ({depth}), got {len(kinds)}")
    return kinds


def _level_budget(eps, level_eps, depth: int) -> list[float]:
    if level_eps is not None:
        level_eps = [float(e) for e in level_eps]
        if len(level_eps) != depth or any(e <= 0 for e in level_eps):
            raise ValueError(f"need {depth} positive per-level budgets")
        return level_eps
    return split_budget(eps, depth)


def _estimate_nodes(tree, node_ids, kinds_by_level, eps_by_level, k, rng):
    out = {}
    for nid in node_ids:
        node = tree[nid]
        out[nid] = estimate(
            kinds_by_level[node.level], node.hist, node.groups, k,
            eps_by_level[node.level], rng.child(nid),
        )
    return out


def _back_substitute(tree: HierarchyTree, final: dict) -> None:
    for level in range(tree.depth - 2, -1, -1):
        for nid in tree.levels[level]:
            parts = [final[c] for c in tree[nid].children]
            width = max((p.size for p in parts), default=0)
            total = np.zeros(width, dtype=np.int64)
            for p in parts:
                total[: p.size] += p
            final[nid] = total


def independent(tree: HierarchyTree, eps: float, kinds, rng, k: int = DEFAULT_K,
                level_eps=None) -> ConsistentResult:
    """Per-node estimates with no consistency step (a baseline)."""
    depth = tree.depth
    kinds = _kinds_for(kinds, depth)
    level_eps = _level_budget(eps, level_eps, depth)
    estimates = _estimate_nodes(tree, [n.id for n in tree], kinds, level_eps, k, as_rng(rng))
    return ConsistentResult(
        {nid: e.hat_h for nid, e in estimates.items()}, estimates,
        PrivacyAccount(level_eps), "independent",
    )


def top_down(tree: HierarchyTree, eps: float, kinds, rng, k: int = DEFAULT_K,
             merge: str = "weighted", level_eps=None) -> ConsistentResult:
    """Consistent release: independent estimates, then a matching/merging sweep."""
    if merge not in MERGE_RULES:
        raise ValueError(f"unknown merge rule {merge!r}")
    tree.validate()
    depth = tree.depth
    kinds = _kinds_for(kinds, depth)
    level_eps = _level_budget(eps, level_eps, depth)
    rng = as_rng(rng)

    # the only step that reads private data
    estimates = _estimate_nodes(tree, [n.id for n in tree], kinds, level_eps, k, rng)

    variances = {nid: estimate_variance(e) for nid, e in estimates.items()}
    cur_hg = {tree.root: estimates[tree.root].hat_hg}
    cur_var = {tree.root: variances[tree.root]}
    diagnostics = []
    for level in range(depth - 1):
        level_cost = 0
        merged = 0
        for nid in tree.levels[level]:
            node = tree[nid]
            children = [(c, estimates[c].hat_hg) for c in node.children]
            m = match_groups(cur_hg[nid], children)
            level_cost += m.cost
            for c, (pidx, cidx) in zip(node.children, m.split()):
                vals = estimates[c].hat_hg.astype(np.float64)
                var = variances[c].copy()
                vals[cidx], var[cidx] = merge_arrays(
                    cur_hg[nid][pidx], cur_var[nid][pidx], vals[cidx], var[cidx], merge
                )
                rounded = round_half_up(vals)
                order = np.argsort(rounded, kind="stable")
                cur_hg[c] = rounded[order]
                cur_var[c] = var[order]
                merged += cidx.size
        all_var = np.concatenate([cur_var[c] for p in tree.levels[level] for c in tree[p].children]
                                 or [np.zeros(0)])
        diag = {
            "level": level + 1,
            "match_cost": int(level_cost),
            "merged_groups": int(merged),
            "mean_variance": float(all_var.mean()) if all_var.size else 0.0,
            "max_variance": float(all_var.max()) if all_var.size else 0.0,
        }
        diagnostics.append(diag)
        log.info("consistency sweep", extra={"diagnostics": diag})

    final: dict[str, np.ndarray] = {}
    if depth == 1:
        final[tree.root] = estimates[tree.root].hat_h
    else:
        for leaf in tree.leaves:
            final[leaf] = hist.from_unattributed(cur_hg[leaf])
        _back_substitute(tree, final)
    ordered = {n.id: final[n.id] for n in tree}
    return ConsistentResult(ordered, estimates, PrivacyAccount(level_eps), "top_down", diagnostics)


def bottom_up(tree: HierarchyTree, eps: float, kind, rng, k: int = DEFAULT_K) -> ConsistentResult:
    """Spend the whole budget on the leaves and sum upwards."""
    tree.validate()
    kind = parse_kinds([kind] if isinstance(kind, (str, EstimatorKind)) else kind)[0]
    depth = tree.depth
    kinds = [kind] * depth
    eps_by_level = [eps] * depth
    estimates = _estimate_nodes(tree, tree.leaves, kinds, eps_by_level, k, as_rng(rng))
    final = {leaf: estimates[leaf].hat_h for leaf in tree.leaves}
    _back_substitute(tree, final)
    account = PrivacyAccount([0.0] * (depth - 1) + [eps])
    return ConsistentResult({n.id: final[n.id] for n in tree}, estimates, account, "bottom_up")


# -- audit --------------------------------------------------------------------


class Violation(NamedTuple):
    node: str
    rule: str
    index: int | None
    lhs: float
    rhs: float

    def __str__(self):
        at = "" if self.index is None else f"[{self.index}]"
        return f"{self.node}{at}: {self.rule} violated ({self.lhs} vs {self.rhs})"


def check_consistency(result, tree: HierarchyTree) -> list[Violation]:
    """List every breach of integrality, nonnegativity, group total or additivity."""
    hists = result.hists if isinstance(result, ConsistentResult) else result
    out: list[Violation] = []
    for node in tree:
        if node.id not in hists:
            raise StructureError(f"no histogram for node {node.id}")
        h = np.asarray(hists[node.id])
        if h.dtype.kind not in "iu":
            for i in np.flatnonzero(h != np.round(h)):
                out.append(Violation(node.id, "integrality", int(i), float(h[i]), float(np.round(h[i]))))
        for i in np.flatnonzero(h < 0):
            out.append(Violation(node.id, "nonnegativity", int(i), float(h[i]), 0))
        total = h.sum()
        if total != node.groups:
            out.append(Violation(node.id, "group_size", None, float(total), node.groups))
        if node.children:
            parts = [np.asarray(hists[c]) for c in node.children]
            width = max([h.size] + [p.size for p in parts])
            lhs = np.zeros(width, dtype=h.dtype)
            lhs[: h.size] = h
            rhs = np.zeros(width, dtype=np.result_type(*parts) if parts else h.dtype)
            for p in parts:
                rhs[: p.size] += p
            for i in np.flatnonzero(lhs != rhs):
                out.append(Violation(node.id, "consistency", int(i), float(lhs[i]), float(rhs[i])))
    return out
