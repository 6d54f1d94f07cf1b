"""Decision tree (Gini) and bagged random forest.

Trees split on feature thresholds chosen from midpoints of observed unique
values, capped at 32 evenly spaced picks per feature. Implicit zeros of the
sparse columns are folded into the counts analytically, never materialized.
Ties between equal gains go to the lower feature index, then the lower
threshold; a zero-gain split is still taken when the node is impure, which
is what lets depth-2 trees carve XOR-shaped data.

Bootstrap resampling is encoded as integer row weights so node bookkeeping
stays set-based. Forest scores are the mean of per-tree leaf fractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..features import SparseVector
from .base import LabeledDataset, ModelArtifact, ModelKind

_MAX_THRESHOLDS = 32


@dataclass
class TreeParams:
    feature: np.ndarray     # int64, -1 marks a leaf
    threshold: np.ndarray   # float64
    left: np.ndarray        # int64 child slots
    right: np.ndarray
    count_neg: np.ndarray   # weighted class counts at the node
    count_pos: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)


@dataclass
class ForestParams:
    trees: list[TreeParams] = field(default_factory=list)


def _build_tree(data: LabeledDataset, max_depth: int, min_leaf: int,
                weights: np.ndarray, feature_sampler=None, rng=None) -> TreeParams:
    col_ptr, col_rows, col_vals = data.csc()
    indptr, indices, _, _ = data.csr()
    labels = data.labels.astype(np.int64)
    n = len(data)
    w_pos_all = weights * labels

    feat: list[int] = []
    thr: list[float] = []
    left: list[int] = []
    right: list[int] = []
    c_neg: list[int] = []
    c_pos: list[int] = []

    def alloc() -> int:
        feat.append(-1)
        thr.append(0.0)
        left.append(-1)
        right.append(-1)
        c_neg.append(0)
        c_pos.append(0)
        return len(feat) - 1

    def node_features(rows: np.ndarray) -> np.ndarray:
        lens = indptr[rows + 1] - indptr[rows]
        total = int(lens.sum())
        if total == 0:
            return np.empty(0, np.int64)
        starts = np.repeat(indptr[rows], lens)
        base = np.repeat(np.cumsum(lens) - lens, lens)
        offs = starts + (np.arange(total, dtype=np.int64) - base)
        return np.unique(indices[offs])

    def best_split(rows: np.ndarray, candidates: np.ndarray,
                   pos_w: float, neg_w: float):
        tot_w = pos_w + neg_w
        parent = tot_w - (pos_w * pos_w + neg_w * neg_w) / tot_w  # tot * gini
        in_node = np.zeros(n, dtype=bool)
        in_node[rows] = True
        best_gain = -math.inf
        best = None
        for j in candidates:
            lo, hi = col_ptr[j], col_ptr[j + 1]
            sel = in_node[col_rows[lo:hi]]
            rj = col_rows[lo:hi][sel]
            vj = col_vals[lo:hi][sel]
            nz_pos = float(w_pos_all[rj].sum())
            nz_tot = float(weights[rj].sum())
            z_pos = pos_w - nz_pos
            z_neg = neg_w - (nz_tot - nz_pos)
            uniq = np.unique(vj)
            if z_pos + z_neg > 0:
                uniq = np.union1d(uniq, [0.0])
            if uniq.size < 2:
                continue
            if uniq.size - 1 > _MAX_THRESHOLDS:
                pick_idx = np.linspace(0, uniq.size - 1, _MAX_THRESHOLDS + 1).round().astype(np.int64)
                uniq = uniq[np.unique(pick_idx)]
            thresholds = (uniq[:-1] + uniq[1:]) / 2.0

            order = np.argsort(vj, kind="stable")
            sv = vj[order]
            cum_pos = np.concatenate(([0.0], np.cumsum(w_pos_all[rj][order])))
            cum_tot = np.concatenate(([0.0], np.cumsum(weights[rj][order])))
            k = np.searchsorted(sv, thresholds, side="right")
            l_pos = cum_pos[k]
            l_tot = cum_tot[k]
            zero_left = thresholds >= 0.0
            l_pos = l_pos + z_pos * zero_left
            l_tot = l_tot + (z_pos + z_neg) * zero_left
            l_neg = l_tot - l_pos
            r_pos = pos_w - l_pos
            r_neg = neg_w - l_neg
            r_tot = tot_w - l_tot

            valid = (l_tot >= min_leaf) & (r_tot >= min_leaf)
            if not valid.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                child = np.where(l_tot > 0, l_tot - (l_pos ** 2 + l_neg ** 2) / l_tot, 0.0) \
                    + np.where(r_tot > 0, r_tot - (r_pos ** 2 + r_neg ** 2) / r_tot, 0.0)
            gains = np.where(valid, (parent - child) / tot_w, -math.inf)
            idx = int(np.argmax(gains))  # argmax takes the first max: lowest threshold
            if gains[idx] > best_gain:
                best_gain = float(gains[idx])
                best = (int(j), float(thresholds[idx]))
        return best

    def partition(rows: np.ndarray, j: int, t: float) -> tuple[np.ndarray, np.ndarray]:
        in_node = np.zeros(n, dtype=bool)
        in_node[rows] = True
        lo, hi = col_ptr[j], col_ptr[j + 1]
        sel = in_node[col_rows[lo:hi]]
        rj = col_rows[lo:hi][sel]
        vj = col_vals[lo:hi][sel]
        has_nz = np.zeros(n, dtype=bool)
        has_nz[rj] = True
        zero_rows = rows[~has_nz[rows]]
        nz_left = rj[vj <= t]
        nz_right = rj[vj > t]
        if 0.0 <= t:
            left_rows = np.sort(np.concatenate((nz_left, zero_rows)))
            right_rows = np.sort(nz_right)
        else:
            left_rows = np.sort(nz_left)
            right_rows = np.sort(np.concatenate((nz_right, zero_rows)))
        return left_rows, right_rows

    root = alloc()
    all_rows = np.flatnonzero(weights > 0).astype(np.int64)
    stack = [(root, all_rows, max_depth)]
    while stack:
        slot, rows, depth = stack.pop()
        pos_w = float(w_pos_all[rows].sum())
        tot_w = float(weights[rows].sum())
        neg_w = tot_w - pos_w
        c_neg[slot] = int(neg_w)
        c_pos[slot] = int(pos_w)
        if pos_w == 0 or neg_w == 0 or depth == 0 or tot_w < 2 * min_leaf:
            continue
        candidates = feature_sampler(rng) if feature_sampler is not None else node_features(rows)
        found = best_split(rows, candidates, pos_w, neg_w)
        if found is None:
            continue
        j, t = found
        left_rows, right_rows = partition(rows, j, t)
        feat[slot] = j
        thr[slot] = t
        l = alloc()
        r = alloc()
        left[slot] = l
        right[slot] = r
        stack.append((r, right_rows, depth - 1))
        stack.append((l, left_rows, depth - 1))

    return TreeParams(
        feature=np.asarray(feat, dtype=np.int64),
        threshold=np.asarray(thr, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        count_neg=np.asarray(c_neg, dtype=np.int64),
        count_pos=np.asarray(c_pos, dtype=np.int64),
    )


def train_dt(data: LabeledDataset, max_depth: int = 16, min_leaf: int = 1,
             impurity: str = "gini", seed: int = 0) -> ModelArtifact:
    if max_depth < 1:
        raise ValueError(f"max_depth must be >= 1, got {max_depth}")
    if impurity != "gini":
        raise ValueError(f"only gini impurity is implemented, got {impurity!r}")
    weights = np.ones(len(data), dtype=np.int64)
    tree = _build_tree(data, max_depth, min_leaf, weights)
    meta = {"max_depth": max_depth, "min_leaf": min_leaf, "impurity": impurity,
            "seed": seed, "n_nodes": tree.n_nodes}
    return ModelArtifact(kind=ModelKind.DT, dim=data.dim, params=tree, training_meta=meta)


def train_rf(data: LabeledDataset, num_trees: int = 100, feature_fraction: float = 1.0,
             seed: int = 0, max_depth: int = 16, min_leaf: int = 1,
             bootstrap: bool = True) -> ModelArtifact:
    if num_trees < 1:
        raise ValueError(f"num_trees must be >= 1, got {num_trees}")
    if not 0.0 < feature_fraction <= 1.0:
        raise ValueError(f"feature_fraction must be in (0,1], got {feature_fraction}")
    n = len(data)
    m = math.ceil(feature_fraction * data.dim)
    children = np.random.SeedSequence(seed).spawn(num_trees)

    def sampler(rng):
        return np.sort(rng.choice(data.dim, size=m, replace=False))

    trees = []
    for child in children:
        rng = np.random.default_rng(child)
        if bootstrap:
            weights = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.int64)
        else:
            weights = np.ones(n, dtype=np.int64)
        trees.append(_build_tree(data, max_depth, min_leaf, weights,
                                 feature_sampler=sampler, rng=rng))
    meta = {"num_trees": num_trees, "feature_fraction": feature_fraction,
            "max_depth": max_depth, "min_leaf": min_leaf, "bootstrap": bootstrap,
            "seed": seed}
    return ModelArtifact(kind=ModelKind.RF, dim=data.dim,
                         params=ForestParams(trees=trees), training_meta=meta)


def score_tree(tree: TreeParams, vec: SparseVector) -> float:
    i = 0
    while tree.feature[i] != -1:
        x = vec.get(int(tree.feature[i]))
        i = int(tree.left[i] if x <= tree.threshold[i] else tree.right[i])
    total = tree.count_neg[i] + tree.count_pos[i]
    return float(tree.count_pos[i] / total) if total else 0.5


def tree_scores(forest: ForestParams, vec: SparseVector) -> list[float]:
    return [score_tree(t, vec) for t in forest.trees]


def score_forest(forest: ForestParams, vec: SparseVector) -> float:
    scores = tree_scores(forest, vec)
    return float(np.mean(scores))
