"""Second-order regression trees: exact greedy split search and depth-wise growth.

Rows with ``x < threshold`` go left; rows whose feature is missing (NaN) follow
the node's learned default direction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def soft_threshold(g, alpha: float):
    return np.sign(g) * np.maximum(np.abs(g) - alpha, 0.0)


def leaf_score(g, h, reg_lambda: float, reg_alpha: float):
    """Loss reduction achievable by a leaf with gradient sum ``g`` and hessian sum ``h``."""
    t = soft_threshold(g, reg_alpha)
    return t * t / (h + reg_lambda)


def leaf_weight(g: float, h: float, reg_lambda: float, reg_alpha: float) -> float:
    return float(-soft_threshold(g, reg_alpha) / (h + reg_lambda))


def split_gain(gl, hl, gr, hr, reg_lambda: float, reg_alpha: float):
    return 0.5 * (
        leaf_score(gl, hl, reg_lambda, reg_alpha)
        + leaf_score(gr, hr, reg_lambda, reg_alpha)
        - leaf_score(gl + gr, hl + hr, reg_lambda, reg_alpha)
    )


@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    threshold: float
    gain: float
    grad_left: float
    hess_left: float
    grad_right: float
    hess_right: float
    missing_left: bool


def _midpoint(lo, hi):
    mid = lo + (hi - lo) / 2.0
    # adjacent floats: the midpoint may round onto ``lo``
    return np.where(mid > lo, mid, hi)


def find_best_split(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    columns=None,
    *,
    reg_lambda: float = 0.01,
    reg_alpha: float = 0.02,
    min_child_weight: float = 50.0,
) -> SplitCandidate | None:
    """Exact greedy search over every distinct threshold of every candidate column.

    ``X`` holds only the rows of the node being split. Both default directions
    for missing values are scored. Returns ``None`` when no split has positive
    gain with both children reaching ``min_child_weight``.

    Ties are broken by column order, then threshold, then missing-left first.
    """
    X = np.asarray(X, dtype=float)
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    n = X.shape[0]
    if columns is None:
        columns = np.arange(X.shape[1])
    columns = np.asarray(columns, dtype=np.intp)
    if n < 2 or columns.size == 0:
        return None

    V = X[:, columns]
    order = np.argsort(V, axis=0, kind="stable")  # NaN sorts last
    Vs = np.take_along_axis(V, order, axis=0)
    Gs = grad[order]
    Hs = hess[order]
    miss = np.isnan(Vs)
    Gs = np.where(miss, 0.0, Gs)
    Hs = np.where(miss, 0.0, Hs)
    G_tot, H_tot = grad.sum(), hess.sum()
    G_present = Gs.sum(axis=0)
    H_present = Hs.sum(axis=0)
    G_miss = G_tot - G_present
    H_miss = H_tot - H_present

    # boundary i sits between sorted positions i and i+1, both non-missing and distinct
    GL = np.cumsum(Gs, axis=0)[:-1]
    HL = np.cumsum(Hs, axis=0)[:-1]
    valid = ~miss[1:] & (Vs[1:] > Vs[:-1])
    if not valid.any():
        return None

    parent = leaf_score(G_tot, H_tot, reg_lambda, reg_alpha)
    best = None
    best_key = None
    for missing_left in (True, False):
        if missing_left:
            gl, hl = GL + G_miss, HL + H_miss
        else:
            gl, hl = GL, HL
        gr, hr = G_tot - gl, H_tot - hl
        # inadmissible boundaries may divide by zero when lambda is 0; they are masked below
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = 0.5 * (
                leaf_score(gl, hl, reg_lambda, reg_alpha)
                + leaf_score(gr, hr, reg_lambda, reg_alpha)
                - parent
            )
        ok = valid & (hl >= min_child_weight) & (hr >= min_child_weight) & (gain > 0)
        if not missing_left:
            # with no missing rows in a column both directions are the same partition
            ok &= miss.any(axis=0)
        if not ok.any():
            continue
        masked = np.where(ok, gain, -np.inf)
        flat = int(np.argmax(masked.T))  # column-major: first column, then lowest threshold
        j, i = divmod(flat, masked.shape[0])
        g = masked[i, j]
        key = (g, -j, -i, missing_left)
        if best_key is None or g > best_key[0] or (g == best_key[0] and key[1:] > best_key[1:]):
            best_key = key
            best = SplitCandidate(
                feature=int(columns[j]),
                threshold=float(_midpoint(Vs[i, j], Vs[i + 1, j])),
                gain=float(g),
                grad_left=float(gl[i, j]),
                hess_left=float(hl[i, j]),
                grad_right=float(gr[i, j]),
                hess_right=float(hr[i, j]),
                missing_left=missing_left,
            )
    return best


@dataclass
class Tree:
    """Flat-array binary tree. ``left[i] == -1`` marks a leaf."""

    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    missing_left: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)
    gain: list = field(default_factory=list)

    def _add(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.missing_left.append(True)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        self.gain.append(0.0)
        return len(self.value) - 1

    @property
    def n_nodes(self) -> int:
        return len(self.value)

    @property
    def depth(self) -> int:
        depths = [0] * self.n_nodes
        for i in range(self.n_nodes):
            if self.left[i] != -1:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return max(depths) if depths else 0

    def features_used(self) -> set[int]:
        return {f for f, l in zip(self.feature, self.left) if l != -1}

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        X = np.asarray(X, dtype=float)
        feature = np.asarray(self.feature, dtype=np.intp)
        threshold = np.asarray(self.threshold, dtype=float)
        miss_left = np.asarray(self.missing_left, dtype=bool)
        left = np.asarray(self.left, dtype=np.intp)
        right = np.asarray(self.right, dtype=np.intp)
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        active = left[node] != -1
        while active.any():
            idx = rows[active]
            nd = node[idx]
            x = X[idx, feature[nd]]
            go_left = np.where(np.isnan(x), miss_left[nd], x < threshold[nd])
            node[idx] = np.where(go_left, left[nd], right[nd])
            active = left[node] != -1
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.value, dtype=float)[self.apply(X)]

    def to_dict(self) -> dict:
        def build(i):
            if self.left[i] == -1:
                return {"leaf": self.value[i]}
            return {
                "feature": self.feature[i],
                "threshold": self.threshold[i],
                "missing_left": self.missing_left[i],
                "gain": self.gain[i],
                "left": build(self.left[i]),
                "right": build(self.right[i]),
            }

        return build(0)

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        tree = cls()

        def build(node):
            i = tree._add(node.get("leaf", 0.0))
            if "leaf" in node:
                return i
            tree.feature[i] = int(node["feature"])
            tree.threshold[i] = float(node["threshold"])
            tree.missing_left[i] = bool(node["missing_left"])
            tree.gain[i] = float(node.get("gain", 0.0))
            tree.left[i] = build(node["left"])
            tree.right[i] = build(node["right"])
            return i

        build(d)
        return tree


def grow_tree(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    rows: np.ndarray,
    *,
    max_depth: int,
    min_child_weight: float,
    reg_lambda: float,
    reg_alpha: float,
    learning_rate: float,
    colsample_bynode: float = 1.0,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Grow one tree depth-first on ``rows``; leaf values already include shrinkage."""
    n_features = X.shape[1]
    n_cols = max(1, int(colsample_bynode * n_features))
    tree = Tree()

    def node_columns():
        if n_cols >= n_features:
            return np.arange(n_features)
        return np.sort(rng.choice(n_features, size=n_cols, replace=False))

    def build(idx, depth):
        g, h = grad[idx], hess[idx]
        G, H = float(g.sum()), float(h.sum())
        i = tree._add(learning_rate * leaf_weight(G, H, reg_lambda, reg_alpha))
        if depth >= max_depth or idx.size < 2:
            return i
        split = find_best_split(
            X[idx], g, h, node_columns(),
            reg_lambda=reg_lambda, reg_alpha=reg_alpha, min_child_weight=min_child_weight,
        )
        if split is None:
            return i
        x = X[idx, split.feature]
        go_left = np.where(np.isnan(x), split.missing_left, x < split.threshold)
        tree.feature[i] = split.feature
        tree.threshold[i] = split.threshold
        tree.missing_left[i] = split.missing_left
        tree.gain[i] = split.gain
        tree.left[i] = build(idx[go_left], depth + 1)
        tree.right[i] = build(idx[~go_left], depth + 1)
        return i

    build(np.asarray(rows, dtype=np.intp), 0)
    return tree
