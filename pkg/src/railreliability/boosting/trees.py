"""Regression-tree growth for second-order boosting.

Exact greedy splits over sorted unique feature values. Missing values get a
learned default direction per split (the direction is chosen by gain, like
sparsity-aware split finding). Monotone constraints are enforced by
rejecting splits whose child weights violate the requested direction and by
clamping every node weight to an interval propagated from the parent, so a
violation cannot be reintroduced deeper down.
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-12


class FlatTree:
    """One regression tree as flat arrays; node 0 is the root.

    ``feature[i] == -1`` marks a leaf; ``value`` holds the leaf weight with
    the learning rate already folded in. Prediction routes value < threshold
    to the left child, NaN to the stored default side.
    """

    __slots__ = ("feature", "threshold", "default_left", "left", "right", "value")

    def __init__(self, feature, threshold, default_left, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.default_left = np.asarray(default_left, dtype=bool)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.value = np.asarray(value, dtype=np.float64)

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            feat = self.feature[node]
            active = np.nonzero(feat >= 0)[0]
            if active.size == 0:
                break
            cur = node[active]
            vals = X[active, feat[active]]
            go_left = (vals < self.threshold[cur]) | (np.isnan(vals) & self.default_left[cur])
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "default_left": [int(b) for b in self.default_left],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FlatTree":
        return cls(
            doc["feature"],
            doc["threshold"],
            [bool(b) for b in doc["default_left"]],
            doc["left"],
            doc["right"],
            doc["value"],
        )


def _weight(g_sum: float, h_sum: float, reg_lambda: float, lo: float, hi: float) -> float:
    den = h_sum + reg_lambda
    if den <= _EPS:
        den = _EPS
    return float(np.clip(-g_sum / den, lo, hi))


class _Split:
    __slots__ = ("gain", "feature", "threshold", "default_left", "w_left", "w_right")

    def __init__(self, gain, feature, threshold, default_left, w_left, w_right):
        self.gain = gain
        self.feature = feature
        self.threshold = threshold
        self.default_left = default_left
        self.w_left = w_left
        self.w_right = w_right


def _gain_terms(g_sum, den, w):
    """Objective improvement of a node at (possibly clamped) weight w;
    equals g^2/den at the unclamped optimum -g/den."""
    return -(2.0 * g_sum * w + den * w * w)


def _best_split(X, g, h, rows, reg_lambda, gamma, min_child_weight, monotone, lo, hi, parent_weight):
    """Best candidate over all features, or None.

    Gains are evaluated at the weights that would actually be installed
    (after clamping to the node's feasible interval), so a split whose
    clamped children do not beat the clamped parent is never chosen. Ties
    break toward the lowest feature index, then the lowest threshold, then
    routing NA left, all deterministic.
    """
    g_total = float(g[rows].sum())
    h_total = float(h[rows].sum())
    parent_term = _gain_terms(g_total, h_total + reg_lambda, parent_weight)

    best: _Split | None = None
    for f in range(X.shape[1]):
        vals = X[rows, f]
        present = ~np.isnan(vals)
        pv = vals[present]
        if pv.size < 2:
            continue
        order = np.argsort(pv, kind="mergesort")
        sv = pv[order]
        boundary = np.nonzero(sv[:-1] != sv[1:])[0]
        if boundary.size == 0:
            continue
        pg = g[rows][present][order]
        ph = h[rows][present][order]
        cg = np.cumsum(pg)
        ch = np.cumsum(ph)
        g_missing = g_total - float(cg[-1])
        h_missing = h_total - float(ch[-1])

        thresholds = 0.5 * (sv[boundary] + sv[boundary + 1])
        separates = thresholds > sv[boundary]  # guards adjacent-float midpoints
        gl_base = cg[boundary]
        hl_base = ch[boundary]

        gain_by_dir = []
        weights_by_dir = []
        for missing_left in (True, False):
            gl = gl_base + (g_missing if missing_left else 0.0)
            hl = hl_base + (h_missing if missing_left else 0.0)
            gr = g_total - gl
            hr = h_total - hl
            den_l = np.maximum(hl + reg_lambda, _EPS)
            den_r = np.maximum(hr + reg_lambda, _EPS)
            wl = np.clip(-gl / den_l, lo, hi)
            wr = np.clip(-gr / den_r, lo, hi)
            gains = 0.5 * (_gain_terms(gl, den_l, wl) + _gain_terms(gr, den_r, wr) - parent_term) - gamma
            if min_child_weight > 0:
                gains = np.where((hl >= min_child_weight) & (hr >= min_child_weight), gains, -np.inf)
            constraint = monotone[f]
            if constraint > 0:
                gains = np.where(wl <= wr, gains, -np.inf)
            elif constraint < 0:
                gains = np.where(wl >= wr, gains, -np.inf)
            gains = np.where(separates, gains, -np.inf)
            gain_by_dir.append(gains)
            weights_by_dir.append((wl, wr))

        take_left = gain_by_dir[0] >= gain_by_dir[1]
        cand_gain = np.where(take_left, gain_by_dir[0], gain_by_dir[1])
        k = int(np.argmax(cand_gain))
        gain_k = float(cand_gain[k])
        if gain_k <= 0.0 or not np.isfinite(gain_k):
            continue
        if best is None or gain_k > best.gain:
            missing_left = bool(take_left[k])
            wl, wr = weights_by_dir[0 if missing_left else 1]
            best = _Split(
                gain=gain_k,
                feature=f,
                threshold=float(thresholds[k]),
                default_left=missing_left,
                w_left=float(wl[k]),
                w_right=float(wr[k]),
            )
    return best


def grow_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    rows: np.ndarray,
    *,
    max_depth: int,
    reg_lambda: float,
    gamma: float,
    monotone: np.ndarray,
    learning_rate: float,
    min_child_weight: float = 0.0,
    gain_accumulator: np.ndarray | None = None,
) -> FlatTree:
    """Grow one tree on ``rows`` (the subsample) against gradients g, h."""
    feature: list[int] = []
    threshold: list[float] = []
    default_left: list[bool] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        default_left.append(True)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def build(idx: int, node_rows: np.ndarray, depth: int, lo: float, hi: float):
        g_sum = float(g[node_rows].sum())
        h_sum = float(h[node_rows].sum())
        leaf_w = _weight(g_sum, h_sum, reg_lambda, lo, hi)
        split = None
        if depth < max_depth and node_rows.size >= 2:
            split = _best_split(
                X, g, h, node_rows, reg_lambda, gamma, min_child_weight, monotone, lo, hi, leaf_w
            )
        if split is None:
            value[idx] = leaf_w * learning_rate
            return
        vals = X[node_rows, split.feature]
        go_left = (vals < split.threshold) | (np.isnan(vals) & split.default_left)
        left_rows = node_rows[go_left]
        right_rows = node_rows[~go_left]
        if left_rows.size == 0 or right_rows.size == 0:
            value[idx] = leaf_w * learning_rate
            return
        if gain_accumulator is not None:
            gain_accumulator[split.feature] += split.gain
        feature[idx] = split.feature
        threshold[idx] = split.threshold
        default_left[idx] = split.default_left
        lo_l, hi_l, lo_r, hi_r = lo, hi, lo, hi
        if monotone[split.feature] != 0:
            mid = 0.5 * (split.w_left + split.w_right)
            if monotone[split.feature] > 0:
                hi_l, lo_r = mid, mid
            else:
                lo_l, hi_r = mid, mid
        li = new_node()
        ri = new_node()
        left[idx] = li
        right[idx] = ri
        build(li, left_rows, depth + 1, lo_l, hi_l)
        build(ri, right_rows, depth + 1, lo_r, hi_r)

    root = new_node()
    build(root, np.asarray(rows, dtype=np.intp), 0, -np.inf, np.inf)
    return FlatTree(feature, threshold, default_left, left, right, value)
