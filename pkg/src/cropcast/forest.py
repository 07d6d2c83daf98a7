"""Random-forest regression, built here rather than imported.

Trees split greedily on the weighted child variance (equivalently, total
child SSE) over a per-node random feature subset, with midpoint thresholds
between adjacent distinct values. All randomness flows from an explicit seed
through per-tree substreams, so a fitted forest is a pure function of
(X, y, params, seed). Also hosts the within-season roll-forward forecaster
that projects a parameter's remaining values from its own history.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyDatasetError,
    InsufficientHistoryError,
)

DAYS_PER_YEAR = 365


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 2
    bootstrap: bool = True
    feature_subset: str = "sqrt"  # "sqrt": per-node ceil(sqrt(d)) features; "all": every feature

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ValueError("n_trees, max_depth, and min_leaf must all be >= 1")
        if self.feature_subset not in ("sqrt", "all"):
            raise ValueError(f"feature_subset must be 'sqrt' or 'all', got {self.feature_subset!r}")


@dataclass
class Tree:
    """Flat preorder arrays; feature/left/right are -1 at leaves."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray


@dataclass
class RegressionForest:
    trees: list[Tree]
    n_trees: int
    max_depth: int
    min_leaf: int
    seed: int
    n_features: int


def _subset_sse(ys) -> float:
    # Mean via np.mean, deviations accumulated left to right in row order.
    # Splits on different features can induce the same row partition; this
    # evaluation depends only on the partition, so such candidates score
    # bit-identical SSEs and the (sse, feature, threshold) tie-break stays
    # meaningful. A prefix-sum scan over values pre-sorted by one feature
    # (which accumulates in that feature's sort order) breaks that and flips
    # ties by an ulp. cumsum accumulates strictly serially, so its last
    # element equals the plain left-to-right loop bit for bit; np.sum does
    # not qualify (pairwise summation).
    if len(ys) == 1:
        return 0.0
    d = ys - np.mean(ys)
    return float(np.cumsum(d * d)[-1])


def _best_split(X, y, idx, features, min_leaf):
    """Lowest-(sse, feature, threshold) split of the rows in ``idx``.

    Returns (sse, feature, threshold) or None when no split satisfies
    min_leaf on both sides with distinct adjacent values.
    """
    best = None
    y_node = y[idx]
    for f in features:
        xs = X[idx, f]
        distinct = np.unique(xs)
        for a, b in zip(distinct[:-1], distinct[1:]):
            thr = (float(a) + float(b)) / 2.0
            go_left = xs <= thr
            n_left = int(go_left.sum())
            if n_left < min_leaf or len(xs) - n_left < min_leaf:
                continue
            score = _subset_sse(y_node[go_left]) + _subset_sse(y_node[~go_left])
            cand = (score, int(f), thr)
            if best is None or cand < best:
                best = cand
    return best


def _grow_tree(X, y, idx, params: ForestParams, rng: np.random.Generator | None):
    d = X.shape[1]
    m = d if params.feature_subset == "all" else min(d, math.ceil(math.sqrt(d)))
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def grow(rows, depth) -> int:
        nid = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        y_node = y[rows]
        pure = bool((y_node == y_node[0]).all())
        # A pure node keeps the common target bit-exactly; a float mean of
        # identical values can drift by an ulp.
        value.append(float(y_node[0]) if pure else float(np.mean(y_node)))
        if depth >= params.max_depth or len(rows) < 2 * params.min_leaf or pure:
            return nid
        if m >= d or rng is None:
            candidates = range(d)
        else:
            candidates = np.sort(rng.choice(d, size=m, replace=False))
        best = _best_split(X, y, rows, candidates, params.min_leaf)
        if best is None:
            return nid
        _, f, thr = best
        go_left = X[rows, f] <= thr
        feature[nid] = f
        threshold[nid] = thr
        left[nid] = grow(rows[go_left], depth + 1)
        right[nid] = grow(rows[~go_left], depth + 1)
        return nid

    grow(idx, 0)
    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.float64),
    )


def fit_forest(X, y, params: ForestParams = ForestParams(), seed: int = 0) -> RegressionForest:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.ndim != 2:
        raise DimensionMismatchError(f"X must be 2-D, got shape {X.shape}")
    if X.shape[0] == 0:
        raise EmptyDatasetError("cannot fit a forest on zero samples")
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(f"{X.shape[0]} rows in X vs {y.shape[0]} targets")
    n = X.shape[0]
    streams = np.random.SeedSequence(seed).spawn(params.n_trees)
    trees = []
    for t in range(params.n_trees):
        rng = np.random.default_rng(streams[t])
        idx = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        trees.append(_grow_tree(X, y, idx, params, rng))
    return RegressionForest(
        trees=trees,
        n_trees=params.n_trees,
        max_depth=params.max_depth,
        min_leaf=params.min_leaf,
        seed=seed,
        n_features=X.shape[1],
    )


def _tree_predict(tree: Tree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        f = tree.feature[node]
        at_leaf = f < 0
        if at_leaf.all():
            return tree.value[node]
        fx = X[np.arange(X.shape[0]), np.where(at_leaf, 0, f)]
        step = np.where(fx <= tree.threshold[node], tree.left[node], tree.right[node])
        node = np.where(at_leaf, node, step)


def predict_forest(forest: RegressionForest, x) -> float | np.ndarray:
    """Mean over trees of the leaf reached by descending x[feature] <= threshold."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    X = arr.reshape(1, -1) if single else arr
    if X.ndim != 2 or X.shape[1] != forest.n_features:
        raise DimensionMismatchError(
            f"input has {arr.shape[-1] if arr.ndim else 0} features, forest expects {forest.n_features}"
        )
    per_tree = np.stack([_tree_predict(t, X) for t in forest.trees], axis=0)
    out = per_tree.mean(axis=0)
    return float(out[0]) if single else out


def save_forest(forest: RegressionForest, path) -> None:
    doc = {
        "n_trees": forest.n_trees,
        "max_depth": forest.max_depth,
        "min_leaf": forest.min_leaf,
        "seed": forest.seed,
        "n_features": forest.n_features,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
            }
            for t in forest.trees
        ],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_forest(path) -> RegressionForest:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    trees = [
        Tree(
            feature=np.array(t["feature"], dtype=np.int64),
            threshold=np.array(t["threshold"], dtype=np.float64),
            left=np.array(t["left"], dtype=np.int64),
            right=np.array(t["right"], dtype=np.int64),
            value=np.array(t["value"], dtype=np.float64),
        )
        for t in doc["trees"]
    ]
    return RegressionForest(
        trees=trees,
        n_trees=doc["n_trees"],
        max_depth=doc["max_depth"],
        min_leaf=doc["min_leaf"],
        seed=doc["seed"],
        n_features=doc["n_features"],
    )


def day_of_year(day: int) -> int:
    return (day - 1) % DAYS_PER_YEAR + 1


def forecast_series(history, horizon_days: int, params: ForestParams = ForestParams(), seed: int = 0):
    """Roll a parameter forward past its last observation on its own day grid.

    ``history`` is (day, value) pairs on a continuous day axis (day n+365 is
    one year later; each year samples the same day-of-year grid). A forest
    maps (day-of-year, previous sample, second-previous sample, same-day
    last year) to the observed value wherever history provides all four,
    then feeds on its own outputs step by step, following the observed
    day-of-year grid until ``horizon_days`` past the last observation.
    """
    if horizon_days < 0:
        raise ValueError(f"horizon_days must be >= 0, got {horizon_days}")
    pairs = sorted((int(d), float(v)) for d, v in history)
    days = [d for d, _ in pairs]
    if len(set(days)) != len(days):
        raise ValueError("history contains duplicate days")
    series = dict(pairs)
    doy_grid = sorted({day_of_year(d) for d in days})

    def next_grid_day(cur: int) -> int:
        t = day_of_year(cur)
        later = [u for u in doy_grid if u > t]
        return cur + (later[0] - t) if later else cur + (DAYS_PER_YEAR - t + doy_grid[0])

    rows = []
    targets = []
    for i in range(2, len(pairs)):
        d, v = pairs[i]
        year_ago = series.get(d - DAYS_PER_YEAR)
        if year_ago is None:
            continue
        rows.append([float(day_of_year(d)), pairs[i - 1][1], pairs[i - 2][1], year_ago])
        targets.append(v)
    if not rows:
        raise InsufficientHistoryError(
            f"no trainable samples: {len(days)} observations never cover two lags and the year-ago value"
        )
    forest = fit_forest(np.array(rows), np.array(targets), params, seed)

    known_days = list(days)
    out = []
    d = next_grid_day(days[-1])
    end = days[-1] + horizon_days
    while d <= end:
        year_ago = series.get(d - DAYS_PER_YEAR)
        if year_ago is None:
            raise InsufficientHistoryError(f"no year-ago value to forecast day {d}")
        feats = [float(day_of_year(d)), series[known_days[-1]], series[known_days[-2]], year_ago]
        v = float(predict_forest(forest, np.array(feats)))
        series[d] = v
        known_days.append(d)
        out.append((d, v))
        d = next_grid_day(d)
    return out
