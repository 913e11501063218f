"""Classifiers and evaluation for long/short cascade prediction.

Two learners, both written against plain numpy arrays:

* elastic-net logistic regression fit by proximal gradient descent (gradient
  step on the smooth log-loss + ridge part, soft-threshold for the L1 part),
  with per-feature standardization learned from the training data only;
* gradient-boosted regression trees on the logistic loss: each stage fits an
  axis-aligned squared-error tree to the current residuals y - p and assigns
  leaf values with a Newton step sum(r) / sum(p * (1 - p)).

Evaluation is stratified k-fold cross-validation with the ROC pooled over
out-of-fold scores and AUC by the trapezoid rule. Feature importance follows
the depth of the decision nodes that use a feature: each split contributes
2**(-depth), so a root split counts 1, its children 1/2, and so on; split
gain totals are kept alongside as a secondary ranking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

MAX_LEAF_VALUE = 10.0  # Newton leaf updates are clipped to keep stages stable


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def log_loss(raw: np.ndarray, y: np.ndarray) -> float:
    """Mean logistic loss of raw scores (log-odds) against 0/1 labels."""
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


def _check_binary(y: np.ndarray) -> None:
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0, 1))):
        raise ValueError("labels must be 0/1")
    if len(classes) < 2:
        raise ValueError("need both classes present")


# ---------------------------------------------------------------------------
# elastic-net logistic regression


@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float
    l1: float
    l2: float
    feature_mean: np.ndarray
    feature_std: np.ndarray
    n_iter: int = 0

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        Xs = (np.asarray(X, dtype=np.float64) - self.feature_mean) / self.feature_std
        return Xs @ self.weights + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)


def logistic_smooth_objective(w: np.ndarray, b: float, Xs: np.ndarray, y: np.ndarray,
                              l2: float) -> float:
    """Differentiable part of the objective: mean log-loss + (l2/2)||w||^2."""
    raw = Xs @ w + b
    return log_loss(raw, y) + 0.5 * l2 * float(w @ w)


def logistic_smooth_grad(w: np.ndarray, b: float, Xs: np.ndarray, y: np.ndarray,
                         l2: float) -> tuple[np.ndarray, float]:
    """Analytic gradient of logistic_smooth_objective in (w, b)."""
    n = len(y)
    residual = sigmoid(Xs @ w + b) - y
    return Xs.T @ residual / n + l2 * w, float(residual.mean())


def elastic_net_objective(w: np.ndarray, b: float, Xs: np.ndarray, y: np.ndarray,
                          l1: float, l2: float) -> float:
    return logistic_smooth_objective(w, b, Xs, y, l2) + l1 * float(np.abs(w).sum())


def _soft_threshold(w: np.ndarray, t: float) -> np.ndarray:
    return np.sign(w) * np.maximum(np.abs(w) - t, 0.0)


def train_logreg(X: np.ndarray, y: np.ndarray, l1: float = 0.0, l2: float = 0.0,
                 epochs: int = 500, step: float | None = None,
                 tol: float = 1e-10) -> LogRegModel:
    """Proximal gradient descent on standardized features.

    The default step is 1/L with L the Lipschitz constant of the smooth
    gradient bounded by lambda_max([Xs 1]^T [Xs 1]) / (4n) + l2.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_binary(y)
    if l1 < 0 or l2 < 0:
        raise ValueError("penalties must be nonnegative")

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    Xs = (X - mean) / std
    n, d = Xs.shape

    if step is None:
        aug = np.hstack([Xs, np.ones((n, 1))])
        lam_max = float(np.linalg.eigvalsh(aug.T @ aug).max())
        step = 1.0 / (lam_max / (4.0 * n) + l2 + 1e-12)

    w = np.zeros(d)
    b = 0.0
    prev = np.inf
    n_iter = 0
    for n_iter in range(1, epochs + 1):
        grad_w, grad_b = logistic_smooth_grad(w, b, Xs, y, l2)
        w = _soft_threshold(w - step * grad_w, step * l1)
        b -= step * grad_b
        obj = elastic_net_objective(w, b, Xs, y, l1, l2)
        if abs(prev - obj) < tol:
            break
        prev = obj
    return LogRegModel(w, b, l1, l2, mean, std, n_iter)


# ---------------------------------------------------------------------------
# gradient-boosted trees


@dataclass
class Tree:
    """Flat regression tree; node 0 is the root. feature[i] < 0 marks a leaf."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)
    depth: list[int] = field(default_factory=list)
    gain: list[float] = field(default_factory=list)

    def add_node(self, depth: int) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.depth.append(depth)
        self.gain.append(0.0)
        return len(self.feature) - 1

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(len(X), dtype=np.float64)
        stack = [(0, np.arange(len(X)))]
        while stack:
            node, idx = stack.pop()
            if self.feature[node] < 0:
                out[idx] = self.value[node]
                continue
            go_left = X[idx, self.feature[node]] <= self.threshold[node]
            stack.append((self.left[node], idx[go_left]))
            stack.append((self.right[node], idx[~go_left]))
        return out


def _best_split(Xn: np.ndarray, r: np.ndarray, min_leaf: int):
    """Greedy squared-error split: maximize S_L^2/n_L + S_R^2/n_R - S^2/n.

    Returns (gain, feature, threshold) or None. Ties resolve to the lowest
    feature index and then the lowest threshold, so training is deterministic
    for a fixed row order.
    """
    n = len(r)
    if n < 2 * min_leaf:
        return None
    total = r.sum()
    parent = total * total / n
    best = None
    for f in range(Xn.shape[1]):
        col = Xn[:, f]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        cum = np.cumsum(r[order])
        # split after position i (1-based left size), only where x changes
        sizes = np.arange(1, n)
        valid = (xs[1:] != xs[:-1]) & (sizes >= min_leaf) & (n - sizes >= min_leaf)
        if not valid.any():
            continue
        s_left = cum[:-1][valid]
        n_left = sizes[valid]
        gain = s_left * s_left / n_left + (total - s_left) ** 2 / (n - n_left) - parent
        j = int(np.argmax(gain))
        if gain[j] <= 1e-12:
            continue
        pos = np.nonzero(valid)[0][j]
        threshold = 0.5 * (xs[pos] + xs[pos + 1])
        candidate = (float(gain[j]), f, float(threshold))
        if best is None or candidate[0] > best[0] + 1e-15:
            best = candidate
    return best


def _fit_tree(X: np.ndarray, r: np.ndarray, hess: np.ndarray, max_depth: int,
              min_leaf: int) -> Tree:
    tree = Tree()

    def grow(idx: np.ndarray, depth: int) -> int:
        node = tree.add_node(depth)
        split = None
        if depth < max_depth:
            split = _best_split(X[idx], r[idx], min_leaf)
        if split is None:
            num = r[idx].sum()
            den = max(hess[idx].sum(), 1e-12)
            tree.value[node] = float(np.clip(num / den, -MAX_LEAF_VALUE, MAX_LEAF_VALUE))
            return node
        gain, f, threshold = split
        go_left = X[idx, f] <= threshold
        tree.feature[node] = f
        tree.threshold[node] = threshold
        tree.gain[node] = gain
        tree.left[node] = grow(idx[go_left], depth + 1)
        tree.right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(len(r)), 0)
    return tree


@dataclass
class GbdtModel:
    trees: list[Tree]
    learning_rate: float
    base_score: float  # log-odds of the training base rate

    def raw_scores(self, X: np.ndarray, n_trees: int | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        raw = np.full(len(X), self.base_score)
        trees = self.trees if n_trees is None else self.trees[:n_trees]
        for tree in trees:
            raw += self.learning_rate * tree.predict(X)
        return raw

    def staged_raw_scores(self, X: np.ndarray):
        """Yield raw scores after 0, 1, ..., n_trees stages."""
        X = np.asarray(X, dtype=np.float64)
        raw = np.full(len(X), self.base_score)
        yield raw.copy()
        for tree in self.trees:
            raw += self.learning_rate * tree.predict(X)
            yield raw.copy()

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.raw_scores(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)


def train_gbdt(X: np.ndarray, y: np.ndarray, n_trees: int = 100, max_depth: int = 3,
               learning_rate: float = 0.1, min_leaf: int = 5) -> GbdtModel:
    """Stagewise boosting of squared-error trees on logistic-loss residuals."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_binary(y)
    if not 0.0 < learning_rate <= 1.0:
        raise ValueError("learning_rate must be in (0, 1]")
    if n_trees < 0 or max_depth < 1 or min_leaf < 1:
        raise ValueError("bad tree hyperparameters")

    p0 = float(np.clip(y.mean(), 1e-6, 1.0 - 1e-6))
    base = float(np.log(p0 / (1.0 - p0)))
    raw = np.full(len(y), base)
    trees: list[Tree] = []
    for _ in range(n_trees):
        p = sigmoid(raw)
        tree = _fit_tree(X, y - p, p * (1.0 - p), max_depth, min_leaf)
        trees.append(tree)
        raw += learning_rate * tree.predict(X)
    return GbdtModel(trees, learning_rate, base)


def feature_importance(model: GbdtModel, feature_names: Sequence[str] | None = None,
                       n_features: int | None = None) -> list[tuple[str, float]]:
    """Rank features by sum of 2**(-depth) over the decision nodes using them.

    Shallower use counts more; a feature split at the root of one tree scores
    1.0 from that node. Ties break by feature index.
    """
    scores = _node_scores(model, lambda tree, node: 2.0 ** (-tree.depth[node]),
                          feature_names, n_features)
    return scores


def split_gain_importance(model: GbdtModel, feature_names: Sequence[str] | None = None,
                          n_features: int | None = None) -> list[tuple[str, float]]:
    """Secondary ranking: total squared-error gain of each feature's splits."""
    return _node_scores(model, lambda tree, node: tree.gain[node], feature_names, n_features)


def _node_scores(model: GbdtModel, node_score: Callable,
                 feature_names: Sequence[str] | None,
                 n_features: int | None) -> list[tuple[str, float]]:
    if feature_names is None:
        if n_features is None:
            n_features = 0
            for tree in model.trees:
                for f in tree.feature:
                    n_features = max(n_features, f + 1)
        feature_names = [f"f{i}" for i in range(n_features)]
    totals = np.zeros(len(feature_names))
    for tree in model.trees:
        for node, f in enumerate(tree.feature):
            if f >= 0:
                totals[f] += node_score(tree, node)
    order = sorted(range(len(feature_names)), key=lambda i: (-totals[i], i))
    return [(feature_names[i], float(totals[i])) for i in order]


# ---------------------------------------------------------------------------
# cross-validation and metrics


def stratified_folds(y: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Fold index per example; class counts per fold differ by at most one."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(y), dtype=np.int64)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        assignment[idx] = np.arange(len(idx)) % folds
    return assignment


def roc_curve(scores: np.ndarray, y: np.ndarray) -> list[tuple[float, float, float]]:
    """(fpr, tpr, threshold) points from (0,0) to (1,1), one step per distinct
    score, descending threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_y = y[order]
    points = [(0.0, 0.0, float("inf"))]
    tp = fp = 0
    i = 0
    n = len(y)
    while i < n:
        j = i
        while j < n and sorted_scores[j] == sorted_scores[i]:
            tp += int(sorted_y[j] == 1)
            fp += int(sorted_y[j] == 0)
            j += 1
        points.append((fp / n_neg, tp / n_pos, float(sorted_scores[i])))
        i = j
    return points


def auc_trapezoid(points: Sequence[tuple[float, float, float]]) -> float:
    total = 0.0
    for (x0, y0, _), (x1, y1, _) in zip(points, points[1:]):
        total += (x1 - x0) * (y1 + y0) / 2.0
    return total


@dataclass
class CrossValReport:
    fold_accuracies: list[float]
    mean_accuracy: float
    roc: list[tuple[float, float, float]]
    auc: float
    importance: list[tuple[str, float]] | None = None
    importance_gain: list[tuple[str, float]] | None = None


FitFunction = Callable[[np.ndarray, np.ndarray], object]


def cross_validate(X: np.ndarray, y: np.ndarray, fit: FitFunction, folds: int = 5,
                   seed: int = 0, feature_names: Sequence[str] | None = None
                   ) -> CrossValReport:
    """Stratified k-fold CV; the ROC pools out-of-fold scores from all folds.

    ``fit`` trains a fresh model on the training folds only, so any inner
    standardization never sees test rows. Importance comes from one final fit
    on all rows when the model supports it.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    _check_binary(y)
    for cls in (0, 1):
        if int((y == cls).sum()) < folds:
            raise ValueError(f"need at least {folds} examples of class {cls}")

    assignment = stratified_folds(y, folds, seed)
    pooled_scores = np.empty(len(y), dtype=np.float64)
    fold_acc = []
    for f in range(folds):
        test = assignment == f
        model = fit(X[~test], y[~test])
        proba = model.predict_proba(X[test])
        pooled_scores[test] = proba
        fold_acc.append(float(np.mean((proba >= 0.5).astype(np.int64) == y[test])))

    points = roc_curve(pooled_scores, y)
    report = CrossValReport(
        fold_accuracies=fold_acc,
        mean_accuracy=float(np.mean(fold_acc)),
        roc=points,
        auc=auc_trapezoid(points),
    )
    full_model = fit(X, y)
    if isinstance(full_model, GbdtModel):
        n_feat = X.shape[1]
        report.importance = feature_importance(full_model, feature_names, n_feat)
        report.importance_gain = split_gain_importance(full_model, feature_names, n_feat)
    return report
