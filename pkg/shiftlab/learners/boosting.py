"""
Gradient-boosted shallow regression trees with per-example weights.

Classification boosts the binary logistic loss (Newton leaf values);
regression boosts the squared loss. Split search is exhaustive over midpoints
between distinct sorted values; ties go to the lowest feature index, then the
lowest threshold, so fits are deterministic without a seed.
"""

import logging
from typing import Any, Dict, List, Tuple

import numpy as np
from scipy.special import expit, log1p

from .base import LOSS_LOGISTIC, LOSS_SQUARED, BaseLearner, LearnerError

logger = logging.getLogger(__name__)

MAX_STEP_HALVINGS = 30
LEAF = -1


def _logistic_risk(scores: np.ndarray, labels: np.ndarray, weights: np.ndarray) -> float:
    # log(1 + exp(-s)) for y=1 and log(1 + exp(s)) for y=0, computed stably.
    margin = np.where(labels == 1, scores, -scores)
    losses = np.logaddexp(0.0, -margin)
    return float(weights @ losses / weights.sum())


def _squared_risk(scores: np.ndarray, targets: np.ndarray, weights: np.ndarray) -> float:
    return float(weights @ (targets - scores) ** 2 / weights.sum())


def _best_split(
    features: np.ndarray,
    order: np.ndarray,
    in_node: np.ndarray,
    residuals: np.ndarray,
    weights: np.ndarray,
) -> Tuple[int, float, float]:
    """
    Finds the weighted-variance-reducing split of the rows in `in_node`.

    Returns:
        (feature index, threshold, gain); feature is LEAF when no split helps.
    """
    best = (LEAF, 0.0, 0.0)
    node_rows = in_node.nonzero()[0]
    total_w = weights[node_rows].sum()
    total_wr = weights[node_rows] @ residuals[node_rows]
    spread = weights[node_rows] @ residuals[node_rows] ** 2
    min_gain = 1e-12 * max(spread, 1e-300)
    for j in range(features.shape[1]):
        rows = order[j][in_node[order[j]]]
        if rows.size < 2:
            continue
        values = features[rows, j]
        cum_w = np.cumsum(weights[rows])[:-1]
        cum_wr = np.cumsum(weights[rows] * residuals[rows])[:-1]
        right_w = total_w - cum_w
        valid = (values[:-1] < values[1:]) & (cum_w > 0) & (right_w > 0)
        if not valid.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            gains = cum_wr**2 / cum_w + (total_wr - cum_wr) ** 2 / right_w
        gains = np.where(valid, gains - total_wr**2 / total_w, -np.inf)
        k = int(np.argmax(gains))
        if gains[k] > min_gain and gains[k] > best[2]:
            best = (j, 0.5 * (values[k] + values[k + 1]), float(gains[k]))
    return best


def _grow_tree(
    features: np.ndarray,
    order: np.ndarray,
    residuals: np.ndarray,
    weights: np.ndarray,
    max_depth: int,
) -> Tuple[Dict[str, List], np.ndarray]:
    """
    Grows one tree on the weighted residuals.

    Returns:
        The tree as parallel node lists and the leaf node id of every row.
    """
    tree: Dict[str, List] = {"feature": [], "threshold": [], "left": [], "right": []}
    leaf_of = np.zeros(features.shape[0], dtype=int)

    def add_node() -> int:
        for key in tree:
            tree[key].append(LEAF if key != "threshold" else 0.0)
        return len(tree["feature"]) - 1

    def grow(in_node: np.ndarray, depth: int) -> int:
        node = add_node()
        feature, threshold, _ = (
            _best_split(features, order, in_node, residuals, weights)
            if depth < max_depth
            else (LEAF, 0.0, 0.0)
        )
        if feature == LEAF:
            leaf_of[in_node] = node
            return node
        goes_left = features[:, feature] <= threshold
        tree["feature"][node] = feature
        tree["threshold"][node] = threshold
        tree["left"][node] = grow(in_node & goes_left, depth + 1)
        tree["right"][node] = grow(in_node & ~goes_left, depth + 1)
        return node

    grow(np.ones(features.shape[0], dtype=bool), 0)
    return tree, leaf_of


def apply_tree(tree: Dict[str, Any], features: np.ndarray) -> np.ndarray:
    """Returns the value of the leaf each row lands in."""
    feature = np.asarray(tree["feature"], dtype=int)
    threshold = np.asarray(tree["threshold"], dtype=float)
    left = np.asarray(tree["left"], dtype=int)
    right = np.asarray(tree["right"], dtype=int)
    node = np.zeros(features.shape[0], dtype=int)
    active = feature[node] != LEAF
    while active.any():
        rows = active.nonzero()[0]
        split_on = feature[node[rows]]
        goes_left = features[rows, split_on] <= threshold[node[rows]]
        node[rows] = np.where(goes_left, left[node[rows]], right[node[rows]])
        active = feature[node] != LEAF
    return np.asarray(tree["value"], dtype=float)[node]


class BoostedTreesLearner(BaseLearner):
    """Gradient boosting of depth-limited trees ('stumps' at max_depth=1)."""

    def fit(self, spec, features, targets, weights, n_classes):
        if n_classes is not None and (n_classes != 2 or spec.loss != LOSS_LOGISTIC):
            raise LearnerError("Boosting supports binary classification with the logistic loss.")
        if n_classes is None and spec.loss != LOSS_SQUARED:
            raise LearnerError("Boosting regression uses the squared loss.")
        classify = n_classes is not None
        total = weights.sum()
        if classify:
            prior = np.clip(weights @ targets / total, 1e-12, 1 - 1e-12)
            init = float(np.log(prior) - log1p(-prior))
            risk_of = lambda s: _logistic_risk(s, targets, weights)  # noqa: E731
        else:
            init = float(weights @ targets / total)
            risk_of = lambda s: _squared_risk(s, targets, weights)  # noqa: E731

        order = np.argsort(features, axis=0, kind="stable").T
        scores = np.full(features.shape[0], init)
        risk_path = [risk_of(scores)]
        trees = []
        halvings = 0
        for _ in range(spec.rounds):
            probs = expit(scores) if classify else None
            residuals = targets - (probs if classify else scores)
            tree, leaf_of = _grow_tree(features, order, residuals, weights, spec.max_depth)
            n_nodes = len(tree["feature"])
            numer = np.bincount(leaf_of, weights=weights * residuals, minlength=n_nodes)
            if classify:
                denom = np.bincount(
                    leaf_of, weights=weights * probs * (1 - probs), minlength=n_nodes
                )
            else:
                denom = np.bincount(leaf_of, weights=weights, minlength=n_nodes)
            values = spec.learning_rate * numer / np.maximum(denom, 1e-12)

            # Halve the step until the training risk does not increase.
            for _ in range(MAX_STEP_HALVINGS):
                candidate = scores + values[leaf_of]
                risk = risk_of(candidate)
                if risk <= risk_path[-1]:
                    break
                values = values * 0.5
                halvings += 1
            else:
                values = np.zeros_like(values)
                candidate, risk = scores, risk_path[-1]
            tree["value"] = values.tolist()
            trees.append(tree)
            scores = candidate
            risk_path.append(risk)

        if halvings:
            logger.info("Boosting halved %d step(s) to keep training risk monotone", halvings)
        params = {"init": init, "trees": trees, "train_risk": np.asarray(risk_path)}
        return params, {"solver": "boosting", "step_halvings": halvings}

    def decision(self, spec, params, features, n_classes):
        scores = np.full(features.shape[0], float(params["init"]))
        for tree in params["trees"]:
            scores = scores + apply_tree(tree, features)
        return scores

    def probabilities(self, spec, params, features, n_classes):
        p1 = expit(self.decision(spec, params, features, n_classes))
        return np.column_stack([1.0 - p1, p1])
