"""Tree evaluation: log-domain time and distance errors, subtree score, ARI curve."""

from dataclasses import dataclass, field, asdict
from math import comb

import numpy as np
from scipy.integrate import trapezoid

from .errors import DataError


def tree_distance_matrix(tree):
    """Cophenetic matrix: entry (i, j) is the merge time of the LCA of leaves i and j."""
    n = tree.n_leaves
    out = np.zeros((n, n))
    sets = [[i] for i in range(n)]
    for a, b, t in tree.merges:
        la, lb = sets[a], sets[b]
        out[np.ix_(la, lb)] = t
        out[np.ix_(lb, la)] = t
        sets.append(la + lb)
    return out


def _upper(matrix):
    matrix = np.asarray(matrix, dtype=float)
    return matrix[np.triu_indices(matrix.shape[0], 1)]


def error_triple(estimate, truth):
    """(mse, mae, mab) of ``log estimate - log truth``.

    Square matrices are compared on their strict upper triangle.
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise DataError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    if estimate.ndim == 2 and estimate.shape[0] == estimate.shape[1]:
        estimate, truth = _upper(estimate), _upper(truth)
    estimate, truth = estimate.ravel(), truth.ravel()
    if estimate.size == 0:
        raise DataError("nothing to compare")
    if np.any(estimate <= 0) or np.any(truth <= 0):
        raise DataError("log-domain errors need strictly positive entries")
    e = np.log(estimate) - np.log(truth)
    return float(np.mean(e * e)), float(np.mean(np.abs(e))), float(np.max(np.abs(e)))


def _normalized(weights, count):
    if weights is None:
        return np.full(count, 1.0 / count)
    w = np.asarray(weights, dtype=float)
    return w / w.sum()


def posterior_times(trees, weights=None):
    """Weighted geometric mean of the merge-time vectors."""
    w = _normalized(weights, len(trees))
    with np.errstate(divide="ignore"):
        logs = np.log(np.array([tree.times for tree in trees]))
    return np.exp(w @ logs)


def posterior_distance(trees, weights=None):
    """Weighted geometric mean of cophenetic matrices (zero diagonal)."""
    w = _normalized(weights, len(trees))
    with np.errstate(divide="ignore"):
        logs = np.array([np.log(_upper(tree_distance_matrix(tree))) for tree in trees])
    n = trees[0].n_leaves
    out = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    out[iu] = np.exp(w @ logs)
    return out + out.T


def subtree_score(tree, labels):
    """Fraction of label-pure internal nodes, normalized by n - C."""
    labels = np.asarray(labels)
    n = tree.n_leaves
    if labels.shape != (n,):
        raise DataError(f"need {n} labels, got {labels.shape}")
    n_classes = np.unique(labels).size
    if n_classes >= n:
        raise DataError("subtree score is undefined when every leaf has its own class")
    pure = 0
    node_labels = [{lab} for lab in labels.tolist()]
    for a, b, _ in tree.merges:
        merged = node_labels[a] | node_labels[b]
        node_labels.append(merged)
        pure += len(merged) == 1
    return pure / (n - n_classes)


def adjusted_rand_index(p1, p2):
    """Hubert-Arabie adjusted Rand index, computed in exact integer arithmetic."""
    p1, p2 = np.asarray(p1), np.asarray(p2)
    if p1.shape != p2.shape or p1.ndim != 1:
        raise DataError("labelings must be 1-D and of equal length")
    n = p1.size
    _, a = np.unique(p1, return_inverse=True)
    _, b = np.unique(p2, return_inverse=True)
    table = np.zeros((a.max() + 1 if n else 0, b.max() + 1 if n else 0), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    index = sum(comb(int(x), 2) for x in table.ravel())
    sum_a = sum(comb(int(x), 2) for x in table.sum(axis=1))
    sum_b = sum(comb(int(x), 2) for x in table.sum(axis=0))
    total = comb(n, 2)
    numerator = 2 * (index * total - sum_a * sum_b)
    denominator = (sum_a + sum_b) * total - 2 * sum_a * sum_b
    if denominator == 0:
        # both partitions trivial in the same way
        return 1.0 if np.array_equal(a, b) or index == sum_a == sum_b else 0.0
    return numerator / denominator


def cut_tree(tree, n_clusters):
    """Cluster ids after undoing the last ``n_clusters - 1`` merges.

    Clusters are numbered by their smallest leaf.
    """
    n = tree.n_leaves
    if not 1 <= n_clusters <= n:
        raise DataError(f"n_clusters must lie in [1, {n}]")
    parent = list(range(n))
    for a, b, _ in tree.merges[: n - n_clusters]:
        parent.append(len(parent))
        parent[a] = parent[b] = len(parent) - 1

    def root(x):
        while parent[x] != x:
            x = parent[x]
        return x

    roots = [root(i) for i in range(n)]
    ids = {}
    for r in roots:
        ids.setdefault(r, len(ids))
    return np.array([ids[r] for r in roots])


def majority_labels(clusters, labels):
    """Each cluster takes its most common true label; ties go to the smallest label."""
    labels = np.asarray(labels)
    out = np.empty_like(labels)
    for c in np.unique(clusters):
        members = clusters == c
        values, counts = np.unique(labels[members], return_counts=True)
        out[members] = values[np.argmax(counts)]
    return out


def ari_curve_auc(tree, labels):
    """ARI of the majority-labelled cut for N_c = 1..n, and its normalized trapezoid area."""
    labels = np.asarray(labels)
    n = tree.n_leaves
    if labels.shape != (n,):
        raise DataError(f"need {n} labels, got {labels.shape}")
    curve = []
    for k in range(1, n + 1):
        induced = majority_labels(cut_tree(tree, k), labels)
        curve.append((k, float(adjusted_rand_index(induced, labels))))
    if n == 1:
        return curve, curve[0][1]
    x = (np.arange(1, n + 1) - 1) / (n - 1)
    y = np.array([c[1] for c in curve])
    return curve, float(trapezoid(y, x))


@dataclass
class MetricsReport:
    mse_t: float | None = None
    mae_t: float | None = None
    mab_t: float | None = None
    mse_pi: float | None = None
    mae_pi: float | None = None
    mab_pi: float | None = None
    # same errors for the max-weight particle alone
    best: dict = field(default_factory=dict)
    subtree_score: float | None = None
    ari_curve: list = field(default_factory=list)
    auc: float | None = None
    runtime_seconds: float | None = None

    def to_dict(self, include_runtime=True):
        out = asdict(self)
        out["ari_curve"] = [list(p) for p in self.ari_curve]
        if not include_runtime:
            out.pop("runtime_seconds")
        return out


def evaluate(trees, weights=None, truth=None, labels=None, runtime_seconds=None):
    """Build a MetricsReport; error metrics need ``truth``, label metrics need ``labels``."""
    trees = list(trees)
    w = _normalized(weights, len(trees))
    best = trees[int(np.argmax(w))]
    report = MetricsReport(runtime_seconds=runtime_seconds)
    if truth is not None:
        report.mse_t, report.mae_t, report.mab_t = error_triple(posterior_times(trees, w), truth.times)
        truth_pi = tree_distance_matrix(truth)
        report.mse_pi, report.mae_pi, report.mab_pi = error_triple(posterior_distance(trees, w), truth_pi)
        t_best = error_triple(best.times, truth.times)
        pi_best = error_triple(tree_distance_matrix(best), truth_pi)
        report.best = dict(zip(("mse_t", "mae_t", "mab_t", "mse_pi", "mae_pi", "mab_pi"), t_best + pi_best))
    if labels is not None:
        report.subtree_score = subtree_score(best, labels)
        report.ari_curve, report.auc = ari_curve_auc(best, labels)
    return report
