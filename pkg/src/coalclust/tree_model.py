"""Gaussian message passing up a dendrogram.

Each subtree is summarized by a Gaussian message ``N(z | mean, variance * Phi)``
created at the subtree's merge time. Merging two messages at time ``t_k``
yields a new message and the normalizing constant ``Z_k``; the data
likelihood of a tree is the product of its ``Z_k``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .coalescent import log_prior
from .errors import DataError, InvalidTreeError, NumericalError

# floor on s-tilde; only hit when two zero-variance children merge at their own creation time
VARIANCE_FLOOR = 1e-12
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class NodeMessage:
    mean: np.ndarray
    variance: float
    created_at: float
    members: frozenset


@dataclass(frozen=True, eq=False)
class MergeResult:
    message: NodeMessage
    log_z: float
    v: float
    r: float
    eps: float


def leaf_message(x, index):
    x = np.asarray(x, dtype=float)
    return NodeMessage(x, 0.0, 0.0, frozenset([index]))


def compute_r(child1, child2, t_prev):
    """``2 t_prev - t_c1 - t_c2 + s_c1 + s_c2``: the part of ``v`` fixed before the merge."""
    if t_prev < max(child1.created_at, child2.created_at):
        raise InvalidTreeError(
            f"t_prev={t_prev} precedes a child created at "
            f"{max(child1.created_at, child2.created_at)}"
        )
    r = 2.0 * t_prev - child1.created_at - child2.created_at + child1.variance + child2.variance
    return max(r, 0.0)


def merge_message(child1, child2, t_k, cov, t_prev=None):
    """Combine two child messages at time ``t_k``.

    ``t_prev`` (the previous merge time) only affects the reported ``r``;
    it defaults to the later child creation time.
    """
    if child1.members & child2.members:
        raise InvalidTreeError("merging overlapping subtrees")
    if t_prev is None:
        t_prev = max(child1.created_at, child2.created_at)
    if t_k < t_prev:
        raise InvalidTreeError(f"merge time {t_k} precedes previous merge {t_prev}")
    st1 = max(t_k - child1.created_at + child1.variance, VARIANCE_FLOOR)
    st2 = max(t_k - child2.created_at + child2.variance, VARIANCE_FLOOR)
    s_k = 1.0 / (1.0 / st1 + 1.0 / st2)
    mean = s_k * (child1.mean / st1 + child2.mean / st2)
    v = st1 + st2
    diff = child1.mean - child2.mean
    eps = float(cov.quad_form(diff))
    d = diff.shape[0]
    log_z = -0.5 * d * LOG_2PI - 0.5 * (d * math.log(v) + cov.log_det()) - eps / (2.0 * v)
    if not math.isfinite(log_z):
        raise NumericalError(f"non-finite merge constant at t={t_k}")
    message = NodeMessage(mean, s_k, float(t_k), child1.members | child2.members)
    return MergeResult(message, float(log_z), v, compute_r(child1, child2, t_prev), eps)


def replay(data, tree, cov):
    """Run every merge of ``tree`` in order; returns the list of MergeResults."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] != tree.n_leaves:
        raise DataError(f"data has {data.shape[0]} rows but the tree has {tree.n_leaves} leaves")
    if data.shape[1] != cov.d:
        raise DataError(f"data has {data.shape[1]} columns but the covariance is {cov.d}x{cov.d}")
    tree.validate()
    nodes = [leaf_message(row, i) for i, row in enumerate(data)]
    results = []
    t_prev = 0.0
    for a, b, t in tree.merges:
        res = merge_message(nodes[a], nodes[b], t, cov, t_prev)
        nodes.append(res.message)
        results.append(res)
        t_prev = t
    return results


def tree_log_likelihood(data, tree, cov):
    """log p(X | t, pi) = sum_k log Z_k."""
    return float(sum(res.log_z for res in replay(data, tree, cov)))


def joint_log_density(data, tree, cov):
    return log_prior(tree) + tree_log_likelihood(data, tree, cov)
