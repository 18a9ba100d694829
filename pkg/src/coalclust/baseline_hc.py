"""Average-link agglomerative clustering with Euclidean distances."""

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .coalescent import Dendrogram
from .errors import DataError


def average_link(data):
    """Average-linkage dendrogram; merge "times" are the linkage distances.

    Cluster distances are kept as sums of pairwise distances so the average
    of a merged cluster is exact up to summation order. Ties go to the
    smallest (left, right) node-id pair.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise DataError("average_link needs an (n, d) array with n >= 2")
    n = data.shape[0]
    total = 2 * n - 1
    sums = np.full((total, total), np.inf)
    sums[:n, :n] = squareform(pdist(data))
    sizes = np.zeros(total)
    sizes[:n] = 1.0
    active = list(range(n))
    merges = []
    last = 0.0
    for k in range(n - 1):
        idx = np.array(active)
        sub = sums[np.ix_(idx, idx)] / np.outer(sizes[idx], sizes[idx])
        iu = np.triu_indices(idx.size, 1)
        vals = sub[iu]
        # active is kept sorted, so row-major order is (left, right) order
        best = int(np.argmin(vals))
        a, b = int(idx[iu[0][best]]), int(idx[iu[1][best]])
        height = max(float(vals[best]), last)
        new = n + k
        sums[new, :] = sums[a, :] + sums[b, :]
        sums[:, new] = sums[new, :]
        sizes[new] = sizes[a] + sizes[b]
        active = [i for i in active if i not in (a, b)] + [new]
        merges.append((a, b, height))
        last = height
    return Dendrogram(n, tuple(merges))
