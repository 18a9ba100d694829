"""Kingman n-coalescent: dendrogram container, prior sampling and prior density.

Times are stored as nonnegative depths measured from the leaves: ``t_0 = 0``
and ``t_k = t_{k-1} + delta_k``. Leaves are nodes ``0..n-1``; merge ``k``
(1-based) creates node ``n - 1 + k``.
"""

from dataclasses import dataclass
import json
import math
import re

import numpy as np

from .errors import InvalidTreeError


def coalescent_rate(n, k):
    """Rate of the k-th merge (1-based): the number of surviving pairs."""
    m = n - k + 1
    return m * (m - 1) / 2.0


@dataclass(frozen=True)
class Dendrogram:
    n_leaves: int
    merges: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "merges", tuple((int(a), int(b), float(t)) for a, b, t in self.merges)
        )

    @property
    def times(self):
        return np.array([m[2] for m in self.merges], dtype=float)

    @property
    def deltas(self):
        return np.diff(np.concatenate([[0.0], self.times]))

    @property
    def root(self):
        return 2 * self.n_leaves - 2

    def node_times(self):
        out = np.zeros(2 * self.n_leaves - 1)
        out[self.n_leaves:] = self.times
        return out

    def validate(self, strict=False):
        """Raise InvalidTreeError unless the merge list is a proper binary tree.

        Times must be nondecreasing (``strict=True`` demands increasing).
        """
        n = self.n_leaves
        if n < 1:
            raise InvalidTreeError("a tree needs at least one leaf")
        if len(self.merges) != n - 1:
            raise InvalidTreeError(f"expected {n - 1} merges, got {len(self.merges)}")
        seen = set()
        prev = 0.0
        for k, (a, b, t) in enumerate(self.merges):
            new = n + k
            for c in (a, b):
                if not 0 <= c < new:
                    raise InvalidTreeError(f"merge {k + 1} references node {c} before it exists")
                if c in seen:
                    raise InvalidTreeError(f"node {c} has two parents")
                seen.add(c)
            if a == b:
                raise InvalidTreeError(f"merge {k + 1} joins node {a} with itself")
            if not math.isfinite(t) or t < 0:
                raise InvalidTreeError(f"merge {k + 1} has invalid time {t}")
            if t < prev or (strict and k > 0 and t <= prev):
                raise InvalidTreeError(f"merge times not increasing at merge {k + 1}")
            prev = t
        return self

    def children(self):
        return {self.n_leaves + k: (a, b) for k, (a, b, _) in enumerate(self.merges)}

    def leaf_sets(self):
        """Leaf members of every node, indexed by node id."""
        sets = [frozenset([i]) for i in range(self.n_leaves)]
        for a, b, _ in self.merges:
            sets.append(sets[a] | sets[b])
        return sets

    def to_newick(self):
        n = self.n_leaves
        times = self.node_times()
        kids = self.children()

        def render(node, parent_time):
            if node < n:
                label = str(node)
            else:
                a, b = kids[node]
                label = f"({render(a, times[node])},{render(b, times[node])})"
            if parent_time is None:
                return label
            return f"{label}:{repr(float(parent_time - times[node]))}"

        if n == 1:
            return "0;"
        return render(self.root, None) + ";"

    def to_dict(self):
        return {"n_leaves": self.n_leaves, "merges": [list(m) for m in self.merges]}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj):
        return cls(int(obj["n_leaves"]), tuple(tuple(m) for m in obj["merges"])).validate()

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


_TOKEN = re.compile(r"\s*([(),;:]|[^(),;:\s]+)")


def from_newick(text):
    """Parse the Newick written by :meth:`Dendrogram.to_newick`.

    Merge order is recovered by sorting internal nodes on their depth.
    """
    tokens = _TOKEN.findall(text.strip())
    pos = 0

    def parse():
        nonlocal pos
        if tokens[pos] == "(":
            pos += 1
            left = parse()
            if tokens[pos] != ",":
                raise InvalidTreeError("only binary Newick trees are supported")
            pos += 1
            right = parse()
            if tokens[pos] != ")":
                raise InvalidTreeError("malformed Newick")
            pos += 1
            node = ("internal", left, right)
        else:
            node = ("leaf", int(tokens[pos]))
            pos += 1
        length = 0.0
        if pos < len(tokens) and tokens[pos] == ":":
            length = float(tokens[pos + 1])
            pos += 2
        return node, length

    root, _ = parse()

    # depth of each node = height of root minus path length; leaves sit at 0
    def height(node):
        kind = node[0]
        if kind == "leaf":
            return 0.0
        (l, ll), (r, rl) = node[1], node[2]
        return max(height(l) + ll, height(r) + rl)

    internals = []
    leaves = []

    def walk(node, h):
        if node[0] == "leaf":
            leaves.append(node[1])
            return
        internals.append((h, node))
        (l, ll), (r, rl) = node[1], node[2]
        walk(l, h - ll)
        walk(r, h - rl)

    walk(root, height(root))
    n = len(leaves)
    internals.sort(key=lambda item: item[0])
    ids = {}
    merges = []

    def node_id(node):
        return node[1] if node[0] == "leaf" else ids[id(node)]

    for k, (h, node) in enumerate(internals):
        (l, _), (r, _) = node[1], node[2]
        a, b = sorted((node_id(l), node_id(r)))
        ids[id(node)] = n + k
        merges.append((a, b, max(h, 0.0)))
    return Dendrogram(n, tuple(merges)).validate()


def sample_prior(n, rng):
    """Draw {t, pi} from the n-coalescent."""
    if n < 1:
        raise ValueError("n must be >= 1")
    active = list(range(n))
    merges = []
    t = 0.0
    for k in range(1, n):
        t += rng.exponential(1.0 / coalescent_rate(n, k))
        i, j = rng.choice(len(active), size=2, replace=False)
        a, b = active[i], active[j]
        for idx in sorted((i, j), reverse=True):
            active.pop(idx)
        active.append(n - 1 + k)
        merges.append((min(a, b), max(a, b), t))
    return Dendrogram(n, tuple(merges))


def log_prior(tree):
    """log p(t, pi) = -sum_k rate_k * delta_k."""
    tree.validate()
    n = tree.n_leaves
    rates = np.array([coalescent_rate(n, k) for k in range(1, n)])
    return float(-np.sum(rates * tree.deltas))
