"""Agglomerative clustering on a precomputed distance matrix.

Node ids follow the usual linkage-matrix convention: leaves are
``0..n-1`` in input order, the k-th merge creates node ``n + k``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidMatrix

LINKAGE_METHODS = ("single", "complete", "average", "weighted")


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass
class Dendrogram:
    leaves: list[str]
    merges: list[Merge]
    method: str = "average"

    @property
    def n(self) -> int:
        return len(self.leaves)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "leaves": list(self.leaves),
            "merges": [{"left": m.left, "right": m.right, "height": m.height, "size": m.size}
                       for m in self.merges],
        }

    def to_newick(self) -> str:
        n = self.n
        heights = [0.0] * n + [m.height for m in self.merges]

        def name(s):
            s = str(s)
            if re.search(r"[\s(),:;'\[\]]", s):
                return "'" + s.replace("'", "''") + "'"
            return s

        def render(node):
            if node < n:
                return name(self.leaves[node])
            m = self.merges[node - n]
            parts = []
            for child in (m.left, m.right):
                parts.append(f"{render(child)}:{heights[node] - heights[child]!r}")
            return "(" + ",".join(parts) + ")"

        if n == 1:
            return name(self.leaves[0]) + ";"
        return render(2 * n - 2) + ";"


@dataclass
class ClusterAssignment:
    labels: dict[str, int]
    num_clusters: int = field(init=False)

    def __post_init__(self):
        self.num_clusters = len(set(self.labels.values()))

    def as_list(self, ids) -> list[int]:
        return [self.labels[i] for i in ids]

    def to_csv(self) -> str:
        lines = ["transcription_id,cluster_label"]
        lines += [f"{tid},{lab}" for tid, lab in self.labels.items()]
        return "\n".join(lines) + "\n"


def validate_matrix(d, tol: float = 1e-9) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {d.shape}")
    if np.isnan(d).any():
        raise InvalidMatrix("matrix contains NaN")
    if (d < 0).any():
        raise InvalidMatrix("matrix contains negative entries")
    if np.abs(d - d.T).max(initial=0.0) > tol:
        raise InvalidMatrix("matrix is not symmetric")
    if np.abs(np.diag(d)).max(initial=0.0) > tol:
        raise InvalidMatrix("matrix has a non-zero diagonal")
    return d


def _update(method, d_ak, d_bk, size_a, size_b):
    # Lance-Williams recurrences for the supported methods
    if method == "single":
        return min(d_ak, d_bk)
    if method == "complete":
        return max(d_ak, d_bk)
    if method == "average":
        return (size_a * d_ak + size_b * d_bk) / (size_a + size_b)
    if method == "weighted":
        return 0.5 * (d_ak + d_bk)
    raise ValueError(f"unknown linkage method {method!r}")


def linkage(d, method: str = "average", ids=None) -> Dendrogram:
    """Agglomerative clustering with a fully deterministic merge order.

    Among pairs at the minimal distance the one whose (smaller, larger)
    member keys is lexicographically smallest merges first, where a
    cluster's key is the smallest id among its leaves. Keying on ids rather
    than positions makes the tree independent of row order.
    """
    if method not in LINKAGE_METHODS:
        raise ValueError(f"unknown linkage method {method!r}; choose from {LINKAGE_METHODS}")
    d = validate_matrix(d)
    n = d.shape[0]
    if n < 1:
        raise InvalidMatrix("empty matrix")
    ids = list(range(n)) if ids is None else list(ids)
    if len(ids) != n:
        raise ValueError("ids length does not match matrix size")

    key = {k: ids[k] for k in range(n)}
    size = {k: 1 for k in range(n)}
    dist = {}
    for a in range(n):
        for b in range(a + 1, n):
            dist[(a, b)] = float(d[a, b])

    merges = []
    active = list(range(n))
    for step in range(n - 1):
        best = None
        for (a, b), value in dist.items():
            ka, kb = key[a], key[b]
            rank = (value, min(ka, kb), max(ka, kb))
            if best is None or rank < best[0]:
                best = (rank, a, b)
        (height, _, _), a, b = best
        if key[b] < key[a]:
            a, b = b, a
        new = n + step
        active.remove(a)
        active.remove(b)
        for k in active:
            d_ak = dist.pop((min(a, k), max(a, k)))
            d_bk = dist.pop((min(b, k), max(b, k)))
            dist[(k, new)] = _update(method, d_ak, d_bk, size[a], size[b])
        del dist[(min(a, b), max(a, b))]
        size[new] = size[a] + size[b]
        key[new] = min(key[a], key[b])
        merges.append(Merge(a, b, height, size[new]))
        active.append(new)
    return Dendrogram([str(i) for i in ids], merges, method)


def cut(dgm: Dendrogram, threshold: float) -> ClusterAssignment:
    """Flat clusters from merges at height <= threshold.

    Labels are numbered in order of each cluster's first leaf.
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    n = dgm.n
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for k, m in enumerate(dgm.merges):
        if m.height <= threshold:
            parent[find(m.left)] = n + k
            parent[find(m.right)] = n + k

    labels = {}
    root_label = {}
    for leaf, tid in enumerate(dgm.leaves):
        root = find(leaf)
        if root not in root_label:
            root_label[root] = len(root_label)
        labels[tid] = root_label[root]
    return ClusterAssignment(labels)


def cluster(d, ids, method: str, threshold: float) -> tuple[Dendrogram, ClusterAssignment]:
    dgm = linkage(d, method, ids)
    return dgm, cut(dgm, threshold)
