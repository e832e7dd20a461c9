"""Balanced k-means over embedding tables and stacked per-cluster matrices.

Lloyd iterations with a capacity-constrained assignment step: cluster sizes
are forced into {floor(N/l), ceil(N/l)} so that no two clusters differ by
more than one member. Member vectors are stacked into q x m matrices
(q = ceil(N/l)) with zero rows padding short clusters; the real-member
count per cluster is kept so downstream consumers can mask padding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError
from .transe import EmbeddingTable


@dataclass
class ClusterConfig:
    n_clusters: int
    max_iter: int = 50
    n_init: int = 8  # independent seeded restarts; best objective wins
    seed: int = 0


@dataclass
class ClusterSet:
    assignments: np.ndarray        # (N,) cluster index per id
    members: list[list[int]]       # ids per cluster, in stacking order
    matrices: list[np.ndarray]     # l matrices, each (q, m), zero-padded
    n_valid: list[int]             # real member rows per cluster
    objective: float               # within-cluster sum of squared distances

    @property
    def n_clusters(self) -> int:
        return len(self.members)

    @property
    def rows_per_cluster(self) -> int:
        return self.matrices[0].shape[0] if self.matrices else 0


def _balanced_assign(points: np.ndarray, centroids: np.ndarray, lo: int, hi_slots: int) -> np.ndarray:
    """Greedy capacity-constrained assignment.

    Points are processed in decreasing order of how much they care
    (distance advantage of their best centroid over the runner-up); each
    goes to its nearest centroid that still has room. Every cluster may
    take ``lo`` points freely; exactly ``hi_slots`` clusters may take one
    extra point.
    """
    n = points.shape[0]
    l = centroids.shape[0]
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    if l == 1:
        return np.zeros(n, dtype=np.int64)
    part = np.partition(d2, 1, axis=1)
    advantage = part[:, 1] - part[:, 0]
    order = np.argsort(-advantage, kind="stable")
    sizes = np.zeros(l, dtype=np.int64)
    tickets = hi_slots
    assign = np.full(n, -1, dtype=np.int64)
    for p in order:
        for c in np.argsort(d2[p], kind="stable"):
            if sizes[c] < lo:
                sizes[c] += 1
                assign[p] = c
                break
            if sizes[c] == lo and tickets > 0:
                sizes[c] += 1
                tickets -= 1
                assign[p] = c
                break
    return assign


def _objective(points: np.ndarray, assign: np.ndarray, l: int) -> float:
    total = 0.0
    for c in range(l):
        member = points[assign == c]
        if len(member):
            total += ((member - member.mean(axis=0)) ** 2).sum()
    return float(total)


def balanced_kmeans(table: EmbeddingTable, config: ClusterConfig) -> ClusterSet:
    """Partition the table into equal-size clusters (sizes differ by <= 1).

    Deterministic given the config seed. Runs ``n_init`` restarts and keeps
    the assignment with the lowest within-cluster squared distance.
    """
    points = np.asarray(table.vectors, dtype=np.float64)
    n = points.shape[0]
    l = config.n_clusters
    if l == 0:
        raise ValueError("cluster count must be >= 1")
    if l > n:
        raise ValueError(f"cannot form {l} clusters from {n} points")
    lo, rem = divmod(n, l)
    rng = np.random.default_rng(config.seed)

    best_assign = None
    best_obj = np.inf
    for _ in range(max(1, config.n_init)):
        centroids = points[rng.choice(n, size=l, replace=False)].copy()
        assign = np.full(n, -1, dtype=np.int64)
        for _ in range(config.max_iter):
            new_assign = _balanced_assign(points, centroids, lo, rem)
            if np.array_equal(new_assign, assign):
                break
            assign = new_assign
            for c in range(l):
                member = points[assign == c]
                if len(member):
                    centroids[c] = member.mean(axis=0)
        obj = _objective(points, assign, l)
        if obj < best_obj - 1e-12:
            best_obj = obj
            best_assign = assign
    return _finalize(points, best_assign, l, best_obj)


def _finalize(points: np.ndarray, assign: np.ndarray, l: int, obj: float) -> ClusterSet:
    members = [sorted(np.flatnonzero(assign == c).tolist()) for c in range(l)]
    matrices, n_valid = build_cluster_matrices(members, points, l)
    return ClusterSet(assignments=assign, members=members, matrices=matrices,
                      n_valid=n_valid, objective=obj)


def build_cluster_matrices(members: list[list[int]], points: np.ndarray,
                           n_clusters: int) -> tuple[list[np.ndarray], list[int]]:
    """Stack member vectors in order; zero-pad short clusters to q rows."""
    n = points.shape[0]
    q = -(-n // n_clusters)
    matrices = []
    n_valid = []
    for ids in members:
        mat = np.zeros((q, points.shape[1]))
        mat[: len(ids)] = points[ids]
        matrices.append(mat)
        n_valid.append(len(ids))
    return matrices, n_valid


def shuffle_members(clusters: ClusterSet, points: np.ndarray,
                    rng: np.random.Generator) -> ClusterSet:
    """Same partition, members re-stacked in a random order within each cluster."""
    members = []
    for ids in clusters.members:
        perm = list(ids)
        rng.shuffle(perm)
        members.append(perm)
    matrices, n_valid = build_cluster_matrices(members, points, clusters.n_clusters)
    return ClusterSet(assignments=clusters.assignments.copy(), members=members,
                      matrices=matrices, n_valid=n_valid, objective=clusters.objective)


def write_clusters(path, clusters: ClusterSet) -> None:
    """Audit dump: `id<TAB>cluster` per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for eid, c in enumerate(clusters.assignments):
            fh.write(f"{eid}\t{int(c)}\n")


def read_clusters(path, points: np.ndarray) -> ClusterSet:
    assign = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("expected 'id<TAB>cluster'", line=lineno)
            assign[int(parts[0])] = int(parts[1])
    n = points.shape[0]
    if sorted(assign) != list(range(n)):
        raise ParseError(f"cluster file covers {len(assign)} ids, table has {n}")
    arr = np.array([assign[i] for i in range(n)], dtype=np.int64)
    l = int(arr.max()) + 1
    return _finalize(points, arr, l, _objective(points, arr, l))
