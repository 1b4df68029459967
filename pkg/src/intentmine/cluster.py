"""Iterative threshold-scheduled agglomerative clustering.

Level 1 groups intent vectors whose similarity clears the first threshold;
each subsequent level re-clusters the previous level's centroids under a
threshold relaxed by a fixed step. Clusters are named after their
highest-count member intent, and partitions are scored with a cosine-distance
silhouette.

Distance contract (shared with the reference oracle in the test suite):
d = max(0, 1 - cosine), with values <= 1e-12 snapped to exactly 0.
Cluster-to-cluster distance is the count-weighted mean pairwise distance,
i.e. every vector participates with the multiplicity of its weight.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, UndefinedMetricError
from .embed import as_matrix, pairwise_cosine_distance
from .util import json_ready


@dataclass(frozen=True)
class ThresholdSchedule:
    """Decreasing similarity cutoffs: x0, x0 - delta, x0 - 2*delta, ..."""

    x0: float = 0.85
    delta: float = 0.05
    levels: int = 4

    def __post_init__(self):
        if not 0.0 < self.x0 <= 1.0:
            raise InvalidParameterError(f"x0 must be in (0, 1], got {self.x0}")
        if self.delta < 0.0:
            raise InvalidParameterError(f"delta must be >= 0, got {self.delta}")
        if self.levels < 1:
            raise InvalidParameterError(f"levels must be >= 1, got {self.levels}")
        if self.x0 - (self.levels - 1) * self.delta <= 0.0:
            raise InvalidParameterError(
                f"schedule exhausts: x0={self.x0} - {self.levels - 1}*{self.delta} <= 0"
            )

    def level_thresholds(self) -> list[float]:
        # Rounded to 12 decimals so human-readable schedules like
        # (0.85, 0.05) yield exactly [0.85, 0.80, 0.75, ...].
        return [round(self.x0 - i * self.delta, 12) for i in range(self.levels)]


def agglomerate(
    vectors: Sequence[np.ndarray],
    weights: Sequence[int],
    threshold: float,
) -> list[list[int]]:
    """Average-linkage merging on d = 1 - cosine up to distance 1 - threshold.

    Repeatedly merges the pair of clusters with the smallest weighted mean
    pairwise distance while that distance is <= 1 - threshold. Ties are broken
    by the smallest (min member index of first cluster, min member index of
    second). Groups come back sorted by their minimum member index.
    """
    n = len(vectors)
    if n == 0:
        raise InvalidInputError("agglomerate requires at least one vector")
    if len(weights) != n:
        raise InvalidInputError(f"{n} vectors but {len(weights)} weights")
    if any(w < 1 for w in weights):
        raise InvalidInputError("weights must be positive integers")
    if not 0.0 < threshold <= 1.0:
        raise InvalidParameterError(f"threshold must be in (0, 1], got {threshold}")
    if n == 1:
        return [[0]]

    cutoff = 1.0 - threshold
    D = pairwise_cosine_distance(vectors)
    w = np.asarray(weights, dtype=np.float64)

    # S[a, b] = sum of w_i * w_j * d_ij over cross pairs; dist = S / (W_a * W_b).
    # Slot a always keeps the smaller minimum member index, so scanning the
    # upper triangle in row-major order realizes the documented tie-break.
    S = D * np.outer(w, w)
    W = w.copy()
    members: list[list[int] | None] = [[i] for i in range(n)]
    active = np.ones(n, dtype=bool)

    M = np.full((n, n), np.inf)
    iu = np.triu_indices(n, k=1)
    M[iu] = S[iu] / np.outer(W, W)[iu]

    for _ in range(n - 1):
        flat = int(np.argmin(M))
        a, b = divmod(flat, n)
        if M[a, b] > cutoff:
            break
        members[a].extend(members[b])  # type: ignore[union-attr]
        members[b] = None
        active[b] = False
        W[a] += W[b]
        idx = np.flatnonzero(active)
        idx = idx[idx != a]
        S[a, idx] = S[a, idx] + S[b, idx]
        S[idx, a] = S[a, idx]
        lo = np.minimum(a, idx)
        hi = np.maximum(a, idx)
        M[lo, hi] = S[a, idx] / (W[a] * W[idx])
        M[b, :] = np.inf
        M[:, b] = np.inf

    groups = [sorted(m) for m in members if m is not None]
    groups.sort(key=lambda g: g[0])
    return groups


def centroid(vectors: Sequence[np.ndarray], weights: Sequence[int]) -> np.ndarray:
    """Count-weighted mean, L2-normalized; a zero mean is returned as-is."""
    if not len(vectors):
        raise InvalidInputError("centroid requires at least one vector")
    X = as_matrix(vectors, "centroid")
    if len(weights) != X.shape[0]:
        raise InvalidInputError(f"{X.shape[0]} vectors but {len(weights)} weights")
    w = np.asarray(weights, dtype=np.float64)
    mean = (w[:, None] * X).sum(axis=0) / w.sum()
    norm = np.linalg.norm(mean)
    return mean / norm if norm > 0 else mean


def name_cluster(members: Sequence[tuple[str, int]]) -> str:
    """Text of the highest-count member; ties go to the smallest text."""
    if not members:
        raise InvalidInputError("cannot name an empty cluster")
    return min(members, key=lambda m: (-m[1], m[0]))[0]


@dataclass
class ClusterNode:
    id: str
    level: int
    label: str
    children: list[str]  # leaf refs at level 1, node ids above
    leaf_indices: list[int]  # descendant leaves, ascending
    centroid: np.ndarray
    total_count: int
    parent_id: str | None = None


@dataclass
class IntentTree:
    """Multi-level taxonomy for one cohort."""

    cohort_id: str
    leaves: list[tuple[str, int]]  # (intent text, count)
    nodes: list[ClusterNode] = field(default_factory=list)
    depth: int = 0
    applied_thresholds: list[float] = field(default_factory=list)

    def level_nodes(self, level: int) -> list[ClusterNode]:
        return [nd for nd in self.nodes if nd.level == level]

    def node_by_id(self, node_id: str) -> ClusterNode:
        for nd in self.nodes:
            if nd.id == node_id:
                return nd
        raise KeyError(node_id)

    def to_json_dict(self) -> dict:
        return {
            "cohort": self.cohort_id,
            "depth": self.depth,
            "applied_thresholds": json_ready(self.applied_thresholds),
            "nodes": [
                {
                    "id": nd.id,
                    "level": nd.level,
                    "label": nd.label,
                    "count": nd.total_count,
                    "children": list(nd.children),
                }
                for nd in self.nodes
            ],
            "leaves": [{"text": t, "count": c} for t, c in self.leaves],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), ensure_ascii=False, indent=2)


def build_tree(
    cohort_id: str,
    intents: Sequence[tuple[str, int]],
    vectors: Sequence[np.ndarray],
    schedule: ThresholdSchedule,
) -> IntentTree:
    """Grow the taxonomy level by level under the threshold schedule.

    Stops early when a level collapses to a single node; the tree records the
    thresholds actually applied and its achieved depth.
    """
    if len(intents) != len(vectors):
        raise InvalidInputError(f"{len(intents)} intents but {len(vectors)} vectors")
    if not intents:
        raise InvalidInputError("cannot build a tree for an empty cohort")
    tree = IntentTree(cohort_id=cohort_id, leaves=list(intents))
    counts = [c for _, c in intents]

    cur_vectors: list[np.ndarray] = [np.asarray(v, dtype=np.float64) for v in vectors]
    cur_weights: list[int] = list(counts)
    cur_leafsets: list[list[int]] = [[i] for i in range(len(intents))]
    cur_ids: list[str] = [f"leaf.{i}" for i in range(len(intents))]
    prev_nodes: list[ClusterNode] | None = None

    for level, threshold in enumerate(schedule.level_thresholds(), start=1):
        partition = agglomerate(cur_vectors, cur_weights, threshold)
        tree.applied_thresholds.append(threshold)
        new_nodes: list[ClusterNode] = []
        for g_idx, group in enumerate(partition):
            leaf_indices = sorted(i for child in group for i in cur_leafsets[child])
            leaf_members = [tree.leaves[i] for i in leaf_indices]
            node = ClusterNode(
                id=f"{cohort_id}/L{level}.{g_idx}",
                level=level,
                label=name_cluster(leaf_members),
                children=[cur_ids[child] for child in group],
                leaf_indices=leaf_indices,
                centroid=centroid([cur_vectors[c] for c in group], [cur_weights[c] for c in group]),
                total_count=sum(c for _, c in leaf_members),
            )
            new_nodes.append(node)
            if prev_nodes is not None:
                for child in group:
                    prev_nodes[child].parent_id = node.id
        tree.nodes.extend(new_nodes)
        tree.depth = level
        cur_vectors = [nd.centroid for nd in new_nodes]
        cur_weights = [nd.total_count for nd in new_nodes]
        cur_leafsets = [nd.leaf_indices for nd in new_nodes]
        cur_ids = [nd.id for nd in new_nodes]
        prev_nodes = new_nodes
        if len(new_nodes) == 1:
            break
    return tree


def silhouette(vectors: Sequence[np.ndarray], partition: Sequence[Sequence[int]]) -> float:
    """Mean (b - a) / max(a, b) on cosine distance.

    a is the mean distance to same-cluster points, b the smallest mean
    distance to another cluster. Singleton clusters contribute 0 by
    convention, as do points with a = b = 0.
    """
    groups = [list(g) for g in partition]
    if any(not g for g in groups):
        raise InvalidInputError("silhouette: empty cluster in partition")
    if len(groups) < 2:
        raise UndefinedMetricError("silhouette is undefined for fewer than 2 clusters")
    n = len(vectors)
    flat = sorted(i for g in groups for i in g)
    if flat != list(range(n)):
        raise InvalidInputError("partition must cover each vector index exactly once")

    D = pairwise_cosine_distance(vectors)
    scores = np.zeros(n)
    for gi, group in enumerate(groups):
        for i in group:
            if len(group) == 1:
                scores[i] = 0.0
                continue
            a = sum(D[i, j] for j in group if j != i) / (len(group) - 1)
            b = min(
                sum(D[i, j] for j in other) / len(other)
                for oi, other in enumerate(groups)
                if oi != gi
            )
            denom = max(a, b)
            scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())
