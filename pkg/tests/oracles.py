"""Brute-force reference implementations used only by the test suite.

Each oracle re-derives its result from first principles (plain Python loops
over the stated definitions) so the fast implementations are checked against
an independent computation path.
"""

from __future__ import annotations

import math

import numpy as np

from intentmine.embed import cosine_similarity


def distance_matrix(vectors) -> list[list[float]]:
    """d = max(0, 1 - cosine), snapped to 0 within 1e-12 (the documented contract)."""
    n = len(vectors)
    D = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            d = max(0.0, 1.0 - cosine_similarity(vectors[i], vectors[j]))
            D[i][j] = 0.0 if d <= 1e-12 else d
    return D


def agglomerate_reference(vectors, weights, threshold) -> list[list[int]]:
    """O(n^3) weighted average-linkage merging, recomputed from scratch each step."""
    n = len(vectors)
    D = distance_matrix(vectors)
    cutoff = 1.0 - threshold
    clusters: list[list[int]] = [[i] for i in range(n)]

    def cluster_distance(a: list[int], b: list[int]) -> float:
        num = 0.0
        den = 0.0
        for i in a:
            for j in b:
                num += weights[i] * weights[j] * D[i][j]
                den += weights[i] * weights[j]
        return num / den

    while len(clusters) > 1:
        best = None
        best_key = None
        for x in range(len(clusters)):
            for y in range(x + 1, len(clusters)):
                d = cluster_distance(clusters[x], clusters[y])
                key = (d, min(clusters[x]), min(clusters[y]))
                if best_key is None or key < best_key:
                    best_key = key
                    best = (x, y)
        if best_key[0] > cutoff:
            break
        x, y = best
        clusters[x] = sorted(clusters[x] + clusters[y])
        del clusters[y]
        clusters.sort(key=min)
    return sorted([sorted(c) for c in clusters], key=lambda c: c[0])


def silhouette_reference(vectors, partition) -> float:
    """Direct evaluation of mean (b - a) / max(a, b) on cosine distance."""
    D = distance_matrix(vectors)
    label = {}
    for gi, group in enumerate(partition):
        for i in group:
            label[i] = gi
    scores = []
    for gi, group in enumerate(partition):
        for i in group:
            if len(group) == 1:
                scores.append(0.0)
                continue
            a = sum(D[i][j] for j in group if j != i) / (len(group) - 1)
            b = min(
                sum(D[i][j] for j in other) / len(other)
                for oj, other in enumerate(partition)
                if oj != gi
            )
            m = max(a, b)
            scores.append(0.0 if m == 0.0 else (b - a) / m)
    return sum(scores) / len(scores)


def tfidf_reference(docs) -> tuple[dict[str, float], list[dict[str, float]]]:
    """Pure-python TF-IDF: returns (idf per n-gram, one normalized row per doc)."""

    def grams(doc):
        return list(doc) + [f"{doc[i]} {doc[i+1]}" for i in range(len(doc) - 1)]

    df: dict[str, int] = {}
    for doc in docs:
        for g in set(grams(doc)):
            df[g] = df.get(g, 0) + 1
    n = len(docs)
    idf = {g: math.log((1 + n) / (1 + df[g])) + 1.0 for g in df}
    rows = []
    for doc in docs:
        counts: dict[str, float] = {}
        for g in grams(doc):
            counts[g] = counts.get(g, 0.0) + 1.0
        weighted = {g: c * idf[g] for g, c in counts.items()}
        norm = math.sqrt(sum(v * v for v in weighted.values()))
        rows.append({g: v / norm for g, v in weighted.items()} if norm else {})
    return idf, rows


def covariance_eig_reference(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of the population covariance, descending order."""
    Xc = X - X.mean(axis=0)
    cov = (Xc.T @ Xc) / X.shape[0]
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order].T
