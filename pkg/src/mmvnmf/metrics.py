"""External cluster-validity metrics: purity and silhouette."""

import math
from collections import Counter, defaultdict
from collections.abc import Sequence

from .matrix import Matrix

__all__ = ["SingleClusterError", "purity", "silhouette"]


class SingleClusterError(ValueError):
    """Silhouette is undefined when fewer than two clusters are populated."""


def purity(labels: Sequence[int], clusters: Sequence[int]) -> float:
    """Fraction of objects belonging to their cluster's majority class.

    Sum over clusters of the majority-class count, divided by N; lies in
    (0, 1] and is invariant under relabeling of either id set.
    """
    if len(labels) != len(clusters):
        raise ValueError(f"got {len(labels)} labels for {len(clusters)} cluster assignments")
    if not labels:
        raise ValueError("purity needs at least one object")
    per_cluster: dict[int, Counter] = defaultdict(Counter)
    for lab, clu in zip(labels, clusters):
        per_cluster[clu][lab] += 1
    return sum(max(c.values()) for c in per_cluster.values()) / len(labels)


def silhouette(x: Matrix, clusters: Sequence[int]) -> float:
    """Mean silhouette coefficient of a clustering in the view's own space.

    Samples are the columns of ``x``; distances are euclidean.  Per sample,
    ``a`` is the mean distance to its own cluster's other members and ``b``
    the smallest mean distance to another cluster; the coefficient is
    ``(b - a) / max(a, b)``, with singleton-cluster samples contributing 0.
    """
    n = x.cols
    if len(clusters) != n:
        raise ValueError(f"got {len(clusters)} cluster assignments for {n} samples")
    if n < 2:
        raise ValueError("silhouette needs at least two samples")
    sizes = Counter(clusters)
    if len(sizes) < 2:
        raise SingleClusterError("all samples fall in a single cluster; silhouette is undefined")

    cols = [x.column(j) for j in range(n)]
    total = 0.0
    for i in range(n):
        own = clusters[i]
        if sizes[own] == 1:
            continue  # singleton: coefficient 0
        dist_sums: dict[int, float] = defaultdict(float)
        ci = cols[i]
        for j in range(n):
            if j == i:
                continue
            cj = cols[j]
            dist_sums[clusters[j]] += math.sqrt(
                sum((a - b) * (a - b) for a, b in zip(ci, cj))
            )
        a = dist_sums[own] / (sizes[own] - 1)
        b = min(dist_sums[c] / sizes[c] for c in sizes if c != own)
        denom = max(a, b)
        if denom > 0.0:
            total += (b - a) / denom
    return total / n
