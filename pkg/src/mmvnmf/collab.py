"""Collaborative multi-modal multi-view factorization.

Each view keeps its own NMF model; views exchange partition information in
two ways.  Within a modality, a pairwise disagreement term weights the
partition difference by the view's point-prototype similarity matrix:

    C(v, v') = || (G_v - G_v') o D_v ||_F^2,   D_v = F_v^T X_v

Across modalities, disagreement is projected through the view's prototypes:

    O(v, q) = || F_v (G_v - G_q) ||_F^2

The joint objective adds these terms, weighted per pair, to every view's
local reconstruction error.  Pair weights are the closed-form optimum of
the constrained problem (each view's weights sum to one): a pair's weight
is its squared term value divided by the row's sum of squares.

Minimization alternates multiplicative updates per view, with distant
partitions frozen at the round's start (block-coordinate view); the update
ratio places the gradient's negative terms over its positive terms, which
preserves non-negativity.
"""

import time
from dataclasses import dataclass, field
from collections.abc import Sequence

from .matrix import (
    DEFAULT_EPS,
    Matrix,
    ShapeError,
    add,
    frobenius_sq,
    hadamard,
    matmul,
    safe_divide,
    scale,
    sub,
    transpose,
)
from .nmf import ConfigError, FactorPair, NmfConfig, local_objective, run_local_nmf

__all__ = [
    "TreeError",
    "WeightError",
    "ViewId",
    "ViewData",
    "ModalityTree",
    "CollaborationWeights",
    "ExperimentTrace",
    "distance_matrix",
    "multiview_term",
    "multimodal_term",
    "squared_share",
    "within_modality_weights",
    "cross_modality_weights",
    "collaboration_weights",
    "total_objective",
    "gradient_split_partition",
    "gradient_split_prototypes",
    "collaborative_step",
    "run_collaborative_nmf",
]


class TreeError(ValueError):
    """Inconsistent experiment structure."""


class WeightError(LookupError):
    """A collaboration pair present in the tree has no weight entry."""


@dataclass(frozen=True, order=True)
class ViewId:
    modality: int
    view: int

    def __str__(self) -> str:
        return f"({self.modality}, {self.view})"


@dataclass
class ViewData:
    """One view: its data matrix and, once fitted, its factors."""

    x: Matrix
    factors: FactorPair | None = None


class ModalityTree:
    """P modalities, each a list of views over the same N objects.

    All views share the object count N and the cluster count K; feature
    dimensions may differ per view.
    """

    def __init__(self, modalities: Sequence[Sequence[ViewData]], k: int):
        if k < 1:
            raise TreeError(f"k must be >= 1, got {k}")
        if not modalities or any(not views for views in modalities):
            raise TreeError("every modality needs at least one view")
        self.modalities: list[list[ViewData]] = [list(views) for views in modalities]
        self.k = k
        self.n = self.modalities[0][0].x.cols
        for vid, vd in self.views():
            if vd.x.cols != self.n:
                raise TreeError(
                    f"view {vid} has {vd.x.cols} objects, expected {self.n} "
                    "(all views must describe the same objects)"
                )
            if vd.factors is not None:
                self._check_factors(vid, vd.x, vd.factors)

    @classmethod
    def from_matrices(cls, matrices: Sequence[Sequence[Matrix]], k: int) -> "ModalityTree":
        return cls([[ViewData(x) for x in views] for views in matrices], k)

    def _check_factors(self, vid: ViewId | None, x: Matrix, fp: FactorPair) -> None:
        if fp.k != self.k:
            raise TreeError(f"view {vid} factors use k={fp.k}, tree has k={self.k}")
        if fp.prototypes.rows != x.rows or fp.partition.cols != x.cols:
            raise TreeError(
                f"view {vid} factors {fp.prototypes.shape}x{fp.partition.shape} "
                f"do not match data {x.shape}"
            )

    @property
    def n_modalities(self) -> int:
        return len(self.modalities)

    def total_views(self) -> int:
        return sum(len(views) for views in self.modalities)

    def views(self):
        """Iterate ``(ViewId, ViewData)`` in (modality, view) order."""
        for p, views in enumerate(self.modalities):
            for v, vd in enumerate(views):
                yield ViewId(p, v), vd

    def view(self, vid: ViewId) -> ViewData:
        try:
            return self.modalities[vid.modality][vid.view]
        except IndexError:
            raise TreeError(f"no view {vid} in tree") from None

    def factors(self, vid: ViewId) -> FactorPair:
        fp = self.view(vid).factors
        if fp is None:
            raise TreeError(f"view {vid} has no factors yet (run the local phase first)")
        return fp

    def set_factors(self, vid: ViewId, fp: FactorPair) -> None:
        vd = self.view(vid)
        self._check_factors(vid, vd.x, fp)
        vd.factors = fp


@dataclass(frozen=True)
class CollaborationWeights:
    """Pair weights: ``within`` for same-modality pairs, ``across`` for
    cross-modality pairs.  Keys are (view, partner) ViewId pairs."""

    within: dict[tuple[ViewId, ViewId], float]
    across: dict[tuple[ViewId, ViewId], float]


def distance_matrix(x: Matrix, f: Matrix) -> Matrix:
    """Point-prototype similarities ``D = F^T X`` (K x N, non-negative)."""
    if f.rows != x.rows:
        raise ShapeError("distance_matrix", x, f)
    return matmul(transpose(f), x)


def multiview_term(g: Matrix, g_other: Matrix, d: Matrix) -> float:
    """Same-modality disagreement ``||(G - G') o D||_F^2``.

    Exactly zero when the partitions agree.
    """
    return frobenius_sq(hadamard(sub(g, g_other), d))


def multimodal_term(f: Matrix, g: Matrix, g_distant: Matrix) -> float:
    """Cross-modality disagreement ``||F (G - G_q)||_F^2``.

    Exactly zero when the partitions agree.
    """
    return frobenius_sq(matmul(f, sub(g, g_distant)))


def squared_share(values: Sequence[float]) -> list[float]:
    """Normalized squared magnitudes: ``v_i^2 / sum_j v_j^2``.

    This is the closed-form optimum of the per-view weight subproblem under
    the sum-to-one constraint.  A degenerate all-zero row (every partner
    already agrees) falls back to uniform weights.
    """
    sq = [v * v for v in values]
    total = sum(sq)
    if total == 0.0:
        return [1.0 / len(sq)] * len(sq) if sq else []
    return [v / total for v in sq]


def _same_modality_partners(tree: ModalityTree, vid: ViewId) -> list[ViewId]:
    return [
        ViewId(vid.modality, v)
        for v in range(len(tree.modalities[vid.modality]))
        if v != vid.view
    ]


def _cross_modality_partners(tree: ModalityTree, vid: ViewId) -> list[ViewId]:
    return [
        ViewId(p, v)
        for p in range(tree.n_modalities)
        if p != vid.modality
        for v in range(len(tree.modalities[p]))
    ]


def within_modality_weights(tree: ModalityTree) -> dict[tuple[ViewId, ViewId], float]:
    """Optimized same-modality weights; each view's row sums to one."""
    weights: dict[tuple[ViewId, ViewId], float] = {}
    for vid, vd in tree.views():
        partners = _same_modality_partners(tree, vid)
        if not partners:
            continue
        fp = tree.factors(vid)
        d = distance_matrix(vd.x, fp.prototypes)
        terms = [multiview_term(fp.partition, tree.factors(pid).partition, d) for pid in partners]
        for pid, w in zip(partners, squared_share(terms)):
            weights[(vid, pid)] = w
    return weights


def cross_modality_weights(tree: ModalityTree) -> dict[tuple[ViewId, ViewId], float]:
    """Optimized cross-modality weights; each view's row sums to one."""
    weights: dict[tuple[ViewId, ViewId], float] = {}
    if tree.n_modalities < 2:
        return weights
    for vid, _ in tree.views():
        partners = _cross_modality_partners(tree, vid)
        fp = tree.factors(vid)
        terms = [
            multimodal_term(fp.prototypes, fp.partition, tree.factors(qid).partition)
            for qid in partners
        ]
        for qid, w in zip(partners, squared_share(terms)):
            weights[(vid, qid)] = w
    return weights


def collaboration_weights(tree: ModalityTree) -> CollaborationWeights:
    return CollaborationWeights(
        within=within_modality_weights(tree), across=cross_modality_weights(tree)
    )


def _pair_weight(table: dict[tuple[ViewId, ViewId], float], vid: ViewId, pid: ViewId) -> float:
    try:
        return table[(vid, pid)]
    except KeyError:
        raise WeightError(f"no weight for pair {vid} -> {pid}") from None


def total_objective(tree: ModalityTree, weights: CollaborationWeights) -> float:
    """Joint objective: local errors plus weighted collaboration terms."""
    j = 0.0
    for vid, vd in tree.views():
        fp = tree.factors(vid)
        j += local_objective(vd.x, fp)
        partners = _same_modality_partners(tree, vid)
        if partners:
            d = distance_matrix(vd.x, fp.prototypes)
            for pid in partners:
                w = _pair_weight(weights.within, vid, pid)
                j += w * multiview_term(fp.partition, tree.factors(pid).partition, d)
        for qid in _cross_modality_partners(tree, vid):
            w = _pair_weight(weights.across, vid, qid)
            j += w * multimodal_term(fp.prototypes, fp.partition, tree.factors(qid).partition)
    return j


def _gather_partners(
    tree: ModalityTree, vid: ViewId, weights: CollaborationWeights
) -> tuple[list[tuple[float, Matrix]], list[tuple[float, Matrix]]]:
    same = [
        (_pair_weight(weights.within, vid, pid), tree.factors(pid).partition)
        for pid in _same_modality_partners(tree, vid)
    ]
    cross = [
        (_pair_weight(weights.across, vid, qid), tree.factors(qid).partition)
        for qid in _cross_modality_partners(tree, vid)
    ]
    return same, cross


def _weighted_sum(shape_like: Matrix, pairs: list[tuple[float, Matrix]]) -> Matrix:
    acc = Matrix.zeros(shape_like.rows, shape_like.cols)
    for w, m in pairs:
        acc = add(acc, scale(m, w))
    return acc


def _split_partition(
    x: Matrix,
    f: Matrix,
    g: Matrix,
    same: list[tuple[float, Matrix]],
    cross: list[tuple[float, Matrix]],
) -> tuple[Matrix, Matrix]:
    # Gradient of the view's share wrt G, halved and split by sign:
    #   pos = FtFG + sum_b b (G o D o D) + sum_c c FtFG
    #   neg = FtX  + sum_b b (G' o D o D) + sum_c c FtF G_q
    # Both sides accumulate their partner sums through the same loop so the
    # contributions cancel bitwise when every partner agrees with G.
    ft = transpose(f)
    ftf = matmul(ft, f)
    ftfg = matmul(ftf, g)
    ftx = matmul(ft, x)
    pos, neg = ftfg, ftx
    if same:
        d = ftx  # the similarity matrix is exactly FtX
        dd = hadamard(d, d)
        own = _weighted_sum(g, [(w, g) for w, _ in same])
        other = _weighted_sum(g, same)
        pos = add(pos, hadamard(own, dd))
        neg = add(neg, hadamard(other, dd))
    if cross:
        own = _weighted_sum(g, [(w, g) for w, _ in cross])
        other = _weighted_sum(g, cross)
        pos = add(pos, matmul(ftf, own))
        neg = add(neg, matmul(ftf, other))
    return pos, neg


def _split_prototypes(
    x: Matrix,
    f: Matrix,
    g: Matrix,
    same: list[tuple[float, Matrix]],
    cross: list[tuple[float, Matrix]],
) -> tuple[Matrix, Matrix]:
    # Gradient of the view's share wrt F, halved and split by sign:
    #   pos = FGGt + X (sum_b b (W o W) o D)t + F (sum_c c (GGt + G_q G_qt))
    #   neg = XGt  + F (sum_c c (G G_qt + G_q Gt))
    # with W = G - G'.  The same-modality part enters only the positive side
    # because D = FtX depends on F while W is non-negative squared.
    gt = transpose(g)
    ggt = matmul(g, gt)
    pos = matmul(f, ggt)
    neg = matmul(x, gt)
    if same:
        d = matmul(transpose(f), x)
        acc = Matrix.zeros(g.rows, g.cols)
        for w, g_other in same:
            diff = sub(g, g_other)
            acc = add(acc, scale(hadamard(diff, diff), w))
        pos = add(pos, matmul(x, transpose(hadamard(acc, d))))
    if cross:
        k = g.rows
        pos_kk = Matrix.zeros(k, k)
        neg_kk = Matrix.zeros(k, k)
        for w, g_q in cross:
            gqt = transpose(g_q)
            pos_kk = add(pos_kk, scale(ggt, w))
            pos_kk = add(pos_kk, scale(matmul(g_q, gqt), w))
            neg_kk = add(neg_kk, scale(matmul(g, gqt), w))
            neg_kk = add(neg_kk, scale(matmul(g_q, gt), w))
        pos = add(pos, matmul(f, pos_kk))
        neg = add(neg, matmul(f, neg_kk))
    return pos, neg


def gradient_split_partition(
    vid: ViewId, tree: ModalityTree, weights: CollaborationWeights
) -> tuple[Matrix, Matrix]:
    """Positive/negative split of the partition gradient (halved).

    ``2 * (pos - neg)`` equals the gradient of the view's share of the joint
    objective wrt its partition, with distant partitions held constant.
    """
    vd = tree.view(vid)
    fp = tree.factors(vid)
    same, cross = _gather_partners(tree, vid, weights)
    return _split_partition(vd.x, fp.prototypes, fp.partition, same, cross)


def gradient_split_prototypes(
    vid: ViewId, tree: ModalityTree, weights: CollaborationWeights
) -> tuple[Matrix, Matrix]:
    """Positive/negative split of the prototype gradient (halved)."""
    vd = tree.view(vid)
    fp = tree.factors(vid)
    same, cross = _gather_partners(tree, vid, weights)
    return _split_prototypes(vd.x, fp.prototypes, fp.partition, same, cross)


def collaborative_step(
    vid: ViewId,
    tree: ModalityTree,
    weights: CollaborationWeights,
    eps: float = DEFAULT_EPS,
) -> FactorPair:
    """One multiplicative update of a view against the tree snapshot.

    Partition first, then prototypes with the split recomputed at the
    updated partition.  Distant partitions come from ``tree`` unchanged, so
    calling this for every view against the same tree realizes one
    synchronous collaboration round.
    """
    vd = tree.view(vid)
    fp = tree.factors(vid)
    same, cross = _gather_partners(tree, vid, weights)
    x, f = vd.x, fp.prototypes
    pos, neg = _split_partition(x, f, fp.partition, same, cross)
    g = hadamard(fp.partition, safe_divide(neg, pos, eps))
    pos, neg = _split_prototypes(x, f, g, same, cross)
    f = hadamard(f, safe_divide(neg, pos, eps))
    return FactorPair(f, g)


@dataclass
class ExperimentTrace:
    """Record of one collaborative run.

    ``objective`` holds the joint objective before the first round and after
    each round; ``view_objectives`` the per-view reconstruction errors on the
    same schedule.  ``local_factors`` snapshots every view's factors at the
    end of the local phase, before any collaboration.
    """

    local_traces: dict[ViewId, list[float]] = field(default_factory=dict)
    local_factors: dict[ViewId, FactorPair] = field(default_factory=dict)
    objective: list[float] = field(default_factory=list)
    view_objectives: dict[ViewId, list[float]] = field(default_factory=dict)
    initial_weights: CollaborationWeights | None = None
    final_weights: CollaborationWeights | None = None
    rounds: int = 0
    wall_clock_s: float = 0.0


def _zero_across(weights: CollaborationWeights) -> CollaborationWeights:
    return CollaborationWeights(
        within=weights.within, across={pair: 0.0 for pair in weights.across}
    )


def run_collaborative_nmf(
    tree: ModalityTree,
    cfg: NmfConfig,
    refresh_weights: bool = False,
    collaborate: bool = True,
    cross_modality: bool = True,
) -> tuple[ModalityTree, ExperimentTrace]:
    """Full pipeline: local phase, weight optimization, collaboration rounds.

    Local phase: every view without preset factors is fitted independently
    with ``run_local_nmf`` (views sharing data and seed produce identical
    fits).  Pair weights are then computed once from the local results, and
    each round applies ``collaborative_step`` to every view against a frozen
    snapshot, until the joint objective's relative change drops below
    ``cfg.rel_tol`` or ``cfg.max_iter`` rounds have run.

    ``refresh_weights`` recomputes the pair weights after every round.
    ``collaborate=False`` stops after the local phase; ``cross_modality=False``
    forces all cross-modality weights to zero (within-modality collaboration
    only).  With fewer than two views there is nothing to exchange and the
    result is identical to the local phase.
    """
    if cfg.k != tree.k:
        raise ConfigError(f"config k={cfg.k} does not match tree k={tree.k}")
    t0 = time.perf_counter()
    trace = ExperimentTrace()
    for vid, vd in tree.views():
        if vd.factors is None:
            fp, local_trace = run_local_nmf(vd.x, cfg)
            vd.factors = fp
        else:
            local_trace = [local_objective(vd.x, vd.factors)]
        trace.local_traces[vid] = local_trace
        trace.local_factors[vid] = vd.factors

    if not collaborate or tree.total_views() < 2:
        trace.wall_clock_s = time.perf_counter() - t0
        return tree, trace

    weights = collaboration_weights(tree)
    if not cross_modality:
        weights = _zero_across(weights)
    trace.initial_weights = weights

    def record() -> float:
        j = total_objective(tree, weights)
        trace.objective.append(j)
        for vid, vd in tree.views():
            trace.view_objectives.setdefault(vid, []).append(
                local_objective(vd.x, tree.factors(vid))
            )
        return j

    prev = record()
    for _ in range(cfg.max_iter):
        updated = [(vid, collaborative_step(vid, tree, weights, cfg.eps)) for vid, _ in tree.views()]
        for vid, fp in updated:
            tree.set_factors(vid, fp)
        if refresh_weights:
            weights = collaboration_weights(tree)
            if not cross_modality:
                weights = _zero_across(weights)
        trace.rounds += 1
        obj = record()
        if abs(obj - prev) / max(prev, cfg.eps) < cfg.rel_tol:
            break
        prev = obj
    trace.final_weights = weights
    trace.wall_clock_s = time.perf_counter() - t0
    return tree, trace
