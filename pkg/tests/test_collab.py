import random

import pytest

from mmvnmf import (
    CollaborationWeights,
    FactorPair,
    Matrix,
    ModalityTree,
    NmfConfig,
    TreeError,
    ViewId,
    WeightError,
    collaboration_weights,
    collaborative_step,
    cross_modality_weights,
    distance_matrix,
    gradient_split_partition,
    gradient_split_prototypes,
    hadamard,
    lee_seung_step,
    local_objective,
    matmul,
    multimodal_term,
    multiview_term,
    run_collaborative_nmf,
    run_local_nmf,
    squared_share,
    sub,
    total_objective,
    transpose,
    within_modality_weights,
)
from _util import bits, max_abs_diff, rand_matrix, random_tree


def one_by_one_tree(partitions: list[list[float]]) -> ModalityTree:
    """Tree of 1x1 views (x = f = 1) whose partitions are given scalars;
    collaboration terms reduce to squared partition differences."""
    mods = []
    for mod_parts in partitions:
        views = []
        for _ in mod_parts:
            views.append(Matrix.from_rows([[1.0]]))
        mods.append(views)
    tree = ModalityTree.from_matrices(mods, 1)
    for (vid, _), value in zip(tree.views(), [v for mod in partitions for v in mod]):
        tree.set_factors(
            vid, FactorPair(Matrix.from_rows([[1.0]]), Matrix.from_rows([[value]]))
        )
    return tree


class TestTree:
    def test_object_count_must_match(self):
        with pytest.raises(TreeError, match="objects"):
            ModalityTree.from_matrices(
                [[Matrix.zeros(3, 5)], [Matrix.zeros(2, 6)]], k=2
            )

    def test_factor_shape_checked(self):
        tree = ModalityTree.from_matrices([[Matrix.zeros(3, 5)]], k=2)
        with pytest.raises(TreeError, match="k="):
            tree.set_factors(
                ViewId(0, 0), FactorPair(Matrix.zeros(3, 3), Matrix.zeros(3, 5))
            )

    def test_missing_factors_reported(self):
        tree = ModalityTree.from_matrices([[Matrix.zeros(3, 5)]], k=2)
        with pytest.raises(TreeError, match="no factors"):
            tree.factors(ViewId(0, 0))

    def test_empty_modality_rejected(self):
        with pytest.raises(TreeError):
            ModalityTree([[], []], k=1)


class TestDistanceMatrix:
    def test_zero_prototypes(self):
        x = rand_matrix(random.Random(0), 4, 6)
        assert distance_matrix(x, Matrix.zeros(4, 2)) == Matrix.zeros(2, 6)

    def test_orthonormal_case(self):
        eye = Matrix.from_rows([[1, 0, 0], [0, 1, 0], [0, 0, 1]])
        d = distance_matrix(eye, eye)
        assert d == eye

    def test_matches_dot_product_oracle(self):
        rng = random.Random(1)
        x = rand_matrix(rng, 5, 7)
        f = rand_matrix(rng, 5, 3)
        d = distance_matrix(x, f)
        assert d.shape == (3, 7)
        for k in range(3):
            for n in range(7):
                want = sum(f.at(m, k) * x.at(m, n) for m in range(5))
                assert d.at(k, n) == pytest.approx(want, rel=1e-12)
        assert d.min() >= 0.0


class TestCollaborationTerms:
    def test_agreement_is_exactly_zero(self):
        rng = random.Random(2)
        g = rand_matrix(rng, 3, 8)
        d = rand_matrix(rng, 3, 8)
        f = rand_matrix(rng, 5, 3)
        assert multiview_term(g, g.copy(), d) == 0.0
        assert multimodal_term(f, g, g.copy()) == 0.0

    def test_zero_weighting_kills_terms(self):
        rng = random.Random(3)
        g1, g2 = rand_matrix(rng, 2, 4), rand_matrix(rng, 2, 4)
        assert multiview_term(g1, g2, Matrix.zeros(2, 4)) == 0.0
        assert multimodal_term(Matrix.zeros(3, 2), g1, g2) == 0.0

    def test_multiview_hand_case(self):
        g = Matrix.from_rows([[1.0, 0.0]])
        g_other = Matrix.from_rows([[0.0, 1.0]])
        d = Matrix.from_rows([[2.0, 3.0]])
        # (1*2)^2 + (-1*3)^2
        assert multiview_term(g, g_other, d) == 13.0
        assert multiview_term(g, g_other, d) == pytest.approx(
            sum(v * v for v in hadamard(sub(g, g_other), d).data), rel=1e-15
        )

    def test_multimodal_hand_case(self):
        f = Matrix.from_rows([[1.0], [1.0]])
        g = Matrix.from_rows([[1.0, 0.0]])
        g_q = Matrix.from_rows([[0.0, 0.0]])
        assert multimodal_term(f, g, g_q) == 2.0


class TestWeights:
    def test_squared_share_hand_cases(self):
        assert squared_share([3.0, 4.0]) == [9 / 25, 16 / 25]
        assert squared_share([1.0, 2.0, 2.0]) == [1 / 9, 4 / 9, 4 / 9]

    def test_squared_share_fallbacks(self):
        assert squared_share([0.0, 0.0]) == [0.5, 0.5]
        assert squared_share([0.0, 0.0, 0.0]) == [1 / 3, 1 / 3, 1 / 3]
        assert squared_share([]) == []

    def test_equal_terms_split_evenly(self):
        assert squared_share([7.25, 7.25]) == [0.5, 0.5]

    def test_within_weights_engineered_tree(self):
        # partitions 4, 1, 0 with unit similarities: disagreements 9 and 16
        tree = one_by_one_tree([[4.0, 1.0, 0.0]])
        w = within_modality_weights(tree)
        v0, v1, v2 = ViewId(0, 0), ViewId(0, 1), ViewId(0, 2)
        assert w[(v0, v1)] == 81 / 337
        assert w[(v0, v2)] == 256 / 337

    def test_cross_weights_engineered_tree(self):
        # disagreements 1, 2, 2 across modalities: squared terms 1, 4, 4
        tree = one_by_one_tree([[2.0], [1.0, 0.0, 0.0]])
        w = cross_modality_weights(tree)
        v = ViewId(0, 0)
        assert w[(v, ViewId(1, 0))] == 1 / 33
        assert w[(v, ViewId(1, 1))] == 16 / 33
        assert w[(v, ViewId(1, 2))] == 16 / 33

    def test_identical_partitions_fall_back_to_uniform(self):
        tree = one_by_one_tree([[1.5, 1.5, 1.5], [1.5]])
        w = collaboration_weights(tree)
        assert w.within[(ViewId(0, 0), ViewId(0, 1))] == 0.5
        assert w.within[(ViewId(0, 0), ViewId(0, 2))] == 0.5
        assert w.across[(ViewId(1, 0), ViewId(0, 0))] == 1 / 3

    @pytest.mark.parametrize("shape", [[2, 2], [3, 1], [2, 2, 1]])
    def test_rows_sum_to_one(self, shape):
        tree = random_tree(random.Random(sum(shape)), shape, k=2, n=7)
        w = collaboration_weights(tree)
        rows: dict[ViewId, float] = {}
        for (a, _), value in w.within.items():
            rows[a] = rows.get(a, 0.0) + value
        for total in rows.values():
            assert abs(total - 1.0) <= 1e-9
        rows.clear()
        for (a, _), value in w.across.items():
            rows[a] = rows.get(a, 0.0) + value
        for total in rows.values():
            assert abs(total - 1.0) <= 1e-9

    def test_single_modality_has_no_cross_weights(self):
        tree = random_tree(random.Random(4), [3], k=2)
        assert cross_modality_weights(tree) == {}


class TestTotalObjective:
    def test_single_view_equals_local(self):
        tree = random_tree(random.Random(5), [1], k=2)
        vd = tree.view(ViewId(0, 0))
        weights = CollaborationWeights(within={}, across={})
        assert total_objective(tree, weights) == local_objective(vd.x, tree.factors(ViewId(0, 0)))

    def test_identical_partitions_reduce_to_local_sum(self):
        rng = random.Random(6)
        g = rand_matrix(rng, 2, 6, 0.1, 1.0)
        mods = [[rand_matrix(rng, 4, 6), rand_matrix(rng, 5, 6)], [rand_matrix(rng, 3, 6)]]
        tree = ModalityTree.from_matrices(mods, 2)
        for vid, vd in tree.views():
            tree.set_factors(vid, FactorPair(rand_matrix(rng, vd.x.rows, 2, 0.1, 1.0), g.copy()))
        w = collaboration_weights(tree)
        expected = 0.0
        for vid, vd in tree.views():
            expected += local_objective(vd.x, tree.factors(vid))
        assert total_objective(tree, w) == expected

    def test_matches_termwise_oracle(self):
        tree = random_tree(random.Random(7), [2, 2], k=2, n=6)
        w = collaboration_weights(tree)
        expected = 0.0
        for vid, vd in tree.views():
            fp = tree.factors(vid)
            expected += local_objective(vd.x, fp)
            d = distance_matrix(vd.x, fp.prototypes)
            for v2 in range(2):
                pid = ViewId(vid.modality, v2)
                if pid != vid:
                    expected += w.within[(vid, pid)] * multiview_term(
                        fp.partition, tree.factors(pid).partition, d
                    )
            for p2 in range(2):
                if p2 == vid.modality:
                    continue
                for v2 in range(2):
                    qid = ViewId(p2, v2)
                    expected += w.across[(vid, qid)] * multimodal_term(
                        fp.prototypes, fp.partition, tree.factors(qid).partition
                    )
        assert total_objective(tree, w) == pytest.approx(expected, rel=1e-12)

    def test_missing_weight_is_structured_error(self):
        tree = random_tree(random.Random(8), [2], k=2)
        with pytest.raises(WeightError, match=r"\(0, 0\) -> \(0, 1\)"):
            total_objective(tree, CollaborationWeights(within={}, across={}))


def isolating_weights(tree, vid, rng=None):
    """Full weights for ``vid``'s row, zero for every other view's row, so
    the joint objective couples to vid's factors only through vid's share."""
    w = collaboration_weights(tree)
    return CollaborationWeights(
        within={pair: (val if pair[0] == vid else 0.0) for pair, val in w.within.items()},
        across={pair: (val if pair[0] == vid else 0.0) for pair, val in w.across.items()},
    )


def fd_gradient(tree, weights, vid, wrt: str, h: float = 1e-6) -> list[float]:
    """Central finite differences of the joint objective wrt one factor."""
    fp = tree.factors(vid)
    base = fp.partition if wrt == "partition" else fp.prototypes
    out = []
    for idx in range(base.size):
        vals = list(base.data)
        vals[idx] = base.data[idx] + h
        perturbed = Matrix(base.rows, base.cols, vals)
        if wrt == "partition":
            tree.set_factors(vid, FactorPair(fp.prototypes, perturbed))
        else:
            tree.set_factors(vid, FactorPair(perturbed, fp.partition))
        j_plus = total_objective(tree, weights)
        vals[idx] = base.data[idx] - h
        perturbed = Matrix(base.rows, base.cols, vals)
        if wrt == "partition":
            tree.set_factors(vid, FactorPair(fp.prototypes, perturbed))
        else:
            tree.set_factors(vid, FactorPair(perturbed, fp.partition))
        j_minus = total_objective(tree, weights)
        out.append((j_plus - j_minus) / (2.0 * h))
    tree.set_factors(vid, fp)
    return out


def assert_gradient_matches(split, fd, rel=1e-5, abs_tol=1e-8):
    pos, neg = split
    for analytic_half, numeric in zip(sub(pos, neg).data, fd):
        analytic = 2.0 * analytic_half
        if abs(analytic) < abs_tol:
            assert abs(numeric - analytic) < abs_tol
        else:
            assert abs(numeric - analytic) / abs(analytic) < rel


class TestGradientSplits:
    def test_reduces_to_plain_update_split_without_partners(self):
        tree = random_tree(random.Random(9), [1], k=2, n=6)
        vid = ViewId(0, 0)
        fp = tree.factors(vid)
        x, f, g = tree.view(vid).x, fp.prototypes, fp.partition
        w = CollaborationWeights(within={}, across={})
        pos, neg = gradient_split_partition(vid, tree, w)
        ft = transpose(f)
        assert bits(pos) == bits(matmul(matmul(ft, f), g))
        assert bits(neg) == bits(matmul(ft, x))
        pos, neg = gradient_split_prototypes(vid, tree, w)
        gt = transpose(g)
        assert bits(pos) == bits(matmul(f, matmul(g, gt)))
        assert bits(neg) == bits(matmul(x, gt))

    def test_zero_weights_reduce_bitwise(self):
        tree = random_tree(random.Random(10), [2, 2], k=2, n=6)
        vid = ViewId(0, 1)
        fp = tree.factors(vid)
        x = tree.view(vid).x
        zero = CollaborationWeights(
            within={pair: 0.0 for pair in collaboration_weights(tree).within},
            across={pair: 0.0 for pair in collaboration_weights(tree).across},
        )
        ft = transpose(fp.prototypes)
        pos, neg = gradient_split_partition(vid, tree, zero)
        assert bits(pos) == bits(matmul(matmul(ft, fp.prototypes), fp.partition))
        assert bits(neg) == bits(matmul(ft, x))

    def test_agreeing_partners_cancel(self):
        rng = random.Random(11)
        g = rand_matrix(rng, 2, 6, 0.1, 1.0)
        mods = [[rand_matrix(rng, 4, 6), rand_matrix(rng, 5, 6)], [rand_matrix(rng, 3, 6)]]
        tree = ModalityTree.from_matrices(mods, 2)
        for vid, vd in tree.views():
            tree.set_factors(vid, FactorPair(rand_matrix(rng, vd.x.rows, 2, 0.1, 1.0), g.copy()))
        w = collaboration_weights(tree)
        vid = ViewId(0, 0)
        fp = tree.factors(vid)
        x, f = tree.view(vid).x, fp.prototypes
        pos, neg = gradient_split_partition(vid, tree, w)
        ft = transpose(f)
        plain = sub(matmul(matmul(ft, f), g), matmul(ft, x))
        assert max_abs_diff(sub(pos, neg), plain) < 1e-12
        pos, neg = gradient_split_prototypes(vid, tree, w)
        gt = transpose(g)
        plain = sub(matmul(f, matmul(g, gt)), matmul(x, gt))
        assert max_abs_diff(sub(pos, neg), plain) < 1e-12

    def test_partition_gradient_matches_finite_differences(self):
        tree = random_tree(random.Random(12), [2, 2], k=2, n=6, dims=(5, 5))
        vid = ViewId(1, 0)
        w = isolating_weights(tree, vid)
        fd = fd_gradient(tree, w, vid, "partition")
        assert_gradient_matches(gradient_split_partition(vid, tree, w), fd)

    def test_prototype_gradient_matches_finite_differences_full_weights(self):
        # Cross terms never touch a distant view's prototypes, so the
        # prototype split can be checked against the full joint objective.
        tree = random_tree(random.Random(13), [2, 2], k=2, n=6, dims=(5, 5))
        vid = ViewId(0, 1)
        w = collaboration_weights(tree)
        fd = fd_gradient(tree, w, vid, "prototypes")
        assert_gradient_matches(gradient_split_prototypes(vid, tree, w), fd)


class TestCollaborativeStep:
    def test_zero_weights_equal_plain_step_bitwise(self):
        tree = random_tree(random.Random(14), [2, 2], k=2, n=6)
        w = collaboration_weights(tree)
        zero = CollaborationWeights(
            within={pair: 0.0 for pair in w.within},
            across={pair: 0.0 for pair in w.across},
        )
        for vid, vd in tree.views():
            stepped = collaborative_step(vid, tree, zero)
            plain = lee_seung_step(vd.x, tree.factors(vid))
            assert bits(stepped.partition) == bits(plain.partition)
            assert bits(stepped.prototypes) == bits(plain.prototypes)

    def test_agreement_on_exact_factorization_is_fixed_point(self):
        rng = random.Random(15)
        g = rand_matrix(rng, 2, 7, 0.2, 1.0)
        tree_mats = []
        factors = []
        for dims in ([4, 5], [6]):
            views = []
            for m in dims:
                f = rand_matrix(rng, m, 2, 0.2, 1.0)
                views.append(matmul(f, g))
                factors.append(FactorPair(f, g.copy()))
            tree_mats.append(views)
        tree = ModalityTree.from_matrices(tree_mats, 2)
        for (vid, _), fp in zip(tree.views(), factors):
            tree.set_factors(vid, fp)
        w = collaboration_weights(tree)
        for vid, _ in tree.views():
            fp = tree.factors(vid)
            stepped = collaborative_step(vid, tree, w)
            assert max_abs_diff(stepped.partition, fp.partition) < 1e-12
            assert max_abs_diff(stepped.prototypes, fp.prototypes) < 1e-12

    def test_random_step_stays_nonnegative_and_finite(self):
        tree = random_tree(random.Random(16), [2, 2], k=3, n=8, x_range=(0.0, 1.0))
        w = collaboration_weights(tree)
        for vid, _ in tree.views():
            fp = collaborative_step(vid, tree, w)
            assert fp.partition.min() >= 0.0
            assert fp.prototypes.min() >= 0.0
            fp.partition.assert_finite()
            fp.prototypes.assert_finite()


class TestRunCollaborativeNmf:
    def cfg(self, **kw):
        base = dict(k=2, max_iter=60, rel_tol=1e-6, seed=3, restarts=2)
        base.update(kw)
        return NmfConfig(**base)

    def test_single_view_identical_to_local_run(self):
        rng = random.Random(17)
        x = rand_matrix(rng, 6, 9)
        tree = ModalityTree.from_matrices([[x.copy()]], 2)
        cfg = self.cfg()
        tree, trace = run_collaborative_nmf(tree, cfg)
        fp, local_trace = run_local_nmf(x, cfg)
        assert bits(tree.factors(ViewId(0, 0)).partition) == bits(fp.partition)
        assert bits(tree.factors(ViewId(0, 0)).prototypes) == bits(fp.prototypes)
        assert trace.local_traces[ViewId(0, 0)] == local_trace
        assert trace.rounds == 0 and trace.objective == []

    def test_disabled_collaboration_is_bit_identical_to_local(self):
        rng = random.Random(18)
        mats = [[rand_matrix(rng, 5, 8), rand_matrix(rng, 6, 8)], [rand_matrix(rng, 4, 8)]]
        tree = ModalityTree.from_matrices([[x.copy() for x in vs] for vs in mats], 2)
        cfg = self.cfg()
        tree, trace = run_collaborative_nmf(tree, cfg, collaborate=False)
        for (vid, vd), x in zip(tree.views(), [x for vs in mats for x in vs]):
            fp, _ = run_local_nmf(x, cfg)
            assert bits(tree.factors(vid).partition) == bits(fp.partition)
            assert bits(tree.factors(vid).prototypes) == bits(fp.prototypes)
        assert trace.rounds == 0

    def test_identical_views_stay_in_agreement(self):
        rng = random.Random(19)
        x = rand_matrix(rng, 6, 9)
        tree = ModalityTree.from_matrices([[x.copy()], [x.copy()]], 2)
        cfg = self.cfg(rel_tol=1e-8, max_iter=50)
        tree, trace = run_collaborative_nmf(tree, cfg)
        a = tree.factors(ViewId(0, 0))
        b = tree.factors(ViewId(1, 0))
        # identical data and seeds: the views evolve in lockstep, so their
        # partitions agree bitwise and every collaboration term is exactly 0
        assert bits(a.partition) == bits(b.partition)
        assert bits(a.prototypes) == bits(b.prototypes)
        assert multimodal_term(a.prototypes, a.partition, b.partition) == 0.0
        la = trace.local_factors[ViewId(0, 0)]
        assert multimodal_term(
            la.prototypes, la.partition, trace.local_factors[ViewId(1, 0)].partition
        ) == 0.0
        # the joint objective therefore reduces to the sum of local errors
        assert trace.objective[0] == pytest.approx(
            sum(t[-1] for t in trace.local_traces.values()), rel=1e-15
        )

    def test_agreement_fixed_point_leaves_factors_unchanged(self):
        rng = random.Random(20)
        g = rand_matrix(rng, 2, 7, 0.2, 1.0)
        mats, factors = [], []
        for dims in ([4, 5], [6]):
            views = []
            for m in dims:
                f = rand_matrix(rng, m, 2, 0.2, 1.0)
                views.append(matmul(f, g))
                factors.append(FactorPair(f, g.copy()))
            mats.append(views)
        tree = ModalityTree.from_matrices(mats, 2)
        for (vid, _), fp in zip(tree.views(), factors):
            tree.set_factors(vid, fp)
        tree, trace = run_collaborative_nmf(tree, self.cfg())
        for (vid, _), fp in zip(tree.views(), factors):
            assert max_abs_diff(tree.factors(vid).partition, fp.partition) < 1e-12
            assert max_abs_diff(tree.factors(vid).prototypes, fp.prototypes) < 1e-12

    def test_deterministic(self):
        rng = random.Random(21)
        mats = [[rand_matrix(rng, 5, 8), rand_matrix(rng, 6, 8)], [rand_matrix(rng, 4, 8)]]
        results = []
        for _ in range(2):
            tree = ModalityTree.from_matrices([[x.copy() for x in vs] for vs in mats], 2)
            tree, trace = run_collaborative_nmf(tree, self.cfg(max_iter=30))
            results.append(
                (
                    trace.objective,
                    [bits(tree.factors(vid).partition) for vid, _ in tree.views()],
                )
            )
        assert results[0] == results[1]

    @pytest.mark.parametrize("seed", range(5))
    def test_objective_end_at_most_start(self, seed):
        rng = random.Random(300 + seed)
        mats = [[rand_matrix(rng, 5, 8), rand_matrix(rng, 6, 8)], [rand_matrix(rng, 4, 8)]]
        tree = ModalityTree.from_matrices(mats, 2)
        tree, trace = run_collaborative_nmf(tree, self.cfg(seed=seed, max_iter=40))
        assert trace.objective
        assert trace.objective[-1] <= trace.objective[0]

    def test_refresh_weights_keeps_rows_normalized(self):
        rng = random.Random(22)
        mats = [[rand_matrix(rng, 5, 8), rand_matrix(rng, 6, 8)], [rand_matrix(rng, 4, 8)]]
        tree = ModalityTree.from_matrices(mats, 2)
        tree, trace = run_collaborative_nmf(
            tree, self.cfg(max_iter=20), refresh_weights=True
        )
        assert trace.final_weights is not trace.initial_weights
        rows: dict[ViewId, float] = {}
        for (a, _), value in trace.final_weights.across.items():
            rows[a] = rows.get(a, 0.0) + value
        for total in rows.values():
            assert abs(total - 1.0) <= 1e-9
        assert trace.objective[-1] <= trace.objective[0]

    def test_multiview_only_matches_collapsed_tree(self):
        # forcing cross-modality weights to zero must reproduce, bit for bit,
        # a run on the tree with the distant modality removed (round counts
        # pinned by an effectively unreachable rel_tol)
        rng = random.Random(23)
        mats = [[rand_matrix(rng, 5, 8), rand_matrix(rng, 6, 8)], [rand_matrix(rng, 4, 8)]]
        cfg = self.cfg(rel_tol=1e-300, max_iter=25)
        full = ModalityTree.from_matrices([[x.copy() for x in vs] for vs in mats], 2)
        full, _ = run_collaborative_nmf(full, cfg, cross_modality=False)
        collapsed = ModalityTree.from_matrices([[x.copy() for x in mats[0]]], 2)
        collapsed, _ = run_collaborative_nmf(collapsed, cfg)
        for v in range(2):
            a = full.factors(ViewId(0, v))
            b = collapsed.factors(ViewId(0, v))
            assert bits(a.partition) == bits(b.partition)
            assert bits(a.prototypes) == bits(b.prototypes)

    def test_config_k_must_match_tree(self):
        tree = random_tree(random.Random(24), [2], k=2)
        with pytest.raises(Exception, match="k=3 does not match"):
            run_collaborative_nmf(tree, self.cfg(k=3))
