import math
import random

import pytest

from mmvnmf import (
    Matrix,
    ShapeError,
    add,
    column_argmax,
    frobenius_sq,
    hadamard,
    matmul,
    safe_divide,
    scale,
    sub,
    transpose,
)
from _util import rand_matrix


def naive_matmul(a: Matrix, b: Matrix) -> list[list[float]]:
    ra, rb = a.to_rows(), b.to_rows()
    out = [[0.0] * b.cols for _ in range(a.rows)]
    for i in range(a.rows):
        for j in range(b.cols):
            s = 0.0
            for k in range(a.cols):
                s += ra[i][k] * rb[k][j]
            out[i][j] = s
    return out


class TestMatmul:
    def test_identity(self):
        eye = Matrix.from_rows([[1, 0], [0, 1]])
        a = Matrix.from_rows([[1, 2], [3, 4]])
        assert matmul(eye, a).to_rows() == [[1, 2], [3, 4]]

    def test_annihilating_product(self):
        a = Matrix.from_rows([[1, 0], [0, 0]])
        b = Matrix.from_rows([[0, 0], [0, 1]])
        assert matmul(a, b).to_rows() == [[0, 0], [0, 0]]

    def test_matches_triple_loop_oracle(self):
        rng = random.Random(11)
        a = rand_matrix(rng, 3, 4)
        b = rand_matrix(rng, 4, 2)
        got = matmul(a, b).to_rows()
        want = naive_matmul(a, b)
        for gr, wr in zip(got, want):
            for g, w in zip(gr, wr):
                assert g == pytest.approx(w, rel=1e-12)

    def test_oracle_agreement_up_to_16(self):
        rng = random.Random(5)
        for _ in range(10):
            r, inner, c = rng.randint(1, 16), rng.randint(1, 16), rng.randint(1, 16)
            a = rand_matrix(rng, r, inner, -1.0, 1.0)
            b = rand_matrix(rng, inner, c, -1.0, 1.0)
            got = matmul(a, b)
            want = naive_matmul(a, b)
            for i in range(r):
                for j in range(c):
                    assert got.at(i, j) == pytest.approx(want[i][j], rel=1e-12, abs=1e-15)

    def test_dimension_mismatch_names_both_shapes(self):
        a = rand_matrix(random.Random(0), 2, 3)
        b = rand_matrix(random.Random(0), 5, 2)
        with pytest.raises(ShapeError) as err:
            matmul(a, b)
        assert "(2, 3)" in str(err.value) and "(5, 2)" in str(err.value)


class TestHadamard:
    def test_ones_identity(self):
        rng = random.Random(1)
        a = rand_matrix(rng, 3, 3)
        assert hadamard(a, Matrix.full(3, 3, 1.0)) == a

    def test_zeros_annihilate(self):
        a = rand_matrix(random.Random(2), 2, 4)
        assert hadamard(a, Matrix.zeros(2, 4)) == Matrix.zeros(2, 4)

    def test_scalar_like_case(self):
        a = Matrix.from_rows([[1, 2], [3, 4]])
        twos = Matrix.full(2, 2, 2.0)
        assert hadamard(a, twos).to_rows() == [[2, 4], [6, 8]]

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            hadamard(Matrix.zeros(2, 2), Matrix.zeros(2, 3))


class TestSafeDivide:
    def test_eps_floor_engaged(self):
        out = safe_divide(Matrix.from_rows([[1.0]]), Matrix.from_rows([[0.0]]), eps=1e-12)
        assert out.at(0, 0) == 1e12

    def test_equal_operands_give_ones(self):
        a = rand_matrix(random.Random(3), 3, 3, 0.5, 2.0)
        assert safe_divide(a, a) == Matrix.full(3, 3, 1.0)

    def test_plain_division(self):
        out = safe_divide(Matrix.from_rows([[6.0, 8.0]]), Matrix.from_rows([[2.0, 4.0]]), eps=1e-12)
        assert out.to_rows() == [[3.0, 2.0]]

    def test_inverse_of_hadamard_above_eps(self):
        rng = random.Random(4)
        a = rand_matrix(rng, 4, 5)
        b = rand_matrix(rng, 4, 5, 0.1, 2.0)  # all entries > eps
        back = safe_divide(hadamard(a, b), b, eps=1e-12)
        for x, y in zip(back.data, a.data):
            assert x == pytest.approx(y, rel=1e-12, abs=1e-15)

    def test_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            safe_divide(Matrix.zeros(1, 1), Matrix.zeros(1, 1), eps=0.0)


class TestFrobenius:
    def test_zeros(self):
        assert frobenius_sq(Matrix.zeros(3, 4)) == 0.0

    def test_three_four_five(self):
        assert frobenius_sq(Matrix.from_rows([[3.0, 4.0]])) == 25.0

    def test_matches_summation_oracle(self):
        a = rand_matrix(random.Random(6), 5, 5, -2.0, 2.0)
        want = 0.0
        for v in a.data:
            want += v * v
        assert frobenius_sq(a) == pytest.approx(want, rel=1e-15)

    def test_self_difference_is_exactly_zero(self):
        a = rand_matrix(random.Random(7), 6, 3)
        assert frobenius_sq(sub(a, a)) == 0.0


class TestElementwiseAndTranspose:
    def test_add_sub_scale(self):
        a = Matrix.from_rows([[1, 2], [3, 4]])
        b = Matrix.from_rows([[10, 20], [30, 40]])
        assert add(a, b).to_rows() == [[11, 22], [33, 44]]
        assert sub(b, a).to_rows() == [[9, 18], [27, 36]]
        assert scale(a, -2.0).to_rows() == [[-2, -4], [-6, -8]]

    def test_transpose_roundtrip(self):
        a = rand_matrix(random.Random(8), 3, 5)
        assert transpose(transpose(a)) == a
        assert transpose(a).at(2, 1) == a.at(1, 2)

    def test_finite_after_operations(self):
        rng = random.Random(9)
        a = rand_matrix(rng, 4, 4, -10.0, 10.0)
        b = rand_matrix(rng, 4, 4, -10.0, 10.0)
        for m in (matmul(a, b), hadamard(a, b), add(a, b), sub(a, b), scale(a, 3.5),
                  safe_divide(a, b), transpose(a)):
            m.assert_finite()


class TestColumnArgmax:
    def test_picks_max(self):
        g = Matrix.from_rows([[0.1, 0.9], [0.9, 0.1]])
        assert column_argmax(g) == [1, 0]

    def test_tie_goes_to_smallest_index(self):
        g = Matrix.from_rows([[0.5], [0.5]])
        assert column_argmax(g) == [0]

    def test_matches_linear_scan_oracle(self):
        rng = random.Random(10)
        g = rand_matrix(rng, 5, 12)
        want = []
        for j in range(12):
            col = g.column(j)
            best = 0
            for i in range(1, 5):
                if col[i] > col[best]:
                    best = i
            want.append(best)
        assert column_argmax(g) == want


class TestConstruction:
    def test_ragged_rows_rejected(self):
        with pytest.raises(ValueError, match="ragged"):
            Matrix.from_rows([[1, 2], [3]])

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            Matrix.from_rows([[1.0, math.inf]])
        with pytest.raises(ValueError, match="non-finite"):
            Matrix(1, 2, [0.0, math.nan])

    def test_wrong_length_rejected(self):
        with pytest.raises(ValueError):
            Matrix(2, 2, [1.0, 2.0, 3.0])

    def test_accessors(self):
        a = Matrix.from_rows([[1, 2, 3], [4, 5, 6]])
        assert a.shape == (2, 3)
        assert a.row(1) == [4, 5, 6]
        assert a.column(2) == [3, 6]
        assert a.mean() == 3.5
        with pytest.raises(IndexError):
            a.at(2, 0)
        with pytest.raises(IndexError):
            a.at(-1, 0)
