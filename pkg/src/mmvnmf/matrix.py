"""Dense row-major matrix kernel.

Small, self-contained 64-bit kernel providing exactly the operations the
factorization updates need.  Matrices are immutable by convention: every
operation returns a new :class:`Matrix`, which makes them safe to share
across threads and to alias freely inside the update rules.

The elementwise and product loops dispatch to the selected backend
(compiled extension or pure Python, see :mod:`mmvnmf._backend`).
"""

import math
from array import array
from collections.abc import Iterable, Sequence

from ._backend import BACKEND, kernels

__all__ = [
    "BACKEND",
    "DEFAULT_EPS",
    "Matrix",
    "ShapeError",
    "matmul",
    "hadamard",
    "safe_divide",
    "frobenius_sq",
    "transpose",
    "add",
    "sub",
    "scale",
    "column_argmax",
]

#: Default guard for entrywise divisions; override per call via ``eps=``.
DEFAULT_EPS = 1e-12


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible; names both shapes."""

    def __init__(self, op: str, a: "Matrix", b: "Matrix"):
        super().__init__(f"{op}: incompatible shapes {a.shape} and {b.shape}")
        self.op = op
        self.shapes = (a.shape, b.shape)


class Matrix:
    """Dense row-major matrix of finite 64-bit floats."""

    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows: int, cols: int, values: Iterable[float] | None = None):
        if rows < 1 or cols < 1:
            raise ValueError(f"matrix dimensions must be positive, got {rows}x{cols}")
        self.rows = rows
        self.cols = cols
        if values is None:
            self.data = array("d", bytes(8 * rows * cols))
        else:
            self.data = array("d", values)
            if len(self.data) != rows * cols:
                raise ValueError(
                    f"expected {rows * cols} values for a {rows}x{cols} matrix, "
                    f"got {len(self.data)}"
                )
            self.assert_finite()

    @classmethod
    def _wrap(cls, rows: int, cols: int, data: array) -> "Matrix":
        # Fast internal constructor: takes ownership of data, skips checks.
        m = object.__new__(cls)
        m.rows = rows
        m.cols = cols
        m.data = data
        return m

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "Matrix":
        if not rows:
            raise ValueError("matrix needs at least one row")
        width = len(rows[0])
        flat = array("d")
        for i, row in enumerate(rows):
            if len(row) != width:
                raise ValueError(f"ragged rows: row 0 has {width} entries, row {i} has {len(row)}")
            flat.extend(row)
        m = cls._wrap(len(rows), width, flat)
        if width == 0:
            raise ValueError("matrix needs at least one column")
        m.assert_finite()
        return m

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Matrix":
        return cls(rows, cols)

    @classmethod
    def full(cls, rows: int, cols: int, value: float) -> "Matrix":
        return cls(rows, cols, [float(value)] * (rows * cols))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def at(self, i: int, j: int) -> float:
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(f"index ({i}, {j}) out of range for {self.rows}x{self.cols}")
        return self.data[i * self.cols + j]

    def row(self, i: int) -> list[float]:
        if not 0 <= i < self.rows:
            raise IndexError(f"row {i} out of range for {self.rows}x{self.cols}")
        return list(self.data[i * self.cols : (i + 1) * self.cols])

    def column(self, j: int) -> list[float]:
        if not 0 <= j < self.cols:
            raise IndexError(f"column {j} out of range for {self.rows}x{self.cols}")
        return [self.data[i * self.cols + j] for i in range(self.rows)]

    def to_rows(self) -> list[list[float]]:
        c = self.cols
        return [list(self.data[i * c : (i + 1) * c]) for i in range(self.rows)]

    def copy(self) -> "Matrix":
        return Matrix._wrap(self.rows, self.cols, array("d", self.data))

    def mean(self) -> float:
        return math.fsum(self.data) / self.size

    def min(self) -> float:
        return min(self.data)

    def max(self) -> float:
        return max(self.data)

    def is_nonnegative(self) -> bool:
        return min(self.data) >= 0.0

    def assert_finite(self) -> None:
        for i, v in enumerate(self.data):
            if not math.isfinite(v):
                raise ValueError(
                    f"non-finite entry {v!r} at ({i // self.cols}, {i % self.cols})"
                )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Matrix):
            return NotImplemented
        return self.shape == other.shape and self.data == other.data

    def __repr__(self) -> str:
        return f"Matrix({self.rows}x{self.cols})"


def _require_same_shape(op: str, a: Matrix, b: Matrix) -> None:
    if a.shape != b.shape:
        raise ShapeError(op, a, b)


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Standard matrix product; requires ``a.cols == b.rows``."""
    if a.cols != b.rows:
        raise ShapeError("matmul", a, b)
    out = kernels.matmul(a.data, a.rows, a.cols, b.data, b.cols)
    return Matrix._wrap(a.rows, b.cols, out)


def hadamard(a: Matrix, b: Matrix) -> Matrix:
    """Entrywise product of two same-shape matrices."""
    _require_same_shape("hadamard", a, b)
    return Matrix._wrap(a.rows, a.cols, kernels.hadamard(a.data, b.data))


def safe_divide(num: Matrix, den: Matrix, eps: float | None = None) -> Matrix:
    """Entrywise ``num / max(den, eps)``; finite for any finite inputs."""
    if eps is None:
        eps = DEFAULT_EPS
    if not eps > 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    _require_same_shape("safe_divide", num, den)
    return Matrix._wrap(num.rows, num.cols, kernels.divide_guarded(num.data, den.data, eps))


def frobenius_sq(a: Matrix) -> float:
    """Sum of squared entries (squared Frobenius norm)."""
    return kernels.frobenius_sq(a.data)


def transpose(a: Matrix) -> Matrix:
    return Matrix._wrap(a.cols, a.rows, kernels.transpose(a.data, a.rows, a.cols))


def add(a: Matrix, b: Matrix) -> Matrix:
    _require_same_shape("add", a, b)
    return Matrix._wrap(a.rows, a.cols, kernels.add(a.data, b.data))


def sub(a: Matrix, b: Matrix) -> Matrix:
    _require_same_shape("sub", a, b)
    return Matrix._wrap(a.rows, a.cols, kernels.sub(a.data, b.data))


def scale(a: Matrix, s: float) -> Matrix:
    return Matrix._wrap(a.rows, a.cols, kernels.scale(a.data, s))


def column_argmax(a: Matrix) -> list[int]:
    """Per-column index of the maximal entry; ties go to the smallest index."""
    return kernels.column_argmax(a.data, a.rows, a.cols)
