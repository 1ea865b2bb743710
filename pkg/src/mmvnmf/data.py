"""Data handling: matrix/label files, PCA preprocessing, noise injection,
and the seeded synthetic multi-modal generator.

Matrix file format: plain text CSV, one feature row per line, ``#`` comment
lines and blank lines ignored, full round-trip precision (``repr`` floats).
Rows are features, columns are objects.
"""

import math
import random
from dataclasses import dataclass
from pathlib import Path
from collections.abc import Sequence

from .matrix import Matrix
from .seeds import derive_seed

__all__ = [
    "MatrixParseError",
    "load_matrix",
    "save_matrix",
    "load_labels",
    "save_labels",
    "pca_nonneg",
    "add_gaussian_noise",
    "ViewSpec",
    "ModalitySpec",
    "synth_multimodal",
]


class MatrixParseError(ValueError):
    """Malformed matrix or labels file; carries the offending line number."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def load_matrix(path, allow_negative: bool = False) -> Matrix:
    """Parse a matrix file; rejects ragged rows, non-finite and (unless
    ``allow_negative``) negative entries, naming the offending line."""
    path = Path(path)
    flat: list[float] = []
    width = None
    first_line = 0
    n_rows = 0
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.split(",")
            if width is None:
                width = len(fields)
                first_line = lineno
            elif len(fields) != width:
                raise MatrixParseError(
                    path, lineno,
                    f"ragged row: expected {width} fields (as on line {first_line}), "
                    f"got {len(fields)}",
                )
            for col, fieldtext in enumerate(fields, start=1):
                try:
                    value = float(fieldtext)
                except ValueError:
                    raise MatrixParseError(
                        path, lineno, f"column {col}: not a number: {fieldtext.strip()!r}"
                    ) from None
                if not math.isfinite(value):
                    raise MatrixParseError(path, lineno, f"column {col}: non-finite value {value!r}")
                if value < 0.0 and not allow_negative:
                    raise MatrixParseError(
                        path, lineno,
                        f"column {col}: negative entry {value!r} in a view not marked "
                        "for preprocessing",
                    )
                flat.append(value)
            n_rows += 1
    if n_rows == 0:
        raise MatrixParseError(path, 1, "empty matrix file")
    return Matrix(n_rows, width, flat)


def save_matrix(path, m: Matrix) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        c = m.cols
        for i in range(m.rows):
            fh.write(",".join(repr(v) for v in m.data[i * c : (i + 1) * c]))
            fh.write("\n")


def load_labels(path) -> list[int]:
    """One integer class id per line; blank and ``#`` lines ignored."""
    path = Path(path)
    labels = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                labels.append(int(text))
            except ValueError:
                raise MatrixParseError(path, lineno, f"not an integer label: {text!r}") from None
    if not labels:
        raise MatrixParseError(path, 1, "empty labels file")
    return labels


def save_labels(path, labels: Sequence[int]) -> None:
    Path(path).write_text("".join(f"{lab}\n" for lab in labels), encoding="utf-8")


def _sym_eig(a: list[list[float]]) -> tuple[list[float], list[list[float]]]:
    """Jacobi eigendecomposition of a symmetric matrix.

    Returns eigenvalues in descending order and the matching eigenvectors as
    rows.  Cyclic sweeps; plenty accurate for the small covariance matrices
    PCA sees here (cost grows cubically with size).
    """
    n = len(a)
    a = [row[:] for row in a]
    v = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    scale = max(1.0, max(abs(a[i][j]) for i in range(n) for j in range(n)))
    tol = 1e-15 * scale
    for _ in range(100):
        off = math.sqrt(sum(a[i][j] ** 2 for i in range(n) for j in range(i + 1, n)))
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p][q]
                if abs(apq) <= tol * 1e-2:
                    continue
                theta = (a[q][q] - a[p][p]) / (2.0 * apq)
                t = (1.0 if theta >= 0.0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for i in range(n):
                    aip, aiq = a[i][p], a[i][q]
                    a[i][p] = c * aip - s * aiq
                    a[i][q] = s * aip + c * aiq
                for i in range(n):
                    api, aqi = a[p][i], a[q][i]
                    a[p][i] = c * api - s * aqi
                    a[q][i] = s * api + c * aqi
                for i in range(n):
                    vip, viq = v[p][i], v[q][i]
                    v[p][i] = c * vip - s * viq
                    v[q][i] = s * vip + c * viq
    order = sorted(range(n), key=lambda i: -a[i][i])
    return [a[i][i] for i in order], [v[i] for i in order]


def pca_nonneg(x: Matrix, target_dim: int) -> Matrix:
    """Project features onto the top principal directions, then shift each
    output feature by its minimum so the result is non-negative.

    Directions come from the eigendecomposition of the feature covariance,
    eigenvalues descending; each direction's sign is fixed so its
    largest-magnitude loading is positive.  Output is target_dim x N.
    """
    m, n = x.rows, x.cols
    if not 1 <= target_dim <= min(m, n):
        raise ValueError(f"target_dim must lie in [1, {min(m, n)}], got {target_dim}")
    rows = x.to_rows()
    means = [math.fsum(row) / n for row in rows]
    centered = [[v - mu for v in row] for row, mu in zip(rows, means)]
    denom = n - 1 if n > 1 else 1
    cov = [
        [math.fsum(centered[i][t] * centered[j][t] for t in range(n)) / denom for j in range(m)]
        for i in range(m)
    ]
    _, vectors = _sym_eig(cov)
    out: list[float] = []
    for d in range(target_dim):
        vec = vectors[d]
        lead = max(range(m), key=lambda i: abs(vec[i]))
        if vec[lead] < 0.0:
            vec = [-val for val in vec]
        scores = [math.fsum(vec[i] * centered[i][t] for i in range(m)) for t in range(n)]
        low = min(scores)
        out.extend(sc - low for sc in scores)
    return Matrix(target_dim, n, out)


def add_gaussian_noise(x: Matrix, stddev: float, seed: int) -> Matrix:
    """Add seeded i.i.d. normal(0, stddev) noise, clamped at zero to keep
    the matrix non-negative."""
    if stddev < 0.0:
        raise ValueError(f"stddev must be >= 0, got {stddev}")
    if stddev == 0.0:
        return x.copy()
    rng = random.Random(seed)
    return Matrix(x.rows, x.cols, [max(v + rng.gauss(0.0, stddev), 0.0) for v in x.data])


@dataclass(frozen=True)
class ViewSpec:
    """One synthetic view: feature count and relative within-cluster spread.

    ``noise_stddev`` is not used by the generator itself; it rides along so
    dataset writers can emit the degradation step into the experiment
    manifest.
    """

    name: str
    dim: int
    dispersion: float
    noise_stddev: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"view {self.name!r}: dim must be >= 1, got {self.dim}")
        if self.dispersion < 0.0:
            raise ValueError(f"view {self.name!r}: dispersion must be >= 0")
        if self.noise_stddev < 0.0:
            raise ValueError(f"view {self.name!r}: noise_stddev must be >= 0")


@dataclass(frozen=True)
class ModalitySpec:
    name: str
    views: tuple[ViewSpec, ...]

    def __post_init__(self):
        if not self.views:
            raise ValueError(f"modality {self.name!r} needs at least one view")


def synth_multimodal(
    n_objects: int,
    k_clusters: int,
    modality_specs: Sequence[ModalitySpec],
    seed: int,
) -> tuple[list[list[Matrix]], list[int]]:
    """Seeded synthetic multi-modal dataset with shared cluster structure.

    Cluster sizes are balanced within one object.  Every view draws its own
    prototypes (coordinates uniform on [0.5, 2.5]) and emits gamma-distributed
    points around the shared membership: entry means equal the prototype
    coordinate and the coefficient of variation equals the view's dispersion
    (dispersion 0 reproduces the prototypes exactly).
    """
    if k_clusters < 1:
        raise ValueError(f"k_clusters must be >= 1, got {k_clusters}")
    if n_objects < 2 * k_clusters:
        raise ValueError(
            f"need at least {2 * k_clusters} objects for {k_clusters} clusters, got {n_objects}"
        )
    if not modality_specs:
        raise ValueError("need at least one modality spec")

    base, extra = divmod(n_objects, k_clusters)
    labels = [c for c in range(k_clusters) for _ in range(base + (1 if c < extra else 0))]
    random.Random(derive_seed(seed, "labels")).shuffle(labels)

    matrices: list[list[Matrix]] = []
    for p, mod in enumerate(modality_specs):
        views: list[Matrix] = []
        for v, vs in enumerate(mod.views):
            rng = random.Random(derive_seed(seed, "view", p, v))
            centers = [
                [rng.uniform(0.5, 2.5) for _ in range(vs.dim)] for _ in range(k_clusters)
            ]
            data = [0.0] * (vs.dim * n_objects)
            disp = vs.dispersion
            shape = 1.0 / (disp * disp) if disp > 0.0 else 0.0
            for j, lab in enumerate(labels):
                center = centers[lab]
                for i in range(vs.dim):
                    mu = center[i]
                    data[i * n_objects + j] = (
                        mu if disp == 0.0 else rng.gammavariate(shape, mu * disp * disp)
                    )
            views.append(Matrix(vs.dim, n_objects, data))
        matrices.append(views)
    return matrices, labels
