"""Single-view non-negative matrix factorization.

Classic alternating multiplicative updates (Lee-Seung) minimizing the
squared reconstruction error ``||X - FG||_F^2`` with F (features x clusters)
holding cluster prototypes and G (clusters x objects) holding soft
partitions.  Everything is deterministic given the config seed.
"""

import math
import random
from dataclasses import dataclass, replace

from .matrix import (
    DEFAULT_EPS,
    Matrix,
    ShapeError,
    column_argmax,
    frobenius_sq,
    hadamard,
    matmul,
    safe_divide,
    sub,
    transpose,
)
from .seeds import derive_seed

__all__ = [
    "ConfigError",
    "NmfConfig",
    "FactorPair",
    "init_factors",
    "local_objective",
    "lee_seung_step",
    "run_local_nmf",
    "hard_assign",
]


class ConfigError(ValueError):
    """Invalid solver configuration."""


@dataclass(frozen=True)
class NmfConfig:
    """Solver settings shared by the local and collaborative phases.

    ``rel_tol`` stops iteration once the relative objective change falls
    below it; ``restarts`` runs that many independently seeded fits and
    keeps the best.
    """

    k: int
    max_iter: int = 500
    rel_tol: float = 1e-6
    eps: float = DEFAULT_EPS
    seed: int = 0
    restarts: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if not 0.0 < self.rel_tol < 1.0:
            raise ConfigError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")
        if not self.eps > 0.0:
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.restarts < 1:
            raise ConfigError(f"restarts must be >= 1, got {self.restarts}")


@dataclass(frozen=True)
class FactorPair:
    """Non-negative factors of one view: prototypes (MxK) and partition (KxN)."""

    prototypes: Matrix
    partition: Matrix

    def __post_init__(self):
        if self.prototypes.cols != self.partition.rows:
            raise ShapeError("factor pair", self.prototypes, self.partition)
        if not (self.prototypes.is_nonnegative() and self.partition.is_nonnegative()):
            raise ValueError("factor matrices must be non-negative")

    @property
    def k(self) -> int:
        return self.prototypes.cols


def _require_nonnegative(x: Matrix, what: str) -> None:
    if not x.is_nonnegative():
        raise ValueError(f"{what} must be non-negative (min entry {x.min()})")


def init_factors(x: Matrix, cfg: NmfConfig) -> FactorPair:
    """Seeded strictly-positive random factors.

    Entries are uniform on ``(0, s]`` with ``s = sqrt(mean(x)/k)``, which
    puts the product FG on the scale of x.  Strict positivity matters:
    exact zeros are absorbing under multiplicative updates.
    """
    if cfg.k > min(x.rows, x.cols):
        raise ConfigError(
            f"k={cfg.k} exceeds min(rows, cols) = {min(x.rows, x.cols)} of the data matrix"
        )
    _require_nonnegative(x, "data matrix")
    s = math.sqrt(x.mean() / cfg.k)
    if s == 0.0:
        s = 1.0  # all-zero input: any positive scale works
    rng = random.Random(cfg.seed)
    f = Matrix(x.rows, cfg.k, [s * (1.0 - rng.random()) for _ in range(x.rows * cfg.k)])
    g = Matrix(cfg.k, x.cols, [s * (1.0 - rng.random()) for _ in range(cfg.k * x.cols)])
    return FactorPair(f, g)


def local_objective(x: Matrix, fp: FactorPair) -> float:
    """Squared reconstruction error ``||X - FG||_F^2``."""
    f, g = fp.prototypes, fp.partition
    if f.rows != x.rows:
        raise ShapeError("local_objective", x, f)
    if g.cols != x.cols:
        raise ShapeError("local_objective", x, g)
    return frobenius_sq(sub(x, matmul(f, g)))


def lee_seung_step(x: Matrix, fp: FactorPair, eps: float = DEFAULT_EPS) -> FactorPair:
    """One alternating multiplicative update: partition first, then prototypes.

    G <- G * (Ft X) / (Ft F G), then F <- F * (X Gt) / (F G Gt) using the
    already-updated G.  Non-negativity is preserved by construction.
    """
    f, g = fp.prototypes, fp.partition
    ft = transpose(f)
    g = hadamard(g, safe_divide(matmul(ft, x), matmul(matmul(ft, f), g), eps))
    gt = transpose(g)
    f = hadamard(f, safe_divide(matmul(x, gt), matmul(f, matmul(g, gt)), eps))
    return FactorPair(f, g)


def _fit_once(x: Matrix, cfg: NmfConfig) -> tuple[FactorPair, list[float]]:
    fp = init_factors(x, cfg)
    trace = [local_objective(x, fp)]
    for _ in range(cfg.max_iter):
        fp = lee_seung_step(x, fp, cfg.eps)
        obj = local_objective(x, fp)
        prev = trace[-1]
        trace.append(obj)
        if abs(obj - prev) / max(prev, cfg.eps) < cfg.rel_tol:
            break
    return fp, trace


def run_local_nmf(x: Matrix, cfg: NmfConfig) -> tuple[FactorPair, list[float]]:
    """Fit one view, keeping the best of ``cfg.restarts`` seeded runs.

    Restart ``r`` uses ``derive_seed(cfg.seed, "restart", r)``; the winner is
    the run with the smallest final objective.  Returns the winning factors
    and that run's per-iteration objective trace (initial value included).
    """
    x.assert_finite()
    _require_nonnegative(x, "data matrix")
    best: tuple[FactorPair, list[float]] | None = None
    for r in range(cfg.restarts):
        fp, trace = _fit_once(x, replace(cfg, seed=derive_seed(cfg.seed, "restart", r)))
        if best is None or trace[-1] < best[1][-1]:
            best = (fp, trace)
    assert best is not None
    return best


def hard_assign(g: Matrix) -> list[int]:
    """Crisp cluster per object: argmax down each partition column."""
    return column_argmax(g)
