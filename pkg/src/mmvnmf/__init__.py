"""mmvnmf: collaborative multi-modal multi-view NMF clustering.

Per-view NMF models exchange partition information within and across
modalities through weighted collaboration terms; the hot matrix kernels run
on a compiled extension when built, with a pure-Python fallback selected at
import time (``mmvnmf.matrix.BACKEND`` says which).
"""

__version__ = "0.1.0"

from .matrix import (
    BACKEND,
    DEFAULT_EPS,
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
from .nmf import (
    ConfigError,
    FactorPair,
    NmfConfig,
    hard_assign,
    init_factors,
    lee_seung_step,
    local_objective,
    run_local_nmf,
)
from .collab import (
    CollaborationWeights,
    ExperimentTrace,
    ModalityTree,
    TreeError,
    ViewData,
    ViewId,
    WeightError,
    collaboration_weights,
    collaborative_step,
    cross_modality_weights,
    distance_matrix,
    gradient_split_partition,
    gradient_split_prototypes,
    multimodal_term,
    multiview_term,
    run_collaborative_nmf,
    squared_share,
    total_objective,
    within_modality_weights,
)
from .metrics import SingleClusterError, purity, silhouette
from .data import (
    MatrixParseError,
    ModalitySpec,
    ViewSpec,
    add_gaussian_noise,
    load_labels,
    load_matrix,
    pca_nonneg,
    save_labels,
    save_matrix,
    synth_multimodal,
)
from .manifest import ExperimentManifest, ManifestError, build_tree, load_manifest
from .seeds import derive_seed
