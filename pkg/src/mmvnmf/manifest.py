"""Experiment manifests: strict JSON schema, validation, and tree assembly.

A manifest fully describes one experiment: the dataset layout (modalities,
views, matrix files), per-view preprocessing and noise injection, the solver
settings, and the collaboration switches.  Unknown keys are rejected so
typos fail loudly.  Relative paths resolve against the manifest's directory.

Per-view pipeline order: load, then PCA preprocessing (when configured),
then Gaussian noise injection (when configured).  Noise lands on the space
that is actually clustered and the zero-clamp never distorts raw negative
values destined for PCA.
"""

import json
from dataclasses import dataclass
from pathlib import Path

from .collab import ModalityTree, ViewData
from .data import add_gaussian_noise, load_labels, load_matrix, pca_nonneg
from .matrix import DEFAULT_EPS
from .nmf import ConfigError, NmfConfig
from .seeds import derive_seed

__all__ = [
    "ManifestError",
    "PcaSpec",
    "NoiseSpec",
    "ViewEntry",
    "ModalityEntry",
    "CollaborationSettings",
    "ExperimentManifest",
    "load_manifest",
    "write_manifest",
    "build_tree",
]


class ManifestError(ValueError):
    """Invalid manifest content; message names the offending field."""


@dataclass(frozen=True)
class PcaSpec:
    target_dim: int


@dataclass(frozen=True)
class NoiseSpec:
    stddev: float


@dataclass(frozen=True)
class ViewEntry:
    name: str
    matrix_path: str
    preprocess: PcaSpec | None = None
    noise: NoiseSpec | None = None


@dataclass(frozen=True)
class ModalityEntry:
    name: str
    views: tuple[ViewEntry, ...]


@dataclass(frozen=True)
class CollaborationSettings:
    enabled: bool = True
    refresh_weights: bool = False


@dataclass(frozen=True)
class ExperimentManifest:
    name: str
    k: int
    modalities: tuple[ModalityEntry, ...]
    solver: NmfConfig
    collaboration: CollaborationSettings
    labels_path: str | None = None
    base_dir: Path = Path(".")

    def view_names(self) -> list[tuple[str, str]]:
        return [(m.name, v.name) for m in self.modalities for v in m.views]


def _expect_keys(obj: dict, where: str, required: set[str], optional: set[str] = frozenset()):
    if not isinstance(obj, dict):
        raise ManifestError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = set(obj) - required - optional
    if unknown:
        raise ManifestError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ManifestError(f"{where}: missing keys {sorted(missing)}")


def _as_type(value, kind, where: str):
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ManifestError(f"{where}: expected {kind.__name__}, got {value!r}")
    return value


def _parse_view(obj, where: str) -> ViewEntry:
    _expect_keys(obj, where, {"name", "matrix_path"}, {"preprocess", "noise"})
    preprocess = None
    if obj.get("preprocess") is not None:
        pp = obj["preprocess"]
        _expect_keys(pp, f"{where}.preprocess", {"kind", "target_dim"})
        if pp["kind"] != "pca":
            raise ManifestError(f"{where}.preprocess.kind: only 'pca' is supported, got {pp['kind']!r}")
        preprocess = PcaSpec(target_dim=_as_type(pp["target_dim"], int, f"{where}.preprocess.target_dim"))
    noise = None
    if obj.get("noise") is not None:
        nz = obj["noise"]
        _expect_keys(nz, f"{where}.noise", {"stddev"})
        stddev = _as_type(nz["stddev"], float, f"{where}.noise.stddev")
        if stddev < 0.0:
            raise ManifestError(f"{where}.noise.stddev: must be >= 0, got {stddev}")
        noise = NoiseSpec(stddev=stddev)
    return ViewEntry(
        name=_as_type(obj["name"], str, f"{where}.name"),
        matrix_path=_as_type(obj["matrix_path"], str, f"{where}.matrix_path"),
        preprocess=preprocess,
        noise=noise,
    )


def _parse_solver(obj, k: int) -> NmfConfig:
    _expect_keys(obj, "solver", set(), {"max_iter", "rel_tol", "eps", "seed", "restarts"})
    defaults = NmfConfig(k=1)
    try:
        return NmfConfig(
            k=k,
            max_iter=_as_type(obj.get("max_iter", defaults.max_iter), int, "solver.max_iter"),
            rel_tol=_as_type(obj.get("rel_tol", defaults.rel_tol), float, "solver.rel_tol"),
            eps=_as_type(obj.get("eps", DEFAULT_EPS), float, "solver.eps"),
            seed=_as_type(obj.get("seed", 0), int, "solver.seed"),
            restarts=_as_type(obj.get("restarts", 1), int, "solver.restarts"),
        )
    except ConfigError as exc:
        raise ManifestError(f"solver: {exc}") from None


def load_manifest(path) -> ExperimentManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: not valid JSON: {exc}") from None
    _expect_keys(
        raw, str(path), {"name", "k", "modalities"},
        {"labels_path", "solver", "collaboration"},
    )
    k = _as_type(raw["k"], int, "k")
    if k < 1:
        raise ManifestError(f"k: must be >= 1, got {k}")
    if not isinstance(raw["modalities"], list) or not raw["modalities"]:
        raise ManifestError("modalities: expected a non-empty list")
    modalities = []
    for p, mod in enumerate(raw["modalities"]):
        where = f"modalities[{p}]"
        _expect_keys(mod, where, {"name", "views"})
        if not isinstance(mod["views"], list) or not mod["views"]:
            raise ManifestError(f"{where}.views: expected a non-empty list")
        views = tuple(
            _parse_view(vw, f"{where}.views[{v}]") for v, vw in enumerate(mod["views"])
        )
        modalities.append(ModalityEntry(name=_as_type(mod["name"], str, f"{where}.name"), views=views))
    collab_raw = raw.get("collaboration", {})
    _expect_keys(collab_raw, "collaboration", set(), {"enabled", "refresh_weights"})
    collaboration = CollaborationSettings(
        enabled=_as_type(collab_raw.get("enabled", True), bool, "collaboration.enabled"),
        refresh_weights=_as_type(
            collab_raw.get("refresh_weights", False), bool, "collaboration.refresh_weights"
        ),
    )
    labels_path = raw.get("labels_path")
    if labels_path is not None:
        labels_path = _as_type(labels_path, str, "labels_path")
    return ExperimentManifest(
        name=_as_type(raw["name"], str, "name"),
        k=k,
        modalities=tuple(modalities),
        solver=_parse_solver(raw.get("solver", {}), k),
        collaboration=collaboration,
        labels_path=labels_path,
        base_dir=path.parent,
    )


def manifest_to_dict(manifest: ExperimentManifest) -> dict:
    """Plain-JSON form of a manifest (paths as written, no base_dir)."""
    doc: dict = {
        "name": manifest.name,
        "k": manifest.k,
        "modalities": [
            {
                "name": mod.name,
                "views": [
                    {
                        "name": vw.name,
                        "matrix_path": vw.matrix_path,
                        **(
                            {"preprocess": {"kind": "pca", "target_dim": vw.preprocess.target_dim}}
                            if vw.preprocess
                            else {}
                        ),
                        **({"noise": {"stddev": vw.noise.stddev}} if vw.noise else {}),
                    }
                    for vw in mod.views
                ],
            }
            for mod in manifest.modalities
        ],
        "solver": {
            "max_iter": manifest.solver.max_iter,
            "rel_tol": manifest.solver.rel_tol,
            "eps": manifest.solver.eps,
            "seed": manifest.solver.seed,
            "restarts": manifest.solver.restarts,
        },
        "collaboration": {
            "enabled": manifest.collaboration.enabled,
            "refresh_weights": manifest.collaboration.refresh_weights,
        },
    }
    if manifest.labels_path is not None:
        doc["labels_path"] = manifest.labels_path
    return doc


def write_manifest(manifest: ExperimentManifest, path) -> None:
    Path(path).write_text(
        json.dumps(manifest_to_dict(manifest), indent=2) + "\n", encoding="utf-8"
    )


def build_tree(
    manifest: ExperimentManifest, seed: int | None = None
) -> tuple[ModalityTree, list[int] | None]:
    """Load, preprocess, and validate every view; returns the experiment tree
    and labels (when the manifest references them).

    ``seed`` overrides the solver seed for the noise streams (kept in sync
    with the run seed so a manifest plus one seed reproduces everything).
    """
    if seed is None:
        seed = manifest.solver.seed
    modalities: list[list[ViewData]] = []
    n_ref: int | None = None
    for p, mod in enumerate(manifest.modalities):
        views: list[ViewData] = []
        for v, vw in enumerate(mod.views):
            where = f"modalities[{p}].views[{v}] ({mod.name}/{vw.name})"
            mpath = manifest.base_dir / vw.matrix_path
            if not mpath.exists():
                raise ManifestError(f"{where}: matrix file not found: {mpath}")
            x = load_matrix(mpath, allow_negative=vw.preprocess is not None)
            if vw.preprocess is not None:
                if vw.preprocess.target_dim < manifest.k:
                    raise ManifestError(
                        f"{where}: pca target_dim {vw.preprocess.target_dim} is below k={manifest.k}"
                    )
                if vw.preprocess.target_dim > min(x.rows, x.cols):
                    raise ManifestError(
                        f"{where}: pca target_dim {vw.preprocess.target_dim} exceeds "
                        f"min(features, objects) = {min(x.rows, x.cols)}"
                    )
                x = pca_nonneg(x, vw.preprocess.target_dim)
            if vw.noise is not None:
                x = add_gaussian_noise(x, vw.noise.stddev, derive_seed(seed, "noise", p, v))
            if min(x.rows, x.cols) < manifest.k:
                raise ManifestError(
                    f"{where}: matrix {x.shape} cannot host k={manifest.k} clusters"
                )
            if n_ref is None:
                n_ref = x.cols
            elif x.cols != n_ref:
                raise ManifestError(
                    f"{where}: {x.cols} objects, but earlier views have {n_ref}"
                )
            views.append(ViewData(x))
        modalities.append(views)
    tree = ModalityTree(modalities, manifest.k)
    labels = None
    if manifest.labels_path is not None:
        lpath = manifest.base_dir / manifest.labels_path
        if not lpath.exists():
            raise ManifestError(f"labels_path: file not found: {lpath}")
        labels = load_labels(lpath)
        if len(labels) != tree.n:
            raise ManifestError(
                f"labels_path: {len(labels)} labels for {tree.n} objects"
            )
    return tree, labels
