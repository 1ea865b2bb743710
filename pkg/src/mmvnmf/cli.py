"""Experiment runner CLI.

Subcommands:

* ``run``      -- execute a manifest end to end, write report.json/report.csv
* ``compare``  -- local-only vs within-modality-only vs full collaboration
* ``synth``    -- generate a seeded synthetic dataset plus a ready manifest
* ``metrics``  -- purity/silhouette for an externally produced assignment

All randomness flows from the manifest seed (overridable with ``--seed``),
so identical invocations produce byte-identical outputs except for the
wall-clock field.  Failures print one machine-readable JSON line to stderr
and exit nonzero.
"""

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .collab import ExperimentTrace, ModalityTree, ViewId, run_collaborative_nmf
from .data import (
    MatrixParseError,
    ModalitySpec,
    ViewSpec,
    load_labels,
    load_matrix,
    pca_nonneg,
    save_labels,
    save_matrix,
    synth_multimodal,
)
from .manifest import (
    CollaborationSettings,
    ExperimentManifest,
    ManifestError,
    ModalityEntry,
    NoiseSpec,
    ViewEntry,
    build_tree,
    load_manifest,
    manifest_to_dict,
    write_manifest,
)
from .matrix import Matrix
from .metrics import SingleClusterError, purity, silhouette
from .nmf import ConfigError, FactorPair, NmfConfig, hard_assign

__all__ = ["main"]


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(value)


def _view_metrics(x: Matrix, fp: FactorPair, labels) -> dict:
    clusters = hard_assign(fp.partition)
    out: dict = {"purity": None, "silhouette": None}
    if labels is not None:
        out["purity"] = purity(labels, clusters)
    try:
        out["silhouette"] = silhouette(x, clusters)
    except SingleClusterError as exc:
        out["silhouette_error"] = str(exc)
    return out


def _weights_doc(weights, names: dict[ViewId, str]) -> dict:
    if weights is None:
        return {"within": {}, "across": {}}
    return {
        "within": {f"{names[a]}->{names[b]}": w for (a, b), w in weights.within.items()},
        "across": {f"{names[a]}->{names[b]}": w for (a, b), w in weights.across.items()},
    }


def _run_report(
    manifest: ExperimentManifest,
    tree: ModalityTree,
    trace: ExperimentTrace,
    labels,
    seed: int,
    refresh_weights: bool,
) -> dict:
    names = {
        ViewId(p, v): f"{mod.name}/{vw.name}"
        for p, mod in enumerate(manifest.modalities)
        for v, vw in enumerate(mod.views)
    }
    views = []
    for vid, vd in tree.views():
        local = _view_metrics(vd.x, trace.local_factors[vid], labels)
        final = _view_metrics(vd.x, tree.factors(vid), labels)
        views.append(
            {
                "id": names[vid],
                "local": local,
                "collaborative": final,
                "local_objective_trace": trace.local_traces[vid],
                "objective_per_round": trace.view_objectives.get(vid, []),
            }
        )
    return {
        "name": manifest.name,
        "seed": seed,
        "k": manifest.k,
        "config": {
            "manifest": manifest_to_dict(manifest),
            "refresh_weights": refresh_weights,
        },
        "views": views,
        "weights": _weights_doc(trace.initial_weights, names),
        "final_weights": _weights_doc(trace.final_weights, names),
        "objective_trace": trace.objective,
        "rounds": trace.rounds,
        "wall_clock_s": trace.wall_clock_s,
    }


def _report_csv(report: dict) -> str:
    lines = ["modality,view,local_purity,local_silhouette,collab_purity,collab_silhouette"]
    for view in report["views"]:
        modality, name = view["id"].split("/", 1)
        lines.append(
            ",".join(
                [
                    modality,
                    name,
                    _fmt(view["local"]["purity"]),
                    _fmt(view["local"]["silhouette"]),
                    _fmt(view["collaborative"]["purity"]),
                    _fmt(view["collaborative"]["silhouette"]),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _write_projections(out_dir: Path, manifest: ExperimentManifest, tree: ModalityTree) -> list[Path]:
    paths = []
    for (vid, vd), (mod_name, view_name) in zip(tree.views(), manifest.view_names()):
        dims = min(2, vd.x.rows, vd.x.cols)
        proj = pca_nonneg(vd.x, dims)
        clusters = hard_assign(tree.factors(vid).partition)
        lines = ["component_1,component_2,cluster"]
        for j in range(proj.cols):
            c1 = proj.at(0, j)
            c2 = proj.at(1, j) if dims > 1 else 0.0
            lines.append(f"{c1!r},{c2!r},{clusters[j]}")
        path = out_dir / f"projection_{mod_name}_{view_name}.csv"
        _atomic_write(path, "\n".join(lines) + "\n")
        paths.append(path)
    return paths


def _effective_seed(args, manifest: ExperimentManifest) -> int:
    return args.seed if args.seed is not None else manifest.solver.seed


def cmd_run(args) -> int:
    manifest = load_manifest(args.manifest)
    seed = _effective_seed(args, manifest)
    refresh = args.refresh_weights or manifest.collaboration.refresh_weights
    tree, labels = build_tree(manifest, seed=seed)
    cfg = dataclasses.replace(manifest.solver, seed=seed)
    tree, trace = run_collaborative_nmf(
        tree, cfg, refresh_weights=refresh, collaborate=manifest.collaboration.enabled
    )
    report = _run_report(manifest, tree, trace, labels, seed, refresh)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(out_dir / "report.json", json.dumps(report, indent=2) + "\n")
    _atomic_write(out_dir / "report.csv", _report_csv(report))
    if args.projections:
        _write_projections(out_dir, manifest, tree)
    for view in report["views"]:
        print(
            f"{view['id']}: purity {view['local']['purity']} -> "
            f"{view['collaborative']['purity']}, silhouette {view['local']['silhouette']} -> "
            f"{view['collaborative']['silhouette']}"
        )
    print(f"report written to {out_dir / 'report.json'}")
    return 0


_COMPARE_CONFIGS = ("local", "multiview", "multimodal")


def cmd_compare(args) -> int:
    manifest = load_manifest(args.manifest)
    if len(manifest.modalities) < 2:
        raise ManifestError("compare needs a manifest with at least 2 modalities")
    seed = _effective_seed(args, manifest)
    cfg = dataclasses.replace(manifest.solver, seed=seed)
    names = [f"{m}/{v}" for m, v in manifest.view_names()]

    results = {}
    for config in _COMPARE_CONFIGS:
        tree, labels = build_tree(manifest, seed=seed)
        tree, trace = run_collaborative_nmf(
            tree,
            cfg,
            collaborate=config != "local",
            cross_modality=config == "multimodal",
        )
        results[config] = {
            "views": {
                name: _view_metrics(vd.x, tree.factors(vid), labels)
                for (vid, vd), name in zip(tree.views(), names)
            },
            "objective_trace": trace.objective,
            "rounds": trace.rounds,
        }

    comparison = {
        "name": manifest.name,
        "seed": seed,
        "k": manifest.k,
        "configs": list(_COMPARE_CONFIGS),
        "results": results,
    }
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(out_dir / "comparison.json", json.dumps(comparison, indent=2) + "\n")
    lines = ["modality,view,config,purity,silhouette"]
    for name in names:
        modality, view = name.split("/", 1)
        for config in _COMPARE_CONFIGS:
            m = results[config]["views"][name]
            lines.append(
                f"{modality},{view},{config},{_fmt(m['purity'])},{_fmt(m['silhouette'])}"
            )
    _atomic_write(out_dir / "comparison.csv", "\n".join(lines) + "\n")
    for name in names:
        row = " ".join(
            f"{config}={results[config]['views'][name]['purity']}" for config in _COMPARE_CONFIGS
        )
        print(f"{name}: purity {row}")
    print(f"comparison written to {out_dir / 'comparison.json'}")
    return 0


def _parse_view_flag(raw: str) -> tuple[str, ViewSpec]:
    parts = raw.split(":")
    if len(parts) not in (4, 5):
        raise ValueError(
            f"--view expects MODALITY:NAME:DIM:DISPERSION[:NOISE_STDDEV], got {raw!r}"
        )
    modality, name = parts[0], parts[1]
    try:
        dim = int(parts[2])
        dispersion = float(parts[3])
        noise = float(parts[4]) if len(parts) == 5 else 0.0
    except ValueError:
        raise ValueError(f"--view {raw!r}: DIM must be int, DISPERSION/NOISE floats") from None
    return modality, ViewSpec(name=name, dim=dim, dispersion=dispersion, noise_stddev=noise)


def cmd_synth(args) -> int:
    grouped: dict[str, list[ViewSpec]] = {}
    for raw in args.view:
        modality, vs = _parse_view_flag(raw)
        grouped.setdefault(modality, []).append(vs)
    specs = [ModalitySpec(name=m, views=tuple(vws)) for m, vws in grouped.items()]
    matrices, labels = synth_multimodal(args.objects, args.clusters, specs, args.seed)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    modalities = []
    for mod, views in zip(specs, matrices):
        entries = []
        for vs, x in zip(mod.views, views):
            fname = f"{mod.name}_{vs.name}.csv"
            save_matrix(out_dir / fname, x)
            entries.append(
                ViewEntry(
                    name=vs.name,
                    matrix_path=fname,
                    noise=NoiseSpec(stddev=vs.noise_stddev) if vs.noise_stddev > 0 else None,
                )
            )
        modalities.append(ModalityEntry(name=mod.name, views=tuple(entries)))
    save_labels(out_dir / "labels.txt", labels)
    manifest = ExperimentManifest(
        name=args.name,
        k=args.clusters,
        modalities=tuple(modalities),
        solver=NmfConfig(
            k=args.clusters,
            max_iter=args.max_iter,
            rel_tol=args.rel_tol,
            seed=args.seed,
            restarts=args.restarts,
        ),
        collaboration=CollaborationSettings(),
        labels_path="labels.txt",
        base_dir=out_dir,
    )
    write_manifest(manifest, out_dir / "manifest.json")
    print(f"dataset written to {out_dir} ({sum(len(m.views) for m in modalities)} views, "
          f"{args.objects} objects, {args.clusters} clusters)")
    print(f"manifest written to {out_dir / 'manifest.json'}")
    return 0


def cmd_metrics(args) -> int:
    x = load_matrix(args.matrix, allow_negative=True)
    clusters = load_labels(args.clusters)
    labels = load_labels(args.labels)
    if not (len(clusters) == len(labels) == x.cols):
        raise ValueError(
            f"length mismatch: {x.cols} samples, {len(clusters)} cluster ids, "
            f"{len(labels)} labels"
        )
    out: dict = {"purity": purity(labels, clusters)}
    try:
        out["silhouette"] = silhouette(x, clusters)
    except SingleClusterError as exc:
        out["silhouette"] = None
        out["silhouette_error"] = str(exc)
    print(json.dumps(out))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmvnmf",
        description="Collaborative multi-modal multi-view NMF clustering experiments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a manifest end to end and write a report")
    p_run.add_argument("manifest", help="path to the experiment manifest (JSON)")
    p_run.add_argument("--seed", type=int, default=None, help="override the manifest seed")
    p_run.add_argument("--out", required=True, help="output directory for report.json/report.csv")
    p_run.add_argument(
        "--refresh-weights", action="store_true",
        help="recompute collaboration weights after every round",
    )
    p_run.add_argument(
        "--projections", action="store_true",
        help="also write per-view 2-D PCA projection CSVs for plotting",
    )
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser(
        "compare",
        help="compare local-only, within-modality-only, and full collaboration",
    )
    p_cmp.add_argument("manifest")
    p_cmp.add_argument("--seed", type=int, default=None)
    p_cmp.add_argument("--out", required=True, help="output directory for comparison files")
    p_cmp.set_defaults(func=cmd_compare)

    p_syn = sub.add_parser("synth", help="generate a synthetic multi-modal dataset")
    p_syn.add_argument("--objects", type=int, required=True)
    p_syn.add_argument("--clusters", type=int, required=True)
    p_syn.add_argument(
        "--view", action="append", required=True, metavar="MOD:NAME:DIM:DISP[:NOISE]",
        help="add a view (repeatable); NOISE adds a gaussian degradation step to the manifest",
    )
    p_syn.add_argument("--seed", type=int, default=0)
    p_syn.add_argument("--out-dir", required=True)
    p_syn.add_argument("--name", default="synthetic")
    p_syn.add_argument("--max-iter", type=int, default=300)
    p_syn.add_argument("--rel-tol", type=float, default=1e-6)
    p_syn.add_argument("--restarts", type=int, default=3)
    p_syn.set_defaults(func=cmd_synth)

    p_met = sub.add_parser("metrics", help="evaluate an externally produced assignment")
    p_met.add_argument("matrix", help="feature matrix (CSV, features x objects)")
    p_met.add_argument("clusters", help="cluster id file, one per object")
    p_met.add_argument("labels", help="class label file, one per object")
    p_met.set_defaults(func=cmd_metrics)
    return parser


_KNOWN_ERRORS = (
    ManifestError,
    MatrixParseError,
    ConfigError,
    ValueError,
    OSError,
)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _KNOWN_ERRORS as exc:
        print(
            json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
