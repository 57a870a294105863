"""Command-line interface: ``repalign <subcommand> ...``.

Exit codes: 0 success, 1 verification mismatch, 2 argument errors, 3 data
errors. Every output file carries the tool version and full parameter set.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .aggregation import GroupSpec, condense, convergence_table, load_groups, pairwise_matrix
from .data import (PROVENANCE_TAG, AlignmentMatrix, EmbeddingSet, check_aligned, load_embeddings,
                   load_matrix, save_embeddings, save_matrix, subsample_indices)
from .energy import energy_regression_mae, fit_linear_compositional, load_energy_table
from .errors import ArgumentError, DataError, RepalignError
from .global_metrics import information_imbalance
from .intrinsic_dim import mle_id, twonn_id
from .phylo import model_distance_matrix, neighbor_joining, to_newick
from .synth import random_baseline, shared_latent_views

DEFAULT_SUBSAMPLE = 50_000
DEFAULT_N_CAP = 20_000
II_SWEEP = (50, 200, 500)
DENSE_METRICS = ("cka", "dcor", "ii-forward")


@dataclass
class ManifestEntry:
    name: str
    path: Path
    baseline: bool = False
    group: Optional[str] = None


@dataclass
class RunConfig:
    manifest: list
    metric: str
    params: dict
    subsample: int = DEFAULT_SUBSAMPLE
    seed: int = 0
    out: Optional[Path] = None
    groups: Optional[Path] = None
    exclude_baselines: bool = True
    threads: int = 1
    n_cap: int = DEFAULT_N_CAP
    allow_large: bool = False

    def __post_init__(self):
        if not self.manifest:
            raise ArgumentError("manifest lists no models")
        if self.threads < 1:
            raise ArgumentError("threads must be >= 1")


def provenance(command: str, params: dict) -> dict:
    return {"tool": "repalign", "version": __version__, "command": command, "params": params}


def load_manifest(path) -> list:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from None
    models = doc.get("models", doc) if isinstance(doc, dict) else None
    if not isinstance(models, dict):
        raise DataError(f"{path}: expected a mapping of model name to file")
    entries = []
    for name, spec in models.items():
        if isinstance(spec, str):
            spec = {"path": spec}
        if not isinstance(spec, dict) or "path" not in spec:
            raise DataError(f"{path}: entry {name!r} has no path")
        entries.append(ManifestEntry(name, path.parent / spec["path"], bool(spec.get("baseline", False)),
                                     spec.get("group")))
    return entries


def load_sets(entries, subsample: int, seed: int) -> list:
    sets = []
    for e in entries:
        if not e.path.is_file():
            raise FileNotFoundError(f"embedding file not found: {e.path}")
        s = load_embeddings(e.path, name=e.name)
        if e.baseline and not s.baseline:
            s = EmbeddingSet(s.model_name, s.values, s.item_ids, baseline=True)
        sets.append(s)
    n = check_aligned(*sets)
    if n > subsample:
        idx = subsample_indices(n, subsample, seed)
        sets = [s.take(idx) for s in sets]
    return sets


def _threads(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("REPALIGN_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ArgumentError(f"REPALIGN_THREADS must be an integer, got {env!r}") from None
    return 1


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _write_csv(path, header, rows, meta: dict) -> None:
    buf = io.StringIO()
    buf.write(PROVENANCE_TAG + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                    for v in row])
    _write_text(path, buf.getvalue())


def _write_json(path, doc) -> None:
    _write_text(path, json.dumps(doc, sort_keys=True, indent=1) + "\n")


# --- subcommands -----------------------------------------------------------

def metric_params(args) -> dict:
    if args.metric == "cknna":
        return {"k": args.k if args.k is not None else 25, "centering": args.centering,
                "denominator": args.denominator, "similarity": args.similarity, "neighbors": args.neighbors}
    if args.metric == "cka":
        return {"centering": args.centering, "similarity": args.similarity}
    if args.metric == "dcor":
        return {"root": args.root}
    return {"k": args.k if args.k is not None else 1, "distance": args.distance}


def cmd_pairwise(args) -> int:
    cfg = RunConfig(load_manifest(args.manifest), args.metric, metric_params(args), args.subsample,
                    args.seed, Path(args.out), threads=_threads(args.threads), n_cap=args.n_cap,
                    allow_large=args.allow_large)
    sets = load_sets(cfg.manifest, cfg.subsample, cfg.seed)
    n = sets[0].n_items
    if cfg.metric in DENSE_METRICS and n > cfg.n_cap and not cfg.allow_large:
        raise ArgumentError(f"N={n} exceeds the cap of {cfg.n_cap} for {cfg.metric}; "
                            "lower --subsample or pass --allow-large")
    m = pairwise_matrix(sets, cfg.metric, cfg.params, threads=cfg.threads)
    m.params = dict(m.params, n_items=n, subsample=cfg.subsample, seed=cfg.seed)
    save_matrix(m, cfg.out)
    for (i, j), reason in sorted(m.missing.items()):
        if i <= j or not m.symmetric:
            print(f"missing {m.model_names[i]},{m.model_names[j]}: {reason}", file=sys.stderr)
    return 0


def _groups_from_manifest(entries) -> GroupSpec:
    mapping = {}
    for e in entries:
        if e.group is None:
            raise ArgumentError(f"manifest entry {e.name!r} has no group")
        mapping[e.name] = e.group
    return GroupSpec.from_mapping(mapping)


def cmd_condense(args) -> int:
    m = load_matrix(args.matrix)
    if args.groups:
        groups = load_groups(args.groups)
    elif args.manifest:
        groups = _groups_from_manifest(load_manifest(args.manifest))
    else:
        raise ArgumentError("condense needs --groups or --manifest")
    save_matrix(condense(m, groups), args.out)
    return 0


def cmd_tree(args) -> int:
    m = load_matrix(args.matrix)
    baselines = set(m.baselines)
    if args.manifest:
        baselines |= {e.name for e in load_manifest(args.manifest) if e.baseline}
    keep = [i for i, name in enumerate(m.model_names) if args.keep_baselines or name not in baselines]
    values = m.values[np.ix_(keep, keep)]
    if args.clip_negative:
        values = np.maximum(values, 0.0)
    sub = AlignmentMatrix([m.model_names[i] for i in keep], values, m.metric)
    d = model_distance_matrix(sub, args.alpha, args.epsilon)
    tree = neighbor_joining(d)
    params = {"alpha": args.alpha, "epsilon": args.epsilon, "precision": args.precision,
              "matrix_metric": m.metric, "excluded": sorted(set(m.model_names) - set(sub.model_names)),
              "clip_negative": args.clip_negative}
    comment = json.dumps(provenance("tree", params), sort_keys=True).replace("[", "(").replace("]", ")")
    _write_text(args.out, f"[{comment}]\n{to_newick(tree, args.precision)}\n")
    return 0


def _id_inputs(args) -> list:
    if args.manifest:
        return [(e.name, e.path) for e in load_manifest(args.manifest)]
    if args.input:
        return [(Path(p).stem, Path(p)) for p in args.input]
    raise ArgumentError("id needs --manifest or --input")


def cmd_id(args) -> int:
    rows = []
    methods = ("twonn", "mle") if args.method == "both" else (args.method,)
    for name, path in _id_inputs(args):
        if not path.is_file():
            raise FileNotFoundError(f"embedding file not found: {path}")
        s = load_embeddings(path, name=name)
        for method in methods:
            est = twonn_id(s, args.discard, args.cdf) if method == "twonn" else mle_id(s, args.k)
            rows.append([name, est.method, est.k_or_discard, est.value, est.fit_r2, est.n_used])
    meta = provenance("id", {"method": args.method, "k": args.k, "discard": args.discard, "cdf": args.cdf})
    _write_csv(args.out, ["model", "method", "param", "value", "fit_r2", "n_used"], rows, meta)
    return 0


def cmd_imbalance(args) -> int:
    entries = load_manifest(args.manifest)
    sets = load_sets(entries, args.subsample, args.seed)
    n = sets[0].n_items
    if n > args.n_cap and not args.allow_large:
        raise ArgumentError(f"N={n} exceeds the cap of {args.n_cap}; pass --allow-large")
    ks = list(II_SWEEP) if args.sweep else (args.k or [1])
    rows = []
    for k in ks:
        for i in range(len(sets)):
            for j in range(i + 1, len(sets)):
                p = information_imbalance(sets[i], sets[j], k, args.distance)
                rows.append([sets[i].model_name, sets[j].model_name, k, p.forward, p.backward])
    meta = provenance("imbalance", {"k": ks, "distance": args.distance, "subsample": args.subsample,
                                    "seed": args.seed, "n_items": n})
    _write_csv(args.out, ["model_f", "model_g", "k", "forward", "backward"], rows, meta)
    return 0


def _read_performance(path) -> tuple[dict, dict]:
    perf, sizes = {}, {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        if not reader.fieldnames or not {"model", "performance"} <= set(reader.fieldnames):
            raise DataError(f"{path}: expected columns model,performance[,size]")
        for row in reader:
            try:
                perf[row["model"]] = float(row["performance"])
                if row.get("size"):
                    sizes[row["model"]] = float(row["size"])
            except ValueError as exc:
                raise DataError(f"{path}: {exc}") from None
    return perf, sizes


def cmd_convergence(args) -> int:
    m = load_matrix(args.matrix)
    perf, sizes = _read_performance(args.performance)
    rows, summary = convergence_table(m, perf, args.reference, sizes)
    meta = provenance("convergence", {"reference": args.reference, "metric": m.metric})
    _write_csv(args.out, ["model", "performance", "alignment", "size"],
               [[r.model_name, r.performance, r.alignment, r.size] for r in rows], meta)
    _write_json(Path(args.out).with_suffix(".json"), dict(meta, summary=summary))
    return 0


def cmd_energy(args) -> int:
    table = load_energy_table(args.table)
    n = len(table.ids)
    used = table
    if n > args.n_fit:
        used = table.take(subsample_indices(n, args.n_fit, args.seed))
    rows, diag = [], {}
    for model in used.predictions:
        mae, _, fit_model = energy_regression_mae(used, model, details=True)
        rows.append([model, mae])
        diag[model] = {
            "mae": mae,
            "elements": list(fit_model.element_order),
            "model_fit": {"weights": fit_model.weights.tolist(), "intercept": fit_model.intercept,
                          "residual_rms": fit_model.residual_rms, "dropped": list(fit_model.dropped)},
        }
    true_fit = fit_linear_compositional(used.compositions, used.e_true, used.element_order)
    meta = provenance("energy-mae", {"n_fit": args.n_fit, "seed": args.seed, "n_structures": len(used.ids)})
    _write_csv(args.out, ["model", "mae_ev"], rows, meta)
    doc = dict(meta, models=diag)
    doc["true_fit"] = {"weights": true_fit.weights.tolist(), "intercept": true_fit.intercept,
                       "residual_rms": true_fit.residual_rms, "dropped": list(true_fit.dropped)}
    _write_json(Path(args.out).with_suffix(".json"), doc)
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    noise = args.noise if len(args.noise) > 1 else args.noise * args.models
    if len(noise) != args.models:
        raise ArgumentError(f"{len(noise)} noise values for {args.models} models")
    names = [f"model{i}" for i in range(args.models)]
    views = shared_latent_views(args.n, args.d_latent, [args.d] * args.models, noise, args.warp,
                                args.seed, names)
    params = {"models": args.models, "n": args.n, "d": args.d, "d_latent": args.d_latent, "noise": noise,
              "warp": args.warp, "seed": args.seed, "groups": args.groups, "baseline": args.baseline}
    meta = provenance("synth", params)
    manifest = {}
    for i, v in enumerate(views):
        fname = f"{v.model_name}.emb"
        save_embeddings(v, out / fname, args.dtype, meta)
        manifest[v.model_name] = {"path": fname, "group": f"group{i * args.groups // args.models}"}
    if args.baseline:
        b = random_baseline(args.n, args.d, args.seed + 1)
        save_embeddings(b, out / "random-baseline.emb", args.dtype, meta)
        manifest[b.model_name] = {"path": "random-baseline.emb", "group": "baseline", "baseline": True}
    _write_json(out / "manifest.json", {"provenance": meta, "models": manifest})
    return 0


def cmd_verify(args) -> int:
    from . import oracles
    from .global_metrics import dcor, rank_table
    from .kernel import center_kernel, cknna, embedding_cka, hsic, inner_product_kernel
    from .data import normalize_rows

    if args.manifest:
        sets = load_sets(load_manifest(args.manifest), min(args.n, oracles.MAX_N), args.seed)
    else:
        sets = [random_baseline(args.n, 8, args.seed, "a"), random_baseline(args.n, 8, args.seed + 1, "b")]
    if sets[0].n_items > oracles.MAX_N:
        raise ArgumentError(f"verify works on at most {oracles.MAX_N} items")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sets = [normalize_rows(s) for s in sets]
    f, g = sets[0], sets[1]
    kf = center_kernel(inner_product_kernel(f), "scalar")
    kg = center_kernel(inner_product_kernel(g), "scalar")
    ranks = rank_table(f).ranks
    checks = {
        "hsic": (hsic(kf, kg), oracles.oracle_hsic(kf, kg)),
        "cka": (embedding_cka(f, g), oracles.oracle_cka(f, g)),
        "cknna": (cknna(f, g, args.k), oracles.oracle_cknna(f, g, args.k)),
        "dcor": (dcor(f, g), oracles.oracle_dcor(f, g)),
        "ranks": (0.0, float(np.max(np.abs(ranks - np.array(oracles.oracle_ranks(f)))))),
    }
    ok = True
    for name, (fast, slow) in checks.items():
        diff = abs(fast - slow)
        ok &= diff <= args.tol
        print(f"{name:6s} fast={fast:.15g} oracle={slow:.15g} |diff|={diff:.3g} "
              f"{'PASS' if diff <= args.tol else 'FAIL'}")
    return 0 if ok else 1


# --- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="repalign", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"repalign {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add_sampling(sp):
        sp.add_argument("--subsample", type=int, default=DEFAULT_SUBSAMPLE,
                        help="subsample to this many items when inputs are larger")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--n-cap", type=int, default=DEFAULT_N_CAP)
        sp.add_argument("--allow-large", action="store_true")

    sp = sub.add_parser("pairwise", help="all-pairs metric matrix")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--metric", choices=("cknna", "cka", "dcor", "ii-forward"), default="cknna")
    sp.add_argument("--k", type=int)
    sp.add_argument("--centering", choices=("scalar", "double"), default="scalar")
    sp.add_argument("--denominator", choices=("literal", "cross"), default="literal")
    sp.add_argument("--similarity", choices=("dot", "cosine"), default="dot")
    sp.add_argument("--neighbors", choices=("kernel", "euclidean"), default="kernel")
    sp.add_argument("--root", action="store_true", help="dcor: report the square root")
    sp.add_argument("--distance", choices=("euclidean", "inner-product"), default="euclidean")
    sp.add_argument("--threads", type=int)
    sp.add_argument("--out", required=True)
    add_sampling(sp)
    sp.set_defaults(func=cmd_pairwise)

    sp = sub.add_parser("condense", help="average a matrix over model groups")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--groups")
    sp.add_argument("--manifest")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_condense)

    sp = sub.add_parser("tree", help="neighbor-joining tree from a similarity matrix")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--alpha", type=float, default=0.5)
    sp.add_argument("--epsilon", type=float, default=1e-12)
    sp.add_argument("--precision", type=int, default=6)
    sp.add_argument("--manifest")
    sp.add_argument("--keep-baselines", action="store_true")
    sp.add_argument("--clip-negative", action="store_true")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_tree)

    sp = sub.add_parser("id", help="intrinsic dimension")
    sp.add_argument("--manifest")
    sp.add_argument("--input", nargs="+")
    sp.add_argument("--method", choices=("twonn", "mle", "both"), default="both")
    sp.add_argument("--k", type=int, default=50)
    sp.add_argument("--discard", type=float, default=0.1)
    sp.add_argument("--cdf", choices=("i/N", "i/(N+1)"), default="i/N")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_id)

    sp = sub.add_parser("imbalance", help="information imbalance for every model pair")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--k", type=int, action="append")
    sp.add_argument("--sweep", action="store_true", help=f"use k in {II_SWEEP}")
    sp.add_argument("--distance", choices=("euclidean", "inner-product"), default="euclidean")
    sp.add_argument("--out", required=True)
    add_sampling(sp)
    sp.set_defaults(func=cmd_imbalance)

    sp = sub.add_parser("convergence", help="alignment to a reference vs performance")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--performance", required=True)
    sp.add_argument("--reference", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_convergence)

    sp = sub.add_parser("energy-mae", help="energy-regression MAE against compositional baselines")
    sp.add_argument("--table", required=True)
    sp.add_argument("--n-fit", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_energy)

    sp = sub.add_parser("synth", help="write a synthetic shared-latent model family")
    sp.add_argument("--out", required=True)
    sp.add_argument("--models", type=int, default=5)
    sp.add_argument("--n", type=int, default=2000)
    sp.add_argument("--d", type=int, default=64)
    sp.add_argument("--d-latent", type=int, default=8)
    sp.add_argument("--noise", type=float, nargs="+", default=[0.5])
    sp.add_argument("--warp", choices=("linear", "tanh-mixed"), default="linear")
    sp.add_argument("--groups", type=int, default=2)
    sp.add_argument("--baseline", action="store_true")
    sp.add_argument("--dtype", choices=("f32", "f64"), default="f64")
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("verify", help="re-check fast metrics against naive oracles")
    sp.add_argument("--manifest")
    sp.add_argument("--n", type=int, default=64)
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return args.func(args)
    except (ArgumentError, FileNotFoundError) as exc:
        parser.print_usage(sys.stderr)
        print(f"repalign {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (DataError, RepalignError, OSError) as exc:
        print(f"repalign {args.command}: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
