"""Command-line interface.

Exit codes: 0 success, 1 validation error or bad usage, 2 I/O or parse error.
Every subcommand first prints a ``#``-prefixed echo of its resolved options.
"""

import argparse
import configparser
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, fields

import numpy as np

from . import __version__
from .corpus import CorpusConfig, generate_corpus, load_manifest, load_sample, save_image
from .corpus.generate import MANIFEST_NAME, resolve_threads
from .corpus.manifest import fmt_float
from .decompose import decompose
from .errors import FitError, ParseError, SpoofOpticsError, TrainingError, ValidationError
from .image import sphere_normal_map
from .imstats import apply_gain, fit_planar_gain, histogram_equalize
from .padlab.anomaly import LivePrior, live_prior_anomaly
from .padlab.attribution import occlusion_attribution
from .padlab.features import (
    FEATURE_NAMES,
    N_FEATURES,
    extract_features,
    parse_streams,
    stream_columns,
)
from .padlab.metrics import evaluate_scores, roc_table
from .padlab.models import ClassifierConfig, train_detector
from .padlab.serialize import load_model, save_model
from .padlab.supcon import EmbeddingConfig
from .selfcheck import run_all
from .sh import lambertian_kernel

FEATURES_MAGIC = "spoofoptics-features v1"
DEFAULT_SEED = 0
DEFAULT_HOLDOUT = 0.5


class UsageError(Exception):
    def __init__(self, message, usage):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; we reserve 2 for I/O, so raise instead."""

    def error(self, message):
        raise UsageError(message, self.format_usage())


# --- helpers ---------------------------------------------------------------


def echo(command, options):
    print(f"# spoofoptics {__version__} {command}")
    for key, value in options.items():
        print(f"# {key} = {value}")
    sys.stdout.flush()


def read_config(path, section):
    """Key/value pairs of ``section`` from an INI-style file (may be absent)."""
    if path is None:
        return {}
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not parser.has_section(section):
        return {}
    return {k: v.strip().strip('"') for k, v in parser.items(section)}


def parallel_map(fn, items, threads):
    """``list(map(fn, items))``, optionally on a thread pool; order is kept."""
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def load_corpus(corpus_dir):
    return load_manifest(os.path.join(corpus_dir, MANIFEST_NAME))


def split_mask(labels, holdout, seed):
    """Boolean test mask: a stratified ``holdout`` fraction chosen by ``seed``."""
    if not 0.0 < holdout < 1.0:
        raise ValidationError("holdout must be in (0, 1)")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    test = np.zeros(len(labels), dtype=bool)
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        k = int(round(holdout * idx.size))
        test[rng.permutation(idx)[:k]] = True
    return test


def select(subset, labels, holdout, seed):
    if subset == "all":
        return np.ones(len(labels), dtype=bool)
    test = split_mask(labels, holdout, seed)
    return test if subset == "test" else ~test


class _Featurizer:
    def __init__(self, corpus_dir, equalize):
        self.corpus_dir = corpus_dir
        self.equalize = equalize
        self.kernel = lambertian_kernel(2)
        self._normals = {}

    def normals(self, shape):
        if shape[0] != shape[1]:
            raise ValidationError(f"corpus images must be square, got {shape}")
        if shape not in self._normals:
            self._normals[shape] = sphere_normal_map(shape[0])
        return self._normals[shape]

    def image(self, record):
        img = load_sample(self.corpus_dir, record)
        return histogram_equalize(img) if self.equalize else img

    def features_of(self, img):
        nm = self.normals(img.shape)
        return extract_features(img, decompose(img, nm, self.kernel), nm).values

    def __call__(self, record):
        return self.features_of(self.image(record))


def write_feature_table(path, ids, labels, matrix, equalize):
    lines = [f"# {FEATURES_MAGIC} equalize={int(equalize)}", "\t".join(("id", "label") + FEATURE_NAMES)]
    for rid, lab, row in zip(ids, labels, matrix):
        lines.append("\t".join([rid, str(lab)] + [fmt_float(v) for v in row]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_feature_table(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(f"# {FEATURES_MAGIC}"):
        raise ParseError(f"{path}: expected header '# {FEATURES_MAGIC}'", line=1)
    equalize = lines[0].rstrip().endswith("equalize=1")
    if len(lines) < 2 or tuple(lines[1].split("\t")) != ("id", "label") + FEATURE_NAMES:
        raise ParseError(f"{path}: unexpected column header", line=2)
    ids, labels, rows = [], [], []
    for i, line in enumerate(lines[2:], start=3):
        parts = line.split("\t")
        if len(parts) != N_FEATURES + 2:
            raise ParseError(f"{path}: expected {N_FEATURES + 2} fields", line=i)
        try:
            labels.append(int(parts[1]))
            rows.append([float(v) for v in parts[2:]])
        except ValueError as exc:
            raise ParseError(f"{path}: bad number ({exc})", line=i) from exc
        ids.append(parts[0])
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), N_FEATURES)
    return ids, np.array(labels, dtype=np.int64), matrix, equalize


def features_from_args(args, equalize):
    """(ids, labels, matrix) from ``--features`` or by featurizing ``--corpus``."""
    if args.features:
        ids, labels, matrix, table_eq = read_feature_table(args.features)
        if table_eq != equalize:
            raise ValidationError(
                f"feature table was computed with equalize={int(table_eq)}, "
                f"but equalize={int(equalize)} was requested"
            )
        return ids, labels, matrix
    if not args.corpus:
        raise ValidationError("need --features or --corpus")
    manifest = load_corpus(args.corpus)
    feat = _Featurizer(args.corpus, equalize)
    rows = parallel_map(feat, manifest.records, args.threads)
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), N_FEATURES)
    return [r.id for r in manifest.records], np.array(manifest.labels()), matrix


# --- subcommands -----------------------------------------------------------


def cmd_shcheck(args):
    echo("shcheck", {"seed": args.seed, "lights": args.lights})
    checks = run_all(seed=args.seed, n_lights=args.lights)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return 0 if not failed else 1


def cmd_gen(args):
    options = read_config(args.config, "corpus")
    for f in fields(CorpusConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            options[f.name] = value
    options["seed"] = args.seed
    cfg = CorpusConfig.from_mapping(options)
    echo("gen", {"out": args.out, "threads": args.threads, **asdict(cfg)})
    manifest = generate_corpus(cfg, args.out, threads=args.threads)
    print(f"wrote {len(manifest.records)} samples to {args.out}")
    return 0


def cmd_decompose(args):
    echo("decompose", {"corpus": args.corpus, "out": args.out, "threads": args.threads})
    manifest = load_corpus(args.corpus)
    os.makedirs(args.out, exist_ok=True)
    feat = _Featurizer(args.corpus, equalize=False)

    def run(record):
        img = feat.image(record)
        dec = decompose(img, feat.normals(img.shape), feat.kernel)
        stem = os.path.join(args.out, record.id)
        save_image(stem + ".albedo.pfm", dec.albedo)
        save_image(stem + ".shading.pfm", dec.shading)
        save_image(stem + ".residual.pfm", dec.residual)
        return dec.leakage, dec.residual_fraction

    results = parallel_map(run, manifest.records, args.threads)
    lines = ["id\tlabel\tleakage\tresidual_fraction"]
    for rec, (leak, frac) in zip(manifest.records, results):
        lines.append(f"{rec.id}\t{rec.label}\t{fmt_float(leak)}\t{fmt_float(frac)}")
    with open(os.path.join(args.out, "leakage.tsv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"decomposed {len(results)} samples into {args.out}")
    return 0


def cmd_featurize(args):
    echo(
        "featurize",
        {"corpus": args.corpus, "out": args.out, "equalize": args.equalize, "threads": args.threads},
    )
    args.features = None
    ids, labels, matrix = features_from_args(args, args.equalize)
    write_feature_table(args.out, ids, labels, matrix, args.equalize)
    print(f"wrote {len(ids)} feature rows to {args.out}")
    return 0


def cmd_train(args):
    clf_opts = read_config(args.config, "classifier")
    emb_opts = read_config(args.config, "embedding")
    clf_cfg = _dataclass_from(ClassifierConfig, clf_opts, seed=args.seed)
    emb_cfg = _dataclass_from(EmbeddingConfig, emb_opts, seed=args.seed)
    streams = parse_streams(args.streams)
    echo(
        "train",
        {
            "features": args.features,
            "corpus": args.corpus,
            "out": args.out,
            "streams": ",".join(streams),
            "supcon": args.supcon,
            "equalize": args.equalize,
            "live_only": args.live_only,
            "subset": args.subset,
            "holdout": args.holdout,
            "seed": args.seed,
            **{f"classifier.{k}": v for k, v in asdict(clf_cfg).items()},
            **({f"embedding.{k}": v for k, v in asdict(emb_cfg).items()} if args.supcon else {}),
        },
    )
    _, labels, matrix = features_from_args(args, args.equalize)
    keep = select(args.subset, labels, args.holdout, args.seed)
    x, y = matrix[keep], labels[keep]
    if args.live_only:
        prior = live_prior_anomaly(x[y == 1], columns=stream_columns(streams))
        save_model(args.out, prior)
        print(f"fitted live prior on {int(np.sum(y == 1))} live samples")
    else:
        det = train_detector(
            x,
            y,
            streams,
            supcon=args.supcon,
            equalize=args.equalize,
            classifier_cfg=clf_cfg,
            embedding_cfg=emb_cfg,
        )
        save_model(args.out, det)
        if det.embedding is not None and det.embedding.losses:
            print(f"supcon loss {det.embedding.losses[0]:.6f} -> {det.embedding.losses[-1]:.6f}")
        print(f"trained on {len(y)} samples ({int(np.sum(y == 1))} live)")
    print(f"model written to {args.out}")
    return 0


def cmd_eval(args):
    echo(
        "eval",
        {
            "model": args.model,
            "features": args.features,
            "corpus": args.corpus,
            "subset": args.subset,
            "holdout": args.holdout,
            "seed": args.seed,
            "roc": args.roc,
        },
    )
    model = load_model(args.model)
    equalize = getattr(model, "equalize", False)
    _, labels, matrix = features_from_args(args, equalize)
    keep = select(args.subset, labels, args.holdout, args.seed)
    x, y = matrix[keep], labels[keep]
    if isinstance(model, LivePrior):
        # liveness = -distance; accept when within the prior's live radius
        metrics = evaluate_scores(-model.score(x), y, -model.radius)
    else:
        metrics = evaluate_scores(model.score(x), y, model.threshold)
    print(f"samples\t{len(y)} ({int(np.sum(y == 1))} live, {int(np.sum(y == 0))} spoof)")
    print(metrics.report())
    if args.roc:
        with open(args.roc, "w", encoding="utf-8") as fh:
            fh.write(roc_table(metrics.roc))
        print(f"roc data written to {args.roc}")
    return 0


def cmd_attrib(args):
    echo(
        "attrib",
        {
            "model": args.model,
            "corpus": args.corpus,
            "out": args.out,
            "ids": ",".join(args.ids) if args.ids else "all",
            "patch": args.patch,
            "stride": args.stride,
        },
    )
    model = load_model(args.model)
    if isinstance(model, LivePrior):
        raise ValidationError("attribution needs a trained detector, not a live prior")
    manifest = load_corpus(args.corpus)
    by_id = manifest.by_id()
    ids = args.ids or [r.id for r in manifest.records]
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise ValidationError(f"unknown sample id(s): {missing}")
    os.makedirs(args.out, exist_ok=True)
    feat = _Featurizer(args.corpus, model.equalize)

    def score(img):
        if model.equalize:
            img = histogram_equalize(img)
        return float(model.score(feat.features_of(img))[0])

    print("id\tlabel\tscore\tmean_abs_heat")
    for rid in ids:
        rec = by_id[rid]
        img = load_sample(args.corpus, rec)
        heat = occlusion_attribution(score, img, args.patch, args.stride)
        save_image(os.path.join(args.out, f"{rid}.heat.pfm"), heat)
        print(f"{rid}\t{rec.label}\t{score(img):.6f}\t{np.mean(np.abs(heat.values())):.6e}")
    return 0


def cmd_gainfit(args):
    echo("gainfit", {"corpus": args.corpus, "model": args.model, "seed": args.seed})
    manifest = load_corpus(args.corpus)
    by_id = manifest.by_id()
    print("spoof\tsource\tgamma\ta\tb\tc\tfit_a\tfit_b\tfit_c\tmax_abs_err")
    fitted, lives = [], []
    for rec in manifest.records:
        if rec.is_live:
            continue
        live = load_sample(args.corpus, by_id[rec.source])
        spoof = load_sample(args.corpus, rec)
        f = fit_planar_gain(live, spoof)
        err = max(abs(f.a - rec.field[0]), abs(f.b - rec.field[1]), abs(f.c - rec.field[2]))
        fitted.append(f)
        lives.append(live)
        vals = [rec.gamma, *rec.field, f.a, f.b, f.c, err]
        print("\t".join([rec.id, rec.source] + [f"{v:.9g}" for v in vals]))
    if not fitted:
        print("no spoof samples")
        return 0
    mean_field = np.mean([(f.a, f.b, f.c) for f in fitted], axis=0)
    print(f"mean fitted field\ta={mean_field[0]:.6g}\tb={mean_field[1]:.6g}\tc={mean_field[2]:.6g}")
    if args.model:
        model = load_model(args.model)
        if isinstance(model, LivePrior):
            raise ValidationError("gain shift report needs a trained detector")
        feat = _Featurizer(args.corpus, model.equalize)

        def score(img):
            if model.equalize:
                img = histogram_equalize(img)
            return float(model.score(feat.features_of(img))[0])

        # each live image under the gain fitted on its own pair
        before = np.array([score(im) for im in lives])
        after = np.array([score(apply_gain(im, f)) for im, f in zip(lives, fitted)])
        print(f"live score median before gain\t{np.median(before):.6f}")
        print(f"live score median after gain\t{np.median(after):.6f}")
        print(f"median delta (negative = toward spoof)\t{np.median(after - before):.6f}")
    return 0


def _dataclass_from(cls, options, **overrides):
    kwargs = {}
    types = {f.name: f.type for f in fields(cls)}
    for key, value in options.items():
        if key not in types:
            raise ValidationError(f"unknown {cls.__name__} option {key!r}")
        try:
            kwargs[key] = int(value) if types[key] in (int, "int") else float(value)
        except ValueError:
            raise ValidationError(f"option {key}={value!r} is not a number") from None
    kwargs.update(overrides)
    return cls(**kwargs)


# --- parser ----------------------------------------------------------------


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="master seed (default 0)")
    common.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker threads; default from SPOOFOPTICS_THREADS, 0 = all cores",
    )

    parser = _Parser(prog="spoofoptics", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"spoofoptics {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("shcheck", parents=[common], help="run the harmonic identity suite")
    p.add_argument("--lights", type=_positive_int, default=50)
    p.set_defaults(func=cmd_shcheck)

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--config", help="INI-style file with a [corpus] section")
    p.add_argument("--out", default="corpus")
    for f in fields(CorpusConfig):
        if f.name == "seed":
            continue
        p.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=f.type, default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("decompose", parents=[common], help="albedo/shading/residual images")
    p.add_argument("--corpus", default="corpus")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("featurize", parents=[common], help="corpus -> feature table")
    p.add_argument("--corpus", default="corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--equalize", action="store_true", help="histogram-equalise images first")
    p.set_defaults(func=cmd_featurize)

    def data_args(p):
        p.add_argument("--features", help="feature table from 'featurize'")
        p.add_argument("--corpus", help="corpus directory (featurized on the fly)")
        p.add_argument("--subset", choices=("train", "test", "all"), default="train")
        p.add_argument("--holdout", type=float, default=DEFAULT_HOLDOUT, help="test fraction")

    p = sub.add_parser("train", parents=[common], help="train a detector or live prior")
    data_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="INI-style file with [classifier] / [embedding] sections")
    p.add_argument("--streams", default="full", help="full, no-albedo, no-shading, no-image or a list")
    p.add_argument("--supcon", action="store_true", help="contrastive pretraining of an embedding")
    p.add_argument("--equalize", action="store_true", help="features from equalised images")
    p.add_argument("--live-only", action="store_true", help="fit the live-only anomaly prior")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="APCER/BPCER/ACER and TPR@FPR report")
    data_args(p)
    p.set_defaults(subset="test")
    p.add_argument("--model", required=True)
    p.add_argument("--roc", help="write ROC points (fpr tpr threshold) to this file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attrib", parents=[common], help="occlusion heat maps")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", default="corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--ids", nargs="*", help="sample ids (default: all)")
    p.add_argument("--patch", type=_positive_int, default=8)
    p.add_argument("--stride", type=_positive_int, default=4)
    p.set_defaults(func=cmd_attrib)

    p = sub.add_parser("gainfit", parents=[common], help="pairwise planar gain regression")
    p.add_argument("--corpus", default="corpus")
    p.add_argument("--model", help="also report the live score shift under each pair's fitted gain")
    p.set_defaults(func=cmd_gainfit)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.threads = resolve_threads(args.threads)
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(exc.usage)
        sys.stderr.write(f"spoofoptics: error: {exc}\n")
        return 1
    except (ValidationError, FitError, TrainingError) as exc:
        sys.stderr.write(f"spoofoptics: error: {exc}\n")
        return 1
    except (ParseError, OSError) as exc:
        sys.stderr.write(f"spoofoptics: I/O error: {exc}\n")
        return 2
    except SpoofOpticsError as exc:
        sys.stderr.write(f"spoofoptics: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
