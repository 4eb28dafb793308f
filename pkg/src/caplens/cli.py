"""Command-line interface orchestrating the annotation/analysis pipeline.

Stages communicate through files (canonical JSONL corpora, label JSONL,
probability JSONL, dataset manifests, ``.cemb`` embedding containers), so
every stage can run on a machine that only has its own inputs. Each command
writes a run manifest next to its outputs; all randomness flows from
explicit ``--seed`` flags recorded there.

Exit codes: 0 success, 1 user error (bad flags, malformed or missing
inputs), 2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import traceback
from pathlib import Path

from . import __version__
from .analysis import (
    class_expectations,
    count_curve,
    crosslingual_agreement,
    translated_agreement,
)
from .annotators import (
    SUPPORTED_LANGUAGES,
    Property,
    annotate_corpus,
    read_labels,
    write_labels,
)
from .conllu import attach_parses, parse_conllu_file
from .corpus import (
    Corpus,
    Language,
    Origin,
    import_coco,
    load_canonical,
    merge,
    write_canonical,
)
from .dataset import build_dataset, kfold, read_dataset, write_dataset
from .embeddings import read_embeddings
from .errors import CaplensError
from .manifest import write_run_manifest
from .stats import (
    image_probabilities,
    prevalence_table,
    read_probabilities,
    scope_string,
    write_probabilities,
)
from .svm import CvResult, SvmConfig, cross_validate

PROPERTY_COLUMNS = [p.value for p in Property]


def _language(code: str) -> Language:
    try:
        return Language(code)
    except ValueError:
        raise CaplensError(f"unknown language code {code!r} (en|de|zh|ja)")


def _manifest(args: argparse.Namespace, out: Path, inputs: list) -> None:
    out_dir = out if out.is_dir() else out.parent
    config = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in vars(args).items()
        if k not in ("func", "command") and v is not None
    }
    seeds = {"seed": args.seed} if getattr(args, "seed", None) is not None else {}
    write_run_manifest(out_dir, args.command, config, seeds, inputs)


# --------------------------------------------------------------------------
# Subcommand handlers
# --------------------------------------------------------------------------

def cmd_ingest_coco(args) -> int:
    corpus = import_coco(
        args.captions,
        args.instances,
        language=_language(args.lang),
        dataset_name=args.dataset,
        origin=Origin(args.origin),
        image_source=args.source,
    )
    write_canonical(corpus, args.out)
    inputs = [args.captions] + ([args.instances] if args.instances else [])
    _manifest(args, Path(args.out), inputs)
    print(f"wrote {args.out}: {len(corpus.images)} images, "
          f"{len(corpus.captions)} captions")
    return 0


def cmd_ingest_canonical(args) -> int:
    corpora = [load_canonical(path) for path in args.inputs]
    corpus = corpora[0] if len(corpora) == 1 else merge(corpora)
    write_canonical(corpus, args.out)
    _manifest(args, Path(args.out), list(args.inputs))
    print(f"wrote {args.out}: {len(corpus.images)} images, "
          f"{len(corpus.captions)} captions")
    return 0


def cmd_annotate(args) -> int:
    corpus = load_canonical(args.corpus)
    if args.lang:
        corpus = corpus.subset(languages={_language(args.lang)})
    parses = None
    if args.conllu:
        parses = attach_parses(corpus, parse_conllu_file(args.conllu))
        print(f"parse coverage: {parses.coverage:.3f} "
              f"({parses.n_unknown} unknown, {parses.n_duplicates} duplicates)")
    labels = annotate_corpus(corpus, parses, Property(args.property), jobs=args.jobs)
    write_labels(labels, args.out)
    inputs = [args.corpus] + ([args.conllu] if args.conllu else [])
    _manifest(args, Path(args.out), inputs)
    outcomes = {}
    for label in labels.values():
        outcomes[label.outcome.value] = outcomes.get(label.outcome.value, 0) + 1
    print(f"wrote {args.out}: {outcomes}")
    return 0


def cmd_stats_probabilities(args) -> int:
    corpus = load_canonical(args.corpus)
    labels = read_labels(args.labels)
    languages = {_language(args.lang)} if args.lang else None
    origins = {Origin(args.origin)} if args.origin else None
    probs = image_probabilities(
        corpus, labels, Property(args.property), languages, origins
    )
    write_probabilities(probs, args.out)
    _manifest(args, Path(args.out), [args.corpus, args.labels])
    print(f"wrote {args.out}: {len(probs)} images")
    return 0


def _parse_label_map(spec: str) -> dict[Property, Path]:
    out = {}
    for part in spec.split(","):
        name, _, path = part.partition("=")
        if not path:
            raise CaplensError(
                f"bad --labels entry {part!r}; expected property=path"
            )
        out[Property(name.strip())] = Path(path)
    return out


def cmd_stats_prevalence(args) -> int:
    corpus = load_canonical(args.corpus)
    label_paths = _parse_label_map(args.labels)
    annotations = {prop: read_labels(path) for prop, path in label_paths.items()}
    table = prevalence_table(corpus, annotations)
    languages = sorted({lang.value for lang, _ in table})
    with Path(args.out).open("w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["language"] + PROPERTY_COLUMNS)
        for lang in languages:
            cells = [lang]
            for prop in Property:
                cell = table.get((Language(lang), prop))
                cells.append(
                    f"{cell.value:.6g} ({cell.n_images})" if cell else ""
                )
            writer.writerow(cells)
    _manifest(args, Path(args.out),
              [args.corpus] + [str(p) for p in label_paths.values()])
    print(f"wrote {args.out}: {len(table)} cells")
    return 0


def cmd_build_dataset(args) -> int:
    probs = read_probabilities(args.probs)
    dataset = build_dataset(
        probs.values(),
        args.seed,
        property=Property(args.property),
        scope=args.scope,
    )
    write_dataset(dataset, args.out)
    _manifest(args, Path(args.out), [args.probs])
    print(f"wrote {args.out}: {len(dataset.items)} items "
          f"(threshold {dataset.threshold:.6g})")
    return 0


def cmd_train(args) -> int:
    dataset = read_dataset(args.dataset)
    matrix = read_embeddings(args.embeddings)
    if args.gamma != "scale":
        try:
            gamma = float(args.gamma)
        except ValueError:
            raise CaplensError(f"--gamma must be a number or 'scale', got {args.gamma!r}")
    else:
        gamma = "scale"
    config = SvmConfig(
        C=args.C,
        gamma=gamma,
        tolerance=args.tol,
        max_passes=args.max_passes,
    )
    folds = kfold(dataset, args.folds, args.seed)
    result = cross_validate(
        dataset, folds, matrix, config, jobs=args.jobs,
        subsample=args.subsample, subsample_seed=args.seed,
    )
    doc = {
        "property": result.property.value,
        "scope": result.scope,
        "pretraining_tag": result.pretraining_tag,
        "folds": args.folds,
        "seed": args.seed,
        "subsample": args.subsample,
        "fold_accuracies": result.fold_accuracies,
        "mean": result.mean,
        "std": result.std,
        "config": {
            "C": config.C,
            "gamma": config.gamma,
            "tolerance": config.tolerance,
            "max_passes": config.max_passes,
        },
    }
    with Path(args.out).open("w", encoding="utf-8", newline="\n") as fp:
        json.dump(doc, fp, ensure_ascii=False, indent=2)
        fp.write("\n")
    _manifest(args, Path(args.out), [args.dataset, args.embeddings])
    print(f"wrote {args.out}: {result.mean:.1f} ± {result.std:.1f}")
    return 0


def cmd_analyze_classes(args) -> int:
    corpus = load_canonical(args.corpus)
    probs = read_probabilities(args.probs)
    datasets = set(args.datasets.split(",")) if args.datasets else None
    result = class_expectations(
        corpus, probs, min_instances=args.min_instances, datasets=datasets
    )
    with Path(args.out).open("w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["class", "n_images", "expectation"])
        for entry in result:
            writer.writerow([entry.class_name, entry.n_images,
                             f"{entry.expectation:.6f}"])
    _manifest(args, Path(args.out), [args.corpus, args.probs])
    print(f"wrote {args.out}: {len(result)} classes")
    return 0


def cmd_analyze_counts(args) -> int:
    corpus = load_canonical(args.corpus)
    paths = [p.strip() for p in args.labels.split(",")]
    if len(paths) != 2:
        raise CaplensError("--labels expects two files: <num>.jsonl,<quant>.jsonl")
    languages = {_language(args.lang)} if args.lang else None
    num_probs = image_probabilities(
        corpus, read_labels(paths[0]), Property.NUM, languages
    )
    quant_probs = image_probabilities(
        corpus, read_labels(paths[1]), Property.QUANT, languages
    )
    datasets = set(args.datasets.split(",")) if args.datasets else None
    curve = count_curve(
        corpus, num_probs, quant_probs, min_bucket=args.min_bucket, datasets=datasets
    )
    with Path(args.out).open("w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["k", "n_images", "e_num", "e_quant", "is_peak"])
        for point in curve.points:
            writer.writerow([
                point.k, point.n_images, f"{point.e_num:.6f}",
                f"{point.e_quant:.6f}", str(point.k == curve.peak_k).lower(),
            ])
    _manifest(args, Path(args.out), [args.corpus] + paths)
    print(f"wrote {args.out}: {len(curve.points)} buckets, peak at {curve.peak_k}")
    return 0


def cmd_analyze_crosslingual(args) -> int:
    corpus = load_canonical(args.corpus)
    labels = read_labels(args.labels)
    property = Property(args.property)
    lang_a, lang_b = (_language(code) for code in args.langs.split(","))
    probs_a = image_probabilities(corpus, labels, property, {lang_a})
    probs_b = image_probabilities(corpus, labels, property, {lang_b})
    result = crosslingual_agreement(
        probs_a, probs_b, property, (lang_a.value, lang_b.value)
    )
    doc = {
        "corpus": corpus.name,
        "property": property.value,
        "language_pair": list(result.language_pair),
        "n_images": result.n_images,
        "r": result.r,
    }
    with Path(args.out).open("w", encoding="utf-8", newline="\n") as fp:
        json.dump(doc, fp, ensure_ascii=False, indent=2)
        fp.write("\n")
    _manifest(args, Path(args.out), [args.corpus, args.labels])
    print(f"wrote {args.out}: r={result.r:.4f} over {result.n_images} images")
    return 0


def cmd_analyze_translated(args) -> int:
    corpus = load_canonical(args.corpus)
    labels = read_labels(args.labels)
    property = Property(args.property)
    lang = _language(args.lang)
    original = image_probabilities(
        corpus, labels, property, {lang}, {Origin.ORIGINAL}
    )
    translated = image_probabilities(
        corpus, labels, property, {lang}, {Origin.TRANSLATED}
    )
    english = image_probabilities(corpus, labels, property, {Language.EN})
    r_en, r_orig = translated_agreement(
        original, translated, english, property, lang.value
    )
    doc = {
        "corpus": corpus.name,
        "property": property.value,
        "language": lang.value,
        "n_images": r_en.n_images,
        "r_english_translated": r_en.r,
        "r_original_translated": r_orig.r,
    }
    with Path(args.out).open("w", encoding="utf-8", newline="\n") as fp:
        json.dump(doc, fp, ensure_ascii=False, indent=2)
        fp.write("\n")
    _manifest(args, Path(args.out), [args.corpus, args.labels])
    print(f"wrote {args.out}: en-trans r={r_en.r:.4f}, "
          f"orig-trans r={r_orig.r:.4f}")
    return 0


# --------------------------------------------------------------------------
# Report assembly
# --------------------------------------------------------------------------

def _format_cv(doc: dict) -> str:
    return f"{doc['mean']:.1f} ± {doc['std']:.1f}"


def _cv_docs(results: Path) -> list[dict]:
    return [
        json.loads(path.read_text(encoding="utf-8"))
        for path in sorted(results.glob("cv*.json"))
    ]


def report_tables(results_dir: str | Path, out_dir: str | Path,
                  tables: set[int]) -> list[Path]:
    """Assemble table-shaped CSVs from the artifacts in a results directory.

    Expects ``prevalence.csv`` (table 2), ``cv*.json`` (tables 3 and 4) and
    ``agreement*.json`` (table 5). A missing artifact class is an error
    naming what was looked for.
    """
    results = Path(results_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    if 2 in tables:
        source = results / "prevalence.csv"
        if not source.is_file():
            raise CaplensError(f"missing upstream artifact: {source}")
        target = out / "table2.csv"
        target.write_bytes(source.read_bytes())
        written.append(target)

    if 3 in tables or 4 in tables:
        docs = _cv_docs(results)
        if not docs:
            raise CaplensError(
                f"missing upstream artifact: no cv*.json in {results}"
            )
        if 3 in tables:
            rows: dict[str, dict[str, str]] = {}
            for doc in docs:
                if doc["scope"] == "all":
                    rows.setdefault(doc["pretraining_tag"], {})[
                        doc["property"]
                    ] = _format_cv(doc)
            target = out / "table3.csv"
            with target.open("w", encoding="utf-8", newline="") as fp:
                writer = csv.writer(fp, lineterminator="\n")
                writer.writerow(["pretraining"] + PROPERTY_COLUMNS)
                for tag in sorted(rows):
                    writer.writerow(
                        [tag] + [rows[tag].get(p, "") for p in PROPERTY_COLUMNS]
                    )
            written.append(target)
        if 4 in tables:
            rows = {}
            for doc in docs:
                if doc["scope"] != "all":
                    key = f"{doc['scope']}/{doc['pretraining_tag']}"
                    rows.setdefault(key, {})[doc["property"]] = _format_cv(doc)
            target = out / "table4.csv"
            with target.open("w", encoding="utf-8", newline="") as fp:
                writer = csv.writer(fp, lineterminator="\n")
                writer.writerow(["scope/pretraining"] + PROPERTY_COLUMNS)
                for key in sorted(rows):
                    writer.writerow(
                        [key] + [rows[key].get(p, "") for p in PROPERTY_COLUMNS]
                    )
            written.append(target)

    if 5 in tables:
        docs = [
            json.loads(path.read_text(encoding="utf-8"))
            for path in sorted(results.glob("agreement*.json"))
        ]
        if not docs:
            raise CaplensError(
                f"missing upstream artifact: no agreement*.json in {results}"
            )
        target = out / "table5.csv"
        with target.open("w", encoding="utf-8", newline="") as fp:
            writer = csv.writer(fp, lineterminator="\n")
            writer.writerow(["corpus", "property", "lang_a", "lang_b",
                             "n_images", "r"])
            for doc in docs:
                writer.writerow([
                    doc["corpus"], doc["property"], doc["language_pair"][0],
                    doc["language_pair"][1], doc["n_images"], f"{doc['r']:.4f}",
                ])
        written.append(target)
    return written


def cmd_report(args) -> int:
    try:
        tables = {int(t) for t in args.tables.split(",")}
    except ValueError:
        raise CaplensError(f"--tables must be numbers like 2,3,4,5; got {args.tables!r}")
    if not tables <= {2, 3, 4, 5}:
        raise CaplensError(f"--tables entries must be in 2..5; got {sorted(tables)}")
    written = report_tables(args.results, args.out, tables)
    _manifest(args, Path(args.out), [str(p) for p in written])
    for path in written:
        print(f"wrote {path}")
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="caplens",
        description="Linguistic property annotation and analysis for "
                    "multilingual image-caption corpora.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="convert corpora to canonical JSONL")
    ingest_sub = ingest.add_subparsers(dest="ingest_kind", required=True)

    coco = ingest_sub.add_parser("coco", help="import COCO-schema JSON")
    coco.add_argument("--captions", required=True)
    coco.add_argument("--instances")
    coco.add_argument("--lang", required=True)
    coco.add_argument("--dataset", required=True)
    coco.add_argument("--source", help="shared image pool name (default: dataset)")
    coco.add_argument("--origin", choices=["original", "translated"],
                      default="original")
    coco.add_argument("--out", required=True)
    coco.set_defaults(func=cmd_ingest_coco, command="ingest coco")

    canonical = ingest_sub.add_parser("canonical",
                                      help="validate and merge canonical files")
    canonical.add_argument("--in", dest="inputs", nargs="+", required=True)
    canonical.add_argument("--out", required=True)
    canonical.set_defaults(func=cmd_ingest_canonical, command="ingest canonical")

    annotate = sub.add_parser("annotate", help="label captions for one property")
    annotate.add_argument("--corpus", required=True)
    annotate.add_argument("--conllu", help="CoNLL-U parses for syntactic rules")
    annotate.add_argument("--property", required=True,
                          choices=[p.value for p in Property])
    annotate.add_argument("--lang", help="restrict to one language")
    annotate.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                      help="worker count (default: available parallelism)")
    annotate.add_argument("--out", required=True)
    annotate.set_defaults(func=cmd_annotate, command="annotate")

    stats = sub.add_parser("stats", help="per-image probabilities and prevalence")
    stats_sub = stats.add_subparsers(dest="stats_kind", required=True)

    probabilities = stats_sub.add_parser("probabilities")
    probabilities.add_argument("--corpus", required=True)
    probabilities.add_argument("--labels", required=True)
    probabilities.add_argument("--property", required=True,
                               choices=[p.value for p in Property])
    probabilities.add_argument("--lang")
    probabilities.add_argument("--origin", choices=["original", "translated"])
    probabilities.add_argument("--out", required=True)
    probabilities.set_defaults(func=cmd_stats_probabilities,
                               command="stats probabilities")

    prevalence = stats_sub.add_parser("prevalence")
    prevalence.add_argument("--corpus", required=True)
    prevalence.add_argument("--labels", required=True,
                            help="comma-separated property=labels.jsonl pairs")
    prevalence.add_argument("--out", required=True)
    prevalence.set_defaults(func=cmd_stats_prevalence, command="stats prevalence")

    build = sub.add_parser("build-dataset",
                           help="binarize and balance per-image probabilities")
    build.add_argument("--probs", required=True)
    build.add_argument("--property", required=True,
                       choices=[p.value for p in Property])
    build.add_argument("--scope", default="all")
    build.add_argument("--seed", type=int, required=True)
    build.add_argument("--out", required=True)
    build.set_defaults(func=cmd_build_dataset, command="build-dataset")

    train_p = sub.add_parser("train", help="cross-validated SVM accuracy")
    train_p.add_argument("--dataset", required=True)
    train_p.add_argument("--embeddings", required=True)
    train_p.add_argument("--folds", type=int, default=5)
    train_p.add_argument("--seed", type=int, required=True)
    train_p.add_argument("--C", type=float, default=1.0)
    train_p.add_argument("--gamma", default="scale")
    train_p.add_argument("--tol", type=float, default=1e-3)
    train_p.add_argument("--max-passes", type=int, default=1_000_000)
    train_p.add_argument("--subsample", type=int,
                         help="seeded cap on each fold's training split")
    train_p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                         help="worker count (default: available parallelism)")
    train_p.add_argument("--out", required=True)
    train_p.set_defaults(func=cmd_train, command="train")

    analyze = sub.add_parser("analyze", help="corpus analyses")
    analyze_sub = analyze.add_subparsers(dest="analyze_kind", required=True)

    classes = analyze_sub.add_parser("classes")
    classes.add_argument("--corpus", required=True)
    classes.add_argument("--probs", required=True)
    classes.add_argument("--min-instances", type=int, default=2)
    classes.add_argument("--datasets", help="restrict to these dataset names")
    classes.add_argument("--out", required=True)
    classes.set_defaults(func=cmd_analyze_classes, command="analyze classes")

    counts = analyze_sub.add_parser("counts")
    counts.add_argument("--corpus", required=True)
    counts.add_argument("--labels", required=True,
                        help="two files: numerals.jsonl,quantifiers.jsonl")
    counts.add_argument("--lang")
    counts.add_argument("--min-bucket", type=int, default=100)
    counts.add_argument("--datasets")
    counts.add_argument("--out", required=True)
    counts.set_defaults(func=cmd_analyze_counts, command="analyze counts")

    crossling = analyze_sub.add_parser("crosslingual")
    crossling.add_argument("--corpus", required=True)
    crossling.add_argument("--labels", required=True)
    crossling.add_argument("--property", required=True,
                           choices=[p.value for p in Property])
    crossling.add_argument("--langs", required=True, help="pair, e.g. en,de")
    crossling.add_argument("--out", required=True)
    crossling.set_defaults(func=cmd_analyze_crosslingual,
                           command="analyze crosslingual")

    translated = analyze_sub.add_parser("translated")
    translated.add_argument("--corpus", required=True)
    translated.add_argument("--labels", required=True)
    translated.add_argument("--property", required=True,
                            choices=[p.value for p in Property])
    translated.add_argument("--lang", required=True)
    translated.add_argument("--out", required=True)
    translated.set_defaults(func=cmd_analyze_translated,
                            command="analyze translated")

    report = sub.add_parser("report", help="assemble table-shaped CSVs")
    report.add_argument("--results", required=True)
    report.add_argument("--out", required=True)
    report.add_argument("--tables", default="2,3,4,5")
    report.set_defaults(func=cmd_report, command="report")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except CaplensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
