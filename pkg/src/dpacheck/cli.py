"""Command-line front end for the completeness-checking pipeline.

Layout: one binary, many subcommands (``preprocess``, ``split``, ``stats``,
``balance``, ``augment``, ``train``, ``grid``, ``fewshot``, ``predict``,
``check``, ``evaluate``, ``kappa``, ``bench``, ``validate-store``).

Conventions shared by every subcommand:

* ``--config FILE`` supplies defaults from a JSON object whose keys are the
  long flag names; flags given on the command line win.
* every artifact-writing command writes ``manifest.json`` into its ``--out``
  directory, recording the resolved settings (digested), the seed, input
  file digests, and output file digests — reruns with identical inputs and
  seeds produce byte-identical artifacts and manifests.
* exit codes: 0 success, 1 usage error, 2 data/validation error,
  3 external-service error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

import dpacheck
from dpacheck.balance import (
    BUILTIN_RECIPES,
    MT_ENDPOINT_ENV_VAR,
    HttpMtClient,
    IdentityMtClient,
    SynonymLexicon,
    dataset_from_sentences,
    random_oversample,
    random_undersample,
    under_oversample,
    build_variant,
    Resources,
)
from dpacheck.checker import digest_file, render_report, sha256_hex
from dpacheck.classifiers import (
    ALGORITHMS,
    ClassifierModel,
    Hyperparameters,
    TaskSpec,
    grid_search,
    leaderboard_table,
)
from dpacheck.corpus import (
    LabeledCorpus,
    ProvisionCatalog,
    SplitSpec,
    corpus_stats,
    load_ground_truth,
    split_dpas,
)
from dpacheck.embedding import EmbeddingStore, validate_store
from dpacheck.errors import (
    DataError,
    DivergenceError,
    ExternalServiceError,
    ParseError,
    ValidationError,
)
from dpacheck.eval import (
    benchmark_runtime,
    cohen_kappa,
    kappa_band,
    metrics_table,
)
from dpacheck.fewshot import fit_fewshot, sample_shots
from dpacheck.pipeline import (
    check_document,
    corpus_sentences,
    evaluate_predictions,
    feature_matrix,
    features_for,
    fit_binary_suite,
    fit_on_corpus,
    load_suite,
    predict_sentences,
    save_suite,
)
from dpacheck.preprocess import AliasTable, alias_candidates, normalize, split_sentences

PROG = "dpacheck"

# argparse dest names that configure plumbing rather than behavior; they are
# excluded from the digested settings so a rerun into a different directory
# still produces an identical manifest.
_PLUMBING_KEYS = frozenset({"command", "config", "out"})


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this toolkit reserves 2 for data
    errors, so usage problems are remapped to exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common(sp: argparse.ArgumentParser, *, out: bool) -> None:
    sp.add_argument("--config", help="JSON file of default flag values")
    if out:
        sp.add_argument("--out", required=True, help="output directory")


def _add_hp_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--learning-rate", type=float)
    sp.add_argument("--l2", type=float)
    sp.add_argument("--dropout", type=float)
    sp.add_argument("--n-trees", type=int)
    sp.add_argument("--max-depth", type=int)
    sp.add_argument("--min-leaf", type=int)
    sp.add_argument("--hidden-sizes", help="comma-separated layer widths")
    sp.add_argument("--lstm-hidden", type=int)


def _hp_from_args(args) -> Hyperparameters:
    overrides = {}
    for name in ("epochs", "batch_size", "learning_rate", "l2", "dropout",
                 "n_trees", "max_depth", "min_leaf", "lstm_hidden"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    hidden = getattr(args, "hidden_sizes", None)
    if hidden is not None:
        try:
            overrides["hidden_sizes"] = tuple(
                int(part) for part in str(hidden).split(",") if part.strip()
            )
        except ValueError:
            raise ValidationError(f"bad --hidden-sizes value {hidden!r}")
    return Hyperparameters(**overrides)


def build_parser() -> tuple[_Parser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog=PROG, description=__doc__.splitlines()[0])
    parser.add_argument(
        "--version", action="version", version=f"{PROG} {dpacheck.__version__}"
    )
    subs = parser.add_subparsers(dest="command", required=True)
    by_name: dict[str, argparse.ArgumentParser] = {}

    def sub(name: str, help_text: str, *, out: bool = True):
        sp = subs.add_parser(name, help=help_text, description=help_text)
        _add_common(sp, out=out)
        by_name[name] = sp
        return sp

    sp = sub("preprocess", "segment a raw document into normalized sentences")
    sp.add_argument("--input", required=True, help="raw text document")
    sp.add_argument("--aliases", help="party-name alias table file")
    sp.add_argument("--dpa-id", default="document")

    sp = sub("split", "partition a corpus into train/val/eval by whole DPA")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--catalog", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dev-fraction", type=float, default=0.70)
    sp.add_argument("--val-fraction", type=float, default=0.20,
                    help="fraction of dev held out as val")

    sp = sub("stats", "corpus size and per-provision support counts", out=False)
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--catalog", required=True)
    sp.add_argument("--out", help="optional output directory")

    sp = sub("balance", "resample a corpus (RU, RO, or RUOS)")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--catalog", required=True)
    sp.add_argument("--strategy", required=True, choices=("RU", "RO", "RUOS"))
    sp.add_argument("--seed", type=int, default=0)

    sp = sub("augment", "expand a corpus with a named augmentation recipe")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--catalog", required=True)
    sp.add_argument("--recipe", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--store", help="embedding store (for ER recipes)")
    sp.add_argument("--lexicon", action="append", default=None,
                    help="synonym lexicon file (repeatable, for SR recipes)")
    sp.add_argument("--mt-endpoint",
                    help=f"translation service URL (or ${MT_ENDPOINT_ENV_VAR})")
    sp.add_argument("--identity-mt", action="store_true",
                    help="use the offline identity translation stub")
    sp.add_argument("--pivots", help="comma-separated pivot languages")

    sp = sub("train", "fit a classifier (or a 19-model binary suite)")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--catalog", required=True)
    sp.add_argument("--store", required=True)
    sp.add_argument("--task", required=True, choices=("binary", "multiclass"))
    sp.add_argument("--provision", help="train a single binary model")
    sp.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--split", help="split.json from the split command")
    sp.add_argument("--part", default="dev",
                    choices=("train", "val", "dev", "eval"))
    _add_hp_flags(sp)

    sp = sub("grid", "hyperparameter search scored on the val part")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--catalog", required=True)
    sp.add_argument("--store", required=True)
    sp.add_argument("--task", required=True, choices=("binary", "multiclass"))
    sp.add_argument("--provision")
    sp.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--split", required=True)
    sp.add_argument("--grid", required=True,
                    help="JSON object of hyperparameter value lists, or @file")
    _add_hp_flags(sp)

    sp = sub("fewshot", "contrastive projection plus logistic head")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--catalog", required=True)
    sp.add_argument("--store", required=True)
    sp.add_argument("--task", required=True, choices=("binary", "multiclass"))
    sp.add_argument("--provision")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--split", help="split.json from the split command")
    sp.add_argument("--part", default="dev",
                    choices=("train", "val", "dev", "eval"))
    sp.add_argument("--per-class", type=int, help="shots per class")
    sp.add_argument("--fraction", type=float, help="fraction of each class")
    sp.add_argument("--pairs-per-example", type=int, default=2)
    sp.add_argument("--projection-epochs", type=int)
    sp.add_argument("--projection-lr", type=float)
    _add_hp_flags(sp)

    sp = sub("predict", "per-sentence provision labels for a labeled corpus")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--catalog", required=True)
    sp.add_argument("--store", required=True)
    sp.add_argument("--model", help="multiclass model file")
    sp.add_argument("--suite", help="binary suite directory")
    sp.add_argument("--threshold", type=float)

    sp = sub("check", "completeness report for one raw DPA document")
    sp.add_argument("--dpa", required=True, help="raw text document")
    sp.add_argument("--catalog", required=True)
    sp.add_argument("--store", required=True)
    sp.add_argument("--model", help="multiclass model file")
    sp.add_argument("--suite", help="binary suite directory")
    sp.add_argument("--aliases")
    sp.add_argument("--dpa-id", default="document")
    sp.add_argument("--floor", type=float, default=0.0,
                    help="confidence floor below which support is ignored")
    sp.add_argument("--threshold", type=float)

    sp = sub("evaluate", "DPA-level metrics for a model on a labeled corpus")
    sp.add_argument("--corpus", required=True)
    sp.add_argument("--catalog", required=True)
    sp.add_argument("--store", required=True)
    sp.add_argument("--model")
    sp.add_argument("--suite")
    sp.add_argument("--split", help="split.json from the split command")
    sp.add_argument("--part", default="eval",
                    choices=("train", "val", "dev", "eval"))
    sp.add_argument("--beta", type=float, default=2.0)
    sp.add_argument("--threshold", type=float)

    sp = sub("kappa", "interrater agreement between two label files", out=False)
    sp.add_argument("--a", required=True, dest="file_a",
                    help="labels, one per line")
    sp.add_argument("--b", required=True, dest="file_b")
    sp.add_argument("--out", help="optional output directory")

    sp = sub("bench", "time the user-perspective pipeline on one document",
             out=False)
    sp.add_argument("--dpa", required=True)
    sp.add_argument("--catalog", required=True)
    sp.add_argument("--store", required=True)
    sp.add_argument("--model")
    sp.add_argument("--suite")
    sp.add_argument("--out", help="optional output directory")

    sp = sub("validate-store", "integrity-check an embedding store file",
             out=False)
    sp.add_argument("--store", required=True)

    return parser, by_name


def _merge_config(parser, by_name, argv) -> argparse.Namespace:
    """Apply config-file values as subcommand defaults, flags winning."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    path = Path(args.config)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid config JSON: {exc}", path=str(path))
    if not isinstance(raw, dict):
        raise ValidationError("config file must hold a JSON object")

    sp = by_name[args.command]
    known = {a.dest for a in sp._actions}
    values = {}
    for key, value in raw.items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise ValidationError(
                f"config key {key!r} is not a flag of {args.command!r}"
            )
        values[dest] = value
    sp.set_defaults(**values)
    return parser.parse_args(argv)


def _canonical(value):
    if isinstance(value, dict):
        return {k: _canonical(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def _json_text(obj) -> str:
    return json.dumps(_canonical(obj), indent=2, sort_keys=True) + "\n"


class _OutDir:
    """Collects written artifacts so the manifest can digest them."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.written: dict[str, str] = {}

    def write_text(self, name: str, text: str) -> Path:
        target = self.path / name
        target.write_text(text, encoding="utf-8")
        self.written[name] = digest_file(target)
        return target

    def add(self, name: str) -> Path:
        """Register a file another component already wrote into the dir."""
        target = self.path / name
        self.written[name] = digest_file(target)
        return target

    def manifest(self, args, inputs: dict[str, str], extra: dict | None = None) -> Path:
        settings = {
            k: _canonical(v)
            for k, v in sorted(vars(args).items())
            if k not in _PLUMBING_KEYS
        }
        payload = {
            "tool": PROG,
            "tool_version": dpacheck.__version__,
            "command": args.command,
            "seed": settings.get("seed"),
            "settings": settings,
            "config_digest": sha256_hex(
                json.dumps(settings, sort_keys=True, separators=(",", ":")).encode()
            ),
            "inputs": {
                flag: {"path": str(p), "digest": digest_file(p)}
                for flag, p in sorted(inputs.items())
            },
            "outputs": dict(sorted(self.written.items())),
        }
        if extra:
            payload["details"] = _canonical(extra)
        target = self.path / "manifest.json"
        target.write_text(_json_text(payload), encoding="utf-8")
        return target


def _load_corpus(args) -> LabeledCorpus:
    return load_ground_truth(args.corpus, args.catalog)


def _apply_split(corpus: LabeledCorpus, split_file: str | None, part: str) -> LabeledCorpus:
    if split_file is None:
        return corpus
    try:
        payload = json.loads(Path(split_file).read_text(encoding="utf-8"))
        assignment = payload["assignment"]
    except FileNotFoundError:
        raise ValidationError(f"split file not found: {split_file}")
    except (json.JSONDecodeError, KeyError) as exc:
        raise ParseError(f"bad split file: {exc}", path=str(split_file))
    wanted = ("train", "val") if part == "dev" else (part,)
    ids = [d for d in corpus.dpa_ids if assignment.get(d) in wanted]
    if not ids:
        raise ValidationError(f"split part {part!r} selects no DPAs")
    return corpus.subset(ids, f"{part} of {corpus.provenance}")


def _task_for(args, catalog: ProvisionCatalog) -> TaskSpec:
    if args.task == "multiclass":
        if getattr(args, "provision", None):
            raise ValidationError("--provision only applies to --task binary")
        return TaskSpec.multiclass(catalog.ids)
    provision = getattr(args, "provision", None)
    if not provision:
        raise ValidationError(
            "--task binary needs --provision (or use `train` without "
            "--provision to fit the full suite)"
        )
    if provision not in catalog:
        raise ValidationError(f"unknown provision {provision!r}")
    return TaskSpec.binary(provision)


def _load_predictor(args):
    model_path = getattr(args, "model", None)
    suite_path = getattr(args, "suite", None)
    if bool(model_path) == bool(suite_path):
        raise ValidationError("give exactly one of --model or --suite")
    if model_path:
        predictor = ClassifierModel.load(model_path)
        return predictor, digest_file(model_path)
    suite = load_suite(suite_path)
    return suite, digest_file(Path(suite_path) / "suite.json")


def _examples_jsonl(examples) -> str:
    lines = []
    for ex in examples:
        lines.append(
            json.dumps(
                {
                    "text": ex.text,
                    "label": ex.label,
                    "method": ex.method,
                    "dpa_id": ex.sentence.dpa_id,
                    "sentence_index": ex.sentence.sentence_index,
                },
                sort_keys=True,
                ensure_ascii=False,
                separators=(",", ":"),
            )
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- handlers


def cmd_preprocess(args) -> int:
    text = Path(args.input).read_text(encoding="utf-8")
    inputs = {"input": args.input}
    candidates: list[str] = []
    if args.aliases:
        table = AliasTable.from_file(args.aliases)
        inputs["aliases"] = args.aliases
        result = normalize(text, table)
        candidates = alias_candidates(text, result)
        text = result.text
    segments = split_sentences(text)

    out = _OutDir(args.out)
    lines = [
        json.dumps(
            {"dpa_id": args.dpa_id, "sentence_index": i, "text": seg, "labels": []},
            sort_keys=True,
            ensure_ascii=False,
            separators=(",", ":"),
        )
        for i, seg in enumerate(segments)
    ]
    out.write_text("sentences.jsonl", "\n".join(lines) + "\n")
    if args.aliases:
        out.write_text("alias_candidates.txt", "".join(c + "\n" for c in candidates))
    out.manifest(args, inputs, {"sentences": len(segments),
                                "alias_candidates": len(candidates)})
    print(f"{len(segments)} sentences -> {out.path / 'sentences.jsonl'}")
    return 0


def cmd_split(args) -> int:
    corpus = _load_corpus(args)
    split = split_dpas(
        corpus, SplitSpec(args.seed, args.dev_fraction, args.val_fraction)
    )
    payload = {
        "seed": args.seed,
        "dev_fraction": args.dev_fraction,
        "val_fraction": args.val_fraction,
        "assignment": split.assignment(),
        "counts": {
            part: len(getattr(split, part).dpas)
            for part in ("train", "val", "eval")
        },
    }
    out = _OutDir(args.out)
    out.write_text("split.json", _json_text(payload))
    out.manifest(args, {"corpus": args.corpus, "catalog": args.catalog})
    print(
        "split: "
        + ", ".join(f"{p}={payload['counts'][p]} DPAs" for p in ("train", "val", "eval"))
    )
    return 0


def cmd_stats(args) -> int:
    corpus = _load_corpus(args)
    table = corpus_stats(corpus)
    lines = [
        "metric\tvalue",
        f"dpas\t{table.total_dpas}",
        f"sentences\t{table.total_sentences}",
        f"positive_sentences\t{table.positive_sentences}",
        f"positive_fraction\t{table.positive_fraction:.4f}",
    ]
    lines += [f"{pid}\t{count}" for pid, count in table.rows()]
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        out = _OutDir(args.out)
        out.write_text("stats.tsv", text)
        out.manifest(args, {"corpus": args.corpus, "catalog": args.catalog})
    return 0


def cmd_balance(args) -> int:
    corpus = _load_corpus(args)
    task = TaskSpec.multiclass(corpus.catalog.ids)
    dataset = dataset_from_sentences(corpus_sentences(corpus), task)
    strategy = {
        "RU": random_undersample,
        "RO": random_oversample,
        "RUOS": under_oversample,
    }[args.strategy]
    balanced = strategy(dataset, args.seed)
    out = _OutDir(args.out)
    out.write_text("balanced.jsonl", _examples_jsonl(balanced.examples))
    out.manifest(
        args,
        {"corpus": args.corpus, "catalog": args.catalog},
        {
            "before": dataset.class_counts(),
            "after": balanced.class_counts(),
            "examples": len(balanced.examples),
        },
    )
    print(f"{args.strategy}: {len(dataset.examples)} -> {len(balanced.examples)} examples")
    return 0


def cmd_augment(args) -> int:
    corpus = _load_corpus(args)
    task = TaskSpec.multiclass(corpus.catalog.ids)
    dataset = dataset_from_sentences(corpus_sentences(corpus), task)
    if args.recipe not in BUILTIN_RECIPES:
        raise ValidationError(
            f"unknown recipe {args.recipe!r}; choices: "
            + ", ".join(sorted(BUILTIN_RECIPES))
        )
    recipe = BUILTIN_RECIPES[args.recipe]

    inputs = {"corpus": args.corpus, "catalog": args.catalog}
    lexicons = tuple(SynonymLexicon.from_file(p) for p in (args.lexicon or ()))
    for i, p in enumerate(args.lexicon or ()):
        inputs[f"lexicon_{i}"] = p
    store = None
    if args.store:
        store = EmbeddingStore.load(args.store)
        inputs["store"] = args.store
    if args.identity_mt:
        mt = IdentityMtClient()
    elif args.mt_endpoint or os.environ.get(MT_ENDPOINT_ENV_VAR):
        mt = HttpMtClient(endpoint=args.mt_endpoint)
    else:
        mt = None
    resources = Resources(lexicons=lexicons, store=store, mt_client=mt)
    if args.pivots:
        pivots = tuple(p.strip() for p in args.pivots.split(",") if p.strip())
        resources = Resources(
            lexicons=lexicons, store=store, mt_client=mt, pivots=pivots
        )

    variant, details = build_variant(dataset, recipe, args.seed, resources)
    out = _OutDir(args.out)
    out.write_text("augmented.jsonl", _examples_jsonl(variant.examples))
    out.manifest(args, inputs, details)
    print(
        f"{args.recipe}: {len(dataset.examples)} -> {len(variant.examples)} examples"
    )
    return 0


def cmd_train(args) -> int:
    corpus = _apply_split(_load_corpus(args), args.split, args.part)
    store = EmbeddingStore.load(args.store)
    hp = _hp_from_args(args)
    inputs = {"corpus": args.corpus, "catalog": args.catalog, "store": args.store}
    if args.split:
        inputs["split"] = args.split
    out = _OutDir(args.out)

    if args.task == "binary" and not args.provision:
        suite = fit_binary_suite(corpus, store, args.algorithm, hp, args.seed)
        save_suite(suite, out.path)
        for pid in suite:
            out.add(f"{pid}.dpam")
        out.add("suite.json")
        extra = {"models": len(suite), "algorithm": args.algorithm}
        print(f"trained {len(suite)}-model binary suite -> {out.path}")
    else:
        task = _task_for(args, corpus.catalog)
        model = fit_on_corpus(args.algorithm, corpus, store, task, hp, args.seed)
        model.save(str(out.path / "model.dpam"))
        out.add("model.dpam")
        extra = {"algorithm": args.algorithm, "training_meta": model.training_meta}
        print(f"trained {args.algorithm} ({args.task}) -> {out.path / 'model.dpam'}")
    out.manifest(args, inputs, extra)
    return 0


def _parse_grid(raw: str) -> dict:
    if raw.startswith("@"):
        raw = Path(raw[1:]).read_text(encoding="utf-8")
    try:
        grid = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"--grid is not valid JSON: {exc}")
    if not isinstance(grid, dict) or not grid:
        raise ValidationError("--grid must be a non-empty JSON object")
    return {k: list(v) for k, v in grid.items()}


def cmd_grid(args) -> int:
    corpus = _load_corpus(args)
    train_part = _apply_split(corpus, args.split, "train")
    val_part = _apply_split(corpus, args.split, "val")
    store = EmbeddingStore.load(args.store)
    task = _task_for(args, corpus.catalog)
    grid = _parse_grid(args.grid)
    base_hp = _hp_from_args(args)

    train_data = features_for(args.algorithm, corpus_sentences(train_part), store, task)
    val_data = features_for(args.algorithm, corpus_sentences(val_part), store, task)
    best, cells = grid_search(
        args.algorithm, grid, train_data, val_data, args.seed, base_hp
    )
    table = leaderboard_table(cells)
    out = _OutDir(args.out)
    out.write_text("leaderboard.tsv", table)
    out.write_text("best_hyperparameters.json", _json_text(asdict(best)))
    out.manifest(
        args,
        {"corpus": args.corpus, "catalog": args.catalog, "store": args.store,
         "split": args.split},
        {"cells": len(cells)},
    )
    print(table, end="")
    return 0


def cmd_fewshot(args) -> int:
    corpus = _apply_split(_load_corpus(args), args.split, args.part)
    store = EmbeddingStore.load(args.store)
    task = _task_for(args, corpus.catalog)
    data = feature_matrix(corpus_sentences(corpus), store, task)
    source = "all"
    if args.per_class is not None or args.fraction is not None:
        data, source = sample_shots(
            data, per_class=args.per_class, fraction=args.fraction, seed=args.seed
        )
    model = fit_fewshot(
        data,
        _hp_from_args(args),
        args.seed,
        pairs_per_example=args.pairs_per_example,
        projection_epochs=args.projection_epochs,
        projection_lr=args.projection_lr,
        shots_source=source,
    )
    out = _OutDir(args.out)
    model.save(str(out.path / "model.dpam"))
    out.add("model.dpam")
    inputs = {"corpus": args.corpus, "catalog": args.catalog, "store": args.store}
    if args.split:
        inputs["split"] = args.split
    out.manifest(args, inputs, {
        "shots_source": source,
        "examples": int(data.X.shape[0]),
        "training_meta": model.training_meta,
    })
    print(f"few-shot model ({source}) -> {out.path / 'model.dpam'}")
    return 0


def cmd_predict(args) -> int:
    corpus = _load_corpus(args)
    store = EmbeddingStore.load(args.store)
    predictor, predictor_digest = _load_predictor(args)
    predictions = predict_sentences(
        predictor, corpus_sentences(corpus), store, threshold=args.threshold
    )
    lines = [
        json.dumps(
            {
                "dpa_id": p.dpa_id,
                "sentence_index": p.sentence_index,
                "text": p.text,
                "predicted_labels": sorted(p.predicted_labels),
                "scores": {k: p.scores[k] for k in sorted(p.scores)},
            },
            sort_keys=True,
            ensure_ascii=False,
            separators=(",", ":"),
        )
        for p in predictions
    ]
    out = _OutDir(args.out)
    out.write_text("predictions.jsonl", "\n".join(lines) + "\n")
    inputs = {"corpus": args.corpus, "catalog": args.catalog, "store": args.store}
    inputs.update(_predictor_inputs(args))
    out.manifest(args, inputs, {
        "sentences": len(predictions),
        "model_digest": predictor_digest,
    })
    print(f"{len(predictions)} predictions -> {out.path / 'predictions.jsonl'}")
    return 0


def _predictor_inputs(args) -> dict[str, str]:
    if getattr(args, "model", None):
        return {"model": args.model}
    return {"suite": str(Path(args.suite) / "suite.json")}


def _verdict_rows(report) -> str:
    lines = ["provision\tstatus\tsupporting\tbest_score\tbest_sentence"]
    for v in report.verdicts:
        if v.supporting:
            best = v.supporting[0]
            lines.append(
                f"{v.provision_id}\tsatisfied\t{len(v.supporting)}"
                f"\t{best.score:.4f}\t{best.sentence_index}"
            )
        else:
            lines.append(f"{v.provision_id}\tviolated\t0\t\t")
    return "\n".join(lines) + "\n"


def cmd_check(args) -> int:
    text = Path(args.dpa).read_text(encoding="utf-8")
    catalog = ProvisionCatalog.from_file(args.catalog)
    store = EmbeddingStore.load(args.store)
    predictor, predictor_digest = _load_predictor(args)
    aliases = AliasTable.from_file(args.aliases) if args.aliases else None

    report, predictions = check_document(
        text, predictor, store, catalog,
        dpa_id=args.dpa_id,
        aliases=aliases,
        confidence_floor=args.floor,
        threshold=args.threshold,
        model_digest=predictor_digest,
    )
    human = render_report(report, "human", catalog=catalog)
    machine = render_report(report, "machine", catalog=catalog)

    from dpacheck.figures import report_figure

    out = _OutDir(args.out)
    out.write_text("report.txt", human)
    out.write_text("report.json", machine)
    out.write_text("report.tsv", _verdict_rows(report))
    report_figure(report, out.path / "report.png")
    out.add("report.png")
    inputs = {"dpa": args.dpa, "catalog": args.catalog, "store": args.store}
    inputs.update(_predictor_inputs(args))
    if args.aliases:
        inputs["aliases"] = args.aliases
    out.manifest(args, inputs, {
        "complete": report.complete,
        "violations": list(report.violated),
        "sentences": len(predictions),
    })
    print(human, end="")
    return 0


def cmd_evaluate(args) -> int:
    corpus = _apply_split(_load_corpus(args), args.split, args.part)
    store = EmbeddingStore.load(args.store)
    predictor, predictor_digest = _load_predictor(args)
    predictions = predict_sentences(
        predictor, corpus_sentences(corpus), store, threshold=args.threshold
    )
    result = evaluate_predictions(predictions, corpus, args.beta)
    table = metrics_table(result.metrics)

    from dpacheck.eval import save_metrics
    from dpacheck.figures import metrics_figure

    out = _OutDir(args.out)
    out.write_text("metrics.tsv", table)
    save_metrics(result.metrics, str(out.path / "metrics.json"))
    out.add("metrics.json")
    metrics_figure(result.metrics, out.path / "metrics.png")
    out.add("metrics.png")
    inputs = {"corpus": args.corpus, "catalog": args.catalog, "store": args.store}
    inputs.update(_predictor_inputs(args))
    if args.split:
        inputs["split"] = args.split
    out.manifest(args, inputs, {
        "model_digest": predictor_digest,
        "n_sentences": result.n_sentences,
        "sentence_agreement": result.sentence_agreement,
        "macro_fbeta": result.metrics.macro.fbeta,
        "micro_fbeta": result.metrics.micro.fbeta,
        "gold": {d: sorted(v) for d, v in result.gold.items()},
        "predicted": {d: sorted(v) for d, v in result.predicted.items()},
    })
    print(table, end="")
    return 0


def _read_labels(path: str) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip()]


def cmd_kappa(args) -> int:
    labels_a = _read_labels(args.file_a)
    labels_b = _read_labels(args.file_b)
    kappa = cohen_kappa(labels_a, labels_b)
    band = kappa_band(kappa)
    print(f"kappa\t{kappa:.6f}")
    print(f"band\t{band}")
    if args.out:
        out = _OutDir(args.out)
        out.write_text(
            "kappa.json",
            _json_text({"kappa": kappa, "band": band, "items": len(labels_a)}),
        )
        out.manifest(args, {"a": args.file_a, "b": args.file_b})
    return 0


def cmd_bench(args) -> int:
    catalog = ProvisionCatalog.from_file(args.catalog)
    predictor, _ = _load_predictor(args)
    state: dict = {}

    def load_stage():
        state["text"] = Path(args.dpa).read_text(encoding="utf-8")
        state["store"] = EmbeddingStore.load(args.store)

    def preprocess_stage():
        from dpacheck.corpus import Sentence

        segments = split_sentences(state["text"])
        state["sentences"] = [
            Sentence(dpa_id="bench", sentence_index=i, text=seg)
            for i, seg in enumerate(segments)
        ]

    def embed_stage():
        first = (
            next(iter(predictor.values()))
            if isinstance(predictor, dict)
            else predictor
        )
        state["features"] = features_for(
            first.algorithm, state["sentences"], state["store"], first.task
        )

    def predict_stage():
        state["predictions"] = predict_sentences(
            predictor, state["sentences"], state["store"]
        )

    def check_stage():
        from dpacheck.checker import check_dpa

        state["report"] = check_dpa(
            state["predictions"], catalog, dpa_id="bench"
        )

    def render_stage():
        state["human"] = render_report(state["report"], "human", catalog=catalog)

    report = benchmark_runtime(
        [
            ("load", load_stage),
            ("preprocess", preprocess_stage),
            ("embed", embed_stage),
            ("predict", predict_stage),
            ("check", check_stage),
            ("render", render_stage),
        ],
        perspective="user",
    )
    for stage in report.stages:
        if stage.name in ("preprocess", "embed", "predict"):
            stage.input_size = len(state["sentences"])
    table = report.table()
    print(table, end="")
    if args.out:
        out = _OutDir(args.out)
        out.write_text("bench.tsv", table)
        out.write_text("bench.json", _json_text(report.as_dict()))
        inputs = {"dpa": args.dpa, "catalog": args.catalog, "store": args.store}
        inputs.update(_predictor_inputs(args))
        out.manifest(args, inputs)
    return 0


def cmd_validate_store(args) -> int:
    report = validate_store(args.store)
    print(_json_text(report), end="")
    return 0


HANDLERS = {
    "preprocess": cmd_preprocess,
    "split": cmd_split,
    "stats": cmd_stats,
    "balance": cmd_balance,
    "augment": cmd_augment,
    "train": cmd_train,
    "grid": cmd_grid,
    "fewshot": cmd_fewshot,
    "predict": cmd_predict,
    "check": cmd_check,
    "evaluate": cmd_evaluate,
    "kappa": cmd_kappa,
    "bench": cmd_bench,
    "validate-store": cmd_validate_store,
}


def main(argv=None) -> int:
    parser, by_name = build_parser()
    try:
        args = _merge_config(parser, by_name, argv)
        return HANDLERS[args.command](args)
    except SystemExit as exc:
        code = exc.code
        return 0 if code is None else int(code)
    except ExternalServiceError as exc:
        print(f"{PROG}: external service error: {exc}", file=sys.stderr)
        return 3
    except (DataError, DivergenceError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
