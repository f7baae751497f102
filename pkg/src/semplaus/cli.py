"""Command-line entry point: one subcommand per pipeline stage.

Stages exchange JSONL files. Each stage validates its inputs before doing any
work, writes outputs atomically and records itself in ``pipeline.json`` next
to its main output.

Exit codes: 0 success, 2 usage/configuration, 3 data, 4 environment/provider.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import yaml

from . import __version__
from .errors import ConfigurationError, SemplausError, UsageError
from .jsonl import atomic_write_text, file_sha256, read_jsonl, write_json, write_jsonl

log = logging.getLogger("semplaus")

STAGES = ("ingest", "augment", "enrich", "render", "train", "evaluate", "analyze")
PIPELINE_MANIFEST = "pipeline.json"


@dataclass
class PipelineConfig:
    seed: int = 42
    providers: str = "stub"
    mode: str = "evt_ent"
    workers: int = 1
    paths: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    kb: dict = field(default_factory=dict)

    PATH_KEYS = ("entity_fixture", "event_fixture", "kb_cache", "kb_definitions", "runs_dir",
                 "vectors", "stop_list", "record_dir")

    @classmethod
    def load(cls, path: str | os.PathLike | None) -> "PipelineConfig":
        if path is None:
            return cls()
        path = Path(path)
        if not path.exists():
            raise UsageError(f"missing config file: {path}")
        data = _read_mapping(path)
        unknown = set(data) - {"seed", "providers", "mode", "workers", "paths", "train", "kb"}
        if unknown:
            raise ConfigurationError(f"{path}: unknown key(s) {sorted(unknown)}")
        cfg = cls(**data)
        bad = set(cfg.paths) - set(cls.PATH_KEYS)
        if bad:
            raise ConfigurationError(f"{path}: unknown path key(s) {sorted(bad)}")
        # Relative paths are relative to the config file.
        cfg.paths = {k: str((path.parent / v).resolve()) if v else v for k, v in cfg.paths.items()}
        return cfg


def _read_mapping(path: Path) -> dict:
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"{path}: cannot parse ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a mapping at top level")
    return data


def require_inputs(*paths) -> None:
    """Fail before any work if a declared input is missing."""
    for p in paths:
        if p is not None and not Path(p).exists():
            raise UsageError(f"missing input file: {p}")


def record_stage(out_dir: Path, stage: str, inputs: Sequence, outputs: Sequence, params: dict) -> None:
    manifest_path = out_dir / PIPELINE_MANIFEST
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}
    manifest[stage] = {
        "inputs": {str(p): file_sha256(p) for p in inputs if p},
        "outputs": {str(p): file_sha256(p) for p in outputs},
        "params": params,
    }
    write_json(manifest_path, manifest)


# -- stages -------------------------------------------------------------------

def cmd_ingest(args, cfg: PipelineConfig) -> int:
    from .corpus import ColumnMapping, bundle_to_records, load_events, merge_splits

    sources = []
    for item in args.input:
        dataset, sep, path = item.partition("=")
        if not sep:
            raise UsageError(f"--input expects DATASET=PATH, got {item!r}")
        sources.append((dataset.strip().upper().replace("-", ""), path))
    require_inputs(*(p for _, p in sources))
    mapping = ColumnMapping.parse(args.columns, args.delimiter)
    bundles = [load_events(p, ds, args.split, mapping) for ds, p in sources]
    merged = merge_splits(bundles, args.split)
    out = write_jsonl(args.out, bundle_to_records(merged))
    counts = {f"{s}/{l}": n for (s, l), n in sorted(merged.counts.items())}
    log.info("ingested %d events %s; %d conflict(s) dropped", len(merged), counts, len(merged.conflicts))
    record_stage(out.parent, "ingest", [p for _, p in sources], [out],
                 {"split": args.split, "columns": args.columns, "size": len(merged), "counts": counts,
                  "conflicts": len(merged.conflicts)})
    return 0


def cmd_augment(args, cfg: PipelineConfig) -> int:
    from .augmentation import AugmentationPlan, augment_balance
    from .corpus import bundle_from_records, bundle_to_records

    require_inputs(args.events, args.augment_pool)
    base = bundle_from_records(read_jsonl(args.events))
    pool = bundle_from_records(read_jsonl(args.augment_pool))
    seed = args.augment_seed if args.augment_seed is not None else cfg.seed
    out_bundle = augment_balance(base, pool, AugmentationPlan(seed=seed, pool_id=str(args.augment_pool)))
    out = write_jsonl(args.out, bundle_to_records(out_bundle))
    before, after = base.label_counts(), out_bundle.label_counts()
    log.info("label counts before %s, after %s", before, after)
    record_stage(out.parent, "augment", [args.events, args.augment_pool], [out],
                 {"seed": seed, "before": before, "after": after})
    return 0


def build_providers(cfg: PipelineConfig, args):
    from .knowledge import (
        DefinitionCache,
        FixtureEntityTyper,
        FixtureEventDetector,
        HttpEntityTyper,
        HttpEventDetector,
        ProviderSet,
        RecordingEntityTyper,
        RecordingEventDetector,
        StaticKB,
        WikidataClient,
    )

    paths = cfg.paths
    entity_fixture = args.entity_fixture or paths.get("entity_fixture")
    event_fixture = args.event_fixture or paths.get("event_fixture")
    kb_cache = args.kb_cache or paths.get("kb_cache")
    kb_definitions = args.kb_definitions or paths.get("kb_definitions")
    providers = ProviderSet(cache=DefinitionCache(kb_cache))
    kind = cfg.providers

    if kind == "fixture":
        require_inputs(entity_fixture, event_fixture, kb_definitions)
        if entity_fixture:
            providers.entity_typer = FixtureEntityTyper(entity_fixture)
        if event_fixture:
            providers.event_detector = FixtureEventDetector(event_fixture)
    elif kind == "live":
        providers.entity_typer = HttpEntityTyper.from_env()
        providers.event_detector = HttpEventDetector.from_env()
        record_dir = args.record_dir or paths.get("record_dir")
        if record_dir:
            providers.entity_typer = RecordingEntityTyper(providers.entity_typer,
                                                          Path(record_dir) / "entity_types.jsonl")
            providers.event_detector = RecordingEventDetector(providers.event_detector,
                                                              Path(record_dir) / "event_types.jsonl")
        providers.kb_client = WikidataClient(endpoint=cfg.kb.get("endpoint"),
                                             **{k: v for k, v in cfg.kb.items() if k != "endpoint"})
    if kind != "live":
        require_inputs(kb_definitions)
        providers.kb_client = StaticKB.from_file(kb_definitions) if kb_definitions else StaticKB()
    return providers


def cmd_enrich(args, cfg: PipelineConfig) -> int:
    from .corpus import bundle_from_records
    from .knowledge import enrich_events

    require_inputs(args.events)
    bundle = bundle_from_records(read_jsonl(args.events))
    providers = build_providers(cfg, args)
    enriched = enrich_events(bundle, providers, max_workers=args.workers or cfg.workers)
    out = write_jsonl(args.out, [e.to_record() for e in enriched])
    n_verb = sum(e.verb_type is not None for e in enriched)
    log.info("enriched %d events (%d with a verb type)", len(enriched), n_verb)
    record_stage(out.parent, "enrich", [args.events], [out], {"providers": cfg.providers})
    return 0


def cmd_render(args, cfg: PipelineConfig) -> int:
    from .errors import DataError
    from .knowledge import EnrichedEvent
    from .templating import Mode, render_prompt

    require_inputs(args.enriched)
    mode = Mode(args.mode or cfg.mode)
    records = []
    for i, rec in enumerate(read_jsonl(args.enriched), 1):
        try:
            records.append(render_prompt(EnrichedEvent.from_record(rec), mode).to_record())
        except (KeyError, ValueError) as exc:
            raise DataError(f"{args.enriched}: record {i}: {exc}", rows=[i]) from exc
    out = write_jsonl(args.out, records)
    record_stage(out.parent, "render", [args.enriched], [out], {"mode": mode.value, "size": len(records)})
    return 0


def _load_prompts(path):
    from .templating import PromptRecord

    return [PromptRecord.from_record(r) for r in read_jsonl(path)]


def cmd_train(args, cfg: PipelineConfig) -> int:
    from .classifier import TrainConfig, count_truncated, fine_tune, zero_shot_init
    from .runs import write_run
    from .templating import Mode

    mode = Mode(args.mode or cfg.mode)
    if not args.zero_shot and not args.train:
        raise UsageError("train needs --train PROMPTS (or --zero-shot)")
    require_inputs(args.config, args.train, args.dev)

    overrides = dict(cfg.train)
    if args.config:
        overrides.update(_read_mapping(Path(args.config)))
    if args.seed is not None:
        overrides["seed"] = args.seed
    elif "seed" not in overrides:
        overrides["seed"] = cfg.seed
    for key in ("epochs", "encoder_id", "batch_size", "learning_rate"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    try:
        config = TrainConfig.for_mode(mode, **overrides)
    except TypeError as exc:
        raise ConfigurationError(f"bad train config: {exc}") from exc

    train = _load_prompts(args.train) if args.train else []
    dev = _load_prompts(args.dev) if args.dev else []
    if args.zero_shot:
        handle, history = zero_shot_init(config), []
    else:
        handle, history = fine_tune(train, dev, config)
    truncation = {"train": count_truncated(handle, train) if train else 0,
                  "dev": count_truncated(handle, dev) if dev else 0}
    runs_dir = args.runs_dir or cfg.paths.get("runs_dir") or "runs"
    manifest = write_run(runs_dir, handle, mode, {"train": args.train, "dev": args.dev}, history, truncation,
                         zero_shot=args.zero_shot)
    print(manifest)
    return 0


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    from .classifier import predict_batch
    from .evaluation import compute_metrics, error_analysis
    from .runs import load_run

    require_inputs(args.test)
    manifest, handle = load_run(args.run)
    prompts = _load_prompts(args.test)
    if not prompts:
        raise UsageError(f"{args.test}: no prompts")
    preds = predict_batch(handle, prompts)
    out_dir = Path(args.out_dir)

    model_name = f"{handle.config.encoder_id}_{manifest['mode']}" + ("/0-shot" if manifest["zero_shot"] else "/ft")
    groups = defaultdict(list)
    for i, r in enumerate(prompts):
        groups[r.event_ref.get("dataset") or "ALL"].append(i)
    if len(groups) > 1:
        groups["ALL"] = list(range(len(prompts)))

    results, rows = {}, []
    for ds, idx in groups.items():
        sub_p = [preds[i] for i in idx]
        sub_g = [prompts[i].label for i in idx]
        report = compute_metrics(sub_p, sub_g)
        errors = error_analysis((prompts[i], preds[i], prompts[i].label) for i in idx)
        results[ds] = {**report.table_row(), "n": report.n, "confusion": report.to_dict()["confusion"],
                       "undefined": list(report.undefined), "error_analysis": errors.to_dict(),
                       "truncated": sum(p.truncated for p in sub_p)}
        rows.append([model_name, ds] + [f"{v:.3f}" for v in report.table_row().values()] + [str(report.n)])
        if not args.no_figures:
            from .plotting import plot_confusion, plot_roc

            plot_roc([p.score for p in sub_p], sub_g, out_dir / f"roc_{ds}.png", auc=report.auc)
            plot_confusion(report, out_dir / f"confusion_{ds}.png", title=f"{model_name} / {ds}")

    report_path = write_json(out_dir / "report.json", {
        "model": model_name, "run_id": manifest["run_id"], "test": str(args.test), "results": results,
    })
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "dataset", "AUC", "P", "R", "F1", "Acc", "n"])
    writer.writerows(rows)
    csv_path = atomic_write_text(out_dir / "metrics.csv", buf.getvalue())
    pred_path = write_jsonl(out_dir / "predictions.jsonl",
                            [{**r.to_record(), "prediction": p.to_record()} for r, p in zip(prompts, preds)])
    for ds, res in results.items():
        log.info("%s %s: %s", model_name, ds, {k: round(res[k], 3) for k in ("AUC", "P", "R", "F1", "Acc")})
    record_stage(out_dir, "evaluate", [args.test, Path(manifest["_dir"]) / "manifest.json"],
                 [report_path, csv_path, pred_path], {"run_id": manifest["run_id"]})
    return 0


def cmd_analyze(args, cfg: PipelineConfig) -> int:
    from .analysis import DEFAULT_STOP_WORDS, WordVectors, label_similarity, top_words
    from .corpus import bundle_from_records
    from .errors import DataError

    vectors_path = args.vectors or cfg.paths.get("vectors")
    stop_path = args.stop_list or cfg.paths.get("stop_list")
    require_inputs(args.dataset, vectors_path, stop_path)
    bundle = bundle_from_records(read_jsonl(args.dataset))
    events = [e for e in bundle if e.split.value == args.split]
    stop = DEFAULT_STOP_WORDS
    if stop_path:
        stop = {w.strip() for w in Path(stop_path).read_text(encoding="utf-8").split() if w.strip()}
    vectors = WordVectors.load(vectors_path) if vectors_path else WordVectors.bundled()
    out_dir = Path(args.out_dir)

    by_dataset = defaultdict(list)
    for e in events:
        by_dataset[e.dataset_id.value].append(e)
    if not by_dataset:
        raise DataError(f"{args.dataset}: no events in split {args.split!r}")

    summary, outputs = {}, []
    for ds, evs in sorted(by_dataset.items()):
        plaus = top_words(evs, 1, args.top_k, stop)
        implaus = top_words(evs, 0, args.top_k, stop)
        outputs.append(write_json(out_dir / f"frequencies_{ds}.json",
                                  {"dataset": ds, "split": args.split, "top_k": args.top_k,
                                   "plausible": plaus.to_dict(), "implausible": implaus.to_dict()}))
        entry = {"n_events": len(evs)}
        try:
            matrix = label_similarity(plaus, implaus, vectors)
        except DataError as exc:
            log.warning("%s: similarity skipped (%s)", ds, exc)
            matrix = None
        if matrix is not None:
            outputs.append(atomic_write_text(out_dir / f"similarity_{ds}.csv", matrix.to_csv()))
            entry.update(mean_off_diagonal=matrix.mean_off_diagonal(), shape=list(matrix.values.shape),
                         skipped=list(matrix.skipped_rows + matrix.skipped_cols))
        if not args.no_figures:
            from .plotting import plot_frequencies, plot_similarity

            plot_frequencies(plaus, out_dir / f"top_words_{ds}_plausible.png", f"{ds} ({args.split}), plausible")
            plot_frequencies(implaus, out_dir / f"top_words_{ds}_implausible.png",
                             f"{ds} ({args.split}), implausible")
            if matrix is not None:
                plot_similarity(matrix, out_dir / f"similarity_{ds}.png", f"{ds}: plausible vs implausible")
        summary[ds] = entry
    outputs.append(write_json(out_dir / "analysis_summary.json", summary))
    record_stage(out_dir, "analyze", [args.dataset], outputs, {"split": args.split, "top_k": args.top_k})
    return 0


# -- parser -------------------------------------------------------------------

def _global_options(parser: argparse.ArgumentParser, suppress: bool, config: bool = True):
    default = argparse.SUPPRESS if suppress else None
    if config:
        parser.add_argument("--config", dest="pipeline_config", metavar="FILE", default=default,
                            help="pipeline config (YAML or JSON)")
    parser.add_argument("--seed", type=int, default=default)
    parser.add_argument("--providers", choices=("live", "fixture", "stub"), default=default)
    parser.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semplaus", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="stage", required=True)

    def stage(name, help_):
        p = sub.add_parser(name, help=help_)
        # After `train`, --config names the train config; the pipeline config goes before the stage.
        _global_options(p, suppress=True, config=name != "train")
        return p

    p = stage("ingest", "load delimited files into canonical events JSONL")
    p.add_argument("--input", action="append", required=True, metavar="DATASET=PATH",
                   help="repeatable; datasets PEP3K, PAP or OTHER; several inputs are merged")
    p.add_argument("--split", choices=("train", "dev", "test"), required=True)
    p.add_argument("--columns", default=None, help="e.g. subject=s,verb=v,object=o,label=label")
    p.add_argument("--delimiter", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = stage("augment", "balance labels with implausible events from a pool")
    p.add_argument("--events", required=True)
    p.add_argument("--augment-pool", required=True)
    p.add_argument("--augment-seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = stage("enrich", "attach entity types, event types and definitions")
    p.add_argument("--events", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--entity-fixture")
    p.add_argument("--event-fixture")
    p.add_argument("--kb-cache")
    p.add_argument("--kb-definitions", help="JSON object id -> definition, used offline")
    p.add_argument("--record-dir", help="live providers: also record fixtures here")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_enrich)

    p = stage("render", "render enriched events into prompts")
    p.add_argument("--enriched", required=True)
    p.add_argument("--mode", choices=("evt_ent", "evt", "ent", "baseline"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = stage("train", "fine-tune (or zero-shot initialize) a classifier")
    p.add_argument("--mode", choices=("evt_ent", "evt", "ent", "baseline"))
    p.add_argument("--config", dest="config", metavar="FILE", help="train config (YAML or JSON)")
    p.add_argument("--train")
    p.add_argument("--dev")
    p.add_argument("--runs-dir")
    p.add_argument("--zero-shot", action="store_true")
    p.add_argument("--epochs", type=int)
    p.add_argument("--encoder", dest="encoder_id")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.set_defaults(func=cmd_train)

    p = stage("evaluate", "score a run on a prompts file")
    p.add_argument("--run", required=True, help="run manifest or run directory")
    p.add_argument("--test", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = stage("analyze", "top words per label and their cross-label similarity")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default="train", choices=("train", "dev", "test"))
    p.add_argument("--top-k", type=int, default=30)
    p.add_argument("--stop-list")
    p.add_argument("--vectors", help="word2vec text format; defaults to a small bundled toy set")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "config"):
        args.config = None
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = PipelineConfig.load(args.pipeline_config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.providers:
            cfg.providers = args.providers
        if cfg.providers not in ("live", "fixture", "stub"):
            raise ConfigurationError(f"unknown provider kind {cfg.providers!r}")
        return args.func(args, cfg)
    except SemplausError as exc:
        print(f"semplaus {args.stage}: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
