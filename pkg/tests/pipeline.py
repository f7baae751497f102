"""Runs the full stub pipeline through the CLI entry point."""

from pathlib import Path

from semplaus.cli import main

from conftest import MINI

POOL_COLUMNS = "subject=s,verb=v,object=o,label=binary_label"


def cli(*argv):
    code = main([str(a) for a in argv])
    assert code == 0, f"semplaus {' '.join(map(str, argv))} exited {code}"


def run_pipeline(work: Path, seed: int = 42, mode: str = "evt_ent", figures: bool = True) -> dict:
    work = Path(work)
    data, runs, report = work / "data", work / "runs", work / "report"
    for split in ("train", "dev", "test"):
        cli("ingest", "--input", f"PEP3K={MINI / f'{split}.csv'}", "--split", split,
            "--out", data / f"{split}.jsonl")
    cli("ingest", "--input", f"PEP3K={MINI / 'pool.tsv'}", "--split", "train", "--columns", POOL_COLUMNS,
        "--out", data / "pool.jsonl")
    cli("--seed", seed, "augment", "--events", data / "train.jsonl", "--augment-pool", data / "pool.jsonl",
        "--out", data / "train_aug.jsonl")
    fixtures = ["--entity-fixture", MINI / "entity_types.jsonl", "--event-fixture", MINI / "event_types.jsonl"]
    for name in ("train_aug", "dev", "test"):
        cli("--providers", "fixture", "enrich", "--events", data / f"{name}.jsonl",
            "--out", data / f"{name}.enriched.jsonl", *fixtures)
        cli("render", "--enriched", data / f"{name}.enriched.jsonl", "--mode", mode,
            "--out", data / f"{name}.prompts.jsonl")
    cli("--seed", seed, "train", "--mode", mode, "--config", MINI / "train_config.yaml",
        "--train", data / "train_aug.prompts.jsonl", "--dev", data / "dev.prompts.jsonl", "--runs-dir", runs)
    (manifest,) = runs.glob("*/manifest.json")
    cli("evaluate", "--run", manifest, "--test", data / "test.prompts.jsonl", "--out-dir", report,
        *([] if figures else ["--no-figures"]))
    return {"data": data, "manifest": manifest, "report": report}
