"""Run directories and manifests for training and evaluation."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Sequence

from . import __version__
from .classifier import COMPACT_ENCODER, ModelHandle, TrainConfig, load_model
from .corpus import PROMPT_MARKERS
from .errors import UsageError
from .jsonl import file_sha256, write_json
from .templating import Mode

MANIFEST = "manifest.json"


def run_key(config: TrainConfig, mode: Mode | str, fingerprints: dict, zero_shot: bool = False) -> str:
    """Hash of everything that determines a run; used as its directory name."""
    payload = json.dumps(
        {"config": config.to_dict(), "mode": Mode(mode).value, "data": fingerprints, "zero_shot": zero_shot},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def fingerprints(paths: dict[str, str | os.PathLike | None]) -> dict:
    return {role: file_sha256(p) if p else None for role, p in paths.items()}


def write_run(runs_dir: str | os.PathLike, handle: ModelHandle, mode: Mode | str, data_paths: dict,
              history: Sequence[dict], truncation: dict, zero_shot: bool = False) -> Path:
    """Persist model and manifest under ``runs_dir/<run key>/``; returns the manifest path."""
    fps = fingerprints(data_paths)
    key = run_key(handle.config, mode, fps, zero_shot)
    run_dir = Path(runs_dir) / key
    handle.save(run_dir / "model")
    manifest = {
        "run_id": key,
        "version": __version__,
        "mode": Mode(mode).value,
        "zero_shot": zero_shot,
        "config": handle.config.to_dict(),
        "seed": handle.config.seed,
        "data": {role: {"path": str(p) if p else None, "sha256": fps[role]} for role, p in data_paths.items()},
        "tokenizer": {
            "kind": "hashing" if handle.config.encoder_id == COMPACT_ENCODER else "pretrained",
            "atomic_markers": list(PROMPT_MARKERS),
        },
        "epochs": list(history),
        "truncation": truncation,
        "model_dir": "model",
    }
    return write_json(run_dir / MANIFEST, manifest)


def read_manifest(path: str | os.PathLike) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST
    if not path.exists():
        raise UsageError(f"missing run manifest: {path}")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    manifest["_dir"] = str(path.parent)
    return manifest


def load_run(path: str | os.PathLike) -> tuple[dict, ModelHandle]:
    manifest = read_manifest(path)
    return manifest, load_model(Path(manifest["_dir"]) / manifest["model_dir"])
