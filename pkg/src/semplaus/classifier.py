"""Sequence classifier over rendered prompts.

Two encoder families sit behind one handle:

* any pretrained checkpoint loadable by ``transformers`` (e.g. ``roberta-large``),
  with the ten prompt markers registered as added special tokens;
* ``compact-roberta``, a small randomly initialized RoBERTa with a hashed
  word-level vocabulary. It needs no downloads and is what the desk-scale
  tests train.
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
import zlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import torch
from torch.nn import functional as F

from .corpus import PROMPT_MARKERS
from .errors import (
    ConfigurationError,
    DataError,
    DegenerateDataError,
    EncoderUnavailableError,
    ModelStateError,
)
from .evaluation import Prediction, compute_metrics
from .templating import Mode, PromptRecord

log = logging.getLogger(__name__)


def _quiet_transformers():
    from transformers.utils import logging as hf_logging

    hf_logging.disable_progress_bar()

COMPACT_ENCODER = "compact-roberta"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 16
    learning_rate: float = 1e-5
    weight_decay: float = 0.01
    warmup_steps: int = 10
    seed: int = 42
    max_sequence_length: int = 512
    encoder_id: str = "roberta-large"
    eval_batch_size: int = 32

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1 or self.eval_batch_size < 1:
            raise ConfigurationError("batch sizes must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.max_sequence_length < 16:
            raise ConfigurationError(f"max_sequence_length must be >= 16, got {self.max_sequence_length}")
        if self.warmup_steps < 0 or self.weight_decay < 0:
            raise ConfigurationError("warmup_steps and weight_decay must be non-negative")

    @classmethod
    def for_mode(cls, mode: Mode | str, **overrides) -> "TrainConfig":
        """Hyperparameters used for each knowledge configuration in the reference runs."""
        mode = Mode(mode)
        preset = {
            Mode.EVT_ENT: dict(batch_size=16, warmup_steps=10),
            Mode.ENT: dict(batch_size=16, warmup_steps=10),
            Mode.EVT: dict(batch_size=16, warmup_steps=100),
            Mode.BASELINE: dict(batch_size=8, warmup_steps=10),
        }[mode]
        return cls(**{**preset, **overrides})

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown train config key(s): {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


class HashingTokenizer:
    """Word-level tokenizer that hashes tokens into a fixed number of buckets.

    Prompt markers get dedicated ids so they are never split. Ids follow the
    RoBERTa convention: ``<s>`` 0, ``<pad>`` 1, ``</s>`` 2.
    """

    kind = "hashing"
    BOS, PAD, EOS, UNK = 0, 1, 2, 3
    _pattern = re.compile(r"\[/?(?:EVT|STYPE|OTYPE|ETYPE|DEF)\]|\w+|[^\w\s]")

    def __init__(self, buckets: int = 8192):
        self.buckets = buckets
        self.marker_ids = {m: 4 + i for i, m in enumerate(PROMPT_MARKERS)}
        self.offset = 4 + len(PROMPT_MARKERS)

    @property
    def vocab_size(self) -> int:
        return self.offset + self.buckets

    def tokenize(self, text: str) -> list[str]:
        return self._pattern.findall(text)

    def token_id(self, token: str) -> int:
        if token in self.marker_ids:
            return self.marker_ids[token]
        return self.offset + zlib.crc32(token.lower().encode("utf-8")) % self.buckets

    def encode(self, texts: Sequence[str], max_length: int):
        rows, truncated = [], []
        for text in texts:
            ids = [self.BOS] + [self.token_id(t) for t in self.tokenize(text)] + [self.EOS]
            truncated.append(len(ids) > max_length)
            if len(ids) > max_length:
                ids = ids[: max_length - 1] + [self.EOS]
            rows.append(ids)
        width = max(len(r) for r in rows)
        input_ids = torch.full((len(rows), width), self.PAD, dtype=torch.long)
        mask = torch.zeros((len(rows), width), dtype=torch.long)
        for i, r in enumerate(rows):
            input_ids[i, : len(r)] = torch.tensor(r)
            mask[i, : len(r)] = 1
        return input_ids, mask, truncated

    def save(self, directory: Path):
        (directory / "tokenizer.json").write_text(json.dumps({"kind": self.kind, "buckets": self.buckets}))


class PretrainedTokenizer:
    kind = "pretrained"

    def __init__(self, tok):
        self.tok = tok

    def encode(self, texts: Sequence[str], max_length: int):
        lengths = [len(ids) for ids in self.tok(list(texts), add_special_tokens=True)["input_ids"]]
        enc = self.tok(list(texts), truncation=True, max_length=max_length, padding=True, return_tensors="pt")
        return enc["input_ids"], enc["attention_mask"], [n > max_length for n in lengths]

    def save(self, directory: Path):
        self.tok.save_pretrained(directory)
        (directory / "tokenizer.json.kind").write_text(self.kind)


@dataclass
class ModelHandle:
    model: torch.nn.Module | None
    tokenizer: HashingTokenizer | PretrainedTokenizer | None
    config: TrainConfig
    trained: bool = False
    log: list[dict] = field(default_factory=list)

    def save(self, directory: str | os.PathLike) -> Path:
        if self.model is None:
            raise ModelStateError("cannot save an uninitialized model")
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.model.save_pretrained(directory)
        self.tokenizer.save(directory)
        (directory / "train_config.json").write_text(json.dumps(self.config.to_dict(), indent=2))
        return directory


def _compact_model(config: TrainConfig, tokenizer: HashingTokenizer):
    from transformers import RobertaConfig, RobertaForSequenceClassification

    _quiet_transformers()
    cfg = RobertaConfig(
        vocab_size=tokenizer.vocab_size,
        hidden_size=64,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=128,
        max_position_embeddings=config.max_sequence_length + 2,
        type_vocab_size=1,
        pad_token_id=HashingTokenizer.PAD,
        bos_token_id=HashingTokenizer.BOS,
        eos_token_id=HashingTokenizer.EOS,
        num_labels=2,
    )
    return RobertaForSequenceClassification(cfg)


def _add_marker_tokens(tok) -> int:
    markers = list(PROMPT_MARKERS)
    try:
        return tok.add_special_tokens({"additional_special_tokens": markers}, replace_additional_special_tokens=False)
    except TypeError:
        return tok.add_tokens(markers, special_tokens=True)


def _pretrained(config: TrainConfig):
    try:
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        tok = AutoTokenizer.from_pretrained(config.encoder_id)
        model = AutoModelForSequenceClassification.from_pretrained(config.encoder_id, num_labels=2)
    except (OSError, ValueError) as exc:
        raise EncoderUnavailableError(f"encoder {config.encoder_id!r} unavailable: {exc}") from exc
    if _add_marker_tokens(tok):
        model.resize_token_embeddings(len(tok))
    return model, PretrainedTokenizer(tok)


def build_model(config: TrainConfig) -> ModelHandle:
    """Encoder plus a classification head initialized from ``config.seed``."""
    torch.manual_seed(config.seed)
    if config.encoder_id == COMPACT_ENCODER:
        tokenizer = HashingTokenizer()
        model = _compact_model(config, tokenizer)
    else:
        model, tokenizer = _pretrained(config)
        # Pretrained weights are loaded; only the head is fresh. Re-seed it.
        torch.manual_seed(config.seed)
        head = getattr(model, "classifier", None)
        if head is not None:
            for m in head.modules():
                if isinstance(m, torch.nn.Linear):
                    m.reset_parameters()
    model.eval()
    return ModelHandle(model, tokenizer, config)


def zero_shot_init(config: TrainConfig) -> ModelHandle:
    return build_model(config)


def load_model(directory: str | os.PathLike) -> ModelHandle:
    directory = Path(directory)
    try:
        config = TrainConfig.from_dict(json.loads((directory / "train_config.json").read_text()))
    except FileNotFoundError as exc:
        raise ModelStateError(f"no saved model in {directory}") from exc
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    _quiet_transformers()
    model = AutoModelForSequenceClassification.from_pretrained(directory)
    if config.encoder_id == COMPACT_ENCODER:
        meta = json.loads((directory / "tokenizer.json").read_text())
        tokenizer = HashingTokenizer(meta["buckets"])
    else:
        tokenizer = PretrainedTokenizer(AutoTokenizer.from_pretrained(directory))
    model.eval()
    return ModelHandle(model, tokenizer, config, trained=True)


def _encode(handle: ModelHandle, records: Sequence[PromptRecord]):
    try:
        return handle.tokenizer.encode([r.prompt for r in records], handle.config.max_sequence_length)
    except Exception as exc:
        ref = records[0].event_ref if len(records) == 1 else [r.event_ref for r in records]
        raise DataError(f"tokenization failed for {ref}: {exc}") from exc


def predict_batch(model: ModelHandle, prompts: Sequence[PromptRecord]) -> list[Prediction]:
    """Probability of the plausible class for each prompt, in input order."""
    if model is None or model.model is None or model.tokenizer is None:
        raise ModelStateError("model is not initialized")
    out: list[Prediction] = []
    bs = model.config.eval_batch_size
    model.model.eval()
    with torch.no_grad():
        for start in range(0, len(prompts), bs):
            chunk = prompts[start:start + bs]
            ids, mask, truncated = _encode(model, chunk)
            logits = model.model(input_ids=ids, attention_mask=mask).logits
            probs = torch.softmax(logits.double(), dim=-1)[:, 1].tolist()
            out.extend(Prediction.from_score(p, t) for p, t in zip(probs, truncated))
    return out


def _accuracy(preds: Sequence[Prediction], records: Sequence[PromptRecord]) -> float:
    return sum(p.label == r.label for p, r in zip(preds, records)) / len(records)


def _cross_entropy(preds: Sequence[Prediction], records: Sequence[PromptRecord]) -> float:
    eps = 1e-12
    return -sum(math.log(max(p.score if r.label else 1.0 - p.score, eps))
                for p, r in zip(preds, records)) / len(records)


def fine_tune(train: Sequence[PromptRecord], dev: Sequence[PromptRecord], config: TrainConfig,
              handle: ModelHandle | None = None) -> tuple[ModelHandle, list[dict]]:
    """Train with AdamW, linear warmup then a constant learning rate.

    Returns the trained handle and one log entry per epoch with the mean
    mini-batch loss, the loss and accuracy of an eval-mode pass over the
    training set and, when ``dev`` is non-empty, the dev metrics.
    """
    if not train:
        raise DegenerateDataError("training set is empty")
    labels = {r.label for r in train}
    if labels != {0, 1}:
        raise DegenerateDataError(f"training set has a single label {labels}")

    handle = handle or build_model(config)
    handle = replace(handle, config=config)
    model = handle.model
    no_decay = ("bias", "LayerNorm.weight", "layer_norm.weight")
    groups = [
        {"params": [p for n, p in model.named_parameters() if not any(k in n for k in no_decay)],
         "weight_decay": config.weight_decay},
        {"params": [p for n, p in model.named_parameters() if any(k in n for k in no_decay)],
         "weight_decay": 0.0},
    ]
    optimizer = torch.optim.AdamW(groups, lr=config.learning_rate)
    warmup = config.warmup_steps
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: min(1.0, (step + 1) / warmup) if warmup else 1.0
    )
    gen = torch.Generator().manual_seed(config.seed)
    torch.manual_seed(config.seed)

    history = []
    truncated_total = 0
    for epoch in range(1, config.epochs + 1):
        model.train()
        order = torch.randperm(len(train), generator=gen).tolist()
        losses, truncated_epoch = [], 0
        for start in range(0, len(order), config.batch_size):
            batch = [train[i] for i in order[start:start + config.batch_size]]
            ids, mask, truncated = _encode(handle, batch)
            truncated_epoch += sum(truncated)
            target = torch.tensor([r.label for r in batch], dtype=torch.long)
            logits = model(input_ids=ids, attention_mask=mask).logits
            loss = F.cross_entropy(logits, target)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            scheduler.step()
            losses.append(loss.item() * len(batch))
        truncated_total = truncated_epoch

        train_preds = predict_batch(handle, train)
        entry = {
            "epoch": epoch,
            "train_loss": sum(losses) / len(train),
            "train_eval_loss": _cross_entropy(train_preds, train),
            "train_accuracy": _accuracy(train_preds, train),
            "learning_rate": scheduler.get_last_lr()[0],
        }
        if dev:
            dev_preds = predict_batch(handle, dev)
            entry["dev"] = compute_metrics(dev_preds, [r.label for r in dev]).table_row()
        history.append(entry)
        log.info("epoch %d: loss %.4f train acc %.3f%s", epoch, entry["train_loss"], entry["train_accuracy"],
                 f" dev acc {entry['dev']['Acc']:.3f}" if dev else "")
        if not math.isfinite(entry["train_loss"]):
            raise DataError(f"training diverged at epoch {epoch}")

    if truncated_total:
        log.warning("%d training prompt(s) exceed max_sequence_length=%d and were truncated",
                    truncated_total, config.max_sequence_length)
    model.eval()
    handle.trained = True
    handle.log = history
    return handle, history


def count_truncated(handle: ModelHandle, records: Sequence[PromptRecord]) -> int:
    n = 0
    for start in range(0, len(records), 256):
        n += sum(_encode(handle, records[start:start + 256])[2])
    return n
