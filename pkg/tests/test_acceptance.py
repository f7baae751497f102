"""Acceptance criteria, one test each.

Run with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL/SKIP line per
criterion is printed in the terminal summary. Criteria 7 and 8 need the
original data and a large-encoder run and skip unless pointed at them:

* ``SEMPLAUS_REPRO_DIR``: holds ``evt_ent/`` and ``ent/`` evaluate outputs
  (``report.json`` and ``predictions.jsonl``) on the merged PEP-3K + PAP test set.
* ``SEMPLAUS_DATA_DIR``: holds ``pep3k/`` and ``pap/``, each with
  ``train.csv``, ``dev.csv`` and ``test.csv``. ``SEMPLAUS_DATA_COLUMNS``
  optionally gives a column mapping such as ``subject=s,verb=v,object=o,label=label``.
"""

import json
import os
import random
from collections import Counter
from pathlib import Path

import pytest

from semplaus.augmentation import AugmentationPlan, augment_balance
from semplaus.classifier import COMPACT_ENCODER, TrainConfig, fine_tune, predict_batch, zero_shot_init
from semplaus.corpus import (
    ColumnMapping,
    DatasetBundle,
    EventTriple,
    LabeledEvent,
    Origin,
    bundle_to_records,
    load_events,
    merge_splits,
)
from semplaus.evaluation import Prediction, compute_metrics, error_analysis
from semplaus.jsonl import dumps, read_jsonl
from semplaus.knowledge import enrich_event
from semplaus.templating import Mode, PromptRecord, inspect_prompt, render_prompt

from pipeline import run_pipeline
from strategies import random_enriched
from test_classifier import RECORDS, overfit_config
from test_evaluation import brute_force, matches
from test_templating import golden


def test_criterion_1_golden_prompts(table_providers, trader_event, hook_event):
    for event, name in ((trader_event, "trader_ensures_strategy.txt"), (hook_event, "hook_wins_role.txt")):
        prompt = render_prompt(enrich_event(event, table_providers), Mode.EVT_ENT).prompt
        assert prompt.encode("utf-8") == golden(name).encode("utf-8"), name


def test_criterion_2_metric_oracle():
    rng = random.Random(2024)
    grid = [0.0, 0.2, 0.5, 0.7, 1.0]
    for i in range(1000):
        n = rng.randint(1, 20)
        golds = [rng.randint(0, 1) for _ in range(n)]
        # Half the instances draw from a coarse grid so ties are exercised.
        scores = [rng.choice(grid) if i % 2 else rng.random() for _ in range(n)]
        preds = [Prediction.from_score(s) for s in scores]
        ref = brute_force([p.label for p in preds], scores, golds)
        assert matches(compute_metrics(preds, golds), ref, tol=1e-12), (scores, golds)


def _random_augmentation_instance(rng):
    n1 = rng.randint(0, 15)
    n0 = rng.randint(0, n1)
    names = rng.sample(range(1000), n1 + n0)
    base = [LabeledEvent(EventTriple(f"s{k}", "v", "o"), 1 if j < n1 else 0) for j, k in enumerate(names)]
    fresh = rng.sample([k for k in range(1000, 2000)], n1 - n0 + rng.randint(0, 10))
    pool = [LabeledEvent(EventTriple(f"s{k}", "v", "o"), 0) for k in fresh]
    pool += [LabeledEvent(EventTriple(f"p{k}", "v", "o"), 1) for k in range(rng.randint(0, 5))]
    pool += rng.sample(base, min(len(base), rng.randint(0, 3)))
    pool += rng.sample(pool, min(len(pool), rng.randint(0, 3)))  # duplicates inside the pool
    rng.shuffle(pool)
    return DatasetBundle(base), DatasetBundle(pool), rng.randint(0, 2**31)


def test_criterion_3_augmentation_invariants():
    rng = random.Random(3)
    for _ in range(500):
        base, pool, seed = _random_augmentation_instance(rng)
        out = augment_balance(base, pool, AugmentationPlan(seed=seed))
        counts = Counter(e.label for e in out)
        assert counts[0] == counts[1]
        triples = [e.triple for e in out]
        assert len(triples) == len(set(triples))
        assert all(e.label == 0 for e in out if e.origin is Origin.AUGMENTED)
        again = augment_balance(base, pool, AugmentationPlan(seed=seed))
        assert dumps(bundle_to_records(again)) == dumps(bundle_to_records(out))


def test_criterion_4_templating_properties():
    rng = random.Random(4)
    for _ in range(1000):
        e = random_enriched(rng)
        full = render_prompt(e, Mode.EVT_ENT)
        assert inspect_prompt(full.prompt) == full.flags
        lines = full.prompt.split("\n")
        evt, ent = render_prompt(e, Mode.EVT), render_prompt(e, Mode.ENT)
        assert evt.prompt == "\n".join([lines[0], lines[2]])
        assert ent.prompt == "\n".join([lines[0], lines[1], lines[3]])
        assert inspect_prompt(evt.prompt) == evt.flags
        assert inspect_prompt(ent.prompt) == ent.flags


def _outputs(run):
    report = json.loads((run["report"] / "report.json").read_text())
    return (report["results"], report["run_id"], (run["report"] / "predictions.jsonl").read_bytes(),
            (run["data"] / "train_aug.prompts.jsonl").read_bytes())


def test_criterion_5_end_to_end(tmp_path):
    first = run_pipeline(tmp_path / "a", seed=42, figures=False)
    second = run_pipeline(tmp_path / "b", seed=42, figures=False)
    assert len(read_jsonl(first["data"] / "train_aug.jsonl")) == 64
    assert len(json.loads(first["manifest"].read_text())["epochs"]) == 3
    assert _outputs(first) == _outputs(second)

    _, history = fine_tune(RECORDS * 4, [], overfit_config())
    assert history[-1]["train_accuracy"] == 1.0


def test_criterion_6_zero_shot_near_chance():
    rng = random.Random(6)
    prompts = []
    for i in range(100):
        e = random_enriched(rng)
        prompts.append(PromptRecord(render_prompt(e, Mode.EVT_ENT).prompt, i % 2))
    handle = zero_shot_init(TrainConfig(encoder_id=COMPACT_ENCODER, seed=42))
    report = compute_metrics(predict_batch(handle, prompts), [p.label for p in prompts])
    print(f"zero-shot: {report.table_row()}")
    assert 0.35 <= report.accuracy <= 0.65


def _env_dir(name):
    value = os.environ.get(name)
    if not value:
        pytest.skip(f"{name} not set; conditional criterion")
    path = Path(value)
    if not path.is_dir():
        pytest.fail(f"{name}={value} is not a directory")
    return path


def test_criterion_7_reference_numbers():
    root = _env_dir("SEMPLAUS_REPRO_DIR")
    full = json.loads((root / "evt_ent" / "report.json").read_text())["results"]
    ent = json.loads((root / "ent" / "report.json").read_text())["results"]
    assert full["PEP3K"]["Acc"] == pytest.approx(0.883, abs=0.03)
    assert full["PEP3K"]["F1"] == pytest.approx(0.888, abs=0.03)
    assert ent["PAP"]["AUC"] == pytest.approx(0.666, abs=0.03)

    # Error-analysis counts are regenerated from the stored predictions.
    rows = [r for r in read_jsonl(root / "evt_ent" / "predictions.jsonl") if r["dataset"] == "PAP"]
    counts = error_analysis(
        (PromptRecord.from_record(r), Prediction(r["prediction"]["label"], r["prediction"]["score"]), r["label"])
        for r in rows
    )
    print(f"PAP test error analysis ({len(rows)} prompts): {counts.to_dict()} (reference 105/68/50)")
    assert counts.to_dict() == full["PAP"]["error_analysis"]


def test_criterion_8_dataset_sizes():
    root = _env_dir("SEMPLAUS_DATA_DIR")
    mapping = ColumnMapping.parse(os.environ.get("SEMPLAUS_DATA_COLUMNS"))

    def load(ds, split):
        return load_events(root / ds.lower() / f"{split}.csv", ds, split, mapping)

    train = merge_splits([load(ds, "train") for ds in ("PEP3K", "PAP")], "train")
    dev = merge_splits([load(ds, "dev") for ds in ("PEP3K", "PAP")], "dev")
    assert (len(train), len(dev)) == (4911, 614)
    assert len(load("PEP3K", "test")) == 307
    assert len(load("PAP", "test")) == 308
