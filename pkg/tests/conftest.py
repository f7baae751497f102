from pathlib import Path

import pytest

from semplaus.corpus import EventTriple, LabeledEvent
from semplaus.knowledge import (
    DefinitionCache,
    FixtureEntityTyper,
    FixtureEventDetector,
    ProviderSet,
    StaticKB,
)

DATA = Path(__file__).parent / "data"
REFERENCE = DATA / "reference"
MINI = DATA / "mini"
GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def table_providers():
    return ProviderSet(
        entity_typer=FixtureEntityTyper(REFERENCE / "entity_types.jsonl"),
        event_detector=FixtureEventDetector(REFERENCE / "event_types.jsonl"),
        kb_client=StaticKB.from_file(REFERENCE / "kb_definitions.json"),
        cache=DefinitionCache(),
    )


@pytest.fixture
def trader_event():
    return LabeledEvent(EventTriple("trader", "ensures", "strategy"), 1, "PAP", "test")


@pytest.fixture
def hook_event():
    return LabeledEvent(EventTriple("hook", "wins", "role"), 0, "PAP", "test")


# One summary line per acceptance criterion.
_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call" or report.outcome in ("failed", "skipped"):
        prev = _acceptance.get(name)
        if prev in ("FAIL",):
            return
        _acceptance[name] = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance, key=lambda n: int(n.split("_")[2])):
        terminalreporter.write_line(f"{_acceptance[name]:4}  {name}")
