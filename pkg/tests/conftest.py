from __future__ import annotations

import pytest

from modalroute.config import load_config
from modalroute.engine import Engine
from modalroute.evaluation.corpus import load_corpus


@pytest.fixture(scope="session")
def config():
    return load_config()


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


@pytest.fixture
def engine(config):
    return Engine(config)


@pytest.fixture(scope="session")
def full_run(config, corpus):
    """One seeded evaluation of the bundled corpus, shared across the suite."""
    from modalroute.evaluation.harness import assemble, make_engine, run_corpus

    eng = make_engine(config)
    outcomes = run_corpus(eng, corpus)
    report, extras = assemble(eng, corpus, outcomes, config.seed)
    return eng, outcomes, report, extras


ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'}  {detail}")
