from __future__ import annotations

import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from dtwsoh.ingest import SynthConfig, b18_like_config, generate_synthetic, load_dataset  # noqa: E402

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def three_cycles_path() -> Path:
    return DATA / "three_cycles.csv"


@pytest.fixture(scope="session")
def three_cycles(three_cycles_path):
    return load_dataset(three_cycles_path)


@pytest.fixture(scope="session")
def b18_like():
    return generate_synthetic(b18_like_config(), seed=18)


@pytest.fixture(scope="session")
def small_synth():
    return generate_synthetic(SynthConfig(n_cycles=12, base_length=40, regen_probability=0.2), seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for an acceptance criterion; the test body runs inside the block."""

    class _Recorder:
        def __init__(self):
            self.number = None
            self.title = ""
            self.detail = ""

        def __call__(self, number: int, title: str):
            self.number, self.title = number, title
            ACCEPTANCE_RESULTS[number] = ("FAIL", title)
            return self

    rec = _Recorder()
    yield rec
    if rec.number is None:
        return
    call = getattr(request.node, "rep_call", None)
    if call is not None and call.passed:
        status = "PASS"
    elif call is not None and call.skipped:
        status = "SKIP"
    else:
        status = "FAIL"
    suffix = f" ({rec.detail})" if rec.detail else ""
    ACCEPTANCE_RESULTS[rec.number] = (status, rec.title + suffix)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" or (rep.when == "setup" and rep.skipped):
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        status, title = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"[{status}] {number:>2}. {title}")
