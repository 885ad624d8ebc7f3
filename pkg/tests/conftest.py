"""Shared fixtures and the acceptance-criteria result reporter.

test_acceptance.py records one PASS/FAIL line per numbered criterion; the
terminal-summary hook below prints them at the end of the run so the verdicts
are visible even when pytest captures stdout.
"""

from __future__ import annotations

import numpy as np
import pytest

from maskforge.audio_io import load_manifest
from maskforge.synth import SynthConfig, generate_corpus

_CRITERION_LINES: dict[int, str] = {}


def record_criterion(number: int, label: str, passed: bool) -> None:
    verdict = "PASS" if passed else "FAIL"
    _CRITERION_LINES[number] = f"criterion {number} ({label}): {verdict}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERION_LINES):
            terminalreporter.write_line(_CRITERION_LINES[number])


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Two train songs and one test song, short enough for fast CLI runs."""
    root = tmp_path_factory.mktemp("tiny_corpus")
    cfg = SynthConfig(duration=1.2, seed=77)
    train_manifest, test_manifest = generate_corpus(root, 2, 1, cfg)
    return {
        "dir": root,
        "train_manifest": train_manifest,
        "test_manifest": test_manifest,
        "train_songs": load_manifest(train_manifest),
        "test_songs": load_manifest(test_manifest),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(20240801)
