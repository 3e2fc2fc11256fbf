from pathlib import Path

import numpy as np
import pytest

from pcvc_vowels.audio_io import AudioClip
from pcvc_vowels.synth_corpus import CorpusConfig, generate_corpus

FIXTURES = Path(__file__).parent / "fixtures"

_acceptance_lines: list[str] = []


def record_criterion(number, name, ok, detail=""):
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f" -- {detail}"
    _acceptance_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """3 speakers x 4 consonants x 6 vowels."""
    out = tmp_path_factory.mktemp("small_corpus")
    return generate_corpus(CorpusConfig(n_speakers=3, seed=11, consonants=[0, 5, 12, 20]), out)


@pytest.fixture(scope="session")
def corpus4(tmp_path_factory):
    """Full-inventory corpus, 4 speakers x 138 clips."""
    out = tmp_path_factory.mktemp("corpus4")
    return generate_corpus(CorpusConfig(n_speakers=4, seed=5), out)


@pytest.fixture
def silence_clip():
    return AudioClip(np.zeros(32000), 16000)


@pytest.fixture(scope="session")
def trained4(corpus4):
    """Model trained on the first three speakers of ``corpus4``; returns (result, test manifest)."""
    from pcvc_vowels.pipeline import split_by_speaker, train_pipeline

    train, test = split_by_speaker(corpus4, [corpus4.speakers[-1]])
    return train_pipeline(train), test
