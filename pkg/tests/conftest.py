"""Pin BLAS to one thread before numpy loads: keeps timing tests stable and
makes reduction order identical across runs."""

import os

for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import numpy as np
import pytest

from charrnn.data import Corpus, Vocabulary


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance suite's one-line-per-criterion results."""
    import sys

    lines = []
    for name, mod in sys.modules.items():
        if name.rsplit(".", 1)[-1] == "test_acceptance" and mod is not None:
            lines = getattr(mod, "RESULT_LINES", [])
            break
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def phrase_corpus():
    """Small corpus of a repeated phrase; easy to model, fast to train on."""
    text = "the quick brown fox. " * 400
    vocab = Vocabulary.from_text(text)
    return vocab, Corpus(vocab.encode(text), source="phrase")


@pytest.fixture
def cycle_corpus():
    text = "abc" * 2000
    vocab = Vocabulary.from_text(text)
    return vocab, Corpus(vocab.encode(text), source="cycle")
