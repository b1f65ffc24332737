import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from crossplat.synth import SynthSpec, generate_corpus  # noqa: E402

DATA = Path(__file__).parent / "data"
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def planted():
    """The default planted corpus and its ground truth, shared across modules."""
    return generate_corpus(SynthSpec())


@pytest.fixture(scope="session")
def small_planted():
    return generate_corpus(SynthSpec(n_users=120, n_repos=200, n_questions=200, n_topics=5, seed=3))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
