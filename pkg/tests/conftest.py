import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

from simcoref.encoder import EncoderConfig  # noqa: E402
from simcoref.model import CorefModel, ModelConfig  # noqa: E402
from simcoref.synthetic import make_corpus  # noqa: E402

torch.set_num_threads(1)


@pytest.fixture
def tiny_config():
    return ModelConfig(EncoderConfig(dim=4, max_segment=8, vocab_size=64, seed=0), hidden=8, depth=2)


@pytest.fixture
def tiny_model(tiny_config):
    return CorefModel(tiny_config)


@pytest.fixture(scope="session")
def synthetic_docs():
    return make_corpus(4, seed=0)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in sorted(results, key=lambda r: int(r.split()[1])):
            terminalreporter.write_line(line)
