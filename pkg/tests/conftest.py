import os
from pathlib import Path

import pytest
import torch

FIXTURES = Path(__file__).parent / "fixtures"
DATA_ENV = "ASTE_DATA_DIR"


@pytest.fixture
def laptop20_path():
    return FIXTURES / "laptop20.txt"


@pytest.fixture
def gen():
    return torch.Generator().manual_seed(1234)


def aste_data_dir():
    """Root of the ASTE-Data-V2-EMNLP2020 release if the environment points at it."""
    root = os.environ.get(DATA_ENV)
    if root and (Path(root) / "14lap" / "train_triplets.txt").is_file():
        return Path(root)
    return None


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one ``PASS``/``FAIL`` line per acceptance criterion (``ok=None`` marks a skip)."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(criterion, ok, detail):
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"criterion {criterion:>2} {status}: {detail}"
        lines.append((criterion, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
