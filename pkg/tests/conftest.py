import numpy as np
import pytest

from slabuq.segmenter import PlaybackBackend
from slabuq.synth import SynthConfig, generate_sequence

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(label: str, ok: bool, detail: str = ""):
        _ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {label}  {detail}".rstrip())
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def synth_default():
    cfg = SynthConfig()
    seq, masks = generate_sequence(cfg)
    return cfg, seq, masks


@pytest.fixture
def gt_backend(synth_default):
    _, _, masks = synth_default
    return PlaybackBackend(maps={(k, 0): m.astype(np.float64) for k, m in enumerate(masks)})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
