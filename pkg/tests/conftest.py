import sys

import numpy as np
import pytest
from hypothesis import settings

from densify.synth import SynthConfig, generate

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_synth():
    return generate(SynthConfig(n_classes=20, dim=32, n_videos=3, subtitles_per_video=10, words_per_subtitle=4, seed=7))


@pytest.fixture(scope="session")
def filler_synth():
    return generate(SynthConfig(n_classes=30, dim=64, n_videos=6, subtitles_per_video=20, filler_rate=1.0, seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split()[0])):
            terminalreporter.write_line(line)
