import os

import numpy as np
import pytest

from dcsteg.frames import ArraySource
from dcsteg.samples import make_sample_videos, write_sample_set

# acceptance criteria report lines, filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def sample_videos():
    return make_sample_videos(0)


@pytest.fixture(scope="session")
def sample_sources(sample_videos):
    return [ArraySource(vid, frames) for vid, frames in sample_videos.items()]


@pytest.fixture(scope="session")
def sample_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("samples")
    write_sample_set(d, seed=0)
    return d


@pytest.fixture(scope="session")
def key():
    return bytes(range(32))


@pytest.fixture
def key_file(tmp_path, key):
    p = tmp_path / "key.bin"
    p.write_bytes(key)
    return p


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
