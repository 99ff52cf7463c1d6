import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spacerot.synth import REF1, SynthConfig, write_synthetic
from spacerot import streamio

# small stream shared by the end-to-end oracle and golden tests
SMALL = SynthConfig(
    seed=11, classes=4, dim=8, samples=200, class_separation=0.9,
    confusable_pairs=((0, 1, 0.85),), mean_dim=6,
)


@pytest.fixture(scope="session")
def ref1_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("streams") / "ref1.soba"
    write_synthetic(REF1, path)
    return path


@pytest.fixture(scope="session")
def ref1_data(ref1_file):
    weights, feats, labels, manifest = streamio.read_stream(ref1_file)
    return weights, feats, labels


@pytest.fixture(scope="session")
def small_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("streams") / "small.soba"
    write_synthetic(SMALL, path)
    return path


@pytest.fixture(scope="session")
def small_data(small_file):
    weights, feats, labels, manifest = streamio.read_stream(small_file)
    return weights, feats, labels


@pytest.fixture()
def rng():
    return np.random.default_rng(20240117)
