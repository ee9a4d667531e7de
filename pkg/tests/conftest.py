from pathlib import Path

import numpy as np
import pytest

from sensornet.data import AlphabetSpec, SensorMatrix

DATA = Path(__file__).parent / "data"
ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def matrix(rows, alphabet=2):
    return SensorMatrix(np.asarray(rows), AlphabetSpec(alphabet))


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def configs_dir():
    return CONFIGS
