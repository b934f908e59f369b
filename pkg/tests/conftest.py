import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_pose(rng, pitch_limit=1.2):
    pose = np.empty(6)
    pose[:3] = rng.uniform(-10.0, 10.0, 3)
    pose[3] = rng.uniform(-np.pi, np.pi)
    pose[4] = rng.uniform(-pitch_limit, pitch_limit)
    pose[5] = rng.uniform(-np.pi, np.pi)
    return pose


def random_control(rng):
    return rng.uniform(-2.0, 2.0, 3), rng.uniform(-1.0, 1.0, 3), float(rng.uniform(0.005, 0.05))
