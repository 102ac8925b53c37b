import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pottspml import GridDims, LabelField, make_rng  # noqa: E402


def random_field(seed, rows, cols, num_classes):
    rng = make_rng(seed)
    labels = rng.integers(0, num_classes, size=(rows, cols), dtype=np.int32)
    return LabelField(GridDims(rows, cols), num_classes, labels)


def checkerboard(rows, cols, num_classes=2):
    labels = (np.indices((rows, cols)).sum(axis=0) % 2).astype(np.int32)
    return LabelField(GridDims(rows, cols), num_classes, labels)


def row_stripes(rows, cols, num_classes=2):
    labels = np.tile((np.arange(rows) % 2).astype(np.int32)[:, None], (1, cols))
    return LabelField(GridDims(rows, cols), num_classes, labels)


@pytest.fixture
def rng():
    return make_rng(20260810)
