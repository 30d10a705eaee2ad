import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


def assert_rel_close(actual, expected, rel=1e-6, abs_floor=1e-9):
    """Elementwise |a-e| <= rel*max(|a|,|e|), with an absolute floor near zero."""
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    assert actual.shape == expected.shape
    diff = np.abs(actual - expected)
    bound = np.maximum(rel * np.maximum(np.abs(actual), np.abs(expected)), abs_floor)
    worst = (diff - bound).max()
    assert np.all(diff <= bound), (
        f"values differ beyond rel={rel}: worst excess {worst:.3e}, "
        f"max diff {diff.max():.3e}"
    )


def central_difference(loss_fn, array, h=1e-5):
    """Finite-difference gradient of a scalar loss w.r.t. every array element."""
    grad = np.zeros_like(array)
    it = np.nditer(array, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        original = array[idx]
        array[idx] = original + h
        plus = loss_fn()
        array[idx] = original - h
        minus = loss_fn()
        array[idx] = original
        grad[idx] = (plus - minus) / (2.0 * h)
    return grad


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Small 4-class PNG tree: 6 train + 3 val images per class, 64px sources."""
    from synthetic import build_dataset_tree

    root = tmp_path_factory.mktemp("tiny_data")
    train_root = build_dataset_tree(root / "train", per_class=6, seed=11, size=64)
    val_root = build_dataset_tree(root / "val", per_class=3, seed=22, size=64)
    return train_root, val_root
