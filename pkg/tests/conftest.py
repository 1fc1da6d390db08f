import numpy as np
import pytest

from pcakit.datasets import DatasetView, LabeledSample
from pcakit.harness import desk_datasets, entropy_lab_inputs, score_table_for
from pcakit.images import RasterImage
from pcakit.runconfig import default_run_config


@pytest.fixture(scope="session")
def desk():
    """Frozen desk-scale run config and train/test split (ipc_out 2 default)."""
    rc = default_run_config()
    train, test = desk_datasets(rc)
    return rc, train, test


@pytest.fixture(scope="session")
def desk_tables(desk):
    """Per-root-seed score tables on the desk train split, computed once."""
    rc, train, _ = desk
    cache = {}

    def get(seed: int):
        if seed not in cache:
            cache[seed] = score_table_for(train, rc, seed)
        return cache[seed]

    return get


@pytest.fixture(scope="session")
def desk_observer(desk):
    """Observer model and ipc-10 difficulty strata for the entropy experiments."""
    rc, train, _ = desk
    return entropy_lab_inputs(train, rc, 0, strata_ipc=10)


def make_image(rng: np.random.Generator, h: int, w: int, c: int = 3) -> RasterImage:
    return RasterImage(rng.random((h, w, c), dtype=np.float32))


def make_view(images_labels, num_classes: int, name: str = "fixture") -> DatasetView:
    samples = tuple(
        LabeledSample(img, label, i) for i, (img, label) in enumerate(images_labels)
    )
    return DatasetView(samples, num_classes, name)
