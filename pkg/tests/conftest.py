import os

import numpy as np
import pytest

os.environ.setdefault("THERMOFORGE_THREADS", "2")

from thermoforge import geomgen, heatfd
from thermoforge.vrrae import GenerativeModel, TrainConfig, train


@pytest.fixture(scope="session")
def tiny_data(tmp_path_factory):
    """32x32 dataset with a solved field subset; shared across model tests."""
    d = tmp_path_factory.mktemp("tiny_data")
    spec = geomgen.GeometrySpec(grid_m=32, grid_n=32, seed=3)
    manifest = geomgen.generate_dataset(spec, 110, d)
    cfg = heatfd.ThermalConfig()
    manifest, fields = heatfd.solve_batch(manifest, d, cfg, subset_count=40)
    return {
        "dir": d,
        "spec": spec,
        "manifest": manifest,
        "rasters": geomgen.load_rasters(manifest, d),
        "fields": fields,
        "thermal": cfg,
    }


@pytest.fixture(scope="session")
def tiny_vrrae(tiny_data):
    model = GenerativeModel((32, 32), mode="vrrae", init_seed=1)
    train(model, tiny_data["rasters"], tiny_data["manifest"].split,
          TrainConfig(steps=60, batch_size=64, lr=1e-3, seed=5),
          manifest_hash=tiny_data["manifest"].manifest_hash())
    return model


@pytest.fixture(scope="session")
def tiny_ae(tiny_data):
    model = GenerativeModel((32, 32), mode="plain_ae", init_seed=1)
    train(model, tiny_data["rasters"], tiny_data["manifest"].split,
          TrainConfig(steps=60, batch_size=64, lr=1e-3, seed=5),
          manifest_hash=tiny_data["manifest"].manifest_hash())
    return model
