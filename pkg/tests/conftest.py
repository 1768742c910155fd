"""Shared fixtures: a tiny synthetic dataset with cached spectrograms.

The dataset is built once per session (2 clips per class, 14 WAV files) and
reused by the CLI and integration tests; heavier datasets are created by the
tests that need them.
"""

import numpy as np
import pytest

from azarnet.cli import main as cli_main
from azarnet.dataset import generate_dataset, load_manifest


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """(manifest_path, cache_dir) for a 2-clips-per-class dataset."""
    root = tmp_path_factory.mktemp("tiny")
    manifest = generate_dataset(2, base_seed=7, out_dir=root)
    cache = root / "cache"
    rc = cli_main(
        ["preprocess", "--manifest", str(manifest), "--cache", str(cache)]
    )
    assert rc == 0
    return manifest, cache


@pytest.fixture(scope="session")
def tiny_records(tiny_dataset):
    manifest, _ = tiny_dataset
    return load_manifest(manifest)


@pytest.fixture
def rng_f64():
    """Deterministic float64 generator for oracle comparisons."""
    from azarnet.rng import Rng

    r = Rng(1234)

    def draw(shape, low=-1.0, high=1.0):
        return r.uniform(shape, low, high)

    return draw


def assert_close(a, b, tol=1e-10):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    err = float(np.max(np.abs(a - b))) if a.size else 0.0
    assert a.shape == b.shape and err < tol, f"max abs err {err:.3e} >= {tol}"
