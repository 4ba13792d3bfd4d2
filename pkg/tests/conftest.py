import pathlib

import numpy as np
import pytest

from pglr.gmm import train_em
from pglr.imgio import read_pgm
from pglr.lowrank import svd
from pglr.patches import extract_patches

ASSETS = pathlib.Path(__file__).parent / "assets"

TRAIN_NAMES = ("brick", "coins", "grass", "moon", "page", "text")


def check_em_history(model):
    """Every training run in the suite must have a monotone log-likelihood."""
    ll = model.log_likelihoods
    assert len(ll) >= 1
    for a, b in zip(ll, ll[1:]):
        assert b >= a - 1e-6, f"log-likelihood dropped: {a} -> {b}"


def make_gradient64():
    r = np.arange(64, dtype=np.float64)
    return np.add.outer(r, r) * (255.0 / 126.0)


def make_checkerboard64():
    t = (np.arange(64) // 8) % 2
    return 255.0 * np.logical_xor.outer(t, t).astype(np.float64)


def make_disk64():
    yy, xx = np.mgrid[0:64, 0:64].astype(np.float64)
    inside = (yy - 31.5) ** 2 + (xx - 31.5) ** 2 <= 20.0 ** 2
    return np.where(inside, 200.0, 50.0)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the jitted eigensolver once so timed tests measure math, not JIT."""
    svd(np.arange(12.0).reshape(3, 4))


@pytest.fixture(scope="session")
def camera():
    return read_pgm(ASSETS / "camera_256.pgm")


@pytest.fixture(scope="session")
def training_patches():
    vecs = [
        extract_patches(read_pgm(ASSETS / f"train_{name}.pgm"), 8, 4).vectors
        for name in TRAIN_NAMES
    ]
    return np.concatenate(vecs, axis=0)


@pytest.fixture(scope="session")
def prior_k32(training_patches):
    model = train_em(training_patches, 32, seed=0)
    check_em_history(model)
    return model


@pytest.fixture(scope="session")
def prior_k32_file(prior_k32, tmp_path_factory):
    from pglr.gmm import save_model

    path = tmp_path_factory.mktemp("models") / "prior_k32.gmm"
    save_model(prior_k32, path)
    return path


@pytest.fixture()
def synthetic_images():
    return {
        "gradient": make_gradient64(),
        "checkerboard": make_checkerboard64(),
        "disk": make_disk64(),
    }
