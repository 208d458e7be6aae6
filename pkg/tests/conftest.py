import numpy as np
import pytest

from lrtc import DenseTensor
from lrtc.cli import save_image


def random_tensor(rng, shape):
    return DenseTensor.from_array(rng.standard_normal(shape))


@pytest.fixture(scope="session")
def test_image_64(tmp_path_factory):
    """64x64 RGB PNG: scikit-image's bundled photo, downscaled; returns path."""
    skimage = pytest.importorskip("skimage")
    from skimage.data import astronaut
    from skimage.transform import resize

    img = resize(astronaut(), (64, 64, 3), anti_aliasing=True, preserve_range=True)
    path = tmp_path_factory.mktemp("images") / "test64.png"
    save_image(DenseTensor.from_array(img), str(path))
    return str(path)


@pytest.fixture(scope="session")
def small_image_16(tmp_path_factory):
    """16x16 smooth low-rank-ish RGB PNG for fast CLI runs; returns path."""
    rng = np.random.default_rng(2024)
    base = rng.standard_normal((16, 2)) @ rng.standard_normal((2, 16))
    base = (base - base.min()) / (base.max() - base.min()) * 255.0
    img = np.stack([base, 0.5 * base + 64.0, 255.0 - base], axis=2)
    path = tmp_path_factory.mktemp("images") / "small16.png"
    save_image(DenseTensor.from_array(img), str(path))
    return str(path)
