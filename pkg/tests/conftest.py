import hypothesis
import numpy as np
from scipy import ndimage

from panoflow.projection import EquirectFrame

hypothesis.settings.register_profile(
    "default", deadline=None, max_examples=50, derandomize=True
)
hypothesis.settings.load_profile("default")


def textured_tile(seed: int, height: int = 128, width: int = 128, sigma: float = 3.0) -> np.ndarray:
    """Smooth random texture in [0, 255]; rich gradients for flow estimation."""
    rng = np.random.default_rng(seed)
    img = ndimage.gaussian_filter(rng.uniform(0.0, 255.0, (height, width)), sigma)
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo) * 255.0


def textured_equirect(seed: int, height: int = 128) -> EquirectFrame:
    """Random smooth RGB equirect frame (width = 2 * height)."""
    rng = np.random.default_rng(seed)
    img = ndimage.gaussian_filter(rng.uniform(0.0, 255.0, (height, 2 * height, 3)), (2.5, 2.5, 0.0))
    lo, hi = img.min(), img.max()
    return EquirectFrame(((img - lo) / (hi - lo) * 255.0).astype(np.uint8))


def panning_frames(n_frames: int, height: int = 128, shift_px: int = 4, seed: int = 42) -> list[EquirectFrame]:
    """Equirect sequence panning horizontally at a constant integer rate."""
    base = textured_equirect(seed, height)
    return [EquirectFrame(np.roll(base.pixels, shift_px * i, axis=1)) for i in range(n_frames)]
