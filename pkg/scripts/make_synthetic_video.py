#!/usr/bin/env python3
"""Generate a synthetic equirect PNG sequence that pans at a constant rate.

The texture is smoothed random noise, so every region carries gradients
the flow estimator can lock onto; panning uses integer circular shifts,
which keeps the ground-truth motion exact everywhere.
"""

import argparse
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage


def make_frames(n_frames: int, height: int, shift_px: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    tex = ndimage.gaussian_filter(
        rng.uniform(0.0, 255.0, (height, 2 * height, 3)), (2.5, 2.5, 0.0)
    )
    lo, hi = tex.min(), tex.max()
    base = ((tex - lo) / (hi - lo) * 255.0).astype(np.uint8)
    return [np.roll(base, shift_px * i, axis=1) for i in range(n_frames)]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, required=True, help="output frame directory")
    parser.add_argument("--frames", type=int, default=30)
    parser.add_argument("--height", type=int, default=512, help="equirect height (width = 2x)")
    parser.add_argument("--shift", type=int, default=8, help="pan in pixels per frame")
    parser.add_argument("--seed", type=int, default=4)
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(make_frames(args.frames, args.height, args.shift, args.seed)):
        Image.fromarray(frame).save(args.out / f"frame_{i:04d}.png")
    print(f"wrote {args.frames} frames ({2 * args.height}x{args.height}) to {args.out}")


if __name__ == "__main__":
    main()
