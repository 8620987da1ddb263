#!/usr/bin/env python3
"""Export golden fixtures for the browser viewer's test suite.

The viewer reimplements the projection math, the grain-placement RNG,
and the layout checksum in TypeScript; these fixtures pin the viewer
to this package's outputs: sampled pixel maps, fully rendered viewport
tiles, raw PCG32 streams, and grain-set checksums.

Outputs land in frontend/tests/golden/ and are committed; re-run after
any change to the shared math.
"""

import json
from pathlib import Path

import numpy as np

from panoflow.grf import GrfConfig, generate_grains
from panoflow.projection import EquirectFrame, ViewportSpec, build_pixel_map, render_viewport
from panoflow.rng import Pcg32

GOLDEN = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "golden"

VIEWPORTS = [
    ("identity", ViewportSpec(0.0, 0.0, 90.0, 48, 36)),
    ("seam", ViewportSpec(180.0, 10.0, 107.0, 48, 36)),
    ("downgaze", ViewportSpec(30.0, -45.0, 90.0, 40, 40)),
    ("wide", ViewportSpec(-123.4, 62.0, 120.0, 32, 24)),
]


def export_pixel_maps(eq_w=512, eq_h=256) -> None:
    for name, vp in VIEWPORTS:
        pmap = build_pixel_map(vp, eq_w, eq_h)
        doc = {
            "viewport": {
                "yawDeg": vp.yaw_deg,
                "pitchDeg": vp.pitch_deg,
                "hfovDeg": vp.hfov_deg,
                "widthPx": vp.width_px,
                "heightPx": vp.height_px,
            },
            "eqWidth": eq_w,
            "eqHeight": eq_h,
            "x": pmap.x.ravel().tolist(),
            "y": pmap.y.ravel().tolist(),
        }
        (GOLDEN / f"pixelmap_{name}.json").write_text(json.dumps(doc))


def export_renders() -> None:
    rng = np.random.default_rng(2024)
    from scipy import ndimage

    tex = ndimage.gaussian_filter(rng.uniform(0, 255, (128, 256, 3)), (2.0, 2.0, 0.0))
    tex = ((tex - tex.min()) / (tex.max() - tex.min()) * 255.0).astype(np.uint8)
    frame = EquirectFrame(tex)
    (GOLDEN / "equirect_128.bin").write_bytes(tex.tobytes())
    meta = {"width": 256, "height": 128, "renders": []}
    for name, vp in VIEWPORTS:
        pmap = build_pixel_map(vp, 256, 128)
        out = render_viewport(frame, pmap)
        out_name = f"render_{name}.bin"
        (GOLDEN / out_name).write_bytes(out.tobytes())
        meta["renders"].append(
            {
                "name": name,
                "file": out_name,
                "viewport": {
                    "yawDeg": vp.yaw_deg,
                    "pitchDeg": vp.pitch_deg,
                    "hfovDeg": vp.hfov_deg,
                    "widthPx": vp.width_px,
                    "heightPx": vp.height_px,
                },
            }
        )
    (GOLDEN / "renders.json").write_text(json.dumps(meta, indent=1))


def export_rng_vectors() -> None:
    doc = {}
    for seed in (0, 42, 123456789):
        rng = Pcg32(seed)
        doc[str(seed)] = [rng.next_u32() for _ in range(16)]
    (GOLDEN / "pcg32.json").write_text(json.dumps(doc, indent=1))


def export_grain_sets() -> None:
    cases = [
        ("default107", GrfConfig(seed=0), 107.0),
        ("default107_seed9", GrfConfig(seed=9), 107.0),
        ("narrow", GrfConfig(grain_size_deg=1.5, density=0.5, ifov_deg=36.0, ofov_deg=39.0, seed=5), 40.0),
        ("sparse", GrfConfig(density=0.15, seed=3), 107.0),
    ]
    doc = {}
    for name, cfg, display in cases:
        grains = generate_grains(cfg, display)
        doc[name] = {
            "config": {
                "grainSizeDeg": cfg.grain_size_deg,
                "density": cfg.density,
                "ifovDeg": cfg.ifov_deg,
                "ofovDeg": cfg.ofov_deg,
                "seed": cfg.seed,
            },
            "displayFovDeg": display,
            "count": len(grains),
            "checksum": grains.checksum(),
            "realizedCoverage": grains.realized_coverage,
            "firstCenters": [
                [grains.yaw_deg[i], grains.pitch_deg[i]] for i in range(min(5, len(grains)))
            ],
        }
    (GOLDEN / "grains.json").write_text(json.dumps(doc, indent=1))


def main() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    export_pixel_maps()
    export_renders()
    export_rng_vectors()
    export_grain_sets()
    print(f"goldens written to {GOLDEN}")


if __name__ == "__main__":
    main()
