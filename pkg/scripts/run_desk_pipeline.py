#!/usr/bin/env python3
"""End-to-end desk-scale demo: synthesize a panning video and a head
trace, preprocess the sliding-window flow matrix, replay the trace to a
per-frame EPOF/opacity CSV, and render a few grain masks.

Everything lands under one output directory; timings print per stage.
Defaults match the full 24x11 grid at 128px tiles (several minutes on a
single core); pass --quick for a coarse grid smoke run.
"""

import argparse
import subprocess
import sys
import time
from pathlib import Path

HERE = Path(__file__).parent


def run(label: str, argv: list[str]) -> None:
    print(f"== {label}: {' '.join(argv)}")
    start = time.monotonic()
    subprocess.run(argv, check=True)
    print(f"   {label} took {time.monotonic() - start:.1f}s\n")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("desk_run"))
    parser.add_argument("--frames", type=int, default=30)
    parser.add_argument("--height", type=int, default=512)
    parser.add_argument("--quick", action="store_true", help="coarse 4x3 grid, 32px tiles")
    args = parser.parse_args()

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    frames_dir = out / "frames"
    trace = out / "trace.csv"
    manifest = out / "video.json"

    run("synthesize video", [
        sys.executable, str(HERE / "make_synthetic_video.py"),
        "--out", str(frames_dir), "--frames", str(args.frames), "--height", str(args.height),
    ])
    run("synthesize trace", [
        sys.executable, str(HERE / "make_synthetic_trace.py"),
        "--out", str(trace), "--duration", f"{args.frames / 60.0 + 0.5}",
    ])

    grid_args = (
        ["--hfov", "90", "--vfov", "90", "--hstep", "90", "--vstep", "45", "--tile-size", "32"]
        if args.quick
        else ["--hfov", "107", "--vfov", "107", "--hstep", "15", "--vstep", "7.5", "--tile-size", "128"]
    )
    run("preprocess", [
        "panoflow", "preprocess", str(frames_dir), "--fps", "60", *grid_args,
        "--out", str(manifest),
    ])
    run("replay trace", [
        "panoflow", "epof", str(manifest), str(trace), "--out", str(out / "epof.csv"),
    ])
    run("render masks", [
        "panoflow", "grf-render", str(manifest), str(trace),
        "--out", str(out / "masks"), "--size", "256", "--every", "10",
    ])
    print(f"done; inspect {out}/epof.csv and {out}/masks/")
    print(f"serve it live with: panoflow serve {manifest} --port 8750")


if __name__ == "__main__":
    main()
