#!/usr/bin/env python3
"""Generate a synthetic 60 Hz head trace: slow sinusoidal sweeps with jitter."""

import argparse
from pathlib import Path

import numpy as np

from panoflow.epof import HeadSample
from panoflow.store import write_trace_csv


def make_trace(duration_s: float, rate_hz: float, seed: int) -> list[HeadSample]:
    rng = np.random.default_rng(seed)
    n = int(duration_s * rate_hz)
    samples = []
    for i in range(n):
        t = i / rate_hz
        samples.append(
            HeadSample(
                t=t,
                yaw_deg=float(90.0 * np.sin(t / 3.1) + rng.normal(0.0, 1.5)),
                pitch_deg=float(25.0 * np.sin(t / 2.3) + rng.normal(0.0, 0.8)),
                roll_deg=float(rng.normal(0.0, 0.5)),
            )
        )
    return samples


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--duration", type=float, default=10.0, help="seconds")
    parser.add_argument("--rate", type=float, default=60.0, help="samples per second")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    samples = make_trace(args.duration, args.rate, args.seed)
    write_trace_csv(samples, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")


if __name__ == "__main__":
    main()
