"""Constant-time perceived-flow estimation for arbitrary viewport orientations.

Each query reads the k nearest windows' precomputed scalars and combines
them by their viewport-overlap weights, so the cost is O(k) no matter
how long the video or how fine the grid.  Recorded head traces replay
with zero-order hold: every video frame uses the latest head sample at
or before its timestamp.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from panoflow.errors import GridMatrixMismatchError, ValidationError
from panoflow.flow import FlowMatrix
from panoflow.grid import DEFAULT_K_NEAREST, GridSpec, k_nearest_windows


@dataclass(frozen=True)
class HeadSample:
    """One head-orientation reading, seconds from session start, degrees."""

    t: float
    yaw_deg: float
    pitch_deg: float
    roll_deg: float = 0.0

    def __post_init__(self) -> None:
        if not all(
            np.isfinite(v) for v in (self.t, self.yaw_deg, self.pitch_deg, self.roll_deg)
        ):
            raise ValidationError("head sample fields must be finite")


@dataclass(frozen=True)
class EpofSample:
    """Perceived-flow estimate for one frame with its contributing windows."""

    frame_idx: int
    epof: float
    window_ids: tuple[int, ...]
    weights: tuple[float, ...]


def overlap_weighted_mean(values: Sequence[float], overlaps: Sequence[float]) -> float:
    """Definitional estimate: sum(value * overlap) / sum(overlap)."""
    if len(values) != len(overlaps) or not values:
        raise ValidationError("need equally many values and overlaps, at least one")
    den = sum(overlaps)
    if den <= 0.0:
        raise ValidationError("overlap weights must sum to a positive value")
    return sum(v * w for v, w in zip(values, overlaps)) / den


def epof(
    viewport_center: tuple[float, float],
    frame_idx: int,
    matrix: FlowMatrix,
    grid: GridSpec,
    k: int = DEFAULT_K_NEAREST,
) -> EpofSample:
    """Overlap-weighted average of the k nearest windows' flow scalars.

    Windows with zero overlap are dropped from the contribution set; in
    the degenerate case where none of the k windows overlaps at all, the
    nearest window alone contributes with weight 1.  The estimate is
    always bounded by the contributing windows' values.

    Raises GridMatrixMismatchError when the matrix was built for a
    different grid, and ValidationError for an out-of-range frame index
    (silent clamping would hide trace/video misalignment).
    """
    if matrix.grid_hash != grid.spec_hash:
        raise GridMatrixMismatchError("flow matrix was built for a different grid")
    if not 0 <= frame_idx < matrix.n_frames:
        raise ValidationError(
            f"frame index {frame_idx} outside [0, {matrix.n_frames})"
        )
    yaw, pitch = viewport_center
    nearest = k_nearest_windows(grid, yaw, pitch, k)
    hfov, vfov = grid.hfov_deg, grid.vfov_deg
    area = hfov * vfov
    values = matrix.values

    ids: list[int] = []
    weights: list[float] = []
    num = 0.0
    den = 0.0
    for wid, dy, dp in nearest:
        yo = hfov - dy
        po = vfov - dp
        if yo <= 0.0 or po <= 0.0:
            continue
        frac = (yo * po) / area
        ids.append(wid)
        weights.append(frac)
        num += float(values[wid, frame_idx]) * frac
        den += frac
    if not ids:
        wid = nearest[0][0]
        return EpofSample(
            frame_idx=frame_idx,
            epof=float(values[wid, frame_idx]),
            window_ids=(wid,),
            weights=(1.0,),
        )
    return EpofSample(
        frame_idx=frame_idx,
        epof=num / den,
        window_ids=tuple(ids),
        weights=tuple(weights),
    )


def _validate_trace(trace: Sequence[HeadSample]) -> None:
    if not trace:
        raise ValidationError("head trace is empty")
    ts = [s.t for s in trace]
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise ValidationError("head trace timestamps must be non-decreasing")


def hold_orientation(
    trace: Sequence[HeadSample], n_frames: int, fps: float
) -> np.ndarray:
    """Zero-order-hold orientation per frame: (t, yaw, pitch, roll) rows.

    Frame i samples the trace at time i/fps, holding the latest sample
    at or before that instant; frames before the first sample reuse it.
    """
    _validate_trace(trace)
    if fps <= 0:
        raise ValidationError("fps must be positive")
    sample_ts = np.array([s.t for s in trace], dtype=np.float64)
    frame_ts = np.arange(n_frames, dtype=np.float64) / fps
    picks = np.clip(np.searchsorted(sample_ts, frame_ts, side="right") - 1, 0, None)
    out = np.empty((n_frames, 4), dtype=np.float64)
    for i, p in enumerate(picks.tolist()):
        s = trace[p]
        out[i] = (frame_ts[i], s.yaw_deg, s.pitch_deg, s.roll_deg)
    return out


def epof_trace(
    trace: Sequence[HeadSample],
    matrix: FlowMatrix,
    grid: GridSpec,
    video_fps: float,
    k: int = DEFAULT_K_NEAREST,
) -> list[EpofSample]:
    """Replay a head trace over the whole video, one EpofSample per frame."""
    held = hold_orientation(trace, matrix.n_frames, video_fps)
    return [
        epof((held[i, 1], held[i, 2]), i, matrix, grid, k)
        for i in range(matrix.n_frames)
    ]


def session_summary(samples: Sequence[EpofSample]) -> dict[str, float]:
    """Exact summary statistics over a session's per-frame estimates."""
    if not samples:
        raise ValidationError("no samples to summarize")
    values = np.array([s.epof for s in samples], dtype=np.float64)
    return {
        "mean": float(values.mean()),
        "sum": float(values.sum()),
        "min": float(values.min()),
        "max": float(values.max()),
        "p10": float(np.percentile(values, 10.0)),
        "p90": float(np.percentile(values, 90.0)),
    }
