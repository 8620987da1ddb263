"""Sliding-window center lattice on the sphere and viewport overlap weights.

Windows are viewport-sized tiles centered on a regular (yaw, pitch)
lattice.  The default layout steps 15 degrees horizontally and 7.5
degrees vertically; at a 107x107 degree FOV that yields 24 columns by
11 rows.  Overlap between a viewport and a window is modeled as the
intersection of their axis-aligned angular rectangles, wrap-aware in
yaw; pitch is treated as a plain linear axis so the fraction stays
symmetric and equals 1 for coincident centers.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from panoflow.errors import ValidationError

DEFAULT_H_STEP_DEG = 15.0
DEFAULT_V_STEP_DEG = 7.5
DEFAULT_K_NEAREST = 4


@dataclass(frozen=True)
class GridSpec:
    """Immutable window-center layout; queries are pure and thread-safe."""

    hfov_deg: float
    vfov_deg: float
    h_step_deg: float
    v_step_deg: float
    centers: tuple[tuple[float, float], ...]
    h_count: int
    v_count: int

    def __post_init__(self) -> None:
        if self.h_count * self.v_count != len(self.centers):
            raise ValidationError("center count does not match h_count * v_count")

    @property
    def n_windows(self) -> int:
        return len(self.centers)

    @cached_property
    def center_yaws(self) -> np.ndarray:
        arr = np.array([c[0] for c in self.centers], dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def center_pitches(self) -> np.ndarray:
        arr = np.array([c[1] for c in self.centers], dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @cached_property
    def spec_hash(self) -> bytes:
        """8-byte digest identifying this layout, embedded in matrix files."""
        canon = "grid:v1|{:.9g}|{:.9g}|{:.9g}|{:.9g}|{}|{}".format(
            self.hfov_deg,
            self.vfov_deg,
            self.h_step_deg,
            self.v_step_deg,
            self.h_count,
            self.v_count,
        )
        return hashlib.sha256(canon.encode("ascii")).digest()[:8]

    def params_dict(self) -> dict:
        return {
            "hfov_deg": self.hfov_deg,
            "vfov_deg": self.vfov_deg,
            "h_step_deg": self.h_step_deg,
            "v_step_deg": self.v_step_deg,
            "h_count": self.h_count,
            "v_count": self.v_count,
        }


def _wrapped_yaw_delta(a_deg, b_deg):
    """Absolute yaw separation on the circle, in [0, 180]."""
    d = np.abs(np.asarray(a_deg) - np.asarray(b_deg)) % 360.0
    return np.minimum(d, 360.0 - d)


def build_grid(
    hfov_deg: float,
    vfov_deg: float,
    h_step_deg: float = DEFAULT_H_STEP_DEG,
    v_step_deg: float = DEFAULT_V_STEP_DEG,
) -> GridSpec:
    """Lay out window centers over the sphere.

    Yaw columns cover [-180, 180) at the horizontal step, which must
    divide 360 evenly.  Pitch rows are the multiples k * v_step whose
    magnitude stays below (180 - vfov + v_step) / 2, i.e. rows are added
    outward as long as the window center keeps the tile renderable
    (|pitch| + vfov/2 <= 90 + v_step/2).  Rows are ordered from the
    lowest pitch upward; within a row, columns run from -180 eastward.
    """
    if not 0.0 < hfov_deg < 180.0 or not 0.0 < vfov_deg < 180.0:
        raise ValidationError("window FOV must lie in (0, 180)")
    if h_step_deg <= 0.0 or v_step_deg <= 0.0:
        raise ValidationError("grid steps must be positive")
    ratio = 360.0 / h_step_deg
    if abs(ratio - round(ratio)) > 1e-9:
        raise ValidationError(f"h_step {h_step_deg} does not evenly divide 360")
    h_count = int(round(ratio))

    limit = (180.0 - vfov_deg + v_step_deg) / 2.0
    k_max = math.ceil(limit / v_step_deg - 1e-9) - 1
    k_max = max(k_max, 0)
    pitches = [k * v_step_deg for k in range(-k_max, k_max + 1)]
    yaws = [-180.0 + j * h_step_deg for j in range(h_count)]

    centers = tuple((yaw, pitch) for pitch in pitches for yaw in yaws)
    return GridSpec(
        hfov_deg=hfov_deg,
        vfov_deg=vfov_deg,
        h_step_deg=h_step_deg,
        v_step_deg=v_step_deg,
        centers=centers,
        h_count=h_count,
        v_count=len(pitches),
    )


def overlap_fraction(
    center_a: tuple[float, float],
    center_b: tuple[float, float],
    hfov_deg: float,
    vfov_deg: float,
) -> float:
    """Fractional intersection of two equally sized angular rectangles.

    Symmetric in its arguments and 1.0 for coincident centers; yaw
    separation is wrap-aware.
    """
    dyaw = float(_wrapped_yaw_delta(center_a[0], center_b[0]))
    dpitch = abs(center_a[1] - center_b[1])
    yaw_overlap = max(0.0, hfov_deg - dyaw)
    pitch_overlap = max(0.0, vfov_deg - dpitch)
    return (yaw_overlap * pitch_overlap) / (hfov_deg * vfov_deg)


def k_nearest_windows(
    grid: GridSpec, yaw_deg: float, pitch_deg: float, k: int
) -> list[tuple[int, float, float]]:
    """The k lattice windows nearest in wrap-aware angular distance.

    Returns (window_id, |yaw delta|, |pitch delta|) tuples sorted by
    (squared distance, id); ties at the selection boundary break toward
    the lower window id so replays stay deterministic.

    Exploits the regular lattice: a small seed block of windows around
    the query yields a valid upper bound on the k-th distance, and only
    rows/columns within that bound are examined afterwards, so the cost
    is O(k) regardless of grid size or video length.
    """
    h_count, v_count = grid.h_count, grid.v_count
    centers = grid.centers
    n = h_count * v_count
    k = min(k, n)
    hstep, vstep = grid.h_step_deg, grid.v_step_deg
    p_min = centers[0][1]

    # Fractional lattice coordinates of the query; used only for range
    # bounds (every range is padded), never for exact distances.
    jf = ((yaw_deg + 180.0) % 360.0) / hstep
    rf = (pitch_deg - p_min) / vstep

    def window_d2(row: int, col: int) -> tuple[float, float, float]:
        cy, cp = centers[row * h_count + col]
        dy = yaw_deg - cy
        if dy < 0.0:
            dy = -dy
        dy = dy % 360.0
        if dy > 180.0:
            dy = 360.0 - dy
        dp = pitch_deg - cp
        if dp < 0.0:
            dp = -dp
        return dy * dy + dp * dp, dy, dp

    # Seed block around the query, grown until it holds at least k
    # windows; its k-th smallest distance bounds the true one.
    rows_half, cols_half = 1, 1
    r0 = min(max(int(rf), 0), v_count - 1)
    c0 = int(jf)
    while True:
        rows = range(max(0, r0 - rows_half + 1), min(v_count, r0 + rows_half + 1))
        cols = {(c0 + s) % h_count for s in range(-cols_half + 1, cols_half + 1)}
        if len(rows) * len(cols) >= k or len(rows) * len(cols) == n:
            break
        if len(rows) < v_count:
            rows_half += 1
        if len(cols) < h_count:
            cols_half += 1
    seed = sorted(window_d2(r, c)[0] for r in rows for c in cols)
    bound = seed[k - 1]

    # Complete tie-inclusive pool: every window within the bound.  Ranges
    # are over-approximated by one step and filtered exactly.
    limit = math.sqrt(bound)
    i_lo = max(0, int(math.floor(rf - limit / vstep)) - 1)
    i_hi = min(v_count - 1, int(math.ceil(rf + limit / vstep)) + 1)
    pool: list[tuple[float, int, float, float]] = []
    for i in range(i_lo, i_hi + 1):
        base = i * h_count
        dp_row = pitch_deg - centers[base][1]
        rem = bound - dp_row * dp_row
        if rem < 0.0:
            continue
        span = math.sqrt(rem) / hstep
        c_lo = int(math.floor(jf - span)) - 1
        c_hi = int(math.ceil(jf + span)) + 1
        if c_hi - c_lo + 1 >= h_count:
            cols_i = range(h_count)
        else:
            cols_i = {c % h_count for c in range(c_lo, c_hi + 1)}
        for c in cols_i:
            d2, dy, dp = window_d2(i, c)
            if d2 <= bound:
                pool.append((d2, base + c, dy, dp))
    pool.sort()
    return [(wid, dy, dp) for _, wid, dy, dp in pool[:k]]


def overlapping_windows(
    viewport_center: tuple[float, float],
    grid: GridSpec,
    k: int = DEFAULT_K_NEAREST,
) -> list[tuple[int, float]]:
    """The k windows nearest to a viewport center, with overlap fractions.

    Distance is Euclidean in (wrapped yaw delta, pitch delta) space.
    With the default grid and FOV every returned fraction is positive.
    """
    if k < 1:
        raise ValidationError("k must be at least 1")
    yaw, pitch = viewport_center
    hfov, vfov = grid.hfov_deg, grid.vfov_deg
    area = hfov * vfov
    result = []
    for wid, dy, dp in k_nearest_windows(grid, yaw, pitch, k):
        yo = hfov - dy
        po = vfov - dp
        frac = (yo * po) / area if (yo > 0.0 and po > 0.0) else 0.0
        result.append((wid, frac))
    return result
