"""Distortion-correct mapping between perspective viewports and equirectangular frames.

Conventions used throughout the package:

- Image y grows downward in both viewport and equirectangular space.
- Positive pitch looks up: the viewport center at pitch +90 deg lands on
  equirect row 0 (the top of the frame).
- Yaw is measured about the vertical axis, normalized to [-180, 180);
  yaw +90 deg lands on the 3/4-width column of the equirect frame.
- The camera looks along +z in its own frame; +x is right, +y is down.
- Rotation order is pitch about the x-axis, then yaw about the y-axis,
  both with fixed world axes. Roll never enters the viewport mapping.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from panoflow.errors import ValidationError


def normalize_yaw(yaw_deg: float) -> float:
    """Wrap a yaw angle into [-180, 180). Idempotent."""
    return (yaw_deg + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class ViewportSpec:
    """Where the user looks plus the display geometry of one eye.

    The vertical FOV is never stored; it is derived from the aspect
    ratio as hfov * height / width and must stay below 180 degrees.
    """

    yaw_deg: float
    pitch_deg: float
    hfov_deg: float
    width_px: int
    height_px: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "yaw_deg", normalize_yaw(float(self.yaw_deg)))
        if not -90.0 <= self.pitch_deg <= 90.0:
            raise ValidationError(f"pitch {self.pitch_deg} outside [-90, 90]")
        if not 0.0 < self.hfov_deg < 180.0:
            raise ValidationError(f"hfov {self.hfov_deg} outside (0, 180)")
        if self.width_px < 1 or self.height_px < 1:
            raise ValidationError("viewport resolution must be positive")
        if not 0.0 < self.vfov_deg < 180.0:
            raise ValidationError(
                f"derived vfov {self.vfov_deg:.3f} outside (0, 180); "
                "reduce hfov or the height/width ratio"
            )

    @property
    def vfov_deg(self) -> float:
        return self.hfov_deg * self.height_px / self.width_px

    @property
    def center(self) -> tuple[float, float]:
        """Pixel-space optical center (c_x, c_y)."""
        return self.width_px / 2.0, self.height_px / 2.0


@dataclass(frozen=True)
class EquirectFrame:
    """One full 360x180 frame, RGB, 8 bits per channel, width = 2 * height."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise ValidationError("equirect frame must be (H, W, 3) uint8")
        if p.shape[1] != 2 * p.shape[0]:
            raise ValidationError(
                f"equirect width {p.shape[1]} != 2 * height {p.shape[0]}"
            )

    @property
    def height_px(self) -> int:
        return self.pixels.shape[0]

    @property
    def width_px(self) -> int:
        return self.pixels.shape[1]

    @cached_property
    def luma(self) -> np.ndarray:
        """Rec.601 luminance as float32 in [0, 255]."""
        r, g, b = (self.pixels[..., i].astype(np.float32) for i in range(3))
        return 0.299 * r + 0.587 * g + 0.114 * b


@dataclass(frozen=True)
class PixelMap:
    """Continuous equirect source coordinate for every viewport pixel.

    Caches the full pixel->direction->rotation->equirect composition for
    one viewport so frames can be resampled without redoing the trig.
    Immutable; safe to share across threads.
    """

    x: np.ndarray
    y: np.ndarray
    eq_width: int
    eq_height: int

    def __post_init__(self) -> None:
        if self.x.shape != self.y.shape or self.x.ndim != 2:
            raise ValidationError("pixel map coordinate grids must share a 2-D shape")

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.shape


def angular_ratios(viewport: ViewportSpec) -> tuple[float, float]:
    """View-units represented by one horizontal and one vertical pixel.

    w_ratio = 2 tan(hfov/2) / W and h_ratio = 2 tan(vfov/2) / H, where
    the image plane sits at unit distance from the camera.
    """
    hfov = np.radians(viewport.hfov_deg)
    vfov = np.radians(viewport.vfov_deg)
    w_ratio = 2.0 * np.tan(hfov / 2.0) / viewport.width_px
    h_ratio = 2.0 * np.tan(vfov / 2.0) / viewport.height_px
    return float(w_ratio), float(h_ratio)


def project_direction(x: float, y: float, viewport: ViewportSpec) -> np.ndarray:
    """Unit direction of viewport pixel (x, y) in the camera frame.

    The pixel sits at ((x - c_x) * w_ratio, (y - c_y) * h_ratio, 1) on the
    unit-distance image plane and is normalized by its distance D.
    """
    if not (0 <= x < viewport.width_px and 0 <= y < viewport.height_px):
        raise ValidationError(f"pixel ({x}, {y}) outside the viewport")
    w_ratio, h_ratio = angular_ratios(viewport)
    c_x, c_y = viewport.center
    px = (x - c_x) * w_ratio
    py = (y - c_y) * h_ratio
    d = np.sqrt(1.0 + px * px + py * py)
    return np.array([px / d, py / d, 1.0 / d])


def _pitch_matrix(pitch_deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(pitch_deg)), np.sin(np.radians(pitch_deg))
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _yaw_matrix(yaw_deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(yaw_deg)), np.sin(np.radians(yaw_deg))
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _roll_matrix(roll_deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(roll_deg)), np.sin(np.radians(roll_deg))
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def head_rotation(yaw_deg: float, pitch_deg: float, roll_deg: float = 0.0) -> np.ndarray:
    """Rotation taking camera-frame directions to world/body-frame ones.

    Roll is applied about the view axis first, then pitch, then yaw.  The
    viewport mapping itself never uses roll; the overlay renderer does.
    """
    return _yaw_matrix(yaw_deg) @ _pitch_matrix(pitch_deg) @ _roll_matrix(roll_deg)


def rotate_direction(v: np.ndarray, pitch_deg: float, yaw_deg: float) -> np.ndarray:
    """Rotate a unit direction by pitch about x, then yaw about y.

    Implemented with Rodrigues' formula about each fixed axis; preserves
    the vector norm to within floating-point error.
    """
    v = np.asarray(v, dtype=np.float64)

    def rodrigues(vec: np.ndarray, axis: np.ndarray, angle_deg: float) -> np.ndarray:
        c = np.cos(np.radians(angle_deg))
        s = np.sin(np.radians(angle_deg))
        return vec * c + np.cross(axis, vec) * s + axis * np.dot(axis, vec) * (1.0 - c)

    pitched = rodrigues(v, np.array([1.0, 0.0, 0.0]), pitch_deg)
    return rodrigues(pitched, np.array([0.0, 1.0, 0.0]), yaw_deg)


def direction_to_equirect(
    v: np.ndarray, eq_width: int, eq_height: int
) -> tuple[float, float]:
    """Equirect pixel coordinate of a unit direction.

    Latitude comes from arcsin of the y component; longitude from the
    two-argument arctangent of (x, z) so the rear hemisphere resolves.
    Both are normalized to [-1, 1] before scaling to the frame, then the
    column wraps modulo the width and the row clamps to [0, height].
    """
    v = np.asarray(v, dtype=np.float64)
    lat = np.arcsin(np.clip(v[1], -1.0, 1.0))
    lon = np.arctan2(v[0], v[2])
    x_new = (lon / np.pi) * (eq_width / 2.0) + eq_width / 2.0
    y_new = (lat / (np.pi / 2.0)) * (eq_height / 2.0) + eq_height / 2.0
    return float(x_new % eq_width), float(np.clip(y_new, 0.0, eq_height))


def direction_from_yaw_pitch(yaw_deg, pitch_deg):
    """Unit direction(s) a viewport centered at (yaw, pitch) looks along.

    Accepts scalars or broadcastable arrays; inverse of
    :func:`yaw_pitch_from_direction`.
    """
    yaw = np.radians(np.asarray(yaw_deg, dtype=np.float64))
    pitch = np.radians(np.asarray(pitch_deg, dtype=np.float64))
    return np.stack(
        [
            np.cos(pitch) * np.sin(yaw),
            -np.sin(pitch),
            np.cos(pitch) * np.cos(yaw),
        ],
        axis=-1,
    )


def yaw_pitch_from_direction(v: np.ndarray) -> tuple[float, float]:
    """(yaw, pitch) in degrees of a unit direction."""
    v = np.asarray(v, dtype=np.float64)
    yaw = np.degrees(np.arctan2(v[..., 0], v[..., 2]))
    pitch = -np.degrees(np.arcsin(np.clip(v[..., 1], -1.0, 1.0)))
    return float(yaw), float(pitch)


def viewport_directions(viewport: ViewportSpec) -> np.ndarray:
    """Camera-frame unit directions of every viewport pixel, shape (H, W, 3)."""
    w_ratio, h_ratio = angular_ratios(viewport)
    c_x, c_y = viewport.center
    xs = (np.arange(viewport.width_px, dtype=np.float64) - c_x) * w_ratio
    ys = (np.arange(viewport.height_px, dtype=np.float64) - c_y) * h_ratio
    px, py = np.meshgrid(xs, ys)
    d = np.sqrt(1.0 + px * px + py * py)
    return np.stack([px / d, py / d, 1.0 / d], axis=-1)


def build_pixel_map(viewport: ViewportSpec, eq_width: int, eq_height: int) -> PixelMap:
    """Compose projection, rotation, and spherical lookup for one viewport.

    Deterministic: identical arguments produce bit-identical maps.
    """
    if eq_width < 1 or eq_height < 1:
        raise ValidationError("equirect dimensions must be positive")
    dirs = viewport_directions(viewport)
    rot = _yaw_matrix(viewport.yaw_deg) @ _pitch_matrix(viewport.pitch_deg)
    rotated = dirs @ rot.T
    lat = np.arcsin(np.clip(rotated[..., 1], -1.0, 1.0))
    lon = np.arctan2(rotated[..., 0], rotated[..., 2])
    x_new = ((lon / np.pi) * (eq_width / 2.0) + eq_width / 2.0) % eq_width
    y_new = np.clip((lat / (np.pi / 2.0)) * (eq_height / 2.0) + eq_height / 2.0, 0.0, eq_height)
    return PixelMap(x=x_new, y=y_new, eq_width=eq_width, eq_height=eq_height)


def _catmull_rom_weights(t: np.ndarray) -> list[np.ndarray]:
    """Catmull-Rom weights for taps at offsets -1, 0, +1, +2."""
    t2 = t * t
    t3 = t2 * t
    return [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]


def sample_equirect(img: np.ndarray, pixel_map: PixelMap) -> np.ndarray:
    """Catmull-Rom resample of an equirect image at the map's coordinates.

    The 4x4 tap neighborhood wraps horizontally (the frame is periodic in
    longitude) and clamps vertically at the poles.  Works on (H, W) or
    (H, W, C) float or integer arrays; returns float64.
    """
    h, w = img.shape[:2]
    if w != pixel_map.eq_width or h != pixel_map.eq_height:
        raise ValidationError(
            f"pixel map was built for {pixel_map.eq_width}x{pixel_map.eq_height}, "
            f"image is {w}x{h}"
        )
    data = img.astype(np.float64, copy=False)
    x0 = np.floor(pixel_map.x)
    y0 = np.floor(pixel_map.y)
    wx = _catmull_rom_weights(pixel_map.x - x0)
    wy = _catmull_rom_weights(pixel_map.y - y0)
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    chan = data.ndim == 3
    out_shape = pixel_map.shape + ((data.shape[2],) if chan else ())
    out = np.zeros(out_shape, dtype=np.float64)
    for j in range(4):
        rows = np.clip(y0 + (j - 1), 0, h - 1)
        acc = np.zeros(out_shape, dtype=np.float64)
        for i in range(4):
            cols = (x0 + (i - 1)) % w
            tap = data[rows, cols]
            acc += wx[i][..., None] * tap if chan else wx[i] * tap
        out += wy[j][..., None] * acc if chan else wy[j] * acc
    return out


def render_viewport(frame: EquirectFrame, pixel_map: PixelMap) -> np.ndarray:
    """Resample a frame into the viewport described by a pixel map.

    Returns (H, W, 3) uint8.  Raises on dimension mismatch between the
    map and the frame.
    """
    out = sample_equirect(frame.pixels, pixel_map)
    return np.clip(np.rint(out), 0.0, 255.0).astype(np.uint8)
