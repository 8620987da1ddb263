"""Granulated rest frames: body-fixed grain sets and flow-driven opacity masks.

Grains are small black discs scattered over a body-fixed annulus of the
visual field.  Their overall opacity follows the perceived-flow signal
(fully transparent at the video's 10th-percentile flow, fully opaque at
the 90th), and a radial envelope keeps the central region clear: alpha
ramps from 0 inside the inner FOV to 1 beyond the outer FOV.

Placement is driven by the portable PCG32 stream plus a deterministic
equal-area coverage lattice, so any renderer holding the same seed and
parameters reconstructs the identical grain layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from panoflow.errors import ValidationError
from panoflow.projection import ViewportSpec, head_rotation, viewport_directions
from panoflow.rng import Pcg32, fnv1a32

# Coverage-lattice resolution in (cos eccentricity, azimuth) space.  Part
# of the deterministic placement contract; do not change without bumping
# every renderer that regenerates grains from a seed.
LATTICE_BANDS = 256
LATTICE_SECTORS = 1024


@dataclass(frozen=True)
class GrfConfig:
    """Grain geometry and opacity-envelope parameters."""

    grain_size_deg: float = 1.5
    density: float = 0.5
    ifov_deg: float = 36.0
    ofov_deg: float = 80.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.grain_size_deg < self.ifov_deg < self.ofov_deg:
            raise ValidationError(
                "require 0 < grain size < inner FOV < outer FOV "
                f"(got {self.grain_size_deg}, {self.ifov_deg}, {self.ofov_deg})"
            )
        if not 0.0 <= self.density <= 1.0:
            raise ValidationError("density must lie in [0, 1]")

    def as_dict(self) -> dict:
        return {
            "grain_size_deg": self.grain_size_deg,
            "density": self.density,
            "ifov_deg": self.ifov_deg,
            "ofov_deg": self.ofov_deg,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class GrainSet:
    """Body-fixed grain centers; stable for a session, identical per seed."""

    yaw_deg: np.ndarray
    pitch_deg: np.ndarray
    radius_deg: float
    seed: int
    realized_coverage: float
    display_fov_deg: float
    config: GrfConfig = field(repr=False)

    def __len__(self) -> int:
        return self.yaw_deg.shape[0]

    @cached_property
    def directions(self) -> np.ndarray:
        """(n, 3) unit vectors in the body frame."""
        yaw = np.radians(self.yaw_deg)
        pitch = np.radians(self.pitch_deg)
        return np.stack(
            [np.cos(pitch) * np.sin(yaw), -np.sin(pitch), np.cos(pitch) * np.cos(yaw)],
            axis=-1,
        )

    @cached_property
    def _tree(self) -> cKDTree | None:
        return cKDTree(self.directions) if len(self) else None

    def checksum(self) -> str:
        """Portable FNV-1a digest of the layout (coords rounded to 1e-4 deg)."""
        parts = []
        for yaw, pitch in zip(self.yaw_deg.tolist(), self.pitch_deg.tolist()):
            parts.append(f"{yaw + 0.0:.4f},{pitch + 0.0:.4f};")
        return format(fnv1a32("".join(parts).encode("ascii")), "08x")


def _coverage_lattice(z_out: float, z_in: float):
    """Cell-center geometry of the deterministic coverage lattice."""
    dz = (z_in - z_out) / LATTICE_BANDS
    z_c = z_out + (np.arange(LATTICE_BANDS, dtype=np.float64) + 0.5) * dz
    sin_e = np.sqrt(np.maximum(0.0, 1.0 - z_c * z_c))
    dpsi = 2.0 * math.pi / LATTICE_SECTORS
    psi_c = (np.arange(LATTICE_SECTORS, dtype=np.float64) + 0.5) * dpsi
    return z_c, sin_e, np.cos(psi_c), np.sin(psi_c), dz, dpsi


def generate_grains(config: GrfConfig, display_fov_deg: float) -> GrainSet:
    """Scatter grains over the annulus until it reaches the target coverage.

    Centers are drawn with uniform solid-angle density between
    eccentricity ifov/2 and display_fov/2 (overlap allowed); grains keep
    being added until the covered fraction of the annulus, measured on
    the fixed equal-area lattice, reaches the density.  Deterministic
    per seed.  If the target is unreachable within the safety cap the
    set is returned as-is with its realized coverage recorded.
    """
    if config.ofov_deg > display_fov_deg:
        raise ValidationError(
            f"outer FOV {config.ofov_deg} exceeds display FOV {display_fov_deg}"
        )
    inner = math.radians(config.ifov_deg / 2.0)
    outer = math.radians(display_fov_deg / 2.0)
    r = math.radians(config.grain_size_deg / 2.0)
    z_in = math.cos(inner)
    z_out = math.cos(outer)

    empty = lambda cov: GrainSet(
        yaw_deg=np.empty(0),
        pitch_deg=np.empty(0),
        radius_deg=config.grain_size_deg / 2.0,
        seed=config.seed,
        realized_coverage=cov,
        display_fov_deg=display_fov_deg,
        config=config,
    )
    if config.density == 0.0:
        return empty(0.0)

    z_c, sin_e, cos_psi, sin_psi, dz, dpsi = _coverage_lattice(z_out, z_in)
    covered = np.zeros((LATTICE_BANDS, LATTICE_SECTORS), dtype=bool)
    total = LATTICE_BANDS * LATTICE_SECTORS
    target_cells = math.ceil(config.density * total)
    cos_r = math.cos(r)

    # Safety cap from the expected grain count at this solid-angle ratio.
    q = (1.0 - math.cos(r)) / (z_in - z_out)
    d_eff = min(config.density, 0.9999)
    expected = math.log(1.0 - d_eff) / math.log(1.0 - q)
    cap = int(50.0 * expected) + 1000

    rng = Pcg32(config.seed)
    grain_yaw: list[float] = []
    grain_pitch: list[float] = []
    covered_count = 0
    while covered_count < target_cells and len(grain_yaw) < cap:
        u1 = rng.uniform()
        u2 = rng.uniform()
        z = z_out + u1 * (z_in - z_out)
        psi = 2.0 * math.pi * u2
        sin_eg = math.sqrt(max(0.0, 1.0 - z * z))
        gx = sin_eg * math.cos(psi)
        gy = sin_eg * math.sin(psi)
        gz = z
        e_g = math.acos(min(1.0, max(-1.0, z)))

        # Candidate bands: eccentricities within r of the grain center.
        z_lo = math.cos(min(e_g + r, math.pi))
        z_hi = math.cos(max(e_g - r, 0.0))
        i0 = max(0, int(math.floor((z_lo - z_out) / dz)) - 1)
        i1 = min(LATTICE_BANDS - 1, int(math.floor((z_hi - z_out) / dz)) + 1)

        # Candidate sectors: azimuth half-width of the grain at its band.
        sin_edge = math.sin(max(e_g - r, 1e-9))
        if sin_edge <= math.sin(r):
            j_half = LATTICE_SECTORS  # grain straddles the axis: full circle
        else:
            half = math.asin(min(1.0, math.sin(r) / sin_edge))
            j_half = int(math.ceil(half / dpsi)) + 1
        if 2 * j_half + 1 >= LATTICE_SECTORS:
            j_idx = np.arange(LATTICE_SECTORS)
        else:
            j_center = int(math.floor(psi / dpsi))
            j_idx = np.arange(j_center - j_half, j_center + j_half + 1) % LATTICE_SECTORS

        rows = np.arange(i0, i1 + 1)
        dots = sin_e[rows][:, None] * (
            cos_psi[j_idx][None, :] * gx + sin_psi[j_idx][None, :] * gy
        ) + z_c[rows][:, None] * gz
        hits = dots >= cos_r
        block = covered[np.ix_(rows, j_idx)]
        newly = int(np.count_nonzero(hits & ~block))
        if newly:
            covered[np.ix_(rows, j_idx)] = block | hits
            covered_count += newly

        grain_yaw.append(math.degrees(math.atan2(gx, gz)))
        grain_pitch.append(-math.degrees(math.asin(min(1.0, max(-1.0, gy)))))

    return GrainSet(
        yaw_deg=np.array(grain_yaw, dtype=np.float64),
        pitch_deg=np.array(grain_pitch, dtype=np.float64),
        radius_deg=config.grain_size_deg / 2.0,
        seed=config.seed,
        realized_coverage=covered_count / total,
        display_fov_deg=display_fov_deg,
        config=config,
    )


def global_opacity(epof: float, p10: float, p90: float) -> float:
    """Overall grain opacity for one flow estimate.

    Zero at or below the low anchor, one at or above the high anchor,
    linear in between; a degenerate p10 == p90 becomes a step there.
    """
    if p10 > p90:
        raise ValidationError(f"p10 {p10} exceeds p90 {p90}")
    if p10 == p90:
        return 1.0 if epof >= p10 else 0.0
    return float(np.clip((epof - p10) / (p90 - p10), 0.0, 1.0))


def radial_envelope(eccentricity_deg, config: GrfConfig = GrfConfig()):
    """Opacity ramp over eccentricity: clear inside ifov/2, opaque past ofov/2.

    Accepts scalars or arrays; scalar in, float out.
    """
    ecc = np.asarray(eccentricity_deg, dtype=np.float64)
    if (ecc < 0).any():
        raise ValidationError("eccentricity must be non-negative")
    inner = config.ifov_deg / 2.0
    outer = config.ofov_deg / 2.0
    out = np.clip((ecc - inner) / (outer - inner), 0.0, 1.0)
    return float(out) if np.isscalar(eccentricity_deg) else out


def render_mask(
    head: tuple[float, float, float],
    grains: GrainSet,
    global_op: float,
    viewport: ViewportSpec,
) -> np.ndarray:
    """Per-pixel overlay alpha for one head pose, float32 in [0, 1].

    Grains stay fixed to the body, so head rotation slides them across
    the viewport; alpha at a pixel is global opacity times the radial
    envelope at that pixel's eccentricity, with a soft ramp over the
    outer 10% of each grain's radius, and exactly 0 off-grain.  Uses the
    full 3-DoF head pose (roll rotates the pattern in-viewport); the
    viewport argument contributes FOV and resolution only.
    """
    if not 0.0 <= global_op <= 1.0:
        raise ValidationError("global opacity must lie in [0, 1]")
    yaw, pitch, roll = head
    dirs = viewport_directions(viewport)
    shape = dirs.shape[:2]
    if global_op == 0.0 or len(grains) == 0:
        return np.zeros(shape, dtype=np.float32)

    ecc_deg = np.degrees(np.arccos(np.clip(dirs[..., 2], -1.0, 1.0)))
    envelope = radial_envelope(ecc_deg, grains.config)

    rot = head_rotation(yaw, pitch, roll)
    body_dirs = (dirs.reshape(-1, 3) @ rot.T)

    radius_rad = np.radians(grains.radius_deg)
    chord_limit = 2.0 * np.sin(radius_rad / 2.0)
    dist, _ = grains._tree.query(body_dirs, k=1, distance_upper_bound=chord_limit * 1.0001)
    angle = 2.0 * np.arcsin(np.clip(dist, 0.0, 2.0) / 2.0)
    inside = np.isfinite(dist) & (angle <= radius_rad)

    # Soft edge over the outer 10% of the grain radius.
    t = np.zeros_like(angle)
    t[inside] = angle[inside] / radius_rad
    edge = np.where(t <= 0.9, 1.0, np.clip((1.0 - t) / 0.1, 0.0, 1.0))
    edge[~inside] = 0.0

    mask = global_op * envelope * edge.reshape(shape)
    return mask.astype(np.float32)


def save_mask_png(mask: np.ndarray, path: str | Path) -> None:
    """Write a mask as an 8-bit single-channel PNG (0-255 encodes alpha 0-1)."""
    from PIL import Image

    data = np.clip(np.rint(mask * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path)
