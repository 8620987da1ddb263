"""Persistence formats, the project manifest, and resumable preprocessing.

Everything a session needs at runtime is captured on disk: the frame
sequence identity, the window grid, flow parameters, the flow matrix
with its percentile anchors, and the grain configuration.  Loading
never recomputes flow; queries are served purely from the stored
artifacts.

Formats:
- flow matrix: little-endian binary, fixed 30-byte header (magic
  ``EPOF``, version u16, n_windows u32, n_frames u32, fps f32, 8-byte
  grid hash, CRC32 of payload) followed by windows-major float32 rows;
- head trace: CSV with header ``t,yaw,pitch,roll`` (seconds, degrees);
- frames: a directory of PNGs ingested in sorted name order;
- manifest: JSON tying the above together with content digests.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from panoflow.epof import HeadSample
from panoflow.errors import (
    MatrixChecksumError,
    MatrixFormatError,
    MatrixTruncatedError,
    MatrixVersionError,
    ValidationError,
    VideoMismatchError,
)
from panoflow.flow import FlowMatrix, FlowParams, build_flow_matrix, percentile
from panoflow.grf import GrfConfig
from panoflow.grid import GridSpec, build_grid
from panoflow.projection import EquirectFrame

MATRIX_MAGIC = b"EPOF"
MATRIX_VERSION = 1
_HEADER = struct.Struct("<4sHIIf8sI")  # magic, version, n_windows, n_frames, fps, grid hash, crc32
MANIFEST_VERSION = 1
TRACE_COLUMNS = ["t", "yaw", "pitch", "roll"]
EPOF_CSV_COLUMNS = ["frame_idx", "t", "yaw", "pitch", "epof", "opacity"]


def save_matrix(matrix: FlowMatrix, path: str | Path) -> None:
    """Write a flow matrix; layout is mmap-friendly for constant-offset lookup."""
    payload = np.ascontiguousarray(matrix.values, dtype="<f4").tobytes()
    header = _HEADER.pack(
        MATRIX_MAGIC,
        MATRIX_VERSION,
        matrix.n_windows,
        matrix.n_frames,
        matrix.fps,
        matrix.grid_hash,
        zlib.crc32(payload) & 0xFFFFFFFF,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_matrix(path: str | Path) -> FlowMatrix:
    """Read and validate a flow matrix; lossless inverse of save_matrix."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise MatrixTruncatedError(f"{path}: shorter than the fixed header")
    magic, version, n_windows, n_frames, fps, grid_hash, crc = _HEADER.unpack_from(blob)
    if magic != MATRIX_MAGIC:
        raise MatrixFormatError(f"{path}: bad magic {magic!r}")
    if version != MATRIX_VERSION:
        raise MatrixVersionError(f"{path}: version {version}, expected {MATRIX_VERSION}")
    expected = n_windows * n_frames * 4
    payload = blob[_HEADER.size :]
    if len(payload) < expected:
        raise MatrixTruncatedError(
            f"{path}: payload {len(payload)} bytes, expected {expected}"
        )
    payload = payload[:expected]
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise MatrixChecksumError(f"{path}: payload checksum mismatch")
    values = np.frombuffer(payload, dtype="<f4").reshape(n_windows, n_frames).copy()
    return FlowMatrix(values=values, grid_hash=grid_hash, fps=fps)


def load_frames(frames_dir: str | Path) -> list[EquirectFrame]:
    """Ingest a numbered PNG sequence, sorted by filename."""
    from PIL import Image

    frames_dir = Path(frames_dir)
    paths = sorted(frames_dir.glob("*.png"))
    if not paths:
        raise ValidationError(f"{frames_dir}: no .png frames found")
    frames = []
    for p in paths:
        with Image.open(p) as img:
            frames.append(EquirectFrame(np.asarray(img.convert("RGB"))))
    return frames


def frames_digest(frames_dir: str | Path) -> str:
    """Content digest over the sorted frame files (names and bytes)."""
    h = hashlib.sha256()
    for p in sorted(Path(frames_dir).glob("*.png")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def read_trace_csv(path: str | Path) -> list[HeadSample]:
    """Load a 60 Hz-style head trace; validates the header and time order."""
    import csv

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty trace file") from None
        if [h.strip() for h in header] != TRACE_COLUMNS:
            raise ValidationError(f"{path}: header must be exactly {','.join(TRACE_COLUMNS)}")
        samples = []
        last_t = None
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t, yaw, pitch, roll = (float(v) for v in row)
            except ValueError as exc:
                raise ValidationError(f"{path}:{line_no}: {exc}") from exc
            if last_t is not None and t < last_t:
                raise ValidationError(f"{path}:{line_no}: timestamps must be non-decreasing")
            last_t = t
            samples.append(HeadSample(t=t, yaw_deg=yaw, pitch_deg=pitch, roll_deg=roll))
    if not samples:
        raise ValidationError(f"{path}: trace has no samples")
    return samples


def write_trace_csv(samples: Sequence[HeadSample], path: str | Path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for s in samples:
            writer.writerow([f"{s.t:.6f}", f"{s.yaw_deg:.6f}", f"{s.pitch_deg:.6f}", f"{s.roll_deg:.6f}"])


@dataclass(frozen=True)
class ProjectManifest:
    """Everything needed to reproduce and serve one preprocessed video."""

    frames_dir: str
    n_frames: int
    fps: float
    eq_width: int
    eq_height: int
    video_digest: str
    grid: GridSpec
    flow_params: FlowParams
    tile_width: int
    tile_height: int
    matrix_path: str
    matrix_digest: str
    p10: float
    p90: float
    grf: GrfConfig
    display_fov_deg: float
    version: int = MANIFEST_VERSION

    def to_json(self) -> dict:
        return {
            "format_version": self.version,
            "video": {
                "frames_dir": self.frames_dir,
                "n_frames": self.n_frames,
                "fps": self.fps,
                "width": self.eq_width,
                "height": self.eq_height,
                "digest": self.video_digest,
            },
            "grid": self.grid.params_dict() | {"hash": self.grid.spec_hash.hex()},
            "flow": {
                "alpha": self.flow_params.alpha,
                "iterations": self.flow_params.iterations,
                "levels": self.flow_params.levels,
                "tile_width": self.tile_width,
                "tile_height": self.tile_height,
            },
            "matrix": {"path": self.matrix_path, "digest": self.matrix_digest},
            "percentiles": {"p10": self.p10, "p90": self.p90},
            "grf": self.grf.as_dict() | {"display_fov_deg": self.display_fov_deg},
        }


def save_manifest(manifest: ProjectManifest, path: str | Path) -> None:
    Path(path).write_text(json.dumps(manifest.to_json(), indent=2) + "\n")


def load_manifest(path: str | Path, verify: bool = True) -> ProjectManifest:
    """Parse a manifest; by default verify referenced files and digests.

    Verification checks that the matrix file and frame directory exist,
    hash-match their recorded digests, and that the stored percentile
    anchors are reproducible from the stored matrix.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON: {exc}") from exc
    if doc.get("format_version") != MANIFEST_VERSION:
        raise ValidationError(
            f"{path}: manifest version {doc.get('format_version')}, expected {MANIFEST_VERSION}"
        )
    video = doc["video"]
    g = doc["grid"]
    grid = build_grid(g["hfov_deg"], g["vfov_deg"], g["h_step_deg"], g["v_step_deg"])
    if grid.spec_hash.hex() != g["hash"]:
        raise ValidationError(f"{path}: grid hash mismatch (layout rule changed?)")
    fl = doc["flow"]
    grf_doc = dict(doc["grf"])
    display_fov = grf_doc.pop("display_fov_deg")
    manifest = ProjectManifest(
        frames_dir=video["frames_dir"],
        n_frames=video["n_frames"],
        fps=video["fps"],
        eq_width=video["width"],
        eq_height=video["height"],
        video_digest=video["digest"],
        grid=grid,
        flow_params=FlowParams(alpha=fl["alpha"], iterations=fl["iterations"], levels=fl["levels"]),
        tile_width=fl["tile_width"],
        tile_height=fl["tile_height"],
        matrix_path=doc["matrix"]["path"],
        matrix_digest=doc["matrix"]["digest"],
        p10=doc["percentiles"]["p10"],
        p90=doc["percentiles"]["p90"],
        grf=GrfConfig(**grf_doc),
        display_fov_deg=display_fov,
    )
    if manifest.p10 > manifest.p90:
        raise ValidationError(f"{path}: p10 {manifest.p10} > p90 {manifest.p90}")
    if verify:
        verify_manifest(manifest, path.parent)
    return manifest


def resolve(base_dir: str | Path, ref: str) -> Path:
    """Resolve a manifest-relative file reference."""
    p = Path(ref)
    return p if p.is_absolute() else Path(base_dir) / p


def verify_manifest(manifest: ProjectManifest, base_dir: str | Path) -> None:
    matrix_file = resolve(base_dir, manifest.matrix_path)
    frames_dir = resolve(base_dir, manifest.frames_dir)
    if not matrix_file.exists():
        raise ValidationError(f"matrix file missing: {matrix_file}")
    if not frames_dir.is_dir():
        raise ValidationError(f"frames directory missing: {frames_dir}")
    if file_digest(matrix_file) != manifest.matrix_digest:
        raise ValidationError(f"matrix digest mismatch: {matrix_file}")
    if frames_digest(frames_dir) != manifest.video_digest:
        raise VideoMismatchError(f"frame sequence digest mismatch: {frames_dir}")
    matrix = load_matrix(matrix_file)
    if abs(percentile(matrix, 0.10) - manifest.p10) > 1e-6 or (
        abs(percentile(matrix, 0.90) - manifest.p90) > 1e-6
    ):
        raise ValidationError("stored percentiles are not reproducible from the matrix")


def load_matrix_for(manifest: ProjectManifest, base_dir: str | Path) -> FlowMatrix:
    return load_matrix(resolve(base_dir, manifest.matrix_path))


# ---------------------------------------------------------------------------
# Preprocessing with per-window progress markers.

def _progress_dir(manifest_path: Path) -> Path:
    return manifest_path.parent / (manifest_path.stem + ".progress")


def _row_path(progress_dir: Path, window_idx: int) -> Path:
    return progress_dir / f"window_{window_idx:05d}.npy"


def preprocess(
    frames_dir: str | Path,
    manifest_path: str | Path,
    fps: float,
    grid: GridSpec,
    params: FlowParams = FlowParams(),
    tile_width: int = 128,
    tile_height: int = 128,
    grf: GrfConfig = GrfConfig(),
    display_fov_deg: float | None = None,
    n_jobs: int = 1,
    on_window_done: Callable[[int, int], None] | None = None,
) -> ProjectManifest:
    """Compute the flow matrix for a frame sequence and write the manifest.

    Long runs are interruptible: each finished window's row is persisted
    under ``<manifest>.progress/`` and picked up by the next invocation,
    so an interrupted-then-resumed run produces a matrix bit-identical
    to an uninterrupted one.  ``on_window_done(done, total)`` fires after
    every freshly computed window.
    """
    frames_dir = Path(frames_dir)
    manifest_path = Path(manifest_path)
    video_digest = frames_digest(frames_dir)

    if manifest_path.exists():
        existing = load_manifest(manifest_path, verify=False)
        if existing.video_digest != video_digest:
            raise VideoMismatchError(
                f"{manifest_path} was built from a different frame sequence"
            )
        try:
            verify_manifest(existing, manifest_path.parent)
        except ValidationError:
            pass  # incomplete artifacts; fall through and (re)build
        else:
            return existing

    frames = load_frames(frames_dir)
    progress = _progress_dir(manifest_path)
    progress.mkdir(parents=True, exist_ok=True)
    digest_marker = progress / "video.digest"
    if digest_marker.exists():
        if digest_marker.read_text().strip() != video_digest:
            raise VideoMismatchError(
                f"{progress} holds progress for a different frame sequence"
            )
    else:
        digest_marker.write_text(video_digest + "\n")

    precomputed: dict[int, np.ndarray] = {}
    for w in range(grid.n_windows):
        row_file = _row_path(progress, w)
        if row_file.exists():
            row = np.load(row_file)
            if row.shape == (len(frames),) and row.dtype == np.float32:
                precomputed[w] = row

    done_boxed = [len(precomputed)]

    def on_row(window_idx: int, row: np.ndarray) -> None:
        tmp = _row_path(progress, window_idx).with_suffix(".tmp")
        with open(tmp, "wb") as fh:
            np.save(fh, row)
        tmp.replace(_row_path(progress, window_idx))
        done_boxed[0] += 1
        if on_window_done is not None:
            on_window_done(done_boxed[0], grid.n_windows)

    matrix = build_flow_matrix(
        frames,
        grid,
        tile_width=tile_width,
        tile_height=tile_height,
        params=params,
        fps=fps,
        video_id=video_digest,
        n_jobs=n_jobs,
        precomputed=precomputed,
        on_row_done=on_row,
    )

    matrix_path = manifest_path.with_suffix(".matrix.bin")
    save_matrix(matrix, matrix_path)
    manifest = ProjectManifest(
        frames_dir=str(frames_dir),
        n_frames=len(frames),
        fps=fps,
        eq_width=frames[0].width_px,
        eq_height=frames[0].height_px,
        video_digest=video_digest,
        grid=grid,
        flow_params=params,
        tile_width=tile_width,
        tile_height=tile_height,
        matrix_path=matrix_path.name
        if matrix_path.parent == manifest_path.parent
        else str(matrix_path),
        matrix_digest=file_digest(matrix_path),
        p10=percentile(matrix, 0.10),
        p90=percentile(matrix, 0.90),
        grf=grf,
        display_fov_deg=display_fov_deg if display_fov_deg is not None else grid.hfov_deg,
    )
    save_manifest(manifest, manifest_path)
    for leftover in progress.iterdir():
        leftover.unlink()
    progress.rmdir()
    return manifest


def resume_preprocess(
    manifest_path: str | Path,
    frames_dir: str | Path,
    fps: float,
    grid: GridSpec,
    **kwargs,
) -> ProjectManifest:
    """Complete an interrupted preprocess run; no-op when already complete.

    Thin alias of :func:`preprocess`: progress rows found next to the
    manifest are trusted (after a video digest check) and only missing
    windows are computed.
    """
    return preprocess(frames_dir, manifest_path, fps, grid, **kwargs)
