"""HTTP + WebSocket service for manifests, frames, and live EPOF sessions.

The server owns playback time: clients stream head orientations and get
back the current frame index, the perceived-flow estimate, and the
grain opacity for that instant.  Per-message work is O(k) matrix
lookups, far below the display-rate budget.  Sessions share read-only
artifacts only, so concurrent sessions cannot interfere; each session's
messages are handled strictly in arrival order.

The client renders grains itself from the manifest's grain seed; the
``/grains`` endpoint exposes a layout checksum so a renderer can verify
its regenerated set matches the server's.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import Response

from panoflow import store
from panoflow.epof import epof
from panoflow.errors import PanoflowError
from panoflow.flow import FlowMatrix
from panoflow.grf import GrainSet, generate_grains, global_opacity
from panoflow.grid import DEFAULT_K_NEAREST
from panoflow.store import ProjectManifest


class PlaybackClock:
    """Server-owned, pausable frame clock; clamps at the last frame."""

    def __init__(self, fps: float, n_frames: int, time_fn: Callable[[], float] = time.monotonic):
        self._fps = fps
        self._n_frames = n_frames
        self._time = time_fn
        self._playing = True
        self._base_frame = 0.0
        self._base_t = time_fn()

    def _position(self) -> float:
        if not self._playing:
            return self._base_frame
        return self._base_frame + (self._time() - self._base_t) * self._fps

    def frame_idx(self) -> int:
        return max(0, min(self._n_frames - 1, int(self._position())))

    @property
    def playing(self) -> bool:
        return self._playing

    def pause(self) -> None:
        self._base_frame = min(self._position(), float(self._n_frames - 1))
        self._base_t = self._time()
        self._playing = False

    def play(self) -> None:
        self._base_t = self._time()
        self._playing = True

    def seek(self, frame_idx: int) -> None:
        self._base_frame = float(frame_idx)
        self._base_t = self._time()


@dataclass
class VideoContext:
    """Read-only artifacts for one registered video."""

    video_id: str
    manifest: ProjectManifest
    matrix: FlowMatrix
    frame_paths: list[Path]
    grains: GrainSet
    _etags: dict[int, str] = field(default_factory=dict)

    def frame_etag(self, idx: int) -> str:
        tag = self._etags.get(idx)
        if tag is None:
            tag = '"' + hashlib.sha256(self.frame_paths[idx].read_bytes()).hexdigest()[:32] + '"'
            self._etags[idx] = tag
        return tag

    def manifest_summary(self) -> dict:
        m = self.manifest
        return {
            "video_id": self.video_id,
            "n_frames": m.n_frames,
            "fps": m.fps,
            "equirect": {"width": m.eq_width, "height": m.eq_height},
            "grid": m.grid.params_dict(),
            "p10": m.p10,
            "p90": m.p90,
            "grf": m.grf.as_dict() | {"display_fov_deg": m.display_fov_deg},
        }


class LiveSession:
    """One client's live loop: head messages in, state messages out.

    Pure with respect to wall time when given an injected time source,
    so every state message is reproducible offline from the manifest,
    the head message, and the clock position.
    """

    def __init__(
        self,
        ctx: VideoContext,
        k: int = DEFAULT_K_NEAREST,
        time_fn: Callable[[], float] = time.monotonic,
    ):
        self.ctx = ctx
        self.k = k
        self.clock = PlaybackClock(ctx.manifest.fps, ctx.manifest.n_frames, time_fn)
        self.yaw = 0.0
        self.pitch = 0.0
        self.roll = 0.0

    def _state(self) -> dict:
        frame = self.clock.frame_idx()
        m = self.ctx.manifest
        sample = epof((self.yaw, self.pitch), frame, self.ctx.matrix, m.grid, self.k)
        opacity = global_opacity(sample.epof, m.p10, m.p90)
        return {
            "type": "state",
            "frame_idx": frame,
            "epof": sample.epof,
            "opacity": opacity,
            "windows": [
                {
                    "id": wid,
                    "weight": weight,
                    "pof": float(self.ctx.matrix.values[wid, frame]),
                }
                for wid, weight in zip(sample.window_ids, sample.weights)
            ],
        }

    def handle(self, msg: object) -> dict:
        """Process one client message; malformed input yields an error frame."""
        try:
            if not isinstance(msg, dict):
                raise ValueError("message must be a JSON object")
            kind = msg.get("type")
            if kind == "head":
                head = [float(msg[f]) for f in ("t", "yaw", "pitch", "roll")]
                self.yaw, self.pitch, self.roll = head[1], head[2], head[3]
            elif kind == "pause":
                self.clock.pause()
            elif kind == "play":
                self.clock.play()
            elif kind == "seek":
                idx = int(msg["frame_idx"])
                if not 0 <= idx < self.ctx.manifest.n_frames:
                    raise ValueError(f"frame_idx {idx} out of range")
                self.clock.seek(idx)
            else:
                raise ValueError(f"unknown message type {kind!r}")
            return self._state()
        except (KeyError, TypeError, ValueError, PanoflowError) as exc:
            return {"type": "error", "reason": str(exc)}


def load_video_context(video_id: str, manifest_path: Path) -> VideoContext:
    manifest = store.load_manifest(manifest_path)
    base = manifest_path.parent
    matrix = store.load_matrix_for(manifest, base)
    frame_paths = sorted(store.resolve(base, manifest.frames_dir).glob("*.png"))
    grains = generate_grains(manifest.grf, manifest.display_fov_deg)
    return VideoContext(
        video_id=video_id,
        manifest=manifest,
        matrix=matrix,
        frame_paths=frame_paths,
        grains=grains,
    )


def create_app(
    manifests: dict[str, Path],
    ui_dir: str | None = None,
    time_fn: Callable[[], float] = time.monotonic,
) -> FastAPI:
    """Build the service for a set of video id -> manifest path registrations."""
    app = FastAPI(title="panoflow", docs_url=None, redoc_url=None)
    registry = {
        vid: load_video_context(vid, Path(p)) for vid, p in manifests.items()
    }

    def get_ctx(video_id: str) -> VideoContext:
        ctx = registry.get(video_id)
        if ctx is None:
            raise HTTPException(status_code=404, detail=f"unknown video {video_id!r}")
        return ctx

    @app.get("/videos")
    def list_videos() -> dict:
        return {"videos": sorted(registry)}

    @app.get("/videos/{video_id}/manifest")
    def get_manifest(video_id: str) -> dict:
        return get_ctx(video_id).manifest_summary()

    @app.get("/videos/{video_id}/grains")
    def get_grains(video_id: str) -> dict:
        ctx = get_ctx(video_id)
        return {
            "seed": ctx.grains.seed,
            "count": len(ctx.grains),
            "checksum": ctx.grains.checksum(),
            "realized_coverage": ctx.grains.realized_coverage,
        }

    @app.get("/videos/{video_id}/frames/{frame_idx}")
    def get_frame(video_id: str, frame_idx: int) -> Response:
        ctx = get_ctx(video_id)
        if not 0 <= frame_idx < len(ctx.frame_paths):
            raise HTTPException(status_code=404, detail=f"frame {frame_idx} out of range")
        data = ctx.frame_paths[frame_idx].read_bytes()
        return Response(
            content=data,
            media_type="image/png",
            headers={"ETag": ctx.frame_etag(frame_idx), "Cache-Control": "max-age=31536000"},
        )

    @app.websocket("/videos/{video_id}/live")
    async def live(websocket: WebSocket, video_id: str) -> None:
        ctx = registry.get(video_id)
        if ctx is None:
            # Unknown session target: accept then close so the client
            # sees a clean application-level close code.
            await websocket.accept()
            await websocket.close(code=4404)
            return
        await websocket.accept()
        session = LiveSession(ctx, time_fn=time_fn)
        try:
            while True:
                try:
                    msg = await websocket.receive_json()
                except WebSocketDisconnect:
                    raise
                except Exception:
                    await websocket.send_json(
                        {"type": "error", "reason": "message is not valid JSON"}
                    )
                    continue
                await websocket.send_json(session.handle(msg))
        except WebSocketDisconnect:
            return

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
