"""Command-line entry points for preprocessing, replay analysis, and serving.

Exit codes: 0 on success, 1 for validation errors (bad arguments,
malformed or mismatched files), 2 for I/O errors.
"""

from __future__ import annotations

import csv
import sys
import time
from pathlib import Path

import click

from panoflow import ssq as ssq_mod
from panoflow import store
from panoflow.epof import epof as epof_query
from panoflow.epof import hold_orientation
from panoflow.errors import PanoflowError
from panoflow.flow import FlowParams, percentile
from panoflow.grf import GrfConfig, generate_grains, global_opacity, render_mask, save_mask_png
from panoflow.grid import build_grid
from panoflow.projection import ViewportSpec


@click.group()
def cli() -> None:
    """Viewport-aware optical flow tooling for 360-degree video."""


@cli.command()
@click.argument("frames_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--fps", type=float, required=True, help="Video frame rate.")
@click.option("--hfov", type=float, default=107.0, show_default=True)
@click.option("--vfov", type=float, default=107.0, show_default=True)
@click.option("--hstep", type=float, default=15.0, show_default=True)
@click.option("--vstep", type=float, default=7.5, show_default=True)
@click.option("--tile-size", type=int, default=128, show_default=True, help="Tile edge in pixels.")
@click.option("--alpha", type=float, default=15.0, show_default=True)
@click.option("--iterations", type=int, default=100, show_default=True)
@click.option("--levels", type=int, default=3, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--grain-seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True, help="Manifest output path.")
def preprocess(frames_dir, fps, hfov, vfov, hstep, vstep, tile_size, alpha,
               iterations, levels, jobs, grain_seed, out_path):
    """Precompute the sliding-window flow matrix for a PNG frame sequence.

    Interruptible: per-window progress persists next to the manifest and
    a rerun completes only the missing windows.
    """
    grid = build_grid(hfov, vfov, hstep, vstep)
    params = FlowParams(alpha=alpha, iterations=iterations, levels=levels)
    started = time.monotonic()

    def report(done: int, total: int) -> None:
        click.echo(f"\r  windows {done}/{total}", nl=False)

    click.echo(f"grid: {grid.h_count} x {grid.v_count} = {grid.n_windows} windows")
    manifest = store.preprocess(
        frames_dir,
        out_path,
        fps=fps,
        grid=grid,
        params=params,
        tile_width=tile_size,
        tile_height=tile_size,
        grf=GrfConfig(seed=grain_seed),
        n_jobs=jobs,
        on_window_done=report,
    )
    click.echo(
        f"\nwrote {out_path} (p10={manifest.p10:.4f}, p90={manifest.p90:.4f}, "
        f"{time.monotonic() - started:.1f}s)"
    )


@cli.command(name="epof")
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("trace_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(), required=True, help="EPOF CSV output.")
@click.option("--k", type=int, default=4, show_default=True, help="Contributing windows per query.")
def epof_cmd(manifest_path, trace_path, out_path, k):
    """Replay a head trace and write per-frame perceived flow and opacity."""
    manifest = store.load_manifest(manifest_path)
    base = Path(manifest_path).parent
    matrix = store.load_matrix_for(manifest, base)
    trace = store.read_trace_csv(trace_path)
    held = hold_orientation(trace, matrix.n_frames, manifest.fps)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(store.EPOF_CSV_COLUMNS)
        for i in range(matrix.n_frames):
            t, yaw, pitch, _ = held[i]
            sample = epof_query((yaw, pitch), i, matrix, manifest.grid, k)
            opacity = global_opacity(sample.epof, manifest.p10, manifest.p90)
            writer.writerow(
                [i, f"{t:.6f}", f"{yaw:.6f}", f"{pitch:.6f}",
                 f"{sample.epof:.6f}", f"{opacity:.6f}"]
            )
    click.echo(f"wrote {out_path} ({matrix.n_frames} frames)")


@cli.command(name="grf-render")
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("trace_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--size", type=int, default=256, show_default=True, help="Mask edge in pixels.")
@click.option("--every", type=int, default=1, show_default=True, help="Render every Nth frame.")
@click.option("--k", type=int, default=4, show_default=True)
def grf_render(manifest_path, trace_path, out_dir, size, every, k):
    """Render per-frame grain opacity masks as 8-bit PNGs."""
    manifest = store.load_manifest(manifest_path)
    base = Path(manifest_path).parent
    matrix = store.load_matrix_for(manifest, base)
    trace = store.read_trace_csv(trace_path)
    grains = generate_grains(manifest.grf, manifest.display_fov_deg)
    viewport = ViewportSpec(
        yaw_deg=0.0, pitch_deg=0.0, hfov_deg=manifest.display_fov_deg,
        width_px=size, height_px=size,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    held = hold_orientation(trace, matrix.n_frames, manifest.fps)
    count = 0
    for i in range(0, matrix.n_frames, every):
        _, yaw, pitch, roll = held[i]
        sample = epof_query((yaw, pitch), i, matrix, manifest.grid, k)
        opacity = global_opacity(sample.epof, manifest.p10, manifest.p90)
        mask = render_mask((yaw, pitch, roll), grains, opacity, viewport)
        save_mask_png(mask, out / f"mask_{i:06d}.png")
        count += 1
    click.echo(f"wrote {count} masks to {out_dir} ({len(grains)} grains)")


@cli.command()
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
def percentiles(manifest_path):
    """Print the stored and recomputed flow percentile anchors."""
    manifest = store.load_manifest(manifest_path)
    matrix = store.load_matrix_for(manifest, Path(manifest_path).parent)
    click.echo(f"stored     p10={manifest.p10:.6f} p90={manifest.p90:.6f}")
    click.echo(
        f"recomputed p10={percentile(matrix, 0.10):.6f} p90={percentile(matrix, 0.90):.6f}"
    )


@cli.command(name="transform-ssq")
@click.argument("participants_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--min-of", type=float, default=ssq_mod.DEFAULT_MIN_OF, show_default=True,
              help="Exclude participants whose flow exposure falls below this.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Output CSV [default: <input>.transformed.csv].")
def transform_ssq(participants_csv, min_of, out_path):
    """Append flow-normalized questionnaire scores to a participant table."""
    records = ssq_mod.read_participants_csv(participants_csv)
    kept, excluded = ssq_mod.exclusion_filter(records, min_of)
    if not kept:
        raise PanoflowError(f"all {len(records)} participants fall below --min-of {min_of}")
    transformed = ssq_mod.transform_scores(kept)
    if out_path is None:
        out_path = str(Path(participants_csv).with_suffix(".transformed.csv"))
    ssq_mod.write_transformed_csv(kept, transformed, out_path)
    click.echo(f"wrote {out_path} ({len(kept)} kept, {len(excluded)} excluded)")
    for rec in excluded:
        click.echo(f"  excluded {rec.id}: OF {rec.OF} < {min_of}", err=True)


@cli.command()
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--port", type=int, default=8750, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False, exists=True), default=None,
              help="Static directory with the browser viewer build.")
def serve(manifest_path, port, host, ui_dir):
    """Serve manifests, frames, and the live head-to-EPOF channel."""
    import uvicorn

    from panoflow.server import create_app

    app = create_app({"default": Path(manifest_path)}, ui_dir=ui_dir)
    click.echo(f"serving on http://{host}:{port} (video id: default)")
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main() -> None:
    try:
        cli.main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.Abort:
        sys.exit(1)
    except PanoflowError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
