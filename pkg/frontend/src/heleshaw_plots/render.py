"""Render frame directories into multi-panel heatmap figures."""

from __future__ import annotations

import argparse
import math
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .frames import FrameDiscoveryError, FrameSet, load_values


def panel_grid(count: int) -> tuple[int, int]:
    """Rows and columns for a panel count: 1 -> 1x1, 2 -> 1x2, 4 -> 2x2."""
    if count < 1:
        raise ValueError(f"need at least one panel, got {count}")
    if count == 1:
        return 1, 1
    return math.ceil(count / 2), 2


def select_frames(frameset: FrameSet, times) -> list[tuple[float, "Path"]]:
    """Snap each requested time to a discovered frame or fail listing misses."""
    chosen, missing = [], []
    for t in times:
        try:
            chosen.append(frameset.locate(float(t)))
        except KeyError:
            missing.append(float(t))
    if missing:
        raise FrameDiscoveryError(
            "no frame within one output interval of t = "
            + ", ".join(f"{t:g}" for t in missing)
            + f" (available: {', '.join(f'{t:g}' for t in frameset.times())})")
    return chosen


def compose_panels(frameset: FrameSet, times, vmax: float = 1.0,
                   extent: tuple[float, float] | None = None,
                   cmap: str = "viridis"):
    """One heatmap per requested time on a shared fixed [0, vmax] scale.

    The axis extent defaults to the centered box implied by the header
    (nx * h wide); pass extent=(lo, hi) to override.
    """
    chosen = select_frames(frameset, times)
    if extent is None:
        half = 0.5 * frameset.nx * frameset.h
        extent = (-half, half)
    rows, cols = panel_grid(len(chosen))
    fig, axes = plt.subplots(rows, cols, figsize=(4.2 * cols, 3.6 * rows),
                             squeeze=False, constrained_layout=True)
    flat = axes.ravel()
    image = None
    for ax, (t, path) in zip(flat, chosen):
        values = load_values(path, frameset.nx)
        image = ax.imshow(values, origin="lower", cmap=cmap,
                          vmin=0.0, vmax=vmax,
                          extent=(extent[0], extent[1], extent[0], extent[1]))
        ax.set_title(f"t = {t:g}")
    for ax in flat[len(chosen):]:
        ax.set_axis_off()
    fig.colorbar(image, ax=axes, shrink=0.85)
    return fig


def render_panels(frame_dir, times, out_image, field: str = "n",
                  vmax: float = 1.0, extent: tuple[float, float] | None = None,
                  dpi: int = 150):
    """Discover frames, compose the panels, and write the image file."""
    try:
        frameset = FrameSet.discover(frame_dir, field=field)
    except FrameDiscoveryError as exc:
        wanted = ", ".join(f"{float(t):g}" for t in times)
        raise FrameDiscoveryError(f"{exc}; requested t = {wanted}") from exc
    fig = compose_panels(frameset, times, vmax=vmax, extent=extent)
    try:
        fig.savefig(out_image, dpi=dpi)
    finally:
        plt.close(fig)
    return out_image


def _parse_times(text: str) -> list[float]:
    try:
        times = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise FrameDiscoveryError(f"bad --times value {text!r}") from exc
    if not times:
        raise FrameDiscoveryError(f"bad --times value {text!r}")
    return times


def _parse_extent(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(part) for part in text.split(","))
    except ValueError as exc:
        raise FrameDiscoveryError(f"bad --extent value {text!r}") from exc
    if not hi > lo:
        raise FrameDiscoveryError(f"bad --extent value {text!r}")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heleshaw-render",
        description="Render simulation frame CSVs as heatmap panels")
    parser.add_argument("--dir", required=True, help="frame directory")
    parser.add_argument("--times", default="0,1,2,4",
                        help="comma-separated snapshot times")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--field", default="n",
                        help="field prefix to plot (n, W, or p)")
    parser.add_argument("--vmax", type=float, default=1.0,
                        help="top of the fixed color scale (bottom is 0); "
                             "the default matches the saturation density of "
                             "the packaged experiments")
    parser.add_argument("--extent", default=None,
                        help="lo,hi axis override (default: centered box "
                             "from the frame header)")
    parser.add_argument("--dpi", type=int, default=150)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        times = _parse_times(args.times)
        extent = _parse_extent(args.extent) if args.extent else None
        render_panels(args.dir, times, args.out, field=args.field,
                      vmax=args.vmax, extent=extent, dpi=args.dpi)
    except FrameDiscoveryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
