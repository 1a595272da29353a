"""Discovery and parsing of simulation frame CSVs.

A frame file is named `<field>_<step>.csv` and holds a one-line header

    # t=<time> nx=<cells per side> h=<mesh width> field=<name>

followed by nx comma-separated rows, one per y index with x varying along
the row.  This module depends only on that on-disk format.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FrameDiscoveryError(ValueError):
    """Missing, inconsistent, or unparseable frames."""


def parse_header(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        line = fh.readline().strip()
    if not line.startswith("#"):
        raise FrameDiscoveryError(f"{path}: missing frame header")
    try:
        meta = dict(item.split("=", 1) for item in line.lstrip("# ").split())
        return {
            "t": float(meta["t"]),
            "nx": int(meta["nx"]),
            "h": float(meta["h"]),
            "field": meta.get("field", ""),
        }
    except (KeyError, ValueError) as exc:
        raise FrameDiscoveryError(f"{path}: bad frame header {line!r}") from exc


def load_values(path, nx: int) -> np.ndarray:
    """Read the (nx, nx) payload indexed [y, x], ready for origin="lower"."""
    values = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if values.shape != (nx, nx):
        raise FrameDiscoveryError(
            f"{path}: expected {nx}x{nx} values, got {values.shape[0]}x{values.shape[1]}")
    return values


@dataclass(frozen=True)
class FrameSet:
    """Frames of one field found in one directory, ordered by time."""

    frames: list[tuple[float, Path]]
    nx: int
    h: float

    @classmethod
    def discover(cls, directory, field: str = "n") -> "FrameSet":
        root = Path(directory)
        paths = sorted(root.glob(f"{field}_*.csv"))
        if not paths:
            raise FrameDiscoveryError(f"no {field}_*.csv frames in {root}")
        metas = [(parse_header(p), p) for p in paths]
        nx, h = metas[0][0]["nx"], metas[0][0]["h"]
        for meta, p in metas:
            if meta["nx"] != nx or meta["h"] != h:
                raise FrameDiscoveryError(
                    f"{p}: grid {meta['nx']}, h={meta['h']} does not match "
                    f"the rest of the set ({nx}, h={h})")
        frames = sorted((meta["t"], p) for meta, p in metas)
        times = [t for t, _ in frames]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise FrameDiscoveryError(
                f"{root}: frame times not strictly increasing: {times}")
        return cls(frames=frames, nx=nx, h=h)

    def times(self) -> list[float]:
        return [t for t, _ in self.frames]

    def matching_interval(self) -> float:
        """Largest gap between consecutive frames; the snap tolerance."""
        times = self.times()
        if len(times) < 2:
            return 0.0
        return max(b - a for a, b in zip(times, times[1:]))

    def locate(self, t: float) -> tuple[float, Path]:
        """Nearest frame to t, if within one output interval of it."""
        nearest = min(self.frames, key=lambda frame: abs(frame[0] - t))
        slack = 1e-9 * max(1.0, abs(t))
        if abs(nearest[0] - t) <= self.matching_interval() + slack:
            return nearest
        raise KeyError(t)
