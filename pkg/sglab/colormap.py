from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

import numpy as np

from sglab.message import Source
from sglab.renderer import NullRenderer, Renderer
from sglab.solver import StateHistory

# dark violet -> blue -> teal -> yellow-green -> orange -> dark red, evenly spaced
PALETTE = np.array(
    [
        [48, 18, 59],
        [70, 130, 245],
        [27, 229, 181],
        [200, 239, 52],
        [250, 146, 42],
        [122, 4, 3],
    ],
    dtype=float,
)


def colorize(levels: np.ndarray, palette: np.ndarray = PALETTE) -> np.ndarray:
    """Map levels in [0, 1] to RGB bytes by piecewise-linear interpolation between stops."""
    stops = np.linspace(0, 1, len(palette))
    channels = [np.interp(levels, stops, palette[:, c]) for c in range(3)]
    return np.rint(np.stack(channels, axis=-1)).astype(np.uint8)


def render_colormap(
    data: Union[StateHistory, np.ndarray],
    path: Path,
    palette: np.ndarray = PALETTE,
    renderer: Optional[Renderer] = None,
) -> bytes:
    """
    Write a binary PPM with one row per time slice and one column per grid point.

    Values are min-max normalized; a constant field becomes a uniform mid-palette image.
    """
    renderer = renderer or NullRenderer()
    values = np.asarray(data.data if isinstance(data, StateHistory) else data, dtype=float)
    if values.ndim != 2:
        raise ValueError(f"Colormaps need a time-by-space matrix, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("Cannot render a history with non-finite values")

    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        levels = (values - lo) / (hi - lo)
    else:
        renderer.warning(
            f"Degenerate range [{lo:g}, {hi:g}] for {path.name}, writing a uniform image",
            source=Source.RENDER,
        )
        levels = np.full_like(values, 0.5)

    height, width = values.shape
    image = f"P6\n{width} {height}\n255\n".encode("ascii") + colorize(levels, palette).tobytes()
    path.write_bytes(image)

    renderer.debug(f"Wrote {width}x{height} colormap to {path}", source=Source.RENDER)

    return image
