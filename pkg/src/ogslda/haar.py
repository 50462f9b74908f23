"""Integral images and Haar-like rectangle features on 24x24 base windows.

A feature is a zero-sum weighted set of adjacent rectangles anchored inside
the base window; its value on a window is the signed rectangle-sum
difference normalized by window area, so values are comparable across
scales. Rectangle sums come from the integral image in four lookups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfBounds

BASE_WINDOW = 24
# Default pool subsampling: roughly twenty thousand features, which keeps
# offline training at desk scale. Stride 1 on both axes is the full pool.
DEFAULT_POSITION_STRIDE = 1
DEFAULT_SIZE_STRIDE = 3

TWO_RECT_HORIZONTAL = "two-rect-horizontal"
TWO_RECT_VERTICAL = "two-rect-vertical"
THREE_RECT = "three-rect"
FOUR_RECT = "four-rect"
KINDS = (TWO_RECT_HORIZONTAL, TWO_RECT_VERTICAL, THREE_RECT, FOUR_RECT)

# (coefficient, block-offset-x, block-offset-y) per rectangle; offsets are in
# units of the block size, extents in blocks per axis.
_LAYOUTS = {
    TWO_RECT_HORIZONTAL: (((1, 0, 0), (-1, 1, 0)), (2, 1)),
    TWO_RECT_VERTICAL: (((1, 0, 0), (-1, 0, 1)), (1, 2)),
    THREE_RECT: (((1, 0, 0), (-2, 1, 0), (1, 2, 0)), (3, 1)),
    FOUR_RECT: (((1, 0, 0), (-1, 1, 0), (-1, 0, 1), (1, 1, 1)), (2, 2)),
}


@dataclass(frozen=True)
class HaarFeature:
    kind: str
    x: int
    y: int
    width: int   # block width in pixels at base scale
    height: int  # block height in pixels at base scale

    def extent(self) -> tuple[int, int]:
        """Total (width, height) in pixels at base scale."""
        bx, by = _LAYOUTS[self.kind][1]
        return bx * self.width, by * self.height

    def fits_base_window(self, base: int = BASE_WINDOW) -> bool:
        ex, ey = self.extent()
        return self.x >= 0 and self.y >= 0 and self.x + ex <= base and self.y + ey <= base


@dataclass(frozen=True)
class IntegralImage:
    width: int
    height: int
    cumulative: np.ndarray  # (height + 1, width + 1)

    def rect_sum(self, x: int, y: int, w: int, h: int):
        c = self.cumulative
        return c[y + h, x + w] - c[y, x + w] - c[y + h, x] + c[y, x]


def integral_image(image: np.ndarray) -> IntegralImage:
    """Cumulative-sum table; integer inputs accumulate exactly in int64."""
    image = np.asarray(image)
    if image.ndim != 2 or image.size == 0:
        raise ValueError("expected a nonempty 2-D image")
    acc = np.int64 if np.issubdtype(image.dtype, np.integer) else np.float64
    h, w = image.shape
    cum = np.zeros((h + 1, w + 1), dtype=acc)
    np.cumsum(np.cumsum(image, axis=0, dtype=acc), axis=1, out=cum[1:, 1:])
    return IntegralImage(width=w, height=h, cumulative=cum)


def _scaled_layout(feature: HaarFeature, scale: float):
    """Block size, relative anchor, and window side at the given scale.

    The anchor is clamped so the scaled feature never leaves the window;
    rounding of anchor and block size can otherwise overshoot by a pixel
    or two at fractional scales.
    """
    side = int(round(BASE_WINDOW * scale))
    bw = max(1, int(round(feature.width * scale)))
    bh = max(1, int(round(feature.height * scale)))
    nx, ny = _LAYOUTS[feature.kind][1]
    ax = min(int(round(feature.x * scale)), side - nx * bw)
    ay = min(int(round(feature.y * scale)), side - ny * bh)
    return bw, bh, ax, ay, side


def haar_value(ii: IntegralImage, feature: HaarFeature, window=(0, 0, 1.0)) -> float:
    """Feature value on one window, normalized by window area.

    ``window`` is (x, y, scale) with the window side = round(24 * scale).
    Raises ``OutOfBounds`` when the window leaves the image or the feature
    does not fit the base window.
    """
    wx, wy, scale = window
    if not feature.fits_base_window():
        raise OutOfBounds(f"{feature} does not fit the {BASE_WINDOW}x{BASE_WINDOW} base window")
    bw, bh, ax, ay, side = _scaled_layout(feature, scale)
    if wx < 0 or wy < 0 or wx + side > ii.width or wy + side > ii.height:
        raise OutOfBounds(
            f"window ({wx}, {wy}, side {side}) leaves the {ii.width}x{ii.height} image"
        )
    total = 0.0
    for coef, ox, oy in _LAYOUTS[feature.kind][0]:
        total += coef * float(
            ii.rect_sum(wx + ax + ox * bw, wy + ay + oy * bh, bw, bh)
        )
    return total / float(side * side)


def integral_images(patches: np.ndarray) -> np.ndarray:
    """Stacked cumulative tables (n, side+1, side+1) for same-size patches."""
    patches = np.asarray(patches)
    if patches.ndim != 3:
        raise ValueError("expected a (n, h, w) patch stack")
    acc = np.int64 if np.issubdtype(patches.dtype, np.integer) else np.float64
    n, h, w = patches.shape
    cum = np.zeros((n, h + 1, w + 1), dtype=acc)
    np.cumsum(np.cumsum(patches, axis=1, dtype=acc), axis=2, out=cum[:, 1:, 1:])
    return cum


def haar_values(ii_stack: np.ndarray, feature: HaarFeature) -> np.ndarray:
    """Base-scale feature values across a stack of base-window patches."""
    if not feature.fits_base_window():
        raise OutOfBounds(f"{feature} does not fit the {BASE_WINDOW}x{BASE_WINDOW} base window")
    bw, bh = feature.width, feature.height
    total = np.zeros(ii_stack.shape[0])
    for coef, ox, oy in _LAYOUTS[feature.kind][0]:
        x = feature.x + ox * bw
        y = feature.y + oy * bh
        c = ii_stack
        total += coef * (
            c[:, y + bh, x + bw] - c[:, y, x + bw] - c[:, y + bh, x] + c[:, y, x]
        ).astype(np.float64)
    return total / float(BASE_WINDOW * BASE_WINDOW)


def enumerate_haar_features(
    base: int = BASE_WINDOW,
    position_stride: int = 1,
    size_stride: int = 1,
    kinds=KINDS,
) -> list[HaarFeature]:
    """Deterministic feature pool; strides > 1 subsample positions and sizes.

    With strides of 1 this is the full pool (about 160k features for the
    24x24 window); the defaults used by the detector config target a pool
    in the low tens of thousands.
    """
    if position_stride < 1 or size_stride < 1:
        raise ValueError("strides must be >= 1")
    pool = []
    for kind in kinds:
        nx, ny = _LAYOUTS[kind][1]
        for bw in range(1, base // nx + 1, size_stride):
            for bh in range(1, base // ny + 1, size_stride):
                for x in range(0, base - nx * bw + 1, position_stride):
                    for y in range(0, base - ny * bh + 1, position_stride):
                        pool.append(HaarFeature(kind, x, y, bw, bh))
    return pool


def rescale_patch(window: np.ndarray, side: int = BASE_WINDOW) -> np.ndarray:
    """Nearest-neighbour rescale used when harvesting scaled windows."""
    h, w = window.shape
    ys = np.minimum((np.arange(side) * h) // side, h - 1)
    xs = np.minimum((np.arange(side) * w) // side, w - 1)
    return window[np.ix_(ys, xs)]
