"""Image resampling against a displacement field, plus the visual
composites used to inspect a registration result.

Sampling is bilinear with border clamping: coordinates outside
[0, w-1] x [0, h-1] are clamped onto the border before interpolation.
Pixel values round half away from zero when converted back to 8 bits.
"""

import numpy as np

from .errors import SizeMismatchError

PREDICTED_COLOR = (255, 0, 0)
TRUTH_COLOR = (0, 0, 255)


def _sample_float(image, xs, ys):
    """Clamped bilinear sampling of an (h, w) or (h, w, c) array.

    xs/ys are flat float64 coordinate arrays; the result keeps the
    channel layout and float64 precision (no rounding here, so the same
    routine serves both pixel data and displacement rasters).
    """
    arr = np.asarray(image, dtype=np.float64)
    squeeze = arr.ndim == 2
    if squeeze:
        arr = arr[:, :, None]
    h, w = arr.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[:, None]
    fy = (ys - y0)[:, None]
    top = arr[y0, x0] * (1.0 - fx) + arr[y0, x1] * fx
    bottom = arr[y1, x0] * (1.0 - fx) + arr[y1, x1] * fx
    out = top * (1.0 - fy) + bottom * fy
    return out[:, 0] if squeeze else out


def _round_u8(values):
    # values are convex combinations of uint8 samples, hence >= 0, so
    # floor(v + 0.5) is exactly round-half-away-from-zero
    return np.floor(values + 0.5).astype(np.uint8)


def bilinear_sample(image, points):
    """Sampled 8-bit value(s) at float coordinates.

    points may be a single (x, y) pair or an (n, 2) array; the result is
    correspondingly a scalar/vector or an (n,) / (n, c) array.
    """
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = pts.reshape(-1, 2)
    out = _round_u8(_sample_float(image, pts[:, 0], pts[:, 1]))
    return out[0] if single else out


def warp(moving, field):
    """Resample the moving image through a pull-convention field.

    out(x, y) = moving((x, y) + field[y, x]); the output has the field's
    height and width.
    """
    arr = np.asarray(field, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise SizeMismatchError(f"field must be a non-empty (h, w, 2) raster, got {arr.shape}")
    h, w = arr.shape[:2]
    gx, gy = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    xs = (gx + arr[:, :, 0]).ravel()
    ys = (gy + arr[:, :, 1]).ravel()
    sampled = _round_u8(_sample_float(moving, xs, ys))
    shape = (h, w) if np.asarray(moving).ndim == 2 else (h, w, np.asarray(moving).shape[2])
    return sampled.reshape(shape)


def checkerboard(a, b, tile=64):
    """Alternate square tiles of two equally sized images.

    Tile parity (floor(x/tile) + floor(y/tile)) even shows a, odd shows b.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise SizeMismatchError(f"images differ in shape: {a.shape} vs {b.shape}")
    if tile < 1:
        raise ValueError("tile must be at least 1")
    h, w = a.shape[:2]
    gx, gy = np.meshgrid(np.arange(w) // tile, np.arange(h) // tile)
    use_a = (gx + gy) % 2 == 0
    if a.ndim == 3:
        use_a = use_a[:, :, None]
    return np.where(use_a, a, b)


def overlay_landmarks(image, predicted, truth, radius=3):
    """RGB copy of the image with filled discs at each landmark.

    Truth landmarks are drawn blue, predictions red (drawn second, so a
    prediction sitting on its truth point reads red). Discs are clipped
    at the image border.
    """
    arr = np.asarray(image)
    if arr.ndim == 2:
        canvas = np.stack([arr] * 3, axis=2).astype(np.uint8)
    else:
        canvas = arr.astype(np.uint8).copy()
    for pts, color in ((truth, TRUTH_COLOR), (predicted, PREDICTED_COLOR)):
        for x, y in np.asarray(pts, dtype=np.float64).reshape(-1, 2):
            _draw_disc(canvas, x, y, radius, color)
    return canvas


def _draw_disc(canvas, cx, cy, radius, color):
    h, w = canvas.shape[:2]
    x0 = max(0, int(np.ceil(cx - radius)))
    x1 = min(w - 1, int(np.floor(cx + radius)))
    y0 = max(0, int(np.ceil(cy - radius)))
    y1 = min(h - 1, int(np.floor(cy + radius)))
    if x0 > x1 or y0 > y1:
        return
    xs, ys = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
    mask = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius**2
    canvas[ys[mask], xs[mask]] = color
