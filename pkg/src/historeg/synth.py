"""Synthetic displacement fields, match sets, and image pairs for
benchmarks and tests.

Every generator is driven by an explicit integer seed and is fully
deterministic. Fields are analytic: each SyntheticField can be queried
at arbitrary points (the oracle view) or rasterized per pixel center
(the artifact view), and the two agree by construction.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import default_rng
from scipy.ndimage import gaussian_filter

from .geometry import AffineTransform2D
from .types import ImageMeta, MatchSet
from .warp import warp

FIELD_KINDS = ("translation", "affine", "sinusoidal", "gaussian-bump")

# Sinusoidal amplitudes above this fraction of the short image side would
# fold the mapping and stop being a plausible deformation.
MAX_SINUSOIDAL_AMPLITUDE_FRACTION = 0.1


@dataclass(frozen=True)
class SyntheticField:
    """An analytic displacement field over a given image extent."""

    kind: str
    meta: ImageMeta
    params: dict

    def __call__(self, points):
        """Displacements at arbitrary (n, 2) float coordinates."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        p = self.params
        if self.kind == "translation":
            return np.broadcast_to(
                np.array([p["dx"], p["dy"]]), pts.shape
            ).copy()
        if self.kind == "affine":
            transform = AffineTransform2D(p["matrix"], (p["dx"], p["dy"]))
            return transform.apply(pts) - pts
        if self.kind == "sinusoidal":
            amp, cycles, phase = p["amplitude"], p["cycles"], p["phase"]
            w, h = self.meta.width, self.meta.height
            dx = amp * np.sin(2.0 * np.pi * cycles * pts[:, 1] / h + phase)
            dy = amp * np.sin(2.0 * np.pi * cycles * pts[:, 0] / w + phase)
            return np.column_stack([dx, dy])
        if self.kind == "gaussian-bump":
            delta = pts - np.array([p["cx"], p["cy"]])
            g = np.exp(-(delta**2).sum(axis=1) / (2.0 * p["sigma"] ** 2))
            return np.column_stack([p["dx"] * g, p["dy"] * g])
        raise ValueError(f"unknown field kind {self.kind!r}")

    def rasterize(self):
        """The field evaluated at every pixel center, (h, w, 2) float32."""
        w, h = self.meta.width, self.meta.height
        gx, gy = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
        disp = self(np.column_stack([gx.ravel(), gy.ravel()]))
        return disp.reshape(h, w, 2).astype(np.float32)


def make_field(meta: ImageMeta, kind: str, params: dict | None = None, seed=0) -> SyntheticField:
    """Build an analytic field, filling unspecified parameters from the seed.

    translation    dx, dy
    affine         matrix (2x2, the linear part of the map), dx, dy
    sinusoidal     amplitude, cycles, phase
    gaussian-bump  cx, cy, sigma, dx, dy
    """
    if kind not in FIELD_KINDS:
        raise ValueError(f"unknown field kind {kind!r} (choose from {FIELD_KINDS})")
    rng = default_rng(seed)
    given = dict(params or {})
    short_side = min(meta.width, meta.height)

    def pick(name, default):
        # Lazy default: the rng draw happens only for parameters that are
        # actually missing, so supplying a value never consumes a draw.
        if name in given:
            return float(given.pop(name))
        return float(default())

    if kind == "translation":
        filled = {
            "dx": pick("dx", lambda: rng.uniform(-10.0, 10.0)),
            "dy": pick("dy", lambda: rng.uniform(-10.0, 10.0)),
        }
    elif kind == "affine":
        matrix = given.pop("matrix", None)
        if matrix is None:
            matrix = np.eye(2) + rng.uniform(-0.01, 0.01, size=(2, 2))
        matrix = np.asarray(matrix, dtype=np.float64).reshape(2, 2)
        filled = {
            "matrix": matrix,
            "dx": pick("dx", lambda: rng.uniform(-10.0, 10.0)),
            "dy": pick("dy", lambda: rng.uniform(-10.0, 10.0)),
        }
    elif kind == "sinusoidal":
        limit = MAX_SINUSOIDAL_AMPLITUDE_FRACTION * short_side
        amplitude = pick("amplitude", lambda: rng.uniform(0.2 * limit, 0.5 * limit))
        if not 0.0 <= amplitude <= limit:
            raise ValueError(
                f"sinusoidal amplitude {amplitude} exceeds {limit} "
                f"(10% of the short image side)"
            )
        filled = {
            "amplitude": amplitude,
            "cycles": pick("cycles", lambda: 1.0),
            "phase": pick("phase", lambda: 0.0),
        }
    else:
        filled = {
            "cx": pick("cx", lambda: rng.uniform(0.25, 0.75) * meta.width),
            "cy": pick("cy", lambda: rng.uniform(0.25, 0.75) * meta.height),
            "sigma": pick("sigma", lambda: 0.15 * short_side),
            "dx": pick("dx", lambda: rng.uniform(-10.0, 10.0)),
            "dy": pick("dy", lambda: rng.uniform(-10.0, 10.0)),
        }
    if given:
        raise ValueError(f"unknown parameters for {kind}: {sorted(given)}")
    return SyntheticField(kind=kind, meta=meta, params=filled)


def make_matches(field: SyntheticField, count: int, noise_sigma=1.0,
                 outlier_fraction=0.0, outlier_magnitude=50.0, seed=0):
    """Sample matches consistent with a field, plus planted outliers.

    Destinations are uniform over the image; sources follow
    src = dst + field(dst) + N(0, noise_sigma) per coordinate. A labeled
    round(count * outlier_fraction) of the pairs then has its dst pushed
    by an offset of magnitude uniform in [m, 2m] in a uniform direction,
    corrupting the pair's displacement while the source positions stay
    where a real detector would have found them.

    Returns (MatchSet, labels) where labels[i] is True for planted
    outliers.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if not 0.0 <= outlier_fraction <= 1.0:
        raise ValueError("outlier_fraction must lie in [0, 1]")
    meta = field.meta
    rng = default_rng(seed)
    dst = np.column_stack([
        rng.uniform(0.0, meta.width - 1.0, size=count),
        rng.uniform(0.0, meta.height - 1.0, size=count),
    ])
    noise = rng.normal(0.0, noise_sigma, size=(count, 2)) if noise_sigma > 0 else 0.0
    src = dst + field(dst) + noise
    labels = np.zeros(count, dtype=bool)
    n_out = int(round(count * outlier_fraction))
    if n_out > 0:
        chosen = rng.choice(count, size=n_out, replace=False)
        magnitude = rng.uniform(outlier_magnitude, 2.0 * outlier_magnitude, size=n_out)
        angle = rng.uniform(0.0, 2.0 * math.pi, size=n_out)
        dst[chosen] += np.column_stack([magnitude * np.cos(angle), magnitude * np.sin(angle)])
        labels[chosen] = True
    return MatchSet(src, dst, "synthetic"), labels


def make_texture(meta: ImageMeta, seed=0, channels=1, blur_sigma=3.0):
    """A smooth random texture image, uint8, grayscale or RGB."""
    rng = default_rng(seed)
    shape = (meta.height, meta.width) if channels == 1 else (meta.height, meta.width, channels)
    noise = rng.uniform(0.0, 1.0, size=shape)
    if channels == 1:
        smooth = gaussian_filter(noise, blur_sigma)
    else:
        smooth = np.stack(
            [gaussian_filter(noise[:, :, c], blur_sigma) for c in range(channels)], axis=2
        )
    lo, hi = smooth.min(), smooth.max()
    span = hi - lo if hi > lo else 1.0
    return (20.0 + (smooth - lo) / span * 215.0).astype(np.uint8)


def make_pair(field: SyntheticField, seed=0, channels=1):
    """A (moving, fixed) image pair whose ground-truth registration is the
    field: fixed = warp(moving, field)."""
    moving = make_texture(field.meta, seed=seed, channels=channels)
    fixed = warp(moving, field.rasterize())
    return moving, fixed
