"""Core value types: match sets, image metadata, outlier masks.

Coordinate convention used everywhere in this package: x is the column,
y is the row, the origin sits at the top-left pixel, and units are
full-resolution pixels.
"""

from dataclasses import dataclass

import numpy as np


def _as_points(arr, name):
    a = np.asarray(arr, dtype=np.float64)
    if a.size == 0:
        a = a.reshape(0, 2)
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValueError(f"{name} must have shape (n, 2), got {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} must contain only finite coordinates")
    return a


class MatchSet:
    """An ordered set of candidate correspondences between a moving and a
    fixed image.

    ``src`` holds points in the moving image and ``dst`` the matched points
    in the fixed image, both as (n, 2) float64 arrays. ``provenance`` tags
    which matcher produced each pair and survives serialization. Instances
    are value objects: the coordinate arrays are frozen after construction.
    """

    __slots__ = ("src", "dst", "provenance")

    def __init__(self, src, dst, provenance="unknown"):
        src = _as_points(src, "src")
        dst = _as_points(dst, "dst")
        if src.shape != dst.shape:
            raise ValueError("src and dst must have the same length")
        if isinstance(provenance, str):
            provenance = (provenance,) * len(src)
        else:
            provenance = tuple(str(p) for p in provenance)
            if len(provenance) != len(src):
                raise ValueError("provenance length must match the pair count")
        src.setflags(write=False)
        dst.setflags(write=False)
        self.src = src
        self.dst = dst
        self.provenance = provenance

    @classmethod
    def empty(cls):
        return cls(np.empty((0, 2)), np.empty((0, 2)), ())

    def __len__(self):
        return self.src.shape[0]

    def __eq__(self, other):
        if not isinstance(other, MatchSet):
            return NotImplemented
        return (
            np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and self.provenance == other.provenance
        )

    def __repr__(self):
        return f"MatchSet(n={len(self)})"

    def subset(self, indices):
        """A new MatchSet with the selected rows, order preserved."""
        indices = np.asarray(indices)
        if indices.dtype == bool:
            indices = np.flatnonzero(indices)
        prov = tuple(self.provenance[i] for i in indices)
        return MatchSet(self.src[indices], self.dst[indices], prov)

    @staticmethod
    def concat(sets):
        """Concatenate several MatchSets in order."""
        sets = list(sets)
        if not sets:
            return MatchSet.empty()
        src = np.concatenate([s.src for s in sets])
        dst = np.concatenate([s.dst for s in sets])
        prov = tuple(p for s in sets for p in s.provenance)
        return MatchSet(src, dst, prov)


@dataclass(frozen=True)
class ImageMeta:
    """Pixel dimensions of an image or raster."""

    width: int
    height: int

    def __post_init__(self):
        if int(self.width) != self.width or int(self.height) != self.height:
            raise ValueError("image dimensions must be integers")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be at least 1x1")

    @classmethod
    def of(cls, image):
        """Meta for an (h, w) or (h, w, c) pixel array."""
        arr = np.asarray(image)
        if arr.ndim not in (2, 3):
            raise ValueError("expected a 2-d or 3-d pixel array")
        h, w = arr.shape[:2]
        return cls(width=int(w), height=int(h))

    @property
    def diagonal(self):
        return float(np.hypot(self.width, self.height))


@dataclass(frozen=True)
class OutlierMask:
    """Per-match outlier decision plus the score that produced it.

    Score semantics depend on the producing filter: the isolation forest
    emits anomaly scores in (0, 1]; the local affine filter emits mean
    per-round deviations in pixels. When a filter skipped (too few
    matches) flags are all False and scores all zero.
    """

    flags: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        flags = np.asarray(self.flags, dtype=bool)
        scores = np.asarray(self.scores, dtype=np.float64)
        if flags.shape != scores.shape or flags.ndim != 1:
            raise ValueError("flags and scores must be equal-length vectors")
        object.__setattr__(self, "flags", flags)
        object.__setattr__(self, "scores", scores)

    def __len__(self):
        return self.flags.shape[0]

    @property
    def count(self):
        return int(self.flags.sum())

    @classmethod
    def none(cls, n):
        """A mask that flags nothing (used when a filter is skipped)."""
        return cls(np.zeros(n, dtype=bool), np.zeros(n, dtype=np.float64))
