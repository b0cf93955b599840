"""Coarse-to-fine orchestration of an external matcher.

The matcher is an external command that receives two crop images and
writes a match CSV in crop coordinates. The pyramid starts with both
full images scaled into one crop, then repeatedly halves the scale,
cutting crops centered on the current match estimates, mapping each
level's crop-frame matches back to full resolution, merging them with
what earlier levels produced, and refining the union.

Next to every crop PNG the orchestrator writes a JSON sidecar
(<crop>.png.json) describing the crop's frame — origin, scale, size,
and the source image dimensions — so matchers that need global context
(debug tooling, frame-exact mocks) can recover it; ordinary matchers
ignore the sidecar.
"""

import shlex
import subprocess
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as hio
from .errors import MatcherUnavailableError
from .refinery import refine
from .types import ImageMeta, MatchSet
from .warp import _sample_float, _round_u8

DEFAULT_CROP_SIZE = 256
DEFAULT_MAX_WINDOWS = 64


@dataclass(frozen=True)
class CropWindow:
    """An axis-aligned sampling window: crop pixel (cx, cy) covers the
    full-resolution point origin + (cx, cy) * scale."""

    origin_x: float
    origin_y: float
    scale: float
    size: int = DEFAULT_CROP_SIZE

    def __post_init__(self):
        if self.scale <= 0.0:
            raise ValueError("window scale must be positive")
        if self.size < 1:
            raise ValueError("window size must be at least 1")

    def to_local(self, points):
        pts = np.asarray(points, dtype=np.float64)
        return (pts - np.array([self.origin_x, self.origin_y])) / self.scale

    def to_global(self, points):
        pts = np.asarray(points, dtype=np.float64)
        return pts * self.scale + np.array([self.origin_x, self.origin_y])


def full_window(meta: ImageMeta, size=DEFAULT_CROP_SIZE) -> CropWindow:
    """The level-0 window: the whole image scaled into one crop."""
    return CropWindow(0.0, 0.0, max(meta.width, meta.height) / size, size)


def schedule(estimate_src, estimate_dst, level, meta_a, meta_b,
             size=DEFAULT_CROP_SIZE):
    """Window pair for one estimate at one pyramid level.

    Level 0 covers each full image; level k halves the level-(k-1) scale
    and centers the window on the estimate (src point for image A, dst
    point for image B), clamped so the window stays inside the image
    wherever it fits.
    """
    if level < 0:
        raise ValueError("level must be non-negative")
    win_a = full_window(meta_a, size)
    win_b = full_window(meta_b, size)
    if level == 0:
        return win_a, win_b
    return (
        _centered(estimate_src, win_a.scale / 2**level, meta_a, size),
        _centered(estimate_dst, win_b.scale / 2**level, meta_b, size),
    )


def _centered(point, scale, meta, size):
    point = np.asarray(point, dtype=np.float64).reshape(2)
    extent = size * scale
    ox = point[0] - extent / 2.0
    oy = point[1] - extent / 2.0
    ox = float(np.clip(ox, 0.0, max(0.0, meta.width - extent)))
    oy = float(np.clip(oy, 0.0, max(0.0, meta.height - extent)))
    return CropWindow(ox, oy, scale, size)


def extract_crop(image, window: CropWindow):
    """Resample a window of an image into a size x size uint8 crop."""
    grid = np.arange(window.size, dtype=np.float64)
    gx, gy = np.meshgrid(grid, grid)
    pts = window.to_global(np.column_stack([gx.ravel(), gy.ravel()]))
    sampled = _round_u8(_sample_float(image, pts[:, 0], pts[:, 1]))
    arr = np.asarray(image)
    if arr.ndim == 3:
        return sampled.reshape(window.size, window.size, arr.shape[2])
    return sampled.reshape(window.size, window.size)


class CommandMatcher:
    """Runs a matcher command template with {a} {b} {out} placeholders."""

    def __init__(self, template: str, timeout=300.0):
        for token in ("{a}", "{b}", "{out}"):
            if token not in template:
                raise ValueError(f"matcher template must contain {token}")
        self.template = template
        self.timeout = timeout

    def __call__(self, a_path, b_path, out_path):
        args = [
            arg.replace("{a}", str(a_path)).replace("{b}", str(b_path)).replace("{out}", str(out_path))
            for arg in shlex.split(self.template)
        ]
        try:
            result = subprocess.run(
                args, capture_output=True, text=True, timeout=self.timeout
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise MatcherUnavailableError(f"matcher failed to run: {exc}") from exc
        if result.returncode != 0:
            tail = (result.stderr or result.stdout or "").strip().splitlines()
            detail = tail[-1] if tail else "no output"
            raise MatcherUnavailableError(
                f"matcher exited with {result.returncode}: {detail}"
            )


def _write_crop(image, window, path):
    hio.write_image(extract_crop(image, window), path)
    meta = ImageMeta.of(image)
    sidecar = {
        "origin_x": window.origin_x,
        "origin_y": window.origin_y,
        "scale": window.scale,
        "size": window.size,
        "image_width": meta.width,
        "image_height": meta.height,
    }
    hio.write_report(sidecar, Path(str(path) + ".json"))


def _invoke(matcher, moving, fixed, win_a, win_b, workdir, tag):
    a_path = workdir / f"moving_{tag}.png"
    b_path = workdir / f"fixed_{tag}.png"
    out_path = workdir / f"matches_{tag}.csv"
    _write_crop(moving, win_a, a_path)
    _write_crop(fixed, win_b, b_path)
    matcher(str(a_path), str(b_path), str(out_path))
    local = hio.read_match_csv(out_path)
    return MatchSet(
        win_a.to_global(local.src).reshape(-1, 2),
        win_b.to_global(local.dst).reshape(-1, 2),
        local.provenance,
    )


def _level_windows(matches: MatchSet, level, meta_a, meta_b, size, max_windows):
    """Deduplicated, capped window pairs centered on the current matches.

    Origins are quantized to one crop pixel before deduplication, so
    estimates within a crop pixel of each other share a window.
    """
    seen = {}
    for src, dst in zip(matches.src, matches.dst):
        win_a, win_b = schedule(src, dst, level, meta_a, meta_b, size)
        win_a = _quantize(win_a, meta_a)
        win_b = _quantize(win_b, meta_b)
        key = (win_a.origin_x, win_a.origin_y, win_b.origin_x, win_b.origin_y)
        if key not in seen:
            seen[key] = (win_a, win_b)
    windows = [seen[k] for k in sorted(seen)]
    if len(windows) > max_windows:
        take = np.linspace(0, len(windows) - 1, max_windows).round().astype(int)
        windows = [windows[i] for i in np.unique(take)]
    return windows


def _quantize(window: CropWindow, meta: ImageMeta) -> CropWindow:
    s = window.scale
    extent = window.size * s
    ox = round(window.origin_x / s) * s
    oy = round(window.origin_y / s) * s
    ox = float(np.clip(ox, 0.0, max(0.0, meta.width - extent)))
    oy = float(np.clip(oy, 0.0, max(0.0, meta.height - extent)))
    return CropWindow(ox, oy, s, window.size)


def run_pyramid(moving, fixed, matcher, *, forest=None, local=None,
                dedup_radius=1.0, crop_size=DEFAULT_CROP_SIZE,
                max_windows=DEFAULT_MAX_WINDOWS, workdir=None) -> MatchSet:
    """Run the full coarse-to-fine matching loop.

    Per level: cut crops, invoke the matcher on each window pair, map the
    returned crop-frame matches to full resolution, merge with the
    matches carried from earlier levels, and refine the union. Levels
    keep halving until the sampling scale reaches native resolution
    (scale <= 1). A matcher failure at level 0 is fatal
    (MatcherUnavailableError); at later levels the level is skipped with
    a warning — partial results from a half-failed level are discarded —
    and the previous estimate carries forward.
    """
    meta_a = ImageMeta.of(moving)
    meta_b = ImageMeta.of(fixed)
    cleanup = None
    if workdir is None:
        cleanup = tempfile.TemporaryDirectory(prefix="historeg_pyramid_")
        workdir = Path(cleanup.name)
    else:
        workdir = Path(workdir)
        workdir.mkdir(parents=True, exist_ok=True)
    try:
        carried = MatchSet.empty()
        level = 0
        while True:
            scale_now = max(
                full_window(meta_a, crop_size).scale,
                full_window(meta_b, crop_size).scale,
            ) / 2**level
            if level == 0:
                windows = [(full_window(meta_a, crop_size), full_window(meta_b, crop_size))]
            elif len(carried) == 0:
                windows = []
            else:
                windows = _level_windows(carried, level, meta_a, meta_b, crop_size, max_windows)
            new_sets = []
            failed = False
            for i, (win_a, win_b) in enumerate(windows):
                try:
                    new_sets.append(
                        _invoke(matcher, moving, fixed, win_a, win_b, workdir, f"L{level}_{i}")
                    )
                except MatcherUnavailableError:
                    if level == 0:
                        raise
                    failed = True
                    break
            if failed:
                warnings.warn(f"matcher failed at level {level}; carrying previous matches forward")
            elif new_sets:
                carried, _ = refine(
                    [carried] + new_sets,
                    forest=forest,
                    local=local,
                    dedup_radius=dedup_radius,
                )
            if scale_now <= 1.0:
                return carried
            level += 1
    finally:
        if cleanup is not None:
            cleanup.cleanup()
