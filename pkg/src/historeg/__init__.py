"""Deformable registration refinement for histology image pairs.

The package turns raw correspondences from external feature matchers
into a dense displacement field: candidate matches are merged, cleaned
by a global isolation-forest filter and a local piecewise-affine filter,
interpolated with a thin-plate spline, and evaluated with relative
target registration error.
"""

from .errors import (
    DataError,
    HistoregError,
    MatcherUnavailableError,
)
from .evaluation import evaluate, rtre, transfer_landmarks
from .geometry import AffineTransform2D, fit_affine, triangulate
from .iforest import IsolationForestFilter, anomaly_score, c_factor, detect_outliers
from .io import (
    read_dvf,
    read_image,
    read_landmarks_csv,
    read_match_csv,
    write_dvf,
    write_image,
    write_landmarks_csv,
    write_match_csv,
)
from .local_affine import LocalAffineFilter, filter_local
from .multiscale import CommandMatcher, CropWindow, run_pyramid
from .refinery import RefineReport, merge, refine
from .synth import make_field, make_matches, make_pair
from .tps import ThinPlateSpline, fit_matches, jacobian_stats, rasterize
from .types import ImageMeta, MatchSet, OutlierMask
from .warp import bilinear_sample, checkerboard, overlay_landmarks, warp

__version__ = "0.1.0"

__all__ = [
    "AffineTransform2D",
    "CommandMatcher",
    "CropWindow",
    "DataError",
    "HistoregError",
    "ImageMeta",
    "IsolationForestFilter",
    "LocalAffineFilter",
    "MatchSet",
    "MatcherUnavailableError",
    "OutlierMask",
    "RefineReport",
    "ThinPlateSpline",
    "anomaly_score",
    "bilinear_sample",
    "c_factor",
    "checkerboard",
    "detect_outliers",
    "evaluate",
    "filter_local",
    "fit_affine",
    "fit_matches",
    "jacobian_stats",
    "make_field",
    "make_matches",
    "make_pair",
    "merge",
    "overlay_landmarks",
    "rasterize",
    "read_dvf",
    "read_image",
    "read_landmarks_csv",
    "read_match_csv",
    "refine",
    "rtre",
    "run_pyramid",
    "transfer_landmarks",
    "triangulate",
    "warp",
    "write_dvf",
    "write_image",
    "write_landmarks_csv",
    "write_match_csv",
]
