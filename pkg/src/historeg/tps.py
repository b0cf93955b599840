"""Thin-plate-spline interpolation of sparse matches into a dense
displacement field.

The field follows the pull convention: for a match (src, dst) the stored
displacement at the fixed-image point dst is src - dst, so that sampling
the moving image at p + field(p) reconstructs the registered image. The
spline minimizes bending energy subject to interpolating the control
displacements (exactly at regularization 0, approximately otherwise).
"""

import math
import warnings

import numpy as np
from scipy.spatial import cKDTree
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import DegenerateGeometryError, TooFewMatchesError
from .geometry import AffineTransform2D
from .types import ImageMeta, MatchSet

# Control points closer than this are collapsed by averaging before the
# solve; separations at this scale make the kernel system meaningless.
DUPLICATE_RADIUS = 1e-6

# Hard cap on the dense solve; larger inputs are thinned with a warning.
MAX_CONTROL_POINTS = 10_000

_FALLBACK_REGULARIZATION = 1e-3


def _kernel(r2):
    """U(r) = r^2 log r evaluated from squared distances, with U(0) = 0."""
    out = np.zeros_like(r2)
    np.log(r2, out=out, where=r2 > 0.0)
    return 0.5 * r2 * out


def _merge_duplicates(points, values):
    pairs = cKDTree(points).query_pairs(DUPLICATE_RADIUS, output_type="ndarray")
    if len(pairs) == 0:
        return points, values
    parent = np.arange(len(points))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(len(points))])
    keep = np.unique(roots)
    merged_pts = np.empty((len(keep), 2))
    merged_vals = np.empty((len(keep), 2))
    for row, root in enumerate(keep):
        members = roots == root
        merged_pts[row] = points[members].mean(axis=0)
        merged_vals[row] = values[members].mean(axis=0)
    return merged_pts, merged_vals


class ThinPlateSpline(RegressorMixin, BaseEstimator):
    """2-d -> 2-d thin-plate-spline interpolator.

    fit(X, y) takes control points X (n, 2) and the vector values y
    (n, 2) to interpolate. regularization is added to the kernel matrix
    diagonal; 0 interpolates exactly, larger values smooth.

    Attributes (after fit)
    ----------------------
    controls_ : control points actually used (deduplicated, possibly
        thinned to MAX_CONTROL_POINTS).
    weights_ : (n, 2) kernel weights; each column sums to zero and is
        orthogonal to the control coordinates.
    affine_ : AffineTransform2D holding the affine part of the value
        function (A is its linear part, b its constant part).
    """

    def __init__(self, regularization=0.0, max_controls=MAX_CONTROL_POINTS):
        self.regularization = regularization
        self.max_controls = max_controls

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = check_array(y, dtype=np.float64)
        if X.shape[1] != 2 or y.shape != X.shape:
            raise ValueError("expected matching (n, 2) control points and values")
        if self.regularization < 0.0:
            raise ValueError("regularization must be non-negative")
        if len(X) < 3:
            raise TooFewMatchesError(f"spline fitting needs at least 3 points, got {len(X)}")
        pts, vals = _merge_duplicates(X, y)
        if len(pts) < 3:
            raise TooFewMatchesError("fewer than 3 distinct control points after merging")
        if len(pts) > self.max_controls:
            warnings.warn(
                f"thinning {len(pts)} control points to {self.max_controls} for the dense solve",
                stacklevel=2,
            )
            order = np.lexsort((pts[:, 1], pts[:, 0]))
            take = np.linspace(0, len(pts) - 1, self.max_controls).round().astype(int)
            chosen = np.sort(order[np.unique(take)])
            pts, vals = pts[chosen], vals[chosen]
        P = np.hstack([np.ones((len(pts), 1)), pts])
        if np.linalg.matrix_rank(P) < 3:
            raise DegenerateGeometryError("control points are collinear")

        # Solve in a unit-scale frame for conditioning, then convert the
        # solution back so weights_/affine_ satisfy the original-frame
        # kernel system (the side conditions make the spline space
        # closed under similarity transforms, so this is exact).
        center = pts.mean(axis=0)
        scale = float((pts.max(axis=0) - pts.min(axis=0)).max())
        pts_n = (pts - center) / scale
        n = len(pts)
        diff = pts_n[:, None, :] - pts_n[None, :, :]
        K = _kernel(np.einsum("ijk,ijk->ij", diff, diff))
        K[np.diag_indices_from(K)] += self.regularization / scale**2
        L = np.zeros((n + 3, n + 3))
        L[:n, :n] = K
        L[:n, n:] = np.hstack([np.ones((n, 1)), pts_n])
        L[n:, :n] = L[:n, n:].T
        rhs = np.zeros((n + 3, 2))
        rhs[:n] = vals
        try:
            solution = np.linalg.solve(L, rhs)
        except np.linalg.LinAlgError:
            if self.regularization > 0.0:
                raise DegenerateGeometryError("spline system is singular") from None
            warnings.warn(
                "spline system is singular at regularization 0; "
                f"retrying with {_FALLBACK_REGULARIZATION}",
                stacklevel=2,
            )
            L[np.diag_indices(n)] += _FALLBACK_REGULARIZATION / scale**2
            solution = np.linalg.solve(L, rhs)
        w_n = solution[:n]
        a_n = solution[n:]
        self.controls_ = pts
        self.weights_ = w_n / scale**2
        linear = a_n[1:].T / scale
        const = (
            a_n[0]
            - linear @ center
            - (math.log(scale) / scale**2) * (w_n.T @ (pts**2).sum(axis=1))
        )
        self.affine_ = AffineTransform2D(linear, const)
        return self

    def predict(self, X):
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=np.float64)
        diff = X[:, None, :] - self.controls_[None, :, :]
        K = _kernel(np.einsum("ijk,ijk->ij", diff, diff))
        return self.affine_.apply(X) + K @ self.weights_


def fit_matches(matches: MatchSet, regularization=0.0) -> ThinPlateSpline:
    """Fit a spline mapping fixed-image points to pull displacements.

    Control points are the match destinations; the interpolated values
    are src - dst.
    """
    model = ThinPlateSpline(regularization=regularization)
    return model.fit(matches.dst, matches.src - matches.dst)


def rasterize(model: ThinPlateSpline, meta: ImageMeta) -> np.ndarray:
    """Evaluate the spline at every pixel center, row-major, as an
    (h, w, 2) float32 raster.

    Evaluation is independent per pixel, so chunking (and any future
    parallelism over rows) cannot change the result.
    """
    w, h = meta.width, meta.height
    n = len(model.controls_)
    field = np.empty((h, w, 2), dtype=np.float32)
    rows_per_chunk = max(1, int(4_000_000 // max(1, w * n)))
    xs = np.arange(w, dtype=np.float64)
    for y0 in range(0, h, rows_per_chunk):
        y1 = min(h, y0 + rows_per_chunk)
        ys = np.arange(y0, y1, dtype=np.float64)
        gx, gy = np.meshgrid(xs, ys)
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        field[y0:y1] = model.predict(pts).reshape(y1 - y0, w, 2).astype(np.float32)
    return field


def jacobian_stats(field) -> dict:
    """Folding diagnostic of the mapping p -> p + field(p).

    Returns min, mean, and the fraction of pixels with a non-positive
    Jacobian determinant (central differences; meaningful from 2x2 up).
    """
    arr = np.asarray(field, dtype=np.float64)
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        det = np.ones(arr.shape[:2])
    else:
        dx_dy, dx_dx = np.gradient(arr[:, :, 0])
        dy_dy, dy_dx = np.gradient(arr[:, :, 1])
        det = (1.0 + dx_dx) * (1.0 + dy_dy) - dx_dy * dy_dx
    return {
        "min": float(det.min()),
        "mean": float(det.mean()),
        "negative_fraction": float((det <= 0.0).mean()),
    }
