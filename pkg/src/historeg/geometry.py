"""Planar geometry helpers: affine fits, Delaunay meshes, point location."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .errors import DegenerateGeometryError

# Triangles whose area falls at or below this are dropped from meshes.
DEGENERATE_AREA = 1e-9

# Slack on normalized barycentric coordinates; keeps points sitting
# exactly on an edge or vertex classified as covered.
_BARY_EPS = 1e-9


@dataclass(frozen=True)
class AffineTransform2D:
    """p -> A @ p + b with A of shape (2, 2) and b of shape (2,)."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64).reshape(2, 2)
        b = np.asarray(self.b, dtype=np.float64).reshape(2)
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def identity(cls):
        return cls(np.eye(2), np.zeros(2))

    def apply(self, points):
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.A.T + self.b


def fit_affine(src, dst) -> AffineTransform2D:
    """Least-squares affine map taking src points onto dst points.

    Exact for 3 points in general position. Raises DegenerateGeometryError
    when the source points are collinear (the normal system loses rank).
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    if src.shape != dst.shape or len(src) < 3:
        raise ValueError("need matching src/dst arrays with at least 3 points")
    design = np.hstack([src, np.ones((len(src), 1))])
    params, _, rank, _ = np.linalg.lstsq(design, dst, rcond=None)
    if rank < 3:
        raise DegenerateGeometryError("source points are collinear")
    return AffineTransform2D(params[:2].T, params[2])


@dataclass(frozen=True)
class TriangulationMesh:
    """A triangulated point set.

    vertices : (k, 2) float64
    triangles : (m, 3) int vertex indices; each row sorted ascending and
        rows ordered lexicographically, so "lowest triangle index" is a
        well-defined tie-break for points on shared edges.
    """

    vertices: np.ndarray
    triangles: np.ndarray

    def __len__(self):
        return len(self.triangles)


def triangle_areas(vertices, triangles):
    p0 = vertices[triangles[:, 0]]
    d1 = vertices[triangles[:, 1]] - p0
    d2 = vertices[triangles[:, 2]] - p0
    return 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def triangulate(points) -> TriangulationMesh:
    """Delaunay triangulation with degenerate slivers removed.

    Raises DegenerateGeometryError for fewer than 3 points, collinear
    input, or when every triangle is degenerate.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 3:
        raise DegenerateGeometryError("triangulation needs at least 3 points")
    try:
        tri = Delaunay(pts)
    except QhullError as exc:
        raise DegenerateGeometryError(f"triangulation failed: {exc}") from exc
    simplices = np.sort(tri.simplices, axis=1)
    keep = triangle_areas(pts, simplices) > DEGENERATE_AREA
    simplices = simplices[keep]
    if len(simplices) == 0:
        raise DegenerateGeometryError("all triangles are degenerate")
    order = np.lexsort((simplices[:, 2], simplices[:, 1], simplices[:, 0]))
    return TriangulationMesh(pts.copy(), simplices[order])


def locate(mesh: TriangulationMesh, query) -> np.ndarray:
    """Index of the containing triangle for each query point, -1 if none.

    Containment is boundary-inclusive; a point on a shared edge or vertex
    reports the lowest triangle index.
    """
    query = np.asarray(query, dtype=np.float64).reshape(-1, 2)
    m = len(mesh.triangles)
    n = len(query)
    result = np.full(n, -1, dtype=np.int64)
    if n == 0 or m == 0:
        return result
    v = mesh.vertices
    p0 = v[mesh.triangles[:, 0]]
    edge = np.stack([v[mesh.triangles[:, 1]] - p0, v[mesh.triangles[:, 2]] - p0], axis=2)
    inv = np.linalg.inv(edge)  # (m, 2, 2); degenerate rows were removed upstream
    diff = query[None, :, :] - p0[:, None, :]  # (m, n, 2)
    lam = np.einsum("mij,mnj->mni", inv, diff)
    bary0 = 1.0 - lam[:, :, 0] - lam[:, :, 1]
    inside = (lam[:, :, 0] >= -_BARY_EPS) & (lam[:, :, 1] >= -_BARY_EPS) & (bary0 >= -_BARY_EPS)
    any_hit = inside.any(axis=0)
    first = inside.argmax(axis=0)
    result[any_hit] = first[any_hit]
    return result
