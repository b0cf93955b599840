"""Local-consistency match filtering via repeated piecewise-affine checks.

Each round draws a spatially stratified subset of matches, triangulates
their source points, and fits the exact affine map of every triangle
from its three vertex correspondences. All matches covered by the mesh
are then predicted through their containing triangle's map, and the
Euclidean deviation between actual and predicted destination accumulates
into a per-match score. Matches whose mean deviation over the rounds
that covered them exceeds the threshold are flagged.
"""

import math

import numpy as np
from numpy.random import SeedSequence, default_rng
from sklearn.base import BaseEstimator, OutlierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import geometry
from .errors import DegenerateGeometryError, TooFewMatchesError
from .types import MatchSet, OutlierMask

MIN_MATCHES = 8

_LOCAL_STREAM = 2

# Fraction of the source bounding-box diagonal used when no explicit
# deviation threshold is given; stands in for 2% of the image diagonal.
_DEFAULT_THRESHOLD_FRACTION = 0.02


def sample_points(matches: MatchSet, fraction: float, rng) -> np.ndarray:
    """Indices of a spatially stratified sample of k = max(8, ceil(f*n)) matches.

    A ceil(sqrt(k)) x ceil(sqrt(k)) grid is laid over the bounding box of
    the source points and one match is drawn uniformly from each nonempty
    cell, cycling over the cells until k are collected. Returned sorted.
    """
    n = len(matches)
    if n < MIN_MATCHES:
        raise TooFewMatchesError(f"sampling needs at least {MIN_MATCHES} matches, got {n}")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("sample fraction must lie in (0, 1]")
    k = min(n, max(MIN_MATCHES, math.ceil(fraction * n)))
    g = math.ceil(math.sqrt(k))
    src = matches.src
    lo = src.min(axis=0)
    span = src.max(axis=0) - lo
    span[span == 0.0] = 1.0  # flat boxes collapse into a single row/column
    cell = np.minimum((src - lo) / span * g, g - 1).astype(np.int64)
    cell_ids = cell[:, 1] * g + cell[:, 0]
    queues = []
    for cid in np.unique(cell_ids):
        members = np.flatnonzero(cell_ids == cid)
        queues.append(list(rng.permutation(members)))
    chosen = []
    while len(chosen) < k:
        for q in queues:
            if q and len(chosen) < k:
                chosen.append(int(q.pop(0)))
    return np.sort(np.asarray(chosen, dtype=np.int64))


def _round_deviations(matches: MatchSet, sample_idx):
    """One round: deviations (n,) and coverage mask (n,) for all matches.

    Raises DegenerateGeometryError when the sampled source points cannot
    be triangulated.
    """
    sub_src = matches.src[sample_idx]
    sub_dst = matches.dst[sample_idx]
    mesh = geometry.triangulate(sub_src)
    transforms = []
    for tri in mesh.triangles:
        transforms.append(geometry.fit_affine(sub_src[tri], sub_dst[tri]))
    tri_of = geometry.locate(mesh, matches.src)
    covered = tri_of >= 0
    deviations = np.zeros(len(matches), dtype=np.float64)
    for t in np.unique(tri_of[covered]):
        rows = np.flatnonzero(tri_of == t)
        predicted = transforms[t].apply(matches.src[rows])
        deviations[rows] = np.linalg.norm(matches.dst[rows] - predicted, axis=1)
    return deviations, covered


def score_matches(matches: MatchSet, rounds=10, fraction=0.25, seed=0):
    """Accumulated deviation sums and coverage counts over all rounds.

    Rounds whose sample happens to be untriangulable (e.g. collinear) are
    skipped; they add no coverage.
    """
    n = len(matches)
    sums = np.zeros(n, dtype=np.float64)
    coverage = np.zeros(n, dtype=np.int64)
    streams = SeedSequence([int(seed), _LOCAL_STREAM]).spawn(rounds)
    for stream in streams:
        rng = default_rng(stream)
        idx = sample_points(matches, fraction, rng)
        try:
            deviations, covered = _round_deviations(matches, idx)
        except DegenerateGeometryError:
            continue
        sums += deviations
        coverage += covered
    return sums, coverage


class LocalAffineFilter(OutlierMixin, BaseEstimator):
    """Transductive local-consistency outlier filter.

    Operates on rows of [src_x, src_y, dst_x, dst_y]. Like
    sklearn.neighbors.LocalOutlierFactor, it scores the set it was fitted
    on; use fit_predict (or the fitted attributes) rather than predicting
    on new data.

    Parameters
    ----------
    rounds : number of sampling rounds.
    sample_fraction : fraction of matches drawn per round (at least 8).
    deviation_threshold : mean per-round deviation (pixels) above which a
        match is flagged. None derives 2% of the source bounding-box
        diagonal at fit time.
    random_state : integer seed; each round gets its own derived stream.

    Attributes (after fit)
    ----------------------
    deviation_sums_ : summed deviations per match, pixels.
    coverage_ : number of rounds whose mesh covered each match.
    scores_ : mean deviation over covering rounds (0 where never covered).
    threshold_ : the resolved deviation threshold.
    """

    def __init__(self, rounds=10, sample_fraction=0.25, deviation_threshold=None,
                 random_state=0):
        self.rounds = rounds
        self.sample_fraction = sample_fraction
        self.deviation_threshold = deviation_threshold
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 4:
            raise ValueError("expected match rows [src_x, src_y, dst_x, dst_y]")
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        matches = MatchSet(X[:, :2], X[:, 2:])
        if self.deviation_threshold is not None:
            threshold = float(self.deviation_threshold)
            if threshold <= 0.0:
                raise ValueError("deviation_threshold must be positive")
        else:
            span = matches.src.max(axis=0) - matches.src.min(axis=0)
            threshold = max(
                _DEFAULT_THRESHOLD_FRACTION * float(np.hypot(*span)),
                np.finfo(np.float64).tiny,
            )
        sums, coverage = score_matches(
            matches,
            rounds=self.rounds,
            fraction=self.sample_fraction,
            seed=self.random_state,
        )
        self.deviation_sums_ = sums
        self.coverage_ = coverage
        self.scores_ = np.divide(
            sums, coverage, out=np.zeros_like(sums), where=coverage > 0
        )
        self.threshold_ = threshold
        return self

    def fit_predict(self, X, y=None):
        """sklearn outlier convention: -1 for outliers, +1 for inliers."""
        self.fit(X)
        flagged = (self.coverage_ >= 1) & (self.scores_ > self.threshold_)
        return np.where(flagged, -1, 1)

    def predict(self, X=None):
        check_is_fitted(self, "scores_")
        flagged = (self.coverage_ >= 1) & (self.scores_ > self.threshold_)
        return np.where(flagged, -1, 1)


def filter_local(matches: MatchSet, filt: LocalAffineFilter | None = None) -> OutlierMask:
    """Flag locally inconsistent matches.

    Fewer than 8 matches cannot support a meaningful mesh, so the filter
    is skipped and nothing is flagged (scores all zero).
    """
    n = len(matches)
    if n < MIN_MATCHES:
        return OutlierMask.none(n)
    from sklearn.base import clone

    est = clone(filt) if filt is not None else LocalAffineFilter()
    X = np.hstack([matches.src, matches.dst])
    labels = est.fit_predict(X)
    return OutlierMask(labels == -1, est.scores_)
