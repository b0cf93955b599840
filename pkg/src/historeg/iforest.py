"""Global-consistency match filtering with an isolation forest over
displacement vectors.

Each match contributes one displacement (dst - src). Displacements that
are easy to isolate from the bulk of the set — few random axis-aligned
splits suffice to separate them — receive anomaly scores near 1 and are
flagged as outliers. Scores are normalized by the average unsuccessful
BST search length c(n), so a score of 0.5 means "as deep as an average
point" and the default threshold of 0.6 flags only clearly shallow ones.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.random import SeedSequence, default_rng
from sklearn.base import BaseEstimator, OutlierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .types import MatchSet, OutlierMask

EULER_GAMMA = float(np.euler_gamma)

# Keeps forest streams decoupled from other seeded components that may
# share the same user-facing seed.
_FOREST_STREAM = 1


def displacements(matches: MatchSet) -> np.ndarray:
    """Per-match displacement vectors (dst - src), shape (n, 2)."""
    return matches.dst - matches.src


def c_factor(n: int) -> float:
    """Average path length of an unsuccessful BST search among n points.

    Uses the harmonic-number approximation H(i) = ln(i) + Euler-Mascheroni
    for n > 2; the n == 2 case is the exact value 1.
    """
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


@dataclass
class _Internal:
    attr: int
    value: float
    left: object
    right: object


@dataclass
class _External:
    size: int


def build_tree(samples, height_limit, rng):
    """Grow one isolation tree over (k, 2) displacement samples.

    Recursion stops at the height limit, at a single sample, or when the
    remaining samples are identical in both attributes. The split
    attribute is drawn uniformly at random; the split value uniformly
    from the open range of that attribute. A degenerate draw (all values
    equal on the chosen attribute) falls back to the other attribute.
    """
    x = np.asarray(samples, dtype=np.float64)

    def grow(pts, depth):
        if depth >= height_limit or len(pts) <= 1:
            return _External(len(pts))
        attr = int(rng.integers(2))
        lo = pts[:, attr].min()
        hi = pts[:, attr].max()
        if lo == hi:
            attr = 1 - attr
            lo = pts[:, attr].min()
            hi = pts[:, attr].max()
            if lo == hi:
                return _External(len(pts))
        value = float(rng.uniform(lo, hi))
        while value == lo:  # keep the split strictly inside (lo, hi)
            value = float(rng.uniform(lo, hi))
        left = pts[:, attr] < value
        return _Internal(attr, value, grow(pts[left], depth + 1), grow(pts[~left], depth + 1))

    return grow(x, 0)


def path_length(sample, tree, depth=0):
    """Path length of one displacement through one tree, with the c(size)
    adjustment at external nodes."""
    if isinstance(tree, _External):
        return depth + c_factor(tree.size)
    if sample[tree.attr] < tree.value:
        return path_length(sample, tree.left, depth + 1)
    return path_length(sample, tree.right, depth + 1)


def anomaly_score(expected_path: float, n: int) -> float:
    """Normalized anomaly score 2**(-E(h)/c(n)), in (0, 1]."""
    if n < 2:
        raise ValueError("anomaly scores need a reference size of at least 2")
    return 2.0 ** (-(expected_path / c_factor(n)))


def _tree_paths(tree, x):
    """Vectorized path lengths of every row of x through one tree."""
    out = np.empty(len(x), dtype=np.float64)
    stack = [(tree, np.arange(len(x)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if isinstance(node, _External):
            out[idx] = depth + c_factor(node.size)
            continue
        left = x[idx, node.attr] < node.value
        stack.append((node.left, idx[left], depth + 1))
        stack.append((node.right, idx[~left], depth + 1))
    return out


class IsolationForestFilter(OutlierMixin, BaseEstimator):
    """Isolation forest over 2-d displacement vectors.

    Parameters
    ----------
    n_trees : number of trees in the ensemble.
    subsample_size : per-tree subsample size psi; clamped to the data size.
    score_threshold : flag scores strictly above this value.
    contamination : if set, ignore score_threshold and flag the top
        fraction of training scores instead.
    random_state : integer seed. Each tree draws from its own stream
        derived from this seed, so results do not depend on evaluation
        order or parallelism.

    Subsampling happens in a canonical value order (sorted by dx, dy,
    then original position), which makes the fitted forest equivariant
    under permutations of the input rows.
    """

    def __init__(self, n_trees=100, subsample_size=256, score_threshold=0.6,
                 contamination=None, random_state=0):
        self.n_trees = n_trees
        self.subsample_size = subsample_size
        self.score_threshold = score_threshold
        self.contamination = contamination
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 2:
            raise ValueError("expected displacement vectors of shape (n, 2)")
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if self.subsample_size < 2:
            raise ValueError("subsample_size must be at least 2")
        n = X.shape[0]
        if n < 2:
            raise ValueError("need at least 2 displacements to fit")
        psi = int(min(self.subsample_size, n))
        canonical = np.lexsort((np.arange(n), X[:, 1], X[:, 0]))
        streams = SeedSequence([int(self.random_state), _FOREST_STREAM]).spawn(self.n_trees)
        trees = []
        for stream in streams:
            rng = default_rng(stream)
            pos = rng.choice(n, size=psi, replace=False)
            trees.append(build_tree(X[canonical[pos]], _height_limit(psi), rng))
        self.trees_ = trees
        self.subsample_used_ = psi
        self.n_samples_fit_ = n
        if self.contamination is not None:
            q = float(self.contamination)
            if not 0.0 < q < 1.0:
                raise ValueError("contamination must lie in (0, 1)")
            self.threshold_ = float(np.quantile(self.score_samples(X), 1.0 - q))
        else:
            self.threshold_ = float(self.score_threshold)
        return self

    def score_samples(self, X):
        """Anomaly scores in (0, 1]; higher means easier to isolate.

        Note the orientation is the opposite of
        sklearn.ensemble.IsolationForest.score_samples.
        """
        check_is_fitted(self, "trees_")
        X = check_array(X, dtype=np.float64)
        paths = np.zeros(len(X), dtype=np.float64)
        for tree in self.trees_:
            paths += _tree_paths(tree, X)
        expected = paths / len(self.trees_)
        return 2.0 ** (-(expected / c_factor(self.subsample_used_)))

    def predict(self, X):
        """sklearn outlier convention: -1 for outliers, +1 for inliers."""
        scores = self.score_samples(X)
        return np.where(scores > self.threshold_, -1, 1)


def _height_limit(psi):
    return int(math.ceil(math.log2(psi)))


def detect_outliers(matches: MatchSet, forest: IsolationForestFilter | None = None) -> OutlierMask:
    """Flag globally inconsistent matches.

    Fewer than 3 matches carry too little structure to judge, so the
    filter is skipped and nothing is flagged (scores all zero).
    """
    n = len(matches)
    if n < 3:
        return OutlierMask.none(n)
    from sklearn.base import clone

    filt = clone(forest) if forest is not None else IsolationForestFilter()
    X = displacements(matches)
    filt.fit(X)
    scores = filt.score_samples(X)
    return OutlierMask(scores > filt.threshold_, scores)
