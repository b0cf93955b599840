"""Registration accuracy via relative target registration error.

rTRE divides the Euclidean landmark error by the image diagonal
sqrt(w^2 + h^2), making values comparable across image sizes. An
optional squared mode reports (distance/diagonal)^2 instead, for
comparison against pipelines that aggregate squared errors. Aggregates
follow the <outer>-<inner> naming: the inner statistic summarizes one
pair's landmarks, the outer statistic summarizes those values across
pairs.
"""

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatchError, NoPairsError
from .types import ImageMeta
from .warp import _sample_float

AGGREGATE_NAMES = (
    "Average-Average",
    "Average-Median",
    "Median-Average",
    "Median-Median",
    "Max-Average",
    "Max-Median",
)

_OUTER = {"Average": np.mean, "Median": np.median, "Max": np.max}
_INNER = {"Average": np.mean, "Median": np.median}


def rtre(predicted, truth, meta: ImageMeta, squared=False) -> np.ndarray:
    """Per-landmark relative TRE between prediction and truth arrays."""
    predicted = np.asarray(predicted, dtype=np.float64).reshape(-1, 2)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1, 2)
    if predicted.shape != truth.shape:
        raise LengthMismatchError(
            f"{len(predicted)} predicted landmarks vs {len(truth)} truth landmarks"
        )
    rel = np.linalg.norm(predicted - truth, axis=1) / meta.diagonal
    return rel**2 if squared else rel


def transfer_landmarks(landmarks, field) -> np.ndarray:
    """Map landmarks through a displacement raster: p -> p + field(p).

    The field is sampled bilinearly at the (possibly non-integer)
    landmark positions; landmarks outside the raster clamp to its border.
    """
    pts = np.asarray(landmarks, dtype=np.float64).reshape(-1, 2)
    arr = np.asarray(field, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError(f"field must have shape (h, w, 2), got {arr.shape}")
    if len(pts) == 0:
        return pts.copy()
    disp = _sample_float(arr, pts[:, 0], pts[:, 1])
    return pts + disp


@dataclass
class PairEvaluation:
    rtre_values: np.ndarray
    average: float
    median: float
    max: float

    def to_json_dict(self):
        return {
            "landmarks": int(len(self.rtre_values)),
            "average": self.average,
            "median": self.median,
            "max": self.max,
        }


@dataclass
class EvaluationReport:
    pairs: list
    aggregates: dict
    squared: bool

    def to_json_dict(self):
        return {
            "metric": "squared_rtre" if self.squared else "rtre",
            "pairs": [p.to_json_dict() for p in self.pairs],
            "aggregates": dict(self.aggregates),
        }


def evaluate(pairs, squared=False) -> EvaluationReport:
    """Score a collection of (predicted, truth, meta) landmark pairs.

    Every pair contributes per-landmark rTREs and their average, median
    (even-length lists use the mean of the two central order statistics),
    and max; the report carries all six cross-pair aggregates. Raises
    NoPairsError on an empty collection and LengthMismatchError when a
    pair's arrays disagree in length (or a pair has no landmarks).
    """
    pairs = list(pairs)
    if not pairs:
        raise NoPairsError("evaluation needs at least one landmark pair")
    evaluated = []
    for predicted, truth, meta in pairs:
        values = rtre(predicted, truth, meta, squared=squared)
        if len(values) == 0:
            raise LengthMismatchError("a landmark pair with no landmarks cannot be scored")
        evaluated.append(
            PairEvaluation(
                rtre_values=values,
                average=float(np.mean(values)),
                median=float(np.median(values)),
                max=float(np.max(values)),
            )
        )
    aggregates = {}
    for name in AGGREGATE_NAMES:
        outer_name, inner_name = name.split("-")
        inner = [_INNER[inner_name](p.rtre_values) for p in evaluated]
        aggregates[name] = float(_OUTER[outer_name](inner))
    return EvaluationReport(pairs=evaluated, aggregates=aggregates, squared=squared)
