"""Merging matcher outputs and running the two-stage outlier rejection.

The refinement pipeline concatenates the per-matcher match sets (keeping
the first occurrence of near-duplicate pairs), removes globally
inconsistent matches with the isolation forest, then removes locally
inconsistent ones with the piecewise-affine filter, and reports counts
and score summaries for every stage.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .iforest import IsolationForestFilter, detect_outliers
from .local_affine import MIN_MATCHES, LocalAffineFilter, filter_local
from .types import MatchSet


def merge(sets, dedup_radius=1.0) -> MatchSet:
    """Concatenate match sets in order, dropping near-duplicates.

    A pair is dropped when both its src and dst lie strictly within
    dedup_radius (Euclidean) of an earlier-kept pair; the strict
    comparison means a radius of 0 disables deduplication entirely.
    """
    merged = MatchSet.concat(sets)
    n = len(merged)
    if n == 0 or dedup_radius <= 0.0:
        return merged
    near = [[] for _ in range(n)]
    src_pairs = cKDTree(merged.src).query_pairs(dedup_radius, output_type="ndarray")
    for i, j in src_pairs:
        i, j = (int(i), int(j)) if i < j else (int(j), int(i))
        d_src = np.linalg.norm(merged.src[i] - merged.src[j])
        d_dst = np.linalg.norm(merged.dst[i] - merged.dst[j])
        if d_src < dedup_radius and d_dst < dedup_radius:
            near[j].append(i)
    keep = np.ones(n, dtype=bool)
    for j in range(n):
        if any(keep[i] for i in near[j]):
            keep[j] = False
    return merged.subset(keep)


def _score_summary(scores, active):
    if not active or len(scores) == 0:
        return None
    return {
        "min": float(np.min(scores)),
        "median": float(np.median(scores)),
        "max": float(np.max(scores)),
    }


@dataclass
class RefineReport:
    """Stage-by-stage accounting of one refinement run."""

    input_counts: dict
    merged_count: int
    flagged_global: int
    flagged_local: int
    surviving_count: int
    global_skipped: bool
    local_skipped: bool
    global_scores: dict | None = None
    local_scores: dict | None = None
    skipped_stages: list = field(default_factory=list)

    def to_json_dict(self):
        return {
            "input_counts": dict(self.input_counts),
            "merged_count": self.merged_count,
            "flagged_global": self.flagged_global,
            "flagged_local": self.flagged_local,
            "surviving_count": self.surviving_count,
            "skipped_stages": list(self.skipped_stages),
            "global_scores": self.global_scores,
            "local_scores": self.local_scores,
        }


def refine(sets, forest: IsolationForestFilter | None = None,
           local: LocalAffineFilter | None = None,
           dedup_radius=1.0):
    """Merge, filter globally, filter locally.

    Returns (surviving MatchSet, RefineReport). The surviving set is a
    subset of the merged input in original order; the reported counts
    satisfy surviving == merged - flagged_global - flagged_local.
    """
    sets = list(sets)
    input_counts = {}
    for s in sets:
        for tag in s.provenance:
            input_counts[tag] = input_counts.get(tag, 0) + 1
    merged = merge(sets, dedup_radius=dedup_radius)

    global_mask = detect_outliers(merged, forest)
    global_skipped = len(merged) < 3
    after_global = merged.subset(~global_mask.flags)

    local_mask = filter_local(after_global, local)
    local_skipped = len(after_global) < MIN_MATCHES
    surviving = after_global.subset(~local_mask.flags)

    skipped = []
    if global_skipped:
        skipped.append("global")
    if local_skipped:
        skipped.append("local")
    report = RefineReport(
        input_counts=input_counts,
        merged_count=len(merged),
        flagged_global=global_mask.count,
        flagged_local=local_mask.count,
        surviving_count=len(surviving),
        global_skipped=global_skipped,
        local_skipped=local_skipped,
        global_scores=_score_summary(global_mask.scores, not global_skipped),
        local_scores=_score_summary(local_mask.scores, not local_skipped),
        skipped_stages=skipped,
    )
    return surviving, report
