"""Study-level aggregation of image predictions, and model ensembling.

A study's prediction is the mean of its frontal images and the mean of its
lateral images, combined by a frontal/lateral weighted average. Ensembling
is an image-level weighted mean over several models' prediction sets and is
meant to run before aggregation (both steps are linear, so the order does
not change the result beyond rounding).

Weighted means are computed as ``sum(w * x) / sum(w)`` and clipped to the
componentwise range of their inputs. The clip only removes rounding
excursions, so outputs never leave the input range and equal inputs come
back unchanged. A zero view weight passes the other view through as is.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    BothAbsent,
    EmptyView,
    ImageSetMismatch,
    InvalidWeights,
    MetadataConflict,
    MissingView,
)
from .types import (
    AggregationConfig,
    MissingViewPolicy,
    PredictionRecord,
    StudyGroup,
    StudyPrediction,
)


@dataclass(frozen=True)
class EnsembleConfig:
    member_weights: tuple[float, ...]

    def __post_init__(self):
        weights = tuple(float(w) for w in self.member_weights)
        if not weights:
            raise InvalidWeights("ensemble needs at least one member weight")
        if not all(np.isfinite(w) and w > 0 for w in weights):
            raise InvalidWeights(f"ensemble weights must be finite and positive, got {list(weights)}")
        object.__setattr__(self, "member_weights", weights)

    @classmethod
    def equal(cls, n: int) -> "EnsembleConfig":
        return cls((1.0,) * n)


def _convex(stack: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted mean over axis 0, clipped to the per-column input range."""
    out = np.tensordot(weights, stack, axes=1) / weights.sum()
    return np.clip(out, stack.min(axis=0), stack.max(axis=0))


def view_mean(records: Sequence[PredictionRecord]) -> np.ndarray:
    """Componentwise mean of the score vectors of one view."""
    if len(records) == 0:
        raise EmptyView("cannot average an empty view")
    if len(records) == 1:
        return records[0].scores.copy()
    stack = np.stack([r.scores for r in records])
    return np.clip(stack.mean(axis=0), stack.min(axis=0), stack.max(axis=0))


def combine_views(p_f, p_l, config: AggregationConfig) -> np.ndarray:
    """Weighted average of frontal and lateral means; ``None`` marks an absent view."""
    if p_f is None and p_l is None:
        raise BothAbsent("both views are absent")
    if p_f is None or p_l is None:
        if config.missing_view_policy is MissingViewPolicy.ERROR:
            raise MissingView(f"{'frontal' if p_f is None else 'lateral'} view is missing")
        return np.array(p_f if p_l is None else p_l, dtype=np.float64)
    p_f = np.asarray(p_f, dtype=np.float64)
    p_l = np.asarray(p_l, dtype=np.float64)
    if p_f.shape != p_l.shape:
        raise ValueError(f"view vectors differ in length: {p_f.shape} vs {p_l.shape}")
    if config.w_l == 0:
        return p_f.copy()
    if config.w_f == 0:
        return p_l.copy()
    out = (config.w_f * p_f + config.w_l * p_l) / (config.w_f + config.w_l)
    return np.clip(out, np.minimum(p_f, p_l), np.maximum(p_f, p_l))


def aggregate_study(group: StudyGroup, config: AggregationConfig) -> StudyPrediction:
    p_f = view_mean(group.frontal) if group.frontal else None
    p_l = view_mean(group.lateral) if group.lateral else None
    try:
        return StudyPrediction(group.study_id, combine_views(p_f, p_l, config))
    except MissingView as exc:
        raise MissingView(f"study {group.study_id!r}: {exc}") from None


def pooled_study(group: StudyGroup) -> StudyPrediction:
    """Plain mean over every image of the study, ignoring views."""
    return StudyPrediction(group.study_id, view_mean(group.records))


def aggregate_all(
    groups: Sequence[StudyGroup],
    config: AggregationConfig | None = None,
    *,
    pooled: bool = False,
) -> list[StudyPrediction]:
    """Aggregate every group, preserving input order.

    With ``pooled=True`` the view weighting is skipped and each study gets
    the plain mean of all its images.
    """
    if pooled:
        return [pooled_study(g) for g in groups]
    config = config or AggregationConfig()
    return [aggregate_study(g, config) for g in groups]


def ensemble(
    sets: Sequence[Sequence[PredictionRecord]],
    config: EnsembleConfig | None = None,
) -> list[PredictionRecord]:
    """Image-level weighted mean over several models' prediction sets.

    Output order and metadata follow the first set. All sets must cover the
    same image ids with the same study id and view.
    """
    if not sets:
        raise ImageSetMismatch("no prediction sets given")
    config = config or EnsembleConfig.equal(len(sets))
    if len(config.member_weights) != len(sets):
        raise InvalidWeights(f"{len(config.member_weights)} weights for {len(sets)} prediction sets")

    first = sets[0]
    order = {r.image_id: i for i, r in enumerate(first)}
    k = len(first[0].scores) if first else 0
    stack = np.empty((len(sets), len(first), k), dtype=np.float64)
    for m, members in enumerate(sets):
        if len(members) != len(first):
            _raise_mismatch(first, members, m)
        seen = np.zeros(len(first), dtype=bool)
        for r in members:
            i = order.get(r.image_id)
            if i is None or seen[i]:
                _raise_mismatch(first, members, m)
            ref = first[i]
            if r.study_id != ref.study_id or r.view is not ref.view:
                raise MetadataConflict(
                    f"image {r.image_id!r}: set {m + 1} has ({r.study_id}, {r.view}), "
                    f"set 1 has ({ref.study_id}, {ref.view})"
                )
            if len(r.scores) != k:
                raise MetadataConflict(f"image {r.image_id!r}: set {m + 1} has {len(r.scores)} classes, set 1 has {k}")
            seen[i] = True
            stack[m, i] = r.scores

    combined = _convex(stack, np.asarray(config.member_weights)) if len(first) else stack[0]
    return [PredictionRecord(r.image_id, r.study_id, r.view, combined[i]) for i, r in enumerate(first)]


def _raise_mismatch(first, members, m):
    ids_first = [r.image_id for r in first]
    ids_other = [r.image_id for r in members]
    other_set = set(ids_other)
    missing = next((i for i in ids_first if i not in other_set), None)
    if missing is not None:
        raise ImageSetMismatch(f"image {missing!r} is in set 1 but missing from set {m + 1}")
    first_set = set(ids_first)
    extra = next((i for i in ids_other if i not in first_set), None)
    if extra is not None:
        raise ImageSetMismatch(f"image {extra!r} is in set {m + 1} but missing from set 1")
    raise ImageSetMismatch(f"set {m + 1} repeats an image id")
