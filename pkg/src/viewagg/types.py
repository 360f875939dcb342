"""Core domain types shared across the package.

All types are immutable once constructed. Score vectors are stored as
read-only ``float64`` arrays so they can be shared between workers freely.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ClassCountMismatch,
    DuplicateImageId,
    InvalidWeights,
    ScoreOutOfRange,
    UnknownView,
    ValidationError,
)


def _frozen_vector(values, dtype=np.float64) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {arr.shape}")
    # read-only input (e.g. a row of a frozen matrix) is shared, not copied
    if arr.flags.writeable:
        arr = arr.copy()
        arr.setflags(write=False)
    return arr


class ViewKind(enum.Enum):
    FRONTAL = "frontal"
    LATERAL = "lateral"

    @classmethod
    def parse(cls, text: str) -> "ViewKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise UnknownView(f"unknown view {text!r}; expected 'frontal' or 'lateral'") from None

    def __str__(self) -> str:
        return self.value


class MissingViewPolicy(enum.Enum):
    USE_PRESENT_VIEW = "use-present"
    ERROR = "error"


@dataclass(frozen=True, eq=False)
class PredictionRecord:
    """One image's class-probability vector."""

    image_id: str
    study_id: str
    view: ViewKind
    scores: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "scores", _frozen_vector(self.scores))

    def __eq__(self, other):
        if not isinstance(other, PredictionRecord):
            return NotImplemented
        return (
            self.image_id == other.image_id
            and self.study_id == other.study_id
            and self.view is other.view
            and np.array_equal(self.scores, other.scores)
        )

    __hash__ = None


@dataclass(frozen=True)
class StudyGroup:
    study_id: str
    frontal: tuple[PredictionRecord, ...] = ()
    lateral: tuple[PredictionRecord, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "frontal", tuple(self.frontal))
        object.__setattr__(self, "lateral", tuple(self.lateral))
        if not self.frontal and not self.lateral:
            raise ValidationError(f"study {self.study_id!r} has no images")
        ks = {len(r.scores) for r in self.records}
        if len(ks) != 1:
            raise ClassCountMismatch(f"study {self.study_id!r} mixes class counts {sorted(ks)}")
        for r in self.records:
            if r.study_id != self.study_id:
                raise ValidationError(f"record {r.image_id!r} belongs to {r.study_id!r}, not {self.study_id!r}")
        if any(r.view is not ViewKind.FRONTAL for r in self.frontal) or any(
            r.view is not ViewKind.LATERAL for r in self.lateral
        ):
            raise ValidationError(f"study {self.study_id!r} has records filed under the wrong view")

    @property
    def records(self) -> tuple[PredictionRecord, ...]:
        return self.frontal + self.lateral

    @property
    def n_frontal(self) -> int:
        return len(self.frontal)

    @property
    def n_lateral(self) -> int:
        return len(self.lateral)


@dataclass(frozen=True, eq=False)
class LabelTable:
    """Binary ground truth, one row per study.

    Stored as a dense ``uint8`` matrix with ``study_ids[i]`` naming row ``i``.
    """

    class_names: tuple[str, ...]
    study_ids: tuple[str, ...]
    matrix: np.ndarray
    _index: Mapping[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        names = tuple(self.class_names)
        ids = tuple(self.study_ids)
        if any(not n for n in names):
            raise ValidationError("class names must be non-empty")
        if len(set(names)) != len(names):
            raise ValidationError("class names must be unique")
        mat = np.array(self.matrix, dtype=np.float64).reshape(len(ids), len(names))
        if not np.isin(mat, (0.0, 1.0)).all():
            raise ValidationError("label values must be 0 or 1")
        mat = mat.astype(np.uint8)
        mat.setflags(write=False)
        index = {s: i for i, s in enumerate(ids)}
        if len(index) != len(ids):
            raise ValidationError("study ids in a label table must be unique")
        object.__setattr__(self, "class_names", names)
        object.__setattr__(self, "study_ids", ids)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_rows(cls, class_names: Sequence[str], rows: Mapping[str, Sequence[int]]) -> "LabelTable":
        ids = list(rows)
        mat = np.array([rows[s] for s in ids], dtype=np.float64).reshape(len(ids), len(class_names))
        return cls(tuple(class_names), tuple(ids), mat)

    @property
    def rows(self) -> dict[str, np.ndarray]:
        return {s: self.matrix[i] for s, i in self._index.items()}

    def row_index(self, study_id: str) -> int:
        return self._index[study_id]

    def __contains__(self, study_id) -> bool:
        return study_id in self._index

    def __len__(self) -> int:
        return len(self.study_ids)

    def __eq__(self, other):
        if not isinstance(other, LabelTable):
            return NotImplemented
        return (
            self.class_names == other.class_names
            and self.study_ids == other.study_ids
            and np.array_equal(self.matrix, other.matrix)
        )

    __hash__ = None


def _check_weight(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise InvalidWeights(f"{name} must be a finite non-negative number, got {value!r}")
    return value


@dataclass(frozen=True)
class AggregationConfig:
    """Frontal/lateral weights for the cross-view weighted average."""

    w_f: float = 1.0
    w_l: float = 1.0
    missing_view_policy: MissingViewPolicy = MissingViewPolicy.USE_PRESENT_VIEW

    def __post_init__(self):
        object.__setattr__(self, "w_f", _check_weight("w_f", self.w_f))
        object.__setattr__(self, "w_l", _check_weight("w_l", self.w_l))
        if self.w_f + self.w_l <= 0:
            raise InvalidWeights("w_f + w_l must be positive")


@dataclass(frozen=True, eq=False)
class StudyPrediction:
    study_id: str
    p_final: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_final", _frozen_vector(self.p_final))

    def __eq__(self, other):
        if not isinstance(other, StudyPrediction):
            return NotImplemented
        return self.study_id == other.study_id and np.array_equal(self.p_final, other.p_final)

    __hash__ = None


@dataclass(frozen=True)
class ClassResult:
    name: str
    ap: float | None  # None means the class had no positives and was excluded
    n_pos: int
    n_neg: int

    @property
    def excluded(self) -> bool:
        return self.ap is None


@dataclass(frozen=True)
class EvalReport:
    per_class: tuple[ClassResult, ...]
    macro_map: float
    n_included_classes: int

    def ap_by_class(self) -> dict[str, float | None]:
        return {c.name: c.ap for c in self.per_class}


def validate_prediction_set(records: Iterable[PredictionRecord], expected_k: int) -> tuple[PredictionRecord, ...]:
    """Check score range, vector length and image-id uniqueness.

    Returns the records as a tuple; raises on the first violating record.
    """
    records = tuple(records)
    seen: set[str] = set()
    for r in records:
        if len(r.scores) != expected_k:
            raise ClassCountMismatch(
                f"image {r.image_id!r}: {len(r.scores)} scores, expected {expected_k}"
            )
        # NaN fails both comparisons, so it is caught here too
        if not ((r.scores >= 0.0) & (r.scores <= 1.0)).all():
            bad = next(float(s) for s in r.scores if not 0.0 <= s <= 1.0)
            raise ScoreOutOfRange(f"image {r.image_id!r}: score {bad!r} outside [0, 1]")
        if r.image_id in seen:
            raise DuplicateImageId(f"image id {r.image_id!r} appears more than once")
        seen.add(r.image_id)
    return records
