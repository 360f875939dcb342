"""Frontal:lateral weighting ("PP ratio") parsing and the ratio sweep."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

from .aggregate import aggregate_all
from .errors import ViewAggError
from .metrics import evaluate
from .types import AggregationConfig, EvalReport, LabelTable, MissingViewPolicy, StudyGroup


class RatioParseError(ViewAggError, ValueError):
    pass


_NUMBER = r"\s*(\d+(?:\.\d*)?|\.\d+)\s*"
_RATIO_RE = re.compile(rf"^{_NUMBER}:{_NUMBER}$")


@dataclass(frozen=True)
class PpRatio:
    w_f: float
    w_l: float
    text: str = ""

    @classmethod
    def parse(cls, text: str) -> "PpRatio":
        m = _RATIO_RE.match(text)
        if not m:
            raise RatioParseError(f"malformed ratio {text!r}; expected A:B, e.g. 7:3")
        w_f, w_l = float(m.group(1)), float(m.group(2))
        if not (math.isfinite(w_f) and math.isfinite(w_l)) or w_f + w_l <= 0:
            raise RatioParseError(f"ratio {text!r} must have a positive total weight")
        return cls(w_f, w_l, text.strip())

    @property
    def label(self) -> str:
        return self.text or f"{self.w_f:g}:{self.w_l:g}"

    def config(self, policy: MissingViewPolicy = MissingViewPolicy.USE_PRESENT_VIEW) -> AggregationConfig:
        return AggregationConfig(self.w_f, self.w_l, policy)


def parse_ratio_list(text: str) -> list[PpRatio]:
    parts = [p for p in text.split(",")]
    if not text.strip() or any(not p.strip() for p in parts):
        raise RatioParseError(f"malformed ratio list {text!r}")
    return [PpRatio.parse(p) for p in parts]


NO_WEIGHTING = "None"


def sweep(
    groups: Sequence[StudyGroup],
    labels: LabelTable,
    ratios: Sequence[PpRatio],
    *,
    policy: MissingViewPolicy = MissingViewPolicy.USE_PRESENT_VIEW,
    class_names: Sequence[str] | None = None,
    class_subset: Sequence[str] | None = None,
    include_unweighted: bool = False,
) -> list[tuple[str, EvalReport]]:
    """Evaluate the same grouped predictions under each ratio.

    With ``include_unweighted`` a first row labelled ``None`` scores the
    plain per-study mean that ignores views.
    """
    rows = []
    if include_unweighted:
        preds = aggregate_all(groups, pooled=True)
        rows.append((NO_WEIGHTING, evaluate(preds, labels, class_subset, class_names=class_names)))
    for ratio in ratios:
        preds = aggregate_all(groups, ratio.config(policy))
        rows.append((ratio.label, evaluate(preds, labels, class_subset, class_names=class_names)))
    return rows
