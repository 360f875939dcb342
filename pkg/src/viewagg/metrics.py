"""Per-class average precision and macro mAP.

AP is the non-interpolated area under the precision-recall curve, with the
curve evaluated only at distinct score values: all items tied at a score
enter the positive set together. That makes AP independent of input order.
Classes with no positive labels are excluded from the macro average rather
than scored as 0.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from .errors import (
    AllClassesExcluded,
    ClassSetMismatch,
    LengthMismatch,
    MissingPrediction,
    UnknownClassInSubset,
    UnknownStudy,
)
from .types import ClassResult, EvalReport, LabelTable, StudyPrediction

THREADS_ENV = "VIEWAGG_THREADS"


def average_precision(scores, labels) -> float | None:
    """Average precision of one class, or ``None`` when it has no positives."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise LengthMismatch(f"{scores.size} scores but {labels.size} labels")
    pos = labels.astype(bool)
    n_pos = int(pos.sum())
    if n_pos == 0:
        return None

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    tp = np.cumsum(pos[order], dtype=np.int64)
    # last index of every tie group
    ends = np.flatnonzero(np.append(s[1:] != s[:-1], True))
    tp_at = tp[ends]
    predicted = ends + 1
    gained = np.diff(tp_at, prepend=0)
    ap = float(np.sum(gained * (tp_at / predicted)) / n_pos)
    return min(ap, 1.0)


def macro_map(per_class: Sequence[float | None]) -> tuple[float, int]:
    included = [ap for ap in per_class if ap is not None]
    if not included:
        raise AllClassesExcluded("every class has zero positives; macro mAP is undefined")
    return float(np.mean(included)), len(included)


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def _column_stats(args):
    scores, labels = args
    n_pos = int(labels.sum())
    return average_precision(scores, labels), n_pos, labels.size - n_pos


def evaluate(
    predictions: Sequence[StudyPrediction],
    labels: LabelTable,
    class_subset: Sequence[str] | None = None,
    *,
    class_names: Sequence[str] | None = None,
) -> EvalReport:
    """Score study-level predictions against ground truth.

    ``class_names`` names the prediction columns; when omitted they are
    assumed to be in ``labels.class_names`` order. Prediction columns are
    matched to label columns by name. Every labelled study must have a
    prediction.
    """
    label_names = labels.class_names
    if class_names is None:
        column_of = np.arange(len(label_names))
    else:
        class_names = tuple(class_names)
        if set(class_names) != set(label_names) or len(class_names) != len(label_names):
            only_pred = sorted(set(class_names) - set(label_names))
            only_lab = sorted(set(label_names) - set(class_names))
            raise ClassSetMismatch(
                f"prediction and label classes differ: only in predictions {only_pred}, only in labels {only_lab}"
            )
        pos = {n: i for i, n in enumerate(class_names)}
        column_of = np.array([pos[n] for n in label_names])

    if class_subset is None:
        chosen = list(range(len(label_names)))
    else:
        unknown = [c for c in class_subset if c not in label_names]
        if unknown:
            raise UnknownClassInSubset(f"classes not in the label file: {unknown}")
        chosen = [label_names.index(c) for c in dict.fromkeys(class_subset)]

    pred_index = {}
    for i, p in enumerate(predictions):
        if p.study_id not in labels:
            raise UnknownStudy(f"prediction for study {p.study_id!r} has no ground-truth row")
        pred_index[p.study_id] = i
    missing = [s for s in labels.study_ids if s not in pred_index]
    if missing:
        raise MissingPrediction(missing)

    if predictions:
        k = len(predictions[0].p_final)
        bad = next((p.study_id for p in predictions if len(p.p_final) != k), None)
        if bad is not None or k != len(label_names):
            raise LengthMismatch(f"prediction vectors do not all have {len(label_names)} classes")
        rows = np.fromiter((pred_index[s] for s in labels.study_ids), dtype=np.intp, count=len(labels))
        score_mat = np.stack([p.p_final for p in predictions])[rows]
    else:
        score_mat = np.empty((0, len(label_names)))

    jobs = [(np.ascontiguousarray(score_mat[:, column_of[j]]), labels.matrix[:, j]) for j in chosen]
    threads = _thread_count()
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            stats = list(pool.map(_column_stats, jobs))
    else:
        stats = [_column_stats(job) for job in jobs]

    per_class = tuple(
        ClassResult(label_names[j], ap, n_pos, n_neg) for j, (ap, n_pos, n_neg) in zip(chosen, stats)
    )
    mean, n_included = macro_map([c.ap for c in per_class])
    return EvalReport(per_class, mean, n_included)
