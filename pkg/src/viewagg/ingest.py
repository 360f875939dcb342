"""CSV readers/writers and study grouping.

Three formats are handled:

* image-level predictions: ``image_id,study_id,view,<class_1>,...,<class_K>``
* labels: ``study_id,<class_1>,...,<class_K>`` with 0/1 cells
* study-level predictions: ``study_id,<class_1>,...,<class_K>``

Floats are written with ``repr`` (shortest string that round-trips to the
same 64-bit value), so writing then reading is bit-exact.
"""

from __future__ import annotations

import csv
import os
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateStudyId,
    IoFailure,
    MalformedHeader,
    NonBinaryLabel,
    RowArity,
    UnparsableScore,
)
from .types import (
    LabelTable,
    PredictionRecord,
    StudyGroup,
    StudyPrediction,
    ViewKind,
    validate_prediction_set,
)

PREDICTION_COLUMNS = ("image_id", "study_id", "view")


def _open_rows(path):
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc.strerror or exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedHeader(f"{path}: file is empty") from None
        except UnicodeDecodeError as exc:
            raise MalformedHeader(f"{path}: not valid UTF-8 ({exc.reason})") from None
        try:
            body = [row for row in reader if row]
        except UnicodeDecodeError as exc:
            raise UnparsableScore(f"{path}: not valid UTF-8 ({exc.reason})") from None
    return header, body


def _check_class_names(path, names: Sequence[str]) -> tuple[str, ...]:
    names = tuple(names)
    if not names:
        raise MalformedHeader(f"{path}: header declares no class columns")
    if any(not n for n in names):
        raise MalformedHeader(f"{path}: empty class-name column in header")
    dup = sorted({n for n in names if names.count(n) > 1})
    if dup:
        raise MalformedHeader(f"{path}: duplicate class columns {dup}")
    return names


def _parse_float_block(path, cells: list[list[str]], first_col: int, class_names) -> np.ndarray:
    """Convert a rectangular block of decimal strings to float64.

    Row numbers in diagnostics are 1-based file lines (header is line 1).
    """
    if not cells:
        return np.empty((0, len(class_names)), dtype=np.float64)
    try:
        block = np.array([list(map(float, row)) for row in cells], dtype=np.float64)
    except ValueError:
        pass
    else:
        block.setflags(write=False)
        return block
    for r, row in enumerate(cells):
        for c, text in enumerate(row):
            try:
                float(text)
            except ValueError:
                raise UnparsableScore(
                    f"{path}: row {r + 2}, column {first_col + c + 1} ({class_names[c]}): "
                    f"cannot parse {text!r} as a number"
                ) from None
    raise UnparsableScore(f"{path}: unparsable score")  # pragma: no cover


def read_predictions(path) -> tuple[tuple[str, ...], tuple[PredictionRecord, ...]]:
    """Read an image-level prediction CSV.

    Returns the class names and one validated record per data row, in file
    order.
    """
    header, body = _open_rows(path)
    if tuple(header[:3]) != PREDICTION_COLUMNS:
        raise MalformedHeader(
            f"{path}: header must start with image_id,study_id,view; got {','.join(header[:3])!r}"
        )
    class_names = _check_class_names(path, header[3:])
    width = len(header)
    meta = []
    cells = []
    for r, row in enumerate(body):
        if len(row) != width:
            raise RowArity(f"{path}: row {r + 2} has {len(row)} columns, expected {width}")
        try:
            view = ViewKind.parse(row[2])
        except Exception as exc:
            raise type(exc)(f"{path}: row {r + 2}: {exc}") from None
        meta.append((row[0], row[1], view))
        cells.append(row[3:])
    scores = _parse_float_block(path, cells, 3, class_names)
    records = [
        PredictionRecord(image_id, study_id, view, scores[i])
        for i, (image_id, study_id, view) in enumerate(meta)
    ]
    return class_names, validate_prediction_set(records, len(class_names))


def read_labels(path) -> LabelTable:
    header, body = _open_rows(path)
    if not header or header[0] != "study_id":
        raise MalformedHeader(f"{path}: label header must start with study_id")
    class_names = _check_class_names(path, header[1:])
    width = len(header)
    ids = []
    seen = set()
    cells = []
    for r, row in enumerate(body):
        if len(row) != width:
            raise RowArity(f"{path}: row {r + 2} has {len(row)} columns, expected {width}")
        if row[0] in seen:
            raise DuplicateStudyId(f"{path}: study id {row[0]!r} appears more than once")
        seen.add(row[0])
        ids.append(row[0])
        cells.append(row[1:])
    try:
        values = _parse_float_block(path, cells, 1, class_names)
    except UnparsableScore as exc:
        raise NonBinaryLabel(str(exc)) from None
    bad = np.argwhere((values != 0.0) & (values != 1.0))
    if len(bad):
        r, c = bad[0]
        raise NonBinaryLabel(
            f"{path}: row {r + 2}, column {c + 2} ({class_names[c]}): label {cells[r][c]!r} is not 0 or 1"
        )
    return LabelTable(class_names, tuple(ids), values)


def read_study_predictions(path) -> tuple[tuple[str, ...], tuple[StudyPrediction, ...]]:
    header, body = _open_rows(path)
    if not header or header[0] != "study_id":
        raise MalformedHeader(f"{path}: study-level header must start with study_id")
    class_names = _check_class_names(path, header[1:])
    width = len(header)
    ids = []
    seen = set()
    cells = []
    for r, row in enumerate(body):
        if len(row) != width:
            raise RowArity(f"{path}: row {r + 2} has {len(row)} columns, expected {width}")
        if row[0] in seen:
            raise DuplicateStudyId(f"{path}: study id {row[0]!r} appears more than once")
        seen.add(row[0])
        ids.append(row[0])
        cells.append(row[1:])
    scores = _parse_float_block(path, cells, 1, class_names)
    return class_names, tuple(StudyPrediction(s, scores[i]) for i, s in enumerate(ids))


def group_by_study(records: Iterable[PredictionRecord]) -> list[StudyGroup]:
    """Partition records by study id.

    Groups come back sorted by study id (code-point order, which equals
    UTF-8 byte order); records keep their input order within each view.
    """
    buckets: dict[str, tuple[list, list]] = {}
    for r in records:
        front, lat = buckets.setdefault(r.study_id, ([], []))
        (front if r.view is ViewKind.FRONTAL else lat).append(r)
    return [StudyGroup(s, tuple(buckets[s][0]), tuple(buckets[s][1])) for s in sorted(buckets)]


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_rows(path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    tmp = f"{os.fspath(path)}.tmp"
    try:
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoFailure(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_study_predictions(path, class_names: Sequence[str], rows: Sequence[tuple[str, Sequence[float]]]) -> None:
    k = len(class_names)
    rows = [(s, np.asarray(v, dtype=np.float64)) for s, v in rows]
    for s, v in rows:
        if v.shape != (k,):
            raise ValueError(f"study {s!r}: vector of length {v.size}, expected {k}")
    _write_rows(path, ["study_id", *class_names], ([s, *map(_fmt, v)] for s, v in rows))


def write_predictions(path, class_names: Sequence[str], records: Sequence[PredictionRecord]) -> None:
    k = len(class_names)
    for r in records:
        if len(r.scores) != k:
            raise ValueError(f"image {r.image_id!r}: vector of length {len(r.scores)}, expected {k}")
    _write_rows(
        path,
        [*PREDICTION_COLUMNS, *class_names],
        ([r.image_id, r.study_id, str(r.view), *map(_fmt, r.scores)] for r in records),
    )


def write_labels(path, labels: LabelTable) -> None:
    _write_rows(
        path,
        ["study_id", *labels.class_names],
        ([s, *map(str, labels.matrix[i].tolist())] for i, s in enumerate(labels.study_ids)),
    )
