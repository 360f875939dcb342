"""Text, JSON and CSV renderings of evaluation and sweep results."""

from __future__ import annotations

import csv
import io
import json
from typing import Sequence

from .types import EvalReport


def report_to_dict(report: EvalReport) -> dict:
    return {
        "classes": [
            {"name": c.name, "ap": c.ap, "n_pos": c.n_pos, "n_neg": c.n_neg} for c in report.per_class
        ],
        "macro_map": report.macro_map,
        "n_included": report.n_included_classes,
    }


def report_json(report: EvalReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def report_table(report: EvalReport) -> str:
    width = max([len("class")] + [len(c.name) for c in report.per_class])
    lines = [f"{'class':<{width}}  {'AP':>8}  {'n_pos':>7}  {'n_neg':>7}"]
    lines.append("-" * len(lines[0]))
    for c in report.per_class:
        ap = "excluded" if c.ap is None else f"{c.ap:.4f}"
        lines.append(f"{c.name:<{width}}  {ap:>8}  {c.n_pos:>7d}  {c.n_neg:>7d}")
    lines.append("-" * len(lines[0]))
    lines.append(f"macro mAP {report.macro_map:.4f} over {report.n_included_classes} of {len(report.per_class)} classes")
    return "\n".join(lines) + "\n"


def sweep_to_dict(rows: Sequence[tuple[str, EvalReport]]) -> dict:
    return {
        "rows": [
            {"pp_ratio": label, "macro_map": rep.macro_map, "n_included": rep.n_included_classes}
            for label, rep in rows
        ]
    }


def sweep_json(rows) -> str:
    return json.dumps(sweep_to_dict(rows), indent=2) + "\n"


def sweep_table(rows) -> str:
    lines = [f"{'PP Ratio':<10}  {'mAP':>8}", "-" * 20]
    lines += [f"{label:<10}  {rep.macro_map:>8.4f}" for label, rep in rows]
    return "\n".join(lines) + "\n"


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["pp_ratio", "macro_map", "n_included"])
    for label, rep in rows:
        writer.writerow([label, repr(rep.macro_map), rep.n_included_classes])
    return buf.getvalue()
