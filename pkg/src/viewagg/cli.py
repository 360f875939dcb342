"""Command-line entry point: ``viewagg <subcommand> ...``.

Exit codes: 0 success, 1 domain error (bad input data, failed check),
2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import ingest, report
from .aggregate import EnsembleConfig, aggregate_all, ensemble
from .asl import AslParams, gradient_check
from .errors import IoFailure, MalformedHeader, ViewAggError
from .metrics import evaluate
from .sweep import PpRatio, parse_ratio_list, sweep
from .synth import SynthConfig, generate_models
from .types import MissingViewPolicy, PredictionRecord

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _emit(text: str, out: str | None) -> None:
    if out:
        try:
            Path(out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot write {out}: {exc.strerror or exc}") from exc
    else:
        sys.stdout.write(text)


def _read_subset(path) -> list[str] | None:
    if path is None:
        return None
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc.strerror or exc}") from exc
    return [s.strip() for s in lines if s.strip() and not s.lstrip().startswith("#")]


def _policy(text: str) -> MissingViewPolicy:
    return MissingViewPolicy(text)


# -- subcommands ------------------------------------------------------------

def cmd_synth(args) -> int:
    config = SynthConfig(
        n_studies=args.n_studies,
        k_classes=args.k_classes,
        frontal_noise=args.frontal_noise,
        lateral_noise=args.lateral_noise,
        p_has_lateral=args.p_has_lateral,
        seed=args.seed,
        signal=args.signal,
    )
    sets, labels = generate_models(config, args.n_models)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.n_models == 1:
        names = ["predictions.csv"]
    else:
        names = [f"predictions_{m + 1}.csv" for m in range(args.n_models)]
    for name, records in zip(names, sets):
        ingest.write_predictions(out / name, labels.class_names, records)
    ingest.write_labels(out / "labels.csv", labels)
    print(f"wrote {', '.join(names)} and labels.csv to {out} "
          f"({len(labels)} studies, {len(sets[0])} images, {len(labels.class_names)} classes)",
          file=sys.stderr)
    return EXIT_OK


def cmd_aggregate(args) -> int:
    if args.no_view_weighting:
        ratio = None
    else:
        ratio = PpRatio.parse(args.pp_ratio or "1:1")
    class_names, records = ingest.read_predictions(args.predictions)
    groups = ingest.group_by_study(records)
    if ratio is None:
        preds = aggregate_all(groups, pooled=True)
    else:
        preds = aggregate_all(groups, ratio.config(_policy(args.missing_view)))
    ingest.write_study_predictions(args.out, class_names, [(p.study_id, p.p_final) for p in preds])
    return EXIT_OK


def cmd_ensemble(args) -> int:
    if len(args.predictions) < 2:
        args.parser.error("ensemble needs at least two --predictions files")
    weights = None
    if args.weights:
        try:
            weights = [float(w) for w in args.weights.split(",")]
        except ValueError:
            args.parser.error(f"--weights must be a comma-separated list of numbers, got {args.weights!r}")
        if len(weights) != len(args.predictions):
            args.parser.error(f"{len(weights)} weights given for {len(args.predictions)} prediction files")
    config = EnsembleConfig(tuple(weights)) if weights else EnsembleConfig.equal(len(args.predictions))

    class_names, first = ingest.read_predictions(args.predictions[0])
    sets = [first]
    for path in args.predictions[1:]:
        names, records = ingest.read_predictions(path)
        sets.append(_reorder_classes(records, names, class_names, path))
    ingest.write_predictions(args.out, class_names, ensemble(sets, config))
    return EXIT_OK


def _reorder_classes(records, names, target, path):
    if names == target:
        return records
    if sorted(names) != sorted(target):
        raise MalformedHeader(f"{path}: class columns differ from the first prediction file")
    idx = [names.index(n) for n in target]
    return tuple(PredictionRecord(r.image_id, r.study_id, r.view, r.scores[idx]) for r in records)


def cmd_evaluate(args) -> int:
    subset = _read_subset(args.classes)
    class_names, preds = ingest.read_study_predictions(args.predictions)
    labels = ingest.read_labels(args.labels)
    rep = evaluate(preds, labels, subset, class_names=class_names)
    _emit(report.report_json(rep) if args.report == "json" else report.report_table(rep), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    ratios = parse_ratio_list(args.ratios)
    subset = _read_subset(args.classes)
    class_names, records = ingest.read_predictions(args.predictions)
    labels = ingest.read_labels(args.labels)
    rows = sweep(
        ingest.group_by_study(records),
        labels,
        ratios,
        policy=_policy(args.missing_view),
        class_names=class_names,
        class_subset=subset,
        include_unweighted=args.include_none,
    )
    render = {"table": report.sweep_table, "json": report.sweep_json, "csv": report.sweep_csv}[args.report]
    _emit(render(rows), args.out)
    return EXIT_OK


def cmd_loss_check(args) -> int:
    try:
        params = AslParams(args.gamma_pos, args.gamma_neg, args.margin, args.clip_eps)
    except ValueError as exc:
        args.parser.error(str(exc))
    result = gradient_check(args.n, args.seed, params)
    ok = result.max_rel_error <= args.tolerance
    if args.json:
        import json

        print(json.dumps({
            "n": result.n,
            "seed": args.seed,
            "gamma_pos": params.gamma_pos,
            "gamma_neg": params.gamma_neg,
            "margin": params.margin,
            "forward_mean": result.forward_mean,
            "bce_mean": result.bce_mean,
            "max_rel_grad_error": result.max_rel_error,
            "tolerance": args.tolerance,
            "passed": ok,
        }, indent=2))
    else:
        print(f"draws                    {result.n}")
        print(f"mean asymmetric loss     {result.forward_mean!r}")
        print(f"mean binary CE (ref)     {result.bce_mean!r}")
        print(f"max rel. gradient error  {result.max_rel_error:.3e}  (tolerance {args.tolerance:g})")
        print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_DOMAIN


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="viewagg",
        description="Multi-view aggregation, ensembling and macro-mAP evaluation of prediction tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic predictions/labels pair")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--n-studies", type=int, default=1000)
    p.add_argument("--k-classes", type=_positive_int, default=20)
    p.add_argument("--frontal-noise", type=float, default=1.5)
    p.add_argument("--lateral-noise", type=float, default=3.0)
    p.add_argument("--p-has-lateral", type=float, default=0.8)
    p.add_argument("--signal", type=float, default=2.0)
    p.add_argument("--n-models", type=_positive_int, default=1,
                   help="number of prediction sets sharing images and labels")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("aggregate", help="image-level -> study-level predictions")
    p.add_argument("--predictions", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--pp-ratio", help="frontal:lateral weights, e.g. 7:3 (default 1:1)")
    g.add_argument("--no-view-weighting", action="store_true",
                   help="plain mean over all images of a study, ignoring views")
    p.add_argument("--missing-view", choices=["use-present", "error"], default="use-present")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("ensemble", help="image-level weighted mean of several prediction files")
    p.add_argument("--predictions", nargs="+", required=True)
    p.add_argument("--weights", help="comma-separated positive weights, one per file (default equal)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("evaluate", help="per-class AP and macro mAP of study-level predictions")
    p.add_argument("--predictions", required=True, help="study-level CSV")
    p.add_argument("--labels", required=True)
    p.add_argument("--classes", help="file with one class name per line to restrict evaluation")
    p.add_argument("--report", choices=["table", "json"], default="table")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="macro mAP for several frontal:lateral ratios")
    p.add_argument("--predictions", required=True, help="image-level CSV")
    p.add_argument("--labels", required=True)
    p.add_argument("--ratios", default="5:5,7:3,8:2")
    p.add_argument("--include-none", action="store_true", help="add a row without view weighting")
    p.add_argument("--missing-view", choices=["use-present", "error"], default="use-present")
    p.add_argument("--classes")
    p.add_argument("--report", choices=["table", "json", "csv"], default="table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("loss-check", help="finite-difference check of the asymmetric loss gradient")
    p.add_argument("--gamma-pos", type=float, default=0.0)
    p.add_argument("--gamma-neg", type=float, default=4.0)
    p.add_argument("--margin", type=float, default=0.05)
    p.add_argument("--clip-eps", type=float, default=1e-8)
    p.add_argument("--n", type=_positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_loss_check)

    for action in sub.choices.values():
        action.set_defaults(parser=action)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ViewAggError, ValueError) as exc:
        print(f"viewagg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
