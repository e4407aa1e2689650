"""Command line entry point.

Subcommands: gen-synthetic, train, extract, evaluate, ablate, oracle-check.
Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import corpus, harness, model, scorers, synthetic
from .corpus import DataFormatError
from .harness import ExperimentConfig, StageError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rationalex",
                     description="Instance-level rationale extraction and evaluation")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", required=True, help="flat key=value config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--workers", type=int, help="worker pool size for per-instance work")
        p.add_argument("--skip", type=float, help="override the length-search skip rate")
        p.add_argument("--divergence", help="override the divergence metric")
        p.add_argument("--out", help="override the output directory")

    common(sub.add_parser("train", help="train the classifier and save model + vocab"))
    extract = sub.add_parser("extract", help="select rationales over the test set")
    common(extract)
    extract.add_argument("--dump-scores", action="store_true",
                         help="also export per-method importance scores")
    common(sub.add_parser("evaluate", help="full run: extract, evaluate, report"))
    ablate = sub.add_parser("ablate", help="shrink the scorer set one method at a time")
    common(ablate)
    ablate.add_argument("--removal-order", help="comma-separated scorer removal order")
    common(sub.add_parser("oracle-check", help="compare the search with the brute-force oracle"))

    gen = sub.add_parser("gen-synthetic", help="generate a planted-signal corpus")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--instances", type=int, default=200)
    gen.add_argument("--classes", type=int, default=2)
    gen.add_argument("--t-min", type=int, default=8)
    gen.add_argument("--t-max", type=int, default=14)
    gen.add_argument("--signal-count", type=int, default=2)
    gen.add_argument("--noise", type=float, default=0.05)
    gen.add_argument("--seed", type=int, default=0)
    return parser


def _load_config(args) -> ExperimentConfig:
    config = harness.parse_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed,
                         selection=replace(config.selection, seed=args.seed))
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    if args.out is not None:
        config = replace(config, out_dir=args.out)
    sel = config.selection
    if args.skip is not None:
        sel = replace(sel, skip=args.skip)
    if args.divergence is not None:
        sel = replace(sel, divergence=args.divergence)
    return replace(config, selection=sel)


def _cmd_gen_synthetic(args) -> int:
    spec = synthetic.SyntheticSpec(
        n_instances=args.instances, num_classes=args.classes,
        t_min=args.t_min, t_max=args.t_max, signal_count=args.signal_count,
        noise=args.noise, seed=args.seed,
    )
    instances = synthetic.generate_corpus(spec)
    train, dev, test = synthetic.split_corpus(instances)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, chunk in (("train", train), ("dev", dev), ("test", test)):
        corpus.write_dataset(out / f"{name}.jsonl", chunk)
        print(f"wrote {out / f'{name}.jsonl'} ({len(chunk)} instances)")
    return EXIT_OK


def _cmd_train(config: ExperimentConfig) -> int:
    prepared = harness.prepare(config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.save_params(prepared.params, out / "model.bin")
    prepared.vocab.save(out / "vocab.tsv")
    train_acc = model.accuracy(prepared.params, prepared.train_set)
    print(f"train accuracy: {train_acc:.3f}")
    if prepared.dev_set:
        print(f"dev accuracy:   {model.accuracy(prepared.params, prepared.dev_set):.3f}")
    print(f"wrote {out / 'model.bin'} and {out / 'vocab.tsv'}")
    return EXIT_OK


def _cmd_extract(config: ExperimentConfig, dump_scores: bool) -> int:
    prepared = harness.prepare(config)
    evaluation_set = prepared.test_set or prepared.train_set
    rationales = harness.select_over(prepared.params, evaluation_set,
                                     config.selection, config.workers)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "rationales.jsonl").open("w", encoding="utf-8") as fh:
        for inst in evaluation_set:
            fh.write(json.dumps(rationales[inst.id].to_record(), sort_keys=True) + "\n")
    print(f"wrote {out / 'rationales.jsonl'} ({len(evaluation_set)} rationales)")
    if dump_scores:
        for name in config.selection.active_scorers:
            records = [scorers.compute_scores(
                name, prepared.params, inst, seed=config.selection.seed,
                ig_steps=config.selection.ig_steps,
                lime_samples=config.selection.lime_samples,
            ) for inst in evaluation_set]
            path = out / f"scores_{name}.jsonl"
            scorers.write_scores(path, records, [inst.id for inst in evaluation_set])
            print(f"wrote {path}")
    return EXIT_OK


def _cmd_evaluate(config: ExperimentConfig) -> int:
    bundle = harness.run_experiment(config)
    written = harness.emit_report(bundle, config.out_dir)
    for path in written:
        print(f"wrote {path}")
    main = bundle.reports[0]
    print(f"{main.label}: norm_suff={main.mean_norm_suff:.3f} "
          f"norm_comp={main.mean_norm_comp:.3f} f1={main.f1_macro:.3f} "
          f"len={main.mean_length_fraction:.3f}")
    return EXIT_OK


def _cmd_ablate(config: ExperimentConfig, removal_order: str | None) -> int:
    order = [s.strip() for s in removal_order.split(",")] if removal_order else None
    bundle = harness.run_ablation(config, order)
    written = harness.emit_report(bundle, config.out_dir)
    for path in written:
        print(f"wrote {path}")
    for report in bundle.reports:
        print(f"{report.label}: norm_comp={report.mean_norm_comp:.3f} "
              f"f1={report.f1_macro:.3f}")
    return EXIT_OK


def _cmd_oracle_check(config: ExperimentConfig) -> int:
    report = harness.oracle_check(config)
    print(f"checked {report.instances_checked} instances: "
          f"{len(report.mismatches)} mismatches")
    if report.mismatches:
        for inst_id in report.mismatches:
            print(f"MISMATCH {inst_id}")
        return EXIT_INTERNAL
    if report.delta_gaps:
        print(f"mean delta gap at skip={config.selection.skip}: "
              f"{report.mean_delta_gap:.6f}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "gen-synthetic":
            return _cmd_gen_synthetic(args)
        config = _load_config(args)
        if args.command == "train":
            return _cmd_train(config)
        if args.command == "extract":
            return _cmd_extract(config, args.dump_scores)
        if args.command == "evaluate":
            return _cmd_evaluate(config)
        if args.command == "ablate":
            return _cmd_ablate(config, args.removal_order)
        if args.command == "oracle-check":
            return _cmd_oracle_check(config)
        raise AssertionError(f"unhandled command {args.command}")
    except (FileNotFoundError, DataFormatError, StageError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
