"""Experiment orchestration: train, extract, evaluate, ablate, time, emit.

Runs are driven by a flat key=value config file and are deterministic given
the seed: re-running an identical config produces byte-identical output
files.  Wall-clock measurement is therefore opt-in (``timing_skips``); when
enabled, timing.csv is the one file exempt from byte-identity.
"""

from __future__ import annotations

import hashlib
import json
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path

import numpy as np
import scipy

from . import corpus, faithfulness, model, oracle, selection
from .corpus import DataFormatError, EncodedInstance, Vocab
from .faithfulness import FaithfulnessReport, build_report, relative_improvement
from .model import ModelParams, TrainConfig
from .selection import PassCounter, Rationale, SelectionConfig, select_all

# Conventional rationale-length budgets for the common benchmark corpora,
# applied when a config names the dataset but leaves ratio unset.
DATASET_RATIO_DEFAULTS = {
    "sst": 0.20,
    "ag": 0.20,
    "evinf": 0.10,
    "multirc": 0.20,
}


class StageError(RuntimeError):
    """A pipeline stage failed; message carries the stage and instance id."""


@dataclass(frozen=True)
class ExperimentConfig:
    train_path: str = ""
    dev_path: str = ""
    test_path: str = ""
    dataset: str = ""
    num_classes: int = 2
    min_freq: int = 1
    embed_dim: int = 16
    hidden_dim: int = 16
    lr: float = 0.5
    epochs: int = 30
    batch: int = 8
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    gold_label_f1: bool = False
    out_dir: str = "out"
    seed: int = 0
    workers: int = 1
    timing_skips: tuple[float, ...] = ()
    model_path: str = ""


_SELECTION_KEYS = {
    "scorer_mode": str, "length_mode": str, "type_mode": str,
    "rationale_type": str, "ratio": float, "skip": float, "divergence": str,
    "ig_steps": int, "lime_samples": int,
}
_EXPERIMENT_KEYS = {
    "train_path": str, "dev_path": str, "test_path": str, "dataset": str,
    "num_classes": int, "min_freq": int, "embed_dim": int, "hidden_dim": int,
    "lr": float, "epochs": int, "batch": int, "gold_label_f1": bool,
    "out_dir": str, "seed": int, "workers": int, "model_path": str,
}


def _parse_bool(text: str) -> bool:
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise DataFormatError(f"expected a boolean, got {text!r}")


def parse_config(path) -> ExperimentConfig:
    """Read a flat ``key = value`` config file (``#`` starts a comment)."""
    values, linenos = {}, {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise DataFormatError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        values[key] = raw
        linenos[key] = lineno

    exp_kwargs, sel_kwargs = {}, {}
    for key, raw in values.items():
        try:
            if key in _EXPERIMENT_KEYS:
                caster = _EXPERIMENT_KEYS[key]
                exp_kwargs[key] = _parse_bool(raw) if caster is bool else caster(raw)
            elif key in _SELECTION_KEYS:
                sel_kwargs[key] = _SELECTION_KEYS[key](raw)
            elif key == "scorers":
                sel_kwargs["scorers"] = tuple(s.strip() for s in raw.split(",") if s.strip())
            elif key == "early_stop_threshold":
                sel_kwargs["early_stop_threshold"] = \
                    None if raw.lower() == "none" else float(raw)
            elif key == "selection_seed":
                sel_kwargs["seed"] = int(raw)
            elif key == "timing_skips":
                exp_kwargs["timing_skips"] = tuple(float(s) for s in raw.split(",")
                                                   if s.strip())
            else:
                raise DataFormatError(f"{path}:{linenos[key]}: unknown config key {key!r}")
        except DataFormatError:
            raise
        except ValueError as exc:
            raise DataFormatError(
                f"{path}:{linenos[key]}: bad value for {key!r}: {exc}") from exc

    dataset = exp_kwargs.get("dataset", "")
    if "ratio" not in sel_kwargs and dataset.lower() in DATASET_RATIO_DEFAULTS:
        sel_kwargs["ratio"] = DATASET_RATIO_DEFAULTS[dataset.lower()]
    sel_kwargs.setdefault("seed", exp_kwargs.get("seed", 0))
    return ExperimentConfig(selection=SelectionConfig(**sel_kwargs), **exp_kwargs)


def config_to_text(config: ExperimentConfig) -> str:
    """Canonical flat serialization; also the input to the config hash."""
    pairs = []
    for key in sorted(_EXPERIMENT_KEYS):
        value = getattr(config, key)
        pairs.append((key, str(value).lower() if isinstance(value, bool) else str(value)))
    pairs.append(("timing_skips", ",".join(repr(s) for s in config.timing_skips)))
    sel = config.selection
    for key in sorted(_SELECTION_KEYS):
        pairs.append((key, str(getattr(sel, key))))
    pairs.append(("scorers", ",".join(sel.scorers)))
    pairs.append(("early_stop_threshold", str(sel.early_stop_threshold)))
    pairs.append(("selection_seed", str(sel.seed)))
    return "".join(f"{k} = {v}\n" for k, v in sorted(pairs))


def write_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(config_to_text(config), encoding="utf-8")


@dataclass
class PreparedRun:
    params: ModelParams
    vocab: Vocab
    train_set: list[EncodedInstance]
    test_set: list[EncodedInstance]
    dev_set: list[EncodedInstance]


@dataclass
class ReportBundle:
    reports: list[FaithfulnessReport]
    ri_rows: list[dict]
    timing_rows: list[dict]
    manifest: dict
    ablation: list[FaithfulnessReport] | None = None


def _manifest(config: ExperimentConfig) -> dict:
    text = config_to_text(config)
    return {
        "config": {line.split(" = ")[0]: line.split(" = ", 1)[1]
                   for line in text.strip().splitlines()},
        "config_hash": hashlib.sha256(text.encode("utf-8")).hexdigest(),
        "seed": config.seed,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "rationalex": "0.1.0",
        },
    }


def prepare(config: ExperimentConfig) -> PreparedRun:
    """Load data, build the vocabulary, and train or load the model."""
    try:
        train_raw = corpus.load_dataset(config.train_path)
        test_raw = corpus.load_dataset(config.test_path) if config.test_path else []
        dev_raw = corpus.load_dataset(config.dev_path) if config.dev_path else []
    except (OSError, DataFormatError) as exc:
        raise StageError(f"stage load-data failed: {exc}") from exc

    vocab = corpus.build_vocab(train_raw, config.min_freq)
    try:
        train_set = corpus.encode_dataset(train_raw, vocab, config.num_classes)
        test_set = corpus.encode_dataset(test_raw, vocab, config.num_classes)
        dev_set = corpus.encode_dataset(dev_raw, vocab, config.num_classes)
    except ValueError as exc:
        raise StageError(f"stage encode failed: {exc}") from exc

    if config.model_path:
        params = model.load_params(config.model_path)
    else:
        params = model.train(train_set, TrainConfig(
            vocab_size=vocab.size, num_classes=config.num_classes,
            embed_dim=config.embed_dim, hidden_dim=config.hidden_dim,
            lr=config.lr, epochs=config.epochs, batch=config.batch,
            seed=config.seed,
        ))
    return PreparedRun(params=params, vocab=vocab, train_set=train_set,
                       test_set=test_set, dev_set=dev_set)


def _select_worker(inst: EncodedInstance, params: ModelParams,
                   sel: SelectionConfig) -> Rationale:
    return select_all(params, inst, sel)


def select_over(params: ModelParams, dataset: list[EncodedInstance],
                sel: SelectionConfig, workers: int = 1) -> dict[str, Rationale]:
    """Per-instance selection, optionally fanned out to a process pool.

    Results are reduced in dataset order, so worker count never changes the
    output.
    """
    if workers <= 1:
        out = {}
        for inst in dataset:
            try:
                out[inst.id] = select_all(params, inst, sel)
            except Exception as exc:
                raise StageError(f"stage extract failed for instance {inst.id!r}: {exc}") from exc
        return out
    fn = partial(_select_worker, params=params, sel=sel)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(fn, dataset))
    return {inst.id: rat for inst, rat in zip(dataset, results)}


def _baseline_configs(sel: SelectionConfig) -> list[tuple[str, SelectionConfig]]:
    """One all-fixed configuration per (scorer, type) pair the search covers."""
    if (sel.scorer_mode == "fixed" and sel.length_mode == "fixed"
            and sel.type_mode == "fixed"):
        return []
    baselines = []
    for name in sel.active_scorers:
        for rationale_type in sel.active_types:
            fixed = replace(sel, scorer_mode="fixed", scorers=(name,),
                            length_mode="fixed", type_mode="fixed",
                            rationale_type=rationale_type)
            baselines.append((f"fixed_{name}_{rationale_type}", fixed))
    return baselines


def _main_label(sel: SelectionConfig) -> str:
    modes = [sel.scorer_mode == "instance_level" and "scorer",
             sel.length_mode == "instance_level" and "length",
             sel.type_mode == "instance_level" and "type"]
    chosen = [m for m in modes if m]
    if not chosen:
        return f"fixed_{sel.scorers[0]}_{sel.rationale_type}"
    return "instance_level_" + "+".join(chosen)


def time_extraction(params: ModelParams, dataset: list[EncodedInstance],
                    sel: SelectionConfig, skips: tuple[float, ...]) -> list[dict]:
    """Mean seconds per instance and erasure pass counts for each skip rate.

    The analytic pass count (grid size plus the reference pass, summed over
    instances) is reported next to the measured one; they must agree.
    """
    rows = []
    for skip in skips:
        cfg = replace(sel, skip=skip)
        counter = PassCounter()
        analytic = 0
        for inst in dataset:
            if cfg.length_mode == "instance_level":
                n_lengths = len(selection.candidate_lengths(inst.length, cfg.ratio, skip))
            else:
                n_lengths = 1
            analytic += 1 + (len(cfg.active_scorers) * n_lengths * len(cfg.active_types))
        start = time.perf_counter()
        for inst in dataset:
            select_all(params, inst, cfg, counter=counter)
        elapsed = time.perf_counter() - start
        rows.append({
            "skip": skip,
            "seconds_per_instance": elapsed / len(dataset),
            "passes": counter.count,
            "analytic_passes": analytic,
        })
    return rows


def run_experiment(config: ExperimentConfig) -> ReportBundle:
    """Full pipeline: prepare, extract (instance-level plus every fixed
    baseline the search covers), evaluate all three faithfulness measures,
    and compute relative-improvement ratios against each baseline."""
    prepared = prepare(config)
    params = prepared.params
    evaluation_set = prepared.test_set or prepared.train_set
    sel = config.selection

    main_label = _main_label(sel)
    main_rationales = select_over(params, evaluation_set, sel, config.workers)

    reports = []
    try:
        reports.append(build_report(
            params, evaluation_set, main_rationales, label=main_label,
            config={"selection": main_label, "divergence": sel.divergence,
                    "ratio": sel.ratio, "skip": sel.skip},
            use_gold_labels=config.gold_label_f1,
        ))
    except Exception as exc:
        raise StageError(f"stage evaluate failed for {main_label}: {exc}") from exc

    ri_rows = []
    for label, baseline_cfg in _baseline_configs(sel):
        baseline_rationales = select_over(params, evaluation_set, baseline_cfg,
                                          config.workers)
        report = build_report(
            params, evaluation_set, baseline_rationales, label=label,
            config={"selection": label, "divergence": sel.divergence,
                    "ratio": sel.ratio, "skip": sel.skip},
            use_gold_labels=config.gold_label_f1,
        )
        reports.append(report)
        ratios = relative_improvement(report, reports[0])
        ri_rows.append({"baseline": label, **ratios})

    timing_rows = []
    if config.timing_skips:
        timing_rows = time_extraction(params, evaluation_set, sel, config.timing_skips)

    return ReportBundle(reports=reports, ri_rows=ri_rows, timing_rows=timing_rows,
                        manifest=_manifest(config))


def run_ablation(config: ExperimentConfig,
                 removal_order: list[str] | None = None) -> ReportBundle:
    """Selection with progressively fewer scoring methods, one report per set."""
    prepared = prepare(config)
    evaluation_set = prepared.test_set or prepared.train_set
    reports = faithfulness.ablate_scorers(prepared.params, evaluation_set,
                                          config.selection, removal_order)
    return ReportBundle(reports=list(reports), ri_rows=[], timing_rows=[],
                        manifest=_manifest(config), ablation=list(reports))


@dataclass
class OracleCheckReport:
    instances_checked: int
    mismatches: list[str]
    delta_gaps: list[float]

    @property
    def mean_delta_gap(self) -> float | None:
        return float(np.mean(self.delta_gaps)) if self.delta_gaps else None


def oracle_check(config: ExperimentConfig) -> OracleCheckReport:
    """Compare the production search at skip=0 against the brute-force oracle
    on every instance; with skip > 0 also report how much divergence the
    coarser search gives up per instance (never negative)."""
    prepared = prepare(config)
    evaluation_set = prepared.test_set or prepared.train_set
    sel = config.selection
    exhaustive_cfg = replace(sel, skip=0.0)

    mismatches = []
    gaps = []
    for inst in evaluation_set:
        fast = select_all(prepared.params, inst, exhaustive_cfg)
        slow = oracle.brute_force_select(prepared.params, inst, exhaustive_cfg)
        if fast.to_record() != slow.to_record():
            mismatches.append(inst.id)
        if sel.skip > 0.0:
            skipped = select_all(prepared.params, inst, sel)
            gaps.append(fast.delta - skipped.delta)
    return OracleCheckReport(
        instances_checked=len(evaluation_set),
        mismatches=mismatches,
        delta_gaps=gaps,
    )


def _fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def emit_report(bundle: ReportBundle, out_dir) -> list[Path]:
    """Write the bundle as deterministic CSV/JSONL files and return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def write(name: str, text: str):
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(path)

    rows = ["config_id,mean_norm_suff,mean_norm_comp,f1_macro,mean_length_fraction"]
    for report in bundle.reports:
        rows.append(",".join([
            report.label, _fmt(report.mean_norm_suff), _fmt(report.mean_norm_comp),
            _fmt(report.f1_macro), _fmt(report.mean_length_fraction),
        ]))
    write("aggregate.csv", "\n".join(rows) + "\n")

    lines = []
    for report in bundle.reports:
        for ev in report.evals:
            lines.append(json.dumps({"config_id": report.label, **ev.to_record()},
                                    sort_keys=True))
    write("instances.jsonl", "\n".join(lines) + "\n" if lines else "")

    lines = []
    for report in bundle.reports:
        for ev in report.evals:
            rationale = report.rationales[ev.id]
            lines.append(json.dumps({"config_id": report.label, **rationale.to_record()},
                                    sort_keys=True))
    write("rationales.jsonl", "\n".join(lines) + "\n" if lines else "")

    if bundle.ri_rows:
        rows = ["baseline,norm_suff_ri,norm_comp_ri,f1_ri"]
        for row in bundle.ri_rows:
            rows.append(",".join([row["baseline"], _fmt(row["norm_suff_ri"]),
                                  _fmt(row["norm_comp_ri"]), _fmt(row["f1_ri"])]))
        write("ri.csv", "\n".join(rows) + "\n")

    if bundle.timing_rows:
        rows = ["skip,seconds_per_instance,passes,analytic_passes"]
        for row in bundle.timing_rows:
            rows.append(",".join([_fmt(row["skip"]), _fmt(row["seconds_per_instance"]),
                                  _fmt(row["passes"]), _fmt(row["analytic_passes"])]))
        write("timing.csv", "\n".join(rows) + "\n")

    if bundle.ablation is not None:
        for metric in ("mean_norm_suff", "mean_norm_comp", "f1_macro"):
            rows = ["n_scorers," + metric]
            for report in bundle.ablation:
                n = len(report.config.get("scorers", []))
                rows.append(f"{n},{_fmt(getattr(report, metric))}")
            write(f"plot_{metric}.csv", "\n".join(rows) + "\n")

    write("manifest.json", json.dumps(bundle.manifest, sort_keys=True, indent=2) + "\n")
    return written
