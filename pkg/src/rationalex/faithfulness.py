"""Erasure-based faithfulness evaluation of extracted rationales.

Three measures per rationale set:

* normalized sufficiency: how much confidence survives when only the
  rationale is left, rescaled by the zeroed-input baseline;
* normalized comprehensiveness: how much confidence is lost when the
  rationale is erased, same rescaling;
* masked F1: macro F1 of the model's predictions on rationale-masked inputs
  against its own full-input predictions (lower means the rationale was more
  necessary).

Both normalized metrics are clamped to [0, 1].  When the baseline already
matches full-text confidence there is nothing to attribute: sufficiency
reports 1 and comprehensiveness 0.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np
from scipy import stats

from . import model
from .corpus import EncodedInstance
from .model import ModelParams
from .selection import Rationale, SelectionConfig, select_all

DENOM_GUARD = 1e-6


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def sufficiency(p_full: float, p_kept: float) -> float:
    """1 - max(0, p_full - p_kept): confidence retained by the kept tokens."""
    return 1.0 - max(0.0, p_full - p_kept)


def norm_suff_from_probs(p_full: float, p_rationale: float, p_baseline: float) -> float:
    """Normalized sufficiency from the three probabilities of the predicted class."""
    suff_zero = sufficiency(p_full, p_baseline)
    if 1.0 - suff_zero < DENOM_GUARD:
        return 1.0
    return _clamp01((sufficiency(p_full, p_rationale) - suff_zero) / (1.0 - suff_zero))


def norm_comp_from_probs(p_full: float, p_masked: float, p_baseline: float) -> float:
    """Normalized comprehensiveness from the three probabilities."""
    suff_zero = sufficiency(p_full, p_baseline)
    if 1.0 - suff_zero < DENOM_GUARD:
        return 0.0
    comp = max(0.0, p_full - p_masked)
    return _clamp01(comp / (1.0 - suff_zero))


@dataclass(frozen=True)
class InstanceEval:
    """Per-instance probabilities and normalized metrics for one rationale."""

    id: str
    p_full: float
    p_rationale_only: float
    p_without_rationale: float
    p_baseline: float
    norm_suff: float
    norm_comp: float
    length_fraction: float

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "p_full": self.p_full,
            "p_rationale_only": self.p_rationale_only,
            "p_without_rationale": self.p_without_rationale,
            "p_baseline": self.p_baseline,
            "norm_suff": self.norm_suff,
            "norm_comp": self.norm_comp,
            "length_fraction": self.length_fraction,
        }


@dataclass
class FaithfulnessReport:
    """Aggregate of InstanceEvals for one extraction configuration."""

    label: str
    evals: list[InstanceEval]
    rationales: dict[str, Rationale]
    mean_norm_suff: float
    mean_norm_comp: float
    f1_macro: float
    mean_length_fraction: float
    config: dict

    @property
    def instance_ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.evals)


def evaluate_instance(params: ModelParams, inst: EncodedInstance,
                      rationale: Rationale) -> InstanceEval:
    """All four forward passes and both normalized metrics for one rationale.

    p(yhat|R) masks the complement of the rationale in place, so sufficiency
    and comprehensiveness share one masking mechanism.
    """
    T = inst.length
    reference = model.forward(params, inst)
    yhat = reference.predicted_class
    complement = tuple(t for t in range(T) if t not in set(rationale.positions))
    p_full = float(reference.probs[yhat])
    p_rationale_only = float(model.forward(params, inst, complement).probs[yhat])
    p_without = float(model.forward(params, inst, rationale.positions).probs[yhat])
    p_baseline = float(model.forward(params, inst, range(T)).probs[yhat])
    return InstanceEval(
        id=inst.id,
        p_full=p_full,
        p_rationale_only=p_rationale_only,
        p_without_rationale=p_without,
        p_baseline=p_baseline,
        norm_suff=norm_suff_from_probs(p_full, p_rationale_only, p_baseline),
        norm_comp=norm_comp_from_probs(p_full, p_without, p_baseline),
        length_fraction=rationale.k / T,
    )


def normalized_sufficiency(params: ModelParams, inst: EncodedInstance,
                           rationale: Rationale) -> float:
    return evaluate_instance(params, inst, rationale).norm_suff


def normalized_comprehensiveness(params: ModelParams, inst: EncodedInstance,
                                 rationale: Rationale) -> float:
    return evaluate_instance(params, inst, rationale).norm_comp


def _f1_macro(gold: np.ndarray, pred: np.ndarray) -> float:
    """Macro F1 over the classes observed in gold or predictions.

    Restricting to observed classes makes perfect agreement score exactly 1
    even when some model class never occurs.
    """
    labels = np.unique(np.concatenate([gold, pred]))
    f1s = []
    for c in labels:
        tp = np.sum((pred == c) & (gold == c))
        fp = np.sum((pred == c) & (gold != c))
        fn = np.sum((pred != c) & (gold == c))
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom > 0 else 0.0)
    return float(np.mean(f1s))


def masked_f1(params: ModelParams, dataset: list[EncodedInstance],
              rationales: Mapping[str, Rationale],
              use_gold_labels: bool = False) -> float:
    """Macro F1 of rationale-masked predictions against full-input predictions.

    With use_gold_labels the dataset labels replace the model's own
    predictions as the reference.
    """
    gold, pred = [], []
    for inst in dataset:
        rationale = rationales.get(inst.id)
        if rationale is None:
            raise KeyError(f"no rationale provided for instance {inst.id!r}")
        if use_gold_labels:
            gold.append(inst.label)
        else:
            gold.append(model.forward(params, inst).predicted_class)
        pred.append(model.forward(params, inst, rationale.positions).predicted_class)
    return _f1_macro(np.asarray(gold), np.asarray(pred))


def build_report(params: ModelParams, dataset: list[EncodedInstance],
                 rationales: Mapping[str, Rationale], label: str = "",
                 config: dict | None = None,
                 use_gold_labels: bool = False) -> FaithfulnessReport:
    """Evaluate one rationale per instance and aggregate the three measures."""
    evals = []
    for inst in dataset:
        rationale = rationales.get(inst.id)
        if rationale is None:
            raise KeyError(f"no rationale provided for instance {inst.id!r}")
        evals.append(evaluate_instance(params, inst, rationale))
    return FaithfulnessReport(
        label=label,
        evals=evals,
        rationales={inst.id: rationales[inst.id] for inst in dataset},
        mean_norm_suff=float(np.mean([e.norm_suff for e in evals])),
        mean_norm_comp=float(np.mean([e.norm_comp for e in evals])),
        f1_macro=masked_f1(params, dataset, rationales, use_gold_labels),
        mean_length_fraction=float(np.mean([e.length_fraction for e in evals])),
        config=dict(config or {}),
    )


def relative_improvement(report_fixed: FaithfulnessReport,
                         report_instance: FaithfulnessReport) -> dict:
    """Ratios of instance-level means to fixed-configuration means.

    A zero denominator yields None for that ratio rather than infinity.
    Reports must cover the same instances.
    """
    if report_fixed.instance_ids != report_instance.instance_ids:
        raise ValueError("relative improvement requires reports over the same instances")

    def ratio(instance_value: float, fixed_value: float):
        return None if fixed_value == 0.0 else instance_value / fixed_value

    return {
        "norm_suff_ri": ratio(report_instance.mean_norm_suff, report_fixed.mean_norm_suff),
        "norm_comp_ri": ratio(report_instance.mean_norm_comp, report_fixed.mean_norm_comp),
        "f1_ri": ratio(report_instance.f1_macro, report_fixed.f1_macro),
    }


def ablate_scorers(params: ModelParams, dataset: list[EncodedInstance],
                   config: SelectionConfig, removal_order: list[str] | None = None
                   ) -> list[FaithfulnessReport]:
    """Re-run selection with progressively fewer scoring methods.

    Produces one report per scorer set, starting from the full configured
    list and removing removal_order entries one at a time until a single
    method remains.  removal_order must be a permutation of the configured
    scorers; by default they are removed in reverse config order.
    """
    if removal_order is None:
        removal_order = list(reversed(config.scorers))
    if sorted(removal_order) != sorted(config.scorers):
        raise ValueError("removal_order must be a permutation of the configured scorers")
    reports = []
    active = list(config.scorers)
    for removed_count in range(len(config.scorers)):
        subset_config = replace(config, scorers=tuple(active))
        rationales = {inst.id: select_all(params, inst, subset_config)
                      for inst in dataset}
        reports.append(build_report(
            params, dataset, rationales,
            label=f"scorers={'+'.join(active)}",
            config={"scorers": list(active)},
        ))
        if removed_count < len(config.scorers) - 1:
            active.remove(removal_order[removed_count])
    return reports


def paired_wilcoxon(values_a, values_b):
    """Paired Wilcoxon signed-rank test for per-instance metric comparisons.

    Returns (statistic, p_value).  Identical pairs raise in scipy, so they
    are dropped first; if nothing remains the test is vacuous and (0.0, 1.0)
    comes back.
    """
    a = np.asarray(values_a, dtype=np.float64)
    b = np.asarray(values_b, dtype=np.float64)
    keep = a != b
    if not keep.any():
        return 0.0, 1.0
    res = stats.wilcoxon(a[keep], b[keep])
    return float(res.statistic), float(res.pvalue)
