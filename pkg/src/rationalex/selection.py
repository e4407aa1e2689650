"""Rationale extraction and instance-level selection of scorer, length and type.

Selection evaluates candidate rationales by erasure: mask the candidate,
re-run the model, and score the output shift with a configured divergence.
The candidate with the largest shift wins.  Ties break toward smaller k,
then topk before contiguous, then scorer config order, so results are
deterministic regardless of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from . import divergence, model
from .corpus import EncodedInstance
from .model import ModelParams, Prediction
from .scorers import METHOD_NAMES, ImportanceScores, compute_scores

RATIONALE_TYPES = ("topk", "contiguous")


@dataclass(frozen=True)
class Rationale:
    """A selected token subset with the settings that produced it."""

    instance_id: str
    rationale_type: str          # "topk" | "contiguous"
    positions: tuple[int, ...]   # sorted, distinct
    k: int
    scorer: str
    delta: float | None = None
    divergence: str | None = None

    def __post_init__(self):
        if self.rationale_type not in RATIONALE_TYPES:
            raise ValueError(f"bad rationale type {self.rationale_type!r}")
        positions = tuple(sorted(int(p) for p in self.positions))
        if len(set(positions)) != len(positions):
            raise ValueError("rationale positions must be distinct")
        if len(positions) != self.k:
            raise ValueError(f"expected {self.k} positions, got {len(positions)}")
        if self.rationale_type == "contiguous" and positions:
            if positions[-1] - positions[0] != self.k - 1:
                raise ValueError("contiguous rationale positions must be consecutive")
        object.__setattr__(self, "positions", positions)

    def to_record(self) -> dict:
        return {
            "id": self.instance_id,
            "type": self.rationale_type,
            "scorer": self.scorer,
            "k": self.k,
            "positions": list(self.positions),
            "delta": self.delta,
            "divergence": self.divergence,
        }


@dataclass(frozen=True)
class SelectionConfig:
    """What to search per instance and what to keep fixed.

    ``scorers`` lists candidate methods in tie-break priority order; with
    scorer_mode "fixed" only the first entry is used.  ``ratio`` is the
    rationale-length budget as a fraction of T and always bounds the search.
    ``skip`` coarsens the length search: delta is evaluated every
    round(skip * T) tokens instead of every token (0 means every token).
    """

    scorer_mode: str = "instance_level"      # "fixed" | "instance_level"
    scorers: tuple[str, ...] = ("attention",)
    length_mode: str = "fixed"               # "fixed" | "instance_level"
    type_mode: str = "fixed"                 # "fixed" | "instance_level"
    rationale_type: str = "topk"             # used when type_mode == "fixed"
    ratio: float = 0.2
    skip: float = 0.0
    divergence: str = "jsd"
    seed: int = 0
    ig_steps: int = 50
    lime_samples: int = 200
    # Early-stop length scan by delta improvement threshold.  Off by default:
    # it trades optimality for speed and measured worse, kept only as a flag.
    early_stop_threshold: float | None = None

    def __post_init__(self):
        if self.scorer_mode not in ("fixed", "instance_level"):
            raise ValueError(f"bad scorer_mode {self.scorer_mode!r}")
        if self.length_mode not in ("fixed", "instance_level"):
            raise ValueError(f"bad length_mode {self.length_mode!r}")
        if self.type_mode not in ("fixed", "instance_level"):
            raise ValueError(f"bad type_mode {self.type_mode!r}")
        if self.rationale_type not in RATIONALE_TYPES:
            raise ValueError(f"bad rationale_type {self.rationale_type!r}")
        if not self.scorers:
            raise ValueError("scorer list must be non-empty")
        for name in self.scorers:
            if name not in METHOD_NAMES:
                raise ValueError(f"unknown scorer {name!r}")
        if not 0.0 < self.ratio <= 1.0:
            raise ValueError(f"ratio must be in (0, 1], got {self.ratio}")
        if not 0.0 <= self.skip < self.ratio:
            raise ValueError(f"skip must be in [0, ratio), got {self.skip}")
        if self.divergence not in divergence.METRIC_NAMES:
            raise ValueError(f"unknown divergence {self.divergence!r}")

    @property
    def active_scorers(self) -> tuple[str, ...]:
        return self.scorers if self.scorer_mode == "instance_level" else self.scorers[:1]

    @property
    def active_types(self) -> tuple[str, ...]:
        if self.type_mode == "instance_level":
            return RATIONALE_TYPES
        return (self.rationale_type,)


class PassCounter:
    """Counts model forward passes spent on erasure candidates."""

    def __init__(self):
        self.count = 0

    def tick(self, n: int = 1) -> None:
        self.count += n


def max_length(T: int, ratio: float) -> int:
    """Length budget N_t = round(ratio * T), at least one token."""
    return max(1, round(ratio * T))


def candidate_lengths(T: int, ratio: float, skip: float) -> list[int]:
    """Lengths searched at instance level: 1, 1+step, ... capped and always
    including the budget N_t so the search can never lose to the fixed length."""
    n_t = max_length(T, ratio)
    step = max(1, round(skip * T))
    lengths = list(range(1, n_t + 1, step))
    if lengths[-1] != n_t:
        lengths.append(n_t)
    return lengths


def _topk_positions(omega: np.ndarray, k: int) -> tuple[int, ...]:
    order = np.argsort(-omega, kind="stable")
    return tuple(sorted(int(i) for i in order[:k]))


def _best_window_start(omega: np.ndarray, k: int) -> int:
    sums = np.lib.stride_tricks.sliding_window_view(omega, k).sum(axis=1)
    return int(np.argmax(sums))


def extract_topk(omega: ImportanceScores, k: int, instance_id: str = "") -> Rationale:
    """The k highest-scored positions; score ties go to the lower index."""
    T = omega.omega.shape[0]
    if not 1 <= k <= T:
        raise ValueError(f"k={k} out of range [1, {T}]")
    return Rationale(
        instance_id=instance_id,
        rationale_type="topk",
        positions=_topk_positions(omega.omega, k),
        k=k,
        scorer=omega.method,
    )


def extract_contiguous(omega: ImportanceScores, k: int, instance_id: str = "") -> Rationale:
    """The length-k window with the highest total score; ties go leftmost."""
    T = omega.omega.shape[0]
    if not 1 <= k <= T:
        raise ValueError(f"k={k} out of range [1, {T}]")
    start = _best_window_start(omega.omega, k)
    return Rationale(
        instance_id=instance_id,
        rationale_type="contiguous",
        positions=tuple(range(start, start + k)),
        k=k,
        scorer=omega.method,
    )


def _extract(omega: ImportanceScores, k: int, rationale_type: str,
             instance_id: str) -> Rationale:
    if rationale_type == "topk":
        return extract_topk(omega, k, instance_id)
    return extract_contiguous(omega, k, instance_id)


def candidate_delta(params: ModelParams, inst: EncodedInstance, rationale: Rationale,
                    metric: str, *, reference: Prediction | None = None,
                    counter: PassCounter | None = None) -> float:
    """Divergence between the reference output and the output with the
    rationale erased.  classdiff targets the reference predicted class."""
    if reference is None:
        reference = model.forward(params, inst)
        if counter is not None:
            counter.tick()
    masked = model.forward(params, inst, rationale.positions)
    if counter is not None:
        counter.tick()
    return divergence.compute(metric, reference.probs, masked.probs,
                              target=reference.predicted_class)


def _score_all(params: ModelParams, inst: EncodedInstance, names: Iterable[str],
               config: SelectionConfig, reference: Prediction) -> dict[str, ImportanceScores]:
    return {
        name: compute_scores(
            name, params, inst, reference=reference, seed=config.seed,
            ig_steps=config.ig_steps, lime_samples=config.lime_samples,
        )
        for name in names
    }


def select_scorer(params: ModelParams, inst: EncodedInstance, config: SelectionConfig,
                  *, counter: PassCounter | None = None) -> Rationale:
    """Pick the scoring method whose rationale moves the output most, at a
    fixed length (the budget) and fixed type."""
    fixed = replace(config, length_mode="fixed", type_mode="fixed")
    return select_all(params, inst, fixed, counter=counter)


def select_length(params: ModelParams, inst: EncodedInstance, omega: ImportanceScores,
                  config: SelectionConfig, *,
                  counter: PassCounter | None = None) -> Rationale:
    """Scan candidate lengths for one precomputed score vector and keep the
    length with the largest divergence; ties go to the smaller k."""
    reference = model.forward(params, inst)
    if counter is not None:
        counter.tick()
    rationale_type = config.active_types[0]
    best: Rationale | None = None
    for k in candidate_lengths(inst.length, config.ratio, config.skip):
        cand = _extract(omega, k, rationale_type, inst.id)
        delta = candidate_delta(params, inst, cand, config.divergence,
                                reference=reference, counter=counter)
        gain = delta - best.delta if best is not None else None
        if best is None or delta > best.delta:
            best = replace(cand, delta=delta, divergence=config.divergence)
        if (config.early_stop_threshold is not None and gain is not None
                and gain < config.early_stop_threshold):
            break
    return best


def select_all(params: ModelParams, inst: EncodedInstance, config: SelectionConfig,
               *, counter: PassCounter | None = None) -> Rationale:
    """Search the configured grid of (scorer, length, type) candidates and
    return the argmax-divergence rationale.

    Axes left "fixed" contribute a single grid point (the first configured
    scorer, the budget length, the configured type).  Cost is one reference
    pass plus one masked pass per grid point.
    """
    reference = model.forward(params, inst)
    if counter is not None:
        counter.tick()
    scorer_names = config.active_scorers
    types = config.active_types
    if config.length_mode == "instance_level":
        lengths = candidate_lengths(inst.length, config.ratio, config.skip)
    else:
        lengths = [max_length(inst.length, config.ratio)]

    omegas = _score_all(params, inst, scorer_names, config, reference)
    best: Rationale | None = None
    for k in lengths:
        for rationale_type in types:
            for name in scorer_names:
                cand = _extract(omegas[name], k, rationale_type, inst.id)
                delta = candidate_delta(params, inst, cand, config.divergence,
                                        reference=reference, counter=counter)
                if best is None or delta > best.delta:
                    best = replace(cand, delta=delta, divergence=config.divergence)
    return best


def select_dataset(params: ModelParams, dataset: list[EncodedInstance],
                   config: SelectionConfig, *,
                   counter: PassCounter | None = None) -> dict[str, Rationale]:
    """Run select_all over a dataset, keyed by instance id."""
    return {inst.id: select_all(params, inst, config, counter=counter)
            for inst in dataset}
