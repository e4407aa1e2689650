"""Synthetic classification corpora with planted class-indicative tokens.

Every instance carries a few signal tokens drawn from its class's private
inventory inside filler noise, so a small attention classifier can learn the
task quickly and tests know which positions actually matter.  Everything is
a pure function of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Instance


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs for corpus generation."""

    n_instances: int = 100
    num_classes: int = 2
    signal_vocab_per_class: int = 4
    filler_vocab: int = 30
    t_min: int = 8
    t_max: int = 14
    signal_count: int = 2
    noise: float = 0.0          # chance a filler slot holds an off-class signal token
    seed: int = 0
    id_prefix: str = "syn"

    def __post_init__(self):
        if self.t_min < 1 or self.t_max < self.t_min:
            raise ValueError("need 1 <= t_min <= t_max")
        if not 0 <= self.signal_count <= self.t_min:
            raise ValueError("signal_count must fit the shortest instance")
        if not 0.0 <= self.noise < 1.0:
            raise ValueError("noise must be in [0, 1)")


def signal_tokens(spec: SyntheticSpec, label: int) -> list[str]:
    return [f"sig{label}_{j}" for j in range(spec.signal_vocab_per_class)]


def generate_corpus(spec: SyntheticSpec) -> list[Instance]:
    """Balanced labels, variable lengths, planted per-class signal tokens."""
    rng = np.random.default_rng(spec.seed)
    fillers = [f"filler_{j}" for j in range(spec.filler_vocab)]
    instances = []
    for i in range(spec.n_instances):
        label = i % spec.num_classes
        T = int(rng.integers(spec.t_min, spec.t_max + 1))
        tokens = [fillers[int(rng.integers(len(fillers)))] for _ in range(T)]
        signal_positions = rng.choice(T, size=spec.signal_count, replace=False)
        own = signal_tokens(spec, label)
        for pos in signal_positions:
            tokens[int(pos)] = own[int(rng.integers(len(own)))]
        if spec.noise > 0.0:
            for t in range(T):
                if t in signal_positions:
                    continue
                if rng.random() < spec.noise:
                    other = int(rng.integers(spec.num_classes - 1))
                    other = other if other < label else other + 1
                    confusers = signal_tokens(spec, other)
                    tokens[t] = confusers[int(rng.integers(len(confusers)))]
        instances.append(Instance(
            id=f"{spec.id_prefix}_{i:04d}", tokens=tuple(tokens), label=label,
        ))
    return instances


def split_corpus(instances: list[Instance], train_frac: float = 0.7,
                 dev_frac: float = 0.1) -> tuple[list[Instance], list[Instance], list[Instance]]:
    """Deterministic contiguous split; labels stay balanced because the
    generator interleaves them."""
    n = len(instances)
    n_train = int(round(train_frac * n))
    n_dev = int(round(dev_frac * n))
    return (instances[:n_train],
            instances[n_train:n_train + n_dev],
            instances[n_train + n_dev:])
