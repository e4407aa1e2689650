"""Divergence functions comparing full-input and masked-input output distributions.

All four metrics take the reference distribution ``y`` (full input) and the
masked distribution ``ym`` and return a scalar where larger means the mask
removed more of what the model relied on.  Natural log throughout; a 1e-12
probability floor keeps every metric finite when softmax underflows.
"""

from __future__ import annotations

import numpy as np

PROB_FLOOR = 1e-12

METRIC_NAMES = ("kl", "jsd", "perplexity", "classdiff")


def _as_dist(p) -> np.ndarray:
    return np.asarray(p, dtype=np.float64)


def kl(y, ym) -> float:
    """Kullback-Leibler divergence KL(y || ym), summed over classes.

    Terms where y_c is (numerically) zero contribute nothing; ym is floored
    at 1e-12 so the result is always finite.
    """
    y, ym = _as_dist(y), _as_dist(ym)
    ym = np.maximum(ym, PROB_FLOOR)
    terms = np.where(y < PROB_FLOOR, 0.0, y * (np.log(np.maximum(y, PROB_FLOOR)) - np.log(ym)))
    return float(terms.sum())


def jsd(y, ym) -> float:
    """Jensen-Shannon divergence: mean KL of both distributions from their average."""
    y, ym = _as_dist(y), _as_dist(ym)
    mid = 0.5 * (y + ym)
    return 0.5 * kl(y, mid) + 0.5 * kl(ym, mid)


def perplexity(y, ym) -> float:
    """exp of the cross entropy H(y, ym), with y as the ground truth."""
    y, ym = _as_dist(y), _as_dist(ym)
    ym = np.maximum(ym, PROB_FLOOR)
    return float(np.exp(-(y * np.log(ym)).sum()))


def class_diff(y, ym, target: int) -> float:
    """Signed drop in the target class probability, y_t - ym_t.

    No clamping here: negative values mean masking raised the class
    probability, and the comprehensiveness metric applies its own max(0, .).
    """
    y, ym = _as_dist(y), _as_dist(ym)
    return float(y[target] - ym[target])


def compute(name: str, y, ym, target: int | None = None) -> float:
    """Dispatch a divergence by config name (one of kl|jsd|perplexity|classdiff)."""
    if name == "kl":
        return kl(y, ym)
    if name == "jsd":
        return jsd(y, ym)
    if name == "perplexity":
        return perplexity(y, ym)
    if name == "classdiff":
        if target is None:
            raise ValueError("classdiff requires a target class")
        return class_diff(y, ym, target)
    raise ValueError(f"unknown divergence {name!r}; expected one of {METRIC_NAMES}")
