"""Per-token importance scoring.

Seven methods, each returning a non-negative length-T vector omega.  Signed
attributions (input-x-gradient, integrated gradients, deeplift, lime) are
reported as absolute values because downstream extraction only ranks tokens;
the signed variants remain available for the attribution-sum checks.

All scorers are pure given (params, inst, seed).  The stochastic ones
(random, lime) fold the instance id into the seed so one corpus-wide seed
still gives every instance its own draw while staying reproducible.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import model
from .corpus import EncodedInstance
from .model import ModelParams, Prediction

METHOD_NAMES = (
    "random",
    "attention",
    "scaled_attention",
    "input_x_grad",
    "integrated_gradients",
    "deeplift",
    "lime",
)

RESCALE_GUARD = 1e-9


@dataclass(frozen=True)
class ImportanceScores:
    """Output of one scoring method on one instance."""

    method: str
    omega: np.ndarray

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=np.float64)
        if omega.ndim != 1 or omega.size == 0:
            raise ValueError("omega must be a non-empty 1-D vector")
        if not np.all(np.isfinite(omega)):
            raise ValueError(f"{self.method}: omega contains non-finite values")
        if np.any(omega < 0):
            raise ValueError(f"{self.method}: omega contains negative values")
        object.__setattr__(self, "omega", omega)


def _instance_rng(inst: EncodedInstance, seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng((seed, zlib.crc32(inst.id.encode("utf-8")), stream))


def _reference(params: ModelParams, inst: EncodedInstance,
               reference: Prediction | None) -> Prediction:
    return reference if reference is not None else model.forward(params, inst)


def score_random(inst: EncodedInstance, seed: int = 0) -> ImportanceScores:
    """Uniform random importance in [0, 1), seeded."""
    rng = _instance_rng(inst, seed, 0)
    return ImportanceScores("random", rng.random(inst.length))


def score_attention(params: ModelParams, inst: EncodedInstance, *,
                    reference: Prediction | None = None) -> ImportanceScores:
    """The model's own normalized attention weights."""
    ref = _reference(params, inst, reference)
    return ImportanceScores("attention", ref.attention.copy())


def score_scaled_attention(params: ModelParams, inst: EncodedInstance, *,
                           reference: Prediction | None = None) -> ImportanceScores:
    """|alpha_t * d p(yhat)/d alpha_t|: attention scaled by its gradient."""
    ref = _reference(params, inst, reference)
    grads = model.backward(params, inst, ref.predicted_class)
    return ImportanceScores("scaled_attention", np.abs(ref.attention * grads.d_attention))


def score_input_x_grad(params: ModelParams, inst: EncodedInstance, *,
                       reference: Prediction | None = None) -> ImportanceScores:
    """|x_t . d p(yhat)/d x_t|: per-token dot product of embedding and gradient."""
    ref = _reference(params, inst, reference)
    grads = model.backward(params, inst, ref.predicted_class)
    H = params.embeddings[np.asarray(inst.token_ids, dtype=np.intp)]
    return ImportanceScores("input_x_grad", np.abs((H * grads.d_embeddings).sum(axis=1)))


def path_integral_attributions(grad_fn: Callable[[np.ndarray], np.ndarray],
                               H: np.ndarray, steps: int) -> np.ndarray:
    """Midpoint-rule path integral of grad_fn from a zero baseline to H.

    Gradients are averaged at scaled inputs (s - 0.5)/steps * H and
    multiplied elementwise by H; the result is summed per row.  For a
    linear function (constant grad_fn) this reduces to gradient-times-input.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    H = np.asarray(H, dtype=np.float64)
    total = np.zeros_like(H)
    for s in range(1, steps + 1):
        total += grad_fn((s - 0.5) / steps * H)
    return (H * (total / steps)).sum(axis=1)


def integrated_gradients_attributions(params: ModelParams, inst: EncodedInstance,
                                      steps: int = 50, *,
                                      reference: Prediction | None = None) -> np.ndarray:
    """Signed per-token path-integral attributions from a zero baseline.

    The signed values sum to p(yhat|x) - p(yhat|zero baseline) up to the
    quadrature error, which shrinks quadratically in ``steps``.
    """
    ref = _reference(params, inst, reference)
    target = ref.predicted_class
    H = params.embeddings[np.asarray(inst.token_ids, dtype=np.intp)].astype(np.float64)
    return path_integral_attributions(
        lambda scaled: model.gradients_at_embeddings(params, scaled, target), H, steps,
    )


def score_integrated_gradients(params: ModelParams, inst: EncodedInstance,
                               steps: int = 50, *,
                               reference: Prediction | None = None) -> ImportanceScores:
    attr = integrated_gradients_attributions(params, inst, steps, reference=reference)
    return ImportanceScores("integrated_gradients", np.abs(attr))


def rescale_multipliers(delta_out: np.ndarray, delta_in: np.ndarray,
                        local_grad: np.ndarray, guard: float = RESCALE_GUARD) -> np.ndarray:
    """Elementwise delta-activation over delta-pre-activation multipliers.

    Where the pre-activation difference is below the guard the ratio is
    numerically meaningless, so the local gradient is used instead.
    """
    delta_out = np.asarray(delta_out, dtype=np.float64)
    delta_in = np.asarray(delta_in, dtype=np.float64)
    safe = np.where(np.abs(delta_in) < guard, 1.0, delta_in)
    return np.where(np.abs(delta_in) < guard, local_grad, delta_out / safe)


def deeplift_attributions(params: ModelParams, inst: EncodedInstance, *,
                          reference: Prediction | None = None) -> np.ndarray:
    """Signed per-token contributions relative to the all-masked reference.

    Affine layers propagate multipliers linearly; relu and the output
    softmax (seeded at the predicted class) use the rescale rule.  Attention
    weights are frozen at their actual-input values, which makes the context
    layer linear in the embeddings and keeps the contribution sum equal to
    p(yhat|x) - p(yhat|reference).  The attention-score tanh path only
    influences the frozen weights, so it receives no contribution.
    """
    ref = _reference(params, inst, reference)
    target = ref.predicted_class
    H = params.embeddings[np.asarray(inst.token_ids, dtype=np.intp)].astype(np.float64)
    cache = model._forward_cache(params, H)

    # reference pass: zero embeddings, alpha frozen from the actual input
    c_ref = np.zeros(params.embed_dim)
    u_ref = params.hidden_w @ c_ref + params.hidden_b
    z_ref = np.maximum(u_ref, 0.0)
    logits_ref = params.out_w @ z_ref + params.out_b
    probs_ref = model._softmax(logits_ref)

    local_softmax = cache.probs[target] * (1.0 - cache.probs[target])
    m_out = rescale_multipliers(
        cache.probs[target] - probs_ref[target],
        cache.logits[target] - logits_ref[target],
        local_softmax,
    )
    mult_logits = np.zeros(params.num_classes)
    mult_logits[target] = m_out

    mult_z = params.out_w.T @ mult_logits
    m_relu = rescale_multipliers(cache.z - z_ref, cache.u - u_ref, (cache.u > 0).astype(float))
    mult_u = mult_z * m_relu
    mult_c = params.hidden_w.T @ mult_u

    contributions = cache.alpha[:, None] * mult_c[None, :] * H
    return contributions.sum(axis=1)


def score_deeplift(params: ModelParams, inst: EncodedInstance, *,
                   reference: Prediction | None = None) -> ImportanceScores:
    attr = deeplift_attributions(params, inst, reference=reference)
    return ImportanceScores("deeplift", np.abs(attr))


def lime_weights(predict: Callable[[np.ndarray], float], length: int,
                 n_samples: int, rng: np.random.Generator,
                 kernel_sigma: float = 0.25, ridge_lambda: float = 1.0) -> np.ndarray:
    """Fit a locally weighted ridge surrogate over binary keep-indicators.

    ``predict`` maps an array of masked positions to the model output being
    explained.  Samples keep each token with probability one half; sample
    weight is exp(-(fraction_masked / sigma)^2).  The intercept is handled by
    weighted centering and left unpenalized.  Returns the signed surrogate
    coefficients.
    """
    if n_samples < 10:
        raise ValueError(f"n_samples must be >= 10, got {n_samples}")
    keep = rng.random((n_samples, length)) < 0.5
    if bool(np.all(keep == keep[0])):
        raise ValueError(
            "degenerate surrogate design: every sampled mask is identical; "
            "increase n_samples"
        )
    responses = np.array([predict(np.flatnonzero(~row)) for row in keep])
    frac_masked = 1.0 - keep.mean(axis=1)
    weights = np.exp(-((frac_masked / kernel_sigma) ** 2))

    X = keep.astype(np.float64)
    x_mean = np.average(X, axis=0, weights=weights)
    y_mean = np.average(responses, weights=weights)
    Xc = X - x_mean
    yc = responses - y_mean
    gram = Xc.T @ (weights[:, None] * Xc) + ridge_lambda * np.eye(length)
    return np.linalg.solve(gram, Xc.T @ (weights * yc))


def score_lime(params: ModelParams, inst: EncodedInstance,
               n_samples: int = 200, seed: int = 0, *,
               reference: Prediction | None = None) -> ImportanceScores:
    """|ridge coefficient| of each token in a local erasure surrogate."""
    ref = _reference(params, inst, reference)
    target = ref.predicted_class

    def predict(masked_positions: np.ndarray) -> float:
        return float(model.forward(params, inst, masked_positions).probs[target])

    coefs = lime_weights(predict, inst.length, n_samples, _instance_rng(inst, seed, 1))
    return ImportanceScores("lime", np.abs(coefs))


def compute_scores(name: str, params: ModelParams, inst: EncodedInstance, *,
                   reference: Prediction | None = None, seed: int = 0,
                   ig_steps: int = 50, lime_samples: int = 200) -> ImportanceScores:
    """Dispatch a scoring method by config name."""
    if name == "random":
        return score_random(inst, seed)
    if name == "attention":
        return score_attention(params, inst, reference=reference)
    if name == "scaled_attention":
        return score_scaled_attention(params, inst, reference=reference)
    if name == "input_x_grad":
        return score_input_x_grad(params, inst, reference=reference)
    if name == "integrated_gradients":
        return score_integrated_gradients(params, inst, ig_steps, reference=reference)
    if name == "deeplift":
        return score_deeplift(params, inst, reference=reference)
    if name == "lime":
        return score_lime(params, inst, lime_samples, seed, reference=reference)
    raise ValueError(f"unknown scoring method {name!r}; expected one of {METHOD_NAMES}")


def write_scores(path, records: list[ImportanceScores], instance_ids: list[str]) -> None:
    """Export one {id, method, omega} JSON record per line."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for inst_id, scores in zip(instance_ids, records):
            fh.write(json.dumps(
                {"id": inst_id, "method": scores.method,
                 "omega": [float(w) for w in scores.omega]},
                sort_keys=True,
            ) + "\n")
