"""Slow, independent reference implementations used for verification.

These deliberately avoid the helpers of the modules they check: the grid
search below re-enumerates candidates with plain Python loops, and the
finite-difference gradients re-state the network equations locally instead
of calling the model's forward internals.  They are shipped (not test-only)
so the CLI can expose an oracle-check command.
"""

from __future__ import annotations

import numpy as np

from . import divergence, model
from .corpus import EncodedInstance
from .model import GradientBundle, ModelParams
from .scorers import ImportanceScores, compute_scores
from .selection import PassCounter, Rationale, SelectionConfig

MAX_BRUTE_FORCE_LENGTH = 64


def _topk_set(omega, k):
    ranked = sorted(range(len(omega)), key=lambda t: (-omega[t], t))
    return tuple(sorted(ranked[:k]))


def _best_window(omega, k):
    best_start, best_sum = 0, None
    for start in range(len(omega) - k + 1):
        total = sum(omega[start:start + k])
        if best_sum is None or total > best_sum:
            best_start, best_sum = start, total
    return tuple(range(best_start, best_start + k))


def brute_force_select(params: ModelParams, inst: EncodedInstance,
                       config: SelectionConfig) -> Rationale:
    """Exhaustively enumerate the (scorer, length, type) grid with skip
    forced to zero and return the argmax-divergence candidate under the same
    tie rules as the production search."""
    T = inst.length
    if T > MAX_BRUTE_FORCE_LENGTH:
        raise ValueError(f"instance {inst.id!r} too long for brute force (T={T})")

    reference = model.forward(params, inst)
    target = reference.predicted_class

    scorer_names = list(config.scorers) if config.scorer_mode == "instance_level" \
        else [config.scorers[0]]
    omegas = {
        name: compute_scores(name, params, inst, reference=reference,
                             seed=config.seed, ig_steps=config.ig_steps,
                             lime_samples=config.lime_samples).omega.tolist()
        for name in scorer_names
    }

    budget = max(1, round(config.ratio * T))
    lengths = list(range(1, budget + 1)) if config.length_mode == "instance_level" \
        else [budget]
    types = ["topk", "contiguous"] if config.type_mode == "instance_level" \
        else [config.rationale_type]

    best = None
    for k in lengths:
        for rationale_type in types:
            for name in scorer_names:
                if rationale_type == "topk":
                    positions = _topk_set(omegas[name], k)
                else:
                    positions = _best_window(omegas[name], k)
                masked = model.forward(params, inst, positions)
                delta = divergence.compute(config.divergence, reference.probs,
                                           masked.probs, target=target)
                if best is None or delta > best[0]:
                    best = (delta, Rationale(
                        instance_id=inst.id, rationale_type=rationale_type,
                        positions=positions, k=k, scorer=name,
                        delta=delta, divergence=config.divergence,
                    ))
    return best[1]


def occlusion_scores(params: ModelParams, inst: EncodedInstance, *,
                     reference=None, counter: PassCounter | None = None) -> ImportanceScores:
    """Single-token occlusion: omega_t = max(0, p(yhat|x) - p(yhat|x with t
    masked)).  Costs exactly T masked forward passes."""
    if reference is None:
        reference = model.forward(params, inst)
    target = reference.predicted_class
    p_full = reference.probs[target]
    omega = np.empty(inst.length)
    for t in range(inst.length):
        masked = model.forward(params, inst, (t,))
        if counter is not None:
            counter.tick()
        omega[t] = max(0.0, p_full - masked.probs[target])
    return ImportanceScores("occlusion", omega)


def _predict_probs(params: ModelParams, H: np.ndarray,
                   alpha: np.ndarray | None = None) -> np.ndarray:
    """The network equations, restated locally so the finite-difference check
    does not depend on the implementation it validates."""
    scores = np.tanh(H @ params.attn_proj.T) @ params.attn_vec
    if alpha is None:
        e = np.exp(scores - scores.max())
        alpha = e / e.sum()
    c = H.T @ alpha
    z = np.maximum(params.hidden_w @ c + params.hidden_b, 0.0)
    logits = params.out_w @ z + params.out_b
    e = np.exp(logits - logits.max())
    return e / e.sum()


def finite_difference_grad(params: ModelParams, inst: EncodedInstance, target: int,
                           step: float = 1e-5,
                           mask=None) -> GradientBundle:
    """Central finite differences of p(target) per embedding coordinate and
    per attention weight (attention treated as a free variable at its
    computed value).  Masked positions are zeroed before evaluation, so
    their embedding rows come back exactly zero."""
    if not 0.0 < step <= 1e-2:
        raise ValueError(f"step must be in (0, 1e-2], got {step}")
    ids = np.asarray(inst.token_ids, dtype=np.intp)
    T = ids.shape[0]
    mask_idx = sorted(set(int(p) for p in mask)) if mask is not None else []

    def embed(base_rows):
        H = base_rows.copy()
        if mask_idx:
            H[mask_idx] = 0.0
        return H

    base = params.embeddings[ids].astype(np.float64)
    d_emb = np.zeros_like(base)
    for t in range(T):
        if t in mask_idx:
            continue
        for dim in range(base.shape[1]):
            plus, minus = base.copy(), base.copy()
            plus[t, dim] += step
            minus[t, dim] -= step
            p_plus = _predict_probs(params, embed(plus))[target]
            p_minus = _predict_probs(params, embed(minus))[target]
            d_emb[t, dim] = (p_plus - p_minus) / (2.0 * step)

    H = embed(base)
    scores = np.tanh(H @ params.attn_proj.T) @ params.attn_vec
    e = np.exp(scores - scores.max())
    alpha = e / e.sum()
    d_alpha = np.zeros(T)
    for t in range(T):
        plus, minus = alpha.copy(), alpha.copy()
        plus[t] += step
        minus[t] -= step
        p_plus = _predict_probs(params, H, alpha=plus)[target]
        p_minus = _predict_probs(params, H, alpha=minus)[target]
        d_alpha[t] = (p_plus - p_minus) / (2.0 * step)
    return GradientBundle(d_embeddings=d_emb, d_attention=d_alpha)
