"""A small attention-over-embeddings classifier with exact analytic gradients.

Architecture, for token embeddings h_t (zeroed where masked):

    s_t    = v . tanh(W h_t)          attention scores
    alpha  = softmax(s)               attention weights over positions
    c      = sum_t alpha_t h_t        context vector
    z      = relu(U c + b)            hidden layer
    logits = O z + b2
    probs  = softmax(logits)

Masking replaces a token's embedding with the zero vector while keeping
sequence length and positions, so the all-masked input doubles as the
zeroed-sequence baseline used by the faithfulness metrics.  Everything is
double precision; forward and backward are pure functions of their inputs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .corpus import EncodedInstance

_MAGIC = b"ATTNCLS1"


@dataclass
class ModelParams:
    """Trained weights.  Treated as immutable after training."""

    embeddings: np.ndarray   # V x d
    attn_proj: np.ndarray    # d x d
    attn_vec: np.ndarray     # d
    hidden_w: np.ndarray     # h x d
    hidden_b: np.ndarray     # h
    out_w: np.ndarray        # C x h
    out_b: np.ndarray        # C
    seed: int = 0

    @property
    def vocab_size(self) -> int:
        return self.embeddings.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.embeddings.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.hidden_w.shape[0]

    @property
    def num_classes(self) -> int:
        return self.out_w.shape[0]

    def freeze(self) -> "ModelParams":
        """Mark every array read-only so concurrent readers cannot race a writer."""
        for arr in (self.embeddings, self.attn_proj, self.attn_vec,
                    self.hidden_w, self.hidden_b, self.out_w, self.out_b):
            arr.flags.writeable = False
        return self


@dataclass(frozen=True)
class Prediction:
    """One forward pass: class distribution, attention weights and logits."""

    probs: np.ndarray
    attention: np.ndarray
    logits: np.ndarray

    @property
    def predicted_class(self) -> int:
        return int(np.argmax(self.probs))


@dataclass(frozen=True)
class GradientBundle:
    """Exact gradients of one class probability with respect to the inputs."""

    d_embeddings: np.ndarray  # T x d, gradient wrt each input embedding coordinate
    d_attention: np.ndarray   # T, gradient wrt each attention weight (alpha as a free variable)


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max()
    e = np.exp(shifted)
    return e / e.sum()


class _Cache:
    """Intermediates of one forward pass, kept for the backward pass."""

    __slots__ = ("H", "A", "G", "s", "alpha", "c", "u", "z", "logits", "probs")


def _forward_cache(params: ModelParams, H: np.ndarray) -> _Cache:
    cache = _Cache()
    cache.H = H
    cache.A = H @ params.attn_proj.T
    cache.G = np.tanh(cache.A)
    cache.s = cache.G @ params.attn_vec
    cache.alpha = _softmax(cache.s)
    cache.c = cache.H.T @ cache.alpha
    cache.u = params.hidden_w @ cache.c + params.hidden_b
    cache.z = np.maximum(cache.u, 0.0)
    cache.logits = params.out_w @ cache.z + params.out_b
    cache.probs = _softmax(cache.logits)
    return cache


def _input_vjp(params: ModelParams, cache: _Cache, d_logits: np.ndarray):
    """Pull a logit-space gradient back to the embeddings and attention weights."""
    dz = params.out_w.T @ d_logits
    du = dz * (cache.u > 0)
    dc = params.hidden_w.T @ du
    d_alpha = cache.H @ dc
    ds = cache.alpha * (d_alpha - cache.alpha @ d_alpha)
    dG = np.outer(ds, params.attn_vec)
    dA = dG * (1.0 - cache.G ** 2)
    dH = dA @ params.attn_proj + np.outer(cache.alpha, dc)
    return dH, d_alpha


def _masked_embeddings(params: ModelParams, inst: EncodedInstance,
                       mask: Iterable[int] | None) -> tuple[np.ndarray, np.ndarray]:
    ids = np.asarray(inst.token_ids, dtype=np.intp)
    T = ids.shape[0]
    if mask is None:
        mask_idx = np.empty(0, dtype=np.intp)
    else:
        mask_idx = np.asarray(sorted(set(int(p) for p in mask)), dtype=np.intp)
        if mask_idx.size and (mask_idx[0] < 0 or mask_idx[-1] >= T):
            raise ValueError(
                f"mask position out of range for instance {inst.id!r} (T={T}): "
                f"{mask_idx.tolist()}"
            )
    H = params.embeddings[ids].astype(np.float64, copy=True)
    if mask_idx.size:
        H[mask_idx] = 0.0
    return H, mask_idx


def forward(params: ModelParams, inst: EncodedInstance,
            mask: Iterable[int] | None = None) -> Prediction:
    """Predict class probabilities with the given token positions erased.

    An empty mask gives the reference prediction; masking every position
    gives the zeroed-sequence baseline.
    """
    H, _ = _masked_embeddings(params, inst, mask)
    cache = _forward_cache(params, H)
    return Prediction(probs=cache.probs, attention=cache.alpha, logits=cache.logits)


def backward(params: ModelParams, inst: EncodedInstance, target_class: int,
             mask: Iterable[int] | None = None) -> GradientBundle:
    """Exact gradients of p(target_class) wrt input embeddings and attention.

    Masked positions are disconnected from the output (their embedding is
    replaced by zero before anything reads it), so their d_embeddings rows
    are exactly zero.
    """
    if not 0 <= target_class < params.num_classes:
        raise ValueError(f"target class {target_class} out of range")
    H, mask_idx = _masked_embeddings(params, inst, mask)
    cache = _forward_cache(params, H)
    d_logits = cache.probs[target_class] * (
        np.eye(params.num_classes)[target_class] - cache.probs
    )
    dH, d_alpha = _input_vjp(params, cache, d_logits)
    if mask_idx.size:
        dH[mask_idx] = 0.0
    return GradientBundle(d_embeddings=dH, d_attention=d_alpha)


def gradients_at_embeddings(params: ModelParams, H: np.ndarray,
                            target_class: int) -> np.ndarray:
    """Gradient of p(target_class) wrt an arbitrary embedding matrix H.

    Used by path-integral attribution, which needs gradients at scaled
    inputs rather than at the actual token embeddings.
    """
    cache = _forward_cache(params, np.asarray(H, dtype=np.float64))
    d_logits = cache.probs[target_class] * (
        np.eye(params.num_classes)[target_class] - cache.probs
    )
    dH, _ = _input_vjp(params, cache, d_logits)
    return dH


@dataclass(frozen=True)
class TrainConfig:
    vocab_size: int
    num_classes: int
    embed_dim: int = 16
    hidden_dim: int = 16
    lr: float = 0.5
    epochs: int = 30
    batch: int = 8
    seed: int = 0


def _init_params(cfg: TrainConfig) -> ModelParams:
    # Small embedding init keeps late-epoch fixed-lr SGD from oscillating.
    rng = np.random.default_rng(cfg.seed)
    d, h = cfg.embed_dim, cfg.hidden_dim
    return ModelParams(
        embeddings=rng.normal(0.0, 0.1, size=(cfg.vocab_size, d)),
        attn_proj=rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, d)),
        attn_vec=rng.normal(0.0, 1.0 / np.sqrt(d), size=d),
        hidden_w=rng.normal(0.0, 1.0 / np.sqrt(d), size=(h, d)),
        hidden_b=np.zeros(h),
        out_w=rng.normal(0.0, 1.0 / np.sqrt(h), size=(cfg.num_classes, h)),
        out_b=np.zeros(cfg.num_classes),
        seed=cfg.seed,
    )


def train(dataset: list[EncodedInstance], cfg: TrainConfig) -> ModelParams:
    """Minimize cross-entropy with plain mini-batch SGD, deterministically.

    Raises RuntimeError naming the epoch and batch if the loss goes
    non-finite.
    """
    if not dataset:
        raise ValueError("cannot train on an empty dataset")
    for inst in dataset:
        if not 0 <= inst.label < cfg.num_classes:
            raise ValueError(f"instance {inst.id!r} label {inst.label} >= C={cfg.num_classes}")
    params = _init_params(cfg)
    rng = np.random.default_rng(cfg.seed + 1)
    n = len(dataset)
    eye = np.eye(cfg.num_classes)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for batch_no, start in enumerate(range(0, n, cfg.batch)):
            idx = order[start:start + cfg.batch]
            grads = {
                "embeddings": np.zeros_like(params.embeddings),
                "attn_proj": np.zeros_like(params.attn_proj),
                "attn_vec": np.zeros_like(params.attn_vec),
                "hidden_w": np.zeros_like(params.hidden_w),
                "hidden_b": np.zeros_like(params.hidden_b),
                "out_w": np.zeros_like(params.out_w),
                "out_b": np.zeros_like(params.out_b),
            }
            loss = 0.0
            for i in idx:
                inst = dataset[i]
                ids = np.asarray(inst.token_ids, dtype=np.intp)
                cache = _forward_cache(params, params.embeddings[ids].astype(np.float64))
                loss -= np.log(max(cache.probs[inst.label], 1e-300))
                d_logits = cache.probs - eye[inst.label]
                # output layer
                grads["out_w"] += np.outer(d_logits, cache.z)
                grads["out_b"] += d_logits
                dz = params.out_w.T @ d_logits
                du = dz * (cache.u > 0)
                grads["hidden_w"] += np.outer(du, cache.c)
                grads["hidden_b"] += du
                dc = params.hidden_w.T @ du
                d_alpha = cache.H @ dc
                ds = cache.alpha * (d_alpha - cache.alpha @ d_alpha)
                grads["attn_vec"] += cache.G.T @ ds
                dG = np.outer(ds, params.attn_vec)
                dA = dG * (1.0 - cache.G ** 2)
                grads["attn_proj"] += dA.T @ cache.H
                dH = dA @ params.attn_proj + np.outer(cache.alpha, dc)
                np.add.at(grads["embeddings"], ids, dH)
            loss /= len(idx)
            if not np.isfinite(loss):
                raise RuntimeError(f"non-finite loss at epoch {epoch}, batch {batch_no}")
            scale = cfg.lr / len(idx)
            for name, g in grads.items():
                getattr(params, name)[...] -= scale * g
    return params.freeze()


def accuracy(params: ModelParams, dataset: list[EncodedInstance]) -> float:
    correct = sum(
        forward(params, inst).predicted_class == inst.label for inst in dataset
    )
    return correct / len(dataset)


def save_params(params: ModelParams, path) -> None:
    """Flat binary layout: magic, int64 dims (V, d, h, C, seed), then the
    matrices row-major in declaration order, all float64."""
    with Path(path).open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack(
            "<5q", params.vocab_size, params.embed_dim,
            params.hidden_dim, params.num_classes, params.seed,
        ))
        for arr in (params.embeddings, params.attn_proj, params.attn_vec,
                    params.hidden_w, params.hidden_b, params.out_w, params.out_b):
            fh.write(np.ascontiguousarray(arr, dtype=np.float64).tobytes())


def load_params(path) -> ModelParams:
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise ValueError(f"{path}: not a model parameter file (bad magic)")
    V, d, h, C, seed = struct.unpack_from("<5q", raw, 8)
    offset = 8 + 5 * 8

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype=np.float64, count=count, offset=offset).reshape(shape).copy()
        offset += count * 8
        return arr

    params = ModelParams(
        embeddings=take((V, d)),
        attn_proj=take((d, d)),
        attn_vec=take((d,)),
        hidden_w=take((h, d)),
        hidden_b=take((h,)),
        out_w=take((C, h)),
        out_b=take((C,)),
        seed=int(seed),
    )
    return params.freeze()
