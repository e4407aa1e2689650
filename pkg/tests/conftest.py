"""Shared fixtures: a trained toy model, corpora, and hand-built planted models."""

import numpy as np
import pytest

from rationalex.corpus import EncodedInstance, build_vocab, encode_dataset
from rationalex.model import ModelParams, TrainConfig, train
from rationalex.synthetic import SyntheticSpec, generate_corpus, split_corpus


def random_params(rng: np.random.Generator, vocab_size=20, embed_dim=6,
                  hidden_dim=5, num_classes=3) -> ModelParams:
    """Random finite weights; enough structure for gradient checks."""
    return ModelParams(
        embeddings=rng.normal(0, 0.5, (vocab_size, embed_dim)),
        attn_proj=rng.normal(0, 0.5, (embed_dim, embed_dim)),
        attn_vec=rng.normal(0, 0.5, embed_dim),
        hidden_w=rng.normal(0, 0.5, (hidden_dim, embed_dim)),
        hidden_b=rng.normal(0, 0.5, hidden_dim),
        out_w=rng.normal(0, 0.5, (num_classes, hidden_dim)),
        out_b=rng.normal(0, 0.5, num_classes),
    )


def random_instance(rng: np.random.Generator, vocab_size=20, t_min=3, t_max=9,
                    num_classes=3, name="r") -> EncodedInstance:
    T = int(rng.integers(t_min, t_max + 1))
    ids = tuple(int(i) for i in rng.integers(3, vocab_size, T))
    return EncodedInstance(name, ids, int(rng.integers(num_classes)))


def planted_params(vocab_size: int, drivers: dict[int, tuple[int, float]],
                   num_classes: int = 2, gain: float = 4.0) -> ModelParams:
    """A hand-built model where only ``drivers`` tokens carry signal.

    Embedding dim equals the class count; a driver token for class c has
    embedding strength * e_c and every other token embeds to zero, so
    masking a non-driver changes nothing at all.  The hidden layer is the
    identity shifted into the relu's linear regime, and the output layer
    reads each class off its own embedding axis.
    """
    d = num_classes
    E = np.zeros((vocab_size, d))
    for token_id, (cls, strength) in drivers.items():
        E[token_id, cls] = strength
    return ModelParams(
        embeddings=E,
        attn_proj=np.eye(d),
        attn_vec=np.ones(d),
        hidden_w=np.eye(d),
        hidden_b=np.ones(d),
        out_w=gain * np.eye(d),
        out_b=np.zeros(num_classes),
    ).freeze()


@pytest.fixture(scope="session")
def toy_data():
    """Noisy planted-signal corpus, split and encoded; 2 classes."""
    spec = SyntheticSpec(n_instances=120, num_classes=2, noise=0.05, seed=3)
    instances = generate_corpus(spec)
    train_raw, dev_raw, test_raw = split_corpus(instances)
    vocab = build_vocab(train_raw)
    return {
        "vocab": vocab,
        "train": encode_dataset(train_raw, vocab, 2),
        "dev": encode_dataset(dev_raw, vocab, 2),
        "test": encode_dataset(test_raw, vocab, 2),
        "num_classes": 2,
    }


@pytest.fixture(scope="session")
def toy_params(toy_data):
    params = train(toy_data["train"], TrainConfig(
        vocab_size=toy_data["vocab"].size, num_classes=2,
        embed_dim=12, hidden_dim=12, lr=0.5, epochs=30, batch=8, seed=0,
    ))
    return params


@pytest.fixture(scope="session")
def separable_data():
    """Noise-free corpus: each class's signal tokens never appear off-class."""
    spec = SyntheticSpec(n_instances=80, num_classes=2, noise=0.0, seed=0, id_prefix="sep")
    instances = generate_corpus(spec)
    vocab = build_vocab(instances)
    return {"vocab": vocab, "encoded": encode_dataset(instances, vocab, 2)}


@pytest.fixture(scope="session")
def separable_params(separable_data):
    return train(separable_data["encoded"], TrainConfig(
        vocab_size=separable_data["vocab"].size, num_classes=2,
        embed_dim=12, hidden_dim=12, lr=0.5, epochs=30, batch=8, seed=0,
    ))


@pytest.fixture(scope="session")
def oracle_corpus():
    """200 short instances for exhaustive search comparisons."""
    spec = SyntheticSpec(n_instances=200, num_classes=2, t_min=6, t_max=10,
                         noise=0.05, seed=11, id_prefix="ora")
    instances = generate_corpus(spec)
    vocab = build_vocab(instances)
    return {
        "vocab": vocab,
        "encoded": encode_dataset(instances, vocab, 2),
    }


@pytest.fixture(scope="session")
def oracle_params(oracle_corpus):
    return train(oracle_corpus["encoded"], TrainConfig(
        vocab_size=oracle_corpus["vocab"].size, num_classes=2,
        embed_dim=10, hidden_dim=10, lr=0.5, epochs=20, batch=8, seed=1,
    ))
