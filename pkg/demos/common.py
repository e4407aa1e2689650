"""Shared setup for the demo scripts: a small trained model on synthetic data."""

from rationalex import (
    SyntheticSpec,
    TrainConfig,
    build_vocab,
    encode_dataset,
    generate_corpus,
    split_corpus,
    train,
)


def make_toy_task(n_instances=120, noise=0.05, seed=3, train_seed=0):
    """Generate a planted-signal corpus, train the classifier, return both."""
    spec = SyntheticSpec(n_instances=n_instances, num_classes=2, noise=noise, seed=seed)
    instances = generate_corpus(spec)
    train_raw, dev_raw, test_raw = split_corpus(instances)
    vocab = build_vocab(train_raw)
    encoded_train = encode_dataset(train_raw, vocab, 2)
    encoded_test = encode_dataset(test_raw, vocab, 2)
    params = train(encoded_train, TrainConfig(
        vocab_size=vocab.size, num_classes=2, embed_dim=12, hidden_dim=12,
        lr=0.5, epochs=30, batch=8, seed=train_seed,
    ))
    return params, vocab, encoded_train, encoded_test
