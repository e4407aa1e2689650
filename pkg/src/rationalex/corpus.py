"""Dataset loading, vocabulary construction and integer encoding.

The on-disk dataset format is one JSON record per line with fields
``{"id": str, "tokens": [str], "label": int}``.  Tokens are pre-tokenized
whole words; no subword handling happens here.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

PAD_INDEX = 0
MASK_INDEX = 1
UNK_INDEX = 2
NUM_SPECIALS = 3

UNK_TOKEN = "<unk>"


class DataFormatError(ValueError):
    """A dataset or config file violated the expected format."""


@dataclass(frozen=True)
class Instance:
    """One raw classification example: an id, surface tokens and a class label."""

    id: str
    tokens: tuple[str, ...]
    label: int

    def __post_init__(self):
        if len(self.tokens) == 0:
            raise DataFormatError(f"instance {self.id!r} has an empty token list")


@dataclass(frozen=True)
class EncodedInstance:
    """An instance mapped into vocabulary indices, ready for the model."""

    id: str
    token_ids: tuple[int, ...]
    label: int

    @property
    def length(self) -> int:
        return len(self.token_ids)


@dataclass
class Vocab:
    """Token-to-index map with reserved specials PAD=0, MASK=1, UNK=2."""

    token_to_index: dict[str, int] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return NUM_SPECIALS + len(self.token_to_index)

    def index(self, token: str) -> int:
        return self.token_to_index.get(token, UNK_INDEX)

    def token(self, index: int) -> str:
        if not hasattr(self, "_index_to_token"):
            self._index_to_token = {i: t for t, i in self.token_to_index.items()}
        return self._index_to_token.get(index, UNK_TOKEN)

    def save(self, path) -> None:
        """Persist as two tab-separated columns: token, index."""
        lines = [f"{tok}\t{idx}\n" for tok, idx in self.token_to_index.items()]
        Path(path).write_text("".join(lines), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocab":
        mapping = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                tok, idx = line.rsplit("\t", 1)
                mapping[tok] = int(idx)
            except ValueError as exc:
                raise DataFormatError(f"bad vocab line {lineno}: {line!r}") from exc
        return cls(mapping)


def load_dataset(path) -> list[Instance]:
    """Read a line-delimited JSON dataset, preserving input order.

    Raises DataFormatError naming the offending line on any malformed record.
    Labels are not range-checked here; encode() validates them against the
    number of classes.
    """
    path = Path(path)
    instances = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                inst = Instance(
                    id=str(record["id"]),
                    tokens=tuple(str(t) for t in record["tokens"]),
                    label=int(record["label"]),
                )
            except DataFormatError:
                raise
            except (ValueError, TypeError, KeyError) as exc:
                raise DataFormatError(f"{path}: malformed record on line {lineno}: {exc}") from exc
            instances.append(inst)
    return instances


def write_dataset(path, instances) -> None:
    """Inverse of load_dataset; one JSON record per line."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(
                {"id": inst.id, "tokens": list(inst.tokens), "label": inst.label},
                sort_keys=True,
            ) + "\n")


def build_vocab(dataset: list[Instance], min_freq: int = 1) -> Vocab:
    """Index every token with frequency >= min_freq, starting at index 3.

    Ordering is frequency descending then lexicographic, so the result is a
    pure function of (dataset, min_freq).
    """
    if not dataset:
        raise ValueError("cannot build a vocabulary from an empty dataset")
    if min_freq < 1:
        raise ValueError(f"min_freq must be >= 1, got {min_freq}")
    counts = Counter(tok for inst in dataset for tok in inst.tokens)
    kept = sorted(
        (tok for tok, n in counts.items() if n >= min_freq),
        key=lambda tok: (-counts[tok], tok),
    )
    return Vocab({tok: NUM_SPECIALS + i for i, tok in enumerate(kept)})


def encode(instance: Instance, vocab: Vocab, num_classes: int) -> EncodedInstance:
    """Map tokens to vocab indices (unknowns to UNK) and range-check the label."""
    if not 0 <= instance.label < num_classes:
        raise ValueError(
            f"instance {instance.id!r} has label {instance.label}, "
            f"outside [0, {num_classes})"
        )
    return EncodedInstance(
        id=instance.id,
        token_ids=tuple(vocab.index(tok) for tok in instance.tokens),
        label=instance.label,
    )


def encode_dataset(dataset: list[Instance], vocab: Vocab, num_classes: int) -> list[EncodedInstance]:
    return [encode(inst, vocab, num_classes) for inst in dataset]


def decode(encoded: EncodedInstance, vocab: Vocab) -> list[str]:
    """Recover surface tokens; out-of-vocab positions come back as the UNK token."""
    return [vocab.token(i) for i in encoded.token_ids]
