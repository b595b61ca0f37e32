"""Left-to-right sequence labeling under Hamming loss.

Exists mainly to exercise the search engine on a second task: one predict
per token, the reference is the gold tag, and features are the hashed token
plus the previously predicted tag.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence

from .features import CONSTANT_ID, CONSTANT_NAMESPACE, FeatureVector, combine, hash32

_WORD = hash32("tagger:word")
_PREV = hash32("tagger:prev")
_START = hash32("<s>")


@dataclass
class TaggedSequence:
    tokens: list[str]
    tags: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)


class TagSet:
    def __init__(self, names: Sequence[str]):
        self.names = list(names)
        self.ids = {t: i for i, t in enumerate(self.names)}

    def __len__(self) -> int:
        return len(self.names)

    @classmethod
    def from_sequences(cls, seqs: Iterable[TaggedSequence]) -> "TagSet":
        return cls(sorted({t for s in seqs for t in s.tags}))


def hamming(predicted: Sequence, gold: Sequence) -> int:
    if len(predicted) != len(gold):
        raise ValueError("sequences differ in length")
    return sum(p != g for p, g in zip(predicted, gold))


class SequenceTaggerTask:
    def __init__(self, tagset: TagSet, bits: int = 18):
        self.tagset = tagset
        self.bits = bits

    @property
    def role_classes(self) -> tuple[int, ...]:
        return (len(self.tagset),)

    def features(self, word: str, prev: int | None) -> FeatureVector:
        mask = (1 << self.bits) - 1
        prev_h = _START if prev is None else prev
        return FeatureVector(self.bits, indices={
            "w": [hash32(word, _WORD) & mask],
            "p": [combine(_PREV, prev_h) & mask],
            CONSTANT_NAMESPACE: [CONSTANT_ID & mask],
        }, values={"w": [1.0], "p": [1.0], CONSTANT_NAMESPACE: [1.0]})

    def run(self, session, seq: TaggedSequence) -> list[int]:
        gold = [self.tagset.ids.get(t, 0) for t in seq.tags] if seq.tags else [0] * len(seq)
        allowed = range(len(self.tagset))
        output: list[int] = []
        for i, word in enumerate(seq.tokens):
            prev = output[-1] if output else None
            fv = self.features(word, prev)
            output.append(session.predict(fv, gold[i], allowed))
        session.loss(hamming(output, gold))
        return output


def read_tagged(stream: IO[str] | Iterable[str]) -> Iterator[TaggedSequence]:
    """Two columns (token, tag) per line; blank line between sequences.

    A line with a single column is an untagged token.
    """
    tokens: list[str] = []
    tags: list[str] = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if tokens:
                yield TaggedSequence(tokens, tags)
                tokens, tags = [], []
            continue
        cols = line.split("\t")
        if len(cols) > 2:
            raise ValueError(f"line {lineno}: expected 'token<TAB>tag', got {len(cols)} columns")
        if tokens and (len(cols) == 2) != (len(tags) == len(tokens)):
            raise ValueError(f"line {lineno}: sequence mixes tagged and untagged tokens")
        tokens.append(cols[0])
        if len(cols) == 2:
            tags.append(cols[1])
    if tokens:
        yield TaggedSequence(tokens, tags)


def write_tagged(seqs: Iterable[TaggedSequence], stream: IO[str]) -> None:
    for seq in seqs:
        if seq.tags:
            for tok, tag in zip(seq.tokens, seq.tags):
                stream.write(f"{tok}\t{tag}\n")
        else:
            for tok in seq.tokens:
                stream.write(f"{tok}\n")
        stream.write("\n")
