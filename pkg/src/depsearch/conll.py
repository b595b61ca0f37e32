"""CoNLL-X treebank reading and writing, projectivity and punctuation tests.

Format: ten tab-separated columns per token
``ID FORM LEMMA CPOSTAG POSTAG FEATS HEAD DEPREL PHEAD PDEPREL``, UTF-8,
blank line between sentences.  Lines starting with ``#`` are skipped.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field, replace
from typing import IO, Iterable, Iterator, Sequence

POS_COLUMNS = ("postag", "cpostag")


class ConllFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<stream>"):
        self.line = line
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass
class Token:
    id: int
    form: str
    lemma: str = "_"
    cpostag: str = "_"
    postag: str = "_"
    feats: str = "_"
    head: int = 0
    deprel: str = "_"
    phead: str = "_"
    pdeprel: str = "_"
    pos_column: str = "postag"

    @property
    def pos(self) -> str:
        return self.cpostag if self.pos_column == "cpostag" else self.postag

    @property
    def is_punct(self) -> bool:
        return flag_punctuation(self.form)

    def columns(self) -> list[str]:
        return [str(self.id), self.form, self.lemma, self.cpostag, self.postag, self.feats,
                str(self.head), self.deprel, self.phead, self.pdeprel]


@dataclass
class Sentence:
    tokens: list[Token] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def heads(self) -> list[int]:
        return [t.head for t in self.tokens]

    @property
    def labels(self) -> list[str]:
        return [t.deprel for t in self.tokens]

    @property
    def words(self) -> list[str]:
        return [t.form for t in self.tokens]

    def with_tree(self, heads: Sequence[int], labels: Sequence[str] | None = None) -> "Sentence":
        """Copy with HEAD (and DEPREL) replaced, e.g. by a parser's output."""
        if len(heads) != len(self.tokens):
            raise ValueError("tree length differs from sentence length")
        labels = labels if labels is not None else [t.deprel for t in self.tokens]
        return Sentence([replace(t, head=int(h), deprel=str(l)) for t, h, l in zip(self.tokens, heads, labels)])


def _parse_block(lines: list[tuple[int, str]], pos_column: str, source: str) -> Sentence:
    tokens = []
    for expected, (lineno, line) in enumerate(lines, start=1):
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConllFormatError(f"expected 10 tab-separated columns, found {len(cols)}", lineno, source)
        try:
            tid = int(cols[0])
        except ValueError:
            raise ConllFormatError(f"token id {cols[0]!r} is not an integer", lineno, source) from None
        if tid != expected:
            kind = "duplicate" if tid < expected else "out-of-order"
            raise ConllFormatError(f"{kind} token id {tid}, expected {expected}", lineno, source)
        try:
            head = int(cols[6])
        except ValueError:
            raise ConllFormatError(f"head {cols[6]!r} is not an integer", lineno, source) from None
        tokens.append((lineno, Token(tid, cols[1], cols[2], cols[3], cols[4], cols[5], head, cols[7],
                                     cols[8], cols[9], pos_column)))
    n = len(tokens)
    for lineno, tok in tokens:
        if not 0 <= tok.head <= n:
            raise ConllFormatError(f"head {tok.head} out of range for a {n}-token sentence", lineno, source)
        if tok.head == tok.id:
            raise ConllFormatError(f"token {tok.id} is its own head", lineno, source)
    return Sentence([t for _, t in tokens])


def read_conll(stream: IO[str] | Iterable[str], pos_column: str = "postag", source: str | None = None) -> Iterator[Sentence]:
    """Yield sentences from a CoNLL-X stream; errors carry line numbers."""
    if pos_column not in POS_COLUMNS:
        raise ValueError(f"pos_column must be one of {POS_COLUMNS}")
    source = source or getattr(stream, "name", "<stream>")
    block: list[tuple[int, str]] = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            if block:
                yield _parse_block(block, pos_column, source)
                block = []
            continue
        if line.startswith("#") and not block:
            continue
        block.append((lineno, line))
    if block:
        yield _parse_block(block, pos_column, source)


def load_conll(path, pos_column: str = "postag") -> list[Sentence]:
    with open(path, encoding="utf-8") as fh:
        return list(read_conll(fh, pos_column, str(path)))


def write_conll(sentences: Iterable[Sentence], stream: IO[str]) -> None:
    for sent in sentences:
        for tok in sent.tokens:
            stream.write("\t".join(tok.columns()) + "\n")
        stream.write("\n")


def is_projective(heads: Sequence[int]) -> bool:
    """True iff every arc's span is dominated by its head (Root = position 0).

    ``heads[i]`` is the head of word ``i + 1``.
    """
    n = len(heads)
    parent = [-1] + list(heads)

    def dominated(word: int, head: int) -> bool:
        seen = 0
        while word != head:
            if word <= 0 or seen > n:
                return head == 0 and word == 0
            word = parent[word]
            seen += 1
        return True

    for dep in range(1, n + 1):
        head = parent[dep]
        lo, hi = min(head, dep), max(head, dep)
        for k in range(lo + 1, hi):
            if not dominated(k, head):
                return False
    return True


def flag_punctuation(form: str) -> bool:
    """True iff ``form`` is non-empty and every character is Unicode punctuation (P*)."""
    return bool(form) and all(unicodedata.category(ch).startswith("P") for ch in form)
