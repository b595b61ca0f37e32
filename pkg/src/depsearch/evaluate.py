"""Attachment scores."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .conll import Sentence, flag_punctuation


@dataclass(frozen=True)
class ScoreReport:
    uas: float
    las: float
    total: int
    scored: int
    excluded: int
    exact_match: float
    sentences: int

    def machine(self) -> str:
        """``key=value`` lines, full precision."""
        rows = [
            ("uas", repr(self.uas)), ("las", repr(self.las)), ("tokens", self.total),
            ("scored", self.scored), ("excluded_punct", self.excluded),
            ("exact_match", repr(self.exact_match)), ("sentences", self.sentences),
        ]
        return "\n".join(f"{k}={v}" for k, v in rows)

    def table(self) -> str:
        return "\n".join([
            f"{'metric':<14}{'value':>10}",
            f"{'UAS':<14}{100 * self.uas:>9.2f}%",
            f"{'LAS':<14}{100 * self.las:>9.2f}%",
            f"{'exact match':<14}{100 * self.exact_match:>9.2f}%",
            f"{'tokens':<14}{self.total:>10d}",
            f"{'scored':<14}{self.scored:>10d}",
            f"{'punct skipped':<14}{self.excluded:>10d}",
        ])


def score(predicted: Sequence[Sentence], gold: Sequence[Sentence], exclude_punct: bool = True) -> ScoreReport:
    """UAS/LAS of ``predicted`` against ``gold``; punctuation judged on the gold form."""
    if len(predicted) != len(gold):
        raise ValueError(f"{len(predicted)} predicted sentences vs {len(gold)} gold sentences")
    total = scored = head_ok = both_ok = exact = 0
    for k, (p, g) in enumerate(zip(predicted, gold)):
        if len(p) != len(g):
            raise ValueError(f"sentence {k + 1}: {len(p)} predicted tokens vs {len(g)} gold tokens")
        all_right = True
        for pt, gt in zip(p.tokens, g.tokens):
            total += 1
            if exclude_punct and flag_punctuation(gt.form):
                continue
            scored += 1
            if pt.head == gt.head:
                head_ok += 1
                if pt.deprel == gt.deprel:
                    both_ok += 1
            else:
                all_right = False
        exact += all_right
    return ScoreReport(
        uas=head_ok / scored if scored else 0.0,
        las=both_ok / scored if scored else 0.0,
        total=total,
        scored=scored,
        excluded=total - scored,
        exact_match=exact / len(gold) if gold else 0.0,
        sentences=len(gold),
    )
