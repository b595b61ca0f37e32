"""Exhaustive verification of the dynamic oracle against brute-force search.

For a gold tree, every configuration reachable from the initial one is
enumerated.  The best achievable completion loss after each action is found
by memoised exhaustive search over all action sequences (unlabeled loss), and
compared with the oracle's arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .parser import INVALID_COST, NO_HEAD, REDUCE_LEFT, REDUCE_RIGHT, SHIFT, Action, Configuration, oracle_action, oracle_costs


def random_projective_tree(n: int, rng: np.random.Generator, multi_root: float = 0.5) -> list[int]:
    """Random projective tree; returns heads for words 1..n (0 = Root).

    With probability ``multi_root`` Root may take several children.
    """
    heads = [0] * (n + 1)

    def attach(lo: int, hi: int, parent: int, max_chunks: int | None = None):
        # words lo..hi become one or more contiguous subtrees under parent
        start = lo
        while start <= hi:
            end = int(rng.integers(start, hi + 1))
            if max_chunks == 1:
                end = hi
            h = int(rng.integers(start, end + 1))
            heads[h] = parent
            attach(start, h - 1, h)
            attach(h + 1, end, h)
            start = end + 1

    attach(1, n, 0, None if rng.random() < multi_root else 1)
    return heads[1:]


def random_tree(n: int, rng: np.random.Generator) -> list[int]:
    """Random (usually non-projective) tree: words join the tree in random order."""
    order = [int(x) for x in rng.permutation(np.arange(1, n + 1))]
    placed = [0]
    heads = [0] * (n + 1)
    for w in order:
        heads[w] = placed[int(rng.integers(0, len(placed)))]
        placed.append(w)
    return heads[1:]


def brute_force_costs(stack: tuple[int, ...], p: int, gold: tuple[int, ...]) -> dict[int, int]:
    """Best total future loss after each valid action, minus the best overall.

    ``gold[m]`` is the gold head of position m (``gold[0] == NO_HEAD``).
    """
    n = len(gold) - 1

    @lru_cache(maxsize=None)
    def best(stack: tuple[int, ...], p: int) -> int:
        if p > n and len(stack) == 1:
            return 0
        return min(_after(stack, p, a) for a in _valid(stack, p, n))

    def _after(stack, p, a):
        if a == SHIFT:
            return best(stack + (p,), p + 1)
        s1 = stack[-1]
        head = stack[-2] if a == REDUCE_RIGHT else p
        return (gold[s1] != head) + best(stack[:-1], p)

    totals = {a: _after(stack, p, a) for a in _valid(stack, p, n)}
    low = min(totals.values())
    return {a: c - low for a, c in totals.items()}


def _valid(stack, p, n):
    acts = []
    if p <= n:
        acts.append(SHIFT)
    if len(stack) > 1:
        acts.append(REDUCE_RIGHT)
        if p <= n:
            acts.append(REDUCE_LEFT)
    return acts


def reachable_states(n: int) -> list[tuple[tuple[int, ...], int]]:
    """All non-terminal (stack, buffer front) pairs reachable from the start."""
    seen = set()
    frontier = [((0,), 1)]
    while frontier:
        state = frontier.pop()
        if state in seen:
            continue
        stack, p = state
        if p > n and len(stack) == 1:
            continue
        seen.add(state)
        for a in _valid(stack, p, n):
            if a == SHIFT:
                frontier.append((stack + (p,), p + 1))
            else:
                frontier.append((stack[:-1], p))
    return sorted(seen)


def _config(stack, p, n) -> Configuration:
    cfg = Configuration(n)
    cfg.stack = list(stack)
    cfg.p = p
    return cfg


@dataclass
class CheckReport:
    trees: int = 0
    states: int = 0
    cost_mismatches: int = 0
    action_mismatches: int = 0
    examples: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.cost_mismatches == 0 and self.action_mismatches == 0

    def summary(self) -> str:
        verdict = "PASS" if self.ok else "FAIL"
        return (f"{verdict}: {self.trees} trees, {self.states} configurations, "
                f"{self.cost_mismatches} cost mismatches, {self.action_mismatches} tie-break mismatches")


def check_tree(heads: list[int], report: CheckReport) -> None:
    n = len(heads)
    gold = (NO_HEAD,) + tuple(heads)
    report.trees += 1
    for stack, p in reachable_states(n):
        report.states += 1
        cfg = _config(stack, p, n)
        want = brute_force_costs(stack, p, gold)
        got = oracle_costs(cfg, gold)
        got_valid = {a: got[a] for a in Action if got[a] != INVALID_COST}
        if got_valid != want:
            report.cost_mismatches += 1
            if len(report.examples) < 5:
                report.examples.append(f"heads={heads} stack={list(stack)} p={p}: oracle {got_valid} brute {want}")
            continue
        expected_action = max(a for a, c in want.items() if c == 0)
        if oracle_action(cfg, gold) != expected_action:
            report.action_mismatches += 1
            if len(report.examples) < 5:
                report.examples.append(f"heads={heads} stack={list(stack)} p={p}: tie-break picked "
                                       f"{oracle_action(cfg, gold).name}, expected {Action(expected_action).name}")


def run_check(cases: int = 500, max_len: int = 6, seed: int = 1) -> CheckReport:
    rng = np.random.default_rng(seed)
    report = CheckReport()
    for _ in range(cases):
        n = int(rng.integers(1, max_len + 1))
        check_tree(random_projective_tree(n, rng), report)
    return report
