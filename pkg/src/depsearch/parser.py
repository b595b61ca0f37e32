"""Labeled arc-hybrid dependency parsing as a learning-to-search task.

Positions are 1-based; position 0 is the Root sentinel that sits at the
bottom of the stack and is never popped.  Actions:

* ``SHIFT``        push the buffer front ``w_p``; valid when the buffer is non-empty
* ``REDUCE_RIGHT`` pop ``s1`` and attach it to ``s2``; valid when ``|S| > 1``
* ``REDUCE_LEFT``  pop ``s1`` and attach it to ``w_p``; valid when the buffer
  is non-empty and ``|S| > 1``

Action ids follow that enumeration order, which the oracle tie-break uses.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

from .features import CONSTANT_ID, CONSTANT_NAMESPACE, FeatureVector, InteractionSpec, combine, hash32

INVALID_COST = 100
NO_HEAD = -1


class Action(IntEnum):
    SHIFT = 0
    REDUCE_RIGHT = 1
    REDUCE_LEFT = 2


SHIFT, REDUCE_RIGHT, REDUCE_LEFT = Action.SHIFT, Action.REDUCE_RIGHT, Action.REDUCE_LEFT
ACTION_ROLE = 0
LABEL_ROLE = {REDUCE_RIGHT: 1, REDUCE_LEFT: 2}


class TransitionError(ValueError):
    pass


class Configuration:
    """Parser state: stack, buffer front ``p``, arcs and child bookkeeping.

    ``heads[m]`` / ``labels[m]`` hold the arc assigned to modifier ``m``
    (``NO_HEAD`` / ``None`` until assigned).  For every position we keep the
    number of left and right children and the two outermost children on each
    side (0 when absent; Root is never a child so 0 is free as a sentinel).
    """

    __slots__ = ("n", "stack", "p", "heads", "labels", "left_count", "right_count",
                 "leftmost", "leftmost2", "rightmost", "rightmost2")

    def __init__(self, n: int):
        self.n = n
        self.stack = [0]
        self.p = 1
        size = n + 1
        self.heads = [NO_HEAD] * size
        self.labels: list[int | None] = [None] * size
        self.left_count = [0] * size
        self.right_count = [0] * size
        self.leftmost = [0] * size
        self.leftmost2 = [0] * size
        self.rightmost = [0] * size
        self.rightmost2 = [0] * size

    def copy(self) -> "Configuration":
        new = Configuration.__new__(Configuration)
        new.n = self.n
        for name in Configuration.__slots__[1:]:
            value = getattr(self, name)
            setattr(new, name, list(value) if isinstance(value, list) else value)
        return new

    @property
    def buffer(self) -> list[int]:
        return list(range(self.p, self.n + 1))

    def is_terminal(self) -> bool:
        return self.p > self.n and len(self.stack) == 1

    def valid_actions(self) -> list[Action]:
        acts = []
        has_buffer = self.p <= self.n
        deep = len(self.stack) > 1
        if has_buffer:
            acts.append(SHIFT)
        if deep:
            acts.append(REDUCE_RIGHT)
        if has_buffer and deep:
            acts.append(REDUCE_LEFT)
        return acts

    def measure(self) -> int:
        return 2 * (self.n - self.p + 1) + len(self.stack)

    def apply(self, action: int, label: int | None = None) -> None:
        """Apply ``action`` in place."""
        if self.is_terminal():
            raise TransitionError("no transition applies to a terminal configuration")
        if action not in self.valid_actions():
            raise TransitionError(
                f"{Action(action).name} is not valid with |S|={len(self.stack)} and "
                f"{self.n - self.p + 1} buffer words"
            )
        before = self.measure()
        if action == SHIFT:
            self.stack.append(self.p)
            self.p += 1
        else:
            child = self.stack.pop()
            if action == REDUCE_RIGHT:
                head = self.stack[-1]
                self.rightmost2[head] = self.rightmost[head]
                self.rightmost[head] = child
                self.right_count[head] += 1
            else:
                head = self.p
                self.leftmost2[head] = self.leftmost[head]
                self.leftmost[head] = child
                self.left_count[head] += 1
            self.heads[child] = head
            self.labels[child] = label
        assert self.measure() == before - 1

    def check_bookkeeping(self) -> bool:
        """Recompute child bookkeeping from the arcs and compare."""
        for h in range(self.n + 1):
            left = sorted(m for m in range(1, self.n + 1) if self.heads[m] == h and m < h)
            right = sorted(m for m in range(1, self.n + 1) if self.heads[m] == h and m > h)
            expect = (
                len(left), len(right),
                left[0] if left else 0, left[1] if len(left) > 1 else 0,
                right[-1] if right else 0, right[-2] if len(right) > 1 else 0,
            )
            got = (self.left_count[h], self.right_count[h], self.leftmost[h], self.leftmost2[h],
                   self.rightmost[h], self.rightmost2[h])
            if expect != got:
                return False
        return True


def valid_actions(config: Configuration) -> list[Action]:
    if config.is_terminal():
        raise TransitionError("terminal configuration has no valid actions")
    return config.valid_actions()


def apply_transition(config: Configuration, action: int, label: int | None = None) -> Configuration:
    """Functional form of ``Configuration.apply``."""
    new = config.copy()
    new.apply(action, label)
    return new


def oracle_costs(config: Configuration, gold_heads: Sequence[int], short_circuit: bool = False) -> list[int | None]:
    """Number of gold arcs each action makes unreachable.

    Indexed by action id; disallowed actions get ``INVALID_COST``.  With
    ``short_circuit`` the two cheap rules (``w_p``'s gold head is ``s1`` ->
    SHIFT; ``s1``'s gold head is ``w_p`` -> REDUCE_LEFT) return at once, with
    the chosen action at 0 and the other entries left as ``None``.
    ``gold_heads[0]`` must be ``NO_HEAD``.
    """
    stack, p, n = config.stack, config.p, config.n
    has_buffer = p <= n
    deep = len(stack) > 1
    s1 = stack[-1]
    if short_circuit:
        if has_buffer and gold_heads[p] == s1:
            return [0, None, None]
        if has_buffer and deep and gold_heads[s1] == p:
            return [None, None, 0]
    costs: list[int | None] = [INVALID_COST] * 3
    if has_buffer:
        c = 0
        for s in stack[:-1]:
            if gold_heads[s] == p or gold_heads[p] == s:
                c += 1
        if gold_heads[s1] == p:
            c += 1
        costs[SHIFT] = c
    if deep:
        c = 0
        head = gold_heads[s1]
        if has_buffer and head >= p:
            c += 1
        for i in range(p, n + 1):
            if gold_heads[i] == s1:
                c += 1
        costs[REDUCE_RIGHT] = c
    if has_buffer and deep:
        c = 0
        head = gold_heads[s1]
        for i in range(p + 1, n + 1):
            if gold_heads[i] == s1 or head == i:
                c += 1
        if gold_heads[p] == s1:
            c += 1
        if head == stack[-2]:
            c += 1
        costs[REDUCE_LEFT] = c
    return costs


def oracle_action(config: Configuration, gold_heads: Sequence[int]) -> Action:
    """Cheapest action; ties go to the later-enumerated action."""
    costs = oracle_costs(config, gold_heads, short_circuit=True)
    best = SHIFT
    for a in Action:
        c = costs[a]
        if c is None:
            continue
        if costs[best] is None or c <= costs[best]:
            best = a
    return Action(best)


def sentence_loss(heads: Sequence[int], labels: Sequence, gold_heads: Sequence[int], gold_labels: Sequence,
                  labeled: bool = True) -> int:
    """2 per wrong head, 1 per right head with wrong label (labeled); 1 per wrong head otherwise.

    Sequences are indexed by position with index 0 (Root) ignored.
    """
    if len(heads) != len(gold_heads):
        raise ValueError("predicted and gold trees cover different sentence lengths")
    loss = 0
    for m in range(1, len(gold_heads)):
        if heads[m] == NO_HEAD:
            raise ValueError(f"position {m} has no predicted head")
        if heads[m] != gold_heads[m]:
            loss += 2 if labeled else 1
        elif labeled and labels[m] != gold_labels[m]:
            loss += 1
    return loss


# ---------------------------------------------------------------------------
# labels


class LabelSet:
    """Arc-label dictionary built from training data.

    The root label is the label most often carried by Root attachments.  If it
    never occurs under a real head in training it is reserved: only offered
    when the arc being labeled hangs off Root.
    """

    def __init__(self, names: Sequence[str], root_label: str | None = None, root_exclusive: bool = False):
        self.names = list(names)
        self.ids = {name: i for i, name in enumerate(self.names)}
        self.root_label = root_label
        self.root_exclusive = bool(root_exclusive and root_label in self.ids)
        everything = tuple(range(len(self.names)))
        self._all = everything
        if self.root_exclusive and len(everything) > 1:
            self._non_root = tuple(i for i in everything if i != self.ids[root_label])
        else:
            self._non_root = everything

    def __len__(self) -> int:
        return len(self.names)

    def id(self, name: str) -> int:
        return self.ids.get(name, -1)

    def name(self, i: int | None) -> str:
        if i is None or i < 0:
            return "_"
        return self.names[i]

    def allowed(self, head_is_root: bool) -> tuple[int, ...]:
        return self._all if head_is_root else self._non_root

    @classmethod
    def from_sentences(cls, sentences) -> "LabelSet":
        root_counts: Counter = Counter()
        inner = set()
        names = set()
        for sent in sentences:
            for tok in sent.tokens:
                names.add(tok.deprel)
                if tok.head == 0:
                    root_counts[tok.deprel] += 1
                else:
                    inner.add(tok.deprel)
        root = None
        if root_counts:
            root = sorted(root_counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
        return cls(sorted(names), root, root is not None and root not in inner)

    def to_dict(self) -> dict:
        return {"names": self.names, "root_label": self.root_label, "root_exclusive": self.root_exclusive}

    @classmethod
    def from_dict(cls, d: dict) -> "LabelSet":
        return cls(d["names"], d.get("root_label"), d.get("root_exclusive", False))


# ---------------------------------------------------------------------------
# features

SLOTS = ("s1", "s2", "s3", "b1", "b2", "b3", "s1L1", "s1L2", "s1R1", "s1R2", "b1L1", "b1L2", "s2L1")
CHILD_SLOTS = frozenset(SLOTS[6:])
VALUE_NAMESPACE = "val"

_B, _C, _D, _E, _F, _G, _H, _I, _J, _K, _L, _M, _N = SLOTS
_d = VALUE_NAMESPACE
PAIRS = (
    (_B, _C), (_B, _E), (_B, _B), (_C, _C), (_D, _D), (_E, _E), (_F, _F), (_G, _G), (_E, _F),
    (_B, _H), (_B, _J), (_E, _L),
    (_d, _B), (_d, _C), (_d, _D), (_d, _E), (_d, _F), (_d, _G), (_d, _d),
)
TRIPLES = (
    (_E, _F, _G), (_B, _E, _F), (_B, _C, _E), (_B, _C, _D), (_B, _E, _L), (_E, _L, _M), (_B, _H, _I),
    (_B, _C, _C), (_B, _J, _E), (_B, _H, _E), (_B, _J, _K), (_B, _E, _H), (_B, _E, _N), (_B, _E, _J),
)
FEATURE_SETS = {
    "uni": InteractionSpec(),
    "uni+bi": InteractionSpec(PAIRS, ()),
    "full": InteractionSpec(PAIRS, TRIPLES),
}

_SLOT_SALT = [hash32(f"slot:{name}") for name in SLOTS]
_VALUE_SALT = hash32("value")
_WORD_SEED = hash32("word")
_POS_SEED = hash32("pos")
_LABEL_SEED = hash32("label")
_EMPTY = hash32("<empty>")
_NONE = -1  # value id for "no such child / no buffer word"
MAX_VALUE = 5


@dataclass
class ParseInstance:
    """A sentence prepared for parsing: hashed words/tags and gold tree.

    Lists are indexed by position; index 0 is Root.
    """

    words: list[str]
    tags: list[str]
    gold_heads: list[int]
    gold_labels: list[int]
    word_hash: list[int]
    tag_hash: list[int]
    projective: bool = True

    @property
    def n(self) -> int:
        return len(self.words) - 1


def prepare(sentence, labels: LabelSet | None = None) -> ParseInstance:
    from .conll import is_projective

    words = ["<root>"] + [t.form for t in sentence.tokens]
    tags = ["<root>"] + [t.pos for t in sentence.tokens]
    heads = [NO_HEAD] + [t.head for t in sentence.tokens]
    if labels is not None:
        gl = [-1] + [labels.id(t.deprel) for t in sentence.tokens]
    else:
        gl = [-1] * len(words)
    return ParseInstance(
        words, tags, heads, gl,
        [0] + [hash32(w, _WORD_SEED) for w in words[1:]],
        [0] + [hash32(t, _POS_SEED) for t in tags[1:]],
        is_projective(heads[1:]),
    )


_LABEL_HASH_CACHE: dict[int, int] = {}


def _label_hash(label: int | None) -> int:
    key = -1 if label is None else label
    h = _LABEL_HASH_CACHE.get(key)
    if h is None:
        h = _LABEL_HASH_CACHE[key] = hash32(str(key), _LABEL_SEED)
    return h


def extract_features(config: Configuration, inst: ParseInstance, spec: InteractionSpec | None = None,
                     bits: int = 18, labeled: bool = True) -> FeatureVector:
    """Context-slot, value and constant namespaces for the current configuration."""
    stack, p, n = config.stack, config.p, config.n
    depth = len(stack)
    s1 = stack[-1] if depth >= 1 else 0
    s2 = stack[-2] if depth >= 2 else 0
    s3 = stack[-3] if depth >= 3 else 0
    b1 = p if p <= n else 0
    b2 = p + 1 if p + 1 <= n else 0
    b3 = p + 2 if p + 2 <= n else 0
    top = s1 if s1 else 0
    tokens = (
        s1, s2, s3, b1, b2, b3,
        config.leftmost[top] if top else 0, config.leftmost2[top] if top else 0,
        config.rightmost[top] if top else 0, config.rightmost2[top] if top else 0,
        config.leftmost[b1] if b1 else 0, config.leftmost2[b1] if b1 else 0,
        config.leftmost[s2] if s2 else 0,
    )
    mask = (1 << bits) - 1
    indices: dict[str, list[int]] = {}
    values: dict[str, list[float]] = {}
    wh, th, labels = inst.word_hash, inst.tag_hash, config.labels
    for j, (name, tok) in enumerate(zip(SLOTS, tokens)):
        salt = _SLOT_SALT[j]
        child = name in CHILD_SLOTS and labeled
        if tok:
            feats = [combine(salt, wh[tok]) & mask, combine(salt + 1, th[tok]) & mask]
            if child:
                feats.append(combine(salt + 2, _label_hash(labels[tok])) & mask)
        else:
            feats = [combine(salt, _EMPTY) & mask, combine(salt + 1, _EMPTY) & mask]
            if child:
                feats.append(combine(salt + 2, _EMPTY) & mask)
        indices[name] = feats
        values[name] = [1.0] * len(feats)

    def lab(pos):
        if not labeled or not pos or labels[pos] is None:
            return _NONE
        return labels[pos]

    vals = [
        min(MAX_VALUE, p - s1) if p <= n else _NONE,
        min(MAX_VALUE, config.left_count[top]) if top else _NONE,
        min(MAX_VALUE, config.right_count[top]) if top else _NONE,
        min(MAX_VALUE, config.left_count[b1]) if b1 else _NONE,
        lab(tokens[6]), lab(tokens[7]), lab(tokens[8]), lab(tokens[9]),
        lab(tokens[10]), lab(tokens[11]),
    ]
    indices[VALUE_NAMESPACE] = [combine(_VALUE_SALT + j, v & 0xFFFFFFFF) & mask for j, v in enumerate(vals)]
    values[VALUE_NAMESPACE] = [1.0] * len(vals)
    indices[CONSTANT_NAMESPACE] = [CONSTANT_ID & mask]
    values[CONSTANT_NAMESPACE] = [1.0]
    return FeatureVector(bits, spec if spec is not None else FEATURE_SETS["full"], indices, values)


class DependencyParserTask:
    """The decoder: features -> action (role 0) -> label (roles 1/2) -> transition.

    Label role 1 follows REDUCE_RIGHT and role 2 follows REDUCE_LEFT.  Every
    predict call also carries the analytic rollout costs (optimal reference
    rollout), which the engine may use in place of real rollouts.
    """

    def __init__(self, labels: LabelSet | None, feature_set: str = "full", bits: int = 18, labeled: bool = True):
        if feature_set not in FEATURE_SETS:
            raise ValueError(f"unknown feature set {feature_set!r}; choose from {sorted(FEATURE_SETS)}")
        if labeled and (labels is None or len(labels) == 0):
            raise ValueError("a labeled parser needs a non-empty label set")
        self.labels = labels
        self.feature_set = feature_set
        self.spec = FEATURE_SETS[feature_set]
        self.bits = bits
        self.labeled = labeled

    @property
    def role_classes(self) -> tuple[int, ...]:
        k = len(self.labels) if self.labeled else 1
        return (len(Action), k, k)

    def run(self, session, inst: ParseInstance):
        cfg = Configuration(inst.n)
        gold = inst.gold_heads
        weight = 2 if self.labeled else 1
        spec, bits, labeled = self.spec, self.bits, self.labeled
        while not cfg.is_terminal():
            cache: list[FeatureVector] = []

            def features():
                if not cache:
                    cache.append(extract_features(cfg, inst, spec, bits, labeled))
                return cache[0]

            def action_costs():
                full = oracle_costs(cfg, gold)
                return {a: weight * full[a] for a in cfg.valid_actions()}

            action = session.predict(features, lambda: oracle_action(cfg, gold), cfg.valid_actions(),
                                     ACTION_ROLE, action_costs)
            label = None
            if labeled and action != SHIFT:
                dep = cfg.stack[-1]
                head = cfg.stack[-2] if action == REDUCE_RIGHT else cfg.p
                allowed = self.labels.allowed(head == 0)
                gold_label = inst.gold_labels[dep]
                ref = gold_label if gold_label in allowed else allowed[0]
                if gold[dep] == head:
                    lcosts = {l: (0 if l == gold_label else 1) for l in allowed}
                else:
                    lcosts = dict.fromkeys(allowed, 0)
                label = session.predict(features, ref, allowed, LABEL_ROLE[action], lcosts)
            cfg.apply(action, label)
        session.loss(sentence_loss(cfg.heads, cfg.labels, gold, inst.gold_labels, labeled))
        return cfg.heads[1:], cfg.labels[1:]


def parse_sentence(task: DependencyParserTask, model, sentence, history: int = 1):
    """Decode one conll sentence; returns (heads, label names)."""
    from .search import decode

    inst = prepare(sentence, task.labels)
    _, (heads, labels) = decode(task, inst, model, history)
    if task.labeled:
        names = [task.labels.name(l) for l in labels]
    else:
        names = ["_"] * len(heads)
    return heads, names
