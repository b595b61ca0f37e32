"""Seeded generator for a small English-like dependency treebank.

Used for desk-scale experiments when no licensed treebank is around.  The
grammar covers subjects, auxiliaries, adverbs, objects, determiners,
adjectives, noun compounds, numerals, relative clauses, clause coordination
and prepositional phrases.  PP attachment is lexical: every verb and noun has
a random affinity for every preposition, and a PP following ``V NP`` attaches
to the verb or the noun with probability ``sigmoid(aff(verb, prep) -
aff(noun, prep))``.  The "language" (lexicon and affinities) is fixed by
``grammar_seed``; sentences are drawn with ``seed``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conll import Sentence, Token

NOUNS = [
    "man", "woman", "dog", "cat", "house", "car", "book", "letter", "table", "river", "city", "teacher",
    "student", "doctor", "company", "market", "report", "plan", "road", "window", "garden", "ship",
    "bank", "paper", "friend", "child", "boat", "hill", "office", "story", "song", "picture", "box",
    "door", "key", "tree", "park", "train", "station", "bridge", "court", "judge", "price", "share",
    "board", "meeting", "village", "farmer", "horse", "field", "knife", "bottle", "glass", "table",
    "camera", "phone", "message", "island", "army", "king",
]
PLURAL = {"man": "men", "woman": "women", "child": "children", "city": "cities", "company": "companies",
          "story": "stories", "glass": "glasses", "box": "boxes", "knife": "knives", "army": "armies",
          "bus": "buses", "bank": "banks"}
VERBS_T = [
    ("see", "saw"), ("take", "took"), ("buy", "bought"), ("find", "found"), ("send", "sent"),
    ("open", "opened"), ("build", "built"), ("carry", "carried"), ("watch", "watched"), ("sell", "sold"),
    ("paint", "painted"), ("write", "wrote"), ("read", "read"), ("leave", "left"), ("bring", "brought"),
    ("hold", "held"), ("move", "moved"), ("show", "showed"), ("break", "broke"), ("keep", "kept"),
]
VERBS_I = [
    ("sleep", "slept"), ("arrive", "arrived"), ("run", "ran"), ("wait", "waited"), ("fall", "fell"),
    ("live", "lived"), ("work", "worked"), ("swim", "swam"), ("sit", "sat"), ("talk", "talked"),
]
ADJS = ["old", "new", "big", "small", "red", "green", "happy", "quiet", "long", "strong", "young", "dark",
        "bright", "cold", "warm", "heavy", "empty", "famous", "local", "strange"]
ADVS = ["quickly", "slowly", "often", "never", "always", "soon", "later", "quietly", "carefully", "again"]
PREPS = ["in", "on", "with", "near", "from", "to", "for", "under", "by", "of", "at", "behind"]
DETS_SG = ["the", "a", "this", "every", "that"]
DETS_PL = ["the", "some", "these", "many", "those"]
NAMES = ["john", "mary", "paris", "london", "anna", "peter", "smith", "berlin", "maria", "tom"]
PRONOUNS = ["he", "she", "they", "we", "it", "i"]
MODALS = ["will", "can", "should", "must", "may"]
NUMBERS = ["two", "three", "four", "five", "ten"]
CONJ = ["and", "but"]

COARSE = {"DT": "DET", "JJ": "ADJ", "NN": "NOUN", "NNS": "NOUN", "NNP": "PROPN", "PRP": "PRON", "VBD": "VERB",
          "VB": "VERB", "MD": "AUX", "RB": "ADV", "IN": "ADP", "CC": "CCONJ", "CD": "NUM", "WDT": "PRON",
          ".": "PUNCT", ",": "PUNCT"}


@dataclass
class _Tok:
    form: str
    tag: str
    head: "_Tok | None" = None
    label: str = "root"


_ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr", "pl", "gr", "sh"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ou", "ee"]
_CODAS = ["", "n", "r", "l", "s", "t", "m", "k", "nd", "st"]


def _pseudo_words(g: np.random.Generator, count: int, taken: set[str]) -> list[str]:
    out = []
    while len(out) < count:
        syll = int(g.integers(1, 4))
        w = "".join(_ONSETS[int(g.integers(len(_ONSETS)))] + _VOWELS[int(g.integers(len(_VOWELS)))]
                    + _CODAS[int(g.integers(len(_CODAS)))] for _ in range(syll))
        if w not in taken:
            taken.add(w)
            out.append(w)
    return out


class Grammar:
    """The lexicon and attachment preferences of one synthetic language.

    Open-class words follow a Zipf distribution: the hand-written words are
    frequent and a long tail of pseudo-words is rare, so many lexical
    attachment preferences are seen only a few times in training.
    """

    def __init__(self, grammar_seed: int = 0, tail: int = 300):
        g = np.random.default_rng(grammar_seed)
        taken = set(NOUNS) | {w for pair in VERBS_T + VERBS_I for w in pair} | set(ADJS) | set(ADVS)
        self.nouns = sorted(set(NOUNS)) + _pseudo_words(g, tail, taken)
        self.verbs_t = list(VERBS_T) + [(w, w + "ed") for w in _pseudo_words(g, tail // 3, taken)]
        self.verbs_i = list(VERBS_I) + [(w, w + "ed") for w in _pseudo_words(g, tail // 10, taken)]
        self.adjs = list(ADJS) + _pseudo_words(g, tail // 3, taken)
        verbs = [v for v, _ in self.verbs_t + self.verbs_i]
        self.verb_aff = {(v, p): float(g.normal(0, 2.0)) for v in verbs for p in PREPS}
        self.noun_aff = {(n, p): float(g.normal(0, 2.0)) for n in self.nouns for p in PREPS}
        # preposition-specific bias: "of" almost always modifies nouns
        self.prep_bias = {p: float(g.normal(0, 1.0)) for p in PREPS}
        self.prep_bias["of"] = -4.0
        self.noun_w = self._zipf(len(self.nouns))
        self.verb_t_w = self._zipf(len(self.verbs_t))
        self.verb_i_w = self._zipf(len(self.verbs_i))
        self.adj_w = self._zipf(len(self.adjs))

    @staticmethod
    def _zipf(k: int, exponent: float = 1.0) -> np.ndarray:
        w = 1.0 / np.arange(1, k + 1) ** exponent
        return w / w.sum()

    def p_verb_attach(self, verb: str, noun: str, prep: str) -> float:
        x = self.verb_aff[(verb, prep)] - self.noun_aff[(noun, prep)] + self.prep_bias[prep]
        return 1.0 / (1.0 + math.exp(-x))


class _Sampler:
    def __init__(self, grammar: Grammar, rng: np.random.Generator):
        self.g = grammar
        self.rng = rng

    def coin(self, p: float) -> bool:
        return bool(self.rng.random() < p)

    def pick(self, items, weights=None):
        i = int(self.rng.choice(len(items), p=weights))
        return items[i]

    # each builder returns (tokens in surface order, head token, head lexeme)

    def noun_phrase(self, depth: int, allow_rel: bool = True):
        r = self.rng.random()
        if r < 0.12:
            t = _Tok(self.pick(PRONOUNS), "PRP")
            return [t], t, t.form
        if r < 0.24:
            head = _Tok(self.pick(NAMES), "NNP")
            toks = [head]
            if self.coin(0.3):
                first = _Tok(self.pick(NAMES), "NNP", head, "compound")
                toks.insert(0, first)
            return toks, head, head.form
        lemma = self.pick(self.g.nouns, self.g.noun_w)
        plural = self.coin(0.3)
        head = _Tok(PLURAL.get(lemma, lemma + "s") if plural else lemma, "NNS" if plural else "NN")
        pre = []
        if plural and self.coin(0.25):
            pre.append(_Tok(self.pick(NUMBERS), "CD", head, "nummod"))
        elif self.coin(0.85):
            pre.append(_Tok(self.pick(DETS_PL if plural else DETS_SG), "DT", head, "det"))
        for _ in range(int(self.rng.choice(3, p=[0.55, 0.35, 0.10]))):
            pre.append(_Tok(self.pick(self.g.adjs, self.g.adj_w), "JJ", head, "amod"))
        if self.coin(0.12):
            pre.append(_Tok(self.pick(self.g.nouns, self.g.noun_w), "NN", head, "compound"))
        toks = pre + [head]
        if allow_rel and depth < 2 and self.coin(0.08):
            toks += self.relative_clause(head, depth + 1)
        return toks, head, lemma

    def relative_clause(self, noun: _Tok, depth: int):
        rel = _Tok("that", "WDT", None, "nsubj")
        verb, base, trans = self.verb(past=True)
        verb.head, verb.label = noun, "relcl"
        rel.head = verb
        toks = [rel, verb]
        if trans:
            obj, obj_head, _ = self.noun_phrase(depth, allow_rel=False)
            obj_head.head, obj_head.label = verb, "obj"
            toks += obj
        return toks

    def verb(self, past: bool):
        trans = self.coin(0.65)
        if trans:
            base, pastf = self.pick(self.g.verbs_t, self.g.verb_t_w)
        else:
            base, pastf = self.pick(self.g.verbs_i, self.g.verb_i_w)
        return _Tok(pastf if past else base, "VBD" if past else "VB"), base, trans

    def prep_phrase(self, depth: int):
        prep = _Tok(self.pick(PREPS), "IN")
        obj, obj_head, lemma = self.noun_phrase(depth + 1, allow_rel=False)
        obj_head.head, obj_head.label = prep, "pobj"
        return [prep] + obj, prep, lemma

    def clause(self, depth: int = 0):
        subj, subj_head, _ = self.noun_phrase(depth)
        modal = self.coin(0.3)
        verb, vlemma, trans = self.verb(past=not modal)
        subj_head.head, subj_head.label = verb, "nsubj"
        toks = list(subj)
        if modal:
            toks.append(_Tok(self.pick(MODALS), "MD", verb, "aux"))
        if self.coin(0.15):
            toks.append(_Tok(self.pick(ADVS), "RB", verb, "advmod"))
        toks.append(verb)
        last_noun = None
        if trans:
            obj, obj_head, obj_lemma = self.noun_phrase(depth)
            obj_head.head, obj_head.label = verb, "obj"
            toks += obj
            if obj_head.tag in ("NN", "NNS"):
                last_noun = (obj_head, obj_lemma)
        for _ in range(int(self.rng.choice(3, p=[0.45, 0.4, 0.15]))):
            pp, prep, pobj_lemma = self.prep_phrase(depth)
            if last_noun is not None and not self.coin(self.g.p_verb_attach(vlemma, last_noun[1], prep.form)):
                prep.head = last_noun[0]
            else:
                prep.head = verb
            prep.label = "prep"
            toks += pp
            pobj = pp[-1]
            # only the nearest noun is open for attachment, otherwise arcs would cross
            last_noun = (pobj, pobj_lemma) if pobj.tag in ("NN", "NNS") else None
        if self.coin(0.1):
            toks.append(_Tok(self.pick(ADVS), "RB", verb, "advmod"))
        if depth == 0 and self.coin(0.15):
            toks.append(_Tok(",", ",", verb, "punct"))
            cc = _Tok(self.pick(CONJ), "CC")
            toks.append(cc)
            second, second_verb = self.clause(depth + 1)
            second_verb.head, second_verb.label = verb, "conj"
            cc.head = second_verb
            cc.label = "cc"
            toks += second
        return toks, verb

    def sentence(self) -> list[_Tok]:
        toks, verb = self.clause()
        verb.head, verb.label = None, "root"
        toks.append(_Tok(".", ".", verb, "punct"))
        return toks


def _to_sentence(toks: list[_Tok]) -> Sentence:
    pos = {id(t): i + 1 for i, t in enumerate(toks)}
    out = []
    for i, t in enumerate(toks, start=1):
        head = 0 if t.head is None else pos[id(t.head)]
        out.append(Token(i, t.form, t.form, COARSE[t.tag], t.tag, "_", head, t.label))
    return Sentence(out)


def generate(count: int, seed: int = 0, grammar_seed: int = 0, max_len: int = 40) -> list[Sentence]:
    grammar = Grammar(grammar_seed)
    sampler = _Sampler(grammar, np.random.default_rng(seed))
    out = []
    while len(out) < count:
        toks = sampler.sentence()
        if len(toks) <= max_len:
            out.append(_to_sentence(toks))
    return out


def desk_treebank(train: int = 2000, test: int = 500, seed: int = 0) -> tuple[list[Sentence], list[Sentence]]:
    """Disjoint train/held-out draws from the same grammar."""
    return generate(train, seed=2 * seed + 1), generate(test, seed=2 * seed + 2)
