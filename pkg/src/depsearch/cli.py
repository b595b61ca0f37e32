"""Command-line front end.

    depsearch train --data train.conll --model parser.model --learner nn+ftrl --passes 5
    depsearch parse --data test.conll --model parser.model --output pred.conll
    depsearch eval --gold test.conll --pred pred.conll
    depsearch oracle-check --max-len 6 --cases 500 --seed 1
    depsearch tag-train --data train.tags --model tagger.model
    depsearch tag-predict --data test.tags --model tagger.model
    depsearch make-treebank --train train.conll --test test.conll

Log verbosity comes from ``DEPSEARCH_LOG`` (e.g. ``DEBUG``, ``WARNING``).
Exit status: 0 on success, 1 when a check fails, 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .conll import ConllFormatError, load_conll, write_conll
from .evaluate import score
from .learners import DEFAULT_HPARAMS, VARIANTS, ConfigurationError, ModelFormatError, deserialize_model, make_model, serialize_model
from .parser import FEATURE_SETS, DependencyParserTask, LabelSet, parse_sentence, prepare
from .search import MODES, REFERENCE, PassStats, PolicySchedule, decode, train
from .tagger import SequenceTaggerTask, TaggedSequence, TagSet, read_tagged, write_tagged

log = logging.getLogger("depsearch")


class UsageError(Exception):
    pass


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _writable(path: str) -> Path:
    p = Path(path)
    parent = p.parent if str(p.parent) else Path(".")
    if not parent.is_dir():
        raise UsageError(f"output directory does not exist: {parent}")
    return p


def _write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _load_model(path: str, kind: str):
    try:
        model = deserialize_model(_existing(path).read_bytes())
    except ModelFormatError as exc:
        raise UsageError(f"{path}: {exc}") from None
    found = model.metadata.get("task")
    if found != kind:
        raise UsageError(f"{path} holds a {found or 'unknown'} model, expected a {kind} model")
    return model


def _print_pass(passes: int):
    def report(stats: PassStats) -> None:
        print(f"pass {stats.epoch}/{passes}  mean loss {stats.mean_loss:.4f}  examples {stats.examples}  "
              f"round {stats.rounds}  P(reference) {stats.reference_probability:.6f}", flush=True)
    return report


def _schedule(args) -> PolicySchedule:
    return PolicySchedule(args.rollin, args.rollout, args.alpha)


def _use_analytic(args) -> bool:
    # the closed-form costs equal real rollouts only under the optimal reference
    return args.rollout == REFERENCE and not args.simulate_rollouts


_HPARAM_FLAGS = {"hidden": "--hidden", "lr": "--lr", "alpha": "--ftrl-alpha", "beta": "--ftrl-beta",
                 "l1": "--l1", "l2": "--l2"}


def _learner_overrides(args) -> dict:
    given = {"hidden": args.hidden, "lr": args.lr, "alpha": args.ftrl_alpha, "beta": args.ftrl_beta,
             "l1": args.l1, "l2": args.l2}
    given = {k: v for k, v in given.items() if v is not None}
    known = DEFAULT_HPARAMS[args.learner]
    for key in given:
        if key not in known:
            raise UsageError(f"{_HPARAM_FLAGS[key]} does not apply to the {args.learner} learner")
    return given


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    data_path = _existing(args.data)
    model_path = _writable(args.model)
    sentences = load_conll(data_path, args.pos_column)
    if not sentences:
        raise UsageError(f"{data_path}: no sentences")
    labels = LabelSet.from_sentences(sentences)
    labeled = not args.unlabeled
    task = DependencyParserTask(labels, args.feature_set, args.bits, labeled)
    instances = [prepare(s, labels) for s in sentences]
    usable = [inst for inst in instances if inst.projective]
    skipped = len(instances) - len(usable)
    if skipped:
        print(f"skipping {skipped} non-projective sentence(s) of {len(instances)}", file=sys.stderr)
    if not usable:
        raise UsageError("no projective training sentences")
    metadata = {
        "task": "parser",
        "feature_set": args.feature_set,
        "interactions": FEATURE_SETS[args.feature_set].to_dict(),
        "labeled": labeled,
        "labels": labels.to_dict(),
        "history": args.history,
        "pos_column": args.pos_column,
        "version": __version__,
    }
    model = make_model(args.learner, task.role_classes, args.bits, args.seed, metadata, **_learner_overrides(args))
    start = time.perf_counter()
    train(task, usable, args.passes, _schedule(args), model, seed=args.seed, every=args.every,
          analytic=_use_analytic(args), history=args.history, shuffle=args.shuffle,
          on_pass=_print_pass(args.passes))
    _write_bytes(model_path, serialize_model(model))
    print(f"wrote {model_path} ({time.perf_counter() - start:.1f}s)", flush=True)
    return 0


def _parser_from_model(model, args) -> DependencyParserTask:
    meta = model.metadata
    if args.feature_set is not None and args.feature_set != meta["feature_set"]:
        raise UsageError(f"model was trained with --feature-set {meta['feature_set']}, "
                         f"cannot decode with --feature-set {args.feature_set}")
    if args.unlabeled and meta["labeled"]:
        raise UsageError("model is labeled; drop --unlabeled")
    labels = LabelSet.from_dict(meta["labels"])
    return DependencyParserTask(labels, meta["feature_set"], model.bits, meta["labeled"])


def cmd_parse(args) -> int:
    model = _load_model(args.model, "parser")
    task = _parser_from_model(model, args)
    pos_column = args.pos_column or model.metadata.get("pos_column", "postag")
    sentences = load_conll(_existing(args.data), pos_column)
    history = model.metadata.get("history", 1)
    out = []
    for sent in sentences:
        heads, names = parse_sentence(task, model, sent, history)
        out.append(sent.with_tree(heads, names))
    if args.output:
        with open(_writable(args.output), "w", encoding="utf-8") as fh:
            write_conll(out, fh)
    else:
        write_conll(out, sys.stdout)
    return 0


def cmd_eval(args) -> int:
    gold = load_conll(_existing(args.gold))
    pred = load_conll(_existing(args.pred))
    try:
        report = score(pred, gold, exclude_punct=not args.include_punct)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(report.machine() if args.machine else report.table())
    return 0


def cmd_oracle_check(args) -> int:
    from .oraclecheck import run_check

    if args.max_len < 1 or args.cases < 1:
        raise UsageError("--max-len and --cases must be positive")
    start = time.perf_counter()
    report = run_check(args.cases, args.max_len, args.seed)
    print(f"{report.summary()} ({time.perf_counter() - start:.2f}s)")
    for line in report.examples:
        print("  " + line)
    return 0 if report.ok else 1


def cmd_tag_train(args) -> int:
    data_path = _existing(args.data)
    model_path = _writable(args.model)
    with open(data_path, encoding="utf-8") as fh:
        seqs = [s for s in read_tagged(fh) if s.tags]
    if not seqs:
        raise UsageError(f"{data_path}: no tagged sequences")
    if any(len(s.tags) != len(s.tokens) for s in seqs):
        raise UsageError(f"{data_path}: every token needs a tag for training")
    tagset = TagSet.from_sequences(seqs)
    task = SequenceTaggerTask(tagset, args.bits)
    metadata = {"task": "tagger", "tags": tagset.names, "history": args.history, "version": __version__}
    model = make_model(args.learner, task.role_classes, args.bits, args.seed, metadata, **_learner_overrides(args))
    train(task, seqs, args.passes, _schedule(args), model, seed=args.seed, every=args.every,
          history=args.history, shuffle=args.shuffle, on_pass=_print_pass(args.passes))
    _write_bytes(model_path, serialize_model(model))
    print(f"wrote {model_path}", flush=True)
    return 0


def cmd_tag_predict(args) -> int:
    model = _load_model(args.model, "tagger")
    tagset = TagSet(model.metadata["tags"])
    task = SequenceTaggerTask(tagset, model.bits)
    with open(_existing(args.data), encoding="utf-8") as fh:
        seqs = list(read_tagged(fh))
    out = []
    errors = total = 0
    for seq in seqs:
        _, ids = decode(task, seq, model, model.metadata.get("history", 1))
        tags = [tagset.names[i] for i in ids]
        if len(seq.tags) == len(seq.tokens):
            errors += sum(p != g for p, g in zip(tags, seq.tags))
            total += len(tags)
        out.append(TaggedSequence(seq.tokens, tags))
    stream = open(_writable(args.output), "w", encoding="utf-8") if args.output else sys.stdout
    try:
        write_tagged(out, stream)
    finally:
        if stream is not sys.stdout:
            stream.close()
    if total:
        print(f"accuracy {1 - errors / total:.4f} ({total - errors}/{total})", file=sys.stderr)
    return 0


def cmd_make_treebank(args) -> int:
    from .synthbank import generate

    for path, count, seed in ((args.train, args.train_size, 2 * args.seed + 1),
                              (args.test, args.test_size, 2 * args.seed + 2)):
        if path is None:
            continue
        with open(_writable(path), "w", encoding="utf-8") as fh:
            write_conll(generate(count, seed=seed, grammar_seed=args.grammar_seed), fh)
        print(f"wrote {count} sentences to {path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_training_flags(p: argparse.ArgumentParser, default_learner: str) -> None:
    p.add_argument("--data", required=True, help="training file")
    p.add_argument("--model", required=True, help="where to write the model")
    p.add_argument("--passes", type=int, default=5)
    p.add_argument("--alpha", type=float, default=1e-5, help="mixture decay rate")
    p.add_argument("--learner", choices=VARIANTS, default=default_learner)
    p.add_argument("--hidden", type=int, default=None, help="hidden units for the network learners (default 5)")
    p.add_argument("--bits", type=int, default=18, help="hash table size is 2^bits")
    p.add_argument("--rollin", choices=MODES, default="mixture")
    p.add_argument("--rollout", choices=MODES, default="reference")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--history", type=int, default=1, help="previous decisions used as features")
    p.add_argument("--every", type=int, default=1, help="deviate every k-th rollin step")
    p.add_argument("--shuffle", action="store_true", help="reshuffle training order every pass")
    p.add_argument("--lr", type=float, default=None, help="learning rate (sgd, sgd+, nn)")
    p.add_argument("--ftrl-alpha", type=float, default=None, help="FTRL alpha (default 0.05)")
    p.add_argument("--ftrl-beta", type=float, default=None, help="FTRL beta (default 25)")
    p.add_argument("--l1", type=float, default=None)
    p.add_argument("--l2", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="depsearch", description="Learning-to-search dependency parser.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a parser on a CoNLL-X file")
    _add_training_flags(p, "nn+ftrl")
    p.add_argument("--feature-set", choices=sorted(FEATURE_SETS), default="full")
    p.add_argument("--unlabeled", action="store_true")
    p.add_argument("--pos-column", choices=("postag", "cpostag"), default="postag")
    p.add_argument("--simulate-rollouts", action="store_true",
                   help="run every rollout through the decoder even when closed-form costs are exact")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("parse", help="parse a CoNLL-X file")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--output", help="output file (default: stdout)")
    p.add_argument("--feature-set", choices=sorted(FEATURE_SETS), default=None,
                   help="must match the model when given")
    p.add_argument("--unlabeled", action="store_true")
    p.add_argument("--pos-column", choices=("postag", "cpostag"), default=None)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", help="attachment scores of a parsed file")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--include-punct", action="store_true")
    p.add_argument("--machine", action="store_true", help="key=value output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle-check", help="verify the dynamic oracle by brute force")
    p.add_argument("--max-len", type=int, default=6)
    p.add_argument("--cases", type=int, default=500)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("tag-train", help="train a sequence tagger on token<TAB>tag data")
    _add_training_flags(p, "sgd+")
    p.set_defaults(func=cmd_tag_train)

    p = sub.add_parser("tag-predict", help="tag a token file")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_tag_predict)

    p = sub.add_parser("make-treebank", help="write the synthetic desk-scale treebank")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--train-size", type=int, default=2000)
    p.add_argument("--test-size", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grammar-seed", type=int, default=0)
    p.set_defaults(func=cmd_make_treebank)
    return ap


def _validate(args) -> None:
    if getattr(args, "passes", 1) < 1:
        raise UsageError("--passes must be >= 1")
    alpha = getattr(args, "alpha", None)
    if alpha is not None and not 0.0 < alpha < 1.0:
        raise UsageError("--alpha must lie in (0, 1)")
    if getattr(args, "every", 1) < 1:
        raise UsageError("--every must be >= 1")
    if getattr(args, "history", 0) < 0:
        raise UsageError("--history must be >= 0")
    bits = getattr(args, "bits", 18)
    if not 1 <= bits <= 30:
        raise UsageError("--bits must lie in 1..30")
    if (getattr(args, "hidden", None) or 1) < 1:
        raise UsageError("--hidden must be >= 1")


def main(argv=None) -> int:
    level = os.environ.get("DEPSEARCH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        _validate(args)
        return args.func(args)
    except (UsageError, ConfigurationError, ConllFormatError) as exc:
        print(f"depsearch {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
