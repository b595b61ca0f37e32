import pytest

from depsearch.conll import Sentence, Token

FIGURE_WORDS = ["Flying", "planes", "can", "be", "dangerous"]
FIGURE_TAGS = ["VBG", "NNS", "MD", "VB", "JJ"]
# gold tree of the worked example: can <- Root, Flying <- can, planes <- Flying, be <- can, dangerous <- be
FIGURE_GOLD = [3, 1, 0, 3, 4]
FIGURE_LABELS = ["nsubj", "dobj", "root", "vc", "prd"]
# the trace: Shift, RL, Shift, RL, Shift, Shift, Shift, RR, RR, RR
FIGURE_ACTIONS = [0, 2, 0, 2, 0, 0, 0, 1, 1, 1]
# tree derived by the trace: Flying <- planes, planes <- can, can <- Root, be <- can, dangerous <- be
FIGURE_DERIVED = [2, 3, 0, 3, 4]


def make_sentence(words, heads, labels=None, tags=None):
    labels = labels or ["dep"] * len(words)
    tags = tags or ["X"] * len(words)
    return Sentence([Token(i + 1, w, w.lower(), t, t, "_", h, l)
                     for i, (w, h, l, t) in enumerate(zip(words, heads, labels, tags))])


@pytest.fixture
def figure_sentence():
    return make_sentence(FIGURE_WORDS, FIGURE_GOLD, FIGURE_LABELS, FIGURE_TAGS)


# acceptance criteria report: one line per criterion, printed after the run
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion(request):
    """Call with (ok, detail); records a PASS/FAIL line for the current criterion."""
    name = request.node.get_closest_marker("criterion").args[0]

    def record(ok: bool, detail: str) -> bool:
        ACCEPTANCE_RESULTS[name] = (bool(ok), detail)
        print(f"[{'PASS' if ok else 'FAIL'}] criterion {name}: {detail}", flush=True)
        return bool(ok)

    return record


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion id")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        ok, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name:>3}  {detail}")
