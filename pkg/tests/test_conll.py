import io
from itertools import combinations

import numpy as np
import pytest

from depsearch.conll import ConllFormatError, Sentence, Token, flag_punctuation, is_projective, load_conll, read_conll, write_conll

TWO = "1\tThe\tthe\tDT\tDT\t_\t2\tdet\t_\t_\n2\tdog\tdog\tNN\tNN\t_\t0\troot\t_\t_\n\n"


def line(i, form, head, rel="dep", pos="NN"):
    return f"{i}\t{form}\t_\t{pos[0]}\t{pos}\t_\t{head}\t{rel}\t_\t_\n"


def random_tree(rng, n):
    """Uniformly random head assignment that is a tree rooted at 0."""
    while True:
        heads = [int(rng.integers(0, n + 1)) for _ in range(n)]
        if any(h == i + 1 for i, h in enumerate(heads)):
            continue
        ok = True
        for i in range(1, n + 1):
            seen, w = set(), i
            while w != 0 and ok:
                if w in seen:
                    ok = False
                seen.add(w)
                w = heads[w - 1]
        if ok:
            return heads


def crossing(heads):
    arcs = [(min(h, d), max(h, d)) for d, h in enumerate(heads, start=1)]
    return any(a < c < b < e or c < a < e < b for (a, b), (c, e) in combinations(arcs, 2))


class TestRead:
    def test_two_tokens(self):
        [s] = list(read_conll(io.StringIO(TWO)))
        assert s.words == ["The", "dog"] and s.heads == [2, 0] and s.labels == ["det", "root"]
        assert s.tokens[0].pos == "DT"

    def test_cpostag_column(self):
        text = "1\tdog\t_\tN\tNN\t_\t0\troot\t_\t_\n"
        [s] = list(read_conll(io.StringIO(text), pos_column="cpostag"))
        assert s.tokens[0].pos == "N"
        with pytest.raises(ValueError):
            list(read_conll(io.StringIO(text), pos_column="upos"))

    def test_head_out_of_range_reports_line(self):
        text = "# comment\n" + line(1, "a", 0) + line(2, "b", 7) + "\n"
        with pytest.raises(ConllFormatError) as err:
            list(read_conll(io.StringIO(text)))
        assert err.value.line == 3
        assert ":3:" in str(err.value)

    @pytest.mark.parametrize("text,lineno", [
        (line(1, "a", 0) + "2\tb\t_\n", 2),
        (line(1, "a", 0) + line(1, "b", 1), 2),
        (line(1, "a", 0) + line(3, "b", 1), 2),
        (line(1, "a", 0) + "2\tb\t_\tN\tNN\t_\tx\tdep\t_\t_\n", 2),
        ("one\ta\t_\tN\tNN\t_\t0\troot\t_\t_\n", 1),
        (line(1, "a", 1), 1),
    ])
    def test_malformed_lines(self, text, lineno):
        with pytest.raises(ConllFormatError) as err:
            list(read_conll(io.StringIO(text)))
        assert err.value.line == lineno

    def test_empty_input(self):
        assert list(read_conll(io.StringIO(""))) == []
        assert list(read_conll(io.StringIO("\n\n\n"))) == []

    def test_missing_trailing_blank_line(self):
        assert len(list(read_conll(io.StringIO(TWO.rstrip("\n"))))) == 1

    def test_load_names_the_file(self, tmp_path):
        path = tmp_path / "bad.conll"
        path.write_text(line(1, "a", 5), encoding="utf-8")
        with pytest.raises(ConllFormatError, match="bad.conll:1"):
            load_conll(path)


class TestWrite:
    def test_round_trip_is_identity(self):
        text = TWO + line(1, "Hi", 0, "root", "UH") + line(2, "!", 1, "punct", ".") + "\n"
        first = list(read_conll(io.StringIO(text)))
        buf = io.StringIO()
        write_conll(first, buf)
        assert buf.getvalue() == text
        assert list(read_conll(io.StringIO(buf.getvalue()))) == first

    def test_predicted_root_written_as_zero(self):
        [s] = list(read_conll(io.StringIO(TWO)))
        buf = io.StringIO()
        write_conll([s.with_tree([0, 1], ["root", "dep"])], buf)
        assert buf.getvalue().splitlines()[0].split("\t")[6:8] == ["0", "root"]

    def test_with_tree_length_checked(self):
        s = Sentence([Token(1, "a")])
        with pytest.raises(ValueError):
            s.with_tree([0, 1])


class TestProjectivity:
    def test_examples(self):
        assert is_projective([2, 0])
        assert is_projective([2, 0, 2])
        assert not is_projective([3, 4, 0, 3])
        assert not is_projective([0, 4, 1, 1])

    def test_matches_crossing_scan(self):
        rng = np.random.default_rng(0)
        seen = {True: 0, False: 0}
        for _ in range(1000):
            heads = random_tree(rng, int(rng.integers(1, 9)))
            got = is_projective(heads)
            # Root sits at position 0, so its arcs take part in the crossing scan
            assert got == (not crossing(heads))
            seen[got] += 1
        assert seen[True] > 50 and seen[False] > 50


class TestPunctuation:
    @pytest.mark.parametrize("form,expected", [
        (".", True), (",", True), ("--", True), ("''", True), ("«", True), ("…", True),
        ("$", False), ("%", True), ("a.", False), ("", False), ("1", False), ("-LRB-", False),
    ])
    def test_flag(self, form, expected):
        assert flag_punctuation(form) is expected
