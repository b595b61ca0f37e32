from depsearch.conll import is_projective
from depsearch.synthbank import desk_treebank, generate


def test_trees_are_projective_single_rooted():
    for s in generate(300, seed=9):
        assert is_projective(s.heads)
        assert s.heads.count(0) == 1
        assert s.labels[s.heads.index(0)] == "root"


def test_deterministic():
    a, b = generate(50, seed=4), generate(50, seed=4)
    assert a == b
    assert generate(50, seed=5) != a


def test_length_cap():
    assert max(len(s) for s in generate(200, seed=2, max_len=12)) <= 12


def test_desk_split_is_disjoint_draw():
    train, test = desk_treebank(30, 10)
    assert len(train) == 30 and len(test) == 10
    assert train[:10] != test
