import pytest

from sclkit.errors import InconsistentClassError, MalformedInputError
from sclkit.parsers import parse_decomposition, parse_graph


def test_parse_graph_with_generators(info_dir):
    with open(f"{info_dir}/hexagon.graph") as f:
        graph, maps = parse_graph(f.read())
    assert graph.n == 6
    assert len(graph.edges) == 6
    assert maps == [[1, 2, 3, 4, 5, 0], [0, 5, 4, 3, 2, 1]]


def test_parse_graph_skips_comments_and_blank_lines():
    graph, maps = parse_graph("# header\n\nv 2  # two vertices\ne 0 1\n")
    assert graph.n == 2 and graph.edges == ((0, 1),)
    assert maps == []


@pytest.mark.parametrize("text,line,column", [
    ("v 3\ne 0 5", 2, 5),
    ("v 3\ne 0 x", 2, 5),
    ("e 0 1", 1, 1),
    ("v 3\nw 0 1", 2, 1),
    ("v 3\ne 1 1", 2, 3),
    ("v 3\nv 4", 2, 1),
    ("v 0", 1, 3),
    ("v 3\ngen 1 2", 2, 1),
    ("", 1, 1),
])
def test_parse_graph_errors(text, line, column):
    with pytest.raises(MalformedInputError) as info:
        parse_graph(text, source="g.graph")
    assert (info.value.line, info.value.column) == (line, column)
    assert str(info.value).startswith(f"g.graph:{line}:{column}:")


def test_parse_decomposition(info_dir):
    with open(f"{info_dir}/enko.nt") as f:
        d = parse_decomposition(f.read())
    assert d.power == 1
    assert [c.id for c in d.components] == ["g1", "g2"]
    assert d.components[1].rep_id == "g1"
    assert d.components[1].exponents == (-1, 1)


def test_parse_decomposition_options():
    d = parse_decomposition("N 3\ncomp t twist:-2 complexity 0 chiral tau 1/2\ncomp x pa complexity 5 achiral k 3")
    assert d.power == 3
    t, x = d.components
    assert (t.kind, t.twist_power, t.tau) == ("dehn_twist", -2, "1/2")
    assert (x.chiral, x.k) == (False, 3)


def test_parse_curves(info_dir):
    with open(f"{info_dir}/multitwist.nt") as f:
        d = parse_decomposition(f.read())
    assert [(c.separating, c.homology_class, c.power) for c in d.curves] == [(False, "x", 3), (False, "x", -3)]


@pytest.mark.parametrize("text,line,column", [
    ("comp g1 px complexity 1 chiral", 1, 9),
    ("comp t twist:0 complexity 0 chiral", 1, 8),
    ("comp g1 pa cx 1 chiral", 1, 12),
    ("comp g1 pa complexity 1 maybe", 1, 25),
    ("comp g1 pa complexity 1 chiral rep", 1, 35),
    ("comp g1 pa complexity 1 chiral bogus 1", 1, 32),
    ("comp t twist:1 complexity 0 achiral", 1, 1),
    ("comp g1 pa complexity 1 chiral\ncomp g1 pa complexity 1 chiral", 2, 6),
    ("N 0", 1, 3),
    ("N 2\nN 3", 2, 1),
    ("curve nonsep class x power 3 extra", 1, 30),
    ("curve both class x power 3", 1, 7),
    ("frob", 1, 1),
])
def test_parse_decomposition_errors(text, line, column):
    with pytest.raises(MalformedInputError) as info:
        parse_decomposition(text)
    assert (info.value.line, info.value.column) == (line, column)


@pytest.mark.parametrize("text,line,column,message", [
    ("comp a1 pa complexity 1 achiral\ncomp c1 pa complexity 1 chiral rep a1 m 1 r 1", 2, 36, "achiral"),
    ("comp g1 pa complexity 1 chiral rep g1 m 2 r 1", 1, 36, "impossible"),
    ("comp g1 pa complexity 1 chiral\ncomp g2 pa complexity 1 chiral rep g1 m 1 r 1\n"
     "comp g3 pa complexity 1 chiral rep g2 m 1 r 1", 3, 36, "not a representative"),
    ("comp p1 pa complexity 1 chiral rep t1 m 1 r 1\ncomp t1 twist:1 complexity 0 chiral", 1, 36, "mixes"),
    ("comp x1 pa complexity 1 chiral rep h m 1 r 1\ncomp x2 twist:1 complexity 0 chiral rep h m 1 r 1", 2, 41, "mixes"),
])
def test_inconsistent_classes_are_located(text, line, column, message):
    with pytest.raises(InconsistentClassError, match=message) as info:
        parse_decomposition(text, "in.nt")
    assert (info.value.line, info.value.column) == (line, column)
    assert str(info.value).startswith(f"in.nt:{line}:{column}:")


def test_consistent_forward_reference():
    d = parse_decomposition("comp c1 pa complexity 1 chiral rep g1 m 2 r 1\ncomp g1 pa complexity 1 chiral")
    assert d.components[0].rep_id == "g1"
