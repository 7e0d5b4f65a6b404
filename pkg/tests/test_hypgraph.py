from fractions import Fraction
from itertools import combinations, product

import networkx as nx
import pytest

from sclkit.engines.envelopes import DELTA_BOTTLENECK, MANNING_IMAGE, envelope_value
from sclkit.engines.hypgraph import (
    FiniteMetricGraph,
    Ok,
    bottleneck_constant,
    bottleneck_search,
    cycle_graph,
    four_point_delta,
    grid_graph,
    hyperbolicity_delta,
    manning_report,
    manning_tree,
    path_graph,
    quasigeodesic_image_check,
    random_quasi_tree,
)
from sclkit.errors import DisconnectedGraphError, MalformedInputError, NotATreeError, QuasiGeodesicError
from sclkit.parsers import parse_graph
from sclkit.selftest import quasi_tree_family


def _brute_delta(graph: FiniteMetricGraph) -> Fraction:
    D = graph.distances
    worst = 0
    for x, y, z, w in product(range(graph.n), repeat=4):
        sums = sorted([D[x, y] + D[z, w], D[x, z] + D[y, w], D[x, w] + D[y, z]])
        worst = max(worst, int(sums[2] - sums[1]))
    return Fraction(worst, 2)


def _separated(graph: FiniteMetricGraph, G: nx.Graph, delta: int, x: int, y: int, v: int) -> bool:
    D = graph.distances
    if D[v, x] <= delta or D[v, y] <= delta:
        return True
    outside = G.subgraph([u for u in range(graph.n) if D[v, u] > delta])
    return not nx.has_path(outside, x, y)


def _brute_bottleneck(graph: FiniteMetricGraph) -> int:
    G = graph.to_networkx()
    delta = 0
    while not all(_separated(graph, G, delta, x, y, v)
                  for x in range(graph.n) for y in range(x + 1, graph.n)
                  for v in graph.canonical_geodesic(x, y)):
        delta += 1
    return delta


def _star(legs: int, length: int) -> FiniteMetricGraph:
    edges = []
    for j in range(legs):
        prev = 0
        for i in range(1, length + 1):
            v = j * length + i
            edges.append((prev, v))
            prev = v
    return FiniteMetricGraph.from_edges(legs * length + 1, edges)


@pytest.fixture
def tree_graph(info_dir):
    with open(f"{info_dir}/tree.graph") as f:
        graph, _ = parse_graph(f.read())
    return graph


def test_from_edges_validation():
    with pytest.raises(MalformedInputError):
        FiniteMetricGraph.from_edges(3, [(0, 3)])
    with pytest.raises(MalformedInputError):
        FiniteMetricGraph.from_edges(3, [(1, 1)])
    with pytest.raises(MalformedInputError):
        FiniteMetricGraph.from_edges(0, [])
    graph = FiniteMetricGraph.from_edges(3, [(0, 1), (1, 0), (2, 1)])
    assert graph.edges == ((0, 1), (1, 2))


def test_disconnected_graph_raises():
    graph = FiniteMetricGraph.from_edges(4, [(0, 1), (2, 3)])
    with pytest.raises(DisconnectedGraphError):
        graph.distances


def test_distances_match_networkx():
    graph = grid_graph(4, 5)
    lengths = dict(nx.all_pairs_shortest_path_length(graph.to_networkx()))
    for u in range(graph.n):
        for v in range(graph.n):
            assert graph.distance(u, v) == lengths[u][v]
    assert graph.diameter == 7


def test_canonical_geodesic_takes_lowest_parent():
    graph = cycle_graph(6)
    assert graph.canonical_geodesic(0, 3) == [0, 1, 2, 3]
    assert graph.geodesic(3, 0) == [3, 2, 1, 0]
    assert graph.canonical_geodesic(2, 2) == [2]


def test_delta_of_trees_is_zero(tree_graph):
    assert four_point_delta(tree_graph).value == 0
    assert hyperbolicity_delta(path_graph(30)) == 0


def test_delta_single_vertex():
    graph = FiniteMetricGraph.from_edges(1, [])
    estimate = four_point_delta(graph)
    assert estimate.value == 0 and estimate.exact


@pytest.mark.parametrize("n", [5, 8, 12])
def test_delta_of_cycles_matches_brute_force(n):
    graph = cycle_graph(n)
    estimate = four_point_delta(graph)
    assert estimate.exact
    assert estimate.value == _brute_delta(graph)


def _thin_triangle_delta(G: nx.Graph) -> int:
    dist = dict(nx.all_pairs_shortest_path_length(G))
    paths = dict(nx.all_pairs_shortest_path(G))
    worst = 0
    for x, y, z in combinations(G.nodes, 3):
        sides = [paths[x][y], paths[y][z], paths[z][x]]
        for i, side in enumerate(sides):
            others = set(sides[(i + 1) % 3]) | set(sides[(i + 2) % 3])
            worst = max(worst, max(min(dist[p][q] for q in others) for p in side))
    return worst


def test_delta_of_c12_agrees_with_thin_triangles():
    graph = cycle_graph(12)
    assert _thin_triangle_delta(graph.to_networkx()) == 3
    assert four_point_delta(graph).value == 3
    assert hyperbolicity_delta(graph) == 3


def test_delta_of_grid_matches_brute_force():
    graph = grid_graph(3, 4)
    assert four_point_delta(graph).value == _brute_delta(graph)


def test_sampled_delta_is_a_lower_bound():
    graph = cycle_graph(16)
    sampled = four_point_delta(graph, samples=500, seed=1)
    assert not sampled.exact
    assert sampled.value <= four_point_delta(graph).value
    assert four_point_delta(graph, samples=500, seed=1) == sampled


def test_bottleneck_of_trees(tree_graph):
    assert bottleneck_constant(tree_graph) == 0
    assert bottleneck_constant(path_graph(20)) == 0
    assert bottleneck_search(FiniteMetricGraph.from_edges(1, [])).delta == 0


def test_bottleneck_of_triangle_with_tail():
    graph = FiniteMetricGraph.from_edges(5, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4)])
    assert bottleneck_constant(graph) <= 1


@pytest.mark.parametrize("n,expected", [(8, 2), (12, 3), (16, 4)])
def test_bottleneck_of_cycles_grows(n, expected):
    result = bottleneck_search(cycle_graph(n))
    assert result.delta == expected
    assert result.witness is not None


def test_manning_tree_of_long_path():
    graph = path_graph(101)
    tq = manning_tree(graph)
    assert tq.delta == 1 and tq.R == 20
    assert tq.tree.n == 5
    assert nx.is_tree(tq.tree.to_networkx())
    assert tq.beta == (0, 21, 41, 61, 81)
    report = manning_report(graph, tq)
    assert report.inequalities_hold
    assert report.levels == 5
    assert report.tree_scale == 8
    assert report.embedding_constants == (4, 16)


def test_manning_tree_of_star():
    graph = _star(3, 50)
    tq = manning_tree(graph)
    T = tq.tree.to_networkx()
    assert tq.tree.n == 7
    assert T.degree(tq.alpha[0]) == 3
    assert sorted(d for _, d in T.degree()) == [1, 1, 1, 2, 2, 2, 3]
    assert manning_report(graph, tq).inequalities_hold


def test_manning_tree_of_small_graph_is_a_point():
    tq = manning_tree(cycle_graph(10), delta_cap=1)
    assert tq.tree.n == 1
    assert manning_report(cycle_graph(10), tq).tree_edges == 0


def test_manning_quotient_of_long_cycle_is_not_a_tree():
    with pytest.raises(NotATreeError) as info:
        manning_tree(cycle_graph(100), delta_cap=1)
    assert len(info.value.cycle) == 4


def test_manning_rejects_bad_base():
    with pytest.raises(MalformedInputError):
        manning_tree(path_graph(5), base=9)


def test_quasigeodesic_images_on_a_path():
    graph = path_graph(101)
    tq = manning_tree(graph)
    assert quasigeodesic_image_check(graph, tq, list(range(101)), A=10) == Ok(0)
    zigzag = list(range(0, 31)) + list(range(29, 24, -1)) + list(range(26, 61))
    result = quasigeodesic_image_check(graph, tq, zigzag, A=10)
    assert isinstance(result, Ok)
    assert result.epsilon <= 1


def test_quasigeodesic_check_rejects_bad_paths():
    graph = path_graph(30)
    tq = manning_tree(graph)
    with pytest.raises(QuasiGeodesicError):
        quasigeodesic_image_check(graph, tq, [0, 5], A=10)
    with pytest.raises(QuasiGeodesicError):
        quasigeodesic_image_check(graph, tq, list(range(0, 11)) + list(range(9, -1, -1)), A=0)
    with pytest.raises(QuasiGeodesicError):
        quasigeodesic_image_check(graph, tq, [], A=0)


def test_random_quasi_tree_is_deterministic():
    g1 = random_quasi_tree(50, chords=5, span=2, seed=7)
    g2 = random_quasi_tree(50, chords=5, span=2, seed=7)
    assert g1.edges == g2.edges
    assert g1.n == 50
    assert 49 <= len(g1.edges) <= 54
    assert g1.diameter > 0


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_quasi_trees_satisfy_delta_envelope_and_manning(seed):
    graph = random_quasi_tree(45, chords=4, span=2, seed=seed)
    Delta = bottleneck_constant(graph)
    assert hyperbolicity_delta(graph) <= envelope_value(DELTA_BOTTLENECK, Delta)
    tq = manning_tree(graph)
    assert nx.is_tree(tq.tree.to_networkx())
    assert manning_report(graph, tq).inequalities_hold


@pytest.mark.parametrize("graph", [
    cycle_graph(6),
    cycle_graph(9),
    cycle_graph(11),
    grid_graph(3, 4),
    FiniteMetricGraph.from_edges(5, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4)]),
    random_quasi_tree(25, chords=4, span=2, seed=4),
    random_quasi_tree(30, chords=6, span=2, seed=5),
], ids=["C6", "C9", "C11", "grid3x4", "triangle-tail", "quasi-tree-25", "quasi-tree-30"])
def test_bottleneck_matches_brute_force(graph):
    result = bottleneck_search(graph)
    assert result.delta == _brute_bottleneck(graph)
    if result.witness is not None:
        x, v, y = result.witness
        assert v in graph.canonical_geodesic(x, y)
        assert not _separated(graph, graph.to_networkx(), result.delta - 1, x, y, v)


@pytest.mark.slow
def test_bottleneck_and_manning_on_long_path():
    graph = path_graph(2000)
    assert bottleneck_constant(graph) == 0
    tq = manning_tree(graph)
    assert tq.R == 20
    assert tq.tree.n == 100
    assert manning_report(graph, tq).inequalities_hold


@pytest.mark.parametrize("seed", [0, 1])
def test_geodesic_images_in_quasi_tree_family(seed):
    for graph in quasi_tree_family(seed, 20):
        tq = manning_tree(graph)
        far = int(graph.distances[0].argmax())
        for x, y in [(0, far), (graph.n - 1, graph.n // 2)]:
            result = quasigeodesic_image_check(graph, tq, graph.canonical_geodesic(x, y), A=10)
            assert isinstance(result, Ok)
            assert result.epsilon <= envelope_value(MANNING_IMAGE, tq.delta)
