import random
from fractions import Fraction

import pytest

from sclkit.engines.actions import (
    Elliptic,
    GraphAction,
    Hyperbolic,
    PipelineBudgets,
    ProjectionFamily,
    build_projection_family,
    check_promoted_element,
    classify_isometry,
    compare_axes,
    conjugate_projection,
    equivariance_gap,
    least_power,
    projection_diameter,
    projection_interval,
    promote_to_quasitree,
    quasi_axis,
    scl_pipeline,
    virtual_projection,
    wwpd_xi,
)
from sclkit.engines.counting_qm import CountingQM
from sclkit.engines.hypgraph import FiniteMetricGraph, cycle_graph
from sclkit.engines.words import Found, ReducedWord, ball, cl_search, commutator, format_word, parse_word, scl_upper
from sclkit.errors import (
    AxiomViolationError,
    EllipticElementError,
    MalformedInputError,
    PromotionError,
    RankMismatchError,
)
from sclkit.parsers import parse_graph
from sclkit.selftest import random_hyperbolic, random_word


@pytest.fixture
def hexagon(info_dir):
    with open(f"{info_dir}/hexagon.graph") as f:
        graph, maps = parse_graph(f.read())
    return GraphAction.explicit(graph, maps)


def _w(text, rank=2):
    return parse_word(text, rank)


def test_classify_on_the_tree(rank2):
    assert classify_isometry(rank2, _w("ab")) == Hyperbolic(Fraction(2))
    assert classify_isometry(rank2, _w("abA")) == Hyperbolic(Fraction(1))
    assert classify_isometry(rank2, ReducedWord.identity(2)) == Elliptic(0)


def test_classify_rejects_small_budget(rank2):
    with pytest.raises(ValueError):
        classify_isometry(rank2, _w("ab"), n_max=3)


def test_rank_mismatch(rank2):
    with pytest.raises(RankMismatchError):
        classify_isometry(rank2, parse_word("abc"))


def test_classify_on_explicit_hexagon(hexagon):
    assert classify_isometry(hexagon, _w("a")) == Elliptic(3)
    assert classify_isometry(hexagon, _w("b")) == Elliptic(0)
    assert hexagon.delta == hexagon.backend.delta


def test_explicit_backend_rejects_non_automorphisms():
    graph = cycle_graph(6)
    with pytest.raises(MalformedInputError):
        GraphAction.explicit(graph, [[1, 0, 2, 3, 4, 5]])
    with pytest.raises(MalformedInputError):
        GraphAction.explicit(graph, [[0, 0, 2, 3, 4, 5]])


def test_explicit_action_applies_rightmost_letter_first(hexagon):
    # b a: rotate then reflect
    assert hexagon.act(_w("ba"), 0) == 5
    assert hexagon.act(_w("ab"), 0) == 1
    assert hexagon.act(_w("A"), 0) == 5


def test_isometry_defect_is_zero(rank2, hexagon, rng):
    triples = [(random_word(rng, 2, 5), random_word(rng, 2, 6), random_word(rng, 2, 6)) for _ in range(50)]
    assert rank2.isometry_defect(triples) == 0
    assert hexagon.isometry_defect([(random_word(rng, 2, 4), rng.randrange(6), rng.randrange(6)) for _ in range(50)]) == 0


def test_quasi_axis_basics(rank2):
    axis = quasi_axis(rank2, _w("aabb"))
    assert axis.D == 4
    assert axis.base.is_identity()
    conj = quasi_axis(rank2, _w("baaB"))
    assert str(conj.base) == "b" and str(conj.core) == "aa"
    with pytest.raises(EllipticElementError):
        quasi_axis(rank2, ReducedWord.identity(2))
    with pytest.raises(ValueError):
        quasi_axis(rank2, _w("ab"), power=0)


def test_quasi_axis_is_a_geodesic_line(rank2, rng):
    for _ in range(20):
        axis = quasi_axis(rank2, random_hyperbolic(rng, 2, 1, 8))
        for i in range(-10, 11):
            for j in range(-10, 11):
                assert rank2.distance(axis.vertex(i), axis.vertex(j)) == abs(i - j)
            assert axis.position(axis.vertex(i)) == i
            assert axis.distance_to(axis.vertex(i)) == 0


def test_quasi_axis_displacement(rank3, rng):
    for _ in range(30):
        g = random_hyperbolic(rng, 3, 1, 10)
        axis = quasi_axis(rank3, g)
        assert rank3.distance(axis.base, rank3.act(g, axis.base)) == axis.D
        assert rank3.act(g, axis.vertex(3)) == axis.vertex(3 + axis.D)


def test_quasi_axis_is_equivariant(rank2, rng):
    for _ in range(20):
        g = random_hyperbolic(rng, 2, 1, 6)
        gamma = random_word(rng, 2, rng.randint(0, 5))
        axis = quasi_axis(rank2, g)
        moved = quasi_axis(rank2, g.conjugate_by(gamma))
        for v in axis.window(8):
            assert moved.distance_to(gamma * v) == 0


def test_powers_share_the_axis(rank2):
    axis = quasi_axis(rank2, _w("abAB"), power=3)
    assert axis.owner == _w("abAB") ** 3
    assert axis.D == 12
    assert axis.power == 3


def test_projection_of_generator_axes(rank2):
    a, b = quasi_axis(rank2, _w("a")), quasi_axis(rank2, _w("b"))
    assert projection_diameter(rank2, a, b, 10) == 0
    assert virtual_projection(rank2, _w("a"), _w("b")) == 0


def test_projection_matches_nearest_point_scan(rank2, rng):
    for _ in range(10):
        g = random_hyperbolic(rng, 2, 2, 6)
        h = g.conjugate_by(random_word(rng, 2, rng.randint(1, 3)))
        axis1, axis2 = quasi_axis(rank2, g), quasi_axis(rank2, h)
        line = {k: axis1.vertex(k) for k in range(-60, 61)}
        for v in axis2.window(10):
            nearest = min(line, key=lambda k: (rank2.distance(line[k], v), k))
            assert axis1.position(v) == nearest


def test_parallel_axes(rank2):
    g = _w("ab")
    axis = quasi_axis(rank2, g)
    same = quasi_axis(rank2, (g ** 3) * g * (g ** -3))
    assert compare_axes(rank2, axis, same).parallel
    assert compare_axes(rank2, axis, quasi_axis(rank2, g, power=2)).parallel
    other = quasi_axis(rank2, _w("abAB").conjugate_by(_w("a")))
    comparison = compare_axes(rank2, quasi_axis(rank2, _w("abAB")), other)
    assert not comparison.parallel
    assert comparison.diameters[0] == comparison.diameters[2]
    lo, hi = projection_interval(quasi_axis(rank2, _w("abAB")), other, 20)
    assert hi - lo <= 1


def test_wwpd_for_rank_one():
    act = GraphAction.cayley(1)
    result = wwpd_xi(act, parse_word("a", 1), 3)
    assert result.xi == 0
    assert len(result.parallel) == 7
    assert result.violators == []


def test_wwpd_for_a_generator(rank2):
    result = wwpd_xi(rank2, _w("a"), 2)
    assert [str(x) for x in result.parallel] == ["1", "a", "A", "aa", "AA"]
    assert result.xi == 0


def test_wwpd_for_commutator(rank2):
    result = wwpd_xi(rank2, _w("abAB"), 2)
    assert [str(x) for x in result.parallel] == ["1"]
    assert result.xi <= 1
    assert result.violators == []
    assert result.envelope == 8
    assert result.as_dict()["tau"] == "4/1"


def test_projection_family_for_commutator(rank2):
    family = build_projection_family(rank2, _w("abAB"), 2)
    # ab and ba, AB and BA differ by the commutator itself
    assert family.size == len(ball(2, 2)) - 2
    assert family.axiom_one_violation() is None
    assert family.eta == 2 * family.xi + 2
    for a in range(family.size):
        for b in range(family.size):
            if a != b:
                assert family.d(a, b, b) <= family.xi


def test_projection_family_rejects_axiom_violations():
    intervals = {(0, 1): (0, 0), (0, 2): (5, 5), (1, 0): (0, 0), (1, 2): (5, 5), (2, 0): (0, 0), (2, 1): (0, 0)}
    family = ProjectionFamily(3, intervals, eta=1)
    assert family.large_projections(1, 2) == [0]
    with pytest.raises(AxiomViolationError) as info:
        family.check_axioms()
    assert info.value.triple == (0, 1, 2)
    with pytest.raises(AxiomViolationError):
        promote_to_quasitree(family)


def test_promote_single_member():
    family = build_projection_family(GraphAction.cayley(1), parse_word("a", 1), 2)
    assert family.size == 1
    promoted = promote_to_quasitree(family)
    assert promoted.graph.n == 3
    assert promoted.bottleneck == 0
    assert promoted.within_envelope


def test_promote_two_members():
    family = ProjectionFamily(2, {(0, 1): (0, 0), (1, 0): (0, 0)}, eta=2)
    promoted = promote_to_quasitree(family)
    assert promoted.K == 12
    assert promoted.graph.n == 6
    assert (1, 4) in promoted.graph.edges
    assert promoted.bottleneck == 0
    with pytest.raises(PromotionError):
        promote_to_quasitree(family, K=8)


def test_promote_commutator_family_within_envelope(rank2):
    promoted = promote_to_quasitree(build_projection_family(rank2, _w("abAB"), 1))
    assert promoted.within_envelope
    assert isinstance(promoted.graph, FiniteMetricGraph)


def test_least_power():
    assert least_power(Fraction(4), 2, 64) == 1
    assert least_power(Fraction(1), 5, 64) == 5
    assert least_power(Fraction(1), 100, 64) is None


def test_pipeline_on_commutator(rank2):
    g = _w("abAB")
    result = scl_pipeline(rank2, g)
    assert result.report.verdict == "bounded"
    assert result.report.power == 1
    assert result.lower_bound >= Fraction(1, 48)
    assert result.lower_bound <= scl_upper(g, 1, 1, 1)
    assert result.report.lower_bound == "247/6000"


def test_pipeline_without_promotion_agrees(rank2):
    g = _w("abAB")
    plain = scl_pipeline(rank2, g, PipelineBudgets(promote=False))
    assert plain.lower_bound == scl_pipeline(rank2, g).lower_bound
    assert plain.report.promoted_vertices is None


def test_pipeline_outside_commutator_subgroup(rank2):
    result = scl_pipeline(rank2, _w("a"))
    assert result.lower_bound is None
    assert result.report.verdict == "not_in_commutator_subgroup"
    assert result.report.hhat_interval == ("247/250", "253/250")


def test_pipeline_on_elliptic(hexagon):
    result = scl_pipeline(hexagon, _w("abAB"))
    assert result.report.verdict == "elliptic"
    assert result.lower_bound == 0


def test_equivariance_gap_vanishes_on_the_tree(rank2, rng):
    for _ in range(10):
        g = random_hyperbolic(rng, 2, 1, 6)
        gamma = random_word(rng, 2, rng.randint(0, 3))
        moved = quasi_axis(rank2, g.conjugate_by(gamma))
        assert equivariance_gap(rank2, quasi_axis(rank2, g), moved, gamma) == 0
    a, b = quasi_axis(rank2, _w("a")), quasi_axis(rank2, _w("b"))
    assert equivariance_gap(rank2, a, b, ReducedWord.identity(2), window=5) == 5


def test_projection_family_is_symmetric(rank2):
    family = build_projection_family(rank2, _w("abAB"), 2)
    assert family.delta == 0
    assert family.symmetry_violation() is None
    assert family.labels == [format_word(c) for c in family.conjugators]
    assert len(family.conjugators) == family.size


def test_projection_family_rejects_asymmetric_diameters():
    family = ProjectionFamily(2, {(0, 1): (0, 3), (1, 0): (0, 0)}, eta=5)
    assert family.axiom_one_violation() is None
    assert family.symmetry_violation() == (0, 1)
    with pytest.raises(AxiomViolationError) as info:
        family.check_axioms()
    assert info.value.triple == (0, 1)


def test_conjugate_projection(rank2, hexagon):
    g = _w("abAB")
    assert conjugate_projection(rank2, g, _w("a")) == 1
    assert conjugate_projection(rank2, g, _w("ab")) == 2
    assert conjugate_projection(rank2, g, ReducedWord.identity(2)) == 0
    assert conjugate_projection(rank2, g, g.conjugate_by(_w("b"))) is None
    assert conjugate_projection(rank2, g, g.inverse()) is None
    with pytest.raises(EllipticElementError):
        conjugate_projection(hexagon, g, _w("a"))


def test_promoted_transfer_of_generator_and_identity(rank2):
    g = _w("abAB")
    family = build_projection_family(rank2, g, 1)
    promoted = promote_to_quasitree(family)
    qm = CountingQM(quasi_axis(rank2, g).segment)
    check = check_promoted_element(rank2, g, family, promoted, qm, _w("a"), 1000)
    assert not check.elliptic_on_X
    assert check.conjugate_projection == 1
    assert check.member_displacement == 1
    assert check.displacement_bound == 2 * (family.xi + 1)
    assert check.qm_bounded_on_powers
    assert check.holds
    fixed = check_promoted_element(rank2, g, family, promoted, qm, ReducedWord.identity(2), 1000)
    assert fixed.elliptic_on_X
    assert fixed.member_displacement == 0
    assert fixed.holds


def test_promoted_transfer_needs_conjugators(rank2):
    family = ProjectionFamily(2, {(0, 1): (0, 0), (1, 0): (0, 0)}, eta=2)
    promoted = promote_to_quasitree(family)
    qm = CountingQM(quasi_axis(rank2, _w("abAB")).segment)
    with pytest.raises(PromotionError):
        check_promoted_element(rank2, _w("abAB"), family, promoted, qm, _w("a"), 100)


def test_pipeline_reports_transfer_checks(rank2):
    result = scl_pipeline(rank2, _w("abAB"), PipelineBudgets(conj_radius=1))
    checks = result.report.promotion_checks
    assert [c.element for c in checks] == ["1", "a", "b"]
    assert checks[0].member_displacement == 0
    assert all(c.qm_bounded_on_powers for c in checks)


def _random_commutator(seed: int) -> ReducedWord:
    rng = random.Random(seed)
    while True:
        g = commutator(random_word(rng, 2, rng.randint(1, 3)), random_word(rng, 2, rng.randint(1, 3)))
        if not g.is_identity():
            return g


@pytest.mark.parametrize("g,radius", [(_random_commutator(seed), 3) for seed in range(6)] + [
    (parse_word("abABabAB"), 1),
    (parse_word("abABacAC"), 1),
], ids=[f"random-{seed}" for seed in range(6)] + ["[a,b]^2", "[a,b][a,c]"])
def test_pipeline_lower_bound_below_commutator_length(g, radius):
    result = scl_pipeline(GraphAction.cayley(g.rank), g, PipelineBudgets(promote=False))
    found = cl_search(g, 2, radius)
    assert result.report.verdict == "bounded"
    assert isinstance(found, Found)
    assert result.lower_bound <= Fraction(found.c)
