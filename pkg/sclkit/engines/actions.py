"""
Free groups acting on graphs.

Two backends: the Cayley tree of the free group (vertices are reduced
words, left multiplication, the word metric) and explicit finite graphs
with one automorphism per generator. Hyperbolic elements only live on the
tree; explicit backends carry the elliptic cases and promoted graphs.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from sclkit.config import settings
from sclkit.engines.counting_qm import CountingQM, Segment, bavard_bound, fraction_text, homogenize, qm_report
from sclkit.engines.envelopes import (
    PROJECTION_SYMMETRY,
    PROMOTED_DISPLACEMENT,
    PROMOTION_BOTTLENECK,
    QUASI_AXIS_EQUIVARIANCE,
    WWPD_XI,
    envelope_value,
)
from sclkit.engines.hypgraph import FiniteMetricGraph, bottleneck_search
from sclkit.engines.words import ReducedWord, ball, format_word
from sclkit.errors import (
    AxiomViolationError,
    DisconnectedGraphError,
    EllipticElementError,
    InvariantViolationError,
    MalformedInputError,
    PipelineStageError,
    PromotionError,
    RankMismatchError,
)
from sclkit.schemas import PipelineReport, PromotedElementCheck, QMReport

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Backends
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CayleyTreeBackend:
    rank: int

    delta = 0

    def act(self, g: ReducedWord, v: ReducedWord) -> ReducedWord:
        return g * v

    def distance(self, u: ReducedWord, v: ReducedWord) -> int:
        return len(u.inverse() * v)

    def geodesic(self, u: ReducedWord, v: ReducedWord) -> List[ReducedWord]:
        label = u.inverse() * v
        return [u * label.prefix(k) for k in range(len(label) + 1)]

    def basepoint(self) -> ReducedWord:
        return ReducedWord.identity(self.rank)


@dataclass
class ExplicitBackend:
    """A finite graph with generator i acting by the vertex permutation maps[i-1]."""

    graph: FiniteMetricGraph
    maps: Tuple[Tuple[int, ...], ...]
    _inverse: Tuple[Tuple[int, ...], ...] = field(default=(), repr=False)

    def __post_init__(self):
        n = self.graph.n
        edges = set(self.graph.edges)
        inverses = []
        for i, perm in enumerate(self.maps, start=1):
            if sorted(perm) != list(range(n)):
                raise MalformedInputError(f"generator {i} is not a bijection of the {n} vertices")
            for u, w in edges:
                a, b = perm[u], perm[w]
                if (min(a, b), max(a, b)) not in edges:
                    raise MalformedInputError(f"generator {i} maps edge ({u}, {w}) to a non-edge")
            inv = [0] * n
            for v, image in enumerate(perm):
                inv[image] = v
            inverses.append(tuple(inv))
        self._inverse = tuple(inverses)

    @property
    def rank(self) -> int:
        return len(self.maps)

    @property
    def delta(self) -> int:
        from sclkit.engines.hypgraph import hyperbolicity_delta

        return hyperbolicity_delta(self.graph)

    def act(self, g: ReducedWord, v: int) -> int:
        # g = x1 x2 ... xk acts as x1(x2(...xk(v)))
        for x in reversed(g.letters):
            v = self.maps[x - 1][v] if x > 0 else self._inverse[-x - 1][v]
        return v

    def distance(self, u: int, v: int) -> int:
        return self.graph.distance(u, v)

    def geodesic(self, u: int, v: int) -> List[int]:
        return self.graph.canonical_geodesic(u, v)

    def basepoint(self) -> int:
        return 0

    def path_orbit(self, vertices: Sequence[int]) -> List[Tuple[int, ...]]:
        """Images of a vertex path under the whole group, sorted."""
        start = tuple(vertices)
        seen = {start}
        frontier = [start]
        while frontier:
            nxt = []
            for path in frontier:
                for perm in self.maps + self._inverse:
                    image = tuple(perm[v] for v in path)
                    if image not in seen:
                        seen.add(image)
                        nxt.append(image)
            frontier = nxt
            if len(seen) > settings.ORBIT_CAP:
                raise InvariantViolationError(f"path orbit exceeds ORBIT_CAP={settings.ORBIT_CAP}")
        return sorted(seen)


Backend = Union[CayleyTreeBackend, ExplicitBackend]


@dataclass
class GraphAction:
    rank: int
    backend: Backend

    @classmethod
    def cayley(cls, rank: int) -> "GraphAction":
        return cls(rank, CayleyTreeBackend(rank))

    @classmethod
    def explicit(cls, graph: FiniteMetricGraph, maps: Sequence[Sequence[int]]) -> "GraphAction":
        backend = ExplicitBackend(graph, tuple(tuple(m) for m in maps))
        return cls(backend.rank, backend)

    @property
    def is_tree(self) -> bool:
        return isinstance(self.backend, CayleyTreeBackend)

    @property
    def delta(self) -> int:
        return self.backend.delta

    def check_rank(self, g: ReducedWord):
        if g.rank != self.rank:
            raise RankMismatchError(f"element of rank {g.rank} on an action of rank {self.rank}")

    def act(self, g: ReducedWord, v):
        self.check_rank(g)
        return self.backend.act(g, v)

    def distance(self, u, v) -> int:
        return self.backend.distance(u, v)

    def geodesic(self, u, v) -> list:
        return self.backend.geodesic(u, v)

    def path_orbit(self, vertices):
        return self.backend.path_orbit(vertices)

    def isometry_defect(self, triples: Sequence[Tuple[ReducedWord, object, object]]) -> int:
        """max |d(gx, gy) - d(x, y)| over sampled (g, x, y)."""
        worst = 0
        for g, x, y in triples:
            worst = max(worst, abs(self.distance(self.act(g, x), self.act(g, y)) - self.distance(x, y)))
        return worst


# ---------------------------------------------------------------------------
# Classification and quasi-axes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Elliptic:
    orbit_diameter: int


@dataclass(frozen=True)
class Hyperbolic:
    tau: Fraction


@dataclass(frozen=True)
class Inconclusive:
    displacements: Tuple[int, ...]


IsometryType = Union[Elliptic, Hyperbolic, Inconclusive]


def classify_isometry(act: GraphAction, g: ReducedWord, n_max: int = 8) -> IsometryType:
    """
    Elliptic with the diameter of the orbit of the basepoint, or Hyperbolic
    with the translation length. On the tree tau is the length of the cyclic
    reduction; on explicit graphs the orbit is enumerated.
    """
    if n_max < 4:
        raise ValueError(f"n_max must be >= 4, got {n_max}")
    act.check_rank(g)
    if act.is_tree:
        _, core = g.cyclic_reduction()
        if core.is_identity():
            return Elliptic(0)
        return Hyperbolic(Fraction(len(core)))

    x0 = act.backend.basepoint()
    orbit = [x0]
    v = act.act(g, x0)
    while v != x0:
        orbit.append(v)
        if len(orbit) > settings.ORBIT_CAP:
            displacements = tuple(act.distance(x0, w) for w in orbit[:n_max])
            logger.warning(f"orbit of {g} exceeds ORBIT_CAP, growth inconclusive")
            return Inconclusive(displacements)
        v = act.act(g, v)
    diameter = max(act.distance(a, b) for a in orbit for b in orbit)
    return Elliptic(diameter)


@dataclass(frozen=True)
class QuasiAxis:
    """
    Axis of `owner` = u * core * u^-1 on the Cayley tree: the line through
    base = u reading core forwards. Positions along the line are signed
    distances from the base.
    """

    owner: ReducedWord
    base: ReducedWord
    core: ReducedWord
    power: int = 1

    @property
    def D(self) -> int:
        return len(self.core)

    @property
    def tau(self) -> Fraction:
        return Fraction(len(self.core))

    @property
    def segment(self) -> Segment:
        return Segment(self.base, self.core)

    def _ray_letter(self, k: int) -> int:
        # k >= 0 reads the forward ray core^oo, k < 0 the backward ray
        if k >= 0:
            return self.core.letters[k % self.D]
        j = -k - 1
        return -self.core.letters[self.D - 1 - j % self.D]

    def vertex(self, pos: int) -> ReducedWord:
        if pos >= 0:
            letters = tuple(self._ray_letter(k) for k in range(pos))
        else:
            letters = tuple(self._ray_letter(-k - 1) for k in range(-pos))
        return self.base * ReducedWord(letters, self.base.rank)

    def position(self, v: ReducedWord) -> int:
        """Signed position of the nearest-point projection of v onto the line."""
        z = (self.base.inverse() * v).letters
        forward = 0
        while forward < len(z) and z[forward] == self._ray_letter(forward):
            forward += 1
        if forward:
            return forward
        backward = 0
        while backward < len(z) and z[backward] == self._ray_letter(-backward - 1):
            backward += 1
        return -backward

    def distance_to(self, v: ReducedWord) -> int:
        return len(self.base.inverse() * v) - abs(self.position(v))

    def window(self, w: int) -> List[ReducedWord]:
        return [self.vertex(k) for k in range(-w, w + 1)]


def quasi_axis(act: GraphAction, g: ReducedWord, power: int = 1) -> QuasiAxis:
    """
    Quasi-axis of g^power. The base is the minimal-displacement vertex of
    least word order, which on the tree is the conjugator u of the cyclic
    reduction g^power = u core u^-1.
    """
    if power < 1:
        raise ValueError(f"power must be positive, got {power}")
    act.check_rank(g)
    kind = classify_isometry(act, g)
    if not isinstance(kind, Hyperbolic):
        raise EllipticElementError(f"{g} is not hyperbolic on this backend ({kind})")
    h = g ** power
    u, core = h.cyclic_reduction()
    return QuasiAxis(owner=h, base=u, core=core, power=power)


def default_window(axis1: QuasiAxis, axis2: QuasiAxis) -> int:
    reach = max(len(axis1.base), len(axis2.base)) + len(axis1.base.inverse() * axis2.base)
    return 4 * reach + 4 * max(axis1.D, axis2.D) + 8


def projection_interval(axis1: QuasiAxis, axis2: QuasiAxis, window: int) -> Tuple[int, int]:
    positions = [axis1.position(v) for v in axis2.window(window)]
    return min(positions), max(positions)


def projection_diameter(act: GraphAction, axis1: QuasiAxis, axis2: QuasiAxis, window: int) -> int:
    """Diameter of the projection of axis2's window [-window, window] onto axis1."""
    if not act.is_tree:
        raise EllipticElementError("quasi-axes only exist on the Cayley-tree backend")
    lo, hi = projection_interval(axis1, axis2, window)
    return hi - lo


@dataclass(frozen=True)
class AxisComparison:
    parallel: bool
    diameters: Tuple[int, int, int]  # at window, 2 window, 4 window
    threshold: int


def compare_axes(act: GraphAction, axis1: QuasiAxis, axis2: QuasiAxis, window: Optional[int] = None) -> AxisComparison:
    """
    Parallel iff the projection diameter exceeds 3 max(tau) + 20 delta + 20
    once the window has doubled twice.
    """
    w = window if window is not None else default_window(axis1, axis2)
    diameters = tuple(projection_diameter(act, axis1, axis2, w * f) for f in (1, 2, 4))
    threshold = 3 * max(axis1.D, axis2.D) + 20 * act.delta + 20
    return AxisComparison(diameters[2] > threshold, diameters, threshold)


def virtual_projection(act: GraphAction, g: ReducedWord, h: ReducedWord, max_power: int = 2,
                       window: Optional[int] = None) -> int:
    """Largest projection of a virtual quasi-axis of h onto one of g (powers up to max_power)."""
    worst = 0
    for i in range(1, max_power + 1):
        for j in range(1, max_power + 1):
            a, b = quasi_axis(act, g, i), quasi_axis(act, h, j)
            cmp = compare_axes(act, a, b, window)
            if not cmp.parallel:
                worst = max(worst, cmp.diameters[2])
    return worst


def equivariance_gap(act: GraphAction, axis: QuasiAxis, moved: QuasiAxis, gamma: ReducedWord,
                     window: Optional[int] = None) -> int:
    """
    Distance between gamma * axis and moved = quasi_axis(gamma g gamma^-1),
    measured both ways over windows of the two lines.
    """
    w = window if window is not None else default_window(axis, moved)
    there = max(moved.distance_to(act.act(gamma, v)) for v in axis.window(w))
    back = max(axis.distance_to(act.act(gamma.inverse(), v)) for v in moved.window(w))
    return max(there, back)


def conjugate_projection(act: GraphAction, g: ReducedWord, h: ReducedWord) -> Optional[int]:
    """
    Pi~_g(h): the largest projection of the axis of a conjugate of h onto
    the axis of g. On the tree it is the longest common factor of the
    periodic words read along the two lines (either orientation); None once
    it reaches |core g| + |core h|, where the lines are parallel.
    """
    if not act.is_tree:
        raise EllipticElementError("quasi-axes only exist on the Cayley-tree backend")
    act.check_rank(h)
    cg = g.cyclic_reduction()[1].letters
    ch = h.cyclic_reduction()[1].letters
    if not cg:
        raise EllipticElementError(f"{g} is not hyperbolic on this backend")
    if not ch:
        return 0
    cap = len(cg) + len(ch)
    best = 0
    for target in (cg, tuple(-x for x in reversed(cg))):
        for i in range(len(ch)):
            for j in range(len(target)):
                k = 0
                while k < cap and ch[(i + k) % len(ch)] == target[(j + k) % len(target)]:
                    k += 1
                best = max(best, k)
    return None if best >= cap else best


# ---------------------------------------------------------------------------
# WWPD
# ---------------------------------------------------------------------------

@dataclass
class WWPDResult:
    xi: int
    tau: Fraction
    violators: List[ReducedWord]
    parallel: List[ReducedWord]
    witness: Optional[ReducedWord]
    envelope: int

    def as_dict(self) -> Dict[str, object]:
        return {
            "xi": self.xi,
            "tau": fraction_text(self.tau),
            "envelope": self.envelope,
            "witness": format_word(self.witness) if self.witness is not None else None,
            "parallel": [format_word(x) for x in self.parallel],
            "violators": [format_word(x) for x in self.violators],
        }


def wwpd_xi(act: GraphAction, g: ReducedWord, conj_radius: int, window: Optional[int] = None) -> WWPDResult:
    """
    xi = largest projection of gamma * axis(g) onto axis(g) over the
    conjugator ball, skipping conjugators whose axis is parallel (they form
    C). Violators exceed the recorded envelope A + B tau.
    """
    axis = quasi_axis(act, g)
    bound = envelope_value(WWPD_XI, axis.D)
    shift_bound = envelope_value(QUASI_AXIS_EQUIVARIANCE, act.delta)
    xi, witness = 0, None
    parallel, violators = [], []
    for gamma in ball(act.rank, conj_radius):
        other = quasi_axis(act, g.conjugate_by(gamma))
        gap = equivariance_gap(act, axis, other, gamma, window)
        if gap > shift_bound:
            raise InvariantViolationError(f"axis of the {gamma}-conjugate of {g} is {gap} from the moved axis (envelope {shift_bound})")
        cmp = compare_axes(act, axis, other, window)
        if cmp.parallel:
            parallel.append(gamma)
            continue
        d = cmp.diameters[2]
        if d > xi:
            xi, witness = d, gamma
        if d > bound:
            violators.append(gamma)
    logger.info(f"wwpd {g}: xi={xi} over radius {conj_radius}, {len(parallel)} parallel conjugators")
    return WWPDResult(xi, axis.tau, violators, parallel, witness, bound)


# ---------------------------------------------------------------------------
# Projection family
# ---------------------------------------------------------------------------

Interval = Tuple[int, int]


@dataclass
class ProjectionFamily:
    """
    Finitely many pairwise non-parallel lines. intervals[(a, b)] is the
    projection of member b onto member a, in a's positions.
    """

    size: int
    intervals: Dict[Tuple[int, int], Interval]
    eta: int
    xi: int = 0
    members: List[QuasiAxis] = field(default_factory=list)
    labels: List[str] = field(default_factory=list)
    conjugators: List[ReducedWord] = field(default_factory=list)
    delta: int = 0

    def d(self, a: int, b: int, c: int) -> int:
        """d^pi_a(b, c): span of the union of the projections of b and c onto a."""
        lb, hb = self.intervals[(a, b)]
        lc, hc = self.intervals[(a, c)]
        return max(hb, hc) - min(lb, lc)

    def axiom_one_violation(self) -> Optional[Tuple[int, int, int]]:
        for a in range(self.size):
            for b in range(a + 1, self.size):
                for c in range(b + 1, self.size):
                    large = sum(1 for v in (self.d(a, b, c), self.d(b, a, c), self.d(c, a, b)) if v > self.eta)
                    if large > 1:
                        return (a, b, c)
        return None

    def symmetry_violation(self) -> Optional[Tuple[int, int]]:
        """First pair whose two projection diameters differ by more than the symmetry envelope."""
        bound = envelope_value(PROJECTION_SYMMETRY, self.delta)
        for a in range(self.size):
            for b in range(a + 1, self.size):
                lab, hab = self.intervals[(a, b)]
                lba, hba = self.intervals[(b, a)]
                if abs((hab - lab) - (hba - lba)) > bound:
                    return (a, b)
        return None

    def check_axioms(self):
        triple = self.axiom_one_violation()
        if triple is not None:
            raise AxiomViolationError(f"more than one projection exceeds eta={self.eta}", triple)
        pair = self.symmetry_violation()
        if pair is not None:
            raise AxiomViolationError(f"projection diameters differ by more than {envelope_value(PROJECTION_SYMMETRY, self.delta)}", pair)

    def large_projections(self, a: int, b: int) -> List[int]:
        """{c : d^pi_c(a, b) > eta}; finite for a finite family."""
        return [c for c in range(self.size) if c not in (a, b) and self.d(c, a, b) > self.eta]

    def midpoint(self, a: int, b: int) -> int:
        lo, hi = self.intervals[(a, b)]
        return (lo + hi) // 2


def build_projection_family(act: GraphAction, g: ReducedWord, conj_radius: int,
                            slack: Optional[int] = None, window: Optional[int] = None) -> ProjectionFamily:
    """
    One member per parallelism class of conjugate axes gamma axis(g) over the
    conjugator ball; eta = xi + slack with slack defaulting to xi + 2.
    """
    wwpd = wwpd_xi(act, g, conj_radius, window)
    members: List[QuasiAxis] = []
    conjugators: List[ReducedWord] = []
    for gamma in ball(act.rank, conj_radius):
        axis = quasi_axis(act, g.conjugate_by(gamma))
        if any(compare_axes(act, m, axis, window).parallel for m in members):
            continue
        members.append(axis)
        conjugators.append(gamma)

    intervals: Dict[Tuple[int, int], Interval] = {}
    for a, A in enumerate(members):
        for b, B in enumerate(members):
            if a != b:
                intervals[(a, b)] = projection_interval(A, B, window or default_window(A, B))
    family_xi = max([hi - lo for lo, hi in intervals.values()], default=0)
    xi = max(wwpd.xi, family_xi)
    if slack is None:
        slack = settings.PROJECTION_SLACK if settings.PROJECTION_SLACK is not None else xi + 2
    family = ProjectionFamily(len(members), intervals, xi + slack, xi, members,
                              [format_word(c) for c in conjugators], conjugators, act.delta)
    family.check_axioms()
    logger.info(f"projection family for {g}: {len(members)} classes, xi={xi}, eta={family.eta}")
    return family


# ---------------------------------------------------------------------------
# Promotion
# ---------------------------------------------------------------------------

@dataclass
class PromotedGraph:
    graph: FiniteMetricGraph
    K: int
    eta: int
    bottleneck: int
    envelope: int
    member_vertices: List[Dict[int, int]]  # per member: position -> vertex

    @property
    def within_envelope(self) -> bool:
        return self.bottleneck <= self.envelope


def promote_to_quasitree(fam: ProjectionFamily, K: Optional[int] = None, margin: int = 1) -> PromotedGraph:
    """
    Each member becomes a path covering its attachment points plus `margin`;
    members a and b are joined, midpoint of pi_a(b) to midpoint of pi_b(a),
    when every third member c has d^pi_c(a, b) <= K.
    """
    fam.check_axioms()
    if K is None:
        K = settings.PROMOTION_K if settings.PROMOTION_K is not None else 4 * fam.eta + 4
    if K <= 4 * fam.eta:
        raise PromotionError(f"K={K} must exceed 4 eta = {4 * fam.eta}")

    member_vertices: List[Dict[int, int]] = []
    edges: List[Tuple[int, int]] = []
    n = 0
    for a in range(fam.size):
        spots = [fam.midpoint(a, b) for b in range(fam.size) if b != a] or [0]
        positions = range(min(spots) - margin, max(spots) + margin + 1)
        index = {p: n + i for i, p in enumerate(positions)}
        edges.extend((index[p], index[p + 1]) for p in positions[:-1])
        member_vertices.append(index)
        n += len(index)

    for a in range(fam.size):
        for b in range(a + 1, fam.size):
            if all(fam.d(c, a, b) <= K for c in range(fam.size) if c not in (a, b)):
                edges.append((member_vertices[a][fam.midpoint(a, b)], member_vertices[b][fam.midpoint(b, a)]))

    graph = FiniteMetricGraph.from_edges(n, edges)
    try:
        result = bottleneck_search(graph)
    except DisconnectedGraphError as e:
        raise PromotionError(f"promoted graph is disconnected with K={K}: {e}") from e
    envelope = envelope_value(PROMOTION_BOTTLENECK, fam.eta, K)
    promoted = PromotedGraph(graph, K, fam.eta, result.delta, envelope, member_vertices)
    if not promoted.within_envelope:
        logger.warning(f"promoted bottleneck {result.delta} exceeds envelope {envelope}; witness {result.witness}")
    logger.info(f"promoted graph: {n} vertices, {len(graph.edges)} edges, bottleneck {result.delta}")
    return promoted


def _member_image(g: ReducedWord, conjugators: Sequence[ReducedWord], h: ReducedWord, i: int) -> Optional[int]:
    # axes of x g x^-1 and y g y^-1 coincide iff y^-1 x commutes with g
    moved = h * conjugators[i]
    for j, gamma in enumerate(conjugators):
        z = gamma.inverse() * moved
        if z * g == g * z:
            return j
    return None


def check_promoted_element(act: GraphAction, g: ReducedWord, fam: ProjectionFamily, promoted: PromotedGraph,
                           qm: CountingQM, h: ReducedWord, n_max: int) -> PromotedElementCheck:
    """
    Transfer of h from X to the promoted graph Q. Elliptic h must fix every
    member class and keep F bounded on its powers; h with Pi~_g(h) <= eta
    moves members at most the displacement envelope; Pi~_g(h) below |w|
    keeps F bounded on powers of h.
    """
    if not fam.conjugators:
        raise PromotionError("family carries no conjugators; build it with build_projection_family")
    elliptic = isinstance(classify_isometry(act, h), Elliptic)
    pi = conjugate_projection(act, g, h)
    distances = promoted.graph.distances
    moves = []
    for i in range(fam.size):
        j = _member_image(g, fam.conjugators, h, i)
        if j is not None:
            moves.append(int(min(distances[u, v] for u in promoted.member_vertices[i].values()
                                 for v in promoted.member_vertices[j].values())))
    displacement = max(moves) if moves else None
    bound = envelope_value(PROMOTED_DISPLACEMENT, act.delta + fam.xi + 1)
    bounded = Fraction(0) in homogenize(qm, h, n_max)

    holds = True
    if elliptic:
        holds &= displacement in (None, 0) and bounded
    if pi is not None and pi <= fam.eta:
        holds &= displacement is None or displacement <= bound
    if pi is not None and pi < len(qm.segment) - qm.threshold:
        holds &= bounded
    if not holds:
        logger.warning(f"promotion transfer fails for {h}: Pi~={pi}, displacement {displacement} (bound {bound})")
    return PromotedElementCheck(element=format_word(h), elliptic_on_X=elliptic, conjugate_projection=pi,
                                member_displacement=displacement, displacement_bound=bound,
                                qm_bounded_on_powers=bounded, holds=holds)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

@dataclass
class PipelineBudgets:
    n_max: int = field(default_factory=lambda: settings.QM_N_MAX)
    conj_radius: int = field(default_factory=lambda: settings.WWPD_RADIUS)
    r_multiple: int = field(default_factory=lambda: settings.PIPELINE_R_MULTIPLE)
    max_power: int = field(default_factory=lambda: settings.PIPELINE_MAX_POWER)
    K: Optional[int] = field(default_factory=lambda: settings.PROMOTION_K)
    slack: Optional[int] = field(default_factory=lambda: settings.PROJECTION_SLACK)
    promote: bool = True
    defect_samples: int = 2


@dataclass
class PipelineResult:
    lower_bound: Optional[Fraction]
    report: PipelineReport
    qm: Optional[QMReport] = None


def _stage(name: str, fn, *args, **kwargs):
    logger.info(f"pipeline stage: {name}")
    try:
        return fn(*args, **kwargs)
    except PipelineStageError:
        raise
    except Exception as e:
        logger.error(f"pipeline stage {name} failed: {e}")
        raise PipelineStageError(name, e) from e


def least_power(tau: Fraction, R: int, max_power: int) -> Optional[int]:
    for n in range(1, max_power + 1):
        if n * tau >= R:
            return n
    return None


def _tree_qm(axis: QuasiAxis, n_max: int, defect_samples: int):
    qm = CountingQM(axis.segment)
    pairs = [(x, y) for x in ball(axis.owner.rank, defect_samples) for y in ball(axis.owner.rank, defect_samples)]
    return qm, qm_report(qm, axis.owner, n_max, pairs)


def scl_pipeline(act: GraphAction, g: ReducedWord, budgets: Optional[PipelineBudgets] = None) -> PipelineResult:
    """
    classify -> wwpd -> power -> quasi-axis -> promote -> counting qm ->
    homogenize -> Bavard. The lower bound is the low end of the H^(g^N)
    enclosure over 2 * 12 * N.
    """
    budgets = budgets or PipelineBudgets()
    text = format_word(g)
    kind = _stage("classify", classify_isometry, act, g)
    if isinstance(kind, Inconclusive):
        raise PipelineStageError("classify", InvariantViolationError(f"growth inconclusive: {kind.displacements}"))
    if isinstance(kind, Elliptic):
        report = PipelineReport(element=text, verdict="elliptic", lower_bound=fraction_text(Fraction(0)))
        return PipelineResult(Fraction(0), report)

    if not g.in_commutator_subgroup():
        # scl is undefined; still report the qm of g itself
        axis = _stage("axis", quasi_axis, act, g)
        qm, qm_rep = _stage("qm", _tree_qm, axis, budgets.n_max, budgets.defect_samples)
        report = PipelineReport(element=text, verdict="not_in_commutator_subgroup", power=1,
                                tau=fraction_text(kind.tau), hhat_interval=qm_rep.homogenized, qm=qm_rep)
        return PipelineResult(None, report, qm_rep)

    wwpd = _stage("wwpd", wwpd_xi, act, g, budgets.conj_radius)
    R = budgets.r_multiple * (act.delta + wwpd.xi + 1)
    N = least_power(kind.tau, R, budgets.max_power)
    if N is None:
        raise PipelineStageError("power", InvariantViolationError(
            f"no N <= {budgets.max_power} with N tau >= R = {R} (tau = {kind.tau})"))
    axis = _stage("axis", quasi_axis, act, g, N)

    family, promoted = None, None
    if budgets.promote:
        family = _stage("family", build_projection_family, act, g, budgets.conj_radius, budgets.slack)
        promoted = _stage("promote", promote_to_quasitree, family, budgets.K)

    qm, qm_rep = _stage("qm", _tree_qm, axis, budgets.n_max, budgets.defect_samples)
    interval = homogenize(qm, axis.owner, budgets.n_max)
    checks = []
    if promoted is not None:
        elements = [ReducedWord.identity(act.rank)] + [ReducedWord((i,), act.rank) for i in range(1, act.rank + 1)]
        checks = _stage("transfer", lambda: [check_promoted_element(act, g, family, promoted, qm, h, budgets.n_max)
                                             for h in elements])
    bound = bavard_bound(interval.magnitude(), settings.QM_DEFECT_BOUND)
    lower = bound / N if isinstance(bound, Fraction) else Fraction(0)
    report = PipelineReport(
        element=text,
        verdict="bounded",
        lower_bound=fraction_text(lower),
        power=N,
        tau=fraction_text(kind.tau),
        xi=wwpd.xi,
        R=R,
        promoted_delta=promoted.bottleneck if promoted else None,
        promoted_vertices=promoted.graph.n if promoted else None,
        hhat_interval=interval.as_strings(),
        qm=qm_rep,
        promotion_checks=checks,
    )
    logger.info(f"scl({text}) >= {fraction_text(lower)} with N={N}, xi={wwpd.xi}")
    return PipelineResult(lower, report, qm_rep)
