"""
Finite metric graphs: hyperbolicity, the bottleneck constant and the
Manning tree quotient.

Vertices are 0..n-1. Geodesics are canonical: the BFS tree rooted at the
smaller endpoint always takes the lowest-id parent, so every statement
about "the" geodesic [x, y] is reproducible.
"""

import logging
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from sclkit.config import settings
from sclkit.engines.envelopes import MANNING, MANNING_IMAGE, envelope_value
from sclkit.errors import DisconnectedGraphError, MalformedInputError, NotATreeError, QuasiGeodesicError
from sclkit.schemas import ManningReport

logger = logging.getLogger(__name__)

_PARENT_CHUNK = 256
_TRIPLE_CHUNK = 128
# elements per block in the exact four-point scan
_DELTA_BLOCK = 2_000_000


@dataclass
class FiniteMetricGraph:
    """Connected simple graph with the path metric."""

    n: int
    edges: Tuple[Tuple[int, int], ...]
    _dist: Optional[np.ndarray] = field(default=None, repr=False)
    _parents: Optional[np.ndarray] = field(default=None, repr=False)
    _csr: Optional[csr_matrix] = field(default=None, repr=False)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Tuple[int, int]]) -> "FiniteMetricGraph":
        if n < 1:
            raise MalformedInputError(f"graph needs at least one vertex, got n={n}")
        if n > settings.GRAPH_MAX_VERTICES:
            raise MalformedInputError(f"graph has {n} vertices, above the limit {settings.GRAPH_MAX_VERTICES}")
        seen = set()
        for u, w in edges:
            if not (0 <= u < n and 0 <= w < n):
                raise MalformedInputError(f"edge ({u}, {w}) out of range for n={n}")
            if u == w:
                raise MalformedInputError(f"self-loop at {u}")
            seen.add((min(u, w), max(u, w)))
        return cls(n, tuple(sorted(seen)))

    @classmethod
    def from_networkx(cls, graph: nx.Graph) -> "FiniteMetricGraph":
        relabel = {v: i for i, v in enumerate(sorted(graph.nodes))}
        return cls.from_edges(len(relabel), ((relabel[u], relabel[w]) for u, w in graph.edges))

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.edges)
        return graph

    @property
    def csr(self) -> csr_matrix:
        if self._csr is None:
            rows = [u for u, w in self.edges] + [w for u, w in self.edges]
            cols = [w for u, w in self.edges] + [u for u, w in self.edges]
            data = np.ones(len(rows), dtype=np.int8)
            self._csr = csr_matrix((data, (rows, cols)), shape=(self.n, self.n))
        return self._csr

    @property
    def distances(self) -> np.ndarray:
        """All-pairs distance matrix (int32). Raises on a disconnected graph."""
        if self._dist is None:
            if self.n == 1:
                self._dist = np.zeros((1, 1), dtype=np.int32)
                return self._dist
            raw = shortest_path(self.csr, method="D", directed=False, unweighted=True)
            if np.isinf(raw).any():
                ncomp, _ = connected_components(self.csr, directed=False)
                raise DisconnectedGraphError(f"graph on {self.n} vertices has {ncomp} components")
            self._dist = raw.astype(np.int32)
            logger.debug(f"distance matrix ready for n={self.n}, diameter {int(self._dist.max())}")
        return self._dist

    def distance(self, u: int, v: int) -> int:
        return int(self.distances[u, v])

    @property
    def diameter(self) -> int:
        return int(self.distances.max())

    def neighbours(self, v: int) -> List[int]:
        row = self.csr.getrow(v)
        return sorted(int(x) for x in row.indices)

    def ball(self, v: int, r: int) -> List[int]:
        return [int(x) for x in np.flatnonzero(self.distances[v] <= r)]

    @property
    def canonical_parents(self) -> np.ndarray:
        """
        parents[s, u] is the lowest-id neighbour of u one step closer to s,
        and -1 at u == s.
        """
        if self._parents is None:
            D = self.distances
            n = self.n
            parents = np.full((n, n), -1, dtype=np.int32)
            if n > 1:
                us = np.array([u for u, w in self.edges] + [w for u, w in self.edges], dtype=np.int32)
                ws = np.array([w for u, w in self.edges] + [u for u, w in self.edges], dtype=np.int32)
                order = np.lexsort((ws, us))
                us, ws = us[order], ws[order]
                starts = np.searchsorted(us, np.arange(n))
                for lo in range(0, n, _PARENT_CHUNK):
                    block = D[lo:lo + _PARENT_CHUNK]
                    closer = block[:, ws] == block[:, us] - 1
                    candidates = np.where(closer, ws, n)
                    best = np.minimum.reduceat(candidates, starts, axis=1)
                    parents[lo:lo + _PARENT_CHUNK] = np.where(best == n, -1, best)
            self._parents = parents
        return self._parents

    def canonical_geodesic(self, x: int, y: int) -> List[int]:
        """The canonical geodesic as a vertex list from x to y."""
        s, t = min(x, y), max(x, y)
        parents = self.canonical_parents[s]
        path = [t]
        while path[-1] != s:
            path.append(int(parents[path[-1]]))
        return path if x == t else path[::-1]

    def geodesic(self, x: int, y: int) -> List[int]:
        return self.canonical_geodesic(x, y)


# ---------------------------------------------------------------------------
# Hyperbolicity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeltaEstimate:
    value: Fraction  # half-integer
    exact: bool
    quadruples: int


def _four_point_excess(s1, s2, s3):
    # largest minus middle of three sums
    top = np.maximum(np.maximum(s1, s2), s3)
    low = np.minimum(np.minimum(s1, s2), s3)
    return 2 * top + low - (s1 + s2 + s3)


def four_point_delta(graph: FiniteMetricGraph, samples: Optional[int] = None, seed: Optional[int] = None) -> DeltaEstimate:
    """
    Four-point delta: the least delta with
    d(x,y) + d(z,w) <= max(d(x,z) + d(y,w), d(x,w) + d(y,z)) + 2 delta.

    Exact scan up to DELTA_EXACT_MAX_VERTICES vertices unless `samples` is
    given; otherwise a seeded random sample, which is only a lower bound.
    """
    D = graph.distances.astype(np.int64)
    n = graph.n
    if samples is None and n <= settings.DELTA_EXACT_MAX_VERTICES:
        worst = 0
        chunk = max(1, _DELTA_BLOCK // (n * n))
        for x in range(n):
            for lo in range(x + 1, n, chunk):
                ys = np.arange(lo, min(lo + chunk, n))
                s1 = D[x, ys][:, None, None] + D[None, :, :]
                s2 = D[x][None, :, None] + D[ys][:, None, :]
                s3 = D[ys][:, :, None] + D[x][None, None, :]
                worst = max(worst, int(_four_point_excess(s1, s2, s3).max()))
        return DeltaEstimate(Fraction(worst, 2), True, n ** 4)
    count = samples or settings.DELTA_SAMPLES
    rng = np.random.default_rng(settings.SEED if seed is None else seed)
    x, y, z, w = rng.integers(0, n, size=(4, count))
    excess = _four_point_excess(D[x, y] + D[z, w], D[x, z] + D[y, w], D[x, w] + D[y, z])
    logger.warning(f"four-point delta sampled on {count} quadruples of n={n}: lower bound only")
    return DeltaEstimate(Fraction(int(excess.max()), 2), False, count)


def hyperbolicity_delta(graph: FiniteMetricGraph, samples: Optional[int] = None, seed: Optional[int] = None) -> int:
    """Integer delta: the ceiling of the four-point value."""
    return math.ceil(four_point_delta(graph, samples, seed).value)


# ---------------------------------------------------------------------------
# Bottleneck constant
# ---------------------------------------------------------------------------

def _subtree_max_ids(P: np.ndarray, D: np.ndarray, lo: int) -> np.ndarray:
    """
    For the BFS trees rooted at lo, lo+1, ...: out[i, u] is the largest vertex
    id in the subtree of u in the canonical tree rooted at lo + i.
    """
    k, n = D.shape
    out = np.broadcast_to(np.arange(n), (k, n)).copy()
    rows, cols = np.nonzero(D > 0)
    order = np.argsort(-D[rows, cols], kind="stable")
    rows, cols = rows[order], cols[order]
    depth = D[rows, cols]
    cuts = np.flatnonzero(np.diff(depth)) + 1
    for lvl_rows, lvl_cols in zip(np.split(rows, cuts), np.split(cols, cuts)):
        np.maximum.at(out, (lvl_rows, P[lvl_rows + lo, lvl_cols]), out[lvl_rows, lvl_cols])
    return out


def _separation_failure(graph: FiniteMetricGraph, delta: int, labels: np.ndarray) -> Optional[Tuple[int, int, int]]:
    """
    First (x, v, y) with v on the canonical geodesic [x, y], both ends outside
    B(v, delta) and joined in G - B(v, delta); None when there is none.

    Past the point w at distance delta + 1 beyond v, the geodesic toward y
    stays outside B(v, delta), so y shares the component of w. It suffices to
    test v = anc_{delta+1}(w) for every w, with some y > x below w.
    """
    D = graph.distances
    P = graph.canonical_parents
    n = graph.n
    for lo in range(0, n, _TRIPLE_CHUNK):
        hi = min(lo + _TRIPLE_CHUNK, n)
        Db = D[lo:hi]
        rows, W = np.nonzero(Db >= 2 * delta + 2)
        if len(W) == 0:
            continue
        X = rows + lo
        V = W
        for _ in range(delta + 1):
            V = P[X, V]
        biggest = _subtree_max_ids(P, Db, lo)[rows, W]
        bad = (biggest > X) & (labels[V, W] == labels[V, X])
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            return int(X[i]), int(V[i]), int(biggest[i])
    return None


def _ball_complement_labels(graph: FiniteMetricGraph, radius: int) -> np.ndarray:
    """labels[v, u]: component of u in G - B(v, radius), -1 when u is in the ball."""
    D = graph.distances
    A = graph.csr
    labels = np.full((graph.n, graph.n), -1, dtype=np.int32)
    for v in range(graph.n):
        keep = np.flatnonzero(D[v] > radius)
        if len(keep) == 0:
            continue
        _, lab = connected_components(A[keep][:, keep], directed=False)
        labels[v, keep] = lab
    return labels


@dataclass(frozen=True)
class BottleneckResult:
    delta: int
    # a failing (x, v, y) at delta - 1, None when delta == 0
    witness: Optional[Tuple[int, int, int]]


def bottleneck_search(graph: FiniteMetricGraph, start: int = 0) -> BottleneckResult:
    """Scan Delta upward from `start`; separation only improves as Delta grows."""
    witness = None
    delta = start
    while 2 * delta + 2 <= graph.diameter:
        failure = _separation_failure(graph, delta, _ball_complement_labels(graph, delta))
        if failure is None:
            break
        witness = failure
        logger.debug(f"bottleneck {delta} fails at {witness}")
        delta += 1
    logger.info(f"bottleneck constant {delta} on n={graph.n}")
    return BottleneckResult(delta, witness)


def bottleneck_constant(graph: FiniteMetricGraph) -> int:
    """
    Least Delta such that for all x, y and every v on the canonical geodesic
    [x, y], every path from x to y meets the closed ball B(v, Delta).
    """
    return bottleneck_search(graph).delta


# ---------------------------------------------------------------------------
# Manning tree
# ---------------------------------------------------------------------------

@dataclass
class TreeQuotient:
    tree: FiniteMetricGraph
    alpha: Tuple[int, ...]  # graph vertex -> tree vertex
    beta: Tuple[int, ...]  # tree vertex -> representative graph vertex
    levels: Tuple[int, ...]  # per tree vertex
    R: int
    delta: int
    base: int


def _annulus_levels(d: np.ndarray, R: int) -> np.ndarray:
    return np.where(d <= R, 0, (d - 1) // R)


def manning_tree(graph: FiniteMetricGraph, delta_cap: Optional[int] = None, base: int = 0) -> TreeQuotient:
    """
    Collapse the components of the annuli around `base` (width R = 20 Delta)
    to points. Raises NotATreeError with a cycle of components when the
    quotient is not a tree.
    """
    if not 0 <= base < graph.n:
        raise MalformedInputError(f"base vertex {base} out of range")
    delta = max(delta_cap if delta_cap is not None else bottleneck_constant(graph), 1)
    R = MANNING["R_factor"] * delta
    d = graph.distances[base]
    level = _annulus_levels(d, R)

    same = [(u, w) for u, w in graph.edges if level[u] == level[w]]
    rows = [u for u, _ in same]
    cols = [w for _, w in same]
    flat = csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(graph.n, graph.n))
    k, comp = connected_components(flat, directed=False)

    tree_edges = sorted({(min(comp[u], comp[w]), max(comp[u], comp[w]))
                         for u, w in graph.edges if comp[u] != comp[w]})
    T = nx.Graph()
    T.add_nodes_from(range(k))
    T.add_edges_from(tree_edges)
    if not nx.is_tree(T):
        cycle = [u for u, _ in nx.find_cycle(T)]
        raise NotATreeError(f"annulus quotient with R={R} is not a tree", cycle)

    beta = []
    comp_levels = []
    for c in range(k):
        members = np.flatnonzero(comp == c)
        order = np.lexsort((members, d[members]))
        rep = int(members[order[0]])
        beta.append(rep)
        comp_levels.append(int(level[rep]))
    logger.info(f"Manning tree: Delta={delta}, R={R}, {k} components over {int(level.max()) + 1} annuli")
    return TreeQuotient(
        tree=FiniteMetricGraph.from_edges(k, ((int(a), int(b)) for a, b in tree_edges)),
        alpha=tuple(int(c) for c in comp),
        beta=tuple(beta),
        levels=tuple(comp_levels),
        R=R,
        delta=delta,
        base=base,
    )


def manning_report(graph: FiniteMetricGraph, tq: TreeQuotient) -> ManningReport:
    """Check 8 Delta d_T - 16 Delta <= d_Q(beta s, beta t) <= 26 Delta d_T on every pair of tree vertices."""
    DT = tq.tree.distances.astype(np.int64)
    beta = np.array(tq.beta)
    DQ = graph.distances[np.ix_(beta, beta)].astype(np.int64)
    delta = tq.delta
    lower = DQ - (MANNING["lower_slope"] * delta * DT - MANNING["lower_offset"] * delta)
    upper = MANNING["upper_slope"] * delta * DT - DQ
    slack = np.minimum(lower, upper)
    holds = bool((slack >= 0).all())
    worst = None
    if not holds:
        i, j = np.unravel_index(int(np.argmin(slack)), slack.shape)
        worst = (int(tq.beta[i]), int(tq.beta[j]))
        logger.warning(f"Manning inequalities fail at representatives {worst}")
    return ManningReport(
        delta=delta,
        R=tq.R,
        base=tq.base,
        tree_vertices=tq.tree.n,
        tree_edges=len(tq.tree.edges),
        levels=max(tq.levels) + 1,
        inequalities_hold=holds,
        worst_pair=worst,
        tree_scale=MANNING["rescale"] * delta,
        embedding_constants=(-(-MANNING["upper_slope"] // MANNING["rescale"]), MANNING["lower_offset"] * delta),
    )


# ---------------------------------------------------------------------------
# Quasi-geodesic images
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ok:
    epsilon: int


@dataclass(frozen=True)
class Violation:
    epsilon: int
    envelope: int
    witness: int  # path index whose image is farthest from the tree geodesic


def quasigeodesic_violation(graph: FiniteMetricGraph, path: Sequence[int], L: int, A: int) -> Optional[Tuple[int, int]]:
    """First index pair (i, j) breaking (j-i)/L - A <= d <= L(j-i) + A, or None."""
    idx = np.asarray(path, dtype=np.int64)
    sub = graph.distances[np.ix_(idx, idx)].astype(np.int64)
    gaps = np.abs(np.arange(len(idx))[:, None] - np.arange(len(idx))[None, :])
    bad = (L * sub < gaps - L * A) | (sub > L * gaps + A)
    if not bad.any():
        return None
    i, j = np.argwhere(bad)[0]
    return int(i), int(j)


def quasigeodesic_image_check(graph: FiniteMetricGraph, tq: TreeQuotient, path: Sequence[int],
                              L: int = 2, A: Optional[int] = None) -> Union[Ok, Violation]:
    """
    Image of an (L, A)-quasi-geodesic edge path under alpha: the least
    epsilon putting it in the epsilon-neighbourhood of the tree geodesic
    between its endpoint images. A defaults to 10 delta + 10.
    """
    if not path:
        raise QuasiGeodesicError("empty path")
    for u, v in zip(path, path[1:]):
        if graph.distance(u, v) > 1:
            raise QuasiGeodesicError("consecutive path vertices are not adjacent", (u, v))
    if A is None:
        A = 10 * hyperbolicity_delta(graph) + 10
    broken = quasigeodesic_violation(graph, path, L, A)
    if broken is not None:
        raise QuasiGeodesicError(f"path is not a ({L}, {A})-quasi-geodesic", broken)

    images = [tq.alpha[v] for v in path]
    spine = tq.tree.canonical_geodesic(images[0], images[-1])
    DT = tq.tree.distances
    gaps = DT[np.ix_(images, spine)].min(axis=1)
    epsilon = int(gaps.max())
    bound = envelope_value(MANNING_IMAGE, tq.delta)
    if epsilon > bound:
        return Violation(epsilon, bound, int(np.argmax(gaps)))
    return Ok(epsilon)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def random_quasi_tree(n: int, chords: int, span: int, seed: Optional[int] = None, locality: int = 3) -> FiniteMetricGraph:
    """
    Random tree on n vertices (each vertex hangs off one of the `locality`
    previous ones) plus `chords` extra edges joining vertices at tree
    distance between 2 and `span`.
    """
    rng = random.Random(settings.SEED if seed is None else seed)
    tree = nx.Graph()
    tree.add_node(0)
    for v in range(1, n):
        tree.add_edge(v, rng.randint(max(0, v - locality), v - 1))
    graph = tree.copy()
    for _ in range(chords):
        u = rng.randrange(n)
        near = nx.single_source_shortest_path_length(tree, u, cutoff=span)
        candidates = sorted(v for v, dist in near.items() if dist >= 2 and not graph.has_edge(u, v))
        if candidates:
            graph.add_edge(u, rng.choice(candidates))
    return FiniteMetricGraph.from_networkx(graph)


def path_graph(n: int) -> FiniteMetricGraph:
    return FiniteMetricGraph.from_networkx(nx.path_graph(n))


def cycle_graph(n: int) -> FiniteMetricGraph:
    return FiniteMetricGraph.from_networkx(nx.cycle_graph(n))


def grid_graph(rows: int, cols: int) -> FiniteMetricGraph:
    return FiniteMetricGraph.from_networkx(nx.convert_node_labels_to_integers(nx.grid_2d_graph(rows, cols)))
