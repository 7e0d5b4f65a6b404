"""
Non-overlapping counting quasi-morphisms.

A copy of the base segment w is a translate gamma*w. N_w(q, q') is the largest
number of pairwise disjoint copies of w lying, with orientation, on the
geodesic [q, q']. On the Cayley tree of a free group a geodesic is a reduced
word and copies are exact subword occurrences (epsilon = 0). On an explicit
finite graph copies are the orbit of a vertex path and containment allows an
epsilon-neighbourhood of the canonical geodesic.

    F(alpha) = N_w(x0, alpha x0) - N_{w^-1}(x0, alpha x0)
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from sclkit.config import settings
from sclkit.engines.envelopes import HOMOGENIZED_DEFECT_FACTOR
from sclkit.engines.words import ReducedWord, format_word
from sclkit.errors import SegmentTooShortError

logger = logging.getLogger(__name__)

TREE_MODEL = "tree"
GRAPH_MODEL = "graph"


@dataclass(frozen=True)
class Segment:
    """Oriented segment of the Cayley tree: from `start`, reading `label`."""

    start: ReducedWord
    label: ReducedWord

    @property
    def end(self) -> ReducedWord:
        return self.start * self.label

    def translate(self, gamma: ReducedWord) -> "Segment":
        return Segment(gamma * self.start, self.label)

    def reversed(self) -> "Segment":
        return Segment(self.end, self.label.inverse())

    def __len__(self) -> int:
        return len(self.label)


@dataclass(frozen=True)
class PathSegment:
    """Oriented vertex path in an explicit graph."""

    vertices: Tuple[int, ...]

    def reversed(self) -> "PathSegment":
        return PathSegment(tuple(reversed(self.vertices)))

    def __len__(self) -> int:
        return max(len(self.vertices) - 1, 0)


def _greedy_count(pattern: Sequence[int], text: Sequence[int]) -> int:
    # leftmost occurrence first; all intervals have equal length so this is
    # the earliest-finish rule of interval scheduling
    lp, lt = len(pattern), len(text)
    if lp == 0:
        raise SegmentTooShortError("empty base segment")
    pattern = tuple(pattern)
    text = tuple(text)
    count, i = 0, 0
    while i + lp <= lt:
        if text[i:i + lp] == pattern:
            count += 1
            i += lp
        else:
            i += 1
    return count


def occurrence_positions(pattern: Sequence[int], text: Sequence[int]) -> List[int]:
    lp = len(pattern)
    pattern = tuple(pattern)
    text = tuple(text)
    return [i for i in range(len(text) - lp + 1) if text[i:i + lp] == pattern]


def _max_disjoint_intervals(intervals: Iterable[Tuple[int, int]]) -> int:
    count, last_end = 0, None
    for lo, hi in sorted(intervals, key=lambda iv: (iv[1], iv[0])):
        if last_end is None or lo > last_end:
            count += 1
            last_end = hi
    return count


def count_nonoverlapping(w: Union[Segment, PathSegment, ReducedWord], frm: Any, to: Any,
                         ambient: Any = None, epsilon: int = 0, copies: Optional[Sequence[PathSegment]] = None) -> int:
    """
    N_w(frm, to).

    Word model: frm and to are group elements, the geodesic is frm^-1 * to and
    copies of w are the occurrences of its label. Graph model: pass the
    ambient backend (distance, geodesic) and the orbit of copies.
    """
    if isinstance(w, (Segment, ReducedWord)):
        label = w.label if isinstance(w, Segment) else w
        if len(label) == 0:
            raise SegmentTooShortError("base segment must be nonempty in the tree model")
        path = frm.inverse() * to
        return _greedy_count(label.letters, path.letters)
    if ambient is None or copies is None:
        raise ValueError("graph-model counts need the ambient backend and the copy orbit")
    return _count_in_graph(ambient, copies, frm, to, epsilon)


def _count_in_graph(ambient: Any, copies: Sequence[PathSegment], frm: int, to: int, epsilon: int) -> int:
    geodesic = ambient.geodesic(frm, to)
    intervals = []
    for copy in copies:
        positions = []
        for v in copy.vertices:
            dists = [ambient.distance(v, p) for p in geodesic]
            best = min(dists)
            if best > epsilon:
                break
            positions.append(dists.index(best))
        else:
            if positions and positions[0] < positions[-1]:
                intervals.append((min(positions), max(positions)))
    return _max_disjoint_intervals(intervals)


@dataclass(frozen=True)
class RationalInterval:
    lo: Fraction
    hi: Fraction

    def __contains__(self, x) -> bool:
        return self.lo <= Fraction(x) <= self.hi

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def scale(self, m: int) -> "RationalInterval":
        a, b = self.lo * m, self.hi * m
        return RationalInterval(min(a, b), max(a, b))

    def as_strings(self) -> Tuple[str, str]:
        return (fraction_text(self.lo), fraction_text(self.hi))

    def magnitude(self) -> Fraction:
        """Least |x| over the interval: 0 when it straddles zero."""
        if self.lo > 0:
            return self.lo
        if self.hi < 0:
            return -self.hi
        return Fraction(0)


def fraction_text(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


@dataclass
class CountingQM:
    """
    Brooks-style quasi-morphism for the base segment `segment`.

    `ambient` is None for the Cayley-tree word model, otherwise an explicit
    backend exposing act/distance/geodesic/path_orbit.
    """

    segment: Union[Segment, PathSegment]
    ambient: Any = None
    mode: str = "non_overlapping"
    epsilon: int = 0
    bottleneck: int = 0
    _copies: Optional[Tuple[PathSegment, ...]] = field(default=None, repr=False)
    _cache: Dict[Any, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.mode != "non_overlapping":
            raise ValueError(f"unsupported counting mode {self.mode!r}")
        if len(self.segment) <= self.threshold:
            raise SegmentTooShortError(
                f"|w| = {len(self.segment)} does not exceed the threshold M = {self.threshold}"
            )
        if self.model == GRAPH_MODEL:
            self._copies = tuple(PathSegment(p) for p in self.ambient.path_orbit(self.segment.vertices))
            logger.info(f"graph-model qm: {len(self._copies)} copies of a length-{len(self.segment)} segment")

    @property
    def model(self) -> str:
        return TREE_MODEL if self.ambient is None else GRAPH_MODEL

    @property
    def threshold(self) -> int:
        if self.model == TREE_MODEL:
            return 0
        return settings.QM_SEGMENT_MULTIPLE * (self.bottleneck + 1) if self.epsilon > 0 else 0

    @property
    def basepoint(self):
        if isinstance(self.segment, Segment):
            return self.segment.start
        return self.segment.vertices[0]

    def count(self, frm, to) -> int:
        if self.model == TREE_MODEL:
            return count_nonoverlapping(self.segment, frm, to)
        return _count_in_graph(self.ambient, self._copies, frm, to, self.epsilon)

    def value(self, alpha: ReducedWord) -> int:
        if alpha in self._cache:
            return self._cache[alpha]
        x0 = self.basepoint
        if self.model == TREE_MODEL:
            path = (x0.inverse() * alpha * x0).letters
            label = self.segment.label
            result = _greedy_count(label.letters, path) - _greedy_count(label.inverse().letters, path)
        else:
            ax0 = self.ambient.act(alpha, x0)
            result = self.count(x0, ax0) - self.count(ax0, x0)
        self._cache[alpha] = result
        return result

    def describe(self) -> str:
        if isinstance(self.segment, Segment):
            return f"w={format_word(self.segment.label)} from {format_word(self.segment.start)}"
        return f"w=path{list(self.segment.vertices)}"


def qm_value(qm: CountingQM, alpha: ReducedWord) -> int:
    return qm.value(alpha)


def defect_estimate(qm: CountingQM, sample_pairs: Iterable[Tuple[ReducedWord, ReducedWord]]) -> int:
    """max |F(xy) - F(x) - F(y)| over the sampled pairs (a lower bound on the defect)."""
    worst = None
    for x, y in sample_pairs:
        d = abs(qm.value(x * y) - qm.value(x) - qm.value(y))
        if worst is None or d > worst:
            worst = d
    if worst is None:
        raise ValueError("defect_estimate needs at least one sample pair")
    return worst


def homogenize(qm: CountingQM, g: ReducedWord, n_max: int, defect_bound: Optional[int] = None) -> RationalInterval:
    """Enclosure of the homogenization: F(g^n)/n +- defect/n at n = n_max."""
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    bound = settings.QM_DEFECT_BOUND if defect_bound is None else defect_bound
    centre = Fraction(qm.value(g ** n_max), n_max)
    slack = Fraction(bound, n_max)
    return RationalInterval(centre - slack, centre + slack)


def homogenized_defect_estimate(qm: CountingQM, sample_pairs: Iterable[Tuple[ReducedWord, ReducedWord]],
                                n_max: int) -> Fraction:
    """
    Upper end of max |H^(xy) - H^(x) - H^(y)| over the sampled pairs, taking
    each H^ anywhere in its homogenize() enclosure. Compare against
    HOMOGENIZED_DEFECT_FACTOR * D(H).
    """
    cache: Dict[ReducedWord, RationalInterval] = {}

    def enclosure(x: ReducedWord) -> RationalInterval:
        if x not in cache:
            cache[x] = homogenize(qm, x, n_max)
        return cache[x]

    worst = None
    for x, y in sample_pairs:
        ixy, ix, iy = enclosure(x * y), enclosure(x), enclosure(y)
        d = max(abs(ixy.hi - ix.lo - iy.lo), abs(ixy.lo - ix.hi - iy.hi))
        if worst is None or d > worst:
            worst = d
    if worst is None:
        raise ValueError("homogenized_defect_estimate needs at least one sample pair")
    return worst


@dataclass(frozen=True)
class ZeroDefect:
    """The quasi-morphism is a homomorphism; Bavard's inequality does not apply."""

    hhat: Fraction

    @property
    def obstructs(self) -> bool:
        # a nonzero homomorphism value means g is outside [G, G]
        return self.hhat != 0


def bavard_bound(hhat_lo, defect_bound) -> Union[Fraction, ZeroDefect]:
    """scl(g) >= |H(g)| / (2 D(H)) for homogeneous H."""
    hhat_lo, defect_bound = Fraction(hhat_lo), Fraction(defect_bound)
    if defect_bound < 0:
        raise ValueError(f"defect bound must be nonnegative, got {defect_bound}")
    if defect_bound == 0:
        return ZeroDefect(hhat_lo)
    if hhat_lo == 0:
        return Fraction(0)
    return abs(hhat_lo) / (2 * defect_bound)


def bavard_bound_nonhomogeneous(hhat, defect_bound) -> Union[Fraction, ZeroDefect]:
    """scl(g) >= |H^(g)| / (4 D(H)) when D is the defect of the inhomogeneous H."""
    result = bavard_bound(hhat, defect_bound)
    if isinstance(result, ZeroDefect):
        return result
    return result / 2


def claim_gap(w: ReducedWord, q: ReducedWord, r: ReducedWord, q2: ReducedWord) -> int:
    """|N_w(q,q') - N_w(q,r) - N_w(r,q')|, the thin-triangle count defect."""
    return abs(count_nonoverlapping(w, q, q2) - count_nonoverlapping(w, q, r) - count_nonoverlapping(w, r, q2))


# dense per-length lookup tables beyond this many entries are refused
_CLAIM_TABLE_LIMIT = 1 << 26


def exhaustive_claim_gap(w: ReducedWord, max_len: int) -> int:
    """
    Largest claim_gap(w, 1, p[:k], p) over every reduced word p with
    |p| <= max_len and every cut 0 <= k <= |p|.

    Words are coded in base 2*rank. Counts grow one letter at a time: an
    occurrence ending at the new letter is taken when it starts at or after
    the end of the last one taken, which is the leftmost greedy rule.
    """
    if len(w) == 0:
        raise SegmentTooShortError("base segment must be nonempty in the tree model")
    base = 2 * w.rank
    if base ** max_len > _CLAIM_TABLE_LIMIT:
        raise ValueError(f"{base}^{max_len} word codes is too many for an exhaustive claim check")

    def code(x: int) -> int:
        return 2 * (abs(x) - 1) + (x < 0)

    lp = len(w)
    target = 0
    for x in w.letters:
        target = target * base + code(x)
    window = base ** lp

    codes = np.zeros(1, dtype=np.int64)
    counts = np.zeros(1, dtype=np.int64)
    free = np.zeros(1, dtype=np.int64)
    last = np.full(1, -1, dtype=np.int64)
    tables = [counts.copy()]
    levels = [(codes, counts)]
    for length in range(1, max_len + 1):
        parts = []
        for c in range(base):
            keep = last != (c ^ 1)
            new = codes[keep] * base + c
            hit = (length >= lp) & (new % window == target) & (length - lp >= free[keep])
            parts.append((new, counts[keep] + hit, np.where(hit, length, free[keep]), np.full(len(new), c)))
        codes, counts, free, last = (np.concatenate(col) for col in zip(*parts))
        table = np.zeros(base ** length, dtype=np.int16)
        table[codes] = counts
        tables.append(table)
        levels.append((codes, counts))

    worst = 0
    for length, (codes, counts) in enumerate(levels):
        for k in range(1, length):
            split = base ** (length - k)
            gap = np.abs(counts - tables[k][codes // split] - tables[length - k][codes % split])
            worst = max(worst, int(gap.max()))
    logger.info(f"exhaustive claim check for {format_word(w)} up to length {max_len}: max gap {worst}")
    return worst


def parallel_ratio_check(qm: CountingQM, g: ReducedWord, h: ReducedWord, n_max: int) -> Tuple[RationalInterval, RationalInterval, bool]:
    """
    Compare the enclosures of H^(g)/tau_g and H^(h)/tau_h for h with an axis
    parallel to g's, translating the same way. Returns both enclosures and
    whether they intersect.
    """
    tau_g = len(g.cyclic_reduction()[1])
    tau_h = len(h.cyclic_reduction()[1])
    ig = homogenize(qm, g, n_max)
    ih = homogenize(qm, h, n_max)
    rg = RationalInterval(ig.lo / tau_g, ig.hi / tau_g)
    rh = RationalInterval(ih.lo / tau_h, ih.hi / tau_h)
    return rg, rh, not (rg.hi < rh.lo or rh.hi < rg.lo)


def qm_report(qm: CountingQM, g: ReducedWord, n_max: int, sample_pairs: Sequence[Tuple[ReducedWord, ReducedWord]],
              value_samples: Sequence[ReducedWord] = ()):
    """Evaluate, estimate the defect, homogenize and bound; packed as a QMReport."""
    from sclkit.schemas import QMReport

    defect_bound = settings.QM_DEFECT_BOUND
    interval = homogenize(qm, g, n_max, defect_bound)
    observed = defect_estimate(qm, sample_pairs) if sample_pairs else 0
    # the enclosure width is 2 * defect_bound / n_max; observed is a sampled lower bound only
    bound = bavard_bound(interval.magnitude(), defect_bound)
    if isinstance(bound, ZeroDefect):
        bound = Fraction(0)
    samples = {format_word(x): qm.value(x) for x in (g,) + tuple(value_samples)}
    if observed > defect_bound and qm.model == TREE_MODEL:
        logger.error(f"observed defect {observed} exceeds the certified bound {defect_bound}")
    return QMReport(
        base_segment=qm.describe(),
        value=qm.value(g),
        value_samples=samples,
        defect_observed=observed,
        defect_bound=defect_bound,
        defect_certified=qm.model == TREE_MODEL,
        homogenized=interval.as_strings(),
        width_defect=defect_bound,
        homogenized_defect_bound=HOMOGENIZED_DEFECT_FACTOR * defect_bound,
        bavard_lower_bound=fraction_text(bound),
        threshold_m=qm.threshold,
        epsilon=qm.epsilon,
        n_max=n_max,
    )
