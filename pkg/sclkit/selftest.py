"""
Acceptance suite behind `sclkit selftest`. Each criterion returns a
SelftestRow; the CLI renders them with pandas.
"""

import logging
import random
from fractions import Fraction
from typing import Callable, List, Sequence, Tuple

import pandas as pd

from sclkit.engines import actions, hypgraph, nt_classifier
from sclkit.engines.counting_qm import CountingQM, Segment, claim_gap, defect_estimate, exhaustive_claim_gap
from sclkit.engines.envelopes import DELTA_BOTTLENECK, envelope_value
from sclkit.engines.words import Found, ReducedWord, ball, cl_search, parse_word
from sclkit.errors import SclkitError
from sclkit.schemas import NTDecomposition, PureComponent, SelftestRow

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Generators shared with the test suite
# ---------------------------------------------------------------------------

def random_word(rng: random.Random, rank: int, length: int) -> ReducedWord:
    letters: List[int] = []
    while len(letters) < length:
        x = rng.choice([i for i in range(1, rank + 1)] + [-i for i in range(1, rank + 1)])
        if letters and letters[-1] == -x:
            continue
        letters.append(x)
    return ReducedWord(tuple(letters), rank)


def random_hyperbolic(rng: random.Random, rank: int, min_len: int = 2, max_len: int = 6) -> ReducedWord:
    while True:
        g = random_word(rng, rank, rng.randint(min_len, max_len))
        if not g.cyclic_reduction()[1].is_identity():
            return g


def random_decomposition(rng: random.Random, reps: int = 3, max_members: int = 3) -> NTDecomposition:
    """Random symbolic decomposition; about half the classes are built inessential."""
    comps: List[PureComponent] = []
    for j in range(rng.randint(1, reps)):
        rep = f"h{j}"
        kind = rng.choice(["pseudo_anosov", "dehn_twist"])
        if rng.random() < 0.5:
            exps = rng.choice([(1, -1), (-2, 2), (2, 2, -1), (3, 3, 3, -1), (2, -2, 1, -1)])[:max_members + 1]
            rs = [1] * len(exps)
        else:
            size = rng.randint(1, max_members)
            exps = [rng.choice([-3, -2, -1, 1, 2, 3]) for _ in range(size)]
            rs = [rng.choice([1, 2]) for _ in range(size)]
        for i, (m, r) in enumerate(zip(exps, rs)):
            comps.append(PureComponent(
                id=f"c{j}_{i}", kind=kind, twist_power=rng.choice([1, 2, -1]) if kind == "dehn_twist" else None,
                support_complexity=rng.randint(0, 4), chiral=True, rep_id=rep, m=m, r=r))
    for i in range(rng.randint(0, 2)):
        comps.append(PureComponent(id=f"a{i}", kind="pseudo_anosov", support_complexity=rng.randint(0, 4),
                                   chiral=False, k=rng.randint(1, 2)))
    return NTDecomposition(power=rng.randint(1, 3), components=comps)


def fraction_rank(rows: Sequence[Sequence[Fraction]]) -> int:
    """Plain Gaussian elimination over Fraction; the oracle for qm_dimension."""
    M = [[Fraction(x) for x in row] for row in rows]
    rank = 0
    cols = len(M[0]) if M else 0
    for col in range(cols):
        pivot = next((r for r in range(rank, len(M)) if M[r][col] != 0), None)
        if pivot is None:
            continue
        M[rank], M[pivot] = M[pivot], M[rank]
        for r in range(len(M)):
            if r != rank and M[r][col] != 0:
                factor = M[r][col] / M[rank][col]
                M[r] = [a - factor * b for a, b in zip(M[r], M[rank])]
        rank += 1
    return rank


def quasi_tree_family(seed: int, count: int, n_range: Tuple[int, int] = (40, 120)) -> List[hypgraph.FiniteMetricGraph]:
    rng = random.Random(seed)
    return [hypgraph.random_quasi_tree(rng.randint(*n_range), chords=rng.randint(0, 6), span=2, seed=rng.randrange(10 ** 6))
            for _ in range(count)]


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------

def _pipeline(seed: int, quick: bool) -> Tuple[bool, str]:
    act = actions.GraphAction.cayley(2)
    g = parse_word("abAB")
    result = actions.scl_pipeline(act, g)
    upper = cl_search(g, 1, 1)
    ok = result.lower_bound is not None and result.lower_bound >= Fraction(1, 48) and isinstance(upper, Found)
    return ok, f"lower bound {result.report.lower_bound}, N={result.report.power}, cl witness found={isinstance(upper, Found)}"


def _defect(seed: int, quick: bool) -> Tuple[bool, str]:
    rng = random.Random(seed)
    bases = ["abAB", "aab", "abb", "aBAb", "abaB"]
    samples = 2000 if quick else 10000
    worst = 0
    for text in bases:
        qm = CountingQM(Segment(ReducedWord.identity(2), parse_word(text, 2)))
        pairs = [(random_word(rng, 2, rng.randint(0, 14)), random_word(rng, 2, rng.randint(0, 14)))
                 for _ in range(samples // len(bases))]
        worst = max(worst, defect_estimate(qm, pairs))
    qm = CountingQM(Segment(ReducedWord.identity(2), parse_word("abAB")))
    words = ball(2, 3 if quick else 5)
    exhaustive = defect_estimate(qm, [(x, y) for x in words for y in words])
    return max(worst, exhaustive) <= 12, f"sampled max {worst}, exhaustive max {exhaustive} over {len(words)}^2 pairs"


def _claim(seed: int, quick: bool) -> Tuple[bool, str]:
    rng = random.Random(seed)
    worst = 0
    for _ in range(2000 if quick else 10000):
        w = random_word(rng, 2, rng.randint(1, 4))
        q = random_word(rng, 2, rng.randint(0, 8))
        path = random_word(rng, 2, rng.randint(0, 20))
        r = q * path.prefix(rng.randint(0, len(path)))
        worst = max(worst, claim_gap(w, q, r, q * path))
    max_len = 8 if quick else 12
    exhaustive = max(exhaustive_claim_gap(parse_word(text), max_len) for text in ("ab", "abAB", "aab"))
    return max(worst, exhaustive) <= 2, f"sampled max gap {worst}, exhaustive max gap {exhaustive} up to length {max_len}"


def _manning(seed: int, quick: bool) -> Tuple[bool, str]:
    family = quasi_tree_family(seed, 20 if quick else 100)
    failures = 0
    for graph in family:
        try:
            tq = hypgraph.manning_tree(graph)
            report = hypgraph.manning_report(graph, tq)
            far = int(graph.distances[0].argmax())
            image = hypgraph.quasigeodesic_image_check(graph, tq, graph.canonical_geodesic(0, far), A=10)
            failures += not (report.inequalities_hold and isinstance(image, hypgraph.Ok))
        except SclkitError as e:
            logger.warning(f"Manning construction failed on n={graph.n}: {e}")
            failures += 1
    return failures == 0, f"{len(family) - failures}/{len(family)} quotients are trees satisfying the inequalities with geodesic images in the envelope"


def _delta_envelope(seed: int, quick: bool) -> Tuple[bool, str]:
    family = quasi_tree_family(seed, 20 if quick else 100)
    rows = []
    for graph in family:
        rows.append((hypgraph.bottleneck_constant(graph), hypgraph.hyperbolicity_delta(graph)))
    frame = pd.DataFrame(rows, columns=["Delta", "delta"])
    frame["envelope"] = frame["Delta"].map(lambda d: envelope_value(DELTA_BOTTLENECK, d))
    ok = bool((frame["delta"] <= frame["envelope"]).all())
    return ok, f"max delta {frame['delta'].max()}, max Delta {frame['Delta'].max()}, c1={DELTA_BOTTLENECK['c1']}, c2={DELTA_BOTTLENECK['c2']}"


def _quasi_axis(seed: int, quick: bool) -> Tuple[bool, str]:
    rng = random.Random(seed)
    act = actions.GraphAction.cayley(3)
    bad = 0
    for _ in range(50):
        g = random_hyperbolic(rng, 3, 1, 10)
        axis = actions.quasi_axis(act, g)
        if act.distance(axis.base, act.act(g ** 2, axis.base)) != 2 * axis.D:
            bad += 1
    return bad == 0, f"{50 - bad}/50 with d(x0, g^2 x0) = 2D"


def _promotion(seed: int, quick: bool) -> Tuple[bool, str]:
    rng = random.Random(seed)
    act = actions.GraphAction.cayley(2)
    checked, bad = 0, 0
    for _ in range(3 if quick else 10):
        g = random_hyperbolic(rng, 2, 3, 6)
        try:
            family = actions.build_projection_family(act, g, 2)
            promoted = actions.promote_to_quasitree(family)
            bad += not promoted.within_envelope
        except SclkitError as e:
            logger.warning(f"promotion failed for {g}: {e}")
            bad += 1
        checked += 1
    return bad == 0, f"{checked - bad}/{checked} families promoted within the envelope"


def _classifier(seed: int, quick: bool) -> Tuple[bool, str]:
    rng = random.Random(seed)
    disagreements, unverified, zero = 0, 0, 0
    total = 100 if quick else 500
    for _ in range(total):
        d = random_decomposition(rng)
        verdict = nt_classifier.scl_verdict(d)
        classes, achiral = nt_classifier.partition_classes(d)
        by_chi = not nt_classifier.chi_vector(d).is_zero()
        by_sum = any(c.inverse_power_sum != 0 for c in classes)
        positive = isinstance(verdict, nt_classifier.Positive)
        if not (positive == by_chi == by_sum):
            disagreements += 1
        if not positive:
            zero += 1
            bundle = nt_classifier.commutator_witness(d)
            limit = len(achiral) + sum(len(c.members) - 1 for c in classes)
            if not bundle.all_verified() or bundle.B > limit:
                unverified += 1
    return disagreements == 0 and unverified == 0, f"{total} decompositions, {zero} Zero, {disagreements} disagreements, {unverified} bad witnesses"


def _dimension(seed: int, quick: bool) -> Tuple[bool, str]:
    rng = random.Random(seed)
    mismatches = 0
    for _ in range(100):
        items = [random_decomposition(rng, reps=8, max_members=2) for _ in range(rng.randint(1, 6))]
        _, rows = nt_classifier.chi_matrix(items)
        if nt_classifier.qm_dimension(items) != fraction_rank(rows):
            mismatches += 1
    ratio_mismatches, pairs = 0, 0
    while pairs < (20 if quick else 60):
        d1, d2 = random_decomposition(rng), random_decomposition(rng)
        if rng.random() < 0.5:
            d2 = d1.model_copy(update={"power": d1.power * 2})
        if nt_classifier.chi_vector(d1).is_zero() or nt_classifier.chi_vector(d2).is_zero():
            continue
        pairs += 1
        ratio = nt_classifier.characteristic_ratio(d1, d2)
        if isinstance(ratio, nt_classifier.Ratio) != nt_classifier.inseparable(d1, d2):
            ratio_mismatches += 1
    return mismatches == 0 and ratio_mismatches == 0, f"rank mismatches {mismatches}/100, ratio mismatches {ratio_mismatches}/{pairs}"


CRITERIA: List[Tuple[str, Callable[[int, bool], Tuple[bool, str]]]] = [
    ("pipeline lower bound for [a,b]", _pipeline),
    ("defect of F at most 12", _defect),
    ("counting claim gap at most 2", _claim),
    ("Manning quotient and inequalities", _manning),
    ("delta against bottleneck envelope", _delta_envelope),
    ("quasi-axis displacement law", _quasi_axis),
    ("projection axioms and promotion", _promotion),
    ("classifier agreement and witnesses", _classifier),
    ("dimension and characteristic ratio", _dimension),
]


def run_selftest(seed: int = 0, quick: bool = False) -> List[SelftestRow]:
    rows = []
    for number, (name, check) in enumerate(CRITERIA, start=1):
        logger.info(f"selftest criterion {number}: {name}")
        try:
            passed, detail = check(seed, quick)
        except SclkitError as e:
            passed, detail = False, f"{type(e).__name__}: {e}"
        rows.append(SelftestRow(criterion=number, name=name, passed=passed, detail=detail))
    return rows


def render_table(rows: Sequence[SelftestRow]) -> str:
    frame = pd.DataFrame([r.model_dump() for r in rows])
    frame["passed"] = frame["passed"].map({True: "PASS", False: "FAIL"})
    return frame.to_string(index=False)
