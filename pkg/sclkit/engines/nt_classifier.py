"""
Exact calculus on symbolic Nielsen-Thurston decompositions.

A decomposition is a commuting product of pure components. Chiral
components fall into classes: component^m is conjugate to rep^r. A class is
essential when the sum of the reciprocal normalized exponents is nonzero,
and scl of the product is positive iff some chiral class is essential.
All arithmetic is over Fraction.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from sclkit.engines.counting_qm import fraction_text
from sclkit.engines.words import ReducedWord, expand_witness, format_word
from sclkit.errors import InconsistentClassError, ModeError, VerdictError
from sclkit.schemas import CurveSpec, NTDecomposition, PureComponent, VerdictReport

logger = logging.getLogger(__name__)

# scl >= n_gamma * RECIPE_CONSTANT per acting power on the quasi-tree
RECIPE_CONSTANT = Fraction(1, 48)


def _lcm(values: Sequence[int]) -> int:
    out = 1
    for v in values:
        out = out * abs(v) // math.gcd(out, abs(v))
    return out


def parse_tau(text: Optional[str]) -> Fraction:
    return Fraction(text) if text else Fraction(0)


@dataclass
class ChiralClass:
    rep_id: str
    members: List[Tuple[PureComponent, int]]  # (component, normalized exponent m')
    kind: str

    @property
    def inverse_power_sum(self) -> Fraction:
        return sum((Fraction(1, m) for _, m in self.members), Fraction(0))

    @property
    def essential(self) -> bool:
        return self.inverse_power_sum != 0

    @property
    def support_complexity(self) -> int:
        return max(c.support_complexity for c, _ in self.members)

    @property
    def tau(self) -> Fraction:
        return max(parse_tau(c.tau) for c, _ in self.members)

    @property
    def raw_ratio_sum(self) -> Fraction:
        """sum of r_i / m_i over the members"""
        return sum((Fraction(c.exponents[1], c.exponents[0]) for c, _ in self.members), Fraction(0))

    def describe(self, power: int) -> Dict[str, object]:
        return {
            "rep": self.rep_id,
            "kind": self.kind,
            "members": [[c.id, m] for c, m in self.members],
            "inverse_power_sum": fraction_text(self.inverse_power_sum),
            "essential": self.essential,
            "n_gamma": fraction_text(self.raw_ratio_sum / power),
        }


def partition_classes(d: NTDecomposition) -> Tuple[List[ChiralClass], List[PureComponent]]:
    """
    Group chiral components by representative and set aside the achiral
    ones. Member exponents are normalized so that every member power is
    conjugate to the same power rep^L, L = lcm |r_i|.
    """
    by_id = {c.id: c for c in d.components}
    achiral = [c for c in d.components if not c.chiral]
    groups: Dict[str, List[PureComponent]] = {}
    for c in d.components:
        if not c.chiral:
            continue
        rep = c.representative
        if rep in by_id and rep != c.id:
            target = by_id[rep]
            if not target.chiral:
                raise InconsistentClassError(f"{c.id} names the achiral component {rep} as its representative")
            if target.rep_id is not None and target.rep_id != target.id:
                raise InconsistentClassError(f"{c.id} names {rep}, which is not a representative itself")
        if c.rep_id == c.id and c.m != c.r:
            # a chiral element is conjugate to its own power only with equal exponents
            raise InconsistentClassError(f"{c.id}^{c.m} ~ {c.id}^{c.r} is impossible for a chiral component")
        groups.setdefault(rep, []).append(c)

    classes = []
    for rep in sorted(groups):
        comps = groups[rep]
        kinds = {c.kind for c in comps}
        if rep in by_id:
            kinds.add(by_id[rep].kind)
        if len(kinds) > 1:
            raise InconsistentClassError(f"class of {rep} mixes {sorted(kinds)}")
        L = _lcm([c.exponents[1] for c in comps])
        members = [(c, c.exponents[0] * L // c.exponents[1]) for c in comps]
        classes.append(ChiralClass(rep, members, kinds.pop()))
    logger.debug(f"{len(classes)} chiral classes, {len(achiral)} achiral components")
    return classes, achiral


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Positive:
    witness: ChiralClass
    classes: Tuple[ChiralClass, ...]


@dataclass(frozen=True)
class Zero:
    achiral: Tuple[PureComponent, ...]
    inessential: Tuple[ChiralClass, ...]


Verdict = Union[Positive, Zero]


def scl_verdict(d: NTDecomposition) -> Verdict:
    """
    Positive with the essential class of highest support complexity (then
    largest declared tau, then least rep id), otherwise Zero with the
    achiral components and inessential classes as certificate.
    """
    classes, achiral = partition_classes(d)
    essential = [c for c in classes if c.essential]
    if essential:
        witness = min(essential, key=lambda c: (-c.support_complexity, -c.tau, c.rep_id))
        return Positive(witness, tuple(classes))
    return Zero(tuple(achiral), tuple(classes))


@dataclass(frozen=True)
class ChiVector:
    entries: Dict[str, Fraction]

    def get(self, rep: str) -> Fraction:
        return self.entries.get(rep, Fraction(0))

    def support(self) -> List[str]:
        return sorted(k for k, v in self.entries.items() if v != 0)

    def is_zero(self) -> bool:
        return not self.support()

    def scale(self, q: Fraction) -> "ChiVector":
        return ChiVector({k: v * q for k, v in self.entries.items()})

    def __add__(self, other: "ChiVector") -> "ChiVector":
        keys = set(self.entries) | set(other.entries)
        return ChiVector({k: self.get(k) + other.get(k) for k in keys})

    def as_strings(self) -> Dict[str, str]:
        return {k: fraction_text(v) for k, v in sorted(self.entries.items())}


def chi_vector(d: NTDecomposition) -> ChiVector:
    """n_gamma = (1/N) sum r_i / m_i over the chiral class of gamma."""
    classes, _ = partition_classes(d)
    return ChiVector({c.rep_id: c.raw_ratio_sum / d.power for c in classes})


Chain = Sequence[Tuple[Fraction, NTDecomposition]]


def _chain_vector(item: Union[NTDecomposition, Chain]) -> ChiVector:
    if isinstance(item, NTDecomposition):
        return chi_vector(item)
    out = ChiVector({})
    for coeff, d in item:
        out = out + chi_vector(d).scale(Fraction(coeff))
    return out


def _bareiss_rank(matrix: List[List[int]]) -> int:
    """Rank of an integer matrix by fraction-free elimination."""
    M = [row[:] for row in matrix]
    rows = len(M)
    cols = len(M[0]) if M else 0
    rank, prev = 0, 1
    for col in range(cols):
        pivot = next((r for r in range(rank, rows) if M[r][col] != 0), None)
        if pivot is None:
            continue
        M[rank], M[pivot] = M[pivot], M[rank]
        for r in range(rank + 1, rows):
            for c in range(col + 1, cols):
                M[r][c] = (M[r][c] * M[rank][col] - M[r][col] * M[rank][c]) // prev
            M[r][col] = 0
        prev = M[rank][col]
        rank += 1
        if rank == rows:
            break
    return rank


def chi_matrix(items: Sequence[Union[NTDecomposition, Chain]]) -> Tuple[List[str], List[List[Fraction]]]:
    vectors = [_chain_vector(item) for item in items]
    reps = sorted({k for v in vectors for k in v.entries})
    return reps, [[v.get(k) for k in reps] for v in vectors]


def qm_dimension(items: Sequence[Union[NTDecomposition, Chain]]) -> int:
    """Rank over Q of the chi-vectors of decompositions or rational chains of them."""
    if not items:
        raise ValueError("qm_dimension needs at least one decomposition")
    _, rows = chi_matrix(items)
    integral = []
    for row in rows:
        scale = _lcm([x.denominator for x in row]) if row else 1
        integral.append([int(x * scale) for x in row])
    return _bareiss_rank(integral)


def inseparable(d1: NTDecomposition, d2: NTDecomposition) -> bool:
    """Two elements are inseparable when their chi-vectors are proportional."""
    return qm_dimension([d1, d2]) <= 1


@dataclass(frozen=True)
class Ratio:
    value: Fraction


@dataclass(frozen=True)
class Undefined:
    unshared: Tuple[str, ...]


@dataclass(frozen=True)
class Inconsistent:
    pair: Tuple[str, str]
    ratios: Tuple[Fraction, Fraction]


def characteristic_ratio(d1: NTDecomposition, d2: NTDecomposition) -> Union[Ratio, Undefined, Inconsistent]:
    """n_gamma(d1) / n_gamma(d2) over the essential classes, when they all agree."""
    v1, v2 = chi_vector(d1), chi_vector(d2)
    if v1.is_zero() or v2.is_zero():
        raise VerdictError("characteristic ratio needs two Positive decompositions")
    s1, s2 = set(v1.support()), set(v2.support())
    if s1 != s2:
        return Undefined(tuple(sorted(s1 ^ s2)))
    reps = sorted(s1)
    first = v1.get(reps[0]) / v2.get(reps[0])
    for rep in reps[1:]:
        ratio = v1.get(rep) / v2.get(rep)
        if ratio != first:
            return Inconsistent((reps[0], rep), (first, ratio))
    return Ratio(first)


def homogeneous_class_value(cls: ChiralClass, A: Fraction) -> Fraction:
    """Value of a homogeneous qm on the class product when H(g_i) = A r_i / m_i."""
    return A * cls.raw_ratio_sum


# ---------------------------------------------------------------------------
# Commutator witnesses
# ---------------------------------------------------------------------------

@dataclass
class CommutatorWitness:
    """
    Target written as a product of commutators in a free group on abstract
    letters. With a relator, target^-1 * expansion must reduce to the
    conjugate of the relator by `relator_conjugator`; without one it must
    reduce to the identity.
    """

    case: str
    components: Tuple[str, ...]
    names: Tuple[str, ...]
    target: ReducedWord
    pairs: Tuple[Tuple[ReducedWord, ReducedWord], ...]
    expression: str
    power: int
    substitution: Dict[str, ReducedWord] = field(default_factory=dict)
    relator: Optional[ReducedWord] = None
    relator_conjugator: Optional[ReducedWord] = None

    @property
    def length(self) -> int:
        return len(self.pairs)

    def residue(self) -> ReducedWord:
        return self.target.inverse() * expand_witness(self.pairs, self.target.rank)

    def verify(self) -> bool:
        residue = self.residue()
        if self.relator is None:
            return residue.is_identity()
        return residue == self.relator.conjugate_by(self.relator_conjugator)

    def as_dict(self) -> Dict[str, object]:
        return {
            "case": self.case,
            "components": list(self.components),
            "power": self.power,
            "expression": self.expression,
            "target": format_word(self.target, self.names),
            "substitution": {k: format_word(v, self.names) for k, v in self.substitution.items()},
            "verified": self.verify(),
        }


def _achiral_witness(c: PureComponent) -> CommutatorWitness:
    # letters: g = the component, h = the conjugator with h^-1 g^-k h = g^k
    names = (c.id, f"h_{c.id}")
    g, h = ReducedWord.generator(1, 2), ReducedWord.generator(2, 2)
    k = c.k
    gk = g ** k
    return CommutatorWitness(
        case="achiral",
        components=(c.id,),
        names=names,
        target=g ** (2 * k),
        pairs=((gk, h.inverse()),),
        expression=f"[{c.id}^{k}, h_{c.id}^-1]",
        power=2 * k,
        relator=h.inverse() * gk.inverse() * h * gk.inverse(),
        relator_conjugator=gk.inverse(),
    )


def _inessential_witness(cls: ChiralClass) -> CommutatorWitness:
    """
    With h_1 = c_1^{m'_1}, c_i^{m'_i} = h_i and h_i = gamma_i h_{i-1} gamma_i^-1,
    the power P = lcm |m'_i| of the class product is
    [h_1^{s_1}, gamma_2] ... [h_{p-1}^{s_{p-1}}, gamma_p], s_i partial sums of n_i = P / m'_i.
    """
    p = len(cls.members)
    P = _lcm([m for _, m in cls.members])
    n = [P // m for _, m in cls.members]
    names = ("h1",) + tuple(f"gamma{i}" for i in range(2, p + 1))
    h1 = ReducedWord.generator(1, p)
    gammas = [None, None] + [ReducedWord.generator(i, p) for i in range(2, p + 1)]

    hs = [None, h1]
    for i in range(2, p + 1):
        hs.append(hs[i - 1].conjugate_by(gammas[i]))
    target = ReducedWord.identity(p)
    for i in range(1, p + 1):
        target = target * hs[i] ** n[i - 1]

    pairs, parts, s = [], [], 0
    for i in range(1, p):
        s += n[i - 1]
        pairs.append((hs[i] ** s, gammas[i + 1]))
        parts.append(f"[h{i}^{s}, gamma{i + 1}]")
    return CommutatorWitness(
        case="inessential_class",
        components=tuple(c.id for c, _ in cls.members),
        names=names,
        target=target,
        pairs=tuple(pairs),
        expression="".join(parts) or "1",
        power=P,
        substitution={f"h{i}": hs[i] for i in range(1, p + 1)},
    )


@dataclass
class WitnessBundle:
    witnesses: List[CommutatorWitness]
    N: int
    B: int

    def all_verified(self) -> bool:
        return all(w.verify() for w in self.witnesses)


def commutator_witness(d: NTDecomposition) -> WitnessBundle:
    """
    Commutator expressions for every achiral component and every
    inessential class. N is the lcm of the powers they need and
    B = #achiral + sum (p_i - 1).
    """
    verdict = scl_verdict(d)
    if isinstance(verdict, Positive):
        raise VerdictError(f"class {verdict.witness.rep_id} is essential; no commutator witness exists")
    witnesses = [_achiral_witness(c) for c in verdict.achiral]
    witnesses += [_inessential_witness(cls) for cls in verdict.inessential]
    for w in witnesses:
        if not w.verify():
            raise VerdictError(f"witness for {w.components} fails free reduction")
    N = _lcm([w.power for w in witnesses]) if witnesses else 1
    B = sum(w.length for w in witnesses)
    logger.info(f"{len(witnesses)} commutator witnesses: g^{N} is a product of {B} commutators")
    return WitnessBundle(witnesses, N, B)


# ---------------------------------------------------------------------------
# Multitwists and exponential growth
# ---------------------------------------------------------------------------

def multitwist_verdict(curves: Sequence[CurveSpec]) -> bool:
    """Positive iff some curve separates or some homology class has a nonzero power sum."""
    if not curves:
        raise VerdictError("multitwist verdict needs at least one curve")
    if any(c.separating for c in curves):
        return True
    sums: Dict[str, int] = {}
    for c in curves:
        sums[c.homology_class] = sums.get(c.homology_class, 0) + c.power
    return any(v != 0 for v in sums.values())


def _forced_singletons(d: NTDecomposition) -> NTDecomposition:
    comps = [c.model_copy(update={"chiral": True, "rep_id": None, "m": None, "r": None}) for c in d.components]
    return NTDecomposition(power=d.power, components=comps, curves=d.curves)


def exponential_growth_verdict(d: NTDecomposition, level_subgroup_mode: bool) -> bool:
    """
    In a level subgroup every component is chiral and its own class, so any
    pseudo-Anosov component forces scl > 0. Pure multitwists go to
    multitwist_verdict, which needs their curves.
    """
    if not level_subgroup_mode:
        raise ModeError("exponential growth verdict needs level-subgroup mode; use scl_verdict")
    if any(c.kind == "pseudo_anosov" for c in d.components):
        return isinstance(scl_verdict(_forced_singletons(d)), Positive)
    if not d.components and not d.curves:
        return False
    return multitwist_verdict(d.curves)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def lower_bound_recipe(d: NTDecomposition, verdict: Positive) -> Dict[str, str]:
    n_gamma = chi_vector(d).get(verdict.witness.rep_id)
    return {
        "witness_class": verdict.witness.rep_id,
        "n_gamma": fraction_text(n_gamma),
        "constant": fraction_text(RECIPE_CONSTANT),
        "acting_power": str(d.power),
    }


def verdict_report(d: NTDecomposition, with_witness: bool = False) -> VerdictReport:
    verdict = scl_verdict(d)
    classes, achiral = partition_classes(d)
    report = VerdictReport(
        verdict="Positive" if isinstance(verdict, Positive) else "Zero",
        chi_vector=chi_vector(d).as_strings(),
        classes=[c.describe(d.power) for c in classes],
        achiral=[c.id for c in achiral],
    )
    if isinstance(verdict, Positive):
        report.witness_class = verdict.witness.rep_id
        report.recipe = lower_bound_recipe(d, verdict)
    elif with_witness:
        bundle = commutator_witness(d)
        report.witnesses = [w.as_dict() for w in bundle.witnesses]
        report.bounds = (bundle.N, bundle.B)
    return report
