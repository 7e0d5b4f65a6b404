"""
Free-group word algebra.

Letters are signed generator indices: +i is the i-th generator, -i its
inverse, 1 <= i <= rank. Text form uses `a b c ...` for generators and
`A B C ...` for inverses; `1` (or an empty string) is the identity.
"""

import logging
import string
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from sclkit.errors import (
    GeneratorRangeError,
    MalformedInputError,
    NotInCommutatorSubgroupError,
    RankMismatchError,
)

logger = logging.getLogger(__name__)

Letter = int


def letter_key(x: Letter) -> Tuple[int, int]:
    """Sort key giving the generator order a < A < b < B < ..."""
    return (abs(x), 0 if x > 0 else 1)


def word_key(letters: Sequence[Letter]) -> Tuple:
    """Length-lexicographic key over letter_key."""
    return (len(letters), tuple(letter_key(x) for x in letters))


def _free_reduce(raw: Iterable[Letter]) -> List[Letter]:
    stack: List[Letter] = []
    for x in raw:
        if stack and stack[-1] == -x:
            stack.pop()
        else:
            stack.append(x)
    return stack


@dataclass(frozen=True)
class ReducedWord:
    """A freely reduced word; the letters are reduced on construction."""

    letters: Tuple[Letter, ...]
    rank: int

    def __post_init__(self):
        if self.rank < 1:
            raise GeneratorRangeError(f"rank must be positive, got {self.rank}")
        for x in self.letters:
            if x == 0 or abs(x) > self.rank:
                raise GeneratorRangeError(f"letter {x} out of range for rank {self.rank}")
        object.__setattr__(self, "letters", tuple(_free_reduce(self.letters)))

    @classmethod
    def identity(cls, rank: int) -> "ReducedWord":
        return cls((), rank)

    @classmethod
    def generator(cls, i: int, rank: int) -> "ReducedWord":
        return cls((i,), rank)

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __getitem__(self, item):
        return self.letters[item]

    def is_identity(self) -> bool:
        return not self.letters

    def _check_rank(self, other: "ReducedWord"):
        if self.rank != other.rank:
            raise RankMismatchError(f"rank {self.rank} vs rank {other.rank}")

    def __mul__(self, other: "ReducedWord") -> "ReducedWord":
        self._check_rank(other)
        return ReducedWord(self.letters + other.letters, self.rank)

    def inverse(self) -> "ReducedWord":
        return ReducedWord(tuple(-x for x in reversed(self.letters)), self.rank)

    def __invert__(self) -> "ReducedWord":
        return self.inverse()

    def __pow__(self, n: int) -> "ReducedWord":
        if n < 0:
            return self.inverse() ** (-n)
        if n == 0 or self.is_identity():
            return ReducedWord.identity(self.rank)
        u, core = self.cyclic_reduction()
        # u core^n u^-1 reduces letter-wise, no repeated squaring needed
        return ReducedWord(u.letters + core.letters * n + u.inverse().letters, self.rank)

    def conjugate_by(self, gamma: "ReducedWord") -> "ReducedWord":
        """gamma * self * gamma^-1"""
        return gamma * self * gamma.inverse()

    def abelianization(self) -> Tuple[int, ...]:
        counts = [0] * self.rank
        for x in self.letters:
            counts[abs(x) - 1] += 1 if x > 0 else -1
        return tuple(counts)

    def in_commutator_subgroup(self) -> bool:
        return not any(self.abelianization())

    def is_cyclically_reduced(self) -> bool:
        return len(self.letters) < 2 or self.letters[0] != -self.letters[-1]

    def cyclic_reduction(self) -> Tuple["ReducedWord", "ReducedWord"]:
        """
        Split self as u * core * u^-1 with core cyclically reduced.
        Returns (u, core).
        """
        i, j = 0, len(self.letters) - 1
        while i < j and self.letters[i] == -self.letters[j]:
            i += 1
            j -= 1
        u = ReducedWord(self.letters[:i], self.rank)
        core = ReducedWord(self.letters[i:j + 1], self.rank)
        return u, core

    def prefix(self, k: int) -> "ReducedWord":
        return ReducedWord(self.letters[:k], self.rank)

    def sort_key(self) -> Tuple:
        return word_key(self.letters)

    def to_text(self) -> str:
        return format_word(self)

    def __str__(self) -> str:
        return format_word(self)


@dataclass(frozen=True)
class CyclicWord:
    """Conjugacy class of a word, stored as its least cyclic rotation."""

    word: ReducedWord

    @classmethod
    def of(cls, w: ReducedWord) -> "CyclicWord":
        _, core = w.cyclic_reduction()
        letters = core.letters
        if not letters:
            return cls(core)
        best = min(
            (letters[i:] + letters[:i] for i in range(len(letters))),
            key=lambda rot: tuple(letter_key(x) for x in rot),
        )
        return cls(ReducedWord(best, w.rank))

    def __len__(self) -> int:
        return len(self.word)

    def __str__(self) -> str:
        return format_word(self.word)


def reduce(raw: Sequence[Letter], rank: int) -> ReducedWord:
    return ReducedWord(tuple(raw), rank)


def commutator(x: ReducedWord, y: ReducedWord) -> ReducedWord:
    x._check_rank(y)
    return ReducedWord(x.letters + y.letters + x.inverse().letters + y.inverse().letters, x.rank)


def are_conjugate(x: ReducedWord, y: ReducedWord) -> bool:
    x._check_rank(y)
    return CyclicWord.of(x) == CyclicWord.of(y)


def parse_word(text: str, rank: Optional[int] = None) -> ReducedWord:
    """
    Parse `abAB`-style text. The rank is inferred from the largest generator
    when not given.
    """
    letters: List[Letter] = []
    stripped = text.strip()
    if stripped in ("", "1"):
        return ReducedWord.identity(rank or 1)
    for col, ch in enumerate(text, start=1):
        if ch.isspace():
            continue
        if ch in string.ascii_lowercase:
            letters.append(ord(ch) - ord("a") + 1)
        elif ch in string.ascii_uppercase:
            letters.append(-(ord(ch) - ord("A") + 1))
        else:
            raise MalformedInputError(f"unexpected character {ch!r} in word", line=1, column=col)
    inferred = max(abs(x) for x in letters)
    if rank is None:
        rank = inferred
    elif inferred > rank:
        raise GeneratorRangeError(f"word {text!r} uses generator {inferred} beyond rank {rank}")
    return ReducedWord(tuple(letters), rank)


def format_word(w: ReducedWord, names: Optional[Sequence[str]] = None) -> str:
    if w.is_identity():
        return "1"
    if names is None:
        return "".join(
            chr(ord("a") + x - 1) if x > 0 else chr(ord("A") - x - 1) for x in w.letters
        )
    parts = []
    for x in w.letters:
        name = names[abs(x) - 1]
        parts.append(name if x > 0 else f"{name}^-1")
    return "*".join(parts)


@lru_cache(maxsize=64)
def ball(rank: int, radius: int) -> Tuple[ReducedWord, ...]:
    """All reduced words of length <= radius in length-lexicographic order."""
    alphabet = sorted([i for i in range(1, rank + 1)] + [-i for i in range(1, rank + 1)], key=letter_key)
    layer: List[Tuple[Letter, ...]] = [()]
    out: List[Tuple[Letter, ...]] = [()]
    for _ in range(radius):
        nxt = []
        for letters in layer:
            for x in alphabet:
                if letters and letters[-1] == -x:
                    continue
                nxt.append(letters + (x,))
        out.extend(nxt)
        layer = nxt
    logger.debug(f"ball(rank={rank}, radius={radius}) has {len(out)} words")
    return tuple(ReducedWord(letters, rank) for letters in out)


# ---------------------------------------------------------------------------
# Commutator length oracles
# ---------------------------------------------------------------------------

Witness = Tuple[Tuple[ReducedWord, ReducedWord], ...]


@dataclass(frozen=True)
class Found:
    c: int
    witness: Witness


@dataclass(frozen=True)
class NotFoundWithin:
    """Exhaustive search over the radius failed. Says nothing about cl > max_cl."""

    radius: int


@dataclass(frozen=True)
class Infinite:
    abelianization: Tuple[int, ...]


ClSearchResult = Union[Found, NotFoundWithin, Infinite]


def expand_witness(witness: Witness, rank: int) -> ReducedWord:
    out = ReducedWord.identity(rank)
    for x, y in witness:
        out = out * commutator(x, y)
    return out


def _single_commutator(target: ReducedWord, words: Sequence[ReducedWord]) -> Optional[Witness]:
    # [x, y] = g  forces  y x^-1 y^-1 = x^-1 g, so x^-1 g ~ x^-1
    for x in words:
        x_inv = x.inverse()
        if CyclicWord.of(x_inv * target) != CyclicWord.of(x_inv):
            continue
        for y in words:
            if commutator(x, y) == target:
                return ((x, y),)
    return None


def _search(target: ReducedWord, c: int, words: Sequence[ReducedWord], radius: int) -> Optional[Witness]:
    if len(target) > 4 * c * radius or len(target) % 2:
        return None
    if c == 1:
        return _single_commutator(target, words)
    for x in words:
        for y in words:
            k = commutator(x, y)
            if k.is_identity():
                continue
            rest = _search(k.inverse() * target, c - 1, words, radius)
            if rest is not None:
                return ((x, y),) + rest
    return None


def cl_search(g: ReducedWord, max_cl: int, radius: int) -> ClSearchResult:
    """
    Bounded search for g as a product of at most max_cl commutators [x, y]
    with |x|, |y| <= radius. Candidates are enumerated length-lexicographically,
    so the returned witness does not depend on anything but the inputs.
    """
    if max_cl < 0 or radius < 1:
        raise ValueError(f"need max_cl >= 0 and radius >= 1, got {max_cl}, {radius}")
    abel = g.abelianization()
    if any(abel):
        return Infinite(abel)
    if g.is_identity():
        return Found(0, ())
    words = ball(g.rank, radius)
    for c in range(1, max_cl + 1):
        witness = _search(g, c, words, radius)
        if witness is not None:
            if expand_witness(witness, g.rank) != g:
                raise AssertionError(f"unsound commutator witness for {g}")
            logger.info(f"cl({g}) <= {c} via {[(str(x), str(y)) for x, y in witness]}")
            return Found(c, witness)
    return NotFoundWithin(radius)


def scl_upper(g: ReducedWord, n_max: int, max_cl: int, radius: int) -> Optional[Fraction]:
    """
    min over 1 <= n <= n_max of cl(g^n)/n using the bounded search.
    Returns None when no power of g was expressed within the budgets.
    """
    if not g.in_commutator_subgroup():
        raise NotInCommutatorSubgroupError(f"{g} has abelianization {g.abelianization()}")
    best: Optional[Fraction] = None
    for n in range(1, n_max + 1):
        result = cl_search(g ** n, max_cl, radius)
        if isinstance(result, Found):
            candidate = Fraction(result.c, n)
            if best is None or candidate < best:
                best = candidate
        if best == 0:
            break
    return best
