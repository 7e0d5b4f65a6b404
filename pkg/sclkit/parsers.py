"""
Line-oriented readers for graph and decomposition files.

Blank lines and `#` comments are skipped. Every error carries the line and
the column of the offending token.
"""

import logging
from typing import Dict, List, Optional, Tuple

from pydantic import ValidationError

from sclkit.engines.hypgraph import FiniteMetricGraph
from sclkit.errors import InconsistentClassError, MalformedInputError, SclkitError
from sclkit.schemas import CurveSpec, NTDecomposition, PureComponent

logger = logging.getLogger(__name__)


def _tokens(line: str) -> List[Tuple[str, int]]:
    """Split on whitespace, keeping 1-based start columns."""
    out = []
    col = 0
    body = line.split("#", 1)[0]
    while col < len(body):
        if body[col].isspace():
            col += 1
            continue
        start = col
        while col < len(body) and not body[col].isspace():
            col += 1
        out.append((body[start:col], start + 1))
    return out


def _int(token: Tuple[str, int], lineno: int, source: Optional[str]) -> int:
    text, col = token
    try:
        return int(text)
    except ValueError:
        raise MalformedInputError(f"expected an integer, got {text!r}", lineno, col, source) from None


def _expect(tokens, i: int, keyword: str, lineno: int, source: Optional[str]):
    if i >= len(tokens):
        last = tokens[-1]
        raise MalformedInputError(f"expected {keyword!r}", lineno, last[1] + len(last[0]), source)
    if tokens[i][0] != keyword:
        raise MalformedInputError(f"expected {keyword!r}, got {tokens[i][0]!r}", lineno, tokens[i][1], source)


def _need(tokens, i: int, what: str, lineno: int, source: Optional[str]):
    if i >= len(tokens):
        last = tokens[-1]
        raise MalformedInputError(f"missing {what}", lineno, last[1] + len(last[0]), source)
    return tokens[i]


# ---------------------------------------------------------------------------
# Graphs
# ---------------------------------------------------------------------------

def parse_graph(text: str, source: Optional[str] = None) -> Tuple[FiniteMetricGraph, List[List[int]]]:
    """
    `v <n>` once, then `e <u> <w>` edges and optional `gen <image_0> ... <image_n-1>`
    lines giving generator permutations. Returns the graph and the maps.
    """
    n: Optional[int] = None
    edges: List[Tuple[int, int]] = []
    maps: List[List[int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = _tokens(line)
        if not tokens:
            continue
        head, col = tokens[0]
        if head == "v":
            if n is not None:
                raise MalformedInputError("vertex count given twice", lineno, col, source)
            if len(tokens) != 2:
                raise MalformedInputError("expected `v <n>`", lineno, col, source)
            n = _int(tokens[1], lineno, source)
            if n < 1:
                raise MalformedInputError(f"vertex count must be positive, got {n}", lineno, tokens[1][1], source)
        elif head == "e":
            if n is None:
                raise MalformedInputError("edge before `v <n>`", lineno, col, source)
            if len(tokens) != 3:
                raise MalformedInputError("expected `e <u> <w>`", lineno, col, source)
            u, w = _int(tokens[1], lineno, source), _int(tokens[2], lineno, source)
            for value, tok in ((u, tokens[1]), (w, tokens[2])):
                if not 0 <= value < n:
                    raise MalformedInputError(f"vertex {value} out of range 0..{n - 1}", lineno, tok[1], source)
            if u == w:
                raise MalformedInputError(f"self-loop at {u}", lineno, tokens[1][1], source)
            edges.append((u, w))
        elif head == "gen":
            if n is None:
                raise MalformedInputError("generator before `v <n>`", lineno, col, source)
            images = [_int(t, lineno, source) for t in tokens[1:]]
            if len(images) != n:
                raise MalformedInputError(f"generator lists {len(images)} images for {n} vertices", lineno, col, source)
            maps.append(images)
        else:
            raise MalformedInputError(f"unknown record {head!r}", lineno, col, source)
    if n is None:
        raise MalformedInputError("missing `v <n>`", 1, 1, source)
    logger.debug(f"parsed graph: {n} vertices, {len(edges)} edges, {len(maps)} generators")
    return FiniteMetricGraph.from_edges(n, edges), maps


# ---------------------------------------------------------------------------
# Decompositions
# ---------------------------------------------------------------------------

_COMP_OPTIONS = ("rep", "tau", "k")


def _parse_comp(tokens, lineno: int, source: Optional[str]) -> PureComponent:
    ident = _need(tokens, 1, "component id", lineno, source)[0]
    kind_tok = _need(tokens, 2, "component kind", lineno, source)
    fields: Dict[str, object] = {"id": ident}
    if kind_tok[0] == "pa":
        fields["kind"] = "pseudo_anosov"
    elif kind_tok[0].startswith("twist:"):
        fields["kind"] = "dehn_twist"
        power = _int((kind_tok[0][len("twist:"):], kind_tok[1] + len("twist:")), lineno, source)
        if power == 0:
            raise MalformedInputError("twist power must be nonzero", lineno, kind_tok[1], source)
        fields["twist_power"] = power
    else:
        raise MalformedInputError(f"expected pa or twist:<n>, got {kind_tok[0]!r}", lineno, kind_tok[1], source)

    _expect(tokens, 3, "complexity", lineno, source)
    fields["support_complexity"] = _int(_need(tokens, 4, "complexity value", lineno, source), lineno, source)
    chir = _need(tokens, 5, "chiral|achiral", lineno, source)
    if chir[0] not in ("chiral", "achiral"):
        raise MalformedInputError(f"expected chiral or achiral, got {chir[0]!r}", lineno, chir[1], source)
    fields["chiral"] = chir[0] == "chiral"

    i = 6
    while i < len(tokens):
        key, col = tokens[i]
        if key == "rep":
            fields["rep_id"] = _need(tokens, i + 1, "rep id", lineno, source)[0]
            _expect(tokens, i + 2, "m", lineno, source)
            fields["m"] = _int(_need(tokens, i + 3, "m value", lineno, source), lineno, source)
            _expect(tokens, i + 4, "r", lineno, source)
            fields["r"] = _int(_need(tokens, i + 5, "r value", lineno, source), lineno, source)
            i += 6
        elif key == "tau":
            fields["tau"] = _need(tokens, i + 1, "tau value", lineno, source)[0]
            i += 2
        elif key == "k":
            fields["k"] = _int(_need(tokens, i + 1, "k value", lineno, source), lineno, source)
            i += 2
        else:
            raise MalformedInputError(f"unknown option {key!r}; expected one of {_COMP_OPTIONS}", lineno, col, source)
    try:
        return PureComponent(**fields)
    except ValidationError as e:
        raise MalformedInputError(e.errors()[0]["msg"], lineno, tokens[0][1], source) from None


def _parse_curve(tokens, lineno: int, source: Optional[str]) -> CurveSpec:
    kind = _need(tokens, 1, "sep|nonsep", lineno, source)
    if kind[0] not in ("sep", "nonsep"):
        raise MalformedInputError(f"expected sep or nonsep, got {kind[0]!r}", lineno, kind[1], source)
    _expect(tokens, 2, "class", lineno, source)
    label = _need(tokens, 3, "class label", lineno, source)[0]
    _expect(tokens, 4, "power", lineno, source)
    power = _int(_need(tokens, 5, "power value", lineno, source), lineno, source)
    if len(tokens) > 6:
        raise MalformedInputError(f"trailing token {tokens[6][0]!r}", lineno, tokens[6][1], source)
    return CurveSpec(separating=kind[0] == "sep", homology_class=label, power=power)


def _check_classes(components: List[PureComponent], rep_at: Dict[str, Tuple[int, int]], source: Optional[str]):
    """Representative links must point at chiral roots of one kind; rep_at holds each rep token's position."""
    by_id = {c.id: c for c in components}
    kinds: Dict[str, str] = {rep: by_id[rep].kind for rep in {c.rep_id for c in components} if rep in by_id}
    for c in components:
        if c.rep_id is None:
            continue
        rep = c.rep_id
        line, col = rep_at[c.id]
        if rep == c.id and c.m != c.r:
            raise InconsistentClassError(f"{c.id}^{c.m} ~ {c.id}^{c.r} is impossible for a chiral component",
                                         line, col, source)
        target = by_id.get(rep)
        if target is not None and rep != c.id:
            if not target.chiral:
                raise InconsistentClassError(f"{c.id} names the achiral component {rep} as its representative",
                                             line, col, source)
            if target.rep_id is not None and target.rep_id != target.id:
                raise InconsistentClassError(f"{c.id} names {rep}, which is not a representative itself",
                                             line, col, source)
        kind = kinds.setdefault(rep, c.kind)
        if kind != c.kind:
            raise InconsistentClassError(f"class of {rep} mixes {sorted({kind, c.kind})}", line, col, source)


def parse_decomposition(text: str, source: Optional[str] = None) -> NTDecomposition:
    power = 1
    seen_power = False
    components: List[PureComponent] = []
    curves: List[CurveSpec] = []
    comp_lines: Dict[str, int] = {}
    rep_at: Dict[str, Tuple[int, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = _tokens(line)
        if not tokens:
            continue
        head, col = tokens[0]
        if head == "N":
            if seen_power:
                raise MalformedInputError("power N given twice", lineno, col, source)
            if len(tokens) != 2:
                raise MalformedInputError("expected `N <int>`", lineno, col, source)
            power = _int(tokens[1], lineno, source)
            if power < 1:
                raise MalformedInputError(f"N must be >= 1, got {power}", lineno, tokens[1][1], source)
            seen_power = True
        elif head == "comp":
            comp = _parse_comp(tokens, lineno, source)
            if comp.id in comp_lines:
                raise MalformedInputError(
                    f"duplicate component id {comp.id} (first on line {comp_lines[comp.id]})", lineno, tokens[1][1], source)
            comp_lines[comp.id] = lineno
            if comp.rep_id is not None:
                rep_at[comp.id] = next((lineno, tokens[i + 1][1]) for i in range(6, len(tokens)) if tokens[i][0] == "rep")
            components.append(comp)
        elif head == "curve":
            curves.append(_parse_curve(tokens, lineno, source))
        else:
            raise MalformedInputError(f"unknown record {head!r}", lineno, col, source)
    _check_classes(components, rep_at, source)
    try:
        return NTDecomposition(power=power, components=components, curves=curves)
    except (ValidationError, SclkitError) as e:
        raise MalformedInputError(str(e), 1, 1, source) from None
