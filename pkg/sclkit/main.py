import argparse
import hashlib
import json
import logging
import math
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from sclkit.config import settings
from sclkit.engines import actions, counting_qm, hypgraph, nt_classifier
from sclkit.engines.envelopes import MANNING_IMAGE, PROMOTION_BOTTLENECK, WWPD_XI
from sclkit.engines.words import ReducedWord, ball, format_word, parse_word
from sclkit.errors import (
    GeneratorRangeError,
    InconsistentClassError,
    InvariantViolationError,
    MalformedInputError,
    RankMismatchError,
    SclkitError,
)
from sclkit.parsers import parse_decomposition, parse_graph
from sclkit.schemas import RunReport

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_MALFORMED = 2
EXIT_POSITIVE = 10

_INPUT_ERRORS = (MalformedInputError, GeneratorRangeError, RankMismatchError, InconsistentClassError, ValueError)


class RunOutcome:
    """What a subcommand hands back to main: report fields plus an exit code."""

    def __init__(self, results: Dict[str, Any], constants: Optional[Dict[str, Any]] = None,
                 verdicts: Optional[Dict[str, Any]] = None, exit_code: int = EXIT_OK):
        self.results = results
        self.constants = constants or {}
        self.verdicts = verdicts or {}
        self.exit_code = exit_code


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise MalformedInputError(f"cannot read {path}: {e.strerror}", 0, 0, path) from None


def _word(text: str, rank: Optional[int], flag: str) -> ReducedWord:
    try:
        return parse_word(text, rank)
    except MalformedInputError as e:
        raise MalformedInputError(f"bad {flag} word {text!r}: {e}", 1, e.column, flag) from None


# ---------------------------------------------------------------------------
# qm-eval
# ---------------------------------------------------------------------------

def cmd_qm_eval(args) -> RunOutcome:
    rank = args.rank or max(_word(args.w, None, "--w").rank, _word(args.g, None, "--g").rank)
    w = _word(args.w, rank, "--w")
    g = _word(args.g, rank, "--g")
    qm = counting_qm.CountingQM(counting_qm.Segment(ReducedWord.identity(w.rank), w))
    words = ball(w.rank, args.defect_radius)
    report = counting_qm.qm_report(qm, g, args.n_max, [(x, y) for x in words for y in words])
    results = report.model_dump()
    results["bavard_nonhomogeneous"] = counting_qm.fraction_text(
        _as_fraction(counting_qm.bavard_bound_nonhomogeneous(Fraction(report.homogenized[0]), report.defect_bound)))
    return RunOutcome(results, constants={"M": report.threshold_m, "defect_bound": report.defect_bound,
                                          "n_max": args.n_max})


def _as_fraction(value) -> Fraction:
    return value if isinstance(value, Fraction) else Fraction(0)


# ---------------------------------------------------------------------------
# graph
# ---------------------------------------------------------------------------

def _path_arg(text: str) -> List[int]:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise MalformedInputError(f"--path must list integers, got {text!r}", 1, 1, "--path") from None


def cmd_graph(args) -> RunOutcome:
    graph, _ = parse_graph(_read(args.input), args.input)
    results: Dict[str, Any] = {"vertices": graph.n, "edges": len(graph.edges)}
    constants: Dict[str, Any] = {}
    if args.op == "delta":
        estimate = hypgraph.four_point_delta(graph, args.samples, args.seed)
        results.update(delta=math.ceil(estimate.value), delta_exact=counting_qm.fraction_text(estimate.value),
                       exact=estimate.exact)
    elif args.op == "bottleneck":
        found = hypgraph.bottleneck_search(graph)
        results.update(bottleneck=found.delta, witness=list(found.witness) if found.witness else None)
    elif args.op == "manning":
        tq = hypgraph.manning_tree(graph, args.delta_cap, args.base)
        report = hypgraph.manning_report(graph, tq)
        results.update(report.model_dump())
        results["alpha"] = list(tq.alpha)
        constants.update(Delta=tq.delta, R=tq.R)
        if not report.inequalities_hold:
            raise InvariantViolationError(f"Manning inequalities fail at {report.worst_pair}")
    elif args.op == "qcheck":
        if not args.path:
            raise MalformedInputError("qcheck needs --path", 1, 1, "--path")
        tq = hypgraph.manning_tree(graph, args.delta_cap, args.base)
        outcome = hypgraph.quasigeodesic_image_check(graph, tq, _path_arg(args.path), A=args.A)
        results["outcome"] = type(outcome).__name__
        results.update(vars(outcome))
        constants.update(Delta=tq.delta, R=tq.R, envelope=dict(MANNING_IMAGE))
    return RunOutcome(results, constants)


# ---------------------------------------------------------------------------
# action
# ---------------------------------------------------------------------------

def _action(backend: str) -> actions.GraphAction:
    if backend.startswith("cayley:"):
        try:
            rank = int(backend[len("cayley:"):])
        except ValueError:
            raise MalformedInputError(f"bad backend {backend!r}", 1, len("cayley:") + 1, "--backend") from None
        if rank < 1:
            raise MalformedInputError(f"rank must be positive in {backend!r}", 1, len("cayley:") + 1, "--backend")
        return actions.GraphAction.cayley(rank)
    graph, maps = parse_graph(_read(backend), backend)
    if not maps:
        raise MalformedInputError("explicit backend needs `gen` lines", 1, 1, backend)
    return actions.GraphAction.explicit(graph, maps)


def _isometry_dict(kind) -> Dict[str, Any]:
    if isinstance(kind, actions.Hyperbolic):
        return {"type": "hyperbolic", "tau": counting_qm.fraction_text(kind.tau)}
    if isinstance(kind, actions.Elliptic):
        return {"type": "elliptic", "orbit_diameter": kind.orbit_diameter}
    return {"type": "inconclusive", "displacements": list(kind.displacements)}


def _axis_dict(axis: actions.QuasiAxis) -> Dict[str, Any]:
    return {"owner": format_word(axis.owner), "base": format_word(axis.base), "period": format_word(axis.core),
            "D": axis.D, "power": axis.power}


def cmd_action(args) -> RunOutcome:
    act = _action(args.backend)
    g = _word(args.g, act.rank, "--g")
    radius = args.radius if args.radius is not None else settings.WWPD_RADIUS
    results: Dict[str, Any] = {"g": format_word(g)}
    constants: Dict[str, Any] = {"delta": act.delta}
    verdicts: Dict[str, Any] = {}

    if args.op == "classify":
        results.update(_isometry_dict(actions.classify_isometry(act, g, args.n_max_orbit)))
    elif args.op == "axis":
        results.update(_axis_dict(actions.quasi_axis(act, g, args.power)))
    elif args.op == "project":
        if not args.h:
            raise MalformedInputError("project needs --h", 1, 1, "--h")
        h = _word(args.h, act.rank, "--h")
        a1, a2 = actions.quasi_axis(act, g), actions.quasi_axis(act, h)
        cmp = actions.compare_axes(act, a1, a2, args.window)
        results.update(diameters=list(cmp.diameters), threshold=cmp.threshold)
        verdicts["axes"] = "Parallel" if cmp.parallel else "Bounded"
    elif args.op == "wwpd":
        found = actions.wwpd_xi(act, g, radius, args.window)
        results.update(found.as_dict())
        constants.update(A=WWPD_XI["A"], B=WWPD_XI["B"], radius=radius)
        verdicts["within_envelope"] = not found.violators
    elif args.op == "promote":
        family = actions.build_projection_family(act, g, radius, args.slack, args.window)
        promoted = actions.promote_to_quasitree(family, args.K)
        results.update(members=family.labels, eta=family.eta, xi=family.xi, vertices=promoted.graph.n,
                       edges=len(promoted.graph.edges), bottleneck=promoted.bottleneck)
        constants.update(K=promoted.K, eta=family.eta, envelope=promoted.envelope, **PROMOTION_BOTTLENECK)
        verdicts["within_envelope"] = promoted.within_envelope
        if args.h:
            h = _word(args.h, act.rank, "--h")
            qm = counting_qm.CountingQM(actions.quasi_axis(act, g).segment)
            check = actions.check_promoted_element(act, g, family, promoted, qm, h, args.n_max)
            results["transfer"] = check.model_dump()
            constants.update(displacement_bound=check.displacement_bound)
            verdicts["transfer"] = check.holds
    elif args.op == "pipeline":
        budgets = actions.PipelineBudgets(n_max=args.n_max, conj_radius=radius, K=args.K, slack=args.slack)
        outcome = actions.scl_pipeline(act, g, budgets)
        results.update(outcome.report.model_dump())
        constants.update(N=outcome.report.power, R=outcome.report.R, xi=outcome.report.xi,
                         promoted_Delta=outcome.report.promoted_delta, defect_bound=settings.QM_DEFECT_BOUND)
        verdicts["pipeline"] = outcome.report.verdict
        if args.cross_check and g.in_commutator_subgroup():
            upper = _scl_upper(g)
            results["scl_upper"] = counting_qm.fraction_text(upper) if upper is not None else None
            if upper is not None and outcome.lower_bound is not None and outcome.lower_bound > upper:
                raise InvariantViolationError(f"lower bound {outcome.lower_bound} exceeds scl upper bound {upper}")
    return RunOutcome(results, constants, verdicts)


def _scl_upper(g: ReducedWord) -> Optional[Fraction]:
    from sclkit.engines.words import scl_upper

    return scl_upper(g, n_max=1, max_cl=settings.CL_MAX, radius=min(settings.CL_RADIUS, max(1, len(g) // 2)))


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------

def cmd_classify(args) -> RunOutcome:
    d = parse_decomposition(_read(args.input), args.input)
    verdicts: Dict[str, Any] = {}
    if args.level_mode:
        positive = nt_classifier.exponential_growth_verdict(d, True)
        verdicts["exponential_growth"] = "Positive" if positive else "Zero"
        results: Dict[str, Any] = {"components": len(d.components), "curves": len(d.curves)}
        return RunOutcome(results, {"N": d.power}, verdicts, EXIT_POSITIVE if positive else EXIT_OK)
    if not d.components and d.curves:
        positive = nt_classifier.multitwist_verdict(d.curves)
        verdicts["multitwist"] = "Positive" if positive else "Zero"
        return RunOutcome({"curves": len(d.curves)}, {"N": d.power}, verdicts,
                          EXIT_POSITIVE if positive else EXIT_OK)
    report = nt_classifier.verdict_report(d, with_witness=args.witness)
    verdicts["scl"] = report.verdict
    constants: Dict[str, Any] = {"N": d.power}
    if report.bounds:
        constants.update(witness_N=report.bounds[0], B=report.bounds[1])
    return RunOutcome(report.model_dump(), constants, verdicts,
                      EXIT_POSITIVE if report.verdict == "Positive" else EXIT_OK)


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------

def cmd_selftest(args) -> RunOutcome:
    from sclkit.selftest import render_table, run_selftest

    rows = run_selftest(seed=args.seed, quick=args.quick)
    print(render_table(rows), file=sys.stderr)
    passed = all(r.passed for r in rows)
    return RunOutcome({"rows": [r.model_dump() for r in rows]},
                      verdicts={"selftest": "pass" if passed else "fail"},
                      exit_code=EXIT_OK if passed else EXIT_INTERNAL)


# ---------------------------------------------------------------------------
# wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sclkit", description="Stable commutator length lower bounds and checks")
    parser.add_argument("--json", action="store_true", help="emit the run report as JSON")
    parser.add_argument("--seed", type=int, default=settings.SEED)
    parser.add_argument("--timing", action="store_true", help="include wall time in the report")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    qm = sub.add_parser("qm-eval", help="evaluate a counting quasi-morphism")
    qm.add_argument("--w", required=True)
    qm.add_argument("--g", required=True)
    qm.add_argument("--rank", type=int, default=None)
    qm.add_argument("--n-max", type=int, default=settings.QM_N_MAX)
    qm.add_argument("--defect-radius", type=int, default=2)
    qm.set_defaults(handler=cmd_qm_eval)

    gr = sub.add_parser("graph", help="finite graph geometry")
    gr.add_argument("op", choices=["delta", "bottleneck", "manning", "qcheck"])
    gr.add_argument("--in", dest="input", required=True)
    gr.add_argument("--base", type=int, default=0)
    gr.add_argument("--delta-cap", type=int, default=None)
    gr.add_argument("--samples", type=int, default=None)
    gr.add_argument("--path", default=None)
    gr.add_argument("--A", type=int, default=None)
    gr.set_defaults(handler=cmd_graph)

    ac = sub.add_parser("action", help="free group actions, axes and the scl pipeline")
    ac.add_argument("op", choices=["classify", "axis", "project", "wwpd", "promote", "pipeline"])
    ac.add_argument("--backend", required=True, help="cayley:<rank> or a .graph file with gen lines")
    ac.add_argument("--g", required=True)
    ac.add_argument("--h", default=None)
    ac.add_argument("--radius", type=int, default=None)
    ac.add_argument("--K", type=int, default=settings.PROMOTION_K)
    ac.add_argument("--slack", type=int, default=settings.PROJECTION_SLACK)
    ac.add_argument("--window", type=int, default=None)
    ac.add_argument("--power", type=int, default=1)
    ac.add_argument("--n-max", type=int, default=settings.QM_N_MAX)
    ac.add_argument("--n-max-orbit", type=int, default=8)
    ac.add_argument("--cross-check", action="store_true", help="compare with a bounded scl upper bound")
    ac.set_defaults(handler=cmd_action)

    cl = sub.add_parser("classify", help="decide scl positivity of a symbolic decomposition")
    cl.add_argument("--in", dest="input", required=True)
    cl.add_argument("--level-mode", action="store_true")
    cl.add_argument("--witness", action="store_true")
    cl.set_defaults(handler=cmd_classify)

    st = sub.add_parser("selftest", help="run the acceptance suite")
    st.add_argument("--quick", action="store_true")
    st.set_defaults(handler=cmd_selftest)
    return parser


def inputs_digest(args) -> str:
    """sha256 over the subcommand arguments and the contents of any input file."""
    fields = {k: v for k, v in sorted(vars(args).items())
              if k not in ("handler", "json", "timing", "log_level")}
    h = hashlib.sha256(json.dumps(fields, sort_keys=True, default=str).encode())
    for key in ("input", "backend"):
        path = fields.get(key)
        if path and not str(path).startswith("cayley:") and Path(path).is_file():
            h.update(Path(path).read_bytes())
    return h.hexdigest()


def render_text(report: RunReport) -> str:
    lines = [f"subcommand: {report.subcommand}", f"inputs_digest: {report.inputs_digest}", f"seed: {report.seed}"]
    for section in ("results", "constants", "verdicts"):
        values = getattr(report, section)
        if values:
            lines.append(f"{section}:")
            lines.extend(f"  {k}: {json.dumps(v, default=str)}" for k, v in values.items())
    if report.timing_ms is not None:
        lines.append(f"timing_ms: {report.timing_ms}")
    return "\n".join(lines)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format=LOG_FORMAT, stream=sys.stderr)
    started = time.perf_counter()
    try:
        outcome = args.handler(args)
    except _INPUT_ERRORS as e:
        logger.error(f"malformed input: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MALFORMED
    except SclkitError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL

    report = RunReport(
        subcommand=args.subcommand if not hasattr(args, "op") else f"{args.subcommand} {args.op}",
        inputs_digest=inputs_digest(args),
        seed=args.seed,
        results=outcome.results,
        constants=outcome.constants,
        verdicts=outcome.verdicts,
        timing_ms=int((time.perf_counter() - started) * 1000) if args.timing else None,
    )
    if args.json:
        print(report.model_dump_json(indent=2))
    else:
        print(render_text(report))
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
