"""Scenario-driven command-line front end.

A scenario is a line-oriented declarative file with sections
(space / integrand / points / checks / tolerances / expect); the runner
executes the requested rule verifications and Lipschitz checks in
declaration order and emits a text table or a structured key-value report.

Exit codes: 0 all-holds (or all expectations matched), 1 violation or
precondition abort, 2 parse/usage error, 3 inconclusive outcomes present.
Structured reports contain no timing, so identical seeds reproduce them
byte for byte.
"""

import argparse
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import coderivative as cd
from . import rules as rl
from .expected import INFEASIBLE, selection_mapping
from .geometry import Polytope
from .lipschitz import (
    check_integrable_local_lipschitz, check_lipschitz_like_deterministic,
    check_quasi_lipschitz,
)
from .measure import MeasureSpace
from .normal_cones import ScalarFunctionHandle

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_VIOLATED = 1
EXIT_PARSE = 2
EXIT_INCONCLUSIVE = 3


class ScenarioError(ValueError):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line else msg)


@dataclass
class Scenario:
    name: str = "scenario"
    nodes: list = field(default_factory=list)
    integrand_class: str = ""
    integrand_data: dict = field(default_factory=dict)
    dims: tuple = (1, 1)
    xbar: np.ndarray = None
    ybar: np.ndarray = None
    ystar_count: int = 8
    rules: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    tol: float = 1e-6
    seed: int = 0
    eta: float = 0.25
    expectations: list = field(default_factory=list)

    def space(self):
        return MeasureSpace.from_triples(self.nodes)


def parse_scenario(text, name="scenario"):
    sc = Scenario(name=name)
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("space", "integrand", "points", "checks",
                               "tolerances", "expect"):
                raise ScenarioError(f"unknown section {section!r}", lineno)
            continue
        toks = line.split()
        key = toks[0]
        try:
            if section is None:
                if key == "version":
                    if int(toks[1]) != SCHEMA_VERSION:
                        raise ScenarioError(
                            f"unsupported schema version {toks[1]}", lineno)
                elif key == "name":
                    sc.name = toks[1]
                else:
                    raise ScenarioError(f"unexpected {key!r} before any "
                                        f"section", lineno)
            elif section == "space":
                if key != "node":
                    raise ScenarioError(f"unknown space entry {key!r}",
                                        lineno)
                sc.nodes.append((toks[1], float(toks[2]), toks[3]))
            elif section == "integrand":
                _parse_integrand_line(sc, key, toks, lineno)
            elif section == "points":
                if key == "xbar":
                    sc.xbar = np.array([float(v) for v in toks[1:]])
                elif key == "ybar":
                    sc.ybar = np.array([float(v) for v in toks[1:]])
                elif key == "ystar_count":
                    sc.ystar_count = int(toks[1])
                else:
                    raise ScenarioError(f"unknown points entry {key!r}",
                                        lineno)
            elif section == "checks":
                if key == "rule":
                    sc.rules.append(_rule_id(toks[1], lineno))
                elif key == "check":
                    sc.checks.append((toks[1], toks[2:]))
                else:
                    raise ScenarioError(f"unknown checks entry {key!r}",
                                        lineno)
            elif section == "tolerances":
                if key == "tol":
                    sc.tol = float(toks[1])
                elif key == "seed":
                    sc.seed = int(toks[1])
                elif key == "eta":
                    sc.eta = float(toks[1])
                else:
                    raise ScenarioError(f"unknown tolerance {key!r}", lineno)
            elif section == "expect":
                if key in ("rule", "check") and len(toks) >= 3:
                    sc.expectations.append((key, toks[1], toks[2]))
                else:
                    raise ScenarioError("expect entries are "
                                        "'rule|check <id> <verdicts>'",
                                        lineno)
        except ScenarioError:
            raise
        except (IndexError, ValueError) as exc:
            raise ScenarioError(str(exc), lineno) from exc
    if not sc.nodes:
        raise ScenarioError("scenario declares no measure nodes")
    if sc.xbar is None:
        raise ScenarioError("scenario declares no base point xbar")
    return sc


def _rule_id(token, lineno):
    for r in rl.RuleId:
        if r.value == token:
            return r
    raise ScenarioError(f"unknown rule id {token!r}", lineno)


def _parse_integrand_line(sc, key, toks, lineno):
    if key == "class":
        sc.integrand_class = toks[1]
        return
    if key == "dims":
        sc.dims = (int(toks[1]), int(toks[2]))
        return
    data = sc.integrand_data
    if key == "matrix":
        data.setdefault("matrix", {})[toks[1]] = [float(v) for v in toks[2:]]
    elif key == "interval":
        data.setdefault("interval", {})[toks[1]] = (
            float(toks[2]), float(toks[3]), float(toks[4]))
    elif key == "band":
        data["band"] = (float(toks[1]), float(toks[2]))
    elif key == "piece":
        data.setdefault("pieces", {}).setdefault(toks[1], []).append(
            (float(toks[2]), float(toks[3])))
    elif key == "quadratic":
        data.setdefault("quadratic", {})[toks[1]] = (
            float(toks[2]), float(toks[3]))
    elif key == "inner":
        data.setdefault("inner", {})[toks[1]] = float(toks[2])
    elif key == "row":
        data.setdefault("rows", {}).setdefault(toks[1], []).append(
            (float(toks[2]), float(toks[3]), float(toks[4])))
    elif key == "window":
        data["window"] = (float(toks[1]), float(toks[2]))
    else:
        raise ScenarioError(f"unknown integrand entry {key!r}", lineno)


def build_handle(sc):
    """Instantiate the integrand family declared by the scenario."""
    cls = sc.integrand_class
    data = sc.integrand_data
    node_ids = [nid for nid, _, _ in sc.nodes]
    if cls == "smooth_linear":
        n, m = sc.dims
        mats = {}
        for nid in node_ids:
            flat = data["matrix"][nid]
            mats[nid] = np.asarray(flat, dtype=float).reshape(m, n)
        return cd.SmoothSingleValued.linear(mats)
    if cls == "interval_affine":
        return cd.AffineImage.interval_affine(
            {nid: data["interval"][nid] for nid in node_ids})
    if cls == "sqrt_band":
        a, b = data.get("band", (1.0, 1.0))
        return cd.AffineImage(
            dim_in=1, dim_out=1,
            base=lambda nid: Polytope([[0.0], [1.0]]),
            amat=lambda nid, x, a=a, b=b: np.array(
                [[a * np.sqrt(abs(float(x[0]))) + b]]),
            offset=lambda nid, x: np.zeros(1),
            offset_jac=None, a_constant=False)
    if cls == "max_affine":
        pieces = {}
        for nid in node_ids:
            ps = data["pieces"][nid]
            pieces[nid] = (np.array([[p[0]] for p in ps]),
                           np.array([p[1] for p in ps]))
        return cd.MaxAffineSubgradient(
            dim_in=1, pieces=lambda nid, P=pieces: P[nid])
    if cls == "mixed_subgradient":
        handles = {}
        for nid in node_ids:
            if nid in data.get("pieces", {}):
                ps = data["pieces"][nid]
                P = (np.array([[p[0]] for p in ps]),
                     np.array([p[1] for p in ps]))
                handles[nid] = cd.MaxAffineSubgradient(
                    dim_in=1, pieces=lambda _nid, P=P: P)
            elif nid in data.get("quadratic", {}):
                a, b = data["quadratic"][nid]
                handles[nid] = cd.SmoothSingleValued(
                    dim_in=1, dim_out=1,
                    fn=lambda _n, x, a=a, b=b: np.array(
                        [a * float(x[0]) + b]),
                    jac=lambda _n, x, a=a: np.array([[a]]),
                    affine=lambda _n, a=a, b=b: (np.array([[a]]),
                                                 np.array([b])))
            else:
                raise ScenarioError(f"node {nid} has no subgradient data")
        return handles
    if cls == "constraint_linear":
        lo, hi = data.get("window", (-10.0, 10.0))
        window = Polytope([[lo], [hi]])
        inner = {nid: data["inner"][nid] for nid in node_ids}
        rows = {nid: data["rows"][nid] for nid in node_ids}

        def constraints(nid, rows=rows):
            out = []
            for (p, q, r) in rows[nid]:
                out.append((
                    lambda z, y, p=p, q=q, r=r:
                        float(p * z[0] + q * y[0] + r),
                    lambda z, y, p=p, q=q: np.array([p, q])))
            return out

        return cd.ConstraintComposite(
            dim_in=1, dim_mid=1, dim_out=1,
            inner=lambda nid, x: np.array([inner[nid] * float(x[0])]),
            inner_jac=lambda nid, x: np.array([[inner[nid]]]),
            constraints=constraints,
            value_window=window)
    raise ScenarioError(f"unknown integrand class {cls!r}")


# ---------------------------------------------------------------------------
# execution


@dataclass
class ReportRecord:
    index: int
    kind: str  # "rule" | "check"
    id: str
    verdict: str
    max_violation: float = None
    modulus: float = None
    tolerance: float = None
    failed_hypothesis: str = ""
    grid: str = ""
    wall_time: float = 0.0


@dataclass
class VerificationReport:
    scenario: str
    seed: int
    records: list = field(default_factory=list)
    expectations: list = field(default_factory=list)

    def worst_exit(self):
        matched = self.expectation_status()
        if matched is not None:
            return EXIT_OK if matched else EXIT_VIOLATED
        verdicts = [r.verdict for r in self.records]
        if any(v in ("violated", "precondition-failed") for v in verdicts):
            return EXIT_VIOLATED
        if any("inconclusive" in v or v == "not-found" for v in verdicts):
            return EXIT_INCONCLUSIVE
        return EXIT_OK

    def expectation_status(self):
        """None without expectations, else whether all of them matched."""
        if not self.expectations:
            return None
        by_id = {(r.kind, r.id): r.verdict for r in self.records}
        for kind, rid, verdicts in self.expectations:
            got = by_id.get((kind, rid))
            if got is None or got not in verdicts.split("|"):
                return False
        return True


def run_scenario(sc, rule_filter=None, tol_override=None,
                 seed_override=None):
    seed = sc.seed if seed_override is None else seed_override
    tol = sc.tol if tol_override is None else tol_override
    handle = build_handle(sc)
    space = sc.space()
    report = VerificationReport(scenario=sc.name, seed=seed,
                                expectations=list(sc.expectations))
    index = 0
    for rule in sc.rules:
        if rule_filter and rule.value not in rule_filter:
            continue
        t0 = time.perf_counter()
        rec = _run_rule(rule, sc, handle, space, tol, seed)
        rec.index = index
        rec.wall_time = time.perf_counter() - t0
        report.records.append(rec)
        index += 1
    for name, args in sc.checks:
        if rule_filter and name not in rule_filter:
            continue
        t0 = time.perf_counter()
        rec = _run_check(name, args, sc, handle, space, seed)
        rec.index = index
        rec.wall_time = time.perf_counter() - t0
        report.records.append(rec)
        index += 1
    return report


def _base_selection(sc, handle, space):
    ybar = sc.ybar if sc.ybar is not None else np.zeros(1)
    sel = selection_mapping(handle, sc.xbar, ybar, space, tol=1e-7,
                            mode="centered")
    return ybar, sel


def _run_rule(rule, sc, handle, space, tol, seed):
    ybar = sc.ybar if sc.ybar is not None else np.zeros(sc.dims[1])
    try:
        if rule in (rl.RuleId.REGULAR_POINTWISE, rl.RuleId.LIMITING_UNION,
                    rl.RuleId.LIMITING_LIPSCHITZ_VARIANT,
                    rl.RuleId.SINGLE_VALUED, rl.RuleId.EQUALITY_CASE):
            v = rl.verify_coderivative_inclusion(
                rule, handle, sc.xbar, ybar, space, tol=tol, eta=sc.eta)
        elif rule in (rl.RuleId.FIRST_ORDER_SUBDIFF,
                      rl.RuleId.FIRST_ORDER_EQUALITY):
            phi = _scalar_integrands(handle, space)
            mode = ("equality" if rule == rl.RuleId.FIRST_ORDER_EQUALITY
                    else "inclusion")
            v = rl.verify_subdifferential_leibniz(phi, sc.xbar, space,
                                                  tol=max(tol, 1e-2),
                                                  mode=mode)
        elif rule in (rl.RuleId.COMPOSITE_AMENABLE,
                      rl.RuleId.CONSTRAINT_SPECIALIZED):
            v = rl.verify_composite_rule(
                handle, sc.xbar, ybar, space, tol=tol,
                specialized=(rule == rl.RuleId.CONSTRAINT_SPECIALIZED),
                eta=sc.eta)
        elif rule in (rl.RuleId.SECOND_ORDER_COMBINED,
                      rl.RuleId.SECOND_ORDER_BASIC,
                      rl.RuleId.SECOND_ORDER_MAX):
            v = rl.verify_second_order(rule, handle, sc.xbar, ybar, space,
                                       tol=tol, eta=sc.eta)
        elif rule == rl.RuleId.EIM_LIPSCHITZ_CERTIFICATE:
            rep = rl.verify_eim_lipschitz_certificate(handle, sc.xbar, ybar,
                                                      space, eta=sc.eta)
            return ReportRecord(index=0, kind="rule", id=rule.value,
                                verdict=rep.verdict,
                                modulus=rep.max_modulus())
        elif rule == rl.RuleId.SEQUENTIAL_WITNESS:
            ybar_arr = np.asarray(ybar, dtype=float).ravel()
            sel = selection_mapping(handle, sc.xbar, ybar_arr, space,
                                    tol=1e-7)
            if sel == INFEASIBLE:
                return ReportRecord(index=0, kind="rule", id=rule.value,
                                    verdict="precondition-failed",
                                    failed_hypothesis="base off the graph")
            ystar = np.zeros(ybar_arr.size)
            res = rl.sequential_witness_search(handle, sc.xbar,
                                               np.zeros(sc.xbar.size),
                                               ystar, space, sel)
            verdict = "holds" if res["found_all_levels"] else "not-found"
            return ReportRecord(index=0, kind="rule", id=rule.value,
                                verdict=verdict)
        else:
            raise ScenarioError(f"rule {rule.value} not runnable")
    except cd.QualificationError as exc:
        return ReportRecord(index=0, kind="rule", id=rule.value,
                            verdict="precondition-failed",
                            failed_hypothesis=exc.name)
    except cd.InfeasiblePointError as exc:
        return ReportRecord(index=0, kind="rule", id=rule.value,
                            verdict="precondition-failed",
                            failed_hypothesis=str(exc))
    return ReportRecord(index=0, kind="rule", id=rule.value,
                        verdict=v.verdict, max_violation=v.max_violation,
                        tolerance=v.tolerance,
                        failed_hypothesis=v.failed_hypothesis)


def _scalar_integrands(handle, space):
    phi = {}
    for node in space.nodes:
        h = handle[node.id] if isinstance(handle, dict) else handle
        phi[node.id] = rl.scalar_of_subgradient_node(h, node.id)
    return phi


def _run_check(name, args, sc, handle, space, seed):
    ybar, sel = _base_selection(sc, handle, space)
    if name == "quasi_lipschitz":
        levels = None
        if args and args[0] == "levels":
            levels = (int(args[1]), int(args[2]))
        if sel == INFEASIBLE:
            return ReportRecord(index=0, kind="check", id=name,
                                verdict="precondition-failed",
                                failed_hypothesis="base off the graph")
        rep = check_quasi_lipschitz(handle, sc.xbar, sel, sc.eta, space,
                                    levels=levels, seed=seed)
        return ReportRecord(index=0, kind="check", id=name,
                            verdict=rep.verdict,
                            modulus=rep.max_modulus(),
                            grid=str(rep.grid.get("levels", "")))
    if name == "local_lipschitz":
        grid = [sc.xbar + s * e for e in np.eye(sc.xbar.size)
                for s in (-sc.eta / 2, -sc.eta / 4, sc.eta / 4, sc.eta / 2)]
        rep = check_integrable_local_lipschitz(handle, sc.xbar, sc.eta,
                                               grid, space)
        return ReportRecord(index=0, kind="check", id=name,
                            verdict=rep.verdict, modulus=rep.max_modulus())
    if name == "lipschitz_like":
        graph = rl.expected_graph_1d(handle, space, sc.xbar)
        if graph is None:
            graph = rl.expected_graph_secant(handle, space, sc.xbar,
                                             window=0.5)
        rep = check_lipschitz_like_deterministic(graph, sc.xbar, ybar)
        return ReportRecord(index=0, kind="check", id=name,
                            verdict=rep.verdict, modulus=rep.max_modulus())
    if name == "eim_certificate":
        rep = rl.verify_eim_lipschitz_certificate(handle, sc.xbar, ybar,
                                                  space, eta=sc.eta)
        return ReportRecord(index=0, kind="check", id=name,
                            verdict=rep.verdict, modulus=rep.max_modulus())
    raise ScenarioError(f"unknown check {name!r}")


# ---------------------------------------------------------------------------
# report formats


def _fmt(x):
    if x is None:
        return "-"
    if isinstance(x, float):
        if np.isinf(x):
            return "inf"
        return f"{x:.12e}"
    return str(x)


def emit_structured(report):
    """Key-value record lines with a stable field order and 12 significant
    digits; no timing, so reruns with the same seed are byte-identical."""
    lines = [f"eimkit-report schema={SCHEMA_VERSION} "
             f"scenario={report.scenario} seed={report.seed}"]
    for r in report.records:
        parts = [f"record={r.index}", f"kind={r.kind}", f"id={r.id}",
                 f"verdict={r.verdict}"]
        if r.max_violation is not None:
            parts.append(f"max_violation={_fmt(float(r.max_violation))}")
        if r.modulus is not None:
            parts.append(f"modulus={_fmt(float(r.modulus))}")
        if r.tolerance is not None:
            parts.append(f"tol={_fmt(float(r.tolerance))}")
        if r.failed_hypothesis:
            parts.append("hypothesis=" +
                         r.failed_hypothesis.replace(" ", "_"))
        if r.grid:
            parts.append("grid=" + str(r.grid).replace(" ", ""))
        lines.append(" ".join(parts))
    status = {EXIT_OK: "ok", EXIT_VIOLATED: "violated",
              EXIT_INCONCLUSIVE: "inconclusive"}[report.worst_exit()]
    lines.append(f"end records={len(report.records)} status={status}")
    return "\n".join(lines) + "\n"


def parse_structured(text):
    """Inverse of :func:`emit_structured` (field-wise round trip)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = dict(kv.split("=", 1) for kv in lines[0].split()[1:])
    report = VerificationReport(scenario=head["scenario"],
                                seed=int(head["seed"]))
    for ln in lines[1:-1]:
        kv = dict(p.split("=", 1) for p in ln.split())
        report.records.append(ReportRecord(
            index=int(kv["record"]), kind=kv["kind"], id=kv["id"],
            verdict=kv["verdict"],
            max_violation=(float(kv["max_violation"])
                           if "max_violation" in kv else None),
            modulus=float(kv["modulus"]) if "modulus" in kv else None,
            tolerance=float(kv["tol"]) if "tol" in kv else None,
            failed_hypothesis=kv.get("hypothesis", "").replace("_", " "),
            grid=kv.get("grid", "")))
    return report


def emit_text(report):
    rows = [("#", "kind", "id", "verdict", "max_violation", "modulus",
             "wall_s")]
    for r in report.records:
        rows.append((str(r.index), r.kind, r.id, r.verdict,
                     "-" if r.max_violation is None
                     else f"{r.max_violation:.3e}",
                     "-" if r.modulus is None else f"{r.modulus:.3e}",
                     f"{r.wall_time:.3f}"))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    out = [f"scenario {report.scenario} (seed {report.seed})"]
    for row in rows:
        out.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    matched = report.expectation_status()
    if matched is not None:
        out.append(f"expectations: {'matched' if matched else 'MISMATCH'}")
    return "\n".join(out) + "\n"


def emit_report(report, fmt="text"):
    if fmt == "structured":
        return emit_structured(report)
    return emit_text(report)


# ---------------------------------------------------------------------------
# entry point


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="eimkit",
        description="Run a verification scenario for expected-integral "
                    "set-valued maps.")
    parser.add_argument("scenario", help="path to a scenario file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--format", choices=("text", "structured"),
                        default="text")
    parser.add_argument("--rule", action="append", default=None,
                        help="filter to the given rule/check ids "
                             "(repeatable)")
    parser.add_argument("--out", default=None,
                        help="write the report to a file instead of stdout")
    args = parser.parse_args(argv)
    try:
        with open(args.scenario, "r", encoding="utf-8") as fh:
            text = fh.read()
        sc = parse_scenario(text, name=args.scenario.rsplit("/", 1)[-1]
                            .removesuffix(".scn"))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        report = run_scenario(sc, rule_filter=args.rule,
                              tol_override=args.tol,
                              seed_override=args.seed)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    out = emit_report(report, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return report.worst_exit()


if __name__ == "__main__":
    sys.exit(main())
