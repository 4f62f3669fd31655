"""End-to-end verification of the differentiation rules for expected
integrals: compute both sides of each rule on a concrete instance, test
inclusion or equality within tolerance, and emit self-contained records.

A failed hypothesis is a distinct report state (``precondition-failed``
with the hypothesis named); the verifier never reports a rule violated
when its hypotheses were not established.
"""

import itertools
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .coderivative import (
    LIMITING, REGULAR, AffineImage, ConstraintComposite, MaxAffineSubgradient,
    QualificationError, SmoothSingleValued, coderivative_polyhedral_graph,
    check_adjoint_triviality, check_slater, slice_exact, value_polytope,
)
from .expected import (
    INFEASIBLE, SelectionFunction, enumerate_selection_faces, handle_for,
    node_value, polytope_faces, selection_mapping,
)
from .geometry import (
    Polyhedron, PolyhedralUnion, Polytope, halfspaces_of_vrep,
    hausdorff_distance, minkowski_vrep, polyhedron_generators,
    weighted_minkowski,
)
from .lipschitz import (
    HOLDS, check_integrable_local_lipschitz, check_quasi_lipschitz,
    check_lipschitz_like_deterministic, LipschitzReport,
)
from .measure import NodeScalarField
from .normal_cones import (
    ScalarFunctionHandle, max_subdifferential, regular_subdifferential,
    unit_direction_grid,
)
from .pwgraphs import IntervalPWA, MonotonePWA


class RuleId(Enum):
    REGULAR_POINTWISE = "RegularPointwise"
    LIMITING_UNION = "LimitingUnion"
    LIMITING_LIPSCHITZ_VARIANT = "LimitingLipschitzVariant"
    SINGLE_VALUED = "SingleValued"
    EQUALITY_CASE = "EqualityCase"
    FIRST_ORDER_SUBDIFF = "FirstOrderSubdiff"
    FIRST_ORDER_EQUALITY = "FirstOrderEquality"
    COMPOSITE_AMENABLE = "CompositeAmenable"
    CONSTRAINT_SPECIALIZED = "ConstraintSpecialized"
    EIM_LIPSCHITZ_CERTIFICATE = "EimLipschitzCertificate"
    SECOND_ORDER_COMBINED = "SecondOrderCombined"
    SECOND_ORDER_BASIC = "SecondOrderBasic"
    SECOND_ORDER_MAX = "SecondOrderMax"
    SEQUENTIAL_WITNESS = "SequentialWitness"


HOLDS_V = "holds"
VIOLATED_V = "violated"
PRECONDITION_FAILED = "precondition-failed"
INCONCLUSIVE_V = "inconclusive"

DEFAULT_TOL_EXACT = 1e-6
DEFAULT_TOL_ORACLE = 1e-2


@dataclass
class InclusionVerdict:
    rule: RuleId
    verdict: str
    max_violation: float = 0.0
    tolerance: float = DEFAULT_TOL_EXACT
    lhs_samples: list = field(default_factory=list)
    rhs_descriptor: str = ""
    failed_hypothesis: str = ""
    details: dict = field(default_factory=dict)

    @property
    def holds(self):
        return self.verdict == HOLDS_V


# ---------------------------------------------------------------------------
# standing assumptions and instance models


def validate_standing_assumptions(handle, xbar, space, rho=0.25, grid_n=3):
    """Integrable boundedness on a ball grid: every node value stays in a
    finite kappa(t)-ball (values of the structured classes are convex, so
    the nonatomic convexity clause holds by construction)."""
    xbar = np.asarray(xbar, dtype=float).ravel()
    offsets = [np.zeros(xbar.size)]
    for j in range(xbar.size):
        e = np.zeros(xbar.size)
        e[j] = rho
        for s in np.linspace(-1.0, 1.0, grid_n):
            if s:
                offsets.append(s * e)
    kappa = {}
    for node in space.nodes:
        worst = 0.0
        for off in offsets:
            value = node_value(handle, node, xbar + off)
            worst = max(worst, value.radius())
        kappa[node.id] = worst
    return NodeScalarField(kappa)


def instance_interval_model(handle, space, xbar=None, probe_width=0.5):
    """Exact 1-D interval model of E when every node admits one, else
    None.  Smooth nodes must be declared affine."""
    parts = []
    for node in space.nodes:
        h = handle_for(handle, node.id)
        if isinstance(h, MaxAffineSubgradient) and h.dim_in == 1:
            m = h.monotone_pwa(node.id)
            parts.append(IntervalPWA.from_monotone(m).scaled(node.weight))
            continue
        if isinstance(h, AffineImage):
            model = h.interval_pwa(node.id)
            if model is None:
                return None
            parts.append(model.scaled(node.weight))
            continue
        if isinstance(h, SmoothSingleValued) and h.dim_in == 1 \
                and h.dim_out == 1 and h.affine is not None:
            M, c = h.affine(node.id)
            m = MonotonePWA.affine(float(np.ravel(M)[0]),
                                   float(np.ravel(c)[0]))
            parts.append(IntervalPWA.from_monotone(m).scaled(node.weight))
            continue
        if isinstance(h, ConstraintComposite):
            model = composite_interval_model(h, node.id, xbar, probe_width)
            if model is None:
                return None
            parts.append(model.scaled(node.weight))
            continue
        return None
    return IntervalPWA.sum(parts)


def composite_interval_model(h, node_id, xbar, width=0.5):
    """Interval model of a 1+1-dimensional constraint composite, exact when
    the windowed value endpoints are affine in x (checked at 3 probes)."""
    if h.dim_in != 1 or h.dim_out != 1 or xbar is None:
        return None
    x0 = float(np.asarray(xbar).ravel()[0])
    xs = np.array([x0 - width, x0, x0 + width])
    los, his = [], []
    for xv in xs:
        V = value_polytope(h, node_id, np.array([xv])).vertices.ravel()
        los.append(float(np.min(V)))
        his.append(float(np.max(V)))
    for vals in (los, his):
        second_diff = vals[0] - 2 * vals[1] + vals[2]
        if abs(second_diff) > 1e-9 * (1 + abs(vals[1])):
            return None
    return IntervalPWA.from_samples(xs, los, his)


def expected_graph_1d(handle, space, xbar, window=1.0):
    model = instance_interval_model(handle, space, xbar)
    if model is None:
        return None
    x0 = float(np.asarray(xbar).ravel()[0])
    return model.graph_union((x0 - window, x0 + window))


def expected_graph_secant(handle, space, xbar, window=0.5, samples=9):
    """Secant (piecewise-linear) model of the graph of E for 1-D instances
    without an exact interval model."""
    from .expected import evaluate_expected_map
    x0 = float(np.asarray(xbar).ravel()[0])
    xs = np.linspace(x0 - window, x0 + window, samples)
    los, his = [], []
    for xv in xs:
        V = evaluate_expected_map(handle, np.array([xv]),
                                  space).vertices.ravel()
        los.append(float(np.min(V)))
        his.append(float(np.max(V)))
    model = IntervalPWA.from_samples(xs, los, his)
    return model.graph_union((x0 - window, x0 + window))


def all_smooth(handle, space):
    return all(isinstance(handle_for(handle, n.id), SmoothSingleValued)
               for n in space.nodes)


def expected_slice(handle, space, xbar, ybar, ystar, kind):
    """Exact coderivative slice of E at (xbar, ybar); None when no exact
    graph model exists (callers fall back to the sampling oracle)."""
    xbar = np.asarray(xbar, dtype=float).ravel()
    ybar = np.asarray(ybar, dtype=float).ravel()
    ystar = np.asarray(ystar, dtype=float).ravel()
    if all_smooth(handle, space):
        J = None
        for node in space.nodes:
            h = handle_for(handle, node.id)
            Jt = np.atleast_2d(np.asarray(h.jac(node.id, xbar), dtype=float))
            J = node.weight * Jt if J is None else J + node.weight * Jt
        from .coderivative import singleton_slice
        return singleton_slice(kind, xbar, ybar, ystar, J.T @ ystar)
    if xbar.size == 1 and ybar.size == 1:
        graph = expected_graph_1d(handle, space, xbar)
        if graph is not None:
            return coderivative_polyhedral_graph(graph, xbar, ybar, ystar,
                                                 kind)
    return None


# ---------------------------------------------------------------------------
# right-hand sides: weighted Minkowski sums of per-node slice unions


def _piece_vrep(piece):
    if isinstance(piece, Polytope):
        return (piece.vertices, np.zeros((0, piece.dim)),
                np.zeros((0, piece.dim)))
    gen = polyhedron_generators(piece)
    return gen  # None when the piece is empty


def rhs_minkowski_union(per_node_slices, weights, max_combos=256):
    """The integral of per-node slice sets, as a union of polyhedra.

    Each node contributes a union of pieces; the sum set is assembled
    piece-wise over the Cartesian choice of pieces, without convexifying
    across pieces (convexifying a nonconvex limiting slice would silently
    weaken the inclusion under test).
    """
    piece_lists = []
    for sl, w in zip(per_node_slices, weights):
        pieces = []
        for p in sl.nonempty_pieces():
            g = _piece_vrep(p)
            if g is None:
                continue
            V, R, L = g
            pieces.append((V * w, R, L))
        if not pieces:
            return None  # an empty node slice empties the whole sum
        piece_lists.append(pieces)
    total = 1
    for pl in piece_lists:
        total *= len(pl)
    if total > max_combos:
        raise ValueError(f"too many RHS piece combinations ({total})")
    out = []
    for combo in itertools.product(*piece_lists):
        V, R, L = minkowski_vrep(list(combo))
        out.append(halfspaces_of_vrep(V, R if R.shape[0] else None,
                                      L if L.shape[0] else None))
    return PolyhedralUnion(out)


def distance_to_union(x, union):
    if union is None:
        return np.inf
    return union.distance(np.asarray(x, dtype=float).ravel())


def per_node_slices(handle, space, xbar, selection, ystar, kind=LIMITING,
                    slater_checked=False):
    out = []
    for node in space.nodes:
        h = handle_for(handle, node.id)
        y_t = np.asarray(selection.per_node[node.id], dtype=float).ravel()
        out.append(slice_exact(h, node.id, xbar, y_t, ystar, kind=kind,
                               slater_checked=slater_checked))
    return out


def per_node_value_union_slices(handle, space, xbar, ystar,
                                slater_checked=False):
    """Per node, the union over faces of the value polytope of the slices
    at face representatives (realizes the union over y in Phi_t(xbar))."""
    out = []
    for node in space.nodes:
        h = handle_for(handle, node.id)
        value = node_value(handle, node, xbar)
        pieces = []
        base = None
        for rep, _ in polytope_faces(value):
            sl = slice_exact(h, node.id, xbar, np.asarray(rep), ystar,
                             kind=LIMITING, slater_checked=slater_checked)
            base = sl
            pieces.extend(sl.nonempty_pieces())
        if not pieces:
            sl = base
            sl.value = PolyhedralUnion(
                [Polyhedron(np.zeros((1, xbar.size)), np.array([-1.0]))])
            out.append(sl)
            continue
        sl = base
        sl.value = PolyhedralUnion(pieces)
        out.append(sl)
    return out


# ---------------------------------------------------------------------------
# rule: coderivative inclusions


def verify_coderivative_inclusion(rule, handle, xbar, ybar, space,
                                  ystar_grid=None, tol=DEFAULT_TOL_EXACT,
                                  selection=None, eta=0.25,
                                  slater_checked=False):
    """Inclusion (or equality) between the coderivative slice of E and the
    integral of per-node coderivative slices, per rule variant."""
    xbar = np.asarray(xbar, dtype=float).ravel()
    ybar = np.asarray(ybar, dtype=float).ravel()
    if ystar_grid is None:
        ystar_grid = unit_direction_grid(ybar.size, 8)
    try:
        kappa = validate_standing_assumptions(handle, xbar, space)
    except Exception as exc:
        return InclusionVerdict(rule=rule, verdict=PRECONDITION_FAILED,
                                failed_hypothesis="integrable boundedness",
                                details={"error": str(exc)})
    if selection is None:
        selection = selection_mapping(handle, xbar, ybar, space, tol=1e-7,
                                      mode="centered")
        if selection == INFEASIBLE:
            return InclusionVerdict(
                rule=rule, verdict=PRECONDITION_FAILED,
                failed_hypothesis="base point on the graph of E",
                details={"ybar": ybar.tolist()})

    weights = [n.weight for n in space.nodes]

    # rule-specific hypotheses
    if rule == RuleId.LIMITING_UNION:
        rep = check_quasi_lipschitz(handle, xbar, selection, eta, space,
                                    levels=(3, 8),
                                    slater_checked=slater_checked)
        if not rep.holds:
            return InclusionVerdict(
                rule=rule, verdict=PRECONDITION_FAILED,
                failed_hypothesis="integrable quasi-Lipschitz property",
                details={"report": rep.verdict})
    if rule == RuleId.LIMITING_LIPSCHITZ_VARIANT:
        grid = [xbar + d for d in
                (np.zeros(xbar.size),) + tuple(
                    s * e for s in (-eta / 2, eta / 2)
                    for e in np.eye(xbar.size))]
        rep = check_integrable_local_lipschitz(handle, xbar, eta, grid,
                                               space)
        if not rep.holds:
            return InclusionVerdict(
                rule=rule, verdict=PRECONDITION_FAILED,
                failed_hypothesis="integrable local Lipschitz property",
                details={"report": rep.verdict})
    singleton_values = all(
        node_value(handle, n, xbar).is_singleton for n in space.nodes)
    if rule in (RuleId.SINGLE_VALUED, RuleId.EQUALITY_CASE) \
            and not singleton_values:
        return InclusionVerdict(
            rule=rule, verdict=PRECONDITION_FAILED,
            failed_hypothesis="singleton node values")
    if rule == RuleId.EQUALITY_CASE:
        # coderivative regularity per node: regular slice = limiting slice
        for node in space.nodes:
            h = handle_for(handle, node.id)
            y_t = np.asarray(selection.per_node[node.id]).ravel()
            for ystar in ystar_grid:
                sr = slice_exact(h, node.id, xbar, y_t, ystar, REGULAR,
                                 slater_checked=slater_checked)
                sl = slice_exact(h, node.id, xbar, y_t, ystar, LIMITING,
                                 slater_checked=slater_checked)
                if not _slices_match(sr, sl):
                    return InclusionVerdict(
                        rule=rule, verdict=PRECONDITION_FAILED,
                        failed_hypothesis="coderivative regularity",
                        details={"node": node.id,
                                 "ystar": np.asarray(ystar).tolist()})

    lhs_kind = REGULAR if rule in (
        RuleId.REGULAR_POINTWISE, RuleId.EQUALITY_CASE) else LIMITING

    max_violation = 0.0
    lhs_record = []
    reverse_violation = 0.0
    for ystar in ystar_grid:
        ystar = np.asarray(ystar, dtype=float).ravel()
        lhs = expected_slice(handle, space, xbar, ybar, ystar, lhs_kind)
        if lhs is None:
            return InclusionVerdict(
                rule=rule, verdict=INCONCLUSIVE_V,
                failed_hypothesis="no exact graph model for E",
                details={"hint": "use the sampling oracle"})
        # assemble the RHS per variant
        if rule == RuleId.LIMITING_UNION:
            selections = enumerate_selection_faces(handle, xbar, ybar,
                                                   space, tol=1e-7)
            rhs_sets = []
            for sel in selections:
                sls = per_node_slices(handle, space, xbar, sel, ystar,
                                      LIMITING, slater_checked)
                u = rhs_minkowski_union(sls, weights)
                if u is not None:
                    rhs_sets.append(u)
            rhs = (PolyhedralUnion([p for u in rhs_sets for p in u.pieces])
                   if rhs_sets else None)
            rhs_desc = f"union over {len(selections)} face selections"
        elif rule == RuleId.LIMITING_LIPSCHITZ_VARIANT:
            sls = per_node_value_union_slices(handle, space, xbar, ystar,
                                              slater_checked)
            rhs = rhs_minkowski_union(sls, weights)
            rhs_desc = "per-node union over the whole value set"
        else:
            sls = per_node_slices(handle, space, xbar, selection, ystar,
                                  LIMITING, slater_checked)
            rhs = rhs_minkowski_union(sls, weights)
            rhs_desc = "single base selection"
        for pt in lhs.sample_points():
            d = distance_to_union(pt, rhs)
            max_violation = max(max_violation, d)
            lhs_record.append((ystar.tolist(), pt.tolist(), float(d)))
        if rule == RuleId.EQUALITY_CASE and rhs is not None:
            for piece in rhs.pieces:
                gen = polyhedron_generators(piece)
                if gen is None:
                    continue
                V, R, L = gen
                for v in V:
                    dd = min(p.distance(v) for p in lhs.pieces())
                    reverse_violation = max(reverse_violation, dd)
    verdict = HOLDS_V if max_violation <= tol else VIOLATED_V
    if rule == RuleId.EQUALITY_CASE and reverse_violation > tol:
        verdict = VIOLATED_V
    return InclusionVerdict(
        rule=rule, verdict=verdict,
        max_violation=float(max(max_violation, reverse_violation)),
        tolerance=tol, lhs_samples=lhs_record, rhs_descriptor=rhs_desc,
        details={"kappa": kappa.values,
                 "reverse_violation": float(reverse_violation)})


def _slices_match(s1, s2, tol=1e-9):
    p1 = s1.sample_points()
    p2 = s2.sample_points()
    if p1.shape[0] == 0 and p2.shape[0] == 0:
        return True
    if p1.shape[0] == 0 or p2.shape[0] == 0:
        return False
    d1 = max(min(p.distance(v) for p in s2.pieces()) for v in p1)
    d2 = max(min(p.distance(v) for p in s1.pieces()) for v in p2)
    return max(d1, d2) <= tol


# ---------------------------------------------------------------------------
# rule: first-order subdifferential Leibniz


def scalar_handle_of(phi, node_id):
    h = phi(node_id) if callable(phi) and not isinstance(phi, dict) \
        else phi[node_id]
    return h


def verify_subdifferential_leibniz(phi, xbar, space, tol=1e-2,
                                   mode="inclusion", grid_count=64,
                                   probe_radii=(1e-3, 1e-5),
                                   row_slack=None):
    """First-order rule: subdifferential of E_phi against the integral of
    the per-node subdifferentials.

    phi maps node ids to ScalarFunctionHandle values carrying max-affine
    or smooth structure.  The left side is grid-approximated (an outer
    approximation refined by nearby-gradient probes); the right side is
    exact hull arithmetic.
    """
    xbar = np.asarray(xbar, dtype=float).ravel()
    rule = (RuleId.FIRST_ORDER_EQUALITY if mode == "equality"
            else RuleId.FIRST_ORDER_SUBDIFF)
    handles = {n.id: scalar_handle_of(phi, n.id) for n in space.nodes}

    # hypothesis: integrable Lipschitz continuity on a grid (ratio check
    # with one refinement level)
    for node in space.nodes:
        h = handles[node.id]
        base = _lipschitz_ratio(h, xbar, 0.25)
        refined = _lipschitz_ratio(h, xbar, 0.0625)
        if not np.isfinite(base) or refined >= (2 - 1e-6) * max(base, 1e-300):
            return InclusionVerdict(
                rule=rule, verdict=PRECONDITION_FAILED,
                failed_hypothesis="integrable Lipschitz continuity",
                details={"node": node.id, "base": base, "refined": refined})

    # RHS: exact per-node subdifferentials
    terms = []
    for node in space.nodes:
        h = handles[node.id]
        sub = _exact_subdifferential(h, xbar)
        if sub is None:
            return InclusionVerdict(
                rule=rule, verdict=PRECONDITION_FAILED,
                failed_hypothesis="per-node lower regularity "
                                  "(structured classes only)",
                details={"node": node.id})
        terms.append((node.weight, sub))
    rhs = weighted_minkowski(terms)

    # LHS: grid subdifferential of the aggregate functional
    def agg(x):
        return float(sum(n.weight * handles[n.id].evaluate(x)
                         for n in space.nodes))

    f = ScalarFunctionHandle(dim=xbar.size, evaluate=agg)
    slack_kw = {} if row_slack is None else {"row_slack": row_slack}
    lhs = regular_subdifferential(f, xbar, count=grid_count, **slack_kw)
    lhs_points = [] if getattr(lhs, "is_empty", False) else \
        list(lhs.sample_points())
    # limiting refinement: gradients at nearby smooth probe points
    for r in probe_radii:
        for w in unit_direction_grid(xbar.size,
                                     4 if xbar.size > 1 else 2):
            x = xbar + r * w
            g = np.zeros(xbar.size)
            for node in space.nodes:
                h = handles[node.id]
                if h.gradient is not None and h.is_smooth_at(x):
                    g += node.weight * np.asarray(h.gradient(x)).ravel()
                else:
                    g = None
                    break
            if g is not None:
                lhs_points.append(g)

    max_violation = 0.0
    for pt in lhs_points:
        max_violation = max(max_violation, rhs.distance(pt))
    details = {"rhs_vertices": rhs.vertices.tolist()}
    if mode == "equality":
        if getattr(lhs, "is_empty", False):
            return InclusionVerdict(rule=rule, verdict=VIOLATED_V,
                                    max_violation=np.inf, tolerance=tol,
                                    rhs_descriptor="exact hull sum",
                                    details=details)
        hd = hausdorff_distance(lhs, rhs)
        details["hausdorff"] = float(hd)
        details["lhs_vertices"] = lhs.vertices.tolist()
        verdict = HOLDS_V if hd <= tol else VIOLATED_V
        return InclusionVerdict(rule=rule, verdict=verdict,
                                max_violation=float(max(hd, max_violation)),
                                tolerance=tol,
                                rhs_descriptor="exact hull sum",
                                details=details)
    verdict = HOLDS_V if max_violation <= tol else VIOLATED_V
    return InclusionVerdict(rule=rule, verdict=verdict,
                            max_violation=float(max_violation),
                            tolerance=tol, rhs_descriptor="exact hull sum",
                            details=details)


def _lipschitz_ratio(h, xbar, radius, n=5):
    pts = [xbar + radius * s * e for e in np.eye(xbar.size)
           for s in np.linspace(-1, 1, n) if s]
    pts.append(xbar)
    best = 0.0
    for a, b in itertools.combinations(range(len(pts)), 2):
        dx = float(np.linalg.norm(pts[a] - pts[b]))
        if dx < 1e-14:
            continue
        df = abs(h.evaluate(pts[a]) - h.evaluate(pts[b]))
        best = max(best, df / dx)
    return best


def _exact_subdifferential(h, xbar):
    """Exact subdifferential for the structured scalar classes: hull of
    active slopes for max-affine, the gradient for smooth handles."""
    if getattr(h, "max_affine_data", None) is not None:
        slopes, intercepts = h.max_affine_data
        vals = np.atleast_2d(slopes) @ xbar + np.asarray(intercepts).ravel()
        top = np.max(vals)
        act = np.atleast_2d(slopes)[vals >= top - 1e-9]
        from .geometry import convex_hull
        return convex_hull(act)
    if h.gradient is not None and h.is_smooth_at(xbar):
        return Polytope.singleton(np.asarray(h.gradient(xbar)).ravel())
    return None


# ---------------------------------------------------------------------------
# rule: composite / constraint systems


def verify_composite_rule(handle, xbar, ybar, space, ystar_grid=None,
                          tol=DEFAULT_TOL_EXACT, specialized=False,
                          eta=0.25, slater_budget=10_000):
    """Coderivative rule for amenable composite integrands; in specialized
    mode the slices come from the active-gradient multiplier formula of the
    random inequality system and both constraint qualifications are
    checked first."""
    xbar = np.asarray(xbar, dtype=float).ravel()
    ybar = np.asarray(ybar, dtype=float).ravel()
    rule = (RuleId.CONSTRAINT_SPECIALIZED if specialized
            else RuleId.COMPOSITE_AMENABLE)
    if ystar_grid is None:
        ystar_grid = unit_direction_grid(ybar.size, 8)

    def first_handle(node_id):
        return handle_for(handle, node_id)

    if specialized:
        some = first_handle(space.nodes[0].id)
        ok, kappa = check_slater(
            lambda nid: first_handle(nid).constraints(nid),
            lambda nid: np.asarray(first_handle(nid).inner(nid, xbar),
                                   dtype=float).ravel(),
            eta, space, ydim=some.dim_out, budget=slater_budget)
        if not ok:
            return InclusionVerdict(
                rule=rule, verdict=PRECONDITION_FAILED,
                failed_hypothesis="integrable Slater constraint "
                                  "qualification")
        per_node_ok = []
        for node in space.nodes:
            h = first_handle(node.id)
            okq, witness = check_adjoint_triviality(h, xbar, eta, space)
            per_node_ok.append(okq)
            if not okq:
                return InclusionVerdict(
                    rule=rule, verdict=PRECONDITION_FAILED,
                    failed_hypothesis="integral triviality qualification "
                                      "condition",
                    details={"witness": witness})
        # gradient bound of the inner maps on the grid
        gbound = 0.0
        for node in space.nodes:
            h = first_handle(node.id)
            for s in np.linspace(-eta, eta, 5):
                J = np.atleast_2d(h.inner_jac(node.id, xbar + s))
                gbound = max(gbound, float(np.linalg.norm(J, 2)))
    verdict = verify_coderivative_inclusion(
        rule=RuleId.REGULAR_POINTWISE, handle=handle, xbar=xbar, ybar=ybar,
        space=space, ystar_grid=ystar_grid, tol=tol, slater_checked=True)
    verdict.rule = rule
    if specialized and verdict.verdict == HOLDS_V:
        verdict.details["slater_kappa"] = kappa.values
        verdict.details["gradient_bound"] = gbound
    return verdict


# ---------------------------------------------------------------------------
# rule: Lipschitz certificate for E


def verify_eim_lipschitz_certificate(handle, xbar, ybar, space,
                                     tol=1e-9, eta=0.25):
    """Certificate: the integral of the y*=0 slices over every enumerated
    selection is {0}; then E is Lipschitz-like at (xbar, ybar), which is
    cross-checked on the exact graph of E when one exists."""
    xbar = np.asarray(xbar, dtype=float).ravel()
    ybar = np.asarray(ybar, dtype=float).ravel()
    selection = selection_mapping(handle, xbar, ybar, space, tol=1e-7,
                                      mode="centered")
    if selection == INFEASIBLE:
        return LipschitzReport(property_name="eim-lipschitz-certificate",
                               verdict="precondition-failed",
                               witness={"reason": "base off the graph"})
    rep_q = check_quasi_lipschitz(handle, xbar, selection, eta, space)
    if not rep_q.holds:
        return LipschitzReport(property_name="eim-lipschitz-certificate",
                               verdict="precondition-failed",
                               witness={"reason":
                                        "quasi-Lipschitz hypothesis",
                                        "verdict": rep_q.verdict})
    zero = np.zeros(ybar.size)
    certificate_ok = True
    worst = 0.0
    selections = enumerate_selection_faces(handle, xbar, ybar, space,
                                           tol=1e-7)
    weights = [n.weight for n in space.nodes]
    for sel in selections:
        sls = per_node_slices(handle, space, xbar, sel, zero, LIMITING)
        union = rhs_minkowski_union(sls, weights)
        if union is None:
            continue
        for piece in union.pieces:
            gen = polyhedron_generators(piece)
            if gen is None:
                continue
            V, R, L = gen
            if R.shape[0] or L.shape[0]:
                certificate_ok = False
                worst = np.inf
                break
            norms = np.linalg.norm(V, axis=1)
            worst = max(worst, float(np.max(norms)))
            if np.max(norms) > tol:
                certificate_ok = False
        if not certificate_ok:
            break
    cross = None
    graph = expected_graph_1d(handle, space, xbar) \
        if xbar.size == 1 and ybar.size == 1 else None
    if graph is not None:
        cross = check_lipschitz_like_deterministic(graph, xbar, ybar)
    if certificate_ok:
        verdict = HOLDS
        if cross is not None and not cross.holds:
            verdict = "violated"  # certificate asserted but refuted
    else:
        verdict = ("certificate-inconclusive"
                   if cross is None or cross.holds else "violated")
    return LipschitzReport(
        property_name="eim-lipschitz-certificate", verdict=verdict,
        modulus={"zero_slice_norm": worst,
                 **({"cross_modulus": cross.max_modulus()} if cross
                    else {})},
        grid={"selections": len(selections)},
        witness={} if certificate_ok else
        {"reason": "nonzero y*=0 integral set"})


# ---------------------------------------------------------------------------
# rule: second order


def scalar_of_subgradient_node(h, node_id):
    """Scalar integrand whose subgradient map the node handle represents."""
    if isinstance(h, MaxAffineSubgradient):
        slopes, intercepts = h.pieces(node_id)
        sf = ScalarFunctionHandle.max_affine(slopes, intercepts)
        sf.max_affine_data = (np.atleast_2d(np.asarray(slopes, dtype=float)),
                              np.asarray(intercepts, dtype=float).ravel())
        return sf
    if isinstance(h, SmoothSingleValued) and h.affine is not None:
        M, c = h.affine(node_id)
        a = float(np.ravel(M)[0])
        b = float(np.ravel(c)[0])

        def ev(x):
            return 0.5 * a * float(x[0]) ** 2 + b * float(x[0])

        sf = ScalarFunctionHandle(
            dim=1, evaluate=ev,
            gradient=lambda x: np.array([a * float(x[0]) + b]))
        return sf
    raise ValueError("second-order rules need max-affine or affine-gradient "
                     "nodes")


def verify_second_order(rule, handle, xbar, ybar, space, ystar_grid=None,
                        tol=DEFAULT_TOL_EXACT, eta=0.25):
    """Second-order rules: both sides are coderivative slices of subgradient
    maps; the graph of the aggregate subgradient map is enumerated exactly
    in 1-D."""
    xbar = np.asarray(xbar, dtype=float).ravel()
    ybar = np.asarray(ybar, dtype=float).ravel()
    if xbar.size != 1:
        return InclusionVerdict(rule=rule, verdict=INCONCLUSIVE_V,
                                failed_hypothesis="exact enumeration is 1-D")
    if ystar_grid is None:
        ystar_grid = unit_direction_grid(1, 2)
    # per-node monotone models and the scalar integrands behind them
    models = {}
    for node in space.nodes:
        h = handle_for(handle, node.id)
        if isinstance(h, MaxAffineSubgradient):
            models[node.id] = h.monotone_pwa(node.id)
        elif isinstance(h, SmoothSingleValued) and h.affine is not None:
            M, c = h.affine(node.id)
            models[node.id] = MonotonePWA.affine(float(np.ravel(M)[0]),
                                                 float(np.ravel(c)[0]))
        else:
            return InclusionVerdict(
                rule=rule, verdict=PRECONDITION_FAILED,
                failed_hypothesis="structured subgradient nodes")
    phi = {n.id: scalar_of_subgradient_node(handle_for(handle, n.id), n.id)
           for n in space.nodes}

    # hypothesis: first-order rule holds as an equality on a ball grid
    for off in (-eta / 2, 0.0, eta / 2):
        eq = verify_subdifferential_leibniz(phi, xbar + off, space,
                                            tol=1e-2, mode="equality")
        if not eq.holds:
            return InclusionVerdict(
                rule=rule, verdict=PRECONDITION_FAILED,
                failed_hypothesis="first-order subdifferential Leibniz rule "
                                  "as equality",
                details={"offset": off, "verdict": eq.verdict})
    # hypothesis: subgradients bounded (kappa) + lower regularity: the
    # structured node classes are convex, so lower regularity holds
    validate_standing_assumptions(handle, xbar, space)
    # hypothesis: second-order quasi-Lipschitz property of the subgradient
    # map around the base selection
    selection = selection_mapping(handle, xbar, ybar, space, tol=1e-7,
                                      mode="centered")
    if selection == INFEASIBLE:
        return InclusionVerdict(
            rule=rule, verdict=PRECONDITION_FAILED,
            failed_hypothesis="ybar in the subgradient integral")
    rep_q = check_quasi_lipschitz(handle, xbar, selection, eta, space)
    if not rep_q.holds:
        return InclusionVerdict(
            rule=rule, verdict=PRECONDITION_FAILED,
            failed_hypothesis="second-order integrable quasi-Lipschitz "
                              "property",
            details={"verdict": rep_q.verdict})

    agg = MonotonePWA.sum([models[n.id].scaled(n.weight)
                           for n in space.nodes])
    lhs_kind = REGULAR if rule == RuleId.SECOND_ORDER_COMBINED else LIMITING
    graph = agg.graph_union((xbar[0] - 1.0, xbar[0] + 1.0))
    weights = [n.weight for n in space.nodes]
    max_violation = 0.0
    lhs_record = []
    for ystar in ystar_grid:
        ystar = np.asarray(ystar, dtype=float).ravel()
        lhs = coderivative_polyhedral_graph(graph, xbar, ybar, ystar,
                                            lhs_kind)
        if rule == RuleId.SECOND_ORDER_COMBINED:
            selections = [selection]
        else:
            selections = enumerate_selection_faces(handle, xbar, ybar,
                                                   space, tol=1e-7)
        rhs_pieces = []
        for sel in selections:
            sls = per_node_slices(handle, space, xbar, sel, ystar, LIMITING)
            u = rhs_minkowski_union(sls, weights)
            if u is not None:
                rhs_pieces.extend(u.pieces)
        rhs = PolyhedralUnion(rhs_pieces) if rhs_pieces else None
        for pt in lhs.sample_points():
            d = distance_to_union(pt, rhs)
            max_violation = max(max_violation, d)
            lhs_record.append((ystar.tolist(), pt.tolist(), float(d)))
    verdict = HOLDS_V if max_violation <= tol else VIOLATED_V
    return InclusionVerdict(rule=rule, verdict=verdict,
                            max_violation=float(max_violation),
                            tolerance=tol, lhs_samples=lhs_record,
                            rhs_descriptor="selection-union of node slices")


# ---------------------------------------------------------------------------
# sequential witness search


def sequential_witness_search(handle, xbar, target_xstar, ystar, space,
                              selection, epsilons=None,
                              slater_checked=False):
    """Search for per-node tuples realizing a target element of the
    regular coderivative of E within shrinking tolerances.

    For each epsilon level the search tries the stationary tuple first
    (all node base points at xbar), then per-node piece probes within
    epsilon/2.  A not-found level is recorded as search-budget exhausted,
    never as a refutation (the underlying statements are asymptotic).
    """
    xbar = np.asarray(xbar, dtype=float).ravel()
    target = np.asarray(target_xstar, dtype=float).ravel()
    ystar = np.asarray(ystar, dtype=float).ravel()
    if epsilons is None:
        epsilons = tuple(10.0 ** (-k) for k in range(1, 7))
    records = []
    for eps in epsilons:
        found = None
        for probe in _witness_probes(xbar, eps, space):
            sets = []
            ok = True
            for node in space.nodes:
                h = handle_for(handle, node.id)
                x_t = probe[node.id]
                val = node_value(handle, node, x_t)
                _, y_t = val.project(
                    np.asarray(selection.per_node[node.id], dtype=float))
                try:
                    sl = slice_exact(h, node.id, x_t, y_t, ystar,
                                     kind=REGULAR,
                                     slater_checked=slater_checked)
                except Exception:
                    ok = False
                    break
                box = _bounded_sample_polytope(sl, scale=10.0)
                if box is None:
                    ok = False
                    break
                sets.append((node.weight, box))
            if not ok:
                continue
            from .expected import decompose_target
            pts = decompose_target(sets, target, tol=eps)
            if pts is None:
                continue
            agg = sum(n.weight * p for n, p in zip(space.nodes, pts))
            drift = float(np.linalg.norm(agg - target))
            product_term = float(sum(
                n.weight * np.linalg.norm(p) *
                np.linalg.norm(probe[n.id] - xbar)
                for n, p in zip(space.nodes, pts)))
            base_drift = max(float(np.linalg.norm(probe[n.id] - xbar))
                             for n in space.nodes)
            if drift <= eps and product_term <= eps and base_drift <= eps:
                found = {
                    "epsilon": eps,
                    "aggregate_drift": drift,
                    "product_term": product_term,
                    "base_drift": base_drift,
                    "node_points": {n.id: probe[n.id].tolist()
                                    for n in space.nodes},
                    "node_xstars": {n.id: p.tolist()
                                    for n, p in zip(space.nodes, pts)},
                }
                break
        records.append(found if found is not None
                       else {"epsilon": eps,
                             "status": "search-budget exhausted"})
    success = all("status" not in r for r in records)
    return {"found_all_levels": success, "levels": records}


def _witness_probes(xbar, eps, space):
    yield {n.id: xbar.copy() for n in space.nodes}
    if xbar.size == 1:
        shifts = [np.array([eps / 2.0]), np.array([-eps / 2.0])]
        options = [[xbar.copy()] + [xbar + s for s in shifts]
                   for _ in space.nodes]
        for combo in itertools.product(*options):
            yield {n.id: c for n, c in zip(space.nodes, combo)}


def _bounded_sample_polytope(sl, scale=10.0):
    """Compact window of a slice for LP decomposition (unbounded pieces are
    boxed at the given scale)."""
    pts = sl.sample_points(ray_scales=(1.0, scale))
    if pts.shape[0] == 0:
        return None
    return Polytope(pts)
