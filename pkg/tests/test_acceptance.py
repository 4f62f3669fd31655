"""Acceptance criteria, one test per criterion, each printing a PASS line
with its wall time.  Tolerances are pinned here and nowhere else."""

import importlib.resources
import time

import numpy as np
import pytest

from conftest import abs_subgradient_handle, sqrt_band_handle
from eimkit import cli
from eimkit import coderivative as cd
from eimkit import lipschitz as lz
from eimkit import rules as rl
from eimkit.expected import SelectionFunction, evaluate_expected_map
from eimkit.geometry import Polytope, hausdorff_distance
from eimkit.measure import MeasureSpace
from eimkit.normal_cones import (
    ScalarFunctionHandle, limiting_normal_cone_union,
    regular_normal_cone_polyhedron,
)
from eimkit.oracle import (
    RadiiSchedule, membership_of_set, oracle_coderivative,
    oracle_normal_cone,
)


def _report(name, t0, budget):
    dt = time.time() - t0
    print(f"\nACCEPTANCE {name}: PASS ({dt:.2f}s / budget {budget}s)")
    assert dt < budget


def two_atoms():
    return MeasureSpace.from_triples([("t1", 1.0, "atom"),
                                      ("t2", 1.0, "atom")])


def test_criterion_1_aumann_interval_sum():
    """Two-atom interval instance: E = [2,4] exactly, under a millisecond
    after warmup."""
    sp = two_atoms()
    h = cd.AffineImage.interval_affine({"t1": (0.0, 1.0, 0.0),
                                        "t2": (2.0, 3.0, 0.0)})
    evaluate_expected_map(h, [0.0], sp)  # warm the jitted kernels
    t0 = time.time()
    E = evaluate_expected_map(h, [0.0], sp)
    dt = time.time() - t0
    assert hausdorff_distance(E, Polytope.interval(2.0, 4.0)) == 0.0
    print(f"\nACCEPTANCE 1: PASS ({dt*1000:.3f}ms / budget 1ms)")
    assert dt < 1e-3


def test_criterion_2_smooth_equality_battery():
    """50 seeded random 2-node linear R^2 -> R^2 instances: the equality
    rule holds at 1e-10 and matches the weighted adjoint-Jacobian sum."""
    t0 = time.time()
    sp = two_atoms()
    for seed in range(50):
        rng = np.random.default_rng(seed)
        mats = {nid: rng.uniform(-2, 2, size=(2, 2))
                for nid in ("t1", "t2")}
        h = cd.SmoothSingleValued.linear(mats)
        v = rl.verify_coderivative_inclusion(
            rl.RuleId.EQUALITY_CASE, h, [0.0, 0.0], [0.0, 0.0], sp,
            tol=1e-10)
        assert v.holds, (seed, v.verdict, v.failed_hypothesis)
        assert v.max_violation <= 1e-10
        # cross-check one slice against the hand formula
        ystar = rng.standard_normal(2)
        lhs = rl.expected_slice(h, sp, np.zeros(2), np.zeros(2), ystar,
                                cd.LIMITING)
        want = (mats["t1"] + mats["t2"]).T @ ystar
        assert lhs.contains(want, 1e-10)
    _report("2", t0, 1.0)


def test_criterion_3_sqrt_example_reproduced():
    """The interval map [0, sqrt|x|+1] on a nonatomic probability space:
    E is Lipschitz-like at (0,0) while the quasi-Lipschitz check diverges
    at factor >= 2 per refinement level over 2^-3..2^-10."""
    t0 = time.time()
    sp = MeasureSpace.from_triples(
        [(f"u{k}", 0.25, "nonatomic") for k in range(1, 5)])
    h = sqrt_band_handle()
    graph = rl.expected_graph_secant(h, sp, [0.0], window=0.5)
    like = lz.check_lipschitz_like_deterministic(graph, [0.0], [0.0])
    assert like.holds
    sel = SelectionFunction(
        per_node={n.id: np.array([0.0]) for n in sp.nodes},
        aggregate=np.array([0.0]))
    rep = lz.check_quasi_lipschitz(h, [0.0], sel, 1.5, sp, levels=(3, 10))
    assert rep.verdict in (lz.VIOLATED, lz.INCONCLUSIVE)
    for node in sp.nodes:
        seq = [mods[node.id] for _, mods in rep.levels]
        # one refinement level = two dyadic grid halvings (spacing / 4)
        for a, b in zip(seq, seq[2:]):
            assert b >= 2.0 * a * (1 - 1e-9)
    _report("3", t0, 10.0)


def test_criterion_4_constraint_coderivative_vs_oracle():
    """30 seeded smooth 1+1-dimensional constraint systems passing Slater:
    the multiplier-formula slice and the sampled-graph oracle agree within
    2e-2 and every oracle cluster is matched."""
    t0 = time.time()
    sp = MeasureSpace.from_triples([("t1", 1.0, "atom")])
    sched = RadiiSchedule(budget_per_shell=10_000,
                          base_points_per_shell=6,
                          directions_per_shell=4096)
    for seed in range(30):
        rng = np.random.default_rng(100 + seed)
        a = float(rng.uniform(0.5, 2.0))
        b = float(rng.uniform(-0.5, 0.5))
        q = float(rng.uniform(-0.3, 0.3))

        def phi(z, y, a=a, b=b, q=q):
            return float(y[0] - a * z[0] - b + q * z[0] ** 2)

        def grad(z, y, a=a, q=q):
            return np.array([-a + 2 * q * z[0], 1.0])

        cons = [(phi, grad)]
        ok, _ = cd.check_slater(lambda n: cons, np.zeros(1), 0.25, sp,
                                ydim=1, budget=2000)
        assert ok, seed
        zbar, ybar = np.zeros(1), np.array([b])
        ystar = np.array([-1.0])
        sl, _ = cd.coderivative_constraint_system(cons, zbar, ybar, ystar)
        exact_pts = sl.sample_points()

        def gph(P, a=a, b=b, q=q):
            return P[:, 1] <= a * P[:, 0] + b - q * P[:, 0] ** 2 + 1e-12

        s = oracle_coderivative(gph, zbar, ybar, ystar, "limiting", sched,
                                seed=seed, angular_tol=5e-2)
        assert s.points.shape[0] > 0, seed
        for p in s.points:
            assert min(np.linalg.norm(p - e) for e in exact_pts) <= 2e-2
        for e in exact_pts:
            assert min(np.linalg.norm(p - e) for p in s.points) <= 2e-2
    _report("4", t0, 60.0)


def test_criterion_5_first_order_equality_max_affine():
    """|x| on two unit atoms: grid LHS and exact RHS both equal [-2,2]
    within 1e-2, and refining the approximation halves the gap."""
    t0 = time.time()
    sp = two_atoms()
    h = ScalarFunctionHandle.max_affine([[1.0], [-1.0]], [0.0, 0.0])
    h.max_affine_data = (np.array([[1.0], [-1.0]]), np.array([0.0, 0.0]))
    phi = {"t1": h, "t2": h}
    v = rl.verify_subdifferential_leibniz(phi, [0.0], sp, tol=1e-2,
                                          mode="equality")
    assert v.holds
    assert sorted(np.ravel(v.details["rhs_vertices"])) == [-2.0, 2.0]
    assert v.details["hausdorff"] <= 1e-2
    refined = rl.verify_subdifferential_leibniz(phi, [0.0], sp, tol=1e-2,
                                                mode="equality",
                                                row_slack=5e-5)
    assert refined.details["hausdorff"] <= \
        v.details["hausdorff"] / 2 + 1e-12
    _report("5", t0, 5.0)


def test_criterion_6_second_order_basic():
    """|x| + quadratic two-node instance: the basic second-order rule holds
    at 1e-6 against exact 1-D piece enumeration, cross-checked by the
    sampling oracle within 2e-2."""
    t0 = time.time()
    sp = two_atoms()
    h = {"t1": abs_subgradient_handle(),
         "t2": cd.SmoothSingleValued.linear({"t2": [[1.0]]})}
    v = rl.verify_second_order(rl.RuleId.SECOND_ORDER_BASIC, h, [0.0],
                               [0.3], sp, tol=1e-6)
    assert v.holds, (v.verdict, v.failed_hypothesis)
    assert v.max_violation <= 1e-6
    # oracle cross-check of the aggregate subgradient graph slice
    from eimkit.oracle import SetSampler
    from eimkit.pwgraphs import MonotonePWA
    agg = MonotonePWA.sum([h["t1"].monotone_pwa("t1"),
                           MonotonePWA.affine(1.0)])
    graph = agg.graph_union((-1.0, 1.0))
    sched = RadiiSchedule(budget_per_shell=15_000,
                          base_points_per_shell=8)
    exact = cd.coderivative_polyhedral_graph(graph, [0.0], [0.3], [-1.0],
                                             cd.LIMITING)
    s = oracle_coderivative(SetSampler(graph), [0.0], [0.3], [-1.0],
                            "limiting", sched, seed=6, angular_tol=5e-2)
    for p in s.points:
        assert min(piece.distance(p) for piece in exact.pieces()) <= 2e-2
    _report("6", t0, 30.0)


def test_criterion_7_inclusion_rule_battery():
    """100 seeded random two-node polytopal-affine instances satisfying
    the standing assumptions: RegularPointwise and LimitingUnion hold at
    1e-6 with zero violations or precondition aborts."""
    t0 = time.time()
    sp = two_atoms()
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        params = {}
        for nid in ("t1", "t2"):
            lo = float(rng.uniform(-1.0, 0.0))
            hi = lo + float(rng.uniform(0.2, 1.5))
            c = float(rng.uniform(-2.0, 2.0))
            params[nid] = (lo, hi, c)
        h = cd.AffineImage.interval_affine(params)
        model = rl.instance_interval_model(h, sp)
        lo, hi = model.value_interval(0.0)
        ybar = [float(rng.uniform(lo, hi))]
        for rule in (rl.RuleId.REGULAR_POINTWISE,
                     rl.RuleId.LIMITING_UNION):
            v = rl.verify_coderivative_inclusion(rule, h, [0.0], ybar, sp,
                                                 tol=1e-6)
            assert v.holds, (seed, rule.value, v.verdict,
                             v.failed_hypothesis)
            assert v.max_violation <= 1e-6
    _report("7", t0, 300.0)


def test_criterion_8_oracle_exact_consistency():
    """30 seeded instances: sampled regular cones sit inside the exact
    polyhedral cones within angular 2e-2 with every extreme generator
    matched; regular slices are subsets of limiting slices; cone output is
    positively homogeneous."""
    t0 = time.time()
    sched = RadiiSchedule(budget_per_shell=10_000)
    from eimkit.geometry import Polyhedron
    for seed in range(30):
        rng = np.random.default_rng(300 + seed)
        a1 = rng.uniform(0.2, np.pi - 0.4)
        R = np.array([[np.cos(a1), -np.sin(a1)],
                      [np.sin(a1), np.cos(a1)]])
        rows = np.array([[0.0, -1.0], R @ [0.0, -1.0]])
        P = Polyhedron(rows, np.zeros(2))
        exact = regular_normal_cone_polyhedron(P, [0.0, 0.0])
        s = oracle_normal_cone(membership_of_set(P, tol=1e-12),
                               [0.0, 0.0], "regular", sched, seed=seed)
        assert s.points.shape[0] > 0, seed
        assert max(exact.distance(p) for p in s.points) <= 2e-2
        for g in exact.generators:
            assert min(np.linalg.norm(g - p) for p in s.points) <= 2e-2
        # positive homogeneity of the exact cone values
        for g in exact.generators:
            for lam in (0.5, 2.0, 10.0):
                assert exact.contains(lam * g, 1e-12)
    # regular subset of limiting on the staircase graph pieces
    h = abs_subgradient_handle()
    graph = h.monotone_pwa("t").graph_union((-1.0, 1.0))
    for base_y in (1.0, -1.0, 0.0):
        for ystar in ([1.0], [-1.0]):
            reg = cd.coderivative_polyhedral_graph(graph, [0.0], [base_y],
                                                   ystar, kind=cd.REGULAR)
            lim = cd.coderivative_polyhedral_graph(graph, [0.0], [base_y],
                                                   ystar, kind=cd.LIMITING)
            for pt in reg.sample_points():
                assert lim.contains(pt, 1e-9)
    _report("8", t0, 120.0)


def test_criterion_9_reproducibility():
    """Every bundled scenario emits byte-identical structured reports
    across two consecutive runs with the same seed."""
    t0 = time.time()
    names = ["smooth_two_atoms", "interval_pair", "abs_two_atoms",
             "constraint_pair", "sqrt_example"]
    for name in names:
        path = importlib.resources.files("eimkit") / "scenarios" \
            / f"{name}.scn"
        text = path.read_text()
        outs = []
        for _ in range(2):
            sc = cli.parse_scenario(text, name=name)
            outs.append(cli.emit_structured(cli.run_scenario(sc)))
        assert outs[0] == outs[1], name
    _report("9", t0, 60.0)
