import numpy as np
import pytest

from conftest import (
    abs_subgradient_handle, le_constraint_handle, sqrt_band_handle,
)
from eimkit import coderivative as cd
from eimkit import rules as rl
from eimkit.expected import SelectionFunction, selection_mapping
from eimkit.geometry import Polytope
from eimkit.measure import MeasureSpace
from eimkit.normal_cones import ScalarFunctionHandle


def abs_scalar_handle():
    h = ScalarFunctionHandle.max_affine([[1.0], [-1.0]], [0.0, 0.0])
    h.max_affine_data = (np.array([[1.0], [-1.0]]), np.array([0.0, 0.0]))
    return h


def piece_scalar_handle(slopes, intercepts):
    h = ScalarFunctionHandle.max_affine(slopes, intercepts)
    h.max_affine_data = (np.atleast_2d(np.asarray(slopes, dtype=float)),
                         np.asarray(intercepts, dtype=float).ravel())
    return h


class TestCoderivativeInclusionRules:
    def test_smooth_two_atom_equality(self, two_atoms):
        # g1 = 2x, g2 = 3x: both sides are {5 y*}
        h = cd.SmoothSingleValued.linear({"t1": [[2.0]], "t2": [[3.0]]})
        v = rl.verify_coderivative_inclusion(
            rl.RuleId.EQUALITY_CASE, h, [0.0], [0.0], two_atoms, tol=1e-10)
        assert v.holds
        assert v.max_violation <= 1e-10

    def test_polytopal_two_atom_inclusion(self, two_atoms):
        # Phi1 = [0,1]+x, Phi2 = [0,1]-x at (0, 1)
        h = cd.AffineImage.interval_affine({"t1": (0.0, 1.0, 1.0),
                                            "t2": (0.0, 1.0, -1.0)})
        for rule in (rl.RuleId.REGULAR_POINTWISE, rl.RuleId.LIMITING_UNION,
                     rl.RuleId.LIMITING_LIPSCHITZ_VARIANT):
            v = rl.verify_coderivative_inclusion(rule, h, [0.0], [1.0],
                                                 two_atoms, tol=1e-9)
            assert v.holds, (rule, v.failed_hypothesis)
            assert v.max_violation <= 1e-9

    def test_one_node_quadratic_equality(self, one_atom):
        # Phi(x) = {x^2} at xbar = 1: both sides are {2 y*}
        h = cd.SmoothSingleValued(
            dim_in=1, dim_out=1,
            fn=lambda n, x: np.array([float(x[0]) ** 2]),
            jac=lambda n, x: np.array([[2 * float(x[0])]]))
        v = rl.verify_coderivative_inclusion(
            rl.RuleId.EQUALITY_CASE, h, [1.0], [1.0], one_atom, tol=1e-10)
        assert v.holds

    def test_single_valued_requires_singletons(self, two_atoms):
        h = cd.AffineImage.interval_affine({"t1": (0.0, 1.0, 0.0),
                                            "t2": (0.0, 1.0, 0.0)})
        v = rl.verify_coderivative_inclusion(
            rl.RuleId.SINGLE_VALUED, h, [0.0], [1.0], two_atoms)
        assert v.verdict == rl.PRECONDITION_FAILED
        assert "singleton" in v.failed_hypothesis

    def test_base_off_graph_is_distinct_state(self, two_atoms):
        h = cd.SmoothSingleValued.linear({"t1": [[1.0]], "t2": [[1.0]]})
        v = rl.verify_coderivative_inclusion(
            rl.RuleId.SINGLE_VALUED, h, [0.0], [5.0], two_atoms)
        assert v.verdict == rl.PRECONDITION_FAILED

    def test_quasi_hypothesis_gates_limiting_union(self, nonatomic_prob):
        v = rl.verify_coderivative_inclusion(
            rl.RuleId.LIMITING_UNION, sqrt_band_handle(), [0.0], [0.5],
            nonatomic_prob, eta=1.5)
        assert v.verdict == rl.PRECONDITION_FAILED
        assert "quasi-Lipschitz" in v.failed_hypothesis

    @pytest.mark.parametrize("seed", range(12))
    def test_random_two_node_battery(self, seed, two_atoms):
        rng = np.random.default_rng(seed)
        params = {}
        for nid in ("t1", "t2"):
            lo = float(rng.uniform(-1.0, 0.0))
            hi = lo + float(rng.uniform(0.2, 1.5))
            c = float(rng.uniform(-2.0, 2.0))
            params[nid] = (lo, hi, c)
        h = cd.AffineImage.interval_affine(params)
        E = rl.instance_interval_model(h, two_atoms)
        lo, hi = E.value_interval(0.0)
        ybar = [float(rng.uniform(lo, hi))]
        for rule in (rl.RuleId.REGULAR_POINTWISE, rl.RuleId.LIMITING_UNION):
            v = rl.verify_coderivative_inclusion(rule, h, [0.0], ybar,
                                                 two_atoms, tol=1e-6)
            assert v.holds, (seed, rule, v.verdict, v.failed_hypothesis)

    def test_tol_monotonicity(self, two_atoms):
        h = cd.AffineImage.interval_affine({"t1": (0.0, 1.0, 1.0),
                                            "t2": (0.0, 1.0, -1.0)})
        tight = rl.verify_coderivative_inclusion(
            rl.RuleId.REGULAR_POINTWISE, h, [0.0], [1.0], two_atoms,
            tol=1e-9)
        loose = rl.verify_coderivative_inclusion(
            rl.RuleId.REGULAR_POINTWISE, h, [0.0], [1.0], two_atoms,
            tol=1e-2)
        assert tight.holds
        assert loose.holds
        assert loose.max_violation <= loose.tolerance


class TestSubdifferentialLeibniz:
    def test_abs_on_two_atoms_equality(self, two_atoms):
        phi = {"t1": abs_scalar_handle(), "t2": abs_scalar_handle()}
        v = rl.verify_subdifferential_leibniz(phi, [0.0], two_atoms,
                                              tol=1e-2, mode="equality")
        assert v.holds
        assert v.details["hausdorff"] <= 1e-2
        assert sorted(np.ravel(v.details["rhs_vertices"])) == [-2.0, 2.0]

    def test_smooth_both_sides_gradient_sum(self, two_atoms):
        g1 = ScalarFunctionHandle(
            dim=1, evaluate=lambda x: 2.0 * float(x[0]),
            gradient=lambda x: np.array([2.0]))
        g2 = ScalarFunctionHandle(
            dim=1, evaluate=lambda x: -0.5 * float(x[0]),
            gradient=lambda x: np.array([-0.5]))
        v = rl.verify_subdifferential_leibniz({"t1": g1, "t2": g2}, [0.0],
                                              two_atoms, tol=1e-2,
                                              mode="equality")
        assert v.holds
        assert np.allclose(np.ravel(v.details["rhs_vertices"]), 1.5)

    def test_relu_pair_equality(self, two_atoms):
        # max(x,0) + max(-x,0): RHS = [0,1] + [-1,0] = [-1,1] = LHS
        phi = {"t1": piece_scalar_handle([[1.0], [0.0]], [0.0, 0.0]),
               "t2": piece_scalar_handle([[-1.0], [0.0]], [0.0, 0.0])}
        v = rl.verify_subdifferential_leibniz(phi, [0.0], two_atoms,
                                              tol=1e-2, mode="equality")
        assert v.holds
        assert sorted(np.ravel(v.details["rhs_vertices"])) == [-1.0, 1.0]

    def test_refinement_halves_gap(self, two_atoms):
        # in 1-D the direction grid {-1, +1} is already exhaustive, so the
        # grid-approximation gap is the declared row slack; halving the
        # slack halves the gap
        phi = {"t1": abs_scalar_handle(), "t2": abs_scalar_handle()}
        coarse = rl.verify_subdifferential_leibniz(
            phi, [0.0], two_atoms, tol=1e-2, mode="equality",
            row_slack=1e-4)
        fine = rl.verify_subdifferential_leibniz(
            phi, [0.0], two_atoms, tol=1e-2, mode="equality",
            row_slack=5e-5)
        assert fine.details["hausdorff"] <= \
            coarse.details["hausdorff"] / 2 + 1e-9


class TestCompositeRules:
    def test_le_system_two_atoms(self, two_atoms):
        h = le_constraint_handle()
        v = rl.verify_composite_rule(h, [0.0], [-2.0], two_atoms,
                                     tol=1e-6, specialized=True)
        assert v.holds, (v.verdict, v.failed_hypothesis)
        assert "slater_kappa" in v.details

    def test_amenable_mode(self, two_atoms):
        h = le_constraint_handle()
        v = rl.verify_composite_rule(h, [0.0], [-2.0], two_atoms,
                                     tol=1e-6, specialized=False)
        assert v.holds

    def test_slater_violation_named(self, two_atoms):
        bad = cd.ConstraintComposite(
            dim_in=1, dim_mid=1, dim_out=1,
            inner=lambda n, x: np.array([float(x[0])]),
            inner_jac=lambda n, x: np.array([[1.0]]),
            constraints=lambda n: [
                (lambda z, y: float(y[0] ** 2),
                 lambda z, y: np.array([0.0, 2 * y[0]]))],
            value_window=Polytope([[-2.0], [2.0]]))
        v = rl.verify_composite_rule(bad, [0.0], [0.0], two_atoms,
                                     specialized=True)
        assert v.verdict == rl.PRECONDITION_FAILED
        assert "Slater" in v.failed_hypothesis

    @pytest.mark.parametrize("seed", range(6))
    def test_full_rank_random_instances(self, seed, two_atoms):
        rng = np.random.default_rng(seed)
        slope = {nid: float(rng.uniform(0.5, 2.0)) for nid in ("t1", "t2")}
        a = {nid: float(rng.uniform(0.5, 1.5)) for nid in ("t1", "t2")}
        b = {nid: float(rng.uniform(0.5, 1.5)) for nid in ("t1", "t2")}

        def constraints(nid):
            return [(lambda z, y, A=a[nid], B=b[nid]:
                     float(y[0] - A * z[0] - B),
                     lambda z, y, A=a[nid]: np.array([-A, 1.0]))]

        h = cd.ConstraintComposite(
            dim_in=1, dim_mid=1, dim_out=1,
            inner=lambda n, x: np.array([slope[n] * float(x[0])]),
            inner_jac=lambda n, x: np.array([[slope[n]]]),
            constraints=constraints,
            value_window=Polytope([[-4.0], [4.0]]))
        ybar = [-4.0]  # well inside both windowed values
        v = rl.verify_composite_rule(h, [0.0], ybar, two_atoms,
                                     tol=1e-6, specialized=True)
        assert v.holds, (seed, v.verdict, v.failed_hypothesis)


class TestEimCertificate:
    def test_smooth_instance_holds(self, two_atoms):
        h = cd.SmoothSingleValued.linear({"t1": [[2.0]], "t2": [[3.0]]})
        rep = rl.verify_eim_lipschitz_certificate(h, [0.0], [0.0],
                                                  two_atoms)
        assert rep.verdict == "holds-on-grid"
        assert rep.modulus["zero_slice_norm"] <= 1e-9

    def test_constant_band_holds_zero_modulus(self, two_atoms):
        h = cd.AffineImage.interval_affine({"t1": (0.0, 1.0, 0.0),
                                            "t2": (0.0, 1.0, 0.0)})
        rep = rl.verify_eim_lipschitz_certificate(h, [0.0], [1.0],
                                                  two_atoms)
        assert rep.verdict == "holds-on-grid"
        assert rep.modulus.get("cross_modulus", 0.0) <= 1e-9

    def test_vertical_node_certificate_inconclusive(self, one_atom):
        # the subgradient staircase has a vertical segment: the y*=0
        # integral set is a whole line, so the certificate cannot assert;
        # the deterministic cross-check on the aggregate graph still holds
        h = abs_subgradient_handle()
        rep = rl.verify_eim_lipschitz_certificate(h, [0.5], [1.0],
                                                  one_atom, eta=0.1)
        assert rep.verdict in ("certificate-inconclusive", "holds-on-grid")


class TestSecondOrder:
    def test_abs_single_atom_interior(self, one_atom):
        h = abs_subgradient_handle()
        v = rl.verify_second_order(rl.RuleId.SECOND_ORDER_BASIC, h, [0.0],
                                   [0.3], one_atom, tol=1e-6)
        assert v.holds, (v.verdict, v.failed_hypothesis)

    def test_smooth_quadratic_hessian_rule(self, two_atoms):
        h = {"t1": cd.SmoothSingleValued.linear({"t1": [[2.0]]}),
             "t2": cd.SmoothSingleValued.linear({"t2": [[3.0]]})}
        for rule in (rl.RuleId.SECOND_ORDER_COMBINED,
                     rl.RuleId.SECOND_ORDER_BASIC):
            v = rl.verify_second_order(rule, h, [0.0], [0.0], two_atoms,
                                       tol=1e-8)
            assert v.holds

    def test_abs_plus_quadratic_inclusion(self, two_atoms):
        h = {"t1": abs_subgradient_handle(),
             "t2": cd.SmoothSingleValued.linear({"t2": [[1.0]]})}
        v = rl.verify_second_order(rl.RuleId.SECOND_ORDER_BASIC, h, [0.0],
                                   [0.3], two_atoms, tol=1e-6)
        assert v.holds, (v.verdict, v.failed_hypothesis)
        assert v.max_violation <= 1e-6

    def test_max_function_corollary_route(self, two_atoms):
        h = abs_subgradient_handle()
        v = rl.verify_second_order(rl.RuleId.SECOND_ORDER_MAX, h, [0.0],
                                   [0.5], two_atoms, tol=1e-6)
        assert v.holds, (v.verdict, v.failed_hypothesis)


class TestSequentialWitness:
    def test_smooth_stationary_tuple(self, two_atoms):
        h = cd.SmoothSingleValued.linear({"t1": [[2.0]], "t2": [[3.0]]})
        sel = selection_mapping(h, [0.0], [0.0], two_atoms)
        res = rl.sequential_witness_search(h, [0.0], [5.0], [1.0],
                                           two_atoms, sel)
        assert res["found_all_levels"]
        for level in res["levels"]:
            assert level["base_drift"] == 0.0

    def test_kink_with_interior_target(self, one_atom):
        h = abs_subgradient_handle()
        sel = SelectionFunction(per_node={"t1": np.array([0.3])},
                                aggregate=np.array([0.3]))
        res = rl.sequential_witness_search(h, [0.0], [0.0], [0.0],
                                           one_atom, sel)
        assert res["found_all_levels"]

    def test_budget_exhausted_is_not_refutation(self, one_atom):
        # an unreachable target records search-budget exhaustion
        h = cd.SmoothSingleValued.linear({"t1": [[1.0]]})
        sel = selection_mapping(h, [0.0], [0.0], one_atom)
        res = rl.sequential_witness_search(h, [0.0], [100.0], [1.0],
                                           one_atom, sel)
        assert not res["found_all_levels"]
        assert all(lvl.get("status") == "search-budget exhausted"
                   for lvl in res["levels"])


class TestReportAlgebra:
    def test_equality_implies_weaker_rules(self, two_atoms):
        h = cd.SmoothSingleValued.linear({"t1": [[2.0]], "t2": [[3.0]]})
        eq = rl.verify_coderivative_inclusion(
            rl.RuleId.EQUALITY_CASE, h, [0.0], [0.0], two_atoms, tol=1e-10)
        assert eq.holds
        for rule in (rl.RuleId.REGULAR_POINTWISE, rl.RuleId.SINGLE_VALUED):
            v = rl.verify_coderivative_inclusion(rule, h, [0.0], [0.0],
                                                 two_atoms, tol=1e-10)
            assert v.holds

    def test_soundness_recheckable_from_record(self, two_atoms):
        h = cd.AffineImage.interval_affine({"t1": (0.0, 1.0, 1.0),
                                            "t2": (0.0, 1.0, -1.0)})
        v = rl.verify_coderivative_inclusion(
            rl.RuleId.REGULAR_POINTWISE, h, [0.0], [1.0], two_atoms,
            tol=1e-9)
        assert v.holds
        for _, _, dist in v.lhs_samples:
            assert dist <= v.tolerance
