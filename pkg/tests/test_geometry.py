import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial import ConvexHull

from eimkit.geometry import (
    EMPTY, ConvexCone, DimensionMismatchError, Polyhedron, PolyhedralUnion,
    Polytope, cone_from_halfspaces, contains, convex_hull,
    distance_point_set, halfspaces_of_vrep, hausdorff_distance,
    intersect_cones, polyhedron_generators, polyhedron_to_polytope,
    polytope_halfspaces, weighted_minkowski,
)


def brute_force_minkowski_vertices(blocks):
    """Independent oracle: all vertex-tuple sums, hulled by scipy."""
    acc = blocks[0]
    for V in blocks[1:]:
        acc = (acc[:, None, :] + V[None, :, :]).reshape(-1, V.shape[1])
    if acc.shape[1] == 1:
        return np.array([[acc.min()], [acc.max()]])
    hull = ConvexHull(acc)
    return acc[hull.vertices]


def grid_hausdorff(A, B, n=220):
    """Independent oracle: brute max-min over dense point clouds of both
    sets (grid capture within half a spacing, plus the vertex lists)."""
    lo = np.minimum(A.vertices.min(axis=0), B.vertices.min(axis=0)) - 0.1
    hi = np.maximum(A.vertices.max(axis=0), B.vertices.max(axis=0)) + 0.1
    axes = [np.linspace(lo[j], hi[j], n) for j in range(A.dim)]
    mesh = np.stack([m.ravel() for m in np.meshgrid(*axes)], axis=1)
    clouds = []
    for S in (A, B):
        mask = np.array([S.distance(p) <= 1e-9 for p in mesh])
        clouds.append(np.vstack([mesh[mask], S.vertices]))
    PA, PB = clouds
    e1 = max(np.min(np.linalg.norm(PB - p, axis=1)) for p in PA)
    e2 = max(np.min(np.linalg.norm(PA - p, axis=1)) for p in PB)
    return max(e1, e2)


def rand_polytope_2d(rng, k=6, scale=1.0):
    return convex_hull(rng.normal(size=(k, 2)) * scale)


class TestWeightedMinkowski:
    def test_interval_sum(self):
        S = weighted_minkowski([(1.0, Polytope.interval(0, 1)),
                                (1.0, Polytope.interval(2, 3))])
        assert sorted(S.vertices.ravel()) == [2.0, 4.0]

    def test_scaled_singleton(self):
        S = weighted_minkowski([(2.0, Polytope.singleton([0.0, 0.0]))])
        assert np.allclose(S.vertices, [[0.0, 0.0]])

    def test_two_unit_squares_vs_bruteforce_oracle(self):
        sq = Polytope([[0, 0], [1, 0], [0, 1], [1, 1]])
        S = weighted_minkowski([(1.0, sq), (1.0, sq)])
        ref = brute_force_minkowski_vertices([sq.vertices, sq.vertices])
        got = sorted(map(tuple, np.round(S.vertices, 10)))
        want = sorted(map(tuple, np.round(ref, 10)))
        assert got == want

    @pytest.mark.parametrize("seed", range(6))
    def test_random_sums_vs_bruteforce_oracle(self, seed):
        rng = np.random.default_rng(seed)
        A = rand_polytope_2d(rng)
        B = rand_polytope_2d(rng)
        S = weighted_minkowski([(1.5, A), (0.5, B)])
        ref = brute_force_minkowski_vertices([1.5 * A.vertices,
                                              0.5 * B.vertices])
        assert S.vertices.shape[0] == ref.shape[0]
        for v in ref:
            assert min(np.linalg.norm(S.vertices - v, axis=1)) < 1e-9

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        terms = [(float(rng.uniform(0.5, 2)), rand_polytope_2d(rng))
                 for _ in range(3)]
        base = weighted_minkowski(terms)
        for perm in itertools.permutations(terms):
            S = weighted_minkowski(list(perm))
            assert hausdorff_distance(S, base) <= 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            weighted_minkowski([(1.0, Polytope.interval(0, 1)),
                                (1.0, Polytope.singleton([0.0, 0.0]))])


class TestHausdorff:
    def test_interval_excess(self):
        assert hausdorff_distance(Polytope.interval(0, 1),
                                  Polytope.interval(0, 2)) == 1.0

    def test_identity(self):
        P = Polytope([[0, 0], [1, 0], [0, 1]])
        assert hausdorff_distance(P, P) == 0.0

    def test_square_vs_origin_exact_and_grid_oracle(self):
        sq = Polytope([[0, 0], [1, 0], [0, 1], [1, 1]])
        pt = Polytope.singleton([0.0, 0.0])
        exact = hausdorff_distance(sq, pt)
        assert exact == pytest.approx(np.sqrt(2), abs=1e-12)
        assert exact == pytest.approx(grid_hausdorff(sq, pt), abs=1e-3)

    def test_empty_conventions(self):
        assert hausdorff_distance(EMPTY, EMPTY) == 0.0
        assert hausdorff_distance(Polytope.interval(0, 1), EMPTY) == np.inf

    @pytest.mark.parametrize("seed", range(8))
    def test_triangle_inequality(self, seed):
        rng = np.random.default_rng(seed)
        A, B, C = (rand_polytope_2d(rng) for _ in range(3))
        hab = hausdorff_distance(A, B)
        hbc = hausdorff_distance(B, C)
        hac = hausdorff_distance(A, C)
        assert hac <= hab + hbc + 1e-9

    @pytest.mark.parametrize("seed", range(8))
    def test_zero_iff_mutual_containment(self, seed):
        rng = np.random.default_rng(seed)
        A = rand_polytope_2d(rng)
        B = Polytope(A.vertices[rng.permutation(A.vertices.shape[0])])
        assert hausdorff_distance(A, B) <= 1e-9
        C = A.translate([1e-3, 0.0])
        assert hausdorff_distance(A, C) > 1e-9


class TestDistanceAndContains:
    def test_membership_zero(self):
        sq = Polytope([[0, 0], [1, 0], [0, 1], [1, 1]])
        assert distance_point_set([0.5, 0.5], sq) == 0.0

    def test_interval(self):
        assert distance_point_set([2.0], Polytope.interval(0, 1)) == 1.0

    def test_halfplane(self):
        H = Polyhedron([[1.0, 0.0]], [0.0])
        assert distance_point_set([1.0, 1.0], H) == pytest.approx(1.0)

    def test_empty_inf(self):
        assert distance_point_set([0.0], EMPTY) == np.inf

    def test_contains_examples(self):
        assert contains(Polytope.interval(0, 1), [0.5], 0.0)
        assert not contains(ConvexCone([[1.0, 0.0]]), [0.0, 1.0], 1e-9)
        U = PolyhedralUnion([Polytope.interval(0, 1),
                             Polytope.interval(2, 3)])
        assert contains(U, [2.0000005], 1e-6)

    @pytest.mark.parametrize("seed", range(10))
    def test_contains_agrees_with_distance(self, seed):
        rng = np.random.default_rng(seed)
        P = rand_polytope_2d(rng)
        x = rng.normal(size=2)
        assert contains(P, x, 0.0) == (distance_point_set(x, P) <= 1e-12)


class TestConvexHull:
    def test_two_points_1d(self):
        h = convex_hull([[1.0], [-1.0]])
        assert sorted(h.vertices.ravel()) == [-1.0, 1.0]

    def test_singleton(self):
        h = convex_hull([[2.0, 3.0]])
        assert np.allclose(h.vertices, [[2.0, 3.0]])

    def test_redundant_point_removed(self):
        h = convex_hull([[0, 0], [1, 0], [0, 1], [1, 1], [0.5, 0.5]])
        assert h.vertices.shape[0] == 4

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_scipy_oracle(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(12, 2))
        got = convex_hull(pts)
        ref = pts[ConvexHull(pts).vertices]
        assert got.vertices.shape[0] == ref.shape[0]
        for v in ref:
            assert got.distance(v) < 1e-10

    def test_degenerate_collinear(self):
        h = convex_hull([[0.0, 0.0], [1.0, 1.0], [0.5, 0.5], [2.0, 2.0]])
        assert h.vertices.shape[0] == 2

    def test_3d_hull_with_interior_point(self):
        cube = list(itertools.product([0.0, 1.0], repeat=3))
        pts = cube + [[0.5, 0.5, 0.5]]
        h = convex_hull(pts)
        assert h.vertices.shape[0] == 8


class TestRepresentationConversion:
    def test_square_round_trip(self):
        sq = Polytope([[0, 0], [2, 0], [0, 2], [2, 2]])
        H = polytope_halfspaces(sq)
        back = polyhedron_to_polytope(H)
        assert hausdorff_distance(sq, back) <= 1e-9

    def test_degenerate_segment_halfspaces(self):
        seg = Polytope([[0.0, 0.0], [1.0, 1.0]])
        H = polytope_halfspaces(seg)
        assert H.contains([0.5, 0.5], 1e-10)
        assert not H.contains([0.5, 0.6], 1e-6)

    def test_unbounded_generators(self):
        P = Polyhedron([[1.0, 0.0]], [0.0])  # x <= 0 halfplane
        V, R, L = polyhedron_generators(P)
        assert L.shape[0] == 1  # the y-axis line
        assert R.shape[0] == 1  # the -x ray

    def test_empty_to_polytope(self):
        P = Polyhedron([[1.0], [-1.0]], [0.0, -1.0])
        assert polyhedron_to_polytope(P) is EMPTY

    def test_vrep_with_rays(self):
        P = halfspaces_of_vrep(np.array([[0.0, 0.0]]),
                               rays=np.array([[1.0, 0.0]]),
                               lineality=np.array([[0.0, 1.0]]))
        assert P.contains([5.0, -7.0])
        assert not P.contains([-0.1, 0.0], 1e-9)


class TestCones:
    def test_halfplane_cone_from_rows(self):
        C = cone_from_halfspaces(np.array([[1.0, 0.0]]), None, 2)
        assert C.contains([-1.0, 5.0], 1e-9)
        assert not C.contains([1.0, 0.0], 1e-9)

    def test_orthant_polar(self):
        C = ConvexCone([[1.0, 0.0], [0.0, 1.0]])
        P = C.polar()
        assert P.contains([-1.0, -1.0], 1e-9)
        assert not P.contains([1.0, 0.0], 1e-6)

    def test_intersection(self):
        C1 = cone_from_halfspaces(np.array([[0.0, -1.0]]), None, 2)  # y>=0
        C2 = cone_from_halfspaces(np.array([[-1.0, 0.0]]), None, 2)  # x>=0
        C = intersect_cones([C1, C2])
        assert C.contains([1.0, 1.0], 1e-9)
        assert not C.contains([-0.5, 1.0], 1e-6)

    def test_antipodal_generators_become_lineality(self):
        C = ConvexCone([[1.0, 0.0], [-1.0, 0.0]])
        assert C.lineality.shape[0] == 1
        assert C.generators.shape[0] == 0

    def test_generator_dedup_angular(self):
        C = ConvexCone([[1.0, 0.0], [1.0, 1e-10]])
        assert C.generators.shape[0] == 1

    @given(st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_cone_membership_scale_invariant(self, seed):
        rng = np.random.default_rng(seed)
        C = ConvexCone(rng.normal(size=(3, 2)))
        if C.is_trivial:
            return
        g = (C.generators[0] if C.generators.shape[0]
             else C.lineality[0])
        for lam in (0.5, 2.0, 10.0):
            assert C.contains(lam * g, 1e-9)
