"""Exact coderivative computation for the four structured integrand
classes, plus the constraint-system qualification checks.

A coderivative slice at direction y* is the set {x* | (x*, -y*) in N},
with N the regular or limiting normal cone of the graph at the base point.
For the structured classes the slice is an exact polyhedral union; for
anything else the sampling oracle is the fallback.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import (
    EMPTY, ConvexCone, GeometryError, Polyhedron, PolyhedralUnion, Polytope,
    cone_from_halfspaces, convex_hull, linear_image_polyhedron,
    polyhedron_generators, polyhedron_to_polytope, slice_cone_at,
)
from .measure import NodeScalarField
from .normal_cones import (
    DEFAULT_ACTIVE_TOL, PointNotInSetError, UnsupportedDimensionError,
    limiting_normal_cone_union, regular_normal_cone_union,
)
from .pwgraphs import IntervalPWA, MonotonePWA

REGULAR = "regular"
LIMITING = "limiting"


class QualificationError(ValueError):
    """A coderivative formula was requested outside its qualification; the
    result would be unjustified, so this is an explicit outcome, never an
    empty set."""

    def __init__(self, name, detail=""):
        self.name = name
        super().__init__(f"qualification violated: {name}"
                         + (f" ({detail})" if detail else ""))


class InfeasiblePointError(ValueError):
    pass


# ---------------------------------------------------------------------------
# structured random map handles


@dataclass
class SmoothSingleValued:
    """Phi_t(x) = {g_t(x)} with g_t smooth; jac returns the (m x n)
    Jacobian.  ``affine`` optionally declares g_t(x) = M x + c exactly."""

    dim_in: int
    dim_out: int
    fn: Callable
    jac: Callable
    affine: Optional[Callable] = None  # node -> (M, c) or None

    @classmethod
    def linear(cls, mats):
        """g_t(x) = M_t x from a dict node -> matrix."""
        mats = {k: np.atleast_2d(np.asarray(v, dtype=float))
                for k, v in mats.items()}
        some = next(iter(mats.values()))

        def fn(node, x):
            return mats[node] @ x

        def jac(node, x):
            return mats[node]

        return cls(dim_in=some.shape[1], dim_out=some.shape[0], fn=fn,
                   jac=jac,
                   affine=lambda node: (mats[node],
                                        np.zeros(mats[node].shape[0])))


@dataclass
class AffineImage:
    """Phi_t(x) = A(t,x) F(t) + b(t,x) with F(t) a polytope.

    Coderivative slices require A constant in x (``a_constant``); the value
    path accepts a fully varying A, which is all the Hausdorff-ratio
    Lipschitz checks need.
    """

    dim_in: int
    dim_out: int
    base: Callable          # node -> Polytope in R^p
    amat: Callable          # (node, x) -> (m x p)
    offset: Callable        # (node, x) -> R^m
    offset_jac: Optional[Callable] = None  # (node, x) -> (m x n)
    a_constant: bool = True

    @classmethod
    def interval_affine(cls, params):
        """1-D family Phi_t(x) = [lo_t, hi_t] + c_t * x from a dict
        node -> (lo, hi, c)."""
        data = {k: (float(lo), float(hi), float(c))
                for k, (lo, hi, c) in params.items()}

        def base(node):
            lo, hi, _ = data[node]
            return Polytope.interval(lo, hi)

        return cls(
            dim_in=1, dim_out=1,
            base=base,
            amat=lambda node, x: np.eye(1),
            offset=lambda node, x: np.array([data[node][2] * float(x[0])]),
            offset_jac=lambda node, x: np.array([[data[node][2]]]),
            a_constant=True)

    def interval_pwa(self, node):
        """Exact 1-D interval model when the data is affine in x."""
        if self.dim_in != 1 or self.dim_out != 1 or not self.a_constant:
            return None
        if self.offset_jac is None:
            return None
        F = self.base(node)
        A = np.atleast_2d(self.amat(node, np.zeros(1)))
        lo = float(np.min(F.vertices @ A.T))
        hi = float(np.max(F.vertices @ A.T))
        b0 = float(np.asarray(self.offset(node, np.zeros(1))).ravel()[0])
        c = float(np.atleast_2d(self.offset_jac(node, np.zeros(1)))[0, 0])
        # only exact when the offset really is affine; callers that supply a
        # nonlinear offset must leave offset_jac None or avoid this path
        return IntervalPWA.affine_band(lo + b0, hi + b0, c)


@dataclass
class ConstraintComposite:
    """Phi_t(x) = F_t(g_t(x)) with F_t(z) = {y | phi^i_t(z, y) <= 0}.

    ``constraints`` maps a node to a list of (phi, grad) pairs; phi takes
    (z, y) and grad returns the stacked gradient in R^{p+m}.
    ``value_window`` compactifies the value set for Aumann integration.
    """

    dim_in: int
    dim_mid: int
    dim_out: int
    inner: Callable       # (node, x) -> z
    inner_jac: Callable   # (node, x) -> (p x n)
    constraints: Callable  # node -> [(phi, grad), ...]
    value_window: Optional[Polytope] = None
    sample_count: int = 256


@dataclass
class MaxAffineSubgradient:
    """Phi_t(x) = subdifferential of x -> max_i(a_i(t) x + b_i(t)); the
    subgradient map of a max-affine convex function."""

    dim_in: int
    pieces: Callable  # node -> (slopes (k x n), intercepts (k,))

    @property
    def dim_out(self):
        return self.dim_in

    def monotone_pwa(self, node):
        if self.dim_in != 1:
            raise UnsupportedDimensionError(
                "exact subgradient graphs are 1-D only")
        slopes, intercepts = self.pieces(node)
        return MonotonePWA.from_max_affine(np.asarray(slopes).ravel(),
                                           intercepts)


# ---------------------------------------------------------------------------
# values


def value_polytope(handle, node, x, active_tol=DEFAULT_ACTIVE_TOL):
    """Value Phi_t(x) as a compact polytope."""
    x = np.asarray(x, dtype=float).ravel()
    if isinstance(handle, SmoothSingleValued):
        return Polytope.singleton(np.asarray(handle.fn(node, x)).ravel())
    if isinstance(handle, AffineImage):
        F = handle.base(node)
        A = np.atleast_2d(handle.amat(node, x))
        b = np.asarray(handle.offset(node, x), dtype=float).ravel()
        return convex_hull(F.vertices @ A.T + b)
    if isinstance(handle, MaxAffineSubgradient):
        slopes, intercepts = handle.pieces(node)
        slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
        intercepts = np.asarray(intercepts, dtype=float).ravel()
        vals = slopes @ x + intercepts
        top = np.max(vals)
        act = slopes[vals >= top - active_tol]
        return convex_hull(act)
    if isinstance(handle, ConstraintComposite):
        return _constraint_value_polytope(handle, node, x)
    raise TypeError(f"unknown handle class {type(handle)!r}")


class IntegrableBoundednessError(ValueError):
    pass


def _constraint_value_polytope(handle, node, x):
    z = np.asarray(handle.inner(node, x), dtype=float).ravel()
    cons = handle.constraints(node)
    rows = _affine_rows_in_y(cons, z, handle.dim_out)
    if rows is not None:
        A, b = rows
        P = Polyhedron(A, b)
        if handle.value_window is not None:
            from .geometry import polytope_halfspaces
            P = P.intersect(polytope_halfspaces(handle.value_window))
        try:
            poly = polyhedron_to_polytope(P)
        except GeometryError as exc:
            raise IntegrableBoundednessError(
                f"node {node!r}: unbounded value set; declare a "
                f"value_window") from exc
        if poly is EMPTY:
            raise InfeasiblePointError(f"node {node!r}: empty value set")
        return poly
    # general smooth constraints: sample the window and hull the feasible set
    if handle.value_window is None:
        raise IntegrableBoundednessError(
            f"node {node!r}: nonpolyhedral values need a value_window")
    W = handle.value_window
    grid = _window_grid(W, handle.sample_count)
    feas = []
    for y in grid:
        if all(phi(z, y) <= 1e-9 for phi, _ in cons):
            feas.append(y)
    if not feas:
        raise InfeasiblePointError(f"node {node!r}: empty sampled value set")
    return convex_hull(np.asarray(feas))


def _affine_rows_in_y(cons, z, m):
    """Detect phi^i affine in y at fixed z and return rows (A, b) of
    {y | A y <= b}; None when any constraint is detectably nonlinear."""
    A, b = [], []
    probe0 = np.zeros(m)
    for phi, grad in cons:
        g0 = np.asarray(grad(z, probe0), dtype=float).ravel()
        gy = g0[-m:]
        c0 = phi(z, probe0)
        # affine check at a second probe
        probe1 = np.ones(m)
        pred = c0 + gy @ (probe1 - probe0)
        if abs(phi(z, probe1) - pred) > 1e-9 * (1 + abs(pred)):
            return None
        g1 = np.asarray(grad(z, probe1), dtype=float).ravel()[-m:]
        if np.max(np.abs(g1 - gy)) > 1e-9:
            return None
        A.append(gy)
        b.append(-c0 + gy @ probe0)
    return np.asarray(A), np.asarray(b)


def _window_grid(window, count):
    V = window.vertices
    lo = V.min(axis=0)
    hi = V.max(axis=0)
    d = V.shape[1]
    per_axis = max(2, int(round(count ** (1.0 / d))))
    axes = [np.linspace(lo[j], hi[j], per_axis) for j in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return [p for p in pts if window.contains(p, 1e-9)]


# ---------------------------------------------------------------------------
# coderivative slices


@dataclass
class CoderivativeSlice:
    """The set D*Phi(x, y)(y*) for a fixed direction y*."""

    kind: str
    base_x: np.ndarray
    base_y: np.ndarray
    direction: np.ndarray
    value: PolyhedralUnion
    exact: bool = True
    notes: tuple = ()

    def pieces(self):
        return self.value.pieces

    def nonempty_pieces(self):
        out = []
        for p in self.pieces():
            if isinstance(p, Polyhedron) and p.is_empty:
                continue
            out.append(p)
        return out

    @property
    def is_empty(self):
        return not self.nonempty_pieces()

    def contains(self, xstar, tol=1e-9):
        return any(p.contains(np.asarray(xstar, dtype=float).ravel(),
                              tol) for p in self.nonempty_pieces())

    def max_norm(self):
        """sup ||x*|| over the slice; +inf when any piece is unbounded."""
        best = 0.0
        pieces = self.nonempty_pieces()
        if not pieces:
            return 0.0
        for p in pieces:
            if isinstance(p, Polytope):
                best = max(best, p.radius())
                continue
            gen = polyhedron_generators(p)
            if gen is None:
                continue
            V, R, L = gen
            if R.shape[0] or L.shape[0]:
                return np.inf
            best = max(best, float(np.max(np.linalg.norm(V, axis=1))))
        return best

    def sample_points(self, ray_scales=(1.0, 10.0)):
        pts = []
        for p in self.nonempty_pieces():
            if isinstance(p, Polytope):
                pts.append(p.sample_points())
                continue
            gen = polyhedron_generators(p)
            if gen is None:
                continue
            V, R, L = gen
            pts.append(V)
            for s in ray_scales:
                for v in V[:1]:
                    for r in R:
                        pts.append((v + s * r)[None, :])
                    for u in L:
                        pts.append((v + s * u)[None, :])
                        pts.append((v - s * u)[None, :])
        if not pts:
            return np.zeros((0, self.base_x.size))
        return np.vstack(pts)


def singleton_slice(kind, x, y, ystar, point):
    val = PolyhedralUnion([Polytope.singleton(point)])
    return CoderivativeSlice(kind=kind, base_x=np.asarray(x, dtype=float),
                             base_y=np.asarray(y, dtype=float),
                             direction=np.asarray(ystar, dtype=float),
                             value=val)


def empty_slice(kind, x, y, ystar, dim):
    val = PolyhedralUnion([Polyhedron(np.zeros((1, dim)), np.array([-1.0]))])
    return CoderivativeSlice(kind=kind, base_x=np.asarray(x, dtype=float),
                             base_y=np.asarray(y, dtype=float),
                             direction=np.asarray(ystar, dtype=float),
                             value=val)


def coderivative_smooth(handle, node, xbar, ystar):
    """Adjoint-Jacobian coderivative of a smooth single-valued map:
    the singleton {J(x)^T y*}; regular and limiting coincide."""
    xbar = np.asarray(xbar, dtype=float).ravel()
    ystar = np.asarray(ystar, dtype=float).ravel()
    J = np.atleast_2d(np.asarray(handle.jac(node, xbar), dtype=float))
    return J.T @ ystar


def coderivative_polyhedral_graph(graph, xbar, ybar, ystar, kind=LIMITING,
                                  active_tol=DEFAULT_ACTIVE_TOL):
    """Slice of the normal cone of a polyhedral-union graph in R^{n+m}.

    Exact for polyhedral unions with n+m <= 3; larger dimensions must go
    through the sampling oracle.
    """
    xbar = np.asarray(xbar, dtype=float).ravel()
    ybar = np.asarray(ybar, dtype=float).ravel()
    ystar = np.asarray(ystar, dtype=float).ravel()
    point = np.concatenate([xbar, ybar])
    if point.size > 3:
        raise UnsupportedDimensionError(
            "exact graph coderivatives need n+m <= 3")
    if kind == REGULAR:
        cone = regular_normal_cone_union(graph, point, active_tol)
        cones = [cone]
    else:
        cones = limiting_normal_cone_union(graph, point, active_tol).pieces
    slices = [slice_cone_at(c, ystar, xbar.size) for c in cones]
    return CoderivativeSlice(kind=kind, base_x=xbar, base_y=ybar,
                             direction=ystar,
                             value=PolyhedralUnion(slices))


@dataclass
class ActiveIndexSet:
    indices: tuple
    residuals: dict


def active_index_set(cons, z, y, active_tol=DEFAULT_ACTIVE_TOL):
    residuals = {}
    idx = []
    for i, (phi, _) in enumerate(cons):
        r = float(phi(z, y))
        residuals[i] = r
        if r > active_tol:
            raise InfeasiblePointError(
                f"constraint {i} infeasible at the base point (residual "
                f"{r:.3e})")
        if abs(r) <= active_tol:
            idx.append(i)
    return ActiveIndexSet(indices=tuple(idx), residuals=residuals)


def coderivative_constraint_system(cons, zbar, ybar, ystar,
                                   active_tol=DEFAULT_ACTIVE_TOL,
                                   kind=LIMITING):
    """Coderivative slice of z -> {y | phi^i(z,y) <= 0} at (zbar, ybar):

        {z* | (z*, -y*) = sum_{i active} lambda_i grad phi^i,  lambda >= 0}

    valid under the Slater condition, which the caller must have checked
    (see :func:`check_slater`).  Returns (slice, active_index_set).
    """
    zbar = np.asarray(zbar, dtype=float).ravel()
    ybar = np.asarray(ybar, dtype=float).ravel()
    ystar = np.asarray(ystar, dtype=float).ravel()
    act = active_index_set(cons, zbar, ybar, active_tol)
    p = zbar.size
    grads = [np.asarray(cons[i][1](zbar, ybar), dtype=float).ravel()
             for i in act.indices]
    if grads:
        cone = ConvexCone(np.asarray(grads), dim=p + ybar.size)
    else:
        cone = ConvexCone.trivial(p + ybar.size)
    poly = slice_cone_at(cone, ystar, p)
    sl = CoderivativeSlice(kind=kind, base_x=zbar, base_y=ybar,
                           direction=ystar,
                           value=PolyhedralUnion([poly]))
    return sl, act


def chain_rule_coderivative(f_slice, inner_jac, xbar=None):
    """Image of an outer-map coderivative slice under the adjoint inner
    Jacobian: D*(F o g)(y*) = J^T D*F(y*) under the amenability
    qualification D*F(0) inter Ker J^T = {0}."""
    J = np.atleast_2d(np.asarray(inner_jac, dtype=float))
    _check_amenability_kernel(f_slice, J)
    images = []
    for piece in f_slice.pieces():
        if isinstance(piece, Polytope):
            images.append(convex_hull(piece.vertices @ J))
            continue
        if piece.is_empty:
            images.append(piece_empty(J.shape[1]))
            continue
        images.append(linear_image_polyhedron(piece, J.T))
    return CoderivativeSlice(kind=f_slice.kind,
                             base_x=(np.asarray(xbar, dtype=float)
                                     if xbar is not None else f_slice.base_x),
                             base_y=f_slice.base_y,
                             direction=f_slice.direction,
                             value=PolyhedralUnion(images),
                             exact=f_slice.exact)


def piece_empty(dim):
    return Polyhedron(np.zeros((1, dim)), np.array([-1.0]))


def _check_amenability_kernel(f_slice, J):
    """Amenability qualification at the slice's base point: the y*=0 slice
    must meet Ker J^T only at 0."""
    zero = np.zeros_like(f_slice.direction)
    # rebuild the zero slice from the same cone data: the pieces of the
    # slice at y* are polyhedra A z* <= H_y y*; at y*=0 the offsets vanish,
    # so reuse rows with b=0.
    for piece in f_slice.pieces():
        if isinstance(piece, Polytope):
            continue
        A = piece.A
        cone0 = cone_from_halfspaces(A, J.T, A.shape[1])
        if not cone0.is_trivial:
            witness = (cone0.generators.tolist()
                       + cone0.lineality.tolist())
            raise QualificationError(
                "integrable amenability",
                f"nonzero adjoint-kernel direction {witness[0]}")
    _ = zero
    return True


class UnsupportedExactError(ValueError):
    """The handle admits no exact slice formula (use the oracle or a
    secant polyhedral model)."""


def slice_exact(handle, node, x, y, ystar, kind=LIMITING, window=1.0,
                slater_checked=False, active_tol=DEFAULT_ACTIVE_TOL):
    """Exact coderivative slice D*Phi_t(x, y)(y*) for a structured handle."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    ystar = np.asarray(ystar, dtype=float).ravel()
    if isinstance(handle, SmoothSingleValued):
        gval = np.asarray(handle.fn(node, x), dtype=float).ravel()
        if np.linalg.norm(gval - y) > 1e-7 * (1 + np.linalg.norm(y)):
            raise PointNotInSetError("y != g_t(x) for a single-valued map")
        return singleton_slice(kind, x, y, ystar,
                               coderivative_smooth(handle, node, x, ystar))
    if isinstance(handle, AffineImage):
        if not handle.a_constant or handle.offset_jac is None:
            raise UnsupportedExactError(
                "affine-image slices need A constant in x and an offset "
                "Jacobian")
        from .geometry import polytope_halfspaces
        A = np.atleast_2d(handle.amat(node, x))
        F = handle.base(node)
        b = np.asarray(handle.offset(node, x), dtype=float).ravel()
        S0 = convex_hull(F.vertices @ A.T)
        s = y - b
        if S0.distance(s) > 1e-8 * (1 + np.linalg.norm(s)):
            raise PointNotInSetError("y outside the affine-image value")
        if S0.is_singleton:
            normal_cone_contains = True  # the normal cone is all of R^m
        else:
            H = polytope_halfspaces(S0)
            act = H.active_rows(s, active_tol)
            if act:
                cone = ConvexCone(H.A[act], dim=S0.dim)
                normal_cone_contains = cone.contains(-ystar, 1e-9)
            else:
                normal_cone_contains = bool(
                    np.linalg.norm(ystar) <= 1e-12)
        B = np.atleast_2d(handle.offset_jac(node, x))
        if normal_cone_contains:
            return singleton_slice(kind, x, y, ystar, B.T @ ystar)
        return empty_slice(kind, x, y, ystar, handle.dim_in)
    if isinstance(handle, MaxAffineSubgradient):
        pwa = handle.monotone_pwa(node)
        lo = float(x[0]) - window
        hi = float(x[0]) + window
        graph = pwa.graph_union((lo, hi))
        return coderivative_polyhedral_graph(graph, x, y, ystar, kind,
                                             active_tol)
    if isinstance(handle, ConstraintComposite):
        if not slater_checked:
            raise QualificationError(
                "integrable Slater constraint qualification",
                "run check_slater before slicing a constraint composite")
        z = np.asarray(handle.inner(node, x), dtype=float).ravel()
        cons = handle.constraints(node)
        f_slice, _ = coderivative_constraint_system(cons, z, y, ystar,
                                                    active_tol, kind)
        J = np.atleast_2d(np.asarray(handle.inner_jac(node, x), dtype=float))
        return chain_rule_coderivative(f_slice, J, xbar=x)
    raise TypeError(f"unknown handle class {type(handle)!r}")


# ---------------------------------------------------------------------------
# qualification checks


def _covering_simplex(dim, eta):
    """Vertices of the regular simplex with inradius eta (the tightest
    simplex around eta*B): circumradius dim*eta, centered at 0."""
    if dim == 1:
        V = np.array([[eta], [-eta]])
    else:
        # regular unit directions: centered standard basis of R^{dim+1}
        E = np.eye(dim + 1)
        E = E - E.mean(axis=0)
        u, s, vt = np.linalg.svd(E, full_matrices=False)
        U = (E @ vt[:dim].T)
        U = U / np.linalg.norm(U, axis=1, keepdims=True)
        V = dim * eta * U
    # verify the covering radius by facet distances; grow if needed
    for _ in range(8):
        from .geometry import polytope_halfspaces
        P = polytope_halfspaces(Polytope(V))
        if P.contains(np.zeros(dim)) and np.all(P.b >= eta * (1 - 1e-9)):
            return V
        V = V * 2.0
    raise GeometryError("failed to construct a covering simplex")


def _pattern_search(objective, y0, budget, target, step0=1.0):
    """Deterministic compass search; stops early once objective < target."""
    y = np.asarray(y0, dtype=float).copy()
    best = objective(y)
    evals = 1
    step = step0
    m = y.size
    while evals < budget and step > 1e-9:
        if best < target:
            return y, best, True
        improved = False
        for j in range(m):
            for sgn in (1.0, -1.0):
                cand = y.copy()
                cand[j] += sgn * step
                v = objective(cand)
                evals += 1
                if v < best - 1e-15:
                    y, best = cand, v
                    improved = True
                    break
                if evals >= budget:
                    break
            if improved or evals >= budget:
                break
        if not improved:
            step *= 0.5
    return y, best, best < target


def check_slater(constraints, zbar, eta, space, ydim,
                 slater_margin=1e-6, budget=10_000):
    """Uniform strict feasibility of the random constraint system near zbar.

    For every node and every vertex e_k of a simplex covering eta*B, a
    budgeted compass search looks for y with phi^i(zbar + e_k, y) <
    -slater_margin for all i.  On success returns (True, kappa) with
    kappa(t) = max_k ||y_k(t)||, the perturbed-distance certificate; any
    failure returns (False, None).
    """
    first = space.nodes[0].id
    zdim = np.asarray(zbar(first) if callable(zbar) else zbar).ravel().size
    simplex = _covering_simplex(zdim, eta)
    kappa = {}
    per_vertex_budget = max(budget // len(simplex), 100)
    for node in space.nodes:
        cons = constraints(node.id)
        z0 = np.asarray(zbar(node.id) if callable(zbar) else zbar,
                        dtype=float).ravel()
        worst = 0.0
        for e in simplex:
            z = z0 + e

            def obj(y):
                return max(phi(z, y) for phi, _ in cons)

            y, _, ok = _pattern_search(obj, np.zeros(ydim),
                                       per_vertex_budget, -slater_margin)
            if not ok:
                return False, None
            worst = max(worst, float(np.linalg.norm(y)))
        kappa[node.id] = worst
    return True, NodeScalarField(kappa)


def check_adjoint_triviality(handle, xbar, eta, space, x_grid=None,
                             active_tol=DEFAULT_ACTIVE_TOL):
    """Integral triviality of the adjoint multiplier system of a
    :class:`ConstraintComposite`:

        (z*, 0) = sum_{i active} lambda_i grad phi^i,  lambda >= 0,
        J^T z* = 0    admits only z* = 0

    over a grid of x near xbar, all nodes, and sampled feasible y (the
    vertices/midpoints of the value polytope).  Sampling can only refute,
    not certify, for nonpolyhedral constraints; a True outcome is
    grid-certified only.  Returns (True, None) or (False, witness).
    """
    xbar = np.asarray(xbar, dtype=float).ravel()
    if x_grid is None:
        deltas = [np.zeros(xbar.size)]
        for j in range(xbar.size):
            e = np.zeros(xbar.size)
            e[j] = eta / 2.0
            deltas.extend([e, -e])
        x_grid = [xbar + d for d in deltas]
    for node in space.nodes:
        cons = handle.constraints(node.id)
        for x in x_grid:
            x = np.asarray(x, dtype=float).ravel()
            J = np.atleast_2d(np.asarray(handle.inner_jac(node.id, x),
                                         dtype=float))
            z = np.asarray(handle.inner(node.id, x), dtype=float).ravel()
            try:
                ys = value_polytope(handle, node.id, x).sample_points()
            except InfeasiblePointError:
                continue
            for y in np.atleast_2d(ys):
                act = [i for i, (phi, _) in enumerate(cons)
                       if abs(phi(z, y)) <= active_tol]
                if not act:
                    continue
                grads = np.asarray(
                    [np.asarray(cons[i][1](z, y), dtype=float).ravel()
                     for i in act])
                p = handle.dim_mid
                gz = grads[:, :p]
                gy = grads[:, p:]
                # multiplier cone {lam >= 0 | sum_i lam_i grad_y phi^i = 0}
                lam_cone = cone_from_halfspaces(-np.eye(len(act)), gy.T,
                                                len(act))
                cands = list(lam_cone.generators)
                for u in lam_cone.lineality:
                    cands.extend([u, -u])
                for lam in cands:
                    lam = np.where(np.abs(lam) < 1e-12, 0.0, lam)
                    if np.any(lam < -1e-10):
                        continue
                    zstar = lam @ gz
                    nz = np.linalg.norm(zstar)
                    if nz <= 1e-10:
                        continue
                    if np.linalg.norm(J.T @ zstar) <= 1e-9 * nz:
                        witness = {"node": node.id, "x": x.tolist(),
                                   "y": np.asarray(y).tolist(),
                                   "zstar": zstar.tolist(),
                                   "active": act}
                        return False, witness
    return True, None
