"""First-order constructions on polyhedral sets and scalar functions:
regular/limiting normal cones, directional subderivatives, regular
subdifferentials, and max-function subdifferentials.

For polyhedral data the cones are exact; for general function handles the
subderivative machinery is a declared finite-difference approximation and
results are labeled as such by callers.
"""

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import (
    EMPTY, ConvexCone, GeometryError, Polyhedron, PolyhedralUnion, Polytope,
    cone_from_halfspaces, convex_hull, intersect_cones, polyhedron_to_polytope,
    polytope_halfspaces,
)

DEFAULT_ACTIVE_TOL = 1e-8
DEFAULT_SCHEDULE = tuple(10.0 ** (-k) for k in range(2, 7))
FAN_DIRECTIONS = 9
FAN_HALF_ANGLE = 0.05


class PointNotInSetError(ValueError):
    """Raised when a base point is outside the set; the regular normal cone
    is empty by convention there, which no ConvexCone value can express."""


class UnsupportedDimensionError(ValueError):
    pass


class GradientCheckError(ValueError):
    pass


# ---------------------------------------------------------------------------
# scalar function handles


@dataclass
class ScalarFunctionHandle:
    """Extended-real-valued function with an optional trusted gradient.

    ``evaluate`` must be deterministic.  Where ``smooth_at`` declares the
    gradient trusted, it must match central finite differences within 1e-5
    (see :func:`validate_gradient`).
    """

    dim: int
    evaluate: Callable
    gradient: Optional[Callable] = None
    smooth_at: Optional[Callable] = None

    def is_smooth_at(self, x):
        if self.gradient is None:
            return False
        if self.smooth_at is None:
            return True
        return bool(self.smooth_at(np.asarray(x, dtype=float).ravel()))

    @classmethod
    def affine(cls, a, b=0.0):
        a = np.asarray(a, dtype=float).ravel()
        return cls(dim=a.size,
                   evaluate=lambda x: float(a @ x + b),
                   gradient=lambda x: a.copy())

    @classmethod
    def max_affine(cls, slopes, intercepts):
        slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
        intercepts = np.asarray(intercepts, dtype=float).ravel()

        def ev(x):
            return float(np.max(slopes @ x + intercepts))

        def grad(x):
            vals = slopes @ x + intercepts
            return slopes[int(np.argmax(vals))].copy()

        def smooth(x):
            vals = slopes @ x + intercepts
            m = np.max(vals)
            return int(np.sum(vals >= m - 1e-12)) == 1

        return cls(dim=slopes.shape[1], evaluate=ev, gradient=grad,
                   smooth_at=smooth)


def validate_gradient(handle, probes=None, n_probes=20, seed=0, tol=1e-5,
                      step=1e-6):
    """Central finite-difference self-check for a declared gradient."""
    if handle.gradient is None:
        return True
    rng = np.random.default_rng(seed)
    if probes is None:
        probes = rng.uniform(-1.0, 1.0, size=(n_probes, handle.dim))
    for x in probes:
        x = np.asarray(x, dtype=float).ravel()
        if not handle.is_smooth_at(x):
            continue
        g = np.asarray(handle.gradient(x), dtype=float).ravel()
        fd = np.zeros_like(g)
        for j in range(handle.dim):
            e = np.zeros(handle.dim)
            e[j] = step
            fd[j] = (handle.evaluate(x + e) - handle.evaluate(x - e)) / (
                2 * step)
        if np.max(np.abs(g - fd)) > tol:
            raise GradientCheckError(
                f"gradient check failed at {x.tolist()}: "
                f"declared {g.tolist()} vs fd {fd.tolist()}")
    return True


# ---------------------------------------------------------------------------
# normal cones


def regular_normal_cone_polyhedron(P, xbar, active_tol=DEFAULT_ACTIVE_TOL):
    """Regular (= limiting, for polyhedra) normal cone: the cone generated
    by the outward normals of the rows active at xbar."""
    xbar = np.asarray(xbar, dtype=float).ravel()
    if not P.contains(xbar, 1e-9 * (1.0 + float(np.linalg.norm(xbar)))):
        raise PointNotInSetError(
            "base point outside the polyhedron; normal cone empty by "
            "convention")
    act = P.active_rows(xbar, active_tol)
    if not act:
        return ConvexCone.trivial(P.dim)
    return ConvexCone(P.A[act], dim=P.dim)


def _as_halfspace_piece(piece):
    if isinstance(piece, Polyhedron):
        return piece
    if isinstance(piece, Polytope):
        return polytope_halfspaces(piece)
    if isinstance(piece, ConvexCone):
        return Polyhedron(piece.halfspace_rows(),
                          np.zeros(piece.halfspace_rows().shape[0]))
    raise GeometryError(f"unsupported union piece {type(piece)!r}")


def _cone_direction_candidates(cone):
    out = []
    G = cone.generators
    L = cone.lineality
    for g in G:
        out.append(g)
    for i, j in itertools.combinations(range(G.shape[0]), 2):
        out.append(G[i] + G[j])
    if G.shape[0] > 2:
        out.append(G.sum(axis=0))
    for u in L:
        out.append(u)
        out.append(-u)
    if L.shape[0] > 1:
        for signs in itertools.product((1.0, -1.0), repeat=L.shape[0]):
            out.append(sum(s * u for s, u in zip(signs, L)))
    for g in G:
        for u in L:
            out.append(g + 0.5 * u)
            out.append(g - 0.5 * u)
    return out


def _dedup_directions(dirs):
    uniq = []
    for w in dirs:
        n = np.linalg.norm(w)
        if n <= 1e-12:
            continue
        w = w / n
        if all(np.linalg.norm(w - v) > 1e-9 for v in uniq):
            uniq.append(w)
    return uniq


def _probe_cone(pieces_H, actives, w, dot_tol=1e-9):
    """Regular normal cone of the union at the symbolic probe xbar + t*w.

    Pattern classification is by the sign of each active row against w;
    inactive rows keep strict slack for small t and never matter.
    """
    contributions = []
    for P, act in zip(pieces_H, actives):
        if act is None:
            continue  # piece does not contain xbar
        dots = P.A[act] @ w if act else np.zeros(0)
        if np.any(dots > dot_tol):
            continue  # probe leaves this piece
        still = [act[i] for i in range(len(act)) if abs(dots[i]) <= dot_tol]
        if still:
            contributions.append(ConvexCone(P.A[still], dim=P.dim))
        else:
            contributions.append(ConvexCone.trivial(P.dim))
    if not contributions:
        return None
    if len(contributions) == 1:
        return contributions[0]
    return intersect_cones(contributions)


def regular_normal_cone_union(U, xbar, active_tol=DEFAULT_ACTIVE_TOL):
    """Regular normal cone of a polyhedral union: the intersection of the
    pieces' active-row cones at xbar."""
    xbar = np.asarray(xbar, dtype=float).ravel()
    pieces_H, actives = _piece_activity(U, xbar, active_tol)
    if all(a is None for a in actives):
        raise PointNotInSetError("base point outside the union")
    cone = _probe_cone(pieces_H, actives, np.zeros(xbar.size))
    return cone


def _piece_activity(U, xbar, active_tol):
    pieces = U.pieces if isinstance(U, PolyhedralUnion) else [U]
    pieces_H = [_as_halfspace_piece(p) for p in pieces]
    scale = 1.0 + float(np.linalg.norm(xbar))
    actives = []
    for P in pieces_H:
        if P.contains(xbar, 1e-9 * scale):
            actives.append(P.active_rows(xbar, active_tol))
        else:
            actives.append(None)
    return pieces_H, actives


def _cone_subset(c1, c2, tol=1e-9):
    for g in c1.generators:
        if not c2.contains(g, tol):
            return False
    for u in c1.lineality:
        if not (c2.contains(u, tol) and c2.contains(-u, tol)):
            return False
    return True


def limiting_normal_cone_union(U, xbar, active_tol=DEFAULT_ACTIVE_TOL):
    """Limiting normal cone of a polyhedral union at xbar, as a union of
    finitely generated cones.

    Enumerates, piece by piece, the faces whose closure contains xbar; each
    face contributes the regular normal cone at a nearby relative-interior
    probe, restricted to the pieces that locally persist along the probe
    direction.  Probe directions are taken from the canonical generators of
    each face cone plus its cuts by the other pieces' active rows, which is
    exhaustive at desk scale for unions in dimension <= 3.
    """
    xbar = np.asarray(xbar, dtype=float).ravel()
    if xbar.size > 3:
        raise UnsupportedDimensionError(
            "exact limiting cones supported in dimension <= 3; use the "
            "sampling oracle instead")
    pieces_H, actives = _piece_activity(U, xbar, active_tol)
    if all(a is None for a in actives):
        raise PointNotInSetError("base point outside the union")

    all_active_rows = []
    for P, act in zip(pieces_H, actives):
        if act:
            all_active_rows.extend(P.A[act])

    candidates = [np.zeros(xbar.size)]
    for P, act in zip(pieces_H, actives):
        if act is None:
            continue
        act_rows = P.A[act] if act else np.zeros((0, P.dim))
        for r in range(len(act) + 1):
            for S in itertools.combinations(range(len(act)), r):
                S = set(S)
                eq = act_rows[sorted(S)] if S else None
                ineq = act_rows[[i for i in range(len(act))
                                 if i not in S]]
                face_cone = cone_from_halfspaces(ineq, eq, P.dim)
                candidates.extend(_cone_direction_candidates(face_cone))
                for row in all_active_rows:
                    eq2 = (np.vstack([eq, row[None, :]])
                           if eq is not None else row[None, :])
                    cut = cone_from_halfspaces(ineq, eq2, P.dim)
                    candidates.extend(_cone_direction_candidates(cut))

    dirs = _dedup_directions(candidates)
    cones = []
    zero_cone = _probe_cone(pieces_H, actives, np.zeros(xbar.size))
    if zero_cone is not None:
        cones.append(zero_cone)
    for w in dirs:
        c = _probe_cone(pieces_H, actives, w)
        if c is not None:
            cones.append(c)
    # dedup and absorb cones contained in another
    kept = []
    for c in cones:
        if any(_cone_subset(c, k) for k in kept):
            continue
        kept = [k for k in kept if not _cone_subset(k, c)]
        kept.append(c)
    return PolyhedralUnion(kept)


# ---------------------------------------------------------------------------
# subderivatives and subdifferentials


@dataclass
class SubderivativeEstimate:
    value: float
    level_values: list
    monotone: bool
    schedule: tuple


def _direction_fan(w, count=FAN_DIRECTIONS, half_angle=FAN_HALF_ANGLE):
    w = np.asarray(w, dtype=float).ravel()
    nw = np.linalg.norm(w)
    if nw == 0:
        raise ValueError("direction must be nonzero")
    what = w / nw
    d = w.size
    if d == 1:
        return [w.copy()]
    # tangent basis
    basis = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        t = e - (e @ what) * what
        n = np.linalg.norm(t)
        if n > 1e-9:
            basis.append(t / n)
    fans = [w.copy()]
    steps = max(1, (count - 1) // (2 * len(basis)))
    for t in basis:
        for k in range(1, steps + 1):
            theta = half_angle * k / steps
            for sgn in (1.0, -1.0):
                u = np.cos(theta) * what + np.sin(theta) * sgn * t
                fans.append(nw * u)
    return fans[:count]


def subderivative_profile(f, xbar, w, schedule=DEFAULT_SCHEDULE,
                          fan=FAN_DIRECTIONS, half_angle=FAN_HALF_ANGLE):
    """Finite lower-difference quotient profile approximating the
    directional subderivative (liminf of (f(x+tu)-f(x))/t jointly over t
    down to 0 and u toward w).

    The direction-fan half-angle shrinks with the step ratio so the two
    limits stay coupled; the reported value is the finest stage, which is
    exact in the limit for locally Lipschitz integrands (where the fan is
    redundant anyway) and a declared approximation otherwise.
    """
    xbar = np.asarray(xbar, dtype=float).ravel()
    f0 = f.evaluate(xbar)
    if not np.isfinite(f0):
        raise ValueError("subderivative needs a finite value at the base")
    levels = []
    t0 = schedule[0]
    for t in schedule:
        dirs = _direction_fan(w, fan, half_angle * (t / t0))
        best = np.inf
        for u in dirs:
            q = (f.evaluate(xbar + t * u) - f0) / t
            if q < best:
                best = q
        levels.append(best)
    value = levels[-1]
    monotone = all(levels[i + 1] <= levels[i] + 1e-9
                   for i in range(len(levels) - 1))
    return SubderivativeEstimate(value=float(value), level_values=levels,
                                 monotone=monotone, schedule=tuple(schedule))


def subderivative_fd(f, xbar, w, schedule=DEFAULT_SCHEDULE):
    return subderivative_profile(f, xbar, w, schedule).value


def unit_direction_grid(dim, count):
    """Deterministic unit directions: {-1, +1} in 1-D, a uniform circle grid
    in 2-D, and a Fibonacci sphere in 3-D."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if dim == 3:
        k = np.arange(count) + 0.5
        phi = np.arccos(1 - 2 * k / count)
        theta = np.pi * (1 + 5 ** 0.5) * k
        return np.stack([np.cos(theta) * np.sin(phi),
                         np.sin(theta) * np.sin(phi),
                         np.cos(phi)], axis=1)
    raise UnsupportedDimensionError("direction grids supported up to 3-D")


# slack added to every subderivative row: absorbs the finite-difference
# estimator's bias so exact singletons stay feasible (the result is an
# outer approximation either way)
SUBDIFF_ROW_SLACK = 1e-4


def regular_subdifferential(f, xbar, direction_grid=None, count=64,
                            schedule=DEFAULT_SCHEDULE,
                            row_slack=SUBDIFF_ROW_SLACK):
    """Outer polytope approximation of the regular subdifferential
    {x* | <x*, w> <= df(xbar)(w) for all w in the grid}.

    Exact for polyhedral inputs up to the row slack; coarser grids
    overestimate, so callers label the result an outer approximation.
    Returns EMPTY when the constraints are infeasible.
    """
    xbar = np.asarray(xbar, dtype=float).ravel()
    if direction_grid is None:
        direction_grid = unit_direction_grid(xbar.size, count)
    rows, offs = [], []
    for w in direction_grid:
        s = subderivative_fd(f, xbar, w, schedule)
        if np.isposinf(s):
            continue
        if np.isneginf(s):
            return EMPTY
        rows.append(np.asarray(w, dtype=float))
        offs.append(s + row_slack * (1.0 + abs(s)))
    if not rows:
        raise GeometryError("no usable directions in the grid")
    P = Polyhedron(np.asarray(rows), np.asarray(offs))
    return polyhedron_to_polytope(P)


def max_subdifferential(handles, xbar, active_tol=DEFAULT_ACTIVE_TOL):
    """Convex hull of the gradients of the components active at xbar
    (the subdifferential of a pointwise maximum of smooth functions)."""
    xbar = np.asarray(xbar, dtype=float).ravel()
    vals = np.array([h.evaluate(xbar) for h in handles])
    top = np.max(vals)
    grads = []
    for h, v in zip(handles, vals):
        if top - v <= active_tol:
            grads.append(np.asarray(h.gradient(xbar), dtype=float).ravel())
    return convex_hull(np.asarray(grads))
