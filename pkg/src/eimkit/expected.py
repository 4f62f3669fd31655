"""Expected-integral evaluation on discretized measure spaces.

``E(x) = sum_t w_t * Phi_t(x)`` is the finite Aumann integral: the weighted
Minkowski sum of the per-node values, with values on nonatomic-tagged nodes
convexified first.  The selection machinery recovers per-node points that
aggregate to a prescribed integral value.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .coderivative import value_polytope
from .geometry import Polytope, convex_hull, weighted_minkowski
from .measure import NodeKind

INFEASIBLE = "infeasible"


def handle_for(handle, node_id):
    """Handles may be shared across nodes or given per node as a dict."""
    if isinstance(handle, dict):
        return handle[node_id]
    return handle


def node_value(handle, node, x):
    h = handle_for(handle, node.id)
    value = value_polytope(h, node.id, x)
    if node.kind is NodeKind.NONATOMIC_SAMPLE:
        # Lyapunov convexification rule: values on the nonatomic part enter
        # the integral convexified.  Structured values are already convex
        # polytopes, so this is the identity, kept explicit on purpose.
        value = convex_hull(value.vertices)
    return value


def evaluate_expected_map(handle, x, space):
    """E(x) as an exact polytope: weighted Minkowski sum of node values."""
    x = np.asarray(x, dtype=float).ravel()
    terms = []
    for node in space.nodes:
        terms.append((node.weight, node_value(handle, node, x)))
    return weighted_minkowski(terms)


def expected_functional(phi, x, space, lower_bounds=None):
    """Weighted sum of scalar integrand values with the extended-real
    conventions (any +inf node value makes the sum +inf)."""
    x = np.asarray(x, dtype=float).ravel()
    vals = []
    for node in space.nodes:
        f = phi(node.id) if not callable(getattr(phi, "evaluate", None)) \
            else phi
        v = f.evaluate(x) if hasattr(f, "evaluate") else f(x)
        if lower_bounds is not None and np.isfinite(v):
            if v < -lower_bounds.value(node.id) - 1e-12:
                raise ValueError(
                    f"integrand below its declared lower bound at node "
                    f"{node.id!r}")
        vals.append((node.weight, float(v)))
    if any(np.isposinf(v) for _, v in vals):
        return np.inf
    if any(np.isneginf(v) for _, v in vals):
        return -np.inf
    return float(sum(w * v for w, v in vals))


@dataclass
class SelectionFunction:
    """Per-node points y(t) in Phi_t(x) aggregating to a prescribed value."""

    per_node: dict
    aggregate: np.ndarray

    def weighted_l1_distance(self, other, space):
        total = 0.0
        for node in space.nodes:
            a = np.asarray(self.per_node[node.id], dtype=float)
            b = np.asarray(other.per_node[node.id], dtype=float)
            total += node.weight * float(np.linalg.norm(a - b))
        return total

    def validate(self, handle, x, space, tol=1e-9):
        agg = np.zeros_like(np.asarray(self.aggregate, dtype=float))
        for node in space.nodes:
            y = np.asarray(self.per_node[node.id], dtype=float)
            value = node_value(handle, node, x)
            if value.distance(y) > tol:
                return False
            agg = agg + node.weight * y
        return bool(np.linalg.norm(agg - self.aggregate) <= 1e-10
                    * (1.0 + np.linalg.norm(agg)))


def decompose_target(sets_and_weights, target, tol=1e-9, centered=False):
    """Per-node points p_t in compact polytopes S_t with
    sum_t w_t p_t = target: the first basic feasible solution of the
    vertex-coefficient LP under deterministic ordering, or (``centered``)
    the one minimizing the weighted mass on off-center vertices.  None when
    infeasible."""
    target = np.asarray(target, dtype=float).ravel()
    m = target.size
    blocks = []
    offsets = [0]
    for w, S in sets_and_weights:
        V = S.vertices
        if centered and V.shape[0] > 1:
            # the centroid enters as a zero-cost generator so the optimum
            # parks mass there and keeps node points in relative interiors
            V = np.vstack([V, V.mean(axis=0, keepdims=True)])
        blocks.append((w, V))
        offsets.append(offsets[-1] + V.shape[0])
    nvar = offsets[-1]
    A_eq = np.zeros((m + len(blocks), nvar))
    b_eq = np.zeros(m + len(blocks))
    cost = np.zeros(nvar)
    for k, (w, V) in enumerate(blocks):
        A_eq[:m, offsets[k]:offsets[k + 1]] = w * V.T
        A_eq[m + k, offsets[k]:offsets[k + 1]] = 1.0
        b_eq[m + k] = 1.0
        if centered:
            center = V.mean(axis=0)
            cost[offsets[k]:offsets[k + 1]] = w * np.linalg.norm(
                V - center, axis=1)
    b_eq[:m] = target
    res = linprog(cost, A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0.0, 1.0)] * nvar, method="highs")
    if not res.success:
        return None
    pts = []
    for k, (w, V) in enumerate(blocks):
        lam = res.x[offsets[k]:offsets[k + 1]]
        pts.append(lam @ V)
    agg = sum(w * p for (w, _), p in zip(sets_and_weights, pts))
    if np.linalg.norm(agg - target) > max(tol, 1e-7):
        return None
    return pts


def selection_mapping(handle, xbar, y_target, space, tol=1e-9,
                      mode="first"):
    """Selection of E at (xbar, y_target).

    ``first``: one selection found by a deterministic linear feasibility
    solve over vertex convex combinations.  ``centered``: the selection
    minimizing the weighted off-center vertex mass (keeps per-node points
    in relative interiors when possible).  ``enumerate``: all
    vertex-supported selections (per-node vertex choices), supported for
    up to 4 nodes.  Returns INFEASIBLE when y_target is not in E(xbar).
    """
    xbar = np.asarray(xbar, dtype=float).ravel()
    y_target = np.asarray(y_target, dtype=float).ravel()
    values = [(node.weight, node_value(handle, node, xbar))
              for node in space.nodes]
    if mode in ("first", "centered"):
        pts = decompose_target(values, y_target, tol,
                               centered=(mode == "centered"))
        if pts is None:
            return INFEASIBLE
        per_node = {node.id: p for node, p in zip(space.nodes, pts)}
        return SelectionFunction(per_node=per_node, aggregate=y_target)
    if mode == "enumerate":
        if len(space.nodes) > 4:
            raise ValueError("selection enumeration supported for <= 4 nodes")
        out = []
        import itertools
        vertex_lists = [V.vertices for _, V in values]
        weights = [w for w, _ in values]
        for choice in itertools.product(*[range(len(v))
                                          for v in vertex_lists]):
            agg = sum(w * vertex_lists[k][i]
                      for k, (w, i) in enumerate(zip(weights, choice)))
            if np.linalg.norm(agg - y_target) <= max(tol, 1e-9):
                per_node = {node.id: vertex_lists[k][choice[k]]
                            for k, node in enumerate(space.nodes)}
                out.append(SelectionFunction(per_node=per_node,
                                             aggregate=y_target))
        return out
    raise ValueError(f"unknown selection mode {mode!r}")


def polytope_faces(P):
    """(representative point, vertex tuple) for every face of a 1-D or 2-D
    polytope, lowest dimension first; higher dimensions fall back to
    vertices plus the whole body (a partial enumeration)."""
    V = P.vertices
    faces = [(V[i], (i,)) for i in range(V.shape[0])]
    if V.shape[0] == 1:
        return faces
    if P.dim == 1:
        faces.append((V.mean(axis=0), tuple(range(V.shape[0]))))
        return faces
    if P.dim == 2 and V.shape[0] >= 3:
        center = V.mean(axis=0)
        ang = np.arctan2(V[:, 1] - center[1], V[:, 0] - center[0])
        order = list(np.argsort(ang))
        for k in range(len(order)):
            i, j = order[k], order[(k + 1) % len(order)]
            faces.append((0.5 * (V[i] + V[j]), (i, j)))
        faces.append((center, tuple(range(V.shape[0]))))
        return faces
    # segment in R^d or higher-dimensional body
    faces.append((V.mean(axis=0), tuple(range(V.shape[0]))))
    return faces


def enumerate_selection_faces(handle, xbar, y_target, space, tol=1e-9):
    """Per-node face combinations that can host a selection aggregating to
    y_target: combos (f_1..f_k) with y_target in sum_t w_t conv(f_t).

    Coderivative slices are constant on the relative interior of a face, so
    these representatives exhaust the selection union on polytopal values
    up to face-boundary effects.
    """
    import itertools
    xbar = np.asarray(xbar, dtype=float).ravel()
    y_target = np.asarray(y_target, dtype=float).ravel()
    combos = []
    per_node_faces = []
    weights = []
    for node in space.nodes:
        value = node_value(handle, node, xbar)
        per_node_faces.append(polytope_faces(value))
        weights.append((node.weight, value))
    for choice in itertools.product(*[range(len(f)) for f in per_node_faces]):
        sets = []
        reps = {}
        for k, node in enumerate(space.nodes):
            rep, idx = per_node_faces[k][choice[k]]
            V = weights[k][1].vertices[list(idx)]
            sets.append((node.weight, Polytope(V, canonicalize=False)))
            reps[node.id] = rep
        agg = weighted_minkowski(sets)
        if agg.distance(y_target) <= max(tol, 1e-9):
            combos.append(SelectionFunction(per_node=reps,
                                            aggregate=y_target))
    return combos


@dataclass
class SemicompactnessDiagnostic:
    selections_found: bool
    distances: list
    cauchy: bool
    note: str = ""


def probe_inner_semicompactness(handle, xbar, ybar, space, pairs,
                                tol=1e-7):
    """Diagnostic (not a proof): follow selections along perturbed pairs
    converging to (xbar, ybar) and test whether the selection sequence is
    Cauchy in the weighted-L1 node norm."""
    sels = []
    for (x, y) in pairs:
        s = selection_mapping(handle, x, y, space, tol=max(tol, 1e-7))
        if s == INFEASIBLE:
            return SemicompactnessDiagnostic(
                selections_found=False, distances=[], cauchy=False,
                note="a perturbed pair had no selection")
        sels.append(s)
    dists = [sels[i + 1].weighted_l1_distance(sels[i], space)
             for i in range(len(sels) - 1)]
    if not dists:
        return SemicompactnessDiagnostic(True, [], True, "single pair")
    # Cauchy surrogate: successive gaps decay substantially over the run
    cauchy = dists[-1] <= max(1e-8, 0.2 * dists[0])
    return SemicompactnessDiagnostic(selections_found=True,
                                     distances=dists, cauchy=cauchy)
