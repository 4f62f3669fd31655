"""Exact finite-dimensional convex/polyhedral sets and set arithmetic.

Representation policy: compact sets are V-rep :class:`Polytope`, constraint
sets and graphs are H-rep :class:`Polyhedron`, normal cones are generator
:class:`ConvexCone`, and nonconvex values are :class:`PolyhedralUnion`.
Conversions between representations happen only on demand and only in
dimension <= 4, by face/ray enumeration; at this scale exactness beats
generality.

The empty set is a first-class value (:data:`EMPTY`) with distance +inf.
"""

import itertools
import math
from functools import lru_cache

import numpy as np

from . import _kernels

# canonicalization tolerance for redundant-vertex removal
HULL_TOL = 1e-10
# angular tolerance (radians) for deduplicating cone generators
CONE_ANGLE_TOL = 1e-8
# dual-variable slack accepted in exact projections
DUAL_TOL = 1e-9
# primal feasibility slack accepted in exact projections
FEAS_TOL = 1e-9

_COMBO_LIMIT = 3_000_000


class GeometryError(ValueError):
    pass


class DimensionMismatchError(GeometryError):
    pass


class UnboundedSetError(GeometryError):
    pass


@lru_cache(maxsize=256)
def _subset_table(n, rmin, rmax):
    """Padded table of index subsets of {0..n-1} with sizes rmin..rmax."""
    rmax = min(rmax, n)
    rows = []
    sizes = []
    total = sum(math.comb(n, r) for r in range(rmin, rmax + 1))
    if total > _COMBO_LIMIT:
        raise GeometryError(
            f"subset enumeration too large ({total} subsets for n={n})"
        )
    width = max(rmax, 1)
    for r in range(rmin, rmax + 1):
        for c in itertools.combinations(range(n), r):
            rows.append(list(c) + [0] * (width - r))
            sizes.append(r)
    if not rows:
        rows = [[0] * width]
        sizes = [0]
    return (
        np.asarray(rows, dtype=np.int64),
        np.asarray(sizes, dtype=np.int64),
    )


def _as_points(points):
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.ndim != 2:
        raise GeometryError("points must form a 2-D array")
    return P


def _dedup_points(P, tol):
    keep = []
    for i, p in enumerate(P):
        dup = False
        for j in keep:
            if np.linalg.norm(p - P[j]) <= tol:
                dup = True
                break
        if not dup:
            keep.append(i)
    return P[keep]


class _EmptySet:
    """The empty set; distances to it are +inf by convention."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY"

    @property
    def is_empty(self):
        return True

    def distance(self, x):
        return np.inf

    def contains(self, x, tol=0.0):
        return False


EMPTY = _EmptySet()


class Polytope:
    """Compact convex polytope given by its vertices (V-representation).

    Vertices are canonicalized on construction: duplicates and points inside
    the hull of the others (within ``HULL_TOL``) are removed.
    """

    def __init__(self, vertices, canonicalize=True):
        V = _as_points(vertices)
        if V.shape[0] == 0:
            raise GeometryError("a polytope needs at least one vertex")
        if canonicalize:
            V = convex_hull_points(V)
        self.vertices = V
        self.vertices.setflags(write=False)

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def is_empty(self):
        return False

    @property
    def is_singleton(self):
        return self.vertices.shape[0] == 1

    @classmethod
    def interval(cls, lo, hi):
        if hi < lo:
            raise GeometryError("interval endpoints out of order")
        return cls(np.array([[float(lo)], [float(hi)]]), canonicalize=False)

    @classmethod
    def singleton(cls, point):
        return cls(np.atleast_2d(np.asarray(point, dtype=float)),
                   canonicalize=False)

    def distance(self, x):
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim:
            raise DimensionMismatchError(
                f"point dim {x.size} != polytope dim {self.dim}")
        d, _ = self.project(x)
        return d

    def project(self, x):
        x = np.asarray(x, dtype=float).ravel()
        V = self.vertices
        combos, sizes = _subset_table(V.shape[0], 1, self.dim + 1)
        return _kernels.hull_project(
            np.ascontiguousarray(V), x, combos, sizes, DUAL_TOL)

    def contains(self, x, tol=FEAS_TOL):
        return self.distance(x) <= tol

    def support(self, direction):
        direction = np.asarray(direction, dtype=float).ravel()
        return float(np.max(self.vertices @ direction))

    def translate(self, v):
        return Polytope(self.vertices + np.asarray(v, dtype=float),
                        canonicalize=False)

    def scale(self, a):
        if a <= 0:
            raise GeometryError("scale factor must be positive")
        return Polytope(self.vertices * float(a), canonicalize=False)

    def linear_image(self, M):
        M = np.asarray(M, dtype=float)
        return Polytope(self.vertices @ M.T)

    def radius(self):
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    def sample_points(self, per_edge=1):
        """Vertices plus midpoints of vertex pairs and the centroid."""
        V = self.vertices
        pts = [V]
        if V.shape[0] > 1:
            mids = []
            for i, j in itertools.combinations(range(V.shape[0]), 2):
                mids.append(0.5 * (V[i] + V[j]))
            pts.append(np.asarray(mids))
            pts.append(V.mean(axis=0, keepdims=True))
        return np.vstack(pts)

    def __repr__(self):
        return f"Polytope({self.vertices.tolist()})"


class Polyhedron:
    """Convex polyhedron {x | A x <= b} (H-representation).

    Rows are normalized to unit normals.  A zero-normal row with b < 0 marks
    the whole set empty; zero-normal rows with b >= 0 are dropped.
    """

    def __init__(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if A.shape[0] != b.shape[0]:
            raise GeometryError("row count mismatch between A and b")
        norms = np.linalg.norm(A, axis=1) if A.size else np.zeros(0)
        explicit_empty = False
        keep_A, keep_b = [], []
        for i in range(A.shape[0]):
            if norms[i] <= 1e-14:
                if b[i] < -1e-12:
                    explicit_empty = True
                continue
            keep_A.append(A[i] / norms[i])
            keep_b.append(b[i] / norms[i])
        self.A = (np.asarray(keep_A) if keep_A
                  else np.zeros((0, A.shape[1] if A.ndim == 2 else 1)))
        self.b = np.asarray(keep_b) if keep_b else np.zeros(0)
        self._explicit_empty = explicit_empty
        self.A.setflags(write=False)
        self.b.setflags(write=False)

    @property
    def dim(self):
        return self.A.shape[1]

    @classmethod
    def box(cls, lo, hi):
        lo = np.asarray(lo, dtype=float).ravel()
        hi = np.asarray(hi, dtype=float).ravel()
        d = lo.size
        A = np.vstack([np.eye(d), -np.eye(d)])
        b = np.concatenate([hi, -lo])
        return cls(A, b)

    @classmethod
    def whole_space(cls, dim):
        return cls(np.zeros((0, dim)), np.zeros(0))

    @property
    def is_empty(self):
        if self._explicit_empty:
            return True
        return not np.isfinite(self.distance(np.zeros(self.dim)))

    def distance(self, x):
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim:
            raise DimensionMismatchError(
                f"point dim {x.size} != polyhedron dim {self.dim}")
        if self._explicit_empty:
            return np.inf
        if self.A.shape[0] == 0:
            return 0.0
        d, _ = self.project(x)
        return d

    def project(self, x):
        x = np.asarray(x, dtype=float).ravel()
        if self._explicit_empty:
            return np.inf, x.copy()
        if self.A.shape[0] == 0:
            return 0.0, x.copy()
        combos, sizes = _subset_table(self.A.shape[0], 0, self.dim)
        scale = 1.0 + float(np.max(np.abs(self.b))) + float(
            np.linalg.norm(x))
        return _kernels.polyhedron_project(
            np.ascontiguousarray(self.A), self.b, x, combos, sizes,
            DUAL_TOL, FEAS_TOL * scale)

    def contains(self, x, tol=FEAS_TOL):
        x = np.asarray(x, dtype=float).ravel()
        if self._explicit_empty:
            return False
        if self.A.shape[0] == 0:
            return True
        return bool(np.all(self.A @ x - self.b <= tol))

    def active_rows(self, x, tol=1e-8):
        x = np.asarray(x, dtype=float).ravel()
        res = self.A @ x - self.b
        return [i for i in range(self.A.shape[0]) if abs(res[i]) <= tol]

    def intersect(self, other):
        if other.dim != self.dim:
            raise DimensionMismatchError("intersect: dimension mismatch")
        P = Polyhedron(np.vstack([self.A, other.A]),
                       np.concatenate([self.b, other.b]))
        if self._explicit_empty or other._explicit_empty:
            P._explicit_empty = True
        return P

    def recession_cone(self):
        """Cone of directions {d | A d <= 0}."""
        return cone_from_halfspaces(self.A, None, self.dim)

    def __repr__(self):
        if self._explicit_empty:
            return "Polyhedron(<empty>)"
        return f"Polyhedron(A={self.A.tolist()}, b={self.b.tolist()})"


class ConvexCone:
    """Finitely generated cone {sum l_i g_i + sum t_k u_k | l_i >= 0}.

    Generators are normalized to unit length; an empty generator and
    lineality list is the trivial cone {0}.
    """

    def __init__(self, generators=None, lineality=None, dim=None,
                 canonicalize=True):
        if generators is None or (hasattr(generators, "__len__")
                                  and len(generators) == 0):
            if dim is None:
                raise GeometryError("trivial cone needs an explicit dim")
            G = np.zeros((0, dim))
        else:
            G = _as_points(generators)
        if lineality is None or (hasattr(lineality, "__len__")
                                 and len(lineality) == 0):
            L = np.zeros((0, G.shape[1]))
        else:
            L = _as_points(lineality)
        if dim is not None and G.shape[1] != dim:
            raise DimensionMismatchError("generator dim != declared dim")
        if canonicalize:
            G, L = _canonicalize_cone(G, L)
        self.generators = G
        self.lineality = L
        self.generators.setflags(write=False)
        self.lineality.setflags(write=False)

    @property
    def dim(self):
        return self.generators.shape[1]

    @property
    def is_empty(self):
        return False

    @property
    def is_trivial(self):
        return self.generators.shape[0] == 0 and self.lineality.shape[0] == 0

    @classmethod
    def trivial(cls, dim):
        return cls(dim=dim)

    def _folded_generators(self):
        parts = [self.generators]
        for u in self.lineality:
            parts.append(u[None, :])
            parts.append(-u[None, :])
        return np.vstack(parts) if parts else np.zeros((0, self.dim))

    def distance(self, x):
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim:
            raise DimensionMismatchError(
                f"point dim {x.size} != cone dim {self.dim}")
        d, _ = self.project(x)
        return d

    def project(self, x):
        x = np.asarray(x, dtype=float).ravel()
        G = self._folded_generators()
        if G.shape[0] == 0:
            return float(np.linalg.norm(x)), np.zeros(self.dim)
        combos, sizes = _subset_table(G.shape[0], 1, self.dim)
        return _kernels.cone_project(
            np.ascontiguousarray(G), x, combos, sizes, DUAL_TOL)

    def contains(self, x, tol=FEAS_TOL):
        x = np.asarray(x, dtype=float).ravel()
        scale = 1.0 + float(np.linalg.norm(x))
        return self.distance(x) <= tol * scale

    def polar(self):
        """Polar cone {w | <g, w> <= 0 for generators, <u, w> = 0}."""
        return cone_from_halfspaces(self.generators, self.lineality, self.dim)

    def halfspace_rows(self):
        """Rows H with cone == {w | H w <= 0} (polar generators)."""
        p = self.polar()
        rows = [p.generators]
        for u in p.lineality:
            rows.append(u[None, :])
            rows.append(-u[None, :])
        H = np.vstack(rows) if rows else np.zeros((0, self.dim))
        return H

    def ray_points(self, scales=(1.0,)):
        pts = [np.zeros(self.dim)]
        for s in scales:
            for g in self.generators:
                pts.append(s * g)
            for u in self.lineality:
                pts.append(s * u)
                pts.append(-s * u)
        return np.asarray(pts)

    def __repr__(self):
        return (f"ConvexCone(gens={self.generators.tolist()}, "
                f"lin={self.lineality.tolist()})")


def _canonicalize_cone(G, L):
    dim = G.shape[1]
    # orthonormalize the lineality space
    if L.shape[0]:
        q, r = np.linalg.qr(L.T)
        keep = [i for i in range(r.shape[0]) if abs(r[i, i]) > 1e-12]
        L = q.T[keep] if keep else np.zeros((0, dim))
    # normalize generators, detect antipodal pairs -> lineality
    gens = []
    for g in G:
        n = np.linalg.norm(g)
        if n <= 1e-13:
            continue
        gens.append(g / n)
    changed = True
    while changed:
        changed = False
        for i, j in itertools.combinations(range(len(gens)), 2):
            if np.linalg.norm(gens[i] + gens[j]) <= CONE_ANGLE_TOL:
                new_line = gens[i]
                rest = [gens[k] for k in range(len(gens))
                        if k not in (i, j)]
                L = np.vstack([L, new_line[None, :]])
                q, r = np.linalg.qr(L.T)
                keep = [t for t in range(r.shape[0])
                        if abs(r[t, t]) > 1e-12]
                L = q.T[keep] if keep else np.zeros((0, dim))
                gens = rest
                changed = True
                break
    # reduce generators modulo the lineality space, dedup by angle
    reduced = []
    for g in gens:
        for u in L:
            g = g - (g @ u) * u
        n = np.linalg.norm(g)
        if n <= 1e-12:
            continue
        g = g / n
        if all(np.linalg.norm(g - h) > CONE_ANGLE_TOL for h in reduced):
            reduced.append(g)
    # drop generators that already lie in the cone of the others
    minimal = list(reduced)
    i = 0
    while i < len(minimal):
        others = minimal[:i] + minimal[i + 1:]
        folded = list(others)
        for u in L:
            folded.append(u)
            folded.append(-u)
        if folded:
            Gm = np.asarray(folded)
            combos, sizes = _subset_table(Gm.shape[0], 1, dim)
            d, _ = _kernels.cone_project(
                np.ascontiguousarray(Gm), minimal[i], combos, sizes,
                DUAL_TOL)
            if d <= 1e-10:
                minimal.pop(i)
                continue
        i += 1
    Gout = np.asarray(minimal) if minimal else np.zeros((0, dim))
    return Gout, L


class PolyhedralUnion:
    """Finite union of polyhedral pieces; membership is piecewise."""

    def __init__(self, pieces):
        pieces = list(pieces)
        if not pieces:
            raise GeometryError("a union needs at least one piece")
        dims = {p.dim for p in pieces}
        if len(dims) != 1:
            raise DimensionMismatchError("union pieces of mixed dimension")
        self.pieces = pieces

    @property
    def dim(self):
        return self.pieces[0].dim

    @property
    def is_empty(self):
        return False

    def distance(self, x):
        return min(p.distance(x) for p in self.pieces)

    def project(self, x):
        best, proj = np.inf, None
        for p in self.pieces:
            d, q = p.project(x)
            if d < best:
                best, proj = d, q
        return best, proj

    def contains(self, x, tol=FEAS_TOL):
        return any(contains(p, x, tol) for p in self.pieces)

    def __repr__(self):
        return f"PolyhedralUnion({self.pieces!r})"


# ---------------------------------------------------------------------------
# hulls


def convex_hull_points(points, tol=HULL_TOL):
    """Canonical vertex array of the convex hull of the given points."""
    P = _dedup_points(_as_points(points), tol)
    if P.shape[0] == 1:
        return P
    center = P.mean(axis=0)
    Q = P - center
    # affine rank and local coordinates
    u, s, vt = np.linalg.svd(Q, full_matrices=False)
    scale = s[0] if s.size else 0.0
    if scale <= tol:
        return P[:1]
    rank = int(np.sum(s > max(tol, 1e-12 * scale)))
    basis = vt[:rank]
    local = Q @ basis.T
    if rank == 1:
        order = np.argsort(local[:, 0])
        idx = [order[0], order[-1]]
    elif rank == 2:
        idx = _hull_2d_indices(local, tol)
    else:
        idx = _hull_nd_indices(local, tol)
    return P[sorted(set(idx))]


def convex_hull(points, tol=HULL_TOL):
    """Convex hull as a canonical :class:`Polytope`."""
    return Polytope(convex_hull_points(points, tol), canonicalize=False)


def _hull_2d_indices(pts, tol):
    # Andrew's monotone chain; strictly convex turns only, so collinear
    # intermediate points are removed.
    n = pts.shape[0]
    order = sorted(range(n), key=lambda i: (pts[i, 0], pts[i, 1]))
    span = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1.0)
    eps = tol * span

    def cross(o, a, b):
        return ((pts[a, 0] - pts[o, 0]) * (pts[b, 1] - pts[o, 1])
                - (pts[a, 1] - pts[o, 1]) * (pts[b, 0] - pts[o, 0]))

    lower = []
    for i in order:
        while len(lower) > 1 and cross(lower[-2], lower[-1], i) <= eps:
            lower.pop()
        lower.append(i)
    upper = []
    for i in reversed(order):
        while len(upper) > 1 and cross(upper[-2], upper[-1], i) <= eps:
            upper.pop()
        upper.append(i)
    return lower[:-1] + upper[:-1]


def _hull_nd_indices(pts, tol):
    # iterative removal: a point inside the hull of the others is redundant
    idx = list(range(pts.shape[0]))
    changed = True
    while changed and len(idx) > pts.shape[1] + 1:
        changed = False
        for pos in range(len(idx)):
            i = idx[pos]
            others = [j for j in idx if j != i]
            V = np.ascontiguousarray(pts[others])
            combos, sizes = _subset_table(V.shape[0], 1, pts.shape[1] + 1)
            d, _ = _kernels.hull_project(V, pts[i], combos, sizes, DUAL_TOL)
            if d <= tol:
                idx.pop(pos)
                changed = True
                break
    return idx


# ---------------------------------------------------------------------------
# operations


def weighted_minkowski(terms):
    """Weighted Minkowski sum  sum_i w_i * B_i  of polytopes.

    Computed pairwise with canonicalization after every step, so the vertex
    count stays the size of the true hull.
    """
    terms = list(terms)
    if not terms:
        raise GeometryError("weighted_minkowski needs at least one term")
    dims = {B.dim for _, B in terms}
    if len(dims) != 1:
        raise DimensionMismatchError("Minkowski terms of mixed dimension")
    acc = None
    for w, B in terms:
        if w <= 0:
            raise GeometryError("Minkowski weights must be positive")
        V = B.vertices * float(w)
        if acc is None:
            acc = V
        else:
            acc = (acc[:, None, :] + V[None, :, :]).reshape(-1, V.shape[1])
        acc = convex_hull_points(acc)
    return Polytope(acc, canonicalize=False)


def hausdorff_distance(A, B):
    """Pompeiu-Hausdorff distance: the max of the two one-sided excesses.

    By convention the distance to the empty set is +inf; two empty sets are
    at distance 0.
    """
    a_empty = getattr(A, "is_empty", False)
    b_empty = getattr(B, "is_empty", False)
    if a_empty and b_empty:
        return 0.0
    if a_empty or b_empty:
        return np.inf
    if A.dim != B.dim:
        raise DimensionMismatchError("hausdorff: dimension mismatch")
    e1 = max(B.distance(v) for v in A.vertices)
    e2 = max(A.distance(v) for v in B.vertices)
    return max(e1, e2)


def distance_point_set(x, S):
    """Euclidean distance from x to a set value (inf for the empty set)."""
    if getattr(S, "is_empty", False):
        return np.inf
    return S.distance(x)


def contains(S, x, tol=0.0):
    """Membership of x in S within tolerance tol (by distance)."""
    if getattr(S, "is_empty", False):
        return False
    x = np.asarray(x, dtype=float).ravel()
    if isinstance(S, ConvexCone):
        return S.contains(x, max(tol, FEAS_TOL))
    return distance_point_set(x, S) <= max(tol, 0.0) + 1e-12


# ---------------------------------------------------------------------------
# representation conversion (dimension <= 4)


def null_space_rows(M, rtol=1e-10):
    """Orthonormal basis rows of the nullspace of M (rows are vectors)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] == 0:
        return np.eye(M.shape[1])
    u, s, vt = np.linalg.svd(M)
    scale = s[0] if s.size else 0.0
    rank = int(np.sum(s > max(rtol * scale, 1e-13)))
    return vt[rank:]


def cone_from_halfspaces(A, E, dim=None):
    """Generator representation of {w | A w <= 0, E w = 0}.

    Extreme rays are enumerated by (dim-1)-subset facet intersection after
    the lineality space has been split off.
    """
    if A is None:
        A = np.zeros((0, dim))
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if dim is None:
        dim = A.shape[1]
    if E is None or (hasattr(E, "__len__") and len(E) == 0):
        E = np.zeros((0, dim))
    E = np.atleast_2d(np.asarray(E, dtype=float))
    A = A[np.linalg.norm(A, axis=1) > 1e-13] if A.size else A.reshape(0, dim)
    # restrict to the nullspace of the equalities
    V = null_space_rows(E) if E.shape[0] else np.eye(dim)
    if V.shape[0] == 0:
        return ConvexCone(dim=dim)
    Ared = A @ V.T if A.shape[0] else np.zeros((0, V.shape[0]))
    # split off lineality of the reduced cone
    L = null_space_rows(Ared) if Ared.shape[0] else np.eye(V.shape[0])
    lineality = L @ V if L.shape[0] else np.zeros((0, dim))
    W = null_space_rows(L) if L.shape[0] else np.eye(V.shape[0])
    if W.shape[0] == 0:
        return ConvexCone(None, lineality, dim=dim)
    M = Ared @ W.T  # pointed cone {u | M u <= 0} in s dims
    s = W.shape[0]
    rays = []
    if s == 1:
        for sign in (1.0, -1.0):
            u = np.array([sign])
            if M.shape[0] == 0 or np.all(M @ u <= 1e-11):
                rays.append(u)
    else:
        if M.shape[0] >= s - 1:
            for c in itertools.combinations(range(M.shape[0]), s - 1):
                sub = M[list(c)]
                ns = null_space_rows(sub)
                if ns.shape[0] != 1:
                    continue
                u = ns[0]
                if np.all(M @ u <= 1e-11):
                    rays.append(u)
                elif np.all(M @ (-u) <= 1e-11):
                    rays.append(-u)
    gens = [r @ W @ V for r in rays]
    gens = np.asarray(gens) if gens else None
    return ConvexCone(gens, lineality, dim=dim)


def intersect_cones(cones):
    """Intersection of finitely generated cones via their H-representations."""
    cones = list(cones)
    if not cones:
        raise GeometryError("intersect_cones needs at least one cone")
    dim = cones[0].dim
    rows = [c.halfspace_rows() for c in cones]
    H = np.vstack([r for r in rows if r.shape[0]]) if any(
        r.shape[0] for r in rows) else np.zeros((0, dim))
    return cone_from_halfspaces(H, None, dim)


def halfspaces_of_vrep(vertices, rays=None, lineality=None):
    """H-representation of conv(vertices) + cone(rays) + span(lineality).

    Works by homogenization: the set equals the slice x_{d+1}=1 of the cone
    generated by (v,1), (r,0), +/-(l,0); the polar rays of that cone are the
    facet rows.
    """
    V = _as_points(vertices)
    d = V.shape[1]
    gens = [np.hstack([V, np.ones((V.shape[0], 1))])]
    if rays is not None and len(rays):
        R = _as_points(rays)
        gens.append(np.hstack([R, np.zeros((R.shape[0], 1))]))
    lin = None
    if lineality is not None and len(lineality):
        L = _as_points(lineality)
        lin = np.hstack([L, np.zeros((L.shape[0], 1))])
    # the recession direction (0,...,0,-1) must not sneak in: it is absent
    # from the generators, so the homogenized cone is exactly the closure.
    C = ConvexCone(np.vstack(gens), lin, dim=d + 1)
    H = C.halfspace_rows()
    if H.shape[0] == 0:
        return Polyhedron.whole_space(d)
    A = H[:, :d]
    b = -H[:, d]
    return Polyhedron(A, b)


def polytope_halfspaces(P):
    """H-representation of a V-polytope (dimension <= 4)."""
    return halfspaces_of_vrep(P.vertices)


def polyhedron_generators(P):
    """(vertices, rays, lineality) of an H-polyhedron, or None if empty.

    Vertices come from dim-subset facet intersection; rays and lineality
    from the recession cone.  A polyhedron whose lineality is nonzero has
    no vertices; a feasible point found by projection stands in instead.
    """
    if P._explicit_empty:
        return None
    d = P.dim
    rec = P.recession_cone()
    A, b = P.A, P.b
    verts = []
    if A.shape[0] >= d and rec.lineality.shape[0] == 0:
        for c in itertools.combinations(range(A.shape[0]), d):
            sub = A[list(c)]
            if abs(np.linalg.det(sub)) <= 1e-12:
                continue
            v = np.linalg.solve(sub, b[list(c)])
            scale = 1.0 + float(np.linalg.norm(v))
            if np.all(A @ v - b <= FEAS_TOL * scale):
                verts.append(v)
    if not verts:
        dist, point = P.project(np.zeros(d))
        if not np.isfinite(dist):
            return None
        verts = [point]
    V = _dedup_points(np.asarray(verts), 1e-9)
    return V, rec.generators, rec.lineality


def polyhedron_to_polytope(P):
    """Convert a bounded nonempty H-polyhedron to a V-polytope."""
    gen = polyhedron_generators(P)
    if gen is None:
        return EMPTY
    V, R, L = gen
    if R.shape[0] or L.shape[0]:
        raise UnboundedSetError("polyhedron is unbounded")
    return Polytope(V)


def linear_image_polyhedron(P, M):
    """Image {M x | x in P} of a polyhedron under a linear map."""
    gen = polyhedron_generators(P)
    if gen is None:
        return EMPTY
    V, R, L = gen
    M = np.asarray(M, dtype=float)
    Vi = V @ M.T
    Ri = R @ M.T if R.shape[0] else None
    Li = L @ M.T if L.shape[0] else None
    return halfspaces_of_vrep(Vi, Ri, Li)


def slice_cone_at(cone, tail, head_dim):
    """Solve {u | (u, -tail) in cone} as an H-polyhedron in u.

    Used to slice normal cones of graphs into coderivative values: with the
    cone living in (x, y) coordinates, head_dim is the x-block size.
    """
    H = cone.halfspace_rows()
    tail = np.asarray(tail, dtype=float).ravel()
    if H.shape[0] == 0:
        # cone is the whole space
        return Polyhedron.whole_space(head_dim)
    A = H[:, :head_dim]
    b = H[:, head_dim:] @ tail
    return Polyhedron(A, b)


def minkowski_vrep(parts):
    """Minkowski sum of (vertices, rays, lineality) triples."""
    parts = list(parts)
    V = parts[0][0]
    R = [parts[0][1]] if parts[0][1].shape[0] else []
    L = [parts[0][2]] if parts[0][2].shape[0] else []
    for Vi, Ri, Li in parts[1:]:
        V = (V[:, None, :] + Vi[None, :, :]).reshape(-1, V.shape[1])
        V = convex_hull_points(V)
        if Ri.shape[0]:
            R.append(Ri)
        if Li.shape[0]:
            L.append(Li)
    R = np.vstack(R) if R else np.zeros((0, V.shape[1]))
    L = np.vstack(L) if L else np.zeros((0, V.shape[1]))
    return V, R, L


def as_distance_set(piece):
    """Normalize a piece to something with .distance / .contains."""
    return piece
