"""Hot numeric kernels: exact Euclidean projections onto V-polytopes,
H-polyhedra, and finitely generated cones by face enumeration.

Every kernel is written as plain numpy source and compiled with
``numba.njit`` when available.  Setting ``EIMKIT_DISABLE_NUMBA=1`` in the
environment (or running without numba installed) selects the uncompiled
pure-numpy path; both paths execute the same statements and return
bit-identical results.  ``benchmarks/bench_kernels.py`` compares the two.

All projections are exact (up to the stated dual/feasibility tolerances)
because the minimizer lies on a face spanned by at most dim+1 vertices /
dim rows / dim generators; the caller supplies the padded subset table.
"""

import os

import numpy as np

NUMBA_ENABLED = os.environ.get("EIMKIT_DISABLE_NUMBA", "0") != "1"

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def _solve_pivoted(M, rhs):
    # Gaussian elimination with partial pivoting on a tiny system (<= 5x5).
    # Returns (ok, solution); ok is False when a pivot falls below threshold,
    # which marks the subset as affinely/linearly dependent and skippable.
    n = M.shape[0]
    A = M.copy()
    x = rhs.copy()
    scale = 0.0
    for i in range(n):
        for j in range(n):
            a = abs(A[i, j])
            if a > scale:
                scale = a
    if scale == 0.0:
        return False, x
    tol = 1e-12 * scale
    for col in range(n):
        piv = col
        big = abs(A[col, col])
        for r in range(col + 1, n):
            a = abs(A[r, col])
            if a > big:
                big = a
                piv = r
        if big <= tol:
            return False, x
        if piv != col:
            for j in range(n):
                tmp = A[col, j]
                A[col, j] = A[piv, j]
                A[piv, j] = tmp
            tmp = x[col]
            x[col] = x[piv]
            x[piv] = tmp
        inv = 1.0 / A[col, col]
        for r in range(col + 1, n):
            f = A[r, col] * inv
            if f != 0.0:
                for j in range(col, n):
                    A[r, j] -= f * A[col, j]
                x[r] -= f * x[col]
    for col in range(n - 1, -1, -1):
        s = x[col]
        for j in range(col + 1, n):
            s -= A[col, j] * x[j]
        x[col] = s / A[col, col]
    return True, x


def _hull_project(V, x, combos, sizes, dual_tol):
    # Distance and projection of x onto conv(rows of V).
    # combos: padded index table of vertex subsets of size 1..d+1.
    k, d = V.shape
    best = np.inf
    proj = np.zeros(d)
    for c in range(combos.shape[0]):
        r = sizes[c]
        if r == 1:
            v = V[combos[c, 0]]
            dist2 = 0.0
            for j in range(d):
                dist2 += (v[j] - x[j]) ** 2
            if dist2 < best:
                best = dist2
                for j in range(d):
                    proj[j] = v[j]
            continue
        # affine least squares: p = v0 + B^T mu, B rows are v_i - v0
        i0 = combos[c, 0]
        B = np.zeros((r - 1, d))
        for i in range(1, r):
            vi = combos[c, i]
            for j in range(d):
                B[i - 1, j] = V[vi, j] - V[i0, j]
        rhs = np.zeros(r - 1)
        for i in range(r - 1):
            s = 0.0
            for j in range(d):
                s += B[i, j] * (x[j] - V[i0, j])
            rhs[i] = s
        G = B @ B.T
        ok, mu = _solve_pivoted(G, rhs)
        if not ok:
            continue
        lam0 = 1.0
        feas = True
        for i in range(r - 1):
            lam0 -= mu[i]
            if mu[i] < -dual_tol:
                feas = False
        if lam0 < -dual_tol or not feas:
            continue
        dist2 = 0.0
        p = np.zeros(d)
        for j in range(d):
            s = V[i0, j]
            for i in range(r - 1):
                s += mu[i] * B[i, j]
            p[j] = s
            dist2 += (s - x[j]) ** 2
        if dist2 < best:
            best = dist2
            for j in range(d):
                proj[j] = p[j]
    return np.sqrt(best), proj


def _polyhedron_project(A, b, x, combos, sizes, dual_tol, feas_tol):
    # Distance and projection of x onto {z | A z <= b}; rows are assumed
    # normalized.  Returns distance inf when the polyhedron is empty.
    m, d = A.shape
    best = np.inf
    proj = x.copy()
    for c in range(combos.shape[0]):
        r = sizes[c]
        if r == 0:
            feas = True
            for i in range(m):
                s = -b[i]
                for j in range(d):
                    s += A[i, j] * x[j]
                if s > feas_tol:
                    feas = False
                    break
            if feas:
                return 0.0, x.copy()
            continue
        # KKT for equality-active subset J: p = x - A_J^T nu,
        # (A_J A_J^T) nu = A_J x - b_J, nu >= 0 for optimality.
        AJ = np.zeros((r, d))
        rhs = np.zeros(r)
        for i in range(r):
            ri = combos[c, i]
            s = -b[ri]
            for j in range(d):
                AJ[i, j] = A[ri, j]
                s += A[ri, j] * x[j]
            rhs[i] = s
        G = AJ @ AJ.T
        ok, nu = _solve_pivoted(G, rhs)
        if not ok:
            continue
        dual_ok = True
        for i in range(r):
            if nu[i] < -dual_tol:
                dual_ok = False
                break
        if not dual_ok:
            continue
        p = np.zeros(d)
        for j in range(d):
            s = x[j]
            for i in range(r):
                s -= nu[i] * AJ[i, j]
            p[j] = s
        feas = True
        for i in range(m):
            s = -b[i]
            for j in range(d):
                s += A[i, j] * p[j]
            if s > feas_tol:
                feas = False
                break
        if not feas:
            continue
        dist2 = 0.0
        for j in range(d):
            dist2 += (p[j] - x[j]) ** 2
        if dist2 < best:
            best = dist2
            for j in range(d):
                proj[j] = p[j]
    if best == np.inf:
        return np.inf, proj
    return np.sqrt(best), proj


def _cone_project(G, x, combos, sizes, dual_tol):
    # Distance and projection of x onto cone(rows of G); lineality directions
    # must be folded in as +/- generator pairs by the caller.
    k, d = G.shape
    best = 0.0
    for j in range(d):
        best += x[j] * x[j]
    proj = np.zeros(d)  # the apex is always a candidate
    for c in range(combos.shape[0]):
        r = sizes[c]
        if r == 0:
            continue
        GJ = np.zeros((r, d))
        rhs = np.zeros(r)
        for i in range(r):
            gi = combos[c, i]
            s = 0.0
            for j in range(d):
                GJ[i, j] = G[gi, j]
                s += G[gi, j] * x[j]
            rhs[i] = s
        M = GJ @ GJ.T
        ok, lam = _solve_pivoted(M, rhs)
        if not ok:
            continue
        feas = True
        for i in range(r):
            if lam[i] < -dual_tol:
                feas = False
                break
        if not feas:
            continue
        dist2 = 0.0
        p = np.zeros(d)
        for j in range(d):
            s = 0.0
            for i in range(r):
                s += lam[i] * GJ[i, j]
            p[j] = s
            dist2 += (s - x[j]) ** 2
        if dist2 < best:
            best = dist2
            for j in range(d):
                proj[j] = p[j]
    return np.sqrt(best), proj


if NUMBA_ENABLED:
    _solve_pivoted = njit(cache=True)(_solve_pivoted)
    hull_project = njit(cache=True)(_hull_project)
    polyhedron_project = njit(cache=True)(_polyhedron_project)
    cone_project = njit(cache=True)(_cone_project)
else:
    hull_project = _hull_project
    polyhedron_project = _polyhedron_project
    cone_project = _cone_project


def active_backend():
    """Name of the kernel backend selected at import time."""
    return "numba" if NUMBA_ENABLED else "numpy"
