"""Brute-force sampling oracles implementing the defining limit formulas
directly: normal cones via the limsup chord test on shrinking shells,
coderivatives as slices of sampled graph normals, and membership-based set
inclusion.  The oracle is a falsifier/cross-checker for the exact modules,
never a prover; identical (descriptor, seed, schedule) inputs reproduce
identical outputs bit for bit.

Membership tests are vectorized: they take an (N, d) array and return a
boolean mask.  Thin sets (graphs of single-valued maps, segment unions)
cannot be hit by rejection sampling, so a membership test may instead take
``(points, band)`` and accept everything within the band; the oracle then
widens each shell's acceptance slack by the band fraction.
"""

import inspect
from dataclasses import dataclass, field

import numpy as np

from .normal_cones import unit_direction_grid

DEFAULT_RADII = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
REGULAR = "regular"
LIMITING = "limiting"


@dataclass(frozen=True)
class RadiiSchedule:
    """Shrinking shell radii realizing the outer-limit processes."""

    radii: tuple = DEFAULT_RADII
    directions_per_shell: int = 0  # 0 = dimension default (256/1024)
    budget_per_shell: int = 100_000
    base_points_per_shell: int = 16
    band_fraction: float = 2e-4  # band = band_fraction * shell radius

    def __post_init__(self):
        r = tuple(float(v) for v in self.radii)
        if len(r) < 3 or any(r[i + 1] >= r[i] for i in range(len(r) - 1)):
            raise ValueError("radii must be strictly decreasing, >= 3 shells")
        object.__setattr__(self, "radii", r)

    def directions(self, dim):
        if self.directions_per_shell:
            return self.directions_per_shell
        return {1: 2, 2: 2048}.get(dim, 8192)

    def grid_floor(self, dim):
        """Acceptance slack floored at the direction-grid resolution, so a
        grid direction one spacing off a true normal still passes."""
        n = self.directions(dim)
        if dim == 1:
            return 0.0
        if dim == 2:
            return 2.0 * (2 * np.pi / n)
        return 2.0 * np.sqrt(4 * np.pi / n)


def band_membership(fn):
    """Mark a (points, band) membership test for thin sets."""
    fn.accepts_band = True
    return fn


def _wrap_membership(membership):
    """Normalize a membership test to the (points, band) calling form.

    Band acceptance is opt-in: either the ``accepts_band`` attribute (set
    by :func:`band_membership`) or a second parameter literally named
    ``band``; closures with extra default arguments stay plain tests.
    """
    if getattr(membership, "accepts_band", False):
        return membership, True
    try:
        params = list(inspect.signature(membership).parameters)
    except (TypeError, ValueError):
        params = ["points"]
    if len(params) == 2 and params[1] == "band":
        return membership, True
    return (lambda P, band: membership(P)), False


class SetSampler:
    """Point source for thin exact sets: random ball points are projected
    onto the set, so chords are exact and no band slack is needed.  Doubles
    as a membership test (distance within band)."""

    def __init__(self, S):
        self.set = S

    def __call__(self, P, band=1e-9):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        return np.array([self.set.distance(p) <= band for p in P],
                        dtype=bool)

    def sample(self, center, radius, n, rng):
        raw = _sample_ball(rng, center, radius, n)
        return np.asarray([self.set.project(p)[1] for p in raw])


@dataclass
class SampledSet:
    """Deterministically regenerable point cloud (unit directions for cones,
    rescaled x* points for coderivative slices)."""

    points: np.ndarray
    generating_radius: float
    seed: int
    inconclusive: bool = False
    note: str = ""

    @property
    def is_empty(self):
        return self.points.shape[0] == 0


def _sample_ball(rng, center, radius, n):
    d = center.size
    raw = rng.standard_normal((n, d))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radii = radius * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / d)
    return center + raw / norms * radii


def _collect_set_points(source, center, radius, band, budget, rng,
                        batch=4096, cap=8192):
    """Set points in the annulus [radius/8, radius]; the inner cutoff keeps
    banded chord errors bounded (closer scales belong to finer shells).

    ``source`` is either a (points, band) membership test (rejection
    sampling) or a :class:`SetSampler` (projection sampling).
    """
    pts = []
    seen = 0
    found = 0
    min_dist = max(radius / 8.0, 10.0 * band, 1e-14)
    is_sampler = isinstance(source, SetSampler)
    while seen < budget and found < cap:
        n = min(batch, budget - seen)
        if is_sampler:
            good = source.sample(center, radius, n, rng)
        else:
            cand = _sample_ball(rng, center, radius, n)
            mask = np.asarray(source(cand, band), dtype=bool)
            good = cand[mask]
        if good.shape[0]:
            dist = np.linalg.norm(good - center, axis=1)
            good = good[(dist > min_dist) & (dist <= radius + 1e-12)]
        if good.shape[0]:
            pts.append(good)
            found += good.shape[0]
        seen += n
    if not pts:
        return np.zeros((0, center.size))
    return np.vstack(pts)[:cap]


def _max_chord_scores(directions, points, center):
    """Per-direction max of <d, u> over unit chords u from center.

    In 2-D this is the cosine of the minimal circular angle gap between
    the direction and the chord set (all vectors are unit), computed from
    sorted angles; higher dimensions use a blocked matmul running max.
    """
    chords = points - center
    norms = np.linalg.norm(chords, axis=1, keepdims=True)
    chords = chords / norms
    d = directions.shape[1]
    if d == 2:
        ca = np.sort(np.arctan2(chords[:, 1], chords[:, 0]))
        da = np.arctan2(directions[:, 1], directions[:, 0])
        pos = np.searchsorted(ca, da)
        n = ca.size
        left = ca[(pos - 1) % n]
        right = ca[pos % n]
        gap = np.minimum(np.abs(_wrap_angle(da - left)),
                         np.abs(_wrap_angle(da - right)))
        return np.cos(gap)
    best = np.full(directions.shape[0], -np.inf)
    for k in range(0, chords.shape[0], 1024):
        block = chords[k:k + 1024]
        np.maximum(best, (directions @ block.T).max(axis=1), out=best)
    return best


def _wrap_angle(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def _regular_pass_mask(source, banded, center, directions, schedule, rng,
                       radii=None, budget=None, min_chords=4):
    """Directions passing the limsup chord test on every shell; the
    per-shell slack decays with the radius ratio, floored at the band noise
    for banded (thin-set) membership."""
    dcount = directions.shape[0]
    mask = np.ones(dcount, dtype=bool)
    r0 = schedule.radii[0]
    # two noise floors: band-accepted points at distance >= r/8 carry a
    # chord error of at most 16 * band_fraction, and a true normal ray may
    # sit up to one grid spacing from the nearest tested direction
    floor = schedule.grid_floor(directions.shape[1])
    if banded:
        floor = max(floor, 24.0 * schedule.band_fraction)
    sampled_any = False
    for r in (radii or schedule.radii):
        band = schedule.band_fraction * r if banded else 0.0
        pts = _collect_set_points(source, center, r, band,
                                  budget or schedule.budget_per_shell, rng)
        if pts.shape[0] < min_chords:
            continue
        sampled_any = True
        eps = max(0.05 * (r / r0), floor)
        scores = _max_chord_scores(directions, pts, center)
        mask &= scores <= eps
    return mask, sampled_any


def oracle_normal_cone(membership, xbar, kind=REGULAR,
                       schedule=RadiiSchedule(), seed=0):
    """Sampled unit normal directions at xbar.

    Regular: unit directions whose chord inner products stay below the
    per-shell slack on every shell.  Limiting: the union of regular results
    at sampled base points near xbar, clustered by angular tolerance 1e-2.
    """
    xbar = np.asarray(xbar, dtype=float).ravel()
    d = xbar.size
    directions = unit_direction_grid(d, schedule.directions(d))
    if isinstance(membership, SetSampler):
        source, banded = membership, False
    else:
        source, banded = _wrap_membership(membership)
    ss = np.random.SeedSequence(seed)
    if kind == REGULAR:
        rng = np.random.default_rng(ss)
        mask, sampled = _regular_pass_mask(source, banded, xbar,
                                           directions, schedule, rng)
        return SampledSet(points=directions[mask] if sampled
                          else np.zeros((0, d)),
                          generating_radius=schedule.radii[-1], seed=seed,
                          inconclusive=not sampled,
                          note="" if sampled else "no set points found")
    if kind != LIMITING:
        raise ValueError(f"unknown kind {kind!r}")
    children = ss.spawn(len(schedule.radii) + 1)
    tagged = []  # (direction, shell tag); tag -1 = the base point itself
    any_sampled = False
    rng0 = np.random.default_rng(children[0])
    mask0, sampled0 = _regular_pass_mask(source, banded, xbar, directions,
                                         schedule, rng0)
    any_sampled |= sampled0
    if sampled0:
        for v in directions[mask0]:
            tagged.append((v, -1))
    for si, r in enumerate(schedule.radii):
        rng = np.random.default_rng(children[si + 1])
        band = schedule.band_fraction * r if banded else 0.0
        pool = _collect_set_points(source, xbar, r, band,
                                   schedule.budget_per_shell, rng,
                                   cap=4 * schedule.base_points_per_shell)
        if pool.shape[0] == 0:
            continue
        any_sampled = True
        nb = min(schedule.base_points_per_shell, pool.shape[0])
        # regular cones at nearby base points: fresh (unclipped) sampling
        # around each base, at two inner scales
        sub_budget = max(schedule.budget_per_shell // (2 * nb), 2000)
        for bp in pool[:nb]:
            mask_b, sampled_b = _regular_pass_mask(
                source, banded, bp, directions, schedule, rng,
                radii=(r / 4.0, r / 16.0), budget=sub_budget,
                min_chords=8 * (2 ** (bp.size - 1)))
            if sampled_b:
                for v in directions[mask_b]:
                    tagged.append((v, si))
    # a direction is a limit of nearby normals only if it recurs across
    # shells; one-shell sightings are geometry at that scale, not the limit
    clusters = []  # (representative, tags)
    for v, tag in tagged:
        for k, (rep, tags) in enumerate(clusters):
            if np.linalg.norm(v - rep) <= 1e-2:
                tags.add(tag)
                break
        else:
            clusters.append((v, {tag}))
    n_shells_seen = len({t for _, tag in tagged for t in [tag] if t >= 0})
    kept = []
    for rep, tags in clusters:
        if -1 in tags or len([t for t in tags if t >= 0]) >= min(
                2, max(n_shells_seen, 1)):
            kept.append(rep)
    clustered = (np.asarray(kept) if kept else np.zeros((0, d)))
    return SampledSet(points=clustered,
                      generating_radius=schedule.radii[-1], seed=seed,
                      inconclusive=not any_sampled,
                      note="" if any_sampled else "no set points found")


def _cluster_directions(dirs, angular_tol):
    out = []
    for v in dirs:
        if all(np.linalg.norm(v - u) > angular_tol for u in out):
            out.append(v)
    return np.asarray(out) if out else np.zeros((0, dirs.shape[1] if
                                                 dirs.ndim == 2 else 1))


def oracle_coderivative(graph_membership, xbar, ybar, ystar, kind=LIMITING,
                        schedule=RadiiSchedule(), seed=0,
                        angular_tol=1e-2):
    """Sampled coderivative slice: normals of the graph at (xbar, ybar)
    whose y-component is anti-parallel to y* (within the angular tolerance),
    rescaled to the slice; for y* = 0 the result is a cone of unit x*
    directions (cone mode)."""
    xbar = np.asarray(xbar, dtype=float).ravel()
    ybar = np.asarray(ybar, dtype=float).ravel()
    ystar = np.asarray(ystar, dtype=float).ravel()
    base = np.concatenate([xbar, ybar])
    member2, _ = _wrap_membership(graph_membership)
    if not bool(np.all(member2(base[None, :], 1e-9))):
        raise ValueError("base pair is not on the graph")
    normals = oracle_normal_cone(graph_membership, base, kind, schedule,
                                 seed)
    n = xbar.size
    dx = normals.points[:, :n]
    dy = normals.points[:, n:]
    ny = np.linalg.norm(ystar)
    # a normal's y-part below the grid noise floor cannot be rescaled
    # meaningfully; this bounds detectable slice norms by ~1/floor
    gy_min = max(1.5 * schedule.grid_floor(base.size), 1e-9)
    out = []
    if ny <= 1e-14:
        # cone mode: normals with (numerically) zero y-component
        for gx, gy in zip(dx, dy):
            if np.linalg.norm(gy) <= max(angular_tol, gy_min) and \
                    np.linalg.norm(gx) > 1e-9:
                out.append(gx / np.linalg.norm(gx))
        note = "cone mode (y*=0): unit x* directions"
    else:
        yhat = ystar / ny
        for gx, gy in zip(dx, dy):
            ngy = np.linalg.norm(gy)
            if ngy <= gy_min:
                continue
            if np.linalg.norm(gy / ngy + yhat) <= angular_tol:
                out.append(gx * (ny / ngy))
        note = ""
    pts = np.asarray(out) if out else np.zeros((0, n))
    return SampledSet(points=pts, generating_radius=normals.generating_radius,
                      seed=seed, inconclusive=normals.inconclusive,
                      note=note or normals.note)


@dataclass
class OracleInclusion:
    max_violation: float
    tolerance: float
    verdict: str
    worst_point: np.ndarray = field(default=None)

    @property
    def holds(self):
        return self.verdict == "holds"


def estimate_distance_to_membership(point, membership, max_radius=4.0,
                                    directions=64, bisection=40,
                                    refine_stages=3):
    """Distance from a point to a membership-test set by radial search:
    grow rays until members are found, bisect along hitting rays, then
    refine directions angularly around the best ray."""
    point = np.asarray(point, dtype=float).ravel()
    if bool(np.all(membership(point[None, :]))):
        return 0.0
    d = point.size
    dirs = unit_direction_grid(d, directions if d > 1 else 2)

    def bisect(u, hi):
        lo = 0.0
        for _ in range(bisection):
            mid = 0.5 * (lo + hi)
            if bool(np.all(membership((point + mid * u)[None, :]))):
                hi = mid
            else:
                lo = mid
        return hi

    best = np.inf
    best_dir = None
    r = 1e-6
    radii = []
    while r <= max_radius:
        radii.append(r)
        r *= 1.6
    for rad in radii:
        if rad >= best:
            break
        cand = point + rad * dirs
        mask = np.asarray(membership(cand), dtype=bool)
        for k in np.nonzero(mask)[0]:
            hit = bisect(dirs[k], rad)
            if hit < best:
                best = hit
                best_dir = dirs[k]
    if best_dir is None or d == 1:
        return best
    window = 2 * np.pi / (directions if d > 1 else 2)
    for _ in range(refine_stages):
        locals_ = _local_directions(best_dir, window, 32)
        probe = best * 1.02 + 1e-12
        cand = point + probe * locals_
        mask = np.asarray(membership(cand), dtype=bool)
        for k in np.nonzero(mask)[0]:
            hit = bisect(locals_[k], probe)
            if hit < best:
                best = hit
                best_dir = locals_[k]
        window /= 6.0
    return best


def _local_directions(center, window, count):
    center = center / np.linalg.norm(center)
    d = center.size
    out = [center]
    basis = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        t = e - (e @ center) * center
        n = np.linalg.norm(t)
        if n > 1e-9:
            basis.append(t / n)
    steps = max(count // (2 * len(basis)), 1)
    for t in basis:
        for k in range(1, steps + 1):
            theta = window * k / steps
            for sgn in (1.0, -1.0):
                out.append(np.cos(theta) * center
                           + np.sin(theta) * sgn * t)
    return np.asarray(out)


def oracle_set_inclusion(points, membership, tol, max_radius=4.0):
    """maxViolation = max over the cloud of the estimated distance to the
    membership set; verdict thresholded at tol."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    worst = 0.0
    worst_pt = None
    for p in points:
        dist = estimate_distance_to_membership(p, membership, max_radius)
        if dist > worst:
            worst = dist
            worst_pt = p
    verdict = "holds" if worst <= tol else "violated"
    return OracleInclusion(max_violation=float(worst), tolerance=float(tol),
                           verdict=verdict, worst_point=worst_pt)


def membership_of_set(S, tol=1e-9):
    """Vectorized membership test of an exact full-dimensional set value."""
    def member(P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        return np.array([S.contains(p, tol) for p in P], dtype=bool)
    return member


def band_membership_of_set(S):
    """Band membership test (for thin sets: graphs, segment unions): a
    point is accepted when its distance to the set is at most the band."""
    @band_membership
    def member(P, band):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        return np.array([S.distance(p) <= band for p in P], dtype=bool)
    return member
