"""Exact piecewise-affine graph models on the line.

Two families cover every 1-D structured integrand:

* :class:`MonotonePWA` - graphs of maximal-monotone piecewise-affine maps
  (subgradient maps of convex piecewise-smooth functions): affine segments
  between breakpoints plus vertical segments at jumps.
* :class:`IntervalPWA` - graphs of interval-valued maps x -> [lo(x), hi(x)]
  with piecewise-affine endpoints: trapezoid cells plus vertical faces where
  an endpoint jumps.

Both render to a :class:`PolyhedralUnion` of 2-D polytopes on a window, the
form consumed by the normal-cone and coderivative machinery.
"""

import numpy as np

from .geometry import PolyhedralUnion, Polytope


def upper_envelope_1d(slopes, intercepts):
    """Breakpoint structure of max_i (a_i x + b_i) on the line.

    Returns (breaks, cell_slopes, cell_intercepts): cell k is the interval
    (breaks[k-1], breaks[k]) with the convention breaks[-1]=-inf,
    breaks[n]=+inf; cells are ordered by increasing slope.
    """
    slopes = np.asarray(slopes, dtype=float).ravel()
    intercepts = np.asarray(intercepts, dtype=float).ravel()
    order = np.lexsort((intercepts, slopes))
    pruned = []  # (a, b) with strictly increasing a, keeping max b on ties
    for i in order:
        a, b = slopes[i], intercepts[i]
        if pruned and abs(pruned[-1][0] - a) <= 1e-13:
            pruned[-1] = (pruned[-1][0], max(pruned[-1][1], b))
            continue
        pruned.append((a, b))
    # hull trick: drop pieces never attaining the max
    stack = []
    for a, b in pruned:
        while stack:
            a0, b0 = stack[-1]
            x_cut = (b0 - b) / (a - a0)  # where the new piece overtakes
            if len(stack) >= 2:
                a1, b1 = stack[-2]
                x_prev = (b1 - b0) / (a0 - a1)
                if x_cut <= x_prev + 1e-13:
                    stack.pop()
                    continue
            break
        stack.append((a, b))
    breaks = []
    for k in range(1, len(stack)):
        a0, b0 = stack[k - 1]
        a1, b1 = stack[k]
        breaks.append((b0 - b1) / (a1 - a0))
    cs = [a for a, _ in stack]
    ci = [b for _, b in stack]
    return np.asarray(breaks), np.asarray(cs), np.asarray(ci)


class MonotonePWA:
    """Monotone piecewise-affine map on the line: value alpha_k + beta_k * x
    on cell k, with the closed jump interval [left, right] at each break."""

    def __init__(self, breaks, alphas, betas):
        self.breaks = np.asarray(breaks, dtype=float).ravel()
        self.alphas = np.asarray(alphas, dtype=float).ravel()
        self.betas = np.asarray(betas, dtype=float).ravel()
        if self.alphas.size != self.breaks.size + 1:
            raise ValueError("need one cell more than breaks")
        if self.betas.size != self.alphas.size:
            raise ValueError("alphas and betas must align")

    @classmethod
    def from_max_affine(cls, slopes, intercepts):
        """Subgradient map of x -> max_i (a_i x + b_i): cell values are the
        active slopes, jumping upward at each breakpoint."""
        breaks, cs, _ = upper_envelope_1d(slopes, intercepts)
        return cls(breaks, cs, np.zeros_like(cs))

    @classmethod
    def affine(cls, beta, alpha=0.0):
        """Single-cell affine map x -> alpha + beta x."""
        return cls(np.zeros(0), np.array([alpha]), np.array([beta]))

    def cell_of(self, x):
        return int(np.searchsorted(self.breaks, x, side="right"))

    def value_interval(self, x):
        """Closed value [lo, hi] at x (a jump interval at breakpoints)."""
        k = self.cell_of(x)
        v = self.alphas[k] + self.betas[k] * x
        for j, b in enumerate(self.breaks):
            if abs(x - b) <= 1e-12:
                left = self.alphas[j] + self.betas[j] * x
                right = self.alphas[j + 1] + self.betas[j + 1] * x
                return min(left, right), max(left, right)
        return v, v

    def scaled(self, w):
        return MonotonePWA(self.breaks, w * self.alphas, w * self.betas)

    @staticmethod
    def sum(parts):
        """Sum of monotone piecewise-affine maps (interval arithmetic at
        common refinement of the breakpoints)."""
        breaks = np.unique(np.concatenate([p.breaks for p in parts]))
        alphas = np.zeros(breaks.size + 1)
        betas = np.zeros(breaks.size + 1)
        for k in range(breaks.size + 1):
            if breaks.size == 0:
                mid = 0.0
            elif k == 0:
                mid = breaks[0] - 1.0
            elif k == breaks.size:
                mid = breaks[-1] + 1.0
            else:
                mid = 0.5 * (breaks[k - 1] + breaks[k])
            for p in parts:
                c = p.cell_of(mid)
                alphas[k] += p.alphas[c]
                betas[k] += p.betas[c]
        return MonotonePWA(breaks, alphas, betas)

    def graph_union(self, window):
        """Graph over [window[0], window[1]] as a union of 2-D segments."""
        w0, w1 = float(window[0]), float(window[1])
        cuts = [w0] + [b for b in self.breaks if w0 < b < w1] + [w1]
        pieces = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            k = self.cell_of((a + b) / 2.0)
            va = self.alphas[k] + self.betas[k] * a
            vb = self.alphas[k] + self.betas[k] * b
            pieces.append(Polytope([[a, va], [b, vb]], canonicalize=False))
        for j, br in enumerate(self.breaks):
            if not (w0 <= br <= w1):
                continue
            left = self.alphas[j] + self.betas[j] * br
            right = self.alphas[j + 1] + self.betas[j + 1] * br
            if abs(right - left) > 1e-13:
                pieces.append(Polytope([[br, left], [br, right]],
                                       canonicalize=False))
        return PolyhedralUnion(pieces)


class IntervalPWA:
    """Interval-valued map x -> [lo(x), hi(x)] with piecewise-affine
    endpoints sharing a common breakpoint grid."""

    def __init__(self, breaks, lo_alphas, lo_betas, hi_alphas, hi_betas):
        self.breaks = np.asarray(breaks, dtype=float).ravel()
        self.lo = MonotonePWA(self.breaks, lo_alphas, lo_betas)
        self.hi = MonotonePWA(self.breaks, hi_alphas, hi_betas)

    @classmethod
    def affine_band(cls, lo, hi, slope):
        """x -> [lo, hi] + slope * x."""
        return cls(np.zeros(0), [lo], [slope], [hi], [slope])

    @classmethod
    def from_monotone(cls, m):
        return cls(m.breaks, m.alphas, m.betas, m.alphas, m.betas)

    @classmethod
    def from_samples(cls, xs, lo_vals, hi_vals):
        """Secant (piecewise-linear interpolation) model through samples."""
        xs = np.asarray(xs, dtype=float).ravel()
        order = np.argsort(xs)
        xs = xs[order]
        lo_vals = np.asarray(lo_vals, dtype=float).ravel()[order]
        hi_vals = np.asarray(hi_vals, dtype=float).ravel()[order]
        if xs.size < 2:
            raise ValueError("secant model needs at least two samples")
        breaks = xs[1:-1]
        lo_a, lo_b, hi_a, hi_b = [], [], [], []
        for k in range(xs.size - 1):
            for (vals, aa, bb) in ((lo_vals, lo_a, lo_b),
                                   (hi_vals, hi_a, hi_b)):
                beta = (vals[k + 1] - vals[k]) / (xs[k + 1] - xs[k])
                alpha = vals[k] - beta * xs[k]
                aa.append(alpha)
                bb.append(beta)
        # the first/last secant extends beyond the sample range
        return cls(breaks, lo_a, lo_b, hi_a, hi_b)

    def value_interval(self, x):
        lo = min(self.lo.value_interval(x))
        hi = max(self.hi.value_interval(x))
        return lo, hi

    def scaled(self, w):
        return IntervalPWA(self.breaks, w * self.lo.alphas, w * self.lo.betas,
                           w * self.hi.alphas, w * self.hi.betas)

    @staticmethod
    def sum(parts):
        los = MonotonePWA.sum([p.lo for p in parts])
        his = MonotonePWA.sum([p.hi for p in parts])
        return IntervalPWA(los.breaks, los.alphas, los.betas,
                           his.alphas, his.betas)

    def graph_union(self, window):
        """Graph {(x, y) | lo(x) <= y <= hi(x)} over the window as a union
        of trapezoid cells plus vertical faces at endpoint jumps."""
        w0, w1 = float(window[0]), float(window[1])
        cuts = [w0] + [b for b in self.breaks if w0 < b < w1] + [w1]
        pieces = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            mid = (a + b) / 2.0
            kl = self.lo.cell_of(mid)
            kh = self.hi.cell_of(mid)
            la = self.lo.alphas[kl] + self.lo.betas[kl] * a
            lb = self.lo.alphas[kl] + self.lo.betas[kl] * b
            ha = self.hi.alphas[kh] + self.hi.betas[kh] * a
            hb = self.hi.alphas[kh] + self.hi.betas[kh] * b
            pieces.append(Polytope([[a, la], [b, lb], [a, ha], [b, hb]]))
        for br in self.breaks:
            if not (w0 <= br <= w1):
                continue
            lo, hi = self.value_interval(br)
            pieces.append(Polytope([[br, lo], [br, hi]], canonicalize=False))
        return PolyhedralUnion(pieces)
