"""Growth rate g(p), its derivative, the relative rate and the growth-optimal fraction.

    g(p)   = p a - c p**2 / 2 - int (p x - log(1 + p x)) kappa(dx)
    dg(p)  = a - p c - int p x**2 / (1 + p x) kappa(dx)

g is -inf outside I = [ell, r]; dg is extended as a constant beyond the ends
of I and forced to 0 when ell = 0 = r.  At a finite end the value is -inf
(resp. +inf) without quadrature whenever the integrand is not integrable
there: an atom on the edge, a density that stays positive up to the edge,
or a boundary tilt kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .characteristics import PartitionCase, SupportInterval, Triplet, bounds, classify
from .errors import BracketFailure, DivergentIntegral
from .viability import side_first_moment

INF = math.inf
P_MAX = 1e8
DG_TOL = 1e-10
X_TOL = 1e-12

_DIVERGENT_EDGE = ("atom", "density", "kernel")


def _grad_integrand(p):
    p = np.asarray(p, dtype=float)
    if p.ndim == 0:
        pf = float(p)
        return lambda x: pf * x * x / (1.0 + pf * x)
    return lambda x: p * x[:, None] ** 2 / (1.0 + p * x[:, None])


_SERIES = np.array([(-1.0) ** k / k for k in range(2, 11)])


def x_minus_log1p(y):
    """y - log(1 + y) without cancellation for small |y| (power series below 1e-2)."""
    y = np.asarray(y, dtype=float)
    small = np.abs(y) < 1e-2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = y - np.log1p(y)
    if np.any(small):
        ys = y[small]
        acc = np.zeros_like(ys)
        for c in _SERIES[::-1]:
            acc = (acc + c) * ys
        out[small] = acc * ys
    return out


def _growth_integrand(p):
    p = np.asarray(p, dtype=float)
    if p.ndim == 0:
        pf = float(p)
        return lambda x: x_minus_log1p(pf * x)
    return lambda x: x_minus_log1p(p * x[:, None])


def _edge_side(which):
    # dg at r probes the left edge of kappa (x_min = -1/r), at ell the right edge
    return "lo" if which == "r" else "hi"


def endpoint_derivative(t: Triplet, which: str) -> float:
    """dg at ell ('ell') or r ('r'), including the limits at infinite ends."""
    b = bounds(t.kappa)
    kappa = t.kappa
    if which == "r":
        if math.isinf(b.r):
            if t.c > 0:
                return -INF
            m, _ = side_first_moment(kappa, "positive")
            return float(t.a - m)
        if b.r == 0.0:
            return float(t.a)
        if kappa.edge_behavior(_edge_side("r")) in _DIVERGENT_EDGE:
            return -INF
        return _interior_derivative(t, b.r)
    if math.isinf(b.ell):
        if t.c > 0:
            return INF
        m, _ = side_first_moment(kappa, "negative")
        return float(t.a - m)
    if b.ell == 0.0:
        return t.a
    if kappa.edge_behavior(_edge_side("ell")) in _DIVERGENT_EDGE:
        return INF
    return _interior_derivative(t, b.ell)


def _interior_derivative(t, p):
    if p == 0.0:
        return float(t.a)
    val = t.kappa.integrate(_grad_integrand(p)) if not t.kappa.is_null else 0.0
    return float(t.a - p * t.c - val)


def growth_derivative(t: Triplet, p: float) -> float:
    b = bounds(t.kappa)
    if classify(b) is PartitionCase.P8:
        return 0.0
    if p <= b.ell:
        return endpoint_derivative(t, "ell")
    if p >= b.r:
        return endpoint_derivative(t, "r")
    return _interior_derivative(t, float(p))


def growth(t: Triplet, p: float) -> float:
    b = bounds(t.kappa)
    if not b.contains(p):
        return -INF
    if p == 0.0:
        return 0.0
    if (p == b.r and t.kappa.edge_behavior("lo") in ("atom", "kernel")) or \
            (p == b.ell and t.kappa.edge_behavior("hi") in ("atom", "kernel")):
        return -INF
    val = t.kappa.integrate(_growth_integrand(p)) if not t.kappa.is_null else 0.0
    return float(p * t.a - 0.5 * t.c * p * p - val)


def rel_rate(t: Triplet, p: float, p_ref: float) -> float:
    """Relative rate of return of fraction p against p_ref: (p - p_ref) dg(p_ref)."""
    if p == p_ref:
        return 0.0
    d = growth_derivative(t, p_ref)
    if not math.isfinite(d):
        raise DivergentIntegral(f"dg({p_ref}) is {d}: relative rate undefined")
    return (p - p_ref) * d


def curve(t: Triplet, grid) -> tuple[np.ndarray, np.ndarray]:
    """g and dg on a grid, with a single vectorized integration for the interior points."""
    grid = np.asarray(grid, dtype=float)
    b = bounds(t.kappa)
    case = classify(b)
    g = np.empty_like(grid)
    dg = np.empty_like(grid)
    inner = (grid > b.ell) & (grid < b.r) & (grid != 0.0)
    for i in np.nonzero(~inner)[0]:
        g[i] = growth(t, grid[i])
        dg[i] = growth_derivative(t, grid[i])
    if np.any(inner):
        p = grid[inner]
        if t.kappa.is_null:
            ig = np.zeros_like(p)
            idg = np.zeros_like(p)
        else:
            both = t.kappa.integrate(lambda x: np.concatenate(
                [_growth_integrand(p)(x), _grad_integrand(p)(x)], axis=1))
            ig, idg = both[:p.size], both[p.size:]
        g[inner] = p * t.a - 0.5 * t.c * p * p - ig
        dg[inner] = t.a - p * t.c - idg
    if case is PartitionCase.P8:
        dg[:] = 0.0
    return g, dg


@dataclass(frozen=True)
class OptimalFraction:
    p: float
    dg_ell: float
    dg_r: float
    dg_at_p: float
    foc: bool
    rule: str
    iterations: int = 0

    def to_dict(self):
        return {"p_tilde": self.p, "dg_ell": self.dg_ell, "dg_r": self.dg_r,
                "dg_at_p": self.dg_at_p, "first_order_condition": self.foc, "rule": self.rule,
                "iterations": self.iterations}


def optimal_fraction(t: Triplet, tol: float = DG_TOL, p_max: float = P_MAX) -> OptimalFraction:
    """p_tilde = inf{p in I : dg(p) <= 0}, with the boundary conventions."""
    b = bounds(t.kappa)
    if classify(b) is PartitionCase.P8:
        return OptimalFraction(0.0, 0.0, 0.0, 0.0, True, "P8")
    dl = endpoint_derivative(t, "ell")
    dr = endpoint_derivative(t, "r")
    if dl == 0.0 and dr == 0.0:
        return OptimalFraction(0.0, dl, dr, 0.0, True, "flat")
    if dr > 0.0:
        return OptimalFraction(b.r, dl, dr, dr, False, "empty-set")
    if math.isfinite(b.ell) and dl <= 0.0:
        return OptimalFraction(b.ell, dl, dr, dl, dl == 0.0, "left-end")

    def dg(p):
        return growth_derivative(t, p)

    a0 = float(t.a)
    if a0 == 0.0:
        # dg(0) = a = 0 and dg is strictly decreasing here (the flat case returned above)
        return OptimalFraction(0.0, dl, dr, 0.0, True, "zero-drift")
    if a0 > 0.0:
        lo, hi = 0.0, None
        if math.isfinite(b.r):
            hi = b.r
        else:
            step = 1.0
            while True:
                if dg(step) <= 0.0:
                    hi = step
                    break
                lo = step
                step *= 4.0
                if step > p_max:
                    raise BracketFailure(f"no sign change of dg up to p_max={p_max}",
                                         bracket=(lo, step))
    else:
        hi, lo = 0.0, None
        if math.isfinite(b.ell):
            lo = b.ell
        else:
            step = -1.0
            while True:
                if dg(step) > 0.0:
                    lo = step
                    break
                hi = step
                step *= 4.0
                if step < -p_max:
                    raise BracketFailure(f"no sign change of dg down to -p_max={p_max}",
                                         bracket=(step, hi))
    # absolute resolution, down to a few ulps of the bracket ends
    xtol = max(X_TOL * 0.1, 8.0 * np.finfo(float).eps * max(abs(lo), abs(hi)))
    it = 0
    while hi - lo > xtol and it < 200:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if dg(mid) <= 0.0:
            hi = mid
        else:
            lo = mid
        it += 1
    # the midpoint of the final bracket keeps the rule exactly equivariant under reflection
    p = 0.5 * (lo + hi)
    d = dg(p)
    interior = b.ell < p < b.r
    if interior and abs(d) > tol:
        # dg jumps across the bracket (possible only through rounding); keep the closer end
        for q in (lo, hi):
            dq = dg(q)
            if abs(dq) < abs(d):
                p, d = q, dq
    return OptimalFraction(float(p), dl, dr, float(d), bool(interior and abs(d) <= tol) or d == 0.0,
                           "bisection", it)


@dataclass
class GrowthCurve:
    """Cached (p, g, dg) samples of one triplet."""

    triplet: Triplet
    grid: np.ndarray
    g: np.ndarray = field(init=False)
    dg: np.ndarray = field(init=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.g, self.dg = curve(self.triplet, self.grid)

    @classmethod
    def over_interval(cls, t: Triplet, n=1000, span=10.0, margin=0.0):
        b = bounds(t.kappa)
        lo = b.ell if math.isfinite(b.ell) else -span
        hi = b.r if math.isfinite(b.r) else span
        if margin:
            w = hi - lo
            lo, hi = lo + margin * w, hi - margin * w
        return cls(t, np.linspace(lo, hi, n))

    def concavity_violation(self):
        """Largest positive second difference of g on the grid (finite values only)."""
        g = self.g
        ok = np.isfinite(g[:-2]) & np.isfinite(g[1:-1]) & np.isfinite(g[2:])
        d2 = g[:-2] - 2 * g[1:-1] + g[2:]
        return float(np.max(d2[ok], initial=-INF))

    def monotonicity_violation(self):
        d = np.diff(self.dg)
        ok = np.isfinite(d)
        return float(np.max(d[ok], initial=-INF))

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("p,g,dg\n")
            for p, g, d in zip(self.grid, self.g, self.dg):
                fh.write(f"{_fmt(p)},{_fmt(g)},{_fmt(d)}\n")


def _fmt(v):
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "+inf" if v > 0 else "-inf"
    return repr(float(v))


def support_interval(t: Triplet) -> SupportInterval:
    return bounds(t.kappa)
