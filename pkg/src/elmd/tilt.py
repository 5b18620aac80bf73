"""Tilt fields Y, tilted measures kappa^Y and the nine-case construction.

A field is piecewise constant on a partition of R, plus optional boundary
kernels.  A boundary kernel lives on offsets o in (0, o_e] from a finite
support edge E = -1/r and adds m * H(o) to the local constant, where

    H(o) = int_{s_e}^{s(o)} rho / (sigma**2 K(sigma)) d sigma,   s(o) = -log(rho o),

rho = 1/|E| and K(sigma) is the base mass of the offsets (0, e**-sigma / rho].
Everything about a kernel is computed in the log-offset variable s, because
o_e = e**-s_e / rho is routinely far below the float spacing around E.
Fubini gives the closed form

    int_{(0, o]} H dK = rho / s(o) + K(o) H(o),

which provides exact mass bookkeeping and the far-tail contribution of
integrals beyond the last quadrature panel.

Constant pieces store both log(Y) and Y - 1: the first for tail values like
1/(sqrt(b) kappa(b, inf)) ~ e**700, the second for values near 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import quadrature as quad
from .characteristics import PartitionCase, Triplet, bounds, classify
from .errors import InsufficientMass, InvalidParam, QuadratureFailure
from .jump_measure import JumpMeasure, _in_interval

INF = math.inf
GL_X, GL_W = leggauss(20)
PANEL = 0.5
S_RESOLVE = 45.0  # beyond this log-offset no float x distinguishes the point from E


def _exp(v):
    return math.exp(v) if v < 709.0 else INF


def _scalar(v):
    return float(np.asarray(v, dtype=float).reshape(-1)[0])


def _log_abs_em1(logv, em1):
    """log|Y - 1| and its sign."""
    if math.isfinite(em1) and abs(em1) < 1e300:
        if em1 == 0.0:
            return -INF, 0.0
        return math.log(abs(em1)), math.copysign(1.0, em1)
    # Y huge: Y - 1 = e**logv (1 - e**-logv)
    return logv + math.log(-math.expm1(-logv)), 1.0


@dataclass(frozen=True)
class Piece:
    """Constant value on an interval with explicit endpoint flags."""

    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool
    logv: float = 0.0
    em1: float = 0.0
    label: str = "constant"

    @property
    def closed(self):
        return (self.lo_closed, self.hi_closed)

    @property
    def value(self):
        return math.exp(self.logv) if self.logv < 709.0 else INF

    def reflect(self):
        return Piece(-self.hi, -self.lo, self.hi_closed, self.lo_closed, self.logv, self.em1, self.label)

    def times(self, other: "Piece", lo, hi, lo_closed, hi_closed):
        em1 = self.em1 + other.em1 + self.em1 * other.em1
        label = self.label if other.label == "constant" else other.label
        if self.label != "constant" and other.label != "constant":
            label = self.label + "*" + other.label
        return Piece(lo, hi, lo_closed, hi_closed, self.logv + other.logv, em1, label)


def _unit_partition(em1=0.0):
    return [Piece(-INF, INF, True, True, math.log1p(em1), em1)]


class BoundaryKernel:
    """The m * H(o) branch near a finite support edge of ``root``."""

    def __init__(self, root: JumpMeasure, side: str, s_e: float, m: float = 1.0,
                 kscale: float = 1.0):
        self.root = root
        self.side = side
        self.E = root.edge(side)
        if not math.isfinite(self.E) or self.E == 0.0:
            raise InvalidParam("boundary kernel needs a finite nonzero edge")
        self.sgn = 1.0 if side == "lo" else -1.0
        self.rho = 1.0 / abs(self.E)
        self.s_e = float(s_e)
        self.m = float(m)
        self.kscale = float(kscale)
        self._build()

    # geometry
    def offset(self, s):
        return np.exp(-np.asarray(s, dtype=float)) / self.rho

    def s_of(self, o):
        with np.errstate(divide="ignore"):
            return -np.log(self.rho * np.asarray(o, dtype=float))

    def x_of(self, s):
        return self.E + self.sgn * self.offset(s)

    @property
    def o_e(self):
        return math.exp(-self.s_e) / self.rho

    def inside_point(self):
        """A float strictly inside the region, even when the region is below float spacing."""
        x = self.E + self.sgn * 0.5 * self.o_e
        if x == self.E:
            x = float(np.nextafter(self.E, self.E + self.sgn))
        return x

    def region(self):
        """Region in x as (lo, hi, lo_closed, hi_closed); may be sub-resolution."""
        if self.sgn > 0:
            return self.E, self.E + self.o_e, False, True
        return self.E - self.o_e, self.E, True, False

    def K_root(self, s):
        return self.root.edge_mass(self.side, self.offset(s))

    def K(self, s):
        return self.kscale * self.K_root(s)

    def _h(self, s):
        return self.rho / (s * s * self.K(s))

    def _build(self):
        self.S_top = max(self.s_e, S_RESOLVE)
        knots = set(np.arange(self.s_e, self.S_top, PANEL).tolist()) | {self.S_top}
        for d in self.root.edge_breaks(self.side):
            s = float(self.s_of(d))
            if self.s_e < s < self.S_top:
                knots.add(s)
        self.knots = np.array(sorted(knots))
        a, b = self.knots[:-1], self.knots[1:]
        half = 0.5 * (b - a)
        nodes = (a[:, None] + half[:, None] * (GL_X[None, :] + 1.0))
        weights = half[:, None] * GL_W[None, :]
        if a.size:
            panel_int = (weights * self._h(nodes.ravel()).reshape(nodes.shape)).sum(axis=1)
            self.H_knots = np.concatenate([[0.0], np.cumsum(panel_int)])
        else:
            self.H_knots = np.array([0.0])
        self.nodes = nodes.ravel()
        self.weights = weights.ravel()
        if self.nodes.size:
            self.H_nodes = self.H(self.nodes)
            o = self.offset(self.nodes)
            self.pdfo_nodes = self.root.edge_pdf(self.side, o) * o
        else:
            self.H_nodes = self.pdfo_nodes = np.empty(0)
        # atoms of the root strictly inside the resolvable part of the region
        ax = self.root.atoms_x
        off = self.sgn * (ax - self.E)
        keep = (off > 0) & (off <= self.o_e)
        self.atom_s = self.s_of(off[keep])
        self.atom_x = ax[keep]
        self.atom_w = self.root.atoms_w[keep]
        self.atom_H = self.H(self.atom_s) if self.atom_s.size else np.empty(0)

    def H(self, s):
        """H at log-offsets s (vectorized); 0 for s <= s_e."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros_like(s)
        inside = s > self.s_e
        if not np.any(inside):
            return out
        si = s[inside]
        j = np.clip(np.searchsorted(self.knots, si, side="right") - 1, 0, max(self.knots.size - 2, 0))
        start = self.knots[j]
        base = self.H_knots[j]
        beyond = si > self.S_top
        start = np.where(beyond, self.S_top, start)
        base = np.where(beyond, self.H_knots[-1], base)
        half = 0.5 * (si - start)
        nodes = start[:, None] + half[:, None] * (GL_X[None, :] + 1.0)
        part = (half[:, None] * GL_W[None, :] * self._h(nodes.ravel()).reshape(nodes.shape)).sum(axis=1)
        if np.any(beyond & (si - self.S_top > PANEL)):
            # long stretches past the cached panels: integrate in panel steps
            for k in np.nonzero(beyond & (si - self.S_top > PANEL))[0]:
                grid = np.append(np.arange(self.S_top, si[k], PANEL), si[k])
                hh = 0.5 * np.diff(grid)
                nd = grid[:-1, None] + hh[:, None] * (GL_X[None, :] + 1.0)
                part[k] = (hh[:, None] * GL_W[None, :] * self._h(nd.ravel()).reshape(nd.shape)).sum()
        out[inside] = base + part
        return out

    def I_root(self, s):
        """int over offsets (0, o(s)] of H d(kappa_root)."""
        s = np.asarray(s, dtype=float)
        return self.rho / (self.kscale * s) + self.K_root(s) * self.H(s)

    @property
    def h_mass(self):
        """Root-measure mass of m * H over the whole region."""
        return self.m * self.rho / (self.kscale * self.s_e)

    def integrate_H(self, f):
        """int over the region of f(x) H(x) kappa_root(dx), without the factor m."""
        total = 0.0
        if self.nodes.size:
            x = self.x_of(self.nodes)
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                v = np.asarray(f(x), dtype=float)
            w = self.weights * self.H_nodes * self.pdfo_nodes
            total = quad._weighted(v, w)
        if self.atom_x.size:
            v = np.asarray(f(self.atom_x), dtype=float)
            total = total + np.tensordot(self.atom_H * self.atom_w, v, axes=(0, 0))
        tail = _scalar(self.I_root(self.S_top))
        if tail > 0:
            vE = np.asarray(f(np.array([self.E])), dtype=float)[0]
            total = total + tail * vE
        return total

    def root_mass(self):
        return _scalar(self.K_root(self.s_e))

    def l1_parts(self, d):
        """int over the region of |d - 1 + m H| d(kappa_root), and of (d - 1 + m H)."""
        Ke = self.root_mass()
        signed = (d - 1.0) * Ke + self.h_mass
        if d >= 1.0 or self.m <= 0:
            return abs(signed) if d >= 1.0 else None, signed
        target = (1.0 - d) / self.m
        lo, hi = self.s_e, self.s_e + 1.0
        while self.H(hi)[0] < target:
            lo, hi = hi, hi + 2.0 * (hi - self.s_e)
            if hi > 1e6:
                raise QuadratureFailure("boundary kernel never reaches the crossing level")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.H(mid)[0] < target:
                lo = mid
            else:
                hi = mid
        s_star = hi
        K_star = _scalar(self.K_root(s_star))
        I_star = _scalar(self.I_root(s_star)) * self.m
        I_e = self.h_mass
        neg = (1.0 - d) * (Ke - K_star) - (I_e - I_star)
        pos = (d - 1.0) * K_star + I_star
        return neg + pos, signed

    def times(self, c):
        k = object.__new__(BoundaryKernel)
        k.__dict__.update(self.__dict__)
        k.m = self.m * c
        return k

    def reflect(self):
        other = "hi" if self.side == "lo" else "lo"
        return BoundaryKernel(self.root.reflect(), other, self.s_e, self.m, self.kscale)

    def describe(self):
        lo, hi, _, _ = self.region()
        return {"kind": "boundary-integral", "edge": self.E, "log_offset_top": self.s_e,
                "region": [lo, hi], "multiplier": self.m, "base_scale": self.kscale}


@dataclass(frozen=True, eq=False)
class TiltField:
    """Piecewise-constant field plus boundary kernels, relative to the root measure."""

    pieces: tuple
    kernels: tuple = ()
    case: str = "identity"
    params: dict = field(default_factory=dict)
    eta: float | None = None
    factors: tuple = ()

    @classmethod
    def identity(cls, case="identity", eta=None, params=None):
        return cls(tuple(_unit_partition()), (), case, dict(params or {}), eta)

    @property
    def is_identity(self):
        return not self.kernels and all(p.em1 == 0.0 for p in self.pieces)

    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.full(x.shape, -1, dtype=int)
        for i, p in enumerate(self.pieces):
            hit = _in_interval(x, p.lo, p.hi, p.closed) & (idx < 0)
            idx[hit] = i
        return idx

    def piece_at(self, x):
        return self.pieces[int(self._locate(np.array([x]))[0])]

    def log_evaluate(self, x):
        """log Y(x); stays finite where Y itself overflows (tail values like e**1000)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        logv = np.array([p.logv for p in self.pieces])
        out = logv[self._locate(x)]
        for k in self.kernels:
            o = k.sgn * (x - k.E)
            s = k.s_of(np.where(o > 0, o, 1.0))
            inr = (o > 0) & (s >= k.s_e)
            if np.any(inr):
                with np.errstate(divide="ignore"):
                    out[inr] = np.logaddexp(out[inr], np.log(k.m) + np.log(k.H(s[inr])))
        return out

    def evaluate(self, x):
        with np.errstate(over="ignore"):
            return np.exp(self.log_evaluate(x))

    __call__ = evaluate

    def min_value(self):
        return math.exp(min(p.logv for p in self.pieces))

    def reflect(self):
        return TiltField(tuple(p.reflect() for p in reversed(self.pieces)),
                         tuple(k.reflect() for k in self.kernels),
                         _mirror_case(self.case), dict(self.params), self.eta,
                         tuple(f.reflect() for f in self.factors))

    # bookkeeping against the root measure
    def mass_delta(self, root):
        """int (Y - 1) d(kappa_root); nan when the root mass is infinite and a piece touches it."""
        total = 0.0
        for p in self.pieces:
            if p.em1 == 0.0:
                continue
            lm = root.log_interval_mass(p.lo, p.hi, p.closed)
            if lm == -INF:
                continue
            if lm == INF:
                return math.nan
            la, sg = _log_abs_em1(p.logv, p.em1)
            total += sg * math.exp(la + lm)
        for k in self.kernels:
            total += k.h_mass
        return total

    def l1_distance(self, root):
        total = 0.0
        for p in self.pieces:
            if p.em1 == 0.0:
                continue
            lm = root.log_interval_mass(p.lo, p.hi, p.closed)
            if lm == -INF:
                continue
            if lm == INF:
                return INF
            la, _ = _log_abs_em1(p.logv, p.em1)
            total += math.exp(la + lm)
        for k in self.kernels:
            lo, hi, lc, hc = k.region()
            d = self.piece_at(k.inside_point()).value
            abs_part, _ = k.l1_parts(d)
            total += abs_part - abs(d - 1.0) * k.root_mass()
        return total

    def drift_shift(self, root):
        """int x (Y(x) - 1) kappa_root(dx)."""
        total = 0.0
        for p in self.pieces:
            if p.em1 == 0.0:
                continue
            la, sg = _log_abs_em1(p.logv, p.em1)
            total += sg * root.integrate(lambda x: x, p.lo, p.hi, p.closed, log_weight=la)
        for k in self.kernels:
            total += k.m * float(k.integrate_H(lambda x: x))
        return total

    def branch_table(self):
        rows = []
        for p in self.pieces:
            rows.append({"region": [p.lo, p.hi], "closed": [p.lo_closed, p.hi_closed],
                         "kind": p.label, "log_value": p.logv, "value_minus_one": p.em1})
        rows.extend(k.describe() for k in self.kernels)
        return rows


def _mirror_case(case):
    base = case.split(":")[0]
    if base in ("P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "P9"):
        return PartitionCase(base).mirror().value + case[len(base):]
    return case


def _mirror_field_name(name):
    return {"y1": "y2", "y2": "y1", "y3": "y4", "y4": "y3"}.get(name, name)


def compose(outer: TiltField, inner: TiltField, case=None, eta=None, params=None) -> TiltField:
    """Pointwise product; kernels pick up the other factor's constant value over their region."""
    cuts = set()
    for p in outer.pieces + inner.pieces:
        cuts.add(p.lo)
        cuts.add(p.hi)
    cuts = sorted(c for c in cuts if math.isfinite(c))
    pieces = []
    # refine: each cut point becomes its own degenerate check via flags
    bounds_ = [-INF] + cuts + [INF]
    for a, b in zip(bounds_[:-1], bounds_[1:]):
        if a < b:
            mid = 0.5 * (a + b) if math.isfinite(a) and math.isfinite(b) else (
                b - 1.0 if math.isfinite(b) else (a + 1.0 if math.isfinite(a) else 0.0))
            po, pi = outer.piece_at(mid), inner.piece_at(mid)
            pieces.append(po.times(pi, a, b, False, False))
    for c in cuts:
        po, pi = outer.piece_at(c), inner.piece_at(c)
        pieces.append(po.times(pi, c, c, True, True))
    pieces = _merge(pieces)
    kernels = []
    for k in inner.kernels:
        kernels.append(k.times(_constant_over(outer, k)))
    for k in outer.kernels:
        kernels.append(k.times(_constant_over(inner, k)))
    return TiltField(tuple(pieces), tuple(kernels), case or outer.case, dict(params or {}),
                     eta, (outer, inner))


def _constant_over(f: TiltField, k: BoundaryKernel):
    for other in f.kernels:
        if other.E == k.E:
            raise InvalidParam("overlapping boundary kernels")
    p = f.piece_at(k.inside_point())
    lo, hi, _, _ = k.region()
    # the piece must cover the whole kernel region
    if not (p.lo <= lo and hi <= p.hi):
        raise InvalidParam("field is not constant over a boundary kernel region")
    return p.value


def _merge(pieces):
    pieces = sorted(pieces, key=lambda p: (p.lo, p.hi))
    out = []
    for p in pieces:
        if out and out[-1].logv == p.logv and out[-1].em1 == p.em1 and out[-1].label == p.label \
                and out[-1].hi == p.lo and (out[-1].hi_closed or p.lo_closed):
            q = out[-1]
            out[-1] = Piece(q.lo, p.hi, q.lo_closed, p.hi_closed, q.logv, q.em1, q.label)
        else:
            out.append(p)
    return out


class TiltedMeasure:
    """kappa^Y = Y * kappa_root, exposing the JumpMeasure query interface."""

    def __init__(self, root: JumpMeasure, field_: TiltField):
        if isinstance(root, TiltedMeasure):
            raise InvalidParam("tilted measures are always relative to the root measure")
        self.root = root
        self.field = field_

    # structure shared with the root
    @property
    def is_null(self):
        return self.root.is_null

    def support_bounds(self):
        return self.root.support_bounds()

    def edge(self, side):
        return self.root.edge(side)

    def has_side(self, side):
        return self.root.has_side(side)

    def is_special(self):
        return self.root.is_special()

    def abs_moment_finite(self, k, side=None):
        return self.root.abs_moment_finite(k, side)

    @property
    def finite_activity(self):
        return self.root.finite_activity

    def edge_behavior(self, side):
        E = self.root.edge(side)
        for k in self.field.kernels:
            if k.E == E:
                return "kernel"
        return self.root.edge_behavior(side)

    def edge_base(self, side):
        """(root, constant field value next to the edge) for building kernels on kappa^Y."""
        E = self.root.edge(side)
        for k in self.field.kernels:
            if k.E == E:
                raise InvalidParam("edge already carries a boundary kernel")
        p = self.field.piece_at(float(np.nextafter(E, 0.0)))
        return self.root, p.value

    def atom_mass_at(self, x):
        return self.root.atom_mass_at(x) * float(self.field.evaluate(np.array([x]))[0])

    def reflect(self):
        return TiltedMeasure(self.root.reflect(), self.field.reflect())

    def to_spec(self):
        return {"type": "tilted", "root": self.root.to_spec(), "branches": self.field.branch_table()}

    # masses
    def total_mass(self):
        K = self.root.total_mass()
        if math.isinf(K):
            return INF
        return K + self.field.mass_delta(self.root)

    def _kernel_overlap(self, k, lo, hi):
        klo, khi, _, _ = k.region()
        if hi < klo or lo > khi:
            return "none"
        if lo <= klo and khi <= hi:
            # the open edge end never matters: no atom sits on E when a kernel exists
            return "full"
        return "partial"

    def interval_mass(self, lo, hi, closed=(True, True)):
        total = 0.0
        for p in self.field.pieces:
            a, b, ca, cb = _intersect(p, lo, hi, closed)
            if a is None:
                continue
            lm = self.root.log_interval_mass(a, b, (ca, cb))
            if lm > -INF:
                total += _exp(p.logv + lm)
        for k in self.field.kernels:
            ov = self._kernel_overlap(k, lo, hi)
            if ov == "full":
                total += k.h_mass
            elif ov == "partial":
                total += k.m * float(k.integrate_H(_indicator(lo, hi, closed)))
        return total

    def log_interval_mass(self, lo, hi, closed=(True, True)):
        if any(self._kernel_overlap(k, lo, hi) != "none" for k in self.field.kernels):
            m = self.interval_mass(lo, hi, closed)
            return math.log(m) if m > 0 else -INF
        terms = []
        for p in self.field.pieces:
            a, b, ca, cb = _intersect(p, lo, hi, closed)
            if a is None:
                continue
            lm = self.root.log_interval_mass(a, b, (ca, cb))
            if lm > -INF:
                terms.append(p.logv + lm)
        if not terms:
            return -INF
        mx = max(terms)
        if math.isinf(mx):
            return mx
        return mx + math.log(sum(math.exp(t - mx) for t in terms))

    def side_mass(self, side):
        if side == "positive":
            return self.interval_mass(0.0, INF, (False, True))
        return self.interval_mass(-INF, 0.0, (True, False))

    def integrate(self, f, lo=-INF, hi=INF, closed=(True, True), *, tol=quad.DEFAULT_TOL,
                  log_weight=0.0, breaks=()):
        return self.integrate_with_error(f, lo, hi, closed, tol=tol, log_weight=log_weight,
                                         breaks=breaks)[0]

    def integrate_with_error(self, f, lo=-INF, hi=INF, closed=(True, True), *,
                             tol=quad.DEFAULT_TOL, log_weight=0.0, breaks=()):
        total, err = 0.0, 0.0
        for p in self.field.pieces:
            a, b, ca, cb = _intersect(p, lo, hi, closed)
            if a is None:
                continue
            v, e = self.root.integrate_with_error(f, a, b, (ca, cb), tol=tol,
                                                  log_weight=log_weight + p.logv, breaks=breaks)
            total = total + v
            err += e
        for k in self.field.kernels:
            ov = self._kernel_overlap(k, lo, hi)
            if ov == "none":
                continue
            g = f if ov == "full" else _masked(f, lo, hi, closed)
            total = total + k.m * math.exp(log_weight) * k.integrate_H(g)
        if isinstance(total, np.ndarray) and total.ndim == 0:
            total = float(total)
        return total, err

    # quantiles
    def lower_quantile(self, side, m):
        if side == "negative":
            return -self.reflect().lower_quantile("positive", m)
        covering = [p for p in self.field.pieces if p.hi > 0 and not (p.lo == p.hi)]
        kern = [k for k in self.field.kernels if k.E > 0]
        if not kern and len({(p.logv) for p in covering}) == 1:
            return self.root.lower_quantile("positive", m / math.exp(covering[0].logv))
        tot = self.side_mass("positive")
        if tot < m:
            raise InsufficientMass(f"positive-side mass {tot} < {m}")
        lo, hi = 0.0, 1.0
        while self.interval_mass(0.0, hi, (False, True)) < m:
            lo, hi = hi, hi * 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.interval_mass(0.0, mid, (False, True)) >= m:
                hi = mid
            else:
                lo = mid
        return hi

    # sampling
    def sample(self, n, rng, lo=-INF, hi=INF, closed=(True, True)):
        comps = []
        for p in self.field.pieces:
            a, b, ca, cb = _intersect(p, lo, hi, closed)
            if a is None:
                continue
            lm = self.root.log_interval_mass(a, b, (ca, cb))
            if lm > -INF:
                comps.append((p.logv + lm, ("piece", (a, b, ca, cb))))
        for k in self.field.kernels:
            if k.h_mass > 0 and self._kernel_overlap(k, lo, hi) == "full":
                comps.append((math.log(k.h_mass), ("kernel", k)))
        logs = np.array([c[0] for c in comps])
        probs = np.exp(logs - logs.max())
        cdf = np.cumsum(probs) / probs.sum()
        which = np.minimum(np.searchsorted(cdf, rng.random(n), side="right"), len(comps) - 1)
        out = np.empty(n)
        for j, (_, (kind, arg)) in enumerate(comps):
            idx = np.nonzero(which == j)[0]
            if idx.size == 0:
                continue
            if kind == "piece":
                a, b, ca, cb = arg
                out[idx] = self.root.sample(idx.size, rng, a, b, (ca, cb))
            else:
                out[idx] = _sample_kernel(arg, idx.size, rng)
        return out


def _sample_kernel(k: BoundaryKernel, n, rng):
    """Exact draws from H * kappa_root on the region (mixture over sigma of restricted kappa)."""
    v = 1.0 - rng.random(n)  # (0, 1]
    sigma = k.s_e / v
    widths = k.offset(sigma)
    offs = k.root.sample_edge(k.side, widths, rng)
    return k.E + k.sgn * offs


def _intersect(p: Piece, lo, hi, closed):
    a, ca = (p.lo, p.lo_closed) if p.lo > lo else ((lo, closed[0]) if p.lo < lo else (lo, closed[0] and p.lo_closed))
    b, cb = (p.hi, p.hi_closed) if p.hi < hi else ((hi, closed[1]) if p.hi > hi else (hi, closed[1] and p.hi_closed))
    if a > b or (a == b and not (ca and cb)):
        return None, None, None, None
    return a, b, ca, cb


def _indicator(lo, hi, closed):
    return lambda x: _in_interval(x, lo, hi, closed).astype(float)


def _masked(f, lo, hi, closed):
    def g(x):
        v = np.asarray(f(x), dtype=float)
        m = _in_interval(x, lo, hi, closed)
        return v * (m if v.ndim == 1 else m[:, None])
    return g


def tilted_measure(kappa, Y: TiltField):
    root = kappa.root if isinstance(kappa, TiltedMeasure) else kappa
    if Y.is_identity:
        return root
    return TiltedMeasure(root, Y)


def _edge_base(measure, side):
    if isinstance(measure, TiltedMeasure):
        return measure.edge_base(side)
    return measure, 1.0


# the four single-layer constructions

def y1(a: float, kappa, eta: float) -> TiltField:
    """Tilt for the no-negative-jump, unbounded-positive-support case with a < 0."""
    if not eta > 0:
        raise InvalidParam("budget eta must be positive")
    if a >= 0:
        return TiltField.identity("P1:identity", eta, {"a": a})
    Kp = kappa.side_mass("positive")
    if math.isinf(Kp):
        # infinite mass near 0 puts the median at 0
        delta = 1.0
    else:
        delta = 1.0 + 4.0 / Kp + kappa.lower_quantile("positive", 0.5 * Kp)
    b = (delta - a + 2.0 / eta) ** 2
    ltail = kappa.log_interval_mass(b, INF, (False, True))
    if ltail == -INF:
        raise InsufficientMass(f"no mass beyond b={b}; measure misclassified")
    mu = -0.5 * math.log(b) - ltail
    em1_tail = math.exp(mu) if mu < 709.0 else INF
    pieces = [Piece(-INF, 0.0, True, True)]
    params = {"delta": delta, "b": b, "log_tail_mass": ltail, "side_mass": Kp}
    if math.isinf(Kp):
        pieces.append(Piece(0.0, b, False, True))
    else:
        low = kappa.interval_mass(0.0, delta, (False, True))
        e_low = -1.0 / (math.sqrt(b) * low)
        params["low_value"] = 1.0 + e_low
        pieces.append(Piece(0.0, delta, False, True, math.log1p(e_low), e_low, "bulk"))
        pieces.append(Piece(delta, b, False, True))
    pieces.append(Piece(b, INF, False, True, float(np.logaddexp(0.0, mu)), em1_tail, "one-over-tail"))
    params["log_tail_value"] = float(np.logaddexp(0.0, mu))
    return TiltField(tuple(_merge(pieces)), (), "P1", params, eta)


def y2(a: float, kappa, eta: float) -> TiltField:
    f = y1(-a, kappa.reflect(), eta).reflect()
    return f


def y3(a: float, kappa, eta: float) -> TiltField:
    """Tilt for a finite left support edge -1/r without an atom there."""
    if not eta > 0:
        raise InvalidParam("budget eta must be positive")
    E = kappa.edge("lo")
    if not (math.isfinite(E) and E < 0):
        raise InvalidParam("y3 needs a finite negative support edge")
    r = -1.0 / E
    if kappa.atom_mass_at(E) > 0:
        return TiltField.identity("P3:edge-atom", eta, {"r": r})
    K = kappa.total_mass()
    s_e = max(math.log(2.0), 2.0 * r / eta, 0.0 if math.isinf(K) else 2.0 * r / K)
    c0 = 0.0 if math.isinf(K) else -r / (K * s_e)
    root, kscale = _edge_base(kappa, "lo")
    kern = BoundaryKernel(root, "lo", s_e, 1.0, kscale)
    params = {"r": r, "log_beta": -s_e - math.log(r), "beta": math.exp(-s_e) / r,
              "constant": 1.0 + c0, "total_mass": K}
    return TiltField((Piece(-INF, INF, True, True, math.log1p(c0), c0, "constant"),),
                     (kern,), "P3", params, eta)


def y4(a: float, kappa, eta: float) -> TiltField:
    return y3(-a, kappa.reflect(), eta).reflect()


def build_tilt(t: Triplet, eta: float) -> TiltField:
    """Dispatch over the nine cases."""
    kappa = t.kappa
    case = classify(bounds(kappa))
    a = t.a
    if case is PartitionCase.P1:
        return y1(a, kappa, eta)
    if case is PartitionCase.P2:
        return y2(a, kappa, eta)
    if case is PartitionCase.P3:
        return y3(a, kappa, eta)
    if case is PartitionCase.P4:
        return y4(a, kappa, eta)
    if case in (PartitionCase.P5, PartitionCase.P6, PartitionCase.P7):
        h = 0.5 * eta
        if case is PartitionCase.P5:
            first, second = y3, y1
        elif case is PartitionCase.P6:
            first, second = y4, y2
        else:
            first, second = y4, y3
        inner = first(a, kappa, h)
        t_in = tilted_triplet(t, inner)
        outer = second(t_in.a, t_in.kappa, h)
        params = {"inner": inner.params, "outer": outer.params}
        return compose(outer, inner, case.value, eta, params)
    return TiltField.identity(case.value, eta)


def tilted_triplet(t: Triplet, Y: TiltField) -> Triplet:
    if Y.is_identity:
        return t
    root = t.kappa.root if isinstance(t.kappa, TiltedMeasure) else t.kappa
    aY = t.a + Y.drift_shift(root)
    return Triplet(float(aY), t.c, tilted_measure(root, Y), t.T, t.validated)


@dataclass(frozen=True)
class TiltReport:
    y1_value: float
    y1_ok: bool
    y2_value: float
    y2_ok: bool
    y3_delta: float
    y3_ok: bool
    dg_ell: float
    dg_r: float
    y4_ok: bool
    min_value: float

    @property
    def ok(self):
        return self.y1_ok and self.y2_ok and self.y3_ok and self.y4_ok

    def to_dict(self):
        return {"Y1": {"value": self.y1_value, "pass": self.y1_ok},
                "Y2": {"value": self.y2_value, "pass": self.y2_ok},
                "Y3": {"mass_difference": self.y3_delta, "pass": self.y3_ok},
                "Y4": {"dg_ell": self.dg_ell, "dg_r": self.dg_r, "pass": self.y4_ok},
                "min_value": self.min_value}


def validate_tilt(t: Triplet, Y: TiltField, eta: float, tol: float = 1e-8) -> TiltReport:
    from .growth import endpoint_derivative

    root = t.kappa.root if isinstance(t.kappa, TiltedMeasure) else t.kappa
    tilted = tilted_triplet(t, Y)
    kY = tilted.kappa
    if root.is_null:
        v1 = 0.0
    else:
        try:
            v1 = float(kY.integrate(lambda x: np.minimum(np.abs(x), x * x), breaks=(-1.0, 1.0)))
        except QuadratureFailure:
            v1 = INF
    y1_ok = math.isfinite(v1)
    l1 = Y.l1_distance(root)
    y2_ok = l1 <= eta + tol
    K = root.total_mass()
    if math.isinf(K):
        delta = 0.0 if math.isinf(kY.total_mass()) else INF
        y3_ok = delta == 0.0
    else:
        delta = Y.mass_delta(root)
        y3_ok = abs(delta) <= tol * max(1.0, K)
    dl = float(endpoint_derivative(tilted, "ell"))
    dr = float(endpoint_derivative(tilted, "r"))
    y4_ok = bool(dl >= -tol and dr <= tol)
    return TiltReport(v1, y1_ok, l1, y2_ok, delta, y3_ok, dl, dr, y4_ok, Y.min_value())
