"""Jump measures on R minus {0}: point masses plus one-sided density pieces.

Every density piece lives on one side of the origin and is described in
distance coordinates z = |x|, so reflection x -> -x only flips a sign.
Masses, tails and restricted inverse CDFs are closed-form per kind; infinite
mass and integrability of |x| ^ x**2 are classified analytically rather than
detected through overflow.

Kinds
-----
exponential  scale * exp(-rate * |x|)
uniform      constant height
power        scale * |x| ** -alpha
table        piecewise linear through (x, f) nodes
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import quadrature as quad
from .errors import InsufficientMass, InvalidMeasure

INF = math.inf


def _log_diff_exp(a, b):
    """log(e**a - e**b) for a >= b."""
    if b == -INF:
        return a
    if a == b:
        return -INF
    return a + math.log(-math.expm1(b - a))


class DensityPiece:
    """One-sided density in z = |x| coordinates on [zlo, zhi]."""

    kind = "abstract"

    def __init__(self, sign, zlo, zhi):
        if sign not in (1, -1):
            raise InvalidMeasure("sign must be +1 or -1")
        if not (0.0 <= zlo < zhi):
            raise InvalidMeasure(f"bad support [{zlo}, {zhi}] in distance coordinates")
        if math.isinf(zlo):
            raise InvalidMeasure("support cannot start at infinity")
        self.sign = sign
        self.zlo = float(zlo)
        self.zhi = float(zhi)

    # x-space view
    @property
    def x_lo(self):
        return self.zlo if self.sign > 0 else -self.zhi

    @property
    def x_hi(self):
        return self.zhi if self.sign > 0 else -self.zlo

    def z_end_for_x(self, side):
        """Which z-end ('lo' or 'hi') is the x-space 'lo'/'hi' edge."""
        if self.sign > 0:
            return side
        return "hi" if side == "lo" else "lo"

    def _copy(self, **changes):
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new.__dict__.update(changes)
        return new

    def reflect(self):
        return self._copy(sign=-self.sign)

    # interface implemented by kinds
    def pdf_z(self, z):
        raise NotImplementedError

    def log_pdf_z(self, z):
        with np.errstate(divide="ignore"):
            return np.log(self.pdf_z(z))

    def mass_z(self, za, zb):
        raise NotImplementedError

    def log_mass_z(self, za, zb):
        m = self.mass_z(za, zb)
        return math.log(m) if m > 0 else -INF

    def end_mass(self, end, o):
        """Mass within offset o of a z-end, vectorized and stable for tiny o."""
        o = np.minimum(np.asarray(o, dtype=float), self.zhi - self.zlo)
        if end == "lo":
            return np.vectorize(lambda t: self.mass_z(self.zlo, self.zlo + t))(o)
        return np.vectorize(lambda t: self.mass_z(self.zhi - t, self.zhi))(o)

    def end_density(self, end):
        z = self.zlo if end == "lo" else self.zhi
        return float(self.pdf_z(np.array([z]))[0])

    def ppf_z(self, u, za, zb):
        raise NotImplementedError

    def ppf_offset(self, end, width, u):
        """Offsets t in (0, width] from a z-end with mass(t) = u * mass(width)."""
        u = np.asarray(u, dtype=float)
        if end == "lo":
            return self.ppf_z(u, self.zlo, self.zlo + width) - self.zlo
        return self.zhi - self.ppf_z(1.0 - u, self.zhi - width, self.zhi)

    @property
    def infinite_mass(self):
        raise NotImplementedError

    def moment_finite(self, k, where="both"):
        """Is the integral of z**k finite near 0 ('zero'), at infinity ('inf') or both."""
        raise NotImplementedError

    @property
    def special(self):
        return self.moment_finite(2, "zero") and self.moment_finite(1, "inf")

    def breakpoints(self):
        return []

    def length_scale(self):
        return max(1.0, self.zlo)

    def to_spec(self):
        raise NotImplementedError

    def support_x(self):
        return [self.x_lo, self.x_hi]


class ExponentialPiece(DensityPiece):
    kind = "exponential"

    def __init__(self, sign, zlo, zhi, scale=1.0, rate=1.0):
        super().__init__(sign, zlo, zhi)
        if scale <= 0:
            raise InvalidMeasure("exponential scale must be positive")
        self.scale = float(scale)
        self.rate = float(rate)

    def pdf_z(self, z):
        return self.scale * np.exp(-self.rate * np.asarray(z, dtype=float))

    def log_pdf_z(self, z):
        return math.log(self.scale) - self.rate * np.asarray(z, dtype=float)

    def _unit(self, d):
        # integral of exp(-rate t) over [0, d]
        lam = self.rate
        if lam == 0.0:
            return d
        if math.isinf(d):
            return 1.0 / lam if lam > 0 else INF
        return -math.expm1(-lam * d) / lam

    def mass_z(self, za, zb):
        if zb <= za:
            return 0.0
        u = self._unit(zb - za)
        if math.isinf(u):
            return INF
        return self.scale * math.exp(-self.rate * za) * u

    def log_mass_z(self, za, zb):
        if zb <= za:
            return -INF
        u = self._unit(zb - za)
        if math.isinf(u):
            return INF
        return math.log(self.scale) - self.rate * za + math.log(u)

    def end_mass(self, end, o):
        o = np.minimum(np.asarray(o, dtype=float), self.zhi - self.zlo)
        lam = self.rate
        if end == "lo":
            base = self.scale * math.exp(-lam * self.zlo)
            if lam == 0.0:
                return base * o
            return base * (-np.expm1(-lam * o)) / lam
        base = self.scale * math.exp(-lam * self.zhi)
        if lam == 0.0:
            return base * o
        return base * np.expm1(lam * o) / lam

    def ppf_z(self, u, za, zb):
        u = np.asarray(u, dtype=float)
        lam = self.rate
        d = zb - za
        if lam == 0.0:
            return za + u * d
        if math.isinf(d):
            return za - np.log1p(-u) / lam
        return za - np.log1p(u * np.expm1(-lam * d)) / lam

    @property
    def infinite_mass(self):
        return math.isinf(self.zhi) and self.rate <= 0

    def length_scale(self):
        return 1.0 / self.rate if self.rate > 0 else max(1.0, self.zlo)

    def moment_finite(self, k, where="both"):
        if where in ("inf", "both") and math.isinf(self.zhi) and self.rate <= 0:
            return False
        return True

    def to_spec(self):
        return {"type": "density", "kind": "exponential",
                "params": {"scale": self.scale, "rate": self.rate},
                "support": self.support_x(), "infinite_mass": self.infinite_mass}


class UniformPiece(DensityPiece):
    kind = "uniform"

    def __init__(self, sign, zlo, zhi, height=1.0):
        super().__init__(sign, zlo, zhi)
        if math.isinf(zhi):
            raise InvalidMeasure("uniform density needs bounded support")
        if height <= 0:
            raise InvalidMeasure("uniform height must be positive")
        self.height = float(height)

    def pdf_z(self, z):
        return np.full(np.shape(z), self.height)

    def mass_z(self, za, zb):
        return self.height * max(zb - za, 0.0)

    def end_mass(self, end, o):
        return self.height * np.minimum(np.asarray(o, dtype=float), self.zhi - self.zlo)

    def ppf_z(self, u, za, zb):
        return za + np.asarray(u, dtype=float) * (zb - za)

    @property
    def infinite_mass(self):
        return False

    def moment_finite(self, k, where="both"):
        return True

    def to_spec(self):
        return {"type": "density", "kind": "uniform", "params": {"height": self.height},
                "support": self.support_x(), "infinite_mass": False}


class PowerPiece(DensityPiece):
    kind = "power"

    def __init__(self, sign, zlo, zhi, scale=1.0, alpha=2.0):
        super().__init__(sign, zlo, zhi)
        if scale <= 0:
            raise InvalidMeasure("power scale must be positive")
        self.scale = float(scale)
        self.alpha = float(alpha)

    def pdf_z(self, z):
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore"):
            return self.scale * z ** (-self.alpha)

    def log_pdf_z(self, z):
        with np.errstate(divide="ignore"):
            return math.log(self.scale) - self.alpha * np.log(np.asarray(z, dtype=float))

    def _antider(self, z):
        e = 1.0 - self.alpha
        if e == 0.0:
            return math.log(z) if z > 0 else -INF
        if z == 0.0:
            return 0.0 if e > 0 else -INF
        if math.isinf(z):
            return INF if e > 0 else 0.0
        return z ** e / e

    def mass_z(self, za, zb):
        if zb <= za:
            return 0.0
        e = 1.0 - self.alpha
        if (za == 0.0 and e <= 0) or (math.isinf(zb) and e >= 0):
            return INF
        if za > 0 and not math.isinf(zb):
            # relative form keeps precision for short intervals
            if e == 0.0:
                return self.scale * math.log1p((zb - za) / za)
            return self.scale * za ** e * math.expm1(e * math.log1p((zb - za) / za)) / e
        return self.scale * (self._antider(zb) - self._antider(za))

    def end_mass(self, end, o):
        # written in the offset itself so offsets below the spacing of z keep their mass
        o = np.minimum(np.asarray(o, dtype=float), self.zhi - self.zlo)
        e = 1.0 - self.alpha
        if end == "lo" and self.zlo == 0.0:
            if e <= 0:
                return np.where(o > 0, INF, 0.0)
            return self.scale * o ** e / e
        if end == "lo":
            z0, q = self.zlo, np.log1p(o / self.zlo)
        else:
            z0, q = self.zhi, np.log1p(-o / self.zhi)
        if e == 0.0:
            return self.scale * np.abs(q)
        return self.scale * z0 ** e * np.abs(np.expm1(e * q)) / abs(e)

    def ppf_z(self, u, za, zb):
        u = np.asarray(u, dtype=float)
        e = 1.0 - self.alpha
        if e == 0.0:
            return za * np.exp(u * math.log(zb / za))
        lo, hi = za ** e, zb ** e
        return (lo + u * (hi - lo)) ** (1.0 / e)

    @property
    def infinite_mass(self):
        return (self.zlo == 0.0 and self.alpha >= 1.0) or (math.isinf(self.zhi) and self.alpha <= 1.0)

    def moment_finite(self, k, where="both"):
        ok = True
        if where in ("zero", "both") and self.zlo == 0.0:
            ok &= k - self.alpha > -1.0
        if where in ("inf", "both") and math.isinf(self.zhi):
            ok &= k - self.alpha < -1.0
        return ok

    def to_spec(self):
        return {"type": "density", "kind": "power",
                "params": {"scale": self.scale, "alpha": self.alpha},
                "support": self.support_x(), "infinite_mass": self.infinite_mass}


class TablePiece(DensityPiece):
    """Piecewise-linear density through nodes (z_i, f_i)."""

    kind = "table"

    def __init__(self, sign, zs, fs):
        zs = np.asarray(zs, dtype=float)
        fs = np.asarray(fs, dtype=float)
        if zs.ndim != 1 or zs.shape != fs.shape or zs.size < 2:
            raise InvalidMeasure("table needs matching x and f arrays of length >= 2")
        if np.any(np.diff(zs) <= 0):
            raise InvalidMeasure("table nodes must be strictly monotone")
        if np.any(fs < 0) or not np.all(np.isfinite(fs)) or not np.all(np.isfinite(zs)):
            raise InvalidMeasure("table values must be finite and nonnegative")
        # trim zero runs at both ends so the declared support is the true support
        nz = np.nonzero(fs > 0)[0]
        if nz.size == 0:
            raise InvalidMeasure("table density is identically zero")
        i0 = max(nz[0] - 1, 0)
        i1 = min(nz[-1] + 1, zs.size - 1)
        zs, fs = zs[i0:i1 + 1], fs[i0:i1 + 1]
        super().__init__(sign, zs[0], zs[-1])
        self.zs = zs
        self.fs = fs
        seg = 0.5 * (fs[1:] + fs[:-1]) * np.diff(zs)
        self.cum = np.concatenate([[0.0], np.cumsum(seg)])

    def pdf_z(self, z):
        z = np.asarray(z, dtype=float)
        return np.interp(z, self.zs, self.fs, left=0.0, right=0.0)

    def _cdf(self, z):
        z = min(max(z, self.zlo), self.zhi)
        j = int(np.clip(np.searchsorted(self.zs, z, side="right") - 1, 0, self.zs.size - 2))
        t = z - self.zs[j]
        h = self.zs[j + 1] - self.zs[j]
        f0, f1 = self.fs[j], self.fs[j + 1]
        return self.cum[j] + f0 * t + 0.5 * (f1 - f0) / h * t * t

    def mass_z(self, za, zb):
        if zb <= za:
            return 0.0
        return max(self._cdf(zb) - self._cdf(za), 0.0)

    def end_mass(self, end, o):
        o = np.minimum(np.asarray(o, dtype=float), self.zhi - self.zlo)
        if end == "lo":
            h = self.zs[1] - self.zs[0]
            f0, s = self.fs[0], (self.fs[1] - self.fs[0]) / h
        else:
            h = self.zs[-1] - self.zs[-2]
            f0, s = self.fs[-1], (self.fs[-2] - self.fs[-1]) / h
        first = f0 * o + 0.5 * s * o * o
        far = np.vectorize(lambda t: self.mass_z(self.zlo, self.zlo + t) if end == "lo"
                           else self.mass_z(self.zhi - t, self.zhi))(o)
        return np.where(o <= h, first, far)

    def _invert(self, m):
        j = int(np.clip(np.searchsorted(self.cum, m, side="right") - 1, 0, self.zs.size - 2))
        r = m - self.cum[j]
        h = self.zs[j + 1] - self.zs[j]
        f0, f1 = self.fs[j], self.fs[j + 1]
        s = (f1 - f0) / h
        disc = max(f0 * f0 + 2.0 * s * r, 0.0)
        den = f0 + math.sqrt(disc)
        t = 2.0 * r / den if den > 0 else 0.0
        return min(self.zs[j] + min(max(t, 0.0), h), self.zhi)

    def ppf_z(self, u, za, zb):
        u = np.asarray(u, dtype=float)
        ca, cb = self._cdf(za), self._cdf(zb)
        return np.vectorize(lambda v: self._invert(ca + v * (cb - ca)))(u)

    @property
    def infinite_mass(self):
        return False

    def moment_finite(self, k, where="both"):
        return True

    def breakpoints(self):
        return list(self.zs[1:-1])

    def reflect(self):
        return self._copy(sign=-self.sign)

    def to_spec(self):
        if self.sign > 0:
            xs, fs = self.zs, self.fs
        else:
            xs, fs = -self.zs[::-1], self.fs[::-1]
        return {"type": "density", "kind": "table",
                "params": {"x": [float(v) for v in xs], "f": [float(v) for v in fs]},
                "support": self.support_x(), "infinite_mass": False}


def _side_of(lo, hi):
    if lo >= 0.0:
        return 1, lo, hi
    if hi <= 0.0:
        return -1, -hi, -lo
    raise InvalidMeasure(f"density support ({lo}, {hi}) must not contain 0; split it")


def make_piece(kind, support, **params):
    lo, hi = float(support[0]), float(support[1])
    if not lo < hi:
        raise InvalidMeasure(f"empty support ({lo}, {hi})")
    if kind == "table":
        x = np.asarray(params["x"], dtype=float)
        f = np.asarray(params["f"], dtype=float)
        sign, _, _ = _side_of(x.min(), x.max())
        if sign > 0:
            return TablePiece(1, x, f)
        return TablePiece(-1, -x[::-1], f[::-1])
    sign, zlo, zhi = _side_of(lo, hi)
    if kind == "exponential":
        return ExponentialPiece(sign, zlo, zhi, scale=params.get("scale", 1.0),
                                rate=params.get("rate", 1.0))
    if kind == "uniform":
        return UniformPiece(sign, zlo, zhi, height=params.get("height", 1.0))
    if kind == "power":
        return PowerPiece(sign, zlo, zhi, scale=params.get("scale", 1.0),
                          alpha=params.get("alpha", 2.0))
    raise InvalidMeasure(f"unknown density kind {kind!r}")


def _in_interval(x, lo, hi, closed):
    x = np.asarray(x)
    left = x >= lo if closed[0] else x > lo
    right = x <= hi if closed[1] else x < hi
    return left & right


@dataclass(frozen=True, eq=False)
class JumpMeasure:
    """Atoms (x_i, w_i) plus a tuple of one-sided density pieces."""

    atoms_x: np.ndarray
    atoms_w: np.ndarray
    pieces: tuple = ()

    def __post_init__(self):
        ax = np.atleast_1d(np.asarray(self.atoms_x, dtype=float))
        aw = np.atleast_1d(np.asarray(self.atoms_w, dtype=float))
        if ax.shape != aw.shape:
            raise InvalidMeasure("atom locations and weights differ in length")
        if np.any(ax == 0.0):
            raise InvalidMeasure("no atom may sit at 0")
        if np.any(~np.isfinite(ax)) or np.any(~np.isfinite(aw)):
            raise InvalidMeasure("atoms must be finite")
        if np.any(aw <= 0):
            raise InvalidMeasure("atom masses must be strictly positive")
        order = np.argsort(ax, kind="stable")
        ax, aw = ax[order], aw[order]
        # merge duplicates
        if ax.size > 1:
            ux, inv = np.unique(ax, return_inverse=True)
            if ux.size != ax.size:
                aw = np.bincount(inv, weights=aw)
                ax = ux
        ax.setflags(write=False)
        aw.setflags(write=False)
        object.__setattr__(self, "atoms_x", ax)
        object.__setattr__(self, "atoms_w", aw)
        object.__setattr__(self, "pieces", tuple(self.pieces))

    # construction helpers
    @classmethod
    def empty(cls):
        return cls(np.empty(0), np.empty(0), ())

    @classmethod
    def atomic(cls, atoms):
        atoms = list(atoms)
        if not atoms:
            return cls.empty()
        x, w = zip(*atoms)
        return cls(np.array(x, dtype=float), np.array(w, dtype=float), ())

    @classmethod
    def density(cls, kind, support, **params):
        return cls(np.empty(0), np.empty(0), (make_piece(kind, support, **params),))

    def __add__(self, other):
        return JumpMeasure(np.concatenate([self.atoms_x, other.atoms_x]),
                           np.concatenate([self.atoms_w, other.atoms_w]),
                           self.pieces + other.pieces)

    @classmethod
    def from_spec(cls, spec):
        """Build from the JSON fragment used in model files (a dict or a list of dicts)."""
        if isinstance(spec, list):
            out = cls.empty()
            for s in spec:
                out = out + cls.from_spec(s)
            return out
        if not isinstance(spec, dict) or "type" not in spec:
            raise InvalidMeasure("measure spec must be an object with a 'type' field")
        t = spec["type"]
        if t == "empty":
            return cls.empty()
        if t == "atomic":
            return cls.atomic((float(a["x"]), float(a["w"])) for a in spec.get("atoms", []))
        if t == "density":
            params = dict(spec.get("params", {}))
            support = spec.get("support")
            if spec.get("kind") == "table" and support is None:
                support = [min(params["x"]), max(params["x"])]
            if support is None:
                raise InvalidMeasure("density spec needs a support")
            support = [_parse_ext(s) for s in support]
            m = cls.density(spec.get("kind"), support, **params)
            declared = spec.get("infinite_mass")
            if declared is not None and bool(declared) != m.pieces[0].infinite_mass:
                raise InvalidMeasure(
                    f"declared infinite_mass={declared} contradicts the closed-form classification")
            return m
        if t == "sum":
            return cls.from_spec(spec.get("parts", []))
        raise InvalidMeasure(f"unknown measure type {t!r}")

    def to_spec(self):
        parts = []
        if self.atoms_x.size:
            parts.append({"type": "atomic", "atoms": [{"x": float(x), "w": float(w)}
                                                      for x, w in zip(self.atoms_x, self.atoms_w)]})
        parts.extend(p.to_spec() for p in self.pieces)
        if not parts:
            return {"type": "empty"}
        if len(parts) == 1:
            return parts[0]
        return {"type": "sum", "parts": parts}

    # basic queries
    @property
    def is_null(self):
        return self.atoms_x.size == 0 and not self.pieces

    def total_mass(self):
        if any(p.infinite_mass for p in self.pieces):
            return INF
        return float(self.atoms_w.sum()) + sum(p.mass_z(p.zlo, p.zhi) for p in self.pieces)

    @property
    def finite_activity(self):
        return not math.isinf(self.total_mass())

    def _z_range(self, p, lo, hi):
        """Intersection of x-interval [lo, hi] with a piece, in z coordinates."""
        a, b = max(lo, p.x_lo), min(hi, p.x_hi)
        if not a < b:
            return None
        if p.sign > 0:
            return a, b
        return -b, -a

    def interval_mass(self, lo, hi, closed=(True, True)):
        if lo > hi:
            raise InvalidMeasure("interval with lo > hi")
        m = float(self.atoms_w[_in_interval(self.atoms_x, lo, hi, closed)].sum())
        for p in self.pieces:
            zr = self._z_range(p, lo, hi)
            if zr is not None:
                m += p.mass_z(*zr)
        return m

    def log_interval_mass(self, lo, hi, closed=(True, True)):
        terms = list(np.log(self.atoms_w[_in_interval(self.atoms_x, lo, hi, closed)]))
        for p in self.pieces:
            zr = self._z_range(p, lo, hi)
            if zr is not None:
                terms.append(p.log_mass_z(*zr))
        terms = [t for t in terms if t > -INF]
        if not terms:
            return -INF
        mx = max(terms)
        if math.isinf(mx):
            return INF
        return mx + math.log(sum(math.exp(t - mx) for t in terms))

    def atom_mass_at(self, x):
        hit = self.atoms_x == x
        return float(self.atoms_w[hit].sum())

    def support_bounds(self):
        """(x_min, x_max); (+inf, -inf) for the null measure."""
        lo, hi = INF, -INF
        if self.atoms_x.size:
            lo, hi = float(self.atoms_x[0]), float(self.atoms_x[-1])
        for p in self.pieces:
            lo, hi = min(lo, p.x_lo), max(hi, p.x_hi)
        return lo, hi

    def side_mass(self, side):
        if side == "positive":
            return self.interval_mass(0.0, INF, (False, True))
        return self.interval_mass(-INF, 0.0, (True, False))

    def has_side(self, side):
        if side == "positive":
            return bool(np.any(self.atoms_x > 0)) or any(p.sign > 0 for p in self.pieces)
        return bool(np.any(self.atoms_x < 0)) or any(p.sign < 0 for p in self.pieces)

    def is_special(self):
        return all(p.special for p in self.pieces)

    def abs_moment_finite(self, k, side=None):
        """Is the integral of |x|**k (over one side, or all of R) finite?"""
        ps = [p for p in self.pieces if side is None or (p.sign > 0) == (side == "positive")]
        return all(p.moment_finite(k) for p in ps)

    def reflect(self):
        return JumpMeasure(-self.atoms_x, self.atoms_w.copy(), tuple(p.reflect() for p in self.pieces))

    # integration
    def integrate(self, f, lo=-INF, hi=INF, closed=(True, True), *, tol=quad.DEFAULT_TOL,
                  log_weight=0.0, breaks=()):
        return self.integrate_with_error(f, lo, hi, closed, tol=tol, log_weight=log_weight,
                                         breaks=breaks)[0]

    def integrate_with_error(self, f, lo=-INF, hi=INF, closed=(True, True), *,
                             tol=quad.DEFAULT_TOL, log_weight=0.0, breaks=()):
        """Integral of f * exp(log_weight) over the region, with an error estimate.

        ``f`` maps a 1-d array of points to an array of shape (n,) or (n, k).
        ``breaks`` lists points where f has kinks (for example |x| = 1 for
        |x| ^ x**2); the rule splits there.
        """
        total = 0.0
        err = 0.0
        sel = _in_interval(self.atoms_x, lo, hi, closed)
        if np.any(sel):
            vals = np.asarray(f(self.atoms_x[sel]), dtype=float)
            w = self.atoms_w[sel] * math.exp(log_weight)
            total = total + (np.tensordot(w, vals, axes=(0, 0)))
        for p in self.pieces:
            zr = self._z_range(p, lo, hi)
            if zr is None:
                continue
            v, e = _integrate_piece(p, f, zr[0], zr[1], tol, breaks)
            scale = math.exp(v[1] + log_weight) if v[1] != 0.0 else math.exp(log_weight)
            total = total + v[0] * scale
            err += e * scale
        if isinstance(total, np.ndarray) and total.ndim == 0:
            total = float(total)
        return total, err

    # quantiles
    def _continuous_cdf(self, x):
        """Density mass on (0, x] for x > 0."""
        m = 0.0
        for p in self.pieces:
            if p.sign > 0:
                zr = self._z_range(p, 0.0, x)
                if zr is not None:
                    m += p.mass_z(*zr)
        return m

    def lower_quantile(self, side, m):
        """inf{x > 0 : mass((0, x]) >= m}, or the mirrored sup on the negative side."""
        if side == "negative":
            return -self.reflect().lower_quantile("positive", m)
        if side != "positive":
            raise ValueError("side must be 'positive' or 'negative'")
        if not m > 0:
            raise InsufficientMass("quantile level must be positive")
        tot = self.side_mass("positive")
        if tot < m * (1 - 1e-14):
            raise InsufficientMass(f"positive-side mass {tot} < {m}")
        if any(p.sign > 0 and not p.moment_finite(0, "zero") for p in self.pieces):
            return 0.0
        ax = self.atoms_x[self.atoms_x > 0]
        aw = self.atoms_w[self.atoms_x > 0]
        acc = 0.0
        prev = 0.0
        for x, w in zip(ax, aw):
            cont = self._continuous_cdf(x)
            if acc + cont >= m:
                return self._solve_continuous(prev, x, m - acc)
            acc += w
            if acc + cont >= m:
                return float(x)
            prev = float(x)
        return self._solve_continuous(prev, self.support_bounds()[1], m - acc)

    def _solve_continuous(self, lo, hi, target):
        F = self._continuous_cdf
        if target <= F(lo) if lo > 0 else target <= 0:
            return lo
        if math.isinf(hi):
            hi = max(2.0 * lo, 1.0)
            while F(hi) < target:
                lo, hi = hi, 2.0 * hi
                if hi > 1e300:
                    raise InsufficientMass("quantile bracket exhausted")
        if F(hi) < target:
            return hi
        return float(optimize.brentq(lambda x: F(x) - target, lo, hi, xtol=1e-300,
                                     rtol=4 * np.finfo(float).eps, maxiter=400))

    # edge structure used by boundary tilts
    def edge(self, side):
        lo, hi = self.support_bounds()
        return lo if side == "lo" else hi

    def edge_behavior(self, side):
        """'atom', 'density' (positive density at the edge), 'soft' or 'none'."""
        E = self.edge(side)
        if math.isinf(E):
            return "none"
        if self.atom_mass_at(E) > 0:
            return "atom"
        for p in self.pieces:
            if (p.x_lo if side == "lo" else p.x_hi) == E:
                if p.end_density(p.z_end_for_x(side)) > 0:
                    return "density"
        return "soft"

    def edge_mass(self, side, o):
        """Mass of (E, E + o] (side 'lo') or [E - o, E) (side 'hi'), excluding the edge atom."""
        o = np.atleast_1d(np.asarray(o, dtype=float))
        E = self.edge(side)
        out = np.zeros_like(o)
        for p in self.pieces:
            touching = (p.x_lo if side == "lo" else p.x_hi) == E
            if touching:
                out += p.end_mass(p.z_end_for_x(side), o)
            else:
                def one(t, p=p):
                    a, b = (E, E + t) if side == "lo" else (E - t, E)
                    zr = self._z_range(p, a, b)
                    return p.mass_z(*zr) if zr is not None else 0.0
                out += np.vectorize(one)(o)
        if self.atoms_x.size:
            off = np.abs(self.atoms_x - E)
            keep = off > 0
            off, w = off[keep], self.atoms_w[keep]
            out += (w[None, :] * (off[None, :] <= o[:, None])).sum(axis=1)
        return out

    def edge_pdf(self, side, o):
        """Density at offset o inward from the edge."""
        o = np.atleast_1d(np.asarray(o, dtype=float))
        E = self.edge(side)
        out = np.zeros_like(o)
        for p in self.pieces:
            touching = (p.x_lo if side == "lo" else p.x_hi) == E
            if touching:
                end = p.z_end_for_x(side)
                z = p.zlo + o if end == "lo" else p.zhi - o
                inside = (o < p.zhi - p.zlo)
                out += np.where(inside, p.pdf_z(np.where(inside, z, p.zlo)), 0.0)
            else:
                x = E + o if side == "lo" else E - o
                z = np.abs(x)
                inside = (x > p.x_lo) & (x < p.x_hi)
                out += np.where(inside, p.pdf_z(np.where(inside, z, p.zlo if p.zlo > 0 else p.zhi)), 0.0)
        return out

    def edge_breaks(self, side):
        """Offsets from the edge where the edge mass function has kinks or jumps."""
        E = self.edge(side)
        brk = set()
        for p in self.pieces:
            for x in [p.x_lo, p.x_hi] + [p.sign * z for z in p.breakpoints()]:
                d = abs(x - E)
                if 0 < d < INF:
                    brk.add(d)
        for x in self.atoms_x:
            d = abs(x - E)
            if d > 0:
                brk.add(float(d))
        return sorted(brk)

    def sample_edge(self, side, widths, rng):
        """One offset per entry of ``widths``, drawn from the measure on offsets (0, width]."""
        widths = np.atleast_1d(np.asarray(widths, dtype=float))
        n = widths.size
        out = np.empty(n)
        brk = self.edge_breaks(side)
        first = brk[0] if brk else INF
        E = self.edge(side)
        near = widths <= first
        touching = [p for p in self.pieces if (p.x_lo if side == "lo" else p.x_hi) == E]
        idx = np.nonzero(near)[0]
        if idx.size:
            w = widths[idx]
            masses = np.stack([p.end_mass(p.z_end_for_x(side), w) for p in touching], axis=1)
            cdf = np.cumsum(masses, axis=1)
            pick = (rng.random(idx.size)[:, None] * cdf[:, -1:] > cdf).sum(axis=1)
            pick = np.minimum(pick, len(touching) - 1)
            u = rng.random(idx.size)
            for j, p in enumerate(touching):
                k = pick == j
                if not np.any(k):
                    continue
                with np.errstate(all="ignore"):
                    o = p.ppf_offset(p.z_end_for_x(side), w[k], u[k])
                bad = ~np.isfinite(o) | (o <= 0) | (o > w[k])
                out[idx[k]] = np.where(bad, u[k] * w[k], o)
        for i in np.nonzero(~near)[0]:
            a, b = (E, E + widths[i]) if side == "lo" else (E - widths[i], E)
            closed = (False, True) if side == "lo" else (True, False)
            out[i] = abs(float(self.sample(1, rng, a, b, closed)[0]) - E)
        return out

    # sampling
    def sample(self, n, rng, lo=-INF, hi=INF, closed=(True, True)):
        """n iid draws from the measure restricted to the interval and normalized."""
        comps = []
        sel = np.nonzero(_in_interval(self.atoms_x, lo, hi, closed))[0]
        for i in sel:
            comps.append(("atom", float(self.atoms_w[i]), float(self.atoms_x[i])))
        for p in self.pieces:
            zr = self._z_range(p, lo, hi)
            if zr is not None:
                lm = p.log_mass_z(*zr)
                if lm > -INF:
                    comps.append(("piece", lm, (p, zr)))
        if not comps:
            raise InsufficientMass("cannot sample from a null restriction")
        logs = np.array([math.log(c[1]) if c[0] == "atom" else c[1] for c in comps])
        if np.any(np.isinf(logs)):
            raise InsufficientMass("cannot sample from an infinite-mass restriction")
        probs = np.exp(logs - logs.max())
        cdf = np.cumsum(probs)
        cdf /= cdf[-1]
        u = rng.random(n)
        which = np.minimum(np.searchsorted(cdf, u, side="right"), len(comps) - 1)
        out = np.empty(n)
        v = rng.random(n)
        for j, c in enumerate(comps):
            idx = which == j
            if not np.any(idx):
                continue
            if c[0] == "atom":
                out[idx] = c[2]
            else:
                p, (za, zb) = c[2]
                out[idx] = p.sign * p.ppf_z(v[idx], za, zb)
        return out


def _parse_ext(v):
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf", "infinity", "+infinity"):
            return INF
        if s in ("-inf", "-infinity"):
            return -INF
        raise InvalidMeasure(f"cannot parse bound {v!r}")
    return float(v)


def _integrate_piece(p, f, za, zb, tol, breaks=()):
    """Integral of f(x) pdf(x) over z in [za, zb], normalized by the segment mass.

    Returns ((value, log_norm), error) with the true integral value * exp(log_norm).
    """
    lm = p.log_mass_z(za, zb)
    lnorm = lm if math.isfinite(lm) else 0.0
    sign = p.sign
    lpdf = p.log_pdf_z

    def at(base, direction):
        def phi(o):
            z = base + direction * o
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                v = np.asarray(f(sign * z), dtype=float)
            lw = lpdf(z) - lnorm
            lost = (z == base) & (base != 0.0)
            return _times_exp(v, np.where(lost, -INF, lw))
        return phi

    inner = set(p.breakpoints()) | {sign * x for x in breaks}
    knots = [za] + sorted(b for b in inner if za < b < zb) + [zb]
    total, err = 0.0, 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        if math.isinf(b):
            v, e = quad.integrate_halfline(at(a, 1.0), scale=p.length_scale(), tol=tol)
        else:
            v, e = quad.integrate_segment(at(a, 1.0), at(b, -1.0), b - a, tol=tol)
        total = total + v
        err += e
    return (total, lnorm), err


def _times_exp(v, lw):
    """v * exp(lw) without overflow when v is tiny and lw huge."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if v.ndim == 2:
            lw = lw[:, None]
        direct = v * np.exp(lw)
        safe = np.sign(v) * np.exp(np.log(np.abs(v)) + lw)
        out = np.where(lw < 600, direct, safe)
        return np.where((v == 0) | (lw < -745.0), 0.0, out)
