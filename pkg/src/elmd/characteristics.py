"""Model triplet (a, c, kappa, T), the admissible-fraction interval and the case partition."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import InvalidParam, NotSpecial
from .jump_measure import JumpMeasure

INF = math.inf


@dataclass(frozen=True, eq=False)
class Triplet:
    """Drift density a, diffusion density c, jump measure kappa, horizon T.

    Densities are per unit time (clock G(t) = t).  ``kappa`` may be a
    JumpMeasure or a tilted measure exposing the same interface.
    """

    a: float
    c: float
    kappa: JumpMeasure
    T: float = 1.0
    validated: bool = False

    def reflect(self) -> "Triplet":
        """Law of -S: drift negated, jumps mirrored."""
        return Triplet(-self.a, self.c, self.kappa.reflect(), self.T, self.validated)

    def with_kappa(self, kappa, a=None) -> "Triplet":
        return replace(self, kappa=kappa, a=self.a if a is None else a)


@dataclass(frozen=True)
class SupportInterval:
    ell: float
    r: float

    def __post_init__(self):
        if not (self.ell <= 0.0 <= self.r):
            raise InvalidParam(f"need ell <= 0 <= r, got ({self.ell}, {self.r})")

    @property
    def I(self):
        """(lo, hi) of [ell, r] intersected with R; infinite ends stay open."""
        return self.ell, self.r

    def contains(self, p):
        return self.ell <= p <= self.r

    @property
    def width(self):
        return self.r - self.ell

    def reflect(self):
        return SupportInterval(-self.r, -self.ell)


class PartitionCase(str, Enum):
    P1 = "P1"
    P2 = "P2"
    P3 = "P3"
    P4 = "P4"
    P5 = "P5"
    P6 = "P6"
    P7 = "P7"
    P8 = "P8"
    P9 = "P9"

    def mirror(self):
        return PartitionCase(MIRROR[self.value])

    @property
    def composed(self):
        return self.value in ("P5", "P6", "P7")


MIRROR = {"P1": "P2", "P2": "P1", "P3": "P4", "P4": "P3", "P5": "P6", "P6": "P5",
          "P7": "P7", "P8": "P8", "P9": "P9"}


def bounds(kappa) -> SupportInterval:
    """ell and r from the support extremes of kappa."""
    if kappa.is_null:
        return SupportInterval(-INF, INF)
    x_min, x_max = kappa.support_bounds()
    if x_max <= 0.0:
        ell = -INF
    elif math.isinf(x_max):
        ell = 0.0
    else:
        ell = -1.0 / x_max
    if x_min >= 0.0:
        r = INF
    elif math.isinf(x_min):
        r = 0.0
    else:
        r = -1.0 / x_min
    return SupportInterval(ell, r)


def bounds_by_scan(kappa, grid) -> tuple[float, float]:
    """Brute-force ell, r from the defining sets, for cross-checks only.

    ell = inf{p : kappa{1 + p x < 0} = 0}, r = sup{p : ...}, scanned over ``grid``.
    """
    ok = []
    for p in grid:
        if p >= 0:
            bad = kappa.interval_mass(-INF, -1.0 / p, (True, False)) if p > 0 else 0.0
        else:
            bad = kappa.interval_mass(-1.0 / p, INF, (False, True))
        ok.append(bad == 0)
    ok = np.array(ok)
    grid = np.asarray(grid)
    if not ok.any():
        return math.nan, math.nan
    return float(grid[ok].min()), float(grid[ok].max())


def classify(b: SupportInterval) -> PartitionCase:
    ell, r = b.ell, b.r
    fin_l = -INF < ell < 0.0
    fin_r = 0.0 < r < INF
    if ell == 0.0 and r == INF:
        return PartitionCase.P1
    if ell == -INF and r == 0.0:
        return PartitionCase.P2
    if ell == -INF and fin_r:
        return PartitionCase.P3
    if fin_l and r == INF:
        return PartitionCase.P4
    if ell == 0.0 and fin_r:
        return PartitionCase.P5
    if fin_l and r == 0.0:
        return PartitionCase.P6
    if fin_l and fin_r:
        return PartitionCase.P7
    if ell == 0.0 and r == 0.0:
        return PartitionCase.P8
    if ell == -INF and r == INF:
        return PartitionCase.P9
    raise InvalidParam(f"unclassifiable bounds ({ell}, {r})")


def validate(t: Triplet) -> Triplet:
    if not (isinstance(t.a, (int, float)) and math.isfinite(t.a)):
        raise InvalidParam("drift a must be a finite number")
    if not math.isfinite(t.c) or t.c < 0:
        raise InvalidParam(f"diffusion c must be finite and >= 0, got {t.c}")
    if not (t.T > 0 and math.isfinite(t.T)):
        raise InvalidParam(f"horizon T must be positive and finite, got {t.T}")
    if not t.kappa.is_special():
        raise NotSpecial("integral of |x| ^ x**2 against kappa diverges")
    return replace(t, a=float(t.a), c=float(t.c), T=float(t.T), validated=True)
