"""Detection of arbitrage of the first kind through the Lambda-plus / Lambda-minus predicates.

Lambda+ : no negative jumps, no diffusion, and a > int_(0,inf) x kappa(dx).
Lambda- is the mirror image.  On either set the buy-and-hold position
theta = +1 (resp. -1) has nondecreasing wealth with a positive increment rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .characteristics import Triplet

INF = math.inf


class Status(str, Enum):
    VIABLE = "viable"
    ARBITRAGE_PLUS = "arbitrage_plus"
    ARBITRAGE_MINUS = "arbitrage_minus"


@dataclass(frozen=True)
class ViabilityVerdict:
    status: Status
    strategy: int = 0
    drift_rate: float | None = None
    jump_integral: float | None = None

    @property
    def viable(self):
        return self.status is Status.VIABLE

    def to_dict(self):
        return {"status": self.status.value, "strategy": self.strategy,
                "drift_rate": self.drift_rate, "note": "lambda-null" if self.viable else None}


def side_first_moment(kappa, side):
    """(integral of x over one side, error estimate); +-inf if it diverges."""
    if not kappa.has_side(side):
        return 0.0, 0.0
    if not kappa.abs_moment_finite(1, side):
        return (INF if side == "positive" else -INF), 0.0
    if side == "positive":
        return kappa.integrate_with_error(lambda x: x, 0.0, INF, (False, True))
    return kappa.integrate_with_error(lambda x: x, -INF, 0.0, (True, False))


def check_lambda(t: Triplet) -> ViabilityVerdict:
    kappa = t.kappa
    if t.c == 0.0:
        if not kappa.has_side("negative"):
            m, err = side_first_moment(kappa, "positive")
            gap = t.a - m
            if math.isfinite(m) and gap > max(err, 1e-13 * max(1.0, abs(m))):
                return ViabilityVerdict(Status.ARBITRAGE_PLUS, 1, float(gap), float(m))
        if not kappa.has_side("positive"):
            m, err = side_first_moment(kappa, "negative")
            gap = m - t.a
            if math.isfinite(m) and gap > max(err, 1e-13 * max(1.0, abs(m))):
                return ViabilityVerdict(Status.ARBITRAGE_MINUS, -1, float(gap), float(m))
    return ViabilityVerdict(Status.VIABLE)


def witness_increments(verdict: ViabilityVerdict, dt, jump_sizes):
    """Increments of the witnessing wealth X^{0,theta}: drift part and jump part.

    ``dt`` are grid time steps, ``jump_sizes`` the jumps of S.  Both parts are
    nonnegative on the non-viable set.
    """
    th = verdict.strategy
    return verdict.drift_rate * np.asarray(dt), th * np.asarray(jump_sizes)
