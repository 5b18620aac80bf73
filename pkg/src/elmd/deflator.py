"""The deflator Z = L / X~ assembled from a tilt and the tilted optimal fraction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .characteristics import Triplet, bounds, classify, validate
from .errors import ArbitrageDetected, InfiniteActivity, InvalidParam, InvalidPath, NonpositiveWealth
from .growth import OptimalFraction, growth_derivative, optimal_fraction
from .simulate import PathBlock, density_path, stoch_exp
from .tilt import TiltField, TiltReport, build_tilt, tilted_triplet, validate_tilt
from .viability import check_lambda

REL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class DeflatorSpec:
    base: Triplet
    epsilon: float
    eta: float
    Y: TiltField
    tilted: Triplet
    optimum: OptimalFraction
    tilt_report: TiltReport
    rel_max: float
    rel_ok: bool
    simulable: bool

    @property
    def p_tilde(self):
        return self.optimum.p

    @property
    def case(self):
        return classify(bounds(self.base.kappa)).value

    def to_dict(self):
        return {"epsilon": self.epsilon, "eta": self.eta, "case": self.case,
                "p_tilde": self.p_tilde, "dg_ell_tilted": self.tilt_report.dg_ell,
                "dg_r_tilted": self.tilt_report.dg_r, "rel_max": self.rel_max,
                "rel_ok": self.rel_ok, "simulable": self.simulable}


def _rel_grid(t: Triplet, p_tilde, n=9):
    b = bounds(t.kappa)
    lo = b.ell if math.isfinite(b.ell) else p_tilde - 2.0
    hi = b.r if math.isfinite(b.r) else p_tilde + 2.0
    return np.linspace(lo, hi, n)


def rel_check(t: Triplet, p_tilde, tol=REL_TOL):
    """max |rel(p | p~)| = |(p - p~) dg(p~)| over a grid in I (0 when dg(p~) = 0)."""
    d = growth_derivative(t, p_tilde)
    worst = 0.0
    for p in _rel_grid(t, p_tilde):
        if p == p_tilde:
            continue
        v = (p - p_tilde) * d if d != 0.0 else 0.0
        worst = max(worst, abs(v) if not math.isnan(v) else math.inf)
    return float(worst), bool(worst <= tol)


def build_deflator(t: Triplet, epsilon: float, tol: float = REL_TOL, eta: float | None = None) -> DeflatorSpec:
    """validate -> viability -> tilt with budget eps/(2T) -> tilted optimum -> checks.

    ``eta`` overrides the tilt budget; only the mis-budgeted control uses it.
    """
    if not 0.0 < epsilon < 1.0:
        raise InvalidParam(f"epsilon must lie in (0, 1), got {epsilon}")
    t = validate(t)
    verdict = check_lambda(t)
    if not verdict.viable:
        raise ArbitrageDetected(verdict)
    eta_bar = epsilon / (2.0 * t.T) if eta is None else float(eta)
    Y = build_tilt(t, eta_bar)
    tilted = tilted_triplet(t, Y)
    opt = optimal_fraction(tilted)
    report = validate_tilt(t, Y, eta_bar, tol)
    rel_max, rel_ok = rel_check(tilted, opt.p, tol)
    simulable = t.kappa.is_null or math.isfinite(t.kappa.total_mass())
    return DeflatorSpec(t, float(epsilon), eta_bar, Y, tilted, opt, report, rel_max, rel_ok, simulable)


def _check(spec: DeflatorSpec, block: PathBlock):
    if not spec.simulable:
        raise InfiniteActivity("deflator paths need a finite jump measure")
    if np.any(1.0 + spec.p_tilde * block.dJ[block.jump] <= 0.0):
        raise InvalidPath("a jump violates 1 + p~ dS > 0")


def deflator_along_path(spec: DeflatorSpec, block: PathBlock):
    """(L, X~, Z) on the records of a base-law path (block), each (B, M + 1)."""
    _check(spec, block)
    L = density_path(block, spec.Y)
    try:
        X = stoch_exp(block, spec.p_tilde, mode="exact")
    except NonpositiveWealth as exc:
        raise InvalidPath(str(exc)) from exc
    return L, X, L / X


def deflator_terminal(spec: DeflatorSpec, block: PathBlock):
    """(L(T), X~(T), Z(T)) per path."""
    _check(spec, block)
    L = density_path(block, spec.Y, terminal=True)
    X = stoch_exp(block, spec.p_tilde, mode="exact", terminal=True)
    return L, X, L / X
