"""Monte-Carlo and pathwise checks of the deflator's claimed properties."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .characteristics import Triplet, bounds
from .deflator import DeflatorSpec, deflator_terminal
from .errors import NotApplicable
from .simulate import SimConfig, _log_factors, density_path, simulate_paths
from .viability import check_lambda, witness_increments

THRESHOLD = 3.5
MIN_SAMPLES = 100


@dataclass(frozen=True)
class TestReport:
    name: str
    mean: float
    stderr: float
    target: float
    z: float
    passed: bool
    n: int
    sided: str = "two"
    threshold: float = THRESHOLD
    detail: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self):
        out = {"name": self.name, "mean": self.mean, "stderr": self.stderr, "target": self.target,
               "z": self.z, "sided": self.sided, "threshold": self.threshold, "n": self.n,
               "pass": self.passed}
        if self.detail:
            out["detail"] = dict(self.detail)
        return out


def _stats(samples):
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n}")
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(n))
    return mean, se, n


def _z(diff, se):
    if se > 0:
        return diff / se
    return 0.0 if diff == 0 else math.copysign(math.inf, diff)


def martingale_test(samples, target, threshold=THRESHOLD, name="martingale") -> TestReport:
    mean, se, n = _stats(samples)
    z = _z(mean - target, se)
    return TestReport(name, mean, se, float(target), z, bool(abs(z) <= threshold), n, "two", threshold)


def supermartingale_test(samples, bound, threshold=THRESHOLD, name="supermartingale") -> TestReport:
    mean, se, n = _stats(samples)
    z = _z(mean - bound, se)
    return TestReport(name, mean, se, float(bound), z, bool(z <= threshold), n, "upper", threshold)


def tv_bound_test(L_T, L_sup, epsilon, threshold=THRESHOLD) -> list[TestReport]:
    """E|L(T) - 1| <= eps and E sup_t |L(t) - 1| <= eps, one-sided."""
    a = supermartingale_test(np.abs(np.asarray(L_T) - 1.0), epsilon, threshold, "tv_terminal")
    b = supermartingale_test(np.asarray(L_sup), epsilon, threshold, "tv_sup")
    return [a, b]


def _sup_abs_L_minus_1(block, Y):
    L = density_path(block, Y)
    return np.max(np.abs(L - 1.0), axis=1)


def test_functions(S0=0.0):
    return {
        "up": lambda s: (s > S0).astype(float),
        "one": lambda s: np.ones_like(s),
        "clamp": lambda s: np.clip(s - S0, -10.0, 10.0),
    }


def girsanov_consistency_test(t: Triplet, Y, cfg: SimConfig, fns=None, threshold=THRESHOLD,
                              base_values=None) -> list[TestReport]:
    """mean_P[L(T) f(S(T))] against mean_{P^Y}[f(S(T))], both laws simulated."""
    fns = fns or test_functions()
    if base_values is None:
        base = simulate_paths(t, cfg)
        base_values = base.collect(lambda b: np.column_stack(
            [density_path(b, Y, terminal=True), b.S_T()]))
    L, S = base_values[:, 0], base_values[:, 1]
    tilted = simulate_paths(t, cfg, law=Y, stream=1)
    SY = tilted.collect(lambda b: b.S_T())
    out = []
    for name, f in fns.items():
        m1, s1, n = _stats(L * f(S))
        m2, s2, _ = _stats(f(SY))
        se = math.hypot(s1, s2)
        z = _z(m1 - m2, se)
        out.append(TestReport(f"girsanov[{name}]", m1, se, m2, z, bool(abs(z) <= threshold), n, "two",
                              threshold))
    return out


def p_grid(t: Triplet, p_tilde, n=7):
    """n points strictly inside I (infinite ends replaced by p~ -+ 2)."""
    b = bounds(t.kappa)
    lo = b.ell if math.isfinite(b.ell) else min(p_tilde, 0.0) - 2.0
    hi = b.r if math.isfinite(b.r) else max(p_tilde, 0.0) + 2.0
    return np.linspace(lo, hi, n + 2)[1:-1]


def equality_fractions(t: Triplet, p_tilde):
    b = bounds(t.kappa)
    ps = []
    for p in (0.0, 0.2, p_tilde):
        if b.ell < p < b.r or p == 0.0 or p == p_tilde:
            if p not in ps:
                ps.append(p)
    return ps


def run_suite(spec: DeflatorSpec, cfg: SimConfig, threshold=THRESHOLD) -> list[TestReport]:
    """All statistical checks for one viable, simulable model."""
    t, Y = spec.base, spec.Y
    pt = spec.p_tilde
    eq_ps = equality_fractions(t, pt)
    grid = p_grid(t, pt)
    ps = np.array(eq_ps + list(grid))

    def per_block(b):
        L, Xt, Z = deflator_terminal(spec, b)
        lr = _log_factors(b, ps, "exact").sum(axis=1) - _log_factors(b, pt, "exact").sum(axis=1)[:, None]
        zx = L[:, None] * np.exp(lr)
        sup = _sup_abs_L_minus_1(b, Y)
        return np.column_stack([L, sup, b.S_T(), zx])

    base = simulate_paths(t, cfg)
    cols = base.collect(per_block)
    L, sup, S = cols[:, 0], cols[:, 1], cols[:, 2]
    zx = cols[:, 3:]
    reports = [martingale_test(L, 1.0, threshold, "martingale[L]")]
    k = len(eq_ps)
    for j, p in enumerate(eq_ps):
        reports.append(martingale_test(zx[:, j], 1.0, threshold, f"martingale[ZX,p={p:.6g}]"))
    for j, p in enumerate(grid):
        reports.append(supermartingale_test(zx[:, k + j], 1.0, threshold, f"supermartingale[ZX,p={p:.6g}]"))
    # control: the witness payoff of a Lambda+ model is identically 0 on a viable model
    reports.append(supermartingale_test(np.zeros_like(L), 0.0, threshold, "supermartingale[control]"))
    reports.extend(tv_bound_test(L, sup, spec.epsilon, threshold))
    reports.extend(girsanov_consistency_test(t, Y, cfg, threshold=threshold,
                                             base_values=np.column_stack([L, S])))
    return reports


def arbitrage_demo(t: Triplet, cfg: SimConfig, threshold=THRESHOLD) -> TestReport:
    """Simulate the buy-and-hold witness X^{0,theta} on a non-viable model."""
    verdict = check_lambda(t)
    if verdict.viable:
        raise NotApplicable("model is viable: no Lambda witness to simulate")
    pc = simulate_paths(t, cfg)
    lam = pc.intensity

    def per_block(b):
        drift, jumps = witness_increments(verdict, b.dt, np.where(b.jump, b.dJ, 0.0))
        inc = drift + jumps
        X = np.cumsum(inc, axis=1)
        mono = np.all(inc >= 0.0, axis=1)
        return np.column_stack([X[:, -1], mono])

    cols = pc.collect(per_block)
    XT, mono = cols[:, 0], cols[:, 1].astype(bool)
    m1 = abs(float(t.kappa.integrate(lambda x: x))) if not t.kappa.is_null else 0.0
    target = verdict.drift_rate * t.T + m1 * t.T
    rep = martingale_test(XT, target, threshold, "arbitrage_demo")
    positive_needed = verdict.drift_rate > 0 or lam > 0
    frac_pos = float(np.mean(XT > 0))
    ok = bool(rep.passed and mono.all() and (frac_pos == 1.0 or not positive_needed))
    detail = {"status": verdict.status.value, "monotone_paths": int(mono.sum()),
              "x0": 0.0, "min_XT": float(XT.min()), "fraction_positive": frac_pos}
    return TestReport(rep.name, rep.mean, rep.stderr, rep.target, rep.z, ok, rep.n, "two",
                      threshold, detail)
