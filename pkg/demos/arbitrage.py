"""Unit upward jumps with drift 2.

Between jumps the price grows at rate a - kappa[1] = 1 and it only jumps up, so
holding the stock is an arbitrage. The viability check returns that strategy
and the simulation shows wealth never falls.
"""
from elmd import ArbitrageDetected, JumpMeasure, SimConfig, Triplet, arbitrage_demo, build_deflator, check_lambda

t = Triplet(2.0, 0.0, JumpMeasure.atomic([(1.0, 1.0)]))
v = check_lambda(t)
print(v.to_dict())

r = arbitrage_demo(t, SimConfig(n_paths=20_000, seed=1))
print(r.name, "passed" if r.passed else "failed", r.detail)

try:
    build_deflator(t, epsilon=0.2)
except ArbitrageDetected as exc:
    print("no deflator:", exc)
