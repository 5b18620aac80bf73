"""Compound Poisson stock with one downward jump size.

The growth rate g(p) = a p + log(1 - 0.5 p) + 0.5 p has the closed-form
maximiser p = 2 - 1/(a + 0.5) on [0, 2). We compare that with
the numeric root and then check the deflator on simulated paths.
"""
from elmd import JumpMeasure, SimConfig, Triplet, build_deflator, check_lambda, optimal_fraction, run_suite

kappa = JumpMeasure.atomic([(-0.5, 1.0)])

for a in (0.1, 0.4, 0.8, 1.5, -0.2):
    t = Triplet(a, 0.0, kappa)
    opt = optimal_fraction(t)
    # dg(p) = a + 0.5 - 0.5/(1 - 0.5 p) = 0
    closed = 2.0 - 1.0 / (a + 0.5)
    print(f"a = {a:4.1f}  p~ = {opt.p: .10f}  closed form {closed: .10f}  rule {opt.rule}")

t = Triplet(0.1, 0.0, kappa)
print("viability:", check_lambda(t).status)

spec = build_deflator(t, epsilon=0.2)
for r in run_suite(spec, SimConfig(n_paths=20_000, seed=7)):
    print(f"  {'ok  ' if r.passed else 'FAIL'} {r.name:32s} mean {r.mean: .5f}  z {r.z: .2f}")
