import math

import numpy as np
import pytest

from elmd.characteristics import PartitionCase, Triplet, bounds, bounds_by_scan, classify, validate
from elmd.errors import InvalidParam, NotSpecial
from elmd.jump_measure import JumpMeasure

INF = math.inf
E = JumpMeasure.empty()


def _exp(lo, hi):
    return JumpMeasure.density("exponential", (lo, hi))


CASES = [
    (_exp(0.0, INF), (0.0, INF), "P1"),
    (_exp(-INF, 0.0), (-INF, 0.0), "P2"),
    (JumpMeasure.atomic([(-0.5, 1.0)]), (-INF, 2.0), "P3"),
    (JumpMeasure.atomic([(0.25, 1.0)]), (-4.0, INF), "P4"),
    (_exp(0.0, INF) + JumpMeasure.atomic([(-0.5, 1.0)]), (0.0, 2.0), "P5"),
    (_exp(-INF, 0.0) + JumpMeasure.atomic([(0.5, 1.0)]), (-2.0, 0.0), "P6"),
    (JumpMeasure.atomic([(-0.5, 1.0), (0.25, 1.0)]), (-4.0, 2.0), "P7"),
    (_exp(0.0, INF) + _exp(-INF, 0.0), (0.0, 0.0), "P8"),
    (E, (-INF, INF), "P9"),
]


@pytest.mark.parametrize("kappa,expected,case", CASES, ids=[c[2] for c in CASES])
def test_bounds_and_case(kappa, expected, case):
    b = bounds(kappa)
    assert (b.ell, b.r) == expected
    assert classify(b).value == case


@pytest.mark.parametrize("kappa,expected,case", CASES, ids=[c[2] for c in CASES])
def test_reflection_swaps_case(kappa, expected, case):
    c = classify(bounds(kappa.reflect()))
    assert c is PartitionCase(case).mirror()
    assert c.mirror().value == case


def test_bounds_match_defining_sets():
    k = JumpMeasure.atomic([(-0.5, 1.0), (0.25, 2.0)]) + JumpMeasure.density("uniform", (0.3, 0.4))
    grid = np.linspace(-5.0, 5.0, 4001)
    lo, hi = bounds_by_scan(k, grid)
    b = bounds(k)
    assert abs(lo - b.ell) <= 2.5e-3 and abs(hi - b.r) <= 2.5e-3


def test_composed_flags():
    assert {c.value for c in PartitionCase if c.composed} == {"P5", "P6", "P7"}


def test_validate_rejects_bad_inputs():
    with pytest.raises(InvalidParam):
        validate(Triplet(math.nan, 0.0, E))
    with pytest.raises(InvalidParam):
        validate(Triplet(0.0, -1.0, E))
    with pytest.raises(InvalidParam):
        validate(Triplet(0.0, 0.0, E, T=0.0))
    heavy = JumpMeasure.density("power", (1.0, INF), alpha=1.5)
    with pytest.raises(NotSpecial):
        validate(Triplet(0.0, 0.0, heavy))


def test_triplet_reflect():
    t = Triplet(0.3, 0.1, JumpMeasure.atomic([(-0.5, 1.0)]), 2.0)
    r = t.reflect()
    assert (r.a, r.c, r.T) == (-0.3, 0.1, 2.0)
    assert list(r.kappa.atoms_x) == [0.5]
