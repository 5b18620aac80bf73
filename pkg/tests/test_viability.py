import math

import numpy as np
import pytest

from elmd.characteristics import Triplet
from elmd.jump_measure import JumpMeasure
from elmd.viability import Status, check_lambda, witness_increments

INF = math.inf


def test_positive_jumps_with_large_drift_is_arbitrage():
    v = check_lambda(Triplet(2.0, 0.0, JumpMeasure.atomic([(1.0, 1.0)])))
    assert v.status is Status.ARBITRAGE_PLUS
    assert v.strategy == 1
    assert v.drift_rate == pytest.approx(1.0, abs=1e-14)


def test_boundary_drift_is_viable():
    # a equal to the jump compensator leaves no strictly positive drift
    assert check_lambda(Triplet(1.0, 0.0, JumpMeasure.atomic([(1.0, 1.0)]))).viable


def test_negative_side_mirror():
    v = check_lambda(Triplet(-2.0, 0.0, JumpMeasure.atomic([(-1.0, 1.0)])))
    assert v.status is Status.ARBITRAGE_MINUS
    assert v.strategy == -1
    assert v.drift_rate == pytest.approx(1.0, abs=1e-14)


def test_diffusion_removes_arbitrage():
    assert check_lambda(Triplet(2.0, 0.1, JumpMeasure.atomic([(1.0, 1.0)]))).viable


def test_two_sided_jumps_viable():
    k = JumpMeasure.atomic([(1.0, 1.0), (-0.1, 0.01)])
    assert check_lambda(Triplet(100.0, 0.0, k)).viable


def test_pure_drift():
    assert check_lambda(Triplet(0.5, 0.0, JumpMeasure.empty())).status is Status.ARBITRAGE_PLUS
    assert check_lambda(Triplet(-0.5, 0.0, JumpMeasure.empty())).status is Status.ARBITRAGE_MINUS
    assert check_lambda(Triplet(0.0, 0.0, JumpMeasure.empty())).viable


def test_infinite_first_moment_is_viable():
    k = JumpMeasure.density("power", (0.0, 1.0), alpha=2.5)
    assert check_lambda(Triplet(5.0, 0.0, k)).viable


def test_density_compensator_against_closed_form():
    k = JumpMeasure.density("exponential", (0.0, INF), scale=1.0, rate=2.0)
    # int x e^{-2x} dx = 1/4
    assert check_lambda(Triplet(0.24, 0.0, k)).viable
    v = check_lambda(Triplet(0.26, 0.0, k))
    assert v.drift_rate == pytest.approx(0.01, rel=1e-10)


def test_witness_increments_nonnegative():
    v = check_lambda(Triplet(2.0, 0.0, JumpMeasure.atomic([(1.0, 1.0)])))
    d, j = witness_increments(v, np.full(4, 0.25), np.array([0.0, 1.0, 0.0, 1.0]))
    assert np.all(d >= 0) and np.all(j >= 0)
    assert d.sum() + j.sum() == pytest.approx(3.0)
