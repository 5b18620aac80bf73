import math

import numpy as np
import pytest
from scipy import stats

from elmd.characteristics import Triplet
from elmd.errors import InfiniteActivity, InvalidConfig, NonpositiveWealth
from elmd.jump_measure import JumpMeasure
from elmd.simulate import (SimConfig, density_path, discrete_exp, increments, make_path, ratio_increments,
                           simulate_paths, stoch_exp)
from elmd.tilt import y3

INF = math.inf
CP = Triplet(0.1, 0.0, JumpMeasure.atomic([(-0.5, 1.0)]))
JD = Triplet(0.1, 0.04, JumpMeasure.atomic([(-0.5, 1.0), (0.3, 0.5)]))


@pytest.fixture(scope="module")
def cp_block():
    return simulate_paths(CP, SimConfig(n_paths=1000, n_steps=16, seed=7)).block(0)


@pytest.fixture(scope="module")
def jd_block():
    return simulate_paths(JD, SimConfig(n_paths=1000, n_steps=16, seed=7)).block(0)


def test_config_validation():
    with pytest.raises(InvalidConfig):
        SimConfig(n_paths=0)
    with pytest.raises(InvalidConfig):
        SimConfig(n_steps=0)
    with pytest.raises(InvalidConfig):
        SimConfig(workers=0)


def test_infinite_activity_refused():
    t = Triplet(0.0, 0.0, JumpMeasure.density("power", (0.0, 1.0), alpha=1.5))
    with pytest.raises(InfiniteActivity):
        simulate_paths(t, SimConfig(n_paths=10))


def test_records_are_time_ordered(jd_block):
    b = jd_block
    # padding sits at T after the last record
    assert np.all(np.diff(b.t, axis=1) >= 0)
    assert np.allclose(b.dt.sum(axis=1), b.T)
    assert np.all(b.dJ[~b.jump] == 0)


def test_jump_counts_and_sizes():
    pc = simulate_paths(JD, SimConfig(n_paths=20000, n_steps=4, seed=1))
    n = pc.collect(lambda b: b.n_jumps)
    assert abs(n.mean() - 1.5) < 4 * math.sqrt(1.5 / n.size)
    sizes = np.concatenate(pc.map_blocks(lambda b: b.dJ[b.jump]))
    frac = np.mean(sizes == 0.3)
    assert abs(frac - 1 / 3) < 4 * math.sqrt(2 / 9 / sizes.size)


def test_jump_times_uniform():
    pc = simulate_paths(JD, SimConfig(n_paths=5000, n_steps=4, seed=2))
    jt = np.concatenate(pc.map_blocks(lambda b: b.t[b.jump]))
    assert stats.kstest(jt, "uniform").pvalue > 1e-3


def test_brownian_increments(jd_block):
    W = jd_block.dW.sum(axis=1)
    assert abs(W.mean()) < 4 / math.sqrt(W.size)
    assert abs(W.var() - 1.0) < 4 * math.sqrt(2 / W.size)


def test_continuous_part_has_compensated_drift():
    b = make_path(CP, 4)
    # dC = (a - int x dkappa) dt = 0.6 dt with no Brownian input
    assert np.allclose(b.dC, 0.6 * b.dt)


def test_make_path_places_jumps():
    b = make_path(CP, 4, jumps=[(0.5, -0.5), (0.6, -0.5)])
    assert b.n_jumps[0] == 2
    # grid record at 0.5 comes before the jump at 0.5
    i = np.nonzero(b.t[0] == 0.5)[0]
    assert list(b.jump[0, i]) == [False, True]
    assert b.S_T()[0] == pytest.approx(0.6 - 1.0)


def test_yor_formula(jd_block):
    b = jd_block
    u, v = increments(b, 0.7), increments(b, -0.4)
    lhs = discrete_exp(u) * discrete_exp(v)
    rhs = discrete_exp(u + v + u * v)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10)


def test_ratio_identity(jd_block):
    b = jd_block
    p, q = 0.9, 0.35
    lhs = stoch_exp(b, p, "euler") / stoch_exp(b, q, "euler")
    rhs = discrete_exp(ratio_increments(b, p, q))[:, 0::2]
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10)


def test_euler_matches_discrete_product(jd_block):
    b = jd_block
    np.testing.assert_allclose(stoch_exp(b, 0.5, "euler"), discrete_exp(increments(b, 0.5))[:, 0::2],
                               rtol=1e-12)


def test_exact_mode_closed_form_merton():
    t = Triplet(0.05, 0.04, JumpMeasure.empty())
    b = simulate_paths(t, SimConfig(n_paths=200, n_steps=8, seed=3)).block(0)
    W = b.dW.sum(axis=1)
    p = 1.3
    ref = np.exp(p * (0.05 * 1.0 + 0.2 * W) - 0.5 * p * p * 0.04)
    np.testing.assert_allclose(stoch_exp(b, p, "exact", terminal=True), ref, rtol=1e-12)


def test_euler_strong_order_half():
    # strong error of euler against exact mode, n and 4n steps on shared Brownian paths
    t = Triplet(0.05, 0.25, JumpMeasure.empty())
    rng = np.random.default_rng(9)
    fine = rng.standard_normal((1500, 256)) * math.sqrt(1 / 256)
    errs = []
    for n in (16, 64):
        dW = fine.reshape(fine.shape[0], n, -1).sum(axis=2)
        sq = []
        for row in dW:
            b = make_path(t, n, dW=row)
            e = stoch_exp(b, 1.0, "euler", terminal=True) - stoch_exp(b, 1.0, "exact", terminal=True)
            sq.append(float(e[0]) ** 2)
        errs.append(math.sqrt(np.mean(sq)))
    assert 1.6 <= errs[0] / errs[1] <= 2.5


def test_nonpositive_wealth_raises():
    b = make_path(CP, 4, jumps=[(0.5, -0.5)])
    with pytest.raises(NonpositiveWealth):
        stoch_exp(b, 2.0)


def test_vector_fractions(jd_block):
    ps = np.array([0.0, 0.3, -0.2])
    v = stoch_exp(jd_block, ps, "exact", terminal=True)
    assert v.shape == (jd_block.n, 3)
    np.testing.assert_allclose(v[:, 1], stoch_exp(jd_block, 0.3, "exact", terminal=True), rtol=1e-13)
    assert np.all(v[:, 0] == 1.0)


def test_worker_invariance():
    cfg1 = SimConfig(n_paths=10000, n_steps=8, seed=5, workers=1)
    cfg4 = SimConfig(n_paths=10000, n_steps=8, seed=5, workers=4)
    a = simulate_paths(JD, cfg1).collect(lambda b: b.S_T())
    b = simulate_paths(JD, cfg4).collect(lambda b: b.S_T())
    assert np.array_equal(a, b)


def test_streams_differ_and_paths_reproducible():
    cfg = SimConfig(n_paths=5000, n_steps=8, seed=5)
    s0 = simulate_paths(JD, cfg).collect(lambda b: b.S_T())
    s1 = simulate_paths(JD, cfg, stream=1).collect(lambda b: b.S_T())
    assert not np.array_equal(s0, s1)
    pc = simulate_paths(JD, cfg)
    assert pc.path(4100).S_T()[0] == s0[4100]


def test_tilted_law_sampling():
    k = JumpMeasure.density("uniform", (-1.0, -0.2), height=1.0)
    t = Triplet(0.3, 0.0, k)
    Y = y3(0.3, k, 5.0)
    pc = simulate_paths(t, SimConfig(n_paths=20000, n_steps=4, seed=8), law=Y)
    sizes = np.concatenate(pc.map_blocks(lambda b: b.dJ[b.jump]))
    mean_ref = float(pc.triplet.kappa.integrate(lambda x: x)) / 0.8
    se = sizes.std() / math.sqrt(sizes.size)
    assert abs(sizes.mean() - mean_ref) < 4 * se
    assert pc.intensity == pytest.approx(0.8, rel=1e-10)


def test_density_path_is_product_of_y():
    k = JumpMeasure.density("uniform", (-1.0, -0.2), height=1.0)
    t = Triplet(0.3, 0.0, k)
    Y = y3(0.3, k, 5.0)
    b = make_path(t, 4, jumps=[(0.3, -0.5), (0.7, -0.99)])
    L = density_path(b, Y)
    ref = float(np.prod(Y.evaluate(np.array([-0.5, -0.99]))))
    assert L[0, -1] == pytest.approx(ref, rel=1e-13)
    assert density_path(b, Y, terminal=True)[0] == pytest.approx(ref, rel=1e-13)


def test_single_jump_factor():
    # a jump on a grid time gets its own record with dt = 0
    b = make_path(Triplet(0.0, 0.0, JumpMeasure.atomic([(-0.5, 1.0)])), 2, jumps=[(0.5, -0.5)])
    X = stoch_exp(b, 1.0 / 3.0)
    i = int(np.nonzero(b.jump[0])[0][0])
    assert X[0, i + 1] / X[0, i] == pytest.approx(5.0 / 6.0, rel=1e-15)


def test_zero_fraction_is_one(jd_block):
    assert np.all(stoch_exp(jd_block, 0.0) == 1.0)


def test_euler_deterministic_gap_is_first_order():
    # on a noise-free path the Euler product (1 + p a dt)**n misses exp(p a T) by O(1/n)
    t = Triplet(0.8, 0.0, JumpMeasure.empty())
    gaps = []
    for n in (2 ** 8, 2 ** 10):
        b = make_path(t, n)
        gaps.append(abs(stoch_exp(b, 1.5, "euler", terminal=True)[0] / math.exp(1.2) - 1.0))
    assert 3.6 <= gaps[0] / gaps[1] <= 4.4


def test_path_depends_on_index_only():
    a = simulate_paths(JD, SimConfig(n_paths=4500, n_steps=8, seed=5)).path(4400)
    b = simulate_paths(JD, SimConfig(n_paths=9000, n_steps=8, seed=5)).path(4400)
    v = a.valid[0]
    assert np.array_equal(a.t[0, v], b.t[0, b.valid[0]])
    assert a.S_T()[0] == b.S_T()[0]
