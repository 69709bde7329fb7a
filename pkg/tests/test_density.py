import math

import numpy as np
import pytest

from mapent.channels import BEC, BSC, LlrPopulation, sample_llr_population, symmetry_test
from mapent.degrees import PoissonLaw, regular_pair
from mapent.density import (BecState, bec_bp_threshold, bec_de_step,
                            bec_fixed_point, bec_fixed_points_scan,
                            bec_trajectory, build_de_system, check_update,
                            de_iterate, variable_update)
from mapent.ensembles import asymptotic_laws
from mapent.rng import substream

PAIR36 = regular_pair(3, 6)
LAWS36 = asymptotic_laws("standard", "ldpc", PAIR36)


def test_check_update_all_infinite_passes_j_through():
    # tanh(inf) = 1, so U is distributed like J
    j = LlrPopulation(np.array([0.7, -0.3, 2.0]))
    v = LlrPopulation.all_infinity(10)
    u = check_update(j, v, PAIR36.check_law, 50_000, seed=0)
    vals, counts = np.unique(np.round(u.values, 9), return_counts=True)
    assert set(vals) <= set(np.round(np.arctanh(np.tanh([0.7, -0.3, 2.0])), 9))
    assert counts.min() > 10_000


def test_check_update_zero_absorbs():
    j = LlrPopulation.all_infinity(1)
    v = LlrPopulation.all_zero(10)
    u = check_update(j, v, PAIR36.check_law, 1000, seed=1)
    assert np.all(u.values == 0.0)


def test_check_update_infinity_exact():
    j = LlrPopulation.all_infinity(1)
    v = LlrPopulation.all_infinity(10)
    u = check_update(j, v, PAIR36.check_law, 1000, seed=2)
    assert np.isposinf(u.values).all()
    # finite J never produces an infinite output
    jf = LlrPopulation.constant(5.0, 10)
    u2 = check_update(jf, v, PAIR36.check_law, 1000, seed=3)
    assert np.isfinite(u2.values).all()


def test_check_update_bec_erasure_algebra():
    # output zero-fraction = 1 - rho(1 - z) for LDPC
    z = 0.37
    n = 200_000
    rng = substream(99, "mk")
    vals = np.where(rng.random(n) < z, 0.0, np.inf)
    v = LlrPopulation(vals)
    u = check_update(LlrPopulation.all_infinity(1), v, PAIR36.check_law, n, seed=4)
    expect = 1 - (1 - z) ** 5
    assert abs(u.zero_fraction() - expect) < 3 * math.sqrt(expect * (1 - expect) / n)


def test_variable_update_zero_u_returns_h():
    h = sample_llr_population(BSC(0.2), 50_000, seed=5)
    u = LlrPopulation.all_zero(10)
    v = variable_update(h, u, PAIR36.var_law, 50_000, seed=6)
    # distributionally equal to h: same support, frequencies within noise
    a = 0.5 * math.log(0.8 / 0.2)
    frac_neg = np.mean(v.values < 0)
    assert abs(frac_neg - 0.2) < 3 * math.sqrt(0.16 / 50_000)
    assert set(np.round(np.abs(v.values), 9)) == {np.round(a, 9)}


def test_variable_update_h_infinite_absorbs():
    h = LlrPopulation.all_infinity(10)
    u = sample_llr_population(BSC(0.3), 1000, seed=7)
    v = variable_update(h, u, PAIR36.var_law, 1000, seed=8)
    assert np.isposinf(v.values).all()


def test_variable_update_bec_fraction():
    eps, zh = 0.45, 0.6
    n = 200_000
    h = sample_llr_population(BEC(eps), n, seed=9)
    rng = substream(100, "mk")
    u = LlrPopulation(np.where(rng.random(n) < zh, 0.0, np.inf))
    v = variable_update(h, u, PAIR36.var_law, n, seed=10)
    expect = h.zero_fraction() * zh**2  # eps * lambda(zh), empirically
    se = math.sqrt(expect * (1 - expect) / n)
    assert abs(v.zero_fraction() - expect) < 3 * se


def test_de_infinity_init_is_fixed_point():
    state = de_iterate(BSC(0.11), LAWS36, 20, 10_000, "infinity", seed=11)
    assert np.isposinf(state.v_pop.values).all()
    assert np.isposinf(state.u_pop.values).all()


def test_de_bec_below_threshold_converges():
    state = de_iterate(BEC(0.40), LAWS36, 500, 50_000, "zero", seed=12)
    assert state.v_pop.zero_fraction() < 0.01


def test_de_bec_above_threshold_tracks_bad_branch():
    state = de_iterate(BEC(0.45), LAWS36, 500, 100_000, "zero", seed=13)
    z_bad = bec_fixed_point(0.45, PAIR36, "ldpc", z0=1.0).z
    assert abs(state.v_pop.zero_fraction() - z_bad) < 0.02


def test_de_symmetry_preserved():
    for channel in (BEC(0.45), BSC(0.09)):
        state = de_iterate(channel, LAWS36, 60, 100_000, "zero", seed=14)
        assert symmetry_test(state.v_pop).passed
        assert symmetry_test(state.u_pop).passed


def test_de_deterministic():
    a = de_iterate(BSC(0.10), LAWS36, 30, 20_000, "zero", seed=15)
    b = de_iterate(BSC(0.10), LAWS36, 30, 20_000, "zero", seed=15)
    assert np.array_equal(a.v_pop.values, b.v_pop.values)
    assert np.array_equal(a.u_pop.values, b.u_pop.values)


def test_de_poisson_uses_full_degree():
    # degree-0 variables exist, so the infinity init does not stay infinite
    laws = asymptotic_laws("poisson", "ldpc", regular_pair(3, 6), gamma=3.0)
    state = de_iterate(BSC(0.05), laws, 5, 20_000, "infinity", seed=16)
    assert not np.isposinf(state.v_pop.values).all()


def test_bec_de_step_examples():
    s = bec_de_step(BecState(0.0, 0.0), 0.45, PAIR36, "ldpc")
    assert s.z == 0.0
    s2 = bec_de_step(BecState(1.0, 0.0), 0.3, regular_pair(8, 4), "ldgm")
    assert s2.z == 1.0
    fp = bec_fixed_point(0.45, PAIR36, "ldpc", z0=1.0)
    nxt = bec_de_step(fp, 0.45, PAIR36, "ldpc")
    assert abs(nxt.z - fp.z) < 1e-12
    assert 0 < fp.z < 1


def test_bec_de_step_monotone():
    for z1, z2 in [(0.1, 0.2), (0.4, 0.8)]:
        a = bec_de_step(BecState(z1, 0), 0.45, PAIR36, "ldpc").z
        b = bec_de_step(BecState(z2, 0), 0.45, PAIR36, "ldpc").z
        assert a <= b
    for e1, e2 in [(0.3, 0.4), (0.45, 0.6)]:
        a = bec_de_step(BecState(0.5, 0), e1, PAIR36, "ldpc").z
        b = bec_de_step(BecState(0.5, 0), e2, PAIR36, "ldpc").z
        assert a <= b


@pytest.mark.parametrize("pair,family,expect,tol", [
    (regular_pair(3, 6), "ldpc", 0.4294398, 1e-6),
    (regular_pair(4, 8), "ldpc", 0.3834465, 1e-6),
    (regular_pair(2, 4), "ldpc", 1 / 3, 1e-6),
    (regular_pair(8, 4), "ldgm", 0.6165534, 1e-6),
])
def test_bec_bp_thresholds(pair, family, expect, tol):
    assert bec_bp_threshold(pair, family) == pytest.approx(expect, abs=tol)


def test_bp_threshold_matches_iterated_bisection():
    # cross-check the closed-form threshold against iterating the recursion
    pair = regular_pair(3, 6)
    lo, hi = 0.3, 0.5
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        z = 1.0
        for _ in range(20_000):
            z_next = bec_de_step(BecState(z, 0), mid, pair, "ldpc").z
            if z_next < 1e-9 or abs(z_next - z) < 1e-13:
                break
            z = z_next
        if z_next < 1e-9:
            lo = mid
        else:
            hi = mid
    assert bec_bp_threshold(pair, "ldpc") == pytest.approx(0.5 * (lo + hi),
                                                           abs=1e-5)


def test_bec_poisson_laws_in_scalar_recursion():
    laws = (PoissonLaw(3.0), regular_pair(3, 6).check_law)
    fp = bec_fixed_point(0.45, laws, "ldpc", z0=1.0)
    # fixed point satisfies z = eps * exp(gamma*(zh-1))
    assert fp.z == pytest.approx(0.45 * math.exp(3 * (fp.z_hat - 1)), abs=1e-10)


def test_fixed_points_scan_finds_all_branches():
    pts = bec_fixed_points_scan(0.45, PAIR36, "ldpc")
    zs = [z for z, _ in pts]
    assert any(abs(z) < 1e-12 for z in zs)
    assert len(zs) == 3
    stable = [z for z, fp in pts if abs(fp) < 1]
    assert max(stable) == pytest.approx(
        bec_fixed_point(0.45, PAIR36, "ldpc", 1.0).z, abs=1e-9)


def test_trajectory_matches_sampled_de_one_step():
    # per-iteration innovations of the sampled DE against the scalar map
    eps, n, T, seed = 0.30, 100_000, 50, 0
    system = build_de_system(BEC(eps), LAWS36, n, seed)
    eps_emp = system.h_pop.zero_fraction()
    rng = substream(seed, "de-chain")
    v = LlrPopulation.all_zero(n)
    for _ in range(T):
        u = check_update(system.j_pop, v, system.check_law, n, rng)
        z_pred = eps_emp * u.zero_fraction() ** 2
        v = variable_update(system.h_pop, u, system.var_law, n, rng)
        se = math.sqrt(max(z_pred * (1 - z_pred), 1e-12) / n)
        assert abs(v.zero_fraction() - z_pred) <= 4 * se


def test_bec_trajectory_shape():
    zs = bec_trajectory(0.45, PAIR36, "ldpc", 10, z0=1.0)
    assert zs[0] == 1.0
    assert len(zs) == 11
    assert np.all(np.diff(zs) <= 1e-12)  # decreasing toward the fixed point
