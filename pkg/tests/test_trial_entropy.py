import itertools
import math

import numpy as np
import pytest

from mapent.channels import (BEC, BSC, LlrPopulation, capacity,
                             sample_llr_population)
from mapent.degrees import DegreePair, PoissonLaw, regular_pair
from mapent.density import bec_fixed_point, de_iterate
from mapent.ensembles import asymptotic_laws
from mapent.errors import NonSymmetricInput
from mapent.rng import substream
from mapent.trial_entropy import (bec_bound, bec_map_threshold,
                                  bec_stationary_points, bec_trial_entropy,
                                  conjectured_pb, fano_bounds, phi_v_mc,
                                  simple_ansatz_bound)

PAIR36 = regular_pair(3, 6)
LAWS36 = asymptotic_laws("standard", "ldpc", PAIR36)


def test_bec_trial_entropy_anchor_values():
    assert bec_trial_entropy(0.0, 0.37, PAIR36) == pytest.approx(0.0, abs=1e-15)
    assert bec_trial_entropy(1.0, 1.0, PAIR36) == pytest.approx(0.5)
    assert bec_trial_entropy(1.0, 0.45, PAIR36) == pytest.approx(-0.05)


def test_bec_stationary_points_structure():
    only = bec_stationary_points(0.30, PAIR36, "ldpc")
    assert len(only) == 1 and only[0][0] == pytest.approx(0.0, abs=1e-12)
    three = bec_stationary_points(0.45, PAIR36, "ldpc")
    assert len(three) == 3
    z_bad, psi_bad, stable = three[-1]
    assert stable and 0 < z_bad < 1
    assert psi_bad == pytest.approx(
        bec_trial_entropy(z_bad, 0.45, PAIR36), abs=1e-12)
    ldgm = bec_stationary_points(0.55, regular_pair(8, 4), "ldgm")
    assert any(abs(z - 1.0) < 1e-12 for z, _, _ in ldgm)


def test_stationary_points_reachable_by_iteration():
    for eps in (0.35, 0.45, 0.48):
        for z, _, stable in bec_stationary_points(eps, PAIR36, "ldpc"):
            if not stable:
                continue
            # reachable from a nearby start
            start = min(1.0, z + 0.01) if z < 0.5 else 1.0
            fp = bec_fixed_point(eps, PAIR36, "ldpc", z0=start)
            if abs(fp.z - z) > 1e-9:
                fp = bec_fixed_point(eps, PAIR36, "ldpc", z0=max(0.0, z - 0.01))
            assert abs(fp.z - z) < 1e-9


@pytest.mark.parametrize("pair,family,expect", [
    (regular_pair(3, 6), "ldpc", 0.4881508),
    (regular_pair(5, 10), "ldpc", 0.4994859),
    (regular_pair(8, 4), "ldgm", 0.5022591),
])
def test_bec_map_thresholds(pair, family, expect):
    res = bec_map_threshold(pair, family)
    assert res.threshold == pytest.approx(expect, abs=1e-5)
    assert res.bracket[0] <= res.threshold <= res.bracket[1]
    assert res.method == "analytic_bec"


def test_bec_map_threshold_degree_two():
    res = bec_map_threshold(regular_pair(2, 4), "ldpc")
    assert res.threshold == pytest.approx(1 / 3, abs=1e-6)


def test_phi_v_zero_gives_rate_minus_capacity():
    ch = BSC(0.11)
    rep = phi_v_mc(LlrPopulation.all_zero(100), PAIR36, ch, "ldpc",
                   100_000, seed=1)
    expect = 0.5 - capacity(ch)
    assert abs(rep.value - expect) <= 3 * rep.std_error
    assert rep.value == pytest.approx(
        rep.edge_term + rep.var_term + rep.check_term, abs=1e-12)


def test_phi_v_zero_ldgm_capacity_specialization():
    ch = BSC(0.11)
    pair = regular_pair(8, 4)
    rep = phi_v_mc(LlrPopulation.all_zero(100), pair, ch, "ldgm",
                   100_000, seed=2)
    expect = 1.0 - capacity(ch) / 0.5
    assert abs(rep.value - expect) <= 3 * rep.std_error


def test_phi_v_infinity_is_exactly_zero():
    rep = phi_v_mc(LlrPopulation.all_infinity(100), PAIR36, BSC(0.11), "ldpc",
                   10_000, seed=3)
    assert rep.value == 0.0
    assert rep.std_error == 0.0


def test_phi_bec_mixture_matches_closed_form():
    eps = 0.45
    fp = bec_fixed_point(eps, PAIR36, "ldpc", z0=1.0)
    n = 400_000
    rng = substream(4, "mk")
    v = LlrPopulation(np.where(rng.random(n) < fp.z, 0.0, np.inf))
    rep = phi_v_mc(v, PAIR36, BEC(eps), "ldpc", n, seed=5)
    assert abs(rep.value - bec_trial_entropy(fp.z, eps, PAIR36)) \
        <= 3 * rep.std_error


def test_phi_two_mass_exact_enumeration_oracle():
    # V = +-a two-mass symmetric density on BSC(p): all three expectations
    # are finite sums, giving an exact reference value.
    p, a, l, k = 0.1, 1.2, 3, 6
    qm = math.exp(-2 * a) / (1 + math.exp(-2 * a))
    tanh, log2 = math.tanh, math.log2
    b = math.atanh(tanh(a) ** 5)
    podd = sum(math.comb(5, j) * qm**j * (1 - qm) ** (5 - j)
               for j in range(6) if j % 2 == 1)
    u_sup = [(b, 1 - podd), (-b, podd)]
    v_sup = [(a, 1 - qm), (-a, qm)]
    h0 = 0.5 * math.log((1 - p) / p)
    h_sup = [(h0, 1 - p), (-h0, p)]
    edge = -3.0 * sum(pu * pv * log2(0.5 * (1 + tanh(u) * tanh(v)))
                      for u, pu in u_sup for v, pv in v_sup)
    var = 0.0
    for h, ph in h_sup:
        for us in itertools.product(u_sup, repeat=l):
            pr = ph * math.prod(pu for _, pu in us)
            s = h + sum(u for u, _ in us)
            val = math.log1p(math.exp(-2 * s)) - sum(
                math.log1p(math.exp(-2 * u)) for u, _ in us)
            var += pr * val / math.log(2)
    chk = 0.5 * sum(
        math.prod(pv for _, pv in vs)
        * log2(0.5 * (1 + math.prod(tanh(v) for v, _ in vs)))
        for vs in itertools.product(v_sup, repeat=k))
    phi_exact = edge + var + chk

    n = 500_000
    nm = round(qm * n)
    v_pop = LlrPopulation(np.concatenate([np.full(n - nm, a), np.full(nm, -a)]))
    rep = phi_v_mc(v_pop, PAIR36, BSC(p), "ldpc", 1_000_000, seed=9)
    assert abs(rep.value - phi_exact) <= 3.5 * rep.std_error


def test_phi_rejects_asymmetric_population():
    bad = LlrPopulation.constant(-1.0, 5000)
    with pytest.raises(NonSymmetricInput):
        phi_v_mc(bad, PAIR36, BSC(0.11), "ldpc", 10_000, seed=6)


def test_phi_report_json_schema():
    rep = phi_v_mc(LlrPopulation.all_zero(100), PAIR36, BSC(0.11), "ldpc",
                   10_000, seed=7)
    d = rep.to_json_dict()
    assert set(d) == {"phi", "stderr", "terms", "M", "admissible_check"}
    assert set(d["terms"]) == {"edge", "var", "check"}


def test_simple_ansatz_bound():
    psi = simple_ansatz_bound(PAIR36, BEC(0.37))
    for z in (0.0, 0.2, 0.7, 1.0):
        assert psi(z) == pytest.approx(bec_trial_entropy(z, 0.37, PAIR36))
    assert psi(0.0) == pytest.approx(0.0, abs=1e-15)
    ch = BSC(0.11)
    psi2 = simple_ansatz_bound(PAIR36, ch)
    assert psi2(1.0) == pytest.approx((1 - capacity(ch)) - 0.5)


def test_fano_bounds():
    pb, coeff = fano_bounds(0.5, 0.5)
    assert pb == pytest.approx(0.110028, abs=1e-5)
    assert coeff == pytest.approx(1.0)
    assert fano_bounds(0.0, 0.5)[0] == 0.0
    pb1, c1 = fano_bounds(1.0, 1.0)
    assert pb1 == pytest.approx(0.5, abs=1e-9)
    assert c1 == pytest.approx(1.0)


def test_conjectured_pb_bec_closed_forms():
    from mapent.density import BecState
    # all-known fixed point -> no errors
    assert conjectured_pb(BecState(0.0, 0.0), BEC(0.3), PAIR36) == 0.0
    # full erasure: every bit is a fair coin -> 1/2
    assert conjectured_pb(BecState(1.0, 1.0), BEC(1.0), PAIR36) == pytest.approx(0.5)


def test_conjectured_pb_below_threshold_tiny():
    state = de_iterate(BSC(0.05), LAWS36, 200, 50_000, "zero", seed=8)
    pb = conjectured_pb(state, BSC(0.05), PAIR36, "ldpc", m_samples=100_000,
                        seed=9)
    assert pb < 1e-3


def test_bec_bound_nonnegative_branch():
    # below the MAP threshold the reported bound is the zero branch
    assert bec_bound(0.40, (PAIR36.var_law, PAIR36.check_law)) == pytest.approx(
        0.0, abs=1e-12)
    assert bec_bound(0.55, (PAIR36.var_law, PAIR36.check_law)) > 0.01


def test_poisson_bec_bound_positive_above_capacity():
    laws = (PoissonLaw(3.0), regular_pair(3, 6).check_law)
    # at eps = 0.55 > 1 - r = 0.5, even V = 0 gives a positive bound
    assert bec_bound(0.55, laws) >= 0.05 - 1e-9
