import math

import numpy as np
import pytest

from mapent.channels import (BEC, BIAWGN, BSC, ERASURE, DiscreteTable,
                             LlrPopulation, binary_entropy,
                             binary_entropy_inverse, capacity, llr_of_output,
                             parse_channel, sample_llr_population,
                             symmetry_test, tanh_moments)
from mapent.errors import ImpossibleOutput, SpecParseError


def test_llr_values_bec():
    ch = BEC(0.4)
    assert llr_of_output(ch, ERASURE) == 0.0
    assert llr_of_output(ch, 0) == math.inf
    with pytest.raises(ImpossibleOutput):
        llr_of_output(ch, 1)


def test_llr_values_bsc():
    ch = BSC(0.11)
    a = 0.5 * math.log(0.89 / 0.11)
    assert llr_of_output(ch, 0) == pytest.approx(a)
    assert llr_of_output(ch, 1) == pytest.approx(-a)


def test_llr_values_biawgn():
    ch = BIAWGN(0.8)
    assert llr_of_output(ch, 1.3) == pytest.approx(1.3 / 0.64)


def test_population_basics():
    pop = LlrPopulation(np.array([0.0, np.inf, -3.0, 100.0]))
    # finite values clamped to +-60, infinity preserved
    assert pop.values[3] == 60.0
    assert np.isposinf(pop.values[1])
    with pytest.raises(ValueError):
        LlrPopulation(np.array([-np.inf]))
    with pytest.raises(ValueError):
        LlrPopulation(np.array([np.nan]))


def test_bec_population_fractions():
    pop = sample_llr_population(BEC(0.5), 100_000, seed=0)
    zf = pop.zero_fraction()
    assert abs(zf - 0.5) < 3 * math.sqrt(0.25 / 100_000)
    assert pop.infinite_fraction() == pytest.approx(1 - zf)


def test_bsc_zero_crossover_all_infinite():
    pop = sample_llr_population(BSC(0.0), 1000, seed=0)
    assert np.isposinf(pop.values).all()


def test_bsc_tanh_mean():
    p = 0.11
    pop = sample_llr_population(BSC(p), 200_000, seed=1)
    t = np.tanh(pop.values)
    se = t.std(ddof=1) / math.sqrt(len(t))
    assert abs(t.mean() - (1 - 2 * p) ** 2) < 3 * se


def test_capacity_closed_forms():
    assert capacity(BEC(0.3)) == pytest.approx(0.7)
    assert capacity(BSC(0.2145018)) == pytest.approx(0.25, abs=1e-6)
    assert capacity(BSC(0.1100279)) == pytest.approx(0.5, abs=1e-6)


def test_capacity_biawgn_quadrature():
    scipy_integrate = pytest.importorskip("scipy.integrate")
    for sigma in (0.5, 1.0, 1.5):
        got = capacity(BIAWGN(sigma))

        def f(y):
            dens = math.exp(-(y - 1) ** 2 / (2 * sigma**2)) / math.sqrt(
                2 * math.pi * sigma**2)
            return dens * math.log2(1 + math.exp(-2 * y / sigma**2))

        ref = 1.0 - scipy_integrate.quad(f, -80, 80, limit=400)[0]
        assert got == pytest.approx(ref, abs=1e-9)


def test_capacity_monotone():
    assert capacity(BEC(0.2)) > capacity(BEC(0.3))
    assert capacity(BSC(0.05)) > capacity(BSC(0.10))
    assert capacity(BIAWGN(0.7)) > capacity(BIAWGN(0.9))


def test_discrete_table_symmetry_check():
    rows = ((0, 0.9, 0.1), (1, 0.1, 0.9))
    ch = DiscreteTable(rows)
    assert capacity(ch) == pytest.approx(capacity(BSC(0.1)))
    with pytest.raises(ValueError):
        DiscreteTable(((0, 0.8, 0.1), (1, 0.2, 0.9)))  # asymmetric


def test_parse_channel():
    assert isinstance(parse_channel("bec:0.45"), BEC)
    assert isinstance(parse_channel("bsc:0.11"), BSC)
    assert isinstance(parse_channel("biawgn:0.8"), BIAWGN)
    with pytest.raises(SpecParseError):
        parse_channel("foo:1")
    with pytest.raises(SpecParseError):
        parse_channel("bsc:0.7")  # p >= 1/2


@pytest.mark.parametrize("channel", [BEC(0.45), BSC(0.11), BIAWGN(1.0)])
def test_channel_populations_pass_symmetry(channel):
    pop = sample_llr_population(channel, 100_000, seed=3)
    report = symmetry_test(pop, 6)
    assert report.passed


def test_symmetry_failure_cases():
    const = LlrPopulation.constant(-1.0, 1000)
    rep = symmetry_test(const, 1)
    assert not rep.passed
    assert rep.discrepancies[0] == pytest.approx(
        abs(math.tanh(-1.0) - math.tanh(1.0) ** 2))
    allinf = LlrPopulation.all_infinity(1000)
    assert symmetry_test(allinf, 4).passed


def test_log_one_plus_tanh_series_identity():
    # E log(1+tanh X) = sum_k (1/(2k-1) - 1/(2k)) E tanh^{2k} X
    for channel in (BSC(0.11), BIAWGN(1.0)):
        pop = sample_llr_population(channel, 100_000, seed=9)
        t = np.tanh(pop.values)
        lhs_samples = np.log1p(t)
        lhs = lhs_samples.mean()
        se = lhs_samples.std(ddof=1) / math.sqrt(len(t))
        K = 50
        moments = tanh_moments(pop, K)
        coefs = np.array([1.0 / (2 * k - 1) - 1.0 / (2 * k)
                          for k in range(1, K + 1)])
        rhs = float(coefs @ moments)
        # tail of the series is bounded by the last moment times ln2 residue
        tail = moments[-1] * (math.log(2) - coefs.sum())
        assert abs(lhs - rhs) <= tail + 4 * se


def test_binary_entropy_and_inverse():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy_inverse(0.5) == pytest.approx(0.110028, abs=1e-5)
    assert binary_entropy_inverse(binary_entropy(0.3)) == pytest.approx(
        0.3, abs=1e-10)
    with pytest.raises(ValueError):
        binary_entropy(1.5)
    with pytest.raises(ValueError):
        binary_entropy_inverse(-0.1)


def test_shannon_limit_column():
    for rate, p in [(0.25, 0.2145018), (0.4, 0.1461024),
                    (0.5, 0.1100279), (1 / 3, 0.1739524)]:
        assert binary_entropy_inverse(1 - rate) == pytest.approx(p, abs=1e-6)


def test_population_determinism():
    a = sample_llr_population(BSC(0.11), 1000, seed=5)
    b = sample_llr_population(BSC(0.11), 1000, seed=5)
    assert np.array_equal(a.values, b.values)
