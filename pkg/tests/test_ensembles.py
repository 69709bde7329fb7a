import math

import numpy as np
import pytest

from mapent.degrees import DegreePair, regular_pair
from mapent.ensembles import (EnsembleSpec, TannerGraph, design_rate,
                              empirical_degree_profile, multi_poisson_profile,
                              multi_poisson_spec, poisson_spec, sample_graph,
                              sample_multi_poisson, sample_poisson,
                              sample_standard, standard_spec, tv_distance)
from mapent.errors import IntegralityError, SocketExhaustion


def test_design_rates():
    assert design_rate(standard_spec(6, regular_pair(3, 6))) == pytest.approx(0.5)
    assert design_rate(poisson_spec(10, 3.0, {6: 1.0})) == pytest.approx(0.5)
    assert design_rate(poisson_spec(10, 8.0, {4: 1.0},
                                    family="ldgm")) == pytest.approx(0.5)
    assert design_rate(standard_spec(4, regular_pair(8, 4),
                                     family="ldgm")) == pytest.approx(0.5)


def test_standard_sampler_forced_profile():
    g = sample_standard(6, regular_pair(3, 6), seed=0)
    assert g.n_checks == 3
    assert g.n_edges == 18
    assert np.all(g.variable_degrees() == 3)
    prof = empirical_degree_profile(g)
    assert prof.lambda_hat == {3: 1.0}
    assert prof.rho_hat == {6: 1.0}


def test_standard_sampler_integrality_error():
    with pytest.raises(IntegralityError):
        sample_standard(6, regular_pair(3, 5), seed=0)  # m = 18/5
    with pytest.raises(ValueError):
        standard_spec(6, regular_pair(3, 5))


def test_standard_sampler_deterministic():
    pair = DegreePair({2: 0.5, 3: 0.5}, {5: 1.0})
    a = sample_standard(10, pair, seed=42)
    b = sample_standard(10, pair, seed=42)
    assert a == b
    c = sample_standard(10, pair, seed=43)
    assert a != c


def test_standard_sampler_irregular_profile_exact():
    pair = DegreePair({2: 0.5, 3: 0.5}, {5: 1.0})
    g = sample_standard(10, pair, seed=1)
    prof = empirical_degree_profile(g)
    assert prof.lambda_hat == {2: 0.5, 3: 0.5}
    assert prof.rho_hat == {5: 1.0}
    assert g.n_edges == 25


def test_poisson_sampler_single_variable():
    g = sample_poisson(1, 1.0, {2: 1.0}, seed=0)
    for check in g.checks:
        assert check == (0, 0)


def test_poisson_check_count_statistics():
    # mean check count n*gamma/P'(1) = 5000
    counts = [sample_poisson(10_000, 3.0, {6: 1.0}, seed=s).n_checks
              for s in range(200)]
    mean = np.mean(counts)
    assert abs(mean - 5000) < 3 * math.sqrt(5000 / 200)


def test_poisson_profile_matches_poisson_law():
    g = sample_poisson(100_000, 3.0, {6: 1.0}, seed=7)
    prof = empirical_degree_profile(g)
    ref = {l: math.exp(-3.0) * 3.0**l / math.factorial(l) for l in range(30)}
    assert tv_distance(prof.lambda_hat, ref) < 0.01
    assert tv_distance(prof.rho_hat, {6: 1.0}) < 0.01


def test_edges_in_range():
    for seed in range(5):
        g = sample_poisson(50, 2.0, {3: 1.0}, seed=seed)
        for c in g.checks:
            assert all(0 <= i < 50 for i in c)
        g2 = sample_multi_poisson(60, 0.5, regular_pair(3, 6), seed=seed)
        for c in g2.checks:
            assert all(0 <= i < 60 for i in c)


def test_multi_poisson_spec_validation():
    with pytest.raises(ValueError):
        multi_poisson_spec(100, 3.0, regular_pair(3, 6))  # gamma >= Lambda'(1)
    spec = multi_poisson_spec(100, 0.5, regular_pair(3, 6))
    assert spec.t_max == 5


def test_multi_poisson_deterministic():
    pair = regular_pair(3, 6)
    a = sample_multi_poisson(200, 0.5, pair, seed=9)
    b = sample_multi_poisson(200, 0.5, pair, seed=9)
    assert a == b


def test_multi_poisson_socket_exhaustion_retry():
    # tiny n with relatively large gamma exhausts sockets eventually
    pair = regular_pair(2, 2)
    spec = multi_poisson_spec(2, 0.9, pair)
    raised = False
    for seed in range(200):
        try:
            sample_graph(spec, seed)
        except SocketExhaustion:
            raised = True
            break
    assert raised  # and the retry wrapper recovers from it
    g = sample_graph(spec, seed, retries=50)
    assert g.n_var == 2


def test_multi_poisson_profile_matches_sampler():
    pair = regular_pair(3, 6)
    prof = multi_poisson_profile(0.5, pair)
    assert sum(prof.lambda_hat.values()) == pytest.approx(1.0, abs=1e-9)
    emp = empirical_degree_profile(sample_multi_poisson(100_000, 0.5, pair,
                                                        seed=12))
    assert tv_distance(prof.lambda_hat, emp.lambda_hat) < 0.02


def test_multi_poisson_profile_initial_state_and_small_gamma():
    pair = regular_pair(3, 6)
    # gamma -> 0: profile approaches the design law
    prof = multi_poisson_profile(0.01, pair)
    assert tv_distance(prof.lambda_hat, pair.lam) < 0.05
    # support never extends below degree 0 and mass above l_max shrinks
    assert min(prof.lambda_hat) >= 0
    heavy = sum(c for d, c in prof.lambda_hat.items() if d > pair.l_max)
    prof2 = multi_poisson_profile(0.5, pair)
    heavy2 = sum(c for d, c in prof2.lambda_hat.items() if d > pair.l_max)
    assert heavy < heavy2 < 0.2


def test_empirical_profile_tiny_cases():
    g = TannerGraph(3, ((0, 1), (1, 2)))
    prof = empirical_degree_profile(g)
    assert prof.lambda_hat == {1: pytest.approx(2 / 3), 2: pytest.approx(1 / 3)}
    assert prof.rho_hat == {2: 1.0}
    empty = TannerGraph(4, ())
    prof2 = empirical_degree_profile(empty)
    assert prof2.lambda_hat == {0: 1.0}
    assert prof2.rho_hat == {}


def test_graph_json_roundtrip():
    g = sample_standard(6, regular_pair(3, 6), seed=0)
    assert TannerGraph.from_json(g.to_json()) == g


def test_spec_validation_errors():
    with pytest.raises(ValueError):
        EnsembleSpec("bogus", "ldpc", 10, pair=regular_pair(3, 6))
    with pytest.raises(ValueError):
        EnsembleSpec("standard", "bogus", 10, pair=regular_pair(3, 6))
    with pytest.raises(ValueError):
        poisson_spec(10, -1.0, {6: 1.0})
