"""Tanner-graph ensembles: standard, Poisson and multi-Poisson samplers.

Graphs are bipartite multigraphs; repeated edges are recorded verbatim
(parity folding happens only when a GF(2) matrix is built).  All samplers
are pure functions of (parameters, seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .degrees import DegreePair, PoissonLaw, PolyLaw
from .errors import IntegralityError, SocketExhaustion
from .rng import substream

INT_TOL = 1e-9


def _as_int(x: float, what: str) -> int:
    r = round(x)
    if abs(x - r) > INT_TOL:
        raise IntegralityError(f"{what} = {x} is not an integer")
    return int(r)


@dataclass(frozen=True)
class EnsembleSpec:
    """Parameters of one graph ensemble plus the code family reading.

    kind is one of 'standard' (n, pair), 'poisson' (n, gamma, rho side of
    pair) and 'multi_poisson' (n, gamma, pair); family is 'ldpc' or 'ldgm'.
    """

    kind: str
    family: str
    n: int
    pair: Optional[DegreePair] = None
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("standard", "poisson", "multi_poisson"):
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if self.family not in ("ldpc", "ldgm"):
            raise ValueError(f"unknown code family {self.family!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.kind == "standard":
            if self.pair is None:
                raise ValueError("standard ensemble needs a degree pair")
            # socket-count integrality: n*Lambda_l, m, m*P_k
            n, pair = self.n, self.pair
            for l, c in pair.lam.items():
                _as_int(n * c, f"n*Lambda_{l}")
            m = _as_int(n * pair.lambda_prime1 / pair.rho_prime1, "check count m")
            for k, c in pair.rho.items():
                _as_int(m * c, f"m*P_{k}")
        else:
            if self.gamma is None or self.gamma <= 0:
                raise ValueError("poisson/multi_poisson ensembles need gamma > 0")
            if self.pair is None:
                raise ValueError("ensemble needs a degree pair (check side)")
            if self.kind == "multi_poisson" and self.gamma >= self.pair.lambda_prime1:
                raise ValueError("multi_poisson requires gamma < Lambda'(1)"
                                 " (t_max would be <= 0)")

    @property
    def t_max(self) -> int:
        """Number of multi-Poisson rounds."""
        if self.kind != "multi_poisson":
            raise ValueError("t_max only defined for multi_poisson ensembles")
        return int(math.floor(self.pair.lambda_prime1 / self.gamma)) - 1

    def mean_checks(self) -> float:
        if self.kind == "standard":
            return self.n * self.pair.lambda_prime1 / self.pair.rho_prime1
        if self.kind == "poisson":
            return self.n * self.gamma / self.pair.rho_prime1
        return self.n * self.gamma / self.pair.rho_prime1 * self.t_max

    def var_law(self):
        """Variable-node degree law used in asymptotic formulas."""
        if self.kind == "standard":
            return self.pair.var_law
        if self.kind == "poisson":
            return PoissonLaw(self.gamma)
        profile = multi_poisson_profile(self.gamma, self.pair)
        return PolyLaw(profile.lambda_hat, 0, "Lambda^(gamma)")

    def check_law(self):
        return self.pair.check_law


@dataclass(frozen=True)
class EnsembleLaws:
    """Asymptotic view of an ensemble: degree laws plus the family reading.

    Duck-compatible with EnsembleSpec for density evolution and trial
    entropy (var_law(), check_law(), family), with no blocklength attached.
    """

    var: object
    check: PolyLaw
    family: str
    kind: str = "standard"

    def var_law(self):
        return self.var

    def check_law(self):
        return self.check


def asymptotic_laws(kind: str, family: str, pair: Optional[DegreePair] = None,
                    gamma: Optional[float] = None) -> EnsembleLaws:
    """Degree laws of an ensemble family without fixing a blocklength."""
    if kind == "standard":
        return EnsembleLaws(pair.var_law, pair.check_law, family, kind)
    if kind == "poisson":
        return EnsembleLaws(PoissonLaw(gamma), pair.check_law, family, kind)
    if kind == "multi_poisson":
        profile = multi_poisson_profile(gamma, pair)
        return EnsembleLaws(PolyLaw(profile.lambda_hat, 0, "Lambda^(gamma)"),
                            pair.check_law, family, kind)
    raise ValueError(f"unknown ensemble kind {kind!r}")


def standard_spec(n: int, pair: DegreePair, family: str = "ldpc") -> EnsembleSpec:
    return EnsembleSpec("standard", family, n, pair=pair)


def poisson_spec(n: int, gamma: float, rho: Dict[int, float],
                 family: str = "ldpc") -> EnsembleSpec:
    # variable side of the pair is unused for Poisson; store a placeholder
    pair = DegreePair({2: 1.0}, rho)
    return EnsembleSpec("poisson", family, n, pair=pair, gamma=gamma)


def multi_poisson_spec(n: int, gamma: float, pair: DegreePair,
                       family: str = "ldpc") -> EnsembleSpec:
    return EnsembleSpec("multi_poisson", family, n, pair=pair, gamma=gamma)


def design_rate(spec: EnsembleSpec) -> float:
    """Design rate of the code ensemble."""
    pair = spec.pair
    if spec.family == "ldpc":
        if spec.kind == "poisson":
            return 1.0 - spec.gamma / pair.rho_prime1
        return 1.0 - pair.lambda_prime1 / pair.rho_prime1
    # LDGM
    if spec.kind == "poisson":
        return pair.rho_prime1 / spec.gamma
    return pair.rho_prime1 / pair.lambda_prime1


@dataclass(frozen=True)
class TannerGraph:
    """Concrete bipartite multigraph; checks list their variable neighbors."""

    n_var: int
    checks: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "checks",
                           tuple(tuple(int(i) for i in c) for c in self.checks))

    @property
    def n_checks(self) -> int:
        return len(self.checks)

    @property
    def n_edges(self) -> int:
        return sum(len(c) for c in self.checks)

    def variable_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_var, dtype=np.int64)
        for c in self.checks:
            for i in c:
                deg[i] += 1
        return deg

    def to_json(self) -> str:
        return json.dumps({"n": self.n_var, "checks": [list(c) for c in self.checks]})

    @staticmethod
    def from_json(text: str) -> "TannerGraph":
        obj = json.loads(text)
        return TannerGraph(obj["n"], tuple(tuple(c) for c in obj["checks"]))


@dataclass(frozen=True)
class DegreeProfile:
    """Empirical or asymptotic node-degree histograms."""

    lambda_hat: Dict[int, float]
    rho_hat: Dict[int, float]


def tv_distance(a: Dict[int, float], b: Dict[int, float]) -> float:
    """Total variation distance between two degree histograms."""
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)


def empirical_degree_profile(graph: TannerGraph) -> DegreeProfile:
    """Exact node-degree histograms, multi-edges counted with multiplicity."""
    var_deg = graph.variable_degrees()
    lam: Dict[int, float] = {}
    for d, cnt in zip(*np.unique(var_deg, return_counts=True)):
        lam[int(d)] = cnt / graph.n_var
    rho: Dict[int, float] = {}
    if graph.n_checks:
        check_deg = np.array([len(c) for c in graph.checks])
        for d, cnt in zip(*np.unique(check_deg, return_counts=True)):
            rho[int(d)] = cnt / graph.n_checks
    return DegreeProfile(lam, rho)


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

def _assign_degrees(rng: np.random.Generator, n: int,
                    law: Dict[int, float]) -> np.ndarray:
    """Random partition of n labeled nodes into degree classes.

    Shuffles the labels, then assigns degrees lowest-index-first in
    increasing degree order, so the partition is uniform.
    """
    order = rng.permutation(n)
    degrees = np.zeros(n, dtype=np.int64)
    pos = 0
    for d in sorted(law):
        cnt = _as_int(n * law[d], f"n*coef at degree {d}")
        degrees[order[pos:pos + cnt]] = d
        pos += cnt
    if pos != n:
        raise IntegralityError("degree-class sizes do not add up to n")
    return degrees


def sample_standard(n: int, pair: DegreePair, seed: int) -> TannerGraph:
    """Socket-matching construction of the standard (n, Lambda, P) ensemble."""
    m = _as_int(n * pair.lambda_prime1 / pair.rho_prime1, "check count m")
    rng = substream(seed, "standard")
    var_deg = _assign_degrees(rng, n, pair.lam)
    chk_deg = _assign_degrees(rng, m, pair.rho)
    var_sockets = np.repeat(np.arange(n), var_deg)
    chk_sockets = np.repeat(np.arange(m), chk_deg)
    if len(var_sockets) != len(chk_sockets):
        raise IntegralityError("socket counts differ between sides")
    var_sockets = var_sockets[rng.permutation(len(var_sockets))]
    checks = []
    pos = 0
    for a in range(m):
        k = int(chk_deg[a])
        checks.append(tuple(int(i) for i in var_sockets[pos:pos + k]))
        pos += k
    return TannerGraph(n, tuple(checks))


def _poisson_round(rng: np.random.Generator, n: int, gamma: float,
                   rho: Dict[int, float], rho_prime1: float,
                   weights: Optional[np.ndarray]) -> list:
    """One Poisson batch of checks; weights=None means uniform neighbors."""
    checks = []
    for k in sorted(rho):
        m_k = rng.poisson(n * gamma * rho[k] / rho_prime1)
        if m_k == 0:
            continue
        if weights is None:
            draws = rng.integers(0, n, size=m_k * k)
        else:
            draws = rng.choice(n, size=m_k * k, p=weights)
        for block in draws.reshape(m_k, k):
            checks.append(tuple(int(i) for i in block))
    return checks


def sample_poisson(n: int, gamma: float, rho: Dict[int, float],
                   seed: int) -> TannerGraph:
    """Poisson ensemble: Poisson(n*gamma*P_k/P'(1)) checks of each degree k,
    neighbors i.i.d. uniform with replacement."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    law = PolyLaw(rho, 2, "P")
    rng = substream(seed, "poisson")
    checks = _poisson_round(rng, n, gamma, law.coeffs, law.mean, None)
    return TannerGraph(n, tuple(checks))


def sample_multi_poisson(n: int, gamma: float, pair: DegreePair,
                         seed: int) -> TannerGraph:
    """Round-based multi-Poisson construction (Def. of the ensemble).

    Selection weights are proportional to the positive part of the
    remaining-socket counters and are frozen at the start of each round.
    """
    spec = multi_poisson_spec(n, gamma, pair)
    rng0 = substream(seed, "mp-init")
    d = _assign_degrees(rng0, n, pair.lam).astype(np.float64)
    checks = []
    for t in range(spec.t_max):
        rng = substream(seed, "mp-round", t)
        free = np.maximum(d, 0.0)
        total = free.sum()
        if total <= 0:
            raise SocketExhaustion(f"no free sockets at round {t}")
        weights = free / total
        round_checks = _poisson_round(rng, n, gamma, pair.rho,
                                      pair.rho_prime1, weights)
        checks.extend(round_checks)
        if round_checks:
            delta = np.bincount(
                np.concatenate([np.asarray(c) for c in round_checks]),
                minlength=n)
            d -= delta
    return TannerGraph(n, tuple(checks))


def sample_graph(spec: EnsembleSpec, seed: int, retries: int = 0) -> TannerGraph:
    """Sample a graph from the given ensemble spec.

    retries > 0 re-seeds (seed+1, ...) after SocketExhaustion, which has
    vanishing probability at large n but can occur for tiny instances.
    """
    attempt = 0
    while True:
        try:
            if spec.kind == "standard":
                return sample_standard(spec.n, spec.pair, seed + attempt)
            if spec.kind == "poisson":
                return sample_poisson(spec.n, spec.gamma, spec.pair.rho,
                                      seed + attempt)
            return sample_multi_poisson(spec.n, spec.gamma, spec.pair,
                                        seed + attempt)
        except SocketExhaustion:
            attempt += 1
            if attempt > retries:
                raise


# ---------------------------------------------------------------------------
# Asymptotic multi-Poisson degree profile
# ---------------------------------------------------------------------------

def multi_poisson_profile(gamma: float, pair: DegreePair) -> DegreeProfile:
    """Asymptotic variable-degree profile of the multi-Poisson ensemble.

    Iterates the remaining-socket distribution Omega_{l,d} (fraction of
    nodes with initial sockets l and d free sockets left) through t_max
    rounds of Poisson thinning:

        Omega^{t+1}_{l,d} = sum_{d' >= d} Omega^t_{l,d'} W(d'-d | d'),

    with W(.|d') a Poisson kernel of mean gamma*[d']_+ / E[d]_+, started
    from Omega^0_{l,d} = Lambda_l 1{d=l}.  The profile reads off as
    Lambda^(gamma)_l = sum_{l'} Omega^{t_max}_{l',l'-l}: over-selected nodes
    (d < 0) yield final degrees above their socket count, so the support
    extends slightly past l_max.
    """
    spec_tmax = int(math.floor(pair.lambda_prime1 / gamma)) - 1
    if spec_tmax <= 0:
        raise ValueError("multi_poisson requires gamma < Lambda'(1)")
    l_max = pair.l_max
    depth = l_max + int(math.ceil(10.0 * gamma)) + 10  # window below zero
    n_d = depth + l_max + 1  # d in {-depth, ..., l_max}
    offset = depth  # index of d = 0
    ls = sorted(pair.lam)
    omega = np.zeros((len(ls), n_d))
    for i, l in enumerate(ls):
        omega[i, offset + l] = pair.lam[l]

    d_values = np.arange(-depth, l_max + 1, dtype=np.float64)
    pos_part = np.maximum(d_values, 0.0)
    for _ in range(spec_tmax):
        mean_free = float((omega * pos_part).sum())
        new = np.zeros_like(omega)
        # d' <= 0 nodes are never selected; their mass stays put
        new[:, :offset + 1] += omega[:, :offset + 1]
        for j in range(offset + 1, n_d):
            col = omega[:, j]
            if not col.any():
                continue
            lam_d = gamma * d_values[j] / mean_free
            deltas = np.arange(j + 1)  # d' - d for d >= -depth
            logpmf = -lam_d + deltas * math.log(lam_d) - _log_factorials(j + 1)
            pmf = np.exp(logpmf)
            pmf[-1] += max(0.0, 1.0 - pmf.sum())  # fold the leaked tail
            new[:, j::-1] += col[:, None] * pmf[None, :]
        omega = new

    profile: Dict[int, float] = {}
    for i, l_init in enumerate(ls):
        for j in range(n_d):
            mass = omega[i, j]
            if mass <= 0:
                continue
            degree = l_init - int(d_values[j])
            profile[degree] = profile.get(degree, 0.0) + mass
    total = sum(profile.values())
    profile = {d: c / total for d, c in sorted(profile.items()) if c > 0}
    return DegreeProfile(profile, dict(pair.rho))


_LOG_FACT_CACHE = np.zeros(1)  # log(0!) = 0


def _log_factorials(n: int) -> np.ndarray:
    """log(k!) for k = 0..n-1, cached."""
    global _LOG_FACT_CACHE
    if len(_LOG_FACT_CACHE) < n:
        ks = np.arange(len(_LOG_FACT_CACHE), n, dtype=np.float64)
        new = _LOG_FACT_CACHE[-1] + np.cumsum(np.log(ks))
        _LOG_FACT_CACHE = np.concatenate([_LOG_FACT_CACHE, new])
    return _LOG_FACT_CACHE[:n]
