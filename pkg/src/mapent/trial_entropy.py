"""The trial-entropy functional and the bounds built from it.

For an admissible pair (U, V) — independent symmetric LLR variables with
U distributed as arctanh(tanh J prod tanh V_i) over an edge-perspective
check draw — the trial entropy is the three-term functional

    phi_V = -L'(1) E log2[ sum_x P_u(x) P_v(x) ]
            + E_l E_y E log2[ sum_x (Q_V(y|x)/Q_V(y|0)) prod_i P_{u_i}(x) ]
            + (L'(1)/P'(1)) E_k E_yh E log2[ sum_{x_1..x_k}
                  (Q_C(yh|+x)/Q_C(yh|0)) prod_i P_{v_i}(x_i) ],

with l and k full node-perspective degrees.  Its supremum over admissible
pairs lower-bounds the conditional entropy per bit, and its stationary
points are density-evolution fixed points, so the bound is evaluated at DE
fixed points (Monte Carlo on general channels, closed form on the BEC).

All inner sums are evaluated through closed forms that are O(k) per sample
and stable under saturated LLRs:

    sum_x P_u P_v                  = (1/2)(1 + tanh u tanh v)
    sum_x (Q/Q0) prod P_{u_i}      = (1 + e^{-2(h + sum u)}) / prod (1 + e^{-2u_i})
    sum_{parity} (Q/Q0) prod P_{v} = (1/2)(1 + e^{-2J})(1 + tanh J prod tanh v_i).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .channels import (BEC, ChannelModel, LlrPopulation, binary_entropy_inverse,
                       capacity, sample_llr_population, symmetry_test)
from .degrees import DegreePair, PoissonLaw, PolyLaw
from .density import (BecState, DEState, bec_fixed_point, bec_fixed_points_scan,
                      build_de_system, check_update, de_run, de_step)
from .ensembles import EnsembleSpec
from .errors import NoBadBranch, NonSymmetricInput
from .rng import substream
from .stable import (LN2, log1p_signed_exp, log2_half_one_plus_tanh_prod,
                     log_tanh_mag, softplus)


@dataclass(frozen=True)
class TrialEntropyReport:
    """Monte Carlo estimate of phi_V in bits per variable node."""

    value: float
    std_error: float
    edge_term: float
    var_term: float
    check_term: float
    m_samples: int
    admissible_check: Optional[dict] = None

    def to_json_dict(self) -> dict:
        return {"phi": self.value, "stderr": self.std_error,
                "terms": {"edge": self.edge_term, "var": self.var_term,
                          "check": self.check_term},
                "M": self.m_samples,
                "admissible_check": self.admissible_check or {}}


@dataclass(frozen=True)
class ThresholdResult:
    threshold: float
    bracket: Tuple[float, float]
    method: str  # "analytic_bec" | "mc_bisection"
    probes: Tuple[dict, ...] = ()

    def to_json_dict(self) -> dict:
        return {"threshold": self.threshold,
                "bracket": list(self.bracket), "method": self.method,
                "probes": [dict(p) for p in self.probes]}


def _resolve_laws(pair_or_laws) -> Tuple[object, PolyLaw]:
    if isinstance(pair_or_laws, DegreePair):
        return pair_or_laws.var_law, pair_or_laws.check_law
    if isinstance(pair_or_laws, EnsembleSpec):
        return pair_or_laws.var_law(), pair_or_laws.check_law()
    var_law, check_law = pair_or_laws
    return var_law, check_law


def _sum_bucketed(rng, arrays: Sequence[np.ndarray], counts: np.ndarray
                  ) -> List[np.ndarray]:
    """Row sums of counts[i] shared draws, gathered from each array.

    All arrays are aligned views of one population (e.g. the values and a
    precomputed transform); each row's draws use the same indices in every
    array, so coupled statistics stay coupled.
    """
    outs = [np.zeros(len(counts)) for _ in arrays]
    size = len(arrays[0])
    for c in np.unique(counts):
        if c == 0:
            continue
        rows = np.nonzero(counts == c)[0]
        idx = rng.integers(0, size, size=(len(rows), int(c)))
        for acc, arr in zip(outs, arrays):
            acc[rows] = arr[idx].sum(axis=1)
    return outs


def phi_v_mc(v_pop: LlrPopulation, pair_or_laws, channel: ChannelModel,
             family: str, m_samples: int, seed: int,
             blocks: int = 100) -> TrialEntropyReport:
    """Monte Carlo trial entropy at the admissible pair generated by v_pop.

    The U density is rebuilt from v_pop by one check update before
    evaluation, so the estimate is always taken at an admissible pair.
    Returns the value with a jackknife standard error over `blocks` blocks.
    """
    if m_samples < 1000:
        raise ValueError("phi_v_mc needs at least 1e3 samples")
    sym = symmetry_test(v_pop, 4)
    if sym.max_sigma() > 6.0:
        raise NonSymmetricInput(
            f"v population fails symmetry identities at {sym.max_sigma():.1f} sigma")
    var_law, check_law = _resolve_laws(pair_or_laws)
    m = (m_samples // blocks) * blocks

    rng = substream(seed, "phi")
    if family == "ldpc":
        j_pop = LlrPopulation.all_infinity(1)
        h_draw = lambda size: channel.sample_llrs(rng, size)
    elif family == "ldgm":
        j_pop = LlrPopulation(channel.sample_llrs(rng, m), source="j")
        h_draw = lambda size: np.zeros(size)
    else:
        raise ValueError(f"unknown family {family!r}")
    u_pop = check_update(j_pop, v_pop, check_law, m, rng)

    # edge term samples: log2 sum_x P_u P_v
    edge_samples = log2_half_one_plus_tanh_prod(u_pop.draw(rng, m),
                                                v_pop.draw(rng, m))

    # variable term samples over full node degree l
    l_counts = var_law.sample_full(rng, m)
    h = h_draw(m)
    u_vals = u_pop.values
    u_sum, sp_sum = _sum_bucketed(rng, (u_vals, softplus(-2.0 * u_vals)),
                                  l_counts)
    var_samples = (softplus(-2.0 * (h + u_sum)) - sp_sum) / LN2

    # check term samples over full node degree k
    k_counts = check_law.sample_full(rng, m)
    j = j_pop.draw(rng, m)
    v_vals = v_pop.values
    lt_sum, neg_sum = _sum_bucketed(
        rng, (log_tanh_mag(v_vals), (v_vals < 0).astype(np.float64)), k_counts)
    log_mag = lt_sum + log_tanh_mag(j)
    sign = 1.0 - 2.0 * ((neg_sum + (j < 0)) % 2)
    check_samples = (softplus(-2.0 * j) - LN2
                     + log1p_signed_exp(log_mag, sign)) / LN2

    c_edge = -var_law.mean
    c_check = var_law.mean / check_law.mean
    value = (c_edge * edge_samples.mean() + var_samples.mean()
             + c_check * check_samples.mean())

    # jackknife over equal blocks of the three independent sample streams
    be = edge_samples.reshape(blocks, -1).mean(axis=1)
    bv = var_samples.reshape(blocks, -1).mean(axis=1)
    bc = check_samples.reshape(blocks, -1).mean(axis=1)
    theta = c_edge * be + bv + c_check * bc  # leave-one-out is affine in these
    loo = (theta.sum() - theta) / (blocks - 1)
    se = math.sqrt((blocks - 1) / blocks * ((loo - loo.mean()) ** 2).sum())

    return TrialEntropyReport(
        value=float(value), std_error=float(se),
        edge_term=float(c_edge * edge_samples.mean()),
        var_term=float(var_samples.mean()),
        check_term=float(c_check * check_samples.mean()),
        m_samples=m,
        admissible_check={"max_sigma": sym.max_sigma(),
                          "n": sym.n_samples})


# ---------------------------------------------------------------------------
# BEC closed forms
# ---------------------------------------------------------------------------

def bec_trial_entropy(z: float, eps: float, pair_or_laws,
                      family: str = "ldpc") -> float:
    """Closed-form trial entropy of the erasure mixture with V-erasure z.

    LDPC: phi(z, zh) = L'(1) z (1 - zh) - (L'(1)/P'(1)) [1 - P(1-z)]
                       + eps * Lambda(zh)           with zh = 1 - rho(1-z);
    LDGM uses zh = 1 - (1-eps) rho(1-z) and the (1-eps)-weighted check term
    with the channel factor moved onto Lambda(zh).
    """
    var_law, check_law = _resolve_laws(pair_or_laws)
    l1 = var_law.mean
    if family == "ldpc":
        zh = 1.0 - check_law.edge_gf(1.0 - z)
        return (l1 * z * (1.0 - zh)
                - l1 / check_law.mean * (1.0 - check_law.gf(1.0 - z))
                + eps * var_law.gf(zh))
    if family == "ldgm":
        zh = 1.0 - (1.0 - eps) * check_law.edge_gf(1.0 - z)
        return (l1 * z * (1.0 - zh)
                - l1 * (1.0 - eps) / check_law.mean * (1.0 - check_law.gf(1.0 - z))
                + var_law.gf(zh))
    raise ValueError(f"unknown family {family!r}")


def bec_stationary_points(eps: float, pair_or_laws, family: str = "ldpc"
                          ) -> List[Tuple[float, float, bool]]:
    """Stationary points of psi(z): (z, psi(z), stable) sorted by z.

    Solutions of the fixed-point equation z = f(z) on [0, 1]; stability is
    |f'(z)| < 1 from a numerical derivative.
    """
    pts = bec_fixed_points_scan(eps, _resolve_laws(pair_or_laws), family)
    out = [(z, bec_trial_entropy(z, eps, pair_or_laws, family), abs(fp) < 1.0)
           for z, fp in pts]
    zs = [z for z, _, _ in out]
    if family == "ldpc" and not any(abs(z) < 1e-12 for z in zs):
        out.insert(0, (0.0, bec_trial_entropy(0.0, eps, pair_or_laws, family),
                       True))
    if family == "ldgm" and not any(abs(z - 1.0) < 1e-12 for z in zs):
        out.append((1.0, bec_trial_entropy(1.0, eps, pair_or_laws, family),
                    True))
    return out


def bec_bound(eps: float, pair_or_laws, family: str = "ldpc") -> float:
    """sup_z psi(z): the analytic entropy lower bound at erasure level eps."""
    pts = bec_stationary_points(eps, pair_or_laws, family)
    candidates = [psi for _, psi, _ in pts]
    candidates.append(bec_trial_entropy(1.0, eps, pair_or_laws, family))
    candidates.append(bec_trial_entropy(0.0, eps, pair_or_laws, family))
    return max(candidates)


def _bisect(pred: Callable[[float], bool], lo: float, hi: float,
            tol: float, probes: Optional[list] = None) -> Tuple[float, float]:
    """Assumes pred(lo) is False and pred(hi) is True; returns the bracket."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ok = pred(mid)
        if probes is not None:
            probes.append({"noise": mid, "positive": bool(ok)})
        if ok:
            hi = mid
        else:
            lo = mid
    return lo, hi


class _LdpcBecAnalytic:
    """High-accuracy LDPC BEC bad-branch location and psi evaluation.

    Two regimes.  Moderate z: generating-function evaluation (grid scan
    plus bisection for roots), which is well conditioned everywhere on
    [0, 1].  Tiny z (a bad branch detaching continuously from 0 when the
    minimum variable degree is 2): truncated small-z Taylor series of
    f(z) - z and psi(z), assembled by exact series composition, which
    resolves the (eps - eps_BP)^3 scale of psi(z_bad) that the direct
    formula loses to cancellation.
    """

    SMALL = 2.5e-4   # series window for root location
    PSI_SMALL = 5e-3  # series window for psi evaluation
    ORDER = 18

    def __init__(self, pair_or_laws):
        self.laws = _resolve_laws(pair_or_laws)
        var_law, check_law = self.laws
        if not isinstance(var_law, PolyLaw):
            raise TypeError("series path needs a polynomial variable law")
        n = self.ORDER + 1
        zh = -self._series_compose_1mz(check_law.edge_perspective(), n)
        zh[0] += 1.0
        p_1mz = self._series_compose_1mz(check_law.coeffs, n)
        l1, p1 = var_law.mean, check_law.mean
        one = np.zeros(n)
        one[0] = 1.0
        zw = self._mul(np.eye(n)[1], one - zh, n)  # z * (1 - zh)
        self.a_series = l1 * zw - (l1 / p1) * (one - p_1mz)
        self.b_series = self._compose(var_law.coeffs, zh, n)       # Lambda(zh)
        self.c_series = self._compose(var_law.edge_perspective(), zh, n)

    @staticmethod
    def _mul(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
        return np.convolve(a, b)[:n]

    def _compose(self, outer: Dict[int, float], inner: np.ndarray,
                 n: int) -> np.ndarray:
        """Truncated series of sum_d c_d * inner(z)^d."""
        out = np.zeros(n)
        max_d = max(outer)
        power = np.zeros(n)
        power[0] = 1.0
        for d in range(max_d + 1):
            c = outer.get(d, 0.0)
            if c:
                out += c * power
            if d < max_d:
                power = self._mul(power, inner, n)
        return out

    def _series_compose_1mz(self, coeffs: Dict[int, float], n: int) -> np.ndarray:
        """Truncated series of sum_d c_d (1-z)^d."""
        return self._compose(coeffs, np.array([1.0, -1.0]), n)

    # -- direct (generating function) forms --------------------------------
    def _f(self, z, eps: float):
        var_law, check_law = self.laws
        return eps * var_law.edge_gf(1.0 - check_law.edge_gf(1.0 - z))

    def psi(self, z: float, eps: float) -> float:
        if z < self.PSI_SMALL:
            zp = z ** np.arange(len(self.a_series))
            return float(self.a_series @ zp + eps * (self.b_series @ zp))
        return bec_trial_entropy(z, eps, self.laws, "ldpc")

    def bad_branch(self, eps: float) -> Optional[float]:
        """Largest fixed point of z = eps*lambda(1 - rho(1-z)) in (0, 1]."""
        from numpy.polynomial import polynomial as npoly
        roots: List[float] = []
        # series roots near the origin
        g_small = eps * self.c_series.copy()
        g_small[1] -= 1.0
        for r in npoly.polyroots(g_small):
            if abs(r.imag) < 1e-9 and 1e-12 < r.real <= self.SMALL:
                roots.append(float(r.real))
        # grid scan + bisection at moderate z
        grid = np.linspace(self.SMALL, 1.0, 5001)
        g = self._f(grid, eps) - grid
        if abs(g[-1]) < 1e-14:
            roots.append(1.0)
        sign = np.sign(g)
        for j in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
            lo, hi = float(grid[j]), float(grid[j + 1])
            glo = g[j]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                gm = self._f(mid, eps) - mid
                if gm == 0.0:
                    lo = hi = mid
                    break
                if (gm > 0) == (glo > 0):
                    lo, glo = mid, gm
                else:
                    hi = mid
            roots.append(0.5 * (lo + hi))
        return max(roots) if roots else None


def bec_map_threshold(pair_or_laws, family: str = "ldpc",
                      tol: float = 1e-8) -> ThresholdResult:
    """MAP threshold on the BEC from the analytic trial entropy.

    LDPC: the erasure level where psi at the bad branch (DE fixed point
    reached from z = 1) crosses zero.  LDGM: where the good branch stops
    dominating the noise-independent z = 1 branch.
    """
    probes: List[dict] = []
    if family == "ldpc":
        var_law, _ = _resolve_laws(pair_or_laws)
        if isinstance(var_law, PolyLaw):
            polys = _LdpcBecAnalytic(pair_or_laws)

            def positive(eps: float) -> bool:
                z_bad = polys.bad_branch(eps)
                if z_bad is None:
                    return False
                cutoff = 1e-18 if z_bad < polys.PSI_SMALL else 1e-12
                return polys.psi(z_bad, eps) > cutoff
        else:
            # Poisson variable law: iterate to the bad branch directly
            def positive(eps: float) -> bool:
                fp = bec_fixed_point(eps, _resolve_laws(pair_or_laws), "ldpc",
                                     z0=1.0)
                if fp.z < 1e-9:
                    return False
                return bec_trial_entropy(fp.z, eps, pair_or_laws, "ldpc") > 1e-12

        if not positive(1.0):
            raise NoBadBranch("trial entropy never positive on the bad branch")
        lo, hi = _bisect(positive, 0.0, 1.0, tol, probes)
        return ThresholdResult(0.5 * (lo + hi), (lo, hi), "analytic_bec",
                               tuple(probes))
    if family != "ldgm":
        raise ValueError(f"unknown family {family!r}")

    def good_dominates(eps: float) -> bool:
        pts = bec_stationary_points(eps, pair_or_laws, "ldgm")
        stable = [(z, psi) for z, psi, ok in pts if ok and z < 1.0 - 1e-7]
        if not stable:
            return False
        z_good, psi_good = min(stable)
        psi_unit = bec_trial_entropy(1.0, eps, pair_or_laws, "ldgm")
        return psi_good >= psi_unit

    if not good_dominates(0.0):
        raise NoBadBranch("no dominating good branch at any erasure level")
    lo, hi = _bisect(lambda e: not good_dominates(e), 0.0, 1.0, tol, probes)
    return ThresholdResult(0.5 * (lo + hi), (lo, hi), "analytic_bec",
                           tuple(probes))


# ---------------------------------------------------------------------------
# Monte Carlo bound and threshold on general channels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class McBoundConfig:
    """Budgets for one Monte Carlo bound evaluation."""

    n_pop: int = 100_000
    equil_iters: int = 1500
    max_iters: int = 20_000
    avg_evals: int = 200
    avg_stride: int = 5
    m_samples: Optional[int] = None  # defaults to n_pop


def phi_bound_mc(channel: ChannelModel, spec: EnsembleSpec, seed: int,
                 config: McBoundConfig = McBoundConfig(),
                 init: str = "zero") -> TrialEntropyReport:
    """Trial entropy at the DE fixed point reached from `init`.

    Equilibrates density evolution, then averages phi_V over avg_evals
    evaluations spaced avg_stride iterations apart (fresh Monte Carlo
    samples each time); the standard error is jackknifed over blocks of
    evaluations, so it includes the slow population fluctuations.
    """
    n = config.n_pop
    system = build_de_system(channel, spec, n, seed)
    state = de_run(system, config.max_iters, n, init, seed,
                   early_stop=True, min_iterations=config.equil_iters)
    rng = substream(seed, "avg-chain")
    m = config.m_samples or n
    laws = (system.var_law, system.check_law)
    block = 20
    values: List[float] = []
    terms: List[Tuple[float, float, float]] = []
    n_blocks_max = max(1, config.avg_evals // block)
    block_means: List[float] = []
    for b in range(n_blocks_max):
        for _ in range(block):
            for _ in range(config.avg_stride):
                state = de_step(system, state, n, rng, refresh_u=False)
            sub = int(rng.integers(2**63))
            rep = phi_v_mc(state.v_pop, laws, channel, spec.family, m, sub,
                           blocks=20)
            values.append(rep.value)
            terms.append((rep.edge_term, rep.var_term, rep.check_term))
        block_means.append(float(np.mean(values[-block:])))
        # early decision once the sign is settled far beyond noise
        if b >= 2:
            mean = float(np.mean(block_means))
            se = float(np.std(block_means, ddof=1) / math.sqrt(len(block_means)))
            if abs(mean) > 8.0 * max(se, 1e-12):
                break
    bm = np.asarray(block_means)
    mean = float(bm.mean())
    if len(bm) > 1:
        loo = (bm.sum() - bm) / (len(bm) - 1)
        se = math.sqrt((len(bm) - 1) / len(bm)
                       * float(((loo - loo.mean()) ** 2).sum()))
    else:
        se = float(np.std(values, ddof=1) / math.sqrt(len(values)))
    mean_terms = np.mean(terms, axis=0)
    return TrialEntropyReport(mean, float(se),
                              float(mean_terms[0]), float(mean_terms[1]),
                              float(mean_terms[2]), m * len(values))


def map_bound_general(channel_factory: Callable[[float], ChannelModel],
                      spec: EnsembleSpec, bracket: Tuple[float, float],
                      seed: int, tol: float = 5e-4,
                      config: McBoundConfig = McBoundConfig(),
                      on_probe: Optional[Callable[[dict], None]] = None,
                      probe_cache: Optional[dict] = None) -> ThresholdResult:
    """Smallest noise level at which the reported trial entropy is positive.

    For each probe noise value runs 0-initialized density evolution and
    evaluates phi_V; "positive" means the estimate exceeds 3 of its
    standard errors.  Bisects the monotone channel family to tol.
    probe_cache maps already-computed noise values to their records, so an
    interrupted bisection can resume from checkpointed probes.
    """
    probes: List[dict] = []

    def probe(noise: float) -> bool:
        if probe_cache and noise in probe_cache:
            record = dict(probe_cache[noise])
            probes.append(record)
            return record["positive"]
        idx = len(probes)
        sub = int(substream(seed, "probe", idx).integers(2**63))
        rep = phi_bound_mc(channel_factory(noise), spec, sub, config)
        record = {"noise": noise, "phi": rep.value, "stderr": rep.std_error,
                  "positive": bool(rep.value > 3.0 * rep.std_error)}
        probes.append(record)
        if on_probe is not None:
            on_probe(record)
        return record["positive"]

    lo, hi = bracket
    if probe(lo):
        raise ValueError(f"bracket too high: phi already positive at {lo}")
    if not probe(hi):
        raise ValueError(f"bracket too low: phi not positive at {hi}")
    lo, hi = _bisect(probe, lo, hi, tol)
    return ThresholdResult(0.5 * (lo + hi), (lo, hi), "mc_bisection",
                           tuple(probes))


# ---------------------------------------------------------------------------
# Specializations
# ---------------------------------------------------------------------------

def simple_ansatz_bound(pair_or_laws, channel: ChannelModel
                        ) -> Callable[[float], float]:
    """Two-point-mass bound for LDPC on a general BIOS channel.

    Substitutes 1 - C(Q) for the erasure probability in the BEC trial
    entropy; returns psi-tilde as a function of z.
    """
    eps_eff = 1.0 - capacity(channel)
    return lambda z: bec_trial_entropy(z, eps_eff, pair_or_laws, "ldpc")


def fano_bounds(h_bound: float, rate: float) -> Tuple[float, float]:
    """(bit-error lower bound, block-error coefficient) from an entropy bound.

    P_b >= h2^{-1}(h_bound) and, asymptotically in n, P_B >= h_bound/rate.
    """
    if not 0.0 <= h_bound <= 1.0:
        raise ValueError("entropy bound must be in [0, 1] bits")
    if rate <= 0:
        raise ValueError("rate must be positive")
    return binary_entropy_inverse(h_bound), h_bound / rate


def conjectured_pb(state: Union[DEState, BecState], channel: ChannelModel,
                   pair_or_laws, family: str = "ldpc",
                   m_samples: int = 200_000, seed: int = 0) -> float:
    """Conjectured MAP bit error rate at a DE fixed point.

    Forms the full a-posteriori LLR density h + sum_{i<=l} U_i with l the
    full node degree and returns P[<0] + (1/2) P[=0].  On the BEC this
    reduces to (1/2) eps Lambda(z_hat).
    """
    var_law, _ = _resolve_laws(pair_or_laws)
    if isinstance(state, BecState):
        if not isinstance(channel, BEC):
            raise ValueError("BecState input requires a BEC channel")
        if family == "ldgm":
            return 0.5 * var_law.gf(state.z_hat)
        return 0.5 * channel.eps * var_law.gf(state.z_hat)
    rng = substream(seed, "pb")
    l_counts = var_law.sample_full(rng, m_samples)
    if family == "ldpc":
        total = channel.sample_llrs(rng, m_samples)
    else:
        total = np.zeros(m_samples)
    for c in np.unique(l_counts):
        if c == 0:
            continue
        rows = np.nonzero(l_counts == c)[0]
        draws = state.u_pop.values[
            rng.integers(0, len(state.u_pop.values), size=(len(rows), int(c)))]
        total[rows] = total[rows] + draws.sum(axis=1)
    return float(np.mean(total < 0) + 0.5 * np.mean(total == 0))
