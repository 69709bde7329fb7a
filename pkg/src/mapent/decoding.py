"""Decoding and exact entropy oracles on concrete Tanner graphs.

Everything here operates on sampled graphs: belief propagation with exact
infinity/erasure handling, GF(2)-rank and enumeration oracles for the
conditional entropy, exact bit-MAP error rates, the message form of the
Bethe free energy, and the bound-verification harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .channels import BEC, ChannelModel, LlrPopulation
from .degrees import PolyLaw
from .density import ARCTANH_CLIP, DEState
from .ensembles import EnsembleSpec, TannerGraph, sample_graph
from .errors import BudgetExceeded, InconsistentInfinity
from .gf2 import Gf2Matrix
from .rng import substream
from .stable import (LN2, log1p_signed_exp, log2_half_one_plus_tanh_prod,
                     log_tanh_mag, softplus)

LLR_BIG = 1e5  # stands in for +inf inside dense matmuls (exp(-2*BIG) == 0.0)


def parity_matrix(graph: TannerGraph) -> Gf2Matrix:
    """Adjacency matrix over GF(2); edges of even multiplicity cancel."""
    return Gf2Matrix.from_rows(graph.checks, graph.n_var)


# ---------------------------------------------------------------------------
# Graph indexing and message passing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GraphIndex:
    """Flat directed-edge layout of a Tanner graph (check-major order)."""

    n_var: int
    n_checks: int
    edge_var: np.ndarray   # variable endpoint of each edge slot
    edge_check: np.ndarray
    check_ptr: np.ndarray  # CSR offsets into check-major edge arrays
    var_order: np.ndarray  # edge ids sorted by variable
    var_ptr: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.edge_var)


def build_index(graph: TannerGraph) -> GraphIndex:
    edge_var = np.array([i for c in graph.checks for i in c], dtype=np.int64)
    deg = np.array([len(c) for c in graph.checks], dtype=np.int64)
    edge_check = np.repeat(np.arange(graph.n_checks), deg)
    check_ptr = np.concatenate([[0], np.cumsum(deg)])
    var_order = np.argsort(edge_var, kind="stable")
    var_deg = np.bincount(edge_var, minlength=graph.n_var)
    var_ptr = np.concatenate([[0], np.cumsum(var_deg)])
    return GraphIndex(graph.n_var, graph.n_checks, edge_var, edge_check,
                      check_ptr, var_order, var_ptr)


def _segment_sum(values: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    if len(values) == 0:
        return np.zeros(len(ptr) - 1)
    out = np.add.reduceat(values, ptr[:-1])
    out[ptr[:-1] == ptr[1:]] = 0.0  # empty segments
    return out


@dataclass(frozen=True)
class MessageSet:
    """Per-directed-edge BP messages, aligned to check-major edge ids."""

    u: np.ndarray  # check -> variable
    v: np.ndarray  # variable -> check


@dataclass(frozen=True)
class Observation:
    """Channel observations attached to one graph (LLRs and log2 Q(y|0))."""

    var_llr: np.ndarray
    check_llr: np.ndarray
    var_log2q: np.ndarray
    check_log2q: np.ndarray


def sample_observation(graph: TannerGraph, family: str, channel: ChannelModel,
                       seed: int) -> Observation:
    """Observations conditional on the all-zero codeword.

    LDPC: variables see the channel, checks are pinned to 0 (J = +inf).
    LDGM: checks see the channel, variables carry the fictitious erasure.
    """
    rng = substream(seed, "observation")
    if family == "ldpc":
        llr, logq = channel.sample_observations(rng, graph.n_var)
        return Observation(llr, np.full(graph.n_checks, np.inf),
                           logq, np.zeros(graph.n_checks))
    llr, logq = channel.sample_observations(rng, graph.n_checks)
    return Observation(np.zeros(graph.n_var), llr,
                       np.zeros(graph.n_var), logq)


def _check_pass(idx: GraphIndex, v: np.ndarray, J: np.ndarray) -> np.ndarray:
    """Exclusive check update u_e = arctanh(tanh J prod_{e' != e} tanh v)."""
    zero = v == 0.0
    inf = np.isposinf(v)
    neg = v < 0.0
    lt = np.where(zero, 0.0, log_tanh_mag(v))
    a = idx.edge_check
    sum_lt = _segment_sum(lt, idx.check_ptr)
    cnt_zero = _segment_sum(zero.astype(np.float64), idx.check_ptr)
    cnt_neg = _segment_sum(neg.astype(np.float64), idx.check_ptr)
    cnt_inf = _segment_sum(inf.astype(np.float64), idx.check_ptr)
    deg = np.diff(idx.check_ptr)

    j_zero = J == 0.0
    j_lt = np.where(j_zero, 0.0, log_tanh_mag(J))
    j_neg = J < 0.0
    j_inf = np.isposinf(J)

    zc = cnt_zero[a] + j_zero[a] - zero
    L = sum_lt[a] + j_lt[a] - lt
    s = 1.0 - 2.0 * ((cnt_neg[a] + j_neg[a] - neg) % 2)
    prod = s * np.exp(L)
    u = np.arctanh(np.clip(prod, -1.0 + ARCTANH_CLIP, 1.0 - ARCTANH_CLIP))
    u[zc >= 1] = 0.0
    others_inf = j_inf[a] & ((cnt_inf[a] - inf) == deg[a] - 1)
    u[others_inf] = np.inf
    return u


def _var_pass(idx: GraphIndex, u: np.ndarray, h: np.ndarray,
              clamp: float = 60.0) -> np.ndarray:
    """Exclusive variable update v_e = h_i + sum_{e' != e} u."""
    inf = np.isposinf(u)
    fin = np.where(inf, 0.0, u)
    i = idx.edge_var
    sum_fin = np.zeros(idx.n_var)
    cnt_inf = np.zeros(idx.n_var)
    sum_fin += _segment_sum(fin[idx.var_order], idx.var_ptr)
    cnt_inf += _segment_sum(inf[idx.var_order].astype(np.float64), idx.var_ptr)
    v = h[i] + sum_fin[i] - fin
    v = np.clip(v, -clamp, clamp)
    v[(cnt_inf[i] - inf) >= 1] = np.inf
    v[np.isposinf(h[i])] = np.inf
    return v


def bp_decode(graph: TannerGraph, family: str, obs: Observation, T: int,
              return_messages: bool = False):
    """Flooding BP for T full iterations, messages initialized to 0.

    Returns (marginals, decisions) where decisions are 0/1 hard bits with
    -1 marking ties (erasures).  Marginal for bit i is h_i + sum of all
    incoming check messages.
    """
    idx = build_index(graph)
    v = np.zeros(idx.n_edges)
    u = np.zeros(idx.n_edges)
    for _ in range(T):
        u = _check_pass(idx, v, obs.check_llr)
        v = _var_pass(idx, u, obs.var_llr)
    inf = np.isposinf(u)
    fin = np.where(inf, 0.0, u)
    tot_fin = _segment_sum(fin[idx.var_order], idx.var_ptr)
    tot_inf = _segment_sum(inf[idx.var_order].astype(np.float64), idx.var_ptr)
    marginals = obs.var_llr + tot_fin
    marginals[tot_inf >= 1] = np.inf
    decisions = np.where(marginals > 0, 0, np.where(marginals < 0, 1, -1))
    if return_messages:
        return marginals, decisions.astype(np.int8), MessageSet(u, v)
    return marginals, decisions.astype(np.int8)


# ---------------------------------------------------------------------------
# Exact entropy oracles
# ---------------------------------------------------------------------------

def exact_entropy_bec(graph: TannerGraph, family: str,
                      erased: np.ndarray) -> int:
    """Exact conditional entropy (total bits) on the BEC, via GF(2) rank.

    LDPC: H(X|Y) = n - rank of the parity matrix stacked with indicator
    rows of the unerased variables.  LDGM: H(X|Yhat) = n - rank of the rows
    of the unerased checks.
    """
    erased = np.asarray(erased, dtype=bool)
    H = parity_matrix(graph)
    if family == "ldpc":
        if len(erased) != graph.n_var:
            raise ValueError("erasure pattern must cover the variables")
        known = np.nonzero(~erased)[0]
        pins = Gf2Matrix.from_rows([[int(i)] for i in known], graph.n_var)
        return graph.n_var - H.stack(pins).rank()
    if len(erased) != graph.n_checks:
        raise ValueError("erasure pattern must cover the checks")
    keep = np.nonzero(~erased)[0]
    sub = Gf2Matrix(H.words[keep], graph.n_var)
    return graph.n_var - sub.rank()


@dataclass(frozen=True)
class OracleReport:
    """Exact-oracle output: per-bit conditional entropy and bit-MAP error."""

    entropy: float
    entropy_se: float
    bit_error_rate: float
    ber_se: float
    n_samples: int
    per_graph: Tuple[float, ...] = ()


def _design_bits(graph: TannerGraph, family: str) -> np.ndarray:
    """Rows t of the enumeration: observed bits o = t @ G, error bits b.

    LDPC enumerates the codebook via a null-space basis of the parity
    matrix; LDGM enumerates all information messages.  Returns G such that
    weights use o and, for LDPC, b = o as well.
    """
    H = parity_matrix(graph)
    if family == "ldpc":
        dim = graph.n_var - H.rank()
        if dim > 24:
            raise BudgetExceeded(f"2^{dim} codewords exceed the LDPC budget")
        return H.null_space_basis()  # (dim, n): o = t @ B, b = o
    if graph.n_var > 20:
        raise BudgetExceeded(f"2^{graph.n_var} messages exceed the LDGM budget")
    return H.to_dense().T  # (n, m): o = t @ Hdense^T, b = t


def _finite_llrs(llrs: np.ndarray) -> np.ndarray:
    return np.where(np.isposinf(llrs), LLR_BIG, llrs)


def _enum_scan(graph: TannerGraph, family: str, llrs: np.ndarray
               ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Streaming enumeration over the codebook.

    llrs: (S, n_obs) channel LLRs per output sample.  Returns per-sample
    log2 Z, the (n, S) matrix of P[x_i = 1 | y] numerators (relative scale)
    and the per-sample normalizer on the same scale.
    """
    G = _design_bits(graph, family)
    dim = G.shape[0]
    n = graph.n_var
    S = llrs.shape[0]
    hmat = _finite_llrs(llrs).T  # (n_obs, S)
    M = np.full(S, -np.inf)
    Z = np.zeros(S)
    N1 = np.zeros((n, S))
    total = 1 << dim
    chunk = max(1, min(total, 1 << 14))
    bit_cols = np.arange(dim, dtype=np.uint32)
    for start in range(0, total, chunk):
        ids = np.arange(start, min(start + chunk, total), dtype=np.uint32)
        tbits = ((ids[:, None] >> bit_cols[None, :]) & 1).astype(np.uint8)
        if family == "ldpc":
            obits = (tbits @ G) % 2  # codeword bits, also the error bits
            bbits = obits
        else:
            obits = (tbits @ G) % 2  # observed check bits
            bbits = tbits            # message bits
        logw = -2.0 * (obits @ hmat)  # (chunk, S)
        cmax = logw.max(axis=0)
        grow = cmax > M
        if grow.any():
            scale = np.exp(M[grow] - cmax[grow])
            Z[grow] *= scale
            N1[:, grow] *= scale
            M[grow] = cmax[grow]
        w = np.exp(logw - M[None, :])
        Z += w.sum(axis=0)
        N1 += bbits.T.astype(np.float64) @ w
    log2_zeta = (M + np.log(Z)) / LN2
    return log2_zeta, N1, Z


def exact_entropy_enum(graph: TannerGraph, family: str, channel: ChannelModel,
                       n_y_samples: int, seed: int) -> OracleReport:
    """Exact conditional entropy per bit by codebook enumeration.

    Monte Carlo over channel outputs conditional on the zero codeword; the
    per-output statistic log2 sum_x e^{-2<llr, x>} already includes the
    constant terms of the entropy decomposition, so its mean over outputs
    is H(X|..)/n with no further correction.
    """
    rng = substream(seed, "enum-oracle")
    n_obs = graph.n_var if family == "ldpc" else graph.n_checks
    llrs = np.vstack([channel.sample_llrs(rng, n_obs)
                      for _ in range(n_y_samples)])
    log2z, N1, Z = _enum_scan(graph, family, llrs)
    h = log2z / graph.n_var
    err = _bitmap_errors(N1, Z)
    return OracleReport(float(h.mean()),
                        float(h.std(ddof=1) / math.sqrt(len(h))) if len(h) > 1 else 0.0,
                        float(err.mean()),
                        float(err.std(ddof=1) / math.sqrt(len(err))) if len(err) > 1 else 0.0,
                        n_y_samples)


def _bitmap_errors(N1: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Per-sample bit-MAP error rate against the zero codeword; ties = 1/2."""
    half = 0.5 * Z[None, :]
    wrong = N1 > half * (1 + 1e-12)
    tie = np.abs(N1 - half) <= 1e-12 * half
    return (wrong + 0.5 * tie).mean(axis=0)


def exact_bitmap_error(graph: TannerGraph, family: str, channel: ChannelModel,
                       n_y_samples: int, seed: int) -> float:
    """Exact bit-MAP error rate by enumeration, ties counted one half."""
    rng = substream(seed, "enum-oracle")
    n_obs = graph.n_var if family == "ldpc" else graph.n_checks
    llrs = np.vstack([channel.sample_llrs(rng, n_obs)
                      for _ in range(n_y_samples)])
    _, N1, Z = _enum_scan(graph, family, llrs)
    return float(_bitmap_errors(N1, Z).mean())


# ---------------------------------------------------------------------------
# Bethe free energy
# ---------------------------------------------------------------------------

def bethe_free_energy(graph: TannerGraph, family: str, messages: MessageSet,
                      obs: Observation) -> float:
    """Message form of the Bethe free energy, in bits.

    F_B = sum_edges log2 sum_x P_u P_v
          - sum_vars log2 [ Q_V(y_i|0) (1 + e^{-2(h_i + sum u)}) / prod (1+e^{-2u}) ]
          - sum_checks log2 [ Q_C(yh_a|0) (1/2)(1+e^{-2J})(1 + tanh J prod tanh v) ].
    """
    idx = build_index(graph)
    u, v = np.asarray(messages.u, float), np.asarray(messages.v, float)
    if len(u) != idx.n_edges or len(v) != idx.n_edges:
        raise ValueError("message arrays must have one entry per edge")
    if np.isneginf(u).any() or np.isneginf(v).any():
        raise InconsistentInfinity("-inf message")

    edge_sum = float(log2_half_one_plus_tanh_prod(u, v).sum())

    inf_u = np.isposinf(u)
    fin_u = np.where(inf_u, 0.0, u)
    tot_u = _segment_sum(fin_u[idx.var_order], idx.var_ptr)
    any_inf = _segment_sum(inf_u[idx.var_order].astype(float), idx.var_ptr) >= 1
    s_var = np.where(any_inf | np.isposinf(obs.var_llr), np.inf,
                     obs.var_llr + tot_u)
    sp_u = _segment_sum(softplus(-2.0 * fin_u)[idx.var_order] *
                        (~inf_u[idx.var_order]), idx.var_ptr)
    var_terms = obs.var_log2q + (softplus(-2.0 * s_var) - sp_u) / LN2
    var_sum = float(var_terms.sum())

    zero_v = v == 0.0
    lt = np.where(zero_v, 0.0, log_tanh_mag(v))
    sum_lt = _segment_sum(lt, idx.check_ptr)
    cnt_zero = _segment_sum(zero_v.astype(float), idx.check_ptr)
    cnt_neg = _segment_sum((v < 0).astype(float), idx.check_ptr)
    J = obs.check_llr
    j_zero = J == 0.0
    L = np.where((cnt_zero > 0) | j_zero, -np.inf,
                 sum_lt + np.where(j_zero, 0.0, log_tanh_mag(J)))
    s = 1.0 - 2.0 * ((cnt_neg + (J < 0)) % 2)
    core = log1p_signed_exp(L, s)
    check_terms = obs.check_log2q + (softplus(-2.0 * J) - LN2 + core) / LN2
    check_sum = float(check_terms.sum())

    result = edge_sum - var_sum - check_sum
    if math.isnan(result) or math.isinf(result):
        raise InconsistentInfinity("Bethe term required log of zero")
    return result


def messages_iid(graph: TannerGraph, u_pop: LlrPopulation,
                 v_pop: LlrPopulation, seed: int) -> MessageSet:
    """Messages drawn i.i.d. from the two populations, one pair per edge."""
    idx = build_index(graph)
    rng = substream(seed, "iid-messages")
    return MessageSet(u_pop.draw(rng, idx.n_edges),
                      v_pop.draw(rng, idx.n_edges))


# ---------------------------------------------------------------------------
# Concentration and bound verification harnesses
# ---------------------------------------------------------------------------

def with_n(spec: EnsembleSpec, n: int) -> EnsembleSpec:
    return replace(spec, n=n)


def concentration_probe(spec: EnsembleSpec, channel: BEC,
                        n_list: Sequence[int], graphs_per_n: int, seed: int,
                        patterns_per_graph: int = 12) -> Dict[int, Tuple[float, float]]:
    """Mean and std over graphs of the exact per-bit conditional entropy.

    Per-graph entropy is the rank oracle averaged over erasure patterns;
    concentration shows up as the std shrinking with n.
    """
    if not isinstance(channel, BEC):
        raise ValueError("concentration probe uses the BEC rank oracle")
    out: Dict[int, Tuple[float, float]] = {}
    for n in n_list:
        sub = with_n(spec, n)
        vals = np.empty(graphs_per_n)
        for g in range(graphs_per_n):
            graph = sample_graph(sub, int(substream(seed, "graph", n, g)
                                          .integers(2**63)), retries=10)
            rng = substream(seed, "pattern", n, g)
            tot = 0.0
            for _ in range(patterns_per_graph):
                pattern = rng.random(_pattern_len(graph, sub.family)) < channel.eps
                tot += exact_entropy_bec(graph, sub.family, pattern)
            vals[g] = tot / patterns_per_graph / n
        out[n] = (float(vals.mean()), float(vals.std(ddof=1)))
    return out


def _pattern_len(graph: TannerGraph, family: str) -> int:
    return graph.n_var if family == "ldpc" else graph.n_checks


@dataclass(frozen=True)
class BoundComparison:
    """Oracle mean vs. trial-entropy bound, with the safety margin."""

    oracle: OracleReport
    bound: float
    bound_se: float
    margin: float          # oracle.entropy - bound
    margin_sigma: float    # combined standard error
    violated: bool         # margin < -3 sigma


def verify_bound(spec: EnsembleSpec, channel: ChannelModel, n_graphs: int,
                 n_y_samples: int, seed: int,
                 bound_report: Optional[object] = None) -> BoundComparison:
    """Check the inequality direction: exact mean entropy >= phi_V bound.

    BEC channels use the rank oracle with one fresh erasure pattern per
    graph and the analytic bound; other channels use the enumeration oracle
    (small n) and a Monte Carlo bound evaluated at the DE fixed point
    (pass bound_report to reuse one across calls).
    """
    per_graph: List[float] = []
    ber: List[float] = []
    if isinstance(channel, BEC):
        for g in range(n_graphs):
            graph = sample_graph(spec, int(substream(seed, "vgraph", g)
                                           .integers(2**63)), retries=10)
            rng = substream(seed, "vpattern", g)
            pattern = rng.random(_pattern_len(graph, spec.family)) < channel.eps
            per_graph.append(exact_entropy_bec(graph, spec.family, pattern)
                             / graph.n_var)
        oracle = OracleReport(float(np.mean(per_graph)),
                              float(np.std(per_graph, ddof=1) / math.sqrt(n_graphs)),
                              math.nan, math.nan, n_graphs, tuple(per_graph))
        from .trial_entropy import bec_bound
        laws = (spec.var_law(), spec.check_law())
        bound, bound_se = bec_bound(channel.eps, laws, spec.family), 0.0
    else:
        for g in range(n_graphs):
            graph = sample_graph(spec, int(substream(seed, "vgraph", g)
                                           .integers(2**63)), retries=10)
            rep = exact_entropy_enum(graph, spec.family, channel, n_y_samples,
                                     int(substream(seed, "vy", g).integers(2**63)))
            per_graph.append(rep.entropy)
            ber.append(rep.bit_error_rate)
        oracle = OracleReport(float(np.mean(per_graph)),
                              float(np.std(per_graph, ddof=1) / math.sqrt(n_graphs)),
                              float(np.mean(ber)),
                              float(np.std(ber, ddof=1) / math.sqrt(n_graphs)),
                              n_graphs * n_y_samples, tuple(per_graph))
        if bound_report is None:
            from .trial_entropy import McBoundConfig, phi_bound_mc
            cfg = McBoundConfig(n_pop=20_000, equil_iters=400, max_iters=4000,
                                avg_evals=60, avg_stride=5)
            bound_report = phi_bound_mc(channel, spec, seed, cfg)
        bound, bound_se = bound_report.value, bound_report.std_error
    bound = max(bound, 0.0)  # the infinity-initialized branch gives >= 0
    sigma = math.hypot(oracle.entropy_se, bound_se)
    margin = oracle.entropy - bound
    return BoundComparison(oracle, bound, bound_se, margin, sigma,
                           margin < -3.0 * sigma)
