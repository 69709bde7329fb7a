"""Sampled (Monte Carlo) density evolution and exact BEC scalar recursions.

Message densities are carried as LLR populations.  One full iteration plays
the check-node update (arctanh of a tanh product over a residual-degree
draw) and then the variable-node update (channel LLR plus a residual-degree
sum).  Infinity is propagated exactly: a check output is +inf only when the
check observation and every incoming message are +inf, a variable output is
+inf as soon as any contribution is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .channels import ChannelModel, LlrPopulation, tanh_moments
from .degrees import DegreePair, PoissonLaw, PolyLaw
from .ensembles import EnsembleSpec
from .rng import substream

ARCTANH_CLIP = 1e-15  # finite-path arctanh argument clamped to +-(1 - this)


def _as_rng(seed_or_rng, label: str) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return substream(seed_or_rng, label)


def _check_update_values(j_values: np.ndarray, v_values: np.ndarray,
                         check_law: PolyLaw, n: int,
                         rng: np.random.Generator) -> np.ndarray:
    counts = check_law.sample_residual(rng, n)
    j = j_values[rng.integers(0, len(j_values), size=n)]
    prod = np.tanh(j)
    all_inf = np.isposinf(j)
    tv = np.tanh(v_values)          # tanh(+inf) = 1 exactly
    vinf = np.isposinf(v_values)
    track_inf = bool(vinf.any()) and bool(all_inf.any())
    if not track_inf:
        all_inf = np.zeros(n, dtype=bool)
    for c in np.unique(counts):
        if c == 0:
            continue
        rows = np.nonzero(counts == c)[0]
        idx = rng.integers(0, len(v_values), size=(len(rows), int(c)))
        prod[rows] *= np.prod(tv[idx], axis=1)
        if track_inf:
            all_inf[rows] &= vinf[idx].all(axis=1)
    u = np.arctanh(np.clip(prod, -1.0 + ARCTANH_CLIP, 1.0 - ARCTANH_CLIP))
    if track_inf:
        u[all_inf] = np.inf
    return u


def _variable_update_values(h_values: np.ndarray, u_values: np.ndarray,
                            var_law, n: int,
                            rng: np.random.Generator) -> np.ndarray:
    counts = var_law.sample_residual(rng, n)
    total = h_values[rng.integers(0, len(h_values), size=n)]
    for c in np.unique(counts):
        if c == 0:
            continue
        rows = np.nonzero(counts == c)[0]
        idx = rng.integers(0, len(u_values), size=(len(rows), int(c)))
        total[rows] = total[rows] + u_values[idx].sum(axis=1)
    finite = np.isfinite(total)
    total[finite] = np.clip(total[finite], -60.0, 60.0)
    return total


def check_update(j_pop: LlrPopulation, v_pop: LlrPopulation, check_law: PolyLaw,
                 n: int, seed_or_rng) -> LlrPopulation:
    """Population of arctanh(tanh J * prod_{i<k} tanh V_i), k ~ edge law.

    The residual degree k-1 is drawn from the edge-perspective check law;
    the result is +inf exactly when J and every drawn V are +inf, and 0
    exactly when any drawn V is 0.
    """
    rng = _as_rng(seed_or_rng, "check-update")
    u = _check_update_values(j_pop.values, v_pop.values, check_law, n, rng)
    return LlrPopulation(u, source="de-u")


def variable_update(h_pop: LlrPopulation, u_pop: LlrPopulation, var_law,
                    n: int, seed_or_rng) -> LlrPopulation:
    """Population of h + sum of residual-degree draws from the U density.

    var_law.sample_residual supplies the summand count: l-1 with l from the
    edge perspective for standard/multi-Poisson ensembles, the full Poisson
    count for Poisson ensembles.  +inf absorbs.
    """
    rng = _as_rng(seed_or_rng, "var-update")
    v = _variable_update_values(h_pop.values, u_pop.values, var_law, n, rng)
    return LlrPopulation(v, source="de-v")


@dataclass(frozen=True)
class DEState:
    """Admissible pair of message populations after some DE iterations."""

    u_pop: LlrPopulation
    v_pop: LlrPopulation
    iteration: int


InitMode = Union[str, LlrPopulation]  # "zero" | "infinity" | custom population


@dataclass(frozen=True)
class DESystem:
    """Sampling laws of one (channel, ensemble) DE instance."""

    var_law: object
    check_law: PolyLaw
    h_pop: LlrPopulation
    j_pop: LlrPopulation
    family: str


def build_de_system(channel: ChannelModel, spec: EnsembleSpec, n: int,
                    seed: int) -> DESystem:
    """Fix the channel-side populations and degree laws for a DE run.

    For LDPC the check observations are pinned to 0 (J = +inf) and variable
    nodes see the channel; for LDGM the roles are swapped (h = 0).
    """
    from .channels import sample_llr_population
    if spec.family == "ldpc":
        h_pop = sample_llr_population(channel, n, seed)
        j_pop = LlrPopulation.all_infinity(1)
    else:
        h_pop = LlrPopulation.all_zero(1)
        j_pop = sample_llr_population(channel, n, seed)
    return DESystem(spec.var_law(), spec.check_law(), h_pop, j_pop, spec.family)


def _initial_v(init: InitMode, n: int) -> LlrPopulation:
    if isinstance(init, LlrPopulation):
        from .channels import symmetry_test
        if not symmetry_test(init).passed:
            raise ValueError("custom initialization fails the symmetry test")
        return init
    if init == "zero":
        return LlrPopulation.all_zero(n)
    if init == "infinity":
        return LlrPopulation.all_infinity(n)
    raise ValueError(f"unknown init mode {init!r}")


def de_iterate(channel: ChannelModel, spec: EnsembleSpec, T: int, n: int,
               init: InitMode, seed: int, early_stop: bool = False,
               min_iterations: int = 200) -> DEState:
    """Run T full DE iterations from the chosen initialization.

    The returned u population is refreshed from the final v population so
    that (U, V) is admissible.  With early_stop the run ends once the
    k <= 4 tanh-moment vector stops moving between 100-iteration blocks
    (threshold adapted to the Monte Carlo noise floor).
    """
    system = build_de_system(channel, spec, n, seed)
    state = de_run(system, T, n, init, seed, early_stop=early_stop,
                   min_iterations=min_iterations)
    return state


def _moment_vector(values: np.ndarray, k_max: int = 4) -> np.ndarray:
    t2 = np.tanh(values) ** 2
    out = np.empty(k_max)
    acc = t2.copy()
    for k in range(k_max):
        out[k] = acc.mean()
        if k + 1 < k_max:
            acc *= t2
    return out


def de_run(system: DESystem, T: int, n: int, init: InitMode, seed: int,
           early_stop: bool = False, min_iterations: int = 200) -> DEState:
    v = _initial_v(init, n).values.copy()
    rng = substream(seed, "de-chain")
    snap_stride, block = 10, 10
    window: List[np.ndarray] = []
    prev_block: Optional[np.ndarray] = None
    t = 0
    for t in range(1, T + 1):
        u = _check_update_values(system.j_pop.values, v, system.check_law, n, rng)
        v = _variable_update_values(system.h_pop.values, u, system.var_law, n, rng)
        if early_stop and t % snap_stride == 0:
            window.append(_moment_vector(v))
            if len(window) == block:
                cur = np.mean(window, axis=0)
                noise = np.std(window, axis=0) / math.sqrt(block)
                window = []
                if prev_block is not None and t >= min_iterations:
                    move = np.abs(cur - prev_block)
                    if np.all(move < np.maximum(1e-4, 4.0 * noise)):
                        prev_block = cur
                        break
                prev_block = cur
    u = _check_update_values(system.j_pop.values, v, system.check_law, n, rng)
    return DEState(LlrPopulation(u, "de-u"), LlrPopulation(v, "de-v"), t)


def de_step(system: DESystem, state: DEState, n: int, rng: np.random.Generator,
            refresh_u: bool = True) -> DEState:
    """One additional full iteration of an existing run.

    With refresh_u the returned pair is admissible (u recomputed from the
    new v); callers that rebuild u themselves can skip the extra update.
    """
    u = _check_update_values(system.j_pop.values, state.v_pop.values,
                             system.check_law, n, rng)
    v = _variable_update_values(system.h_pop.values, u, system.var_law, n, rng)
    if refresh_u:
        u = _check_update_values(system.j_pop.values, v, system.check_law, n, rng)
    return DEState(LlrPopulation(u, "de-u"), LlrPopulation(v, "de-v"),
                   state.iteration + 1)


# ---------------------------------------------------------------------------
# Exact BEC recursions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BecState:
    """Erasure probabilities of the V (z) and U (z_hat) densities."""

    z: float
    z_hat: float

    def __post_init__(self):
        if not (-1e-12 <= self.z <= 1 + 1e-12 and -1e-12 <= self.z_hat <= 1 + 1e-12):
            raise ValueError("erasure probabilities must lie in [0, 1]")


def _bec_maps(var_law, check_law, family: str, eps: float
              ) -> Tuple[Callable, Callable]:
    """(z -> z_hat, z_hat -> z') scalar maps for the chosen family."""
    if family == "ldpc":
        zh = lambda z: 1.0 - check_law.edge_gf(1.0 - z)
        step = lambda zh_: eps * var_law.edge_gf(zh_)
    elif family == "ldgm":
        zh = lambda z: 1.0 - (1.0 - eps) * check_law.edge_gf(1.0 - z)
        step = lambda zh_: var_law.edge_gf(zh_)
    else:
        raise ValueError(f"unknown family {family!r}")
    return zh, step


def _laws(pair_or_law) -> Tuple[object, PolyLaw]:
    if isinstance(pair_or_law, DegreePair):
        return pair_or_law.var_law, pair_or_law.check_law
    var_law, check_law = pair_or_law
    return var_law, check_law


def bec_de_step(state: BecState, eps: float, pair: Union[DegreePair, tuple],
                family: str = "ldpc") -> BecState:
    """One scalar DE step: z' = eps*lambda(z_hat) (LDPC) or lambda(z_hat) (LDGM)."""
    var_law, check_law = _laws(pair)
    zh_of, step_of = _bec_maps(var_law, check_law, family, eps)
    zh = zh_of(state.z)
    return BecState(step_of(zh), zh)


def bec_fixed_point(eps: float, pair, family: str = "ldpc", z0: float = 1.0,
                    tol: float = 1e-13, max_iter: int = 100_000) -> BecState:
    """Iterate the scalar recursion to a fixed point from z0."""
    state = BecState(z0, 0.0)
    for _ in range(max_iter):
        nxt = bec_de_step(state, eps, pair, family)
        if abs(nxt.z - state.z) < tol:
            return nxt
        state = nxt
    return state


def bec_trajectory(eps: float, pair, family: str, T: int,
                   z0: float = 1.0) -> np.ndarray:
    """z_0 .. z_T of the scalar recursion started at z0."""
    out = np.empty(T + 1)
    out[0] = z0
    state = BecState(z0, 0.0)
    for t in range(1, T + 1):
        state = bec_de_step(state, eps, pair, family)
        out[t] = state.z
    return out


def _refine_min(fun: Callable[[float], float], lo: float, hi: float,
                tol: float = 1e-12) -> Tuple[float, float]:
    """Golden-section minimum of a unimodal-on-[lo,hi] scalar function."""
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


def bec_bp_threshold(pair, family: str = "ldpc") -> float:
    """BP threshold on the BEC.

    LDPC: the supremum of eps with eps*lambda(1-rho(1-z)) < z on (0,1],
    computed as inf_z z/lambda(1-rho(1-z)) (grid scan plus golden-section
    refinement; equals the iterated-DE bisection threshold but is accurate
    for transcritical ensembles such as (2,4) too).
    LDGM: the appearance point of a stable non-unit fixed point, located by
    bisection on eps with a refined scan of f(z)-z.
    """
    var_law, check_law = _laws(pair)
    if family == "ldpc":
        grid = np.linspace(1e-9, 1.0, 100_001)
        zh = 1.0 - check_law.edge_gf(1.0 - grid)
        lam = var_law.edge_gf(zh)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(lam > 0, grid / np.where(lam > 0, lam, 1.0), np.inf)
        j = int(np.argmin(ratio))
        lo = grid[max(j - 1, 0)]
        hi = grid[min(j + 1, len(grid) - 1)]
        fun = lambda z: (z / var_law.edge_gf(1.0 - check_law.edge_gf(1.0 - z))
                         if var_law.edge_gf(1.0 - check_law.edge_gf(1.0 - z)) > 0
                         else math.inf)
        _, val = _refine_min(fun, lo, hi)
        return min(float(val), float(ratio[j]), 1.0)
    if family != "ldgm":
        raise ValueError(f"unknown family {family!r}")

    def has_nonunit_fp(eps: float) -> bool:
        zh_of, step_of = _bec_maps(var_law, check_law, "ldgm", eps)
        grid = np.linspace(0.0, 1.0 - 1e-4, 10_001)
        g = step_of(zh_of(grid)) - grid
        j = int(np.argmin(g))
        if g[j] <= 0:
            return True
        lo = grid[max(j - 1, 0)]
        hi = grid[min(j + 1, len(grid) - 1)]
        fun = lambda z: step_of(zh_of(z)) - z
        _, val = _refine_min(fun, lo, hi)
        return val <= 0

    lo, hi = 0.0, 1.0  # fixed point exists at lo, not at hi
    if not has_nonunit_fp(0.0):
        from .errors import NoBadBranch
        raise NoBadBranch("no non-unit fixed point at any erasure level")
    while hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        if has_nonunit_fp(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bec_fixed_points_scan(eps: float, pair, family: str = "ldpc",
                          grid_step: float = 1e-5) -> List[Tuple[float, float]]:
    """All solutions of z = f(z) on [0, 1] with their map derivatives.

    Sign-change scan on a grid plus bisection to 1e-12; returns a sorted
    list of (z, f'(z)).
    """
    var_law, check_law = _laws(pair)
    zh_of, step_of = _bec_maps(var_law, check_law, family, eps)
    f = lambda z: step_of(zh_of(z))
    n_pts = int(round(1.0 / grid_step)) + 1
    grid = np.linspace(0.0, 1.0, n_pts)
    g = f(grid) - grid
    roots: List[float] = []
    exact = np.nonzero(np.abs(g) < 1e-14)[0]
    roots.extend(float(grid[j]) for j in exact)
    sign = np.sign(g)
    for j in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
        lo, hi = float(grid[j]), float(grid[j + 1])
        glo = g[j]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            gm = f(mid) - mid
            if gm == 0.0:
                lo = hi = mid
                break
            if (gm > 0) == (glo > 0):
                lo, glo = mid, gm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    dedup: List[float] = []
    for z in sorted(roots):
        if not dedup or z - dedup[-1] > 1e-9:
            dedup.append(z)
    out = []
    h = 1e-7
    for z in dedup:
        a, b = max(0.0, z - h), min(1.0, z + h)
        fprime = (f(b) - f(a)) / (b - a)
        out.append((z, float(fprime)))
    return out
