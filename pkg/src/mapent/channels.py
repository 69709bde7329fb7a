"""BIOS channel models, LLR populations and symmetric-density machinery.

LLRs use the half-log convention l(y) = (1/2) ln Q(y|0)/Q(y|1) and live on
(-inf, +inf]: +inf is the ordinary IEEE infinity (a perfectly known bit),
-inf never occurs conditional on the all-zero codeword.  Finite values are
clamped to +-LLR_CLAMP nats on creation; the finite/infinite distinction is
kept exact so erasure-channel logic stays exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import ImpossibleOutput, SpecParseError
from .rng import substream
from .stable import softplus as _softplus

LLR_CLAMP = 60.0
LN2 = math.log(2.0)

ERASURE = "*"


def clamp_llrs(values: np.ndarray) -> np.ndarray:
    """Clamp finite LLRs to +-LLR_CLAMP, keeping +inf intact."""
    values = np.asarray(values, dtype=np.float64)
    if np.isneginf(values).any():
        raise ValueError("LLR value -inf is not allowed")
    if np.isnan(values).any():
        raise ValueError("LLR value NaN is not allowed")
    finite = np.isfinite(values)
    out = values.copy()
    out[finite] = np.clip(values[finite], -LLR_CLAMP, LLR_CLAMP)
    return out


@dataclass(frozen=True)
class LlrPopulation:
    """Empirical sample of a symmetric LLR density on (-inf, +inf]."""

    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        vals = clamp_llrs(self.values)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.values.ndim != 1 or len(self.values) < 1:
            raise ValueError("population must be a non-empty 1-d array")

    def __len__(self):
        return len(self.values)

    @staticmethod
    def constant(value: float, n: int, source: str = "") -> "LlrPopulation":
        return LlrPopulation(np.full(n, value, dtype=np.float64), source)

    @staticmethod
    def all_infinity(n: int, source: str = "known") -> "LlrPopulation":
        return LlrPopulation(np.full(n, np.inf), source)

    @staticmethod
    def all_zero(n: int, source: str = "erased") -> "LlrPopulation":
        return LlrPopulation(np.zeros(n), source)

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Sample with replacement."""
        return self.values[rng.integers(0, len(self.values), size=size)]

    def zero_fraction(self) -> float:
        return float(np.mean(self.values == 0.0))

    def infinite_fraction(self) -> float:
        return float(np.mean(np.isposinf(self.values)))


# ---------------------------------------------------------------------------
# Channel models
# ---------------------------------------------------------------------------

class ChannelModel:
    """Base class; subclasses implement output sampling conditional on 0."""

    name = "channel"

    def llr_of_output(self, y) -> float:
        raise NotImplementedError

    def sample_outputs(self, rng: np.random.Generator, n: int):
        raise NotImplementedError

    def sample_llrs(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def sample_observations(self, rng: np.random.Generator, n: int
                            ) -> Tuple[np.ndarray, np.ndarray]:
        """(llr, log2 Q(y|0)) pairs for sampled outputs; used by Bethe sums."""
        raise NotImplementedError

    def capacity(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class BEC(ChannelModel):
    eps: float
    name = "bec"

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError("erasure probability must be in [0, 1]")

    def llr_of_output(self, y) -> float:
        if y == ERASURE:
            return 0.0
        if y == 0:
            return math.inf
        raise ImpossibleOutput("output 1 has zero probability under input 0")

    def sample_outputs(self, rng, n):
        erased = rng.random(n) < self.eps
        out = np.zeros(n, dtype=object)
        out[erased] = ERASURE
        return out

    def sample_llrs(self, rng, n):
        erased = rng.random(n) < self.eps
        return np.where(erased, 0.0, np.inf)

    def sample_observations(self, rng, n):
        erased = rng.random(n) < self.eps
        llr = np.where(erased, 0.0, np.inf)
        logq = np.where(erased, math.log2(self.eps) if self.eps > 0 else -np.inf,
                        math.log2(1 - self.eps) if self.eps < 1 else -np.inf)
        return llr, logq

    def capacity(self) -> float:
        return 1.0 - self.eps


@dataclass(frozen=True)
class BSC(ChannelModel):
    p: float
    name = "bsc"

    def __post_init__(self):
        if not 0.0 <= self.p < 0.5:
            raise ValueError("crossover probability must be in [0, 1/2)")

    def _a(self) -> float:
        if self.p == 0.0:
            return math.inf
        return 0.5 * math.log((1 - self.p) / self.p)

    def llr_of_output(self, y) -> float:
        a = self._a()
        if y == 0:
            return a
        if y == 1:
            return -a if math.isfinite(a) else _raise_impossible()
        raise ImpossibleOutput(f"unknown BSC output {y!r}")

    def sample_outputs(self, rng, n):
        return (rng.random(n) < self.p).astype(np.int8)

    def sample_llrs(self, rng, n):
        a = self._a()
        flipped = rng.random(n) < self.p
        return np.where(flipped, -a, a)

    def sample_observations(self, rng, n):
        flipped = rng.random(n) < self.p
        a = self._a()
        llr = np.where(flipped, -a, a)
        logq = np.where(flipped, math.log2(self.p) if self.p > 0 else -np.inf,
                        math.log2(1 - self.p))
        return llr, logq

    def capacity(self) -> float:
        return 1.0 - binary_entropy(self.p)


@dataclass(frozen=True)
class BIAWGN(ChannelModel):
    """Binary-input AWGN with inputs mapped to +-1 and noise variance sigma^2.

    With the half-log normalization the output LLR is y/sigma^2.
    """

    sigma: float
    name = "biawgn"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def llr_of_output(self, y) -> float:
        return float(y) / self.sigma**2

    def sample_outputs(self, rng, n):
        return 1.0 + self.sigma * rng.standard_normal(n)

    def sample_llrs(self, rng, n):
        return self.sample_outputs(rng, n) / self.sigma**2

    def sample_observations(self, rng, n):
        y = self.sample_outputs(rng, n)
        llr = y / self.sigma**2
        logq = (-0.5 * ((y - 1.0) / self.sigma) ** 2
                - math.log(self.sigma * math.sqrt(2 * math.pi))) / LN2
        return llr, logq

    def capacity(self) -> float:
        # C = 1 - E log2(1 + e^{-2 y / sigma^2}), y ~ N(1, sigma^2),
        # by Gauss-Hermite quadrature (y = 1 + sigma*sqrt(2)*t).
        nodes, weights = np.polynomial.hermite.hermgauss(201)
        y = 1.0 + self.sigma * math.sqrt(2.0) * nodes
        integrand = _softplus(-2.0 * y / self.sigma**2) / LN2
        return 1.0 - float(np.dot(weights, integrand)) / math.sqrt(math.pi)


@dataclass(frozen=True)
class DiscreteTable(ChannelModel):
    """BIOS channel given by a finite table of (y, Q(y|0), Q(y|1)) rows."""

    rows: Tuple[Tuple[object, float, float], ...]
    name = "table"

    def __post_init__(self):
        rows = tuple((y, float(q0), float(q1)) for y, q0, q1 in self.rows)
        object.__setattr__(self, "rows", rows)
        q0s = np.array([r[1] for r in rows])
        q1s = np.array([r[2] for r in rows])
        if (q0s < 0).any() or (q1s < 0).any():
            raise ValueError("negative channel probability")
        if abs(q0s.sum() - 1) > 1e-9 or abs(q1s.sum() - 1) > 1e-9:
            raise ValueError("channel table rows must normalize to 1")
        # Output symmetry: the multiset of (q0, q1) pairs must be closed
        # under swapping the two inputs.
        fwd = sorted(zip(np.round(q0s, 12), np.round(q1s, 12)))
        rev = sorted(zip(np.round(q1s, 12), np.round(q0s, 12)))
        if fwd != rev:
            raise ValueError("table is not output-symmetric")

    def llr_of_output(self, y) -> float:
        for label, q0, q1 in self.rows:
            if label == y:
                if q0 == 0.0:
                    raise ImpossibleOutput(f"output {y!r} impossible under input 0")
                if q1 == 0.0:
                    return math.inf
                return 0.5 * math.log(q0 / q1)
        raise ImpossibleOutput(f"unknown output {y!r}")

    def _support(self):
        rows = [(y, q0, q1) for y, q0, q1 in self.rows if q0 > 0]
        probs = np.array([q0 for _, q0, _ in rows])
        llrs = np.array([math.inf if q1 == 0.0 else 0.5 * math.log(q0 / q1)
                         for _, q0, q1 in rows])
        logq = np.log2(probs)
        return probs, llrs, logq

    def sample_outputs(self, rng, n):
        probs = np.array([q0 for _, q0, _ in self.rows])
        idx = rng.choice(len(self.rows), size=n, p=probs / probs.sum())
        return np.array([self.rows[i][0] for i in idx], dtype=object)

    def sample_llrs(self, rng, n):
        probs, llrs, _ = self._support()
        idx = rng.choice(len(probs), size=n, p=probs / probs.sum())
        return llrs[idx]

    def sample_observations(self, rng, n):
        probs, llrs, logq = self._support()
        idx = rng.choice(len(probs), size=n, p=probs / probs.sum())
        return llrs[idx], logq[idx]

    def capacity(self) -> float:
        probs, llrs, _ = self._support()
        return 1.0 - float(np.dot(probs, _softplus(-2.0 * llrs) / LN2))


def _raise_impossible():
    raise ImpossibleOutput("p = 0: output 1 cannot occur under input 0")


def llr_of_output(channel: ChannelModel, y) -> float:
    """Half-log LLR of a single channel output; +inf when Q(y|1) = 0."""
    return channel.llr_of_output(y)


def sample_llr_population(channel: ChannelModel, n: int, seed: int) -> LlrPopulation:
    """n i.i.d. draws of l(Y) with Y ~ Q(.|0)."""
    if n < 1:
        raise ValueError("population size must be >= 1")
    rng = substream(seed, "channel-llr")
    return LlrPopulation(channel.sample_llrs(rng, n), source=channel.name)


def capacity(channel: ChannelModel) -> float:
    """Channel capacity in bits per use."""
    return channel.capacity()


def parse_channel(text: str) -> ChannelModel:
    """Parse channel spec strings: bec:0.45, bsc:0.11, biawgn:0.8, table:<path>."""
    try:
        kind, _, arg = text.partition(":")
        kind = kind.strip().lower()
        if kind == "bec":
            return BEC(float(arg))
        if kind == "bsc":
            return BSC(float(arg))
        if kind == "biawgn":
            return BIAWGN(float(arg))
        if kind == "table":
            import json
            with open(arg) as fh:
                rows = json.load(fh)
            return DiscreteTable(tuple((r["y"], r["q0"], r["q1"]) for r in rows))
    except (ValueError, KeyError, OSError) as exc:
        raise SpecParseError(f"bad channel spec {text!r}: {exc}") from exc
    raise SpecParseError(f"unknown channel kind in {text!r}")


# ---------------------------------------------------------------------------
# Symmetry identities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetryReport:
    """Per-k discrepancies of E tanh^{2k-1} X = E tanh^{2k} X."""

    discrepancies: Tuple[float, ...]
    std_errors: Tuple[float, ...]
    n_samples: int

    @property
    def passed(self) -> bool:
        return all(d <= 4.0 * se for d, se in zip(self.discrepancies, self.std_errors))

    def max_sigma(self) -> float:
        """Largest discrepancy in units of its standard error."""
        worst = 0.0
        for d, se in zip(self.discrepancies, self.std_errors):
            if se == 0.0:
                if d > 0.0:
                    return math.inf
            else:
                worst = max(worst, d / se)
        return worst


def symmetry_test(pop: LlrPopulation, k_max_moments: int = 4) -> SymmetryReport:
    """Check the odd/even tanh-moment identities of a symmetric variable.

    For each k <= k_max_moments reports |E tanh^{2k-1} X - E tanh^{2k} X| and
    the standard error of the per-sample difference; a population fails when
    some discrepancy exceeds 4 standard errors.
    """
    if len(pop) < 100:
        raise ValueError("symmetry test needs at least 100 samples")
    t = np.tanh(pop.values)
    n = len(t)
    discrepancies: List[float] = []
    errors: List[float] = []
    power = t.copy()  # t^(2k-1) running power
    for _ in range(k_max_moments):
        diff = power * (1.0 - t)  # t^{2k-1} - t^{2k} per sample
        discrepancies.append(abs(float(diff.mean())))
        errors.append(float(diff.std(ddof=1) / math.sqrt(n)))
        power = power * t * t
    return SymmetryReport(tuple(discrepancies), tuple(errors), n)


def tanh_moments(pop: LlrPopulation, k_max: int = 4) -> np.ndarray:
    """Vector of E tanh^{2k} X for k = 1..k_max."""
    t2 = np.tanh(pop.values) ** 2
    out = np.empty(k_max)
    acc = np.ones_like(t2)
    for k in range(k_max):
        acc = acc * t2
        out[k] = acc.mean()
    return out


# ---------------------------------------------------------------------------
# Binary entropy
# ---------------------------------------------------------------------------

def binary_entropy(x: float) -> float:
    """h2(x) = -x log2 x - (1-x) log2 (1-x) on [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("binary_entropy domain is [0, 1]")
    if x in (0.0, 1.0):
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def binary_entropy_inverse(h: float) -> float:
    """Inverse of h2 on [0, 1/2], by bisection to 1e-12."""
    if not 0.0 <= h <= 1.0:
        raise ValueError("binary_entropy_inverse domain is [0, 1]")
    lo, hi = 0.0, 0.5
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < h:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
