"""Degree sequences for sparse-graph code ensembles.

A design degree pair is a couple of sparse polynomials: the variable-node
law ``Lambda`` (coefficients Lambda_l at degree l >= 2) and the check-node
law ``P`` (coefficients P_k at degree k >= 2), both normalized to 1 at
x = 1.  The edge-perspective forms are lambda(x) = Lambda'(x)/Lambda'(1) and
rho(x) = P'(x)/P'(1).

Poisson ensembles have variable-node law exp(gamma*(x-1)); it is represented
exactly by `PoissonLaw` rather than by a truncated polynomial, so the BEC
closed forms stay exact.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from .errors import SpecParseError

NORM_TOL = 1e-12


def poly_eval(coeffs: Mapping[int, float], x):
    """Evaluate sum_d c_d x^d; works on scalars and numpy arrays."""
    total = 0.0 * (x if isinstance(x, np.ndarray) else 0.0)
    for d, c in coeffs.items():
        total = total + c * x**d
    return total


def poly_mean(coeffs: Mapping[int, float]) -> float:
    """Derivative at 1, i.e. the mean degree of the law."""
    return float(sum(d * c for d, c in coeffs.items()))


def edge_coeffs(coeffs: Mapping[int, float]) -> Dict[int, float]:
    """Edge-perspective coefficients: degree d node mass -> d*c_d/mean at d-1."""
    mean = poly_mean(coeffs)
    return {d - 1: d * c / mean for d, c in coeffs.items() if d >= 1 and c != 0.0}


def _validate_law(coeffs: Mapping[int, float], name: str, min_degree: int) -> None:
    if not coeffs:
        raise ValueError(f"{name}: empty degree law")
    for d, c in coeffs.items():
        if not isinstance(d, (int, np.integer)) or d < min_degree:
            raise ValueError(f"{name}: degree {d} below minimum {min_degree}")
        if c < 0:
            raise ValueError(f"{name}: negative coefficient at degree {d}")
    total = sum(coeffs.values())
    if abs(total - 1.0) > NORM_TOL:
        raise ValueError(f"{name}: coefficients sum to {total}, expected 1")
    if poly_mean(coeffs) <= 0:
        raise ValueError(f"{name}: mean degree must be positive")


class PolyLaw:
    """Node-perspective degree law given by a sparse polynomial.

    Provides generating-function evaluation, edge-perspective sampling
    (residual degree d-1 with d ~ edge perspective) and full-degree sampling.
    """

    def __init__(self, coeffs: Mapping[int, float], min_degree: int = 0,
                 name: str = "degree law"):
        _validate_law(coeffs, name, min_degree)
        self.coeffs: Dict[int, float] = {int(d): float(c)
                                         for d, c in sorted(coeffs.items()) if c != 0.0}
        self.mean = poly_mean(self.coeffs)
        self.max_degree = max(self.coeffs)
        self.min_degree = min(self.coeffs)
        self._node_degrees = np.array(sorted(self.coeffs), dtype=np.int64)
        probs = np.array([self.coeffs[d] for d in self._node_degrees])
        self._node_probs = probs / probs.sum()
        edge = edge_coeffs(self.coeffs)
        self._edge_coeffs = edge
        self._edge_degrees = np.array(sorted(edge), dtype=np.int64)
        eprobs = np.array([edge[d] for d in self._edge_degrees])
        self._edge_probs = eprobs / eprobs.sum()

    def gf(self, x):
        """Node-perspective generating function, e.g. Lambda(x)."""
        return poly_eval(self.coeffs, x)

    def edge_gf(self, x):
        """Edge-perspective generating function, e.g. lambda(x)."""
        return poly_eval(self._edge_coeffs, x)

    def edge_perspective(self) -> Dict[int, float]:
        return dict(self._edge_coeffs)

    def sample_full(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Node degrees d ~ node-perspective law."""
        if len(self._node_degrees) == 1:
            return np.full(size, self._node_degrees[0], dtype=np.int64)
        return rng.choice(self._node_degrees, size=size, p=self._node_probs)

    def sample_residual(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Residual degrees d-1 with d ~ edge-perspective law."""
        if len(self._edge_degrees) == 1:
            return np.full(size, self._edge_degrees[0], dtype=np.int64)
        return rng.choice(self._edge_degrees, size=size, p=self._edge_probs)

    def __repr__(self):
        terms = " + ".join(f"{c:g}@x^{d}" for d, c in self.coeffs.items())
        return f"PolyLaw({terms})"


class PoissonLaw:
    """Variable-node law of a Poisson ensemble: Lambda(x) = exp(gamma*(x-1)).

    Edge perspective coincides with the node law, and the residual degree
    entering the variable update is the full Poisson count.
    """

    def __init__(self, gamma: float):
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        self.gamma = float(gamma)
        self.mean = self.gamma

    def gf(self, x):
        return np.exp(self.gamma * (x - 1.0)) if isinstance(x, np.ndarray) \
            else float(np.exp(self.gamma * (x - 1.0)))

    def edge_gf(self, x):
        return self.gf(x)

    def sample_full(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.poisson(self.gamma, size=size)

    def sample_residual(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.poisson(self.gamma, size=size)

    def __repr__(self):
        return f"PoissonLaw(gamma={self.gamma:g})"


@dataclass(frozen=True)
class DegreePair:
    """Design degree sequences (Lambda, P) with their edge-perspective forms.

    `lam` maps variable degree l (>=2) to the fraction Lambda_l of variable
    nodes; `rho` maps check degree k (>=2) to the node-perspective fraction
    P_k of check nodes.  Both must sum to 1.
    """

    lam: Mapping[int, float]
    rho: Mapping[int, float]
    var_law: PolyLaw = field(init=False, repr=False, compare=False)
    check_law: PolyLaw = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "lam", dict(self.lam))
        object.__setattr__(self, "rho", dict(self.rho))
        object.__setattr__(self, "var_law", PolyLaw(self.lam, 2, "Lambda"))
        object.__setattr__(self, "check_law", PolyLaw(self.rho, 2, "P"))

    @property
    def lambda_prime1(self) -> float:
        return self.var_law.mean

    @property
    def rho_prime1(self) -> float:
        return self.check_law.mean

    @property
    def l_max(self) -> int:
        return self.var_law.max_degree

    @property
    def k_max(self) -> int:
        return self.check_law.max_degree

    def __str__(self):
        fmt = lambda m: " + ".join(f"{c:g}@{d}" for d, c in sorted(m.items()))
        return f"L: {fmt(self.lam)} ; R: {fmt(self.rho)}"


def regular_pair(l: int, k: int) -> DegreePair:
    """(l, k)-regular pair: Lambda = x^l, P = x^k."""
    return DegreePair({l: 1.0}, {k: 1.0})


def edge_perspective(pair: DegreePair) -> Tuple[Dict[int, float], Dict[int, float]]:
    """Edge-perspective degree sequences (lambda, rho) of a design pair."""
    return (pair.var_law.edge_perspective(), pair.check_law.edge_perspective())


_TERM_RE = re.compile(r"^\s*([0-9.eE+-]+)\s*@\s*(\d+)\s*$")


def parse_terms(text: str) -> Dict[int, float]:
    """Parse a degree law like ``1.0@3`` or ``0.5@2, 0.5@3``."""
    coeffs: Dict[int, float] = {}
    for chunk in re.split(r"[,+]", text):
        if not chunk.strip():
            continue
        m = _TERM_RE.match(chunk)
        if not m:
            raise SpecParseError(f"bad degree term {chunk!r}; expected coeff@degree")
        deg = int(m.group(2))
        try:
            coef = float(m.group(1))
        except ValueError as exc:
            raise SpecParseError(f"bad coefficient in {chunk!r}") from exc
        coeffs[deg] = coeffs.get(deg, 0.0) + coef
    if not coeffs:
        raise SpecParseError(f"no degree terms in {text!r}")
    return coeffs


def parse_degree_pair(text: str) -> DegreePair:
    """Parse the text format ``L: 1.0@3 ; R: 1.0@6``."""
    parts = re.split(r";", text)
    if len(parts) != 2:
        raise SpecParseError("degree pair must have form 'L: ... ; R: ...'")
    sides = {}
    for part in parts:
        m = re.match(r"^\s*([LR])\s*:\s*(.*)$", part.strip(), re.IGNORECASE)
        if not m:
            raise SpecParseError(f"bad degree pair side {part!r}")
        sides[m.group(1).upper()] = parse_terms(m.group(2))
    if set(sides) != {"L", "R"}:
        raise SpecParseError("degree pair needs both an L: and an R: side")
    try:
        return DegreePair(sides["L"], sides["R"])
    except ValueError as exc:
        raise SpecParseError(str(exc)) from exc
