"""
Dyadic coefficients K(Q, R) and K(Q).

    K(Q, R) = 1 + sum_{j=1}^{N} mu(2^j Q) / l(2^j Q)^n,
    N = min{k >= 0 : l(2^k Q) >= l(R)}

K(Q) is K(Q, 2^k Q) for the least k >= 1 with mu(2^k Q) > mu(R^m) / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotNested, ValidationError
from .geometry import Cube, CubeFamily, contains
from .measures import TIE_RTOL, AtomicMeasure, growth_constant, mass_of_cube


@dataclass
class KResult:
    value: float
    n_steps: int
    terms: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"value": self.value, "N": self.n_steps, "terms": list(self.terms)}


def n_steps(Q: Cube, R: Cube) -> int:
    """Least k >= 0 with 2^k l(Q) >= l(R); exact ties count as reached."""
    k = 0
    target = R.half_side * (1 - TIE_RTOL)
    h = Q.half_side
    while h < target:
        h *= 2
        k += 1
    return k


def dyadic_terms(mu: AtomicMeasure, Q: Cube, count: int) -> list[float]:
    """[mu(2^j Q) / l(2^j Q)^n for j = 1..count]."""
    n = mu.growth_dim
    out = []
    for j in range(1, count + 1):
        D = Cube(Q.center, Q.half_side * 2 ** j)
        out.append(mass_of_cube(mu, D) / D.side ** n)
    return out


def k_coefficient(mu: AtomicMeasure, Q: Cube, R: Cube) -> KResult:
    if not contains(R, Q):
        raise NotNested("K(Q, R) needs Q inside R")
    N = n_steps(Q, R)
    terms = dyadic_terms(mu, Q, N)
    return KResult(1.0 + math.fsum(terms), N, terms)


def k_log_bound(mu: AtomicMeasure, Q: Cube, R: Cube, growth: float | None = None) -> float:
    """Upper bound max(1, C) * (1 + ceil(log2(l(R)/l(Q)))) for K(Q, R).

    ``C`` bounds mu(P)/l(P)^n for cubes of side >= l(2Q); by default it is
    the certified value from :func:`rbmo_lab.measures.growth_constant`.
    Each summand is at most C and there are ceil(log2(l(R)/l(Q))) of them.
    """
    if not contains(R, Q):
        raise NotNested("K(Q, R) needs Q inside R")
    if growth is None:
        growth = growth_constant(mu, 2 * Q.side)
    return max(1.0, growth) * (1 + n_steps(Q, R))


def half_mass_exponent(mu: AtomicMeasure, Q: Cube) -> int:
    """Least k >= 1 with mu(2^k Q) > total / 2."""
    half = mu.total_mass / 2
    k = 1
    dist = mu.distances_from(Q.center)
    reach = float(dist.max())
    while True:
        h = Q.half_side * 2 ** k
        if mass_of_cube(mu, Cube(Q.center, h)) > half:
            return k
        if h > 2 * reach + 1:  # cannot happen for positive total mass
            raise ValidationError("half-mass dilate not found")
        k += 1


def k_of_cube(mu: AtomicMeasure, Q: Cube) -> KResult:
    k = half_mass_exponent(mu, Q)
    return k_coefficient(mu, Q, Cube(Q.center, Q.half_side * 2 ** k))


class KTable:
    """Cached dyadic terms for every cube of a family.

    ``K(i, j)`` and ``K_of(i)`` reuse the same partial sums, so assembling
    all nested-pair coefficients costs one mass evaluation per dilate.
    """

    def __init__(self, mu: AtomicMeasure, family: CubeFamily | list):
        self.mu = mu
        self.cubes = list(family)
        self._partial: list[np.ndarray] = [np.zeros(1) for _ in self.cubes]

    def _ensure(self, i: int, count: int) -> np.ndarray:
        p = self._partial[i]
        have = len(p) - 1
        if have < count:
            Q = self.cubes[i]
            n = self.mu.growth_dim
            extra = []
            for j in range(have + 1, count + 1):
                D = Cube(Q.center, Q.half_side * 2 ** j)
                extra.append(mass_of_cube(self.mu, D) / D.side ** n)
            p = np.concatenate([p, p[-1] + np.cumsum(extra)])
            self._partial[i] = p
        return p

    def K(self, i: int, j: int) -> float:
        """K(cube i, cube j); cube i must sit inside cube j."""
        N = n_steps(self.cubes[i], self.cubes[j])
        return 1.0 + float(self._ensure(i, N)[N])

    def K_of(self, i: int) -> float:
        k = half_mass_exponent(self.mu, self.cubes[i])
        return 1.0 + float(self._ensure(i, k)[k])
