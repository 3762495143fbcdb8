"""
Calderon-Zygmund kernels and their truncated operators on atomic measures.

T_eps f(x) sums w_a k(x, a) f(a) over atoms a outside the closed cube of
side eps centered at x, i.e. over atoms with |a - x|_inf > eps / 2.  The
atom at x itself is therefore always dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import BadAnnulus, NoAdmissibleTriples, SamePoint, ValidationError
from .measures import AtomicMeasure
from .rbmo import SampledFunction, as_values

KernelFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def linf_dist(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise l-infinity distances, shape (len(X), len(Y))."""
    return np.max(np.abs(X[:, None, :] - Y[None, :, :]), axis=2)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel k(x, y) evaluated on blocks of points.

    ``fn(X, Y)`` takes arrays of shape (P, m), (Q, m) and returns the (P, Q)
    matrix of kernel values; entries with x == y are never read.
    """

    name: str
    n: float
    fn: KernelFn = field(repr=False)
    delta: float = 1.0
    antisymmetric: bool = False
    factor: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValidationError("regularity delta must lie in (0, 1]")

    def evaluate(self, X, Y) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.factor * self.fn(X, Y)

    def __call__(self, x, y) -> float:
        return float(self.evaluate(np.reshape(x, (1, -1)), np.reshape(y, (1, -1)))[0, 0])

    def scaled(self, lam: float) -> "KernelSpec":
        return replace(self, factor=self.factor * lam,
                       name=self.name if lam == 1 else f"{lam:g}*{self.name}")


def _cauchy(X, Y):
    return 1.0 / (X[:, None, 0] - Y[None, :, 0])


def _riesz(n, component):
    def fn(X, Y):
        diff = X[:, None, :] - Y[None, :, :]
        r = np.sqrt(np.sum(diff * diff, axis=2))
        return diff[:, :, component] / r ** (n + 1)
    return fn


def _signed_power(n, component):
    def fn(X, Y):
        diff = X[:, None, :] - Y[None, :, :]
        return np.sign(diff[:, :, component]) * np.max(np.abs(diff), axis=2) ** (-n)
    return fn


def _power(n):
    def fn(X, Y):
        return linf_dist(X, Y) ** (-n)
    return fn


def _zero(X, Y):
    return np.zeros((X.shape[0], Y.shape[0]))


def cauchy1d(n: float = 1.0, **_) -> KernelSpec:
    return KernelSpec("cauchy1d", n, _cauchy, 1.0, True)


def riesz(n: float, component: int = 0, **_) -> KernelSpec:
    return KernelSpec("riesz", n, _riesz(n, component), 1.0, True)


def signed_power(n: float, component: int = 0, **_) -> KernelSpec:
    return KernelSpec("signed-power", n, _signed_power(n, component), 1.0, True)


def unsigned_power(n: float, **_) -> KernelSpec:
    """dist^{-n}: satisfies size and smoothness but never cancels."""
    return KernelSpec("power", n, _power(n), 1.0, False)


def zero_kernel(n: float = 1.0, **_) -> KernelSpec:
    return KernelSpec("zero", n, _zero, 1.0, True)


KERNELS: dict[str, Callable[..., KernelSpec]] = {
    "cauchy1d": cauchy1d,
    "riesz": riesz,
    "signed-power": signed_power,
    "power": unsigned_power,
    "zero": zero_kernel,
}

BUILTIN_SUITE = ("cauchy1d", "riesz", "signed-power")


def register_kernel(name: str, factory: Callable[..., KernelSpec]) -> None:
    KERNELS[name] = factory


def get_kernel(name: str, n: float, **params) -> KernelSpec:
    try:
        factory = KERNELS[name]
    except KeyError:
        raise ValidationError(f"unknown kernel {name!r}; known: {sorted(KERNELS)}") from None
    return factory(n=n, **params)


@dataclass(frozen=True)
class TruncationGrid:
    epsilons: tuple

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if not eps or eps[0] <= 0 or any(b <= a for a, b in zip(eps, eps[1:])):
            raise ValidationError("epsilons must be positive and strictly increasing")
        object.__setattr__(self, "epsilons", eps)

    def __iter__(self):
        return iter(self.epsilons)

    def __len__(self):
        return len(self.epsilons)

    def brackets(self, mu: AtomicMeasure) -> bool:
        """Smallest eps below the minimal atom gap and largest above the diameter."""
        return self.epsilons[0] < mu.min_gap() and self.epsilons[-1] > mu.diameter()

    @classmethod
    def default(cls, mu: AtomicMeasure, num: int = 8) -> "TruncationGrid":
        gap = mu.min_gap()
        if not math.isfinite(gap):
            gap = 1.0
        top = max(2.5 * mu.diameter(), gap)
        return cls(tuple(np.geomspace(gap / 2, top, num)))


def truncated_matrix(mu: AtomicMeasure, K: KernelSpec, eps: float) -> np.ndarray:
    """Dense matrix M with (T_eps f)(atoms) = M @ f."""
    if not eps > 0:
        raise ValidationError("eps must be positive")
    P = mu.points
    far = linf_dist(P, P) > eps / 2
    vals = K.evaluate(P, P)
    return np.where(far, vals, 0.0) * mu.weights[None, :]


def truncated_apply(mu: AtomicMeasure, K: KernelSpec, f, x, eps: float) -> float:
    """T_eps f at an arbitrary point x."""
    if not eps > 0:
        raise ValidationError("eps must be positive")
    v = as_values(mu, f)
    x = np.asarray(x, dtype=float).reshape(1, -1)
    far = mu.distances_from(x[0]) > eps / 2
    if not np.any(far):
        return 0.0
    k = K.evaluate(x, mu.points[far])[0]
    return math.fsum(mu.weights[far] * k * v[far])


def apply_operator(mu: AtomicMeasure, K: KernelSpec, f, eps: float) -> SampledFunction:
    return SampledFunction(truncated_matrix(mu, K, eps) @ as_values(mu, f),
                           f"T_{eps:g}[{K.name}]")


def t1_field(mu: AtomicMeasure, K: KernelSpec, eps: float) -> SampledFunction:
    """T_eps 1 evaluated at every atom."""
    return SampledFunction(truncated_matrix(mu, K, eps).sum(axis=1), f"T_{eps:g}1[{K.name}]")


def size_check(K: KernelSpec, mu: AtomicMeasure, pairs=None) -> float:
    """max |k(x, y)| dist(x, y)^n over index pairs (all distinct pairs by default)."""
    P = mu.points
    if pairs is None:
        D = linf_dist(P, P)
        np.fill_diagonal(D, np.nan)
        k = K.evaluate(P, P)
        return float(np.nanmax(np.abs(k) * D ** K.n))
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    i, j = pairs[:, 0], pairs[:, 1]
    d = np.max(np.abs(P[i] - P[j]), axis=1)
    if np.any(d == 0):
        raise SamePoint("size check received a coincident pair")
    k = _paired(K, P[i], P[j])
    return float(np.max(np.abs(k) * d ** K.n))


def _paired(K: KernelSpec, X: np.ndarray, Y: np.ndarray, block: int = 64) -> np.ndarray:
    """k(X[r], Y[r]) row by row without forming the full matrix."""
    out = np.empty(len(X))
    for s in range(0, len(X), block):
        xs, ys = X[s:s + block], Y[s:s + block]
        out[s:s + block] = np.diagonal(K.evaluate(xs, ys))
    return out


def admissible_triples(mu: AtomicMeasure, n_samples: int = 10_000, seed: int = 0,
                       exhaustive_limit: int = 64) -> np.ndarray:
    """Index triples (x1, x2, y) with x1 != x2 and 2 d(x1, x2) <= d(x1, y)."""
    N = mu.n_atoms
    P = mu.points
    if N <= exhaustive_limit:
        D = linf_dist(P, P)
        a, b, c = np.meshgrid(np.arange(N), np.arange(N), np.arange(N), indexing="ij")
        a, b, c = a.ravel(), b.ravel(), c.ravel()
        ok = (a != b) & (D[a, b] > 0) & (2 * D[a, b] <= D[a, c])
        return np.stack([a[ok], b[ok], c[ok]], axis=1)
    rng = np.random.default_rng(seed)
    found = []
    total = 0
    for _ in range(200):
        a = rng.integers(N, size=4 * n_samples)
        b = rng.integers(N, size=4 * n_samples)
        c = rng.integers(N, size=4 * n_samples)
        d12 = np.max(np.abs(P[a] - P[b]), axis=1)
        d1y = np.max(np.abs(P[a] - P[c]), axis=1)
        ok = (d12 > 0) & (2 * d12 <= d1y)
        found.append(np.stack([a[ok], b[ok], c[ok]], axis=1))
        total += int(ok.sum())
        if total >= n_samples:
            break
    return np.concatenate(found)[:n_samples]


def hoelder_check(K: KernelSpec, mu: AtomicMeasure, triples=None, n_samples: int = 10_000,
                  seed: int = 0) -> float:
    """Largest smoothness ratio over admissible triples.

    ratio = (|k(x1,y) - k(x2,y)| + |k(y,x1) - k(y,x2)|) d(x1,y)^(n+delta) / d(x1,x2)^delta
    """
    if triples is None:
        triples = admissible_triples(mu, n_samples, seed)
    T = np.asarray(triples, dtype=int).reshape(-1, 3)
    P = mu.points
    d12 = np.max(np.abs(P[T[:, 0]] - P[T[:, 1]]), axis=1)
    d1y = np.max(np.abs(P[T[:, 0]] - P[T[:, 2]]), axis=1)
    keep = (d12 > 0) & (2 * d12 <= d1y)
    T, d12, d1y = T[keep], d12[keep], d1y[keep]
    if len(T) == 0:
        raise NoAdmissibleTriples("no admissible (x1, x2, y) triples")
    x1, x2, y = P[T[:, 0]], P[T[:, 1]], P[T[:, 2]]
    first = np.abs(_paired(K, x1, y) - _paired(K, x2, y))
    second = np.abs(_paired(K, y, x1) - _paired(K, y, x2))
    ratio = (first + second) * d1y ** (K.n + K.delta) / d12 ** K.delta
    return float(ratio.max())


@dataclass
class CancellationResult:
    worst_abs: float
    worst_pair: tuple
    values: list
    cap: float | None

    @property
    def passed(self) -> bool:
        return self.cap is None or self.worst_abs <= self.cap

    def to_json(self) -> dict:
        return {"worst_abs": self.worst_abs, "worst_pair": list(self.worst_pair),
                "cap": self.cap, "passed": self.passed}


def annulus_integral(K: KernelSpec, mu: AtomicMeasure, x, r: float, R: float) -> float:
    """sum of w_a k(x, a) over atoms with r < |a - x|_inf <= R (r, R are radii)."""
    if not 0 < r < R:
        raise BadAnnulus(f"need 0 < r < R, got r={r}, R={R}")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    d = mu.distances_from(x[0])
    sel = (d > r) & (d <= R)
    if not np.any(sel):
        return 0.0
    return math.fsum(mu.weights[sel] * K.evaluate(x, mu.points[sel])[0])


def cancellation_check(K: KernelSpec, mu: AtomicMeasure, x, trunc_pairs,
                       cap: float | None = None) -> CancellationResult:
    """Worst |integral of k(x, .) over Q(x,R) minus Q(x,r)| across (r, R) pairs.

    Here Q(x, r) is the closed cube of half-side r about x.
    """
    vals = [annulus_integral(K, mu, x, r, R) for r, R in trunc_pairs]
    if not vals:
        raise ValidationError("no annuli given")
    i = int(np.argmax(np.abs(vals)))
    return CancellationResult(abs(vals[i]), tuple(trunc_pairs[i]), vals, cap)


def dyadic_annuli(mu: AtomicMeasure, x, count: int = 12) -> list[tuple[float, float]]:
    """All (r, R) pairs from a geometric radius ladder spanning gap to diameter."""
    gap = mu.min_gap()
    radii = np.geomspace(gap / 2, 2 * mu.diameter(), count)
    return [(float(r), float(R)) for i, r in enumerate(radii) for R in radii[i + 1:]]
