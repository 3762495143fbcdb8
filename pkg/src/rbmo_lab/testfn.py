"""
The radial tail function phi and the test family phi_x built from it.

    phi_x(y) = 1 + sum_{t : |t - x| > |y - x|} w_t / |t - x|^n      (l-inf norms)

An atom sitting exactly at the base point never enters the tail sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import KTable, k_of_cube
from .errors import ValidationError, ZeroMassCube
from .geometry import Cube, CubeFamily, dilate
from .measures import AtomicMeasure, inside_mask
from .rbmo import SampledFunction, as_values, norm_star, seminorm_A


class _Tail:
    """Sorted distances and tail sums of w_t / d_t^n about one base point."""

    def __init__(self, mu: AtomicMeasure, x_base):
        d = mu.distances_from(x_base)
        pos = d > 0
        order = np.argsort(d[pos], kind="stable")
        self.d = d[pos][order]
        terms = mu.weights[pos][order] / self.d ** mu.growth_dim
        # tail[k] = sum of terms[k:]
        self.tail = np.concatenate([np.cumsum(terms[::-1])[::-1], [0.0]])

    def __call__(self, radius) -> np.ndarray:
        k = np.searchsorted(self.d, np.asarray(radius, dtype=float), side="right")
        return 1.0 + self.tail[k]


def phi_radial(mu: AtomicMeasure, x_base, radius) -> np.ndarray:
    """phi as a function of the l-inf radius |y - x_base|."""
    return _Tail(mu, x_base)(radius)


def phi_value(mu: AtomicMeasure, x_base, y) -> float:
    r = float(np.max(np.abs(np.asarray(y, float) - np.asarray(x_base, float))))
    return float(phi_radial(mu, x_base, r))


def phi_at_atoms(mu: AtomicMeasure, x_base) -> np.ndarray:
    return _Tail(mu, x_base)(mu.distances_from(x_base))


def witness_radius(Q: Cube, x_base) -> float:
    """|x_Q - x| + l(Q)/2, the radius of the boundary point y_Q."""
    return float(np.max(np.abs(Q.center_array() - np.asarray(x_base, float)))) + Q.half_side


@dataclass
class PhiKProbe:
    radii: list
    phi: list
    K: list
    ratios: list

    @property
    def min_ratio(self) -> float:
        return min(self.ratios)

    @property
    def max_ratio(self) -> float:
        return max(self.ratios)

    def rows(self) -> list[dict]:
        return [{"radius": r, "phi": p, "K": k, "ratio": q}
                for r, p, k, q in zip(self.radii, self.phi, self.K, self.ratios)]


def phi_vs_K_probe(mu: AtomicMeasure, x_base, radii) -> PhiKProbe:
    """phi(r) / K(Q(x_base, r)) where Q(x, r) has center x and half-side r."""
    tail = _Tail(mu, x_base)
    phis, Ks = [], []
    for r in radii:
        phis.append(float(tail(r)))
        Ks.append(k_of_cube(mu, Cube(tuple(np.atleast_1d(x_base)), r)).value)
    return PhiKProbe(list(map(float, radii)), phis, Ks, [p / k for p, k in zip(phis, Ks)])


def fubini_sides(mu: AtomicMeasure, x_base) -> tuple[float, float]:
    """Both orders of the double sum giving ||phi_x - 1||_{L^1(mu)}.

    lhs = sum_y w_y sum_{|t-x| > |y-x|} w_t / |t-x|^n
    rhs = sum_t w_t mu({y : |y-x| < |t-x|}) / |t-x|^n
    """
    d = mu.distances_from(x_base)
    lhs = math.fsum(mu.weights * (phi_at_atoms(mu, x_base) - 1.0))
    order = np.argsort(d, kind="stable")
    ds, ws = d[order], mu.weights[order]
    below = np.concatenate([[0.0], np.cumsum(ws)])[np.searchsorted(ds, ds, side="left")]
    pos = ds > 0
    rhs = math.fsum(ws[pos] * below[pos] / ds[pos] ** mu.growth_dim)
    return lhs, rhs


@dataclass
class TestFunction:
    __test__ = False  # not a pytest class

    base_point: tuple
    scale: float
    values: SampledFunction
    raw_norm: float
    witness_constants: dict = field(default_factory=dict)
    averages_2Q: dict = field(default_factory=dict)
    K_2Q: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "x": list(self.base_point),
            "c": self.scale,
            "raw_norm_star": self.raw_norm,
            "cubes": [{"cube": Q.to_json(), "avg_2Q": self.averages_2Q[Q], "K_2Q": self.K_2Q[Q]}
                      for Q in self.averages_2Q],
        }


def _base_coords(mu: AtomicMeasure, base_points) -> list[np.ndarray]:
    arr = np.asarray(base_points)
    if arr.dtype.kind in "iu":
        return [mu.points[int(i)] for i in arr.ravel()]
    return [np.atleast_1d(np.asarray(p, dtype=float)) for p in base_points]


def build_test_family(mu: AtomicMeasure, base_points, doubling_family: CubeFamily,
                      ktable: KTable | None = None) -> list[TestFunction]:
    """phi_x scaled to ||phi_x||_* = 1, with 2Q averages for doubling Q centered at x.

    ``base_points`` is a sequence of atom indices or of coordinates.
    """
    kt = ktable if ktable is not None else KTable(mu, doubling_family)
    out = []
    for x in _base_coords(mu, base_points):
        raw = phi_at_atoms(mu, x)
        nrm = norm_star(mu, raw, doubling_family, kt)
        c = 1.0 / nrm
        vals = c * raw
        tail = _Tail(mu, x)
        witness = {Q: c * float(tail(witness_radius(Q, x))) for Q in doubling_family}
        avgs, ks = {}, {}
        for Q in doubling_family:
            if not np.array_equal(Q.center_array(), x):
                continue
            idx = inside_mask(mu, Q.center, 2 * Q.half_side)
            avgs[Q] = math.fsum(mu.weights[idx] * vals[idx]) / math.fsum(mu.weights[idx])
            ks[Q] = k_of_cube(mu, dilate(Q, 2)).value
        out.append(TestFunction(tuple(float(v) for v in x), c,
                                SampledFunction(vals, f"phi_x@{tuple(np.round(x, 12))}"),
                                nrm, witness, avgs, ks))
    return out


@dataclass
class LowerBoundFit:
    c1: float
    c2: float
    c2_least_squares: float
    n_points: int

    def threshold(self) -> float:
        """Default eligibility threshold 2 (c2 + 1) / c1 on K(2Q)."""
        return 2.0 * (self.c2 + 1.0) / self.c1

    def to_json(self) -> dict:
        return {"c1": self.c1, "c2": self.c2, "c2_least_squares": self.c2_least_squares,
                "n_points": self.n_points, "threshold": self.threshold()}


def fit_lower_bound(K_values, averages) -> LowerBoundFit:
    """Fit avg ~ c1 K - c2 by least squares, then raise c2 until the bound holds on every point.

    c2 is clamped at 0: a bound that holds with negative c2 also holds with c2 = 0.
    """
    Kv = np.asarray(K_values, float)
    av = np.asarray(averages, float)
    if Kv.size < 2 or np.ptp(Kv) == 0:
        raise ValidationError("need at least two distinct K values to fit")
    A = np.stack([Kv, -np.ones_like(Kv)], axis=1)
    (c1, c2_ls), *_ = np.linalg.lstsq(A, av, rcond=None)
    c2 = max(float(c2_ls), float(np.max(c1 * Kv - av)), 0.0)
    return LowerBoundFit(float(c1), c2, float(c2_ls), int(Kv.size))


def fit_test_family(family: list[TestFunction]) -> LowerBoundFit:
    Ks, avgs = [], []
    for tf in family:
        for Q, a in tf.averages_2Q.items():
            Ks.append(tf.K_2Q[Q])
            avgs.append(a)
    return fit_lower_bound(Ks, avgs)


@dataclass
class Decomposition:
    Q: Cube
    f1: float
    f2: np.ndarray
    f3: np.ndarray
    b2: float
    b3: float
    Tf2: np.ndarray
    Tf3: np.ndarray

    def identity_error(self, f) -> float:
        return float(np.max(np.abs(self.f1 + self.f2 + self.f3 - np.asarray(f))))


def decompose(mu: AtomicMeasure, f, f2Q_constant: float, Q: Cube, T: np.ndarray) -> Decomposition:
    """f = f_{2Q} + (f - f_{2Q}) 1_{2Q} + (f - f_{2Q}) 1_{outside 2Q}.

    ``T`` is the dense matrix of a truncated operator.  b2 = 0 and b3 is the
    mu-average over Q of T f3.
    """
    v = as_values(mu, f)
    in_Q = inside_mask(mu, Q.center, Q.half_side)
    mQ = math.fsum(mu.weights[in_Q])
    if mQ <= 0:
        raise ZeroMassCube("cube carries no mass")
    in_2Q = inside_mask(mu, Q.center, 2 * Q.half_side)
    g = v - f2Q_constant
    f2 = np.where(in_2Q, g, 0.0)
    f3 = np.where(in_2Q, 0.0, g)
    Tf2 = T @ f2
    Tf3 = T @ f3
    b3 = math.fsum(mu.weights[in_Q] * Tf3[in_Q]) / mQ
    return Decomposition(Q, float(f2Q_constant), f2, f3, 0.0, b3, Tf2, Tf3)


def two_q_family(family: CubeFamily) -> CubeFamily:
    return family.dilated(2.0)


def two_q_constants(mu: AtomicMeasure, f, family: CubeFamily, ktable: KTable | None = None) -> dict:
    """Constants f_{2Q} from the rho = 2 A-flavor witness on {2Q : Q in family}."""
    fam2 = two_q_family(family)
    w = seminorm_A(mu, f, fam2, 2.0, ktable)
    return {Q: w.constants[Q2] for Q, Q2 in zip(family, fam2)}


@dataclass
class LemmaReport:
    per_cube: dict
    max_ratio: float
    median_ratio: float

    @property
    def stability(self) -> float:
        return self.max_ratio / self.median_ratio if self.median_ratio > 0 else math.inf


def _report(per: dict) -> LemmaReport:
    vals = list(per.values())
    return LemmaReport(per, max(vals, default=0.0), float(np.median(vals)) if vals else 0.0)


def lemma_osc_check(mu: AtomicMeasure, decomps: dict, norm: float) -> tuple[LemmaReport, LemmaReport]:
    """Q-averages of |T f_k - b_k| / ||f|| for k = 2, 3."""
    r2, r3 = {}, {}
    for Q, dec in decomps.items():
        idx = inside_mask(mu, Q.center, Q.half_side)
        mQ = math.fsum(mu.weights[idx])
        r2[Q] = math.fsum(mu.weights[idx] * np.abs(dec.Tf2[idx] - dec.b2)) / mQ / norm
        r3[Q] = math.fsum(mu.weights[idx] * np.abs(dec.Tf3[idx] - dec.b3)) / mQ / norm
    return _report(r2), _report(r3)


def lemma_K_check(mu: AtomicMeasure, decomps: dict, norm: float, ktable: KTable,
                  nested_pairs) -> tuple[LemmaReport, LemmaReport]:
    """|b_{k,Q} - b_{k,R}| / (||f|| K(Q, R)) over nested index pairs of ``ktable.cubes``."""
    cubes = ktable.cubes
    r2, r3 = {}, {}
    for i, j in nested_pairs:
        Q, R = cubes[i], cubes[j]
        if Q not in decomps or R not in decomps:
            continue
        k = ktable.K(i, j)
        r2[(Q, R)] = abs(decomps[Q].b2 - decomps[R].b2) / (norm * k)
        r3[(Q, R)] = abs(decomps[Q].b3 - decomps[R].b3) / (norm * k)
    return _report(r2), _report(r3)
