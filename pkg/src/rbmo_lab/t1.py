"""
Condition (ii) of the T1 characterization on a finite doubling family.

For every doubling Q we look for b_Q with

    (1/mu(Q)) sum_{a in Q} w_a |T1(a) - b_Q| <= C / K(Q)
    |b_Q - b_R| <= C K(Q, R) / K(Q)          for nested doubling Q in R

and report the least such C, per truncation eps and as a supremum over the
eps grid.  :func:`construct_b_from_phi` builds explicit candidates b_Q from
the test functions instead of solving for them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._lp import residuals, solve_minimax
from .coefficients import KTable
from .errors import EmptyFamily, NoEligibleCubes, ValidationError
from .geometry import Cube, CubeFamily
from .measures import AtomicMeasure, inside_mask
from .operators import (KernelSpec, TruncationGrid, cancellation_check, dyadic_annuli,
                        truncated_matrix)
from .rbmo import as_values, norm_star, seminorm_A, seminorm_E
from .testfn import (LowerBoundFit, TestFunction, build_test_family, decompose,
                     fit_test_family, two_q_family)

log = logging.getLogger(__name__)


@dataclass
class _CondII:
    members: list
    denoms: np.ndarray
    pairs: list
    bounds: np.ndarray
    K_Q: np.ndarray
    K_QR: np.ndarray


def _cond_ii_data(mu: AtomicMeasure, family: CubeFamily, ktable: KTable | None) -> _CondII:
    cubes = list(family)
    if not cubes:
        raise EmptyFamily("condition (ii) needs a nonempty doubling family")
    kt = ktable if ktable is not None else KTable(mu, cubes)
    members = [np.flatnonzero(inside_mask(mu, Q.center, Q.half_side)) for Q in cubes]
    mass = np.array([math.fsum(mu.weights[idx]) for idx in members])
    if np.any(mass <= 0):
        raise ValidationError("every doubling cube must carry mass")
    K_Q = np.array([kt.K_of(i) for i in range(len(cubes))])
    fam = family if isinstance(family, CubeFamily) else CubeFamily(tuple(cubes), 0.0, 0)
    pairs = fam.nested_pairs()
    K_QR = np.array([kt.K(i, j) for i, j in pairs])
    bounds = np.array([kqr / K_Q[i] for (i, _), kqr in zip(pairs, K_QR)])
    return _CondII(members, mass / K_Q, pairs, bounds, K_Q, K_QR)


@dataclass
class EpsCertificate:
    epsilon: float
    best_C: float
    lp_value: float
    constants: np.ndarray
    osc_residuals: np.ndarray
    pair_residuals: np.ndarray


@dataclass
class T1Certificate:
    """Least condition-(ii) constant over a finite doubling family.

    ``constants`` and the residual arrays belong to the eps attaining the
    supremum; ``per_eps`` keeps every solve.
    """

    cubes: list
    pairs: list
    K_Q: np.ndarray
    K_QR: np.ndarray
    best_C: float
    epsilon_grid: TruncationGrid | None
    per_eps: list = field(default_factory=list)
    sup_over_eps: bool = True
    warnings: list = field(default_factory=list)

    @property
    def worst(self) -> EpsCertificate:
        return max(self.per_eps, key=lambda e: e.best_C)

    @property
    def constants(self) -> dict:
        return {Q: float(b) for Q, b in zip(self.cubes, self.worst.constants)}

    def to_json(self) -> dict:
        out = []
        for e in self.per_eps:
            out.append({
                "epsilon": e.epsilon,
                "best_C": e.best_C,
                "cubes": [{"cube": Q.to_json(), "K": float(k), "b_Q": float(b), "osc_residual": float(r)}
                          for Q, k, b, r in zip(self.cubes, self.K_Q, e.constants, e.osc_residuals)],
                "pairs": [{"Q": self.cubes[i].to_json(), "R": self.cubes[j].to_json(),
                           "K_QR": float(kqr), "diff_residual": float(r)}
                          for (i, j), kqr, r in zip(self.pairs, self.K_QR, e.pair_residuals)],
            })
        return {"best_C": self.best_C, "sup_over_eps": self.sup_over_eps,
                "epsilon_grid": None if self.epsilon_grid is None else list(self.epsilon_grid),
                "warnings": list(self.warnings), "certificates": out}


def certify_condition_ii(mu: AtomicMeasure, t1_fields: dict, doubling_family: CubeFamily,
                         ktable: KTable | None = None) -> T1Certificate:
    """Solve for the least C and constants b_Q, one LP per truncation level.

    ``t1_fields`` maps eps to the sampled values of T_eps 1 on the atoms.
    """
    if not t1_fields:
        raise ValidationError("no T1 fields given")
    data = _cond_ii_data(mu, doubling_family, ktable)
    per_eps = []
    for eps in sorted(t1_fields):
        vals = as_values(mu, t1_fields[eps])
        sol = solve_minimax(vals, mu.weights, data.members, data.denoms, data.pairs, data.bounds)
        per_eps.append(EpsCertificate(float(eps), sol.value, sol.lp_value, sol.constants,
                                      sol.osc_residuals, sol.pair_residuals))
    grid = TruncationGrid(tuple(sorted(t1_fields)))
    best = max(e.best_C for e in per_eps)
    return T1Certificate(list(doubling_family), data.pairs, data.K_Q, data.K_QR, best, grid, per_eps)


def condition_ii_residuals(mu: AtomicMeasure, t1_values, doubling_family: CubeFamily, constants,
                           ktable: KTable | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-cube osc * K(Q) and per-pair |b_Q - b_R| K(Q) / K(Q, R) for given b_Q."""
    data = _cond_ii_data(mu, doubling_family, ktable)
    if isinstance(constants, dict):
        constants = np.array([constants[Q] for Q in doubling_family])
    return residuals(as_values(mu, t1_values), mu.weights, data.members, data.denoms,
                     data.pairs, data.bounds, np.asarray(constants, float))


def recheck_certificate(mu: AtomicMeasure, cert: T1Certificate, t1_fields: dict,
                        doubling_family: CubeFamily) -> float:
    """Recompute the supremum of C from the exported b_Q alone."""
    best = 0.0
    for e in cert.per_eps:
        osc, diff = condition_ii_residuals(mu, t1_fields[e.epsilon], doubling_family, e.constants)
        best = max(best, float(osc.max(initial=0.0)), float(diff.max(initial=0.0)))
    return best


def certify_operator(mu: AtomicMeasure, kernel: KernelSpec, grid: TruncationGrid,
                     doubling_family: CubeFamily, cancellation_policy: str = "warn",
                     cancellation_cap: float = 10.0, probe_points=None) -> T1Certificate:
    """Evaluate T_eps 1 over ``grid`` and certify condition (ii).

    The cancellation hypothesis is probed at ``probe_points`` (default: up to
    five evenly spaced atoms); with policy ``"refuse"`` a failure raises.
    """
    if cancellation_policy not in ("warn", "refuse"):
        raise ValidationError("cancellation_policy must be 'warn' or 'refuse'")
    if probe_points is None:
        idx = np.unique(np.linspace(0, mu.n_atoms - 1, min(5, mu.n_atoms)).astype(int))
        probe_points = mu.points[idx]
    warnings = []
    for x in probe_points:
        res = cancellation_check(kernel, mu, x, dyadic_annuli(mu, x), cancellation_cap)
        if not res.passed:
            msg = (f"kernel {kernel.name} fails cancellation at {list(np.atleast_1d(x))}: "
                   f"{res.worst_abs:.4g} > cap {cancellation_cap:g}")
            if cancellation_policy == "refuse":
                raise ValidationError(msg)
            log.warning(msg)
            warnings.append(msg)
            break
    fields = {eps: truncated_matrix(mu, kernel, eps).sum(axis=1) for eps in grid}
    cert = certify_condition_ii(mu, fields, doubling_family)
    cert.epsilon_grid = grid
    cert.warnings = warnings
    return cert


@dataclass
class ConstructionRow:
    cube: Cube
    beta_Q: float
    b2_Q: float
    b3_Q: float
    gamma_Q: float
    phi_2Q: float
    b_Q: float
    K_2Q: float
    eligible: bool
    transfer_lhs: float
    transfer_rhs: float

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in ("beta_Q", "b2_Q", "b3_Q", "gamma_Q", "phi_2Q", "b_Q",
                                          "K_2Q", "eligible", "transfer_lhs", "transfer_rhs")}
        d["cube"] = self.cube.to_json()
        return d


@dataclass
class ConstructionResult:
    kernel: str
    epsilon: float
    rows: list
    threshold: float
    fit: LowerBoundFit
    plug_in_osc: np.ndarray
    plug_in_pairs: np.ndarray

    @property
    def eligible(self) -> list:
        return [r for r in self.rows if r.eligible]

    @property
    def excluded(self) -> list:
        return [r for r in self.rows if not r.eligible]

    @property
    def plug_in_C(self) -> float:
        return max(float(self.plug_in_osc.max(initial=0.0)), float(self.plug_in_pairs.max(initial=0.0)))

    @property
    def phi_lower_constant(self) -> float:
        """min |phi_2Q| / K(2Q) over eligible cubes."""
        return min((abs(r.phi_2Q) / r.K_2Q for r in self.eligible), default=math.nan)

    def max_transfer_gap(self) -> float:
        return max((abs(r.transfer_lhs - r.transfer_rhs) for r in self.eligible), default=0.0)

    def to_json(self) -> dict:
        return {"kernel": self.kernel, "epsilon": self.epsilon, "threshold": self.threshold,
                "fit": self.fit.to_json(), "plug_in_C": self.plug_in_C,
                "rows": [r.to_json() for r in self.rows]}


def construct_b_from_phi(mu: AtomicMeasure, kernel: KernelSpec, eps: float,
                         doubling_family: CubeFamily, test_family: list[TestFunction] | None = None,
                         fit: LowerBoundFit | None = None, k_min: float | None = None) -> ConstructionResult:
    """Candidate constants b_Q = (beta_Q - b2_Q - b3_Q) / phi_2Q.

    For each doubling Q with center x, phi = phi_x from the test family;
    beta_Q is the E-witness constant of T phi on Q, phi_2Q the rho = 2
    A-witness constant of phi on 2Q, and b3_Q comes from the three-term
    split of phi about Q.  Cubes with K(2Q) < ``k_min`` are marked
    ineligible (default threshold 2 (c2 + 1) / c1 from the test-family fit).
    """
    cubes = list(doubling_family)
    if not cubes:
        raise EmptyFamily("doubling family is empty")
    kt = KTable(mu, doubling_family)
    fam2 = two_q_family(doubling_family)
    kt2 = KTable(mu, fam2)
    centers = []
    for Q in cubes:
        if Q.center not in centers:
            centers.append(Q.center)
    if test_family is None:
        test_family = build_test_family(mu, [np.array(c) for c in centers], doubling_family, kt)
    by_center = {tf.base_point: tf for tf in test_family}
    if fit is None:
        fit = fit_test_family(test_family)
    threshold = fit.threshold() if k_min is None else float(k_min)

    T = truncated_matrix(mu, kernel, eps)
    T1 = T.sum(axis=1)
    rows = []
    for center in centers:
        tf = by_center[tuple(center)]
        phi = tf.values.values
        Tphi = T @ phi
        beta = seminorm_E(mu, Tphi, doubling_family, kt).constants
        a_wit = seminorm_A(mu, phi, fam2, 2.0, kt2).constants
        for Q, Q2 in zip(cubes, fam2):
            if Q.center != center:
                continue
            phi_2Q = a_wit[Q2]
            dec = decompose(mu, phi, phi_2Q, Q, T)
            gamma = beta[Q] - dec.b2 - dec.b3
            b_Q = gamma / phi_2Q
            idx = inside_mask(mu, Q.center, Q.half_side)
            w = mu.weights[idx]
            mQ = math.fsum(w)
            lhs = phi_2Q / mQ * math.fsum(w * np.abs(T1[idx] - b_Q))
            rhs = math.fsum(w * np.abs(Tphi[idx] - beta[Q] + dec.b2 - dec.Tf2[idx]
                                       + dec.b3 - dec.Tf3[idx])) / mQ
            K2 = tf.K_2Q[Q]
            eligible = K2 >= threshold and abs(phi_2Q) > 0
            rows.append(ConstructionRow(Q, beta[Q], dec.b2, dec.b3, gamma, phi_2Q, b_Q, K2,
                                 eligible, lhs, rhs))

    elig = [r for r in rows if r.eligible]
    if not elig:
        raise NoEligibleCubes(f"no doubling cube has K(2Q) >= {threshold:.4g}")
    sub = doubling_family.with_cubes([r.cube for r in elig])
    osc, pairs = condition_ii_residuals(mu, T1, sub, [r.b_Q for r in elig])
    return ConstructionResult(kernel.name, float(eps), rows, threshold, fit, osc, pairs)


@dataclass
class BoundednessReport:
    rows: list

    @property
    def sup_ratio(self) -> float:
        return max((r["ratio"] for r in self.rows), default=0.0)

    def to_json(self) -> dict:
        return {"sup_ratio": self.sup_ratio, "rows": self.rows}


def boundedness_probe(mu: AtomicMeasure, kernel: KernelSpec, basket: dict,
                      doubling_family: CubeFamily, grid: TruncationGrid) -> BoundednessReport:
    """norm_star(T_eps f) / norm_star(f) over a basket and a truncation grid.

    The supremum is only an empirical lower bound for the operator norm.
    """
    kt = KTable(mu, doubling_family)
    norms = {label: norm_star(mu, f, doubling_family, kt) for label, f in basket.items()}
    rows = []
    for eps in grid:
        T = truncated_matrix(mu, kernel, eps)
        for label, f in basket.items():
            if norms[label] == 0:
                continue
            Tf = T @ as_values(mu, f)
            ratio = norm_star(mu, Tf, doubling_family, kt) / norms[label]
            rows.append({"label": label, "epsilon": float(eps), "ratio": ratio})
    return BoundednessReport(rows)


def standard_basket(mu: AtomicMeasure, doubling_family: CubeFamily, seed: int = 0,
                    n_random: int = 2, n_phi: int = 2) -> dict:
    """Test functions, an indicator and random functions normalized to norm_star = 1."""
    rng = np.random.default_rng(seed)
    kt = KTable(mu, doubling_family)
    basket = {}
    lo, hi = mu.bounding_box()
    mid = 0.5 * (lo[0] + hi[0])
    basket["indicator_left"] = (mu.points[:, 0] <= mid).astype(float)
    idx = np.unique(np.linspace(0, mu.n_atoms - 1, n_phi + 2).astype(int)[1:-1])
    for tf in build_test_family(mu, idx, doubling_family, kt):
        basket[f"phi@{tf.base_point[0]:.6g}"] = tf.values.values
    for k in range(n_random):
        f = rng.standard_normal(mu.n_atoms)
        basket[f"random{k}"] = f / norm_star(mu, f, doubling_family, kt)
    return basket
