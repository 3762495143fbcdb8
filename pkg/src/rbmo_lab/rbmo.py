"""
Family-restricted RBMO seminorms of functions sampled on atoms.

Both flavors are computed exactly (up to LP tolerance) by a small linear
program over the per-cube constants f_Q:

* ``E``: oscillation normalized by mu(Q), over doubling cubes only;
* ``A``: oscillation normalized by mu(rho Q), over every cube of the family.

In both cases |f_Q - f_R| <= C K(Q, R) is imposed on every nested pair of
the family.  The infimum over all cubes of R^m is replaced by the finite
family, so values are lower bounds for the true seminorms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._lp import residuals, solve_minimax
from .coefficients import KTable
from .errors import EmptyFamily, ValidationError, ZeroMassCube
from .geometry import Cube, CubeFamily, dilate
from .measures import AtomicMeasure, inside_mask, mass_of_cube


@dataclass
class SampledFunction:
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValidationError("sampled function has non-finite values")
        self.values = v

    def __len__(self):
        return self.values.size


def as_values(mu: AtomicMeasure, f) -> np.ndarray:
    v = f.values if isinstance(f, SampledFunction) else np.asarray(f, dtype=float).ravel()
    if v.size != mu.n_atoms:
        raise ValidationError(f"expected {mu.n_atoms} samples, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("sampled function has non-finite values")
    return v


@dataclass
class SeminormWitness:
    seminorm: float
    constants: dict
    flavor: str
    rho: float | None
    family_id: str
    lp_value: float = 0.0
    osc_residuals: list = field(default_factory=list)
    k_residuals: list = field(default_factory=list)
    family_restricted: bool = True

    def constant_array(self, family) -> np.ndarray:
        return np.array([self.constants[Q] for Q in family])

    def to_json(self) -> dict:
        return {
            "seminorm": self.seminorm,
            "flavor": self.flavor,
            "rho": self.rho,
            "family_id": self.family_id,
            "family_restricted": self.family_restricted,
            "constants": [{"cube": Q.to_json(), "f_Q": float(v)} for Q, v in self.constants.items()],
            "residuals": {"oscillation": [float(x) for x in self.osc_residuals],
                          "K": [float(x) for x in self.k_residuals]},
        }


def family_id(family) -> str:
    import hashlib
    h = hashlib.sha256()
    for Q in family:
        h.update(repr((Q.center, Q.half_side)).encode())
    return h.hexdigest()[:16]


@dataclass
class _Assembly:
    members: list
    denoms: np.ndarray
    pairs: list
    bounds: np.ndarray


def _assemble(mu: AtomicMeasure, family, rho: float | None, ktable: KTable | None) -> _Assembly:
    cubes = list(family)
    if not cubes:
        raise EmptyFamily("seminorm needs a nonempty cube family")
    members = [np.flatnonzero(inside_mask(mu, Q.center, Q.half_side)) for Q in cubes]
    if rho is None:
        denoms = np.array([math.fsum(mu.weights[idx]) for idx in members])
        if np.any(denoms <= 0):
            raise ZeroMassCube("every cube must carry positive mass")
    else:
        denoms = np.array([mass_of_cube(mu, dilate(Q, rho)) for Q in cubes])
        # an empty rho Q forces an empty Q, whose constraint is vacuous
        denoms = np.where(denoms > 0, denoms, 1.0)
    fam = family if isinstance(family, CubeFamily) else CubeFamily(tuple(cubes), 0.0, 0)
    pairs = fam.nested_pairs()
    kt = ktable if ktable is not None else KTable(mu, cubes)
    bounds = np.array([kt.K(i, j) for i, j in pairs])
    return _Assembly(members, denoms, pairs, bounds)


def _witness(mu, f, family, rho, ktable, flavor) -> SeminormWitness:
    values = as_values(mu, f)
    asm = _assemble(mu, family, rho, ktable)
    sol = solve_minimax(values, mu.weights, asm.members, asm.denoms, asm.pairs, asm.bounds)
    cubes = list(family)
    return SeminormWitness(
        seminorm=sol.value,
        constants={Q: float(c) for Q, c in zip(cubes, sol.constants)},
        flavor=flavor,
        rho=rho,
        family_id=family_id(cubes),
        lp_value=sol.lp_value,
        osc_residuals=sol.osc_residuals.tolist(),
        k_residuals=sol.pair_residuals.tolist(),
    )


def seminorm_E(mu: AtomicMeasure, f, doubling_family, ktable: KTable | None = None) -> SeminormWitness:
    """Oscillation over mu(Q) on doubling cubes, K-condition on nested pairs."""
    return _witness(mu, f, doubling_family, None, ktable, "E")


def seminorm_A(mu: AtomicMeasure, f, family, rho: float, ktable: KTable | None = None) -> SeminormWitness:
    """Oscillation over mu(rho Q) on every cube of ``family``."""
    if not rho > 1:
        raise ValidationError("rho must exceed 1")
    return _witness(mu, f, family, float(rho), ktable, "A")


def witness_residuals(mu: AtomicMeasure, f, family, constants, rho: float | None = None,
                      ktable: KTable | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Oscillation and K residuals of arbitrary constants {f_Q} on ``family``.

    ``constants`` is a mapping cube -> value or an array aligned with the family.
    """
    values = as_values(mu, f)
    asm = _assemble(mu, family, rho, ktable)
    if isinstance(constants, dict):
        c = np.array([constants[Q] for Q in family], dtype=float)
    else:
        c = np.asarray(constants, dtype=float)
    return residuals(values, mu.weights, asm.members, asm.denoms, asm.pairs, asm.bounds, c)


def l1_norm(mu: AtomicMeasure, f) -> float:
    return math.fsum(mu.weights * np.abs(as_values(mu, f)))


def norm_star(mu: AtomicMeasure, f, doubling_family, ktable: KTable | None = None) -> float:
    """||f||_* = seminorm_E(f) + ||f||_{L^1(mu)}."""
    return seminorm_E(mu, f, doubling_family, ktable).seminorm + l1_norm(mu, f)


@dataclass
class EquivalenceReport:
    rows: list
    min_ratio: float
    max_ratio: float
    skipped: list

    def to_json(self) -> dict:
        return {"rows": self.rows, "min_ratio": self.min_ratio,
                "max_ratio": self.max_ratio, "skipped": self.skipped}


def equivalence_probe(mu: AtomicMeasure, basket: dict, family: CubeFamily, rho: float,
                      doubling_family: CubeFamily, tol: float = 1e-12) -> EquivalenceReport:
    """Ratios seminorm_E / seminorm_A over a basket of sampled functions.

    Functions whose two seminorms both vanish (constants) are skipped.
    """
    if not basket:
        raise ValidationError("basket must be nonempty")
    kt_e = KTable(mu, doubling_family)
    kt_a = KTable(mu, family)
    rows, skipped = [], []
    for label, f in basket.items():
        e = seminorm_E(mu, f, doubling_family, kt_e).seminorm
        a = seminorm_A(mu, f, family, rho, kt_a).seminorm
        if e <= tol and a <= tol:
            skipped.append(label)
            continue
        rows.append({"label": label, "E": e, "A": a, "ratio": e / a if a > 0 else math.inf})
    ratios = [r["ratio"] for r in rows]
    return EquivalenceReport(rows, min(ratios, default=math.nan),
                             max(ratios, default=math.nan), skipped)
