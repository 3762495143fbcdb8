"""
Finite atomic measures on R^m with a declared growth dimension n.

Every measure is stored as a weighted point cloud.  Duplicate points are
merged at construction and the total mass is normalized to 1; the original
mass is kept in ``scale``.  All distances are l-infinity distances, and all
cubes are closed.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import DegenerateCube, EmptyFamily, ValidationError

if TYPE_CHECKING:
    from .geometry import Cube

# relative slack used when deciding whether a point sits on a cube boundary
TIE_RTOL = 1e-12
DEFAULT_GROWTH_CAP = 1e6


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finite positive measure sum_a w_a delta_{x_a}.

    Use :meth:`from_atoms` rather than the raw constructor; it merges
    duplicates and normalizes.
    """

    points: np.ndarray
    weights: np.ndarray
    growth_dim: float
    scale: float = 1.0
    label: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2 or pts.shape[0] != w.shape[0]:
            raise ValidationError("points must be (N, m) with one weight per point")
        if pts.shape[0] == 0:
            raise ValidationError("measure has no atoms")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("atom coordinates must be finite")
        if not np.all(w > 0):
            raise ValidationError("atom weights must be strictly positive")
        m = pts.shape[1]
        if not (0 < self.growth_dim <= m):
            raise ValidationError(f"growth dimension must lie in (0, {m}], got {self.growth_dim}")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_atoms(cls, points, weights, growth_dim: float, scale: float = 1.0,
                   label: str = "") -> "AtomicMeasure":
        """Merge duplicate points, normalize to unit mass and build the measure."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] == 1 and np.ndim(points) == 1:
            pts = pts.T
        w = np.asarray(weights, dtype=float).ravel()
        if pts.shape[0] != w.shape[0]:
            raise ValidationError("one weight per point required")
        if np.any(w <= 0):
            raise ValidationError("atom weights must be strictly positive")
        uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
        merged = np.bincount(inverse.ravel(), weights=w, minlength=uniq.shape[0])
        total = math.fsum(merged)
        return cls(uniq, merged / total, float(growth_dim), scale * total, label)

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.points.shape[0]

    @property
    def total_mass(self) -> float:
        return math.fsum(self.weights)

    def distances_from(self, x) -> np.ndarray:
        """l-infinity distance from ``x`` to every atom."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return np.max(np.abs(self.points - x), axis=1)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)

    def diameter(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.max(hi - lo))

    def min_gap(self) -> float:
        """Smallest l-infinity distance between distinct atoms (inf for one atom)."""
        if self.n_atoms < 2:
            return math.inf
        if self.ambient_dim == 1:
            return float(np.min(np.diff(self.points[:, 0])))
        best = math.inf
        for i in range(self.n_atoms - 1):
            d = np.max(np.abs(self.points[i + 1:] - self.points[i]), axis=1)
            best = min(best, float(d.min()))
        return best

    def resolution(self) -> dict:
        """Discretization metadata attached to every report."""
        return {"n_atoms": self.n_atoms, "min_gap": self.min_gap(),
                "diameter": self.diameter()}

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.points).tobytes())
        h.update(np.ascontiguousarray(self.weights).tobytes())
        h.update(repr(float(self.growth_dim)).encode())
        return h.hexdigest()

    def dilated(self, lam: float) -> "AtomicMeasure":
        """Push-forward under x -> lam * x (same weights)."""
        return AtomicMeasure(self.points * lam, self.weights.copy(), self.growth_dim,
                             self.scale, self.label)

    def to_json(self) -> dict:
        return {
            "m": self.ambient_dim,
            "n": self.growth_dim,
            "scale": self.scale,
            "atoms": [{"x": p.tolist(), "w": float(w)}
                      for p, w in zip(self.points, self.weights)],
        }

    @classmethod
    def from_json(cls, data: dict) -> "AtomicMeasure":
        atoms = data["atoms"]
        m = int(data["m"])
        pts = np.array([a["x"] for a in atoms], dtype=float).reshape(len(atoms), m)
        w = np.array([a["w"] for a in atoms], dtype=float)
        return cls.from_atoms(pts, w, float(data["n"]), float(data.get("scale", 1.0)))


def read_measure(path) -> AtomicMeasure:
    return AtomicMeasure.from_json(json.loads(Path(path).read_text()))


def write_measure(mu: AtomicMeasure, path) -> None:
    Path(path).write_text(json.dumps(mu.to_json(), sort_keys=True))


def inside_mask(mu: AtomicMeasure, center, half_side: float) -> np.ndarray:
    """Boolean mask of atoms in the closed cube (boundary ties included)."""
    if not half_side > 0:
        raise DegenerateCube(f"half-side must be positive, got {half_side}")
    c = np.asarray(center, dtype=float)
    tol = TIE_RTOL * (half_side + float(np.max(np.abs(c))))
    return mu.distances_from(c) <= half_side + tol


def mass_of_cube(mu: AtomicMeasure, Q: "Cube") -> float:
    """mu(Q) for a closed l-infinity cube."""
    return float(mu.weights[inside_mask(mu, Q.center, Q.half_side)].sum())


@dataclass
class GrowthCertificate:
    constant: float
    divergent: bool
    witness_cube: "Cube | None"
    scanned_family_size: int
    cap: float = DEFAULT_GROWTH_CAP
    ratios: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "constant_C": None if self.divergent else self.constant,
            "sup_ratio": self.constant,
            "divergent": self.divergent,
            "witness_cube": None if self.witness_cube is None else self.witness_cube.to_json(),
            "scanned_family_size": self.scanned_family_size,
            "cap": self.cap,
        }


def growth_check(mu: AtomicMeasure, family: Iterable["Cube"],
                 cap: float = DEFAULT_GROWTH_CAP) -> GrowthCertificate:
    """Largest ratio mu(Q) / l(Q)^n over a finite family of cubes.

    The certificate is flagged divergent when some ratio exceeds ``cap``;
    the witness is then the first offending cube.
    """
    cubes = list(family)
    if not cubes:
        raise EmptyFamily("growth_check needs at least one cube")
    n = mu.growth_dim
    ratios = [mass_of_cube(mu, Q) / Q.side ** n for Q in cubes]
    for Q, r in zip(cubes, ratios):
        if r > cap:
            return GrowthCertificate(r, True, Q, len(cubes), cap, ratios)
    i = int(np.argmax(ratios))
    return GrowthCertificate(ratios[i], False, cubes[i], len(cubes), cap, ratios)


@lru_cache(maxsize=512)
def growth_constant(mu: AtomicMeasure, min_side: float) -> float:
    """Upper bound for mu(P) / l(P)^n over *all* cubes P with l(P) >= min_side.

    Measures are immutable, so results are memoized per (measure, min_side).

    In one dimension the value is the exact supremum: an interval can be
    slid right until its left end sits on an atom without losing mass, and
    then its length only matters at min_side or at the gap to another atom.

    In higher dimensions any cube P of side l that meets the support
    contains an atom a and lies in the cube about a with half-side l, so
    mu(P) <= F_a(l), where F_a(h) is the mass within distance h of a.  This
    bound can exceed the supremum by a factor up to 2^n.
    """
    if not min_side > 0:
        raise ValidationError("min_side must be positive")
    n = mu.growth_dim
    best = 0.0
    if mu.ambient_dim == 1:
        x = mu.points[:, 0]
        cum = np.concatenate([[0.0], np.cumsum(mu.weights)])
        for i in range(mu.n_atoms):
            ds = x[i:] - x[i]
            ell = np.maximum(ds, min_side)
            tol = TIE_RTOL * (ell + abs(x[i]))
            last = np.searchsorted(ds, ell + tol, side="right")
            best = max(best, float(np.max((cum[i + last] - cum[i]) / ell ** n)))
        return best
    for i in range(mu.n_atoms):
        d = mu.distances_from(mu.points[i])
        order = np.argsort(d, kind="stable")
        ds = d[order]
        cum = np.cumsum(mu.weights[order])
        h = np.maximum(ds, min_side)
        last = np.searchsorted(ds, h * (1 + TIE_RTOL), side="right") - 1
        best = max(best, float(np.max(cum[last] / h ** n)))
    return best


def gen_lebesgue_grid(interval_box, atoms_per_side: int) -> AtomicMeasure:
    """Midpoint discretization of normalized Lebesgue measure on a box.

    ``interval_box`` is ``(lo, hi)`` or a sequence of such pairs, one per axis.
    """
    if atoms_per_side < 2:
        raise ValidationError("atoms_per_side must be at least 2")
    box = np.asarray(interval_box, dtype=float)
    if box.ndim == 1:
        box = box.reshape(1, 2)
    axes = []
    for lo, hi in box:
        if not hi > lo:
            raise ValidationError("empty interval in box")
        h = (hi - lo) / atoms_per_side
        axes.append(lo + h * (np.arange(atoms_per_side) + 0.5))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    m = box.shape[0]
    label = f"lebesgue:{atoms_per_side}" + (f"^{m}" if m > 1 else "")
    return AtomicMeasure.from_atoms(pts, w, float(m), label=label)


def cantor_centers(depth: int, ratio: float) -> np.ndarray:
    """Centers of the 2^depth construction intervals, in increasing order."""
    lefts = np.zeros(1)
    length = 1.0
    for _ in range(depth):
        new_len = length * ratio
        lefts = np.concatenate([lefts, lefts + length - new_len])
        length = new_len
    return np.sort(lefts) + length / 2


def gen_cantor(depth: int, ratio: float = 1 / 3) -> AtomicMeasure:
    """Equal-weight atoms at the depth-level intervals of a symmetric Cantor set."""
    if depth < 1:
        raise ValidationError("depth must be >= 1")
    if not 0 < ratio < 0.5:
        raise ValidationError("ratio must lie in (0, 1/2)")
    pts = cantor_centers(depth, ratio)
    n = math.log(2) / math.log(1 / ratio)
    return AtomicMeasure.from_atoms(pts.reshape(-1, 1), np.full(pts.size, 2.0 ** -depth), n,
                                    label=f"cantor:{depth}:{ratio:g}")


def point_masses(points: Sequence, weights: Sequence, growth_dim: float = 1.0) -> AtomicMeasure:
    """Convenience wrapper for small hand-written measures."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    return AtomicMeasure.from_atoms(pts, weights, growth_dim)
