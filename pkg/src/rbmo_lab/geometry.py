"""
Axis-parallel l-infinity cubes and finite cube families anchored at atoms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import BadBeta, BadDilation, DegenerateCube, TopLevelTooSmall, ValidationError
from .measures import TIE_RTOL, AtomicMeasure, mass_of_cube

ANCHOR_POLICIES = ("atoms", "atoms+midpoints")


@dataclass(frozen=True)
class Cube:
    """Closed cube with sides parallel to the axes; ``side == 2 * half_side``."""

    center: tuple
    half_side: float

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(np.asarray(self.center, dtype=float)))
        if not all(np.isfinite(c)):
            raise ValidationError("cube center must be finite")
        if not self.half_side > 0:
            raise DegenerateCube(f"half-side must be positive, got {self.half_side}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_side", float(self.half_side))

    @classmethod
    def from_side(cls, center, side: float) -> "Cube":
        return cls(center, side / 2.0)

    @property
    def side(self) -> float:
        return 2.0 * self.half_side

    @property
    def dim(self) -> int:
        return len(self.center)

    def center_array(self) -> np.ndarray:
        return np.asarray(self.center)

    def dilate(self, alpha: float) -> "Cube":
        return dilate(self, alpha)

    def scaled(self, lam: float) -> "Cube":
        """Image under x -> lam * x."""
        return Cube(tuple(lam * c for c in self.center), lam * self.half_side)

    def translated(self, shift) -> "Cube":
        return Cube(tuple(np.asarray(self.center) + np.asarray(shift, dtype=float)),
                    self.half_side)

    def to_json(self) -> dict:
        return {"center": list(self.center), "half_side": self.half_side}

    @classmethod
    def from_json(cls, data: dict) -> "Cube":
        return cls(tuple(data["center"]), data["half_side"])


def dilate(Q: Cube, alpha: float) -> Cube:
    """Concentric dilation alpha * Q, alpha >= 1."""
    if not alpha >= 1:
        raise BadDilation(f"dilation factor must be >= 1, got {alpha}")
    return Cube(Q.center, Q.half_side * alpha)


def contains(R: Cube, Q: Cube) -> bool:
    """True iff Q is a subset of R as closed sets."""
    cq, cr = np.asarray(Q.center), np.asarray(R.center)
    tol = TIE_RTOL * (R.half_side + float(np.max(np.abs(cr))))
    return bool(np.all(np.abs(cq - cr) + Q.half_side <= R.half_side + tol))


@dataclass(frozen=True)
class CubeFamily:
    """Ordered, duplicate-free list of cubes on a dyadic side ladder."""

    cubes: tuple
    ladder_base: float
    levels: int
    anchor_policy: str = "atoms"

    def __len__(self) -> int:
        return len(self.cubes)

    def __iter__(self) -> Iterator[Cube]:
        return iter(self.cubes)

    def __getitem__(self, i) -> Cube:
        return self.cubes[i]

    def with_cubes(self, cubes: Sequence[Cube]) -> "CubeFamily":
        return CubeFamily(tuple(cubes), self.ladder_base, self.levels, self.anchor_policy)

    def dilated(self, alpha: float) -> "CubeFamily":
        return CubeFamily(tuple(dilate(Q, alpha) for Q in self.cubes),
                          self.ladder_base * alpha, self.levels, self.anchor_policy)

    def nested_pairs(self) -> list[tuple[int, int]]:
        """Index pairs (i, j), i != j, with cube i contained in cube j."""
        if not self.cubes:
            return []
        C = np.array([Q.center for Q in self.cubes])
        h = np.array([Q.half_side for Q in self.cubes])
        scale = np.max(np.abs(C), axis=1)
        pairs = []
        for i in range(len(self.cubes)):
            gap = np.max(np.abs(C - C[i]), axis=1) + h[i]
            ok = gap <= h + TIE_RTOL * (h + scale)
            ok[i] = False
            pairs.extend((i, int(j)) for j in np.flatnonzero(ok))
        return pairs

    def to_json(self) -> dict:
        return {"ladder_base": self.ladder_base, "levels": self.levels,
                "anchor_policy": self.anchor_policy,
                "cubes": [Q.to_json() for Q in self.cubes]}


def _anchor_points(mu: AtomicMeasure, anchor_policy: str, anchors) -> np.ndarray:
    pts = mu.points if anchors is None else mu.points[np.asarray(anchors, dtype=int)]
    if anchor_policy == "atoms":
        return pts
    if anchor_policy == "atoms+midpoints":
        if len(pts) < 2:
            return pts
        mids = 0.5 * (pts[:-1] + pts[1:])
        return np.concatenate([pts, mids])
    raise ValidationError(f"unknown anchor policy {anchor_policy!r}")


def build_family(mu: AtomicMeasure, ladder_base: float, levels: int,
                 anchor_policy: str = "atoms", anchors=None) -> CubeFamily:
    """One cube per (anchor, level) with sides ``ladder_base * 2**k``, k < levels.

    ``anchors`` optionally restricts the centers to a subset of atom indices.
    Raises :class:`TopLevelTooSmall` unless some top-level cube covers every atom.
    """
    if not ladder_base > 0:
        raise ValidationError("ladder_base must be positive")
    if levels < 1:
        raise ValidationError("levels must be >= 1")
    centers = _anchor_points(mu, anchor_policy, anchors)
    top_half = ladder_base * 2 ** (levels - 1) / 2
    covers = [np.all(mu.distances_from(c) <= top_half * (1 + TIE_RTOL)) for c in centers]
    if not any(covers):
        raise TopLevelTooSmall(
            f"top ladder side {2 * top_half:g} does not cover the support "
            f"(diameter {mu.diameter():g}) from any anchor; add a level")
    seen = set()
    cubes = []
    for c in centers:
        for k in range(levels):
            Q = Cube.from_side(tuple(c), ladder_base * 2 ** k)
            if Q not in seen:
                seen.add(Q)
                cubes.append(Q)
    return CubeFamily(tuple(cubes), float(ladder_base), int(levels), anchor_policy)


def default_beta(alpha: float, n: float) -> float:
    return 2.0 * alpha ** n


def check_doubling_params(alpha: float, beta: float, n: float) -> None:
    if not alpha > 1:
        raise BadDilation(f"doubling needs alpha > 1, got {alpha}")
    if not beta > alpha ** n:
        raise BadBeta(f"beta={beta} must exceed alpha^n={alpha ** n:g}")


def is_doubling(mu: AtomicMeasure, Q: Cube, alpha: float = 10.0, beta: float | None = None) -> bool:
    """mu(alpha Q) < beta mu(Q); massless cubes are never doubling."""
    if beta is None:
        beta = default_beta(alpha, mu.growth_dim)
    check_doubling_params(alpha, beta, mu.growth_dim)
    inner = mass_of_cube(mu, Q)
    if inner <= 0:
        return False
    return mass_of_cube(mu, dilate(Q, alpha)) < beta * inner


def doubling_subfamily(mu: AtomicMeasure, family: CubeFamily, alpha: float = 10.0,
                       beta: float | None = None) -> CubeFamily:
    """Order-preserving filter of ``family`` down to its (alpha, beta)-doubling cubes."""
    if beta is None:
        beta = default_beta(alpha, mu.growth_dim)
    check_doubling_params(alpha, beta, mu.growth_dim)
    return family.with_cubes([Q for Q in family if is_doubling(mu, Q, alpha, beta)])
