"""Finite-box grid functions and lattice sets.

A GridFunction is a real function on Z^d supported on a box (zero outside,
never periodic).  A LatticeSet is a subset of a box held as a bit mask.
Boxes are a lower corner plus per-axis extents; the cube helper centers a
side-N cube as the half-open [-N/2, N/2)^d so kernel conventions line up.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence, Tuple

import numpy as np

from .errors import PreconditionError

Point = Tuple[int, ...]


@dataclass(frozen=True)
class Box:
    lower: Tuple[int, ...]
    extents: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(int(c) for c in self.lower))
        object.__setattr__(self, "extents", tuple(int(c) for c in self.extents))
        if len(self.lower) != len(self.extents):
            raise PreconditionError("lower and extents must have equal length")
        if any(e < 1 for e in self.extents):
            raise PreconditionError("extents must be positive")

    @classmethod
    def cube(cls, side: int, dim: int) -> "Box":
        if side < 1 or dim < 1:
            raise PreconditionError("cube needs side >= 1 and dim >= 1")
        return cls((-(side // 2),) * dim, (side,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def size(self) -> int:
        out = 1
        for e in self.extents:
            out *= e
        return out

    @property
    def upper(self) -> Tuple[int, ...]:
        """Exclusive upper corner."""
        return tuple(lo + e for lo, e in zip(self.lower, self.extents))

    def side(self) -> int:
        sides = set(self.extents)
        if len(sides) != 1:
            raise PreconditionError("box is not a cube")
        return sides.pop()

    def contains(self, point: Sequence[int]) -> bool:
        return all(
            lo <= c < lo + e for c, lo, e in zip(point, self.lower, self.extents)
        )

    def index(self, point: Sequence[int]) -> Tuple[int, ...]:
        return tuple(c - lo for c, lo in zip(point, self.lower))

    def points(self) -> Iterator[Point]:
        for idx in np.ndindex(*self.extents):
            yield tuple(i + lo for i, lo in zip(idx, self.lower))

    def axis_coords(self, axis: int) -> np.ndarray:
        return np.arange(self.lower[axis], self.lower[axis] + self.extents[axis])

    def shrink(self, margin: int) -> "Box":
        """The sub-box at distance >= margin from every face."""
        if any(e <= 2 * margin for e in self.extents):
            raise PreconditionError(f"margin {margin} leaves an empty box")
        return Box(
            tuple(lo + margin for lo in self.lower),
            tuple(e - 2 * margin for e in self.extents),
        )


def _gather(values: np.ndarray, box: Box, pts: np.ndarray, fill=0.0) -> np.ndarray:
    """Vectorized lookup with zero extension outside the box."""
    pts = np.asarray(pts)
    idx = pts - np.asarray(box.lower)
    ext = np.asarray(box.extents)
    valid = ((idx >= 0) & (idx < ext)).all(axis=-1)
    out = np.full(pts.shape[:-1], fill, dtype=values.dtype)
    if valid.any():
        sel = idx[valid]
        out[valid] = values[tuple(sel.T)]
    return out


@dataclass
class GridFunction:
    """Dense real (or complex) function on a box, identically zero outside."""

    box: Box
    values: np.ndarray
    tag: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.box.extents:
            raise PreconditionError(
                f"values shape {self.values.shape} != box extents {self.box.extents}"
            )

    @classmethod
    def zeros(cls, box: Box) -> "GridFunction":
        return cls(box, np.zeros(box.extents))

    @classmethod
    def constant(cls, box: Box, c: float) -> "GridFunction":
        return cls(box, np.full(box.extents, float(c)))

    @classmethod
    def from_callable(cls, box: Box, fn: Callable[[Point], float]) -> "GridFunction":
        vals = np.empty(box.extents)
        for p in box.points():
            vals[box.index(p)] = fn(p)
        return cls(box, vals)

    def value_at(self, point: Sequence[int]) -> float:
        if not self.box.contains(point):
            return 0.0
        return self.values[self.box.index(point)]

    def sample(self, pts: np.ndarray) -> np.ndarray:
        return _gather(self.values, self.box, pts)

    def l2_norm(self) -> float:
        return float(np.sqrt((np.abs(self.values) ** 2).sum()))

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def scaled(self, c: float) -> "GridFunction":
        return GridFunction(self.box, self.values * c, self.tag)

    def shifted(self, t: Sequence[int]) -> "GridFunction":
        """The translate x -> f(x - t), i.e. the box moves by +t."""
        new_lower = tuple(lo + int(ti) for lo, ti in zip(self.box.lower, t))
        return GridFunction(Box(new_lower, self.box.extents), self.values, self.tag)


@dataclass
class LatticeSet:
    """Subset of a box as a dense bit mask."""

    box: Box
    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.box.extents:
            raise PreconditionError(
                f"mask shape {self.mask.shape} != box extents {self.box.extents}"
            )

    @classmethod
    def full(cls, box: Box) -> "LatticeSet":
        return cls(box, np.ones(box.extents, dtype=bool))

    @classmethod
    def empty(cls, box: Box) -> "LatticeSet":
        return cls(box, np.zeros(box.extents, dtype=bool))

    @classmethod
    def from_points(cls, box: Box, pts: Sequence[Sequence[int]]) -> "LatticeSet":
        mask = np.zeros(box.extents, dtype=bool)
        for p in pts:
            if box.contains(p):
                mask[box.index(p)] = True
        return cls(box, mask)

    # pinned_count and friends duck-type on these two:
    @property
    def lower(self) -> Tuple[int, ...]:
        return self.box.lower

    @property
    def extents(self) -> Tuple[int, ...]:
        return self.box.extents

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def contains(self, point: Sequence[int]) -> bool:
        return self.box.contains(point) and bool(self.mask[self.box.index(point)])

    def contains_many(self, pts: np.ndarray) -> np.ndarray:
        return _gather(self.mask, self.box, pts, fill=False)

    def density(self) -> Fraction:
        return Fraction(self.count, self.box.size)

    def indicator(self) -> GridFunction:
        return GridFunction(self.box, self.mask.astype(np.float64))

    def points(self) -> np.ndarray:
        idx = np.argwhere(self.mask)
        return idx + np.asarray(self.box.lower)

    def intersect(self, other: "LatticeSet") -> "LatticeSet":
        if other.box != self.box:
            raise PreconditionError("set intersection needs a shared box")
        return LatticeSet(self.box, self.mask & other.mask)

    def union(self, other: "LatticeSet") -> "LatticeSet":
        if other.box != self.box:
            raise PreconditionError("set union needs a shared box")
        return LatticeSet(self.box, self.mask | other.mask)
