"""Exact integer geometry: vectors, simplices, Gram matrices, isometry tests.

Everything in this module is pure integer arithmetic.  Vectors are plain
tuples of ints, a simplex is its nonzero vertices (the origin is always an
implicit vertex), and radii are kept as squared lengths so that irrational
lengths sqrt(n) never meet floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence, Tuple

from .errors import PreconditionError

Vec = Tuple[int, ...]


def dot(u: Sequence[int], v: Sequence[int]) -> int:
    if len(u) != len(v):
        raise PreconditionError(f"dimension mismatch: {len(u)} vs {len(v)}")
    return sum(a * b for a, b in zip(u, v))


def norm_sq(v: Sequence[int]) -> int:
    return sum(a * a for a in v)


def bareiss_det(rows: Sequence[Sequence[int]]) -> int:
    """Exact determinant of an integer matrix by fraction-free elimination."""
    n = len(rows)
    if n == 0:
        return 1
    m = [list(r) for r in rows]
    sign = 1
    prev = 1
    for c in range(n - 1):
        if m[c][c] == 0:
            for r in range(c + 1, n):
                if m[r][c] != 0:
                    m[c], m[r] = m[r], m[c]
                    sign = -sign
                    break
            else:
                return 0
        for r in range(c + 1, n):
            for j in range(c + 1, n):
                # Bareiss step: exact division, intermediate values stay integral
                m[r][j] = (m[r][j] * m[c][c] - m[r][c] * m[c][j]) // prev
            m[r][c] = 0
        prev = m[c][c]
    return sign * m[n - 1][n - 1]


def leading_minors(rows: Sequence[Sequence[int]]) -> list[int]:
    """Determinants of the top-left 1x1 .. nxn blocks, exact integers."""
    n = len(rows)
    return [bareiss_det([r[: i + 1] for r in rows[: i + 1]]) for i in range(n)]


@dataclass(frozen=True)
class Simplex:
    """A lattice k-simplex {0, v_1, ..., v_k} in Z^d, given by its vertex rows."""

    dim: int
    vertices: Tuple[Vec, ...]

    def __post_init__(self):
        if self.dim < 1:
            raise PreconditionError("dimension must be >= 1")
        if not self.vertices:
            raise PreconditionError("need at least one nonzero vertex")
        verts = tuple(tuple(int(c) for c in v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        for v in verts:
            if len(v) != self.dim:
                raise PreconditionError(
                    f"vertex {v} has length {len(v)}, expected {self.dim}"
                )
        if len(verts) > self.dim:
            raise PreconditionError("more vertices than ambient dimension")

    @property
    def k(self) -> int:
        return len(self.vertices)

    @cached_property
    def gram(self) -> Tuple[Tuple[int, ...], ...]:
        vs = self.vertices
        return tuple(
            tuple(dot(vs[i], vs[j]) for j in range(self.k)) for i in range(self.k)
        )

    @cached_property
    def is_nondegenerate(self) -> bool:
        return all(m > 0 for m in leading_minors(self.gram))

    def max_vertex_norm_sq(self) -> int:
        return max(self.gram[i][i] for i in range(self.k))


def gram_matrix(simplex: Simplex) -> Tuple[Tuple[int, ...], ...]:
    return simplex.gram


def is_nondegenerate(simplex: Simplex) -> bool:
    return simplex.is_nondegenerate


def is_isometric(tup: Sequence[Sequence[int]], simplex: Simplex, lambda_sq: int) -> bool:
    """Whether (y_1..y_k) realizes the simplex at scale lambda: y_i.y_j = lambda^2 t_ij."""
    if len(tup) != simplex.k:
        raise PreconditionError(f"tuple length {len(tup)} != k = {simplex.k}")
    for y in tup:
        if len(y) != simplex.dim:
            raise PreconditionError("tuple vector has wrong dimension")
    t = simplex.gram
    for i in range(simplex.k):
        for j in range(i, simplex.k):
            if dot(tup[i], tup[j]) != lambda_sq * t[i][j]:
                return False
    return True


def is_isometric_distances(
    tup: Sequence[Sequence[int]], simplex: Simplex, lambda_sq: int
) -> bool:
    """Same predicate through squared pairwise distances, origin included.

    Kept as a genuinely separate code path from is_isometric; the two must
    agree everywhere (they are related by polarization).
    """
    if len(tup) != simplex.k:
        raise PreconditionError(f"tuple length {len(tup)} != k = {simplex.k}")
    zero = (0,) * simplex.dim
    ys = [zero] + [tuple(y) for y in tup]
    vs = [zero] + list(simplex.vertices)
    for y in tup:
        if len(y) != simplex.dim:
            raise PreconditionError("tuple vector has wrong dimension")
    for i in range(len(ys)):
        for j in range(i + 1, len(ys)):
            dy = norm_sq([a - b for a, b in zip(ys[i], ys[j])])
            dv = norm_sq([a - b for a, b in zip(vs[i], vs[j])])
            if dy != lambda_sq * dv:
                return False
    return True


def admissible_radii(lambda_sq_max: int, simplex: "Simplex | None" = None) -> list[int]:
    """All squared radii 1..lambda_sq_max.

    Every integer scale is admissible when the Gram matrix is integral, so the
    simplex argument only exists for interface symmetry.
    """
    if lambda_sq_max < 0:
        raise PreconditionError("lambda_sq_max must be >= 0")
    return list(range(1, lambda_sq_max + 1))


def radius_length(lambda_sq: int) -> float:
    """Float length of a stored squared radius, for reporting only."""
    return math.sqrt(lambda_sq)


def orthonormal_simplex(dim: int, k: int) -> Simplex:
    """The preset simplex {0, e_1, ..., e_k} in Z^dim."""
    if not 1 <= k <= dim:
        raise PreconditionError(f"need 1 <= k <= dim, got k={k}, dim={dim}")
    verts = []
    for i in range(k):
        v = [0] * dim
        v[i] = 1
        verts.append(tuple(v))
    return Simplex(dim, tuple(verts))


def parse_simplex(descriptor: str, dim: int) -> Simplex:
    """Parse a simplex descriptor.

    Either the named preset ``e-orthonormal:k`` or an explicit matrix of
    vertex rows, rows separated by ';' and coordinates by ',', e.g.
    ``1,1,0;0,1,1`` for the Gram-[[2,1],[1,2]] pair in Z^3.
    """
    descriptor = descriptor.strip()
    if descriptor.startswith("e-orthonormal:"):
        try:
            k = int(descriptor.split(":", 1)[1])
        except ValueError as e:
            raise PreconditionError(f"bad preset descriptor {descriptor!r}") from e
        return orthonormal_simplex(dim, k)
    rows = []
    for row in descriptor.split(";"):
        row = row.strip()
        if not row:
            continue
        try:
            rows.append(tuple(int(c) for c in row.split(",")))
        except ValueError as e:
            raise PreconditionError(f"bad vertex row {row!r}") from e
    if not rows:
        raise PreconditionError("empty simplex descriptor")
    return Simplex(dim, tuple(rows))


def format_simplex(simplex: Simplex) -> str:
    return ";".join(",".join(str(c) for c in v) for v in simplex.vertices)
