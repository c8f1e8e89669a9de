"""Enumeration of lattice spheres and simplex embedding sets.

The embedding set at scale lambda is every tuple (y_1..y_k) of lattice
vectors whose Gram matrix equals lambda^2 T, written matrix-style as
M^t M = lambda^2 T.  The search enumerates the first vector on its sphere
and completes the rest by coordinate descent, pruning on the remaining
quadratic budget and on a Cauchy-Schwarz feasibility bound for every
linear constraint against the vectors already fixed.

A brute-force oracle (plain box filtering with numpy, no shared pruning
code) backs the search in tests, and count mode exploits the signed
permutation symmetry of the sphere so large counts never touch tuples.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from .core import Simplex, Vec, is_isometric
from .errors import (
    CountOverflowError,
    MarginError,
    NoFitError,
    PreconditionError,
    ResourceLimitError,
)

_U64_MAX = 2**64 - 1


@dataclass
class SphereSet:
    dim: int
    lambda_sq: int
    points: list[Vec]

    @property
    def count(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        if not self.points:
            return np.zeros((0, self.dim), dtype=np.int64)
        return np.asarray(self.points, dtype=np.int64)


@dataclass
class EmbeddingSet:
    simplex: Simplex
    lambda_sq: int
    mode: str
    count: int
    nodes_visited: int
    tuples: Optional[list[Tuple[Vec, ...]]] = None


def sphere_points(dim: int, lambda_sq: int, *, max_points: Optional[int] = None) -> SphereSet:
    """All y in Z^dim with |y|^2 = lambda_sq, in lexicographic order."""
    if dim < 1:
        raise PreconditionError("dim must be >= 1")
    if lambda_sq < 0:
        raise PreconditionError("lambda_sq must be >= 0")
    isqrt = math.isqrt
    out: list[Vec] = []
    cur = [0] * dim

    def rec(i: int, budget: int) -> None:
        if i == dim - 1:
            r = isqrt(budget)
            if r * r != budget:
                return
            for v in ((0,) if r == 0 else (-r, r)):
                cur[i] = v
                out.append(tuple(cur))
            if max_points is not None and len(out) > max_points:
                raise ResourceLimitError(
                    f"sphere point cap {max_points} exceeded at d={dim}, lambda_sq={lambda_sq}"
                )
            return
        r = isqrt(budget)
        for v in range(-r, r + 1):
            cur[i] = v
            rec(i + 1, budget - v * v)

    rec(0, lambda_sq)
    return SphereSet(dim, lambda_sq, out)


def _orbit_reps(dim: int, n: int, step: int = 1) -> list[Tuple[Vec, int]]:
    """Representatives of signed-permutation orbits of the sphere |y|^2 = n.

    Each representative has nonincreasing nonnegative coordinates; returns
    (rep, orbit_size) pairs.  With step q > 1 only multiples of q appear.
    """
    isqrt = math.isqrt
    reps: list[Tuple[Vec, int]] = []
    cur: list[int] = []

    def orbit_size(rep: Sequence[int]) -> int:
        mult: dict[int, int] = {}
        nonzero = 0
        for a in rep:
            mult[a] = mult.get(a, 0) + 1
            if a:
                nonzero += 1
        size = math.factorial(dim)
        for m in mult.values():
            size //= math.factorial(m)
        return size * (1 << nonzero)

    def rec(pos: int, budget: int, prev: int) -> None:
        if pos == dim:
            if budget == 0:
                rep = tuple(cur)
                reps.append((rep, orbit_size(rep)))
            return
        if budget == 0:
            cur.extend([0] * (dim - pos))
            rep = tuple(cur)
            reps.append((rep, orbit_size(rep)))
            del cur[pos:]
            return
        hi = min(prev, isqrt(budget))
        hi -= hi % step
        for v in range(hi, -1, -step):
            if v == 0 and budget > 0:
                break
            cur.append(v)
            rec(pos + 1, budget - v * v, v)
            cur.pop()

    rec(0, n, isqrt(n))
    return reps


def _prefix_squares(vec: Sequence[int]) -> list[int]:
    """pref[c] = sum of vec[idx]^2 over idx < c."""
    pref = [0] * (len(vec) + 1)
    acc = 0
    for c, a in enumerate(vec):
        pref[c] = acc
        acc += a * a
    pref[len(vec)] = acc
    return pref


class _Nodes:
    __slots__ = ("n", "cap")

    def __init__(self, cap: Optional[int]):
        self.n = 0
        self.cap = cap

    def spend(self, amount: int = 1) -> None:
        self.n += amount
        if self.cap is not None and self.n > self.cap:
            raise ResourceLimitError(f"node cap {self.cap} exceeded")


def _count_completions(
    dim: int,
    n_target: int,
    prevs: Sequence[Vec],
    targets: Sequence[int],
    step: int,
    nodes: _Nodes,
) -> int:
    """Count z in Z^dim with |z|^2 = n_target and z . prevs[j] = targets[j].

    Coordinates are assigned from index dim-1 down to 0.
    """
    isqrt = math.isqrt
    nprev = len(prevs)
    prefs = [_prefix_squares(p) for p in prevs]
    cols = [tuple(p[c] for p in prevs) for c in range(dim)]
    pref_at = [tuple(prefs[j][c] for j in range(nprev)) for c in range(dim + 1)]

    def rec(c: int, budget: int, rems: Tuple[int, ...]) -> int:
        nodes.spend()
        pa = pref_at[c + 1]
        for j in range(nprev):
            if rems[j] * rems[j] > pa[j] * budget:
                return 0
        if c == 0:
            r = isqrt(budget)
            if r * r != budget or (step > 1 and r % step):
                return 0
            col = cols[0]
            cnt = 0
            for v in ((0,) if r == 0 else (-r, r)):
                if all(rems[j] == col[j] * v for j in range(nprev)):
                    cnt += 1
            return cnt
        col = cols[c]
        pa2 = pref_at[c]
        r = isqrt(budget)
        lo = -(r // step) * step
        cnt = 0
        for v in range(lo, r + 1, step):
            nodes.spend()
            b2 = budget - v * v
            for j in range(nprev):
                rem2 = rems[j] - col[j] * v
                if rem2 * rem2 > pa2[j] * b2:
                    break
            else:
                cnt += rec(c - 1, b2, tuple(rems[j] - col[j] * v for j in range(nprev)))
        return cnt

    return rec(dim - 1, n_target, tuple(targets))


def _list_completions(
    dim: int,
    n_target: int,
    prevs: Sequence[Vec],
    targets: Sequence[int],
    step: int,
    nodes: _Nodes,
) -> list[Vec]:
    isqrt = math.isqrt
    nprev = len(prevs)
    prefs = [_prefix_squares(p) for p in prevs]
    cols = [tuple(p[c] for p in prevs) for c in range(dim)]
    pref_at = [tuple(prefs[j][c] for j in range(nprev)) for c in range(dim + 1)]
    out: list[Vec] = []
    cur = [0] * dim

    def rec(c: int, budget: int, rems: Tuple[int, ...]) -> None:
        nodes.spend()
        pa = pref_at[c + 1]
        for j in range(nprev):
            if rems[j] * rems[j] > pa[j] * budget:
                return
        if c == 0:
            r = isqrt(budget)
            if r * r != budget or (step > 1 and r % step):
                return
            col = cols[0]
            for v in ((0,) if r == 0 else (-r, r)):
                if all(rems[j] == col[j] * v for j in range(nprev)):
                    cur[0] = v
                    out.append(tuple(cur))
            return
        col = cols[c]
        pa2 = pref_at[c]
        r = isqrt(budget)
        lo = -(r // step) * step
        for v in range(lo, r + 1, step):
            nodes.spend()
            b2 = budget - v * v
            for j in range(nprev):
                rem2 = rems[j] - col[j] * v
                if rem2 * rem2 > pa2[j] * b2:
                    break
            else:
                cur[c] = v
                rec(c - 1, b2, tuple(rems[j] - col[j] * v for j in range(nprev)))

    rec(dim - 1, n_target, tuple(targets))
    return out


def _processing_order(simplex: Simplex) -> list[int]:
    t = simplex.gram
    return sorted(range(simplex.k), key=lambda i: -t[i][i])


def _first_candidates(simplex: Simplex, lam_sq: int, order: Sequence[int], step: int) -> list[Vec]:
    n0 = lam_sq * simplex.gram[order[0]][order[0]]
    pts = sphere_points(simplex.dim, n0).points
    if step > 1:
        pts = [p for p in pts if all(c % step == 0 for c in p)]
    return pts


def _count_from_first(
    simplex: Simplex,
    lam_sq: int,
    order: Sequence[int],
    first: Vec,
    step: int,
    nodes: _Nodes,
) -> int:
    """Number of completions (z_2..z_k) once the first processed vector is fixed."""
    k = simplex.k
    t = simplex.gram
    if k == 1:
        return 1

    def level(m: int, prevs: list[Vec]) -> int:
        n_m = lam_sq * t[order[m]][order[m]]
        targets = [lam_sq * t[order[m]][order[j]] for j in range(m)]
        if m == k - 1:
            return _count_completions(simplex.dim, n_m, prevs, targets, step, nodes)
        total = 0
        for z in _list_completions(simplex.dim, n_m, prevs, targets, step, nodes):
            total += level(m + 1, prevs + [z])
        return total

    return level(1, [first])


def _count_chunk(payload) -> Tuple[int, int]:
    """Worker for parallel counting: sums completions over a chunk of first vectors."""
    dim, vertices, lam_sq, step, weighted_firsts, node_cap = payload
    simplex = Simplex(dim, vertices)
    order = _processing_order(simplex)
    nodes = _Nodes(node_cap)
    total = 0
    for first, weight in weighted_firsts:
        total += weight * _count_from_first(simplex, lam_sq, order, first, step, nodes)
    return total, nodes.n


def iter_embeddings(
    simplex: Simplex,
    lambda_sq: int,
    *,
    sublattice: int = 1,
    node_cap: Optional[int] = None,
    nodes: Optional[_Nodes] = None,
) -> Iterator[Tuple[Vec, ...]]:
    """Stream every embedding tuple (y_1..y_k) in deterministic search order."""
    if not simplex.is_nondegenerate:
        raise PreconditionError("simplex is degenerate")
    if lambda_sq < 1:
        raise PreconditionError("lambda_sq must be >= 1")
    k = simplex.k
    t = simplex.gram
    order = _processing_order(simplex)
    inv = [0] * k
    for pos, orig in enumerate(order):
        inv[orig] = pos
    if nodes is None:
        nodes = _Nodes(node_cap)

    def emit(zs: list[Vec]) -> Tuple[Vec, ...]:
        return tuple(zs[inv[i]] for i in range(k))

    def level(m: int, prevs: list[Vec]) -> Iterator[Tuple[Vec, ...]]:
        if m == k:
            yield emit(prevs)
            return
        n_m = lambda_sq * t[order[m]][order[m]]
        targets = [lambda_sq * t[order[m]][order[j]] for j in range(m)]
        for z in _list_completions(simplex.dim, n_m, prevs, targets, sublattice, nodes):
            yield from level(m + 1, prevs + [z])

    for first in _first_candidates(simplex, lambda_sq, order, sublattice):
        nodes.spend()
        yield from level(1, [first])


def simplex_embeddings(
    simplex: Simplex,
    lambda_sq: int,
    mode: str = "count",
    *,
    sublattice: int = 1,
    node_cap: Optional[int] = None,
    list_cap: int = 2_000_000,
    threads: int = 1,
    use_symmetry: bool = True,
) -> EmbeddingSet:
    """Enumerate or count the embedding set at scale lambda.

    Count mode (the default) never materializes tuples; for k >= 2 it
    enumerates only signed-permutation orbit representatives of the first
    vector and weights each completion count by the orbit size.  List mode
    streams the full search, capped by list_cap.
    """
    if mode not in ("count", "list"):
        raise PreconditionError(f"unknown mode {mode!r}")
    if not simplex.is_nondegenerate:
        raise PreconditionError("simplex is degenerate")
    if lambda_sq < 1:
        raise PreconditionError("lambda_sq must be >= 1")
    if sublattice < 1:
        raise PreconditionError("sublattice step must be >= 1")

    if mode == "list":
        nodes = _Nodes(node_cap)
        tuples: list[Tuple[Vec, ...]] = []
        for tup in iter_embeddings(
            simplex, lambda_sq, sublattice=sublattice, nodes=nodes
        ):
            tuples.append(tup)
            if len(tuples) > list_cap:
                raise ResourceLimitError(f"list cap {list_cap} exceeded")
        _check_u64(len(tuples))
        return EmbeddingSet(simplex, lambda_sq, "list", len(tuples), nodes.n, tuples)

    order = _processing_order(simplex)
    n0 = lambda_sq * simplex.gram[order[0]][order[0]]
    if use_symmetry:
        weighted = _orbit_reps(simplex.dim, n0, sublattice)
    else:
        weighted = [(p, 1) for p in _first_candidates(simplex, lambda_sq, order, sublattice)]

    if threads > 1 and weighted:
        chunks: list[list] = [[] for _ in range(threads)]
        for i, item in enumerate(weighted):
            chunks[i % threads].append(item)
        payloads = [
            (simplex.dim, simplex.vertices, lambda_sq, sublattice, chunk, node_cap)
            for chunk in chunks
            if chunk
        ]
        total = 0
        node_total = 0
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for cnt, nd in pool.map(_count_chunk, payloads):
                total += cnt
                node_total += nd
        _check_u64(total)
        return EmbeddingSet(simplex, lambda_sq, "count", total, node_total)

    nodes = _Nodes(node_cap)
    total = 0
    for first, weight in weighted:
        nodes.spend()
        total += weight * _count_from_first(simplex, lambda_sq, order, first, sublattice, nodes)
    _check_u64(total)
    return EmbeddingSet(simplex, lambda_sq, "count", total, nodes.n)


def _check_u64(count: int) -> None:
    if count > _U64_MAX:
        raise CountOverflowError(f"count {count} exceeds unsigned 64-bit range")


def _box_candidates(dim: int, n: int, cap_elements: float = 8e7) -> np.ndarray:
    """Brute-force candidate vectors with |v|^2 = n via full box filtering."""
    r = math.isqrt(n)  # floor suffices: any coordinate beyond it breaks the norm
    side = 2 * r + 1
    if side**dim * dim > cap_elements:
        raise ResourceLimitError(
            f"brute-force box {side}^{dim} too large (raise cap_elements to override)"
        )
    axes = [np.arange(-r, r + 1, dtype=np.int64)] * dim
    grid = np.meshgrid(*axes, indexing="ij")
    pts = np.stack(grid, axis=-1).reshape(-1, dim)
    return pts[(pts * pts).sum(axis=1) == n]


def brute_force_embeddings(simplex: Simplex, lambda_sq: int) -> int:
    """Independent oracle: count solutions of the Gram system by box filtering.

    Shares no search code with simplex_embeddings; the only shortcut is the
    per-vector norm prefilter before cross constraints are checked.
    """
    if not simplex.is_nondegenerate:
        raise PreconditionError("simplex is degenerate")
    if lambda_sq < 1:
        raise PreconditionError("lambda_sq must be >= 1")
    k = simplex.k
    t = simplex.gram
    cands = [_box_candidates(simplex.dim, lambda_sq * t[i][i]) for i in range(k)]

    def pair_count(a: np.ndarray, b: np.ndarray, target: int) -> int:
        total = 0
        for i0 in range(0, len(a), 2048):
            d = a[i0 : i0 + 2048] @ b.T
            total += int((d == target).sum())
        return total

    def rec(arrs: list[np.ndarray], targets: list[list[int]]) -> int:
        if any(len(a) == 0 for a in arrs):
            return 0
        if len(arrs) == 1:
            return len(arrs[0])
        if len(arrs) == 2:
            return pair_count(arrs[0], arrs[1], targets[0][1])
        total = 0
        for y in arrs[0]:
            rest = [a[a @ y == targets[0][j]] for j, a in enumerate(arrs) if j > 0]
            total += rec(rest, [row[1:] for row in targets[1:]])
        return total

    targets = [[lambda_sq * t[i][j] for j in range(k)] for i in range(k)]
    return rec(cands, targets)


@dataclass
class ScalingFit:
    slope: float
    intercept: float
    predicted_exponent: int
    points: list[Tuple[int, int]] = field(default_factory=list)
    ratio_min: float = float("nan")
    ratio_max: float = float("nan")


def count_scaling_fit(
    simplex: Simplex,
    lambda_sq_list: Sequence[int],
    *,
    counts: Optional[Sequence[int]] = None,
    **count_kwargs,
) -> ScalingFit:
    """Least-squares growth exponent of |S_{lambda Delta}| against lambda.

    Also reports the dimensional-analysis prediction d*k - k*(k+1) and the
    empirical min/max of count / lambda^predicted, since the true constants
    in the two-sided growth bound are not pinned down anywhere.
    """
    d, k = simplex.dim, simplex.k
    if d < 2 * k + 3:
        raise PreconditionError(f"need d >= 2k+3, got d={d}, k={k}")
    if counts is None:
        counts = [
            simplex_embeddings(simplex, ls, "count", **count_kwargs).count
            for ls in lambda_sq_list
        ]
    pairs = [(ls, c) for ls, c in zip(lambda_sq_list, counts)]
    nonzero = [(ls, c) for ls, c in pairs if c > 0]
    if len(nonzero) < 3:
        raise NoFitError(f"need >= 3 nonzero counts, got {len(nonzero)}")
    log_lam = np.array([0.5 * math.log(ls) for ls, _ in nonzero])
    log_cnt = np.array([math.log(c) for _, c in nonzero])
    slope, intercept = np.polyfit(log_lam, log_cnt, 1)
    pred = d * k - k * (k + 1)
    ratios = [c / (ls ** (pred / 2)) for ls, c in nonzero]
    return ScalingFit(
        slope=float(slope),
        intercept=float(intercept),
        predicted_exponent=pred,
        points=pairs,
        ratio_min=min(ratios),
        ratio_max=max(ratios),
    )


def required_margin(simplex: Simplex, lambda_sq: int) -> int:
    """ceil(lambda * max_i |v_i|), the box margin a pin needs."""
    s = lambda_sq * simplex.max_vertex_norm_sq()
    r = math.isqrt(s)
    return r if r * r == s else r + 1


def check_margin(A, x: Sequence[int], simplex: Simplex, lambda_sq: int) -> None:
    m = required_margin(simplex, lambda_sq)
    lower = A.lower
    extents = A.extents
    if len(x) != simplex.dim:
        raise PreconditionError("pin has wrong dimension")
    for a in range(simplex.dim):
        if x[a] - m < lower[a] or x[a] + m > lower[a] + extents[a] - 1:
            raise MarginError(
                f"pin {tuple(x)} within {m} of the box boundary at axis {a}"
            )


def pinned_count(
    A,
    x: Sequence[int],
    simplex: Simplex,
    lambda_sq: int,
    *,
    sublattice: int = 1,
    node_cap: Optional[int] = None,
) -> int:
    """Number of embedding tuples whose translate by x lands entirely in A.

    A needs .lower/.extents box attributes and point membership
    (contains / contains_many); the pin must clear the radius margin.
    """
    check_margin(A, x, simplex, lambda_sq)
    x = tuple(x)
    if simplex.k == 1 and hasattr(A, "contains_many"):
        t11 = simplex.gram[0][0]
        pts = sphere_points(simplex.dim, lambda_sq * t11).as_array()
        if sublattice > 1:
            pts = pts[(pts % sublattice == 0).all(axis=1)]
        if len(pts) == 0:
            return 0
        return int(A.contains_many(pts + np.asarray(x, dtype=np.int64)).sum())
    total = 0
    for tup in iter_embeddings(
        simplex, lambda_sq, sublattice=sublattice, node_cap=node_cap
    ):
        if all(A.contains(tuple(c + xc for c, xc in zip(y, x))) for y in tup):
            total += 1
    return total


def debug_check_tuples(simplex: Simplex, lambda_sq: int, tuples) -> bool:
    """Assert every tuple satisfies the exact Gram condition (debug helper)."""
    return all(is_isometric(tup, simplex, lambda_sq) for tup in tuples)
