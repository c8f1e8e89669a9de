"""Multilinear averages over embedding sets, maximal functions, pinned
profiles, and empirical operator-norm probes.

The average at scale lambda pairs each embedding tuple (y_1..y_k) with the
product f_1(x+y_1)...f_k(x+y_k) and divides by the tuple count.  Functions
are zero outside their boxes (zero extension, never periodic wraparound).
Indicator inputs admit an exact rational mode: integer hit count over the
integer shell size.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.fft as sfft

from .core import Simplex
from .enumeration import required_margin, simplex_embeddings, sphere_points
from .errors import EmptyShellError, PreconditionError
from .grids import Box, GridFunction, LatticeSet

Number = Union[float, Fraction]


@lru_cache(maxsize=256)
def shell_tuples(simplex: Simplex, lambda_sq: int, sublattice: int = 1) -> np.ndarray:
    """Embedding tuples as an (n, k, d) int64 array, cached per shell."""
    res = simplex_embeddings(simplex, lambda_sq, "list", sublattice=sublattice)
    if not res.tuples:
        return np.zeros((0, simplex.k, simplex.dim), dtype=np.int64)
    return np.asarray(res.tuples, dtype=np.int64)


@lru_cache(maxsize=256)
def shell_size(simplex: Simplex, lambda_sq: int, sublattice: int = 1) -> int:
    return simplex_embeddings(simplex, lambda_sq, "count", sublattice=sublattice).count


def _as_functions(fs: Sequence[GridFunction], k: int) -> list[GridFunction]:
    fs = list(fs)
    if len(fs) == 1 and k > 1:
        fs = fs * k
    if len(fs) != k:
        raise PreconditionError(f"need {k} functions, got {len(fs)}")
    return fs


def multilinear_average(
    fs: Sequence[GridFunction],
    simplex: Simplex,
    lambda_sq: int,
    x: Sequence[int],
    *,
    exact: bool = False,
) -> Number:
    """|S|^-1 sum over embedding tuples of the product of shifted samples."""
    k = simplex.k
    fs = _as_functions(fs, k)
    size = shell_size(simplex, lambda_sq)
    if size == 0:
        raise EmptyShellError(f"no embeddings at lambda_sq={lambda_sq}")
    tuples = shell_tuples(simplex, lambda_sq)
    x_arr = np.asarray(tuple(x), dtype=np.int64)
    factors = [fs[i].sample(x_arr + tuples[:, i, :]) for i in range(k)]
    if not exact:
        prod = factors[0].astype(np.float64).copy()
        for fac in factors[1:]:
            prod *= fac
        return float(prod.sum()) / size
    total = Fraction(0)
    for row in zip(*factors):
        if all(row):
            term = Fraction(1)
            for v in row:
                term *= Fraction(float(v))
            total += term
    return total / size


def maximal_function(
    fs: Sequence[GridFunction],
    simplex: Simplex,
    lambda_sq_range: Sequence[int],
    x: Sequence[int],
    *,
    exact: bool = False,
) -> Number:
    """sup over the range of |multilinear_average|; empty shells are skipped."""
    lams = list(lambda_sq_range)
    if not lams:
        raise PreconditionError("empty radius range")
    best: Optional[Number] = None
    skipped = []
    for ls in lams:
        if shell_size(simplex, ls) == 0:
            skipped.append(ls)
            continue
        val = abs(multilinear_average(fs, simplex, ls, x, exact=exact))
        if best is None or val > best:
            best = val
    if best is None:
        raise EmptyShellError("every shell in the range is empty")
    if skipped:
        warnings.warn(f"skipped empty shells at lambda_sq={skipped}", stacklevel=2)
    return best


def _pin_candidates(
    A: LatticeSet, simplex: Simplex, lambda_sq_max: int
) -> np.ndarray:
    margin = required_margin(simplex, lambda_sq_max)
    inner = A.box.shrink(margin)
    pts = A.points()
    lo = np.asarray(inner.lower)
    hi = np.asarray(inner.upper)
    keep = ((pts >= lo) & (pts < hi)).all(axis=1)
    return pts[keep]


def _pin_hit_counts(
    A: LatticeSet, pins: np.ndarray, tuples: np.ndarray, chunk: int = 256
) -> np.ndarray:
    """counts[p] = number of tuples fully inside A when translated to pins[p]."""
    n, k, d = tuples.shape
    out = np.zeros(len(pins), dtype=np.int64)
    for i0 in range(0, len(pins), chunk):
        block = pins[i0 : i0 + chunk]
        shifted = block[:, None, None, :] + tuples[None, :, :, :]
        member = A.contains_many(shifted.reshape(-1, d)).reshape(len(block), n, k)
        out[i0 : i0 + chunk] = member.all(axis=2).sum(axis=1)
    return out


@dataclass
class PinnedProfile:
    simplex: Simplex
    lambda_sqs: list[int]
    pins: np.ndarray
    min_values: list[Fraction]
    shell_sizes: dict[int, int]
    skipped_shells: list[int]
    delta_hat: Fraction
    eps: Optional[Fraction] = None
    subsampled: bool = False
    seed: Optional[int] = None

    @property
    def best_index(self) -> int:
        return max(range(len(self.min_values)), key=lambda i: self.min_values[i])

    @property
    def best_pin(self) -> Tuple[int, ...]:
        return tuple(int(c) for c in self.pins[self.best_index])

    @property
    def best_value(self) -> Fraction:
        return self.min_values[self.best_index]

    @property
    def threshold(self) -> Optional[Fraction]:
        if self.eps is None:
            return None
        return self.delta_hat**self.simplex.k - self.eps

    @property
    def success_fraction(self) -> Fraction:
        thr = self.threshold
        if thr is None:
            raise PreconditionError("no eps supplied")
        wins = sum(1 for v in self.min_values if v > thr)
        return Fraction(wins, len(self.min_values))

    def passes(self) -> bool:
        thr = self.threshold
        if thr is None:
            raise PreconditionError("no eps supplied")
        return self.best_value > thr


def pinned_profile(
    A: LatticeSet,
    simplex: Simplex,
    lambda_sq_range: Sequence[int],
    *,
    eps: Optional[Union[float, Fraction]] = None,
    max_pins: Optional[int] = None,
    seed: Optional[int] = None,
    sublattice: int = 1,
) -> PinnedProfile:
    """Per-pin minimum over the radius window of the exact average on 1_A.

    Pins are the points of A clearing the margin at the largest radius.  When
    max_pins is given, a seeded uniform subsample stands in for the full pin
    set (reported via the subsampled flag).
    """
    lams = list(lambda_sq_range)
    if not lams:
        raise PreconditionError("empty radius range")
    pins = _pin_candidates(A, simplex, max(lams))
    if len(pins) == 0:
        raise PreconditionError("no admissible pins")
    subsampled = False
    if max_pins is not None and len(pins) > max_pins:
        rng = np.random.default_rng(seed)
        pins = pins[rng.choice(len(pins), size=max_pins, replace=False)]
        subsampled = True
    pins = pins[np.lexsort(pins.T[::-1])]

    sizes: dict[int, int] = {}
    skipped: list[int] = []
    per_shell_counts: list[Tuple[int, np.ndarray]] = []
    for ls in lams:
        size = shell_size(simplex, ls, sublattice)
        if size == 0:
            skipped.append(ls)
            continue
        sizes[ls] = size
        tuples = shell_tuples(simplex, ls, sublattice)
        per_shell_counts.append((size, _pin_hit_counts(A, pins, tuples)))
    if not per_shell_counts:
        raise EmptyShellError("every shell in the range is empty")

    min_values = []
    for p in range(len(pins)):
        min_values.append(
            min(Fraction(int(counts[p]), size) for size, counts in per_shell_counts)
        )
    return PinnedProfile(
        simplex=simplex,
        lambda_sqs=[ls for ls in lams if ls not in skipped],
        pins=pins,
        min_values=min_values,
        shell_sizes=sizes,
        skipped_shells=skipped,
        delta_hat=A.density(),
        eps=None if eps is None else Fraction(eps).limit_denominator(10**9),
        subsampled=subsampled,
        seed=seed,
    )


@dataclass
class ProbeResult:
    simplex: Simplex
    box_side: int
    lambda_sqs: list[int]
    ratios: list[float]
    seed: int
    restricted: bool = False

    @property
    def max_ratio(self) -> float:
        return max(self.ratios)


def _restriction_mask(side: int, dim: int, restriction) -> np.ndarray:
    """Boolean mask over DFT frequencies m/side that lie inside Omega."""
    axis = np.zeros(side, dtype=bool)
    for m in range(side):
        axis[m] = restriction.axis_contains(Fraction(m, side))
    mask = axis
    for _ in range(dim - 1):
        mask = np.logical_and.outer(mask, axis)
    return mask


def project_off_omega(f: GridFunction, restriction) -> GridFunction:
    """Zero the DFT coefficients of f whose frequency falls in Omega."""
    side = f.box.side()
    mask = _restriction_mask(side, f.box.dim, restriction)
    spectrum = np.fft.fftn(f.values)
    spectrum[mask] = 0.0
    return GridFunction(f.box, np.fft.ifftn(spectrum).real)


def operator_norm_probe(
    simplex: Simplex,
    box_side: int,
    trials: int,
    lambda_sq_range: Sequence[int],
    *,
    seed: int = 0,
    restriction=None,
) -> ProbeResult:
    """Empirical ratio ||sup over the range of A_lambda f||_2 / ||f||_2.

    Test functions have i.i.d. uniform [-1, 1] values on the box; the
    optional restriction projects each one off the Omega frequencies first.
    For k = 1 the averages are circular FFT correlations on a grid padded by
    the largest radius, which the zero padding makes exact.
    """
    if trials < 1:
        raise PreconditionError("trials must be >= 1")
    lams = [ls for ls in lambda_sq_range if shell_size(simplex, ls) > 0]
    if not lams:
        raise EmptyShellError("every shell in the range is empty")
    if simplex.k != 1:
        return _probe_generic(simplex, box_side, trials, lams, seed, restriction)

    d = simplex.dim
    r_max = required_margin(simplex, max(lams))
    padded = box_side + 2 * r_max
    shape = (padded,) * d

    kernel_hats = []
    for ls in lams:
        pts = sphere_points(d, ls * simplex.gram[0][0]).as_array()
        kernel = np.zeros(shape, dtype=np.float32)
        idx = tuple((pts % padded).T)
        kernel[idx] = 1.0
        kernel_hats.append((len(pts), np.conj(sfft.rfftn(kernel))))
        del kernel

    rng = np.random.default_rng(seed)
    box = Box.cube(box_side, d)
    embed = tuple(slice(r_max, r_max + box_side) for _ in range(d))
    ratios = []
    for _ in range(trials):
        f = GridFunction(box, rng.uniform(-1.0, 1.0, size=box.extents))
        if restriction is not None:
            f = project_off_omega(f, restriction)
        norm = f.l2_norm()
        if norm == 0.0:
            ratios.append(0.0)
            continue
        grid = np.zeros(shape, dtype=np.float32)
        grid[embed] = f.values.astype(np.float32)
        spectrum = sfft.rfftn(grid)
        sup = np.zeros(shape, dtype=np.float32)
        for count, k_hat in kernel_hats:
            # correlation: A_lambda f(x) = sum_y f(x + y) / count
            conv = sfft.irfftn(spectrum * k_hat, s=shape)
            np.maximum(sup, np.abs(conv) / np.float32(count), out=sup)
        ratios.append(float(np.sqrt((sup.astype(np.float64) ** 2).sum())) / norm)
    return ProbeResult(simplex, box_side, lams, ratios, seed, restriction is not None)


def _probe_generic(
    simplex: Simplex,
    box_side: int,
    trials: int,
    lams: list[int],
    seed: int,
    restriction,
) -> ProbeResult:
    """Direct tuple-streaming probe for k >= 2; desk scale only."""
    d, k = simplex.dim, simplex.k
    r_max = required_margin(simplex, max(lams))
    outer = Box.cube(box_side + 2 * r_max, d)
    sites = np.stack(
        np.meshgrid(*[outer.axis_coords(a) for a in range(d)], indexing="ij"), axis=-1
    ).reshape(-1, d)
    rng = np.random.default_rng(seed)
    box = Box.cube(box_side, d)
    ratios = []
    for _ in range(trials):
        fs = []
        for _ in range(k):
            f = GridFunction(box, rng.uniform(-1.0, 1.0, size=box.extents))
            if restriction is not None:
                f = project_off_omega(f, restriction)
            fs.append(f)
        norm = math.prod(f.l2_norm() for f in fs)
        if norm == 0.0:
            ratios.append(0.0)
            continue
        sup = np.zeros(len(sites))
        for ls in lams:
            tuples = shell_tuples(simplex, ls)
            acc = np.zeros(len(sites))
            for row in tuples:
                term = fs[0].sample(sites + row[0])
                for i in range(1, k):
                    term = term * fs[i].sample(sites + row[i])
                acc += term
            np.maximum(sup, np.abs(acc) / len(tuples), out=sup)
        ratios.append(float(np.sqrt((sup**2).sum())) / norm)
    return ProbeResult(simplex, box_side, lams, ratios, seed, restriction is not None)
