"""Uniformity norms, major-arc frequency regions, sampling kernels, and the
telescoping decomposition.

The frequency regions collect the d-torus points whose every coordinate sits
within a small radius of a rational with a fixed highly-divisible
denominator: variant A uses q built from an eta parameter with radius 1/L,
variant B uses q built from a dyadic level j with radius 2^(j-l).

The sampling kernels live on the sub-lattice (qZ)^d and taper with a fixed
raised-cosine frequency profile, so their transforms are supported exactly
inside the matching frequency region; that exactness (via Poisson
summation) is what makes the closed-form transform usable at scales where
the kernel could never be materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .averaging import shell_size, shell_tuples
from .core import Simplex
from .enumeration import required_margin
from .errors import EmptyShellError, PreconditionError
from .grids import Box, GridFunction, LatticeSet

Rational = Union[Fraction, float]


def lcm_range(n: int) -> int:
    """Exact lcm{1..n}."""
    if n < 1:
        raise PreconditionError("lcm_range needs n >= 1")
    return math.lcm(*range(1, n + 1))


def torus_dist_to_grid(xi: Rational, q: int) -> Rational:
    """Distance on the circle from xi to the nearest multiple of 1/q.

    Exact when xi is a Fraction, float otherwise.
    """
    if isinstance(xi, Fraction):
        frac = (xi * q) % 1
        return min(frac, 1 - frac) / q
    frac = (float(xi) * q) % 1.0
    return min(frac, 1.0 - frac) / q


@dataclass(frozen=True)
class FreqParams:
    """Major-arc region parameters; build via major_arcs() or dyadic()."""

    kind: str
    q: int
    radius: Fraction
    eta: Optional[float] = None
    L: Optional[int] = None
    j: Optional[int] = None
    l: Optional[int] = None

    @classmethod
    def major_arcs(cls, eta: float, L: int) -> "FreqParams":
        if not 0 < eta < 1:
            raise PreconditionError("eta must lie in (0, 1)")
        q = lcm_range(int(1.0 / (eta * eta)))
        if L < q:
            raise PreconditionError(f"need L >= q = {q}, got L = {L}")
        return cls("major-arc", q, Fraction(1, L), eta=eta, L=L)

    @classmethod
    def dyadic(cls, j: int, l: int) -> "FreqParams":
        if j < 0 or l < 1 or 2**j > l:
            raise PreconditionError(f"need 0 <= 2^j <= l, got j={j}, l={l}")
        q = lcm_range(2**j)
        return cls("dyadic", q, Fraction(1, 2 ** (l - j)), j=j, l=l)

    def axis_contains(self, xi: Rational) -> bool:
        d = torus_dist_to_grid(xi, self.q)
        if isinstance(d, Fraction):
            return d <= self.radius
        return d <= float(self.radius) + 1e-12

    def contains(self, xi: Sequence[Rational]) -> bool:
        return all(self.axis_contains(c) for c in xi)


def omega_contains(xi: Sequence[Rational], params: FreqParams) -> bool:
    """Whether the torus point lies in the major-arc region Omega."""
    return params.contains(xi)


# --- cube-average kernel ---------------------------------------------------


def _chi_axis_support(q: int, L: int) -> np.ndarray:
    """Multiples of q in the half-open [-L/2, L/2)."""
    n = L // q
    return q * np.arange(-(n // 2), n - n // 2)


def chi_kernel(q: int, L: int, d: int) -> GridFunction:
    """Normalized cube kernel: (q/L)^d on (qZ)^d inside [-L/2, L/2)^d."""
    _check_q_L(q, L)
    box = Box.cube(L, d)
    values = np.zeros(box.extents)
    axis = _chi_axis_support(q, L)
    idx = np.ix_(*[axis - box.lower[a] for a in range(d)])
    values[idx] = (q / L) ** d
    return GridFunction(box, values, tag=f"chi:q={q},L={L}")


def chi_mass_exact(q: int, L: int, d: int) -> Fraction:
    _check_q_L(q, L)
    return Fraction(L // q, 1) ** d * Fraction(q, L) ** d


def _check_q_L(q: int, L: int) -> None:
    if q < 1 or L < q:
        raise PreconditionError(f"need 1 <= q <= L, got q={q}, L={L}")
    if L % q:
        raise PreconditionError(f"q must divide L, got q={q}, L={L}")


def chi_hat(q: int, L: int, xi: Sequence[float]) -> complex:
    """Transform of the cube kernel at a torus point, by direct axis sums."""
    _check_q_L(q, L)
    out = complex(1.0)
    axis = _chi_axis_support(q, L)
    for c in xi:
        phases = np.exp(-2j * np.pi * axis * float(c))
        out *= (q / L) * phases.sum()
    return out


def _axis_convolve(
    arr: np.ndarray,
    axis: int,
    in_lo: int,
    out_lo: int,
    out_ext: int,
    kernel_1d,
) -> np.ndarray:
    """Contract one axis with M[o, s] = kernel_1d(t_o - y_s)."""
    in_ext = arr.shape[axis]
    t = out_lo + np.arange(out_ext)
    y = in_lo + np.arange(in_ext)
    m = kernel_1d(t[:, None] - y[None, :])
    out = np.tensordot(m, arr, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


def convolve_chi(
    f: GridFunction, q: int, L: int, out_box: Optional[Box] = None
) -> GridFunction:
    """f * chi_{q,L} by direct summation (no transforms)."""
    _check_q_L(q, L)
    d = f.box.dim
    supp = _chi_axis_support(q, L)
    z_min, z_max = int(supp[0]), int(supp[-1])
    if out_box is None:
        out_box = Box(
            tuple(lo + z_min for lo in f.box.lower),
            tuple(e + (z_max - z_min) for e in f.box.extents),
        )
    def kern(delta: np.ndarray) -> np.ndarray:
        hit = np.isin(delta, supp)
        return np.where(hit, q / L, 0.0)

    vals = f.values.astype(np.float64)
    for a in range(d):
        vals = _axis_convolve(
            vals, a, f.box.lower[a], out_box.lower[a], out_box.extents[a], kern
        )
    return GridFunction(out_box, vals)


def u1_norm(
    f: GridFunction,
    Q: Box,
    q: int,
    L: int,
    *,
    interior: bool = False,
    route: str = "spatial",
) -> float:
    """Mean-square norm of the cube-kernel convolution over Q.

    The literal form sums |f * chi|^2 over the full convolution support and
    divides by |Q|.  The interior variant restricts to the t whose whole
    window sits inside Q and divides by their number, so a constant c gives
    exactly |c|.  route="fft" evaluates the literal form on the frequency
    side (Plancherel); the two routes agree to 1e-9 and share no code.
    """
    _check_q_L(q, L)
    if L > Q.side():
        raise PreconditionError(f"need L <= box side, got L={L}, side={Q.side()}")
    if route == "fft":
        if interior:
            raise PreconditionError("the fft route computes the literal form only")
        return _u1_norm_fft(f, Q, q, L)
    if route != "spatial":
        raise PreconditionError(f"unknown route {route!r}")
    conv = convolve_chi(f, q, L)
    if not interior:
        return float(np.sqrt((conv.values**2).sum() / Q.size))
    supp = _chi_axis_support(q, L)
    z_min, z_max = int(supp[0]), int(supp[-1])
    lo = tuple(Q.lower[a] + z_max for a in range(Q.dim))
    hi = tuple(Q.upper[a] - 1 + z_min for a in range(Q.dim))
    if any(h < l for l, h in zip(lo, hi)):
        raise PreconditionError("no interior window positions")
    sl = tuple(
        slice(lo[a] - conv.box.lower[a], hi[a] - conv.box.lower[a] + 1)
        for a in range(Q.dim)
    )
    inner = conv.values[sl]
    return float(np.sqrt((inner**2).sum() / inner.size))


def _u1_norm_fft(f: GridFunction, Q: Box, q: int, L: int) -> float:
    import scipy.fft as sfft

    d = f.box.dim
    supp = _chi_axis_support(q, L)
    span = int(supp[-1] - supp[0])
    shape = tuple(sfft.next_fast_len(e + span) for e in f.box.extents)
    grid = np.zeros(shape)
    grid[tuple(slice(0, e) for e in f.box.extents)] = f.values
    kern = np.zeros(shape)
    idx = np.ix_(*[(supp - supp[0]) for _ in range(d)])
    kern[idx] = (q / L) ** d
    prod = sfft.fftn(grid) * sfft.fftn(kern)
    total = (np.abs(prod) ** 2).sum() / np.prod(shape)
    return float(np.sqrt(total / Q.size))


# --- residue-class uniformity ----------------------------------------------


@dataclass
class UniformityReport:
    eta: float
    q: int
    delta_hat: Fraction
    max_ratio: Fraction
    worst_residue: Tuple[int, ...]
    threshold: float

    @property
    def is_uniform(self) -> bool:
        return float(self.max_ratio) <= self.threshold + 1e-12


def uniformity_test(A: LatticeSet, eta: float) -> UniformityReport:
    """Max over residue classes mod q of the relative density ratio."""
    if not 0 < eta < 1:
        raise PreconditionError("eta must lie in (0, 1)")
    q = lcm_range(int(1.0 / (eta * eta)))
    d = A.box.dim
    if min(A.box.extents) < q:
        raise PreconditionError(f"box side must be >= q = {q}")
    if q**d > 10**6:
        raise PreconditionError(f"residue grid {q}^{d} too large")
    delta = A.density()
    if delta == 0:
        raise PreconditionError("density surrogate is zero")

    axis_box_counts = []
    for a in range(d):
        coords = A.box.axis_coords(a) % q
        axis_box_counts.append(np.bincount(coords, minlength=q))
    box_counts = reduce(np.multiply.outer, axis_box_counts)

    pts = A.points() % q
    flat = np.ravel_multi_index(tuple(pts.T), (q,) * d)
    a_counts = np.bincount(flat, minlength=q**d).reshape((q,) * d)

    best = Fraction(-1)
    worst: Tuple[int, ...] = (0,) * d
    for residue in np.ndindex(*(q,) * d):
        total = int(box_counts[residue])
        if total == 0:
            continue
        ratio = Fraction(int(a_counts[residue]), total) / delta
        if ratio > best:
            best = ratio
            worst = tuple(int(r) for r in residue)
    return UniformityReport(
        eta=eta,
        q=q,
        delta_hat=delta,
        max_ratio=best,
        worst_residue=worst,
        threshold=1.0 + eta**4,
    )


# --- sampling kernels ------------------------------------------------------


def psi_profile_hat(u) -> np.ndarray:
    """Frequency profile w: 1 on [-1/2, 1/2], raised-cosine taper to 0 at 1."""
    u = np.abs(np.asarray(u, dtype=np.float64))
    flat = u <= 0.5
    taper = (u > 0.5) & (u < 1.0)
    out = np.zeros_like(u)
    out[flat] = 1.0
    out[taper] = np.cos(0.5 * np.pi * (2.0 * u[taper] - 1.0)) ** 2
    return out


def psi_profile(t) -> np.ndarray:
    """Inverse transform of the profile: h(t) = integral of w(u) e^{2 pi i t u} du.

    Rewritten with u = 1 - |t| so the removable singularities at |t| = 1
    never meet a zero denominator: h is evaluated through sinc only.
    """
    t = np.abs(np.asarray(t, dtype=np.float64))
    u = 1.0 - t
    return 1.5 * np.sinc(1.5 * t) * (0.5 * np.pi) * np.sinc(0.5 * u) / (2.0 - u)


def dyadic_levels(l: int) -> int:
    """J_l, the last admissible kernel level at spatial scale 2^l."""
    if l < 1:
        raise PreconditionError("l must be >= 1")
    return int(math.floor(math.log2(l))) - 2


@dataclass(frozen=True)
class PsiKernel:
    """Sampling kernel at level (l, j): lives on (q_j Z)^d at scale 2^(l-j).

    Held lazily: the spatial extent is far too large to materialize at
    realistic l, so evaluation goes through the closed-form transform and
    convolution through separable axis contractions.
    """

    l: int
    j: int
    d: int

    def __post_init__(self):
        if not 0 <= self.j <= dyadic_levels(self.l):
            raise PreconditionError(
                f"j={self.j} outside 0..{dyadic_levels(self.l)} for l={self.l}"
            )

    @property
    def q(self) -> int:
        return lcm_range(2**self.j)

    @property
    def scale(self) -> int:
        return 2 ** (self.l - self.j)

    def params(self) -> FreqParams:
        return FreqParams.dyadic(self.j, self.l)

    def hat_axis(self, xi: Rational) -> float:
        # exact by Poisson summation: the taper windows around distinct
        # rationals n/q are disjoint because the scale exceeds 2q
        dist = float(torus_dist_to_grid(xi, self.q))
        return float(psi_profile_hat(self.scale * dist))

    def hat(self, xi: Sequence[Rational]) -> float:
        out = 1.0
        for c in xi:
            out *= self.hat_axis(c)
        return out

    def spatial_value(self, x: Sequence[int]) -> float:
        q, L = self.q, self.scale
        if any(c % q for c in x):
            return 0.0
        val = (q / L) ** self.d
        for c in x:
            val *= float(psi_profile(c / L))
        return val

    def _axis_kernel(self):
        q, L = self.q, self.scale

        def kern(delta: np.ndarray) -> np.ndarray:
            on_grid = delta % q == 0
            return np.where(on_grid, (q / L) * psi_profile(delta / L), 0.0)

        return kern

    def convolve(self, f: GridFunction, out_box: Optional[Box] = None) -> GridFunction:
        if f.box.dim != self.d:
            raise PreconditionError("dimension mismatch")
        if out_box is None:
            out_box = f.box
        kern = self._axis_kernel()
        vals = f.values.astype(np.float64)
        for a in range(self.d):
            vals = _axis_convolve(
                vals, a, f.box.lower[a], out_box.lower[a], out_box.extents[a], kern
            )
        return GridFunction(out_box, vals)

    def materialize(self, box: Box) -> GridFunction:
        """Truncated table of kernel values; small parameters only."""
        if box.size > 4_000_000:
            raise PreconditionError("kernel table too large, keep it lazy")
        vals = np.empty(box.extents)
        for p in box.points():
            vals[box.index(p)] = self.spatial_value(p)
        return GridFunction(box, vals, tag=f"psi:l={self.l},j={self.j}")


def psi_sampling(l: int, j: int, d: int) -> PsiKernel:
    return PsiKernel(l, j, d)


@dataclass(frozen=True)
class DeltaPsiKernel:
    """Consecutive kernel difference at fixed l: level j+1 minus level j."""

    l: int
    j: int
    d: int

    def __post_init__(self):
        if not 0 <= self.j + 1 <= dyadic_levels(self.l):
            raise PreconditionError(
                f"difference needs j+1 <= {dyadic_levels(self.l)} at l={self.l}"
            )

    @property
    def fine(self) -> PsiKernel:
        return PsiKernel(self.l, self.j + 1, self.d)

    @property
    def coarse(self) -> PsiKernel:
        return PsiKernel(self.l, self.j, self.d)

    def hat(self, xi: Sequence[Rational]) -> float:
        return self.fine.hat(xi) - self.coarse.hat(xi)

    def convolve(self, f: GridFunction, out_box: Optional[Box] = None) -> GridFunction:
        a = self.fine.convolve(f, out_box)
        b = self.coarse.convolve(f, out_box)
        return GridFunction(a.box, a.values - b.values)


def delta_psi(l: int, j: int, d: int) -> DeltaPsiKernel:
    return DeltaPsiKernel(l, j, d)


@dataclass
class Decomposition:
    l: int
    levels: int
    parts: list[GridFunction]
    labels: list[str]

    def reconstruct(self) -> GridFunction:
        box = self.parts[0].box
        total = np.zeros(box.extents)
        for p in self.parts:
            total += p.values
        return GridFunction(box, total)


def telescoping_decompose(f: GridFunction, l: int) -> Decomposition:
    """Split f into a coarse part, dyadic differences, and a residual.

    f = f*Psi_{l,0} + sum_{j<J_l} f*DeltaPsi_{l,j} + (f - f*Psi_{l,J_l}),
    an algebraic identity, so the parts sum back to f to rounding error.
    """
    if l < 8:
        raise PreconditionError("need l >= 8 so at least one difference exists")
    J = dyadic_levels(l)
    convs = [PsiKernel(l, j, f.box.dim).convolve(f) for j in range(J + 1)]
    parts = [convs[0]]
    labels = ["coarse:j=0"]
    for j in range(J):
        parts.append(GridFunction(f.box, convs[j + 1].values - convs[j].values))
        labels.append(f"delta:j={j}")
    parts.append(GridFunction(f.box, f.values - convs[J].values))
    labels.append(f"residual:j={J}")
    return Decomposition(l=l, levels=J, parts=parts, labels=labels)


def delta_psi_sq_sum(j: int, l_max: int, xi: Sequence[Rational]) -> float:
    """Sum over admissible l <= l_max of |the difference transform|^2 at xi."""
    total = 0.0
    for l in range(2 ** (j + 3), l_max + 1):
        total += DeltaPsiKernel(l, j, len(tuple(xi))).hat(xi) ** 2
    return total


def orthogonality_sample_points(
    j: int, d: int, *, seed: int = 2718, n_random: int = 20
) -> list:
    """Probe points for the difference-kernel square sums.

    Deliberately avoids the refined lattice (1/q_{j+1})Z^d away from the
    coarse one: there the fine transform sticks at 1 while the coarse one
    vanishes, so the sum grows linearly with the number of scales and no
    constant works.  Coarse-lattice points, nearby offsets, generic points,
    and far-from-lattice points all give bounded sums.
    """
    q = lcm_range(2**j)
    rng = np.random.default_rng(seed)
    zero_tail = (Fraction(0),) * (d - 1)
    pts = [(Fraction(0),) * d, (Fraction(1, q),) + zero_tail]
    for off in (1e-6, 1e-5, 1e-4, 1e-3, 1e-2):
        pts.append((off,) + (0.0,) * (d - 1))
        pts.append((off,) * d)
        pts.append((1.0 / q + off,) + (0.0,) * (d - 1))
    for _ in range(n_random):
        pts.append(tuple(rng.uniform(0.0, 1.0, d)))
    pts.append((0.37,) + (0.61,) * (d - 1))
    return pts


def orthogonality_probe(
    j: int, l_max: int, d: int, xi_samples: Sequence[Sequence[Rational]]
) -> float:
    """Max of the squared difference-transform sums over the sampled points."""
    samples = list(xi_samples)
    if not samples:
        raise PreconditionError("need at least one sample point")
    if any(len(tuple(x)) != d for x in samples):
        raise PreconditionError("sample dimension mismatch")
    return max(delta_psi_sq_sum(j, l_max, xi) for xi in samples)


# --- generalized von Neumann probe ----------------------------------------


@dataclass
class VonNeumannReport:
    eta: float
    L: int
    q: int
    lambda_sqs: list[int]
    lhs: float
    lhs_is_estimate: bool
    sites_used: int
    total_sites: int
    min_u1_interior: float
    min_u1_literal: float
    seed: Optional[int]

    @property
    def excess(self) -> float:
        return self.lhs - self.min_u1_interior

    @property
    def excess_over_eta(self) -> float:
        return self.excess / self.eta


def von_neumann_probe(
    fs: Sequence[GridFunction],
    simplex: Simplex,
    eta: float,
    L: int,
    *,
    seed: Optional[int] = 0,
    max_sites: Optional[int] = 20_000,
) -> VonNeumannReport:
    """Both sides of the transfer inequality: the averaged maximal sum over
    all sites against the smallest input uniformity norm.

    The left side is exact when the padded site grid is small enough,
    otherwise a seeded uniform site sample scales up the mean (flagged as an
    estimate in the report).
    """
    k = simplex.k
    fs = list(fs)
    if len(fs) != k:
        raise PreconditionError(f"need {k} functions, got {len(fs)}")
    Q = fs[0].box
    if any(f.box != Q for f in fs):
        raise PreconditionError("all inputs must share one box")
    N = Q.side()
    params = FreqParams.major_arcs(eta, L)
    if N < (eta ** -6) * L:
        raise PreconditionError(
            f"need side >= eta^-6 L = {eta ** -6 * L:.2f}, got {N}"
        )
    lam_lo = (eta**-3) * L
    lam_hi = (eta**3) * N
    lams = [
        ls
        for ls in range(max(1, math.ceil(lam_lo**2)), math.floor(lam_hi**2) + 1)
        if shell_size(simplex, ls) > 0
    ]
    if not lams:
        raise EmptyShellError("no non-empty shells in the radius window")

    d = simplex.dim
    r_max = required_margin(simplex, max(lams))
    outer = Box.cube(N + 2 * r_max, d)
    total_sites = outer.size
    if max_sites is not None and total_sites > max_sites:
        rng = np.random.default_rng(seed)
        lowers = np.asarray(outer.lower)
        exts = np.asarray(outer.extents)
        sites = lowers + np.stack(
            [rng.integers(0, exts[a], size=max_sites) for a in range(d)], axis=1
        )
        estimate = True
    else:
        sites = np.stack(
            np.meshgrid(*[outer.axis_coords(a) for a in range(d)], indexing="ij"),
            axis=-1,
        ).reshape(-1, d)
        estimate = False

    sup = np.zeros(len(sites))
    for ls in lams:
        tuples = shell_tuples(simplex, ls)
        count = len(tuples)
        acc = np.zeros(len(sites))
        for s_idx in range(len(sites)):
            x = sites[s_idx]
            term = fs[0].sample(x + tuples[:, 0, :])
            for i in range(1, k):
                term = term * fs[i].sample(x + tuples[:, i, :])
            acc[s_idx] = term.sum()
        np.maximum(sup, np.abs(acc) / count, out=sup)

    if estimate:
        lhs = float(sup.mean()) * total_sites / Q.size
    else:
        lhs = float(sup.sum()) / Q.size

    u1_int = min(u1_norm(f, Q, params.q, L, interior=True) for f in fs)
    u1_lit = min(u1_norm(f, Q, params.q, L) for f in fs)
    return VonNeumannReport(
        eta=eta,
        L=L,
        q=params.q,
        lambda_sqs=lams,
        lhs=lhs,
        lhs_is_estimate=estimate,
        sites_used=len(sites),
        total_sites=total_sites,
        min_u1_interior=u1_int,
        min_u1_literal=u1_lit,
        seed=seed,
    )
