"""Truncated theta sums over integer matrix lattices and their arithmetic.

Three groups of tools share this module because they feed one another:
Gaussian-weighted exponential sums over d x k integer matrices (with an
explicit truncation radius and a reported tail bound), the multilinear
operator built from the same Gaussian kernel, and exact divisor-sum
coefficient tables whose tail sums over non-divisors of lcm{1..2^j}
measure how fast the smooth-modulus mass decays.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
import sympy

from .errors import PreconditionError
from .grids import GridFunction

__all__ = [
    "factorization_count",
    "tail_coefficient",
    "CoefficientTable",
    "divides_lcm_range",
    "TailReport",
    "tail_sum",
    "ThetaResult",
    "theta_sum",
    "truncation_radius",
    "gaussian_kernel",
    "gaussian_operator",
    "gaussian_transform_direct",
    "phase_integral",
    "phase_node_count",
    "dyadic_eps",
]


# --- divisor-sum coefficients ----------------------------------------------


def factorization_count(m: int, K: int) -> int:
    """Ordered K-tuples of positive integers with product m.

    Multiplicative; per prime p^v the count of ordered splits of v among K
    slots is C(v + K - 1, K - 1).
    """
    if m < 1 or K < 1:
        raise PreconditionError("need m >= 1 and K >= 1")
    out = 1
    for _, v in sympy.factorint(m).items():
        out *= math.comb(v + K - 1, K - 1)
    return out


def tail_coefficient(n: int, K: int) -> Fraction:
    """Exact divisor sum: sum over m | n of factorization_count(m, K) / m."""
    if n < 1:
        raise PreconditionError("need n >= 1")
    return sum(
        (Fraction(factorization_count(m, K), m) for m in sympy.divisors(n)),
        Fraction(0),
    )


@dataclass(frozen=True)
class CoefficientTable:
    """Exact coefficients tail_coefficient(n, K) for 1 <= n <= n_max.

    Built by integer divisor-convolution sieves; numerators stay well
    inside int64 for the supported n_max (the table times n is the
    convolution of the K-factorization counts with the identity).
    """

    K: int
    n_max: int
    numerators: np.ndarray  # numerators[n] = coefficient(n) * n, exact

    @classmethod
    def build(cls, K: int, n_max: int) -> "CoefficientTable":
        if K < 1 or n_max < 1:
            raise PreconditionError("need K >= 1 and n_max >= 1")
        if n_max > 2_000_000:
            raise PreconditionError("table too large, keep n_max <= 2e6")
        counts = np.ones(n_max + 1, dtype=np.int64)
        counts[0] = 0
        for _ in range(K - 1):
            nxt = np.zeros(n_max + 1, dtype=np.int64)
            for d in range(1, n_max + 1):
                nxt[d::d] += counts[d]
            counts = nxt
        numer = np.zeros(n_max + 1, dtype=np.int64)
        mult = np.arange(n_max + 1, dtype=np.int64)
        for d in range(1, n_max + 1):
            c = int(counts[d])
            numer[d::d] += c * mult[1 : n_max // d + 1]
        return cls(K=K, n_max=n_max, numerators=numer)

    def value(self, n: int) -> Fraction:
        if not 1 <= n <= self.n_max:
            raise PreconditionError(f"n outside 1..{self.n_max}")
        return Fraction(int(self.numerators[n]), n)

    def floats(self) -> np.ndarray:
        """coefficient(n) as float64 for n = 0..n_max (index 0 unused)."""
        out = self.numerators.astype(np.float64)
        out[1:] /= np.arange(1, self.n_max + 1, dtype=np.float64)
        return out


def divides_lcm_range(n: int, j: int) -> bool:
    """Whether n divides lcm{1, ..., 2^j}, decided from the factorization.

    True iff every maximal prime power p^v dividing n satisfies p^v <= 2^j;
    the lcm itself (astronomically large for big j) is never formed.
    """
    if n < 1 or j < 0:
        raise PreconditionError("need n >= 1 and j >= 0")
    bound = 2**j
    return all(p**v <= bound for p, v in sympy.factorint(n).items())


@dataclass
class TailReport:
    K: int
    s: float
    j: int
    n_max: int
    total: float
    reference: float
    remainder_estimate: float
    truncated_terms: int

    @property
    def ratio(self) -> float:
        return self.total / self.reference


def tail_sum(
    K: int,
    s: float,
    j: int,
    n_max: int,
    *,
    table: Optional[CoefficientTable] = None,
) -> TailReport:
    """Sum of coefficient(n) n^{-s} over n <= n_max not dividing lcm{1..2^j}.

    Reported against the reference envelope 2^{j(1-s)} / j.  The remainder
    beyond n_max is estimated (not bounded) by extending the mean
    coefficient over the last half of the table through the integral tail;
    a remainder above 1% of the computed sum warns that the truncated sum
    undercounts the full series noticeably at this j.  The warning rather
    than an error keeps large-j sweeps runnable: the remainder is nearly
    j-independent while the sum itself shrinks, so any fixed n_max fails
    the 1% mark beyond some j.
    """
    if s <= 1:
        raise PreconditionError("the series diverges for s <= 1")
    if j < 1:
        raise PreconditionError("need j >= 1 for the reference envelope")
    if table is None:
        table = CoefficientTable.build(K, n_max)
    if table.K != K or table.n_max < n_max:
        raise PreconditionError("coefficient table does not cover the request")

    coeffs = table.floats()[: n_max + 1]
    ns = np.arange(n_max + 1, dtype=np.float64)
    bound = 2**j
    excluded = np.zeros(n_max + 1, dtype=bool)
    if bound <= n_max:
        # mark n with some maximal prime power above 2^j; a prime power
        # sieve avoids factoring every n
        for p in sympy.primerange(2, n_max + 1):
            pv = p
            while pv <= n_max:
                if pv > bound:
                    excluded[pv::pv] = True
                pv *= p
    with np.errstate(divide="ignore"):
        weights = np.where(ns > 0, ns ** (-float(s)), 0.0)
    total = float((coeffs * weights)[excluded].sum())
    terms = int(excluded.sum())

    half = coeffs[n_max // 2 :]
    mean_coeff = float(half.mean()) if half.size else 0.0
    remainder = mean_coeff * (n_max ** (1.0 - s)) / (s - 1.0)
    if total > 0 and remainder > 0.01 * total:
        warnings.warn(
            f"estimated remainder {remainder:.3g} exceeds 1% of the computed "
            f"sum {total:.3g}; the truncated value undercounts the series",
            stacklevel=2,
        )
    reference = 2.0 ** (j * (1.0 - s)) / j
    return TailReport(
        K=K,
        s=float(s),
        j=j,
        n_max=n_max,
        total=total,
        reference=reference,
        remainder_estimate=remainder,
        truncated_terms=terms,
    )


# --- truncated theta sums ---------------------------------------------------


def _as_complex_matrix(Z, k: int) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.complex128)
    if Z.shape != (k, k):
        raise PreconditionError(f"expected a {k}x{k} matrix, got {Z.shape}")
    if not np.allclose(Z, Z.T, atol=1e-12):
        raise PreconditionError("matrix must be symmetric")
    return Z


def _min_eigenvalue(Y: np.ndarray) -> float:
    lam = float(np.linalg.eigvalsh(Y).min())
    if lam <= 0:
        raise PreconditionError("imaginary part must be positive definite")
    return lam


def truncation_radius(Y, tol: float) -> int:
    """Per-row radius so the discarded Gaussian tail stays below tol."""
    Y = np.asarray(Y, dtype=np.float64)
    lam = _min_eigenvalue(Y)
    if not 0 < tol < 1:
        raise PreconditionError("tol must lie in (0, 1)")
    return math.ceil(math.sqrt(math.log(1.0 / tol) / (math.pi * lam))) + 1


@dataclass
class ThetaResult:
    value: complex
    radius: int
    tail_bound: float
    terms: int


def _row_lattice(k: int, R: int, center: np.ndarray) -> np.ndarray:
    axes = [np.arange(round(c) - R, round(c) + R + 1) for c in center]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def _axis_tail(lam: float, R: int) -> float:
    # sum over |t| > R of e^{-pi lam (|t|-1)^2}, with a geometric cap for
    # the far range; |t|-1 absorbs a fractional center shift
    total = 0.0
    for t in range(R + 1, R + 200):
        total += 2.0 * math.exp(-math.pi * lam * (t - 1) ** 2)
    q = math.exp(-math.pi * lam * (2 * (R + 199) - 1))
    total += 2.0 * math.exp(-math.pi * lam * (R + 198) ** 2) * q / max(1 - q, 1e-300)
    return total


def theta_sum(
    Z,
    script_X=None,
    script_E=None,
    *,
    d: int,
    k: int,
    tol: float = 1e-10,
) -> ThetaResult:
    """Gaussian-phase sum over integer d x k matrices, truncated per row.

    The exponent pi*i*(tr[(M-E)Z(M-E)^t] + 2 tr(M^t X) - tr(E^t X)) is
    additive across the d rows of M, so the sum is a product of d sums
    over Z^k; each row sum is truncated to a box of radius R around its
    shift and the discarded mass is bounded through the Gaussian envelope
    e^{-pi lam_min |m - e|^2}.
    """
    Z = _as_complex_matrix(Z, k)
    Y = Z.imag
    lam = _min_eigenvalue(Y)
    X_s = np.zeros((d, k)) if script_X is None else np.asarray(script_X, float)
    E_s = np.zeros((d, k)) if script_E is None else np.asarray(script_E, float)
    if X_s.shape != (d, k) or E_s.shape != (d, k):
        raise PreconditionError(f"shift matrices must be {d}x{k}")
    R = truncation_radius(Y, tol)

    axis_full = 1.0 + 2.0 * sum(
        math.exp(-math.pi * lam * t * t) for t in range(1, R + 200)
    )
    axis_tail = _axis_tail(lam, R)

    value = complex(1.0)
    tail = 0.0
    abs_rows = []
    terms = 0
    row_values = []
    for r in range(d):
        rows = _row_lattice(k, R, E_s[r])
        diff = rows - E_s[r]
        quad = np.einsum("mi,ij,mj->m", diff, Z, diff)
        linear = 2.0 * rows @ X_s[r]
        phases = np.exp(1j * np.pi * (quad + linear))
        row_values.append(phases.sum())
        abs_rows.append(float(np.abs(phases).sum()))
        terms += len(rows)
    row_tail = k * axis_tail * axis_full ** (k - 1)
    for r in range(d):
        value *= row_values[r]
        other = 1.0
        for r2 in range(d):
            if r2 != r:
                other *= abs_rows[r2] + row_tail
        tail += row_tail * other
    const = math.fsum(E_s[r] @ X_s[r] for r in range(d))
    value *= np.exp(-1j * np.pi * const)
    return ThetaResult(value=complex(value), radius=R, tail_bound=tail, terms=terms)


def dyadic_eps(l: int) -> Fraction:
    """Gaussian width tied to the dyadic scale: eps = (2^l)^{-2}, exactly."""
    if l < 0:
        raise PreconditionError("need l >= 0")
    return Fraction(1, 4**l)


# --- the Gaussian multilinear operator --------------------------------------


def gaussian_kernel(M, X, eps: float, T_inv) -> complex:
    """e^{pi i tr(M (X + i eps T^{-1}) M^t)} for one integer d x k matrix."""
    M = np.asarray(M, dtype=np.float64)
    Z = np.asarray(X, dtype=np.complex128) + 1j * float(eps) * np.asarray(
        T_inv, dtype=np.float64
    )
    return complex(np.exp(1j * np.pi * np.einsum("ri,ij,rj->", M, Z, M)))


def _gaussian_setup(X, eps: float, T, k: int):
    if eps <= 0:
        raise PreconditionError("eps must be positive")
    T = np.asarray(T, dtype=np.float64)
    T_inv = np.linalg.inv(T)
    lam_T = float(np.linalg.eigvalsh(T_inv).min())
    if lam_T <= 0:
        raise PreconditionError("Gram matrix must be positive definite")
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (k, k) or not np.allclose(X, X.T, atol=1e-12):
        raise PreconditionError(f"phase matrix must be symmetric {k}x{k}")
    return X, T_inv, lam_T


def gaussian_operator(
    fs: Sequence[GridFunction],
    X,
    eps: float,
    T,
    x: Sequence[int],
    *,
    tol: float = 1e-12,
) -> complex:
    """Sum of f_1(x+y_1)...f_k(x+y_k) weighted by the Gaussian kernel.

    The y_i are the columns of the integer matrix variable; each column is
    truncated to the radius where the Gaussian envelope drops below tol,
    intersected with the support box of its factor.
    """
    fs = list(fs)
    k = len(fs)
    if k < 1:
        raise PreconditionError("need at least one factor")
    d = fs[0].box.dim
    if any(f.box.dim != d for f in fs):
        raise PreconditionError("factor dimensions disagree")
    X, T_inv, lam_T = _gaussian_setup(X, eps, T, k)
    R = truncation_radius(eps * T_inv, tol)
    x = np.asarray(x, dtype=np.int64)

    cand = []
    for f in fs:
        lo = [max(f.box.lower[a] - int(x[a]), -R) for a in range(d)]
        hi = [min(f.box.upper[a] - 1 - int(x[a]), R) for a in range(d)]
        if any(h < l for l, h in zip(lo, hi)):
            return 0.0 + 0.0j
        axes = [np.arange(l, h + 1) for l, h in zip(lo, hi)]
        grid = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grid], axis=1)
        vals = f.sample(pts + x)
        keep = vals != 0
        cand.append((pts[keep], vals[keep]))
        if not keep.any():
            return 0.0 + 0.0j

    Z = X + 1j * eps * T_inv
    idx = np.meshgrid(*[np.arange(len(p)) for p, _ in cand], indexing="ij")
    combo_cols = [cand[i][0][idx[i].ravel()] for i in range(k)]
    weights = cand[0][1][idx[0].ravel()].astype(np.complex128)
    for i in range(1, k):
        weights = weights * cand[i][1][idx[i].ravel()]
    M = np.stack(combo_cols, axis=2)  # (combos, d, k)
    quad = np.einsum("crk,kl,crl->c", M, Z, M)
    return complex((weights * np.exp(1j * np.pi * quad)).sum())


def gaussian_transform_direct(
    X,
    eps: float,
    T,
    script_X,
    *,
    d: int,
    k: int,
    tol: float = 1e-12,
) -> complex:
    """Transform of the Gaussian kernel at a frequency matrix, by brute sum.

    Enumerates whole d x k integer matrices in one flat pass (no row
    factorization), as an independent cross-check of the theta route.
    """
    X, T_inv, _ = _gaussian_setup(X, eps, T, k)
    script_X = np.asarray(script_X, dtype=np.float64)
    if script_X.shape != (d, k):
        raise PreconditionError(f"frequency matrix must be {d}x{k}")
    R = truncation_radius(eps * T_inv, tol)
    if (2 * R + 1) ** (d * k) > 500_000_000:
        raise PreconditionError("brute enumeration too large at this tolerance")
    axis = np.arange(-R, R + 1)
    Z = X + 1j * eps * T_inv
    total = complex(0.0)
    # chunk over the leading entry so the mesh never holds the full lattice
    if d * k == 1:
        rest = np.empty((1, 0))
    else:
        grids = np.meshgrid(*([axis] * (d * k - 1)), indexing="ij")
        rest = np.stack([g.ravel() for g in grids], axis=1)
    block = np.empty((len(rest), d * k))
    block[:, 1:] = rest
    for m0 in axis:
        block[:, 0] = m0
        M = block.reshape(-1, d, k)
        quad = np.einsum("crk,kl,crl->c", M, Z, M)
        lin = np.einsum("crk,rk->c", M, script_X)
        total += complex(np.exp(1j * np.pi * quad - 2j * np.pi * lin).sum())
    return total


# --- unit-cell phase integrals ----------------------------------------------


def phase_node_count(a_max: float) -> int:
    """Gauss-Legendre nodes per axis for e^{pi i a x} on [0, 2], |a| <= a_max.

    The worst integrand oscillates through 2*a_max full periods; the node
    count tracks that linearly with a fixed safety margin, which drives the
    quadrature error for every such exponential below 1e-10.
    """
    return max(24, math.ceil(7 * a_max) + 24)


def phase_integral(A, *, nodes: Optional[int] = None) -> complex:
    """Quadrature of e^{pi i tr(AX)} over symmetric X with entries in [0, 2].

    The domain is the cell [0,2]^{k(k+1)/2} in the upper-triangle
    coordinates; the integrand splits into one exponential per coordinate
    (off-diagonal entries appear twice in the trace), so the tensor
    Gauss-Legendre rule collapses to a product of one-dimensional rules.
    For integer A the exact value is 2^{k(k+1)/2} when A = 0 and 0
    otherwise; the quadrature is kept deliberately independent of that
    fact so it can act as an oracle for it.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise PreconditionError("need a square matrix")
    if not np.allclose(A, A.T, atol=1e-12):
        raise PreconditionError("matrix must be symmetric")
    k = A.shape[0]
    freqs = []
    for i in range(k):
        freqs.append(A[i, i])
    for i in range(k):
        for j in range(i + 1, k):
            freqs.append(2.0 * A[i, j])
    if nodes is None:
        nodes = phase_node_count(max(abs(f) for f in freqs) if freqs else 1.0)
    xs, ws = np.polynomial.legendre.leggauss(nodes)
    xs = xs + 1.0  # map [-1, 1] to [0, 2]; weights already sum to 2
    out = complex(1.0)
    for a in freqs:
        out *= complex((ws * np.exp(1j * np.pi * a * xs)).sum())
    return out
