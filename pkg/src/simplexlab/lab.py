"""Experiment harness: set generators, pinned-window runs, reports.

Everything here is driven by a config + seed pair and must reproduce
byte-identically (the created/runtime fields are the only volatile ones),
so random membership uses a counter-based hash keyed by (seed, coordinates)
rather than a stateful stream.
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from .averaging import _pin_candidates, _pin_hit_counts, shell_size, shell_tuples
from .core import Simplex, parse_simplex
from .enumeration import iter_embeddings
from .errors import EmptyShellError, PreconditionError
from .grids import Box, LatticeSet

SCHEMA_VERSION = 1

__all__ = [
    "generate_set",
    "periodic_pattern_density",
    "ExperimentConfig",
    "ExperimentReport",
    "pinned_experiment",
    "CorollaryReport",
    "corollary_q_check",
    "emit_report",
    "load_report",
]


# --- set generators ---------------------------------------------------------

_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; wraparound multiplication is the point
    with np.errstate(over="ignore"):
        x = (x + _GOLDEN).astype(np.uint64)
        x ^= x >> np.uint64(30)
        x *= _MIX1
        x ^= x >> np.uint64(27)
        x *= _MIX2
        x ^= x >> np.uint64(31)
    return x


def _bernoulli_mask(box: Box, delta: float, seed: int) -> np.ndarray:
    if not 0 <= delta <= 1:
        raise PreconditionError("density must lie in [0, 1]")
    h = _mix(np.uint64(seed) * np.ones(box.extents, dtype=np.uint64))
    coords = np.indices(box.extents)
    for a in range(box.dim):
        axis = (coords[a] + box.lower[a]).astype(np.int64).astype(np.uint64)
        h = _mix(h ^ axis)
    threshold = min(int(delta * 2**64), 2**64 - 1)
    return h < np.uint64(threshold)


def _congruence_mask(box: Box, r: int) -> np.ndarray:
    if r < 1:
        raise PreconditionError("modulus must be >= 1")
    coords = np.indices(box.extents)
    mask = np.ones(box.extents, dtype=bool)
    for a in range(box.dim):
        mask &= (coords[a] + box.lower[a]) % r == 0
    return mask


def _periodic_pattern_mask(box: Box, q: int, M: int) -> np.ndarray:
    """Near-cube blocks of integer points repeated on a widely spaced grid.

    One block is the integer cube of radius qM/2; blocks repeat with period
    4*d*q*M per axis, so no two members realize the distance q*d*M (inside
    a block the diameter is too small, across blocks every offset is too
    large).
    """
    if q < 1 or M < 1:
        raise PreconditionError("need q >= 1 and M >= 1")
    d = box.dim
    period = 4 * d * q * M
    half = (q * M) // 2
    coords = np.indices(box.extents)
    mask = np.ones(box.extents, dtype=bool)
    for a in range(d):
        m = (coords[a] + box.lower[a]) % period
        mask &= (m <= half) | (m >= period - half)
    return mask


def periodic_pattern_density(q: int, M: int, d: int) -> Fraction:
    """Exact density of the periodic pattern over whole periods."""
    if q < 1 or M < 1 or d < 1:
        raise PreconditionError("need q, M, d >= 1")
    per_axis = 2 * ((q * M) // 2) + 1
    return Fraction(per_axis, 4 * d * q * M) ** d


def generate_set(kind: str, params: dict, box: Box, seed: int = 0) -> LatticeSet:
    """Build a lattice set in the box from a named generator.

    Kinds: "bernoulli" (params: delta), "congruence" (params: r),
    "periodic-counterexample" (params: q, M), "union" (params: parts, a
    list of {kind, params} sub-specs sharing the seed).
    """
    if kind == "bernoulli":
        return LatticeSet(box, _bernoulli_mask(box, float(params["delta"]), seed))
    if kind == "congruence":
        return LatticeSet(box, _congruence_mask(box, int(params["r"])))
    if kind == "periodic-counterexample":
        return LatticeSet(
            box, _periodic_pattern_mask(box, int(params["q"]), int(params["M"]))
        )
    if kind == "union":
        parts = params.get("parts", [])
        if not parts:
            raise PreconditionError("union needs at least one part")
        mask = np.zeros(box.extents, dtype=bool)
        for i, part in enumerate(parts):
            sub = generate_set(part["kind"], part.get("params", {}), box, seed + i)
            mask |= sub.mask
        return LatticeSet(box, mask)
    raise PreconditionError(f"unknown set kind {kind!r}")


# --- experiment config ------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Inputs of one pinned-window experiment, fully determining its output."""

    dim: int
    simplex: str
    set_kind: str
    lambda_sq_min: int
    lambda_sq_max: int
    box_side: int
    set_params: dict = field(default_factory=dict)
    eps: float = 0.1
    eta: Optional[float] = None
    scale_q: int = 1
    seed: int = 0
    max_pins: Optional[int] = None

    def __post_init__(self):
        if self.lambda_sq_min < 1 or self.lambda_sq_max < self.lambda_sq_min:
            raise PreconditionError("need 1 <= lambda_sq_min <= lambda_sq_max")
        if self.box_side < 1:
            raise PreconditionError("box side must be positive")
        if not 0 < self.eps < 1:
            raise PreconditionError("eps must lie in (0, 1)")
        if self.scale_q < 1:
            raise PreconditionError("scale q must be >= 1")
        if self.eta is not None and self.eta > self.eps**2 / 10:
            raise PreconditionError(
                f"eta must satisfy eta <= eps^2/10 = {self.eps ** 2 / 10:.3g}"
            )
        s = self.simplex_obj()
        if self.dim < 2 * s.k + 3:
            warnings.warn(
                f"dim {self.dim} below the hypothesis range 2k+3 = {2 * s.k + 3}; "
                "results are exploratory only",
                stacklevel=2,
            )

    def simplex_obj(self) -> Simplex:
        return parse_simplex(self.simplex, self.dim)

    def window(self) -> list:
        return list(range(self.lambda_sq_min, self.lambda_sq_max + 1))


@dataclass
class ExperimentReport:
    """Everything pinned_experiment found, ready for serialization."""

    schema_version: int
    created: str
    runtime_s: float
    config: dict
    delta_hat: Fraction
    threshold: Fraction
    lambda_sqs: list
    skipped_shells: list
    pins: list
    values: list  # values[p][i]: average at pins[p], radius lambda_sqs[i]
    min_values: list
    best_pin: Tuple[int, ...]
    best_value: Fraction
    success_fraction: Fraction
    lambda0_found: Optional[int]
    passes: bool
    subsampled: bool

    def to_dict(self) -> dict:
        out = asdict(self)
        out["delta_hat"] = str(self.delta_hat)
        out["threshold"] = str(self.threshold)
        out["values"] = [[str(v) for v in row] for row in self.values]
        out["min_values"] = [str(v) for v in self.min_values]
        out["best_value"] = str(self.best_value)
        out["success_fraction"] = str(self.success_fraction)
        out["best_pin"] = list(self.best_pin)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentReport":
        return cls(
            schema_version=raw["schema_version"],
            created=raw["created"],
            runtime_s=raw["runtime_s"],
            config=raw["config"],
            delta_hat=Fraction(raw["delta_hat"]),
            threshold=Fraction(raw["threshold"]),
            lambda_sqs=list(raw["lambda_sqs"]),
            skipped_shells=list(raw["skipped_shells"]),
            pins=[list(p) for p in raw["pins"]],
            values=[[Fraction(v) for v in row] for row in raw["values"]],
            min_values=[Fraction(v) for v in raw["min_values"]],
            best_pin=tuple(raw["best_pin"]),
            best_value=Fraction(raw["best_value"]),
            success_fraction=Fraction(raw["success_fraction"]),
            lambda0_found=raw["lambda0_found"],
            passes=raw["passes"],
            subsampled=raw["subsampled"],
        )


def pinned_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Exact pinned averages over the radius window for every admissible pin.

    One pin set (margin taken at the top radius) is scored at every radius,
    so per-pin minima, the best pin, and the smallest passing window start
    all refer to the same pins.  A window start passes when some pin stays
    above the density-power threshold from there to the top.
    """
    t0 = time.perf_counter()
    simplex = config.simplex_obj()
    box = Box.cube(config.box_side, config.dim)
    A = generate_set(config.set_kind, config.set_params, box, config.seed)
    if A.count == 0:
        raise PreconditionError("generated set is empty")
    window = config.window()

    pins = _pin_candidates(A, simplex, max(window))
    if len(pins) == 0:
        raise PreconditionError("no admissible pins clear the margin")
    subsampled = False
    if config.max_pins is not None and len(pins) > config.max_pins:
        rng = np.random.default_rng(config.seed)
        pins = pins[rng.choice(len(pins), size=config.max_pins, replace=False)]
        subsampled = True
    pins = pins[np.lexsort(pins.T[::-1])]

    lambda_sqs = []
    skipped = []
    columns = []
    for ls in window:
        size = shell_size(simplex, ls, config.scale_q)
        if size == 0:
            skipped.append(ls)
            continue
        counts = _pin_hit_counts(A, pins, shell_tuples(simplex, ls, config.scale_q))
        lambda_sqs.append(ls)
        columns.append([Fraction(int(c), size) for c in counts])
    if not lambda_sqs:
        raise EmptyShellError("every shell in the window is empty")

    values = [[col[p] for col in columns] for p in range(len(pins))]
    min_values = [min(row) for row in values]
    delta_hat = A.density()
    eps = Fraction(config.eps).limit_denominator(10**9)
    threshold = delta_hat**simplex.k - eps

    best = max(range(len(pins)), key=lambda p: min_values[p])
    wins = sum(1 for v in min_values if v > threshold)

    # scan window starts right to left; suffix minima only grow as the
    # window shrinks, so the first passing start is the smallest
    lambda0 = None
    suffix = [None] * len(pins)
    for i in range(len(lambda_sqs) - 1, -1, -1):
        for p in range(len(pins)):
            v = values[p][i]
            suffix[p] = v if suffix[p] is None else min(suffix[p], v)
        if any(v > threshold for v in suffix):
            lambda0 = lambda_sqs[i]
        else:
            break

    return ExperimentReport(
        schema_version=SCHEMA_VERSION,
        created=datetime.now(timezone.utc).isoformat(),
        runtime_s=time.perf_counter() - t0,
        config=asdict(config),
        delta_hat=delta_hat,
        threshold=threshold,
        lambda_sqs=lambda_sqs,
        skipped_shells=skipped,
        pins=[list(map(int, p)) for p in pins],
        values=values,
        min_values=min_values,
        best_pin=tuple(int(c) for c in pins[best]),
        best_value=min_values[best],
        success_fraction=Fraction(wins, len(pins)),
        lambda0_found=lambda0,
        passes=lambda0 == lambda_sqs[0],
        subsampled=subsampled,
    )


# --- congruence rescaling check ---------------------------------------------


@dataclass
class CorollaryRow:
    lambda_sq: int
    count_set: int
    rescaled_lambda_sq: Optional[int]
    count_rescaled: Optional[int]
    matched: bool


@dataclass
class CorollaryReport:
    r: int
    dim: int
    box_side: int
    rows: list

    @property
    def passes(self) -> bool:
        return all(row.matched for row in self.rows)


def _axis_interval(box: Box, a: int) -> Tuple[int, int]:
    return box.lower[a], box.lower[a] + box.extents[a] - 1


def corollary_q_check(
    r: int,
    *,
    dim: int,
    simplex: str = "e-orthonormal:1",
    lambda_sq_max: int = 9,
    box_side: int = 11,
) -> CorollaryReport:
    """Identity between counts on a congruence lattice and their rescaling.

    Pins at the origin of A = (rZ)^d in the box.  A radius not divisible by
    r^2 must produce zero tuples; a divisible one must biject, via dividing
    every coordinate by r, with the tuples at the rescaled radius inside
    the shrunken box.  Both sides are enumerated independently and compared
    as exact tuple sets.
    """
    if r < 1:
        raise PreconditionError("need r >= 1")
    s = parse_simplex(simplex, dim)
    box = Box.cube(box_side, dim)
    small_axes = []
    for a in range(dim):
        lo, hi = _axis_interval(box, a)
        small_axes.append((-((-lo) // r), hi // r))

    def in_box(t) -> bool:
        return all(
            box.lower[a] <= c < box.lower[a] + box.extents[a]
            for vec in t
            for a, c in enumerate(vec)
        )

    def in_small(t) -> bool:
        return all(
            small_axes[a][0] <= c <= small_axes[a][1]
            for vec in t
            for a, c in enumerate(vec)
        )

    rows = []
    for ls in range(1, lambda_sq_max + 1):
        set_tuples = {
            t for t in iter_embeddings(s, ls, sublattice=r) if in_box(t)
        }
        if ls % (r * r):
            rows.append(
                CorollaryRow(
                    lambda_sq=ls,
                    count_set=len(set_tuples),
                    rescaled_lambda_sq=None,
                    count_rescaled=None,
                    matched=len(set_tuples) == 0,
                )
            )
            continue
        mu = ls // (r * r)
        rescaled = {
            t for t in iter_embeddings(s, mu) if in_small(t)
        }
        image = {
            tuple(tuple(c // r for c in vec) for vec in t) for t in set_tuples
        }
        rows.append(
            CorollaryRow(
                lambda_sq=ls,
                count_set=len(set_tuples),
                rescaled_lambda_sq=mu,
                count_rescaled=len(rescaled),
                matched=image == rescaled,
            )
        )
    return CorollaryReport(r=r, dim=dim, box_side=box_side, rows=rows)


# --- report emission --------------------------------------------------------


def emit_report(report: ExperimentReport, path, fmt: str = "json") -> None:
    """Write the report as machine JSON or plot-ready CSV rows."""
    if fmt == "json":
        payload = json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(payload)
        except OSError as e:
            raise OSError(f"cannot write report to {path}: {e}") from e
        return
    if fmt == "csv":
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["pin_index", "pin", "lambda_sq", "value"])
                for p, row in enumerate(report.values):
                    pin = " ".join(str(c) for c in report.pins[p])
                    for i, v in enumerate(row):
                        writer.writerow([p, pin, report.lambda_sqs[i], str(v)])
        except OSError as e:
            raise OSError(f"cannot write report to {path}: {e}") from e
        return
    raise PreconditionError(f"unknown report format {fmt!r}")


def load_report(path) -> ExperimentReport:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as e:
        raise OSError(f"cannot read report from {path}: {e}") from e
    return ExperimentReport.from_dict(raw)
