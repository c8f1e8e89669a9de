from fractions import Fraction

import numpy as np
import pytest

from simplexlab.averaging import (
    maximal_function,
    multilinear_average,
    operator_norm_probe,
    pinned_profile,
    shell_size,
    shell_tuples,
)
from simplexlab.core import Simplex, orthonormal_simplex
from simplexlab.errors import EmptyShellError, PreconditionError
from simplexlab.grids import Box, GridFunction, LatticeSet


E1D5 = Simplex(5, ((1, 0, 0, 0, 0),))
ORIGIN5 = (0, 0, 0, 0, 0)


def parity_set(side=13, d=5):
    box = Box.cube(side, d)
    idx = np.indices(box.extents) + np.asarray(box.lower).reshape((d,) + (1,) * d)
    return LatticeSet(box, (idx % 2 == 0).all(axis=0))


def test_normalization_constant_inputs():
    box = Box.cube(9, 5)
    ones = GridFunction.constant(box, 1.0)
    assert multilinear_average([ones], E1D5, 4, ORIGIN5) == pytest.approx(1.0)
    s = orthonormal_simplex(4, 2)
    box4 = Box.cube(9, 4)
    ones4 = GridFunction.constant(box4, 1.0)
    assert multilinear_average([ones4, ones4], s, 2, (0, 0, 0, 0)) == pytest.approx(1.0)


def test_constant_scaling_exact_rational():
    box = Box.cube(9, 4)
    delta = 0.3
    f = GridFunction.constant(box, delta)
    s = orthonormal_simplex(4, 2)
    val = multilinear_average([f, f], s, 2, (0, 0, 0, 0), exact=True)
    assert val == Fraction(delta) ** 2
    assert multilinear_average([f, f], s, 2, (0, 0, 0, 0)) == pytest.approx(delta**2)


def test_parity_example_exact():
    A = parity_set()
    val = multilinear_average([A.indicator()], E1D5, 4, ORIGIN5, exact=True)
    assert val == Fraction(1, 9)  # 10 of the 90 sphere points survive parity


def test_empty_shell_error():
    box = Box.cube(9, 3)
    f = GridFunction.constant(box, 1.0)
    s = Simplex(3, ((1, 0, 0),))
    assert shell_size(s, 7) == 0
    with pytest.raises(EmptyShellError):
        multilinear_average([f], s, 7, (0, 0, 0))


def test_multilinearity():
    rng = np.random.default_rng(3)
    box = Box.cube(11, 4)
    s = orthonormal_simplex(4, 2)
    f = GridFunction(box, rng.normal(size=box.extents))
    g = GridFunction(box, rng.normal(size=box.extents))
    x = (1, 0, -1, 0)
    base = multilinear_average([f, g], s, 2, x)
    scaled = multilinear_average([f.scaled(2.5), g], s, 2, x)
    assert scaled == pytest.approx(2.5 * base, rel=1e-12)


def test_translation_equivariance():
    rng = np.random.default_rng(4)
    box = Box.cube(11, 4)
    s = orthonormal_simplex(4, 2)
    f = GridFunction(box, rng.normal(size=box.extents))
    g = GridFunction(box, rng.normal(size=box.extents))
    x = (0, 1, 0, -1)
    t = (3, -2, 1, 5)
    base = multilinear_average([f, g], s, 3, x)
    moved = multilinear_average(
        [f.shifted(t), g.shifted(t)], s, 3, tuple(a + b for a, b in zip(x, t))
    )
    assert moved == pytest.approx(base, rel=1e-12, abs=1e-15)


def test_maximal_function_properties():
    box = Box.cube(13, 5)
    f = GridFunction.constant(box, 0.5)
    val = maximal_function([f], E1D5, [1, 2, 4], ORIGIN5)
    assert val == pytest.approx(0.5)
    single = maximal_function([f], E1D5, [2], ORIGIN5)
    assert single == multilinear_average([f], E1D5, 2, ORIGIN5)
    r1 = maximal_function([f], E1D5, [1, 2], ORIGIN5)
    r2 = maximal_function([f], E1D5, [1, 2, 4], ORIGIN5)
    assert r1 <= r2
    for ls in (1, 2, 4):
        assert val >= abs(multilinear_average([f], E1D5, ls, ORIGIN5))
    with pytest.raises(PreconditionError):
        maximal_function([f], E1D5, [], ORIGIN5)


def test_maximal_skips_empty_shells():
    box = Box.cube(9, 3)
    f = GridFunction.constant(box, 1.0)
    s = Simplex(3, ((1, 0, 0),))
    with pytest.warns(UserWarning, match="skipped empty shells"):
        val = maximal_function([f], s, [4, 7], (0, 0, 0))
    assert val == pytest.approx(1.0)
    with pytest.raises(EmptyShellError):
        maximal_function([f], s, [7], (0, 0, 0))


def test_pinned_profile_full_box():
    box = Box.cube(9, 4)
    A = LatticeSet.full(box)
    s = orthonormal_simplex(4, 1)
    prof = pinned_profile(A, s, [1, 2, 4], eps=Fraction(1, 10))
    assert all(v == 1 for v in prof.min_values)
    assert prof.best_value == 1
    assert prof.delta_hat == 1
    assert prof.passes()
    assert prof.success_fraction == 1


def test_pinned_profile_parity_set():
    A = parity_set()
    prof = pinned_profile(A, E1D5, [4])
    assert prof.best_value == Fraction(1, 9)
    # every even pin sees the same translated picture
    assert set(prof.min_values) == {Fraction(1, 9)}


def test_pinned_profile_subsample_deterministic():
    A = parity_set()
    p1 = pinned_profile(A, E1D5, [4], max_pins=5, seed=42)
    p2 = pinned_profile(A, E1D5, [4], max_pins=5, seed=42)
    assert p1.subsampled and p2.subsampled
    assert np.array_equal(p1.pins, p2.pins)
    assert p1.min_values == p2.min_values
    with pytest.raises(PreconditionError):
        pinned_profile(LatticeSet.empty(A.box), E1D5, [4])


def test_shell_cache_consistency():
    s = orthonormal_simplex(4, 2)
    tuples = shell_tuples(s, 2)
    assert len(tuples) == shell_size(s, 2)
    gram = np.asarray(s.gram)
    for row in tuples[:16]:
        assert np.array_equal(row @ row.T, 2 * gram)


def test_probe_smoke_k1():
    s = Simplex(2, ((1, 0),))
    res = operator_norm_probe(s, 8, 3, [1, 2], seed=5)
    assert len(res.ratios) == 3
    assert all(r > 0 for r in res.ratios)
    again = operator_norm_probe(s, 8, 3, [1, 2], seed=5)
    assert res.ratios == again.ratios
    # averaging is an L2 contraction up to shell overlap; ratios stay modest
    assert res.max_ratio < 3.0


def test_probe_smoke_k2_generic():
    s = orthonormal_simplex(3, 2)
    res = operator_norm_probe(s, 5, 2, [1], seed=9)
    assert len(res.ratios) == 2
    assert all(np.isfinite(r) for r in res.ratios)
