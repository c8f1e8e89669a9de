from fractions import Fraction

import numpy as np
import pytest

from simplexlab.errors import PreconditionError, SlabFormatError
from simplexlab.grids import Box, GridFunction, LatticeSet
from simplexlab.slab import load_json_fixture, load_slab, save_json_fixture, save_slab


def test_box_basics():
    b = Box.cube(4, 2)
    assert b.lower == (-2, -2)
    assert b.extents == (4, 4)
    assert b.size == 16
    assert b.upper == (2, 2)
    assert b.contains((-2, 1)) and not b.contains((2, 0))
    assert b.index((-2, -2)) == (0, 0)
    assert len(list(b.points())) == 16
    assert b.shrink(1) == Box((-1, -1), (2, 2))
    with pytest.raises(PreconditionError):
        b.shrink(2)
    with pytest.raises(PreconditionError):
        Box((0,), (0,))


def test_grid_function_eval_and_norms():
    b = Box((0, 0), (2, 3))
    f = GridFunction(b, np.arange(6, dtype=float).reshape(2, 3))
    assert f.value_at((0, 2)) == 2.0
    assert f.value_at((5, 5)) == 0.0
    assert f.l2_norm() == pytest.approx(np.sqrt(sum(v * v for v in range(6))))
    assert f.sup_norm() == 5.0
    pts = np.array([[0, 0], [1, 2], [9, 9], [-1, 0]])
    assert f.sample(pts).tolist() == [0.0, 5.0, 0.0, 0.0]
    g = f.shifted((10, 0))
    assert g.value_at((10, 2)) == 2.0
    with pytest.raises(PreconditionError):
        GridFunction(b, np.zeros((3, 2)))


def test_lattice_set_membership_density():
    b = Box.cube(4, 2)
    s = LatticeSet.from_points(b, [(0, 0), (1, 1), (7, 7)])
    assert s.count == 2
    assert s.contains((0, 0)) and not s.contains((7, 7))
    assert s.density() == Fraction(2, 16)
    assert sorted(map(tuple, s.points())) == [(0, 0), (1, 1)]
    ind = s.indicator()
    assert ind.value_at((1, 1)) == 1.0 and ind.value_at((1, 0)) == 0.0
    many = s.contains_many(np.array([[0, 0], [1, 0], [99, 99]]))
    assert many.tolist() == [True, False, False]
    assert LatticeSet.full(b).count == 16
    assert s.union(LatticeSet.empty(b)).count == 2
    assert s.intersect(LatticeSet.full(b)).count == 2


def test_slab_roundtrip_grid(tmp_path):
    b = Box((-1, 0, 2), (2, 3, 2))
    rng = np.random.default_rng(7)
    f = GridFunction(b, rng.normal(size=b.extents), tag="chi:q=2,L=4")
    p = tmp_path / "f.slab"
    save_slab(p, f)
    g = load_slab(p)
    assert isinstance(g, GridFunction)
    assert g.box == b and g.tag == f.tag
    np.testing.assert_array_equal(g.values, f.values)


def test_slab_roundtrip_set(tmp_path):
    b = Box.cube(5, 3)
    rng = np.random.default_rng(11)
    s = LatticeSet(b, rng.random(b.extents) < 0.4)
    p = tmp_path / "s.slab"
    save_slab(p, s)
    t = load_slab(p)
    assert isinstance(t, LatticeSet)
    np.testing.assert_array_equal(t.mask, s.mask)


def test_slab_rejects_garbage(tmp_path):
    p = tmp_path / "bad.slab"
    p.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(SlabFormatError):
        load_slab(p)
    p.write_bytes(b"SLAB\x63\x00\x02\x00" + b"\x00" * 32)
    with pytest.raises(SlabFormatError):
        load_slab(p)
    good = tmp_path / "good.slab"
    save_slab(good, LatticeSet.full(Box.cube(2, 2)))
    truncated = good.read_bytes()[:-1]
    p.write_bytes(truncated)
    with pytest.raises(SlabFormatError):
        load_slab(p)


def test_json_fixtures(tmp_path):
    b = Box((0, 0), (2, 2))
    s = LatticeSet.from_points(b, [(0, 1), (1, 0)])
    p = tmp_path / "s.json"
    save_json_fixture(p, s)
    t = load_json_fixture(p)
    np.testing.assert_array_equal(t.mask, s.mask)
    f = GridFunction(b, np.eye(2))
    pf = tmp_path / "f.json"
    save_json_fixture(pf, f)
    g = load_json_fixture(pf)
    np.testing.assert_array_equal(g.values, f.values)
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "mystery"}')
    with pytest.raises(SlabFormatError):
        load_json_fixture(bad)
