import itertools

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from simplexlab.core import (
    Simplex,
    admissible_radii,
    bareiss_det,
    dot,
    format_simplex,
    gram_matrix,
    is_isometric,
    is_isometric_distances,
    is_nondegenerate,
    leading_minors,
    norm_sq,
    orthonormal_simplex,
    parse_simplex,
)
from simplexlab.errors import PreconditionError


def e(i, d):
    v = [0] * d
    v[i] = 1
    return tuple(v)


def test_dot_norm_basics():
    assert dot((1, 2, 3), (4, 5, 6)) == 32
    assert norm_sq((3, -4)) == 25
    assert norm_sq(()) == 0
    with pytest.raises(PreconditionError):
        dot((1, 2), (1, 2, 3))


small_int = st.integers(min_value=-9, max_value=9)


@given(
    st.integers(min_value=1, max_value=5).flatmap(
        lambda n: st.lists(
            st.lists(small_int, min_size=n, max_size=n), min_size=n, max_size=n
        )
    )
)
@settings(max_examples=200)
def test_bareiss_matches_sympy(rows):
    assert bareiss_det(rows) == sympy.Matrix(rows).det()


def test_bareiss_singular_and_pivoting():
    assert bareiss_det([[0, 1], [1, 0]]) == -1
    assert bareiss_det([[1, 2], [2, 4]]) == 0
    assert bareiss_det([[0, 0], [0, 0]]) == 0
    assert bareiss_det([[0, 2, 1], [3, 0, 0], [1, 1, 1]]) == sympy.Matrix(
        [[0, 2, 1], [3, 0, 0], [1, 1, 1]]
    ).det()


def test_leading_minors_example():
    assert leading_minors([[2, 1], [1, 2]]) == [2, 3]
    assert leading_minors([[1]]) == [1]


def test_gram_examples():
    assert gram_matrix(Simplex(5, (e(0, 5),))) == ((1,),)
    assert gram_matrix(Simplex(7, (e(0, 7), e(1, 7)))) == ((1, 0), (0, 1))
    pair = Simplex(7, ((1, 1, 0, 0, 0, 0, 0), (0, 1, 1, 0, 0, 0, 0)))
    assert gram_matrix(pair) == ((2, 1), (1, 2))


def test_gram_symmetric_nonneg_diagonal():
    s = Simplex(4, ((1, -2, 0, 3), (2, 2, -1, 0), (0, 0, 1, 1)))
    g = gram_matrix(s)
    for i in range(s.k):
        assert g[i][i] >= 0
        for j in range(s.k):
            assert g[i][j] == g[j][i]


def test_nondegeneracy_examples():
    assert is_nondegenerate(orthonormal_simplex(7, 2))
    dependent = Simplex(3, ((1, 0, 0), (2, 0, 0)))
    assert not is_nondegenerate(dependent)
    assert is_nondegenerate(
        Simplex(3, ((1, 1, 0), (0, 1, 1)))
    )  # Gram [[2,1],[1,2]], minors 2, 3


def test_simplex_validation():
    with pytest.raises(PreconditionError):
        Simplex(0, ((1,),))
    with pytest.raises(PreconditionError):
        Simplex(2, ())
    with pytest.raises(PreconditionError):
        Simplex(2, ((1, 0, 0),))
    with pytest.raises(PreconditionError):
        Simplex(2, ((1, 0), (0, 1), (1, 1)))


def test_isometric_trivial_cases():
    s = Simplex(3, ((1, 1, 0), (0, 1, 1)))
    ident = s.vertices
    assert is_isometric(ident, s, 1)
    permuted = tuple(tuple(v[i] for i in (2, 0, 1)) for v in ident)
    assert is_isometric(permuted, s, 1)
    doubled = tuple(tuple(2 * c for c in v) for v in ident)
    assert not is_isometric(doubled, s, 1)
    assert is_isometric(doubled, s, 4)


def test_isometric_validates_shapes():
    s = orthonormal_simplex(3, 2)
    with pytest.raises(PreconditionError):
        is_isometric((e(0, 3),), s, 1)
    with pytest.raises(PreconditionError):
        is_isometric((e(0, 2), e(1, 2)), s, 1)


def test_isometry_routes_agree_exhaustive_d2():
    s1 = Simplex(2, ((1, 0),))
    s2 = Simplex(2, ((1, 1), (1, 0)))
    coords = range(-3, 4)
    vecs = list(itertools.product(coords, coords))
    for lam_sq in (1, 2, 4):
        for y in vecs:
            assert is_isometric((y,), s1, lam_sq) == is_isometric_distances(
                (y,), s1, lam_sq
            )
        for y1, y2 in itertools.product(vecs, vecs):
            tup = (y1, y2)
            assert is_isometric(tup, s2, lam_sq) == is_isometric_distances(
                tup, s2, lam_sq
            )


@given(
    st.integers(min_value=1, max_value=4).flatmap(
        lambda d: st.tuples(
            st.just(d),
            st.lists(
                st.tuples(*[small_int] * d), min_size=1, max_size=min(d, 2)
            ),
            st.lists(
                st.tuples(*[small_int] * d), min_size=1, max_size=min(d, 2)
            ),
            st.integers(min_value=1, max_value=5),
        )
    )
)
@settings(max_examples=300)
def test_isometry_routes_agree_random(args):
    d, verts, tup, lam_sq = args
    if len(tup) != len(verts):
        tup = (tup * len(verts))[: len(verts)]
    s = Simplex(d, tuple(verts))
    assert is_isometric(tuple(tup), s, lam_sq) == is_isometric_distances(
        tuple(tup), s, lam_sq
    )


@given(
    st.tuples(
        st.permutations(range(3)),
        st.tuples(*[st.sampled_from((-1, 1))] * 3),
        st.lists(st.tuples(*[small_int] * 3), min_size=2, max_size=2),
        st.integers(min_value=1, max_value=4),
    )
)
@settings(max_examples=200)
def test_isometry_signed_permutation_invariant(args):
    perm, signs, tup, lam_sq = args
    s = Simplex(3, ((1, 1, 0), (0, 1, 1)))

    def apply(v):
        return tuple(signs[i] * v[perm[i]] for i in range(3))

    mapped = tuple(apply(y) for y in tup)
    assert is_isometric(tuple(tup), s, lam_sq) == is_isometric(mapped, s, lam_sq)


def test_admissible_radii():
    assert admissible_radii(3) == [1, 2, 3]
    assert admissible_radii(1) == [1]
    assert admissible_radii(0) == []
    assert admissible_radii(4, orthonormal_simplex(5, 2)) == [1, 2, 3, 4]
    with pytest.raises(PreconditionError):
        admissible_radii(-1)


def test_parse_and_format():
    s = parse_simplex("e-orthonormal:2", 7)
    assert s == orthonormal_simplex(7, 2)
    s2 = parse_simplex("1,1,0;0,1,1", 3)
    assert s2.vertices == ((1, 1, 0), (0, 1, 1))
    assert parse_simplex(format_simplex(s2), 3) == s2
    with pytest.raises(PreconditionError):
        parse_simplex("e-orthonormal:x", 5)
    with pytest.raises(PreconditionError):
        parse_simplex("1,2;3", 2)
    with pytest.raises(PreconditionError):
        parse_simplex("", 2)
