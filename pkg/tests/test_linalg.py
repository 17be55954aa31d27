import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy.matrices.normalforms import invariant_factors

from robinson_lab.linalg import (
    AbelianGroup,
    DirectLimit,
    NonSplitError,
    char_poly,
    cokernel,
    det,
    diagonal,
    direct_limit,
    identity,
    image_basis,
    integer_roots,
    inverse_unimodular,
    is_zero,
    kernel_basis,
    matmul,
    poly_eval_matrix,
    smith_normal_form,
    solve_integer,
)


def matrices(max_rows=5, max_cols=5, bound=6):
    return st.integers(1, max_rows).flatmap(
        lambda n: st.integers(1, max_cols).flatmap(
            lambda k: st.lists(st.lists(st.integers(-bound, bound), min_size=k, max_size=k), min_size=n, max_size=n)
        )
    )


def square(max_n=5, bound=5):
    return st.integers(1, max_n).flatmap(
        lambda n: st.lists(st.lists(st.integers(-bound, bound), min_size=n, max_size=n), min_size=n, max_size=n)
    )


def unimodular(n):
    """Products of elementary matrices."""
    ops = st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.integers(-2, 2)), max_size=6)

    def build(steps):
        m = identity(n)
        for i, j, f in steps:
            if i != j:
                m = matmul(m, [[int(r == c) + (f if (r, c) == (i, j) else 0) for c in range(n)] for r in range(n)])
        return m

    return ops.map(build)


@settings(max_examples=200, deadline=None)
@given(matrices())
def test_smith_normal_form(m):
    u, d, v = smith_normal_form(m, len(m[0]))
    assert matmul(matmul(u, m), v) == d
    assert abs(det(u)) == 1 and abs(det(v)) == 1
    n, k = len(m), len(m[0])
    assert all(d[i][j] == 0 for i in range(n) for j in range(k) if i != j)
    diag = diagonal(d)
    assert all(x >= 0 for x in diag)
    nonzero = [x for x in diag if x]
    assert diag[: len(nonzero)] == nonzero
    assert all(b % a == 0 for a, b in zip(nonzero, nonzero[1:]))
    # agrees with an independent implementation
    expected = [abs(int(x)) for x in invariant_factors(sympy.Matrix(m)) if x != 0]
    assert nonzero == expected


@settings(max_examples=100, deadline=None)
@given(square())
def test_det_matches_sympy(m):
    assert det(m) == int(sympy.Matrix(m).det())


@settings(max_examples=100, deadline=None)
@given(square())
def test_char_poly_and_cayley_hamilton(m):
    cp = char_poly(m)
    x = sympy.Symbol("x")
    assert cp == [int(c) for c in sympy.Poly(sympy.Matrix(m).charpoly(x).as_expr(), x).all_coeffs()]
    assert is_zero(poly_eval_matrix(cp, m))


@settings(max_examples=100, deadline=None)
@given(matrices())
def test_kernel_and_image(m):
    n, k = len(m), len(m[0])
    ker = kernel_basis(m, k)
    rank = sympy.Matrix(m).rank()
    assert (len(ker[0]) if ker and ker[0] else 0) == k - rank
    if ker and ker[0]:
        assert is_zero(matmul(m, ker))
    img = image_basis(m, k)
    if rank:
        # every column of m is an integer combination of the image basis
        for j in range(k):
            assert solve_integer(img, [row[j] for row in m]) is not None


def test_solve_integer():
    basis = [[2, 0], [0, 3], [0, 0]]
    assert solve_integer(basis, [4, 9, 0]) == [2, 3]
    assert solve_integer(basis, [1, 0, 0]) is None
    assert solve_integer(basis, [0, 0, 1]) is None


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5).flatmap(unimodular))
def test_inverse_unimodular(u):
    assert matmul(u, inverse_unimodular(u)) == identity(len(u))


def test_inverse_rejects_non_unimodular():
    with pytest.raises(ValueError):
        inverse_unimodular([[2, 0], [0, 1]])


def test_integer_roots():
    # (x - 2)^2 (x + 1) (x^2 + 1)
    x = sympy.Symbol("x")
    coeffs = [int(c) for c in sympy.Poly((x - 2) ** 2 * (x + 1) * (x**2 + 1), x).all_coeffs()]
    roots, rest = integer_roots(coeffs)
    assert roots == {2: 2, -1: 1}
    assert rest == [1, 0, 1]


def test_cokernel():
    assert str(cokernel([[2, 0], [0, 6]])) == "Z/2 + Z/6"
    assert str(cokernel([[1, 2], [3, 4]])) == "Z/2"
    g = cokernel([[0], [0]])
    assert (g.free_rank, g.torsion) == (2, ())


@pytest.mark.parametrize(
    "group, action, expected",
    [
        (AbelianGroup(1), [[2]], "Z[1/2]"),
        (AbelianGroup(1), [[-2]], "Z[1/2]"),
        (AbelianGroup(2), [[2, 1], [0, 1]], "Z[1/2] + Z"),
        (AbelianGroup(2), [[0, 1], [0, 0]], "0"),
        (AbelianGroup(1), [[3]], "Z[1/3]"),
        (AbelianGroup(0, (4,)), [[2]], "0"),
        (AbelianGroup(0, (2, 4)), [[1, 0], [0, 1]], "Z/2 + Z/4"),
        (AbelianGroup(1, (4,)), [[1, 0], [0, 2]], "Z[1/2] + Z/4"),
    ],
)
def test_direct_limit_examples(group, action, expected):
    assert str(direct_limit(group, action)) == expected


def test_direct_limit_refuses_jordan_blocks():
    with pytest.raises(NonSplitError):
        direct_limit(AbelianGroup(2), [[1, 0], [1, 1]])


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.sampled_from([0, 1, 2, 4]), min_size=1, max_size=5).flatmap(
        lambda eig: st.tuples(st.just(eig), unimodular(len(eig)))
    )
)
def test_direct_limit_is_invariant_under_conjugation(case):
    eig, p = case
    n = len(eig)
    d = [[eig[i] if i == j else 0 for j in range(n)] for i in range(n)]
    a = matmul(matmul(p, d), inverse_unimodular(p))
    limit = direct_limit(AbelianGroup(n), a)
    assert isinstance(limit, DirectLimit)
    for base in (1, 2, 4):
        assert limit.multiplicity(base) == eig.count(base)
    assert limit.rank == sum(1 for e in eig if e)
