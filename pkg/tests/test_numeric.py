from fractions import Fraction

import pytest

from outclass.numeric import Quadratic, integer_kernel


def test_golden_ratio_arithmetic():
    lam = Quadratic(Fraction(1, 2), Fraction(1, 2), 5)  # (1+sqrt5)/2
    assert lam * lam == lam + 1
    assert lam**2 == lam + 1
    assert lam * lam.inverse() == Quadratic(1, 0, 5)
    assert (lam**6) * (lam**-6) == 1
    assert float(lam) == pytest.approx((1 + 5**0.5) / 2)


def test_ordering_is_exact():
    lam = Quadratic(Fraction(1, 2), Fraction(1, 2), 5)
    assert lam > 1
    assert lam < 2
    assert Quadratic(0, 1, 5) > Quadratic(2, 0, 5)  # sqrt5 > 2
    assert Quadratic(3, -1, 5) > 0  # 3 - sqrt5 > 0
    assert Quadratic(2, -1, 5) < 0  # 2 - sqrt5 < 0
    assert sorted([lam + 1, lam, Quadratic(1, 0, 5)])[0] == 1


def test_division_and_errors():
    x = Quadratic(1, 1, 2)
    assert (x / x) == 1
    assert 1 / Quadratic(0, 1, 2) == Quadratic(0, Fraction(1, 2), 2)
    with pytest.raises(ZeroDivisionError):
        Quadratic(0, 0, 2).inverse()
    with pytest.raises(ValueError):
        Quadratic(0, 1, 2) * Quadratic(0, 1, 3)


def test_integer_kernel_basic():
    # x + y - z = 0, kernel rank 2
    basis = integer_kernel([[1, 1, -1]])
    assert basis == [[1, -1, 0], [1, 0, 1]]
    for vec in basis:
        assert vec[0] + vec[1] - vec[2] == 0


def test_integer_kernel_constraint():
    # 2d = b + c over (a, b, c, d) with a free
    basis = integer_kernel([[0, 1, 1, -2]])
    assert len(basis) == 3
    for vec in basis:
        assert vec[1] + vec[2] == 2 * vec[3]


def test_integer_kernel_full_rank():
    assert integer_kernel([[1, 0], [0, 1]]) == []


def test_integer_kernel_primitive_and_deterministic():
    rows = [[2, 4, 6], [1, 2, 3]]
    basis = integer_kernel(rows)
    assert basis == integer_kernel(rows)
    for vec in basis:
        from math import gcd

        g = 0
        for v in vec:
            g = gcd(g, abs(v))
        assert g == 1
        assert next(x for x in vec if x) > 0
