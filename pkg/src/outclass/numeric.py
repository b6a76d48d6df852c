"""Small exact-arithmetic helpers.

Quadratic is a number in Q(sqrt(D)) with Fraction coefficients, enough to
carry Perron-Frobenius eigenvalues of 2x2 blocks and translation lengths
through fold paths without floating error.  integer_kernel computes a
primitive integer basis of the kernel of an integer matrix.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence, Union

Rat = Union[int, Fraction]


class Quadratic:
    """p + q*sqrt(D) with rational p, q and fixed square-free D > 1."""

    __slots__ = ("p", "q", "D")

    def __init__(self, p: Rat = 0, q: Rat = 0, D: int = 5):
        self.p = Fraction(p)
        self.q = Fraction(q)
        self.D = int(D)
        if self.D <= 1:
            raise ValueError("D must exceed 1")

    def _coerce(self, other) -> "Quadratic":
        if isinstance(other, Quadratic):
            if other.D != self.D and other.q != 0 and self.q != 0:
                raise ValueError("mixed radicands")
            return Quadratic(other.p, other.q, self.D)
        if isinstance(other, (int, Fraction)):
            return Quadratic(other, 0, self.D)
        return NotImplemented  # type: ignore[return-value]

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return Quadratic(self.p + o.p, self.q + o.q, self.D)

    __radd__ = __add__

    def __neg__(self):
        return Quadratic(-self.p, -self.q, self.D)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return Quadratic(
            self.p * o.p + self.D * self.q * o.q,
            self.p * o.q + self.q * o.p,
            self.D,
        )

    __rmul__ = __mul__

    def inverse(self) -> "Quadratic":
        norm = self.p * self.p - self.D * self.q * self.q
        if norm == 0:
            raise ZeroDivisionError("zero element of the quadratic field")
        return Quadratic(self.p / norm, -self.q / norm, self.D)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, n: int) -> "Quadratic":
        if n < 0:
            return self.inverse() ** (-n)
        out = Quadratic(1, 0, self.D)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __eq__(self, other) -> bool:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self.p == o.p and self.q == o.q

    def __hash__(self) -> int:
        return hash((self.p, self.q, self.D if self.q else 0))

    def __float__(self) -> float:
        return float(self.p) + float(self.q) * self.D**0.5

    def _sign(self) -> int:
        # exact sign of p + q*sqrt(D)
        if self.q == 0:
            return (self.p > 0) - (self.p < 0)
        if self.p == 0:
            return 1 if self.q > 0 else -1
        if self.p > 0 and self.q > 0:
            return 1
        if self.p < 0 and self.q < 0:
            return -1
        # opposite signs: compare p^2 and D q^2
        lhs, rhs = self.p * self.p, self.D * self.q * self.q
        if self.p > 0:  # q < 0
            return 1 if lhs > rhs else (-1 if lhs < rhs else 0)
        return -1 if lhs > rhs else (1 if lhs < rhs else 0)

    def __lt__(self, other) -> bool:
        o = self._coerce(other)
        return (self - o)._sign() < 0

    def __le__(self, other) -> bool:
        o = self._coerce(other)
        return (self - o)._sign() <= 0

    def __gt__(self, other) -> bool:
        return not self <= other

    def __ge__(self, other) -> bool:
        return not self < other

    def __repr__(self) -> str:
        if self.q == 0:
            return f"Quadratic({self.p})"
        return f"Quadratic({self.p} + {self.q}*sqrt({self.D}))"


def integer_kernel(rows: Sequence[Sequence[int]]) -> list[list[int]]:
    """Primitive integer basis of {x : M x = 0}, deterministic.

    Gaussian elimination over Fraction, free variables in index order, each
    basis vector scaled to primitive integers with positive leading entry.
    """
    if not rows:
        return []
    m, n = len(rows), len(rows[0])
    a = [[Fraction(x) for x in row] for row in rows]
    pivots: list[int] = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, m) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        inv = 1 / a[r][c]
        a[r] = [v * inv for v in a[r]]
        for i in range(m):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [vi - f * vr for vi, vr in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == m:
            break
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for fc in free:
        vec = [Fraction(0)] * n
        vec[fc] = Fraction(1)
        for ri, pc in enumerate(pivots):
            vec[pc] = -a[ri][fc]
        # clear denominators, make primitive, fix sign
        from math import gcd

        den = 1
        for v in vec:
            den = den * v.denominator // gcd(den, v.denominator)
        ints = [int(v * den) for v in vec]
        g = 0
        for v in ints:
            g = gcd(g, abs(v))
        if g > 1:
            ints = [v // g for v in ints]
        lead = next((v for v in ints if v != 0), 1)
        if lead < 0:
            ints = [-v for v in ints]
        basis.append(ints)
    return basis
