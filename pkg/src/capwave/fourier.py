"""Exact Fourier algebra on the odd basis P_{m,n}(tau, x) = cos((2m+1)tau) sin((2n+1)x).

All coefficients are ``gmpy2.mpq`` rationals. Products of odd expansions are
formed by explicit discrete convolutions (no FFT), so every result is exact.

The square of an odd expansion lives in the even basis
cos(2m tau) cos(2n x); it is kept in :class:`EvenGrid` so the two bases are
never mixed up.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from gmpy2 import mpq

RationalScalar = type(mpq())

ZERO = mpq(0)
ONE = mpq(1)


def to_rational(value) -> mpq:
    """Coerce ints, Fractions, mpq and ``"num/den"`` strings to ``mpq``.

    Floats are refused; a float has no place in the rigorous path.
    """
    if isinstance(value, RationalScalar):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return mpq(value)
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    if isinstance(value, str):
        return parse_rational(value)
    raise TypeError(f"cannot convert {type(value).__name__} to an exact rational")


def parse_rational(text: str) -> mpq:
    text = text.strip()
    num, sep, den = text.partition("/")
    try:
        n = int(num, 10)
        d = int(den, 10) if sep else 1
    except ValueError:
        raise ValueError(f"not an exact rational: {text!r}") from None
    if "." in text or "e" in text.lower():
        raise ValueError(f"not an exact rational: {text!r}")
    if d == 0:
        raise ValueError(f"zero denominator in {text!r}")
    return mpq(n, d)


def format_rational(q: mpq) -> str:
    q = mpq(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


class _Grid:
    """Immutable rectangular table of rationals, zero outside its bounds."""

    __slots__ = ("_rows",)

    def __init__(self, rows: Iterable[Iterable]):
        rows = tuple(tuple(to_rational(v) for v in row) for row in rows)
        if not rows or not rows[0]:
            raise ValueError("grid must have at least one row and one column")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("ragged grid rows")
        self._rows = rows

    @classmethod
    def _raw(cls, rows):
        # rows already tuples of mpq
        obj = cls.__new__(cls)
        obj._rows = rows
        return obj

    @classmethod
    def zeros(cls, rows: int, cols: int):
        return cls._raw(tuple((ZERO,) * cols for _ in range(rows)))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self._rows), len(self._rows[0])

    @property
    def rows(self) -> tuple[tuple[mpq, ...], ...]:
        return self._rows

    def __getitem__(self, index: tuple[int, int]) -> mpq:
        m, n = index
        if 0 <= m < len(self._rows) and 0 <= n < len(self._rows[0]):
            return self._rows[m][n]
        return ZERO

    def items(self) -> Iterator[tuple[int, int, mpq]]:
        """Yield ``(m, n, value)`` for the nonzero entries."""
        for m, row in enumerate(self._rows):
            for n, v in enumerate(row):
                if v:
                    yield m, n, v

    def is_zero(self) -> bool:
        return not any(v for row in self._rows for v in row)

    def padded(self, rows: int, cols: int):
        r0, c0 = self.shape
        rows, cols = max(rows, r0), max(cols, c0)
        return type(self)._raw(
            tuple(
                tuple(self[m, n] for n in range(cols)) for m in range(rows)
            )
        )

    def _combine(self, other, op):
        if type(other) is not type(self):
            return NotImplemented
        rows = max(self.shape[0], other.shape[0])
        cols = max(self.shape[1], other.shape[1])
        return type(self)._raw(
            tuple(
                tuple(op(self[m, n], other[m, n]) for n in range(cols))
                for m in range(rows)
            )
        )

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b)

    def __neg__(self):
        return type(self)._raw(tuple(tuple(-v for v in row) for row in self._rows))

    def scale(self, factor) -> "_Grid":
        factor = to_rational(factor)
        return type(self)._raw(
            tuple(tuple(factor * v for v in row) for row in self._rows)
        )

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        rows = max(self.shape[0], other.shape[0])
        cols = max(self.shape[1], other.shape[1])
        return all(
            self[m, n] == other[m, n] for m in range(rows) for n in range(cols)
        )

    def __hash__(self):
        return hash(tuple(self.items()))

    def __repr__(self):
        body = ", ".join(
            "[" + ", ".join(format_rational(v) for v in row) + "]"
            for row in self._rows
        )
        return f"{type(self).__name__}([{body}])"


class CoeffGrid(_Grid):
    """Coefficients c_{m,n} of sum c_{m,n} P_{m,n}, 0 <= m < M, 0 <= n < N."""

    __slots__ = ()

    @property
    def M(self) -> int:
        return self.shape[0]

    @property
    def N(self) -> int:
        return self.shape[1]

    @classmethod
    def single(cls, m: int, n: int, value=1, shape: tuple[int, int] | None = None):
        rows, cols = shape or (m + 1, n + 1)
        data = [[ZERO] * cols for _ in range(rows)]
        data[m][n] = to_rational(value)
        return cls(data)


class EvenGrid(_Grid):
    """Coefficients d_{m,n} of sum d_{m,n} cos(2m tau) cos(2n x)."""

    __slots__ = ()


@dataclass(frozen=True)
class NormWeights:
    rho_tau: mpq
    rho_x: mpq

    def __post_init__(self):
        object.__setattr__(self, "rho_tau", to_rational(self.rho_tau))
        object.__setattr__(self, "rho_x", to_rational(self.rho_x))
        if self.rho_tau <= 1 or self.rho_x <= 1:
            raise ValueError("norm weights must be strictly greater than 1")

    @classmethod
    def default(cls) -> "NormWeights":
        rho = mpq(10**20 + 1, 10**20)
        return cls(rho, rho)

    @classmethod
    def uniform(cls, rho) -> "NormWeights":
        return cls(rho, rho)

    def weight(self, m: int, n: int) -> mpq:
        """rho_tau^(2m+1) * rho_x^(2n+1); negative exponents are allowed."""
        return _power(self.rho_tau, 2 * m + 1) * _power(self.rho_x, 2 * n + 1)

    def ratio(self, dm: int, dn: int) -> mpq:
        """Weight quotient rho(m+dm, n+dn) / rho(m, n)."""
        return _power(self.rho_tau, 2 * dm) * _power(self.rho_x, 2 * dn)


def _power(base: mpq, exp: int) -> mpq:
    if exp >= 0:
        return base**exp
    return 1 / base ** (-exp)


@dataclass(frozen=True)
class Frequency:
    """Omega = (2p+1)/(2q) with Omega > 1."""

    p: int
    q: int

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ValueError("p and q must be positive integers")
        if 2 * self.p + 1 <= 2 * self.q:
            raise ValueError("frequency must satisfy Omega > 1")

    @property
    def omega(self) -> mpq:
        return mpq(2 * self.p + 1, 2 * self.q)

    @classmethod
    def from_omega(cls, omega) -> "Frequency":
        omega = to_rational(omega)
        num, den = int(omega.numerator), int(omega.denominator)
        if num % 2 == 0 or den % 2 == 1:
            raise ValueError(
                f"Omega={format_rational(omega)} is not of the form (2p+1)/(2q)"
            )
        return cls((num - 1) // 2, den // 2)

    def __str__(self):
        return format_rational(self.omega)


def reflect_index(m: int, n: int) -> tuple[int, int, int]:
    """Map a signed index pair onto P_{m',n'} with P_{m,n} = sign * P_{m',n'}."""
    sign = 1
    if m < 0:
        m = -m - 1
    if n < 0:
        n = -n - 1
        sign = -sign
    return m, n, sign


def weighted_norm(v: CoeffGrid, w: NormWeights) -> mpq:
    tau_pows = [w.rho_tau ** (2 * m + 1) for m in range(v.M)]
    x_pows = [w.rho_x ** (2 * n + 1) for n in range(v.N)]
    total = ZERO
    for m, row in enumerate(v.rows):
        acc = ZERO
        for n, c in enumerate(row):
            if c:
                acc += x_pows[n] * abs(c)
        if acc:
            total += tau_pows[m] * acc
    return total


def square(u: CoeffGrid) -> EvenGrid:
    """Coefficients d_{m,n} of u^2 in the cos(2m tau)cos(2n x) basis, shape 2M x 2N."""
    M, N = u.shape
    c = u.rows

    def spatial(a, b, n):
        # the three inner sums over n1; the limits keep every index in range
        s = ZERO
        for n1 in range(0, N - n):
            s += a[n + n1] * b[n1]
        for n1 in range(n, N):
            s += a[n1 - n] * b[n1]
        for n1 in range(max(0, n - N), min(n - 1, N - 1) + 1):
            s -= a[n - n1 - 1] * b[n1]
        return s

    out = []
    for m in range(2 * M):
        row = []
        for n in range(2 * N):
            s = ZERO
            for m1 in range(max(0, m - M), min(m - 1, M - 1) + 1):
                s += spatial(c[m - m1 - 1], c[m1], n)
            for m1 in range(m, M):
                s += spatial(c[m1 - m], c[m1], n)
            for m1 in range(0, M - m):
                s += spatial(c[m + m1], c[m1], n)
            factor = 4 * (2 if m == 0 else 1) * (2 if n == 0 else 1)
            row.append(s / factor)
        out.append(tuple(row))
    return EvenGrid._raw(tuple(out))


def cube(u: CoeffGrid) -> CoeffGrid:
    """Coefficients f_{m,n} of u^3 in the odd basis, shape (3M-1) x (3N-1)."""
    M, N = u.shape
    d = square(u)
    c = u.rows

    def spatial(k, m1, n):
        s = ZERO
        cm = c[m1]
        for n1 in range(max(0, n - 2 * N + 1), min(N - 1, n) + 1):
            s += d[k, n - n1] * cm[n1]
        for n1 in range(n, N):
            s += d[k, n1 - n] * cm[n1]
        for n1 in range(0, min(N - 1, 2 * N - 2 - n) + 1):
            s -= d[k, n + n1 + 1] * cm[n1]
        return s

    out = []
    for m in range(3 * M - 1):
        row = []
        for n in range(3 * N - 1):
            s = ZERO
            for m1 in range(max(0, m - 2 * M + 1), min(M - 1, m) + 1):
                s += spatial(m - m1, m1, n)
            for m1 in range(m, M):
                s += spatial(m1 - m, m1, n)
            for m1 in range(0, min(M - 1, 2 * M - 2 - m) + 1):
                s += spatial(m + m1 + 1, m1, n)
            row.append(s / 4)
        out.append(tuple(row))
    return CoeffGrid._raw(tuple(out))


def mult_by_basis(sq: EvenGrid, m: int, n: int) -> CoeffGrid:
    """Coefficients g^{m,n}_{m2,n2} of u0^2 * P_{m,n}, shape (2M+m) x (2N+n).

    ``sq`` is the square of a grid of shape M x N, so it has shape 2M x 2N.
    """
    rows, cols = sq.shape
    out = []
    for m2 in range(rows + m):
        ta, tb, tc = m - m2, m2 - m, m + m2 + 1
        row = []
        for n2 in range(cols + n):
            xa, xb, xc = n - n2, n2 - n, n + n2 + 1
            s = (
                sq[ta, xa] + sq[ta, xb] - sq[ta, xc]
                + sq[tb, xa] + sq[tb, xb] - sq[tb, xc]
                + sq[tc, xa] + sq[tc, xb] - sq[tc, xc]
            )
            row.append(s / 4)
        out.append(tuple(row))
    return CoeffGrid._raw(tuple(out))


def basis_product_items(sq: EvenGrid, m: int, n: int) -> Iterator[tuple[int, int, mpq]]:
    """Nonzero entries of :func:`mult_by_basis` without building the full grid.

    Only modes within 2M-1 (resp. 2N-1) of (m, n) can be hit.
    """
    rows, cols = sq.shape
    for m2 in range(max(0, m - rows + 1), m + rows):
        ta, tb, tc = m - m2, m2 - m, m + m2 + 1
        for n2 in range(max(0, n - cols + 1), n + cols):
            xa, xb, xc = n - n2, n2 - n, n + n2 + 1
            s = (
                sq[ta, xa] + sq[ta, xb] - sq[ta, xc]
                + sq[tb, xa] + sq[tb, xb] - sq[tb, xc]
                + sq[tc, xa] + sq[tc, xb] - sq[tc, xc]
            )
            if s:
                yield m2, n2, s / 4


def mult_even(sq: EvenGrid, v: CoeffGrid) -> CoeffGrid:
    """u0^2 * v for an arbitrary odd expansion v, by linearity over g."""
    rows, cols = sq.shape
    acc = [[ZERO] * (cols + v.N - 1) for _ in range(rows + v.M - 1)]
    for m, n, a in v.items():
        for m2, n2, g in basis_product_items(sq, m, n):
            acc[m2][n2] += a * g
    return CoeffGrid._raw(tuple(tuple(r) for r in acc))


def j_index(m: int, n: int) -> int:
    k = max(m, n)
    return k * k + k - m + n


def j_inverse(J: int) -> tuple[int, int]:
    lo = math.isqrt(J)
    hi = lo if lo * lo == J else lo + 1
    if J - lo * lo <= hi * hi - J:
        return lo, J - lo * lo
    return hi * hi - J - 1, lo


def block_modes(mu: int) -> list[tuple[int, int]]:
    """Modes of the mu x mu block listed in j_index order."""
    return [j_inverse(J) for J in range(mu * mu)]


def grid_from_columns(values: Sequence, mu: int) -> CoeffGrid:
    """Lay a j_index-ordered vector of length mu^2 out as a mu x mu grid."""
    data = [[ZERO] * mu for _ in range(mu)]
    for J, val in enumerate(values):
        m, n = j_inverse(J)
        data[m][n] = val
    return CoeffGrid._raw(tuple(tuple(r) for r in data))
