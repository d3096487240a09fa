"""Construction of the approximate inverse block of the preconditioner A.

The block of I + 3 L^{-1} u0^2 over the mu x mu lowest modes is assembled
exactly, inverted in software floating point at a fixed decimal precision
(mpmath, full pivoting), and the inverse is rationalized entry by entry with
bounded denominators. The quality of the result only affects whether the
final bound on ||H0|| falls below one; it never affects soundness.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np
from gmpy2 import mpq

from .errors import ConfigurationError, InversionError
from .fourier import (
    ZERO,
    CoeffGrid,
    Frequency,
    NormWeights,
    basis_product_items,
    j_index,
    j_inverse,
    square,
)
from .operators import AcalMatrix, column_ratio, linv_coeff

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AtildeMatrix:
    """Exact block of I + 3 Pi L^{-1} u0^2; ``entries[J][K]`` is the P_J coefficient of its image of P_K."""

    entries: tuple

    @property
    def dim(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class PrecisionPolicy:
    digits: int = 64
    max_denominator: int = 10**12

    def __post_init__(self):
        if self.digits < 30:
            raise ConfigurationError("precision policy needs at least 30 digits")
        if self.max_denominator < 10**6:
            raise ConfigurationError("max_denominator must be at least 10^6")


def assemble_atilde(u0: CoeffGrid, freq: Frequency, mu: int, nu: int | None = None) -> AtildeMatrix:
    nu = mu if nu is None else nu
    if mu < 1 or nu != mu:
        raise ConfigurationError("assemble_atilde needs mu == nu >= 1")
    dim = mu * mu
    sq = square(u0)
    entries = [[mpq(1) if J == K else ZERO for K in range(dim)] for J in range(dim)]
    for K in range(dim):
        m, n = j_inverse(K)
        for m2, n2, g in basis_product_items(sq, m, n):
            if m2 < mu and n2 < mu:
                J = j_index(m2, n2)
                entries[J][K] += 3 * g * linv_coeff(freq, m2, n2)
    return AtildeMatrix(tuple(tuple(r) for r in entries))


def _to_fraction(x: mpmath.mpf) -> Fraction:
    sign, man, exp, _ = x._mpf_
    man = -int(man) if sign else int(man)
    return Fraction(man * 2**exp) if exp >= 0 else Fraction(man, 2**-exp)


def rationalize(x: mpmath.mpf, max_denominator: int) -> mpq:
    """Continued-fraction best approximation with bounded denominator."""
    if not x:
        return ZERO
    best = _to_fraction(x).limit_denominator(max_denominator)
    return mpq(best.numerator, best.denominator)


def float_inverse(matrix, digits: int) -> np.ndarray:
    """Gauss-Jordan inverse with full pivoting at ``digits`` decimal digits.

    Returns an object array of ``mpmath.mpf``. Raises :class:`InversionError`
    naming the elimination step when the best remaining pivot is below
    10^(-digits/2).
    """
    with mpmath.workdps(digits):
        n = len(matrix)
        a = np.array([[mpmath.mpf(int(v.numerator)) / int(v.denominator) for v in row] for row in matrix],
                     dtype=object)
        inv = np.array([[mpmath.mpf(1) if i == j else mpmath.mpf(0) for j in range(n)] for i in range(n)],
                       dtype=object)
        col_perm = list(range(n))
        tiny = mpmath.mpf(10) ** (-(digits // 2))
        for k in range(n):
            sub = np.abs(a[k:, k:])
            flat = int(np.argmax(sub))
            i, j = divmod(flat, n - k)
            i += k
            j += k
            piv = a[i, j]
            if abs(piv) < tiny:
                raise InversionError(k, mpmath.nstr(abs(piv), 5))
            if i != k:
                a[[k, i]] = a[[i, k]]
                inv[[k, i]] = inv[[i, k]]
            if j != k:
                a[:, [k, j]] = a[:, [j, k]]
                col_perm[k], col_perm[j] = col_perm[j], col_perm[k]
            a[k] = a[k] / piv
            inv[k] = inv[k] / piv
            for r in range(n):
                if r != k and a[r, k]:
                    f = a[r, k]
                    a[r] = a[r] - f * a[k]
                    inv[r] = inv[r] - f * inv[k]
        # column swaps of the input permute the rows of its inverse
        out = np.empty_like(inv)
        for pos, orig in enumerate(col_perm):
            out[orig] = inv[pos]
        return out


def invert_and_rationalize(atilde: AtildeMatrix, policy: PrecisionPolicy = PrecisionPolicy()) -> AcalMatrix:
    inv = float_inverse(atilde.entries, policy.digits)
    zero_below = mpmath.mpf(10) ** (-policy.digits + 8)
    rows = []
    with mpmath.workdps(policy.digits):
        for row in inv:
            rows.append(
                [ZERO if abs(x) < zero_below else rationalize(x, policy.max_denominator) for x in row]
            )
    return AcalMatrix(rows)


def residual_norm(acal: AcalMatrix, atilde: AtildeMatrix, w: NormWeights) -> mpq:
    """Column-sup weighted bound of I - Acal * Atilde."""
    if acal.dim != atilde.dim:
        raise ConfigurationError(f"dimension mismatch: {acal.dim} vs {atilde.dim}")
    dim = acal.dim
    A, B = acal.entries, atilde.entries
    worst = ZERO
    for J in range(dim):
        col = [B[K][J] for K in range(dim)]
        prod = []
        for I in range(dim):
            row = A[I]
            s = sum((row[K] * col[K] for K in range(dim) if col[K] and row[K]), ZERO)
            prod.append((1 if I == J else 0) - s)
        worst = max(worst, column_ratio(prod, J, w))
    return worst


def build_acal(u0: CoeffGrid, freq: Frequency, mu: int,
               policy: PrecisionPolicy = PrecisionPolicy()) -> AcalMatrix:
    return invert_and_rationalize(assemble_atilde(u0, freq, mu, mu), policy)


def select_mu(u0: CoeffGrid, freq: Frequency, w: NormWeights, mu_start: int, mu_cap: int,
              policy: PrecisionPolicy = PrecisionPolicy(), jobs: int = 1):
    """Smallest mu in [mu_start, mu_cap] whose block makes the H0 bound drop below one.

    Returns ``(mu, acal, trunc, h0)`` for the first success, or for ``mu_cap``
    when none succeeds (the caller inspects ``h0.bound``).
    """
    from .operators import bound_H0_norm, make_truncation

    result = None
    for mu in range(mu_start, mu_cap + 1):
        acal = build_acal(u0, freq, mu, policy)
        trunc = make_truncation(u0, freq, w, mu)
        bound, h0 = bound_H0_norm(u0, acal, freq, w, trunc, jobs)
        log.info("mu=%d  ||H0|| <= %.6g", mu, float(bound))
        result = (mu, acal, trunc, h0)
        if bound < 1:
            break
    return result
