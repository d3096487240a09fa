"""The inverse wave operator, the preconditioner A, the operator H0 and their norm bounds.

Matrices of the finite block use *column* layout: ``acal.entries[K][J]`` is the
coefficient of P_K in A P_J, with K and J the one-dimensional mode indices of
:func:`capwave.fourier.j_index`.

Column norms of H0 are evaluated exactly. The explicit region outside the
block can hold tens of thousands of columns, so by default they are first
bracketed in floating point with an a-priori rounding-error bound and only
the columns that could still be the maximum are evaluated in exact
arithmetic. The reported maximum is always an exact rational.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from gmpy2 import lcm, mpq, mpz

from .errors import ConfigurationError, DomainError
from .fourier import (
    ZERO,
    CoeffGrid,
    EvenGrid,
    Frequency,
    NormWeights,
    basis_product_items,
    cube,
    j_index,
    j_inverse,
    square,
    to_rational,
    weighted_norm,
)
from .parallel import pmap


@dataclass(frozen=True)
class TruncationSpec:
    M: int
    N: int
    mu: int
    nu: int
    Mtilde: int
    Ntilde: int

    def __post_init__(self):
        if min(self.M, self.N, self.mu, self.nu) < 1:
            raise ConfigurationError("truncations must be positive")
        if self.mu != self.nu:
            raise ConfigurationError("the block must be square (mu == nu)")
        if self.Mtilde < max(self.mu, 2 * self.M - 1):
            raise ConfigurationError(
                f"Mtilde={self.Mtilde} < max(mu, 2M-1)={max(self.mu, 2 * self.M - 1)}"
            )
        if self.Ntilde < max(self.nu, 2 * self.N - 1):
            raise ConfigurationError(
                f"Ntilde={self.Ntilde} < max(nu, 2N-1)={max(self.nu, 2 * self.N - 1)}"
            )

    @property
    def block_size(self) -> int:
        return self.mu * self.nu


class AcalMatrix:
    """Dense rational block of A over the modes J < mu^2, column layout."""

    __slots__ = ("entries",)

    def __init__(self, entries: Sequence[Sequence]):
        rows = tuple(tuple(to_rational(v) for v in row) for row in entries)
        dim = len(rows)
        if dim == 0 or any(len(r) != dim for r in rows):
            raise ConfigurationError("Acal must be a non-empty square matrix")
        if math.isqrt(dim) ** 2 != dim:
            raise ConfigurationError(f"Acal dimension {dim} is not a perfect square")
        self.entries = rows

    @classmethod
    def identity(cls, mu: int, scale=1) -> "AcalMatrix":
        scale = to_rational(scale)
        dim = mu * mu
        return cls([[scale if i == j else ZERO for j in range(dim)] for i in range(dim)])

    @classmethod
    def from_rows(cls, rows, layout: str = "columns") -> "AcalMatrix":
        """``layout="rows"`` means ``rows[J][K]`` is the coefficient of P_K in A P_J."""
        if layout == "columns":
            return cls(rows)
        if layout == "rows":
            rows = [list(r) for r in rows]
            return cls([list(col) for col in zip(*rows)])
        raise ConfigurationError(f"unknown Acal layout {layout!r}")

    @property
    def dim(self) -> int:
        return len(self.entries)

    @property
    def mu(self) -> int:
        return math.isqrt(self.dim)

    def column(self, J: int) -> list[mpq]:
        return [row[J] for row in self.entries]

    def __eq__(self, other):
        return isinstance(other, AcalMatrix) and self.entries == other.entries

    def __repr__(self):
        return f"AcalMatrix(dim={self.dim})"


@dataclass(frozen=True)
class H0Bound:
    """Components of the bound on ||H0||; ``bound`` is their maximum."""

    bound: mpq
    inner_max: mpq
    inner_arg: tuple[int, int] | None
    outer_max: mpq
    outer_arg: tuple[int, int] | None
    tail_tau: mpq
    tail_x: mpq
    C: mpq
    Mtilde: int
    Ntilde: int
    outer_columns: int = 0
    exact_columns: int = 0


@dataclass(frozen=True)
class BoundReport:
    norm_u0: mpq
    bound_A: mpq
    bound_H0: mpq
    norm_N0: mpq
    bound_Linv: mpq
    C: mpq
    h0: H0Bound
    A_arg: tuple[int, int] | None = None
    trunc: TruncationSpec | None = field(default=None, compare=False)


@lru_cache(maxsize=4096)
def _rpow(base: mpq, exp: int) -> mpq:
    if exp >= 0:
        return base**exp
    return 1 / base ** (-exp)


def _ratio(w: NormWeights, dm: int, dn: int) -> mpq:
    return _rpow(w.rho_tau, 2 * dm) * _rpow(w.rho_x, 2 * dn)


def linv_coeff(freq: Frequency, m: int, n: int) -> mpq:
    """Eigenvalue of the inverse wave operator on P_{m,n}."""
    p, q = freq.p, freq.q
    return mpq(4 * q * q, 4 * q * q * (2 * n + 1) ** 2 - (2 * p + 1) ** 2 * (2 * m + 1) ** 2)


def phi(freq: Frequency, m: int, n: int) -> mpq:
    """Upper bound on |linv_coeff| over all modes (m', n') with m' >= m, n' >= n."""
    p, q = freq.p, freq.q
    return mpq(4 * q * q, 2 * max(2 * q * (2 * n + 1), (2 * p + 1) * (2 * m + 1)) - 1)


def linv_norm_bound(freq: Frequency) -> mpq:
    return phi(freq, 0, 0)


def apply_linv(v: CoeffGrid, freq: Frequency) -> CoeffGrid:
    return CoeffGrid._raw(
        tuple(
            tuple(c * linv_coeff(freq, m, n) if c else ZERO for n, c in enumerate(row))
            for m, row in enumerate(v.rows)
        )
    )


def _check_block(acal: AcalMatrix, trunc: TruncationSpec):
    if acal.dim != trunc.block_size:
        raise ConfigurationError(
            f"Acal has dimension {acal.dim} but the block holds {trunc.block_size} modes"
        )


def apply_A(acal: AcalMatrix, v: CoeffGrid, trunc: TruncationSpec) -> CoeffGrid:
    _check_block(acal, trunc)
    mu = trunc.mu
    rows, cols = max(v.M, mu), max(v.N, mu)
    out = [[v[m, n] if (m >= mu or n >= mu) else ZERO for n in range(cols)] for m in range(rows)]
    for J in range(acal.dim):
        m, n = j_inverse(J)
        a = v[m, n]
        if not a:
            continue
        for K, row in enumerate(acal.entries):
            if row[J]:
                mk, nk = j_inverse(K)
                out[mk][nk] += row[J] * a
    return CoeffGrid._raw(tuple(tuple(r) for r in out))


def column_ratio(values: Sequence[mpq], J: int, w: NormWeights) -> mpq:
    """||sum_K values[K] P_K|| / rho(J) for a j_index-ordered vector."""
    m, n = j_inverse(J)
    total = ZERO
    for K, a in enumerate(values):
        if a:
            mk, nk = j_inverse(K)
            total += abs(a) * _ratio(w, mk - m, nk - n)
    return total


def bound_A_norm_with_arg(acal: AcalMatrix, trunc: TruncationSpec, w: NormWeights):
    _check_block(acal, trunc)
    best, arg = mpq(1), None
    for J in range(acal.dim):
        value = column_ratio(acal.column(J), J, w)
        if value > best:
            best, arg = value, j_inverse(J)
    return best, arg


def bound_A_norm(acal: AcalMatrix, trunc: TruncationSpec, w: NormWeights) -> mpq:
    return bound_A_norm_with_arg(acal, trunc, w)[0]


def norm_N0(u0: CoeffGrid, freq: Frequency, w: NormWeights) -> mpq:
    """||N(0)|| = ||-L^{-1}(u0^3) - u0||."""
    residual = -apply_linv(cube(u0), freq) - u0
    return weighted_norm(residual, w)


def tail_coefficients(u0: CoeffGrid) -> CoeffGrid:
    """Coefficients of u0^2 P_{2M-1, 2N-1} (the anchor of the shift identity)."""
    from .fourier import mult_by_basis

    return mult_by_basis(square(u0), 2 * u0.M - 1, 2 * u0.N - 1)


def tail_constant_C(u0: CoeffGrid, w: NormWeights) -> mpq:
    total = sum((abs(c) for _, _, c in tail_coefficients(u0).items()), ZERO)
    return 3 * _rpow(w.rho_tau, 4 * u0.M - 2) * _rpow(w.rho_x, 4 * u0.N - 2) * total


def tail_terms(freq: Frequency, C: mpq, M: int, N: int, Mtilde: int, Ntilde: int):
    return (
        phi(freq, Mtilde - (2 * M - 1), 0) * C,
        phi(freq, 0, Ntilde - (2 * N - 1)) * C,
    )


def choose_mtilde(freq: Frequency, C: mpq, M: int, N: int, mu: int) -> int:
    """Smallest common horizon making both tail terms strictly below one."""
    T = max(mu, 2 * M - 1, 2 * N - 1)
    if C == 0:
        return T
    while True:
        tau_term, x_term = tail_terms(freq, C, M, N, T, T)
        if tau_term < 1 and x_term < 1:
            return T
        T += 1


def make_truncation(u0: CoeffGrid, freq: Frequency, w: NormWeights, mu: int,
                    mtilde: int | None = None) -> TruncationSpec:
    if mtilde is None:
        mtilde = choose_mtilde(freq, tail_constant_C(u0, w), u0.M, u0.N, mu)
    return TruncationSpec(u0.M, u0.N, mu, mu, mtilde, mtilde)


# ---------------------------------------------------------------------------
# columns of H0 inside the block


def _inner_tables(sq: EvenGrid, mu: int, shape: tuple[int, int]):
    """Integer matrix G and denominator D with G[K2][m2*cols + n2] / D = g^{K2}_{m2,n2}.

    The K2 < mu^2 coefficient tables of u0^2 P_{K2} share one denominator, so
    the sum over K2 inside a column of H0 runs in integer arithmetic.
    """
    rows, cols = shape
    entries = []
    den = mpz(1)
    for K2 in range(mu * mu):
        m, n = j_inverse(K2)
        row = [(m2 * cols + n2, g) for m2, n2, g in basis_product_items(sq, m, n)]
        for _, g in row:
            den = lcm(den, g.denominator)
        entries.append(row)
    G = np.full((mu * mu, rows * cols), mpz(0), dtype=object)
    for K2, row in enumerate(entries):
        for pos, g in row:
            G[K2, pos] = g.numerator * (den // g.denominator)
    support = [int(p) for p in np.flatnonzero(np.any(G != 0, axis=0))]
    return G[:, support], den, support


def _inner_column(ctx, J):
    acal_rows, G, gden, support, linv_neg3, mu, cols, w = ctx
    column = [acal_rows[K2][J] for K2 in range(mu * mu)]
    aden = mpz(1)
    for a in column:
        if a:
            aden = lcm(aden, a.denominator)
    aint = np.array([a.numerator * (aden // a.denominator) for a in column], dtype=object)
    sums = aint.dot(G) if len(support) else []
    scale = mpq(1, aden * gden)
    acc = {}
    for pos, S in zip(support, sums):
        if S:
            acc[pos] = linv_neg3[pos] * S * scale
    for K in range(mu * mu):
        a = column[K]
        corr = (1 if K == J else 0) - a
        if corr:
            mk, nk = j_inverse(K)
            pos = mk * cols + nk
            acc[pos] = acc.get(pos, ZERO) + corr
    m, n = j_inverse(J)
    total = ZERO
    for pos in sorted(acc):
        a = acc[pos]
        if a:
            m2, n2 = divmod(pos, cols)
            total += abs(a) * _ratio(w, m2 - m, n2 - n)
    return total


def _inner_context(acal, sq, freq, w, trunc):
    mu = trunc.mu
    rows, cols = sq.shape[0] + mu - 1, sq.shape[1] + mu - 1
    G, gden, support = _inner_tables(sq, mu, (rows, cols))
    linv_neg3 = {pos: -3 * linv_coeff(freq, *divmod(pos, cols)) for pos in support}
    return (acal.entries, G, gden, support, linv_neg3, mu, cols, w)


def h0_column_norm_inner(acal: AcalMatrix, u0sq: EvenGrid, J: int, freq: Frequency,
                         w: NormWeights, trunc: TruncationSpec) -> mpq:
    """||H0 P_J|| / rho(J) for a mode inside the block (J < mu^2)."""
    _check_block(acal, trunc)
    if not 0 <= J < trunc.block_size:
        raise DomainError(f"J={J} is outside the block [0, {trunc.block_size})")
    return _inner_column(_inner_context(acal, u0sq, freq, w, trunc), J)


def h0_inner_columns(acal, u0sq, freq, w, trunc, jobs: int = 1) -> list[mpq]:
    _check_block(acal, trunc)
    ctx = _inner_context(acal, u0sq, freq, w, trunc)
    return pmap(_inner_column, ctx, range(trunc.block_size), jobs)


# ---------------------------------------------------------------------------
# columns of H0 outside the block, where A acts as the identity


def _outer_exact(sq: EvenGrid, m: int, n: int, freq: Frequency, w: NormWeights) -> mpq:
    total = ZERO
    for m2, n2, g in basis_product_items(sq, m, n):
        total += abs(g * linv_coeff(freq, m2, n2)) * _ratio(w, m2 - m, n2 - n)
    return 3 * total


def _outer_task(ctx, mode):
    sq, freq, w = ctx
    return _outer_exact(sq, mode[0], mode[1], freq, w)


def h0_column_norm_outer(u0sq: EvenGrid, J: int, freq: Frequency, w: NormWeights,
                         trunc: TruncationSpec) -> mpq:
    """||H0 P_J|| / rho(J) = 3 ||L^{-1}(u0^2 P_J)|| / rho(J) outside the block."""
    m, n = j_inverse(J)
    if not (m >= trunc.mu or n >= trunc.nu):
        raise DomainError(f"mode {(m, n)} lies inside the block")
    if m >= trunc.Mtilde or n >= trunc.Ntilde:
        raise DomainError(f"mode {(m, n)} lies beyond the explicit horizon")
    return _outer_exact(u0sq, m, n, freq, w)


def _float_abs_linv(freq: Frequency, rows: int, cols: int) -> np.ndarray:
    a = 2 * np.arange(rows, dtype=np.int64)[:, None] + 1
    b = 2 * np.arange(cols, dtype=np.int64)[None, :] + 1
    p, q = freq.p, freq.q
    den = np.abs(4 * q * q * b * b - (2 * p + 1) ** 2 * a * a)
    if den.max() >= 2**53:
        raise OverflowError("mode range too large for exact float denominators")
    return (4.0 * q * q) / den.astype(np.float64)


def _selector(centers: np.ndarray, width: int, half: int, size: int, signs) -> np.ndarray:
    """Matrices mapping d-indices to output offsets, one per center.

    Entry [c, i, k] sums s over the three index maps k = c - t, t - c, c + t + 1
    for the target t = c - half + i (zero when t < 0).
    """
    sel = np.zeros((len(centers), width, size))
    c = centers[:, None]
    t = c - half + np.arange(width)[None, :]
    valid = t >= 0
    for s, k in zip(signs, (c - t, t - c, c + t + 1)):
        ok = valid & (k >= 0) & (k < size)
        ai, bi = np.nonzero(ok)
        sel[ai, bi, k[ai, bi]] += s
    return sel


# relative rounding unit of binary64
_UNIT = 2.0**-53


def screen_outer_columns(u0sq: EvenGrid, freq: Frequency, w: NormWeights,
                         trunc: TruncationSpec, chunk: int = 2_000_000):
    """Floating enclosures of every explicit column outside the block.

    Returns ``(modes, lower, upper)`` with ``lower <= exact value <= upper``.
    The bracket comes from the standard a-priori bound on floating sums and
    products: each reduction chain below has fewer than ``K`` operations, so
    the rounding error is at most ``K * unit * (|value| + value_of_abs)``;
    we widen by a further factor 8 and an absolute floor for underflow.
    """
    R, S = u0sq.shape
    M, N = R // 2, S // 2
    hm, hn = 2 * M - 1, 2 * N - 1
    wm, wn = 2 * hm + 1, 2 * hn + 1
    T = trunc.Mtilde
    D = np.array([[float(v) for v in row] for row in u0sq.rows])
    Dabs = np.abs(D)

    rt = np.array([float(_rpow(w.rho_tau, 2 * (i - hm))) for i in range(wm)])
    rx = np.array([float(_rpow(w.rho_x, 2 * (j - hn))) for j in range(wn)])
    linv = _float_abs_linv(freq, T + hm + 1, trunc.Ntilde + hn + 1)

    ns = np.arange(trunc.Ntilde)
    Sx = _selector(ns, wn, hn, S, (1, 1, -1))
    Sx_abs = np.abs(Sx)
    n2 = ns[:, None] - hn + np.arange(wn)[None, :]
    n2_ok = n2 >= 0
    n2c = np.where(n2_ok, n2, 0)

    K = R * S + wm * wn + 32
    slack_rel = 8 * K * _UNIT

    rows_per = max(1, chunk // (len(ns) * wm * wn))
    modes, lower, upper = [], [], []
    for start in range(0, T, rows_per):
        ms = np.arange(start, min(T, start + rows_per))
        Tt = _selector(ms, wm, hm, R, (1, 1, 1))
        m2 = ms[:, None] - hm + np.arange(wm)[None, :]
        m2_ok = m2 >= 0
        m2c = np.where(m2_ok, m2, 0)
        Lw = linv[m2c[:, None, :, None], n2c[None, :, None, :]]
        Lw = Lw * (m2_ok[:, None, :, None] & n2_ok[None, :, None, :])

        TD = np.einsum("aik,kl->ail", Tt, D)
        G = np.einsum("ail,bjl->abij", TD, Sx) / 4.0
        TDa = np.einsum("aik,kl->ail", Tt, Dabs)
        Ga = np.einsum("ail,bjl->abij", TDa, Sx_abs) / 4.0

        val = 3.0 * np.einsum("abij,i,j->ab", np.abs(G) * Lw, rt, rx)
        val_abs = 3.0 * np.einsum("abij,i,j->ab", Ga * Lw, rt, rx)
        slack = slack_rel * (val + val_abs) + 1e-280

        mm, nn = np.meshgrid(ms, ns, indexing="ij")
        keep = (mm >= trunc.mu) | (nn >= trunc.nu)
        modes.extend(zip(mm[keep].tolist(), nn[keep].tolist()))
        lower.append((val - slack)[keep])
        upper.append((val + slack)[keep])
    if not modes:
        return [], np.zeros(0), np.zeros(0)
    return modes, np.concatenate(lower), np.concatenate(upper)


def h0_outer_max(u0sq: EvenGrid, freq: Frequency, w: NormWeights, trunc: TruncationSpec,
                 jobs: int = 1, screen: bool = True):
    """Exact maximum of the explicit columns outside the block.

    Returns ``(max, arg_mode, n_columns, n_exact)``. Ties resolve to the
    smallest j_index.
    """
    if screen:
        modes, lower, upper = screen_outer_columns(u0sq, freq, w, trunc)
        if not modes:
            return ZERO, None, 0, 0
        floor = lower.max()
        candidates = [modes[i] for i in np.nonzero(upper >= floor)[0]]
        total = len(modes)
    else:
        T = trunc.Mtilde
        candidates = [
            (m, n) for m in range(T) for n in range(trunc.Ntilde)
            if m >= trunc.mu or n >= trunc.nu
        ]
        total = len(candidates)
        if not candidates:
            return ZERO, None, 0, 0
    candidates.sort(key=lambda mn: j_index(*mn))
    values = pmap(_outer_task, (u0sq, freq, w), candidates, jobs)
    best, arg = None, None
    for mode, value in zip(candidates, values):
        if best is None or value > best:
            best, arg = value, mode
    return best, arg, total, len(candidates)


def bound_H0_norm(u0: CoeffGrid, acal: AcalMatrix, freq: Frequency, w: NormWeights,
                  trunc: TruncationSpec, jobs: int = 1, screen: bool = True):
    """Upper bound on ||H0||: the max of explicit columns and both tail terms."""
    _check_block(acal, trunc)
    if (u0.M, u0.N) != (trunc.M, trunc.N):
        raise ConfigurationError(
            f"u0 has shape {u0.shape} but the truncation says {(trunc.M, trunc.N)}"
        )
    sq = square(u0)
    inner = h0_inner_columns(acal, sq, freq, w, trunc, jobs)
    inner_max, inner_arg = ZERO, None
    for J, value in enumerate(inner):
        if inner_arg is None or value > inner_max:
            inner_max, inner_arg = value, j_inverse(J)
    outer_max, outer_arg, n_outer, n_exact = h0_outer_max(sq, freq, w, trunc, jobs, screen)
    C = tail_constant_C(u0, w)
    tail_tau, tail_x = tail_terms(freq, C, u0.M, u0.N, trunc.Mtilde, trunc.Ntilde)
    bound = max(inner_max, outer_max, tail_tau, tail_x)
    return bound, H0Bound(
        bound=bound,
        inner_max=inner_max,
        inner_arg=inner_arg,
        outer_max=outer_max,
        outer_arg=outer_arg,
        tail_tau=tail_tau,
        tail_x=tail_x,
        C=C,
        Mtilde=trunc.Mtilde,
        Ntilde=trunc.Ntilde,
        outer_columns=n_outer,
        exact_columns=n_exact,
    )


def compute_bounds(u0: CoeffGrid, acal: AcalMatrix, freq: Frequency, w: NormWeights,
                   trunc: TruncationSpec, jobs: int = 1, screen: bool = True) -> BoundReport:
    bound_A, A_arg = bound_A_norm_with_arg(acal, trunc, w)
    bound_H0, h0 = bound_H0_norm(u0, acal, freq, w, trunc, jobs, screen)
    return BoundReport(
        norm_u0=weighted_norm(u0, w),
        bound_A=bound_A,
        bound_H0=bound_H0,
        norm_N0=norm_N0(u0, freq, w),
        bound_Linv=linv_norm_bound(freq),
        C=h0.C,
        h0=h0,
        A_arg=A_arg,
        trunc=trunc,
    )


def apply_H0(u0: CoeffGrid, acal: AcalMatrix, h: CoeffGrid, freq: Frequency,
             trunc: TruncationSpec) -> CoeffGrid:
    """H0 h = -3 L^{-1}(u0^2 A h) + h - A h, assembled directly."""
    from .fourier import mult_even

    Ah = apply_A(acal, h, trunc)
    return -apply_linv(mult_even(square(u0), Ah), freq).scale(3) + h - Ah
