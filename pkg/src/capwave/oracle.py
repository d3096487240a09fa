"""Brute-force cross-checks for the convolution formulas.

Nothing here reuses the convolution code in :mod:`capwave.fourier`. Products
are expanded term by term with the product-to-sum identities on a sparse
representation of two-variable trigonometric polynomials. The ``oracle``
CLI command and the test-suite both run these checks.
"""
from __future__ import annotations

import random
from collections import defaultdict

from gmpy2 import mpq

from .fourier import CoeffGrid, EvenGrid, reflect_index

# A term is keyed by (kind_tau, k_tau, kind_x, k_x) with kind in {"c", "s"}
# and k >= 0; the value is its coefficient.
Trig = dict


def _norm1(kind: str, k: int) -> tuple[str, int, int] | None:
    """Fold a negative frequency: returns (kind, |k|, sign) or None if zero."""
    if k < 0:
        return (kind, -k, 1) if kind == "c" else (kind, -k, -1)
    if k == 0 and kind == "s":
        return None
    return kind, k, 1


def _prod1(ka: str, a: int, kb: str, b: int) -> list[tuple[str, int, mpq]]:
    """Product-to-sum for one variable."""
    half = mpq(1, 2)
    if ka == "c" and kb == "c":
        raw = [("c", a - b, half), ("c", a + b, half)]
    elif ka == "s" and kb == "s":
        raw = [("c", a - b, half), ("c", a + b, -half)]
    elif ka == "s" and kb == "c":
        raw = [("s", a + b, half), ("s", a - b, half)]
    else:
        raw = [("s", a + b, half), ("s", b - a, half)]
    out = []
    for kind, k, coef in raw:
        folded = _norm1(kind, k)
        if folded is not None:
            out.append((folded[0], folded[1], coef * folded[2]))
    return out


def multiply(f: Trig, g: Trig) -> Trig:
    out: Trig = defaultdict(lambda: mpq(0))
    for (kt1, t1, kx1, x1), a in f.items():
        for (kt2, t2, kx2, x2), b in g.items():
            for kt, t, ct in _prod1(kt1, t1, kt2, t2):
                for kx, x, cx in _prod1(kx1, x1, kx2, x2):
                    out[(kt, t, kx, x)] += a * b * ct * cx
    return {k: v for k, v in out.items() if v}


def from_odd(v: CoeffGrid) -> Trig:
    return {("c", 2 * m + 1, "s", 2 * n + 1): c for m, n, c in v.items()}


def basis(m: int, n: int) -> Trig:
    return {("c", 2 * m + 1, "s", 2 * n + 1): mpq(1)}


def to_odd(f: Trig, shape: tuple[int, int]) -> CoeffGrid:
    data = [[mpq(0)] * shape[1] for _ in range(shape[0])]
    for (kt, t, kx, x), c in f.items():
        if kt != "c" or kx != "s" or t % 2 == 0 or x % 2 == 0:
            raise AssertionError(f"non-odd term {(kt, t, kx, x)} in odd expansion")
        m, n = (t - 1) // 2, (x - 1) // 2
        if m >= shape[0] or n >= shape[1]:
            raise AssertionError(f"mode {(m, n)} outside expected shape {shape}")
        data[m][n] = c
    return CoeffGrid(data)


def to_even(f: Trig, shape: tuple[int, int]) -> EvenGrid:
    data = [[mpq(0)] * shape[1] for _ in range(shape[0])]
    for (kt, t, kx, x), c in f.items():
        if kt != "c" or kx != "c" or t % 2 or x % 2:
            raise AssertionError(f"non-even term {(kt, t, kx, x)} in even expansion")
        m, n = t // 2, x // 2
        if m >= shape[0] or n >= shape[1]:
            raise AssertionError(f"mode {(m, n)} outside expected shape {shape}")
        data[m][n] = c
    return EvenGrid(data)


def oracle_square(u: CoeffGrid) -> EvenGrid:
    f = from_odd(u)
    return to_even(multiply(f, f), (2 * u.M, 2 * u.N))


def oracle_cube(u: CoeffGrid) -> CoeffGrid:
    f = from_odd(u)
    return to_odd(multiply(multiply(f, f), f), (3 * u.M - 1, 3 * u.N - 1))


def oracle_mult_by_basis(u: CoeffGrid, m: int, n: int) -> CoeffGrid:
    f = from_odd(u)
    return to_odd(multiply(multiply(f, f), basis(m, n)), (2 * u.M + m, 2 * u.N + n))


def oracle_triple(u: CoeffGrid, v: CoeffGrid, w: CoeffGrid) -> CoeffGrid:
    shape = (u.M + v.M + w.M - 1, u.N + v.N + w.N - 1)
    return to_odd(multiply(multiply(from_odd(u), from_odd(v)), from_odd(w)), shape)


def triple_product_terms(m1, n1, m2, n2, m3, n3) -> list[tuple[int, int, int]]:
    """The sixteen signed modes of P_{m1,n1} P_{m2,n2} P_{m3,n3}, each weight 1/16.

    Entries are (sign, m, n) with indices possibly negative.
    """
    temporal = [
        m1 + m2 + m3 + 1,
        -m1 + m2 + m3,
        m1 - m2 + m3,
        m1 + m2 - m3,
    ]
    spatial = [
        (-1, n1 + n2 + n3 + 1),
        (1, -n1 + n2 + n3),
        (1, n1 - n2 + n3),
        (1, n1 + n2 - n3),
    ]
    return [(s, mt, nx) for s, nx in spatial for mt in temporal]


def triple_sum_cube(u: CoeffGrid) -> CoeffGrid:
    """u^3 summed over all index triples with the sixteen-term decomposition."""
    shape = (3 * u.M - 1, 3 * u.N - 1)
    data = [[mpq(0)] * shape[1] for _ in range(shape[0])]
    entries = list(u.items())
    sixteenth = mpq(1, 16)
    for a1, b1, c1 in entries:
        for a2, b2, c2 in entries:
            for a3, b3, c3 in entries:
                coef = c1 * c2 * c3 * sixteenth
                for sign, mt, nx in triple_product_terms(a1, b1, a2, b2, a3, b3):
                    mm, nn, s2 = reflect_index(mt, nx)
                    data[mm][nn] += sign * s2 * coef
    return CoeffGrid(data)


def shifted_mult_by_basis(u: CoeffGrid, m: int, n: int) -> CoeffGrid:
    """u^2 P_{m,n} obtained by shifting the decomposition of u^2 P_{Mh,Nh}.

    Mh = 2M-1 and Nh = 2N-1; modes that land on negative indices are folded
    back with the reflection rule.
    """
    Mh, Nh = 2 * u.M - 1, 2 * u.N - 1
    anchor = oracle_mult_by_basis(u, Mh, Nh)
    shape = (2 * u.M + m, 2 * u.N + n)
    data = [[mpq(0)] * shape[1] for _ in range(shape[0])]
    for mh, nh, c in anchor.items():
        mm, nn, sign = reflect_index(mh + m - Mh, nh + n - Nh)
        data[mm][nn] += sign * c
    return CoeffGrid(data)


def random_grid(rng: random.Random, M: int, N: int, span: int = 9) -> CoeffGrid:
    return CoeffGrid(
        [
            [mpq(rng.randint(-span, span), rng.randint(1, span)) for _ in range(N)]
            for _ in range(M)
        ]
    )


def convolution_suite(count: int = 50, max_size: int = 4, seed: int = 2024) -> list[str]:
    """Compare square/cube/mult_by_basis against the expansion oracle.

    Returns a list of failure descriptions (empty on success).
    """
    from .fourier import cube, mult_by_basis, square

    rng = random.Random(seed)
    failures = []
    for trial in range(count):
        M, N = rng.randint(1, max_size), rng.randint(1, max_size)
        u = random_grid(rng, M, N)
        sq = square(u)
        if sq != oracle_square(u):
            failures.append(f"square mismatch, trial {trial}, shape {(M, N)}")
        if cube(u) != oracle_cube(u):
            failures.append(f"cube mismatch, trial {trial}, shape {(M, N)}")
        m, n = rng.randint(0, 5), rng.randint(0, 5)
        if mult_by_basis(sq, m, n) != oracle_mult_by_basis(u, m, n):
            failures.append(f"mult_by_basis mismatch, trial {trial}, mode {(m, n)}")
    return failures


def oracle_h0_column(u0: CoeffGrid, acal, J: int, freq, w) -> mpq:
    """||H0 P_J|| / rho(J) with every product expanded by the trig oracle."""
    from .fourier import j_index, j_inverse, weighted_norm
    from .operators import linv_coeff

    m, n = j_inverse(J)
    mu = acal.mu
    if m < mu and n < mu:
        image = defaultdict(mpq)
        for K in range(acal.dim):
            a = acal.entries[K][J]
            if a:
                image[j_inverse(K)] += a
    else:
        image = {(m, n): mpq(1)}
    ah: Trig = defaultdict(mpq)
    for (mk, nk), a in image.items():
        for key, val in basis(mk, nk).items():
            ah[key] += a * val
    prod = multiply(multiply(from_odd(u0), from_odd(u0)), ah)
    rows = u0.M * 2 + max(k for k, _ in image) + 1
    cols = u0.N * 2 + max(k for _, k in image) + 1
    grid = to_odd(prod, (rows, cols))
    out = {}
    for i, j, c in grid.items():
        out[(i, j)] = -3 * linv_coeff(freq, i, j) * c
    out[(m, n)] = out.get((m, n), mpq(0)) + 1
    for (mk, nk), a in image.items():
        out[(mk, nk)] = out.get((mk, nk), mpq(0)) - a
    R = max(i for i, _ in out) + 1
    C = max(j for _, j in out) + 1
    rows_ = [[out.get((i, j), mpq(0)) for j in range(C)] for i in range(R)]
    return weighted_norm(CoeffGrid(rows_), w) / w.weight(m, n)


def h0_suite(count: int = 10, seed: int = 7) -> list[str]:
    """Every explicit H0 column of small random instances against the oracle,
    and the screened maximum against the fully exact one."""
    from .fourier import Frequency, NormWeights, j_index, square
    from .operators import (
        AcalMatrix,
        bound_H0_norm,
        h0_column_norm_inner,
        h0_column_norm_outer,
        make_truncation,
    )

    rng = random.Random(seed)
    freq = Frequency(34, 20)
    failures = []
    for trial in range(count):
        M, N = rng.randint(1, 2), rng.randint(1, 2)
        u0 = random_grid(rng, M, N, span=5)
        mu = rng.randint(1, 3)
        acal = AcalMatrix([[mpq(rng.randint(-20, 20), rng.randint(1, 9)) for _ in range(mu * mu)]
                           for _ in range(mu * mu)])
        w = NormWeights.default() if rng.random() < 0.5 else NormWeights.uniform(mpq(11, 10))
        trunc = make_truncation(u0, freq, w, mu, mtilde=max(mu, 2 * M - 1, 2 * N - 1) + 3)
        sq = square(u0)
        for mm in range(trunc.Mtilde):
            for nn in range(trunc.Ntilde):
                J = j_index(mm, nn)
                if mm < mu and nn < mu:
                    got = h0_column_norm_inner(acal, sq, J, freq, w, trunc)
                else:
                    got = h0_column_norm_outer(sq, J, freq, w, trunc)
                if got != oracle_h0_column(u0, acal, J, freq, w):
                    failures.append(f"H0 column {(mm, nn)} mismatch, trial {trial}")
        fast, _ = bound_H0_norm(u0, acal, freq, w, trunc, screen=True)
        slow, _ = bound_H0_norm(u0, acal, freq, w, trunc, screen=False)
        if fast != slow:
            failures.append(f"screened H0 bound differs from exact, trial {trial}")
    return failures
