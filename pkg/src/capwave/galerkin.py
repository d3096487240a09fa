"""Floating-point Galerkin solver: candidate generation only, nothing here is rigorous.

A truncated series u = sum c[m, n] cos((2m+1)t) sin((2n+1)x) is stored on
the lattice of odd exponential frequencies (a, b) with entries
V[a, b] = sgn(b) c / 4, so that u = -i sum V[a, b] exp(i(a t + b x)).
Products of such series then reduce to plain 2D convolutions, which work
unchanged for float64 arrays and for object arrays of mpmath numbers.

Newton runs in float64 first. When a tighter tolerance or more digits are
requested, the iterate is refined by a chord iteration whose residuals are
evaluated at ``digits`` decimal digits with mpmath, while the corrections
reuse the float64 Jacobian factorization.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
from gmpy2 import mpq

from .errors import ConfigurationError, DivergenceError, InversionError
from .fourier import CoeffGrid, NormWeights
from .parallel import pmap

log = logging.getLogger(__name__)

FLOAT_DIGITS = 15


@dataclass(frozen=True)
class FloatGrid:
    """M x N coefficients; float64 when ``digits <= 15``, mpmath objects otherwise."""

    coeffs: np.ndarray
    digits: int = FLOAT_DIGITS

    def __post_init__(self):
        if self.coeffs.ndim != 2 or 0 in self.coeffs.shape:
            raise ConfigurationError("FloatGrid needs a non-empty 2D array")

    @property
    def M(self) -> int:
        return self.coeffs.shape[0]

    @property
    def N(self) -> int:
        return self.coeffs.shape[1]

    @property
    def is_multiprecision(self) -> bool:
        return self.digits > FLOAT_DIGITS

    @classmethod
    def zeros(cls, M: int, N: int) -> "FloatGrid":
        return cls(np.zeros((M, N)))

    @classmethod
    def from_coeffs(cls, coeffs: CoeffGrid, digits: int = FLOAT_DIGITS) -> "FloatGrid":
        if digits <= FLOAT_DIGITS:
            return cls(np.array([[float(x) for x in row] for row in coeffs.rows]))
        with mpmath.workdps(digits):
            arr = np.array(
                [[mpmath.mpf(int(x.numerator)) / int(x.denominator) for x in row] for row in coeffs.rows],
                dtype=object,
            )
        return cls(arr, digits)

    def to_float(self) -> "FloatGrid":
        return FloatGrid(self.coeffs.astype(float))

    def with_digits(self, digits: int) -> "FloatGrid":
        if digits <= FLOAT_DIGITS:
            return self.to_float()
        with mpmath.workdps(digits):
            arr = np.vectorize(mpmath.mpf, otypes=[object])(self.coeffs)
        return FloatGrid(arr, digits)

    def resized(self, M: int, N: int) -> "FloatGrid":
        """Zero-pad or truncate to M x N."""
        out = np.zeros((M, N), dtype=self.coeffs.dtype)
        if out.dtype == object:
            out[:] = mpmath.mpf(0)
        m, n = min(M, self.M), min(N, self.N)
        out[:m, :n] = self.coeffs[:m, :n]
        return FloatGrid(out, self.digits)

    def __neg__(self):
        return FloatGrid(-self.coeffs, self.digits)

    def max_abs(self) -> float:
        return float(max(abs(x) for x in self.coeffs.flat))


@dataclass(frozen=True)
class BranchPoint:
    omega: float
    solution: FloatGrid
    norm: float
    newton_residual: float
    branch_id: int = 0


@dataclass(frozen=True)
class Gap:
    """A continuation step that failed to converge."""

    omega: float
    branch_id: int
    residual: float


@dataclass
class SweepResult:
    points: list = field(default_factory=list)
    gaps: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def at(self, omega, tol: float = 1e-12) -> list:
        return [p for p in self.points if abs(p.omega - float(omega)) <= tol]


# ---------------------------------------------------------------- lattice ops

def _to_lattice(c: np.ndarray) -> np.ndarray:
    M, N = c.shape
    V = np.zeros((4 * M - 1, 4 * N - 1), dtype=c.dtype)
    if V.dtype == object:
        V[:] = 0
    q = c / 4
    a = 2 * np.arange(M) + 1
    b = 2 * np.arange(N) + 1
    cm, cn = 2 * M - 1, 2 * N - 1
    for sa in (1, -1):
        V[np.ix_(cm + sa * a, cn + b)] = q
        V[np.ix_(cm + sa * a, cn - b)] = -q
    return V


def _convolve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Full 2D linear convolution, looping over the nonzero entries of ``B``."""
    out = np.zeros((A.shape[0] + B.shape[0] - 1, A.shape[1] + B.shape[1] - 1),
                   dtype=np.result_type(A, B))
    if out.dtype == object:
        out[:] = 0
    ra, ca = A.shape
    for i, j in zip(*np.nonzero(B)):
        out[i : i + ra, j : j + ca] += B[i, j] * A
    return out


def _omega_value(omega, digits: int):
    if digits <= FLOAT_DIGITS:
        return float(Fraction(str(omega)) if isinstance(omega, str) else omega)
    if isinstance(omega, (mpq, Fraction)):
        return mpmath.mpf(int(omega.numerator)) / int(omega.denominator)
    if isinstance(omega, str):
        f = Fraction(omega)
        return mpmath.mpf(f.numerator) / f.denominator
    return mpmath.mpf(omega)


def linear_symbol(M: int, N: int, omega) -> np.ndarray:
    """lambda[m, n] = (2n+1)^2 - omega^2 (2m+1)^2."""
    a = (2 * np.arange(M) + 1)
    b = (2 * np.arange(N) + 1)
    if isinstance(omega, float):
        return (b[None, :] ** 2 - omega**2 * a[:, None] ** 2).astype(float)
    out = np.empty((M, N), dtype=object)
    for m in range(M):
        for n in range(N):
            out[m, n] = int(b[n]) ** 2 - omega**2 * int(a[m]) ** 2
    return out


def cube_coefficients(v: FloatGrid) -> np.ndarray:
    """Coefficients f[m, n] of u^3 for all m < 3M-1, n < 3N-1."""
    with mpmath.workdps(max(v.digits, FLOAT_DIGITS)):
        V = _to_lattice(v.coeffs)
        W = _convolve(_convolve(V, V), V)
        cm, cn = (W.shape[0] - 1) // 2, (W.shape[1] - 1) // 2
        M3, N3 = 3 * v.M - 1, 3 * v.N - 1
        return -4 * W[cm + 1 : cm + 2 * M3 : 2, cn + 1 : cn + 2 * N3 : 2]


def galerkin_residual(v: FloatGrid, omega) -> FloatGrid:
    """Projection of Omega^2 u_tt - u_xx + u^3 onto the modes of ``v``."""
    with mpmath.workdps(max(v.digits, FLOAT_DIGITS)):
        om = _omega_value(omega, v.digits)
        f = cube_coefficients(v)[: v.M, : v.N]
        return FloatGrid(linear_symbol(v.M, v.N, om) * v.coeffs + f, v.digits)


def jacobian(v: FloatGrid, omega) -> np.ndarray:
    """diag(lambda) + 3 G, where G[(m2, n2), (m, n)] is the P_{m2,n2} coefficient of u^2 P_{m,n}.

    Rows and columns are ordered m * N + n.
    """
    M, N = v.M, v.N
    with mpmath.workdps(max(v.digits, FLOAT_DIGITS)):
        om = _omega_value(omega, v.digits)
        V = _to_lattice(v.coeffs)
        S = _convolve(V, V)                      # indices -(4M-2)..(4M-2)
        pad = 2
        Sp = np.zeros((S.shape[0] + 2 * pad, S.shape[1] + 2 * pad), dtype=S.dtype)
        if Sp.dtype == object:
            Sp[:] = 0
        Sp[pad:-pad, pad:-pad] = S
        om0, on0 = 4 * M - 2 + pad, 4 * N - 2 + pad
        a = 2 * np.arange(M) + 1
        b = 2 * np.arange(N) + 1
        G = 0
        for s in (1, -1):
            rows = om0 + a[:, None] - s * a[None, :]          # (m2, m)
            for t in (1, -1):
                cols = on0 + b[:, None] - t * b[None, :]      # (n2, n)
                G = G - t * Sp[rows[:, None, :, None], cols[None, :, None, :]]
        J = 3 * G.reshape(M * N, M * N)
        lam = linear_symbol(M, N, om).reshape(-1)
        for k in range(M * N):
            J[k, k] += lam[k]
        return J


def weighted_norm_float(v: FloatGrid, w: NormWeights | None = None) -> float:
    w = w or NormWeights.default()
    rt, rx = float(w.rho_tau), float(w.rho_x)
    a = 2 * np.arange(v.M) + 1
    b = 2 * np.arange(v.N) + 1
    weights = rt ** a[:, None] * rx ** b[None, :]
    return float(np.sum(weights * np.abs(v.coeffs.astype(float))))


# ---------------------------------------------------------------- linear solves

def lu_factor(A: np.ndarray, tiny: float = 1e-13):
    """Partial-pivot LU in float64; raises InversionError naming the failing pivot."""
    lu = np.array(A, dtype=float)
    n = lu.shape[0]
    perm = np.arange(n)
    scale = max(np.abs(lu).max(), 1.0)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) <= tiny * scale:
            raise InversionError(k, f"{abs(lu[p, k]):.3e}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        lu[k + 1 :, k] /= lu[k, k]
        lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    return lu, perm


def lu_solve(factor, rhs: np.ndarray) -> np.ndarray:
    lu, perm = factor
    y = np.array(rhs, dtype=float)[perm]
    n = len(y)
    for k in range(n):
        y[k + 1 :] -= lu[k + 1 :, k] * y[k]
    for k in range(n - 1, -1, -1):
        y[k] = (y[k] - lu[k, k + 1 :] @ y[k + 1 :]) / lu[k, k]
    return y


# ---------------------------------------------------------------- Newton

def newton_solve(initial: FloatGrid, omega, tol: float = 1e-10, max_iter: int = 50,
                 digits: int | None = None, w: NormWeights | None = None) -> BranchPoint:
    """Newton's method on the truncated system.

    The float64 phase stops once the residual falls below ``tol`` or stops
    decreasing. If ``tol`` is out of float64 reach, or ``digits`` asks for
    more than double precision, chord refinement at ``digits`` digits
    (default 30) follows.
    """
    if tol <= 0:
        raise ConfigurationError("tol must be positive")
    want_mp = (digits is not None and digits > FLOAT_DIGITS) or tol < 1e-12
    digits = (digits or 30) if want_mp else FLOAT_DIGITS

    om = _omega_value(omega, FLOAT_DIGITS)
    x = initial.to_float()
    shape = (x.M, x.N)
    res = galerkin_residual(x, om).max_abs()
    best = res
    stalls = 0
    for _ in range(max_iter):
        if res < tol or not np.isfinite(res):
            break
        J = jacobian(x, om)
        r = galerkin_residual(x, om).coeffs.reshape(-1)
        step = lu_solve(lu_factor(J), r)
        x = FloatGrid(x.coeffs - step.reshape(shape))
        res = galerkin_residual(x, om).max_abs()
        if want_mp and res < 1e-8:
            if res >= 0.5 * best:
                stalls += 1
                if stalls >= 2:
                    break
            else:
                stalls = 0
        best = min(best, res)
    if not np.isfinite(res):
        raise DivergenceError("Newton iterate blew up", float("inf"))

    if want_mp and res >= tol:
        factor = lu_factor(jacobian(x, om))
        with mpmath.workdps(digits):
            omp = _omega_value(omega, digits)
            xm = x.with_digits(digits)
            for _ in range(max_iter):
                r = galerkin_residual(xm, omp).coeffs
                res = float(max(abs(e) for e in r.flat))
                if res < tol:
                    break
                step = lu_solve(factor, np.array([float(e) for e in r.flat]))
                xm = FloatGrid(xm.coeffs - np.array([mpmath.mpf(s) for s in step],
                                                    dtype=object).reshape(shape), digits)
            x = xm
    if res >= tol:
        raise DivergenceError(f"Newton did not reach tol={tol:g} in {max_iter} iterations", res)
    return BranchPoint(float(om), x, weighted_norm_float(x, w), res)


def rationalize_candidate(b: BranchPoint | FloatGrid, max_denominator: int) -> CoeffGrid:
    """Entrywise best rational approximation with bounded denominator."""
    grid = b.solution if isinstance(b, BranchPoint) else b
    rows = []
    for row in grid.coeffs:
        out = []
        for x in row:
            if isinstance(x, mpmath.mpf):
                sign, man, exp, _ = x._mpf_
                man = -int(man) if sign else int(man)
                f = Fraction(man * 2**exp) if exp >= 0 else Fraction(man, 2**-exp)
            else:
                f = Fraction(float(x))
            f = f.limit_denominator(max_denominator)
            out.append(mpq(f.numerator, f.denominator))
        rows.append(out)
    return CoeffGrid(rows)


# ---------------------------------------------------------------- seeds and sweeps

def trunk_seed(M: int, N: int, omega) -> FloatGrid:
    """Single-mode root c = sqrt(16 (omega^2 - 1) / 9) placed at (0, 0)."""
    return single_mode_seed(M, N, omega, 0, 0)


def single_mode_seed(M: int, N: int, omega, m: int, n: int) -> FloatGrid:
    """c P_{m,n} with c solving lambda c + (9/16) c^3 = 0, i.e. a rescaled trunk."""
    om = _omega_value(omega, FLOAT_DIGITS)
    lam = (2 * n + 1) ** 2 - om**2 * (2 * m + 1) ** 2
    if lam >= 0:
        raise ConfigurationError(f"mode ({m},{n}) has no nonzero single-mode root at omega={om}")
    c = np.zeros((M, N))
    c[m, n] = np.sqrt(-16 * lam / 9)
    return FloatGrid(c)


def branch_pair_seeds(M: int, N: int) -> list[FloatGrid]:
    """P_{0,0} - P_{1,2} and P_{0,0} + P_{1,2}.

    Near omega = 1.725 the mode (1, 2) is almost resonant, since
    5^2 - 9 omega^2 is close to zero. Mixing it into the lowest mode with
    either sign leads Newton to two solution families that lie above the
    trunk in norm (about 2.58 and 2.61 against 2.20).
    """
    if M < 2 or N < 3:
        return []
    out = []
    for sign in (-1.0, 1.0):
        c = np.zeros((M, N))
        c[0, 0] = 1.0
        c[1, 2] = sign
        out.append(FloatGrid(c))
    return out


def default_seeds(M: int, N: int, omega) -> list[FloatGrid]:
    """Trunk seed, the (0,0)/(1,2) branch pair, then every single mode with a negative linear symbol."""
    om = _omega_value(omega, FLOAT_DIGITS)
    seeds = [trunk_seed(M, N, om)] + branch_pair_seeds(M, N)
    for m in range(M):
        for n in range(N):
            if (m, n) != (0, 0) and (2 * n + 1) < om * (2 * m + 1):
                seeds.append(single_mode_seed(M, N, om, m, n))
    return seeds


def omega_grid(omega_lo, omega_hi, steps: int) -> list[float]:
    lo, hi = Fraction(str(omega_lo)), Fraction(str(omega_hi))
    if not lo < hi:
        raise ConfigurationError("sweep needs omega_lo < omega_hi")
    if steps < 1:
        raise ConfigurationError("sweep needs at least one step")
    return [float(lo + (hi - lo) * k / steps) for k in range(steps + 1)]


def _march(nodes, seed, branch_id, tol, max_iter, points, gaps):
    current = seed
    for om in nodes:
        try:
            bp = newton_solve(current, om, tol=tol, max_iter=max_iter)
        except (DivergenceError, InversionError) as exc:
            gaps.append(Gap(om, branch_id, getattr(exc, "residual", float("nan"))))
            continue
        points.append(BranchPoint(bp.omega, bp.solution, bp.norm, bp.newton_residual, branch_id))
        current = bp.solution


def _follow(shared, item):
    nodes, start, tol, max_iter = shared
    branch_id, seed = item
    points: list[BranchPoint] = []
    gaps: list[Gap] = []
    _march(nodes[start:], seed, branch_id, tol, max_iter, points, gaps)
    if start > 0:
        # walk down from the anchor, warm-started by the anchor solution when there is one
        first = points[0].solution if points and points[0].omega == nodes[start] else seed
        _march(nodes[start - 1 :: -1], first, branch_id, tol, max_iter, points, gaps)
    return points, gaps


def sweep(omega_lo, omega_hi, steps: int, trunc: tuple[int, int] | int,
          seeds: list[FloatGrid] | None = None, tol: float = 1e-10, max_iter: int = 40,
          jobs: int = 1, anchor=None) -> SweepResult:
    """Natural-parameter continuation of each seed across ``steps + 1`` equispaced frequencies.

    Every seed is first solved at the grid frequency closest to ``anchor``
    (default ``omega_lo``), then continued up to ``omega_hi`` and down to
    ``omega_lo``. ``seeds=None`` uses :func:`default_seeds` at the anchor.
    Each seed is one family whose ``branch_id`` is the seed's position.
    Failed steps are recorded as gaps and the family carries on from its
    last converged point.
    """
    M, N = (trunc, trunc) if isinstance(trunc, int) else trunc
    nodes = omega_grid(omega_lo, omega_hi, steps)
    target = nodes[0] if anchor is None else float(Fraction(str(anchor)))
    start = min(range(len(nodes)), key=lambda k: abs(nodes[k] - target))
    if seeds is None:
        seeds = default_seeds(M, N, nodes[start])
    seeds = [s.resized(M, N).to_float() for s in seeds]
    parts = pmap(_follow, (nodes, start, tol, max_iter), list(enumerate(seeds)), jobs)
    result = SweepResult()
    for pts, gaps in parts:
        result.points.extend(pts)
        result.gaps.extend(gaps)
    result.points.sort(key=lambda p: (p.branch_id, p.omega))
    result.gaps.sort(key=lambda g: (g.branch_id, g.omega))
    return result


def distinct_solutions(points, atol: float = 1e-6) -> list[BranchPoint]:
    """Nonzero points pairwise different up to the sign symmetry u -> -u."""
    kept: list[BranchPoint] = []
    for p in points:
        c = p.solution.coeffs.astype(float)
        if np.abs(c).max() <= atol:
            continue
        if all(np.abs(c - q.solution.coeffs.astype(float)).max() > atol
               and np.abs(c + q.solution.coeffs.astype(float)).max() > atol for q in kept):
            kept.append(p)
    return kept


def format_sweep_table(points) -> str:
    lines = ["# omega  norm  branch_id  residual"]
    for p in points:
        lines.append(f"{p.omega:.12g}  {p.norm:.12g}  {p.branch_id}  {p.newton_residual:.3e}")
    return "\n".join(lines) + "\n"
