"""Checking a contraction certificate and choosing its constants.

With H0 the bound on ||H0||, L = ||L^{-1}||, a = ||A|| and n0 = ||N(0)||, a
certificate (K0, delta) is accepted when

    H0 + 6 L ||u0|| a^2 delta + 3 L a^3 delta^2 < K0 < 1   and   n0 < (1 - K0) delta,

all evaluated in exact rational arithmetic. The fixed point then lies within
epsilon = a * delta of u0 in the weighted norm.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from gmpy2 import mpq

from .errors import ConfigurationError
from .fourier import ZERO, CoeffGrid, Frequency, NormWeights, to_rational, weighted_norm
from .operators import AcalMatrix, BoundReport, TruncationSpec, compute_bounds, make_truncation


@dataclass(frozen=True)
class Certificate:
    freq: Frequency
    u0: CoeffGrid
    acal: AcalMatrix
    trunc: TruncationSpec
    weights: NormWeights
    K0: mpq
    delta: mpq
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "K0", to_rational(self.K0))
        object.__setattr__(self, "delta", to_rational(self.delta))
        if not 0 < self.K0 < 1:
            raise ConfigurationError(f"K0 must lie in (0, 1), got {self.K0}")
        if self.delta <= 0:
            raise ConfigurationError("delta must be positive")
        if (self.trunc.M, self.trunc.N) != self.u0.shape:
            raise ConfigurationError(f"truncation {self.trunc.M}x{self.trunc.N} does not match u0 {self.u0.shape}")
        if self.acal.mu != self.trunc.mu:
            raise ConfigurationError(f"Acal block has mu={self.acal.mu}, truncation says {self.trunc.mu}")

    def with_constants(self, K0, delta) -> "Certificate":
        return Certificate(self.freq, self.u0, self.acal, self.trunc, self.weights, K0, delta, self.label)


def contraction_lhs(report: BoundReport, delta: mpq) -> mpq:
    L, a = report.bound_Linv, report.bound_A
    return report.bound_H0 + 6 * L * report.norm_u0 * a * a * delta + 3 * L * a**3 * delta * delta


def epsilon_decimal(eps: mpq, digits: int = 6) -> str:
    """Scientific rendering rounded half-up to ``digits`` significant digits (non-normative)."""
    if eps == 0:
        return "0"
    sign = "-" if eps < 0 else ""
    x = abs(eps)
    e = 0
    while x >= mpq(10) ** (e + 1):
        e += 1
    while x < mpq(10) ** e:
        e -= 1
    scaled = x * mpq(10) ** (digits - 1 - e) + mpq(1, 2)
    mant = int(scaled.numerator // scaled.denominator)
    if mant >= 10**digits:
        mant //= 10
        e += 1
    text = str(mant)
    return f"{sign}{text[0]}.{text[1:]}e{e:+03d}"


@dataclass(frozen=True)
class VerificationOutcome:
    accepted: bool
    report: BoundReport
    K0: mpq
    delta: mpq
    lhs_contraction: mpq
    epsilon: mpq
    failure_reason: str | None = None

    @property
    def epsilon_text(self) -> str:
        return epsilon_decimal(self.epsilon)


def check_constants(report: BoundReport, K0, delta) -> tuple[bool, mpq, str | None]:
    K0, delta = to_rational(K0), to_rational(delta)
    lhs = contraction_lhs(report, delta)
    reasons = []
    if not K0 < 1:
        reasons.append("K0 < 1 fails")
    if not lhs < K0:
        reasons.append(f"contraction inequality fails: lhs {float(lhs):.6g} >= K0 {float(K0):.6g}")
    if not report.norm_N0 < (1 - K0) * delta:
        reasons.append(f"||N(0)|| inequality fails: {float(report.norm_N0):.6g} >= (1-K0)*delta "
                       f"= {float((1 - K0) * delta):.6g}")
    return not reasons, lhs, "; ".join(reasons) or None


def outcome_for(report: BoundReport, K0, delta) -> VerificationOutcome:
    ok, lhs, reason = check_constants(report, K0, delta)
    K0, delta = to_rational(K0), to_rational(delta)
    return VerificationOutcome(ok, report, K0, delta, lhs, report.bound_A * delta, reason)


def verify(cert: Certificate, jobs: int = 1, screen: bool = True) -> VerificationOutcome:
    report = compute_bounds(cert.u0, cert.acal, cert.freq, cert.weights, cert.trunc, jobs, screen)
    return outcome_for(report, cert.K0, cert.delta)


# ---------------------------------------------------------------- constants

@dataclass(frozen=True)
class Suggestion:
    """Either feasible constants (K0, delta) or the reason there are none."""

    feasible: bool
    K0: mpq | None = None
    delta: mpq | None = None
    margin: mpq | None = None
    constraint: str | None = None
    detail: str = ""


def _simplest_inside(target: mpq, lo: mpq, hi: mpq) -> mpq:
    """A short rational strictly between lo and hi, close to target."""
    t = Fraction(int(target.numerator), int(target.denominator))
    cap = 10
    while True:
        f = t.limit_denominator(cap)
        q = mpq(f.numerator, f.denominator)
        if lo < q < hi:
            return q
        if cap > 10**60:
            return target
        cap *= 10


def suggest_constants(report: BoundReport, steps: int = 40) -> Suggestion:
    """Constants maximizing min(K0 / lhs, (1 - K0) delta / n0) for a bound report."""
    L, a = report.bound_Linv, report.bound_A
    return suggest_from_scalars(report.bound_H0, L * report.norm_u0 * a * a, L * a**3,
                                report.norm_N0, steps)


def suggest_from_scalars(B, alpha, beta, n0, steps: int = 40) -> Suggestion:
    """Same as :func:`suggest_constants` with lhs(delta) = B + 6 alpha delta + 3 beta delta^2.

    For fixed delta the best K0 balances both ratios, and the balanced
    margin is 1 / s(delta) with s(delta) = n0/delta + lhs(delta). s is
    convex, so its minimizer is located by bisection on s'.
    """
    B, alpha, beta, n0 = (to_rational(x) for x in (B, alpha, beta, n0))
    if min(B, alpha, beta, n0) < 0:
        raise ConfigurationError("bounds must be nonnegative")
    if B >= 1:
        return Suggestion(False, constraint="||H0|| < 1", detail=f"||H0|| <= {float(B):.6g} is not below 1")
    if B == 0 and alpha == 0 and beta == 0 and n0 == 0:
        return Suggestion(True, mpq(1, 2), mpq(1), mpq(2))

    def lhs(d):
        return B + 6 * alpha * d + 3 * beta * d * d

    def s(d):
        return n0 / d + lhs(d)

    if n0 == 0:
        # Only the contraction constrains delta: place lhs halfway between B and 1.
        target = (1 + B) / 2
        lo, hi = ZERO, mpq(1)
        if lhs(hi) < target:
            return Suggestion(True, _simplest_inside((lhs(hi) + 1) / 2, lhs(hi), mpq(1)), hi,
                              (lhs(hi) + 1) / (2 * lhs(hi)) if lhs(hi) else None)
        for _ in range(steps):
            mid = (lo + hi) / 2
            lo, hi = (mid, hi) if lhs(mid) < target else (lo, mid)
        delta = lo if lo > 0 else hi / 2
        delta = _simplest_inside(delta, delta / 2, delta)
        value = lhs(delta)
        K0 = _simplest_inside((value + 1) / 2, value, mpq(1))
        return Suggestion(True, K0, delta, K0 / value)

    if alpha == 0 and beta == 0:
        # lhs is the constant B and s decreases without bound in delta; any
        # delta with n0/delta a quarter of the gap 1 - B is a fine choice
        x = 4 * n0 / (1 - B)
        delta = _simplest_inside(x, x, 2 * x)
        upper = 1 - n0 / delta
        K0 = _simplest_inside((B + upper) / 2, B, upper)
        return Suggestion(True, K0, delta, min(K0 / B, (1 - K0) * delta / n0) if B else (1 - K0) * delta / n0)

    def ds(d):
        return -n0 / (d * d) + 6 * alpha + 6 * beta * d

    hi = mpq(1)
    while ds(hi) < 0 and hi < 2**256:
        hi *= 2
    lo = hi
    while ds(lo) > 0:
        lo /= 2
    for _ in range(steps):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if ds(mid) < 0 else (lo, mid)
    best = (lo + hi) / 2
    if s(best) >= 1:
        return Suggestion(
            False,
            constraint="||N(0)|| < (1-K0) delta together with the contraction bound",
            detail=(f"min over delta of ||N(0)||/delta + lhs(delta) is about {float(s(best)):.6g} >= 1 "
                    f"(||N(0)|| = {float(n0):.6g}, ||H0|| = {float(B):.6g})"),
        )
    # shorten delta while keeping the margin within a part per million of the optimum
    rel = s(best) * mpq(1, 10**6)
    t = Fraction(int(best.numerator), int(best.denominator))
    cap = 10
    delta = best
    while cap <= 10**60:
        f = t.limit_denominator(cap)
        q = mpq(f.numerator, f.denominator)
        if q > 0 and s(q) - s(best) <= rel and s(q) < 1:
            delta = q
            break
        cap *= 10
    value = lhs(delta)
    upper = 1 - n0 / delta
    K0 = _simplest_inside(value * delta / (n0 + value * delta), value, upper)
    return Suggestion(True, K0, delta, min(K0 / value, (1 - K0) * delta / n0))


@dataclass(frozen=True)
class PipelineResult:
    """Everything produced by :func:`certify_candidate`."""

    acal: AcalMatrix
    report: BoundReport
    suggestion: Suggestion
    certificate: Certificate | None
    outcome: VerificationOutcome | None

    @property
    def accepted(self) -> bool:
        return self.outcome is not None and self.outcome.accepted


def certify_candidate(u0: CoeffGrid, freq: Frequency, w: NormWeights, mu: int,
                      mtilde: int | None = None, policy=None, jobs: int = 1,
                      label: str = "") -> PipelineResult:
    """Build A for ``u0``, compute every bound, pick constants and check them."""
    from .acal import PrecisionPolicy, build_acal

    acal = build_acal(u0, freq, mu, policy or PrecisionPolicy())
    trunc = make_truncation(u0, freq, w, mu, mtilde)
    report = compute_bounds(u0, acal, freq, w, trunc, jobs)
    sugg = suggest_constants(report)
    if not sugg.feasible:
        return PipelineResult(acal, report, sugg, None, None)
    cert = Certificate(freq, u0, acal, trunc, w, sugg.K0, sugg.delta, label)
    return PipelineResult(acal, report, sugg, cert, outcome_for(report, sugg.K0, sugg.delta))


# ---------------------------------------------------------------- distinctness

@dataclass(frozen=True)
class PairCheck:
    i: int
    j: int
    norm_sum: mpq
    norm_diff: mpq
    eps_sum: mpq

    @property
    def distinct(self) -> bool:
        return self.norm_sum > self.eps_sum and self.norm_diff > self.eps_sum

    @property
    def margin(self) -> mpq:
        return min(self.norm_sum, self.norm_diff) - self.eps_sum


@dataclass
class DistinctnessReport:
    pairs: list = field(default_factory=list)

    @property
    def all_distinct(self) -> bool:
        return all(p.distinct for p in self.pairs)


def pairwise_distinct(grids: list[CoeffGrid], epsilons: list, w: NormWeights) -> DistinctnessReport:
    """Check ||u_i + u_j|| > e_i + e_j and ||u_i - u_j|| > e_i + e_j for every pair i < j."""
    if len(grids) != len(epsilons):
        raise ConfigurationError("one epsilon per grid is required")
    eps = [to_rational(e) for e in epsilons]
    out = DistinctnessReport()
    for i in range(len(grids)):
        for j in range(i + 1, len(grids)):
            M = max(grids[i].M, grids[j].M)
            N = max(grids[i].N, grids[j].N)
            a, b = grids[i].padded(M, N), grids[j].padded(M, N)
            out.pairs.append(PairCheck(i, j, weighted_norm(a + b, w), weighted_norm(a - b, w), eps[i] + eps[j]))
    return out


def distinctness(items: list[tuple[Certificate, VerificationOutcome]]) -> DistinctnessReport:
    if any(not outcome.accepted for _, outcome in items):
        raise ConfigurationError("distinctness needs accepted certificates")
    weights = {cert.weights for cert, _ in items}
    if len(weights) > 1:
        raise ConfigurationError("certificates use different norm weights")
    w = weights.pop() if weights else NormWeights.default()
    return pairwise_distinct([c.u0 for c, _ in items], [o.epsilon for _, o in items], w)


# ---------------------------------------------------------------- manifests

def load_certificate(path) -> Certificate:
    from .io import read_grid, read_manifest, read_matrix

    man = read_manifest(path)
    freq = Frequency.from_omega(man.rational("omega"))
    u0 = read_grid(man.resolve("u0"))
    acal = read_matrix(man.resolve("acal"), man.get("acal_layout"))
    default = NormWeights.default()
    w = NormWeights(man.rational("rho_tau", default.rho_tau), man.rational("rho_x", default.rho_x))
    mu = man.integer("mu")
    if mu is not None and mu != acal.mu:
        raise ConfigurationError(f"manifest mu={mu} but Acal block has mu={acal.mu}")
    trunc = make_truncation(u0, freq, w, acal.mu, man.integer("mtilde"))
    return Certificate(freq, u0, acal, trunc, w, man.rational("k0"), man.rational("delta"),
                       man.get("label", Path(path).stem))


def save_certificate(cert: Certificate, manifest_path, explicit_mtilde: bool = False) -> None:
    """Write ``<stem>_u0.txt``, ``<stem>_acal.txt`` and the manifest next to each other."""
    from .io import format_manifest, write_grid, write_matrix

    manifest_path = Path(manifest_path)
    stem = manifest_path.stem
    u0_name, acal_name = f"{stem}_u0.txt", f"{stem}_acal.txt"
    write_grid(cert.u0, manifest_path.parent / u0_name)
    write_matrix(cert.acal, manifest_path.parent / acal_name)
    fields = {
        "label": cert.label or stem,
        "omega": cert.freq.omega,
        "u0": u0_name,
        "acal": acal_name,
        "mu": cert.trunc.mu,
        "mtilde": cert.trunc.Mtilde if explicit_mtilde else None,
        "k0": cert.K0,
        "delta": cert.delta,
        "rho_tau": cert.weights.rho_tau,
        "rho_x": cert.weights.rho_x,
    }
    manifest_path.write_text(format_manifest(fields), encoding="utf-8")
