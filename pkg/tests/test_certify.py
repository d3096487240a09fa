import pytest
from gmpy2 import mpq

from capwave.certify import (
    Certificate,
    certify_candidate,
    check_constants,
    distinctness,
    epsilon_decimal,
    load_certificate,
    outcome_for,
    pairwise_distinct,
    save_certificate,
    suggest_constants,
    suggest_from_scalars,
    verify,
)
from capwave.errors import ConfigurationError
from capwave.fourier import CoeffGrid, Frequency, NormWeights
from capwave.galerkin import newton_solve, rationalize_candidate, trunk_seed
from capwave.operators import AcalMatrix, make_truncation

FREQ = Frequency(34, 20)
RHO = mpq(10**20 + 1, 10**20)


def zero_certificate(K0=mpq(1, 2), delta=mpq(1, 1000), mu=2):
    u = CoeffGrid([[0, 0], [0, 0]])
    w = NormWeights.default()
    return Certificate(FREQ, u, AcalMatrix.identity(mu), make_truncation(u, FREQ, w, mu), w, K0, delta, "zero")


def lhs_of(B, alpha, beta, d):
    return B + 6 * alpha * d + 3 * beta * d * d


# ---------------------------------------------------------------- verify

def test_zero_certificate_is_accepted():
    out = verify(zero_certificate())
    assert out.accepted and out.failure_reason is None
    assert out.report.bound_H0 == 0 and out.report.norm_N0 == 0 and out.report.norm_u0 == 0
    assert out.report.bound_A == 1
    assert out.lhs_contraction == 3 * mpq(1600, 137) * mpq(1, 1000) ** 2
    assert out.epsilon == mpq(1, 1000)


def test_certificate_invariants():
    with pytest.raises(ConfigurationError):
        zero_certificate(K0=1)
    with pytest.raises(ConfigurationError):
        zero_certificate(K0=0)
    with pytest.raises(ConfigurationError):
        zero_certificate(delta=0)
    cert = zero_certificate()
    with pytest.raises(ConfigurationError):
        Certificate(FREQ, CoeffGrid([[0]]), cert.acal, cert.trunc, cert.weights, cert.K0, cert.delta)
    with pytest.raises(ConfigurationError):
        Certificate(FREQ, cert.u0, AcalMatrix.identity(3), cert.trunc, cert.weights, cert.K0, cert.delta)


def test_large_delta_violates_the_contraction():
    out = verify(zero_certificate(delta=mpq(1)))
    assert not out.accepted
    assert "contraction" in out.failure_reason


def test_rejection_is_monotone_in_delta():
    report = verify(zero_certificate()).report
    rejected = [d for d in (mpq(k, 100) for k in range(1, 40)) if not check_constants(report, mpq(1, 2), d)[0]]
    assert rejected
    first = rejected[0]
    assert all(not check_constants(report, mpq(1, 2), d)[0] for d in (first * 2, first * 3, first + 1))


def test_acceptance_is_repeatable():
    a = verify(zero_certificate())
    b = verify(zero_certificate())
    assert a == b


@pytest.mark.parametrize("eps, text", [
    (mpq(21769150, 10**14), "2.17692e-07"),
    (mpq(1, 3), "3.33333e-01"),
    (mpq(999999951, 10**9), "1.00000e+00"),
    (mpq(12), "1.20000e+01"),
])
def test_epsilon_rendering(eps, text):
    assert epsilon_decimal(eps) == text


# ---------------------------------------------------------------- constants

def test_unconstrained_window():
    s = suggest_from_scalars(0, 0, 0, 0)
    assert s.feasible and (s.K0, s.delta) == (mpq(1, 2), mpq(1))


def test_example_window_is_feasible():
    B, alpha, beta, n0 = mpq(1, 2), mpq(1), mpq(0), mpq(1, 100)
    s = suggest_from_scalars(B, alpha, beta, n0)
    assert s.feasible
    assert lhs_of(B, alpha, beta, s.delta) < s.K0 < 1
    assert n0 < (1 - s.K0) * s.delta
    assert s.margin > 1


def test_unit_H0_is_infeasible():
    s = suggest_from_scalars(1, 0, 0, 0)
    assert not s.feasible and "H0" in s.constraint


def test_large_defect_is_infeasible():
    s = suggest_from_scalars(mpq(9, 10), mpq(5), mpq(5), mpq(1, 100))
    assert not s.feasible and "N(0)" in s.constraint


@pytest.mark.parametrize("args", [
    (mpq(1, 2), 0, 0, mpq(1, 100)),
    (mpq(0), 1, 1, 0),
    (mpq(9, 10), 2, 5, mpq(1, 10**6)),
    (mpq(99, 100), mpq(3), mpq(40), mpq(1, 10**12)),
    (mpq(1, 3), mpq(1, 7), mpq(2, 9), mpq(1, 50)),
])
def test_suggested_constants_satisfy_both_inequalities(args):
    B, alpha, beta, n0 = (mpq(x) for x in args)
    s = suggest_from_scalars(B, alpha, beta, n0)
    assert s.feasible
    assert lhs_of(B, alpha, beta, s.delta) < s.K0 < 1
    assert n0 < (1 - s.K0) * s.delta


def test_suggestion_for_a_report_is_accepted():
    report = verify(zero_certificate()).report
    s = suggest_constants(report)
    assert s.feasible
    assert outcome_for(report, s.K0, s.delta).accepted


def test_negative_inputs_are_refused():
    with pytest.raises(ConfigurationError):
        suggest_from_scalars(mpq(1, 2), -1, 0, 0)


# ---------------------------------------------------------------- distinctness

def test_distinct_scaled_modes():
    w = NormWeights.default()
    rep = pairwise_distinct([CoeffGrid([[1]]), CoeffGrid([[3]])], [RHO**2 / 10, RHO**2 / 10], w)
    (pc,) = rep.pairs
    assert pc.norm_diff == 2 * RHO**2 and pc.norm_sum == 4 * RHO**2
    assert pc.eps_sum == RHO**2 / 5
    assert pc.distinct and rep.all_distinct
    assert pc.margin == 2 * RHO**2 - RHO**2 / 5


def test_sign_pairs_are_not_distinct():
    rep = pairwise_distinct([CoeffGrid([[1, 2]]), CoeffGrid([[-1, -2]])], [mpq(1, 10)] * 2,
                            NormWeights.default())
    assert not rep.all_distinct
    assert rep.pairs[0].norm_sum == 0


def test_distinctness_pads_grids():
    rep = pairwise_distinct([CoeffGrid([[1]]), CoeffGrid([[1, 0], [0, 1]])], [0, 0], NormWeights.uniform(2))
    assert rep.pairs[0].norm_diff == 2**6


def test_single_certificate_is_vacuously_distinct():
    cert = zero_certificate()
    rep = distinctness([(cert, verify(cert))])
    assert rep.pairs == [] and rep.all_distinct


def test_distinctness_needs_accepted_certificates():
    cert = zero_certificate(delta=mpq(1))
    with pytest.raises(ConfigurationError):
        distinctness([(cert, verify(cert))])


# ---------------------------------------------------------------- manifests

def test_manifest_round_trip(tmp_path):
    cert = zero_certificate()
    save_certificate(cert, tmp_path / "zero.cert")
    back = load_certificate(tmp_path / "zero.cert")
    assert back.u0 == cert.u0 and back.acal == cert.acal
    assert back.trunc == cert.trunc and back.weights == cert.weights
    assert (back.K0, back.delta, back.label) == (cert.K0, cert.delta, "zero")
    assert (tmp_path / "zero_u0.txt").exists() and (tmp_path / "zero_acal.txt").exists()


def test_manifest_with_explicit_horizon(tmp_path):
    u = CoeffGrid([[1]])
    w = NormWeights.default()
    trunc = make_truncation(u, FREQ, w, 1, mtilde=7)
    cert = Certificate(FREQ, u, AcalMatrix.identity(1), trunc, w, mpq(1, 2), mpq(1, 3))
    save_certificate(cert, tmp_path / "one.cert", explicit_mtilde=True)
    assert load_certificate(tmp_path / "one.cert").trunc.Mtilde == 7


# ---------------------------------------------------------------- a real trunk certificate

@pytest.fixture(scope="module")
def trunk_pipeline():
    bp = newton_solve(trunk_seed(9, 9, 1.725), mpq(69, 40), tol=1e-20)
    u0 = rationalize_candidate(bp, 10**12)
    return certify_candidate(u0, FREQ, NormWeights.default(), mu=11, mtilde=300, label="trunk9")


@pytest.mark.slow
def test_trunk_certificate_at_nine_modes(trunk_pipeline):
    res = trunk_pipeline
    assert res.report.bound_H0 < 1
    assert res.suggestion.feasible
    assert res.accepted
    assert res.outcome.epsilon < mpq(1, 1000)
    assert float(res.report.norm_u0) == pytest.approx(2.2045, abs=1e-3)


@pytest.mark.slow
def test_growing_delta_erodes_then_breaks_the_certificate(trunk_pipeline):
    res = trunk_pipeline
    K0, delta = res.certificate.K0, res.certificate.delta
    base = res.outcome
    doubled = outcome_for(res.report, K0, 2 * delta)
    assert doubled.lhs_contraction > base.lhs_contraction
    if doubled.accepted:
        assert K0 - doubled.lhs_contraction < K0 - base.lhs_contraction
    else:
        assert "contraction" in doubled.failure_reason
    far = outcome_for(res.report, K0, 1000 * delta)
    assert not far.accepted
    assert "contraction inequality fails" in far.failure_reason
