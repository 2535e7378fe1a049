"""Connection-equation solver and the double-log asymptotics around it."""

import random

import pytest
from mpmath import mp, mpf

from polylab import (
    AsymptoticModel,
    ConnectionProblem,
    DomainError,
    FitFailureError,
    InvalidInputError,
    PerturbedPowerFamily,
    asymptotic_model,
    beta,
    bracket_double_logs,
    generate_sequence,
    recover_parameters,
    residual_analysis,
    solve_connection,
    synthetic_sequence,
    theta,
)

# 30-digit reference values for the standing example problem
# (C=2, Lambda=0.6, B=0.1), frozen from an independent evaluation of
# beta = ln(ln C/(1-L) - ln B) and theta = -e^(-beta) ln C/(1-L).
# Kept as strings: they must be parsed inside a working-precision block.
BETA_REF = "1.39511857407933561092292015368"
THETA_REF = "-0.429411005985357819420618405181"


def model_problem() -> ConnectionProblem:
    return ConnectionProblem(
        family=PerturbedPowerFamily(C=2, Lambda0="0.6"), B0="0.1", B1=0
    )


def test_beta_exact_points(prec):
    with prec.work():
        assert abs(beta(1, "0.5", mp.exp(-1), prec)) < mpf(2) ** -250
        assert abs(beta(mp.e, "0.5", 1, prec) - mp.log(2)) < mpf(2) ** -250
    with pytest.raises(DomainError):
        beta(1, "0.5", 2, prec)


def test_theta_exact_points(prec):
    with prec.work():
        assert theta(1, "0.5", "0.37", prec) == 0
        assert abs(theta(mp.e, "0.5", 1, prec) + 1) < mpf(2) ** -250


def test_theta_two_routes_agree(prec):
    # -e^(-beta) t against -t / (t - ln B), t = ln C / (1 - L).
    rng = random.Random(5)
    with prec.work():
        for _ in range(100):
            C = mpf(rng.uniform(0.2, 4.0))
            L = mpf(rng.uniform(0.1, 0.9))
            t = mp.log(C) / (1 - L)
            B = mp.exp(t - mpf(rng.uniform(0.05, 3.0)))  # admissible by construction
            if not (0 < B < 1):
                B = mpf("0.5") * mp.exp(t - mpf(rng.uniform(1.0, 3.0)))
            th = theta(C, L, B, prec)
            direct = -t / (t - mp.log(B))
            assert abs(th - direct) <= prec.tol * max(1, abs(direct))


def test_problem_validation(prec):
    fam = PerturbedPowerFamily(C=2, Lambda0="0.6")
    with pytest.raises(DomainError):
        ConnectionProblem(family=fam, B0="1.5", B1=0)


def test_model_constants_match_reference(prec):
    model = asymptotic_model(model_problem(), prec)
    with prec.work():
        assert abs(model.beta - mpf(BETA_REF)) < mpf("1e-28")
        assert abs(model.theta - mpf(THETA_REF)) < mpf("1e-28")
        assert model.Lambda == mpf("0.6")


def test_solve_connection_zero_iterations(prec):
    # psi=0, Lambda1=B1=0 and n=0: f_eps(0) = eps = B0 exactly.
    z0 = solve_connection(model_problem(), 0, prec)
    with prec.work():
        assert abs(z0.z - mp.log(mp.log(10))) < mpf("1e-35")


def test_solve_connection_quadratic_oracle(prec):
    # n=1, C=1, L=1/2: sqrt(eps) + eps = 1/4 has the closed-form root
    # eps = ((sqrt(2) - 1)/2)^2.
    prob = ConnectionProblem(
        family=PerturbedPowerFamily(C=1, Lambda0="0.5"), B0="0.25", B1=0
    )
    z1 = solve_connection(prob, 1, prec)
    with prec.work():
        oracle = ((mp.sqrt(2) - 1) / 2) ** 2
        assert abs(z1.to_eps(prec) - oracle) / oracle < mpf("1e-35")


def test_solve_connection_near_prediction(prec):
    prob = model_problem()
    model = asymptotic_model(prob, prec)
    z15 = solve_connection(prob, 15, prec)
    with prec.work():
        pred = model.predict(15, prec)
        assert abs(z15.z - pred) <= abs(model.theta) * mpf("0.6") ** 15 / 2


def test_solve_connection_rejects_negative_index(prec):
    with pytest.raises(InvalidInputError):
        solve_connection(model_problem(), -1, prec)


def test_sequence_monotone_with_limiting_spacing(prec):
    prob = model_problem()
    seq = generate_sequence(prob, 20, prec)
    model = asymptotic_model(prob, prec)
    assert [e.n for e in seq.entries] == list(range(21))
    with prec.work():
        zs = seq.z_values()
        assert all(zs[i + 1] > zs[i] for i in range(len(zs) - 1))
        L = mpf("0.6")
        spacing = zs[-1] - zs[-2]
        # first-order spacing |theta| L^(N-1) (1-L), with the o(L^n)
        # remainder allowed one more geometric factor
        bound = abs(model.theta) * L ** 19 * (1 - L) * (1 + L ** 19 * 2) + mpf(prec.tol)
        assert abs(spacing + mp.log(L)) <= bound

    single = generate_sequence(prob, 0, prec)
    assert len(single) == 1


def test_residuals_of_exact_model_vanish(prec):
    model = AsymptoticModel(Lambda="0.6", beta="1.2", theta="-0.8")
    seq = synthetic_sequence(model, 14, prec)
    report = residual_analysis(seq, model, prec)
    assert report.verdict == "consistent"
    assert all(r == 0 for r in report.residuals)
    assert all(v == 0 for v in report.normalized)


def test_residuals_detect_higher_order_term(prec):
    model = AsymptoticModel(Lambda="0.6", beta="1.2", theta="-0.8")
    with prec.work():
        L = mpf("0.6")
        seq = synthetic_sequence(model, 20, prec, extra=lambda n: L ** (2 * n))
    report = residual_analysis(seq, model, prec)
    assert report.verdict == "consistent"
    with prec.work():
        tail = report.normalized[report.tail_start:]
        # normalized residuals behave like L^n on the tail
        assert all(0 < tail[i + 1] < tail[i] for i in range(len(tail) - 1))


def test_residuals_reject_constant_offset(prec):
    model = AsymptoticModel(Lambda="0.6", beta="1.2", theta="-0.8")
    seq = synthetic_sequence(model, 20, prec, extra=lambda n: mpf("1e-3"))
    report = residual_analysis(seq, model, prec)
    assert report.verdict == "inconsistent"


def test_residuals_need_enough_entries(prec):
    model = AsymptoticModel(Lambda="0.6", beta="1.2", theta="-0.8")
    seq = synthetic_sequence(model, 5, prec)
    with pytest.raises(InvalidInputError):
        residual_analysis(seq, model, prec)


def test_recover_exact_synthetic(prec):
    model = AsymptoticModel(Lambda="0.6", beta="1.2", theta="-0.8")
    seq = synthetic_sequence(model, 30, prec)
    rec = recover_parameters(seq, prec)
    with prec.work():
        assert abs(rec.model.Lambda - mpf("0.6")) < mpf("1e-6")
        assert abs(rec.model.beta - mpf("1.2")) < mpf("1e-6")
        assert abs(rec.model.theta + mpf("0.8")) < mpf("1e-6")
        assert not rec.theta_flagged_zero


def test_recover_flags_zero_coefficient(prec):
    model = AsymptoticModel(Lambda="0.6", beta="1.2", theta=0)
    seq = synthetic_sequence(model, 25, prec)
    rec = recover_parameters(seq, prec)
    assert rec.theta_flagged_zero
    assert rec.model.theta == 0
    with prec.work():
        assert abs(rec.model.Lambda - mpf("0.6")) < mpf("1e-20")
        assert abs(rec.model.beta - mpf("1.2")) < mpf("1e-20")


def test_recover_rejects_non_geometric_residuals(prec):
    model = AsymptoticModel(Lambda="0.6", beta="1.2", theta="-0.8")
    seq = synthetic_sequence(
        model, 25, prec, extra=lambda n: (-1) ** n * mpf("1e-4")
    )
    with pytest.raises(FitFailureError):
        recover_parameters(seq, prec)


def test_recover_from_solver_sequence(prec):
    prob = model_problem()
    seq = generate_sequence(prob, 20, prec)
    rec = recover_parameters(seq, prec)
    with prec.work():
        assert abs(rec.model.Lambda - mpf("0.6")) < mpf("1e-3")
        assert abs(rec.model.beta - mpf(BETA_REF)) < mpf("1e-2")


def test_closed_form_brackets_straddle(prec):
    # Unit envelope constant: the comparison maps straddle the solved z_n.
    # The true margins shrink double-exponentially in n, so strictness is
    # asserted only while they stay above the solver tolerance; past that
    # the straddle is checked up to solver noise.
    prob = model_problem()
    for n in range(3, 10):
        z = solve_connection(prob, n, prec)
        lo, hi = bracket_double_logs(prob, n, z, 1, prec)
        with prec.work():
            noise = 16 * mpf(prec.tol) * max(1, abs(z.z))
            assert lo - noise < z.z < hi + noise
            if n <= 7:
                assert lo < z.z < hi
            if n <= 6:
                assert min(z.z - lo, hi - z.z) > mpf("1e-20")
