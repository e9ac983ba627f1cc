import numpy as np
import pytest

from dsmkam import fourier as fr
from dsmkam.dsm import MapParams, embedding_from_u, trivial_embedding
from dsmkam.fourier import PeriodicFunction, analytic_norm
from dsmkam.solver import (ContinuationConfig, DegenerateTwist, FrameDegenerate, NoConvergence,
                           UnsolvableCohomology, build_frame, continuation, convergence_order,
                           drift_matrix, full_residual, matrix_norm, mean_product, newton_solve,
                           newton_step, solve_cohomology_dissipative,
                           solve_cohomology_small_divisor, solve_drift_system)


def rand_poly(n, ctx, rng, modes=None, real=True, zero_avg=False):
    mp = ctx.mp
    top = modes or n // 2 - 1
    coeffs = {}
    for k in range(0 if not zero_avg else 1, top + 1):
        c = mp.mpc(*map(float, rng.normal(size=2)))
        if real:
            if k == 0:
                c = mp.mpc(c.real, 0)
            coeffs[k] = c
            if k:
                coeffs[-k] = mp.conj(c)
        else:
            coeffs[k] = c
            if k:
                coeffs[-k] = mp.mpc(*map(float, rng.normal(size=2)))
    return PeriodicFunction.from_coefficients(coeffs, n, ctx)


def max_diff(f, g):
    return max(abs(a - b) for a, b in zip(f.coefficients(), g.coefficients()))


@pytest.mark.parametrize("lam", ["0.5", "0.9", "1.1", "2"])
def test_dissipative_round_trip(ctx, omega, lam):
    rng = np.random.default_rng(int(float(lam) * 10))
    lam = ctx.real(lam)
    for _ in range(5):
        phi = rand_poly(64, ctx, rng, modes=30, real=False)
        eta = fr.shift(phi, omega) - phi * lam
        got = solve_cohomology_dissipative(eta, lam, omega)
        assert max_diff(got, phi) < ctx.mp.mpf(10) ** -55
        # equation residual relative to eta
        res = fr.shift(got, omega) - got * lam - eta
        assert analytic_norm(res, 0, warn=False) <= ctx.mp.mpf(10) ** -52 * analytic_norm(eta, 0, warn=False)


def test_dissipative_constant_and_single_mode(ctx, omega):
    mp = ctx.mp
    lam = ctx.real("0.9")
    c = PeriodicFunction.constant(3, 16, ctx)
    assert abs(solve_cohomology_dissipative(c, lam, omega).coeff(0) - 30) < mp.mpf(10) ** -55
    e = PeriodicFunction.from_coefficients({1: 1}, 16, ctx)
    got = solve_cohomology_dissipative(e, lam, omega).coeff(1)
    assert abs(got - 1 / (mp.expjpi(2 * omega) - lam)) < mp.mpf(10) ** -56


def test_dissipative_lambda_one(ctx, omega):
    rng = np.random.default_rng(1)
    eta = rand_poly(32, ctx, rng, zero_avg=True)
    phi = solve_cohomology_dissipative(eta, 1, omega)
    assert phi.coeff(0) == 0
    with pytest.raises(UnsolvableCohomology):
        solve_cohomology_dissipative(eta + 1, 1, omega)


def test_small_divisor(ctx, omega):
    mp = ctx.mp
    rng = np.random.default_rng(2)
    for _ in range(5):
        phi = rand_poly(128, ctx, rng, zero_avg=True)
        eta = fr.shift(phi, omega) - phi
        got = solve_cohomology_small_divisor(eta, omega)
        assert max_diff(got, phi) < mp.mpf(10) ** -52
    e = PeriodicFunction.from_coefficients({1: 1}, 16, ctx)
    assert abs(solve_cohomology_small_divisor(e, omega).coeff(1) - 1 / (mp.expjpi(2 * omega) - 1)) < mp.mpf(10) ** -56
    zero = PeriodicFunction.zeros(16, ctx)
    assert max_diff(solve_cohomology_small_divisor(zero, omega), zero) == 0
    with pytest.raises(UnsolvableCohomology, match="average"):
        solve_cohomology_small_divisor(PeriodicFunction.constant("1e-20", 16, ctx), omega)


def test_mean_product_matches_grid_product(ctx):
    rng = np.random.default_rng(4)
    f = rand_poly(64, ctx, rng)
    g = rand_poly(32, ctx, rng)
    direct = fr.average(f * fr.pad(g, 64))
    assert abs(mean_product(f, g) - direct) < ctx.mp.mpf(10) ** -55


def trivial(ctx, omega, n=32, lam="0.9"):
    lam = ctx.real(lam)
    K = trivial_embedding(omega, n, ctx)
    mu = (1 - lam) * omega
    return K, mu, MapParams(ctx.real(0), lam, mu)


def test_frame_at_rotation(ctx, omega):
    K, mu, p = trivial(ctx, omega)
    fd = build_frame(K, p)
    mp = ctx.mp
    # DK = (1, 0), N = 1, M = identity, S = lambda
    assert abs(fr.average(fd.N) - 1) < ctx.eps
    assert abs(analytic_norm(fd.M, 0) - 2) < ctx.eps   # row-sum norm of the identity
    assert abs(fr.average(fd.S) - p.lam) < ctx.eps
    assert analytic_norm(fd.S - p.lam, 0) < ctx.eps
    assert fd.inverse_defect() < mp.mpf(10) ** -52
    A = drift_matrix(fd, p.lam)
    assert abs(A[0][0] - p.lam) < ctx.eps and abs(A[0][1] - 1) < ctx.eps
    assert abs(A[1][0] - (p.lam - 1)) < ctx.eps and abs(A[1][1] - 1) < ctx.eps
    assert fr.average(fd.B_a0) == 0 and fr.average(fd.B_b0) == 0


def test_frame_inverse_along_a_nontrivial_torus(ctx, omega):
    rng = np.random.default_rng(7)
    u = rand_poly(64, ctx, rng, modes=6, zero_avg=True) * ctx.real("0.02")
    K = embedding_from_u(u, omega)
    fd = build_frame(K, MapParams.make(ctx, "0.5", "0.9", "0.0617"))
    assert fd.inverse_defect() < ctx.mp.mpf(10) ** -52
    # Minv M = Id in Fourier space as well
    M, Mi = fd.M, fd.Minv
    for i in range(2):
        for j in range(2):
            e = Mi[i][0] * M[0][j] + Mi[i][1] * M[1][j]
            target = 1 if i == j else 0
            assert abs(fr.average(e) - target) < ctx.mp.mpf(10) ** -50


def test_frame_degenerate(ctx, omega):
    # u = -theta-like slope: 1 + u' vanishes on the grid when u' = -1 somewhere and v' = 0
    mp = ctx.mp
    c = 1 / (2 * mp.pi)
    u = PeriodicFunction.from_coefficients({1: mp.mpc(0, -c / 2), -1: mp.mpc(0, c / 2)}, 16, ctx)
    K = embedding_from_u(u, ctx.real(0))
    with pytest.raises(FrameDegenerate):
        build_frame(K, MapParams.make(ctx, "0", "0.9"))


def test_drift_system_zero_error(ctx, omega):
    K, mu, p = trivial(ctx, omega)
    fd = build_frame(K, p)
    zero = [PeriodicFunction.zeros(32, ctx)] * 2
    w2, sigma, T0 = solve_drift_system(fd, zero, p.lam)
    assert w2 == 0 and sigma == 0
    # inverse of [[lam, 1], [lam - 1, 1]] (det 1) has row norms 1 + lam
    assert abs(T0 - (1 + p.lam)) < ctx.eps


def test_drift_system_linear_algebra_oracle(ctx, omega):
    """Against the explicit solution of the 2x2 system with a random right-hand side."""
    K, mu, p = trivial(ctx, omega)
    fd = build_frame(K, p)
    rng = np.random.default_rng(3)
    mp = ctx.mp
    e1, e2 = (mp.mpf(float(x)) for x in rng.normal(size=2))
    Et = [PeriodicFunction.constant(e1, 32, ctx), PeriodicFunction.constant(e2, 32, ctx)]
    w2, sigma, _ = solve_drift_system(fd, Et, p.lam)
    A = drift_matrix(fd, p.lam)
    r1 = A[0][0] * w2 + A[0][1] * sigma + e1
    r2 = A[1][0] * w2 + A[1][1] * sigma + e2
    assert abs(r1) < mp.mpf(10) ** -56 and abs(r2) < mp.mpf(10) ** -56


def test_degenerate_twist(ctx, omega):
    K, mu, p = trivial(ctx, omega)
    fd = build_frame(K, p)
    # with lambda = 1 and S = 0 the averaged matrix loses rank
    fd.S = PeriodicFunction.zeros(fd.S.n_modes, ctx)
    fd.A_tilde = [fd.A_tilde[0], PeriodicFunction.zeros(32, ctx)]
    with pytest.raises(DegenerateTwist):
        solve_drift_system(fd, fd.E_tilde, ctx.real(1))


def test_newton_step_at_exact_solution(ctx, omega):
    K, mu, p = trivial(ctx, omega)
    K1, mu1, rep = newton_step(K, mu, p)
    assert max(rep.w_norms) <= ctx.mp.mpf(10) ** -54
    assert abs(rep.sigma) <= ctx.mp.mpf(10) ** -54
    assert analytic_norm(K1.u - K.u, 0) <= ctx.mp.mpf(10) ** -54
    assert abs(fr.average(K1.v) - omega) < ctx.eps


def test_newton_solve_zero_iterations_at_solution(ctx, omega):
    K, mu, p = trivial(ctx, omega)
    res = newton_solve(K, mu, p, "1e-46")
    assert res.converged and res.iterations == 0


def test_newton_quadratic_and_average_preserved(ctx, omega):
    K, mu, p = trivial(ctx, omega, n=256)
    p = p.with_eps(ctx.real("0.3"))
    res = newton_solve(K, mu, p, "1e-46")
    h = [float(ctx.mp.log10(r)) for r in res.history]
    assert all(b < a for a, b in zip(h, h[1:]))
    assert convergence_order(res.history[:-1]) > 1.8
    assert abs(fr.average(res.K.v) - omega) < ctx.eps
    # independent re-evaluation on a 4N grid
    assert full_residual(res.K, p.with_mu(res.mu), size=4 * 256) < ctx.mp.mpf(10) ** -45


def test_newton_reports_failure_with_history(ctx, omega):
    K, mu, p = trivial(ctx, omega, n=32)
    p = p.with_eps(ctx.real("0.95"))
    with pytest.raises(NoConvergence) as info:
        newton_solve(K, mu, p, "1e-46", max_iter=6)
    assert len(info.value.history) >= 1


def test_convergence_order_fit():
    assert convergence_order([1e-2, 1e-4, 1e-8, 1e-16]) == pytest.approx(2)
    with pytest.raises(ValueError):
        convergence_order([1e-3, 1e-6])


def test_matrix_norm_rows():
    assert matrix_norm([[1, -3], [2, 0.5]]) == 5


def test_continuation_zero_target(ctx, omega):
    st = continuation(ContinuationConfig(n_modes=32, digits=60, eps_target="0"))
    assert st.reached_target and st.eps_current == 0
    K, mu = st.solution
    assert analytic_norm(K.u, 0) == 0
    assert abs(mu - (1 - ctx.real("0.9")) * omega) < ctx.eps


def test_continuation_branch(ctx):
    st = continuation(ContinuationConfig(n_modes=256, digits=60, eps_target="0.4", step="0.2"))
    assert st.reached_target
    eps = [h[0] for h in st.history]
    assert all(b > a for a, b in zip(eps, eps[1:]))
    mus = [h[1] for h in st.history]
    assert all(0.0613 <= float(m) <= 0.0619 for m in mus)
    assert all(b <= a for a, b in zip(mus, mus[1:]))


def test_continuation_step_underflow(ctx):
    st = continuation(ContinuationConfig(n_modes=32, digits=60, eps_target="0.99", step="0.3",
                                         min_step="1e-3", max_step="0.3"))
    assert not st.reached_target
    assert "last good eps" in st.message
    assert 0 < st.eps_current < 0.99


def test_continuation_rejects_negative_target():
    with pytest.raises(ValueError):
        continuation(ContinuationConfig(n_modes=32, digits=60, eps_target="-1"))
