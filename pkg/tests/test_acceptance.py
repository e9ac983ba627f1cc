"""Acceptance criteria; each test appends one PASS/FAIL line to the terminal summary.

The heavy runs (certified eps_KAM at 2^10 ... 2^13 modes) are cached per
session, so the full module takes roughly half an hour on one core.
"""

import contextlib
import time

import mpmath
import numpy as np

from conftest import ACCEPTANCE_LINES
from dsmkam import certifier as cert
from dsmkam import fourier as fr
from dsmkam.bigreal import golden_diophantine, golden_mean, make_context
from dsmkam.dsm import MapParams, jacobian
from dsmkam.fourier import PeriodicFunction
from dsmkam.solver import (ContinuationConfig, continuation, convergence_order, newton_solve,
                           solve_cohomology_dissipative, solve_cohomology_small_divisor)

from reference_norms import EPS0, EPS_KAM, RHO0, TABLE_MODES, reference_report

_RUNS = {}


def certified_run(n_modes, digits, tol="1e-46"):
    key = (n_modes, digits, tol)
    if key not in _RUNS:
        t0 = time.perf_counter()
        res = cert.find_eps_kam(ContinuationConfig(n_modes=n_modes, digits=digits, tol=tol),
                                rho0=RHO0, delta_frac="0.25")
        _RUNS[key] = (res, time.perf_counter() - t0)
    return _RUNS[key]


@contextlib.contextmanager
def criterion(number, title):
    """Record one summary line; the body sets ``info['ok']`` and ``info['detail']``."""
    info = {"ok": False, "detail": ""}
    try:
        yield info
    except Exception as exc:
        info["ok"] = False
        if not info["detail"]:
            info["detail"] = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        status = "PASS" if info["ok"] else "FAIL"
        ACCEPTANCE_LINES.append(f"CRITERION {number}: {status} {title} ({info['detail']})")


def _fmt(x, n=10):
    return mpmath.nstr(mpmath.mpf(x), n)


def test_criterion_1_eps_kam_at_8192_modes():
    eps_ref, mu_ref = TABLE_MODES[8192]
    with criterion(1, "eps_KAM at 2^13 modes, 60 digits") as info:
        res, wall = certified_run(8192, 60)
        rel = abs(res.eps_kam / mpmath.mpf(eps_ref) - 1)
        dmu = abs(res.mu - mpmath.mpf(mu_ref))
        info["ok"] = rel <= 0.01 and dmu <= 2e-5
        info["detail"] = (f"eps_KAM={_fmt(res.eps_kam)} rel.dev={_fmt(rel, 3)}, "
                          f"mu={_fmt(res.mu)} |dmu|={_fmt(dmu, 3)}, {wall:.0f} s")
        assert info["ok"]


def test_criterion_2_eps_kam_non_decreasing_in_modes():
    with criterion(2, "eps_KAM non-decreasing over 2^10..2^13") as info:
        values = [certified_run(n, 60)[0].eps_kam for n in (1024, 2048, 4096, 8192)]
        info["ok"] = all(a <= b for a, b in zip(values, values[1:]))
        info["detail"] = ", ".join(_fmt(v) for v in values)
        assert info["ok"]


def test_criterion_3_precision_stability():
    # the Newton tolerance must sit well above the round-off floor of the lower
    # precision, otherwise 50 digits stops on round-off rather than truncation
    with criterion(3, "digits 50 vs 60 at 2^12 agree to 8 decimals, tol 1e-40") as info:
        a = certified_run(4096, 50, tol="1e-40")[0].eps_kam
        b = certified_run(4096, 60, tol="1e-40")[0].eps_kam
        info["ok"] = mpmath.nstr(a, 8) == mpmath.nstr(b, 8)
        info["detail"] = f"{_fmt(a, 12)} vs {_fmt(b, 12)}"
        assert info["ok"]


def test_criterion_4_reference_norms_certify():
    with criterion(4, "injected reference norms pass at eps0=7.7165e-36") as info:
        ctx = make_context(60)
        t0 = time.perf_counter()
        report = reference_report(ctx)
        nu, tau = golden_diophantine(ctx)
        rho0 = ctx.real(RHO0)
        delta0 = rho0 / 4
        eps0 = ctx.real(EPS0)
        bounds = cert.bounds_from_norms(report, ctx.real(EPS_KAM), ctx)
        ledger = cert.compute_constants(report, bounds, nu, tau, rho0, delta0, ctx.real("0.9"), eps0)
        conds = cert.check_conditions(ledger, eps0, rho0, nu, tau, rho0, delta0, report, bounds)
        wall = time.perf_counter() - t0
        info["ok"] = conds.overall and wall < 1
        info["detail"] = (f"failed {conds.failed() or 'none'}, T0*C_tau="
                          f"{_fmt(report.twist_T0 * ledger.C_tau, 4)}, {wall:.2f} s")
        assert info["ok"]


def _random_function(ctx, rng, n, zero_avg):
    mp = ctx.mp
    coeffs = {k: mp.mpc(*map(float, rng.normal(size=2))) for k in range(-(n // 2) + 1, n // 2)}
    if zero_avg:
        coeffs[0] = 0
    return PeriodicFunction.from_coefficients(coeffs, n, ctx)


def test_criterion_5_cohomology_round_trips():
    with criterion(5, "cohomology round trips, 100 instances per solver") as info:
        digits = 60
        ctx = make_context(digits)
        omega = golden_mean(ctx)
        tol = ctx.mp.mpf(10) ** (-digits + 8)
        rng = np.random.default_rng(20261016)
        worst = {}
        for label in ("0.5", "0.9", "1.1", "small"):
            err = ctx.mp.mpf(0)
            for _ in range(100):
                phi = _random_function(ctx, rng, 32, zero_avg=label == "small")
                if label == "small":
                    eta = fr.shift(phi, omega) - phi
                    got = solve_cohomology_small_divisor(eta, omega)
                else:
                    lam = ctx.real(label)
                    eta = fr.shift(phi, omega) - phi * lam
                    got = solve_cohomology_dissipative(eta, lam, omega)
                err = max(err, max(abs(a - b) for a, b in zip(got.coefficients(), phi.coefficients())))
            worst[label] = err
        info["ok"] = all(e <= tol for e in worst.values())
        info["detail"] = ", ".join(f"{k}: {_fmt(v, 3)}" for k, v in worst.items())
        assert info["ok"]


def test_criterion_6_conformal_determinant():
    with criterion(6, "det Df = lambda at 1000 random points") as info:
        digits = 60
        ctx = make_context(digits)
        mp = ctx.mp
        rng = np.random.default_rng(6)
        worst = mp.mpf(0)
        for _ in range(1000):
            eps, lam, mu, phi = (ctx.real(str(x)) for x in rng.uniform([0, 0.1, -1, -5], [2, 1.5, 1, 5]))
            (a, b), (c, d) = jacobian(MapParams(eps, lam, mu), phi)
            worst = max(worst, abs(a * d - b * c - lam))
        info["ok"] = worst <= mp.mpf(10) ** (-digits + 4)
        info["detail"] = f"max |det - lambda| = {_fmt(worst, 3)}"
        assert info["ok"]


def test_criterion_7_quadratic_convergence():
    with criterion(7, "Newton order >= 1.8 at eps=0.9, 2^12 modes") as info:
        state = continuation(ContinuationConfig(n_modes=4096, digits=115, eps_target="0.89"))
        K, mu = state.solution
        ctx = K.ctx
        p = MapParams(ctx.real("0.9"), ctx.real("0.9"), mu)
        run = newton_solve(K, mu, p, "1e-46")
        order = convergence_order(run.history)
        info["ok"] = run.converged and order >= 1.8
        info["detail"] = (f"order={_fmt(order, 4)}, residuals "
                          + " ".join(_fmt(r, 3) for r in run.history[-4:]))
        assert info["ok"]


def test_criterion_8_trivial_solution():
    with criterion(8, "eps=0 exact and certified with margins > 1e10") as info:
        digits = 60
        state = continuation(ContinuationConfig(n_modes=256, digits=digits, eps_target="0"))
        K, mu = state.solution
        ctx = K.ctx
        residual = state.history[0][2]
        c = cert.certify(K, mu, MapParams(ctx.real(0), ctx.real("0.9"), mu), RHO0)
        margins = {n: c.conditions[n].margin for n in ("C1", "C2", "C3", "C4")}
        info["ok"] = (residual <= ctx.mp.mpf(10) ** (-digits + 6) and c.overall
                      and all(m > 1e10 for m in margins.values()))
        info["detail"] = f"residual={_fmt(residual, 3)}, min margin={_fmt(min(margins.values()), 3)}"
        assert info["ok"]


def test_criterion_9_russmann_constant():
    with criterion(9, "Russmann constant (tau=1, lambda=0.9) to 30 digits") as info:
        ctx = make_context(60)
        got = cert.russmann_constant(ctx.real(1), ctx.real("0.9"))
        with mpmath.workdps(100):
            tau, lam = mpmath.mpf(1), mpmath.mpf("0.9")
            oracle = ((2 * mpmath.pi) ** -tau * mpmath.pi / (2 ** tau * (1 + lam))
                      * mpmath.sqrt(mpmath.gamma(2 * tau + 1) / 3))
            rel = abs(mpmath.mpf(got) / oracle - 1)
        info["ok"] = rel < mpmath.mpf(10) ** -30
        info["detail"] = f"C0={mpmath.nstr(got, 32)}, rel.err={_fmt(rel, 3)}"
        assert info["ok"]
