"""Quasi-Newton solver for the invariance equation f_mu o K = K o T_omega.

One step follows the classical reducibility scheme: build the adapted frame
M = [DK | J^{-1} DK N] along K, move the error to that frame, solve two
cohomology equations (one contractive, one with small divisors) plus a 2x2
system for the averages and the drift correction, and update K and mu.

All pointwise work happens on a grid with twice as many points as K has
modes; the error E is kept on that grid so its norm sees the truncation
tail of the solution.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import fourier as fr
from .bigreal import make_context, golden_mean
from .dsm import MapParams, Samples, embedding_from_u, error_grids, trivial_embedding
from .fourier import PeriodicFunction, analytic_norm

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class FrameDegenerate(SolverError):
    pass


class UnsolvableCohomology(SolverError):
    pass


class DegenerateTwist(SolverError):
    pass


class DivergingStep(SolverError):
    pass


class NoConvergence(SolverError):
    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


# cohomology equations ---------------------------------------------------

_den_cache = {}


def _divisors(n, omega, lam, ctx):
    """(c, d, c^2 + d^2) with c + i d = exp(2 pi i k omega) - lam, fixed point."""
    key = (n, ctx.to_fixed(omega), ctx.to_fixed(lam), ctx.prec)
    hit = _den_cache.get(key)
    if hit is None:
        cos_, sin_ = fr.phases(n, omega, ctx)
        c = cos_ - ctx.to_fixed(lam)
        d = sin_
        hit = (c, d, c * c + d * d)
        if len(_den_cache) > 64:
            _den_cache.clear()
        _den_cache[key] = hit
    return hit


def _divide(eta, c, d, den, skip_zero):
    b = eta.ctx.prec
    a, bb = eta.re, eta.im
    den = den.copy()
    if skip_zero:
        den[0] = 1
    re = ((a * c + bb * d) << b) // den
    im = ((bb * c - a * d) << b) // den
    if skip_zero:
        re[0] = im[0] = 0
    return PeriodicFunction(re, im, eta.ctx)


def solve_cohomology_dissipative(eta, lam, omega):
    """Solve phi(theta + omega) - lam phi(theta) = eta(theta).

    For lam = 1 the zero mode of the solution is set to 0, which requires
    eta to have zero average.
    """
    ctx = eta.ctx
    lam = ctx.real(lam)
    c, d, den = _divisors(eta.n_modes, omega, lam, ctx)
    if lam == 1:
        avg = abs(eta.coeff(0))
        if avg > ctx.mp.mpf(10) ** (10 - ctx.decimal_digits):
            raise UnsolvableCohomology(
                f"lambda = 1 needs a zero-average right-hand side, got |avg| = {ctx.mp.nstr(avg, 5)}")
        return _divide(eta, c, d, den, skip_zero=True)
    return _divide(eta, c, d, den, skip_zero=False)


def solve_cohomology_small_divisor(eta, omega):
    """Zero-average solution of phi(theta + omega) - phi(theta) = eta(theta).

    Divisors exp(2 pi i k omega) - 1 get arbitrarily small; solvability needs
    avg(eta) = 0.
    """
    ctx = eta.ctx
    avg = abs(eta.coeff(0))
    if avg > ctx.mp.mpf(10) ** (10 - ctx.decimal_digits):
        raise UnsolvableCohomology(
            f"small-divisor equation needs zero average, got |avg| = {ctx.mp.nstr(avg, 5)}")
    c, d, den = _divisors(eta.n_modes, omega, ctx.mp.mpf(1), ctx)
    return _divide(eta, c, d, den, skip_zero=True)


# frame ------------------------------------------------------------------


def matrix_norm(A):
    """Row-sum-of-largest-entry norm of a constant matrix (same rule as for matrix functions)."""
    return sum(max(abs(x) for x in row) for row in A)


@dataclass
class FrameData:
    """Adapted frame along K and the data of one Newton step.

    Grid arrays (fixed point, ``size`` points) are kept in ``grids``; the
    Fourier forms of M, M^{-1} and N are computed on demand.
    """

    ctx: object
    size: int
    grids: dict
    S: PeriodicFunction
    A_tilde: list
    B_a0: PeriodicFunction
    B_b0: PeriodicFunction
    E: list
    E_tilde: list

    def _spectra(self, names):
        return fr.real_spectra([self.grids[k] for k in names], self.ctx)

    @cached_property
    def N(self):
        return self._spectra(["N"])[0]

    @cached_property
    def M(self):
        m11, m21, m12, m22 = self._spectra(["a", "dv", "M12", "M22"])
        return [[m11, m12], [m21, m22]]

    @cached_property
    def Minv(self):
        a, dv, aN, dvN = self._spectra(["a", "dv", "M22", "dvN"])
        return [[aN, dvN], [-dv, a]]

    def inverse_defect(self):
        """max over the grid and entries of |Minv M - Id| (pointwise)."""
        g, b = self.grids, self.ctx.prec
        one = 1 << b
        a, dv = g["a"], g["dv"]
        aN, dvN = g["M22"], g["dvN"]
        m12 = -dvN
        p11 = ((aN * a + dvN * dv) >> b) - one
        p12 = (aN * m12 + dvN * aN) >> b
        p21 = (-dv * a + a * dv) >> b
        p22 = ((-dv * m12 + a * aN) >> b) - one
        worst = max(np.abs(x).max() for x in (p11, p12, p21, p22))
        return self.ctx.from_fixed(worst)


def mean_product(f, g):
    """Average of f g computed in Fourier space (sum_k f_k g_{-k})."""
    n, m = f.n_modes, g.n_modes
    if n < m:
        f, g, n, m = g, f, m, n
    km = fr.mode_indices(m)
    idx_f = km % n
    idx_g = (-km) % m
    b = f.ctx.prec
    total = (f.re[idx_f] * g.re[idx_g] - f.im[idx_f] * g.im[idx_g]).sum()
    return f.ctx.from_fixed(int(total) >> b)


def build_frame(K, p, samples=None, check=True):
    """Frame quantities of Algorithm steps 1-8 along K (mu taken from p)."""
    ctx = K.ctx
    b = ctx.prec
    mp = ctx.mp
    n = K.n_modes
    samples = samples or Samples(K)
    size = samples.size
    one = 1 << b

    a = samples.du + one
    dv = samples.dv
    a_w = samples.du_w + one
    dv_w = samples.dv_w
    norm2 = (a * a + dv * dv) >> b
    norm2_w = (a_w * a_w + dv_w * dv_w) >> b
    floor = ctx.to_fixed(mp.mpf(10) ** (-(ctx.decimal_digits // 2)))
    if min(norm2) < floor or min(norm2_w) < floor:
        raise FrameDegenerate("DK^T DK vanishes on the grid; frame is singular")
    N = (one << b) // norm2
    N_w = (one << b) // norm2_w
    aN = (a * N) >> b
    dvN = (dv * N) >> b
    aN_w = (a_w * N_w) >> b
    dvN_w = (dv_w * N_w) >> b

    if check:
        # pointwise adjugate inverse of M against the Lagrangian formula
        det = (a * aN + dv * dvN) >> b
        tol = ctx.to_fixed(mp.mpf(10) ** (8 - ctx.decimal_digits)) * (1 + max(np.abs(N).max() >> b, 1))
        if np.abs(det - one).max() > tol:
            raise FrameDegenerate("det M deviates from 1; frame inversion inconsistent")

    e1, e2 = error_grids(p, K, samples)
    # E~ = (M^{-1} o T_omega) E
    et1 = (aN_w * e1 + dvN_w * e2) >> b
    et2 = (a_w * e2 - dv_w * e1) >> b
    # A~ = (M^{-1} o T_omega) (1, 1)
    at1 = aN_w + dvN_w
    at2 = a_w - dv_w
    # S = (P o T_omega)^T Df J^{-1} P with P = DK N
    lam = ctx.to_fixed(p.lam)
    ec = (ctx.to_fixed(p.eps) * samples.c) >> b
    jp1, jp2 = -dvN, aN
    d1 = (((ec + one) * jp1 + lam * jp2) >> b)
    d2 = ((ec * jp1 + lam * jp2) >> b)
    S = (aN_w * d1 + dvN_w * d2) >> b

    E1, E2, Et1, Et2, A1, A2, S_f = fr.real_spectra([e1, e2, et1, et2, at1, at2, S], ctx)
    Et1n, Et2n = fr.truncate(Et1, n), fr.truncate(Et2, n)
    A1n, A2n = fr.truncate(A1, n), fr.truncate(A2, n)
    B_a0 = solve_cohomology_dissipative(fr.zero_average(Et2n), p.lam, K.omega)
    B_b0 = solve_cohomology_dissipative(fr.zero_average(A2n), p.lam, K.omega)
    grids = dict(a=a, dv=dv, N=N, M12=-dvN, M22=aN, dvN=dvN, S=S)
    return FrameData(ctx=ctx, size=size, grids=grids, S=S_f, A_tilde=[A1n, A2n],
                     B_a0=B_a0, B_b0=B_b0, E=[E1, E2], E_tilde=[Et1n, Et2n])


def drift_matrix(frame, lam):
    """The 2x2 matrix whose inverse norm is the twist constant."""
    S_bar = fr.average(frame.S)
    A1, A2 = frame.A_tilde
    return [[S_bar, mean_product(frame.S, frame.B_b0) + fr.average(A1)],
            [lam - 1, fr.average(A2)]]


def solve_drift_system(frame, E_tilde, lam):
    """Solve for (mean of W^(2), sigma); returns (W2_bar, sigma, T0)."""
    ctx = frame.ctx
    mp = ctx.mp
    A = drift_matrix(frame, ctx.real(lam))
    (a, b_), (c, d) = A
    det = a * d - b_ * c
    if abs(det) < mp.mpf(10) ** (-(ctx.decimal_digits // 2)):
        raise DegenerateTwist(f"averaged system is singular (det = {mp.nstr(det, 5)})")
    inv = [[d / det, -b_ / det], [-c / det, a / det]]
    r1 = -mean_product(frame.S, frame.B_a0) - fr.average(E_tilde[0])
    r2 = -fr.average(E_tilde[1])
    w2_bar = inv[0][0] * r1 + inv[0][1] * r2
    sigma = inv[1][0] * r1 + inv[1][1] * r2
    return w2_bar, sigma, matrix_norm(inv)


# Newton iteration ---------------------------------------------------------


@dataclass
class NewtonReport:
    residual_before: object
    residual_after: object
    sigma: object
    w_norms: tuple
    twist: object = None


def _evaluate(K, p, rho):
    """Frame along K and the norm at ``rho`` of the full invariance error.

    The error is kept on the 2N-point grid, so its norm includes the
    truncation tail; this is what makes the attainable residual depend on
    the number of modes.
    """
    frame = build_frame(K, p)
    return frame, analytic_norm(frame.E, rho, warn=False)


def newton_residual(K, p, rho=0):
    """Residual used by the stopping rule of :func:`newton_solve`."""
    return _evaluate(K, p, rho)[1]


def full_residual(K, p, rho=0, size=None):
    """Norm at ``rho`` of the whole error f_mu o K - K o T_omega sampled on ``size`` points."""
    samples = Samples(K, size=size, derivatives=False)
    E = fr.real_spectra(list(error_grids(p, K, samples)), K.ctx)
    return analytic_norm(E, rho, warn=False)


def _correction(K, p, frame, w_cap):
    """Steps 9-13 given the frame along K; returns (u_new, sigma, norms, T0)."""
    ctx = K.ctx
    b = ctx.prec
    n = K.n_modes
    w2_bar, sigma, T0 = solve_drift_system(frame, frame.E_tilde, p.lam)
    W2 = frame.B_a0 + frame.B_b0 * sigma + w2_bar
    (W2_grid,) = fr.real_grids([W2], frame.size)
    SW2 = fr.truncate(fr.real_spectra([(frame.grids["S"] * W2_grid) >> b], ctx)[0], n)
    Et1, _ = frame.E_tilde
    A1, _ = frame.A_tilde
    eta = fr.zero_average(SW2 + Et1 + A1 * sigma)
    W1 = solve_cohomology_small_divisor(eta, K.omega)
    w_norms = (analytic_norm(W1, 0, warn=False), analytic_norm(W2, 0, warn=False))
    if max(w_norms) > w_cap:
        raise DivergingStep(f"Newton correction too large: |W| = {ctx.mp.nstr(max(w_norms), 5)}")
    (W1_grid,) = fr.real_grids([W1], frame.size)
    g = frame.grids
    dphi = (g["a"] * W1_grid + g["M12"] * W2_grid) >> b
    (dphi_f,) = fr.real_spectra([dphi], ctx)
    u_new = K.u + fr.truncate(dphi_f, n)
    return u_new, sigma, w_norms, T0


def newton_step(K, mu, p, rho=0, w_cap=1000):
    """One quasi-Newton step; returns (K', mu', NewtonReport)."""
    p = p.with_mu(mu)
    frame, r0 = _evaluate(K, p, rho)
    u_new, sigma, w_norms, T0 = _correction(K, p, frame, w_cap)
    K1 = embedding_from_u(u_new, K.omega)
    mu1 = mu + sigma
    _, r1 = _evaluate(K1, p.with_mu(mu1), rho)
    return K1, mu1, NewtonReport(r0, r1, sigma, w_norms, T0)


@dataclass
class NewtonResult:
    K: object
    mu: object
    converged: bool
    iterations: int
    history: list
    reports: list = field(default_factory=list)

    @property
    def residual(self):
        return self.history[-1]


def newton_solve(K, mu, p, tol, max_iter=20, rho=0, w_cap=1000, stall_ratio=0.5):
    """Iterate Newton steps until the residual norm at ``rho`` is <= tol.

    Raises :class:`NoConvergence` (carrying the residual history) when the
    residual grows, stalls twice in a row above tol, or max_iter is reached.
    """
    ctx = K.ctx
    tol = ctx.real(tol)
    p = p.with_mu(mu)
    try:
        frame, r = _evaluate(K, p, rho)
    except SolverError as exc:
        raise NoConvergence(f"cannot start Newton: {exc}", []) from exc
    history = [r]
    reports = []
    stalls = 0
    for it in range(max_iter + 1):
        if r <= tol:
            return NewtonResult(K, mu, True, it, history, reports)
        if it == max_iter:
            break
        try:
            u_new, sigma, w_norms, T0 = _correction(K, p, frame, w_cap)
            K1 = embedding_from_u(u_new, K.omega)
            mu1 = mu + sigma
            p1 = p.with_mu(mu1)
            frame1, r1 = _evaluate(K1, p1, rho)
        except SolverError as exc:
            raise NoConvergence(f"Newton step failed: {exc}", history) from exc
        reports.append(NewtonReport(r, r1, sigma, w_norms, T0))
        history.append(r1)
        log.debug("newton it=%d residual=%s", it + 1, ctx.mp.nstr(r1, 4))
        if not ctx.mp.isfinite(r1) or r1 >= r:
            raise NoConvergence(f"residual did not decrease ({ctx.mp.nstr(r1, 4)} >= {ctx.mp.nstr(r, 4)})", history)
        stalls = stalls + 1 if r1 > stall_ratio * r else 0
        if stalls >= 2:
            raise NoConvergence(f"residual stalled at {ctx.mp.nstr(r1, 4)}", history)
        K, mu, p, frame, r = K1, mu1, p1, frame1, r1
    raise NoConvergence(f"no convergence in {max_iter} iterations (residual {ctx.mp.nstr(r, 4)})", history)


def convergence_order(history):
    """Order q fitted from the last three residuals, r_{k+1} ~ C r_k^q."""
    logs = [math.log(float(r)) for r in history if r > 0]
    if len(logs) < 3:
        raise ValueError("need at least three positive residuals")
    a, b, c = logs[-3:]
    return (c - b) / (b - a)


# continuation -----------------------------------------------------------


@dataclass
class ContinuationConfig:
    lam: object = "0.9"
    omega: object = None          # default: golden mean
    n_modes: int = 2 ** 10
    digits: int = 60
    tol: object = "1e-46"
    eps_target: object = "0"
    step: object = "0.05"
    min_step: object = "1e-8"
    max_step: object = "0.1"
    max_iter: int = 20
    rho: object = 0
    w_cap: float = 1000


@dataclass
class ContinuationState:
    eps_current: object
    step: object
    solution: tuple
    history: list = field(default_factory=list)
    reached_target: bool = False
    message: str = ""
    failures: int = 0
    newton_iterations: int = 0


def start_state(config):
    ctx = make_context(config.digits)
    omega = ctx.real(config.omega) if config.omega is not None else golden_mean(ctx)
    lam = ctx.real(config.lam)
    K = trivial_embedding(omega, config.n_modes, ctx)
    mu = (1 - lam) * omega
    return ctx, K, mu


def continuation(config, accept=None, state=None):
    """Advance eps from 0 (or from ``state``) toward config.eps_target.

    Each Newton solve starts from the previous solution.  A failed solve (or
    a solution rejected by ``accept(K, mu, p)``) halves the step; two
    successes in a row double it.  Stops at the target or when the step
    falls below ``min_step``.
    """
    ctx, K, mu = start_state(config)
    mp = ctx.mp
    lam = ctx.real(config.lam)
    target = ctx.real(config.eps_target)
    if target < 0:
        raise ValueError("eps_target must be nonnegative")
    min_step, max_step = ctx.real(config.min_step), ctx.real(config.max_step)
    if state is None:
        p0 = MapParams(mp.mpf(0), lam, mu)
        res0 = newton_solve(K, mu, p0, config.tol, config.max_iter, config.rho, config.w_cap)
        K, mu = res0.K, res0.mu
        if accept is not None and not accept(K, mu, p0):
            return ContinuationState(mp.mpf(0), mp.mpf(0), (K, mu), [],
                                     message="trivial solution rejected")
        state = ContinuationState(mp.mpf(0), ctx.real(config.step), (K, mu),
                                  [(mp.mpf(0), mu, res0.residual, res0.iterations)])
    successes = 0
    while state.eps_current < target:
        K, mu = state.solution
        eps = min(state.eps_current + state.step, target)
        p = MapParams(eps, lam, mu)
        ok = False
        try:
            res = newton_solve(K, mu, p, config.tol, config.max_iter, config.rho, config.w_cap)
            state.newton_iterations += res.iterations
            ok = accept is None or accept(res.K, res.mu, p.with_mu(res.mu))
            why = "rejected by acceptance check"
        except NoConvergence as exc:
            state.newton_iterations += len(exc.history) - 1
            why = str(exc)
        if ok:
            state.eps_current = eps
            state.solution = (res.K, res.mu)
            state.history.append((eps, res.mu, res.residual, res.iterations))
            log.info("eps=%s mu=%s residual=%s its=%d step=%s", mp.nstr(eps, 10),
                     mp.nstr(res.mu, 10), mp.nstr(res.residual, 3), res.iterations,
                     mp.nstr(state.step, 3))
            successes += 1
            if successes >= 2:
                state.step = min(2 * state.step, max_step)
                successes = 0
        else:
            state.failures += 1
            successes = 0
            state.step /= 2
            log.info("eps=%s failed (%s); step -> %s", mp.nstr(eps, 10), why, mp.nstr(state.step, 3))
            if state.step < min_step:
                state.message = (f"step underflow below {mp.nstr(min_step, 3)}; "
                                 f"last good eps = {mp.nstr(state.eps_current, 12)}")
                return state
    state.reached_target = True
    state.message = "reached target"
    return state
