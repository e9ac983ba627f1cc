"""A-posteriori KAM certification of an approximate invariant attractor.

Given a numerical solution (K0, mu0) the certifier measures a handful of
strip norms (:class:`NormReport`), feeds them through the explicit list of
constants of the theorem (:class:`ConstantLedger`) and checks the ten
smallness conditions (:class:`ConditionReport`).  :func:`find_eps_kam`
drives the continuation and returns the largest eps whose solution passes.
"""

import logging
from dataclasses import asdict, dataclass, fields

from . import fourier as fr
from .bigreal import golden_diophantine, make_context
from .dsm import DerivativeBounds, derivative_bounds
from .fourier import analytic_norm
from .solver import ContinuationConfig, build_frame, continuation, drift_matrix, matrix_norm

log = logging.getLogger(__name__)

EPS_CRITICAL = "0.97198"


class CertificationError(RuntimeError):
    pass


def russmann_constant(tau, lam):
    """Constant of the small-divisor estimate for the dissipative cohomology equation.

    C0 = (2 pi)^-tau * pi / (2^tau (1 + lam)) * sqrt(Gamma(2 tau + 1) / 3)
    """
    mp = lam.context if hasattr(lam, "context") else tau.context
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return (2 * mp.pi) ** (-tau) * mp.pi / (2 ** tau * (1 + lam)) * mp.sqrt(mp.gamma(2 * tau + 1) / 3)


def cauchy_constant(order, ctx):
    """Cauchy constant for derivatives of order ``order`` (l! (2 pi)^-1); order 1 is taken as 1."""
    mp = ctx.mp
    if order == 1:
        return mp.mpf(1)
    return mp.factorial(order) / (2 * mp.pi)


@dataclass
class NormReport:
    norm_M: object
    norm_Minv: object
    norm_Df: object
    norm_D2f: object
    norm_S: object
    norm_N: object
    norm_Ninv: object
    norm_DK: object
    norm_D2K: object
    norm_DKinv: object
    twist_T0: object
    norm_E0: object
    norm_D2E0: object

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be nonnegative")

    def as_dict(self):
        return asdict(self)


def compute_norm_report(K, mu, p, rho0, delta0=None):
    """Strip norms at radius rho0 of the quantities entering the theorem."""
    ctx = K.ctx
    rho0 = ctx.real(rho0)
    p = p.with_mu(mu)
    frame = build_frame(K, p)
    g = frame.grids
    b = ctx.prec
    norm2 = ((g["a"] * g["a"] + g["dv"] * g["dv"]) >> b)
    (Ninv,) = fr.real_spectra([norm2], ctx)
    du, dv = fr.derivative(K.u), fr.derivative(K.v)
    d2u, d2v = fr.derivative(K.u, 2), fr.derivative(K.v, 2)
    E1, E2 = frame.E
    bounds = derivative_bounds(p, K, rho0)
    norm_DK = analytic_norm(du + 1, rho0) + analytic_norm(dv, rho0)
    norm_N = analytic_norm(frame.N, rho0, warn=False)
    # the derivative of E is measured on the grid where E lives
    d2E = analytic_norm([fr.derivative(E1, 2), fr.derivative(E2, 2)], rho0, warn=False)
    return NormReport(
        norm_M=analytic_norm(frame.M, rho0, warn=False),
        norm_Minv=analytic_norm(frame.Minv, rho0, warn=False),
        norm_Df=bounds.Q0,
        norm_D2f=bounds.sup_D2f,
        norm_S=analytic_norm(frame.S, rho0, warn=False),
        norm_N=norm_N,
        norm_Ninv=analytic_norm(Ninv, rho0, warn=False),
        norm_DK=norm_DK,
        norm_D2K=analytic_norm(d2u, rho0) + analytic_norm(d2v, rho0),
        # left inverse N DK^T, bounded by the product of the two norms
        norm_DKinv=norm_N * norm_DK,
        twist_T0=matrix_norm(_inverse2(drift_matrix(frame, p.lam), ctx)),
        norm_E0=analytic_norm([E1, E2], rho0, warn=False),
        norm_D2E0=d2E,
    ), bounds


def _inverse2(A, ctx):
    (a, b), (c, d) = A
    det = a * d - b * c
    if det == 0:
        raise CertificationError("averaged twist matrix is singular")
    return [[d / det, -b / det], [-c / det, a / det]]


def bounds_from_norms(report, eps, ctx):
    """Derivative sups reconstructed from a NormReport alone.

    Only the cosine of the kick enters Df, and ||Df|| = ||1 + eps c|| + max(||eps c||, lam);
    when eps ||c|| dominates lam this gives eps ||c|| = (||Df|| - 1) / 2, hence
    ||D^3 f|| = (2 pi)^2 eps ||c|| = 2 pi^2 (||Df|| - 1).
    """
    mp = ctx.mp
    zero = mp.mpf(0)
    d3 = 2 * mp.pi ** 2 * (report.norm_Df - 1)
    return DerivativeBounds(Q0=report.norm_Df, Q_mu0=mp.mpf(1), Q_zmu0=zero, Q_mumu0=zero,
                            sup_D2f=report.norm_D2f, sup_D3f=d3, sup_DmuDf=zero,
                            sup_DmuD2f=zero, sup_Dmu2f=zero, sup_DDmu2f=zero, sup_Dmu3f=zero)


@dataclass
class ConstantLedger:
    C0: object
    Cc: object
    C_sigma0: object
    C_W20: object
    C_W20_bar: object
    C_W10: object
    C_W0: object
    C_eta0: object
    C_R0: object
    C_E0: object
    C_d0: object
    kappa0: object
    kappaK: object
    kappaMu: object
    D_K: object
    D_2K: object
    C_N: object
    C_M: object
    C_Minv: object
    C_S: object
    C_SB: object
    C_tau: object
    C_T: object
    C_sigma: object
    C_W2: object
    C_W2_bar: object
    C_W1: object
    C_W: object
    C_R: object
    C_Q: object
    Q_E0: object

    def as_dict(self):
        return asdict(self)

    def is_finite(self):
        return all(v.context.isfinite(v) for v in asdict(self).values())


def compute_constants(report, bounds, nu, tau, rho0, delta0, lam, eps0):
    """Every constant of the theorem, evaluated in dependency order.

    Returns a ledger; if T0 C_tau >= 1 the constant C_T (and everything
    built on it) is +inf, which fails the conditions downstream.
    """
    mp = lam.context
    if lam == 1:
        raise CertificationError("the constant ledger needs lambda != 1")
    if not 0 < delta0 < rho0:
        raise ValueError("need 0 < delta0 < rho0")
    r = report
    S, Mi, M = r.norm_S, r.norm_Minv, r.norm_M
    DK, D2K, N = r.norm_DK, r.norm_D2K, r.norm_N
    T0 = r.twist_T0
    Qmu = bounds.Q_mu0
    Q0 = bounds.Q0
    Je = mp.mpf(1)
    Cc = mp.mpf(1)
    inv = 1 / abs(abs(lam) - 1)
    lm1 = abs(lam - 1)
    nd = nu * delta0 ** tau

    C0 = russmann_constant(tau, lam)
    C_sigma0 = T0 * (lm1 * (inv * S + 1) + S) * Mi
    C_W20 = inv * (1 + C_sigma0 * Qmu) * Mi
    C_W20_bar = 2 * T0 * (inv * S + 1) * Qmu * Mi ** 2
    C_W10 = C0 * (S * (C_W20 + C_W20_bar) + Mi + Qmu * Mi * C_sigma0)
    C_W0 = C_W10 + (C_W20 + C_W20_bar) * nd
    C_eta0 = C_W0 * M + C_sigma0 * nd
    Q_E0 = r.norm_D2E0 / 2
    C_R0 = Q_E0 * (M ** 2 * C_W0 ** 2 + C_sigma0 ** 2 * nd ** 2)
    C_E0 = Cc * C_W0 * nu * delta0 ** (tau - 1) + C_R0
    C_d0 = C_W0 * M
    kappa0 = 2 ** (2 * tau + 1) * C_E0 * nu ** -2 * delta0 ** (-2 * tau)
    kappaK = 4 * C_d0 / nd
    kappaMu = 4 * C_sigma0
    D_K = 4 * C_d0 * Cc / nu * delta0 ** (-tau - 1) * eps0
    D_2K = 4 * C_d0 * Cc ** 2 / nu * delta0 ** (-tau - 2) * eps0

    den_N = 1 - N * D_K * (2 * DK + D_K)
    C_N = N ** 2 * (2 * DK + D_K) / den_N if den_N > 0 else mp.inf
    C_M = 1 + Je * (C_N * (DK + D_K) + N)
    C_Minv = C_N * (DK + D_K) + N + Je
    n_ = N + C_N * D_K
    inner = D_K * n_ + DK * N + DK * C_N * D_K
    C_S = 2 * Je * Q0 * (n_ * inner + C_N * DK * inner + N * DK * n_ + C_N * N * DK ** 2)
    C_SB = (inv * Qmu * Mi * C_S + 2 * Je * Q0 * N ** 2 * DK ** 2 * inv * C_Minv * Qmu
            + 2 * C_S * inv * C_Minv * Qmu * D_K)
    big = max(C_S, C_SB + 2 * C_Minv * Qmu)
    C_tau = big * D_K
    C_T = T0 ** 2 / (1 - T0 * C_tau) * big if T0 * C_tau < 1 else mp.inf

    S_ = S + C_S * D_K
    Mi_ = Mi + C_Minv * D_K
    C_sigma = (C_T * (lm1 * (inv * S_ + 1) + S_) * Mi_
               + T0 * (lm1 * (inv * S_ + 1) * C_Minv + lm1 * inv * Mi * C_S + C_S * Mi_ + C_Minv * S))
    C_W2_bar = (4 * C_T * (inv * S_ + 1) * Qmu * (Mi + D_K) ** 2
                + 4 * T0 * Qmu * inv * C_S * (Mi + D_K) ** 2
                + 4 * T0 * Qmu * (inv * S_ + 1) * (D_K + 2 * Mi))
    C_W2 = inv * (1 + 2 * Qmu * Mi * C_sigma + 2 * Qmu * C_sigma0 + 2 * Qmu * C_sigma * D_K)
    C_W1 = C0 * (S * C_W2 + C_S * C_W20 + C_S * C_W2 * D_K + S * C_W2_bar
                 + C_S * C_W20_bar + C_S * C_W2_bar * D_K + 1
                 + 2 * Qmu * Mi * C_sigma + 2 * Qmu * C_sigma0 + 2 * Qmu * C_sigma * D_K)
    C_W = C_W1 + C_W2 * nd + C_W2_bar * nd

    d3, d2 = bounds.sup_D3f, bounds.sup_D2f
    dmd2, dmd = bounds.sup_DmuD2f, bounds.sup_DmuDf
    ratio = C_sigma0 / C_d0 if C_d0 else mp.mpf(0)
    lift = 4 * C_d0 / Cc / nu * delta0 ** (1 - tau) * eps0
    group1 = (1 + d3 * DK ** 2 * delta0 ** 2 / Cc ** 2
              + dmd2 * DK ** 2 * ratio * delta0 ** (tau + 2) / Cc ** 2
              + d2 * DK * delta0 / Cc
              + d3 * DK * lift
              + dmd2 * DK * 4 * C_sigma0 * delta0 * eps0 / Cc
              + d2 * D2K ** 2 * delta0 ** 2 / Cc ** 2
              + dmd * D2K * ratio * nu * delta0 ** (tau + 2) / Cc ** 2
              + d2 * (DK + D_K) * delta0 / Cc
              + d3 * (DK + D_K) * lift
              + dmd2 * (DK + D_K) * 4 * C_sigma0 * delta0 * eps0 / Cc
              + Q0 + d2 * kappaK * eps0
              + dmd * kappaMu * eps0)
    group2 = (bounds.sup_DmuDf * delta0 / Cc
              + bounds.sup_DmuD2f * delta0 ** 2 * (DK + D_K) / Cc ** 2
              + bounds.sup_DDmu2f * ratio * nu * delta0 ** (tau + 2) * (DK + D_K) / Cc ** 2)
    group3 = bounds.sup_Dmu3f * ratio * nu * delta0 ** (tau + 2) / Cc ** 2
    C_Q = max(group1, group2, group3) / 2

    W_ = C_W0 + C_W * D_K
    C_R = (Q_E0 * ((2 * C_M * M + C_M ** 2 * D_K) * W_ ** 2
                   + M ** 2 * (C_W ** 2 * D_K + 2 * C_W0 * C_W)
                   + (C_sigma ** 2 * D_K + 2 * C_sigma0 * C_sigma) * nd ** 2)
           + C_Q * ((M + C_M * D_K) ** 2 * W_ ** 2 + (C_sigma0 + C_sigma * D_K) ** 2 * nd ** 2)
           * Cc / delta0)

    return ConstantLedger(
        C0=C0, Cc=Cc, C_sigma0=C_sigma0, C_W20=C_W20, C_W20_bar=C_W20_bar, C_W10=C_W10,
        C_W0=C_W0, C_eta0=C_eta0, C_R0=C_R0, C_E0=C_E0, C_d0=C_d0, kappa0=kappa0,
        kappaK=kappaK, kappaMu=kappaMu, D_K=D_K, D_2K=D_2K, C_N=C_N, C_M=C_M, C_Minv=C_Minv,
        C_S=C_S, C_SB=C_SB, C_tau=C_tau, C_T=C_T, C_sigma=C_sigma, C_W2=C_W2,
        C_W2_bar=C_W2_bar, C_W1=C_W1, C_W=C_W, C_R=C_R, C_Q=C_Q, Q_E0=Q_E0)


@dataclass
class Condition:
    name: str
    lhs: object
    rhs: object
    strict: bool

    @property
    def passed(self):
        if not (self.lhs.context.isfinite(self.lhs)):
            return False
        return self.lhs < self.rhs if self.strict else self.lhs <= self.rhs

    @property
    def margin(self):
        """rhs / lhs (inf when the left side vanishes)."""
        mp = self.rhs.context
        if self.lhs == 0:
            return mp.inf
        return self.rhs / self.lhs


@dataclass
class ConditionReport:
    conditions: list
    bound_K: object
    bound_mu: object

    @property
    def overall(self):
        return all(c.passed for c in self.conditions)

    def __getitem__(self, name):
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed(self):
        return [c.name for c in self.conditions if not c.passed]


def check_conditions(ledger, eps0, zeta, nu, tau, rho0, delta0, report, bounds):
    """Evaluate the ten smallness conditions and the closeness bounds of the conclusion."""
    L = ledger
    mp = eps0.context
    one = mp.mpf(1)
    D_K = L.D_K
    conds = [
        Condition("C1", L.C_eta0 / nu * delta0 ** -tau * eps0, zeta, True),
        Condition("C2", 2 ** (3 * tau + 4) * L.C_E0 * nu ** -2 * delta0 ** (-2 * tau) * eps0, one, False),
        Condition("C3", 4 * L.C_d0 / nu * delta0 ** -tau * eps0, zeta, True),
        Condition("C4", 4 * L.C_sigma0 * eps0, zeta, True),
        Condition("condbT", report.norm_N * (2 * report.norm_DK + D_K) * D_K, one, True),
        Condition("Cnew1", 4 * bounds.Q_zmu0 * L.C_sigma0 * eps0, bounds.Q0, True),
        Condition("Cnew2", 4 * bounds.Q_mumu0 * L.C_sigma0 * eps0, bounds.Q_mu0, True),
        Condition("C8", L.C_sigma * D_K, L.C_sigma0, False),
        Condition("C9", D_K * (L.C_W0 + report.norm_M * L.C_W + L.C_W * D_K), L.C_d0, False),
        Condition("C10", D_K * (L.C_W * L.Cc * nu * delta0 ** (tau - 1) + L.C_R), L.C_E0, False),
    ]
    return ConditionReport(conds, 4 * L.C_d0 / nu * delta0 ** -tau * eps0, 4 * L.C_sigma0 * eps0)


def agreement_percent(eps_kam, ctx):
    return 100 * ctx.real(eps_kam) / ctx.real(EPS_CRITICAL)


@dataclass
class CertifyConfig:
    rho0: object = "3e-5"
    delta_frac: object = "0.25"
    zeta: object = None           # default: rho0


@dataclass
class Certificate:
    report: NormReport
    bounds: DerivativeBounds
    ledger: ConstantLedger
    conditions: ConditionReport

    @property
    def overall(self):
        return self.conditions.overall


def certify(K, mu, p, rho0, delta0=None, zeta=None, nu=None, tau=None):
    """Norm report, ledger and condition check for one solution."""
    ctx = K.ctx
    rho0 = ctx.real(rho0)
    delta0 = ctx.real(delta0) if delta0 is not None else rho0 / 4
    zeta = ctx.real(zeta) if zeta is not None else rho0
    if nu is None or tau is None:
        nu, tau = golden_diophantine(ctx)
    report, bounds = compute_norm_report(K, mu, p, rho0, delta0)
    ledger = compute_constants(report, bounds, nu, tau, rho0, delta0, p.lam, report.norm_E0)
    conds = check_conditions(ledger, report.norm_E0, zeta, nu, tau, rho0, delta0, report, bounds)
    return Certificate(report, bounds, ledger, conds)


@dataclass
class KamResult:
    eps_kam: object
    mu: object
    solution: tuple
    certificate: Certificate
    state: object

    def agreement(self):
        return agreement_percent(self.eps_kam, self.solution[0].ctx)


def find_eps_kam(config, rho0="3e-5", delta_frac="0.25", zeta=None, eps_max=None):
    """Largest eps on the continuation branch whose solution is certified.

    The continuation advances while Newton converges and the certificate
    passes; a failure halves the step, so the final bracket between the last
    pass and the first fail is narrower than the step floor.
    """
    ctx = make_context(config.digits)
    rho0 = ctx.real(rho0)
    delta0 = rho0 * ctx.real(delta_frac)
    zeta = ctx.real(zeta) if zeta is not None else rho0
    nu, tau = golden_diophantine(ctx)
    last = {}

    def accept(K, mu, p):
        try:
            cert = certify(K, mu, p, rho0, delta0, zeta, nu, tau)
        except (CertificationError, ArithmeticError) as exc:
            log.info("certification error at eps=%s: %s", ctx.mp.nstr(p.eps, 10), exc)
            return False
        if cert.overall:
            last["cert"] = cert
        else:
            log.info("eps=%s not certified: %s", ctx.mp.nstr(p.eps, 10), ",".join(cert.conditions.failed()))
        return cert.overall

    target = eps_max if eps_max is not None else "1"
    cfg = ContinuationConfig(**{**config.__dict__, "eps_target": target})
    state = continuation(cfg, accept=accept)
    if "cert" not in last or state.eps_current == 0:
        raise CertificationError("no certified eps > 0 (check the configuration)")
    K, mu = state.solution
    return KamResult(state.eps_current, mu, (K, mu), last["cert"], state)
