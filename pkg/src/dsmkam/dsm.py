"""The dissipative standard map and torus embeddings.

The map acts on (I, phi) as

    I'   = lambda I + mu + eps/(2 pi) sin(2 pi phi)
    phi' = phi + I'

Embeddings are written in the order (angle, action):
K(theta) = (theta + u(theta), v(theta)), which is also the ordering used for
every matrix built along K (the frame, Df o K, ...).
"""

from dataclasses import dataclass

import numpy as np

from . import fourier as fr
from .bigreal import cos_sin_turns
from .fourier import PeriodicFunction, analytic_norm


@dataclass(frozen=True)
class MapParams:
    eps: object
    lam: object
    mu: object

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("the conformal factor lambda must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")

    @classmethod
    def make(cls, ctx, eps, lam, mu=0):
        return cls(ctx.real(eps), ctx.real(lam), ctx.real(mu))

    @property
    def ctx_mp(self):
        return self.lam.context

    def with_mu(self, mu):
        return MapParams(self.eps, self.lam, mu)

    def with_eps(self, eps):
        return MapParams(eps, self.lam, self.mu)


def apply_map(p, point):
    """Image (I', phi') of (I, phi)."""
    mp = p.ctx_mp
    I, phi = point
    I_new = p.lam * I + p.mu + p.eps / (2 * mp.pi) * mp.sin(2 * mp.pi * phi)
    return I_new, phi + I_new


def jacobian(p, phi):
    """Df at angle phi in (I, phi) coordinates."""
    mp = p.ctx_mp
    ec = p.eps * mp.cos(2 * mp.pi * phi)
    return [[p.lam, ec], [p.lam, 1 + ec]]


def jacobian_embedding_order(p, phi):
    """Df at angle phi in the (phi, I) ordering used along embeddings."""
    mp = p.ctx_mp
    ec = p.eps * mp.cos(2 * mp.pi * phi)
    return [[1 + ec, p.lam], [ec, p.lam]]


@dataclass(frozen=True)
class TorusEmbedding:
    """K(theta) = (theta + u(theta), v(theta)) with rotation frequency omega."""

    u: PeriodicFunction
    omega: object
    v: PeriodicFunction

    @property
    def ctx(self):
        return self.u.ctx

    @property
    def n_modes(self):
        return self.u.n_modes


def embedding_from_u(u, omega):
    """Complete u to an embedding with v = omega + u - u o T_{-omega}."""
    v = u - fr.shift(u, -omega)
    v.re[0] = u.ctx.to_fixed(omega)
    v.im[0] = 0
    return TorusEmbedding(u, omega, v)


def trivial_embedding(omega, n, ctx):
    """The eps = 0 attractor K(theta) = (theta, omega)."""
    return embedding_from_u(PeriodicFunction.zeros(n, ctx), omega)


class Samples:
    """Values along K on a grid of ``size`` points (fixed-point real arrays).

    Attributes: u, v and their shifts u_w = u o T_omega, v_w; derivatives
    du, dv, du_w, dv_w; c, s = cos, sin of 2 pi (theta + u).
    """

    def __init__(self, K, size=None, derivatives=True):
        ctx = K.ctx
        b = ctx.prec
        size = size or 2 * K.n_modes
        self.size = size
        self.ctx = ctx
        u, v, w = K.u, K.v, K.omega
        self.u, self.v, self.u_w, self.v_w = fr.real_grids(
            [u, v, fr.shift(u, w), fr.shift(v, w)], size)
        if derivatives:
            du, dv = fr.derivative(u), fr.derivative(v)
            self.du, self.dv, self.du_w, self.dv_w = fr.real_grids(
                [du, dv, fr.shift(du, w), fr.shift(dv, w)], size)
        theta = np.array([(j << b) // size for j in range(size)], dtype=object)
        self.c, self.s = cos_sin_turns(theta + self.u, b)


def error_grids(p, K, samples):
    """Grid values of both components of f_mu o K - K o T_omega."""
    ctx, b = K.ctx, K.ctx.prec
    mp = ctx.mp
    lam = ctx.to_fixed(p.lam)
    kick = ctx.to_fixed(p.eps / (2 * mp.pi))
    common = ((lam * samples.v + kick * samples.s) >> b) + ctx.to_fixed(p.mu)
    e1 = samples.u + common - ctx.to_fixed(K.omega) - samples.u_w
    e2 = common - samples.v_w
    return e1, e2


def invariance_error(p, K, samples=None):
    """E = f_mu o K - K o T_omega as two functions on the 2N-point grid.

    The angle component carries no degree-one part: theta cancels exactly.
    """
    samples = samples or Samples(K, derivatives=False)
    return fr.real_spectra(list(error_grids(p, K, samples)), K.ctx)


def residual(E, rho=0, warn=False):
    """Analytic norm of a vector error."""
    return analytic_norm(list(E), rho, warn=warn)


@dataclass(frozen=True)
class DerivativeBounds:
    Q0: object
    Q_mu0: object
    Q_zmu0: object
    Q_mumu0: object
    sup_D2f: object
    sup_D3f: object
    sup_DmuDf: object
    sup_DmuD2f: object
    sup_Dmu2f: object
    sup_DDmu2f: object
    sup_Dmu3f: object


def df_along(p, K, samples=None):
    """Df o K (embedding order) as a 2x2 matrix of functions, plus cos/sin spectra."""
    samples = samples or Samples(K, derivatives=False)
    ctx = K.ctx
    cos_f, sin_f = fr.real_spectra([samples.c, samples.s], ctx)
    size = samples.size
    lam = PeriodicFunction.constant(p.lam, size, ctx)
    ec = cos_f * p.eps
    return [[ec + 1, lam], [ec, lam]], cos_f, sin_f


def derivative_bounds(p, K, rho0, samples=None):
    """Strip norms at radius rho0 of the derivatives of f composed with K.

    The only non-vanishing higher derivatives are the phi-phi(-phi) slots
    of the sine kick: d^2 = -2 pi eps sin, d^3 = -(2 pi)^2 eps cos.
    Every derivative involving mu beyond the first is identically zero.
    """
    ctx = K.ctx
    mp = ctx.mp
    Df, cos_f, sin_f = df_along(p, K, samples)
    two_pi = 2 * mp.pi
    Q0 = analytic_norm(Df, rho0, warn=False)
    d2 = analytic_norm(sin_f, rho0, warn=False) * two_pi * p.eps
    d3 = analytic_norm(cos_f, rho0, warn=False) * two_pi ** 2 * p.eps
    zero = mp.mpf(0)
    return DerivativeBounds(Q0=Q0, Q_mu0=mp.mpf(1), Q_zmu0=zero, Q_mumu0=zero,
                            sup_D2f=d2, sup_D3f=d3, sup_DmuDf=zero, sup_DmuD2f=zero,
                            sup_Dmu2f=zero, sup_DDmu2f=zero, sup_Dmu3f=zero)
