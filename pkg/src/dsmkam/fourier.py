"""Periodic functions on the circle as truncated Fourier series.

A :class:`PeriodicFunction` with ``N`` modes stores the coefficients
``c_k`` of ``sum_k c_k exp(2 pi i k theta)`` for ``k`` in ``[-N/2, N/2)`` in
FFT order (``0, 1, ..., N/2-1, -N/2, ..., -1``) as two fixed-point integer
arrays.  Grid samples live at ``theta_j = j/N``.

The transforms are an iterative radix-2 Cooley-Tukey FFT over those integer
arrays; every butterfly stage is vectorized over numpy object arrays.
"""

import warnings
from functools import lru_cache

import numpy as np

from .bigreal import cos_sin_turns, fabs_complex

DEFAULT_TAIL_FRACTION = 1e-20


class UnderResolvedWarning(RuntimeWarning):
    """The highest decade of modes carries too much of an analytic norm."""


def _check_size(n):
    if n < 1 or n & (n - 1):
        raise ValueError(f"length {n} is not a power of two")


@lru_cache(maxsize=None)
def mode_indices(n):
    """Integer mode numbers in FFT storage order."""
    _check_size(n)
    k = np.arange(n)
    k[n // 2:] -= n
    k.flags.writeable = False
    return k


@lru_cache(maxsize=None)
def _bit_reverse(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=None)
def _twiddles(n, bits):
    """cos and -sin of 2 pi j/n for j < n/2 (forward-transform roots)."""
    h = max(n // 2, 1)
    turns = np.array([(j << bits) // n for j in range(h)], dtype=object)
    c, s = cos_sin_turns(turns, bits)
    return c, -s


def _fft_core(re, im, bits, inverse):
    """Unnormalized in-order DFT of (re, im); sign +1 in the exponent if inverse."""
    n = len(re)
    _check_size(n)
    perm = _bit_reverse(n)
    re = re[perm]
    im = im[perm]
    wr_all, wi_all = _twiddles(n, bits)
    if inverse:
        wi_all = -wi_all
    size = 2
    while size <= n:
        h = size // 2
        r = re.reshape(n // size, size)
        i = im.reshape(n // size, size)
        er, ei = r[:, :h].copy(), i[:, :h].copy()
        orr, oi = r[:, h:], i[:, h:]
        if size == 2:
            tr, ti = orr.copy(), oi.copy()
        else:
            step = n // size
            cr = wr_all[::step][:h]
            ci = wi_all[::step][:h]
            tr = (orr * cr - oi * ci) >> bits
            ti = (orr * ci + oi * cr) >> bits
        r[:, :h] = er + tr
        i[:, :h] = ei + ti
        r[:, h:] = er - tr
        i[:, h:] = ei - ti
        size *= 2
    return re, im


def _forward(re, im, bits):
    n = len(re)
    shift = n.bit_length() - 1
    fr, fi = _fft_core(re, im, bits, inverse=False)
    return fr >> shift, fi >> shift


def _inverse(re, im, bits):
    return _fft_core(re, im, bits, inverse=True)


def _zeros(n):
    return np.zeros(n, dtype=object)


class GridValues:
    """Samples of a periodic function at ``theta_j = j/n``."""

    __slots__ = ("re", "im", "ctx")

    def __init__(self, re, im, ctx):
        _check_size(len(re))
        if len(im) != len(re):
            raise ValueError("real and imaginary parts differ in length")
        self.re = re
        self.im = im
        self.ctx = ctx

    @property
    def n_points(self):
        return len(self.re)

    @classmethod
    def from_values(cls, values, ctx):
        mp = ctx.mp
        vals = [mp.mpc(v) for v in values]
        re = np.array([ctx.to_fixed(v.real) for v in vals], dtype=object)
        im = np.array([ctx.to_fixed(v.imag) for v in vals], dtype=object)
        return cls(re, im, ctx)

    @classmethod
    def from_function(cls, fn, n, ctx):
        """Sample ``fn(theta)`` (theta a BigReal) on the n-point grid."""
        mp = ctx.mp
        return cls.from_values([fn(mp.mpf(j) / n) for j in range(n)], ctx)

    def values(self):
        ctx = self.ctx
        return [ctx.mp.mpc(ctx.from_fixed(a), ctx.from_fixed(b))
                for a, b in zip(self.re, self.im)]


class PeriodicFunction:
    """Truncated Fourier series with fixed-point complex coefficients."""

    __slots__ = ("re", "im", "ctx")

    def __init__(self, re, im, ctx):
        _check_size(len(re))
        if len(im) != len(re):
            raise ValueError("real and imaginary parts differ in length")
        self.re = re
        self.im = im
        self.ctx = ctx

    # construction -----------------------------------------------------

    @classmethod
    def zeros(cls, n, ctx):
        return cls(_zeros(n), _zeros(n), ctx)

    @classmethod
    def constant(cls, c, n, ctx):
        f = cls.zeros(n, ctx)
        c = ctx.mp.mpc(c)
        f.re[0] = ctx.to_fixed(c.real)
        f.im[0] = ctx.to_fixed(c.imag)
        return f

    @classmethod
    def from_coefficients(cls, coeffs, n, ctx):
        """Build from ``{k: c_k}``; missing modes are zero."""
        f = cls.zeros(n, ctx)
        mp = ctx.mp
        for k, c in coeffs.items():
            if not -n // 2 <= k < n // 2:
                raise ValueError(f"mode {k} outside [-{n // 2}, {n // 2})")
            c = mp.mpc(c)
            f.re[k % n] = ctx.to_fixed(c.real)
            f.im[k % n] = ctx.to_fixed(c.imag)
        return f

    @classmethod
    def from_function(cls, fn, n, ctx):
        return fft_forward(GridValues.from_function(fn, n, ctx))

    # access -----------------------------------------------------------

    @property
    def n_modes(self):
        return len(self.re)

    def coeff(self, k):
        n = self.n_modes
        if not -n // 2 <= k < n // 2:
            return self.ctx.mp.mpc(0)
        ctx = self.ctx
        return ctx.mp.mpc(ctx.from_fixed(self.re[k % n]), ctx.from_fixed(self.im[k % n]))

    def coefficients(self):
        """All coefficients ordered by k = -N/2, ..., N/2 - 1."""
        n = self.n_modes
        return [self.coeff(k) for k in range(-n // 2, n // 2)]

    def is_real(self, ulps=16):
        """True if c_{-k} = conj(c_k) up to ``ulps`` fixed-point units."""
        n = self.n_modes
        rev = (-mode_indices(n)) % n
        dr = self.re - self.re[rev]
        di = self.im + self.im[rev]
        dr[n // 2] = 0
        di[n // 2] = 0
        return np.abs(dr).max() <= ulps and np.abs(di).max() <= ulps

    def copy(self):
        return PeriodicFunction(self.re.copy(), self.im.copy(), self.ctx)

    # linear algebra ----------------------------------------------------

    def _check(self, other):
        if self.n_modes != other.n_modes:
            raise ValueError(f"mode counts differ: {self.n_modes} vs {other.n_modes}")
        if self.ctx is not other.ctx:
            raise ValueError("functions belong to different precision contexts")

    def __add__(self, other):
        if isinstance(other, PeriodicFunction):
            self._check(other)
            return PeriodicFunction(self.re + other.re, self.im + other.im, self.ctx)
        out = self.copy()
        c = self.ctx.mp.mpc(other)
        out.re[0] += self.ctx.to_fixed(c.real)
        out.im[0] += self.ctx.to_fixed(c.imag)
        return out

    __radd__ = __add__

    def __neg__(self):
        return PeriodicFunction(-self.re, -self.im, self.ctx)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if isinstance(scalar, PeriodicFunction):
            return multiply(self, scalar)
        ctx = self.ctx
        c = ctx.mp.mpc(scalar)
        cr, ci = ctx.to_fixed(c.real), ctx.to_fixed(c.imag)
        b = ctx.prec
        if ci == 0:
            return PeriodicFunction((self.re * cr) >> b, (self.im * cr) >> b, ctx)
        return PeriodicFunction((self.re * cr - self.im * ci) >> b,
                                (self.re * ci + self.im * cr) >> b, ctx)

    __rmul__ = __mul__

    def __repr__(self):
        return f"PeriodicFunction(n_modes={self.n_modes}, digits={self.ctx.decimal_digits})"


# transforms -------------------------------------------------------------


def fft_forward(g):
    """Coefficients c_k = (1/N) sum_j g_j exp(-2 pi i k j/N)."""
    re, im = _forward(g.re, g.im, g.ctx.prec)
    return PeriodicFunction(re, im, g.ctx)


def fft_inverse(f):
    """Samples sum_k c_k exp(2 pi i k j/N) at the N grid points."""
    re, im = _inverse(f.re, f.im, f.ctx.prec)
    return GridValues(re, im, f.ctx)


def pad(f, n):
    """Same function represented on ``n >= f.n_modes`` modes (Nyquist split evenly)."""
    m = f.n_modes
    if n < m:
        raise ValueError("pad target smaller than the function")
    if n == m:
        return f.copy()
    re, im = _zeros(n), _zeros(n)
    h = m // 2
    re[:h] = f.re[:h]
    im[:h] = f.im[:h]
    re[n - h + 1:] = f.re[h + 1:]
    im[n - h + 1:] = f.im[h + 1:]
    if m > 1:
        nr, ni = f.re[h], f.im[h]
        re[h], im[h] = nr >> 1, ni >> 1
        re[n - h], im[n - h] = nr - (nr >> 1), ni - (ni >> 1)
    return PeriodicFunction(re, im, f.ctx)


def truncate(f, n):
    """Keep the modes |k| < n/2; the Nyquist slot of the result is zero."""
    m = f.n_modes
    if n > m:
        raise ValueError("truncation target larger than the function")
    if n == m:
        out = f.copy()
        out.re[n // 2] = 0
        out.im[n // 2] = 0
        return out
    h = n // 2
    re, im = _zeros(n), _zeros(n)
    re[:h] = f.re[:h]
    im[:h] = f.im[:h]
    re[h + 1:] = f.re[m - h + 1:]
    im[h + 1:] = f.im[m - h + 1:]
    return PeriodicFunction(re, im, f.ctx)


def real_grids(fs, size=None):
    """Grid samples (real fixed-point arrays) of real functions, two per FFT.

    All functions are padded to ``size`` points (default: their own length).
    """
    if not fs:
        return []
    ctx = fs[0].ctx
    size = size or max(f.n_modes for f in fs)
    out = []
    for a in range(0, len(fs), 2):
        f = pad(fs[a], size)
        if a + 1 < len(fs):
            g = pad(fs[a + 1], size)
            # coefficients of f + i g
            re, im = _inverse(f.re - g.im, f.im + g.re, ctx.prec)
            out.extend([re, im])
        else:
            re, _ = _inverse(f.re, f.im, ctx.prec)
            out.append(re)
    return out


def real_spectra(arrays, ctx):
    """Inverse of :func:`real_grids`: Fourier coefficients of real samples."""
    out = []
    for a in range(0, len(arrays), 2):
        x = arrays[a]
        n = len(x)
        if a + 1 < len(arrays):
            y = arrays[a + 1]
            zr, zi = _forward(x, y, ctx.prec)
            rev = (-mode_indices(n)) % n
            zr_m, zi_m = zr[rev], zi[rev]
            out.append(PeriodicFunction((zr + zr_m) >> 1, (zi - zi_m) >> 1, ctx))
            out.append(PeriodicFunction((zi + zi_m) >> 1, (zr_m - zr) >> 1, ctx))
        else:
            re, im = _forward(x, _zeros(n), ctx.prec)
            out.append(PeriodicFunction(re, im, ctx))
    return out


# calculus and shifts ----------------------------------------------------


@lru_cache(maxsize=256)
def _two_pi_k(n, bits):
    from mpmath.libmp import libelefun
    two_pi = libelefun.pi_fixed(bits) << 1
    return np.array([int(k) * two_pi for k in mode_indices(n)], dtype=object)


def derivative(f, order=1):
    """Spectral derivative: coefficients times (2 pi i k)^order; Nyquist zeroed."""
    n, b = f.n_modes, f.ctx.prec
    m = _two_pi_k(n, b)
    re, im = f.re, f.im
    for _ in range(order):
        re, im = (-(im * m)) >> b, (re * m) >> b
    re, im = re.copy(), im.copy()
    re[n // 2] = 0
    im[n // 2] = 0
    return PeriodicFunction(re, im, f.ctx)


def antiderivative(f):
    """Zero-average primitive of the zero-average part of f."""
    n, b = f.n_modes, f.ctx.prec
    m = _two_pi_k(n, b).copy()
    m[0] = 1
    # (a + ib)/(2 pi i k) = (b - i a)/(2 pi k)
    re = (f.im << b) // m
    im = -((f.re << b) // m)
    re[0] = im[0] = 0
    re[n // 2] = im[n // 2] = 0
    return PeriodicFunction(re, im, f.ctx)


_phase_cache = {}


def phases(n, omega, ctx, sign=1):
    """Fixed-point arrays (cos, sin) of 2 pi k omega * sign for each mode k."""
    w = ctx.to_fixed(omega)
    key = (n, w, ctx.prec, sign)
    hit = _phase_cache.get(key)
    if hit is None:
        turns = np.array([int(k) * w * sign for k in mode_indices(n)], dtype=object)
        hit = cos_sin_turns(turns, ctx.prec)
        if len(_phase_cache) > 64:
            _phase_cache.clear()
        _phase_cache[key] = hit
    return hit


def shift(f, omega):
    """(f o T_omega)(theta) = f(theta + omega): coefficients times exp(2 pi i k omega)."""
    c, s = phases(f.n_modes, omega, f.ctx)
    b = f.ctx.prec
    return PeriodicFunction((f.re * c - f.im * s) >> b, (f.re * s + f.im * c) >> b, f.ctx)


def average(f):
    return f.ctx.from_fixed(f.re[0]) if f.im[0] == 0 else f.coeff(0)


def zero_average(f):
    out = f.copy()
    out.re[0] = 0
    out.im[0] = 0
    return out


def multiply(f, g):
    """Product on a 2N zero-padded grid, truncated back to N modes."""
    f._check(g)
    n = f.n_modes
    ctx, b = f.ctx, f.ctx.prec
    if f.is_real() and g.is_real():
        x, y = real_grids([f, g], 2 * n)
        (h,) = real_spectra([(x * y) >> b], ctx)
        return truncate(h, n)
    fp, gp = pad(f, 2 * n), pad(g, 2 * n)
    fr, fi = _inverse(fp.re, fp.im, b)
    gr, gi = _inverse(gp.re, gp.im, b)
    pr = (fr * gr - fi * gi) >> b
    pi = (fr * gi + fi * gr) >> b
    re, im = _forward(pr, pi, b)
    return truncate(PeriodicFunction(re, im, ctx), n)


# norms ------------------------------------------------------------------


_weight_cache = {}


def _weights(n, rho, ctx):
    """Fixed-point exp(2 pi rho |k|) in FFT order."""
    r = ctx.to_fixed(rho)
    key = (n, r, ctx.prec)
    hit = _weight_cache.get(key)
    if hit is None:
        mp, b = ctx.mp, ctx.prec
        base = ctx.to_fixed(mp.exp(2 * mp.pi * ctx.from_fixed(r)))
        # refresh from an exact power every 256 steps to bound drift
        h = n // 2 + 1
        pw = [0] * h
        for k in range(h):
            if k % 256 == 0:
                pw[k] = ctx.to_fixed(mp.exp(2 * mp.pi * ctx.from_fixed(r) * k))
            else:
                pw[k] = (pw[k - 1] * base) >> b
        hit = np.array([pw[abs(int(k))] for k in mode_indices(n)], dtype=object)
        if len(_weight_cache) > 64:
            _weight_cache.clear()
        _weight_cache[key] = hit
    return hit


def _norm_fixed(f, rho):
    """(total, tail) of sum |c_k| exp(2 pi rho |k|) in fixed point."""
    n, b = f.n_modes, f.ctx.prec
    terms = (fabs_complex(f.re, f.im, b) * _weights(n, rho, f.ctx)) >> b
    total = int(terms.sum())
    cut = int(np.ceil(0.9 * (n // 2)))
    k = np.abs(mode_indices(n))
    tail = int(terms[k >= cut].sum()) if n >= 8 else 0
    return total, tail


def tail_ratio(f, rho):
    """Share of the analytic norm carried by the top decade of |k|."""
    total, tail = _norm_fixed(f, rho)
    if total == 0:
        return f.ctx.mp.mpf(0)
    return f.ctx.mp.mpf(tail) / total


def analytic_norm(f, rho, tail_fraction=DEFAULT_TAIL_FRACTION, warn=True):
    """Weighted l1 bound sum_k |c_k| exp(2 pi rho |k|) of the sup on the strip |Im z| <= rho.

    Vectors (sequences of functions) add the component norms; matrices
    (sequences of rows) add, over rows, the largest entry norm of the row.
    Plain numbers are treated as constants.
    """
    if isinstance(f, (list, tuple)):
        if f and isinstance(f[0], (list, tuple)):
            return sum((max(analytic_norm(e, rho, tail_fraction, warn) for e in row)
                        for row in f), f_ctx(f).mp.mpf(0))
        return sum((analytic_norm(e, rho, tail_fraction, warn) for e in f), f_ctx(f).mp.mpf(0))
    if not isinstance(f, PeriodicFunction):
        raise TypeError(f"cannot take the analytic norm of {type(f).__name__}")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    total, tail = _norm_fixed(f, rho)
    if warn and total and tail > tail_fraction * total:
        warnings.warn(
            f"top decade of modes carries {tail / total:.3g} of the norm "
            f"(threshold {tail_fraction:g}); function may be under-resolved",
            UnderResolvedWarning, stacklevel=2)
    return f.ctx.from_fixed(total)


def f_ctx(obj):
    """Precision context of a function or of the first function in a nested sequence."""
    while isinstance(obj, (list, tuple)):
        for e in obj:
            if isinstance(e, (PeriodicFunction, list, tuple)):
                obj = e
                break
        else:
            raise ValueError("no PeriodicFunction found")
    return obj.ctx
