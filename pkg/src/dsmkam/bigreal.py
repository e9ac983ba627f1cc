"""Extended-precision arithmetic kernel.

Scalars are mpmath numbers created by a private ``MPContext`` owned by a
:class:`PrecisionContext`, so several precisions can live side by side in one
process.  Arrays (grid samples, Fourier coefficients) are stored as numpy
object arrays of Python integers in binary fixed point with ``ctx.prec``
fractional bits; the helpers at the bottom of this module operate on them.
"""

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from mpmath.ctx_mp import MPContext
from mpmath.libmp import libelefun, to_fixed

MIN_DIGITS = 50
GUARD_BITS = 16

_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


class PrecisionTooLow(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PrecisionContext:
    """Working precision, in decimal digits, with its own mpmath context."""

    decimal_digits: int
    prec: int = field(init=False)
    mp: MPContext = field(init=False, repr=False)

    def __post_init__(self):
        if self.decimal_digits < MIN_DIGITS:
            raise PrecisionTooLow(
                f"need at least {MIN_DIGITS} digits, got {self.decimal_digits}")
        prec = math.ceil(self.decimal_digits * math.log2(10)) + GUARD_BITS
        mp = MPContext()
        mp.prec = prec
        object.__setattr__(self, "prec", prec)
        object.__setattr__(self, "mp", mp)

    def real(self, x):
        """Convert ``x`` (str, int, float, mpf) to a BigReal of this context."""
        if isinstance(x, str):
            return parse(x, self)
        return self.mp.mpf(x)

    def complex(self, re, im=0):
        return self.mp.mpc(self.real(re), self.real(im))

    @property
    def eps(self):
        """Unit of relative accuracy promised for scalar arithmetic."""
        return self.mp.mpf(10) ** (2 - self.decimal_digits)

    # fixed-point conversions -------------------------------------------

    def to_fixed(self, x):
        x = self.real(x)
        return to_fixed(x._mpf_, self.prec)

    def from_fixed(self, n):
        return self.mp.ldexp(self.mp.mpf(int(n)), -self.prec)


@lru_cache(maxsize=None)
def make_context(decimal_digits):
    """Return the (shared) context with ``decimal_digits`` digits."""
    if int(decimal_digits) != decimal_digits or decimal_digits < MIN_DIGITS:
        raise PrecisionTooLow(
            f"need an integer number of digits >= {MIN_DIGITS}, got {decimal_digits!r}")
    return PrecisionContext(int(decimal_digits))


def golden_mean(ctx):
    """The golden mean frequency (sqrt(5) - 1)/2."""
    mp = ctx.mp
    return (mp.sqrt(5) - 1) / 2


def golden_diophantine(ctx):
    """Diophantine constants (nu, tau) of the golden mean: nu = 2/(3+sqrt5), tau = 1."""
    mp = ctx.mp
    return 2 / (3 + mp.sqrt(5)), mp.mpf(1)


def elementary(x, kind, ctx):
    """Evaluate one of sin, cos, exp, sqrt, log, gamma at working precision."""
    mp = ctx.mp
    x = ctx.real(x)
    if kind == "sqrt":
        if x < 0:
            raise DomainError(f"sqrt of negative number {mp.nstr(x, 10)}")
        return mp.sqrt(x)
    if kind == "log":
        if x <= 0:
            raise DomainError(f"log of non-positive number {mp.nstr(x, 10)}")
        return mp.log(x)
    if kind == "gamma":
        if x <= 0 and x == mp.floor(x):
            raise DomainError(f"gamma pole at {mp.nstr(x, 10)}")
        return mp.gamma(x)
    if kind in ("sin", "cos", "exp"):
        return getattr(mp, kind)(x)
    raise ValueError(f"unknown elementary function {kind!r}")


def format_real(x, ctx, digits=None):
    """Decimal string with exactly ``digits`` (default: working) significant digits."""
    digits = digits or ctx.decimal_digits
    mp = ctx.mp
    x = ctx.real(x)
    if x == 0:
        return "0." + "0" * (digits - 1) + "e+0"
    s = mp.nstr(x, digits, strip_zeros=False, min_fixed=1, max_fixed=0)
    mant, _, exp = s.partition("e")
    if "." not in mant:
        mant += "."
    # pad in case nstr dropped trailing zeros of the mantissa
    sig = len(mant.replace("-", "").replace(".", "").lstrip("0")) or 1
    if sig < digits:
        mant += "0" * (digits - sig)
    exp = int(exp) if exp else 0
    return f"{mant}e{exp:+d}"


def parse(s, ctx):
    """Parse a decimal string (sign, digits, optional point, optional exponent)."""
    s = s.strip()
    if not _NUMBER_RE.match(s):
        raise ValueError(f"malformed decimal number {s!r}")
    return ctx.mp.mpf(s)


# ---------------------------------------------------------------------------
# fixed-point array kernels
#
# An array ``a`` of Python ints represents the reals a * 2**-bits.  All
# products are truncated toward -inf by the right shift.


def fixed_array(values, ctx):
    return np.array([ctx.to_fixed(v) for v in values], dtype=object)


def to_reals(a, ctx):
    return [ctx.from_fixed(x) for x in a]


def fmul(a, b, bits):
    return (a * b) >> bits


def fdiv(a, b, bits):
    return (a << bits) // b


def fsquare(a, bits):
    return (a * a) >> bits


_isqrt = np.frompyfunc(math.isqrt, 1, 1)


def fsqrt(a, bits):
    if np.any(a < 0):
        raise DomainError("sqrt of negative fixed-point value")
    return _isqrt(a << bits)


def fabs_complex(re, im, bits):
    """Modulus of re + i im, elementwise."""
    return _isqrt(re * re + im * im)


@lru_cache(maxsize=64)
def _pi_fixed(bits):
    return libelefun.pi_fixed(bits)


def cos_sin_turns(a, bits):
    """(cos(2 pi a), sin(2 pi a)) for a fixed-point array ``a`` measured in turns."""
    one = 1 << bits
    mask = one - 1
    work = bits + 8
    two_pi = _pi_fixed(work) << 1
    half_pi = _pi_fixed(work - 1)
    c = np.empty(len(a), dtype=object)
    s = np.empty(len(a), dtype=object)
    cs = libelefun.cos_sin_fixed
    for j, x in enumerate(a):
        # reduce to [0, 1) turn exactly, then to an angle in [0, 2 pi)
        t = ((int(x) & mask) * two_pi) >> bits
        cj, sj = cs(t, work, half_pi)
        c[j] = cj >> 8
        s[j] = sj >> 8
    return c, s


def fixed_cos_sin_scalar(turns, bits):
    """Scalar version of :func:`cos_sin_turns` for a single fixed-point int."""
    c, s = cos_sin_turns(np.array([turns], dtype=object), bits)
    return c[0], s[0]
