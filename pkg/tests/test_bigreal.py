import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsmkam import bigreal as br
from dsmkam.bigreal import (DomainError, PrecisionTooLow, cos_sin_turns, elementary, format_real,
                            golden_diophantine, golden_mean, make_context, parse)


def test_context_is_shared_and_sized():
    a = make_context(60)
    assert make_context(60) is a
    assert a.prec >= math.ceil(60 * math.log2(10))
    b = make_context(80)
    assert b.mp.prec > a.mp.prec
    # separate contexts do not disturb each other
    assert a.mp.prec == a.prec


@pytest.mark.parametrize("d", [10, 49, 0])
def test_low_precision_rejected(d):
    with pytest.raises(PrecisionTooLow):
        make_context(d)


def test_golden_mean_identities(ctx):
    w = golden_mean(ctx)
    assert abs(w * w + w - 1) < ctx.eps
    nu, tau = golden_diophantine(ctx)
    assert tau == 1
    assert abs(nu - (1 - w)) < ctx.eps  # 2/(3 + sqrt 5) = 1 - w = w^2
    assert abs(nu - w * w) < ctx.eps


@pytest.mark.parametrize("kind,x,expect", [
    ("sin", "0.5", mpmath.sin), ("cos", "0.5", mpmath.cos), ("exp", "-3", mpmath.exp),
    ("sqrt", "2", mpmath.sqrt), ("log", "10", mpmath.log), ("gamma", "3.5", mpmath.gamma),
])
def test_elementary_against_mpmath(ctx, kind, x, expect):
    with mpmath.workdps(80):
        ref = expect(mpmath.mpf(x))
        got = elementary(x, kind, ctx)
        assert abs(got - ref) <= abs(ref) * mpmath.mpf(10) ** -58


@pytest.mark.parametrize("kind,x", [("sqrt", "-1"), ("log", "0"), ("log", "-2"), ("gamma", "-3")])
def test_elementary_domain_errors(ctx, kind, x):
    with pytest.raises(DomainError):
        elementary(x, kind, ctx)


def test_format_has_exact_digit_count(ctx):
    s = format_real(golden_mean(ctx), ctx)
    mant = s.split("e")[0].replace(".", "").lstrip("-")
    assert len(mant) == 60
    assert format_real(0, ctx).startswith("0.000")


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=-1e30, max_value=1e30, allow_nan=False).filter(lambda v: v != 0))
def test_format_parse_round_trip(v):
    ctx = make_context(60)
    x = ctx.real(v) / 7
    y = parse(format_real(x, ctx), ctx)
    assert abs(x - y) <= abs(x) * ctx.mp.mpf(10) ** -59


@pytest.mark.parametrize("bad", ["", "1.2.3", "abc", "1e", "--1", "0x10"])
def test_parse_rejects_garbage(ctx, bad):
    with pytest.raises(ValueError):
        parse(bad, ctx)


def test_fixed_point_round_trip(ctx):
    x = ctx.real("-1.234567890123456789e-20")
    assert abs(ctx.from_fixed(ctx.to_fixed(x)) - x) <= ctx.mp.ldexp(1, -ctx.prec)


def test_cos_sin_turns_matches_mpmath(ctx):
    rng = np.random.default_rng(3)
    turns = [ctx.real(int(n)) / 10 ** 6 for n in rng.integers(-5 * 10 ** 6, 5 * 10 ** 6, 40)]
    a = np.array([ctx.to_fixed(t) for t in turns], dtype=object)
    c, s = cos_sin_turns(a, ctx.prec)
    mp = ctx.mp
    for t, cj, sj in zip(turns, c, s):
        ang = 2 * mp.pi * ctx.from_fixed(ctx.to_fixed(t))
        assert abs(ctx.from_fixed(cj) - mp.cos(ang)) < mp.mpf(10) ** -62
        assert abs(ctx.from_fixed(sj) - mp.sin(ang)) < mp.mpf(10) ** -62


def test_fixed_sqrt_and_modulus(ctx):
    b = ctx.prec
    a = br.fixed_array([2, 9, "0.25"], ctx)
    r = br.to_reals(br.fsqrt(a, b), ctx)
    assert abs(r[0] - ctx.mp.sqrt(2)) < ctx.eps
    assert abs(r[1] - 3) < ctx.eps
    m = br.fabs_complex(br.fixed_array([3], ctx), br.fixed_array([-4], ctx), b)
    assert abs(ctx.from_fixed(m[0]) - 5) < ctx.eps
    with pytest.raises(DomainError):
        br.fsqrt(br.fixed_array([-1], ctx), b)
