"""Feed a fixed set of strip norms through the constant ledger.

The norms below belong to a solution with 2^18 modes close to breakdown
(eps = 0.9714...).  With the invariance error they were reported with
(7.7e-36) the twist constant C_T blows up and conditions C8-C10 fail; the
script bisects on log10(eps0) to find how small the error would have to be
for every condition to hold.
"""

import mpmath

from dsmkam import check_conditions, compute_constants, golden_diophantine, make_context
from dsmkam.certifier import NormReport, bounds_from_norms

ctx = make_context(60)
R = ctx.real
norms = NormReport(
    norm_M=R("44.9270811990274410452148184267"), norm_Minv=R("39.930678840711850152808576113"),
    norm_Df=R("5.07550011737521959347639032433"), norm_D2f=R("12.2074077197778485732557018883"),
    norm_S=R("215.24720762912463716286404004"), norm_N=R("156.534312450915756580422752539"),
    norm_Ninv=R("591.408362768291837018626059244"), norm_DK=R("44.9270811990274410452148184267"),
    norm_D2K=R("221591.876024617607481468301961"), norm_DKinv=R("7032.62976591622436294280767134"),
    twist_T0=R("7.6434265622376167352649577512"), norm_E0=R("7.71650351451832566847490849233e-36"),
    norm_D2E0=R("5.1576300492851806964395530006e-24"),
)
nu, tau = golden_diophantine(ctx)
rho0 = R("3e-5")
delta0 = rho0 / 4
lam = R("0.9")
bounds = bounds_from_norms(norms, R("0.9714217804294"), ctx)


def evaluate(eps0):
    ledger = compute_constants(norms, bounds, nu, tau, rho0, delta0, lam, eps0)
    return ledger, check_conditions(ledger, eps0, rho0, nu, tau, rho0, delta0, norms, bounds)


ledger, conds = evaluate(norms.norm_E0)
print("at eps0 = 7.7e-36:")
for c in conds.conditions:
    print(f"  {c.name:<7} lhs {ctx.mp.nstr(c.lhs, 6):>12}  rhs {ctx.mp.nstr(c.rhs, 6):>12}  "
          f"{'pass' if c.passed else 'FAIL'}")
print("  T0 * C_tau =", ctx.mp.nstr(norms.twist_T0 * ledger.C_tau, 6), "(must stay below 1)")

lo, hi = R(-60), R(-35)          # log10 eps0: lo passes, hi fails
for _ in range(40):
    mid = (lo + hi) / 2
    if evaluate(ctx.mp.power(10, mid))[1].overall:
        lo = mid
    else:
        hi = mid
print("largest passing eps0 ~ 10^%s" % mpmath.nstr(lo, 6))
print("binding condition just above it:", evaluate(ctx.mp.power(10, hi))[1].failed())
