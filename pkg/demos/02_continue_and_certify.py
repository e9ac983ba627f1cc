"""Follow the attractor in eps and certify it with the a-posteriori KAM conditions.

The continuation advances eps while Newton converges, halving the step on
failure.  At the end we measure the strip norms of the solution, feed them
through the constant ledger and print each smallness condition with its margin.
"""

from dsmkam import ContinuationConfig, MapParams, certify, continuation

config = ContinuationConfig(n_modes=512, digits=60, eps_target="0.5")
state = continuation(config)
K, mu = state.solution
ctx = K.ctx
print(f"reached eps = {ctx.mp.nstr(state.eps_current, 10)} after "
      f"{len(state.history)} accepted steps ({state.message})")

for eps, m, res, its in state.history:
    print(f"  eps {ctx.mp.nstr(eps, 6):>8}  mu {ctx.mp.nstr(m, 12)}  residual {ctx.mp.nstr(res, 3)}  its {its}")

p = MapParams(state.eps_current, ctx.real(config.lam), mu)
cert = certify(K, mu, p, rho0="3e-5")

print("\nstrip norms at rho0 = 3e-5")
for name, value in cert.report.as_dict().items():
    print(f"  {name:<11} {ctx.mp.nstr(value, 12)}")

print("\nconditions (rhs / lhs is the safety margin)")
for c in cert.conditions.conditions:
    print(f"  {c.name:<7} {'pass' if c.passed else 'FAIL'}  margin {ctx.mp.nstr(c.margin, 4)}")
print("overall:", "pass" if cert.overall else "FAIL")
print("|K_e - K0| <=", ctx.mp.nstr(cert.conditions.bound_K, 4),
      "  |mu_e - mu0| <=", ctx.mp.nstr(cert.conditions.bound_mu, 4))
