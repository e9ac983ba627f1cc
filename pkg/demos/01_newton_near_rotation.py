"""Newton's method for the invariant attractor, starting from the rigid rotation.

At eps = 0 the circle I = omega is invariant with drift mu = (1 - lambda) omega.
We switch on eps = 0.3 and watch the quasi-Newton iteration correct the
embedding; the residual roughly squares at every step until it reaches the
truncation floor set by the number of Fourier modes.
"""

from dsmkam import MapParams, golden_mean, make_context, newton_solve, trivial_embedding
from dsmkam.solver import convergence_order, full_residual

ctx = make_context(60)                 # 60 decimal digits, fixed-point FFTs underneath
omega = golden_mean(ctx)
lam = ctx.real("0.9")

K = trivial_embedding(omega, 256, ctx)  # u = 0, v = omega
mu = (1 - lam) * omega
print("residual of the rotation at eps = 0:",
      ctx.mp.nstr(full_residual(K, MapParams(ctx.real(0), lam, mu)), 3))

p = MapParams(ctx.real("0.3"), lam, mu)
print("same torus at eps = 0.3:           ", ctx.mp.nstr(full_residual(K, p), 3))

run = newton_solve(K, mu, p, tol="1e-46")
for i, r in enumerate(run.history):
    print(f"  iteration {i}: residual {ctx.mp.nstr(r, 3)}")
print("fitted order over the last three residuals:", ctx.mp.nstr(convergence_order(run.history), 3))
print("drift parameter mu =", ctx.mp.nstr(run.mu, 20))

# the corrected torus: the first few Fourier coefficients of u
for k in range(1, 5):
    print(f"  u_{k} = {ctx.mp.nstr(run.K.u.coeff(k), 12)}")
