import time

import numpy as np

from paracap import analysis, geometry, solver
from paracap.analysis import (exp_super_lateral, exp_super_time, power_super,
                              slab_ode, subcritical_sub, residual,
                              derivative_consistency, keller_osserman_check,
                              verify_barrier)
from paracap.solver import exponential_law, power_law

rng = np.random.default_rng(7)

t0 = time.time()
V = power_super(1.0, 3.0, 2)
print("powerSuper_V C =", V.C, "notes:", V.notes, f"({time.time()-t0:.2f}s)")

x, t = analysis._sample_valid(V, 10000, rng)
r = residual(V, V.law(), (x, t))
print("powerSuper residual min/max:", r["min"], r["max"])

U = subcritical_sub(1.5, 2)
print("subcritical sharp C =", U.C, "(beta - N/2)^(1/(q-1)) =",
      (1.0 / 0.5 - 1.0) ** 2)
x, t = analysis._sample_valid(U, 10000, rng)
r = residual(U, U.law(), (x, t))
print("subcritical sharp residual min/max:", r["min"], r["max"])
Ud = subcritical_sub(1.5, 2, C=(2.0 / 0.5 - 1.0) ** (1.0 / 0.5))
r0 = residual(Ud, Ud.law(), (np.zeros((1, 2)), np.array([0.5])))
print("display-constant residual at x=0:", r0["min"], "(positive -> fails)")

V1 = exp_super_time(1.0)
x, t = analysis._sample_valid(V1, 10000, rng)
# V1 is 1-d by construction; rebuild with N=2 for the sum test
V1b = analysis.Barrier("expSuper_V1", N=2, rho=1.0)
V2 = exp_super_lateral(1.0, 2)
print("expSuper_V2 C =", V2.C, "analytic log(rho^2+4N) =", np.log(1.0 + 8.0))
S = V1b + V2
x, t = analysis._sample_valid(S, 10000, rng)
r = residual(S, exponential_law(), (x, t))
print("V1+V2 residual min/max:", r["min"], r["max"])
r2 = residual(V2, exponential_law(), (x, t))
print("V2 alone residual min/max:", r2["min"], r2["max"])

W = slab_ode(1.0, 3.0)
x, t = analysis._sample_valid(W, 10000, rng)
r = residual(W, W.law(), (x, t))
print("slabODE residual min/max:", r["min"], r["max"])

# derivative consistency
for b, n in [(V, "powerSuper"), (U, "subcritical"), (V1b, "expV1"),
             (V2, "expV2"), (W, "slab")]:
    x, t = analysis._sample_valid(b, 1000, rng)
    errs = derivative_consistency(b, x, t)
    print(f"FD {n}: time={errs['time']:.2e} grad={errs['gradient']:.2e} "
          f"lap={errs['laplacian']:.2e}")

# keller-osserman
print("KO power q=3:", {k: keller_osserman_check(power_law(3.0), 1.0)[k]
                        for k in ("i", "ii", "value_i", "value_ii")})
print("KO power q=1:", {k: keller_osserman_check(("power", 1.0), 1.0)[k]
                        for k in ("i", "ii")})
print("KO exp:", {k: keller_osserman_check(exponential_law(), 1.0)[k]
                  for k in ("i", "ii", "value_i", "value_ii")})
print("KO hj b=2 q=3:", {k: keller_osserman_check(
    solver.hamilton_jacobi_law(1.0, 1.5, 2.0, 3.0), 1.0)[k]
    for k in ("i", "ii")})

# verify_barrier smoke
vb = verify_barrier("expSuper_V1+expSuper_V2", samples=2000, seed=1)
print("verify_barrier:", vb)
print("total", f"{time.time()-t0:.1f}s")
