import time

import numpy as np

from paracap import analysis, geometry, potentials, solver

T0 = time.time()

# unit cylinder in N=2: ball radius 1, time (-1, 0)
dom = geometry.ball_cylinder((0.0, 0.0), 1.0, -1.0, 0.0)
bbox = ((-1.0, -1.0), (1.0, 1.0), -1.0, 0.0)

print("== hj_transform on a power-law chain (q1=3, q=2, p=4/3) ==")
law_v = solver.power_law(3.0)
t0 = time.time()
v = solver.maximal_solution(dom, law_v, k=3, m_ladder=(4.0, 16.0), nsub=2, bbox=bbox)
print(f"maximal_solution k=3: {time.time() - t0:.1f}s  rungs={len(v.rungs)} slabs={len(v.final)}")

law_hj = solver.hamilton_jacobi_law(a=1.0, p=4.0 / 3.0, b=1.0, q=2.0)
t0 = time.time()
res = analysis.hj_transform(v, law_hj, R=1.0, q1=3.0)
print(f"hj_transform: {time.time() - t0:.1f}s")
print(f"  alpha={res.alpha}  lam={res.lam:.6g}  c2={res.c2:.6g}  c3={res.c3:.6g}  active={res.active}")
print(f"  residual range: [{res.residual_min:.4g}, {res.residual_max:.4g}]")
print(f"  notes: e1={res.notes['e1']} e2={res.notes['e2']} beta={res.notes['beta']}")
print(f"  min_ratio_gradient={res.notes['min_ratio_gradient']:.6g} min_ratio_zero_order={res.notes['min_ratio_zero_order']:.6g}")

# scale consistency of the pure-lambda formula: doubling R
lam1, act1 = analysis.hj_lambda(res.c2, res.c3, 1.0, 1.0, 4.0 / 3.0, 2.0, 3.0, 1.0)
lam2, act2 = analysis.hj_lambda(res.c2, res.c3, 1.0, 1.0, 4.0 / 3.0, 2.0, 3.0, 2.0)
e1, e2 = analysis.hj_exponents(3.0, 2.0, 4.0 / 3.0, res.alpha)
print(f"  hj_lambda R=1 -> {lam1:.6g} ({act1}); R=2 -> {lam2:.6g} ({act2}); e1={e1} e2={e2}")

print()
print("== criterion-8 device: hj_solve with matched ladder vs lam*v^2 ==")
beta = res.notes["beta"]
m_hj = tuple(res.lam * m ** beta for m in (4.0, 16.0))
t0 = time.time()
u_hj = solver.hj_solve(dom, a=1.0, p=4.0 / 3.0, b=1.0, q=2.0, k=3,
                       m_ladder=m_hj, nsub=2, bbox=bbox)
print(f"hj_solve matched ladder {m_hj}: {time.time() - t0:.1f}s")
Vs = res.V if isinstance(res.V, list) else [res.V]
worst = np.inf
for gu, gv in zip(u_hj.final, Vs):
    mask = np.isfinite(gv.values) & np.isfinite(gu.values)
    if mask.any():
        worst = min(worst, float(np.min(gu.values[mask] - gv.values[mask])))
print(f"min(u_hj - lam*v^beta) over final rung: {worst:.4g}  (need >= -1e-6)")

print()
print("== lower_bound_functionals ==")
pp = potentials.PotentialParams.calibrated(2, 1.0)
law_q2 = solver.power_law(2.0)
mu0 = potentials.DiscreteMeasure.empty(2)
r0 = analysis.lower_bound_functionals(mu0, ((0.0, 0.0), 0.0), 0.25, 1.0, law_q2, params=pp)
print(f"empty measure: value={r0.value}  dyadic={r0.dyadic_term}  corr={r0.correction_term}  qerr={r0.quadrature_error}")

# far atom: outside every window of the point
mu_far = potentials.DiscreteMeasure(np.array([[0.9, 0.0]]), np.array([-0.9]), np.array([1.0]))
r_far = analysis.lower_bound_functionals(mu_far, ((0.0, 0.0), 0.0), 0.05, 1.0, law_q2, params=pp)
print(f"far atom: value={r_far.value:.6g} dyadic={r_far.dyadic_term:.6g} corr={r_far.correction_term:.6g}")

# nearby atom at mid-window depth: dyadic term engages, and the floor
# stays below the measure-data solution
depth = (72.0 / 256.0) * 0.25 ** 2
mu_near = potentials.DiscreteMeasure(np.array([[0.0, 0.0]]), np.array([-depth]), np.array([0.5]))
r_near = analysis.lower_bound_functionals(mu_near, ((0.0, 0.0), 0.0), 0.25, 1.0, law_q2, params=pp)
print(f"near atom: value={r_near.value:.6g} dyadic={r_near.dyadic_term:.6g} corr={r_near.correction_term:.6g} qerr={r_near.quadrature_error:.3g}")
t0 = time.time()
umd = solver.measure_data_solve(mu_near, law_q2, R=1.0, h=0.125, sigma=0.25)
u_probe = float(umd.interp(np.array([[0.0, 0.0]]), np.array([0.0]))[0])
print(f"measure_data_solve: {time.time() - t0:.1f}s  u(probe)={u_probe:.6g}  (need est <= this)")
print(f"  floor_check={umd.meta['floor_check']}")

print()
print("== large_solution_certificate: cylinder lateral point ==")
from paracap import capacity
prm = capacity.ProblemParams(N=2, q=2.0)
t0 = time.time()
cert = analysis.large_solution_certificate(dom, prm, [((1.0, 0.0), -0.5)], k=4)
print(f"certificate: {time.time() - t0:.1f}s")
row = cert.rows[0]
print(f"  window_scales={row['window_scales']}")
print(f"  window_values={[f'{v:.4g}' for v in row['window_values']]}")
print(f"  natoms={row['window_natoms']}  measure_natoms={row['measure_natoms']}")
print(f"  eps={row['eps']:.4g}")
print(f"  probes={row['probes']}")
print(f"  floors={[f'{v:.4g}' for v in row['floors']]}")
print(f"  flags={row['flags']}")
print(f"  notes={cert.notes}")

print()
print(f"total {time.time() - T0:.1f}s")
