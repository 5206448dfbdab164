import numpy as np
from paracap import analysis

rng = np.random.default_rng(0)

def worst(b, kind):
    x, t = analysis._sample_valid(b, 1000, rng)
    Lx, Lt, clip_x, clip_t = analysis._fd_frames(b, x, t)
    v0 = b.value(x, t)
    vref = np.maximum(np.max(np.abs(v0)), 1.0)
    lap_ex = b.laplacian(x, t)
    kl = 10.0 ** -np.arange(0.0, 4.51, 0.5)
    base_l = np.minimum(1e-1 * Lx, clip_x)
    stack = np.empty((kl.size,) + t.shape)
    for i, f in enumerate(kl):
        hl = f * base_l
        acc = np.zeros(t.shape)
        for d in range(b.N):
            e = np.zeros((1, b.N))
            e[0, d] = 1.0
            step = hl[:, None] * e
            acc += (b.value(x + step, t) + b.value(x - step, t) - 2.0 * v0) / hl ** 2
        stack[i] = acc
    gaps = np.abs(np.diff(stack, axis=0))
    best = np.argmin(gaps, axis=0)
    lap_fd = np.take_along_axis(stack, best[None, :], axis=0)[0]
    rel = np.abs(lap_fd - lap_ex) / np.maximum(np.abs(lap_ex), 1e-7 * vref)
    j = int(np.argmax(rel))
    print(f"--- {kind}: worst rel={rel[j]:.3e} at point {j}")
    print(f"  t={t[j]:.6g} |x|={np.linalg.norm(x[j]):.6g} value={v0[j]:.6g} vref={vref:.3g}")
    print(f"  lap_ex={lap_ex[j]:.10g} lap_fd={lap_fd[j]:.10g} best_rung={best[j]} base={base_l[j]:.3g}")
    print(f"  denom={max(abs(lap_ex[j]), 1e-7 * vref):.3g}")
    for i, f in enumerate(kl):
        g = gaps[i - 1, j] if i > 0 else float("nan")
        err = abs(stack[i, j] - lap_ex[j])
        print(f"    rung {i:2d} h={f * base_l[j]:.3e} fd={stack[i, j]:+.10e} abs_err={err:.3e} gap_prev={g:.3e}")

worst(analysis.subcritical_sub(q=1.5, N=2), "subcritical")
worst(analysis.power_super(rho=1.0, q=3.0, N=2), "powerSuper")
worst(analysis.exp_super_lateral(rho=1.0, N=2), "expV2")
