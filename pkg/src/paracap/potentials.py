"""Truncated parabolic Riesz and maximal potentials of discrete measures.

The central objects are, for a nonnegative measure mu on R^{N+1} and a
truncation radius R,

    riesz:    integral over rho in (0, R) of mu(Qtilde_rho(x,t)) rho^-N drho/rho
    maximal:  sup over rho in (0, R) of mu(Qtilde_rho(x,t)) / rho^N

with Qtilde_rho(x,t) = B_rho(x) x (t - rho^2, t + rho^2).  For atomic mu both
are evaluated in closed form: each atom enters every cylinder with radius
above its parabolic distance rho* = max{|x - x_i|, |t - t_i|^{1/2}}, so the
riesz integral is a sum of (rho*^-N - R^-N)/N terms and the maximal sup is
attained at an atom radius.

On top of these the module provides the Gaussian space-time kernel and its
superpositions, a Duhamel convolution on tensor grids, the dyadic-window
lower sum that bounds heat superpositions from below, calibrated comparison
constants for both directions, lower envelopes for solutions of the power
and exponential absorption equations, an exponential-integrability window
statistic, and the space-time Wolff-energy pair used for capacity checks.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _accel
from .gridfn import GridFunction

# dyadic lower-sum window geometry: at scale rho_k = 4^-k rho the window is
# the ball of radius rho_k/8 around x crossed with times t - tau, tau in
# [(35/128) rho_k^2, (37/128) rho_k^2)
WINDOW_R_FRAC = 0.125
WINDOW_T_NEAR = 35.0 / 128.0
WINDOW_T_FAR = 37.0 / 128.0
DYADIC_RATIO = 4.0
DYADIC_K_CAP = 48

# matched lower truncation for the two Wolff energies; both sides of the
# equivalence diverge logarithmically at scale zero for atomic measures
WOLFF_SIGMA = 1.0 / 64.0
WOLFF_GRADE = 0.35
WOLFF_MAX_CELLS = 1_600_000

# exp(705) is near the double ceiling; larger exponents saturate the
# exponential correction term, which only drives the envelope further down
EXPM1_CAP = 705.0


def _points(px, pt, dim):
    """Normalize (px, pt) to ((P, dim), (P,)); report if input was a single point."""
    px = np.asarray(px, float)
    pt = np.atleast_1d(np.asarray(pt, float))
    if px.ndim == 0:
        px = px.reshape(1, 1)
    elif px.ndim == 1:
        if px.shape[0] == dim and pt.shape[0] == 1:
            px = px.reshape(1, -1)
        else:
            px = px.reshape(-1, 1)
    scalar = px.shape[0] == 1 and pt.shape[0] == 1
    if px.shape[0] == 1 and pt.shape[0] > 1:
        px = np.repeat(px, pt.shape[0], axis=0)
    if pt.shape[0] == 1 and px.shape[0] > 1:
        pt = np.full(px.shape[0], pt[0])
    if px.shape != (pt.shape[0], dim):
        raise ValueError(f"points of shape {px.shape} incompatible with dimension {dim}")
    return px, pt, scalar


def _unwrap(out, scalar):
    return float(out[0]) if scalar else out


@dataclass
class DiscreteMeasure:
    """Nonnegative atomic measure: atoms at (x[i], t[i]) with masses m[i]."""

    x: np.ndarray
    t: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, float))
        self.t = np.atleast_1d(np.asarray(self.t, float))
        self.m = np.atleast_1d(np.asarray(self.m, float))
        if self.x.shape[0] != self.t.shape[0] or self.t.shape != self.m.shape:
            raise ValueError("atom arrays disagree in length")
        if self.m.size and np.min(self.m) < 0:
            raise ValueError("negative atom mass")

    @classmethod
    def empty(cls, dim):
        return cls(np.zeros((0, dim)), np.zeros(0), np.zeros(0))

    @classmethod
    def single(cls, x, t, mass=1.0):
        return cls(np.atleast_2d(np.asarray(x, float)), [float(t)], [float(mass)])

    @property
    def dim(self):
        return self.x.shape[1]

    @property
    def natoms(self):
        return self.x.shape[0]

    @property
    def total_mass(self):
        return float(np.sum(self.m))

    def rho_star(self, px, pt):
        """Parabolic distance of each point to each atom, shape (P, natoms)."""
        px, pt, _ = _points(px, pt, self.dim)
        dx = px[:, None, :] - self.x[None, :, :]
        sp = np.sqrt(np.sum(dx * dx, axis=2))
        return np.maximum(sp, np.sqrt(np.abs(pt[:, None] - self.t[None, :])))

    def qtilde_mass(self, x, t, rho):
        """Mass of the open cylinder Qtilde_rho(x, t); rho scalar or array."""
        rs = self.rho_star(x, t)[0] if self.natoms else np.zeros(0)
        rho_arr = np.atleast_1d(np.asarray(rho, float))
        out = (rs[None, :] < rho_arr[:, None]) @ self.m if self.natoms else np.zeros(rho_arr.shape)
        return float(out[0]) if np.ndim(rho) == 0 else out

    def dilate(self, a):
        """Parabolic dilation (x, t) -> (a x, a^2 t) with masses scaled by a^N."""
        a = float(a)
        return DiscreteMeasure(a * self.x, a * a * self.t, a ** self.dim * self.m)

    def translate(self, dx, dt):
        return DiscreteMeasure(self.x + np.asarray(dx, float), self.t + float(dt), self.m.copy())

    def scaled(self, factor):
        return DiscreteMeasure(self.x.copy(), self.t.copy(), float(factor) * self.m)

    def restrict(self, region):
        """Atoms inside an open region (anything with a vectorized .contains)."""
        if not self.natoms:
            return DiscreteMeasure.empty(self.dim)
        keep = np.asarray(region.contains(self.x, self.t), bool)
        return DiscreteMeasure(self.x[keep], self.t[keep], self.m[keep])

    def restrict_qtilde(self, x, t, rho):
        """Atoms inside the open cylinder Qtilde_rho(x, t)."""
        if not self.natoms:
            return DiscreteMeasure.empty(self.dim)
        keep = self.rho_star(x, t)[0] < rho
        return DiscreteMeasure(self.x[keep], self.t[keep], self.m[keep])

    def __add__(self, other):
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return DiscreteMeasure(np.vstack([self.x, other.x]),
                               np.concatenate([self.t, other.t]),
                               np.concatenate([self.m, other.m]))

    def to_records(self):
        return [{"x": list(map(float, xi)), "t": float(ti), "mass": float(mi)}
                for xi, ti, mi in zip(self.x, self.t, self.m)]

    @classmethod
    def from_records(cls, records, dim=None):
        if not records:
            if dim is None:
                raise ValueError("dim required for an empty record list")
            return cls.empty(dim)
        return cls(np.array([r["x"] for r in records], float),
                   np.array([r["t"] for r in records], float),
                   np.array([r["mass"] for r in records], float))


def heat_kernel(x, t, N):
    """Gaussian space-time kernel (4 pi t)^{-N/2} exp(-|x|^2 / 4t), zero for t <= 0."""
    px, pt, scalar = _points(x, t, N)
    r2 = np.sum(px * px, axis=1)
    out = np.zeros(pt.shape[0])
    pos = pt > 0.0
    out[pos] = (4.0 * np.pi * pt[pos]) ** (-N / 2.0) * np.exp(-r2[pos] / (4.0 * pt[pos]))
    return _unwrap(out, scalar)


def heat_potential(measure, px, pt):
    """Superposition sum_i m_i heat_kernel(x - x_i, t - t_i)."""
    px, pt, scalar = _points(px, pt, measure.dim)
    out = _accel.heat_sum(px, pt, measure.x, measure.t, measure.m, measure.dim)
    return _unwrap(out, scalar)


def riesz_potential(measure, px, pt, R):
    """Truncated Riesz parabolic potential of an atomic measure, closed form.

    Atoms at parabolic distance rho* < R contribute m (rho*^-N - R^-N)/N;
    an atom with positive mass sitting exactly at the point gives +inf.
    """
    if R <= 0:
        raise ValueError("truncation radius must be positive")
    px, pt, scalar = _points(px, pt, measure.dim)
    out = _accel.riesz_atoms(px, pt, measure.x, measure.t, measure.m, R, measure.dim)
    return _unwrap(out, scalar)


def maximal_potential(measure, px, pt, R):
    """Truncated fractional maximal parabolic potential, exact for atoms.

    rho -> mu(Qtilde_rho)/rho^N decays like rho^-N between atom radii, so the
    sup over (0, R) is attained at (the limit from above of) an atom radius.
    """
    if R <= 0:
        raise ValueError("truncation radius must be positive")
    px, pt, scalar = _points(px, pt, measure.dim)
    out = _accel.maximal_atoms(px, pt, measure.x, measure.t, measure.m, R)
    return _unwrap(out, scalar)


def riesz_potential_grid(f, px, pt, R, j_max=24):
    """Riesz potential of the density f dx dt, dyadic midpoint quadrature.

    Scales rho_j = R 2^{-j/2}; each shell integral uses the cylinder mass at
    the geometric midpoint scale.  Returns (values, richardson_error): the
    error field compares against the coarser factor-2 scale family.
    """
    px, pt, scalar = _points(px, pt, len(f.axes))
    nodes, ntimes = f.node_points()
    w = f.values.ravel() * f.h ** len(f.axes) * f.ht
    scales = R * 2.0 ** (-0.5 * np.arange(j_max + 1))
    N = len(f.axes)
    vals = np.zeros(px.shape[0])
    coarse = np.zeros(px.shape[0])
    for i in range(px.shape[0]):
        dx = nodes - px[i]
        rs = np.maximum(np.sqrt(np.sum(dx * dx, axis=1)), np.sqrt(np.abs(ntimes - pt[i])))
        masses_mid = np.array([np.sum(w[rs < math.sqrt(scales[j] * scales[j + 1])])
                               for j in range(j_max)])
        seg = (scales[1:] ** (-float(N)) - scales[:-1] ** (-float(N))) / N
        vals[i] = float(masses_mid @ seg)
        mid2 = np.array([np.sum(w[rs < scales[2 * j + 1]]) for j in range(j_max // 2)])
        seg2 = (scales[2::2] ** (-float(N)) - scales[:-2:2] ** (-float(N))) / N
        coarse[i] = float(mid2 @ seg2)
    # midpoint rule is second order in the log-scale step, so the coarse
    # family carries 4x the error and the fine error is a third of the gap
    err = np.abs(vals - coarse) / 3.0
    if scalar:
        return float(vals[0]), float(err[0])
    return vals, err


def dyadic_lower_sum(measure, px, pt, rho, k_max=None, with_k=False):
    """Sum over k of mu(window_k(x, t)) / rho_k^N with rho_k = 4^-k rho.

    window_k is the ball of radius rho_k/8 around x at times t - tau with
    tau in [WINDOW_T_NEAR, WINDOW_T_FAR) rho_k^2; windows are disjoint
    across k, and for atomic mu the sum has finitely many nonzero terms.
    with_k additionally returns the largest contributing k per point
    (-1 when no window holds mass).
    """
    px, pt, scalar = _points(px, pt, measure.dim)
    rho_base = np.broadcast_to(np.asarray(rho, float), pt.shape).astype(float)
    if np.any(rho_base <= 0):
        raise ValueError("base radius must be positive")
    out = np.zeros(pt.shape[0])
    khi = np.full(pt.shape[0], -1)
    if measure.natoms:
        dx = px[:, None, :] - measure.x[None, :, :]
        sp = np.sqrt(np.sum(dx * dx, axis=2))
        dt = pt[:, None] - measure.t[None, :]
        pos = dt[dt > 0]
        if pos.size:
            # beyond k_cut even the deepest window lies above the closest atom
            k_cut = math.log(WINDOW_T_FAR * float(np.max(rho_base)) ** 2 / float(np.min(pos)), 16.0)
            K = min(DYADIC_K_CAP if k_max is None else int(k_max), max(0, int(math.ceil(k_cut))))
            N = measure.dim
            for k in range(K + 1):
                rk = rho_base * DYADIC_RATIO ** (-k)
                hit = ((dt >= WINDOW_T_NEAR * (rk ** 2)[:, None])
                       & (dt < WINDOW_T_FAR * (rk ** 2)[:, None])
                       & (sp < WINDOW_R_FRAC * rk[:, None]))
                term = hit @ measure.m
                out += term * rk ** (-float(N))
                khi[term > 0] = k
    if with_k:
        return (_unwrap(out, scalar), int(khi[0]) if scalar else khi)
    return _unwrap(out, scalar)


def calibrate_C1(N):
    """Upper comparison constant: heat kernel vs truncated Riesz kernel of a Dirac.

    The scale-free maximum of H(z, tau) rho*^N is (4 pi)^{-N/2} at tau = rho*^2,
    z = 0, and (4 pi)^{-N/2} (2N/e)^{N/2} at |z| = rho*, tau = rho*^2/(2N); with
    rho* at most half the truncation radius T the Dirac kernel is at least
    rho*^-N (1 - 2^-N)/N, giving the exact supremum of the ratio below.  The
    domination H <= C1 * (Dirac riesz kernel, truncation T) therefore holds
    up to parabolic distance T/2 and fails beyond; callers size T at twice
    the largest evaluation-to-source distance.
    """
    peak = (4.0 * np.pi) ** (-N / 2.0) * max(1.0, (2.0 * N / np.e) ** (N / 2.0))
    return peak * N / (1.0 - 2.0 ** (-float(N)))


def calibrate_C2(N):
    """Lower comparison constant: heat kernel on the dyadic window.

    Sources in window_k sit at tau <= WINDOW_T_FAR rho_k^2 and |z| < rho_k/8,
    so H >= (4 pi WINDOW_T_FAR)^{-N/2} rho_k^-N exp(-(1/64)/(4 WINDOW_T_NEAR)).
    """
    return (4.0 * np.pi * WINDOW_T_FAR) ** (-N / 2.0) * math.exp(
        -WINDOW_R_FRAC ** 2 / (4.0 * WINDOW_T_NEAR))


@dataclass
class PotentialParams:
    """Truncation radius and the calibrated kernel comparison constants."""

    R: float
    C1: float
    C2: float

    def __post_init__(self):
        if self.R <= 0 or self.C1 <= 0 or self.C2 <= 0:
            raise ValueError("R, C1, C2 must be positive")

    @classmethod
    def calibrated(cls, N, R):
        return cls(R=float(R), C1=calibrate_C1(N), C2=calibrate_C2(N))


def _lattice(px, pt, margin_x, margin_t, n_lat, n_lat_t):
    """Midpoint lattice covering the point cloud inflated by the margins."""
    lo = np.min(px, axis=0) - margin_x
    hi = np.max(px, axis=0) + margin_x
    tlo = np.min(pt) - margin_t
    thi = np.max(pt) + margin_t
    axes = [lo[d] + (hi[d] - lo[d]) * (np.arange(n_lat) + 0.5) / n_lat
            for d in range(px.shape[1])]
    taxis = tlo + (thi - tlo) * (np.arange(n_lat_t) + 0.5) / n_lat_t
    grids = np.meshgrid(*axes, taxis, indexing="ij")
    centers = np.stack([g.ravel() for g in grids[:-1]], axis=1)
    ct = grids[-1].ravel()
    vol = float(np.prod((hi - lo) / n_lat) * (thi - tlo) / n_lat_t)
    return centers, ct, vol


def _finite_riesz(measure, cx, ct, T):
    """Riesz values at lattice centers; centers hitting an atom are nudged."""
    vals = _accel.riesz_atoms(cx, ct, measure.x, measure.t, measure.m, T, measure.dim)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        cx2 = cx[bad] + T * 2.0 ** -30
        vals[bad] = _accel.riesz_atoms(cx2, ct[bad], measure.x, measure.t,
                                       measure.m, T, measure.dim)
    return vals


def _composed_riesz(measure, px, pt, T, transform, n_lat, n_lat_t):
    """Riesz potential of transform(riesz potential of mu), lattice quadrature.

    The inner potential is sampled at the midpoints of a lattice covering
    everything within parabolic distance T of the evaluation points (the
    outer kernel vanishes beyond T)."""
    centers, ct, vol = _lattice(px, pt, T, T * T, n_lat, n_lat_t)
    inner = _finite_riesz(measure, centers, ct, T)
    gw = transform(inner) * vol
    return _accel.riesz_kernel_sum(px, pt, centers, ct, gw, T, measure.dim)


def est_u_lower(measure, px, pt, q, R, rho=None, n_lat=40, n_lat_t=None,
                params=None, return_parts=False):
    """Lower envelope for the power-absorption solution driven by mu.

    value = C2 * dyadic_lower_sum - C1^(q+1) * riesz[(riesz mu)^q], both
    potentials truncated at T = 2R.  Valid for evaluation points inside
    Qtilde_R(0,0) with B_rho(x) inside B_R(0); the default base radius is
    the largest admissible one per point.
    """
    px, pt, scalar = _points(px, pt, measure.dim)
    params = params if params is not None else PotentialParams.calibrated(measure.dim, R)
    if rho is None:
        rho = np.maximum(R - np.sqrt(np.sum(px * px, axis=1)), 1e-9 * R)
    dy = dyadic_lower_sum(measure, px, pt, rho)
    dy = np.atleast_1d(np.asarray(dy, float))
    T = 2.0 * R
    n_lat_t = n_lat if n_lat_t is None else n_lat_t
    corr = _composed_riesz(measure, px, pt, T, lambda v: v ** float(q), n_lat, n_lat_t)
    val = params.C2 * dy - params.C1 ** (q + 1.0) * corr
    if return_parts:
        return _unwrap(val, scalar), _unwrap(dy, scalar), _unwrap(corr, scalar)
    return _unwrap(val, scalar)


def est_v_lower(measure, px, pt, R, rho=None, n_lat=40, n_lat_t=None,
                params=None, return_parts=False):
    """Lower envelope for the exponential-absorption solution driven by mu.

    value = C2 * dyadic_lower_sum - C1 * riesz[exp(C1 riesz mu) - 1]; the
    exponent saturates at EXPM1_CAP, which can only push the envelope down.
    """
    px, pt, scalar = _points(px, pt, measure.dim)
    params = params if params is not None else PotentialParams.calibrated(measure.dim, R)
    if rho is None:
        rho = np.maximum(R - np.sqrt(np.sum(px * px, axis=1)), 1e-9 * R)
    dy = dyadic_lower_sum(measure, px, pt, rho)
    dy = np.atleast_1d(np.asarray(dy, float))
    T = 2.0 * R
    n_lat_t = n_lat if n_lat_t is None else n_lat_t
    c1 = params.C1
    corr = _composed_riesz(measure, px, pt, T,
                           lambda v: np.expm1(np.minimum(c1 * v, EXPM1_CAP)),
                           n_lat, n_lat_t)
    val = params.C2 * dy - c1 * corr
    if return_parts:
        return _unwrap(val, scalar), _unwrap(dy, scalar), _unwrap(corr, scalar)
    return _unwrap(val, scalar)


def duhamel_solve(f, R):
    """Space-time convolution of the grid density f with the Gaussian kernel.

    f is a GridFunction supported in Qtilde_R(0,0) (zero outside); returns
    (u, err) where u is on the same grid and err is a Richardson-style
    resolution estimate from a stride-2 source subsampling.
    """
    del R  # kernel causality handles the support; radius kept for call-site clarity
    nodes, ntimes = f.node_points()
    N = len(f.axes)
    w = f.values.ravel() * f.h ** N * f.ht
    u = _accel.heat_sum(nodes, ntimes, nodes, ntimes, w, N)
    sl = (slice(None, None, 2),) * (N + 1)
    cvals = f.values[sl]
    cgrids = np.meshgrid(*[a[::2] for a in f.axes], f.times[::2], indexing="ij")
    cx = np.stack([g.ravel() for g in cgrids[:-1]], axis=1)
    ct = cgrids[-1].ravel()
    cw = cvals.ravel() * (2.0 * f.h) ** N * (2.0 * f.ht)
    u2 = _accel.heat_sum(nodes, ntimes, cx, ct, cw, N)
    err = float(np.max(np.abs(u - u2))) if u.size else 0.0
    out = GridFunction(f.axes, f.times, u.reshape(f.values.shape), f.h, f.ht,
                       {"resolution_error": err})
    return out, err


def exp_integrability(measure, R, c, windows, n_side=10):
    """Window averages of exp(c * riesz of the window-restricted measure).

    windows is a list of (y, s, r) cylinders Qtilde_r(y, s); for each, the
    measure is restricted to the open cylinder and the average of
    exp(c * riesz) over the cylinder is estimated on a midpoint lattice
    (cells outside the spatial ball are discarded).  For atomic measures
    the continuum average is infinite, so this is a fixed-resolution
    statistic: comparable across measures at matching n_side only.
    """
    out = np.zeros(len(windows))
    for i, (y, s, r) in enumerate(windows):
        y = np.asarray(y, float)
        part = measure.restrict_qtilde(y, s, r)
        centers, ct, _ = _lattice(np.atleast_2d(y), np.atleast_1d(float(s)),
                                  r, r * r, n_side, n_side)
        keep = np.sum((centers - y) ** 2, axis=1) < r * r
        vals = _finite_riesz(part, centers[keep], ct[keep], R) if part.natoms else \
            np.zeros(int(np.sum(keep)))
        out[i] = float(np.mean(np.exp(np.minimum(c * vals, EXPM1_CAP))))
    return out


def wolff_rhs(measure, sigma=WOLFF_SIGMA, r_up=1.0):
    """Exact truncated Wolff energy: integral over r in (sigma, r_up) of
    (mu(Qtilde_r))^{2/N} dr/r, integrated against mu itself.

    For atoms, r -> mu(Qtilde_r(x_i, t_i)) is a step function jumping at the
    pairwise parabolic distances (the atom itself counts from r = 0+), so
    each integral is a finite sum of cum^{2/N} log-lengths.
    """
    if sigma >= r_up or measure.natoms == 0:
        return 0.0
    N = measure.dim
    rs = measure.rho_star(measure.x, measure.t)
    total = 0.0
    for i in range(measure.natoms):
        d = rs[i]
        cuts = np.unique(d[(d > sigma) & (d < r_up)])
        breaks = np.concatenate([[sigma], cuts, [r_up]])
        for a, b in zip(breaks[:-1], breaks[1:]):
            cum = float(np.sum(measure.m[d <= a]))
            total += measure.m[i] * cum ** (2.0 / N) * math.log(b / a)
    return float(total)


def wolff_lhs(measure, sigma=WOLFF_SIGMA, r_up=1.0, max_cells=WOLFF_MAX_CELLS):
    """Space-time integral of (sigma-floored riesz potential)^{(N+2)/N}.

    The kernel floor max(rho*, sigma) matches the lower truncation of
    wolff_rhs.  Quadrature on a graded mesh: cells are split until their
    parabolic radius is below WOLFF_GRADE times their distance to the atom
    set (floored at sigma), so resolution concentrates where the integrand
    peaks.  Cells entirely beyond parabolic distance r_up are dropped.
    """
    if measure.natoms == 0:
        return 0.0
    N = measure.dim
    lo = np.min(measure.x, axis=0) - r_up
    hi = np.max(measure.x, axis=0) + r_up
    tlo = float(np.min(measure.t)) - r_up * r_up
    thi = float(np.max(measure.t)) + r_up * r_up
    # parabolically shaped cells: spatial half-width s, temporal half-width
    # s^2, so one split round (2x space, 4x time) exactly halves the scale
    s0 = max(float(np.max(hi - lo)) / 12.0, math.sqrt((thi - tlo) / 2.0) / 12.0)
    nx = np.maximum(1, np.ceil((hi - lo) / (2.0 * s0)).astype(int))
    nt = max(1, int(math.ceil((thi - tlo) / (2.0 * s0 * s0))))
    axes = [lo[d] + (hi[d] - lo[d]) * (np.arange(nx[d]) + 0.5) / nx[d] for d in range(N)]
    taxis = tlo + (thi - tlo) * (np.arange(nt) + 0.5) / nt
    grids = np.meshgrid(*axes, taxis, indexing="ij")
    cx = np.stack([g.ravel() for g in grids[:-1]], axis=1)
    ct = grids[-1].ravel()
    wx = np.tile((hi - lo) / (2.0 * nx), (cx.shape[0], 1))
    wt = np.full(cx.shape[0], (thi - tlo) / (2.0 * nt))
    done_x, done_t, done_wx, done_wt = [], [], [], []
    ncells = cx.shape[0]
    nchild = 2 ** N * 4
    while cx.shape[0]:
        dxa = cx[:, None, :] - measure.x[None, :, :]
        rs = np.maximum(np.sqrt(np.sum(dxa * dxa, axis=2)),
                        np.sqrt(np.abs(ct[:, None] - measure.t[None, :])))
        d = np.min(rs, axis=1)
        size = np.maximum(np.sqrt(np.sum(wx * wx, axis=1)), np.sqrt(wt))
        live = d - size < r_up  # cell touches the kernel support
        split = live & (size > WOLFF_GRADE * np.maximum(d, sigma))
        room = (max_cells - ncells) // (nchild - 1)
        if np.sum(split) > room:
            # budget-constrained: refine the worst-graded cells first
            rank = np.where(split, size / np.maximum(d, sigma), 0.0)
            cut = np.sort(rank)[::-1][max(room, 0)] if room > 0 else np.inf
            split = split & (rank > cut)
        keep = live & ~split
        done_x.append(cx[keep]); done_t.append(ct[keep])
        done_wx.append(wx[keep]); done_wt.append(wt[keep])
        if not np.any(split):
            break
        sx, st, swx, swt = cx[split], ct[split], wx[split], wt[split]
        children_x, children_t = [], []
        for corner in range(2 ** N):
            off = np.array([(1 if corner >> b & 1 else -1) for b in range(N)], float)
            for toff in (-3.0, -1.0, 1.0, 3.0):
                children_x.append(sx + off * swx / 2.0)
                children_t.append(st + toff * swt / 4.0)
        cx = np.vstack(children_x)
        ct = np.concatenate(children_t)
        wx = np.tile(swx / 2.0, (nchild, 1))
        wt = np.tile(swt / 4.0, nchild)
        ncells += cx.shape[0]
    cx = np.vstack(done_x); ct = np.concatenate(done_t)
    wx = np.vstack(done_wx); wt = np.concatenate(done_wt)
    if not cx.shape[0]:
        return 0.0
    rupN = r_up ** (-float(N))
    total = 0.0
    for i0 in range(0, cx.shape[0], 262144):
        i1 = min(cx.shape[0], i0 + 262144)
        dxa = cx[i0:i1, None, :] - measure.x[None, :, :]
        rs = np.maximum(np.sqrt(np.sum(dxa * dxa, axis=2)),
                        np.sqrt(np.abs(ct[i0:i1, None] - measure.t[None, :])))
        ker = np.where(rs < r_up, (np.maximum(rs, sigma) ** (-float(N)) - rupN) / N, 0.0)
        pot = ker @ measure.m
        vol = np.prod(2.0 * wx[i0:i1], axis=1) * 2.0 * wt[i0:i1]
        total += float(np.sum(vol * pot ** ((N + 2.0) / N)))
    return total


def wolff_energy_pair(measure, N=None, sigma=WOLFF_SIGMA, r_up=1.0):
    """Both sides of the Wolff-energy equivalence, (lhs, rhs), matched truncation.

    Raises on coincident atoms: the untruncated energies diverge faster than
    the shared logarithmic rate and the pair stops being comparable.
    """
    if N is not None and N != measure.dim:
        raise ValueError("dimension mismatch")
    if measure.natoms > 1:
        rs = measure.rho_star(measure.x, measure.t)
        off = rs + np.diag(np.full(measure.natoms, np.inf))
        if np.min(off) == 0.0:
            raise ValueError("coincident atoms: Wolff energies diverge")
    return wolff_lhs(measure, sigma, r_up), wolff_rhs(measure, sigma, r_up)
