"""Hot kernels: batch atom sums and heat-kernel convolution.

Numba-jitted when available; set PARACAP_DISABLE_NUMBA=1 to force the
pure-numpy fallbacks (same results, used by the benchmark for comparison).
"""

import math
import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


USE_NUMBA = HAS_NUMBA and os.environ.get("PARACAP_DISABLE_NUMBA", "") != "1"


def _rho_star_np(px, pt, ax, at):
    # parabolic distance of every point to every atom, shape (npts, natoms)
    dx = px[:, None, :] - ax[None, :, :]
    sp = np.sqrt(np.sum(dx * dx, axis=2))
    tp = np.sqrt(np.abs(pt[:, None] - at[None, :]))
    return np.maximum(sp, tp)


def _riesz_np(px, pt, ax, at, am, R, N):
    rs = _rho_star_np(px, pt, ax, at)
    hit = rs == 0.0
    w = np.zeros_like(rs)
    inside = (rs > 0.0) & (rs < R)
    w[inside] = (rs[inside] ** (-float(N)) - R ** (-float(N))) / N
    out = w @ am
    out[np.any(hit & (am[None, :] > 0), axis=1)] = np.inf
    return out


def _maximal_np(px, pt, ax, at, am, R):
    rs = _rho_star_np(px, pt, ax, at)
    N = ax.shape[1]
    out = np.zeros(px.shape[0])
    for i in range(px.shape[0]):
        r = rs[i]
        if np.any((r == 0.0) & (am > 0)):
            out[i] = np.inf
            continue
        order = np.argsort(r)
        rr = r[order]
        cm = np.cumsum(am[order])
        # include all atoms at the same rho* (sup is over radii just above rho*)
        keep = (rr > 0.0) & (rr < R)
        if not np.any(keep):
            continue
        last_of_run = np.r_[rr[1:] != rr[:-1], True]
        cand = keep & last_of_run
        out[i] = np.max(cm[cand] / rr[cand] ** N) if np.any(cand) else 0.0
    return out


def _heat_np(px, pt, sx, st, sw, N):
    dx = px[:, None, :] - sx[None, :, :]
    r2 = np.sum(dx * dx, axis=2)
    dt = pt[:, None] - st[None, :]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        k = np.where(dt > 0.0, (4.0 * np.pi * dt) ** (-N / 2.0) * np.exp(-r2 / (4.0 * dt)), 0.0)
    return k @ sw


def _riesz_kernel_np(px, pt, gx, gt, gw, R, N):
    npts = px.shape[0]
    out = np.zeros(npts)
    # chunk evaluation points: the (chunk, nsrc) distance table must stay small
    step = max(1, int(4_000_000 / max(1, gx.shape[0])))
    RN = R ** (-float(N))
    for i0 in range(0, npts, step):
        i1 = min(npts, i0 + step)
        rs = _rho_star_np(px[i0:i1], pt[i0:i1], gx, gt)
        ker = np.zeros_like(rs)
        inside = (rs > 0.0) & (rs < R)
        ker[inside] = (rs[inside] ** (-float(N)) - RN) / N
        out[i0:i1] = ker @ gw
    return out


@njit(cache=True)
def _riesz_kernel_nb(px, pt, gx, gt, gw, R, N):  # pragma: no cover - numba path
    npts = px.shape[0]
    nsrc = gx.shape[0]
    out = np.zeros(npts)
    RN = R ** (-float(N))
    for i in range(npts):
        acc = 0.0
        for j in range(nsrc):
            s = 0.0
            for d in range(px.shape[1]):
                s += (px[i, d] - gx[j, d]) ** 2
            rs = max(math.sqrt(s), math.sqrt(abs(pt[i] - gt[j])))
            if 0.0 < rs < R:
                acc += gw[j] * (rs ** (-float(N)) - RN) / N
        out[i] = acc
    return out


@njit(cache=True)
def _riesz_nb(px, pt, ax, at, am, R, N):  # pragma: no cover - numba path
    npts = px.shape[0]
    natoms = ax.shape[0]
    out = np.zeros(npts)
    RN = R ** (-float(N))
    for i in range(npts):
        acc = 0.0
        for j in range(natoms):
            s = 0.0
            for d in range(px.shape[1]):
                s += (px[i, d] - ax[j, d]) ** 2
            rs = max(math.sqrt(s), math.sqrt(abs(pt[i] - at[j])))
            if rs == 0.0 and am[j] > 0.0:
                acc = np.inf
                break
            if 0.0 < rs < R:
                acc += am[j] * (rs ** (-float(N)) - RN) / N
        out[i] = acc
    return out


@njit(cache=True)
def _maximal_nb(px, pt, ax, at, am, R):  # pragma: no cover - numba path
    npts = px.shape[0]
    natoms = ax.shape[0]
    N = ax.shape[1]
    out = np.zeros(npts)
    rs = np.empty(natoms)
    for i in range(npts):
        coincide = False
        for j in range(natoms):
            s = 0.0
            for d in range(N):
                s += (px[i, d] - ax[j, d]) ** 2
            rs[j] = max(math.sqrt(s), math.sqrt(abs(pt[i] - at[j])))
            if rs[j] == 0.0 and am[j] > 0.0:
                coincide = True
        if coincide:
            out[i] = np.inf
            continue
        order = np.argsort(rs)
        cum = 0.0
        best = 0.0
        for jj in range(natoms):
            j = order[jj]
            cum += am[j]
            if rs[j] <= 0.0 or rs[j] >= R:
                continue
            if jj + 1 < natoms and rs[order[jj + 1]] == rs[j]:
                continue
            val = cum / rs[j] ** N
            if val > best:
                best = val
        out[i] = best
    return out


@njit(cache=True)
def _heat_nb(px, pt, sx, st, sw, N):  # pragma: no cover - numba path
    npts = px.shape[0]
    nsrc = sx.shape[0]
    out = np.zeros(npts)
    c = N / 2.0
    for i in range(npts):
        acc = 0.0
        for j in range(nsrc):
            dt = pt[i] - st[j]
            if dt <= 0.0:
                continue
            r2 = 0.0
            for d in range(px.shape[1]):
                r2 += (px[i, d] - sx[j, d]) ** 2
            acc += sw[j] * (4.0 * np.pi * dt) ** (-c) * math.exp(-r2 / (4.0 * dt))
        out[i] = acc
    return out


def riesz_atoms(px, pt, ax, at, am, R, N):
    """sum_j m_j * (rho*^-N - R^-N)/N over atoms with rho* < R, per point."""
    if USE_NUMBA and len(px):
        return _riesz_nb(
            np.ascontiguousarray(px, dtype=np.float64),
            np.ascontiguousarray(pt, dtype=np.float64),
            np.ascontiguousarray(ax, dtype=np.float64),
            np.ascontiguousarray(at, dtype=np.float64),
            np.ascontiguousarray(am, dtype=np.float64),
            float(R),
            int(N),
        )
    return _riesz_np(np.asarray(px, float), np.asarray(pt, float), np.asarray(ax, float),
                     np.asarray(at, float), np.asarray(am, float), float(R), int(N))


def riesz_kernel_sum(px, pt, gx, gt, gw, R, N):
    """Quadrature companion to riesz_atoms: weighted kernel sum over source
    cells, self-cells (rho* = 0) dropped instead of signalling infinity."""
    if USE_NUMBA and len(px):
        return _riesz_kernel_nb(
            np.ascontiguousarray(px, dtype=np.float64),
            np.ascontiguousarray(pt, dtype=np.float64),
            np.ascontiguousarray(gx, dtype=np.float64),
            np.ascontiguousarray(gt, dtype=np.float64),
            np.ascontiguousarray(gw, dtype=np.float64),
            float(R),
            int(N),
        )
    return _riesz_kernel_np(np.asarray(px, float), np.asarray(pt, float), np.asarray(gx, float),
                            np.asarray(gt, float), np.asarray(gw, float), float(R), int(N))


def maximal_atoms(px, pt, ax, at, am, R):
    """sup_{0<rho<R} mu(Q~_rho)/rho^N for an atomic mu, per point (exact)."""
    if USE_NUMBA and len(px):
        return _maximal_nb(
            np.ascontiguousarray(px, dtype=np.float64),
            np.ascontiguousarray(pt, dtype=np.float64),
            np.ascontiguousarray(ax, dtype=np.float64),
            np.ascontiguousarray(at, dtype=np.float64),
            np.ascontiguousarray(am, dtype=np.float64),
            float(R),
        )
    return _maximal_np(np.asarray(px, float), np.asarray(pt, float), np.asarray(ax, float),
                       np.asarray(at, float), np.asarray(am, float), float(R))


def heat_sum(px, pt, sx, st, sw, N):
    """sum_j w_j * H(p - s_j) with H the Gaussian kernel (zero for dt <= 0)."""
    if USE_NUMBA and len(px):
        return _heat_nb(
            np.ascontiguousarray(px, dtype=np.float64),
            np.ascontiguousarray(pt, dtype=np.float64),
            np.ascontiguousarray(sx, dtype=np.float64),
            np.ascontiguousarray(st, dtype=np.float64),
            np.ascontiguousarray(sw, dtype=np.float64),
            int(N),
        )
    return _heat_np(np.asarray(px, float), np.asarray(pt, float), np.asarray(sx, float),
                    np.asarray(st, float), np.asarray(sw, float), int(N))
