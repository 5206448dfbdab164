"""Backward-Euler solvers for nonlinear absorption equations on
space-time domains approximated from inside by dyadic parabolic cubes.

The construction mirrors the classical existence device: the domain is
exhausted by level-k dyadic cubes, the cube set splits into time slabs
with a fixed spatial cross-section, each slab is solved implicitly with
constant lateral data m and initial data spliced from the previous
slab, and the lateral data sweeps upward along an m-ladder.  Backward
Euler with a monotone upwind gradient discretization preserves the
discrete comparison principle, which is what every invariant in this
module rests on: m-monotonicity, level monotonicity, barrier ceilings
and the cross-exponent orderings are all comparison statements, so they
hold on the lattice up to Newton tolerance.

Residual convention: a converged implicit step satisfies
(I - tau*Lap_h)u + tau*g(u) = u_prev + tau*f with scaled sup-norm
residual below NEWTON_TOL; the scale is 1 + |rhs| + tau*|g(u)|, so the
absolute residual matches the spec tolerance whenever the equation is
O(1) and degrades only by the conditioning of huge boundary data.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage as ndi
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import geometry, potentials
from .gridfn import GridFunction

NEWTON_TOL = 1e-12
NEWTON_MAXIT = 60
NEWTON_HARD_TOL = 1e-8
DEFAULT_M_LADDER = (10.0, 100.0, 1000.0, 10000.0)
SATURATION_TOL = 1e-6
EXP_ARG_CAP = 700.0
# fixed-lattice integrability proxy ceiling for the exponential-law
# measure-data precondition; the statistic grows superexponentially with
# atom mass (measured on the standard window: 1.3 at mass 1, 1.9 at
# mass 2, 16 at mass 5, 6e8 at mass 20), so 50 cleanly separates
# unit-scale data from inadmissible concentrations
EXP_MD_BOUND = 50.0


class SolverError(RuntimeError):
    """Newton breakdown or an unusable discretization request."""


class IntegrabilityError(ValueError):
    """Exponential-law measure-data precondition failed."""


@dataclass(frozen=True)
class AbsorptionLaw:
    """Zero-order absorption with an optional first-order term.

    kinds: "power" with g(u) = u^q; "exponential" with g(u) = e^u - 1;
    "hamilton_jacobi" with g(u) = b*u^q plus a*|grad u|^p discretized
    upwind inside the step operator.  Every kind has g nondecreasing on
    u >= 0 and g(0) = 0.
    """

    kind: str
    q: float = 0.0
    a: float = 0.0
    p: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind == "power":
            if self.q <= 1.0:
                raise ValueError("power law needs q > 1")
        elif self.kind == "exponential":
            pass
        elif self.kind == "hamilton_jacobi":
            if self.q <= 1.0 or self.b <= 0.0 or self.a < 0.0:
                raise ValueError("hamilton_jacobi needs q > 1, b > 0, a >= 0")
            if self.a > 0.0 and not 1.0 < self.p < 2.0:
                raise ValueError("hamilton_jacobi needs 1 < p < 2")
        else:
            raise ValueError(f"unknown absorption kind {self.kind!r}")

    def g(self, u):
        u = np.asarray(u, float)
        if self.kind == "power":
            return u ** self.q
        if self.kind == "hamilton_jacobi":
            return self.b * u ** self.q
        out = np.expm1(np.minimum(u, EXP_ARG_CAP))
        return np.where(u > EXP_ARG_CAP, np.inf, out)

    def gprime(self, u):
        u = np.asarray(u, float)
        if self.kind == "power":
            return self.q * u ** (self.q - 1.0)
        if self.kind == "hamilton_jacobi":
            return self.b * self.q * u ** (self.q - 1.0)
        return np.exp(np.minimum(u, EXP_ARG_CAP))

    @property
    def has_gradient(self):
        return self.kind == "hamilton_jacobi" and self.a > 0.0


def power_law(q):
    return AbsorptionLaw("power", q=float(q))


def exponential_law():
    return AbsorptionLaw("exponential")


def hamilton_jacobi_law(a, p, b, q):
    return AbsorptionLaw("hamilton_jacobi", q=float(q), a=float(a),
                         p=float(p), b=float(b))


def _pointwise_implicit(law, r, tau, iters=80):
    """Vector solve of v + tau*g(v) = r on v >= 0 by bisection.

    The map is strictly increasing, so the root is unique; it seeds the
    spatial Newton iteration with the diffusion-free profile, which also
    keeps the exponential law away from overflow for huge data.
    """
    r = np.asarray(r, float)
    lo = np.zeros_like(r)
    if law.kind == "exponential":
        hi = np.log1p(np.maximum(r, 0.0) / tau) + 1.0
    else:
        hi = np.maximum(r, 0.0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        high = mid + tau * law.g(mid) > r
        hi = np.where(high, mid, hi)
        lo = np.where(high, lo, mid)
    return 0.5 * (lo + hi)


@dataclass
class SlabLattice:
    """Uniform node lattice over one time slab of a dyadic cube union.

    offset holds the global integer index of the first node per axis (in
    units of h), so lattices of different slabs and levels share one
    global addressing scheme and can be spliced exactly.
    """

    h: float
    offset: np.ndarray
    cellmask: np.ndarray
    nodemask: np.ndarray
    interior: np.ndarray

    @classmethod
    def from_cells(cls, cells, nsub, h):
        cells = np.asarray(cells, np.int64)
        if cells.ndim != 2 or cells.shape[0] == 0:
            raise ValueError("cells must be a nonempty (ncubes, N) index array")
        nsub = int(nsub)
        if nsub < 2:
            raise ValueError("nsub must be at least 2")
        lo = cells.min(axis=0) * nsub
        hi = (cells.max(axis=0) + 1) * nsub
        shape = tuple(int(v) for v in (hi - lo))
        cellmask = np.zeros(shape, bool)
        for c in cells:
            sl = tuple(slice(int(cd) * nsub - int(o), int(cd) * nsub - int(o) + nsub)
                       for cd, o in zip(c, lo))
            cellmask[sl] = True
        occ = np.pad(cellmask, 1)
        nshape = tuple(s + 1 for s in shape)
        nodemask = np.zeros(nshape, bool)
        interior = np.ones(nshape, bool)
        for corner in itertools.product((0, 1), repeat=len(shape)):
            sl = tuple(slice(c, c + s + 1) for c, s in zip(corner, shape))
            piece = occ[sl]
            nodemask |= piece
            interior &= piece
        return cls(h=float(h), offset=lo.astype(np.int64), cellmask=cellmask,
                   nodemask=nodemask, interior=interior)

    @property
    def nshape(self):
        return self.nodemask.shape

    def axes(self):
        return tuple((self.offset[d] + np.arange(self.nshape[d])) * self.h
                     for d in range(len(self.nshape)))


@dataclass
class SlabProblem:
    """One slab of the chain: lateral value m on the cross-section
    boundary for t in (a, a+span], initial values at t = a."""

    lattice: SlabLattice
    a: float
    span: float
    m: float
    initial: np.ndarray

    def __post_init__(self):
        if self.m < 0.0:
            raise ValueError("lateral value must be nonnegative")
        if self.initial.shape != self.lattice.nshape:
            raise ValueError("initial data shape does not match the lattice")
        vals = self.initial[self.lattice.nodemask]
        if not np.all(np.isfinite(vals)) or np.any(vals < 0.0):
            raise ValueError("initial data must be finite and nonnegative")


def _assemble(interior, h):
    """Dirichlet Laplacian on the unknown set.

    Returns (A, bc, ids): A = -Lap_h restricted to interior nodes with
    boundary columns folded out, bc[i] = number of stencil neighbors
    held at the lateral value (each contributes value/h^2 to the RHS),
    ids = full-lattice -> unknown index map (-1 outside).
    """
    shape = interior.shape
    nd = len(shape)
    for d in range(nd):
        sl = [slice(None)] * nd
        for edge in (0, -1):
            sl[d] = edge
            if np.any(interior[tuple(sl)]):
                raise ValueError("interior node on the lattice edge")
    flat = interior.ravel()
    ids = -np.ones(flat.size, dtype=np.int64)
    base = np.flatnonzero(flat)
    nun = base.size
    ids[base] = np.arange(nun)
    strides = [int(np.prod(shape[d + 1:], dtype=np.int64)) for d in range(nd)]
    rows, cols, vals = [], [], []
    bc = np.zeros(nun)
    for d in range(nd):
        for sgn in (-1, 1):
            nb = base + sgn * strides[d]
            un = flat[nb]
            rows.append(ids[base[un]])
            cols.append(ids[nb[un]])
            vals.append(np.full(int(un.sum()), -1.0 / (h * h)))
            np.add.at(bc, ids[base[~un]], 1.0)
    A = sp.csr_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nun, nun))
    A = A + sp.diags(np.full(nun, 2.0 * nd / (h * h)))
    return A.tocsr(), bc, ids


def _godunov(full, h, p):
    """Rouy-Tourin upwind |grad u|^p over the full node array.

    Per axis the larger of the two upwind magnitudes max(D-, -D+, 0) is
    selected; the result is nonincreasing in every neighbor value, which
    keeps the implicit step operator monotone.  Returns the value array
    plus the branch data needed for the semi-smooth Jacobian.
    """
    nd = full.ndim
    S2 = np.zeros_like(full)
    sds, brs = [], []
    for d in range(nd):
        fm = full.copy()
        fp = full.copy()
        to = [slice(None)] * nd
        fr = [slice(None)] * nd
        to[d], fr[d] = slice(1, None), slice(None, -1)
        fm[tuple(to)] = full[tuple(fr)]
        to[d], fr[d] = slice(None, -1), slice(1, None)
        fp[tuple(to)] = full[tuple(fr)]
        dm = (full - fm) / h
        dp = (full - fp) / h
        s = np.maximum(np.maximum(dm, dp), 0.0)
        br = np.zeros(full.shape, np.int8)
        br[(s > 0.0) & (dm >= dp)] = -1
        br[(s > 0.0) & (dp > dm)] = 1
        sds.append(s)
        brs.append(br)
        S2 += s * s
    G = S2 ** (0.5 * p)
    return G, S2, sds, brs


class _Stepper:
    """Shared implicit-step operator for one lattice and law."""

    def __init__(self, interior, h, tau, law, m):
        self.interior = interior
        self.h = float(h)
        self.tau = float(tau)
        self.law = law
        self.m = float(m)
        self.A, self.bc, self.ids = _assemble(interior, h)
        self.nun = self.A.shape[0]
        self.M0 = (sp.eye(self.nun, format="csr") + self.tau * self.A).tocsr()
        self.strides = [int(np.prod(interior.shape[d + 1:], dtype=np.int64))
                        for d in range(interior.ndim)]
        self.base = np.flatnonzero(interior.ravel())

    def full(self, u, lateral=None):
        arr = np.full(self.interior.shape,
                      self.m if lateral is None else float(lateral))
        arr[self.interior] = u
        return arr

    def _grad_parts(self, u):
        full = self.full(u)
        G, S2, sds, brs = _godunov(full, self.h, self.law.p)
        g_un = G[self.interior]
        w = np.zeros_like(S2)
        pos = S2 > 0.0
        w[pos] = self.law.p * S2[pos] ** (0.5 * self.law.p - 1.0)
        rows, cols, vals = [], [], []
        diag = np.zeros(self.nun)
        flat_int = self.interior.ravel()
        for d, (s, br) in enumerate(zip(sds, brs)):
            coef = (w * s / self.h).ravel()[self.base]
            b = br.ravel()[self.base]
            act = b != 0
            np.add.at(diag, np.arange(self.nun)[act], coef[act])
            nb = self.base[act] + b[act] * self.strides[d]
            nb_un = flat_int[nb]
            rows.append(np.arange(self.nun)[act][nb_un])
            cols.append(self.ids[nb[nb_un]])
            vals.append(-coef[act][nb_un])
        J = sp.csr_matrix((np.concatenate(vals),
                           (np.concatenate(rows), np.concatenate(cols))),
                          shape=(self.nun, self.nun)) + sp.diags(diag)
        return g_un, J

    def residual(self, u, rhs):
        F = self.M0 @ u + self.tau * self.law.g(u) - rhs
        gval = None
        if self.law.has_gradient:
            gval, J = self._grad_parts(u)
            F = F + self.tau * self.law.a * gval
        else:
            J = None
        return F, gval, J

    def step(self, u_prev, rhs0, tol=NEWTON_TOL):
        """One backward-Euler step: solve u + tau*(-Lap_h u + g(u)) = rhs.

        rhs0 excludes the lateral loading (used for the diffusion-free
        seed); the full rhs adds m*bc/h^2.  Raises SolverError when
        damped Newton cannot reach NEWTON_HARD_TOL.
        """
        rhs = rhs0 + self.tau * self.m * self.bc / (self.h * self.h)
        u = _pointwise_implicit(self.law, rhs0, self.tau)
        F, gval, J_G = self.residual(u, rhs)
        best = float(np.max(np.abs(F))) if F.size else 0.0
        iters = 0
        for it in range(NEWTON_MAXIT):
            scale = 1.0 + float(np.max(np.abs(rhs))) \
                + self.tau * float(np.max(self.law.g(u)))
            if best / scale < tol:
                break
            J = self.M0 + sp.diags(self.tau * self.law.gprime(u))
            if J_G is not None:
                J = J + self.tau * self.law.a * J_G
            d = spla.splu(J.tocsc()).solve(-F)
            s, accepted = 1.0, False
            while s >= 2.0 ** -40:
                ut = u + s * d
                if np.all(ut >= 0.0):
                    Ft, gt, Jt = self.residual(ut, rhs)
                    nt = float(np.max(np.abs(Ft))) if Ft.size else 0.0
                    if nt <= best * (1.0 - 1e-4 * s) or nt / scale < tol:
                        u, F, J_G, best = ut, Ft, Jt, nt
                        accepted = True
                        break
                s *= 0.5
            iters = it + 1
            if not accepted:
                break
        scale = 1.0 + float(np.max(np.abs(rhs))) \
            + self.tau * float(np.max(self.law.g(u))) if u.size else 1.0
        scaled = best / scale
        if u.size and scaled > NEWTON_HARD_TOL:
            raise SolverError(
                f"Newton stalled at scaled residual {scaled:.2e}; "
                "decrease h (gradient terms may need a finer lattice)")
        return u, best, scaled, iters


def solve_slab(prob, law, h=None, source=None, tol=NEWTON_TOL):
    """March one slab with backward-Euler steps of size h^2.

    source, when given, is called as source(t) and must return the full
    node array of the forcing at that time level.  Returns a
    GridFunction whose values hold the initial plane at index 0 and the
    solution at each step; meta carries the masks and the worst Newton
    residuals (absolute and scaled).
    """
    lat = prob.lattice
    if h is not None and abs(h - lat.h) > 1e-13 * lat.h:
        raise ValueError("h disagrees with the lattice spacing")
    h = lat.h
    tau = h * h
    nsteps = int(round(prob.span / tau))
    if nsteps < 1 or abs(prob.span - nsteps * tau) > 1e-10 * prob.span:
        raise ValueError("slab span must be a positive multiple of h^2")
    stepper = _Stepper(lat.interior, h, tau, law, prob.m)
    values = np.full(lat.nshape + (nsteps + 1,), np.nan)
    plane0 = np.where(lat.nodemask, prob.initial, np.nan)
    values[..., 0] = plane0
    u = prob.initial[lat.interior].astype(float)
    res_abs = res_scaled = 0.0
    iters_max = 0
    lateral_plane = np.where(lat.nodemask, float(prob.m), np.nan)
    for j in range(1, nsteps + 1):
        rhs0 = u.copy()
        if source is not None:
            rhs0 = rhs0 + tau * source(prob.a + j * tau)[lat.interior]
        u, ra, rs, it = stepper.step(u, rhs0, tol=tol)
        plane = lateral_plane.copy()
        plane[lat.interior] = u
        values[..., j] = plane
        res_abs = max(res_abs, ra)
        res_scaled = max(res_scaled, rs)
        iters_max = max(iters_max, it)
    times = prob.a + tau * np.arange(nsteps + 1)
    meta = {"nodemask": lat.nodemask, "interior": lat.interior,
            "offset": lat.offset, "lateral_value": prob.m, "a": prob.a,
            "span": prob.span, "residual_abs": res_abs,
            "residual_scaled": res_scaled, "newton_iters_max": iters_max,
            "law_kind": law.kind}
    return GridFunction(lat.axes(), times, values, h, tau, meta)


def _splice_initial(lat, m, prev_lat, prev_terminal):
    """Initial plane per the chain rule: m on fresh territory, the
    previous slab's terminal values on the shared cross-section."""
    init = np.full(lat.nshape, float(m))
    fresh = np.ones(lat.nshape, bool)
    if prev_lat is not None:
        lo = np.maximum(lat.offset, prev_lat.offset)
        hi = np.minimum(lat.offset + np.array(lat.nshape),
                        prev_lat.offset + np.array(prev_lat.nshape))
        if np.all(hi > lo):
            sl_new = tuple(slice(int(a - o), int(b - o))
                           for a, b, o in zip(lo, hi, lat.offset))
            sl_old = tuple(slice(int(a - o), int(b - o))
                           for a, b, o in zip(lo, hi, prev_lat.offset))
            pm = prev_lat.nodemask[sl_old]
            init[sl_new][pm] = prev_terminal[sl_old][pm]
            fresh[sl_new][pm] = False
    init[~lat.nodemask] = np.nan
    fresh &= lat.nodemask
    init_masked = init.copy()
    init_masked[~lat.nodemask] = 0.0
    return init_masked, fresh


@dataclass
class MaximalSolution:
    """Slab-chain solutions along the m-ladder at one dyadic level."""

    domain: object
    law: AbsorptionLaw
    k: int
    nsub: int
    h: float
    m_ladder: tuple
    slabs: list
    lattices: list
    rungs: list
    fresh: list
    diagnostics: dict

    @property
    def final(self):
        return self.rungs[-1]

    def interior_points(self, rung=-1, deep=False, clear=None):
        """Interior node samples: coords, times, values (time levels >= 1).
        deep=True restricts to nodes eroded away from lateral boundaries
        and fresh initial planes."""
        pxs, pts, vs = [], [], []
        for gf, lat, fr in zip(self.rungs[rung], self.lattices, self.fresh):
            mask3 = self._node_selector(gf, lat, fr, deep, clear)
            if not mask3.any():
                continue
            grids = np.meshgrid(*lat.axes(), gf.times, indexing="ij")
            pxs.append(np.stack([g[mask3] for g in grids[:-1]], axis=1))
            pts.append(grids[-1][mask3])
            vs.append(gf.values[mask3])
        if not pxs:
            N = len(self.lattices[0].nshape)
            return np.zeros((0, N)), np.zeros(0), np.zeros(0)
        return np.concatenate(pxs), np.concatenate(pts), np.concatenate(vs)

    def _node_selector(self, gf, lat, fr, deep, clear):
        nsteps = gf.times.size - 1
        sel2 = lat.interior
        if deep:
            c = max(2, self.nsub) if clear is None else int(clear)
            sel2 = ndi.binary_erosion(lat.interior, iterations=c)
            shadow = ndi.binary_dilation(fr, iterations=c)
            mask3 = np.zeros(lat.nshape + (nsteps + 1,), bool)
            for j in range(1, nsteps + 1):
                mask3[..., j] = sel2 & (~shadow | (j >= c * c))
            return mask3
        mask3 = np.zeros(lat.nshape + (nsteps + 1,), bool)
        mask3[..., 1:] = sel2[..., None]
        return mask3

    def sample(self, px, pt, rung=-1):
        """Nearest-node values; NaN outside the computed lattice."""
        px = np.atleast_2d(np.asarray(px, float))
        pt = np.atleast_1d(np.asarray(pt, float))
        out = np.full(pt.shape, np.nan)
        tau = self.h * self.h
        for gf, lat in zip(self.rungs[rung], self.lattices):
            a, span = gf.meta["a"], gf.meta["span"]
            inslab = (pt > a + 1e-12) & (pt <= a + span + 1e-12)
            if not inslab.any():
                continue
            ji = np.clip(np.round((pt[inslab] - a) / tau).astype(int), 1,
                         gf.times.size - 1)
            loc = np.round(px[inslab] / self.h).astype(int) - lat.offset
            ok = np.all((loc >= 0) & (loc < np.array(lat.nshape)), axis=1)
            vals = np.full(ji.shape, np.nan)
            if ok.any():
                idx = tuple(loc[ok].T) + (ji[ok],)
                got = gf.values[idx]
                vals[ok] = got
            out[inslab] = vals
        return out


def maximal_solution(domain, law, k, m_ladder=None, nsub=2, bbox=None,
                     tol=NEWTON_TOL):
    """Slab-chain construction of the large-data sweep at dyadic level k.

    For each m in the increasing ladder the slab chain is solved with
    lateral data m and spliced initial planes; the returned object holds
    every rung plus diagnostics: per-rung increments on deep interior
    nodes, the m-monotonicity violation (zero up to Newton tolerance for
    these monotone steps), worst Newton residuals, and the saturation
    flag (last deep increment below SATURATION_TOL).
    """
    ladder = tuple(float(m) for m in (DEFAULT_M_LADDER if m_ladder is None
                                      else m_ladder))
    if len(ladder) < 1 or any(b <= a for a, b in zip(ladder, ladder[1:])) \
            or ladder[0] <= 0.0:
        raise ValueError("m-ladder must be positive and increasing")
    ex = geometry.dyadic_exhaustion(domain, k, bbox=bbox)
    if not ex.slabs:
        raise SolverError(f"no level-{k} dyadic cube fits inside the domain")
    h = 2.0 ** (-k) / int(nsub)
    lattices = [SlabLattice.from_cells(s.cells, int(nsub), h) for s in ex.slabs]
    rungs, fresh_masks = [], None
    res_abs = res_scaled = 0.0
    iters_max = 0
    for m in ladder:
        gfs, fresh_list = [], []
        prev_lat = prev_term = None
        prev_end = None
        for s, lat in zip(ex.slabs, lattices):
            contiguous = prev_end is not None and \
                abs(s.a - prev_end) < 1e-12 * max(1.0, abs(s.a))
            if contiguous:
                init, fr = _splice_initial(lat, m, prev_lat, prev_term)
            else:
                init, fr = _splice_initial(lat, m, None, None)
            gf = solve_slab(SlabProblem(lat, s.a, s.span, m, init), law,
                            tol=tol)
            gfs.append(gf)
            fresh_list.append(fr)
            prev_lat, prev_term = lat, gf.values[..., -1]
            prev_end = s.a + s.span
            res_abs = max(res_abs, gf.meta["residual_abs"])
            res_scaled = max(res_scaled, gf.meta["residual_scaled"])
            iters_max = max(iters_max, gf.meta["newton_iters_max"])
        rungs.append(gfs)
        fresh_masks = fresh_list
    # m-monotonicity and deep increments along the ladder
    viol = 0.0
    increments = []
    clear = max(2, int(nsub))
    for j in range(1, len(ladder)):
        inc = 0.0
        for g1, g0, lat, fr in zip(rungs[j], rungs[j - 1], lattices,
                                   fresh_masks):
            d = g1.values - g0.values
            finite = np.isfinite(d)
            if finite.any():
                viol = max(viol, float(-np.min(d[finite])))
            sel2 = ndi.binary_erosion(lat.interior, iterations=clear)
            shadow = ndi.binary_dilation(fr, iterations=clear)
            nsteps = g1.times.size - 1
            for step in range(1, nsteps + 1):
                mask = sel2 & (~shadow | (step >= clear * clear))
                if mask.any():
                    inc = max(inc, float(np.max(np.abs(d[..., step][mask]))))
        increments.append(inc)
    diagnostics = {
        "m_ladder": ladder, "increments": increments,
        "saturated": bool(increments and increments[-1] < SATURATION_TOL),
        "m_monotone_max_violation": viol,
        "monotone_m_ok": bool(viol <= 1e-9),
        "residual_abs_max": res_abs, "residual_scaled_max": res_scaled,
        "newton_iters_max": iters_max, "h": h, "tau": h * h,
        "nslabs": len(ex.slabs),
        "nodes_interior_total": int(sum(la.interior.sum() for la in lattices)),
    }
    return MaximalSolution(domain=domain, law=law, k=int(k), nsub=int(nsub),
                           h=h, m_ladder=ladder, slabs=ex.slabs,
                           lattices=lattices, rungs=rungs, fresh=fresh_masks,
                           diagnostics=diagnostics)


def k_monotonicity(domain, law, k, nsub=2, m_ladder=None, bbox=None):
    """Level comparison on the shared finest lattice.

    Runs levels k (at 2*nsub) and k+1 (at nsub) so both use the same h
    and tau, then reports the worst violation of u_{k+1} <= u_k over
    shared nodes, per ladder rung.  Comparison at equal lattice spacing
    is exact up to Newton tolerance.
    """
    coarse = maximal_solution(domain, law, k, m_ladder=m_ladder,
                              nsub=2 * int(nsub), bbox=bbox)
    fine = maximal_solution(domain, law, k + 1, m_ladder=m_ladder,
                            nsub=int(nsub), bbox=bbox)
    if abs(coarse.h - fine.h) > 1e-15:
        raise AssertionError("level lattices failed to align")
    tau = coarse.h ** 2
    worst = []
    for r in range(len(coarse.m_ladder)):
        table = {}
        for gf, lat in zip(fine.rungs[r], fine.lattices):
            base_t = int(round(gf.meta["a"] / tau))
            for j in range(1, gf.times.size):
                for flat in np.flatnonzero(lat.interior.ravel()):
                    loc = np.unravel_index(flat, lat.nshape)
                    key = tuple(int(o + i) for o, i in zip(lat.offset, loc))
                    table[key + (base_t + j,)] = gf.values[loc + (j,)]
        v = 0.0
        shared = 0
        for gf, lat in zip(coarse.rungs[r], coarse.lattices):
            base_t = int(round(gf.meta["a"] / tau))
            for j in range(1, gf.times.size):
                for flat in np.flatnonzero(lat.interior.ravel()):
                    loc = np.unravel_index(flat, lat.nshape)
                    key = tuple(int(o + i) for o, i in zip(lat.offset, loc)) \
                        + (base_t + j,)
                    if key in table:
                        shared += 1
                        v = max(v, table[key] - gf.values[loc + (j,)])
        worst.append(v)
    return {"violations": worst, "max_violation": max(worst),
            "shared_nodes": shared, "h": coarse.h}


def blowup_profile(domain, law, point, deltas, k=3, nsub=2, m_ladder=None,
                   ms=None, bbox=None):
    """Infima of the computed solution over O cap Q_delta(point).

    The sequence is the operational notion of blow-up at the point:
    nondecreasing as delta shrinks by inclusion; an empty intersection
    at small delta is flagged rather than silently skipped.
    """
    x = np.atleast_1d(np.asarray(point[0], float))
    t = float(point[1])
    par = geometry.is_parabolic_boundary_point(domain, x, t)
    if par is False:
        raise ValueError("point is not a parabolic boundary point")
    if ms is None:
        ms = maximal_solution(domain, law, k, m_ladder=m_ladder, nsub=nsub,
                              bbox=bbox)
    px, pt, vals = ms.interior_points()
    infima, empty = [], []
    for d in deltas:
        d = float(d)
        sel = (np.sum((px - x) ** 2, axis=1) < d * d) \
            & (pt > t - d * d) & (pt <= t + 1e-12)
        if sel.any():
            infima.append(float(np.min(vals[sel])))
            empty.append(False)
        else:
            infima.append(math.nan)
            empty.append(True)
    notes = {"deltas": [float(d) for d in deltas], "empty": empty,
             "boundary_check": par, "k": ms.k, "h": ms.h}
    return np.array(infima), notes


def smoothed_density(measure, sigma, axes, times):
    """Product-tent smoothing of an atomic measure on a tensor grid.

    Each atom spreads over width sigma in space and sigma^2 in time with
    unit integral, so lattice sums approximate the atom masses.
    """
    sigma = float(sigma)
    grids = np.meshgrid(*axes, times, indexing="ij")
    out = np.zeros(grids[0].shape)
    for i in range(measure.natoms):
        dens = np.ones_like(out) * measure.m[i]
        for d in range(measure.dim):
            s = np.maximum(1.0 - np.abs(grids[d] - measure.x[i, d]) / sigma,
                           0.0) / sigma
            dens = dens * s
        st = np.maximum(1.0 - np.abs(grids[-1] - measure.t[i]) / sigma ** 2,
                        0.0) / sigma ** 2
        out += dens * st
    return out


def _exp_precondition(measure, R):
    """Fixed-lattice integrability proxy for the exponential law: the
    window average of exp(C1 * truncated riesz) over Qtilde_R must stay
    below EXP_MD_BOUND; atoms with large mass fail by orders of
    magnitude while unit-mass data pass with a wide margin."""
    if measure.natoms == 0:
        return 0.0
    c1 = potentials.calibrate_C1(measure.dim)
    stat = potentials.exp_integrability(
        measure, 2.0 * R, c=c1,
        windows=[(np.zeros(measure.dim), 0.0, R)], n_side=8)
    return float(stat[0])


def measure_data_solve(measure, law, R, h, sigma, verify_nodes=128, seed=0):
    """Zero-data problem on Qtilde_R(0,0) driven by the smoothed measure.

    Solves u_t - Lap u + g(u) = mu_sigma with u = 0 on the parabolic
    boundary (lateral ball and bottom).  The meta block records the
    calibrated potential-floor check at sampled interior nodes: the
    truncated-potential lower envelope must not exceed the solution.
    """
    if law.kind not in ("power", "exponential") and law.has_gradient:
        raise ValueError("measure-data problems support power, exponential "
                         "and gradient-free scaled-power absorption")
    R, h, sigma = float(R), float(h), float(sigma)
    if sigma < 2.0 * h:
        raise ValueError("smoothing width must be at least 2h")
    N = measure.dim
    if law.kind == "exponential":
        stat = _exp_precondition(measure, R)
        if stat > EXP_MD_BOUND:
            raise IntegrabilityError(
                f"integrability proxy {stat:.3g} exceeds {EXP_MD_BOUND}")
    n = int(round(2.0 * R / h))
    if abs(n * h - 2.0 * R) > 1e-10 * R or n < 4:
        raise ValueError("2R must be a multiple of h")
    axes = tuple(-R + h * np.arange(n + 1) for _ in range(N))
    tau = h * h
    nt = int(round(2.0 * R * R / tau))
    if abs(nt * tau - 2.0 * R * R) > 1e-10 * R * R:
        raise ValueError("2R^2 must be a multiple of h^2")
    times = -R * R + tau * np.arange(nt + 1)
    grids = np.meshgrid(*axes, indexing="ij")
    rad2 = np.zeros(grids[0].shape)
    for g in grids:
        rad2 += g * g
    interior = rad2 < (R - 1e-12) ** 2
    source3 = smoothed_density(measure, sigma, axes, times)
    stepper = _Stepper(interior, h, tau, law, m=0.0)
    values = np.zeros(interior.shape + (nt + 1,))
    u = np.zeros(int(interior.sum()))
    res_abs = res_scaled = 0.0
    for j in range(1, nt + 1):
        rhs0 = u + tau * source3[..., j][interior]
        u, ra, rs, _ = stepper.step(u, rhs0)
        plane = np.zeros(interior.shape)
        plane[interior] = u
        values[..., j] = plane
        res_abs, res_scaled = max(res_abs, ra), max(res_scaled, rs)
    mass_disc = float(source3.sum() * h ** N * tau)
    meta = {"interior": interior, "R": R, "sigma": sigma,
            "law_kind": law.kind, "residual_abs": res_abs,
            "residual_scaled": res_scaled, "mass_discrete": mass_disc,
            "mass_atoms": float(measure.total_mass)}
    gf = GridFunction(axes, times, values, h, tau, meta)
    if verify_nodes and measure.natoms \
            and law.kind in ("power", "exponential"):
        rng = np.random.default_rng(seed)
        px, pt, uu = _sample_grid_interior(gf, interior, rng, verify_nodes)
        if law.kind == "power":
            est = potentials.est_u_lower(measure, px, pt, law.q, R)
        else:
            est = potentials.est_v_lower(measure, px, pt, R)
        margin = uu - np.asarray(est, float)
        meta["floor_check"] = {"n": int(pt.size),
                               "min_margin": float(np.min(margin)),
                               "ok": bool(np.min(margin) >= -1e-9)}
    return gf


def _sample_grid_interior(gf, interior, rng, n):
    """Random interior nodes at positive times of a measure-data grid."""
    N = len(gf.axes)
    locs = np.argwhere(interior)
    pick = rng.integers(0, locs.shape[0], size=n)
    jt = rng.integers(1, gf.times.size, size=n)
    loc = locs[pick]
    px = np.stack([gf.axes[d][loc[:, d]] for d in range(N)], axis=1)
    pt = gf.times[jt]
    uu = gf.values[tuple(loc.T) + (jt,)]
    return px, pt, uu


def hj_solve(domain, a, p, b, q, k, m_ladder=None, nsub=2, bbox=None,
             verify_ceiling=True):
    """Gradient-absorption variant of the slab-chain construction.

    The first-order term a*|grad u|^p enters through the upwind stencil
    inside each implicit step; a = 0 degenerates to the power law along
    the identical code path.  With verify_ceiling a paired power-law
    chain runs at the scaled ladder b^(1/(q-1))*m, whose transform
    b^(-1/(q-1))*u is a discrete supersolution with the same lateral
    value m, so the nodewise ceiling is exact up to Newton tolerance;
    the worst signed excess lands in diagnostics["ceiling_violation"].
    """
    law = hamilton_jacobi_law(a, p, b, q)
    ms = maximal_solution(domain, law, k, m_ladder=m_ladder, nsub=nsub,
                          bbox=bbox)
    if verify_ceiling:
        fac = float(b) ** (-1.0 / (q - 1.0))
        ceiling = maximal_solution(
            domain, power_law(q), k,
            m_ladder=tuple(m / fac for m in ms.m_ladder),
            nsub=nsub, bbox=bbox)
        viol = -math.inf
        for r in range(len(ms.m_ladder)):
            for gv, gu in zip(ms.rungs[r], ceiling.rungs[r]):
                d = gv.values - fac * gu.values
                fin = np.isfinite(d)
                if fin.any():
                    viol = max(viol, float(np.max(d[fin])))
        ms.diagnostics["ceiling_violation"] = viol
        ms.diagnostics["ceiling_factor"] = fac
        ms.diagnostics["ceiling_ok"] = bool(viol <= 1e-9)
    return ms


def discrete_residual(gf, law, source=None):
    """Backward-Euler residual of a slab grid, same stencils as the solver.

    Returns an array over (nodes, steps 1..nsteps): (u_j - u_{j-1})/tau
    - Lap_h u_j + g(u_j) - f_j at interior nodes, NaN elsewhere, so
    "discrete (sub/super)solution" means a sign condition on this array.
    """
    interior = gf.meta["interior"]
    h, tau = gf.h, gf.ht
    nd = interior.ndim
    nsteps = gf.times.size - 1
    out = np.full(interior.shape + (nsteps,), np.nan)
    for j in range(1, nsteps + 1):
        u = gf.values[..., j]
        lap = np.zeros_like(u)
        for d in range(nd):
            to = [slice(1, -1)] * nd
            up = list(to)
            dn = list(to)
            up[d] = slice(2, None)
            dn[d] = slice(None, -2)
            lap[tuple(to)] += (u[tuple(up)] + u[tuple(dn)]
                               - 2.0 * u[tuple(to)]) / (h * h)
        res = (u - gf.values[..., j - 1]) / tau - lap + law.g(u)
        if law.has_gradient:
            filled = np.where(np.isfinite(u), u, gf.meta["lateral_value"])
            G, _, _, _ = _godunov(filled, h, law.p)
            res = res + law.a * G
        if source is not None:
            res = res - source[..., j]
        plane = np.full(interior.shape, np.nan)
        plane[interior] = res[interior]
        out[..., j - 1] = plane
    return out


def interior_bound_fit(ms, max_samples=1500, seed=0):
    """Single-constant fit of the interior barrier bound.

    Power law: C = max u * d^(2/(q-1)); exponential: C = max of
    u + log(d^3/(4+d^2)); d is the discrete parabolic distance to the
    lateral/fresh-bottom node cloud of the exhaustion.
    """
    rng = np.random.default_rng(seed)
    bx, bt = [], []
    for gf, lat, fr in zip(ms.final, ms.lattices, ms.fresh):
        lateral = lat.nodemask & ~lat.interior
        grids = np.meshgrid(*lat.axes(), indexing="ij")
        for j in range(1, gf.times.size):
            bx.append(np.stack([g[lateral] for g in grids], axis=1))
            bt.append(np.full(int(lateral.sum()), gf.times[j]))
        plane = fr & lat.nodemask
        if plane.any():
            bx.append(np.stack([g[plane] for g in grids], axis=1))
            bt.append(np.full(int(plane.sum()), gf.times[0]))
    bx = np.concatenate(bx)
    bt = np.concatenate(bt)
    if bx.shape[0] > 20000:
        pick = rng.choice(bx.shape[0], 20000, replace=False)
        bx, bt = bx[pick], bt[pick]
    px, pt, vals = ms.interior_points()
    if px.shape[0] > max_samples:
        pick = rng.choice(px.shape[0], max_samples, replace=False)
        px, pt, vals = px[pick], pt[pick], vals[pick]
    dists = np.empty(pt.size)
    for i in range(pt.size):
        past = bt <= pt[i] + 1e-12
        if not past.any():
            dists[i] = math.inf
            continue
        dx = np.sqrt(np.sum((bx[past] - px[i]) ** 2, axis=1))
        dt = np.sqrt(np.maximum(pt[i] - bt[past], 0.0))
        dists[i] = float(np.min(np.maximum(dx, dt)))
    if ms.law.kind == "exponential":
        cfit = float(np.max(vals + np.log(dists ** 3 / (4.0 + dists ** 2))))
    else:
        q = ms.law.q
        cfit = float(np.max(vals * dists ** (2.0 / (q - 1.0))))
    return {"C_fit": cfit, "d": dists, "u": vals, "n": int(pt.size)}
