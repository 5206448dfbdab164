"""Space-time geometry for non-cylindrical parabolic domains.

Regions are open subsets of R^N x R built from primitives by union,
intersection and complement (complement is taken of the closure, so the
result is open).  Every region exposes a pointwise margin function
(negative strictly inside, positive strictly outside the closure) and a
certified interval enclosure of that margin over axis-aligned space-time
boxes.  Interval bounds are sound and monotone under box refinement:
Hi < 0 certifies box inside the region, Lo > 0 certifies the closed box
disjoint from the closure.  Exhaustion, nonemptiness certification,
volume bounds and parabolic distances are built on top of that.
"""

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

MAX_BOXES = 200_000
NONEMPTY_BUDGET = 1_500_000
BEAM = 64


def r_k(k):
    """Dyadic parabolic radii 4^-k."""
    return 4.0 ** (-np.asarray(k, dtype=float))


def parabolic_metric(x1, t1, x2, t2):
    """max(|x1 - x2|, sqrt|t1 - t2|); inputs broadcast over leading axes."""
    x1 = np.asarray(x1, float)
    x2 = np.asarray(x2, float)
    dx = np.sqrt(np.sum((x1 - x2) ** 2, axis=-1))
    return np.maximum(dx, np.sqrt(np.abs(np.asarray(t1, float) - np.asarray(t2, float))))


def _slab_margin(t, t0, t1):
    return np.maximum(t0 - t, t - t1)


def _slab_interval(lot, hit, t0, t1):
    # V-shaped margin in t alone: exact min at the clamped vertex, max at endpoints
    mid = 0.5 * (t0 + t1)
    tc = np.clip(mid, lot, hit)
    lo = _slab_margin(tc, t0, t1)
    hi = np.maximum(_slab_margin(lot, t0, t1), _slab_margin(hit, t0, t1))
    return lo, hi


def _dist_interval(lox, hix, c):
    # range of |x - c| over the box [lox, hix]: both ends exact
    cc = np.clip(c, lox, hix)
    dmin = np.sqrt(np.sum((cc - c) ** 2, axis=-1))
    far = np.maximum(np.abs(lox - c), np.abs(hix - c))
    dmax = np.sqrt(np.sum(far ** 2, axis=-1))
    return dmin, dmax


def _radial_hints(lox, hix, c):
    # per-end split axes for |x - c| over a box: the far corner moves fastest
    # along the axis with the largest offset*width product; the clamped near
    # point likewise, floored so center-straddling axes still get refined
    w = hix - lox
    far = np.maximum(np.abs(lox - c), np.abs(hix - c))
    near = np.maximum(np.maximum(lox - c, c - hix), 0.0)
    ax_far = np.argmax(far * w, axis=-1)
    ax_near = np.argmax(w * np.maximum(near, 0.25 * w), axis=-1)
    return ax_far, ax_near


class Region:
    """Base class; subclasses set .dim and implement margin / margin_interval."""

    dim = None

    def margin(self, px, pt):
        raise NotImplementedError

    def margin_interval(self, lox, hix, lot, hit):
        raise NotImplementedError

    def interval_hints(self, lox, hix, lot, hit):
        """Margin interval plus, per box, the axis that controls each end.

        Returns (lo, hi, axlo, axhi) where refining axis axhi is the most
        direct route to pushing hi below zero (inside certificate) and axlo
        the route to pushing lo above zero (outside certificate).  Axes are
        0..dim-1 spatial, dim is time.  Default: largest scaled extent."""
        lo, hi = self.margin_interval(lox, hix, lot, hit)
        ext = np.concatenate([hix - lox,
                              np.sqrt(np.maximum(hit - lot, 0.0))[:, None]], axis=1)
        ax = np.argmax(ext, axis=1)
        return lo, hi, ax, ax

    def bbox(self):
        """Bounding box (lox, hix, lot, hit) of the region, or None if unbounded."""
        return None

    def anchor_points(self):
        """Representative points on closures of lower-dimensional pieces."""
        return np.zeros((0, self.dim)), np.zeros((0,))

    def contains(self, px, pt):
        return self.margin(np.asarray(px, float), np.asarray(pt, float)) < 0.0


@dataclass
class BallCylinder(Region):
    """B_r(center) x (t0, t1]."""

    center: np.ndarray
    r: float
    t0: float
    t1: float

    def __post_init__(self):
        self.center = np.asarray(self.center, float)
        self.dim = self.center.shape[0]

    def margin(self, px, pt):
        d = np.sqrt(np.sum((np.asarray(px, float) - self.center) ** 2, axis=-1))
        return np.maximum(d - self.r, _slab_margin(np.asarray(pt, float), self.t0, self.t1))

    def margin_interval(self, lox, hix, lot, hit):
        dmin, dmax = _dist_interval(lox, hix, self.center)
        tlo, thi = _slab_interval(lot, hit, self.t0, self.t1)
        # spatial and temporal terms depend on disjoint variables: exact
        return np.maximum(dmin - self.r, tlo), np.maximum(dmax - self.r, thi)

    def interval_hints(self, lox, hix, lot, hit):
        dmin, dmax = _dist_interval(lox, hix, self.center)
        tlo, thi = _slab_interval(lot, hit, self.t0, self.t1)
        ax_far, ax_near = _radial_hints(lox, hix, self.center)
        lo_r = dmin - self.r
        hi_r = dmax - self.r
        # a branch can certify outside only if its sup is positive, inside
        # only if its inf is negative; route hints through viable branches
        axhi = np.where((tlo < 0) & ((lo_r >= 0) | (thi >= hi_r)), self.dim, ax_far)
        axlo = np.where((thi > 0) & ((hi_r <= 0) | (tlo >= lo_r)), self.dim, ax_near)
        ach_in = (lo_r < 0) & (tlo < 0)
        ach_out = (hi_r > 0) | (thi > 0)
        axhi, axlo = (np.where(ach_in, axhi, axlo),
                      np.where(ach_out, axlo, np.where(ach_in, axhi, ax_far)))
        return np.maximum(lo_r, tlo), np.maximum(hi_r, thi), axlo, axhi

    def bbox(self):
        return self.center - self.r, self.center + self.r, self.t0, self.t1


@dataclass
class BoxRegion(Region):
    """Open spatial box prod (a_i, b_i) times (t0, t1]."""

    a: np.ndarray
    b: np.ndarray
    t0: float
    t1: float

    def __post_init__(self):
        self.a = np.asarray(self.a, float)
        self.b = np.asarray(self.b, float)
        self.dim = self.a.shape[0]

    def margin(self, px, pt):
        px = np.asarray(px, float)
        m = np.max(np.maximum(self.a - px, px - self.b), axis=-1)
        return np.maximum(m, _slab_margin(np.asarray(pt, float), self.t0, self.t1))

    def margin_interval(self, lox, hix, lot, hit):
        los, his = [], []
        for i in range(self.dim):
            lo_i, hi_i = _slab_interval(lox[..., i], hix[..., i], self.a[i], self.b[i])
            los.append(lo_i)
            his.append(hi_i)
        lo_t, hi_t = _slab_interval(lot, hit, self.t0, self.t1)
        los.append(lo_t)
        his.append(hi_t)
        # every term depends on its own coordinate: max of exact intervals is exact
        return np.max(np.stack(los), axis=0), np.max(np.stack(his), axis=0)

    def interval_hints(self, lox, hix, lot, hit):
        los, his = [], []
        for i in range(self.dim):
            lo_i, hi_i = _slab_interval(lox[..., i], hix[..., i], self.a[i], self.b[i])
            los.append(lo_i)
            his.append(hi_i)
        lo_t, hi_t = _slab_interval(lot, hit, self.t0, self.t1)
        los.append(lo_t)
        his.append(hi_t)
        los = np.stack(los)
        his = np.stack(his)
        # term i lives on axis i, term dim on time: binding term names its
        # axis, but only branches that can still flip sign are viable
        axhi_raw = np.argmax(his, axis=0)
        s_lo = np.where(his > 0, los, -np.inf)
        axlo = np.where(np.any(his > 0, axis=0), np.argmax(s_lo, axis=0), axhi_raw)
        axhi = np.where(np.all(los < 0, axis=0), axhi_raw, axlo)
        return np.max(los, axis=0), np.max(his, axis=0), axlo, axhi

    def bbox(self):
        return self.a.copy(), self.b.copy(), self.t0, self.t1


@dataclass
class Ellipsoid(Region):
    """{ |x - center|^2 + (t - tc)^2 / lam < 1 }."""

    center: np.ndarray
    tc: float
    lam: float

    def __post_init__(self):
        self.center = np.asarray(self.center, float)
        self.dim = self.center.shape[0]

    def margin(self, px, pt):
        px = np.asarray(px, float)
        r2 = np.sum((px - self.center) ** 2, axis=-1)
        return r2 + (np.asarray(pt, float) - self.tc) ** 2 / self.lam - 1.0

    def margin_interval(self, lox, hix, lot, hit):
        cc = np.clip(self.center, lox, hix)
        lo = np.sum((cc - self.center) ** 2, axis=-1)
        far = np.maximum(np.abs(lox - self.center), np.abs(hix - self.center))
        hi = np.sum(far ** 2, axis=-1)
        tc = np.clip(self.tc, lot, hit)
        lo = lo + (tc - self.tc) ** 2 / self.lam
        hi = hi + np.maximum(np.abs(lot - self.tc), np.abs(hit - self.tc)) ** 2 / self.lam
        # separable quadratic: clamped center and farthest corner are exact
        return lo - 1.0, hi - 1.0

    def interval_hints(self, lox, hix, lot, hit):
        lo, hi = self.margin_interval(lox, hix, lot, hit)
        w = hix - lox
        far = np.maximum(np.abs(lox - self.center), np.abs(hix - self.center))
        near = np.maximum(np.maximum(lox - self.center, self.center - hix), 0.0)
        wt = (hit - lot)[:, None]
        tf = np.maximum(np.abs(lot - self.tc), np.abs(hit - self.tc))[:, None]
        tn = np.maximum(np.maximum(lot - self.tc, self.tc - hit), 0.0)[:, None]
        # quadratic smear per axis, time weighted by 1/lam
        s_hi = np.concatenate([far * w, tf * wt / self.lam], axis=1)
        s_lo = np.concatenate([w * np.maximum(near, 0.25 * w),
                               wt * np.maximum(tn, 0.25 * wt) / self.lam], axis=1)
        return lo, hi, np.argmax(s_lo, axis=1), np.argmax(s_hi, axis=1)

    def bbox(self):
        s = math.sqrt(self.lam)
        return self.center - 1.0, self.center + 1.0, self.tc - s, self.tc + s


@dataclass
class Halfspace(Region):
    """{ a . x + b t < c }."""

    a: np.ndarray
    b: float
    c: float

    def __post_init__(self):
        self.a = np.asarray(self.a, float)
        self.dim = self.a.shape[0]

    def margin(self, px, pt):
        return np.asarray(px, float) @ self.a + self.b * np.asarray(pt, float) - self.c

    def margin_interval(self, lox, hix, lot, hit):
        pos = self.a > 0
        lo = lox @ np.where(pos, self.a, 0.0) + hix @ np.where(pos, 0.0, self.a)
        hi = hix @ np.where(pos, self.a, 0.0) + lox @ np.where(pos, 0.0, self.a)
        if self.b > 0:
            lo = lo + self.b * lot
            hi = hi + self.b * hit
        else:
            lo = lo + self.b * hit
            hi = hi + self.b * lot
        return lo - self.c, hi - self.c

    def interval_hints(self, lox, hix, lot, hit):
        lo, hi = self.margin_interval(lox, hix, lot, hit)
        s = np.concatenate([np.abs(self.a)[None, :] * (hix - lox),
                            (abs(self.b) * (hit - lot))[:, None]], axis=1)
        ax = np.argmax(s, axis=1)
        return lo, hi, ax, ax


@dataclass
class PointSet(Region):
    """Single space-time point; empty interior, margin never negative.
    Useful through complement(): the punctured space."""

    x0: np.ndarray
    t0: float

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, float)
        self.dim = self.x0.shape[0]

    def margin(self, px, pt):
        return parabolic_metric(np.asarray(px, float), np.asarray(pt, float), self.x0, self.t0)

    def margin_interval(self, lox, hix, lot, hit):
        dmin, dmax = _dist_interval(lox, hix, self.x0)
        g = np.abs(np.asarray(lot, float) - self.t0)
        h = np.abs(np.asarray(hit, float) - self.t0)
        inside = (lot <= self.t0) & (self.t0 <= hit)
        tmin = np.where(inside, 0.0, np.minimum(g, h))
        tmax = np.maximum(g, h)
        return np.maximum(dmin, np.sqrt(tmin)), np.maximum(dmax, np.sqrt(tmax))

    def interval_hints(self, lox, hix, lot, hit):
        lo, hi = self.margin_interval(lox, hix, lot, hit)
        dmin, dmax = _dist_interval(lox, hix, self.x0)
        ax_far, ax_near = _radial_hints(lox, hix, self.x0)
        # empty interior: only outside certificates exist, both hints track lo
        axlo = np.where(dmin >= lo, ax_near, self.dim)
        return lo, hi, axlo, axlo.copy()

    def anchor_points(self):
        return self.x0[None, :], np.array([self.t0])


@dataclass
class Union(Region):
    parts: tuple

    def __post_init__(self):
        self.dim = self.parts[0].dim

    def margin(self, px, pt):
        return np.min(np.stack([p.margin(px, pt) for p in self.parts]), axis=0)

    def margin_interval(self, lox, hix, lot, hit):
        los, his = zip(*[p.margin_interval(lox, hix, lot, hit) for p in self.parts])
        return np.min(np.stack(los), axis=0), np.min(np.stack(his), axis=0)

    def interval_hints(self, lox, hix, lot, hit):
        los, his, axlos, axhis = zip(*[p.interval_hints(lox, hix, lot, hit)
                                       for p in self.parts])
        los = np.stack(los)
        his = np.stack(his)
        axlos = np.stack(axlos)
        axhis = np.stack(axhis)
        ilo = np.argmin(los, axis=0)
        j = np.arange(lox.shape[0])
        # inside needs one part below zero, outside needs all parts above;
        # follow the viable binding part for each end
        s_hi = np.where(los < 0, his, np.inf)
        ihi = np.argmin(s_hi, axis=0)
        axhi_raw = axhis[ihi, j]
        axlo_raw = axlos[ilo, j]
        ach_in = np.any(los < 0, axis=0)
        ach_out = np.all(his > 0, axis=0)
        axhi = np.where(ach_in, axhi_raw, axlo_raw)
        axlo = np.where(ach_out, axlo_raw, axhi)
        return los[ilo, j], np.min(his, axis=0), axlo, axhi

    def bbox(self):
        bs = [p.bbox() for p in self.parts]
        if any(b is None for b in bs):
            return None
        lox = np.min(np.stack([b[0] for b in bs]), axis=0)
        hix = np.max(np.stack([b[1] for b in bs]), axis=0)
        return lox, hix, min(b[2] for b in bs), max(b[3] for b in bs)

    def anchor_points(self):
        xs, ts = zip(*[p.anchor_points() for p in self.parts])
        return np.concatenate(xs), np.concatenate(ts)


@dataclass
class Intersection(Region):
    parts: tuple

    def __post_init__(self):
        self.dim = self.parts[0].dim

    def margin(self, px, pt):
        return np.max(np.stack([p.margin(px, pt) for p in self.parts]), axis=0)

    def margin_interval(self, lox, hix, lot, hit):
        los, his = zip(*[p.margin_interval(lox, hix, lot, hit) for p in self.parts])
        return np.max(np.stack(los), axis=0), np.max(np.stack(his), axis=0)

    def interval_hints(self, lox, hix, lot, hit):
        los, his, axlos, axhis = zip(*[p.interval_hints(lox, hix, lot, hit)
                                       for p in self.parts])
        los = np.stack(los)
        his = np.stack(his)
        axlos = np.stack(axlos)
        axhis = np.stack(axhis)
        ihi = np.argmax(his, axis=0)
        j = np.arange(lox.shape[0])
        # outside needs one part above zero, inside needs all parts below;
        # follow the viable binding part for each end
        s_lo = np.where(his > 0, los, -np.inf)
        ilo = np.argmax(s_lo, axis=0)
        axlo_raw = axlos[ilo, j]
        axhi_raw = axhis[ihi, j]
        ach_out = np.any(his > 0, axis=0)
        ach_in = np.all(los < 0, axis=0)
        axlo = np.where(ach_out, axlo_raw, axhi_raw)
        axhi = np.where(ach_in, axhi_raw, axlo)
        return np.max(los, axis=0), his[ihi, j], axlo, axhi

    def bbox(self):
        bs = [p.bbox() for p in self.parts if p.bbox() is not None]
        if not bs:
            return None
        lox = np.max(np.stack([b[0] for b in bs]), axis=0)
        hix = np.min(np.stack([b[1] for b in bs]), axis=0)
        return lox, hix, max(b[2] for b in bs), min(b[3] for b in bs)

    def anchor_points(self):
        xs, ts = zip(*[p.anchor_points() for p in self.parts])
        return np.concatenate(xs), np.concatenate(ts)


@dataclass
class Complement(Region):
    """Complement of the closure of the inner region (an open set)."""

    inner: Region

    def __post_init__(self):
        self.dim = self.inner.dim

    def margin(self, px, pt):
        return -self.inner.margin(px, pt)

    def margin_interval(self, lox, hix, lot, hit):
        lo, hi = self.inner.margin_interval(lox, hix, lot, hit)
        return -hi, -lo

    def interval_hints(self, lox, hix, lot, hit):
        lo, hi, axlo, axhi = self.inner.interval_hints(lox, hix, lot, hit)
        # negation swaps which end each axis controls
        return -hi, -lo, axhi, axlo

    def anchor_points(self):
        return self.inner.anchor_points()


def ball_cylinder(center, r, t0, t1):
    return BallCylinder(np.asarray(center, float), float(r), float(t0), float(t1))


def box_region(a, b, t0, t1):
    return BoxRegion(np.asarray(a, float), np.asarray(b, float), float(t0), float(t1))


def ellipsoid(center, tc, lam):
    return Ellipsoid(np.asarray(center, float), float(tc), float(lam))


def halfspace(a, b, c):
    return Halfspace(np.asarray(a, float), float(b), float(c))


def point_set(x0, t0):
    return PointSet(np.asarray(x0, float), float(t0))


def union(*parts):
    return Union(tuple(parts))


def intersection(*parts):
    return Intersection(tuple(parts))


def complement(r):
    if isinstance(r, Complement):
        return r.inner
    return Complement(r)


def dilate_region(region, a):
    """Parabolic dilation {(a x, a^2 t) : (x, t) in region}, a > 0.

    Supported exactly for every primitive whose family is dilation-closed;
    ellipsoids are not (their time section scales linearly, not
    parabolically) and raise."""
    a = float(a)
    if a <= 0.0:
        raise ValueError("dilation factor must be positive")
    if isinstance(region, BallCylinder):
        return BallCylinder(a * region.center, a * region.r,
                            a * a * region.t0, a * a * region.t1)
    if isinstance(region, BoxRegion):
        return BoxRegion(a * region.a, a * region.b,
                         a * a * region.t0, a * a * region.t1)
    if isinstance(region, Halfspace):
        return Halfspace(region.a / a, region.b / (a * a), region.c)
    if isinstance(region, PointSet):
        return PointSet(a * region.x0, a * a * region.t0)
    if isinstance(region, Union):
        return Union(tuple(dilate_region(p, a) for p in region.parts))
    if isinstance(region, Intersection):
        return Intersection(tuple(dilate_region(p, a) for p in region.parts))
    if isinstance(region, Complement):
        return Complement(dilate_region(region.inner, a))
    raise TypeError(f"no parabolic dilation for {type(region).__name__}")


def Q(x, t, rho):
    """Past cylinder B_rho(x) x (t - rho^2, t]."""
    return ball_cylinder(x, rho, t - rho ** 2, t)


def Qtilde(x, t, rho):
    """Symmetric cylinder B_rho(x) x (t - rho^2, t + rho^2)."""
    return ball_cylinder(x, rho, t - rho ** 2, t + rho ** 2)


SUFF_R_FRAC = 1.0 / 30.0
SUFF_T_FAR = 30.0
SUFF_T_NEAR = 1.0
PROOF_R_FRAC = 1.0 / 16.0
PROOF_T_FAR = 73.5 / 256.0
PROOF_T_NEAR = 70.5 / 256.0


def necessary_window(domain, x, t, rho, clip=None):
    """Complement of the domain inside the past cylinder Q_rho(x, t)."""
    w = intersection(complement(domain), Q(x, t, rho))
    return intersection(w, clip) if clip is not None else w


def sufficient_window(domain, x, t, rho, clip=None):
    """Complement of the domain inside B_{rho/30}(x) x (t - 30 rho^2, t - rho^2)."""
    cyl = ball_cylinder(x, rho * SUFF_R_FRAC, t - SUFF_T_FAR * rho ** 2,
                        t - SUFF_T_NEAR * rho ** 2)
    w = intersection(complement(domain), cyl)
    return intersection(w, clip) if clip is not None else w


def proof_window(domain, x, t, rho, clip=None):
    """Complement slice B_{rho/16}(x) x [t - 73.5 (rho/16)^2, t - 70.5 (rho/16)^2]
    used by the lower-bound construction; rho plays the role of r_k."""
    rr = rho * PROOF_R_FRAC
    cyl = ball_cylinder(x, rr, t - PROOF_T_FAR * rho ** 2, t - PROOF_T_NEAR * rho ** 2)
    w = intersection(complement(domain), cyl)
    return intersection(w, clip) if clip is not None else w


@dataclass
class CellSet:
    lox: np.ndarray
    hix: np.ndarray
    lot: np.ndarray
    hit: np.ndarray

    @classmethod
    def empty(cls, dim):
        return cls(np.zeros((0, dim)), np.zeros((0, dim)), np.zeros(0), np.zeros(0))

    def __len__(self):
        return self.lot.shape[0]

    def volumes(self):
        return np.prod(self.hix - self.lox, axis=1) * (self.hit - self.lot)

    def centers(self):
        return 0.5 * (self.lox + self.hix), 0.5 * (self.lot + self.hit)

    def hull(self):
        if len(self) == 0:
            return None
        return (np.min(self.lox, axis=0), np.max(self.hix, axis=0),
                float(np.min(self.lot)), float(np.max(self.hit)))


def _split_cells(lox, hix, lot, hit):
    # halve each box along its largest parabolically scaled extent
    ext = np.concatenate([hix - lox, np.sqrt(np.maximum(hit - lot, 0.0))[:, None]], axis=1)
    ax = np.argmax(ext, axis=1)
    n, dim = lox.shape
    lo1, hi1 = lox.copy(), hix.copy()
    lo2, hi2 = lox.copy(), hix.copy()
    lt1, ht1 = lot.copy(), hit.copy()
    lt2, ht2 = lot.copy(), hit.copy()
    for d in range(dim):
        m = ax == d
        if np.any(m):
            mid = 0.5 * (lox[m, d] + hix[m, d])
            hi1[m, d] = mid
            lo2[m, d] = mid
    m = ax == dim
    if np.any(m):
        mid = 0.5 * (lot[m] + hit[m])
        ht1[m] = mid
        lt2[m] = mid
    return (np.concatenate([lo1, lo2]), np.concatenate([hi1, hi2]),
            np.concatenate([lt1, lt2]), np.concatenate([ht1, ht2]))


def _halve(lox, hix, lot, hit, ax):
    """Bisect each box along its assigned axis; returns the 2M children."""
    dim = lox.shape[1]
    clo = np.concatenate([lox, lox])
    chi = np.concatenate([hix, hix])
    clt = np.concatenate([lot, lot])
    cht = np.concatenate([hit, hit])
    K = lox.shape[0]
    idx = np.arange(K)
    for d in range(dim):
        s = ax == d
        if np.any(s):
            mid = 0.5 * (lox[s, d] + hix[s, d])
            chi[idx[s], d] = mid
            clo[K + idx[s], d] = mid
    s = ax == dim
    if np.any(s):
        mid = 0.5 * (lot[s] + hit[s])
        cht[idx[s]] = mid
        clt[K + idx[s]] = mid
    return clo, chi, clt, cht


def _split_adaptive(region, lox, hix, lot, hit, mode="cert"):
    """Split each box along the axes that control its margin interval.

    In "cert" mode the region tree reports which axis drives the interval's
    upper end (the obstacle to an inside certificate) and which drives the
    lower end (the obstacle to an outside certificate); a box splits on both
    when they differ.  In "extent" mode every box splits on its largest
    parabolically scaled extent, which forces diameter decay (better for
    volume brackets).  Returns children with evaluated intervals and a mask
    of unsplittable parents."""
    M, dim = lox.shape
    sp = np.empty((M, dim + 1), bool)
    for d in range(dim):
        mid = 0.5 * (lox[:, d] + hix[:, d])
        sp[:, d] = (mid > lox[:, d]) & (mid < hix[:, d])
    midt = 0.5 * (lot + hit)
    sp[:, dim] = (midt > lot) & (midt < hit)
    stuck = ~np.any(sp, axis=1)
    ext = np.concatenate([hix - lox,
                          np.sqrt(np.maximum(hit - lot, 0.0))[:, None]], axis=1)
    ext[~sp] = -np.inf
    fallback = np.argmax(ext, axis=1)
    j = np.arange(M)
    if mode == "extent":
        axhi = fallback
        axlo = fallback
    else:
        _, _, axlo, axhi = region.interval_hints(lox, hix, lot, hit)
        axhi = np.where(sp[j, axhi], axhi, fallback)
        axlo = np.where(sp[j, axlo], axlo, fallback)
    ok = ~stuck
    l1, h1, t1, u1 = _halve(lox[ok], hix[ok], lot[ok], hit[ok], axhi[ok])
    second = np.concatenate([axlo[ok] != axhi[ok]] * 2)
    ax2 = np.concatenate([axlo[ok]] * 2)
    parts = [(l1[~second], h1[~second], t1[~second], u1[~second])]
    if np.any(second):
        parts.append(_halve(l1[second], h1[second], t1[second], u1[second],
                            ax2[second]))
    clo = np.concatenate([p[0] for p in parts])
    chi = np.concatenate([p[1] for p in parts])
    clt = np.concatenate([p[2] for p in parts])
    cht = np.concatenate([p[3] for p in parts])
    lo, hi = region.margin_interval(clo, chi, clt, cht)
    return clo, chi, clt, cht, lo, hi, stuck


@dataclass
class ExhaustResult:
    inside: CellSet
    straddle: CellSet
    vol_in: float
    vol_straddle: float
    n_eval: int = 0

    @property
    def vol_hi(self):
        return self.vol_in + self.vol_straddle


def exhaust(region, bbox=None, max_cells=MAX_BOXES, min_scale=0.0, max_levels=60,
            mode="extent"):
    """Adaptive certification of the region over a root box.

    Returns certified-inside cells, unresolved straddle cells, and the
    volume bracket [vol_in, vol_in + vol_straddle] they imply.
    """
    if bbox is None:
        bbox = region.bbox()
    if bbox is None:
        raise ValueError("region is unbounded; pass an explicit bbox")
    lox0, hix0, lot0, hit0 = bbox
    dim = region.dim
    lox = np.asarray(lox0, float)[None, :].copy()
    hix = np.asarray(hix0, float)[None, :].copy()
    lot = np.array([float(lot0)])
    hit = np.array([float(hit0)])
    if lot[0] >= hit[0] or np.any(lox[0] >= hix[0]):
        return ExhaustResult(CellSet.empty(dim), CellSet.empty(dim), 0.0, 0.0, 0)
    in_parts = []
    parked = []
    lo, hi = region.margin_interval(lox, hix, lot, hit)
    n_eval = 1
    for _ in range(max_levels):
        inside = hi < 0.0
        outside = lo > 0.0
        strad = ~(inside | outside)
        if np.any(inside):
            in_parts.append((lox[inside], hix[inside], lot[inside], hit[inside]))
        lox, hix, lot, hit = lox[strad], hix[strad], lot[strad], hit[strad]
        if lot.shape[0] == 0:
            break
        scale = np.max(np.concatenate(
            [hix - lox, np.sqrt(np.maximum(hit - lot, 0.0))[:, None]], axis=1), axis=1)
        small = scale <= min_scale
        if np.any(small):
            parked.append((lox[small], hix[small], lot[small], hit[small]))
            lox, hix, lot, hit = lox[~small], hix[~small], lot[~small], hit[~small]
        if lot.shape[0] == 0 or 2 * lot.shape[0] > max_cells:
            break
        plox, phix, plot_, phit = lox, hix, lot, hit
        lox, hix, lot, hit, lo, hi, stuck = _split_adaptive(region, plox, phix,
                                                            plot_, phit, mode=mode)
        n_eval += plox.shape[0] + lot.shape[0]
        if np.any(stuck):
            # boxes at float granularity stay unresolved
            parked.append((plox[stuck], phix[stuck], plot_[stuck], phit[stuck]))
    if parked:
        lox = np.concatenate([lox] + [p[0] for p in parked])
        hix = np.concatenate([hix] + [p[1] for p in parked])
        lot = np.concatenate([lot] + [p[2] for p in parked])
        hit = np.concatenate([hit] + [p[3] for p in parked])
    if in_parts:
        ins = CellSet(np.concatenate([p[0] for p in in_parts]),
                      np.concatenate([p[1] for p in in_parts]),
                      np.concatenate([p[2] for p in in_parts]),
                      np.concatenate([p[3] for p in in_parts]))
    else:
        ins = CellSet.empty(dim)
    strads = CellSet(lox, hix, lot, hit)
    return ExhaustResult(ins, strads, float(np.sum(ins.volumes())),
                         float(np.sum(strads.volumes())), n_eval)


def volume_bounds(region, bbox=None, max_cells=MAX_BOXES, rel_tol=0.0):
    """Certified [lower, upper] bracket of the Lebesgue measure of the region.

    Refines the straddle cell with the largest volume first, so the budget
    concentrates where the bracket is loosest."""
    if bbox is None:
        bbox = region.bbox()
    if bbox is None:
        raise ValueError("region is unbounded; pass an explicit bbox")
    lox0, hix0, lot0, hit0 = bbox
    lox0 = np.asarray(lox0, float)
    hix0 = np.asarray(hix0, float)
    if float(lot0) >= float(hit0) or np.any(lox0 >= hix0):
        return 0.0, 0.0
    root_vol = float(np.prod(hix0 - lox0) * (hit0 - lot0))
    lo, hi = region.margin_interval(lox0[None, :], hix0[None, :],
                                    np.array([float(lot0)]), np.array([float(hit0)]))
    if hi[0] < 0:
        return root_vol, root_vol
    if lo[0] > 0:
        return 0.0, 0.0
    heap = [(-root_vol, 0, (lox0, hix0, float(lot0), float(hit0)))]
    count = itertools.count(1)
    vol_in = 0.0
    vol_park = 0.0
    vol_straddle = root_vol
    n_cells = 1
    while heap and n_cells < max_cells:
        k = min(BEAM, len(heap))
        batch = [heapq.heappop(heap) for _ in range(k)]
        vol_straddle += sum(b[0] for b in batch)
        plox = np.stack([b[2][0] for b in batch])
        phix = np.stack([b[2][1] for b in batch])
        plot_ = np.array([b[2][2] for b in batch])
        phit = np.array([b[2][3] for b in batch])
        lox, hix, lot, hit, lo, hi, stuck = _split_adaptive(region, plox, phix,
                                                            plot_, phit)
        if np.any(stuck):
            vol_park += float(np.sum(np.prod(phix[stuck] - plox[stuck], axis=1)
                                     * (phit[stuck] - plot_[stuck])))
        n_cells += lot.shape[0]
        vols = np.prod(hix - lox, axis=1) * (hit - lot)
        vol_in += float(np.sum(vols[hi < 0]))
        strad = (hi >= 0) & (lo <= 0)
        for i in np.nonzero(strad)[0]:
            heapq.heappush(heap, (-float(vols[i]), next(count),
                                  (lox[i], hix[i], float(lot[i]), float(hit[i]))))
            vol_straddle += float(vols[i])
        if rel_tol and vol_straddle + vol_park <= rel_tol * max(vol_in, root_vol * 1e-12):
            break
    return vol_in, vol_in + vol_straddle + vol_park


def region_nonempty(region, bbox=None, budget=NONEMPTY_BUDGET):
    """Certified nonemptiness: True if some box is proved inside the region,
    False if the whole root box is proved outside, None if unresolved."""
    if bbox is None:
        bbox = region.bbox()
    if bbox is None:
        raise ValueError("region is unbounded; pass an explicit bbox")
    lox0, hix0, lot0, hit0 = bbox
    if float(lot0) >= float(hit0) or np.any(np.asarray(lox0, float) >= np.asarray(hix0, float)):
        return False
    heap = []
    count = itertools.count()
    lo, hi = region.margin_interval(np.asarray(lox0, float)[None, :],
                                    np.asarray(hix0, float)[None, :],
                                    np.array([float(lot0)]), np.array([float(hit0)]))
    if hi[0] < 0:
        return True
    if lo[0] >= 0:
        return False
    # order by the interval upper end (how close the box is to an inside
    # certificate) and break ties newest-first so the search dives
    heapq.heappush(heap, (float(hi[0]), -next(count),
                          (np.asarray(lox0, float), np.asarray(hix0, float),
                           float(lot0), float(hit0))))
    n_eval = 1
    stuck_any = False
    while heap and n_eval < budget:
        k = min(BEAM, len(heap))
        batch = [heapq.heappop(heap)[2] for _ in range(k)]
        plox = np.stack([b[0] for b in batch])
        phix = np.stack([b[1] for b in batch])
        plot_ = np.array([b[2] for b in batch])
        phit = np.array([b[3] for b in batch])
        lox, hix, lot, hit, lo, hi, stuck = _split_adaptive(region, plox, phix, plot_, phit)
        n_eval += plox.shape[0] + lot.shape[0]
        stuck_any = stuck_any or bool(np.any(stuck))
        if lot.shape[0] and np.any(hi < 0):
            return True
        # cells with lo >= 0 hold no point of the open region: prune them
        keep = lo < 0
        for i in np.nonzero(keep)[0]:
            heapq.heappush(heap, (float(hi[i]), -next(count),
                                  (lox[i], hix[i], float(lot[i]), float(hit[i]))))
    if not heap and not stuck_any:
        return False
    return None


def occupied_bbox(region, bbox=None, levels=14, max_cells=MAX_BOXES):
    """Hull of all cells not certified outside after a bounded refinement.
    Returns None when everything is certified outside (empty region)."""
    if bbox is None:
        bbox = region.bbox()
    res = exhaust(region, bbox=bbox, max_cells=max_cells, max_levels=levels,
                  mode="cert")
    hulls = [c.hull() for c in (res.inside, res.straddle) if len(c)]
    if not hulls:
        return None
    lox = np.min(np.stack([h[0] for h in hulls]), axis=0)
    hix = np.max(np.stack([h[1] for h in hulls]), axis=0)
    return lox, hix, min(h[2] for h in hulls), max(h[3] for h in hulls)


def is_parabolic_boundary_point(domain, x, t, deltas=(0.5, 0.1, 0.02), tol=1e-9):
    """Check that (x, t) lies on the boundary and that every past cylinder
    Q_delta(x, t) meets the complement of the domain."""
    x = np.asarray(x, float)
    m = float(domain.margin(x[None, :], np.array([float(t)]))[0])
    if abs(m) > tol and m < 0:
        return False
    for d in deltas:
        w = intersection(complement(domain), Q(x, float(t), float(d)))
        ok = window_nonempty(w, bbox=Q(x, float(t), float(d)).bbox())
        if ok is False:
            return False
        if ok is None:
            return None
    return True


def window_nonempty(window, bbox=None, budget=NONEMPTY_BUDGET):
    """Nonemptiness of the window closure: anchor points of zero-volume
    pieces are checked directly, then open interior is certified."""
    ax, at = window.anchor_points()
    if at.shape[0]:
        m = window.margin(ax, at)
        if np.any(m <= 1e-12):
            return True
    return region_nonempty(window, bbox=bbox, budget=budget)


def parabolic_distance(domain, x, t, tol=1e-6, budget=NONEMPTY_BUDGET):
    """Parabolic distance from a point to the past part {s <= t} of the
    complement closure: inf of m such that O^c meets Q_m(x, t).  Equals the
    distance to the parabolic boundary for the domains considered here.
    Computed by bisection over certified window nonemptiness."""
    x = np.asarray(x, float)
    t = float(t)
    comp = complement(domain)
    d_anchor = math.inf
    aax, aat = comp.anchor_points()
    if aat.shape[0]:
        m = comp.margin(aax, aat)
        ok = (aat <= t) & (m <= 1e-12)
        if np.any(ok):
            d_anchor = float(np.min(parabolic_metric(aax[ok], aat[ok], x, t)))
    bb = domain.bbox()
    d_cap = None
    if bb is not None:
        span = float(np.max(bb[1] - bb[0])) + math.sqrt(max(bb[3] - bb[2], 0.0))
        d_cap = 2.0 * span + 1.0

    def hits(m):
        w = intersection(comp, Q(x, t, m))
        r = region_nonempty(w, bbox=Q(x, t, m).bbox(), budget=budget)
        return bool(r)  # unresolved counts as empty, biasing the bound upward

    hi = max(8.0 * tol, 1e-3)
    while not hits(hi):
        hi *= 2.0
        if (d_cap is not None and hi > d_cap) or hi > 1e12:
            return d_anchor
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if hits(mid):
            hi = mid
        else:
            lo = mid
    return min(d_anchor, 0.5 * (lo + hi))


def cell_intervals(region, axes, times):
    """Margin intervals of the region over all cells of a tensor grid.
    Returns (Lo, Hi) shaped (n0-1, ..., nd-1, nt-1)."""
    dim = len(axes)
    los = [np.asarray(a, float)[:-1] for a in axes]
    his = [np.asarray(a, float)[1:] for a in axes]
    lot = np.asarray(times, float)[:-1]
    hit = np.asarray(times, float)[1:]
    LO = np.meshgrid(*los, lot, indexing="ij")
    HI = np.meshgrid(*his, hit, indexing="ij")
    shape = LO[0].shape
    lox = np.stack([g.ravel() for g in LO[:-1]], axis=1)
    hix = np.stack([g.ravel() for g in HI[:-1]], axis=1)
    lo, hi = region.margin_interval(lox, hix, LO[-1].ravel(), HI[-1].ravel())
    return lo.reshape(shape), hi.reshape(shape)


def sample_interior(region, n, rng, bbox=None, max_tries=200):
    """Rejection-sample n points of the region; raises if acceptance is too low."""
    if bbox is None:
        bbox = region.bbox()
    if bbox is None:
        raise ValueError("region is unbounded; pass an explicit bbox")
    lox, hix, lot, hit = bbox
    out_x, out_t = [], []
    got = 0
    for _ in range(max_tries):
        m = max(4 * (n - got), 64)
        px = rng.uniform(lox, hix, size=(m, region.dim))
        pt = rng.uniform(lot, hit, size=m)
        keep = region.contains(px, pt)
        out_x.append(px[keep])
        out_t.append(pt[keep])
        got += int(np.sum(keep))
        if got >= n:
            break
    if got < n:
        raise RuntimeError("interior sampling failed; region may be too thin")
    px = np.concatenate(out_x)[:n]
    pt = np.concatenate(out_t)[:n]
    return px, pt


def classify_point(region, x, t, tol=1e-9):
    """Trichotomy by the signed margin: interior, exterior, or boundary
    (|margin| <= tol resolves to boundary)."""
    x = np.atleast_1d(np.asarray(x, float))
    m = float(region.margin(x[None, :], np.array([float(t)]))[0])
    if m < -tol:
        return "interior"
    if m > tol:
        return "exterior"
    return "boundary"


EXH_MAX_CANDIDATES = 4_000_000


@dataclass(frozen=True)
class DyadicCube:
    """Closed dyadic parabolic cube: spatial side 2^-k, temporal side 4^-k,
    anchored at the global lattice (idx holds N spatial integers plus the
    time integer)."""

    k: int
    idx: tuple

    @property
    def side(self):
        return 2.0 ** (-self.k)

    @property
    def tside(self):
        return 4.0 ** (-self.k)

    def bounds(self):
        lox = np.array([m * self.side for m in self.idx[:-1]])
        return lox, lox + self.side, self.idx[-1] * self.tside, \
            (self.idx[-1] + 1) * self.tside

    def center(self):
        lox, hix, lot, hit = self.bounds()
        return 0.5 * (lox + hix), 0.5 * (lot + hit)

    def children(self):
        """The 2^(N+2) level-(k+1) cubes partitioning this cube."""
        out = []
        space = [(2 * m, 2 * m + 1) for m in self.idx[:-1]]
        for combo in itertools.product(*space):
            for jt in range(4):
                out.append(DyadicCube(self.k + 1,
                                      tuple(combo) + (4 * self.idx[-1] + jt,)))
        return out


@dataclass
class DyadicSlab:
    """One time slab of an exhaustion: the spatial cross-section is the
    union of the level-k spatial cubes listed in cells, over (a, a+span]."""

    tindex: int
    a: float
    span: float
    cells: np.ndarray


@dataclass
class Exhaustion:
    """Inner approximation of a region by level-k dyadic parabolic cubes,
    grouped into time slabs ordered by slab bottom."""

    region: Region
    k: int
    slabs: list

    @property
    def ncubes(self):
        return int(sum(s.cells.shape[0] for s in self.slabs))

    @property
    def volume(self):
        N = self.region.dim
        return self.ncubes * 2.0 ** (-self.k * N) * 4.0 ** (-self.k)

    def cube_set(self):
        out = set()
        for s in self.slabs:
            for row in s.cells:
                out.add(tuple(int(v) for v in row) + (s.tindex,))
        return out

    def cubes(self):
        return [DyadicCube(self.k, key) for key in sorted(self.cube_set())]


def dyadic_exhaustion(region, k, bbox=None):
    """Level-k dyadic parabolic cubes certified inside the open region,
    grouped into time slabs.

    A closed cube is accepted when the margin interval over the cube
    shrunk by an absolute epsilon certifies it inside the region; cubes
    whose closure merely touches the boundary are rejected.  The epsilon
    is fixed across levels (derived from the bounding box), so interval
    monotonicity under box inclusion makes the accepted sets nested:
    every accepted cube has all its children accepted at level k+1 when
    the same bbox is used.  Empty result signals that no cube fits."""
    if bbox is None:
        bbox = region.bbox()
    if bbox is None:
        raise ValueError("region has no bounding box; pass bbox explicitly")
    lox, hix, lot, hit = bbox
    k = int(k)
    side = 2.0 ** (-k)
    tside = 4.0 ** (-k)
    i_lo = np.floor(np.asarray(lox, float) / side - 1e-9).astype(int)
    i_hi = np.ceil(np.asarray(hix, float) / side + 1e-9).astype(int)
    j_lo = int(math.floor(lot / tside - 1e-9))
    j_hi = int(math.ceil(hit / tside + 1e-9))
    nspace = int(np.prod(i_hi - i_lo))
    ncand = nspace * max(j_hi - j_lo, 0)
    if ncand <= 0:
        return Exhaustion(region=region, k=k, slabs=[])
    if ncand > EXH_MAX_CANDIDATES:
        raise ValueError(f"level {k} needs {ncand} candidate cubes over this "
                         "bounding box; use a smaller level or tighter bbox")
    coords = np.concatenate([np.atleast_1d(lox), np.atleast_1d(hix),
                             [lot, hit]]).astype(float)
    eps = 1e-12 * max(1.0, float(np.max(np.abs(coords))))
    grids = np.meshgrid(*[np.arange(a, b) for a, b in zip(i_lo, i_hi)],
                        indexing="ij")
    sidx = np.stack([g.ravel() for g in grids], axis=1)
    slox = sidx * side + eps
    shix = (sidx + 1) * side - eps
    slabs = []
    for j in range(j_lo, j_hi):
        tlo = np.full(nspace, j * tside + eps)
        thi = np.full(nspace, (j + 1) * tside - eps)
        _, hi = region.margin_interval(slox, shix, tlo, thi)
        keep = hi < 0.0
        if np.any(keep):
            slabs.append(DyadicSlab(tindex=j, a=j * tside, span=tside,
                                    cells=sidx[keep].astype(np.int64)))
    return Exhaustion(region=region, k=k, slabs=slabs)
