"""Dyadic window series measuring boundary thickness of space-time domains.

For a domain O and a boundary point (x, t) each series sums a normalized
window size over the dyadic scale ladder rho_j = 2^-j,

    term_j = size(O^c cap W(rho_j)) / rho_j^N,

where the window W is a past cylinder Q_rho (necessary style), the offset
cylinder B_{rho/30}(x) x (t - 30 rho^2, t - rho^2) (sufficient styles), or
the thin slice used by the lower-bound construction (proof style), and the
size is a two-sided Sobolev capacity bracket, a parabolic Hausdorff content
bracket, or a Monte-Carlo volume surrogate.  Divergence of the sufficient
series certifies enough complement mass at every scale to force boundary
blow-up of the absorption problem; convergence of the necessary series
rules it out.  The dyadic sum times log 2 estimates the underlying
d(rho)/rho integral.

Terms are estimates at a declared resolution, not certified values: windows
whose nonemptiness cannot be certified are treated as empty (the
conservative side for the sufficient claim), and windows thinner than the
lattice are marked by a one-cell dilation, which inflates the upper column
by a scale-covariant factor.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import capacity, geometry
from .capacity import ProblemParams

J_MIN_DEFAULT = 2
J_MAX_DEFAULT = 12

# window lattice: spacing tracks rho_j (1/16 of the window radius), grids
# live on the certified occupied box of the window, nodes soft-capped
GRID_DIV = 16.0
PAD_FRAC = 0.25
NODE_SOFT = 120_000
BLOB_DIV = 24.0          # fallback spacing when the fine lattice overruns the cap
TIME_SLICES_MAX = 48
SERIES_MAXITER = 100
WINDOW_NONEMPTY_BUDGET = 300_000
OCC_LEVELS = 14

# ladder diagnosis; the two branches are disjoint because DIVERGE_TERM_MIN
# exceeds what the Cauchy branch can accept on a flat tail
CAUCHY_TAIL = 5
CAUCHY_TOL = 1e-2
DIVERGE_BETA_MAX = 1.05  # harmonic comparison with margin for 1/j tails
DIVERGE_TERM_MIN = 2e-2
MIN_FIT_POINTS = 3

VOL_MC_SAMPLES = 65536
VOL_MC_Z = 2.0

_STYLES = ("necessary", "sufficient_cap", "sufficient_hausdorff",
           "volume_supercritical", "volume_critical", "volume_hausdorff",
           "proofM_k")


def _window(domain, x, t, rho, style):
    if style == "necessary":
        return geometry.necessary_window(domain, x, t, rho), 1.0
    if style == "proofM_k":
        return geometry.proof_window(domain, x, t, rho), geometry.PROOF_R_FRAC
    return geometry.sufficient_window(domain, x, t, rho), geometry.SUFF_R_FRAC


def _prepare(domain, point, check_boundary):
    x = np.atleast_1d(np.asarray(point[0], float))
    t = float(point[1])
    if x.shape[0] != domain.dim:
        raise ValueError("point dimension does not match the domain")
    if not check_boundary:
        return x, t, "skipped"
    ok = geometry.is_parabolic_boundary_point(domain, x, t)
    if ok is False:
        raise ValueError("point fails the parabolic boundary test")
    return x, t, ("certified" if ok else "unresolved")


def _sufficient_hypothesis(params):
    """Range of exponents for which the sufficient capacity test applies."""
    if params.N < 2:
        raise ValueError("sufficient criterion needs N >= 2")
    qs = params.qstar
    if params.q < qs - 1e-12:
        raise ValueError("sufficient criterion needs q above (N+2)/N")
    if abs(params.q - qs) <= 1e-12 and params.N == 2:
        raise ValueError("critical exponent q = (N+2)/N needs N >= 3")


def _grid_plan(W, rho, frac, N):
    """Lattice for one window solve: spacing, time step, host box.

    The grid lives on the certified occupied box of the window, so thin
    windows (a tangency sliver inside a long cylinder) are resolved where
    the mass actually sits.  All lengths are proportional to rho for
    self-similar window families, keeping the ladder scale-covariant.
    Returns None when everything is certified outside."""
    occ = geometry.occupied_bbox(W, levels=OCC_LEVELS)
    if occ is None:
        return None
    lox, hix, lot, hit = occ
    ext = np.asarray(hix, float) - np.asarray(lox, float)
    t_ext = max(float(hit) - float(lot), 0.0)
    scale = max(float(np.max(ext)) if ext.size else 0.0, math.sqrt(t_ext))
    h = rho * frac / GRID_DIV

    def nspace(hh):
        pad = max(PAD_FRAC * scale, 3.0 * hh)
        return int(np.prod([math.ceil((ext[d] + 2.0 * pad) / hh)
                            for d in range(N)]))

    blob = False
    if nspace(h) > NODE_SOFT:
        # sub-resolution tube: the window is thinner than any affordable
        # lattice, fall back to a coarse covariant blob estimate
        h = max(scale / BLOB_DIV, h)
        blob = True
    ns = min(nspace(h), NODE_SOFT)
    nt_cap = max(8, min(TIME_SLICES_MAX, NODE_SOFT // max(ns, 1)))
    t_pad = max((PAD_FRAC * scale) ** 2, 3.0 * capacity.HT_FACTOR * h * h)
    ht = max(capacity.HT_FACTOR * h * h, (t_ext + 2.0 * t_pad) / nt_cap)
    gbox = geometry.box_region(lox, hix, float(lot), float(hit))
    return h, ht, gbox, blob


def _capacity_columns(W, rho, frac, params, maxiter):
    """One scale of the capacity ladders: primal upper and dual lower."""
    ne = geometry.window_nonempty(W, budget=WINDOW_NONEMPTY_BUDGET)
    if ne is not True:
        flag = "empty" if ne is False else "unresolved"
        return 0.0, 0.0, flag, {}
    plan = _grid_plan(W, rho, frac, params.N)
    if plan is None:
        return 0.0, 0.0, "empty", {}
    h, ht, gbox, blob = plan
    est = capacity.cap_upper_primal(W, params, h=h, ht=ht, grid_from=gbox,
                                    pad_frac=PAD_FRAC, maxiter=maxiter)
    lo = capacity.cap_lower_dual(geometry.intersection(W, gbox), params,
                                 R=rho / 2.0)
    info = {"nodes": est.notes.get("nodes"),
            "iterations": est.notes.get("iterations"),
            "natoms": lo.notes.get("natoms"),
            "blob": blob,
            "thin": bool(est.notes.get("thin_set_dilation"))}
    return float(est.upper), float(lo.lower), "ok", info


def _content_columns(W, rho):
    """One scale of the content ladders: cover upper and Frostman lower."""
    ne = geometry.window_nonempty(W, budget=WINDOW_NONEMPTY_BUDGET)
    if ne is not True:
        flag = "empty" if ne is False else "unresolved"
        return 0.0, 0.0, flag, {}
    occ = geometry.occupied_bbox(W, levels=OCC_LEVELS)
    if occ is None:
        return 0.0, 0.0, "empty", {}
    gbox = geometry.box_region(occ[0], occ[1], float(occ[2]), float(occ[3]))
    est = capacity.hausdorff_content(geometry.intersection(W, gbox), rho)
    info = {"method": est.method}
    return float(est.upper), float(est.lower), "ok", info


def _diagnose(terms, j_values):
    """Decision rule on a finite ladder, frozen so reports are reproducible.

    diverges: least-squares fit terms_j ~ c * j^-beta over the positive
    tail gives beta <= DIVERGE_BETA_MAX with the raw tail mean above
    DIVERGE_TERM_MIN (comparison against the harmonic edge).  converges:
    the last CAUCHY_TAIL increments of the partial sums all sit below
    CAUCHY_TOL * max(1, sum).  Everything else stays inconclusive."""
    terms = np.asarray(terms, float)
    jv = np.asarray(j_values, float)
    total = float(np.sum(terms))
    tail = terms[-CAUCHY_TAIL:]
    out = {"label": "inconclusive",
           "sum": total,
           "dyadic_integral_estimate": total * math.log(2.0),
           "tail_mean": float(np.mean(tail)) if tail.size else 0.0,
           "cauchy_max_increment": float(np.max(tail)) if tail.size else 0.0,
           "beta": None,
           "c_fit": None}
    if not terms.size:
        return out
    nfit = min(terms.size, max(MIN_FIT_POINTS + 1, terms.size // 2))
    tj, tt = jv[-nfit:], terms[-nfit:]
    pos = tt > 0.0
    if int(pos.sum()) >= MIN_FIT_POINTS:
        slope, icpt = np.polyfit(np.log(tj[pos]), np.log(tt[pos]), 1)
        out["beta"] = float(-slope)
        out["c_fit"] = float(math.exp(icpt)) if icpt < 700.0 else math.inf
        if out["beta"] <= DIVERGE_BETA_MAX and out["tail_mean"] >= DIVERGE_TERM_MIN:
            out["label"] = "diverges"
            out["rate"] = f"terms ~ {out['c_fit']:.3g} * j^-({out['beta']:.3g})"
            return out
    if out["cauchy_max_increment"] <= CAUCHY_TOL * max(1.0, total):
        out["label"] = "converges"
        out["limit_estimate"] = total
    return out


@dataclass
class WienerReport:
    """Two-column dyadic ladder with its diagnosis.

    terms is the upper (primal or cover) column, terms_lower the certificate
    column (dual or Frostman); the headline diagnosis reads the upper column
    and diagnosis_lower the certificate one.  window_flags records per scale
    whether the window was evaluated, certified empty, or unresolved."""

    point_x: np.ndarray
    point_t: float
    style: str
    j_min: int
    j_max: int
    scales: np.ndarray
    terms: np.ndarray
    terms_lower: np.ndarray
    partial: np.ndarray
    partial_lower: np.ndarray
    diagnosis: dict
    diagnosis_lower: dict
    window_flags: list
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.point_x = np.atleast_1d(np.asarray(self.point_x, float))
        for name in ("scales", "terms", "terms_lower", "partial", "partial_lower"):
            setattr(self, name, np.asarray(getattr(self, name), float))
        n = self.j_max - self.j_min + 1
        if not (len(self.scales) == len(self.terms) == len(self.terms_lower)
                == len(self.partial) == len(self.window_flags) == n):
            raise ValueError("ladder columns disagree with the scale range")
        if np.any(self.terms < 0.0) or np.any(self.terms_lower < 0.0):
            raise ValueError("series terms must be nonnegative")
        if np.any(np.diff(self.partial) < -1e-12):
            raise ValueError("partial sums must be nondecreasing")

    @property
    def label(self):
        return self.diagnosis["label"]

    def ladder(self):
        rows = []
        for i, j in enumerate(range(self.j_min, self.j_max + 1)):
            rows.append({"j": j, "rho": float(self.scales[i]),
                         "term": float(self.terms[i]),
                         "term_lower": float(self.terms_lower[i]),
                         "partial": float(self.partial[i]),
                         "flag": self.window_flags[i]})
        return rows

    def to_json(self):
        return {"point": {"x": self.point_x.tolist(), "t": self.point_t},
                "style": self.style,
                "j_min": self.j_min, "j_max": self.j_max,
                "ladder": self.ladder(),
                "diagnosis": dict(self.diagnosis),
                "diagnosis_lower": dict(self.diagnosis_lower),
                "notes": self.notes}


def _assemble(x, t, style, j_min, j_max, caps, lows, flags, notes):
    js = np.arange(j_min, j_max + 1)
    scales = 2.0 ** -js.astype(float)
    terms = np.asarray(caps, float) / scales ** len(x)
    terms_lo = np.asarray(lows, float) / scales ** len(x)
    return WienerReport(
        point_x=x, point_t=t, style=style, j_min=j_min, j_max=j_max,
        scales=scales, terms=terms, terms_lower=terms_lo,
        partial=np.cumsum(terms), partial_lower=np.cumsum(terms_lo),
        diagnosis=_diagnose(terms, js), diagnosis_lower=_diagnose(terms_lo, js),
        window_flags=list(flags), notes=notes)


def _scale_range(j_min, j_max):
    if int(j_min) != j_min or int(j_max) != j_max or j_min < 1 or j_max < j_min:
        raise ValueError("need integer scales with 1 <= j_min <= j_max")
    return range(int(j_min), int(j_max) + 1)


def necessary_series(domain, point, params, j_max=J_MAX_DEFAULT,
                     j_min=J_MIN_DEFAULT, maxiter=SERIES_MAXITER,
                     check_boundary=True):
    """Capacity ladder of the complement inside past cylinders Q_rho.

    Divergence of this series is forced whenever the problem admits a
    boundary blow-up solution, so a converging upper column rules one out.
    Returns a WienerReport with primal upper and dual lower columns."""
    if params.N != domain.dim:
        raise ValueError("params.N does not match the domain dimension")
    x, t, bnote = _prepare(domain, point, check_boundary)
    caps, lows, flags, info = [], [], [], []
    for j in _scale_range(j_min, j_max):
        W, frac = _window(domain, x, t, 2.0 ** -j, "necessary")
        up, lo, flag, extra = _capacity_columns(W, 2.0 ** -j, frac, params, maxiter)
        caps.append(up)
        lows.append(lo)
        flags.append(flag)
        info.append(extra)
    notes = {"boundary_check": bnote, "columns": ("primal", "dual"),
             "maxiter": maxiter, "ladder_info": info,
             "q": params.q, "qprime": params.qprime}
    if params.q < params.qstar - 1e-12:
        notes["exponent_range"] = "below critical; series is informational"
    return _assemble(x, t, "necessary", j_min, j_max, caps, lows, flags, notes)


def sufficient_series(domain, point, params, j_max=J_MAX_DEFAULT,
                      j_min=J_MIN_DEFAULT, maxiter=SERIES_MAXITER,
                      proof_ladder=True, check_boundary=True):
    """Capacity ladder of the complement inside the offset windows
    B_{rho/30}(x) x (t - 30 rho^2, t - rho^2).

    Divergence guarantees a boundary blow-up solution in the admissible
    exponent range (q above (N+2)/N, or equal with N >= 3).  The report
    optionally carries the proof-slice ladder in notes["proof_terms"]."""
    if params.N != domain.dim:
        raise ValueError("params.N does not match the domain dimension")
    _sufficient_hypothesis(params)
    x, t, bnote = _prepare(domain, point, check_boundary)
    caps, lows, flags, info = [], [], [], []
    proof_caps, proof_flags = [], []
    for j in _scale_range(j_min, j_max):
        rho = 2.0 ** -j
        W, frac = _window(domain, x, t, rho, "sufficient_cap")
        up, lo, flag, extra = _capacity_columns(W, rho, frac, params, maxiter)
        caps.append(up)
        lows.append(lo)
        flags.append(flag)
        info.append(extra)
        if proof_ladder:
            M, pfrac = _window(domain, x, t, rho, "proofM_k")
            pup, _, pflag, _ = _capacity_columns(M, rho, pfrac, params, maxiter)
            proof_caps.append(pup)
            proof_flags.append(pflag)
    notes = {"boundary_check": bnote, "columns": ("primal", "dual"),
             "maxiter": maxiter, "ladder_info": info,
             "q": params.q, "qprime": params.qprime}
    if proof_ladder:
        js = np.arange(j_min, j_max + 1)
        notes["proof_terms"] = (np.asarray(proof_caps, float)
                                / (2.0 ** -js.astype(float)) ** params.N).tolist()
        notes["proof_flags"] = proof_flags
    return _assemble(x, t, "sufficient_cap", j_min, j_max, caps, lows, flags, notes)


def sufficient_series_exp(domain, point, j_max=J_MAX_DEFAULT,
                          j_min=J_MIN_DEFAULT, check_boundary=True):
    """Parabolic Hausdorff content ladder on the offset windows.

    This is the sufficient test for the exponential absorption problem;
    no exponent enters.  Upper column from greedy covers, lower from the
    Frostman measure mass."""
    if domain.dim < 2:
        raise ValueError("content criterion needs N >= 2")
    x, t, bnote = _prepare(domain, point, check_boundary)
    ups, lows, flags, info = [], [], [], []
    for j in _scale_range(j_min, j_max):
        rho = 2.0 ** -j
        W, _ = _window(domain, x, t, rho, "sufficient_hausdorff")
        up, lo, flag, extra = _content_columns(W, rho)
        ups.append(up)
        lows.append(lo)
        flags.append(flag)
        info.append(extra)
    notes = {"boundary_check": bnote, "columns": ("cover", "frostman"),
             "ladder_info": info}
    return _assemble(x, t, "sufficient_hausdorff", j_min, j_max,
                     ups, lows, flags, notes)


def _ball_volume(N):
    return math.pi ** (N / 2.0) / math.gamma(N / 2.0 + 1.0)


def _surrogate_map(variant, params, N):
    if variant == "volume_supercritical":
        e = 1.0 - 2.0 * params.qprime / (N + 2.0)
        if e <= 0.0:
            raise ValueError("supercritical surrogate needs q above (N+2)/N")
        return lambda v: v ** e
    if variant == "volume_critical":

        def crit(v):
            if v <= 0.0:
                return 0.0
            lg = max(math.log(1.0 / min(v, 0.99)), 1e-12)
            return lg ** (-N / 2.0)

        return crit
    return lambda v: v ** (N / (N + 2.0))


def volume_surrogate_series(domain, point, params, variant,
                            j_max=J_MAX_DEFAULT, j_min=J_MIN_DEFAULT,
                            n_samples=VOL_MC_SAMPLES, seed=0,
                            check_boundary=True):
    """Monte-Carlo volume screen for the offset-window ladders.

    The window volume enters through the variant map (a power for the
    supercritical and content screens, a negative log power at the critical
    exponent), normalized by rho^N like the capacity ladders.  Runs before
    the capacity series as a cheap screen: its divergence implies the
    capacity ladder diverges too, never the reverse.  Per-scale standard
    errors are carried; a diagnosis whose deciding tail overlaps zero
    volume is downgraded to inconclusive."""
    if variant not in ("volume_supercritical", "volume_critical",
                       "volume_hausdorff"):
        raise ValueError("unknown surrogate variant")
    if variant == "volume_hausdorff":
        N = domain.dim
        if params is not None:
            raise ValueError("content surrogate takes no exponent parameters")
    else:
        if params is None or params.N != domain.dim:
            raise ValueError("params.N does not match the domain dimension")
        N = params.N
        qs = (N + 2.0) / N
        if variant == "volume_supercritical" and not params.q > qs + 1e-12:
            raise ValueError("supercritical surrogate needs q above (N+2)/N")
        if variant == "volume_critical" and abs(params.q - qs) > 1e-12:
            raise ValueError("critical surrogate needs q equal to (N+2)/N")
        _sufficient_hypothesis(params)
    if N < 2:
        raise ValueError("surrogate ladders need N >= 2")
    x, t, bnote = _prepare(domain, point, check_boundary)
    fmap = _surrogate_map(variant, params, N)
    rng = np.random.default_rng(seed)
    vols, ses, flags = [], [], []
    for j in _scale_range(j_min, j_max):
        rho = 2.0 ** -j
        W, frac = _window(domain, x, t, rho, variant)
        ne = geometry.window_nonempty(W, budget=WINDOW_NONEMPTY_BUDGET)
        if ne is not True:
            vols.append(0.0)
            ses.append(0.0)
            flags.append("empty" if ne is False else "unresolved")
            continue
        r_w = rho * frac
        t_lo = t - geometry.SUFF_T_FAR * rho ** 2
        t_hi = t - geometry.SUFF_T_NEAR * rho ** 2
        u = rng.standard_normal((n_samples, N))
        u /= np.maximum(np.linalg.norm(u, axis=1, keepdims=True), 1e-300)
        pts = x + u * (r_w * rng.random(n_samples) ** (1.0 / N))[:, None]
        ts = t_lo + (t_hi - t_lo) * rng.random(n_samples)
        p = float(np.mean(W.contains(pts, ts)))
        vcyl = _ball_volume(N) * r_w ** N * (t_hi - t_lo)
        vols.append(p * vcyl)
        ses.append(math.sqrt(max(p * (1.0 - p), 0.0) / n_samples) * vcyl)
        flags.append("ok")
    js = np.arange(j_min, j_max + 1)
    scales = 2.0 ** -js.astype(float)
    terms = np.array([fmap(v) for v in vols]) / scales ** N
    lo_vols = [max(v - VOL_MC_Z * s, 0.0) for v, s in zip(vols, ses)]
    terms_lo = np.array([fmap(v) for v in lo_vols]) / scales ** N
    uncertain = [f == "ok" and v - VOL_MC_Z * s <= 0.0
                 for f, v, s in zip(flags, vols, ses)]
    diag = _diagnose(terms, js)
    if any(uncertain[-CAUCHY_TAIL:]):
        diag = {**diag, "label": "inconclusive",
                "downgraded": "tail volume indistinguishable from zero"}
    report = WienerReport(
        point_x=x, point_t=t, style=variant, j_min=int(j_min), j_max=int(j_max),
        scales=scales, terms=terms, terms_lower=terms_lo,
        partial=np.cumsum(terms), partial_lower=np.cumsum(terms_lo),
        diagnosis=diag, diagnosis_lower=_diagnose(terms_lo, js),
        window_flags=flags,
        notes={"boundary_check": bnote, "n_samples": int(n_samples),
               "seed": int(seed), "z": VOL_MC_Z,
               "volumes": [float(v) for v in vols],
               "volume_se": [float(s) for s in ses],
               "uncertain": uncertain})
    return report


def subcritical_test(domain, point, eps, n_max=10):
    """Geometric contact test below the critical exponent.

    True when every window B_delta(x) x (t - delta^2, t - eps delta^2)
    with delta = 2^-n, n = 1..n_max, certifiably meets the complement.
    Windows that cannot be certified count as misses."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    x, t, _ = _prepare(domain, point, check_boundary=False)
    for n in range(1, int(n_max) + 1):
        d = 2.0 ** -n
        cyl = geometry.ball_cylinder(x, d, t - d * d, t - eps * d * d)
        W = geometry.intersection(geometry.complement(domain), cyl)
        if geometry.window_nonempty(W, budget=WINDOW_NONEMPTY_BUDGET) is not True:
            return False
    return True


def classify_boundary(domain, params, points, j_max=8, j_min=J_MIN_DEFAULT,
                      maxiter=SERIES_MAXITER):
    """Per-point existence table from the two capacity ladders.

    A diverging sufficient ladder labels the point "large-solution
    guaranteed"; a converging necessary upper column labels it "no large
    solution"; anything else stays inconclusive.  The certificate column
    is reported alongside (sufficient_certified is True when even the dual
    lower ladder diverges).  Contradictory labels are checked for and
    downgraded, never emitted."""
    rows = []
    try:
        _sufficient_hypothesis(params)
        hyp_ok = True
    except ValueError as exc:
        hyp_ok = False
        hyp_msg = str(exc)
    for point in points:
        x, t, bnote = _prepare(domain, point, check_boundary=True)
        if hyp_ok:
            suff = sufficient_series(domain, (x, t), params, j_max=j_max,
                                     j_min=j_min, maxiter=maxiter,
                                     proof_ladder=False, check_boundary=False)
            s_label = suff.label
            s_cert = suff.diagnosis_lower["label"] == "diverges"
        else:
            s_label = f"hypothesis-rejected ({hyp_msg})"
            s_cert = False
        nec = necessary_series(domain, (x, t), params, j_max=j_max,
                               j_min=j_min, maxiter=maxiter,
                               check_boundary=False)
        guaranteed = s_label == "diverges"
        ruled_out = nec.label == "converges"
        contradiction = bool(guaranteed and ruled_out)
        if contradiction:
            label = "inconclusive"
        elif guaranteed:
            label = "large-solution guaranteed"
        elif ruled_out:
            label = "no large solution"
        else:
            label = "inconclusive"
        rows.append({"x": tuple(float(v) for v in x), "t": float(t),
                     "boundary_check": bnote,
                     "sufficient": s_label, "sufficient_certified": s_cert,
                     "necessary": nec.label, "label": label,
                     "contradiction": contradiction})
    return rows


def ellipsoid_threshold_sweep(lams=(1500.0 ** 2, 1700.0 ** 2, 1800.0 ** 2,
                                    1900.0 ** 2, 2100.0 ** 2),
                              q=3.0, N=2, j_max=10, j_min=J_MIN_DEFAULT,
                              maxiter=SERIES_MAXITER):
    """Emptiness predicate and sufficient-series diagnosis at the top point
    of the ellipsoid family {|x|^2 + t^2/lam < 1} across a lambda sweep.

    The top point (0, sqrt(lam)) is the only boundary point whose windows
    can die out; the sweep brackets the flattening threshold."""
    params = ProblemParams(N=N, q=q)
    _sufficient_hypothesis(params)
    rows = []
    for lam in lams:
        lam = float(lam)
        ell = geometry.ellipsoid(np.zeros(N), 0.0, lam)
        top = (np.zeros(N), math.sqrt(lam))
        all_empty = True
        for j in _scale_range(j_min, j_max):
            W, _ = _window(ell, top[0], top[1], 2.0 ** -j, "sufficient_cap")
            if geometry.window_nonempty(W, budget=WINDOW_NONEMPTY_BUDGET) is True:
                all_empty = False
                break
        rep = sufficient_series(ell, top, params, j_max=j_max, j_min=j_min,
                                maxiter=maxiter, proof_ladder=False,
                                check_boundary=False)
        rows.append({"lam": lam, "all_windows_empty": all_empty,
                     "diagnosis": rep.label,
                     "diverges": rep.label == "diverges",
                     "sum": float(rep.partial[-1])})
    return rows
