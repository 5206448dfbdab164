"""Potentials layer: closed forms vs oracles, kernel constants, Wolff pair."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from paracap import potentials as pot
from paracap.gridfn import GridFunction

RNG = np.random.default_rng(20260816)


def random_measure(rng, dim, natoms=None, spread=1.0):
    n = int(rng.integers(1, 9)) if natoms is None else natoms
    return pot.DiscreteMeasure(rng.normal(size=(n, dim)) * spread,
                               rng.normal(size=n) * spread ** 2,
                               rng.uniform(0.1, 2.0, size=n))


def riesz_cumulative_oracle(measure, x, t, R):
    """Integrate the piecewise-constant cylinder mass over (0, R) segment by
    segment; independent of the per-atom kernel formula."""
    rs = measure.rho_star(x, t)[0]
    if np.any((rs == 0.0) & (measure.m > 0)):
        return float("inf")
    order = np.argsort(rs)
    d = rs[order]
    cm = np.cumsum(measure.m[order])
    N = measure.dim
    total = 0.0
    for k in range(len(d)):
        a = d[k]
        b = d[k + 1] if k + 1 < len(d) else np.inf
        bb = min(b, R)
        if a >= R or bb <= a or cm[k] == 0.0:
            continue
        total += cm[k] * (a ** (-float(N)) - bb ** (-float(N))) / N
    return total


def maximal_brute(measure, x, t, R):
    rs = measure.rho_star(x, t)[0]
    if np.any((rs == 0.0) & (measure.m > 0)):
        return float("inf")
    best = 0.0
    for dd in np.unique(rs):
        if dd <= 0.0 or dd >= R:
            continue
        best = max(best, float(np.sum(measure.m[rs <= dd])) / dd ** measure.dim)
    return best


def test_heat_kernel_values():
    assert pot.heat_kernel([0.3, 0.1], -1.0, 2) == 0.0
    assert pot.heat_kernel([0.3, 0.1], 0.0, 2) == 0.0
    for N in (1, 2, 3):
        x = np.zeros(N)
        assert abs(pot.heat_kernel(x, 1.0 / (4.0 * np.pi), N) - 1.0) < 1e-14
    # radial normalization, N=2: integral of H over the plane is 1
    val, _ = quad(lambda r: (4 * np.pi * 0.7) ** -1 * np.exp(-r * r / (4 * 0.7)) * 2 * np.pi * r,
                  0, np.inf)
    assert abs(val - 1.0) < 1e-10
    # semigroup identity in N=1 by lattice quadrature
    t, s, x = 0.25, 0.4, 0.3
    y = np.linspace(-8, 8, 3201)
    hy = y[1] - y[0]
    conv = np.sum([pot.heat_kernel([x - yi], t, 1) * pot.heat_kernel([yi], s, 1) for yi in y]) * hy
    assert abs(conv - pot.heat_kernel([x], t + s, 1)) < 1e-8


def test_heat_potential_matches_direct_loop():
    rng = np.random.default_rng(7)
    mu = random_measure(rng, 2, natoms=6)
    px = rng.normal(size=(5, 2))
    pt = rng.normal(size=5)
    vals = pot.heat_potential(mu, px, pt)
    for i in range(5):
        direct = sum(mu.m[j] * pot.heat_kernel(px[i] - mu.x[j], pt[i] - mu.t[j], 2)
                     for j in range(mu.natoms))
        assert abs(vals[i] - direct) < 1e-12 * max(1.0, abs(direct))


def test_riesz_dirac_closed_form():
    mu = pot.DiscreteMeasure.single([0.0, 0.0], 0.0, 1.0)
    # rho* = 0.5, N = 2, R = 1: integral of rho^-3 over (1/2, 1) is 1.5
    assert abs(pot.riesz_potential(mu, [0.5, 0.0], 0.0, 1.0) - 1.5) < 1e-14
    assert abs(pot.riesz_potential(mu, [0.3, 0.0], -0.25, 1.0) - 1.5) < 1e-14  # same rho*
    assert pot.riesz_potential(mu, [0.5, 0.0], 0.0, 0.5) == 0.0
    assert pot.riesz_potential(mu, [0.0, 0.0], 0.0, 1.0) == np.inf


def test_riesz_matches_cumulative_oracle_and_quad():
    rng = np.random.default_rng(11)
    for trial in range(400):
        dim = int(rng.integers(1, 4))
        mu = random_measure(rng, dim)
        x = rng.normal(size=dim)
        t = rng.normal()
        R = rng.uniform(0.3, 2.5)
        got = pot.riesz_potential(mu, x, t, R)
        want = riesz_cumulative_oracle(mu, x, t, R)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-14)
    for trial in range(12):
        dim = int(rng.integers(1, 4))
        mu = random_measure(rng, dim)
        x = rng.normal(size=dim)
        t = rng.normal()
        R = rng.uniform(0.5, 2.0)
        rs = np.sort(mu.rho_star(x, t)[0])
        val, _ = quad(lambda r: mu.qtilde_mass(x, t, r) * r ** (-dim - 1.0), 1e-12, R,
                      points=[r for r in rs if r < R], limit=200)
        assert pot.riesz_potential(mu, x, t, R) == pytest.approx(val, rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 3))
def test_riesz_linearity_and_monotone_R(seed, dim):
    rng = np.random.default_rng(seed)
    mu = random_measure(rng, dim)
    nu = random_measure(rng, dim)
    x = rng.normal(size=dim)
    t = rng.normal()
    R1 = rng.uniform(0.2, 1.0)
    R2 = R1 + rng.uniform(0.1, 1.0)
    both = mu + nu
    s = pot.riesz_potential(mu, x, t, R1) + pot.riesz_potential(nu, x, t, R1)
    assert pot.riesz_potential(both, x, t, R1) == pytest.approx(s, rel=1e-12, abs=1e-14)
    assert pot.riesz_potential(mu, x, t, R2) >= pot.riesz_potential(mu, x, t, R1) - 1e-14
    assert pot.maximal_potential(mu, x, t, R2) >= pot.maximal_potential(mu, x, t, R1) - 1e-14
    assert pot.riesz_potential(mu.scaled(2.0), x, t, R1) == pytest.approx(
        2.0 * pot.riesz_potential(mu, x, t, R1), rel=1e-12, abs=1e-14)


def test_maximal_dirac_and_trivial():
    mu = pot.DiscreteMeasure.single([0.0, 0.0], 0.0, 1.0)
    # sup attained as rho decreases to rho* = 0.5: 1 / 0.5^2 = 4
    assert abs(pot.maximal_potential(mu, [0.5, 0.0], 0.0, 1.0) - 4.0) < 1e-14
    assert pot.maximal_potential(mu, [0.5, 0.0], 0.0, 0.5) == 0.0  # R below rho*
    assert pot.maximal_potential(mu, [0.0, 0.0], 0.0, 1.0) == np.inf
    empty = pot.DiscreteMeasure.empty(2)
    assert pot.maximal_potential(empty, [0.5, 0.0], 0.0, 1.0) == 0.0
    assert pot.riesz_potential(empty, [0.5, 0.0], 0.0, 1.0) == 0.0


def test_maximal_matches_brute_and_grid():
    rng = np.random.default_rng(13)
    for trial in range(300):
        dim = int(rng.integers(1, 4))
        mu = random_measure(rng, dim)
        x = rng.normal(size=dim)
        t = rng.normal()
        R = rng.uniform(0.3, 2.5)
        got = pot.maximal_potential(mu, x, t, R)
        assert got == pytest.approx(maximal_brute(mu, x, t, R), rel=1e-12, abs=1e-14)
        # a dense rho grid never beats the exact sup and approaches it
        rho = np.linspace(1e-3, R * (1 - 1e-9), 2000)
        dense = float(np.max(mu.qtilde_mass(x, t, rho) / rho ** dim))
        assert dense <= got * (1 + 1e-12)
        if np.isfinite(got) and got > 0:
            rs = mu.rho_star(x, t)[0]
            cand = rs[(rs > 0) & (rs < R)]
            if cand.size:
                near = float(np.max(mu.qtilde_mass(x, t, cand * (1 + 1e-12)) / cand ** dim))
                assert near == pytest.approx(got, rel=1e-9)


def test_qtilde_mass_strictness_and_monotone():
    mu = pot.DiscreteMeasure([[0.5, 0.0], [0.0, 0.3]], [0.0, -0.25], [1.0, 2.0])
    # atom exactly at parabolic distance rho is outside the open cylinder
    assert mu.qtilde_mass([0.0, 0.0], 0.0, 0.5) == 0.0
    assert mu.qtilde_mass([0.0, 0.0], 0.0, 0.5 + 1e-12) == 3.0
    rho = np.linspace(0.01, 3.0, 50)
    masses = mu.qtilde_mass([0.0, 0.0], 0.0, rho)
    assert np.all(np.diff(masses) >= 0)
    assert masses[-1] == mu.total_mass


def test_dyadic_lower_sum_cases():
    rho = 0.8
    x = np.array([1.0, -0.5])
    t = 0.3
    empty = pot.DiscreteMeasure.empty(2)
    assert pot.dyadic_lower_sum(empty, x, t, rho) == 0.0
    # atom just inside the k=0 window: contributes mass / rho^N and nothing else
    mu = pot.DiscreteMeasure.single(x, t - (pot.WINDOW_T_NEAR + 1e-6) * rho ** 2, 0.7)
    val, k = pot.dyadic_lower_sum(mu, x, t, rho, with_k=True)
    assert val == pytest.approx(0.7 / rho ** 2, rel=1e-12)
    assert k == 0
    # deeper scale: k=2 window, radius rho_2 = rho/16
    rk = rho / 16.0
    mu2 = pot.DiscreteMeasure.single(x + np.array([rk / 8 * 0.9, 0.0]),
                                     t - 0.5 * (pot.WINDOW_T_NEAR + pot.WINDOW_T_FAR) * rk ** 2,
                                     1.3)
    val2, k2 = pot.dyadic_lower_sum(mu2, x, t, rho, with_k=True)
    assert val2 == pytest.approx(1.3 / rk ** 2, rel=1e-12)
    assert k2 == 2
    # on-boundary atoms: near face included, far face excluded
    near = pot.DiscreteMeasure.single(x, t - pot.WINDOW_T_NEAR * rho ** 2, 1.0)
    far = pot.DiscreteMeasure.single(x, t - pot.WINDOW_T_FAR * rho ** 2, 1.0)
    assert pot.dyadic_lower_sum(near, x, t, rho) == pytest.approx(1.0 / rho ** 2)
    assert pot.dyadic_lower_sum(far, x, t, rho) == 0.0
    side = pot.DiscreteMeasure.single(x + np.array([rho / 8, 0.0]),
                                      t - 0.28 * rho ** 2, 1.0)
    assert pot.dyadic_lower_sum(side, x, t, rho) == 0.0
    # scaling the masses scales the sum
    assert pot.dyadic_lower_sum(mu.scaled(3.0), x, t, rho) == pytest.approx(
        3.0 * pot.dyadic_lower_sum(mu, x, t, rho), rel=1e-12)


def test_window_disjointness_across_scales():
    # a single atom can satisfy the window condition for at most one k
    rng = np.random.default_rng(17)
    x = np.zeros(2)
    for trial in range(500):
        rho = rng.uniform(0.1, 2.0)
        dt = rng.uniform(1e-6, rho ** 2)
        hits = 0
        for k in range(0, 12):
            rk = rho * 4.0 ** (-k)
            if pot.WINDOW_T_NEAR * rk ** 2 <= dt < pot.WINDOW_T_FAR * rk ** 2:
                hits += 1
        assert hits <= 1


def test_heat_kernel_bounded_below_on_windows():
    # validity of the calibrated lower constant over the dyadic window
    rng = np.random.default_rng(19)
    for N in (1, 2, 3):
        c2 = pot.calibrate_C2(N)
        worst = np.inf
        for trial in range(4000):
            rk = 10.0 ** rng.uniform(-3, 1)
            tau = rng.uniform(pot.WINDOW_T_NEAR, pot.WINDOW_T_FAR) * rk ** 2
            z = np.zeros(N)
            z[0] = rng.uniform(0.0, pot.WINDOW_R_FRAC * rk)
            ratio = pot.heat_kernel(z, tau, N) * rk ** N / c2
            worst = min(worst, ratio)
            assert ratio >= 1.0 - 1e-12
        # corner sample shows the constant is tight
        rk = 1.0
        z = np.zeros(N)
        z[0] = pot.WINDOW_R_FRAC * rk * (1 - 1e-9)
        tau = pot.WINDOW_T_FAR * rk ** 2 * (1 - 1e-9)
        corner = pot.heat_kernel(z, tau, N) * rk ** N / c2
        assert corner < 1.01


def test_heat_kernel_dominated_by_c1_riesz():
    rng = np.random.default_rng(23)
    for N in (1, 2, 3):
        c1 = pot.calibrate_C1(N)
        T = 1.7
        for trial in range(4000):
            rstar = 10.0 ** rng.uniform(-3, 0) * (T / 2)
            frac = rng.uniform(0, 1)
            z = np.zeros(N)
            z[0] = rstar * frac
            # time coordinate chosen so the parabolic distance is exactly rstar
            tau = rstar ** 2 if frac < 1 else rng.uniform(0, 1) * rstar ** 2
            kern = (rstar ** (-float(N)) - T ** (-float(N))) / N
            assert pot.heat_kernel(z, tau, N) <= c1 * kern * (1 + 1e-12)
        # the sup is attained at parabolic distance T/2
        rstar = T / 2
        kern = (rstar ** (-float(N)) - T ** (-float(N))) / N
        if N == 1:
            peak = pot.heat_kernel(np.zeros(1), rstar ** 2, 1)
        else:
            z = np.zeros(N)
            z[0] = rstar
            peak = pot.heat_kernel(z, rstar ** 2 / (2 * N), N)
        assert peak == pytest.approx(c1 * kern, rel=1e-12)


def test_calibrated_constants_frozen():
    assert pot.calibrate_C1(1) == pytest.approx(2.0 * (4 * np.pi) ** -0.5, rel=1e-13)
    assert pot.calibrate_C1(2) == pytest.approx(8.0 / (3 * np.pi * np.e), rel=1e-13)
    assert pot.calibrate_C2(2) == pytest.approx(
        (32.0 / (37.0 * np.pi)) * math.exp(-1.0 / 70.0), rel=1e-13)
    p = pot.PotentialParams.calibrated(2, 1.5)
    assert p.R == 1.5 and p.C1 > 0 and p.C2 > 0
    with pytest.raises(ValueError):
        pot.PotentialParams(R=-1.0, C1=1.0, C2=1.0)


def test_est_u_lower_parts_and_robustness():
    empty = pot.DiscreteMeasure.empty(2)
    assert pot.est_u_lower(empty, [0.2, 0.0], 0.1, q=2.0, R=1.0) == 0.0
    R = 1.0
    x = np.array([0.2, 0.0])
    t = 0.1
    rho = R - float(np.hypot(*x))
    mu = pot.DiscreteMeasure.single(x, t - 0.28 * rho ** 2, 0.5)
    val, dy, corr = pot.est_u_lower(mu, x, t, q=2.0, R=R, n_lat=16, return_parts=True)
    assert dy == pytest.approx(0.5 / rho ** 2, rel=1e-12)
    assert corr > 0 and np.isfinite(corr)
    params = pot.PotentialParams.calibrated(2, R)
    assert val == pytest.approx(params.C2 * dy - params.C1 ** 3 * corr, rel=1e-12)
    # atom exactly on a lattice center must not poison the quadrature
    lo = min(x[0], mu.x[0, 0]) - 2 * R
    hi = max(x[0], mu.x[0, 0]) + 2 * R
    cell0 = lo + (hi - lo) * 0.5 / 16
    mu_hit = pot.DiscreteMeasure.single([cell0, 0.0], t - 0.28 * rho ** 2, 0.5)
    out = pot.est_u_lower(mu_hit, x, t, q=2.0, R=R, n_lat=16)
    assert np.isfinite(out)


def test_est_v_lower_basics():
    empty = pot.DiscreteMeasure.empty(2)
    assert pot.est_v_lower(empty, [0.2, 0.0], 0.1, R=1.0) == 0.0
    x = np.array([0.1, 0.1])
    mu = pot.DiscreteMeasure.single([0.4, -0.2], -0.3, 0.01)
    small = pot.est_v_lower(mu, x, 0.2, R=1.0, n_lat=12)
    assert np.isfinite(small)
    big = pot.est_v_lower(mu.scaled(1e4), x, 0.2, R=1.0, n_lat=12)
    assert not np.isnan(big)
    assert big <= small


def test_duhamel_zero_and_kernel_identity():
    n = 17
    R = 1.0
    ax = np.linspace(-R, R, n)
    ts = np.linspace(-R * R, R * R, n)
    h = ax[1] - ax[0]
    ht = ts[1] - ts[0]
    vals = np.zeros((n, n, n))
    f = GridFunction((ax, ax), ts, vals, h, ht)
    u, err = pot.duhamel_solve(f, R)
    assert np.all(u.values == 0.0) and err == 0.0
    # smoothed Dirac at the origin: u approaches H away from the source
    i0 = n // 2
    vals = np.zeros((n, n, n))
    vals[i0, i0, i0] = 1.0 / (h * h * ht)
    f = GridFunction((ax, ax), ts, vals, h, ht)
    u, err = pot.duhamel_solve(f, R)
    probe = (i0 + 3, i0, n - 1)
    xt = (np.array([ax[probe[0]], ax[probe[1]]]), ts[probe[2]])
    exact = pot.heat_kernel(xt[0], xt[1], 2)
    assert u.values[probe] == pytest.approx(exact, rel=0.05)


def test_duhamel_kernel_bound():
    # |u| <= C1 * (truncated riesz of |f|) when the truncation is at least
    # twice the largest evaluation-to-source parabolic distance
    rng = np.random.default_rng(29)
    n = 12
    r = 0.5
    ax = np.linspace(-r, r, n)
    ts = np.linspace(-r * r, r * r, n)
    h = ax[1] - ax[0]
    ht = ts[1] - ts[0]
    vals = rng.uniform(0, 3, size=(n, n, n))
    f = GridFunction((ax, ax), ts, vals, h, ht)
    u, _ = pot.duhamel_solve(f, r)
    nodes, ntimes = f.node_points()
    w = vals.ravel() * h * h * ht
    from paracap import _accel
    T = 4.0 * r
    bound = pot.calibrate_C1(2) * _accel.riesz_kernel_sum(nodes, ntimes, nodes, ntimes, w, T, 2)
    assert np.all(u.values.ravel() <= bound * (1 + 1e-12) + 1e-15)


def test_riesz_grid_density_path():
    # constant density box; the dyadic-scale quadrature should approximate
    # the closed-form potential of the atomized grid measure
    n = 15
    ax = np.linspace(0.0, 1.0, n)
    ts = np.linspace(0.0, 0.5, n)
    h = ax[1] - ax[0]
    ht = ts[1] - ts[0]
    f = GridFunction((ax, ax), ts, np.full((n, n, n), 2.0), h, ht)
    nodes, ntimes = f.node_points()
    mu = pot.DiscreteMeasure(nodes, ntimes, np.full(nodes.shape[0], 2.0 * h * h * ht))
    p = np.array([0.5, 0.5])
    t = 1.0
    R = 2.0
    val, err = pot.riesz_potential_grid(f, p, t, R)
    want = pot.riesz_potential(mu, p, t, R)
    assert val == pytest.approx(want, rel=0.05)
    assert err < 0.2 * want


# measured worst over the seeded trials: 1.05; asserted with wide headroom
EXP_STAT_BOUND = 5.0


def test_exp_integrability_statistic():
    rng = np.random.default_rng(31)
    R = 1.0
    worst = 0.0
    for trial in range(10):
        mu = random_measure(rng, 2, spread=0.5)
        windows = [(rng.normal(size=2) * 0.3, rng.normal() * 0.1, r)
                   for r in (0.25, 0.5, 1.0)]
        # normalize on the window lattices: maximal potential sampled off-atom
        cap = 1.0
        for w in windows:
            centers, ct, _ = pot._lattice(np.atleast_2d(np.asarray(w[0], float)),
                                          np.atleast_1d(float(w[1])), w[2], w[2] ** 2, 8, 8)
            mm = pot.maximal_potential(mu, centers, ct, R)
            cap = max(cap, float(np.max(mm[np.isfinite(mm)])))
        mun = mu.scaled(1.0 / cap)
        avgs = pot.exp_integrability(mun, R, c=0.5, windows=windows, n_side=10)
        assert np.all(avgs >= 1.0 - 1e-12)
        worst = max(worst, float(np.max(avgs)))
    # bounded-statistic freeze: calibrated once, asserted with headroom
    assert worst < EXP_STAT_BOUND


def test_wolff_rhs_closed_forms():
    sigma = pot.WOLFF_SIGMA
    mu = pot.DiscreteMeasure.single([0.2, -0.1], 0.3, 1.7)
    want = 1.7 * 1.7 ** 1.0 * math.log(1.0 / sigma)
    assert pot.wolff_rhs(mu) == pytest.approx(want, rel=1e-12)
    # two atoms at parabolic distance d: each sees itself from sigma, both from d
    d = 0.25
    mu2 = pot.DiscreteMeasure([[0.0, 0.0], [d, 0.0]], [0.0, 0.0], [1.0, 2.0])
    want2 = (1.0 * (1.0 ** 1.0 * math.log(d / sigma) + 3.0 ** 1.0 * math.log(1.0 / d))
             + 2.0 * (2.0 ** 1.0 * math.log(d / sigma) + 3.0 ** 1.0 * math.log(1.0 / d)))
    assert pot.wolff_rhs(mu2) == pytest.approx(want2, rel=1e-12)
    assert pot.wolff_rhs(mu2, sigma=1.0, r_up=1.0) == 0.0


def test_wolff_rhs_dilation_identity():
    rng = np.random.default_rng(37)
    for a in (0.5, 2.0, 3.7):
        for dim in (2, 3):
            mu = random_measure(rng, dim, natoms=6)
            lhs = pot.wolff_rhs(mu.dilate(a), sigma=a * pot.WOLFF_SIGMA, r_up=a * 1.0)
            rhs = a ** (dim + 2) * pot.wolff_rhs(mu, sigma=pot.WOLFF_SIGMA, r_up=1.0)
            assert lhs == pytest.approx(rhs, rel=1e-12)


# measured [5.28, 6.23] over the seeds below; single-atom exact ratios are
# 7.76 (N=1), 5.53 (N=2), 6.30 (N=3) at sigma 1/64
WOLFF_BRACKET_LO = 4.0
WOLFF_BRACKET_HI = 8.0


def wolff_lhs_single_atom_exact(N, sigma, r_up):
    # the potential of a unit atom is radial in the parabolic distance r and
    # the region {rho* < r} has volume 2*omega_N*r^(N+2), so the space-time
    # integral collapses to a plateau term plus a 1d radial integral
    omega = math.pi ** (N / 2.0) / math.gamma(N / 2.0 + 1.0)
    expo = (N + 2.0) / N
    plateau = ((sigma ** -N - r_up ** -N) / N) ** expo * 2.0 * omega * sigma ** (N + 2)
    shell, _ = quad(
        lambda r: ((r ** -N - r_up ** -N) / N) ** expo * r ** (N + 1),
        sigma, r_up, limit=200)
    return plateau + 2.0 * (N + 2.0) * omega * shell


def test_wolff_lhs_single_atom_oracle():
    for N in (1, 2, 3):
        mu = pot.DiscreteMeasure.single(np.zeros(N), 0.0, 1.0)
        got = pot.wolff_lhs(mu, pot.WOLFF_SIGMA, 1.0)
        want = wolff_lhs_single_atom_exact(N, pot.WOLFF_SIGMA, 1.0)
        assert got == pytest.approx(want, rel=0.04)
    # mass scales out of the quadrature exactly: lhs(c*mu) = c^((N+2)/N) lhs(mu)
    mu = pot.DiscreteMeasure.single(np.zeros(2), 0.0, 1.0)
    base = pot.wolff_lhs(mu, pot.WOLFF_SIGMA, 1.0)
    tripled = pot.wolff_lhs(mu.scaled(3.0), pot.WOLFF_SIGMA, 1.0)
    assert tripled == pytest.approx(3.0 ** 2 * base, rel=1e-12)


def test_wolff_pair_bracket():
    rng = np.random.default_rng(41)
    ratios = []
    for trial in range(12):
        mu = random_measure(rng, 2, natoms=int(rng.integers(2, 11)), spread=0.6)
        lhs, rhs = pot.wolff_energy_pair(mu)
        assert lhs > 0 and rhs > 0
        ratios.append(lhs / rhs)
    for trial in range(4):
        mu = random_measure(rng, 3, natoms=int(rng.integers(2, 7)), spread=0.6)
        lhs, rhs = pot.wolff_energy_pair(mu)
        ratios.append(lhs / rhs)
    ratios = np.array(ratios)
    assert np.all(ratios > WOLFF_BRACKET_LO) and np.all(ratios < WOLFF_BRACKET_HI)


def test_wolff_coincident_raises():
    mu = pot.DiscreteMeasure([[0.0, 0.0], [0.0, 0.0]], [0.1, 0.1], [1.0, 1.0])
    with pytest.raises(ValueError):
        pot.wolff_energy_pair(mu)


def test_measure_dilate_restrict_serialize():
    rng = np.random.default_rng(43)
    mu = random_measure(rng, 2, natoms=7)
    a = 1.8
    x = rng.normal(size=2)
    t = rng.normal()
    rho = 0.9
    # parabolic dilation maps cylinder masses with the a^N factor, exactly
    assert mu.dilate(a).qtilde_mass(a * x, a * a * t, a * rho) == pytest.approx(
        a ** 2 * mu.qtilde_mass(x, t, rho), rel=1e-12)
    part = mu.restrict_qtilde(x, t, rho)
    assert part.total_mass == pytest.approx(mu.qtilde_mass(x, t, rho), rel=1e-12, abs=1e-15)
    rec = json.loads(json.dumps(mu.to_records()))
    back = pot.DiscreteMeasure.from_records(rec)
    assert np.allclose(back.x, mu.x) and np.allclose(back.t, mu.t) and np.allclose(back.m, mu.m)
    assert pot.DiscreteMeasure.from_records([], dim=3).natoms == 0
    with pytest.raises(ValueError):
        pot.DiscreteMeasure([[0.0, 0.0]], [0.0], [-1.0])
