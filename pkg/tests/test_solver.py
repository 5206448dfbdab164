"""Implicit slab solvers: ODE oracles, monotonicity, ceilings, measure data."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paracap import geometry as geo
from paracap import potentials as pot
from paracap import solver
from paracap.gridfn import GridFunction

# frozen lattice measurements; see inline comments for the observed values
ODE_POWER_REL_32 = 3e-4       # measured 1.977e-4 (m=1, q=3, span 1/4)
ODE_EXP_REL_32 = 6e-4         # measured 3.991e-4 (m=1)
CFIT_POWER_BAND = (4.0, 25.0)  # measured 17.06 / 13.52 / 8.52 at k=1..3
CFIT_EXP_BAND = (3.0, 10.0)    # measured 7.11 / 6.43 / 5.05 at k=1..3
REFINE_RATIO_BAND = (1.5, 4.5)  # measured 2.56 (h=1/8 -> 1/32 at the center)
DUHAMEL_FAR_TOL = 0.1          # measured one-sided deficit 0.047 at h=1/8


@pytest.fixture(scope="module")
def dom1():
    return geo.Qtilde(np.zeros(1), 0.0, 1.0)


@pytest.fixture(scope="module")
def ms_pow(dom1):
    return solver.maximal_solution(dom1, solver.power_law(3.0), k=2)


@pytest.fixture(scope="module")
def ms_exp(dom1):
    return solver.maximal_solution(dom1, solver.exponential_law(), k=2)


def _constant_data_slab(law, m, h, halfwidth=5.0, span=0.25):
    nc = int(round(halfwidth / (2 * h)))
    lat = solver.SlabLattice.from_cells(np.arange(-nc, nc)[:, None], 2, h)
    prob = solver.SlabProblem(lat, 0.0, span, m, np.full(lat.nshape, m))
    return lat, solver.solve_slab(prob, law)


def test_law_validation():
    with pytest.raises(ValueError):
        solver.power_law(1.0)
    with pytest.raises(ValueError):
        solver.hamilton_jacobi_law(1.0, 2.5, 1.0, 2.0)
    with pytest.raises(ValueError):
        solver.hamilton_jacobi_law(1.0, 1.5, 0.0, 2.0)
    with pytest.raises(ValueError):
        solver.AbsorptionLaw("cubic")
    # a = 0 tolerates any p: the gradient branch is inert
    law = solver.hamilton_jacobi_law(0.0, 0.0, 2.0, 2.0)
    assert not law.has_gradient
    for law in (solver.power_law(2.0), solver.exponential_law(),
                solver.hamilton_jacobi_law(1.0, 1.5, 1.0, 2.0)):
        assert law.g(0.0) == 0.0
        u = np.linspace(0.0, 3.0, 7)
        assert np.all(np.diff(law.g(u)) >= 0.0)
        assert np.all(law.gprime(u[1:]) >= 0.0)


@settings(max_examples=60, deadline=None)
@given(r=st.floats(0.0, 1e4), tau=st.floats(1e-4, 0.25),
       q=st.floats(1.1, 4.0), kind=st.sampled_from(["power", "exp"]))
def test_pointwise_implicit_roundtrip(r, tau, q, kind):
    law = solver.power_law(q) if kind == "power" else solver.exponential_law()
    v = solver._pointwise_implicit(law, np.array([r]), tau)[0]
    assert 0.0 <= v <= r + 1e-12
    assert abs(v + tau * law.g(v) - r) <= 1e-9 * (1.0 + r)


def test_slab_problem_validation():
    lat = solver.SlabLattice.from_cells(np.arange(-2, 2)[:, None], 2, 0.25)
    with pytest.raises(ValueError):
        solver.SlabProblem(lat, 0.0, 0.25, -1.0, np.zeros(lat.nshape))
    with pytest.raises(ValueError):
        solver.SlabProblem(lat, 0.0, 0.25, 1.0, np.zeros((3,)))
    bad = np.zeros(lat.nshape)
    bad[1] = -0.5
    with pytest.raises(ValueError):
        solver.SlabProblem(lat, 0.0, 0.25, 1.0, bad)
    with pytest.raises(ValueError):
        solver.SlabLattice.from_cells(np.arange(4)[:, None], 1, 0.25)


def test_solve_slab_span_and_h_guards():
    lat = solver.SlabLattice.from_cells(np.arange(-2, 2)[:, None], 2, 0.25)
    prob = solver.SlabProblem(lat, 0.0, 0.1, 1.0, np.ones(lat.nshape))
    with pytest.raises(ValueError):
        solver.solve_slab(prob, solver.power_law(2.0))
    prob2 = solver.SlabProblem(lat, 0.0, 0.25, 1.0, np.ones(lat.nshape))
    with pytest.raises(ValueError):
        solver.solve_slab(prob2, solver.power_law(2.0), h=0.2)


def test_ode_oracle_power():
    # spatially constant data: the center tracks the absorption ODE; the
    # h=1/64 run at the 1e-4 tolerance lives in the acceptance suite
    m, q = 1.0, 3.0
    lat, gf = _constant_data_slab(solver.power_law(q), m, 1.0 / 32.0)
    mid = lat.nshape[0] // 2
    exact = (m ** (1 - q) + (q - 1) * gf.times[1:]) ** (-1.0 / (q - 1))
    rel = np.max(np.abs(gf.values[mid, 1:] - exact) / exact)
    assert rel < ODE_POWER_REL_32


def test_ode_oracle_exponential():
    m = 1.0
    lat, gf = _constant_data_slab(solver.exponential_law(), m, 1.0 / 32.0)
    mid = lat.nshape[0] // 2
    exact = -np.log(1.0 - (1.0 - np.exp(-m)) * np.exp(-gf.times[1:]))
    rel = np.max(np.abs(gf.values[mid, 1:] - exact) / exact)
    assert rel < ODE_EXP_REL_32


def test_zero_data_zero_solution():
    lat = solver.SlabLattice.from_cells(np.arange(-4, 4)[:, None], 2, 1 / 8)
    gf = solver.solve_slab(
        solver.SlabProblem(lat, 0.0, 1 / 16, 0.0, np.zeros(lat.nshape)),
        solver.power_law(3.0))
    assert np.nanmax(np.abs(gf.values)) == 0.0


def test_residual_diagnostics(ms_pow):
    d = ms_pow.diagnostics
    assert d["residual_scaled_max"] < 1e-11
    assert d["residual_abs_max"] < 1e-6
    assert d["newton_iters_max"] <= 12


def test_discrete_comparison_random_pairs():
    rng = np.random.default_rng(7)
    lat = solver.SlabLattice.from_cells(np.arange(-4, 4)[:, None], 2, 1 / 8)
    laws = (solver.power_law(2.5), solver.exponential_law(),
            solver.hamilton_jacobi_law(1.0, 1.5, 1.0, 2.0))
    for law in laws:
        for _ in range(3):
            d1 = rng.uniform(0.2, 2.0, lat.nshape)
            d2 = d1 + rng.uniform(0.0, 1.0, lat.nshape)
            g1 = solver.solve_slab(
                solver.SlabProblem(lat, 0.0, 1 / 16, 1.0, d1), law)
            g2 = solver.solve_slab(
                solver.SlabProblem(lat, 0.0, 1 / 16, 1.5, d2), law)
            assert np.nanmax(g1.values - g2.values) <= 1e-10


def test_m_monotonicity_and_increments(ms_pow):
    d = ms_pow.diagnostics
    assert d["m_monotone_max_violation"] <= 1e-10
    assert d["monotone_m_ok"]
    # increments decrease along the ladder but do not reach the
    # saturation tolerance on a fixed lattice: wall-adjacent nodes scale
    # like (m/h^2)^(1/(q-1)), so the discrete sweep keeps growing and
    # only the h -> 0 limit saturates; the flag stays honest
    inc = d["increments"]
    assert all(b < a for a, b in zip(inc, inc[1:]))
    assert d["saturated"] is False


def test_exp_maximal_diagnostics(ms_exp):
    d = ms_exp.diagnostics
    assert d["m_monotone_max_violation"] <= 1e-10
    inc = d["increments"]
    assert all(b < a for a, b in zip(inc, inc[1:]))


def test_k_monotonicity_both_laws(dom1):
    for law in (solver.power_law(3.0), solver.exponential_law()):
        km = solver.k_monotonicity(dom1, law, k=1, nsub=2,
                                   m_ladder=(10.0, 1000.0))
        assert km["shared_nodes"] > 0
        assert km["max_violation"] <= 1e-10


def test_interior_bound_fit_bands(ms_pow, ms_exp):
    fp = solver.interior_bound_fit(ms_pow, max_samples=600)
    assert CFIT_POWER_BAND[0] < fp["C_fit"] < CFIT_POWER_BAND[1]
    fe = solver.interior_bound_fit(ms_exp, max_samples=600)
    assert CFIT_EXP_BAND[0] < fe["C_fit"] < CFIT_EXP_BAND[1]
    # the fitted constant makes the bound hold by construction; it must
    # stay in the same band one level deeper for the fit to mean anything
    ms3 = solver.maximal_solution(ms_pow.domain, ms_pow.law, k=3)
    f3 = solver.interior_bound_fit(ms3, max_samples=600)
    assert CFIT_POWER_BAND[0] < f3["C_fit"] < CFIT_POWER_BAND[1]


def test_gap_domain_fresh_restart():
    dom = geo.union(
        geo.BoxRegion(np.array([-1.0]), np.array([1.0]), -1.0, -0.5),
        geo.BoxRegion(np.array([-1.0]), np.array([1.0]), 0.0, 0.5))
    m_top = 100.0
    ms = solver.maximal_solution(dom, solver.power_law(3.0), k=1,
                                 m_ladder=(10.0, m_top))
    restarts = spliced = 0
    for s, gf, lat in zip(ms.slabs, ms.final, ms.lattices):
        init = gf.values[..., 0][lat.nodemask]
        if np.min(init) == m_top:
            restarts += 1
        else:
            spliced += 1
            assert np.min(init) < m_top
    # slabs at -1.0 and 0.0 restart from the constant; the others splice
    assert restarts == 2 and spliced == 2


def test_ladder_and_domain_guards(dom1):
    with pytest.raises(ValueError):
        solver.maximal_solution(dom1, solver.power_law(3.0), k=1,
                                m_ladder=(10.0, 5.0))
    with pytest.raises(ValueError):
        solver.maximal_solution(dom1, solver.power_law(3.0), k=1,
                                m_ladder=(-1.0, 5.0))
    tiny = geo.Qtilde(np.zeros(1), 0.0, 0.1)
    with pytest.raises(solver.SolverError):
        solver.maximal_solution(tiny, solver.power_law(3.0), k=1)


def test_sample_nearest_node(ms_pow):
    lat = ms_pow.lattices[4]
    gf = ms_pow.final[4]
    ax = lat.axes()[0]
    i = lat.nshape[0] // 2
    got = ms_pow.sample(np.array([[ax[i]]]), np.array([gf.times[2]]))[0]
    assert got == gf.values[i, 2]
    assert np.isnan(ms_pow.sample(np.array([[5.0]]), np.array([0.0]))[0])
    assert np.isnan(ms_pow.sample(np.array([[0.0]]), np.array([-2.0]))[0])


def test_blowup_lateral_growth(dom1):
    prof, notes = solver.blowup_profile(
        dom1, solver.power_law(3.0), (np.array([1.0]), 0.0),
        deltas=(0.5, 0.25, 0.125, 0.0625), k=3)
    # measured 4.12, 13.69, 135.68, empty at 1/16
    assert notes["empty"] == [False, False, False, True]
    assert prof[0] < prof[1] < prof[2]
    assert prof[2] > 4.0 * prof[0]
    with pytest.raises(ValueError):
        solver.blowup_profile(dom1, solver.power_law(3.0),
                              (np.array([0.0]), 0.0), deltas=(0.5,), k=1)


def test_blowup_ellipsoid_top_saturation():
    # flat sliver below the top of a very flat ellipsoid: the exhaustion
    # stops where level-4 cubes no longer fit, the infima stay flat over
    # the reachable windows, and tighter windows are empty-flagged
    lam = 1700.0 ** 2
    top = 1700.0
    ell = geo.Ellipsoid(np.zeros(2), 0.0, lam)
    box = geo.BoxRegion(np.array([-0.25, -0.25]), np.array([0.25, 0.25]),
                        top - 11.0, top)
    sub = geo.intersection(ell, box)
    bbox = (np.array([-0.25, -0.25]), np.array([0.25, 0.25]),
            top - 11.0, top)
    prof, notes = solver.blowup_profile(
        sub, solver.power_law(2.1), (np.array([0.0, 0.0]), top),
        deltas=(3.3, 3.0, 2.8, 2.65, 2.5), k=4,
        m_ladder=(10.0, 100.0), bbox=bbox)
    assert notes["empty"] == [False, False, False, False, True]
    finite = prof[:4]
    assert np.all(np.isfinite(finite))
    assert np.max(finite) <= 1.05 * np.min(finite)


def test_measure_data_zero_measure():
    gf = solver.measure_data_solve(pot.DiscreteMeasure.empty(2),
                                   solver.power_law(3.0), R=0.5, h=1 / 8,
                                   sigma=1 / 4)
    assert np.max(np.abs(gf.values)) == 0.0


def test_measure_data_floor_single_atom():
    mu = pot.DiscreteMeasure.single(np.zeros(2), 0.0, 1.0)
    gf = solver.measure_data_solve(mu, solver.power_law(3.0), R=1.0,
                                   h=1 / 16, sigma=1 / 4, verify_nodes=128)
    fc = gf.meta["floor_check"]
    assert fc["ok"] and fc["min_margin"] > 0.0
    assert abs(gf.meta["mass_discrete"] - 1.0) < 1e-9
    assert gf.meta["residual_scaled"] < 1e-11


def test_measure_data_guards():
    mu = pot.DiscreteMeasure.single(np.zeros(2), 0.0, 1.0)
    with pytest.raises(ValueError):
        solver.measure_data_solve(mu, solver.power_law(3.0), R=0.5,
                                  h=1 / 8, sigma=1 / 16)
    with pytest.raises(ValueError):
        solver.measure_data_solve(
            mu, solver.hamilton_jacobi_law(1.0, 1.5, 1.0, 2.0),
            R=0.5, h=1 / 8, sigma=1 / 4)


def test_measure_data_exponential_gate_and_floor():
    small = pot.DiscreteMeasure.single(np.zeros(2), 0.0, 0.8)
    gf = solver.measure_data_solve(small, solver.exponential_law(), R=0.5,
                                   h=1 / 8, sigma=1 / 4, verify_nodes=128)
    assert gf.meta["floor_check"]["ok"]
    big = pot.DiscreteMeasure.single(np.zeros(2), 0.0, 20.0)
    with pytest.raises(solver.IntegrabilityError):
        solver.measure_data_solve(big, solver.exponential_law(), R=0.5,
                                  h=1 / 8, sigma=1 / 4)


def test_duhamel_ceilings():
    mu = pot.DiscreteMeasure.single(np.zeros(2), 0.0, 1.0)
    u_abs = solver.measure_data_solve(mu, solver.power_law(3.0), R=0.5,
                                      h=1 / 8, sigma=1 / 4, verify_nodes=0)
    # exact discrete form of "absorption only decreases the solution":
    # a vanishing-absorption run through the same stepper dominates
    heat = solver.hamilton_jacobi_law(0.0, 0.0, 1e-12, 2.0)
    u_lin = solver.measure_data_solve(mu, heat, R=0.5, h=1 / 8,
                                      sigma=1 / 4, verify_nodes=0)
    assert np.max(u_abs.values - u_lin.values) <= 1e-9
    # the lattice Duhamel sum under-resolves the kernel near the source
    # (its own stride-2 estimate is O(1) there), so the continuum ceiling
    # is checked in the far field with the measured one-sided deficit
    src = solver.smoothed_density(mu, 1 / 4, u_abs.axes, u_abs.times)
    f = GridFunction(u_abs.axes, u_abs.times, src, u_abs.h, u_abs.ht, {})
    uh, _ = pot.duhamel_solve(f, 0.5)
    g = np.meshgrid(*u_abs.axes, u_abs.times, indexing="ij")
    rho = np.maximum(np.sqrt(g[0] ** 2 + g[1] ** 2), np.sqrt(np.abs(g[2])))
    far = rho >= 0.3
    assert np.max((u_abs.values - uh.values)[far]) < DUHAMEL_FAR_TOL


def test_hj_reduces_to_power_at_a0(dom1):
    mp = solver.maximal_solution(dom1, solver.power_law(2.0), k=2,
                                 m_ladder=(10.0, 100.0))
    mh = solver.maximal_solution(
        dom1, solver.hamilton_jacobi_law(0.0, 1.5, 1.0, 2.0), k=2,
        m_ladder=(10.0, 100.0))
    worst = max(float(np.nanmax(np.abs(a.values - b.values)))
                for a, b in zip(mp.rungs[-1], mh.rungs[-1]))
    assert worst <= 1e-12


@pytest.mark.parametrize("abpq", [(1.0, 1.5, 1.0, 2.0),
                                  (1.0, 1.5, 2.0, 2.0),
                                  (0.5, 4.0 / 3.0, 3.0, 2.5)])
def test_hj_supersolution_ceiling(dom1, abpq):
    a, p, b, q = abpq
    ms = solver.hj_solve(dom1, a, p, b, q, k=2, m_ladder=(10.0, 100.0))
    assert ms.diagnostics["ceiling_ok"]
    assert ms.diagnostics["ceiling_violation"] <= 1e-9


def test_cross_exponent_ordering(dom1, ms_pow):
    # q1 < q: the q1-sweep dominates the transformed q-sweep, with the
    # floor constant from the calibrated interior barrier at its rigorous
    # value a0 = ((q-1)(2R^2 + sup t))^(-1/(q-1))
    q1, q = 2.0, 3.0
    ms1 = solver.maximal_solution(dom1, solver.power_law(q1), k=2)
    a0 = ((q - 1.0) * (2.0 + 1.0)) ** (-1.0 / (q - 1.0))
    gamma = a0 ** ((q - q1) / (q1 - 1.0))
    worst = -np.inf
    umin = np.inf
    for g1, gq, lat in zip(ms1.rungs[-1], ms_pow.rungs[-1], ms_pow.lattices):
        ii = lat.interior
        worst = max(worst, float(np.max(
            gamma * gq.values[ii, 1:] - g1.values[ii, 1:])))
        umin = min(umin, float(np.min(gq.values[ii, 1:])))
    assert umin >= a0  # the transform stays a subsolution
    assert worst <= 1e-9


def test_refinement_first_order(dom1):
    vals = []
    for nsub in (2, 4, 8):
        ms = solver.maximal_solution(dom1, solver.power_law(3.0), k=2,
                                     m_ladder=(10.0, 100.0), nsub=nsub)
        vals.append(ms.sample(np.array([[0.0]]), np.array([0.0]))[0])
    assert vals[0] > vals[1] > vals[2]  # toward the continuum from above
    d1, d2 = vals[0] - vals[1], vals[1] - vals[2]
    assert REFINE_RATIO_BAND[0] < d1 / d2 < REFINE_RATIO_BAND[1]


def test_smoothed_density_mass():
    mu = pot.DiscreteMeasure.single(np.zeros(2), 0.0, 1.0)
    axes = tuple(np.linspace(-1, 1, 33) for _ in range(2))
    times = np.linspace(-1, 1, 513)
    dens = solver.smoothed_density(mu, 0.25, axes, times)
    h, ht = axes[0][1] - axes[0][0], times[1] - times[0]
    assert abs(dens.sum() * h ** 2 * ht - 1.0) < 1e-9


def test_discrete_residual_signs(ms_pow):
    # converged slabs have near-zero residual at interior nodes
    gf = ms_pow.final[6]
    res = solver.discrete_residual(gf, ms_pow.law)
    fin = np.isfinite(res)
    assert fin.any()
    assert np.max(np.abs(res[fin])) < 1e-5
    # the scaled power run is a discrete supersolution of the HJ law
    hj = solver.hamilton_jacobi_law(1.0, 1.5, 2.0, 2.0)
    fac = 2.0 ** (-1.0 / (2.0 - 1.0))
    mp = solver.maximal_solution(ms_pow.domain, solver.power_law(2.0), k=2,
                                 m_ladder=(10.0 / fac,))
    g = mp.final[6]
    w = GridFunction(g.axes, g.times, fac * g.values, g.h, g.ht,
                     {**g.meta, "lateral_value": fac * g.meta["lateral_value"]})
    res_w = solver.discrete_residual(w, hj)
    fin = np.isfinite(res_w)
    assert np.min(res_w[fin]) >= -1e-9


def test_assemble_rejects_edge_interior():
    bad = np.ones((4, 4), bool)
    with pytest.raises(ValueError):
        solver._assemble(bad, 0.25)
