import math

import mpmath as mp
import numpy as np
import pytest

from kompaneets import analytic as an
from kompaneets.errors import (
    IndexOutOfRange,
    LengthMismatch,
    NegativeDensity,
    NegativeEnergy,
    NonpositiveTime,
    SlopeNotSupercritical,
    TargetNonpositive,
    TargetTooLarge,
)
from kompaneets.grid import build_geometric_mesh, refine

mp.mp.dps = 40


def mp_be(mu, x):
    x = mp.mpf(x)
    return x * x / mp.expm1(x + mu)


def mp_m(x):
    x = mp.mpf(x)
    return x * x * mp.e**x / mp.expm1(x) ** 2


# -- equilibria -------------------------------------------------------------

@pytest.mark.parametrize("mu,x", [(0, 1e-7), (0, 1e-3), (0, 1.0), (0, 29.0), (1, 1.0),
                                  (0.5, 3.0), (5, 0.2), (1e-9, 1e-9)])
def test_be_density_against_mpmath(mu, x):
    assert an.be_density(mu, x) == pytest.approx(float(mp_be(mu, x)), rel=1e-13)


def test_be_density_limits():
    assert an.be_density(0.0, 0.0) == 0.0
    assert an.be_density(2.0, 0.0) == 0.0
    assert an.be_density(0.0, 1e-9) / 1e-9 == pytest.approx(1.0, rel=1e-8)
    assert an.be_density(1.0, 1.0) == pytest.approx(1 / (math.e**2 - 1), rel=1e-14)
    with pytest.raises(NegativeEnergy):
        an.be_density(0.0, -1.0)
    with pytest.raises(ValueError):
        an.be_density(-0.1, 1.0)


def test_be_density_decreasing_in_mu():
    x = np.linspace(0.01, 20, 50)
    prev = an.be_density(0.0, x)
    for mu in (0.1, 0.5, 1.0, 3.0):
        cur = an.be_density(mu, x)
        assert np.all(cur < prev)
        prev = cur


def test_occupation_round_trip():
    x = np.linspace(0.1, 10, 20)
    f = an.be_occupation(0.3, x)
    np.testing.assert_allclose(an.density_to_occupation(x, an.occupation_to_density(x, f)), f)
    np.testing.assert_allclose(an.occupation_to_density(x, f), an.be_density(0.3, x), rtol=1e-14)


# -- photon numbers ---------------------------------------------------------

def test_zeta3_series_matches_mpmath():
    assert abs(an.zeta3() - float(mp.zeta(3))) < 1e-15
    assert an.planck_photon_number() == pytest.approx(2.404113806319188, abs=1e-12)


def test_zeta3_tail_bound():
    K = 10_000
    tail = float(mp.zeta(3) - mp.nsum(lambda k: 1 / mp.mpf(k) ** 3, [1, K]))
    assert 0 < tail <= an.zeta3_tail_bound(K) < 1e-8


@pytest.mark.parametrize("mu", [0.0, 1e-4, 0.05, 0.0999, 0.1, 0.5, 1.0, 4.0, 30.0])
def test_equilibrium_number_is_polylog(mu):
    ref = float(2 * mp.polylog(3, mp.e ** (-mp.mpf(mu))))
    assert an.equilibrium_photon_number(mu) == pytest.approx(ref, rel=1e-13)


def test_photon_number_examples(canon):
    assert an.photon_number(canon, np.zeros(canon.M + 1)) == 0.0
    n0 = an.be_density(0.0, canon.nodes)
    assert abs(an.photon_number(canon, n0) - an.planck_photon_number()) < 2e-3
    # piecewise-linear hat of unit area is integrated exactly
    fine = build_geometric_mesh(2000, 4.0, 0.004)
    hat = np.clip(1 - np.abs(fine.nodes - 2.0), 0, None)
    assert an.photon_number(fine, hat) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(LengthMismatch):
        an.photon_number(canon, n0[:-1])


def test_fine_mesh_quadrature_matches_series():
    fine = build_geometric_mesh(20000, 40.0, 0.01)
    N = an.photon_number(fine, an.be_density(0.0, fine.nodes))
    assert abs(N - an.planck_photon_number()) < 1e-4


@pytest.mark.parametrize("target", [1e-6, 0.3, 0.5 * 2.404113806319188, 2.0, 2.404])
def test_solve_mu_round_trip(target):
    mu = an.solve_mu_for_number(target).mu
    assert abs(an.equilibrium_photon_number(mu) - target) < 1e-8


def test_solve_mu_endpoints_and_errors():
    assert an.solve_mu_for_number(an.planck_photon_number()).mu == 0.0
    assert an.solve_mu_for_number(1e-6).mu > 10
    with pytest.raises(TargetTooLarge):
        an.solve_mu_for_number(2.5)
    with pytest.raises(TargetNonpositive):
        an.solve_mu_for_number(0.0)


@pytest.mark.parametrize("mu", [0.0, 0.5, 1.0, 2.0])
def test_solve_mu_on_mesh_recovers_sampled(canon, mu):
    N = an.photon_number(canon, an.be_density(mu, canon.nodes))
    assert an.solve_mu_on_mesh(canon, N).mu == pytest.approx(mu, abs=1e-9)


# -- super-solutions and bounds --------------------------------------------

@pytest.mark.parametrize("x", [1e-8, 0.01, 1.0, 7.0])
def test_super_weight_against_mpmath(x):
    assert an.super_weight(x) == pytest.approx(float(mp_m(x)), rel=1e-12)


def test_super_solution_examples():
    assert an.super_weight(0.0) == 1.0
    assert an.super_solution(2.5, 0.0) == 2.5
    x = np.linspace(0, 10, 41)
    np.testing.assert_array_equal(an.super_solution(0.0, x), an.be_density(0.0, x))
    ref = float(1 / (mp.e - 1) + mp.e / (mp.e - 1) ** 2)
    assert an.super_solution(1.0, 1.0) == pytest.approx(ref, rel=1e-14)
    for g in (0.0, 0.1, 3.0):
        assert np.all(an.super_solution(g, x) >= an.be_density(0.0, x))


def test_riccati_bound():
    assert an.riccati_onset_bound(2.0) == pytest.approx(0.5 * math.log(2), rel=1e-15)
    assert an.riccati_onset_bound(1 + 1e-9) == pytest.approx(0.5 * math.log(1e9), rel=1e-6)
    slopes = [1.001, 1.5, 2, 4, 100, 1e6]
    vals = [an.riccati_onset_bound(s) for s in slopes]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-6
    for bad in (1.0, 0.5, -3):
        with pytest.raises(SlopeNotSupercritical):
            an.riccati_onset_bound(bad)


def test_oleinik_envelope():
    assert an.oleinik_envelope(0.0, 1e300, 0.0) == pytest.approx(0.0, abs=1e-299)
    assert an.oleinik_envelope(0.0, 1.0, 4.0) == pytest.approx(-2.5)
    assert an.oleinik_envelope(1.0, 1.0, 0.0) == pytest.approx(-3.0)
    with pytest.raises(NonpositiveTime):
        an.oleinik_envelope(0.0, 0.0, 1.0)


# -- entropy ----------------------------------------------------------------

def test_entropy_density_against_mpmath():
    for x, n in [(0.5, 0.2), (3.0, 1e-4), (1e-5, 2.0), (10.0, 5e-3)]:
        X, N = mp.mpf(x), mp.mpf(n)
        ref = X * N - N * mp.log(1 + X * X / N) - X * X * mp.log(1 + N / (X * X))
        assert an.entropy_density(x, n) == pytest.approx(float(ref), rel=1e-12)
    assert an.entropy_density(2.0, 0.0) == 0.0
    assert an.entropy_density(0.0, 3.0) == 0.0


def test_entropy_zero_and_errors(canon):
    assert an.entropy(canon, np.zeros(canon.M + 1)) == 0.0
    bad = np.zeros(canon.M + 1)
    bad[5] = -1.0
    with pytest.raises(NegativeDensity):
        an.entropy(canon, bad)


def test_entropy_of_equilibria_ordered_in_mu(canon):
    # dH/dmu = mu * int x^2 e^(x+mu) / (e^(x+mu) - 1)^2 > 0 along the family
    H = [an.entropy(canon, an.be_density(mu, canon.nodes)) for mu in (0, 0.5, 1, 2)]
    assert all(a < b for a, b in zip(H, H[1:]))


def test_entropy_converges_under_refinement(canon):
    m = canon
    vals = []
    for _ in range(3):
        vals.append(an.entropy(m, an.be_density(0.0, m.nodes)))
        m = refine(m)
    d1, d2 = abs(vals[1] - vals[0]), abs(vals[2] - vals[1])
    assert d2 < 1e-6
    assert 3.0 < d1 / d2 < 5.0  # second-order self-convergence


@pytest.mark.parametrize("mu", [0.0, 0.5, 1.0, 5.0])
def test_dissipation_vanishes_on_equilibria(canon, mu):
    assert 0 <= an.dissipation(canon, an.be_density(mu, canon.nodes)) < 1e-8


def test_dissipation_positive_and_stable():
    m = build_geometric_mesh(2000, 30.0, 0.2)
    d1 = an.dissipation(m, 1.5 * an.be_density(0.0, m.nodes))
    m2 = refine(m)
    d2 = an.dissipation(m2, 1.5 * an.be_density(0.0, m2.nodes))
    assert d1 > 0 and d2 > 0
    assert abs(d2 / d1 - 1) < 0.05
    assert an.dissipation(m, np.zeros(m.M + 1)) == 0.0


# -- flux -------------------------------------------------------------------

def test_flux_of_equilibrium_small(canon):
    for mu in (0.0, 1.0):
        J = an.flux_interior(canon, an.be_density(mu, canon.nodes))
        assert np.max(np.abs(J)) < 1e-4


def test_flux_of_super_solution(canon):
    g = 0.7
    S = an.super_solution(g, canon.nodes)
    J = an.flux_interior(canon, S)
    expected = g * g * an.super_weight(canon.nodes[1:-1]) ** 2
    err = np.max(np.abs(J - expected))
    assert err < 2e-4
    fine = refine(canon)
    Sf = an.super_solution(g, fine.nodes)
    err_f = np.max(np.abs(an.flux_interior(fine, Sf) - g * g * an.super_weight(fine.nodes[1:-1]) ** 2))
    assert err_f < 0.6 * err
    assert an.flux(canon, S, 100) == pytest.approx(J[99])
    assert an.flux(canon, np.zeros(canon.M + 1), 5) == 0.0
    with pytest.raises(IndexOutOfRange):
        an.flux(canon, S, 0)
    with pytest.raises(IndexOutOfRange):
        an.flux(canon, S, canon.M)


def test_flux_error_shrinks_under_refinement():
    m = build_geometric_mesh(500, 30.0, 0.3)
    errs = []
    for _ in range(3):
        n = an.be_density(0.0, m.nodes)
        i = int(np.searchsorted(m.nodes, 2.0))
        errs.append(abs(an.flux(m, n, i)))
        m = refine(m)
    assert errs[2] < errs[1] < errs[0]


def test_mass_floor(canon):
    n0 = an.be_density(0.0, canon.nodes)
    N0 = an.photon_number(canon, n0)
    assert an.mass_floor(canon, 2 * n0) == pytest.approx(N0)
    assert an.mass_floor(canon, np.zeros_like(n0)) == 0.0
    assert an.mass_floor(canon, 0.5 * n0) == pytest.approx(0.5 * N0, rel=1e-12)
