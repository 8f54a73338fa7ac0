import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad, solve_ivp

from dnp2d.errors import DomainError, SingularityError
from dnp2d.profile_ode import (
    integrate_profile,
    integrate_supercritical,
    load_profile,
    mass_to_shoot,
    ode_rhs,
    picard_operator,
    picard_solve,
    profile_for_mass,
    save_profile,
    self_similar_density,
    shoot_to_mass,
    upper_bound,
)

# xi(inf) from scipy's DOP853 at rtol=1e-12, y in [1e-5, 400]: an independent integrator
DOP853_MASS = {
    0.05: 0.21504047067736137,
    0.1: 0.46581670862723185,
    0.2: 1.125926764357412,
    0.3: 2.176420240828337,
    0.4: 4.31977122879425,
}


def test_mass_to_shoot_paper_value():
    assert mass_to_shoot(8 * math.pi) == pytest.approx(1 / 3, rel=1e-15)


def test_mass_to_shoot_limits():
    assert 0 < mass_to_shoot(1e-12) < 1e-12
    a = mass_to_shoot(2 * math.pi * 1e12)
    assert a < 0.5
    # m/(2m + 4) = 1/2 - 1/(m + 2)
    assert a == pytest.approx(0.5 - 1 / (1e12 + 2), abs=1e-15)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_mass_to_shoot_rejects(bad):
    with pytest.raises(DomainError):
        mass_to_shoot(bad)


@pytest.mark.parametrize("a, m", [(1 / 3, 4.0), (0.0, 0.0), (0.25, 2.0)])
def test_shoot_to_mass(a, m):
    pm = shoot_to_mass(a)
    assert pm.m == pytest.approx(m, rel=1e-14, abs=0)
    assert pm.M_phys == 2 * math.pi * pm.m


@pytest.mark.parametrize("bad", [0.5, 0.7, -0.1])
def test_shoot_to_mass_rejects(bad):
    with pytest.raises(DomainError):
        shoot_to_mass(bad)


def test_round_trip_six_decades():
    for M in np.geomspace(1e-3, 1e3, 25):
        back = shoot_to_mass(mass_to_shoot(M)).M_phys
        assert abs(back - M) <= 1e-12 * M


def test_ode_rhs_examples():
    assert ode_rhs(0.0, 0.0, 1 / 3) == pytest.approx(-1 / 36, rel=1e-15)
    assert ode_rhs(0.0, 0.0, 0.5) == 0.0
    assert ode_rhs(2.0, 0.5, 0.2) == pytest.approx(-0.025, rel=1e-14)
    # regularized form is regular at the origin
    assert ode_rhs(0.0, 0.0, 0.2, eps=1e-3) == pytest.approx(-0.05)
    with pytest.raises(SingularityError):
        ode_rhs(0.0, 0.1, 0.2)


@pytest.mark.parametrize("a", sorted(DOP853_MASS))
def test_profile_mass_matches_independent_integrator(a):
    p = integrate_profile(a, 200.0, 1e-10)
    assert p.m_tail == pytest.approx(DOP853_MASS[a], rel=1e-8)


def test_small_slope_mass_expansion():
    # regular perturbation: m(a) = 4a + 8 ln2 a^2 + O(a^3)
    a = 1e-4
    p = integrate_profile(a, 200.0, 1e-13)
    assert abs(p.m_tail - (4 * a + 8 * math.log(2) * a * a)) < 50 * a**3


def test_tiny_slope_linearization():
    a = 1e-6
    p = integrate_profile(a, 200.0, 1e-14)
    lin = -4 * a * np.expm1(-p.y_grid[1:] / 4)
    rel = np.abs(p.xi[1:] / lin - 1)
    # first correction is a^2 * xi_1 with xi_1(inf) = 8 ln2, i.e. relative 2 ln2 a
    assert rel.max() <= 2 * math.log(2) * a * 1.01
    assert rel[-1] == pytest.approx(2 * math.log(2) * a, rel=1e-2)


def test_profile_bounds_example():
    p = integrate_profile(0.3, 200.0, 1e-10)
    assert p.invariant_violations() == []
    assert np.all((p.xi_prime[1:] > 0) & (p.xi_prime[1:] < 0.3))
    assert np.all((p.xi_second[1:] > -0.125) & (p.xi_second[1:] < 0))


@settings(max_examples=30, deadline=None)
@given(a=st.floats(1e-3, 0.48), tol=st.sampled_from([1e-6, 1e-8, 1e-10]))
def test_invariants_property(a, tol):
    p = integrate_profile(a, 150.0, tol)
    assert p.invariant_violations() == []
    assert np.all(p.xi <= upper_bound(a, p.y_grid) + tol)


def test_upper_bound_is_one_sided():
    p = integrate_profile(0.2, 200.0, 1e-10)
    assert p.m_tail < upper_bound(0.2, np.inf)


def test_supercritical_keeps_slope_above_half():
    p = integrate_supercritical(0.6, 50.0)
    assert np.all(p.xi_prime > 0.5)
    # the a > 1/2 branch runs off to infinity before y = 50
    assert p.meta["blowup_y"] == pytest.approx(16.656, abs=1e-2)
    with pytest.raises(DomainError):
        integrate_supercritical(0.3)


def test_half_slope_is_linear():
    p = integrate_supercritical(0.5, 20.0)
    assert np.allclose(p.xi, p.y_grid / 2, atol=1e-9)


def test_regularization_converges():
    ref = integrate_profile(0.1, 200.0, 1e-10)
    gaps = [
        np.max(np.abs(integrate_profile(0.1, 200.0, 1e-10, eps=e).xi_at(ref.y_grid) - ref.xi))
        for e in (1e-2, 1e-3, 1e-4)
    ]
    assert gaps[0] > gaps[1] > gaps[2]


def test_picard_matches_rk():
    pic = picard_solve(0.1, 1.0, 1e-8)
    rk = integrate_profile(0.1, 1.0, 1e-10)
    assert np.max(np.abs(pic.xi - rk.xi_at(pic.y_grid))) < 1e-7
    assert np.max(np.abs(pic.xi_prime - rk.xi_prime_at(pic.y_grid))) < 1e-7


def test_picard_zero_slope():
    p = picard_solve(0.0, 1.0, 1e-12)
    assert np.all(p.xi == 0) and np.all(p.xi_prime == 0)


def test_picard_operator_preserves_initial_data(rng):
    y = np.linspace(0, 1, 101)
    xi = 0.2 * y + 0.01 * rng.standard_normal(101) * y**2
    xp = np.gradient(xi, y)
    hx, hxp = picard_operator(0.2, y, xi, xp)
    assert hx[0] == 0.0
    assert hxp[0] == pytest.approx(0.2, abs=1e-15)


def test_profile_for_mass_hits_target():
    p = profile_for_mass(2 * math.pi, tol=1e-6)
    assert p.meta["a_closed_form"] == pytest.approx(1 / 6)
    assert p.a > 1 / 6
    assert abs(p.m_tail - 1.0) <= 1e-6
    q = profile_for_mass(8 * math.pi, tol=1e-3)
    assert abs(q.m_tail - 4.0) <= 4e-3
    assert q.a > 1 / 3


def test_profile_for_mass_unrefined_uses_closed_form():
    p = profile_for_mass(8 * math.pi, tol=1e-3, refine=False)
    assert p.a == pytest.approx(1 / 3)


def test_density_origin_and_scaling():
    p = integrate_profile(0.1, 200.0, 1e-10)
    assert self_similar_density(p, 0.0, 1.0) == pytest.approx(0.2, rel=1e-14)
    r = np.linspace(0, 6, 31)
    lam = 2.0
    assert np.allclose(self_similar_density(p, lam * r, lam**2 * 1.7), self_similar_density(p, r, 1.7) / lam**2, rtol=1e-13, atol=0)
    with pytest.raises(DomainError):
        self_similar_density(p, 1.0, 0.0)


@pytest.mark.parametrize("t", [0.5, 1.0, 7.0])
def test_density_integrates_to_charge(t):
    p = integrate_profile(0.1, 200.0, 1e-10)
    val, _ = quad(lambda r: 2 * math.pi * r * float(self_similar_density(p, r, t)), 0, 60 * math.sqrt(t), limit=400)
    assert val == pytest.approx(p.M_phys, rel=1e-7)


def test_interpolation_against_dense_oracle():
    a = 0.2
    p = integrate_profile(a, 50.0, 1e-10)
    y0 = 1e-6
    sol = solve_ivp(
        lambda y, z: [z[1], -z[1] / 4 + z[0] * z[1] / (2 * y)],
        [y0, 50.0],
        [a * y0, a + 0.5 * a * (a - 0.5) * y0],
        method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True,
    )
    ys = np.linspace(0.01, 49.9, 997)
    assert np.max(np.abs(p.xi_at(ys) - sol.sol(ys)[0])) < 1e-8
    assert np.max(np.abs(p.xi_prime_at(ys) - sol.sol(ys)[1])) < 1e-8


def test_serialization_round_trip(tmp_path):
    p = integrate_profile(0.1, 50.0, 1e-8)
    paths = save_profile(p, tmp_path / "prof")
    meta = json.loads(paths[1].read_text())
    assert set(meta) >= {"a", "m_tail", "M_phys", "eps_reg", "tol", "solver"}
    assert paths[0].read_text().splitlines()[0] == "y,xi,xi_prime"
    q = load_profile(tmp_path / "prof")
    assert np.array_equal(q.xi, p.xi) and q.a == p.a and q.m_tail == p.m_tail
