import math
from fractions import Fraction

import numpy as np
import pytest

from dnp2d.analysis import (
    decay_fit,
    empirical_nash_constant,
    lp_norm,
    moser_constants,
    nash_ratio,
    write_fit_csv,
)
from dnp2d.errors import DomainError
from dnp2d.field2d import Field2D, dilate_box
from dnp2d.radial_pde import RadialGrid


def test_decay_fit_exact_power():
    t = np.geomspace(1, 100, 20)
    fit = decay_fit(t, t**-0.5, (1, 100))
    assert fit.exponent == pytest.approx(-0.5, abs=1e-12)
    assert fit.residual_rms < 1e-12
    assert fit.n_points == 20


@pytest.mark.parametrize("alpha", [-0.25, -0.5, -0.75, -1.0])
def test_decay_fit_recovers_synthetic(alpha):
    t = np.geomspace(2, 500, 40)
    assert abs(decay_fit(t, 7 * t**alpha).exponent - alpha) < 1e-3


def test_decay_fit_perturbed():
    t = np.geomspace(1, 1000, 60)
    fit = decay_fit(t, 3 * t**-0.75 * (1 + 0.01 * np.sin(np.log(t))))
    assert abs(fit.exponent + 0.75) < 0.01


def test_decay_fit_errors():
    t = np.geomspace(1, 10, 10)
    with pytest.raises(DomainError):
        decay_fit(t, -t)
    with pytest.raises(DomainError):
        decay_fit(t, t, (5, 6))
    with pytest.raises(DomainError):
        decay_fit(t, t, (0.5, 10))


def test_fit_csv(tmp_path):
    t = np.geomspace(1, 10, 6)
    fit = decay_fit(t, t**-1.0)
    write_fit_csv(tmp_path / "fit.csv", t, t**-1.0, fit)
    lines = (tmp_path / "fit.csv").read_text().splitlines()
    assert lines[0] == "t,value,fitted" and len(lines) == 7


def test_moser_small_values():
    mc = moser_constants(2.0, 4)
    assert np.allclose(mc.a_seq[:3], [1.0, 2.0, 16.0], rtol=1e-15)
    assert list(mc.w_seq) == [-1, -2, -3, -4]
    # a_3 = 2^7 2^-3
    assert mc.a_seq[2] == 2.0**7 * 2.0**-3


def _exact_recurrence(C, k_max):
    a = [C / 2]
    for k in range(2, k_max + 1):
        a.append(C * Fraction(2) ** (k - 2) * a[-1] ** 2)
    return a


@pytest.mark.parametrize("C", [0.7, 1.0, 2.0, 5.0])
def test_moser_closed_form(C):
    mc = moser_constants(C, 30)
    assert mc.closed_form_gap() < 1e-12
    assert np.all(mc.w < 0)
    # independent route: exact rational recurrence for the first terms
    exact = _exact_recurrence(Fraction(C), 8)
    for k, a in enumerate(exact, start=1):
        log2_exact = math.log2(a.numerator) - math.log2(a.denominator)
        assert mc.log2_a[k - 1] == pytest.approx(log2_exact, rel=1e-12, abs=1e-12)
    roots = mc.roots
    assert mc.root_gaps()[-1] < 1e-3
    assert np.all(roots <= C * (1 + 1e-15))


def test_moser_guards():
    with pytest.raises(DomainError):
        moser_constants(0.0)
    with pytest.raises(DomainError):
        moser_constants(1.0, 41)
    big = moser_constants(10.0, 40)
    assert math.isinf(big.a_seq[-1]) and np.isfinite(big.log2_a[-1])


# ||u||_2^2 = pi/2, ||u||_1 = pi, ||grad u||_2^2 = pi for u = exp(-|x|^2), each by scipy quad
NASH_GAUSSIAN = 0.5311259660135984


def test_nash_gaussian():
    assert NASH_GAUSSIAN == pytest.approx(2**-0.5 * math.pi**-0.25, rel=1e-14)
    u = Field2D.from_function(lambda x, y: np.exp(-(x * x + y * y)), 128, 20.0)
    assert nash_ratio(u) == pytest.approx(NASH_GAUSSIAN, abs=1e-10)
    wide = Field2D.from_function(lambda x, y: np.exp(-(x * x + y * y) / 9), 128, 60.0)
    assert nash_ratio(wide) == pytest.approx(NASH_GAUSSIAN, abs=1e-10)


def test_nash_invariances():
    u = Field2D.from_function(lambda x, y: np.exp(-(x * x + y * y) / 3) + 0.5 * np.exp(-((x - 2) ** 2 + y * y)), 128, 32.0)
    r = nash_ratio(u)
    assert nash_ratio(dilate_box(u, 2)) == pytest.approx(r, rel=1e-10)
    sampled = Field2D.from_function(lambda x, y: np.exp(-4 * (x * x + y * y) / 3) + 0.5 * np.exp(-((2 * x - 2) ** 2 + 4 * y * y)), 128, 16.0)
    assert nash_ratio(sampled) == pytest.approx(r, rel=1e-10)
    assert nash_ratio(u.with_values(7.5 * u.values)) == pytest.approx(r, rel=1e-12)


def test_nash_errors():
    with pytest.raises(DomainError):
        nash_ratio(Field2D(np.zeros((32, 32)), 1.0))
    with pytest.raises(DomainError):
        nash_ratio(Field2D(np.ones((32, 32)), 1.0))


def test_empirical_nash_constant(rng):
    rep = empirical_nash_constant(rng, fields=40)
    assert 0 < rep["max_ratio"] < 1
    assert abs(rep["max_ratio_refined"] / rep["max_ratio"] - 1) < 0.02


def test_lp_norm_dispatch():
    f = Field2D.from_function(lambda x, y: np.exp(-(x * x + y * y)) / math.pi, 128, 20.0)
    assert lp_norm(f, 1) == pytest.approx(1.0, rel=1e-10)
    # ||e^{-r^2}/pi||_{4/3} = (3/4)^{3/4} pi^{-1/4}
    assert lp_norm(f, 4 / 3) == pytest.approx(0.75**0.75 * math.pi**-0.25, rel=1e-10)
    assert lp_norm(f.with_values(np.zeros((128, 128))), 2) == 0
    g = RadialGrid.geometric(512, 20.0, 1.01)
    assert lp_norm(np.exp(-g.nodes**2) / math.pi, 4 / 3, g.nodes) == pytest.approx(0.75**0.75 * math.pi**-0.25, rel=1e-4)
    with pytest.raises(DomainError):
        lp_norm(np.ones(3), 2)
