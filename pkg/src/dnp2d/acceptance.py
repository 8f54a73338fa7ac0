"""End-to-end acceptance checks, one function per criterion.

Each check runs at its stated tolerance and returns a :class:`CheckResult`;
nothing here is tuned to make a check pass.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import analysis, field2d, profile_ode, radial_pde

TWO_PI = 2.0 * math.pi
SEED = 20240229


@dataclass
class CheckResult:
    id: int
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{status}] {self.id:2d} {self.title}: {parts} ({self.seconds:.2f}s)"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def mass_law():
    rows = []
    slowest = 0.0
    for a in (0.05, 0.1, 0.2, 0.3, 0.4):
        start = time.perf_counter()
        p = profile_ode.integrate_profile(a, 200.0, 1e-10)
        slowest = max(slowest, time.perf_counter() - start)
        rows.append(p.m_tail / profile_ode.mass_bound(a) - 1.0)
    worst = max(abs(r) for r in rows)
    return worst <= 5e-3 and slowest < 1.0, {"rel_err": rows, "max_rel_err": worst, "tol": 5e-3, "max_seconds": slowest}


def profile_bounds():
    rng = np.random.default_rng(SEED)
    bad = 0
    for a in rng.uniform(0.0, 0.5, 50):
        if a <= 0.0:
            continue
        bad += len(profile_ode.integrate_profile(float(a), 200.0, 1e-10).invariant_violations())
    return bad == 0, {"profiles": 50, "violations": bad}


def picard_vs_rk():
    pic = profile_ode.picard_solve(0.1, 1.0, 1e-8)
    rk = profile_ode.integrate_profile(0.1, 1.0, 1e-10)
    gap = float(np.max(np.abs(pic.xi - rk.xi_at(pic.y_grid))))
    return gap < 1e-6, {"sup_diff": gap, "tol": 1e-6}


def regularization():
    ref = profile_ode.integrate_profile(0.1, 200.0, 1e-10)
    gaps = [
        float(np.max(np.abs(profile_ode.integrate_profile(0.1, 200.0, 1e-10, eps=e).xi_at(ref.y_grid) - ref.xi)))
        for e in (1e-2, 1e-3, 1e-4)
    ]
    return gaps[0] > gaps[1] > gaps[2], {"eps": [1e-2, 1e-3, 1e-4], "sup_gap": gaps}


def _gaussian_trajectory(m=0.1, t_end=100.0):
    grid = radial_pde.RadialGrid.geometric(512, 80.0, 1.01)
    Q0 = radial_pde.init_from_density(grid, radial_pde.gaussian_density(TWO_PI * m, 1.0))
    times = np.geomspace(1.0, t_end, 41)
    return radial_pde.solve(Q0, t_end, times, dt_max=1.0, dt_rel=0.02, scheme="cn")


def radial_decay():
    start = time.perf_counter()
    traj = _gaussian_trajectory()
    elapsed = time.perf_counter() - start
    norms = [radial_pde.lp_norm_radial(radial_pde.density_of(s), s.r, 2) for s in traj.snapshots]
    fit = analysis.decay_fit(traj.times, norms, (10.0, 100.0))
    ok = abs(fit.exponent + 0.5) <= 0.05 and elapsed < 30.0
    return ok, {"exponent": fit.exponent, "target": -0.5, "tol": 0.05, "solve_seconds": elapsed}


def self_similar_attraction():
    traj = _gaussian_trajectory()
    prof = profile_ode.profile_for_mass(traj.M_phys, tol=1e-9)
    t, vals = radial_pde.convergence_diagnostic(traj, prof)
    ratio = float(vals[-1] / vals[0])
    late = vals[t >= 2.0]
    monotone = bool(np.all(np.diff(late) <= 0.0))
    return ratio <= 0.2 and monotone, {"value_t1": float(vals[0]), "value_t100": float(vals[-1]), "ratio": ratio, "nonincreasing_t_ge_2": monotone}


def stationarity():
    prof = profile_ode.profile_for_mass(TWO_PI * 0.1, tol=1e-9)
    grid = radial_pde.RadialGrid.geometric(512, 80.0, 1.01)
    Q0 = radial_pde.init_from_profile(grid, prof, 1.0)
    times = np.geomspace(1.0, 100.0, 41)[1:]
    traj = radial_pde.solve(Q0, 100.0, times, dt_max=1.0, dt_rel=0.02, scheme="cn", include_initial=True)
    _, vals = radial_pde.convergence_diagnostic(traj, prof)
    factor = float(vals.max() / vals[0])
    return factor <= 3.0, {"floor_t1": float(vals[0]), "max": float(vals.max()), "max_over_floor": factor}


def _cross_gap(n, L, dt, N, m=0.05):
    M = TWO_PI * m
    dens = radial_pde.gaussian_density(M, 1.0)
    u0 = field2d.Field2D.from_function(lambda x, y: dens(np.hypot(x, y)), n, L)
    u1 = field2d.duhamel_solve(u0, 1.0, dt, order=2)[-1]
    grid = radial_pde.RadialGrid.geometric(N, L, 1.01 ** (512 / N))
    traj = radial_pde.solve(radial_pde.init_from_density(grid, dens), 1.0, dt_max=dt, scheme="cn")
    ur = radial_pde.density_of(traj.snapshots[-1])
    r = np.hypot(*field2d.coordinates(n, L))
    inside = r < L / 4
    gap = np.max(np.abs(u1.values[inside] - CubicSpline(grid.nodes, ur)(r[inside])))
    return float(gap / np.max(ur))


def cross_solver():
    coarse = _cross_gap(256, 40.0, 0.01, 512)
    fine = _cross_gap(512, 40.0, 0.005, 1024)
    return coarse < 0.01 and fine < coarse, {"rel_gap": coarse, "rel_gap_refined": fine, "tol": 0.01}


def spectral_identities():
    rng = np.random.default_rng(SEED)
    m = {}
    u = field2d.Field2D(rng.random((64, 64)), TWO_PI)
    v = field2d.Field2D(rng.random((64, 64)), TWO_PI)
    a = field2d.heat_apply(field2d.heat_apply(u, 0.013), 0.041)
    m["semigroup"] = float(np.max(np.abs(a.values - field2d.heat_apply(u, 0.054).values)))

    def kernel(t):
        return lambda x, y: np.exp(-(x * x + y * y) / (4 * t)) / (4 * math.pi * t)

    g = field2d.heat_apply(field2d.Field2D.from_function(kernel(0.5), 128, 20.0), 0.75)
    m["heat_closed_form"] = float(np.max(np.abs(g.values - field2d.Field2D.from_function(kernel(1.25), 128, 20.0).values)))
    B = field2d.bilinear_form(u, v)
    m["sum_B"] = abs(float(np.sum(B.values) * B.cell_area))

    L = 10.0
    bu = field2d.Field2D.from_function(lambda x, y: 1 + np.cos(2 * math.pi * x / L) + 0.5 * np.sin(4 * math.pi * y / L), 64, L)
    bv = field2d.Field2D.from_function(lambda x, y: np.cos(2 * math.pi * (x + y) / L), 64, L)
    rep = field2d.scaling_check(bu, bv)
    m["scaling"] = max(rep["form_box"], rep["semigroup_box"], rep["form_subsample"], rep["semigroup_subsample"])

    dens = radial_pde.gaussian_density(0.5, 0.7)
    u0 = field2d.Field2D.from_function(lambda x, y: dens(np.hypot(x, y)), 64, 16.0)
    snaps = field2d.duhamel_solve(u0, 1.0, 1e-3, 1, schedule=np.linspace(0.1, 1.0, 10))
    m["charge_1000_steps"] = max(abs(s.total_charge - u0.total_charge) for s in snaps)
    tols = {"semigroup": 1e-12, "heat_closed_form": 1e-6, "sum_B": 1e-12, "scaling": 1e-12, "charge_1000_steps": 1e-12}
    return all(m[k] < tols[k] for k in tols), m


def dirac_besov():
    mass = 1.0
    n = L = 512
    u0 = field2d.dirac(n, float(L), mass)
    const = field2d.dirac_besov_constant(mass)
    window = np.geomspace(2.0, 200.0, 21)
    series = field2d.besov_series(u0, window)
    dev = float(np.max(np.abs(series / const - 1.0)))
    flat = float((series.max() - series.min()) / series.mean())
    proxy = field2d.besov_proxy(u0, np.geomspace(2.0, 2000.0, 31))
    proxy_dev = abs(proxy / const - 1.0)
    ok = dev < 1e-3 and flat < 1e-3 and proxy_dev < 1e-3
    return ok, {"constant": const, "max_rel_dev": dev, "flatness": flat, "proxy_rel_dev": proxy_dev}


def moser():
    gaps, roots_ok, w_ok, cauchy = [], True, True, []
    for C in (0.7, 1.0, 2.0, 5.0):
        mc = analysis.moser_constants(C, 30)
        gaps.append(mc.closed_form_gap())
        w_ok &= bool(np.all(mc.w < 0))
        roots_ok &= bool(np.all(mc.roots <= C * (1 + 1e-15)))
        cauchy.append(float(mc.root_gaps()[-1]))
    ok = max(gaps) < 1e-12 and w_ok and roots_ok and max(cauchy) < 1e-3
    return ok, {"closed_form_gap": max(gaps), "w_negative": w_ok, "roots_le_C": roots_ok, "root_gap_k30": max(cauchy)}


def nash():
    u = field2d.Field2D.from_function(lambda x, y: np.exp(-(x * x + y * y)), 128, 20.0)
    r = analysis.nash_ratio(u)
    target = math.sqrt(0.5)
    two = field2d.Field2D.from_function(lambda x, y: np.exp(-(x * x + y * y) / 3) + 0.5 * np.exp(-((x - 2) ** 2 + y * y)), 128, 32.0)
    dil = abs(analysis.nash_ratio(field2d.dilate_box(two, 2)) / analysis.nash_ratio(two) - 1.0)
    rep = analysis.empirical_nash_constant(np.random.default_rng(SEED), fields=200)
    change = abs(rep["max_ratio_refined"] / rep["max_ratio"] - 1.0)
    ok = abs(r - target) < 1e-4 and dil < 1e-10 and math.isfinite(rep["max_ratio"]) and change < 0.02
    return ok, {"gaussian": r, "target": target, "dilation_gap": dil, "mc_max": rep["max_ratio"], "mc_refined_change": change}


CRITERIA = {
    1: ("mass law m_tail = 4a/(1-2a)", mass_law),
    2: ("profile bounds on 50 random slopes", profile_bounds),
    3: ("Picard vs Runge-Kutta", picard_vs_rk),
    4: ("regularization consistency", regularization),
    5: ("radial L2 decay exponent", radial_decay),
    6: ("self-similar attraction", self_similar_attraction),
    7: ("stationarity of self-similar data", stationarity),
    8: ("2D vs radial cross-check", cross_solver),
    9: ("spectral identities", spectral_identities),
    10: ("Dirac Besov constant", dirac_besov),
    11: ("Moser constants", moser),
    12: ("Nash quotient", nash),
}


def run_check(cid):
    title, fn = CRITERIA[int(cid)]
    start = time.perf_counter()
    passed, measured = fn()
    return CheckResult(int(cid), title, bool(passed), measured, time.perf_counter() - start)
