"""Dispatch a validated configuration to the solvers and persist the results."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, analysis, field2d, profile_ode, radial_pde
from .errors import DomainError
from .io import atomic_write_text, csv_text


@dataclass
class RunManifest:
    config_hash: str
    version: str
    wall_time: float = 0.0
    artifacts: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    def to_dict(self):
        d = asdict(self)
        d["artifacts"] = [str(p) for p in self.artifacts]
        d["passed"] = self.passed
        return d


def emit_plotdata(columns, path):
    """Write ``columns`` (ordered name -> sequence) as CSV; empty series give a header-only file."""
    names = list(columns)
    return atomic_write_text(path, csv_text(names, [np.asarray(columns[k], dtype=float) for k in names]))


def _json(path, obj):
    return atomic_write_text(path, json.dumps(obj, sort_keys=True, indent=2) + "\n")


def radial_initial(cfg):
    g = cfg.section("grid")
    grid = radial_pde.RadialGrid.geometric(g["n"], g["r_max"], g["ratio"])
    ini = cfg.section("initial")
    if ini["type"] == "gaussian":
        return radial_pde.init_from_density(grid, radial_pde.gaussian_density(ini["mass"], ini["sigma"])), None
    if ini["type"] == "self-similar":
        prof = profile_ode.profile_for_mass(ini["mass"], tol=1e-9)
        return radial_pde.init_from_profile(grid, prof, ini["t0"]), prof
    data = np.loadtxt(ini["path"], delimiter=",", skiprows=1, ndmin=2)
    grid = radial_pde.RadialGrid(data[:, 0], "custom", 1.0)
    return radial_pde.init_from_density(grid, data[:, 1]), None


def field_initial(cfg):
    g = cfg.section("grid")
    n, L = g["n"], g["L"]
    ini = cfg.section("initial")
    if ini["type"] == "gaussian":
        dens = radial_pde.gaussian_density(ini["mass"], ini["sigma"])
        cx, cy = ini["center"]
        return field2d.Field2D.from_function(lambda x, y: dens(np.hypot(x - cx, y - cy)), n, L)
    if ini["type"] == "dirac":
        return field2d.dirac(n, L, ini["mass"])
    if ini["type"] == "self-similar":
        prof = profile_ode.profile_for_mass(ini["mass"], tol=1e-9)
        t0 = ini["t0"]
        return field2d.Field2D.from_function(lambda x, y: profile_ode.self_similar_density(prof, np.hypot(x, y), t0), n, L, t0)
    u = field2d.load_field(ini["path"])
    if u.n != n or u.L != L:
        raise DomainError(f"field file grid ({u.n}, {u.L}) differs from grid ({n}, {L})")
    return u


def _radial_solve(cfg, Q0, schedule, include_initial=False):
    tm = cfg.section("time")
    return radial_pde.solve(
        Q0,
        tm["t_end"],
        schedule,
        dt0=tm["dt0"],
        dt_max=tm["dt_max"],
        dt_rel=tm.get("dt_rel"),
        scheme=tm["scheme"],
        include_initial=include_initial,
        config_hash=cfg.hash,
    )


def _run_profile(cfg, out, man):
    p = cfg.section("profile")
    if "mass" in p:
        prof = profile_ode.profile_for_mass(p["mass"], tol=p["tol"])
        man.checks["target_mass"] = abs(prof.M_phys - p["mass"]) <= p["tol"] * p["mass"]
    else:
        prof = profile_ode.integrate_profile(p["shoot"], p["y_max"], p["tol"])
    man.checks["profile_invariants"] = prof.invariant_violations() == []
    man.results.update(a=prof.a, m_tail=prof.m_tail, M_phys=prof.M_phys)
    man.artifacts += profile_ode.save_profile(prof, out / "profile")


def _radial_checks(traj, man):
    snaps = traj.snapshots
    man.checks["boundary_pinned"] = all(s.Q[0] == 0 and s.Q[-1] == s.M_phys for s in snaps)
    man.checks["monotone"] = all(s.monotonicity_defect() == 0.0 for s in snaps)
    man.checks["charge_bounds"] = all(s.Q.min() >= 0 and s.Q.max() <= s.M_phys for s in snaps)


def _run_radial(cfg, out, man):
    Q0, _ = radial_initial(cfg)
    traj = _radial_solve(cfg, Q0, cfg.section("schedule"))
    _radial_checks(traj, man)
    man.results.update(M_phys=traj.M_phys, times=list(traj.times), steps=traj.meta["steps"])
    man.artifacts += radial_pde.save_trajectory(traj, out / "trajectory")


def _run_field2d(cfg, out, man):
    u0 = field_initial(cfg)
    tm = cfg.section("time")
    snaps = field2d.duhamel_solve(u0, tm["t_end"], tm["dt"], tm["order"], cfg.section("schedule"))
    drift = max(abs(s.total_charge - u0.total_charge) for s in snaps)
    man.checks["charge_conserved"] = drift <= 1e-12 * max(1.0, abs(u0.total_charge))
    man.results.update(charge=u0.total_charge, charge_drift=drift, zero_mode_dropped=True, times=[s.t for s in snaps])
    for i, s in enumerate(snaps):
        man.artifacts += field2d.save_field(s, out / f"field_{i:04d}")


def _run_diagnose(cfg, out, man):
    d = cfg.section("diagnose")
    what = d["what"]
    if what in ("decay", "converge"):
        Q0, prof = radial_initial(cfg)
        lo, hi = d["window"]
        t_end = cfg.section("time")["t_end"]
        times = np.geomspace(max(Q0.t, 1.0) if what == "converge" else lo, t_end, 41)
        times = times[times > Q0.t]
        traj = _radial_solve(cfg, Q0, times, include_initial=(Q0.t >= 1.0 and what == "converge"))
        _radial_checks(traj, man)
        if what == "decay":
            t = traj.times
            vals = [radial_pde.lp_norm_radial(radial_pde.density_of(s), s.r, d["p"]) for s in traj.snapshots]
            fit = analysis.decay_fit(t, vals, (lo, hi))
            target = -(1.0 - 1.0 / d["p"])
            man.checks["decay_exponent"] = abs(fit.exponent - target) <= 0.05
            man.results.update(fit=fit.to_dict(), target_exponent=target)
            path = out / "decay.csv"
            emit_plotdata({"t": t, "value": vals, "fitted": fit.predict(t)}, path)
        else:
            if prof is None:
                prof = profile_ode.profile_for_mass(traj.M_phys, tol=1e-9)
            t, vals = radial_pde.convergence_diagnostic(traj, prof)
            late = vals[t >= 2.0]
            man.checks["nonincreasing_after_transient"] = bool(np.all(np.diff(late) <= 0))
            man.results.update(first=float(vals[0]), last=float(vals[-1]), profile_a=prof.a)
            path = out / "converge.csv"
            emit_plotdata({"t": t, "value": vals}, path)
        man.artifacts.append(path)
    elif what == "besov":
        b = cfg.section("besov")
        ini = cfg.section("initial")
        mass = ini.get("mass", 1.0)
        u0 = field2d.dirac(b["n"], b["L"], mass)
        ts = np.geomspace(b["t_min"], b["t_max"], b["points"])
        series = field2d.besov_series(u0, ts)
        const = field2d.dirac_besov_constant(mass)
        man.results.update(proxy=float(series.max()), dirac_constant=const)
        man.checks["finite"] = bool(np.all(np.isfinite(series)))
        path = out / "besov.csv"
        emit_plotdata({"t": ts, "value": series}, path)
        man.artifacts.append(path)
    else:
        rng = np.random.default_rng(cfg.seed)
        rep = analysis.empirical_nash_constant(rng, d["fields"], d["n"], d["L"])
        man.checks["refinement_stable"] = abs(rep["max_ratio_refined"] / rep["max_ratio"] - 1) < 0.02
        man.results.update(rep)
    man.artifacts.append(_json(out / "report.json", man.results))


def _run_moser(cfg, out, man):
    m = cfg.section("moser")
    mc = analysis.moser_constants(m["C"], m["k_max"])
    man.checks["closed_form"] = mc.closed_form_gap() < 1e-12
    man.checks["w_negative"] = bool(np.all(mc.w < 0))
    man.checks["roots_bounded"] = bool(np.all(mc.roots <= m["C"] * (1 + 1e-15)))
    man.results.update(mc.to_dict())
    path = out / "moser.csv"
    emit_plotdata({"k": mc.k, "log2_a": mc.log2_a, "w": mc.w, "root": mc.roots}, path)
    man.artifacts += [path, _json(out / "report.json", mc.to_dict())]


_RUNNERS = {
    "profile": _run_profile,
    "radial": _run_radial,
    "field2d": _run_field2d,
    "diagnose": _run_diagnose,
    "moser": _run_moser,
}


def run(cfg, out_dir):
    """Execute ``cfg`` and write every artifact plus ``manifest.json`` under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest(cfg.hash, __version__)
    start = time.perf_counter()
    man.artifacts.append(atomic_write_text(out / "config.toml", cfg.to_toml()))
    _RUNNERS[cfg.kind](cfg, out, man)
    man.wall_time = time.perf_counter() - start
    man.results = {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in man.results.items()}
    mpath = out / "manifest.json"
    # relative paths keep manifests comparable across output directories
    man.artifacts = [Path(p).relative_to(out).as_posix() for p in man.artifacts + [mpath]]
    _json(mpath, man.to_dict())
    return man
