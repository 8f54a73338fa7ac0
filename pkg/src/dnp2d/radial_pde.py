"""Radial integrated-density formulation.

For radial data the charge ``Q(r, t)`` inside the ball of radius ``r``
satisfies

    Q_t = Q_rr - Q_r / r - Q Q_r / (2 pi r),   Q(0) = 0,  Q(R_max) = M_phys,

on a truncated interval. The linear part ``Q_rr - Q_r/r = r (Q_r / r)_r`` is
discretized in that flux form on a graded grid and treated implicitly; the
quadratic transport term is explicit.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.linalg import solve_banded

from .errors import DomainError, StepRejected, StiffFailure
from .io import atomic_write_text, csv_text

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
SCHEMES = ("euler", "cn")


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Nodes ``0 = r_0 < r_1 < ... < r_N = R_max``."""

    nodes: np.ndarray
    kind: str = "custom"
    ratio: float = 1.0

    def __post_init__(self):
        r = np.array(self.nodes, dtype=float)
        r.setflags(write=False)
        object.__setattr__(self, "nodes", r)
        if r.ndim != 1 or r.size < 17:
            raise DomainError("a radial grid needs N >= 16 intervals")
        if r[0] != 0.0 or np.any(np.diff(r) <= 0.0):
            raise DomainError("radial nodes must start at 0 and increase strictly")
        if not (1.0 <= self.ratio <= 1.2):
            raise DomainError(f"geometric ratio must lie in [1, 1.2], got {self.ratio}")

    @classmethod
    def uniform(cls, n, r_max):
        return cls(np.linspace(0.0, float(r_max), int(n) + 1), "uniform", 1.0)

    @classmethod
    def geometric(cls, n, r_max, ratio=1.05):
        """``n`` cells whose widths grow by ``ratio`` from the origin outward."""
        n, q = int(n), float(ratio)
        if q == 1.0:
            return cls.uniform(n, r_max)
        h1 = r_max * (q - 1.0) / (q**n - 1.0)
        r = np.concatenate([[0.0], np.cumsum(h1 * q ** np.arange(n))])
        r[-1] = r_max
        return cls(r, "geometric", q)

    @property
    def n(self):
        return self.nodes.size - 1

    @property
    def r_max(self):
        return float(self.nodes[-1])

    def refined(self):
        """Grid of the same kind with every spacing (approximately) halved."""
        if self.kind == "uniform":
            return RadialGrid.uniform(2 * self.n, self.r_max)
        if self.kind == "geometric":
            return RadialGrid.geometric(2 * self.n, self.r_max, math.sqrt(self.ratio))
        raise DomainError("only uniform and geometric grids can be refined")

    def descriptor(self):
        return {"kind": self.kind, "n": self.n, "r_max": self.r_max, "ratio": self.ratio}

    @cached_property
    def h(self):
        return np.diff(self.nodes)

    @cached_property
    def laplacian_bands(self):
        """Tridiagonal coefficients (lower, diag, upper) of ``r (Q_r / r)_r`` at interior nodes."""
        r, h = self.nodes, self.h
        mid = 0.5 * (r[1:] + r[:-1])
        lo = np.zeros(r.size)
        di = np.zeros(r.size)
        up = np.zeros(r.size)
        w = 0.5 * (h[1:] + h[:-1])
        cp = r[1:-1] / (h[1:] * mid[1:] * w)
        cm = r[1:-1] / (h[:-1] * mid[:-1] * w)
        lo[1:-1], di[1:-1], up[1:-1] = cm, -(cp + cm), cp
        return lo, di, up

    def derivative(self, f):
        """Second-order first derivative at every node (one-sided at the ends)."""
        r, h = self.nodes, self.h
        d = np.empty_like(f)
        hm, hp = h[:-1], h[1:]
        d[1:-1] = (hm**2 * f[2:] - hp**2 * f[:-2] + (hp**2 - hm**2) * f[1:-1]) / (hm * hp * (hm + hp))
        a, b = h[0], h[1]
        d[0] = (-(2 * a + b) * b * f[0] + (a + b) ** 2 * f[1] - a * a * f[2]) / (a * b * (a + b))
        a, b = h[-1], h[-2]
        d[-1] = ((2 * a + b) * b * f[-1] - (a + b) ** 2 * f[-2] + a * a * f[-3]) / (a * b * (a + b))
        return d


@dataclass(frozen=True, eq=False)
class ChargeDistribution:
    """Cumulative charge ``Q`` at the grid nodes at time ``t``."""

    grid: RadialGrid
    Q: np.ndarray
    t: float
    M_phys: float

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        if Q.shape != self.grid.nodes.shape:
            raise DomainError("Q must be sampled at every grid node")
        if Q[0] != 0.0 or Q[-1] != self.M_phys:
            raise DomainError("Q must satisfy Q(0) = 0 and Q(R_max) = M_phys")

    @property
    def r(self):
        return self.grid.nodes

    def monotonicity_defect(self):
        """Largest decrease of ``Q`` between neighbouring nodes (0 if monotone)."""
        return float(max(0.0, -np.min(np.diff(self.Q))))


@dataclass(frozen=True)
class RadialTrajectory:
    snapshots: list
    config_hash: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = [s.t for s in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DomainError("snapshot times must increase strictly")

    @property
    def times(self):
        return np.array([s.t for s in self.snapshots])

    @property
    def M_phys(self):
        return self.snapshots[0].M_phys


def _cumtrapz(f, r):
    out = np.zeros_like(f)
    np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(r), out=out[1:])
    return out


def init_from_density(grid, u0, t=0.0):
    """Charge distribution of radial density samples (array or callable of ``r``)."""
    r = grid.nodes
    u = np.asarray(u0(r) if callable(u0) else u0, dtype=float)
    if u.shape != r.shape:
        raise DomainError("density samples must match the grid")
    if np.any(u < 0.0):
        raise DomainError("initial density must be nonnegative")
    Q = _cumtrapz(TWO_PI * r * u, r)
    return ChargeDistribution(grid, Q, float(t), float(Q[-1]))


def init_from_charge(grid, Q_of_r, t=0.0):
    """Sample a closed-form cumulative charge; the boundary value becomes ``M_phys``."""
    Q = np.asarray(Q_of_r(grid.nodes), dtype=float).copy()
    Q[0] = 0.0
    return ChargeDistribution(grid, Q, float(t), float(Q[-1]))


def init_from_profile(grid, profile, t0=1.0):
    """Self-similar state ``Q = 2 pi xi(r**2 / t0)`` pinned to ``2 pi m_tail`` at ``R_max``."""
    Q = TWO_PI * profile.xi_at(grid.nodes**2 / t0)
    Q[0] = 0.0
    Q[-1] = TWO_PI * profile.m_tail
    return ChargeDistribution(grid, Q, float(t0), float(Q[-1]))


def gaussian_density(mass, sigma):
    """Radial density of total charge ``mass`` and variance ``sigma**2`` per axis."""
    return lambda r: mass / (TWO_PI * sigma**2) * np.exp(-np.asarray(r) ** 2 / (2.0 * sigma**2))


def nonlinear_term(Qd, eps_r=None):
    """``-Q Q_r / (2 pi r)`` at interior nodes, ``1/r`` replaced by ``1/(r + eps_r)`` at ``r_1``."""
    grid = Qd.grid
    r = grid.nodes
    Q = Qd.Q
    Qr = grid.derivative(Q)
    rr = r[1:-1].copy()
    rr[0] += 0.5 * r[1] if eps_r is None else eps_r
    out = np.zeros_like(Q)
    out[1:-1] = -Q[1:-1] * Qr[1:-1] / (TWO_PI * rr)
    return out


def _apply_linear(grid, Q):
    lo, di, up = grid.laplacian_bands
    out = np.zeros_like(Q)
    out[1:-1] = lo[1:-1] * Q[:-2] + di[1:-1] * Q[1:-1] + up[1:-1] * Q[2:]
    return out


def _implicit_solve(grid, theta_dt, rhs, M):
    lo, di, up = grid.laplacian_bands
    n = rhs.size
    ab = np.zeros((3, n))
    ab[0, 1:] = -theta_dt * up[:-1]
    ab[1] = 1.0 - theta_dt * di
    ab[2, :-1] = -theta_dt * lo[1:]
    ab[1, 0] = ab[1, -1] = 1.0
    ab[0, 1] = 0.0
    ab[2, -2] = 0.0
    b = rhs.copy()
    b[0], b[-1] = 0.0, M
    out = solve_banded((1, 1), ab, b, check_finite=False)
    out[0], out[-1] = 0.0, M
    return out


def stability_cap(Qd, cfl=0.5):
    """Advective limit ``cfl * min(h / |c|)`` of the explicit term, ``c = Q / (2 pi r)``."""
    r = Qd.grid.nodes
    c = np.abs(Qd.Q[1:-1]) / (TWO_PI * r[1:-1])
    h = np.minimum(Qd.grid.h[:-1], Qd.grid.h[1:])
    cmax = np.max(c / h) if c.size else 0.0
    return math.inf if cmax == 0.0 else cfl / cmax


def step(Qd, dt, scheme="euler", eps_r=None, nonlinear=True, mono_tol=1e-10):
    """Advance one IMEX step of size ``dt``.

    ``scheme="euler"``: backward Euler diffusion, forward Euler transport.
    ``scheme="cn"``: Crank-Nicolson diffusion with a Heun predictor-corrector
    for the transport term (second order).

    Raises
    ------
    StepRejected
        ``Q`` lost monotonicity by more than ``mono_tol * M_phys``.
    """
    if not dt > 0.0:
        raise DomainError("dt must be positive")
    if scheme not in SCHEMES:
        raise DomainError(f"unknown scheme {scheme!r}")
    grid, Q, M = Qd.grid, Qd.Q, Qd.M_phys

    def transport(state):
        if not nonlinear:
            return np.zeros_like(state.Q)
        return nonlinear_term(state, eps_r)

    n0 = transport(Qd)
    if scheme == "euler":
        Q_new = _implicit_solve(grid, dt, Q + dt * n0, M)
    else:
        explicit = Q + 0.5 * dt * _apply_linear(grid, Q)
        Q_pred = _implicit_solve(grid, 0.5 * dt, explicit + dt * n0, M)
        n1 = transport(ChargeDistribution(grid, Q_pred, Qd.t + dt, M))
        Q_new = _implicit_solve(grid, 0.5 * dt, explicit + 0.5 * dt * (n0 + n1), M)
    if not np.all(np.isfinite(Q_new)):
        raise StepRejected(f"non-finite charge after step at t={Qd.t}")
    defect = -np.min(np.diff(Q_new))
    if defect > mono_tol * max(abs(M), 1e-300):
        raise StepRejected(f"Q lost monotonicity by {defect:.3e} at t={Qd.t + dt:.6g}")
    # remove sub-tolerance rounding ties so accepted states are exactly monotone
    Q_new = np.minimum(np.maximum.accumulate(np.maximum(Q_new, 0.0)), M)
    return ChargeDistribution(grid, Q_new, Qd.t + dt, M)


def solve(
    Q0,
    t_end,
    schedule=(),
    dt0=1e-3,
    dt_max=0.1,
    dt_rel=None,
    dt_min=1e-12,
    scheme="euler",
    eps_r=None,
    nonlinear=True,
    include_initial=False,
    config_hash="",
):
    """Integrate to ``t_end`` recording snapshots at ``schedule`` (plus ``t_end``).

    The step starts at ``dt0``, is halved on rejection, grows by 1.2 after 20
    consecutive accepted steps and never exceeds ``dt_max``,
    ``max(dt_rel * t, dt0)`` (when ``dt_rel`` is given) or the advective cap. Steps are shortened to land on output
    times.

    Raises
    ------
    StiffFailure
        ``dt`` fell below ``dt_min``; ``.state`` holds the last accepted state.
    """
    t_end = float(t_end)
    if not t_end > Q0.t:
        raise DomainError("t_end must exceed the initial time")
    targets = sorted(float(s) for s in schedule)
    if targets and (targets[0] <= Q0.t or targets[-1] > t_end):
        raise DomainError("schedule must lie in (t0, t_end]")
    if not targets or targets[-1] != t_end:
        targets.append(t_end)

    snaps = [Q0] if include_initial else []
    state = Q0
    dt = float(dt0)
    accepted = 0
    rejected = 0
    steps = 0
    for target in targets:
        while state.t < target * (1 - 1e-14):
            cap = min(dt_max, stability_cap(state))
            if dt_rel is not None:
                cap = min(cap, max(dt_rel * state.t, dt0))
            dt = min(dt, cap)
            h = min(dt, target - state.t)
            try:
                new = step(state, h, scheme, eps_r, nonlinear)
            except StepRejected as exc:
                dt = 0.5 * h
                accepted = 0
                rejected += 1
                if dt < dt_min:
                    raise StiffFailure(f"dt underflow at t={state.t:.6g}: {exc}", state=state) from exc
                continue
            if abs(new.t - target) <= 1e-12 * max(1.0, target):
                new = ChargeDistribution(new.grid, new.Q, target, new.M_phys)
            state = new
            steps += 1
            accepted += 1
            if accepted >= 20:
                dt *= 1.2
                accepted = 0
        snaps.append(state)
    meta = {"steps": steps, "rejected": rejected, "scheme": scheme}
    return RadialTrajectory(snaps, config_hash, meta)


def density_of(Qd, clamp_tol=1e-10, return_clamped=False):
    """Radial density ``u = Q_r / (2 pi r)`` at the nodes.

    ``u(0)`` comes from the even expansion ``Q = c2 r**2 + c4 r**4`` through
    the first two interior nodes (``u(0) = c2 / pi``). Values in
    ``[-clamp_tol * max u, 0)`` are set to zero; their count is returned when
    ``return_clamped`` is true.
    """
    r = Qd.grid.nodes
    Q = Qd.Q
    Qr = Qd.grid.derivative(Q)
    u = np.empty_like(Q)
    u[1:] = Qr[1:] / (TWO_PI * r[1:])
    r1, r2 = r[1], r[2]
    A = np.array([[r1**2, r1**4], [r2**2, r2**4]])
    c2, _ = np.linalg.solve(A, Q[1:3])
    u[0] = c2 / math.pi
    scale = np.max(np.abs(u)) if u.size else 0.0
    small = (u < 0.0) & (u >= -clamp_tol * scale)
    n_clamped = int(np.count_nonzero(small))
    u[small] = 0.0
    if np.any(u < 0.0):
        logger.warning("density has %d values below the clamp level", int(np.count_nonzero(u < 0.0)))
    return (u, n_clamped) if return_clamped else u


def lp_norm_radial(u, r, p):
    """``(int |u|^p 2 pi r dr)^(1/p)`` by the trapezoid rule; ``p = inf`` gives ``max |u|``."""
    if p == math.inf:
        return float(np.max(np.abs(u)))
    if not p >= 1.0:
        raise DomainError(f"L^p norm requires p >= 1, got {p!r}")
    u = np.asarray(u, dtype=float)
    r = np.asarray(r, dtype=float)
    f = np.abs(u) ** p * TWO_PI * r
    return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(r)) ** (1.0 / p))


def convergence_diagnostic(traj, profile, p=4.0 / 3.0):
    """``t^(1/4) || u(t) - U(t) ||_{4/3}`` against the self-similar solution ``U``.

    Returns
    -------
    times, values : ndarray
    """
    from .profile_ode import self_similar_density

    M = traj.M_phys
    if abs(profile.M_phys - M) > 1e-6 * abs(M):
        raise DomainError(f"profile charge {profile.M_phys} does not match trajectory charge {M}")
    times, values = [], []
    for snap in traj.snapshots:
        u = density_of(snap)
        U = self_similar_density(profile, snap.r, snap.t)
        times.append(snap.t)
        values.append(snap.t**0.25 * lp_norm_radial(u - U, snap.r, p))
    return np.array(times), np.array(values)


def save_trajectory(traj, directory):
    """One ``snapshot_NNNN.csv`` (r, Q, u) per snapshot plus ``manifest.json``."""
    directory = Path(directory)
    paths = []
    for i, snap in enumerate(traj.snapshots):
        path = directory / f"snapshot_{i:04d}.csv"
        atomic_write_text(path, csv_text(["r", "Q", "u"], [snap.r, snap.Q, density_of(snap)]))
        paths.append(path)
    manifest = {
        "times": [s.t for s in traj.snapshots],
        "files": [p.name for p in paths],
        "grid": traj.snapshots[0].grid.descriptor() if traj.snapshots else None,
        "M_phys": traj.M_phys if traj.snapshots else None,
        "config_hash": traj.config_hash,
    }
    mpath = directory / "manifest.json"
    atomic_write_text(mpath, json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return paths + [mpath]


def load_trajectory(directory):
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    snaps = []
    grid = None
    for name, t in zip(manifest["files"], manifest["times"]):
        data = np.loadtxt(directory / name, delimiter=",", skiprows=1)
        if grid is None:
            g = manifest["grid"]
            grid = RadialGrid(data[:, 0], g["kind"], g["ratio"])
        snaps.append(ChargeDistribution(grid, data[:, 1], t, float(data[-1, 1])))
    return RadialTrajectory(snaps, manifest["config_hash"])
