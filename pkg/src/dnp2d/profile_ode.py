"""Radially symmetric self-similar profiles.

A self-similar solution has integrated density ``Q(r, t) = 2*pi*xi(r**2/t)``
where the profile ``xi`` solves

    xi'' + xi'/4 - xi*xi'/(2y) = 0,    xi(0) = 0,  xi'(0) = a.

Throughout, ``m = xi(inf)`` is the dimensionless profile mass and
``M_phys = 2*pi*m`` the physical charge carried by the solution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from ._dopri import dopri5
from ._interp import monotone_hermite
from .errors import ConvergenceError, DomainError, SingularityError, SolverFailure

TWO_PI = 2.0 * math.pi


def tail_rate(a):
    """Exponential decay rate ``(1/2 - a)/2`` bounding ``xi'`` from above."""
    return 0.5 * (0.5 - a)


def mass_bound(a):
    """Upper bound ``4a/(1-2a)`` for the profile mass."""
    return 4.0 * a / (1.0 - 2.0 * a)


def upper_bound(a, y):
    """Comparison bound ``(4a/(1-2a)) * (1 - exp((a - 1/2) y / 2))``."""
    y = np.asarray(y, dtype=float)
    return mass_bound(a) * -np.expm1((a - 0.5) * y / 2.0)


@dataclass(frozen=True)
class ProfileMass:
    """Profile mass ``m = xi(inf)`` and the matching physical charge."""

    m: float

    def __post_init__(self):
        if not (self.m >= 0.0):
            raise DomainError(f"profile mass must be nonnegative, got {self.m!r}")

    @property
    def M_phys(self):
        return TWO_PI * self.m


def mass_to_shoot(M_phys):
    """Shooting slope from the physical charge, ``a = m/(2m + 4)`` with ``m = M_phys/(2*pi)``.

    This is the closed-form relation of the mass law. It is exact only to first
    order in ``a``; use :func:`profile_for_mass` when the profile has to carry
    ``M_phys`` exactly.
    """
    M_phys = float(M_phys)
    if not math.isfinite(M_phys) or M_phys <= 0.0:
        raise DomainError(f"mass_to_shoot requires a finite M_phys > 0, got {M_phys!r}")
    m = M_phys / TWO_PI
    return m / (2.0 * m + 4.0)


def shoot_to_mass(a):
    """Profile mass ``4a/(1-2a)`` predicted by the mass law for slope ``a``."""
    a = float(a)
    if not math.isfinite(a) or a < 0.0:
        raise DomainError(f"shoot_to_mass requires a >= 0, got {a!r}")
    if a >= 0.5:
        raise DomainError(f"shoot_to_mass requires a < 1/2 (mass diverges), got {a!r}")
    return ProfileMass(mass_bound(a))


def ode_rhs(y, xi, xi_prime, eps=0.0):
    """Second derivative ``xi''`` of the (optionally regularized) profile equation.

    With ``eps > 0`` the coefficient ``1/(2y)`` is replaced by ``1/(2y + eps)``.
    At ``y = eps = 0`` the analytic limit ``(a/2)(a - 1/2)`` with ``a = xi_prime``
    is returned, which needs ``xi = 0``.
    """
    denom = 2.0 * y + eps
    if denom == 0.0:
        if xi != 0.0:
            raise SingularityError("ode_rhs at y = eps = 0 requires xi(0) = 0")
        return 0.5 * xi_prime * (xi_prime - 0.5)
    return -0.25 * xi_prime + xi * xi_prime / denom


@dataclass(frozen=True, eq=False)
class SelfSimilarProfile:
    """A profile sampled on an increasing grid ``y_grid`` starting at 0.

    Attributes
    ----------
    y_grid, xi, xi_prime : ndarray
        Nodes and nodal values of ``xi`` and ``xi'``.
    a : float
        Shooting slope ``xi'(0)``.
    m_tail : float
        Estimated ``xi(inf)``; ``nan`` for finite-interval (Picard) profiles,
        ``inf`` for unbounded ones.
    eps_reg : float
        Regularization parameter of the equation that was solved.
    tol : float
        Solver tolerance.
    meta : dict
        Solver metadata (method, step counts, ...).
    """

    y_grid: np.ndarray
    xi: np.ndarray
    xi_prime: np.ndarray
    a: float
    m_tail: float
    eps_reg: float = 0.0
    tol: float = 1e-10
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("y_grid", "xi", "xi_prime"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        y = self.y_grid
        if y.ndim != 1 or y.size < 2 or y[0] != 0.0 or np.any(np.diff(y) <= 0):
            raise DomainError("y_grid must be strictly increasing and start at 0")
        if self.xi.shape != y.shape or self.xi_prime.shape != y.shape:
            raise DomainError("xi and xi_prime must match y_grid")

    @property
    def y_max(self):
        return float(self.y_grid[-1])

    @property
    def bounded(self):
        return 0.0 < self.a < 0.5

    @property
    def mass(self):
        return ProfileMass(self.m_tail)

    @property
    def M_phys(self):
        return TWO_PI * self.m_tail

    @cached_property
    def xi_second(self):
        """``xi''`` at the nodes, from the equation itself."""
        return np.array(
            [ode_rhs(y, x, xp, self.eps_reg) for y, x, xp in zip(self.y_grid, self.xi, self.xi_prime)]
        )

    @cached_property
    def _xi_interp(self):
        return monotone_hermite(self.y_grid, self.xi, self.xi_prime)

    @cached_property
    def _xi_prime_interp(self):
        return monotone_hermite(self.y_grid, self.xi_prime, self.xi_second)

    def _tail_rate(self):
        return tail_rate(self.a) if self.bounded else 0.0

    def xi_at(self, y):
        """Interpolated ``xi``; beyond ``y_max`` the exponential tail is used."""
        y = np.asarray(y, dtype=float)
        inside = np.minimum(y, self.y_max)
        out = self._xi_interp(inside)
        beyond = y > self.y_max
        if np.any(beyond):
            if not self.bounded or not math.isfinite(self.m_tail):
                raise DomainError("profile cannot be extrapolated beyond y_max")
            d = self._tail_rate()
            out = np.where(
                beyond,
                self.m_tail - self.xi_prime[-1] * np.exp(-d * (y - self.y_max)) / d,
                out,
            )
        return out

    def xi_prime_at(self, y):
        """Interpolated ``xi'``; beyond ``y_max`` it decays like ``exp(-delta * y)``.

        The same rate ``delta = (1/2 - a)/2`` enters ``m_tail``, so the
        extrapolated ``xi'`` integrates exactly to ``m_tail - xi(y_max)``.
        """
        y = np.asarray(y, dtype=float)
        inside = np.minimum(y, self.y_max)
        out = self._xi_prime_interp(inside)
        beyond = y > self.y_max
        if np.any(beyond):
            if not self.bounded:
                raise DomainError("profile cannot be extrapolated beyond y_max")
            out = np.where(beyond, self.xi_prime[-1] * np.exp(-self._tail_rate() * (y - self.y_max)), out)
        return out

    def invariant_violations(self, slack=None):
        """Node-wise checks of the bounded-branch profile properties.

        Every comparison is allowed ``slack`` (default: the solver tolerance)
        of absolute error. Returns a list of messages; empty means all hold.
        """
        if not self.bounded:
            return ["a outside (0, 1/2): bounded-branch invariants do not apply"]
        s = self.tol if slack is None else slack
        a = self.a
        y, xi, xp, xpp = self.y_grid, self.xi, self.xi_prime, self.xi_second
        out = []
        if abs(xi[0]) > s or abs(xp[0] - a) > s:
            out.append("initial data xi(0)=0, xi'(0)=a not met")
        inner, pos = slice(1, None), y > 0
        checks = [
            ("0 < xi'", xp[inner] > 0.0),
            ("xi' < a", xp[inner] < a + s),
            ("xi'' < 0", xpp[inner] < 0.0),
            ("xi'' > -1/8", xpp[inner] > -0.125),
            ("0 < xi", xi[pos] > 0.0),
            ("xi < a y", xi[pos] < a * y[pos] + s),
            ("xi <= comparison bound", xi <= upper_bound(a, y) + s),
            # strict growth is carried by xi' > 0; in the far tail increments fall below rounding
            ("xi nondecreasing", np.diff(xi) >= 0.0),
        ]
        for label, ok in checks:
            bad = np.flatnonzero(~ok)
            if bad.size:
                out.append(f"{label} violated at {bad.size} node(s), first index {bad[0]}")
        return out

    def to_json_meta(self):
        return {
            "a": self.a,
            "m_tail": self.m_tail,
            "M_phys": self.M_phys,
            "eps_reg": self.eps_reg,
            "tol": self.tol,
            "y_max": self.y_max,
            "solver": self.meta,
        }


def _series_start(a, y_start):
    c = 0.5 * a * (a - 0.5)
    return a * y_start + 0.5 * c * y_start**2, a + c * y_start


def integrate_profile(a, y_max=200.0, tol=1e-10, eps=0.0, max_step=0.5):
    """Integrate the profile equation on ``[0, y_max]`` for ``0 < a < 1/2``.

    The unregularized equation starts from the two-term Taylor expansion at
    ``y = sqrt(tol)``; with ``eps > 0`` the equation is regular and the
    integration starts at 0. Steps whose endpoint leaves ``0 < xi' < a`` are
    halved before the solver gives up.

    Returns
    -------
    SelfSimilarProfile
        With ``m_tail = xi(y_max) + xi'(y_max)/delta``.

    Raises
    ------
    DomainError
        ``a`` outside ``(0, 1/2)``, nonpositive ``y_max``/``tol`` or negative ``eps``.
    SolverFailure
        The invariants cannot be maintained; ``.y`` gives the location.
    """
    a, y_max, tol, eps = float(a), float(y_max), float(tol), float(eps)
    if not (0.0 < a < 0.5):
        raise DomainError(f"integrate_profile requires 0 < a < 1/2, got {a!r}")
    if not (y_max > 0.0 and tol > 0.0 and eps >= 0.0):
        raise DomainError("integrate_profile requires y_max > 0, tol > 0, eps >= 0")

    def f(y, z):
        return [z[1], -0.25 * z[1] + z[0] * z[1] / (2.0 * y + eps)]

    def accept(y, z):
        if not (0.0 < z[1] < a):
            return f"xi' left (0, a) near y={y:.6g}"
        return None

    if eps > 0.0:
        y_start, z0 = 0.0, [0.0, a]
    else:
        y_start = min(math.sqrt(tol), 0.5 * y_max)
        z0 = list(_series_start(a, y_start))
    try:
        ys, zs, _ = dopri5(f, y_start, z0, y_max, tol, tol, h0=y_start or 1e-4, max_step=max_step, accept=accept)
    except RuntimeError as exc:
        msg, where = exc.args
        raise SolverFailure(f"profile integration failed: {msg}", y=where) from None

    zs = np.asarray(zs)
    y_grid, xi, xp = np.asarray(ys), zs[:, 0], zs[:, 1]
    if y_start > 0.0:
        y_grid = np.concatenate([[0.0], y_grid])
        xi = np.concatenate([[0.0], xi])
        xp = np.concatenate([[a], xp])
    m_tail = float(xi[-1] + xp[-1] / tail_rate(a))
    meta = {"method": "dopri5", "y_start": y_start, "steps": int(len(ys) - 1), "max_step": max_step}
    return SelfSimilarProfile(y_grid, xi, xp, a, m_tail, eps, tol, meta)


def integrate_supercritical(a, y_max=50.0, tol=1e-10, blowup_level=1e12):
    """Integrate with ``a >= 1/2`` (unbounded branch) up to ``y_max`` or blow-up.

    For ``a > 1/2`` the solution keeps ``xi' > 1/2`` and reaches infinity at a
    finite ``y``; integration stops once ``xi`` exceeds ``blowup_level`` and the
    location is stored in ``meta["blowup_y"]``. ``a = 1/2`` gives ``xi = y/2``.
    """
    a = float(a)
    if a < 0.5:
        raise DomainError(f"integrate_supercritical requires a >= 1/2, got {a!r}")

    def f(y, z):
        return [z[1], -0.25 * z[1] + z[0] * z[1] / (2.0 * y)]

    y_start = min(math.sqrt(tol), 0.5 * y_max)
    try:
        ys, zs, status = dopri5(
            f, y_start, list(_series_start(a, y_start)), y_max, tol, tol,
            h0=y_start, max_step=0.5, stop=lambda y, z: z[0] > blowup_level,
        )
    except RuntimeError as exc:
        # the step size collapses as the solution runs off to infinity
        msg, where = exc.args
        raise SolverFailure(f"supercritical integration failed: {msg}", y=where) from None
    zs = np.asarray(zs)
    meta = {"method": "dopri5", "y_start": y_start, "blowup_y": ys[-1] if status == "stopped" else None}
    return SelfSimilarProfile(
        np.concatenate([[0.0], ys]),
        np.concatenate([[0.0], zs[:, 0]]),
        np.concatenate([[a], zs[:, 1]]),
        a, math.inf, 0.0, tol, meta,
    )


def _cumtrapz(f, h):
    out = np.empty_like(f)
    out[0] = 0.0
    np.cumsum(0.5 * h * (f[1:] + f[:-1]), out=out[1:])
    return out


def picard_operator(a, y, xi, xi_prime):
    """Apply the integral operator whose fixed points are profiles.

    Returns ``(H(xi), H(xi)')`` on the uniform grid ``y`` (``y[0] = 0``). The
    inner integrand ``exp(s/4) xi(s) xi'(s) / s`` takes its limit
    ``a * xi'(0)`` at ``s = 0``.
    """
    h = y[1] - y[0]
    ratio = np.empty_like(xi)
    ratio[0] = a
    ratio[1:] = xi[1:] / y[1:]
    g = np.exp(y / 4.0) * ratio * xi_prime
    inner = _cumtrapz(g, h)
    decay = np.exp(-y / 4.0)
    new_xp = a * decay + 0.5 * decay * inner
    new_xi = -4.0 * a * np.expm1(-y / 4.0) + 0.5 * _cumtrapz(decay * inner, h)
    return new_xi, new_xp


def picard_solve(a, y0=1.0, tol=1e-8, max_iter=200, n_nodes=None, y0_min=1e-3):
    """Fixed point of the Picard operator on ``[0, y0]``.

    Starts from ``4a(1 - exp(-y/4))`` and iterates until the C^1 residual is
    below ``tol``. If the iteration stops contracting, ``y0`` is halved and the
    iteration restarts.

    Raises
    ------
    ConvergenceError
        No contraction even at ``y0_min``.
    """
    a = float(a)
    if not (0.0 <= a < 0.5):
        raise DomainError(f"picard_solve requires 0 <= a < 1/2, got {a!r}")
    y0_try = float(y0)
    while y0_try >= y0_min:
        n = n_nodes or int(min(200_000, max(2001, math.ceil(y0_try / math.sqrt(tol)) + 1)))
        y = np.linspace(0.0, y0_try, n)
        xi = -4.0 * a * np.expm1(-y / 4.0)
        xp = a * np.exp(-y / 4.0)
        history = []
        for it in range(1, max_iter + 1):
            new_xi, new_xp = picard_operator(a, y, xi, xp)
            res = float(np.max(np.abs(new_xi - xi)) + np.max(np.abs(new_xp - xp)))
            xi, xp = new_xi, new_xp
            history.append(res)
            left_space = np.any(xp >= 0.5) or (np.any(xp <= 0.0) if a > 0.0 else np.any(xp < 0.0))
            if not math.isfinite(res) or left_space:
                break
            if res < tol:
                meta = {"method": "picard", "iterations": it, "nodes": n, "residual": res, "y0": y0_try}
                return SelfSimilarProfile(y, xi, xp, a, math.nan, 0.0, tol, meta)
            if len(history) > 3 and all(history[-k] > history[-k - 1] for k in (1, 2, 3)):
                break
        y0_try *= 0.5
    raise ConvergenceError(f"Picard iteration did not contract for a={a} down to y0={y0_min}")


def tail_length(a, tol, m=None):
    """``y_max`` such that the tail bound ``(a/delta) exp(-delta y)`` is below ``tol * m``."""
    d = tail_rate(a)
    m = mass_bound(a) if m is None else m
    return max(20.0, math.log(a / (d * tol * m)) / d)


def profile_for_mass(M_phys, tol=1e-6, refine=True):
    """Bounded profile carrying the physical charge ``M_phys``.

    ``mass_to_shoot`` supplies the starting slope. Because the closed-form
    mass law overestimates the mass of a given slope, ``refine=True`` (the
    default) then solves ``m_tail(a) = M_phys/(2 pi)`` by bracketing on
    ``a``, so ``|m_tail - m| <= tol*m``. ``refine=False`` returns the profile at
    the closed-form slope.
    """
    a0 = mass_to_shoot(M_phys)
    m = M_phys / TWO_PI
    inner_tol = min(1e-10, 1e-2 * tol)

    def build(a):
        return integrate_profile(a, tail_length(a, 1e-2 * tol, m), inner_tol)

    if not refine:
        return build(a0)

    def gap(a):
        return build(a).m_tail - m

    lo, hi = a0, 0.5 * (a0 + 0.5)
    while gap(hi) < 0.0:
        lo, hi = hi, 0.5 * (hi + 0.5)
        if 0.5 - hi < 1e-9:
            raise SolverFailure(f"no shooting slope found for M_phys={M_phys!r}")
    a = brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    p = build(a)
    if abs(p.m_tail - m) > tol * m:
        raise SolverFailure(f"shooting for M_phys={M_phys!r} missed the mass: {p.m_tail} vs {m}")
    return replace(p, meta={**p.meta, "target_m": m, "a_closed_form": a0, "refined": True})


def self_similar_density(p, r, t):
    """Density ``u(r, t) = (2/t) xi'(r**2/t)`` of the self-similar solution."""
    if not (t > 0):
        raise DomainError(f"self_similar_density requires t > 0, got {t!r}")
    r = np.asarray(r, dtype=float)
    return (2.0 / t) * p.xi_prime_at(r * r / t)


def save_profile(p, path):
    """Write ``<path>.csv`` (y, xi, xi_prime) and the ``<path>.json`` sidecar."""
    from .io import atomic_write_text, csv_text

    path = Path(path)
    csv_path = path.with_suffix(".csv")
    json_path = path.with_suffix(".json")
    atomic_write_text(csv_path, csv_text(["y", "xi", "xi_prime"], [p.y_grid, p.xi, p.xi_prime]))
    atomic_write_text(json_path, json.dumps(p.to_json_meta(), sort_keys=True, indent=2) + "\n")
    return [csv_path, json_path]


def load_profile(path):
    path = Path(path)
    data = np.loadtxt(path.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
    meta = json.loads(path.with_suffix(".json").read_text())
    return SelfSimilarProfile(
        data[:, 0], data[:, 1], data[:, 2], meta["a"], meta["m_tail"], meta["eps_reg"], meta["tol"], meta["solver"]
    )
