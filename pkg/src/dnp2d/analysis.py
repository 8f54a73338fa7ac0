"""Decay-rate fits, Moser iteration constants, and the Nash quotient."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import field2d, radial_pde
from .errors import DomainError
from .io import atomic_write_text, csv_text


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    intercept: float
    residual_rms: float
    t_window: tuple
    n_points: int

    def predict(self, t):
        return np.exp(self.intercept) * np.asarray(t, dtype=float) ** self.exponent

    def to_dict(self):
        d = asdict(self)
        d["t_window"] = list(self.t_window)
        return d


def decay_fit(t, values, t_window=None):
    """Least-squares line through ``(log t, log value)`` restricted to ``t_window``."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if t.shape != values.shape or t.ndim != 1:
        raise DomainError("t and values must be 1-D arrays of equal length")
    lo, hi = (t.min(), t.max()) if t_window is None else map(float, t_window)
    if lo < t.min() * (1 - 1e-12) or hi > t.max() * (1 + 1e-12) or not lo < hi:
        raise DomainError(f"window [{lo}, {hi}] is not inside the data range")
    sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    if np.count_nonzero(sel) < 5:
        raise DomainError("a decay fit needs at least 5 points in the window")
    if np.any(values[sel] <= 0.0) or np.any(t[sel] <= 0.0):
        raise DomainError("decay fits need strictly positive times and values")
    x, y = np.log(t[sel]), np.log(values[sel])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, icept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icept)
    rms = float(np.sqrt(np.mean(resid**2)))
    return DecayFit(float(slope), float(icept), rms, (lo, hi), int(np.count_nonzero(sel)))


def write_fit_csv(path, t, values, fit):
    """Columns ``t, value, fitted``."""
    t = np.asarray(t, dtype=float)
    atomic_write_text(path, csv_text(["t", "value", "fitted"], [t, np.asarray(values, dtype=float), fit.predict(t)]))


@dataclass(frozen=True)
class MoserConstants:
    """``a_1 = C/2``, ``a_k = C 2^(k-2) a_(k-1)^2``, held as ``log2 a_k`` for ``k = 1..k_max``.

    Closed form ``a_k = C^(v_k) 2^(w_k)`` with ``v_k = 2^k - 1`` and
    ``w_k = 2 w_(k-1) + (k - 2)``, ``w_1 = -1``.
    """

    C: float
    k: np.ndarray
    log2_a: np.ndarray
    v: np.ndarray
    w: np.ndarray

    @property
    def a_seq(self):
        with np.errstate(over="ignore"):
            return np.exp2(self.log2_a)

    @property
    def roots(self):
        return np.exp2(self.log2_a / np.exp2(self.k))

    @property
    def w_seq(self):
        return self.w

    def closed_form_gap(self):
        """Largest relative gap between recurrence and closed form, in log space."""
        closed = self.v * math.log2(self.C) + self.w
        return float(np.max(np.abs(self.log2_a - closed) / np.maximum(1.0, np.abs(closed))))

    def root_gaps(self):
        return np.abs(np.diff(self.roots))

    def to_dict(self):
        return {
            "C": self.C,
            "k": self.k.tolist(),
            "log2_a": self.log2_a.tolist(),
            "w": self.w.tolist(),
            "roots": self.roots.tolist(),
            "closed_form_gap": self.closed_form_gap(),
        }


def moser_constants(C, k_max=30):
    if not (C > 0 and math.isfinite(C)):
        raise DomainError("C must be a positive finite number")
    if not 1 <= k_max <= 40:
        raise DomainError("k_max must lie in [1, 40]")
    lc = math.log2(C)
    log2_a = [lc - 1.0]
    v = [1]
    w = [-1]
    for k in range(2, k_max + 1):
        log2_a.append(lc + (k - 2) + 2.0 * log2_a[-1])
        v.append(2 * v[-1] + 1)
        w.append(2 * w[-1] + (k - 2))
    return MoserConstants(
        float(C),
        np.arange(1, k_max + 1),
        np.array(log2_a),
        np.array(v, dtype=float),
        np.array(w, dtype=float),
    )


def _gradient_l2(u):
    ws = u.workspace
    ikx, iky = ws.derivative_symbols
    c = ws.forward(u.values)
    gx = ws.inverse(ikx * c)
    gy = ws.inverse(iky * c)
    return math.sqrt(float(np.sum(gx * gx + gy * gy)) * u.cell_area)


def nash_ratio(u):
    """``||u||_2 / (||grad u||_2^(1/2) ||u||_1^(1/2))`` with a spectral gradient."""
    if not np.any(u.values):
        raise DomainError("the Nash quotient is undefined for the zero field")
    if np.any(u.values < 0):
        raise DomainError("the Nash quotient is taken over nonnegative fields")
    grad = _gradient_l2(u)
    if grad == 0.0:
        raise DomainError("constant fields have no Nash quotient")
    return field2d.lp_norm(u, 2) / math.sqrt(grad * field2d.lp_norm(u, 1))


def random_bumps(rng, count=None, L=32.0, width=(0.8, 2.0)):
    """Parameters of a nonnegative sum of Gaussian bumps kept away from the box edge."""
    count = int(rng.integers(1, 7)) if count is None else count
    centers = rng.uniform(-L / 6, L / 6, (count, 2))
    widths = rng.uniform(*width, count)
    weights = rng.uniform(0.1, 1.0, count)
    return centers, widths, weights


def sample_bumps(params, n, L):
    centers, widths, weights = params
    x, y = field2d.coordinates(n, L)
    vals = np.zeros((n, n))
    for (cx, cy), s, w in zip(centers, widths, weights):
        vals += w * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * s * s))
    return field2d.Field2D(vals, L)


def empirical_nash_constant(rng, fields=200, n=64, L=32.0):
    """Max Nash quotient over random bump fields, at ``n`` and at ``2n`` on the same box."""
    best = best_fine = 0.0
    for _ in range(fields):
        params = random_bumps(rng, L=L)
        best = max(best, nash_ratio(sample_bumps(params, n, L)))
        best_fine = max(best_fine, nash_ratio(sample_bumps(params, 2 * n, L)))
    return {"fields": fields, "n": n, "L": L, "max_ratio": best, "max_ratio_refined": best_fine}


def lp_norm(u, p, r=None):
    """``L^p`` norm of a 2D field, or of radial samples on nodes ``r``."""
    if isinstance(u, field2d.Field2D):
        return field2d.lp_norm(u, p)
    if r is None:
        raise DomainError("radial samples need their nodes r")
    return radial_pde.lp_norm_radial(u, r, p)
