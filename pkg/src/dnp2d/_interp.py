"""Shape-preserving Hermite interpolation with known nodal derivatives."""

import numpy as np
from scipy.interpolate import CubicHermiteSpline


def monotone_hermite(x, f, df):
    """Cubic Hermite interpolant of ``f`` limited so it introduces no new extrema.

    Exact nodal derivatives ``df`` are used where they satisfy the
    Fritsch-Carlson monotonicity region; elsewhere they are shrunk toward it.
    For smooth monotone data and fine nodes the limiter is inactive and the
    interpolant is fourth-order accurate.
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    d = np.array(df, dtype=float)
    h = np.diff(x)
    delta = np.diff(f) / h

    flat = delta == 0.0
    d[:-1][flat] = 0.0
    d[1:][flat] = 0.0
    # derivative pointing against the secant
    with np.errstate(invalid="ignore", divide="ignore"):
        alpha = np.where(flat, 0.0, d[:-1] / np.where(flat, 1.0, delta))
        beta = np.where(flat, 0.0, d[1:] / np.where(flat, 1.0, delta))
    d[:-1][alpha < 0] = 0.0
    d[1:][beta < 0] = 0.0
    alpha = np.clip(alpha, 0.0, None)
    beta = np.clip(beta, 0.0, None)
    radius = alpha**2 + beta**2
    for i in np.flatnonzero(radius > 9.0):
        tau = 3.0 / np.sqrt(radius[i])
        d[i] = tau * alpha[i] * delta[i]
        d[i + 1] = tau * beta[i] * delta[i]
    return CubicHermiteSpline(x, f, d)
