"""Dormand-Prince 5(4) embedded pair for small scalar systems.

Written against plain Python floats: the profile ODE has two unknowns, so
array overhead would dominate the cost of a step.
"""

import math

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# fifth-order minus embedded fourth-order weights
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


def _combine(z, h, ks, coeffs):
    out = list(z)
    for k, c in zip(ks, coeffs):
        if c != 0.0:
            for i in range(len(out)):
                out[i] += h * c * k[i]
    return out


def dopri5(f, x0, z0, x_end, rtol, atol, h0=None, max_step=math.inf, accept=None, stop=None):
    """Integrate ``z' = f(x, z)`` from ``x0`` to ``x_end`` with error control.

    Parameters
    ----------
    f : callable
        ``f(x, z) -> list`` of derivatives.
    x0, z0 : float, sequence
        Initial abscissa and state.
    x_end : float
        Final abscissa (> x0).
    rtol, atol : float
        Mixed error tolerance per component.
    h0, max_step : float
        Initial and maximal step size.
    accept : callable, optional
        ``accept(x, z) -> str | None``. A non-None message rejects an
        error-accepted step; the step is halved and retried.
    stop : callable, optional
        ``stop(x, z) -> bool``. Terminates integration after an accepted step.

    Returns
    -------
    xs, zs, status
        Node abscissas, node states and ``"done"`` or ``"stopped"``.

    Raises
    ------
    RuntimeError
        ``(message, x)`` when the step size underflows.
    """
    x = float(x0)
    z = [float(v) for v in z0]
    n = len(z)
    span = x_end - x
    h = min(h0 if h0 is not None else 1e-3 * span, max_step, span)
    xs = [x]
    zs = [list(z)]
    k1 = f(x, z)
    last_reason = None
    while x < x_end:
        if x + h > x_end:
            h = x_end - x
        h_floor = 1e-14 * max(1.0, abs(x))
        if h < h_floor:
            raise RuntimeError(last_reason or "step size underflow", x)
        k2 = f(x + C2 * h, _combine(z, h, [k1], [A21]))
        k3 = f(x + C3 * h, _combine(z, h, [k1, k2], [A31, A32]))
        k4 = f(x + C4 * h, _combine(z, h, [k1, k2, k3], [A41, A42, A43]))
        k5 = f(x + C5 * h, _combine(z, h, [k1, k2, k3, k4], [A51, A52, A53, A54]))
        k6 = f(x + h, _combine(z, h, [k1, k2, k3, k4, k5], [A61, A62, A63, A64, A65]))
        z_new = _combine(z, h, [k1, k3, k4, k5, k6], [B1, B3, B4, B5, B6])
        k7 = f(x + h, z_new)
        err = 0.0
        for i in range(n):
            e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            scale = atol + rtol * max(abs(z[i]), abs(z_new[i]))
            err += (e / scale) ** 2
        err = math.sqrt(err / n)
        if not math.isfinite(err):
            h *= 0.5
            last_reason = "non-finite state"
            continue
        if err > 1.0:
            h *= max(MIN_FACTOR, SAFETY * err ** -0.2)
            continue
        if accept is not None:
            reason = accept(x + h, z_new)
            if reason is not None:
                last_reason = reason
                h *= 0.5
                continue
        x = x + h
        z = z_new
        k1 = k7
        xs.append(x)
        zs.append(list(z))
        if stop is not None and stop(x, z):
            return xs, zs, "stopped"
        factor = MAX_FACTOR if err == 0.0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err ** -0.2))
        h = min(h * factor, max_step)
    return xs, zs, "done"
