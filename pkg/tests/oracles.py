"""Independent quadrature references for loop actions and periods.

These never touch the flow tracer: turning points come from root finding on
V(x) = E and the integrals use adaptive Gauss-Kronrod quadrature after the
sine substitution x = c + r*sin(theta), which removes the square-root
endpoint singularity.
"""

import math

from scipy.integrate import quad
from scipy.optimize import brentq


def turning_points(v, energy, x_lo, x_hi, samples=4001):
    """Outermost solutions of V(x) = E inside [x_lo, x_hi].

    The bracket must contain exactly one classically allowed interval.
    """
    import numpy as np

    xs = np.linspace(x_lo, x_hi, samples)
    below = np.asarray(v(xs)) < energy
    idx = np.nonzero(below)[0]
    if idx.size == 0:
        raise ValueError("no classically allowed region in the bracket")
    i0, i1 = idx[0], idx[-1]
    if i0 == 0 or i1 == samples - 1:
        raise ValueError("allowed region touches the bracket")
    left = brentq(lambda x: v(x) - energy, xs[i0 - 1], xs[i0], xtol=1e-15)
    right = brentq(lambda x: v(x) - energy, xs[i1], xs[i1 + 1], xtol=1e-15)
    return left, right


def action_integral(v, energy, x_lo, x_hi):
    """2 * integral of sqrt(2(E - V)) dx over the allowed interval."""
    a, b = turning_points(v, energy, x_lo, x_hi)
    c, r = 0.5 * (a + b), 0.5 * (b - a)

    def f(theta):
        x = c + r * math.sin(theta)
        return math.sqrt(2.0 * max(energy - v(x), 0.0)) * r * math.cos(theta)

    val, _ = quad(f, -math.pi / 2, math.pi / 2, epsabs=1e-13, epsrel=1e-13, limit=500)
    return 2.0 * val


def period_integral(v, energy, x_lo, x_hi):
    """2 * integral of dx / sqrt(2(E - V)) over the allowed interval."""
    a, b = turning_points(v, energy, x_lo, x_hi)
    c, r = 0.5 * (a + b), 0.5 * (b - a)

    def f(theta):
        x = c + r * math.sin(theta)
        dv = 2.0 * max(energy - v(x), 0.0)
        if dv == 0.0:
            return 0.0
        return r * math.cos(theta) / math.sqrt(dv)

    val, _ = quad(f, -math.pi / 2, math.pi / 2, epsabs=1e-13, epsrel=1e-13, limit=500)
    return 2.0 * val


def morse_action_closed_form(energy, depth=1.0, a=1.0):
    """Loop action of xi^2/2 + D(1 - exp(-a x))^2 below the plateau."""
    return (
        2.0
        * math.pi
        * math.sqrt(2.0 * depth)
        * (1.0 - math.sqrt(1.0 - energy / depth))
        / a
    )


def morse_level_closed_form(n, hbar, depth=1.0, a=1.0):
    """Bound levels of the same operator: the two-term rule is exact here."""
    omega = a * math.sqrt(2.0 * depth)
    s = hbar * omega * (n + 0.5)
    return s - s * s / (4.0 * depth)
