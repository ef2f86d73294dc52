"""Independent reference implementations used only by the tests.

These are deliberately written differently from the library code (complex
arithmetic, brute-force enumeration, null-space least squares, RK4) so an
agreement is evidence rather than a tautology.
"""

import cmath
import itertools
import math

import numpy as np


def bicycle_step(x, y, psi, v, delta, a, l_f, l_r, dt):
    """One step of the discrete kinematic bicycle model via complex numbers."""
    beta = np.arctan2(l_r * np.sin(delta), (l_f + l_r) * np.cos(delta))
    z = complex(x, y) + dt * v * cmath.exp(1j * (psi + beta))
    yaw_rate = v * np.sin(beta) / l_r
    return z.real, z.imag, psi + dt * yaw_rate, max(v + a * dt, 0.0)


def nine_pair_distance(c1, h1, d1, r1, c2, h2, d2, r2):
    """Minimum centre distance over all 3x3 circle pairs, minus both radii."""
    best = math.inf
    for p, q in itertools.product((-1, 0, 1), repeat=2):
        a = (c1[0] + p * d1 * math.cos(h1), c1[1] + p * d1 * math.sin(h1))
        b = (c2[0] + q * d2 * math.cos(h2), c2[1] + q * d2 * math.sin(h2))
        dx, dy = a[0] - b[0], a[1] - b[1]
        best = min(best, math.sqrt(dx * dx + dy * dy))
    return best - (r1 + r2)


def constrained_cubic(xs, ys, terminal_slope=0.0):
    """Raw-coefficient cubic (b0..b3) through the end anchors with fixed end slope.

    Solved by the null-space method: any feasible coefficient vector is a
    particular solution plus a multiple of the constraint null vector.
    """
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    x0, xf = xs[0], xs[-1]
    C = np.array([[1, x0, x0**2, x0**3],
                  [1, xf, xf**2, xf**3],
                  [0, 1, 2 * xf, 3 * xf**2]], float)
    d = np.array([ys[0], ys[-1], terminal_slope])
    particular = np.linalg.lstsq(C, d, rcond=None)[0]
    null = np.linalg.svd(C)[2][-1]
    if len(xs) == 2:
        return particular
    A = np.vander(xs[1:-1], 4, increasing=True)
    t = np.linalg.lstsq((A @ null)[:, None], ys[1:-1] - A @ particular, rcond=None)[0][0]
    return particular + t * null


def idm_accel(v, gap, v_lead, v0, T, s0, a_max, b, delta=4.0):
    s_star = s0 + max(0.0, v * T + v * (v - v_lead) / (2 * math.sqrt(a_max * b)))
    return a_max * (1 - (v / v0) ** delta - (s_star / gap) ** 2)


def idm_follow_rk4(x_f, v_f, x_l, v_l, length, params, t_end, h=1e-3):
    """Follower behind a constant-speed leader, integrated with classical RK4."""
    def f(s):
        xf, vf, xl = s
        return np.array([vf, idm_accel(vf, xl - xf - length, v_l, *params), v_l])

    s = np.array([x_f, v_f, x_l], float)
    for _ in range(int(round(t_end / h))):
        k1 = f(s)
        k2 = f(s + h / 2 * k1)
        k3 = f(s + h / 2 * k2)
        k4 = f(s + h * k3)
        s = s + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return s
