"""Closed-form references used as oracles by the studies and tests.

Flat-square 1/r integrals (corner-primitive formula), the singular/near
values of the 3x3 sheet study, and the classical exterior Stokes fields of
the rotating and translating sphere.
"""
from __future__ import annotations

import math

import numpy as np


def rect_inv_r_integral(x0: float, x1: float, y0: float, y1: float, ax: float, ay: float) -> float:
    """int over [x0,x1]x[y0,y1] of 1/|x - (ax,ay)| dx dy (singular point allowed
    on the closure)."""

    def corner(X, Y):
        if X == 0.0 or Y == 0.0:
            return 0.0
        s = math.copysign(1.0, X) * math.copysign(1.0, Y)
        X, Y = abs(X), abs(Y)
        return s * (X * math.asinh(Y / X) + Y * math.asinh(X / Y))

    return (corner(x1 - ax, y1 - ay) - corner(x0 - ax, y1 - ay)
            - corner(x1 - ax, y0 - ay) + corner(x0 - ax, y0 - ay))


def sheet_singular_value(L_e: float = 1.0) -> float:
    """int 1/r over the center element of the 3x3 sheet: log(12 sqrt2 + 17) L^e."""
    return math.log(12.0 * math.sqrt(2.0) + 17.0) * L_e


def sheet_near_value(L_e: float = 1.0) -> float:
    """int 1/r over the 8 surrounding elements:
    (6 log(sqrt2+1) + log(2 sqrt2+3)) L^e."""
    return (6.0 * math.log(math.sqrt(2.0) + 1.0) + math.log(2.0 * math.sqrt(2.0) + 3.0)) * L_e


def rotating_sphere_traction(x, eta: float, omega: float, radius: float) -> np.ndarray:
    """t = -3 eta (omega e3 x x) / R on the sphere surface."""
    w = np.array([0.0, 0.0, omega])
    return -3.0 * eta / radius * np.cross(w, np.asarray(x, dtype=float))


def rotating_sphere_tmax(eta: float, omega: float) -> float:
    return 3.0 * eta * omega


def rotating_sphere_velocity(y, omega: float, radius: float) -> np.ndarray:
    """Exterior field of a sphere rotating at omega e3: v = R^3 (w x y)/|y|^3."""
    y = np.asarray(y, dtype=float)
    w = np.array([0.0, 0.0, omega])
    return radius**3 * np.cross(w, y) / np.linalg.norm(y) ** 3


def translating_sphere_traction(x, eta: float, vbar: float, radius: float) -> np.ndarray:
    """Uniform traction -(3 eta vbar / 2R) e3 of the Stokes translation."""
    return np.array([0.0, 0.0, -1.5 * eta * vbar / radius])


def translating_sphere_velocity(y, vbar: float, radius: float) -> np.ndarray:
    """Exterior velocity of a sphere moving at vbar e3 through still fluid."""
    y = np.asarray(y, dtype=float)
    r = np.linalg.norm(y)
    e3 = np.array([0.0, 0.0, 1.0])
    cos = y[2] / r
    rhat = y / r
    a = radius / r
    v_r = vbar * cos * (1.5 * a - 0.5 * a**3)
    # polar component: v_theta = -vbar sin(theta) (3a/4 + a^3/4)
    that = e3 - cos * rhat
    st = np.linalg.norm(that)
    if st > 1e-14:
        that = that / st
    sin = math.sqrt(max(0.0, 1.0 - cos * cos))
    v_t = vbar * sin * (0.75 * a + 0.25 * a**3)
    return v_r * rhat + v_t * that * (st > 1e-14)


def translating_sphere_pressure(y, eta: float, vbar: float, radius: float) -> float:
    """p = (3 eta R vbar / 2) z/|y|^3 for translation along e3."""
    y = np.asarray(y, dtype=float)
    return 1.5 * eta * radius * vbar * y[2] / np.linalg.norm(y) ** 3
