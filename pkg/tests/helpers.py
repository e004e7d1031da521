"""Independent oracles and frozen reference values for the test suite.

Everything here deliberately avoids the package's own code paths: the
root is found on a hand-derived closed form, the maximizer by
golden-section search, and scale values by contour Laplace inversion.
"""

import math

import numpy as np
from scipy.optimize import brentq

# Frozen with mpmath (30 digits) on the reference binary measure
# nu = delta_{(1/2, 1/2)}, weight 1.
PBAR_BINARY = 1.4213428793879549
CPBAR_BINARY = 0.25879663208075724
# Dissipative reference delta_{(1/2, 1/4)}, weight 1.
PBAR_HALF_QUARTER = 0.6795167444632412
CPBAR_HALF_QUARTER = 0.3515010891042711

LN2 = math.log(2.0)


def binary_gap(p: float) -> float:
    """(p+1) Phi'(p) - Phi(p) for the binary measure, closed form."""
    return (p + 1.0) * 2.0 ** -p * LN2 - 1.0 + 2.0 ** -p


def binary_pbar_oracle() -> float:
    """Root of the closed-form gap via an independent root finder."""
    return brentq(binary_gap, 0.5, 4.0, xtol=1e-14)


def golden_max(f, lo: float, hi: float, tol: float = 1e-9) -> float:
    """Golden-section maximizer of a unimodal function on [lo, hi]."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    inv_phi2 = (3.0 - math.sqrt(5.0)) / 2.0
    h = hi - lo
    c = lo + inv_phi2 * h
    d = lo + inv_phi * h
    yc, yd = f(c), f(d)
    while h > tol:
        h *= inv_phi
        if yc > yd:
            hi, d, yd = d, c, yc
            c = lo + inv_phi2 * h
            yc = f(c)
        else:
            lo, c, yc = c, d, yd
            d = lo + inv_phi * h
            yd = f(d)
    return 0.5 * (lo + hi)


_trapezoid = getattr(np, "trapezoid", np.trapz)


def laplace_of_table(grid: np.ndarray, values: np.ndarray, lam: float,
                     w_inf: float) -> float:
    """Trapezoid Laplace transform of a table with flat-asymptote tail."""
    integral = _trapezoid(np.exp(-lam * grid) * values, grid)
    return float(integral + w_inf * math.exp(-lam * grid[-1]) / lam)


def central_diff(f, p: float, h: float = 1e-5) -> float:
    return (f(p + h) - f(p - h)) / (2.0 * h)
