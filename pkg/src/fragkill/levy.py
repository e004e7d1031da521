"""Spectral quantities of the tagged fragment and scale-function tables.

The tagged fragment's log-mass is a killed subordinator with Laplace
exponent ``phi``; relative to the moving barrier the fragment follows a
spectrally negative, bounded-variation Levy process ``x + c t - xi(t)``.
Everything here is closed-form except the scale function, which is
tabulated from its ladder-height convolution series.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BracketFailure, DomainError, DriftTooSmall, GridRange, NoConvergence
from .measure import DislocationMeasure

P_LOWER = -1.0 + 1e-9
TOL_ROOT = 1e-10
_SERIES_RTOL = 1e-12
_MAX_TERMS = 10_000


def phi(nu: DislocationMeasure, p: float) -> float:
    """Laplace exponent of the tagged-fragment subordinator.

    phi(p) = sum_atoms w * (1 - sum_i s_i^(1+p)); phi(0) equals the
    killing rate kappa, and phi is nondecreasing and concave.
    """
    if p <= P_LOWER:
        raise DomainError(f"phi requires p > {P_LOWER}, got {p}")
    return float(nu.rho - np.dot(nu._w_rep, nu._s_all ** (1.0 + p)))


def phi_prime(nu: DislocationMeasure, p: float) -> float:
    """Derivative of phi: sum_atoms w * sum_i s_i^(1+p) * log(1/s_i)."""
    if p <= P_LOWER:
        raise DomainError(f"phi_prime requires p > {P_LOWER}, got {p}")
    return float(np.dot(nu._w_rep, nu._s_all ** (1.0 + p) * (-nu._log_s)))


def speed_c_p(nu: DislocationMeasure, p: float) -> float:
    """Per-tilt barrier speed c_p = phi(p) / (p + 1)."""
    return phi(nu, p) / (p + 1.0)


def _pbar_gap(nu: DislocationMeasure, p: float) -> float:
    """g(p) = (p+1) phi'(p) - phi(p); positive below p_bar, negative above."""
    return (p + 1.0) * phi_prime(nu, p) - phi(nu, p)


def p_bar(nu: DislocationMeasure, tol_root: float = TOL_ROOT) -> float:
    """Unique positive root of (p+1) phi'(p) = phi(p), by bisection.

    The root maximizes c_p; bracketing expands geometrically from p = 1
    and the sign change is guaranteed for measures whose dust rate does
    not dominate the mean log split (phi'(0) > kappa).
    """
    g0 = _pbar_gap(nu, 0.0)
    if g0 <= 0.0:
        raise BracketFailure(
            "largest-fragment speed has no positive maximizer: "
            f"phi'(0) = {phi_prime(nu, 0.0):.6g} <= kappa = {nu.kappa:.6g}"
        )
    lo, hi = 0.0, 1.0
    while _pbar_gap(nu, hi) > 0.0:
        lo, hi = hi, hi * 2.0
        if hi > 1e6:
            raise BracketFailure("no sign change of (p+1)phi'(p)-phi(p) below 1e6")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _pbar_gap(nu, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    if abs(_pbar_gap(nu, root)) > tol_root:
        raise BracketFailure(f"bisection residual {abs(_pbar_gap(nu, root)):.3g} > {tol_root}")
    return root


@dataclass(frozen=True)
class LevyModel:
    """Barrier drift c paired with a dislocation measure, plus cached roots."""

    c: float
    nu: DislocationMeasure
    p_lower: float
    p_bar: float
    c_p_bar: float


def make_model(c: float, nu: DislocationMeasure, tol_root: float = TOL_ROOT) -> LevyModel:
    if c <= 0.0:
        raise DomainError(f"barrier drift must be positive, got {c}")
    pb = p_bar(nu, tol_root)
    return LevyModel(c=float(c), nu=nu, p_lower=P_LOWER, p_bar=pb,
                     c_p_bar=speed_c_p(nu, pb))


def psi(model: LevyModel, p: float) -> float:
    """Laplace exponent of the barrier-relative process: c p - phi(p)."""
    return model.c * p - phi(model.nu, p)


def psi_tilted(model: LevyModel, p: float, lam: float) -> float:
    """Post-tilt Laplace exponent psi_p(lam) = psi(lam + p) - psi(p)."""
    if lam + p <= P_LOWER:
        raise DomainError(f"psi_tilted requires lam + p > {P_LOWER}")
    return psi(model, lam + p) - psi(model, p)


def psi_prime_at_zero(model: LevyModel, p: float) -> float:
    """Right-derivative of psi_p at 0: c - phi'(p)."""
    return model.c - phi_prime(model.nu, p)


@dataclass(frozen=True)
class JumpMeasure:
    """Atomic jump measure of the (possibly tilted) spine's log-mass."""

    jumps: np.ndarray       # distinct positive log-mass decrements, ascending
    rates: np.ndarray       # per-jump rates, same length
    killing: float          # annihilation rate (0 after a positive tilt)

    @property
    def total_rate(self) -> float:
        return float(self.rates.sum())


def _tilted_jump_arrays(nu: DislocationMeasure, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Merged (jumps, rates) with rates w * s^(1+p); valid for p > P_LOWER."""
    y = -nu._log_s
    r = nu._w_rep * nu._s_all ** (1.0 + p)
    order = np.argsort(y, kind="stable")
    y, r = y[order], r[order]
    uniq, inverse = np.unique(y, return_inverse=True)
    merged = np.zeros(len(uniq))
    np.add.at(merged, inverse, r)
    return uniq, merged


def tilted_jump_measure(nu: DislocationMeasure, p: float) -> JumpMeasure:
    """Spine jump measure under the exponential tilt of strength p.

    p = 0 reproduces the original spine law: rates w * s_i with killing
    kappa.  For p > 0 the rates are w * s_i^(1+p) and killing vanishes.
    In both cases the total jump rate equals rho - phi(p).
    """
    if p < 0.0:
        raise DomainError(f"tilted_jump_measure requires p >= 0, got {p}")
    jumps, rates = _tilted_jump_arrays(nu, p)
    jm = JumpMeasure(jumps=jumps, rates=rates, killing=nu.kappa if p == 0.0 else 0.0)
    expected = nu.rho - phi(nu, p)
    if abs(jm.total_rate - expected) > 1e-9 * max(1.0, nu.rho):
        raise NoConvergence(
            f"jump-rate identity violated: {jm.total_rate} vs rho - phi(p) = {expected}"
        )
    return jm


@dataclass(frozen=True)
class ScaleTable:
    """Grid table of the scale function W_p with linear interpolation.

    values[0] = 1/c exactly; values are nondecreasing and approach
    w_inf = 1 / psi_p'(0+) as x grows.
    """

    p: float
    h: float
    x_max: float
    values: np.ndarray
    c: float
    psi_prime0: float
    experimental: bool = False
    _grid: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def w_inf(self) -> float:
        return 1.0 / self.psi_prime0

    @property
    def grid(self) -> np.ndarray:
        return self._grid

    def value(self, x: float) -> float:
        """W_p(x) by linear interpolation; GridRange outside [0, x_max]."""
        if x < -1e-12 or x > self.x_max + 1e-12:
            raise GridRange(f"x = {x} outside scale grid [0, {self.x_max}]")
        return float(np.interp(x, self._grid, self.values))

    def values_at(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized lookup; GridRange if any query exceeds the grid."""
        xs = np.asarray(xs, dtype=float)
        if xs.size and (xs.min() < -1e-12 or xs.max() > self.x_max + 1e-12):
            raise GridRange(
                f"queries in [{xs.min():.6g}, {xs.max():.6g}] exceed scale grid "
                f"[0, {self.x_max:.6g}]"
            )
        return np.interp(xs, self._grid, self.values)

    def value_with_tail(self, x: float) -> tuple[float, bool]:
        """Lookup that substitutes the asymptote w_inf beyond the grid."""
        if x > self.x_max:
            return self.w_inf, True
        return self.value(x), False


def scale_function(model: LevyModel, p: float, h: float, x_max: float) -> ScaleTable:
    """Tabulate W_p on {0, h, ..., x_max} from its convolution series.

    W_p(x) = sum_n c^-(n+1) H_n(x) with H_0 = 1 and H_n the running
    convolution of the tilted jump-tail function (the tilt removes spine
    killing, so the tail alone drives the series).  Convolutions use the
    trapezoid rule on the grid; the series is truncated once the next
    term falls below 1e-12 of the accumulated value.  Requires
    c > phi'(p), which is also exactly the series' convergence condition.
    """
    if h <= 0.0 or x_max < h:
        raise DomainError(f"need h > 0 and x_max >= h, got h={h}, x_max={x_max}")
    if p <= P_LOWER:
        raise DomainError(f"scale_function requires p > {P_LOWER}")
    drift = psi_prime_at_zero(model, p)
    if drift <= 0.0:
        raise DriftTooSmall(
            f"scale function needs c > phi'(p): c = {model.c:.6g}, "
            f"phi'({p}) = {phi_prime(model.nu, p):.6g}"
        )
    experimental = p < 0.0
    if experimental:
        warnings.warn("scale_function with p < 0 is experimental", stacklevel=2)

    jumps, rates = _tilted_jump_arrays(model.nu, p)
    n = int(round(x_max / h))
    grid = np.arange(n + 1) * h
    # tail of the tilted jump measure strictly above each node
    cum = np.concatenate(([0.0], np.cumsum(rates)))
    tail = rates.sum() - cum[np.searchsorted(jumps, grid, side="right")]

    m = 1
    while m < 2 * n + 1:
        m <<= 1
    f_tail = np.fft.rfft(tail, m)

    c = model.c
    H = np.ones(n + 1)
    w = H / c
    coef = 1.0 / c
    for _ in range(_MAX_TERMS):
        conv = np.fft.irfft(f_tail * np.fft.rfft(H, m), m)[: n + 1]
        H = h * (conv - 0.5 * tail[0] * H - 0.5 * tail * H[0])
        H[0] = 0.0
        coef /= c
        term = coef * H
        w += term
        if term.max() < _SERIES_RTOL * w.max():
            break
    else:
        raise NoConvergence(f"scale series exceeded {_MAX_TERMS} terms")

    if w[0] != 1.0 / c:
        raise NoConvergence("scale table lost the exact boundary value 1/c")
    if np.any(np.diff(w) < -1e-9 * w.max()):
        raise NoConvergence("scale table is not nondecreasing")
    w = np.maximum.accumulate(w)  # scrub float dust only
    return ScaleTable(p=p, h=h, x_max=float(grid[-1]), values=w, c=c,
                      psi_prime0=drift, experimental=experimental, _grid=grid)


def spine_survival_prob(model: LevyModel, p: float, x: float,
                        scale: ScaleTable | None = None) -> float:
    """Probability the tilted spine never drops below the barrier from x.

    Equals max(psi_p'(0+), 0) * W_p(x), clamped to [0, 1]; the degenerate
    drift case returns 0 without needing a table.
    """
    drift = psi_prime_at_zero(model, p)
    if drift <= 0.0:
        return 0.0
    if scale is None:
        raise GridRange("a scale table covering x is required when c > phi'(p)")
    return min(1.0, max(0.0, drift * scale.value(x)))
