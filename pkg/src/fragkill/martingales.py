"""Additive and multiplicative functionals evaluated on population snapshots.

The intrinsic additive martingale has unit mean; its killed,
scale-function-weighted analogue has mean W_p(x); and the product of a
monotone [0,1]-valued function of each block's barrier-relative position
characterizes the extinction probability.  All evaluators are pure
functions of an immutable snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GridRange
from .levy import P_LOWER, LevyModel, ScaleTable, phi
from .stats import isotonize_nonincreasing


@dataclass(frozen=True)
class Snapshot:
    """Alive blocks' log-masses at one instant."""

    t: float
    log_masses: np.ndarray


@dataclass(frozen=True)
class ExtinctionCurve:
    """Estimated extinct-by-horizon probabilities over an x grid."""

    x_grid: np.ndarray
    g_hat: np.ndarray
    stderr: np.ndarray
    horizon: float
    trials: int
    capped_fraction: float = 0.0

    def isotonized(self) -> "FunctionTable":
        """Nonincreasing projection of g_hat as an evaluable table.

        Right of the grid the table declares the PAV value at the last
        node (held flat); left of the grid it holds the first value.
        """
        iso = isotonize_nonincreasing(self.g_hat)
        return FunctionTable(x=self.x_grid, y=iso,
                             left=float(iso[0]), right=float(iso[-1]))

    def declared_error(self) -> float:
        """Interpolation-plus-noise error bound declared for g_hat use."""
        gaps = np.abs(np.diff(self.g_hat)) / 2.0 if len(self.g_hat) > 1 else [0.0]
        return float(3.0 * self.stderr.max() + max(gaps))


@dataclass(frozen=True)
class FunctionTable:
    """Monotone [0,1]-valued function given by grid values.

    Linear interpolation between nodes; declared constant values beyond
    the grid.  Consumed as data (never a closure) so runs reproduce
    bit-for-bit from config plus tables.
    """

    x: np.ndarray
    y: np.ndarray
    left: float
    right: float

    def __post_init__(self):
        if np.any(self.y < -1e-12) or np.any(self.y > 1.0 + 1e-12):
            raise DomainError("function table values must lie in [0, 1]")

    def __call__(self, xs) -> np.ndarray:
        return np.interp(np.asarray(xs, dtype=float), self.x, self.y,
                         left=self.left, right=self.right)


def additive_intrinsic(snapshot: Snapshot, model: LevyModel, p: float) -> float:
    """Unit-mean additive martingale: e^{phi(p) t} sum_n |block_n|^(1+p).

    Terms are accumulated smallest first so diagnostics are
    reproducible across platforms.
    """
    if p <= P_LOWER:
        raise DomainError(f"additive_intrinsic requires p > {P_LOWER}")
    lm = snapshot.log_masses
    if lm.size == 0:
        return 0.0
    terms = np.sort(np.exp((1.0 + p) * lm))
    return float(math.exp(phi(model.nu, p) * snapshot.t) * terms.sum())


def additive_killed(snapshot: Snapshot, model: LevyModel, p: float,
                    scale: ScaleTable, x: float) -> float:
    """Killed additive martingale with scale-function weights.

    e^{phi(p) t} sum_n W_p(x + c t + log|block_n|) |block_n|^(1+p);
    its mean over killed runs from offset x is W_p(x).
    """
    lm = snapshot.log_masses
    if lm.size == 0:
        return 0.0
    pos = x + model.c * snapshot.t + lm
    weights = scale.values_at(pos)   # GridRange if the table is too short
    terms = np.exp((1.0 + p) * lm) * weights
    terms = np.sort(terms)
    return float(math.exp(phi(model.nu, p) * snapshot.t) * terms.sum())


def multiplicative(snapshot: Snapshot, f: FunctionTable, model: LevyModel,
                   x: float) -> float:
    """Product of f over blocks' barrier-relative positions (empty = 1)."""
    lm = snapshot.log_masses
    if lm.size == 0:
        return 1.0
    pos = np.sort(x + model.c * snapshot.t + lm)
    return float(np.prod(f(pos)))


@dataclass(frozen=True)
class SandwichReport:
    holds: bool
    lower: float     # c^-1 e^{phi(p) t} lambda1^(1+p)
    value: float     # killed additive martingale


def sandwich_check(snapshot: Snapshot, model: LevyModel, p: float,
                   scale: ScaleTable, x: float) -> SandwichReport:
    """Runtime diagnostic: the largest block bounds the killed martingale.

    c^-1 e^{phi(p) t} lambda1^(1+p) <= M^x_t(p), up to 1e-9 relative.
    """
    value = additive_killed(snapshot, model, p, scale, x)
    lm = snapshot.log_masses
    if lm.size == 0:
        return SandwichReport(holds=True, lower=0.0, value=value)
    lam1 = float(lm.max())
    lower = math.exp(phi(model.nu, p) * snapshot.t + (1.0 + p) * lam1) / model.c
    holds = lower <= value * (1.0 + 1e-9) + 1e-300
    return SandwichReport(holds=holds, lower=lower, value=value)
