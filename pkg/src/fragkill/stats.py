"""Small statistical helpers shared by the experiment harness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo estimate with its standard error and sample size."""

    mean: float
    stderr: float
    n: int
    breakdown: dict = field(default_factory=dict, compare=False)

    def within(self, target: float, k_se: float = 3.0, slack: float = 0.0) -> bool:
        return abs(self.mean - target) <= k_se * self.stderr + slack


def freq_estimate(successes: int, n: int, **breakdown) -> McEstimate:
    """Frequency with binomial standard error sqrt(f(1-f)/n)."""
    f = successes / n
    return McEstimate(mean=f, stderr=math.sqrt(f * (1.0 - f) / n), n=n,
                      breakdown=breakdown)


def mean_estimate(values, **breakdown) -> McEstimate:
    """Sample mean with standard error sd/sqrt(n)."""
    arr = np.asarray(values, dtype=float)
    n = arr.size
    if n and arr.min() == arr.max():  # constant sample: exact, no float dust
        return McEstimate(mean=float(arr[0]), stderr=0.0, n=n,
                          breakdown=breakdown)
    se = float(arr.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return McEstimate(mean=float(arr.mean()), stderr=se, n=n, breakdown=breakdown)


def pooled_se(a: McEstimate, b: McEstimate) -> float:
    return math.hypot(a.stderr, b.stderr)


def isotonize_nonincreasing(y) -> np.ndarray:
    """Pool-adjacent-violators projection onto nonincreasing sequences."""
    y = np.asarray(y, dtype=float)
    # stack of (value, weight) blocks for the equivalent nondecreasing
    # problem on the reversed sequence
    vals: list[float] = []
    wts: list[float] = []
    for v in y[::-1]:
        cv, cw = float(v), 1.0
        while vals and vals[-1] > cv:
            pv, pw = vals.pop(), wts.pop()
            cv = (cv * cw + pv * pw) / (cw + pw)
            cw += pw
        vals.append(cv)
        wts.append(cw)
    out = np.concatenate([np.full(int(w), v) for v, w in zip(vals, wts)])
    return out[::-1]
