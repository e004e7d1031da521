"""Simulation of the tagged fragment relative to the moving barrier.

The spine's barrier-relative position X = x + c t - xi(t) drifts up at
rate c and jumps down by -log s at each dislocation affecting it; under
the original law it is additionally annihilated at rate kappa.  First
passage below 0 can only happen at a jump or at annihilation, so the
barrier test after each event is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .levy import LevyModel, tilted_jump_measure
from .stats import McEstimate, freq_estimate


@dataclass(frozen=True)
class SpinePath:
    """One spine trajectory: jump events plus how and when it stopped."""

    x: float
    events: tuple[tuple[float, float], ...]   # (time, log-mass decrement)
    killed_at: float | None                   # annihilation time, if any
    tau_minus: float | None                   # first entry below the barrier
    final_time: float
    final_position: float                     # from the left at the stop time

    @property
    def survived(self) -> bool:
        return self.tau_minus is None


def simulate_spine(model: LevyModel, p_tilt: float | None, x: float,
                   horizon: float, rng: np.random.Generator) -> SpinePath:
    """Simulate X from offset x up to min(horizon, first passage, death).

    p_tilt = None (or 0) uses the original spine law with its kappa
    death clock; p_tilt > 0 uses the tilted jump rates w * s^(1+p) and
    no death clock.  Annihilation sends the path below any barrier, so
    it also sets tau_minus.
    """
    if horizon <= 0.0:
        raise DomainError(f"horizon must be positive, got {horizon}")
    if x < 0.0:
        raise DomainError(f"barrier offset must be >= 0, got {x}")
    p = 0.0 if p_tilt is None else float(p_tilt)
    jm = tilted_jump_measure(model.nu, p)
    rate = jm.total_rate
    cum = np.cumsum(jm.rates) / rate
    jumps = jm.jumps
    c = model.c

    death = rng.exponential(1.0 / jm.killing) if jm.killing > 0.0 else math.inf

    events: list[tuple[float, float]] = []
    t = 0.0
    drop = 0.0
    tau = None
    killed = None
    while True:
        t_next = t + rng.exponential(1.0 / rate)
        if death <= min(t_next, horizon):
            killed = death
            tau = death
            t = death
            break
        if t_next > horizon:
            t = horizon
            break
        t = t_next
        dec = float(jumps[int(np.searchsorted(cum, rng.random(), side="right"))])
        events.append((t, dec))
        drop += dec
        if x + c * t - drop < 0.0:
            tau = t
            break
    return SpinePath(x=x, events=tuple(events), killed_at=killed, tau_minus=tau,
                     final_time=t, final_position=x + c * t - drop)


def first_passage_time(model: LevyModel, jumps, cum, rate, killing, x,
                       horizon, rng) -> float:
    """Lean first-passage sampler: tau below the barrier, or inf if > horizon.

    Annihilation counts as passage.  `jumps`, `cum`, `rate`, `killing`
    come from a tilted jump measure, precomputed by the caller.
    """
    death = rng.exponential(1.0 / killing) if killing > 0.0 else math.inf
    t = 0.0
    drop = 0.0
    c = model.c
    while True:
        t += rng.exponential(1.0 / rate)
        if death <= min(t, horizon):
            return death
        if t > horizon:
            return math.inf
        drop += jumps[int(np.searchsorted(cum, rng.random(), side="right"))]
        if x + c * t - drop < 0.0:
            return t


def spine_survival_mc(model: LevyModel, p_tilt: float | None, x: float,
                      horizon: float, trials: int,
                      rng: np.random.Generator) -> McEstimate:
    """Fraction of spine paths with no barrier passage before the horizon.

    A monotone upper bound of the never-passage probability, decreasing
    in the horizon; annihilated paths count as passages.
    """
    if trials < 100:
        raise ConfigError(f"spine_survival_mc needs trials >= 100, got {trials}")
    p = 0.0 if p_tilt is None else float(p_tilt)
    jm = tilted_jump_measure(model.nu, p)
    rate = jm.total_rate
    cum = np.cumsum(jm.rates) / rate
    hits = sum(
        first_passage_time(model, jm.jumps, cum, rate, jm.killing, x,
                           horizon, rng) > horizon
        for _ in range(trials)
    )
    return freq_estimate(hits, trials, x=x, horizon=horizon, p=p)
