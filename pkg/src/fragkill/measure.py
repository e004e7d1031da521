"""Finite dislocation measures on ranked mass partitions.

A mass partition is a nonincreasing sequence s1 >= s2 >= ... >= 0 with
sum <= 1; the deficit 1 - sum(s) is mass dusted away at a split.  A
dislocation measure is a finite list of weighted partitions; the total
weight rho is the per-block split rate and kappa = sum w*(1 - sum(s))
is the rate at which a tagged fragment is annihilated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyMeasure,
    ForbiddenAtom,
    NegativePart,
    NonFinite,
    NonPositiveWeight,
    SumExceedsOne,
)

TOL_SUM = 1e-12


@dataclass(frozen=True)
class MassPartition:
    """Canonical ranked mass partition: sorted descending, no zero parts."""

    parts: tuple[float, ...]

    @property
    def mass(self) -> float:
        return float(sum(self.parts))

    @property
    def deficit(self) -> float:
        """Mass fraction lost to dust at this split (>= 0)."""
        return max(0.0, 1.0 - self.mass)

    def __iter__(self):
        return iter(self.parts)

    def __len__(self) -> int:
        return len(self.parts)


def validate_mass_partition(parts) -> MassPartition:
    """Canonicalize a raw sequence into a MassPartition.

    Sorts descending, strips zeros, and clamps float-noise overshoot:
    a sum in (1, 1 + 1e-12] is repaired by reducing the smallest part.

    Raises NonFinite, NegativePart or SumExceedsOne on invalid input.
    """
    vals = [float(v) for v in parts]
    if any(not math.isfinite(v) for v in vals):
        raise NonFinite(f"partition contains non-finite entries: {vals}")
    if any(v < 0.0 for v in vals):
        raise NegativePart(f"partition contains negative entries: {vals}")
    vals = sorted((v for v in vals if v > 0.0), reverse=True)
    total = sum(vals)
    if total > 1.0 + TOL_SUM:
        raise SumExceedsOne(f"partition masses sum to {total} > 1")
    if total > 1.0:
        # float noise only: absorb the overshoot in the smallest parts
        excess = total - 1.0
        while excess > 0.0 and vals:
            take = min(excess, vals[-1])
            vals[-1] -= take
            excess -= take
            if vals[-1] == 0.0:
                vals.pop()
    return MassPartition(tuple(vals))


@dataclass(frozen=True)
class DislocationMeasure:
    """Finite atomic dislocation measure with split-rate bookkeeping.

    Immutable after construction; safe to share across threads.  The
    flattened part arrays are cached for vectorized spectral sums.
    """

    atoms: tuple[tuple[float, MassPartition], ...]
    rho: float
    kappa: float
    conservative: bool
    # flattened caches (one entry per positive part of every atom)
    _w_rep: np.ndarray = field(repr=False, compare=False)
    _s_all: np.ndarray = field(repr=False, compare=False)
    _log_s: np.ndarray = field(repr=False, compare=False)
    _cum_w: np.ndarray = field(repr=False, compare=False)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def pick_atom(self, u: float) -> int:
        """Index of the atom selected by a uniform draw u in [0, 1)."""
        return int(np.searchsorted(self._cum_w, u, side="right"))

    def sample_split(self, rng: np.random.Generator) -> MassPartition:
        """Draw one split outcome; atom i has probability weight_i / rho."""
        return self.atoms[self.pick_atom(rng.random())][1]

    def to_config(self) -> dict:
        """Canonical JSON-ready echo of the measure."""
        return {
            "atoms": [
                {"w": w, "s": list(p.parts)} for w, p in self.atoms
            ]
        }


def make_dislocation_measure(atoms) -> DislocationMeasure:
    """Build a DislocationMeasure from (weight, partition) pairs.

    Partitions may be raw sequences; they are canonicalized first.
    Admissibility: no unit partition (1,) and no single-block partition
    (an atom must produce at least two positive fragments), since a
    measure charging such atoms is excluded by the admissibility
    conditions on ranked partitions.
    """
    atom_list = list(atoms)
    if not atom_list:
        raise EmptyMeasure("dislocation measure needs at least one atom")
    canon: list[tuple[float, MassPartition]] = []
    for w, p in atom_list:
        w = float(w)
        if not math.isfinite(w) or w <= 0.0:
            raise NonPositiveWeight(f"atom weight must be positive, got {w}")
        part = p if isinstance(p, MassPartition) else validate_mass_partition(p)
        if len(part) == 0:
            raise ForbiddenAtom("atom with no positive parts is not admissible")
        if part.parts[0] >= 1.0:
            raise ForbiddenAtom("unit partition (1, 0, ...) carries no split")
        if len(part) == 1:
            raise ForbiddenAtom(
                "single-block partitions (s2 = 0) are not admissible"
            )
        canon.append((w, part))

    rho = sum(w for w, _ in canon)
    kappa = sum(w * p.deficit for w, p in canon)
    w_rep = np.concatenate([np.full(len(p), w) for w, p in canon])
    s_all = np.concatenate([np.asarray(p.parts) for _, p in canon])
    cum_w = np.cumsum([w for w, _ in canon]) / rho
    return DislocationMeasure(
        atoms=tuple(canon),
        rho=float(rho),
        kappa=float(kappa),
        conservative=bool(kappa <= TOL_SUM),
        _w_rep=w_rep,
        _s_all=s_all,
        _log_s=np.log(s_all),
        _cum_w=cum_w,
    )


def sample_split(nu: DislocationMeasure, rng: np.random.Generator) -> MassPartition:
    """Draw one split outcome from the measure; see DislocationMeasure.sample_split."""
    return nu.sample_split(rng)


def measure_from_config(cfg: dict) -> DislocationMeasure:
    """Parse the {"atoms": [{"w": ..., "s": [...]}]} config form."""
    try:
        atoms = [(a["w"], a["s"]) for a in cfg["atoms"]]
    except (KeyError, TypeError) as exc:
        raise EmptyMeasure(f"malformed measure config: {cfg!r}") from exc
    return make_dislocation_measure(atoms)


def binary_measure(weight: float = 1.0) -> DislocationMeasure:
    """The reference conservative measure: one atom splitting in half."""
    return make_dislocation_measure([(weight, (0.5, 0.5))])
