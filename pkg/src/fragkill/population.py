"""Killed and unkilled fragmentation-chain populations.

Blocks split at the common rate rho; children are killed at creation
when their mass is below the barrier e^-(x+ct) (killed runs) or below a
fixed mass floor (unkilled runs, to keep populations finite).  Each run
is driven by a 64-bit seed key; block randomness is genealogically
keyed, so increasing x with the same seed only ever adds blocks.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import _engine
from .errors import DomainError
from .levy import LevyModel
from .rng import KEY_ATOM, KEY_WAIT, mix64, unit_from

DEFAULT_MAX_BLOCKS = 1_000_000


@dataclass(frozen=True)
class Caps:
    """Resource limits for one run."""

    max_blocks: int = DEFAULT_MAX_BLOCKS
    hard: bool = False   # hard caps make the CLI fail instead of flagging


@dataclass(frozen=True)
class Checkpoint:
    t: float
    n_blocks: int
    log_lambda1: float          # nan when the population is empty
    total_mass: float
    extras: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class Trajectory:
    """Checkpointed record of one population run."""

    x: float
    c: float
    horizon: float
    checkpoints: tuple[Checkpoint, ...]
    extinct: bool
    zeta: float | None
    capped: bool
    end_time: float
    events: int
    removed_mass: float          # mass of children dropped at creation
    killed: bool
    floor_eps: float = 0.0

    @property
    def survived_to_horizon(self) -> bool:
        """True when the run did not go extinct before the horizon.

        Capped runs count as survived: the population was large and
        still above the barrier when the run stopped.
        """
        return not self.extinct


@dataclass(frozen=True)
class Block:
    """Debug view of one block (from the recording reference engine)."""

    id: int
    parent: int | None
    log_mass: float
    birth_time: float
    next_split: float


def _measure_arrays(nu):
    child_log = []
    atom_start = [0]
    for _, part in nu.atoms:
        child_log.extend(math.log(s) for s in part.parts)
        atom_start.append(len(child_log))
    return (np.asarray(child_log), np.asarray(atom_start, dtype=np.int64),
            nu._cum_w.astype(float), nu.rho)


def _run(model: LevyModel, x: float, horizon: float, checkpoint_times,
         caps: Caps, seed: int, *, killed: bool, floor_eps: float = 0.0,
         snapshot_eval=None) -> Trajectory:
    if horizon <= 0.0:
        raise DomainError(f"horizon must be positive, got {horizon}")
    if killed and x < 0.0:
        raise DomainError(f"barrier offset must be >= 0, got {x}")
    if caps.max_blocks < 1:
        raise DomainError("caps.max_blocks must be >= 1")
    cp = np.asarray(sorted(float(t) for t in checkpoint_times))
    if cp.size and (cp[0] < 0.0 or cp[-1] > horizon):
        raise DomainError("checkpoint times must lie in [0, horizon]")
    log_floor = math.log(floor_eps) if floor_eps > 0.0 else -math.inf
    child_log, atom_start, atom_cum, rho = _measure_arrays(model.nu)
    snap_cap = caps.max_blocks + 8 if snapshot_eval is not None else 0

    (cp_n, cp_maxlm, cp_mass, extinct, zeta, capped, end_time, events,
     removed_mass, snap_data, snap_len) = _engine.run_chain(
        np.uint64(seed), model.c, x, killed, log_floor, horizon, cp,
        caps.max_blocks, child_log, atom_start, atom_cum, rho, snap_cap)

    checkpoints = []
    for i, t in enumerate(cp):
        if cp_n[i] < 0:
            break  # run stopped (capped) before this checkpoint
        extras = {}
        if snapshot_eval is not None:
            lms = snap_data[i * snap_cap: i * snap_cap + snap_len[i]]
            extras = snapshot_eval(float(t), lms)
        checkpoints.append(Checkpoint(
            t=float(t), n_blocks=int(cp_n[i]),
            log_lambda1=float(cp_maxlm[i]), total_mass=float(cp_mass[i]),
            extras=extras))
    return Trajectory(
        x=x, c=model.c, horizon=horizon, checkpoints=tuple(checkpoints),
        extinct=bool(extinct), zeta=float(zeta) if extinct else None,
        capped=bool(capped), end_time=float(end_time), events=int(events),
        removed_mass=float(removed_mass), killed=killed, floor_eps=floor_eps)


def run_killed(model: LevyModel, x: float, horizon: float, checkpoint_times,
               caps: Caps, seed: int, snapshot_eval=None) -> Trajectory:
    """Simulate the chain killed at the barrier e^-(x+ct).

    Children below the barrier at their creation time are removed; the
    run is extinct when no blocks remain, with zeta the emptying time.
    Hitting caps.max_blocks stops the run early with capped=True.
    snapshot_eval, when given, is called as f(t, log_masses) at each
    checkpoint and its dict lands in Checkpoint.extras.
    """
    return _run(model, x, horizon, checkpoint_times, caps, seed,
                killed=True, snapshot_eval=snapshot_eval)


def run_unkilled(model: LevyModel, horizon: float, floor_eps: float,
                 checkpoint_times, caps: Caps, seed: int,
                 snapshot_eval=None) -> Trajectory:
    """Simulate the chain without a barrier, dropping blocks below a floor.

    floor_eps = 0 disables the floor (only safe for short horizons).
    Dropped mass is accumulated in Trajectory.removed_mass so the floor's
    effect is checkable; the largest block is exact while it stays above
    the floor, because its whole ancestry does too.
    """
    if floor_eps < 0.0:
        raise DomainError(f"floor_eps must be >= 0, got {floor_eps}")
    return _run(model, 0.0, horizon, checkpoint_times, caps, seed,
                killed=False, floor_eps=floor_eps, snapshot_eval=snapshot_eval)


# ---------------------------------------------------------------------------
# Recording reference engine (pure Python): same keyed randomness, used for
# coupling/genealogy inspection and to cross-validate the compiled kernel.
# ---------------------------------------------------------------------------

def replay_blocks(model: LevyModel, x: float, horizon: float, seed: int,
                  max_blocks: int = 10_000, *, killed: bool = True,
                  floor_eps: float = 0.0) -> tuple[list[Block], list[Block]]:
    """Re-run a small chain, returning (alive, dead) Block lists.

    Exact mirror of the compiled kernel's sampling; intended for tests
    and debugging on small populations.
    """
    child_log_a, atom_start_a, atom_cum, rho = _measure_arrays(model.nu)
    child_log = child_log_a.tolist()
    atom_start = atom_start_a.tolist()
    log_floor = math.log(floor_eps) if floor_eps > 0.0 else -math.inf
    root = int(seed) & ((1 << 64) - 1)
    wait = -math.log(unit_from(mix64(root ^ KEY_WAIT))) / rho
    heap = [(wait, root, 0.0)]
    meta = {root: (None, 0.0)}  # key -> (parent, birth_time)
    dead: list[Block] = []
    while heap:
        t, key, lm = heap[0]
        if t > horizon or len(heap) > max_blocks:
            break
        heapq.heappop(heap)
        u = unit_from(mix64(key ^ KEY_ATOM))
        ai = int(np.searchsorted(atom_cum, u, side="right"))
        thresh = -(x + model.c * t) if killed else log_floor
        for j in range(atom_start[ai], atom_start[ai + 1]):
            clm = lm + child_log[j]
            ck = mix64(key ^ (j - atom_start[ai] + 2))
            if clm < thresh:
                dead.append(Block(id=ck, parent=key, log_mass=clm,
                                  birth_time=t, next_split=math.inf))
                continue
            cwait = -math.log(unit_from(mix64(ck ^ KEY_WAIT))) / rho
            meta[ck] = (key, t)
            heapq.heappush(heap, (t + cwait, ck, clm))
    alive = [
        Block(id=k, parent=meta[k][0], log_mass=lm, birth_time=meta[k][1],
              next_split=ts)
        for ts, k, lm in sorted(heap)
    ]
    return alive, dead
