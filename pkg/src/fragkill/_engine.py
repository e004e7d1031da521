"""Event-driven fragmentation-chain kernel (numba).

One pending split per block, kept in an array-backed binary heap ordered
by (time, block key).  Block randomness is keyed: a block's waiting time
and split outcome are pure functions of its 64-bit genealogical key, so
two runs sharing a seed but differing in the barrier offset produce
nested block populations, and results never depend on scheduling.
"""

from __future__ import annotations

import numpy as np
from numba import float64, int64, njit, uint64

KEY_WAIT = np.uint64(0xC0FFEE5EED0001)
KEY_ATOM = np.uint64(0xA77AD15C0002)


@njit(uint64(uint64), cache=True, inline="always")
def _mix64(z):
    z = z + uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
    return z ^ (z >> uint64(31))


@njit(float64(uint64), cache=True, inline="always")
def _unit(v):
    return (float64(v >> uint64(11)) + 0.5) * (2.0 ** -53)


@njit(cache=True, nogil=True)
def run_chain(root_key, c, x, moving_barrier, log_floor, horizon, cp_times,
              max_blocks, child_log, atom_start, atom_cum, rho, snap_cap):
    """Simulate one killed (moving barrier) or floored (fixed) chain.

    Returns checkpoint statistics, termination info, the dropped-mass
    accumulator, and (when snap_cap > 0) packed log-mass snapshots.
    """
    n_cp = cp_times.shape[0]
    cp_n = np.full(n_cp, -1, np.int64)
    cp_maxlm = np.full(n_cp, np.nan)
    cp_mass = np.zeros(n_cp)
    snap_data = np.empty(n_cp * snap_cap if snap_cap > 0 else 0)
    snap_len = np.zeros(n_cp, np.int64)

    cap = 1024
    ht = np.empty(cap)
    hk = np.empty(cap, np.uint64)
    hm = np.empty(cap)
    ht[0] = -np.log(_unit(_mix64(root_key ^ KEY_WAIT))) / rho
    hk[0] = root_key
    hm[0] = 0.0
    n = 1

    events = int64(0)
    removed_mass = 0.0
    extinct = False
    zeta = np.nan
    capped = False
    end_time = horizon
    cp_i = 0

    while n > 0:
        t_next = ht[0]
        # record checkpoints strictly before the next event
        while cp_i < n_cp and cp_times[cp_i] < t_next:
            if cp_times[cp_i] > horizon:
                break
            cp_n[cp_i] = n
            best = hm[0]
            tot = 0.0
            for i in range(n):
                if hm[i] > best:
                    best = hm[i]
                tot += np.exp(hm[i])
            cp_maxlm[cp_i] = best
            cp_mass[cp_i] = tot
            if snap_cap > 0:
                m = n if n < snap_cap else snap_cap
                base = cp_i * snap_cap
                for i in range(m):
                    snap_data[base + i] = hm[i]
                snap_len[cp_i] = n  # caller detects overflow via n > snap_cap
            cp_i += 1
        if t_next > horizon:
            break

        t = t_next
        key = hk[0]
        lm = hm[0]
        # heap pop
        n -= 1
        ht[0] = ht[n]
        hk[0] = hk[n]
        hm[0] = hm[n]
        i = 0
        while True:
            l = 2 * i + 1
            if l >= n:
                break
            m = l
            r = l + 1
            if r < n and (ht[r] < ht[l] or (ht[r] == ht[l] and hk[r] < hk[l])):
                m = r
            if ht[m] < ht[i] or (ht[m] == ht[i] and hk[m] < hk[i]):
                ht[i], ht[m] = ht[m], ht[i]
                hk[i], hk[m] = hk[m], hk[i]
                hm[i], hm[m] = hm[m], hm[i]
                i = m
            else:
                break
        events += 1

        ai = np.searchsorted(atom_cum, _unit(_mix64(key ^ KEY_ATOM)), side="right")
        if moving_barrier:
            thresh = -(x + c * t)
        else:
            thresh = log_floor
        for j in range(atom_start[ai], atom_start[ai + 1]):
            clm = lm + child_log[j]
            if clm < thresh:
                removed_mass += np.exp(clm)
                continue
            ck = _mix64(key ^ uint64(j - atom_start[ai] + 2))
            ct = t - np.log(_unit(_mix64(ck ^ KEY_WAIT))) / rho
            if n >= cap:
                cap *= 2
                ht2 = np.empty(cap)
                hk2 = np.empty(cap, np.uint64)
                hm2 = np.empty(cap)
                ht2[:n] = ht[:n]
                hk2[:n] = hk[:n]
                hm2[:n] = hm[:n]
                ht, hk, hm = ht2, hk2, hm2
            i = n
            ht[i] = ct
            hk[i] = ck
            hm[i] = clm
            n += 1
            while i > 0:
                pa = (i - 1) // 2
                if ht[i] < ht[pa] or (ht[i] == ht[pa] and hk[i] < hk[pa]):
                    ht[i], ht[pa] = ht[pa], ht[i]
                    hk[i], hk[pa] = hk[pa], hk[i]
                    hm[i], hm[pa] = hm[pa], hm[i]
                    i = pa
                else:
                    break

        if n == 0:
            extinct = True
            zeta = t
            end_time = t
            # later checkpoints see an empty population
            while cp_i < n_cp and cp_times[cp_i] <= horizon:
                cp_n[cp_i] = 0
                cp_mass[cp_i] = 0.0
                cp_i += 1
            break
        if n > max_blocks:
            capped = True
            end_time = t
            break

    return (cp_n, cp_maxlm, cp_mass, extinct, zeta, capped, end_time,
            events, removed_mass, snap_data, snap_len)
