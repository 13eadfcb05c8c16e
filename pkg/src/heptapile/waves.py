"""Wave decomposition of sandpile relaxations.

Adding one grain to the maximal stable state triggers an avalanche that splits
into waves: if site p holds 6 grains and some neighbor v also holds 6, force a
topple at p, then at v, and relax.  Within one wave every vertex topples at
most once, so a wave is a front sweeping the ball; successive fronts shrink.
Iterating waves at p until p is no longer at 6 next to a 6 (plus one last
forced topple when p alone is left at 6) reproduces the direct relaxation of
``max_stable + one grain at p`` exactly, state and odometer both.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple

import numpy as np

from .ball import DEGREE, Ball
from .errors import InvariantError
from .sandpile import Odometer, State, is_stable, max_stable, relax


class WaveResult(NamedTuple):
    state: State
    odometer: Odometer
    wave_count: int
    fronts: list


_FULL = DEGREE - 1  # a site must sit at 6 for a wave to start


def _wave_candidates(state: State, site: int) -> list:
    if state.grains[site] != _FULL:
        return []
    return [v for v in state.ball.adj[site] if state.grains[v] == _FULL]


def _forced_wave(state: State, site: int, via: int) -> tuple:
    """Force topples at site then via, relax, and return (state, front ids)."""
    g = state.grains.copy()
    ball = state.ball
    g[site] -= DEGREE
    for u in ball.adj[site]:
        g[u] += 1
    g[via] -= DEGREE
    for u in ball.adj[via]:
        g[u] += 1
    res = relax(State(ball, g))
    counts = res.odometer.counts
    if counts.max(initial=0) > 1 or counts[site] or counts[via]:
        raise InvariantError("a vertex toppled twice within one wave")
    front = np.flatnonzero(counts)
    front = np.unique(np.concatenate((front, [site, via])))
    return res.state, front


def wave(state: State, site: int, *, check_choice: bool = False) -> State:
    """Apply one wave at ``site``; a state with no wave to run returns unchanged.

    The wave needs 6 grains at the site and at some stored neighbor; the
    lowest-id such neighbor seeds the sweep.  ``check_choice`` re-runs the
    wave through the highest-id candidate and verifies the result does not
    depend on that choice.
    """
    if not 0 <= site < state.ball.n:
        raise ValueError(f"site {site} out of range")
    if state.grains.min() < 0 or not is_stable(state):
        raise ValueError("waves are defined on stable nonnegative states")
    candidates = _wave_candidates(state, site)
    if not candidates:
        return state.copy()
    out, front = _forced_wave(state, site, candidates[0])
    if check_choice and len(candidates) > 1:
        alt, alt_front = _forced_wave(state, site, candidates[-1])
        if not (np.array_equal(out.grains, alt.grains)
                and np.array_equal(front, alt_front)):
            raise InvariantError("wave result depends on the seed neighbor")
    return out


def wave_relax(ball: Ball, site: int) -> WaveResult:
    """Relax ``max_stable + one grain at site`` by iterated waves.

    Returns the final state, the odometer (each front adds one topple to its
    members), the number of waves, and the fronts themselves.  The trailing
    forced topple, needed when the site still holds 6 with no 6-neighbor,
    counts as a final one-vertex wave.
    """
    if not 0 <= site < ball.n:
        raise ValueError(f"site {site} out of range")
    state = max_stable(ball)
    counts = np.zeros(ball.n, dtype=np.int64)
    fronts = []
    for _ in range(ball.radius + 2):
        candidates = _wave_candidates(state, site)
        if not candidates:
            break
        state, front = _forced_wave(state, site, candidates[0])
        counts[front] += 1
        fronts.append(front)
    else:
        raise InvariantError("wave iteration failed to terminate")
    g = state.grains.copy()
    g[site] += 1
    if g[site] >= DEGREE:
        g[site] -= DEGREE
        for u in ball.adj[site]:
            g[u] += 1
        counts[site] += 1
        fronts.append(np.array([site], dtype=np.int64))
    final = State(ball, g)
    if not is_stable(final):
        raise InvariantError("wave relaxation ended on an unstable state")
    return WaveResult(final, Odometer(ball, counts), len(fronts), fronts)


def wave_relax_multi(ball: Ball, sites: Iterable[int]) -> WaveResult:
    """Wave route for a multi-site perturbation of the maximal stable state.

    Runs the wave relaxation at the lowest-id site of minimal level, then
    drops the remaining grains onto the result; that sum is already stable,
    and the odometer is unchanged by the extra grains.
    """
    sites = sorted(set(int(p) for p in sites))
    if not sites:
        raise ValueError("perturbation set must be nonempty")
    if sites[0] < 0 or sites[-1] >= ball.n:
        raise ValueError("perturbation site outside ball")
    anchor = min(sites, key=lambda p: (int(ball.level[p]), p))
    result = wave_relax(ball, anchor)
    g = result.state.grains.copy()
    for p in sites:
        if p != anchor:
            g[p] += 1
    final = State(ball, g)
    if not is_stable(final):
        raise InvariantError("wave route produced an unstable multi-site state")
    return WaveResult(final, result.odometer, result.wave_count, result.fronts)
