"""Seeded Monte Carlo engines for the probabilistic walk statements.

Four experiments: hitting times of the root on truncated tree balls,
exponential-clock escape on the product graph, the exit-potential identity
on the weighted flattened graph, and the lamp-difference coupling on the
wreath product.  Every engine is deterministic given (parameters, seed);
trajectories are advanced in vectorized batches with an active-set loop.

The exponential clock is discretized as a geometric clock firing each step
with probability 1/(1+r^2); its mean (1-q)/q equals r^2 exactly and the
memorylessness used by the arguments is preserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DepthError, ValidationError
from .growth import BranchingProfile
from .group import generator_letters
from .network import PotentialField
from .tree import ProductVertex, TreeVertex, tree_index

__all__ = [
    "WalkStats",
    "ProbabilityEstimate",
    "ExitPotentialStats",
    "CouplingEstimate",
    "simulate_hitting",
    "simulate_clock",
    "simulate_exit_potential",
    "simulate_coupling",
    "clock_fire_probability",
    "tree_distance",
    "product_distance",
]

_STEP_CAP = 4_000_000_000  # runaway guard on total steps per engine call


def clock_fire_probability(r: int) -> float:
    """Per-step firing probability of the discrete clock with mean r^2."""
    return 1.0 / (1.0 + r * r)


def tree_distance(profile: BranchingProfile, t1: TreeVertex, t2: TreeVertex) -> int:
    """Graph distance in T via the deepest common ancestor."""
    lca = 0
    for k in range(min(t1.level, t2.level), -1, -1):
        if _ancestor(profile, t1, k) == _ancestor(profile, t2, k):
            lca = k
            break
    return (t1.level - lca) + (t2.level - lca)


def _ancestor(profile: BranchingProfile, v: TreeVertex, k: int) -> TreeVertex:
    keep = sum(1 for b in profile.branch_levels if b < k)
    return TreeVertex(k, v.bits[:keep])


def product_distance(profile: BranchingProfile, p: ProductVertex, q: ProductVertex) -> int:
    return tree_distance(profile, p.t, q.t) + abs(p.z - q.z)


@dataclass(frozen=True)
class WalkStats:
    """Summary of a batch of trajectories."""

    trials: int
    mean: float
    stderr: float
    quantiles: tuple[float, float, float]  # 0.5, 0.9, 0.99
    seed: int
    params: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class ProbabilityEstimate:
    estimate: float
    stderr: float
    trials: int
    seed: int
    params: dict = field(default_factory=dict, compare=False)


# ---------------------------------------------------------------------------
# hitting times on tree balls


def simulate_hitting(profile: BranchingProfile, r: int, trials: int,
                     seed: int) -> WalkStats:
    """SRW on the induced tree ball B(o, r), started uniformly on the sphere.

    Boundary vertices keep only their pruned degree; the statistic is the
    hitting time of the root.
    """
    if trials < 100:
        raise ValidationError("need at least 100 trials")
    if not 1 <= r <= profile.max_level:
        raise DepthError(f"radius {r} outside [1, {profile.max_level}]")
    rng = np.random.default_rng(seed)
    index = tree_index(profile, r)
    nbrs, deg = index.tree_neighbor_table()
    lo, hi = int(index.offsets[r]), int(index.offsets[r + 1])
    state = rng.integers(lo, hi, size=trials)
    times = np.zeros(trials, dtype=np.int64)
    active = np.arange(trials)
    t, budget = 0, _STEP_CAP
    while active.size:
        t += 1
        budget -= active.size
        if budget < 0:
            raise ValidationError("hitting simulation exceeded step budget (r too large?)")
        s = state[active]
        j = (rng.random(active.size) * deg[s]).astype(np.int64)
        s = nbrs[s, j]
        state[active] = s
        hit = s == 0
        times[active[hit]] = t
        active = active[~hit]
    q = np.quantile(times, [0.5, 0.9, 0.99])
    return WalkStats(
        trials=trials, mean=float(times.mean()),
        stderr=float(times.std(ddof=1) / math.sqrt(trials)),
        quantiles=(float(q[0]), float(q[1]), float(q[2])), seed=seed,
        params={"r": r, "experiment": "hitting"},
    )


# ---------------------------------------------------------------------------
# clock escape on the product graph


def simulate_clock(profile: BranchingProfile, start: ProductVertex,
                   target: ProductVertex, r: int, trials: int, seed: int,
                   depth_margin: int = 50) -> ProbabilityEstimate:
    """Estimate P(hitting time of target > geometric clock with mean r^2).

    The walk is SRW on the product graph; at each step the position is
    checked against the target first, then the clock fires with probability
    1/(1+r^2) (so a tie counts as a hit).
    """
    if trials < 100:
        raise ValidationError("need at least 100 trials")
    if r < 2:
        raise ValidationError("r must be >= 2")
    if r <= product_distance(profile, start, target):
        raise ValidationError("r must exceed the start-target distance")
    depth = min(profile.max_level, max(start.t.level, target.t.level) + depth_margin * r)
    if depth < start.t.level + 8:
        raise DepthError("profile too shallow for the requested clock experiment")
    rng = np.random.default_rng(seed)
    index = tree_index(profile, depth)
    nbrs, deg = index.tree_neighbor_table()
    q = clock_fire_probability(r)

    t_idx = np.full(trials, index.index_of(start.t), dtype=np.int64)
    z = np.full(trials, start.z, dtype=np.int64)
    tgt_idx, tgt_z = index.index_of(target.t), target.z
    clock_first = np.zeros(trials, dtype=bool)
    active = np.arange(trials)
    budget = _STEP_CAP
    while active.size:
        # arrival check wins ties with the clock
        hit = (t_idx[active] == tgt_idx) & (z[active] == tgt_z)
        active = active[~hit]
        if not active.size:
            break
        fire = rng.random(active.size) < q
        clock_first[active[fire]] = True
        active = active[~fire]
        if not active.size:
            break
        budget -= active.size
        if budget < 0:
            raise ValidationError("clock simulation exceeded step budget")
        s = t_idx[active]
        total = deg[s] + 2
        j = (rng.random(active.size) * total).astype(np.int64)
        tree_move = j < deg[s]
        moved = s.copy()
        moved[tree_move] = nbrs[s[tree_move], j[tree_move]]
        if np.any(index.levels[moved] >= depth):
            raise DepthError("walk reached the materialized depth; enlarge the profile")
        dz = np.where(tree_move, 0, np.where(j == deg[s], 1, -1))
        t_idx[active] = moved
        z[active] += dz
    p = float(clock_first.mean())
    return ProbabilityEstimate(
        estimate=p, stderr=float(math.sqrt(max(p * (1 - p), 1e-12) / trials)),
        trials=trials, seed=seed,
        params={"r": r, "start": str(start), "target": str(target),
                "experiment": "clock"},
    )


# ---------------------------------------------------------------------------
# exit-potential identity on the weighted flattened graph


@dataclass(frozen=True)
class ExitPotentialStats:
    """Conditional mean of the potential at first exit, among escape trials."""

    mean_exit_value: float
    stderr: float
    exits: int
    returns: int
    trials: int
    min_exit_value: float
    max_exit_value: float
    seed: int
    params: dict = field(default_factory=dict, compare=False)


def simulate_exit_potential(field_: PotentialField, profile: BranchingProfile,
                            s: int, trials: int, seed: int) -> ExitPotentialStats:
    """Weighted walk on F from the origin until it returns or exits B(o, s).

    Among walks exiting before returning, records the potential at the exit
    vertex; the conditional mean equals Res(s) exactly in expectation (the
    optional-stopping identity for the fused-sphere potential).
    """
    if trials < 100:
        raise ValidationError("need at least 100 trials")
    if field_.normalization != "a0" or field_.mode != "ball":
        raise ValidationError("exit experiment needs an a(o)=0 ball-mode field")
    if not 1 <= s <= field_.radius // 2:
        raise ValidationError(f"s={s} must satisfy 1 <= s <= field.radius/2")
    if field_.profile_digest != profile.digest():
        raise ValidationError("field was solved on a different profile")
    rng = np.random.default_rng(seed)

    ell = profile.ell_array[: s + 2].astype(np.float64)
    # cumulative transition thresholds per level: [to n-1, to n+1, z+1, z-1]
    c0 = np.where(np.arange(s + 1) >= 1, ell[: s + 1], 0.0)
    c1 = c0 + ell[1 : s + 2]
    c2 = c1 + ell[: s + 1]
    total = c2 + ell[: s + 1]

    n = np.zeros(trials, dtype=np.int64)
    z = np.zeros(trials, dtype=np.int64)
    exit_vals = np.full(trials, np.nan)
    returned = np.zeros(trials, dtype=bool)
    active = np.arange(trials)
    budget = _STEP_CAP
    while active.size:
        budget -= active.size
        if budget < 0:
            raise ValidationError("exit simulation exceeded step budget")
        na, za = n[active], z[active]
        u = rng.random(active.size) * total[na]
        move_up = u < c0[na]
        move_down = ~move_up & (u < c1[na])
        move_zp = ~move_up & ~move_down & (u < c2[na])
        na = na + np.where(move_up, -1, np.where(move_down, 1, 0))
        za = za + np.where(move_zp, 1, np.where(~move_up & ~move_down & ~move_zp, -1, 0))
        n[active], z[active] = na, za
        dist = na + np.abs(za)
        exited = dist >= s
        back = (na == 0) & (za == 0) & ~exited
        exit_vals[active[exited]] = field_.values[na[exited], np.abs(za[exited])]
        returned[active[back]] = True
        active = active[~exited & ~back]
    vals = exit_vals[~np.isnan(exit_vals)]
    if vals.size == 0:
        raise ValidationError("no trial exited before returning; increase trials")
    return ExitPotentialStats(
        mean_exit_value=float(vals.mean()),
        stderr=float(vals.std(ddof=1) / math.sqrt(vals.size)),
        exits=int(vals.size), returns=int(returned.sum()), trials=trials,
        min_exit_value=float(vals.min()), max_exit_value=float(vals.max()),
        seed=seed, params={"s": s, "experiment": "exit"},
    )


# ---------------------------------------------------------------------------
# lamp-difference coupling


@dataclass(frozen=True)
class CouplingEstimate:
    """P(clock before coupling) plus the failed o-attempt histogram."""

    estimate: float
    stderr: float
    trials: int
    attempts_survival: tuple[float, ...]  # fraction of runs with >= k failed attempts
    seed: int
    params: dict = field(default_factory=dict, compare=False)


def simulate_coupling(profile: BranchingProfile, v: ProductVertex, r: int,
                      trials: int, seed: int, depth_margin: int = 50,
                      max_attempt_bins: int = 40) -> CouplingEstimate:
    """The lazy-walk coupling of two wreath elements differing by a lamp at v.

    Both walks share every draw except at times when the lamp difference is
    carried onto the origin; there the switch of one walk is paired with the
    lazy step of the other, so the coupling succeeds with probability
    2 * (1/2)/g per visit (g = number of switch-or-move generators beyond
    laziness).  The estimate is the probability that an independent
    geometric clock with mean r^2 fires before the coupling succeeds.
    """
    if trials < 100:
        raise ValidationError("need at least 100 trials")
    if r < 2:
        raise ValidationError("r must be >= 2")
    letters = generator_letters(profile)
    g = len(letters) + 3  # switch + letters + two shifts
    depth = min(profile.max_level, v.t.level + depth_margin * r)
    if depth < v.t.level + 8:
        raise DepthError("profile too shallow for the requested coupling experiment")
    rng = np.random.default_rng(seed)
    index = tree_index(profile, depth)
    perms = np.stack([index.perm[c] for c in letters])
    q = clock_fire_probability(r)
    slot = 0.5 / g  # probability of each non-lazy generator

    t_idx = np.full(trials, index.index_of(v.t), dtype=np.int64)
    z = np.full(trials, v.z, dtype=np.int64)
    clock_first = np.zeros(trials, dtype=bool)
    attempts = np.zeros(trials, dtype=np.int64)
    active = np.arange(trials)
    budget = _STEP_CAP
    while active.size:
        fire = rng.random(active.size) < q
        clock_first[active[fire]] = True
        active = active[~fire]
        if not active.size:
            break
        budget -= active.size
        if budget < 0:
            raise ValidationError("coupling simulation exceeded step budget")
        at_o = (t_idx[active] == 0) & (z[active] == 0)
        u = rng.random(active.size)
        # [0, 1/2): generators in slots [switch, letters..., +1, -1]; [1/2, 1): lazy
        coupled = at_o & ((u < slot) | ((u >= 0.5) & (u < 0.5 + slot)))
        attempts[active[at_o & ~coupled]] += 1
        keep = ~coupled
        act = active[keep]
        uk = u[keep]
        for i, _c in enumerate(letters):
            m = (uk >= slot * (1 + i)) & (uk < slot * (2 + i))
            if np.any(m):
                t_idx[act[m]] = perms[i][t_idx[act[m]]]
        zp = (uk >= slot * (1 + len(letters))) & (uk < slot * (2 + len(letters)))
        zm = (uk >= slot * (2 + len(letters))) & (uk < 0.5)
        z[act[zp]] += 1
        z[act[zm]] -= 1
        if np.any(index.levels[t_idx[act]] >= depth):
            raise DepthError("coupling walk reached the materialized depth")
        active = act
    p = float(clock_first.mean())
    ks = np.arange(max_attempt_bins)
    survival = tuple(float(np.mean(attempts >= k)) for k in ks)
    return CouplingEstimate(
        estimate=p, stderr=float(math.sqrt(max(p * (1 - p), 1e-12) / trials)),
        trials=trials, attempts_survival=survival, seed=seed,
        params={"r": r, "v": str(v), "experiment": "coupling"},
    )
