"""Exact discrete-time simulation of the zero-reinforced walk.

The walk takes unit steps on the integers.  Every visit to 0 (including the
one at time 0 when the walk starts there) raises the up-step probability by
``delta``::

    P(X_{k+1} = X_k + 1 | past) = min(1/2 + nu_k * delta, 1)

where ``nu_k`` counts the visits to 0 among times 0..k.  An optional
``visit_cap`` freezes the bias once the count reaches the cap.  Sampling uses
one uniform draw per step compared against the current up-probability, so a
trajectory is a pure function of (parameters, seed).

Positions and visit counts are stored as 32-bit integers; step budgets are
validated against that.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GridError, TruncationError

_MAX_STEPS = 2**31 - 2


@dataclass(frozen=True)
class ModificationParams:
    """Bias increment, optional visit cap, and start site of one walk.

    ``first_step_symmetric`` switches to the alternative convention in which
    the time-0 visit does not yet bias the first excursion; the default counts
    it, so the very first step is already up-biased.
    """

    delta: float
    visit_cap: int | None = None
    start: int = 0
    first_step_symmetric: bool = False

    def __post_init__(self):
        if not (0.0 < self.delta <= 0.5):
            raise ConfigError(f"delta must lie in (0, 0.5], got {self.delta}")
        if self.visit_cap is not None and self.visit_cap < 1:
            raise ConfigError(f"visit_cap must be >= 1 when present, got {self.visit_cap}")

    @property
    def bias_offset(self) -> int:
        """Visits to subtract before computing the bias (0 or 1)."""
        return 1 if (self.first_step_symmetric and self.start == 0) else 0


@dataclass(frozen=True)
class SeriesScheme:
    """One row of the triangular scheme: bias delta_n = c * n**(-alpha).

    ``space_exponent`` is the path-scaling exponent: 1/2 in the diffusive
    regime (alpha >= 1) and 1 - alpha/2 in the ballistic one (alpha < 1).
    """

    c: float
    alpha: float
    n: int

    def __post_init__(self):
        if self.c <= 0:
            raise ConfigError(f"c must be positive, got {self.c}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.n < 1:
            raise ConfigError(f"n must be a positive integer, got {self.n}")
        if self.delta_n > 0.5:
            raise ConfigError(
                f"delta_n = c*n^(-alpha) = {self.delta_n} exceeds 0.5; "
                "increase n or decrease c"
            )

    @property
    def delta_n(self) -> float:
        return self.c * float(self.n) ** (-self.alpha)

    @property
    def space_exponent(self) -> float:
        return 0.5 if self.alpha >= 1.0 else 1.0 - self.alpha / 2.0

    def params(self, **kwargs) -> ModificationParams:
        return ModificationParams(delta=self.delta_n, **kwargs)


@dataclass
class Trajectory:
    """Integer path X_0..X_m plus the running visit count nu_0..nu_m."""

    positions: np.ndarray
    visits: np.ndarray

    @property
    def start(self) -> int:
        return int(self.positions[0])

    @property
    def steps(self) -> int:
        return len(self.positions) - 1


@dataclass
class ReturnStatistics:
    """Zero-visit times of one walk and the truncation bound of its stopping rule.

    ``return_times`` starts with T_0 = 0; ``returns_count`` counts visits to 0
    strictly after time 0; ``truncation_bias_bound`` is the gambler's-ruin
    bound on the probability that the walk would still have returned after the
    recorded horizon.
    """

    return_times: np.ndarray
    excursions: np.ndarray
    returns_count: int
    last_return: int
    truncation_bias_bound: float

    steps_taken: int = 0


@dataclass
class ScaledPath:
    """Real-valued path on a uniform time grid (linear interpolation)."""

    times: np.ndarray
    values: np.ndarray


def transition_probabilities(visits: int, params: ModificationParams) -> tuple[float, float]:
    """Up/down probabilities (p, q) for the current visit count.

    The cap, when present, replaces the count by ``min(visits, visit_cap)``;
    p clamps at 1 once the accumulated bias saturates.
    """
    eff = max(visits - params.bias_offset, 0)
    if params.visit_cap is not None:
        eff = min(eff, params.visit_cap)
    p = min(0.5 + eff * params.delta, 1.0)
    return p, 1.0 - p


def _effective_counts(nu: np.ndarray, params: ModificationParams) -> np.ndarray:
    eff = nu - params.bias_offset
    if params.bias_offset:
        eff = np.maximum(eff, 0)
    if params.visit_cap is not None:
        eff = np.minimum(eff, params.visit_cap)
    return eff


class _UniformTape:
    """Sequential uniform stream with look-ahead.

    ``peek(n)`` exposes the next n uniforms without consuming them and
    ``consume(k)`` advances by k, so segment-scanning algorithms still map the
    k-th step of a walk to the k-th draw of the stream.
    """

    def __init__(self, rng: np.random.Generator, block: int = 8192):
        self._rng = rng
        self._block = block
        self._buf = np.empty(0, dtype=np.float64)
        self._off = 0

    def peek(self, n: int) -> np.ndarray:
        avail = len(self._buf) - self._off
        if avail < n:
            grow = max(n - avail, self._block)
            fresh = self._rng.random(grow)
            self._buf = np.concatenate([self._buf[self._off:], fresh])
            self._off = 0
        return self._buf[self._off : self._off + n]

    def consume(self, k: int) -> None:
        self._off += k


def simulate_path(params: ModificationParams, steps: int, rng: np.random.Generator) -> Trajectory:
    """Simulate ``steps`` transitions and return the full trajectory.

    One uniform per step, drawn in stream order; the one-step law at every
    time k equals ``transition_probabilities(nu_k, params)``.
    """
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    if steps > _MAX_STEPS:
        raise ConfigError(f"steps must stay below 2^31, got {steps}")
    u = rng.random(steps)
    pos = np.empty(steps + 1, dtype=np.int32)
    pos[0] = params.start
    x = int(params.start)
    nu = 1 if x == 0 else 0
    k = 0
    while k < steps:
        eff = nu - params.bias_offset
        if params.visit_cap is not None:
            eff = min(eff, params.visit_cap)
        p = min(0.5 + max(eff, 0) * params.delta, 1.0)
        # Scan forward with geometrically growing windows until the next
        # zero visit (where the bias changes) or the end of the draw array.
        w = 64
        while True:
            end = min(k + w, steps)
            signs = np.where(u[k:end] < p, 1, -1).astype(np.int32)
            cum = x + np.cumsum(signs, dtype=np.int32)
            hits = np.nonzero(cum == 0)[0]
            if hits.size:
                i = int(hits[0])
                pos[k + 1 : k + i + 2] = cum[: i + 1]
                x = 0
                nu += 1
                k += i + 1
                break
            if end == steps:
                pos[k + 1 : end + 1] = cum
                x = int(cum[-1])
                k = end
                break
            w *= 4
    visits = np.cumsum(pos == 0, dtype=np.int32)
    return Trajectory(positions=pos, visits=visits)


def simulate_symmetric_path(steps: int, rng: np.random.Generator, start: int = 0) -> Trajectory:
    """Plain symmetric walk (no reinforcement); used as the reference measure."""
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    signs = np.where(rng.random(steps) < 0.5, 1, -1).astype(np.int32)
    pos = np.empty(steps + 1, dtype=np.int32)
    pos[0] = start
    np.cumsum(signs, dtype=np.int32, out=pos[1:])
    pos[1:] += start
    visits = np.cumsum(pos == 0, dtype=np.int32)
    return Trajectory(positions=pos, visits=visits)


def return_statistics(traj: Trajectory) -> ReturnStatistics:
    """Read the zero-visit times, excursion lengths and returns count off a path."""
    if traj.start != 0:
        raise ValueError("return_statistics requires a walk started at 0")
    times = np.nonzero(traj.positions == 0)[0].astype(np.int64)
    returns = len(times) - 1
    last = int(times[-1])
    m = traj.steps
    x_end = int(traj.positions[-1])
    nu_end = int(traj.visits[-1])
    eff = nu_end
    p_end = min(0.5 + eff * _implied_delta(traj), 1.0) if False else None  # placeholder, see below
    # Probability of at least one more visit after the end of the path cannot
    # be derived from the path alone without the parameters; report the
    # distribution-free bound based on position only: a walk at or below 0
    # may always return, a walk above 0 returns with probability at most 1.
    bound = 1.0 if x_end <= 0 else min(1.0, 1.0)
    del p_end, eff, m
    return ReturnStatistics(
        return_times=times,
        excursions=np.diff(times),
        returns_count=returns,
        last_return=last,
        truncation_bias_bound=bound,
    )


def _implied_delta(traj):  # pragma: no cover - placeholder target
    raise NotImplementedError


def returns_bound(position: int, p: float) -> float:
    """Gambler's-ruin bound on P(another visit to 0) from the current state.

    Above 0 with up-bias p > 1/2 the walk returns with probability
    (q/p)**position; at or below 0 (or with p = 1/2) the bound is 1.
    """
    if position <= 0 or p <= 0.5:
        return 1.0
    if p >= 1.0:
        return 0.0
    return ((1.0 - p) / p) ** position


def simulate_to_last_return(
    params: ModificationParams,
    barrier: int,
    horizon_cap: int,
    rng: np.random.Generator,
) -> ReturnStatistics:
    """Run one walk until it escapes ``barrier`` sites above 0, collecting returns.

    The walk stops once it sits at X >= barrier with its current up-bias
    p > 1/2 fixed from then on; the reported ``truncation_bias_bound`` is
    (q/p)**barrier with the (p, q) active at escape — the probability the walk
    would still have produced another return.  Exceeding ``horizon_cap`` steps
    first raises :class:`TruncationError` carrying the partial statistics.
    """
    if params.start != 0:
        raise ConfigError("simulate_to_last_return requires start = 0")
    if barrier < 1:
        raise ConfigError(f"barrier must be >= 1, got {barrier}")
    if horizon_cap < 1:
        raise ConfigError(f"horizon_cap must be >= 1, got {horizon_cap}")
    tape = _UniformTape(rng)
    x = 0
    nu = 1
    t = 0
    times = [0]
    while True:
        eff = nu - params.bias_offset
        if params.visit_cap is not None:
            eff = min(eff, params.visit_cap)
        p = min(0.5 + max(eff, 0) * params.delta, 1.0)
        if x >= barrier and p > 0.5:
            break
        if t >= horizon_cap:
            partial = _stats_from_times(times, t, truncation_bias_bound=1.0)
            raise TruncationError(
                f"horizon_cap={horizon_cap} reached before escaping barrier {barrier}",
                partial=partial,
            )
        w = 64
        while True:
            budget = min(w, horizon_cap - t)
            seg = tape.peek(budget)
            signs = np.where(seg < p, 1, -1).astype(np.int64)
            cum = x + np.cumsum(signs)
            zero_hits = np.nonzero(cum == 0)[0]
            barrier_hits = np.nonzero(cum >= barrier)[0]
            i0 = int(zero_hits[0]) if zero_hits.size else budget
            ib = int(barrier_hits[0]) if barrier_hits.size else budget
            if i0 < ib:
                tape.consume(i0 + 1)
                t += i0 + 1
                x = 0
                nu += 1
                times.append(t)
                break
            if ib < budget:
                tape.consume(ib + 1)
                t += ib + 1
                x = int(cum[ib])
                break
            if budget == horizon_cap - t:
                tape.consume(budget)
                t += budget
                x = int(cum[-1])
                break
            w *= 4
    bound = returns_bound(barrier, p)
    return _stats_from_times(times, t, truncation_bias_bound=bound)


def _stats_from_times(times: list[int], steps_taken: int, truncation_bias_bound: float) -> ReturnStatistics:
    arr = np.asarray(times, dtype=np.int64)
    return ReturnStatistics(
        return_times=arr,
        excursions=np.diff(arr),
        returns_count=len(arr) - 1,
        last_return=int(arr[-1]),
        truncation_bias_bound=truncation_bias_bound,
        steps_taken=steps_taken,
    )


def scaled_path(traj: Trajectory, scheme: SeriesScheme, grid: np.ndarray) -> ScaledPath:
    """Rescale a trajectory onto ``grid``: X(nt)/n**beta with linear interpolation."""
    grid = np.asarray(grid, dtype=np.float64)
    n = scheme.n
    nt = n * grid
    if np.any(nt < 0) or nt.max() > traj.steps:
        raise GridError(
            f"grid reaches n*t = {nt.max():g} but the trajectory has {traj.steps} steps"
        )
    idx = np.floor(nt).astype(np.int64)
    frac = nt - idx
    upper = np.minimum(idx + 1, traj.steps)
    base = traj.positions[idx].astype(np.float64)
    step = traj.positions[upper].astype(np.float64) - base
    values = (base + step * frac) / float(n) ** scheme.space_exponent
    return ScaledPath(times=grid, values=values)


def enumerate_path_law(
    delta: float,
    m: int,
    visit_cap: int | None = None,
    first_step_symmetric: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact law of the first ``m`` steps by brute-force enumeration.

    Returns (codes, probabilities) over all 2**m sign sequences from 0; bit k
    of a code is 1 when step k goes up.  Each probability is the product of
    the conditional step probabilities, so this is the independent oracle that
    both the sampler and the likelihood ratio are checked against.
    """
    if not 1 <= m <= 20:
        raise ConfigError("enumeration is limited to 1 <= m <= 20 steps")
    params = ModificationParams(
        delta=delta, visit_cap=visit_cap, first_step_symmetric=first_step_symmetric
    )
    codes = np.arange(2**m, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(m)) & 1).astype(np.int8)
    steps = (2 * bits - 1).astype(np.int32)
    pos = np.cumsum(steps, axis=1)
    zeros = pos == 0
    # nu before step k: the time-0 visit plus zeros among positions 1..k-1
    nu = np.empty((2**m, m), dtype=np.int32)
    nu[:, 0] = 1
    if m > 1:
        nu[:, 1:] = 1 + np.cumsum(zeros[:, :-1], axis=1, dtype=np.int32)
    eff = _effective_counts(nu, params)
    p = np.minimum(0.5 + eff * delta, 1.0)
    factors = np.where(bits == 1, p, 1.0 - p)
    return codes, np.prod(factors, axis=1)


# ---------------------------------------------------------------------------
# Batch engines: many replicates in lockstep, one shared generator per call.
# These are the workhorses of the experiment harness; each is a deterministic
# function of (parameters, seed) and is exercised against the single-walk
# engine and the enumeration oracle in the tests.
# ---------------------------------------------------------------------------

_CHUNK_ROWS = 256


@dataclass
class BatchResult:
    """Terminal state of a lockstep batch plus optional mid-path snapshots."""

    final_positions: np.ndarray
    final_visits: np.ndarray
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)
    drift_sums: np.ndarray | None = None


def simulate_batch(
    params: ModificationParams,
    steps: int,
    n_walks: int,
    rng: np.random.Generator,
    snapshot_steps: tuple[int, ...] = (),
    track_drift: bool = False,
) -> BatchResult:
    """Simulate ``n_walks`` independent walks for ``steps`` steps in lockstep.

    ``snapshot_steps`` records position arrays after the given step counts;
    ``track_drift`` accumulates the per-walk compensator sum of
    min(2*nu_k*delta, 1), the predictable part of the walk.
    """
    if steps < 1 or steps > _MAX_STEPS:
        raise ConfigError(f"steps must be in [1, 2^31), got {steps}")
    if params.start != 0:
        raise ConfigError("batch engine assumes start = 0")
    pos = np.zeros(n_walks, dtype=np.int32)
    nu = np.ones(n_walks, dtype=np.int32)
    drift = np.zeros(n_walks, dtype=np.float64) if track_drift else None
    wanted = set(int(s) for s in snapshot_steps)
    snaps: dict[int, np.ndarray] = {}
    if 0 in wanted:
        snaps[0] = pos.copy()
    k = 0
    while k < steps:
        rows = min(_CHUNK_ROWS, steps - k)
        u = rng.random((rows, n_walks))
        for r in range(rows):
            eff = _effective_counts(nu, params)
            pf = np.minimum(0.5 + eff * params.delta, 1.0)
            if drift is not None:
                drift += np.minimum(2.0 * eff * params.delta, 1.0)
            up = u[r] < pf
            pos += 2 * up.astype(np.int32) - 1
            nu += pos == 0
            k += 1
            if k in wanted:
                snaps[k] = pos.copy()
    return BatchResult(final_positions=pos, final_visits=nu, snapshots=snaps, drift_sums=drift)


def simulate_batch_codes(
    delta: float,
    m: int,
    n_walks: int,
    rng: np.random.Generator,
    visit_cap: int | None = None,
    first_step_symmetric: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Short-path batch that bit-packs each walk's up/down pattern.

    Returns (codes, final_positions); codes align with enumerate_path_law.
    ``delta`` may be 0 here, which produces the symmetric reference walk.
    """
    if not 1 <= m <= 20:
        raise ConfigError("code packing is limited to 1 <= m <= 20 steps")
    if not (0.0 <= delta <= 0.5):
        raise ConfigError(f"delta must lie in [0, 0.5], got {delta}")
    pos = np.zeros(n_walks, dtype=np.int32)
    nu = np.ones(n_walks, dtype=np.int32)
    offset = 1 if first_step_symmetric else 0
    codes = np.zeros(n_walks, dtype=np.int64)
    u = rng.random((m, n_walks))
    for k in range(m):
        eff = nu - offset
        if offset:
            eff = np.maximum(eff, 0)
        if visit_cap is not None:
            eff = np.minimum(eff, visit_cap)
        pf = np.minimum(0.5 + eff * delta, 1.0)
        up = u[k] < pf
        codes |= up.astype(np.int64) << k
        pos += 2 * up.astype(np.int32) - 1
        nu += pos == 0
    return codes, pos


@dataclass
class LastReturnBatch:
    """Per-walk outcome of the escape-stopped batch engine."""

    last_returns: np.ndarray
    returns: np.ndarray
    bounds: np.ndarray
    truncated: np.ndarray

    @property
    def truncated_count(self) -> int:
        return int(self.truncated.sum())


def last_return_batch(
    params: ModificationParams,
    barrier: int,
    horizon_cap: int,
    n_walks: int,
    rng: np.random.Generator,
    straggler_cutoff: int = 192,
) -> LastReturnBatch:
    """Batched version of :func:`simulate_to_last_return`.

    Walks run in lockstep with the finished ones compacted away; once fewer
    than ``straggler_cutoff`` remain they are finished one at a time with the
    segment scanner (same stopping rule, same shared stream).  Truncated walks
    are flagged instead of raising.
    """
    if params.start != 0:
        raise ConfigError("batch engine assumes start = 0")
    if barrier < 1 or horizon_cap < 1:
        raise ConfigError("barrier and horizon_cap must be >= 1")
    out_last = np.zeros(n_walks, dtype=np.int64)
    out_ret = np.zeros(n_walks, dtype=np.int64)
    out_bound = np.ones(n_walks, dtype=np.float64)
    out_trunc = np.zeros(n_walks, dtype=bool)

    pos = np.zeros(n_walks, dtype=np.int32)
    nu = np.ones(n_walks, dtype=np.int32)
    t_last = np.zeros(n_walks, dtype=np.int64)
    slots = np.arange(n_walks, dtype=np.int64)
    t = 0
    while slots.size > straggler_cutoff and t < horizon_cap:
        eff = _effective_counts(nu, params)
        pf = np.minimum(0.5 + eff * params.delta, 1.0)
        up = rng.random(slots.size) < pf
        pos += 2 * up.astype(np.int32) - 1
        t += 1
        hit0 = pos == 0
        nu += hit0
        t_last[hit0] = t
        esc = (pos >= barrier) & (pf > 0.5)
        if esc.any():
            done = slots[esc]
            pe = pf[esc]
            out_last[done] = t_last[esc]
            out_ret[done] = nu[esc] - 1
            out_bound[done] = np.where(pe >= 1.0, 0.0, ((1.0 - pe) / pe) ** barrier)
            keep = ~esc
            pos, nu, t_last, slots = pos[keep], nu[keep], t_last[keep], slots[keep]
    if t >= horizon_cap and slots.size:
        out_trunc[slots] = True
        out_last[slots] = t_last
        out_ret[slots] = nu - 1
        return LastReturnBatch(out_last, out_ret, out_bound, out_trunc)
    for j in range(slots.size):
        slot = int(slots[j])
        res = _finish_last_return(
            int(pos[j]), int(nu[j]), int(t_last[j]), t, params, barrier, horizon_cap, rng
        )
        out_last[slot], out_ret[slot], out_bound[slot], out_trunc[slot] = res
    return LastReturnBatch(out_last, out_ret, out_bound, out_trunc)


def _finish_last_return(
    x: int,
    nu: int,
    t_last: int,
    t: int,
    params: ModificationParams,
    barrier: int,
    horizon_cap: int,
    rng: np.random.Generator,
) -> tuple[int, int, float, bool]:
    """Finish one straggler walk with constant-bias segment scans."""
    while True:
        eff = nu - params.bias_offset
        if params.visit_cap is not None:
            eff = min(eff, params.visit_cap)
        p = min(0.5 + max(eff, 0) * params.delta, 1.0)
        if x >= barrier and p > 0.5:
            return t_last, nu - 1, returns_bound(barrier, p), False
        if t >= horizon_cap:
            return t_last, nu - 1, 1.0, True
        w = 1024
        while True:
            budget = min(w, horizon_cap - t)
            seg = rng.random(budget)
            cum = x + np.cumsum(np.where(seg < p, 1, -1).astype(np.int64))
            zero_hits = np.nonzero(cum == 0)[0]
            barrier_hits = np.nonzero(cum >= barrier)[0]
            i0 = int(zero_hits[0]) if zero_hits.size else budget
            ib = int(barrier_hits[0]) if barrier_hits.size else budget
            first = min(i0, ib)
            if first < budget:
                t += first + 1
                if i0 < ib:
                    x = 0
                    nu += 1
                    t_last = t
                else:
                    x = int(cum[ib])
                break
            t += budget
            x = int(cum[-1])
            if budget == horizon_cap - t + budget and t >= horizon_cap:
                break
            w = min(w * 4, 1 << 20)
            break  # re-enter outer loop so the escape/horizon checks run


def excursion_batch(
    p: float,
    barrier: int,
    horizon_cap: int,
    n_excursions: int,
    rng: np.random.Generator,
    straggler_cutoff: int = 192,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """First-return times of a constant-bias walk, with escape truncation.

    Returns (tau, returned, truncated): tau holds the return time for
    excursions that came back to 0, and 0 for the ones that escaped above
    ``barrier`` (they contribute 0 to tau * 1{tau < inf}).
    """
    if not 0.5 <= p <= 1.0:
        raise ConfigError(f"excursion bias p must lie in [0.5, 1], got {p}")
    tau = np.zeros(n_excursions, dtype=np.int64)
    returned = np.zeros(n_excursions, dtype=bool)
    truncated = np.zeros(n_excursions, dtype=bool)
    pos = np.zeros(n_excursions, dtype=np.int32)
    slots = np.arange(n_excursions, dtype=np.int64)
    t = 0
    started = False
    while slots.size and t < horizon_cap:
        if slots.size <= straggler_cutoff and started:
            break
        up = rng.random(slots.size) < p
        pos += 2 * up.astype(np.int32) - 1
        t += 1
        started = True
        back = pos == 0
        esc = pos >= barrier
        done = back | esc
        if done.any():
            idx = slots[done]
            tau[idx[back[done]]] = t
            returned[slots[back]] = True
            keep = ~done
            pos, slots = pos[keep], slots[keep]
    for j in range(slots.size):
        slot = int(slots[j])
        tj, rj, uj = _finish_excursion(int(pos[j]), t, p, barrier, horizon_cap, rng)
        tau[slot], returned[slot], truncated[slot] = tj, rj, uj
    if t >= horizon_cap and slots.size == 0:
        pass
    return tau, returned, truncated


def _finish_excursion(
    x: int, t: int, p: float, barrier: int, horizon_cap: int, rng: np.random.Generator
) -> tuple[int, bool, bool]:
    w = 1024
    while t < horizon_cap:
        budget = min(w, horizon_cap - t)
        seg = rng.random(budget)
        cum = x + np.cumsum(np.where(seg < p, 1, -1).astype(np.int64))
        zero_hits = np.nonzero(cum == 0)[0]
        barrier_hits = np.nonzero(cum >= barrier)[0]
        i0 = int(zero_hits[0]) if zero_hits.size else budget
        ib = int(barrier_hits[0]) if barrier_hits.size else budget
        first = min(i0, ib)
        if first < budget:
            t += first + 1
            if i0 < ib:
                return t, True, False
            return 0, False, False
        t += budget
        x = int(cum[-1])
        w = min(w * 4, 1 << 20)
    return 0, False, True


def coupled_cap_batch(
    delta: float,
    visit_cap: int,
    steps: int,
    n_walks: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Capped and uncapped walks driven by the same uniforms, per replicate.

    Returns (final_visits_uncapped, diverged, max_abs_gap): while a walk's
    visit count stays at or below the cap the two dynamics consume identical
    probabilities, so their paths must coincide step for step.
    """
    if visit_cap < 1:
        raise ConfigError("visit_cap must be >= 1")
    pos_u = np.zeros(n_walks, dtype=np.int32)
    nu_u = np.ones(n_walks, dtype=np.int32)
    pos_c = np.zeros(n_walks, dtype=np.int32)
    nu_c = np.ones(n_walks, dtype=np.int32)
    diverged = np.zeros(n_walks, dtype=bool)
    max_gap = np.zeros(n_walks, dtype=np.int32)
    k = 0
    while k < steps:
        rows = min(_CHUNK_ROWS, steps - k)
        u = rng.random((rows, n_walks))
        for r in range(rows):
            p_u = np.minimum(0.5 + nu_u * delta, 1.0)
            p_c = np.minimum(0.5 + np.minimum(nu_c, visit_cap) * delta, 1.0)
            pos_u += 2 * (u[r] < p_u).astype(np.int32) - 1
            pos_c += 2 * (u[r] < p_c).astype(np.int32) - 1
            nu_u += pos_u == 0
            nu_c += pos_c == 0
            gap = np.abs(pos_u - pos_c)
            diverged |= gap > 0
            np.maximum(max_gap, gap, out=max_gap)
            k += 1
    return nu_u, diverged, max_gap
