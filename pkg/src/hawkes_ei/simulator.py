"""Exact thinning simulation of the piecewise deterministic process (X+, X-).

Between spikes both potentials relax exponentially towards zero, so every
unit intensity ``a + max(x, 0)`` is non-increasing along the flow. The total
intensity at the last candidate therefore dominates the intensity until the
next candidate, which makes Ogata-style thinning exact with a dominating rate
that is refreshed after every candidate.

Each candidate consumes three uniforms in a fixed order: waiting time,
acceptance, unit selection. The 2D process and the four-coordinate lifted
process share the same core loop, so with the same :class:`RngContract` they
are driven by identical draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ExplosionGuard, HorizonNonPositive
from .model import ModelParams

DEFAULT_MAX_EVENTS = 10**8
_BLOCK = 3 * 2048


@dataclass(frozen=True)
class SystemState:
    t: float
    x_plus: float
    x_minus: float


@dataclass(frozen=True)
class LiftedState:
    """Potentials split by source population.

    ``x_pp``/``x_mp`` are the contributions of the ``+``/``-`` population to
    ``x_plus`` (both decay at ``nu_plus``); ``x_pm``/``x_mm`` are their
    contributions to ``x_minus`` (decay at ``nu_minus``).
    """

    t: float
    x_pp: float
    x_mp: float
    x_pm: float
    x_mm: float

    def project(self) -> SystemState:
        return SystemState(self.t, self.x_pp + self.x_mp, self.x_pm + self.x_mm)


@dataclass(frozen=True)
class EventRecord:
    t: float
    pop: str  # "+" or "-"
    unit: int


@dataclass(frozen=True)
class RngContract:
    seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass
class Trajectory:
    """Output of :func:`simulate` / :func:`simulate_lifted`.

    ``anchor_t`` and ``anchor_states`` hold the initial state followed by the
    post-jump state at every accepted event; the path between anchors is the
    exact exponential flow.
    """

    params: ModelParams
    horizon: float
    events: list[EventRecord]
    samples: list
    anchor_t: np.ndarray
    anchor_states: np.ndarray  # shape (n_events + 1, n_coords)
    final: object
    n_candidates: int
    max_acceptance_ratio: float

    def segments(self):
        """``(start, length, start_coords)`` for every inter-event piece up to the horizon."""
        ends = np.append(self.anchor_t[1:], self.final.t)
        return self.anchor_t, ends - self.anchor_t, self.anchor_states


class _Draws:
    """Block-buffered uniform stream; consumption order is the only contract."""

    def __init__(self, rng: np.random.Generator):
        self._rng = rng
        self._buf = rng.random(_BLOCK).tolist()
        self._i = 0

    def take3(self):
        if self._i + 3 > len(self._buf):
            self._buf = self._rng.random(_BLOCK).tolist()
            self._i = 0
        i = self._i
        self._i = i + 3
        b = self._buf
        return b[i], b[i + 1], b[i + 2]


def flow(state: SystemState, dt: float, params: ModelParams) -> SystemState:
    """Deterministic relaxation between jumps."""
    xp, xm = _decay((state.x_plus, state.x_minus), (params.nu_plus, params.nu_minus), dt)
    return SystemState(state.t + dt, xp, xm)


def _decay(coords, rates, dt):
    return [c * math.exp(-r * dt) for c, r in zip(coords, rates)]


def intensities(state: SystemState, params: ModelParams):
    """Per-unit rates ``(plus_rates, minus_rates)`` and their total."""
    px = max(state.x_plus, 0.0)
    py = max(state.x_minus, 0.0)
    plus = [a + px for a in params.a_plus]
    minus = [a + py for a in params.a_minus]
    return (plus, minus), sum(plus) + sum(minus)


def apply_jump(state: SystemState, pop: str, params: ModelParams) -> SystemState:
    dx, dy = params.jump_plus if pop == "+" else params.jump_minus
    return SystemState(state.t, state.x_plus + dx, state.x_minus + dy)


class _UnitPicker:
    """Selects the spiking unit of a population given the shared positive part."""

    def __init__(self, baselines: Sequence[float]):
        self.n = len(baselines)
        self.homogeneous = len(set(baselines)) == 1
        self.a = baselines[0]
        self.cum_a = np.cumsum(baselines)
        self.sum_a = float(self.cum_a[-1])

    def total(self, pos: float) -> float:
        return self.sum_a + self.n * pos

    def pick(self, target: float, pos: float) -> int:
        if self.n == 1:
            return 0
        if self.homogeneous:
            return min(int(target / (self.a + pos)), self.n - 1)
        cum = self.cum_a + pos * np.arange(1, self.n + 1)
        return min(int(np.searchsorted(cum, target, side="right")), self.n - 1)


def _thinning(
    params: ModelParams,
    t0: float,
    coords0: Sequence[float],
    rates: Sequence[float],
    plus_idx: Sequence[int],
    minus_idx: Sequence[int],
    jump_p: Sequence[float],
    jump_m: Sequence[float],
    horizon: float,
    rng: RngContract,
    sample_times: Sequence[float],
    max_events: int,
):
    if not horizon > 0:
        raise HorizonNonPositive(f"horizon must be > 0, got {horizon!r}")

    draws = _Draws(rng.generator())
    picker_p = _UnitPicker(params.a_plus)
    picker_m = _UnitPicker(params.a_minus)
    t_end = t0 + horizon

    anchor_t = t0
    anchor = [float(c) for c in coords0]
    anchors_t = [anchor_t]
    anchors = [list(anchor)]
    events: list[EventRecord] = []
    samples: list[tuple[float, list]] = []
    si, ns = 0, len(sample_times)

    def pot(c):
        return sum(c[i] for i in plus_idx), sum(c[i] for i in minus_idx)

    xp, xm = pot(anchor)
    lam_bar = picker_p.total(max(xp, 0.0)) + picker_m.total(max(xm, 0.0))
    t = t0
    n_cand = 0
    max_ratio = 0.0

    while True:
        u_wait, u_acc, u_sel = draws.take3()
        t_cand = t - math.log1p(-u_wait) / lam_bar
        stop = t_cand >= t_end
        t_lim = t_end if stop else t_cand
        while si < ns and sample_times[si] < t_lim:
            s = sample_times[si]
            samples.append((s, _decay(anchor, rates, s - anchor_t)))
            si += 1
        if stop:
            break
        n_cand += 1
        t = t_cand
        cur = _decay(anchor, rates, t - anchor_t)
        xp, xm = pot(cur)
        pp, pm = max(xp, 0.0), max(xm, 0.0)
        tot_p = picker_p.total(pp)
        total = tot_p + picker_m.total(pm)
        ratio = total / lam_bar
        if ratio > max_ratio:
            max_ratio = ratio
        if u_acc * lam_bar < total:
            target = u_sel * total
            if target < tot_p:
                pop, unit, jump = "+", picker_p.pick(target, pp), jump_p
            else:
                pop, unit, jump = "-", picker_m.pick(target - tot_p, pm), jump_m
            cur = [c + d for c, d in zip(cur, jump)]
            events.append(EventRecord(t, pop, unit))
            if len(events) > max_events:
                raise ExplosionGuard(max_events, t)
            anchor_t, anchor = t, cur
            anchors_t.append(t)
            anchors.append(cur)
            xp, xm = pot(cur)
            if not (math.isfinite(xp) and math.isfinite(xm)):
                raise ExplosionGuard(len(events), t)
            total = picker_p.total(max(xp, 0.0)) + picker_m.total(max(xm, 0.0))
        lam_bar = total

    while si < ns and sample_times[si] <= t_end:
        s = sample_times[si]
        samples.append((s, _decay(anchor, rates, s - anchor_t)))
        si += 1
    final = (t_end, _decay(anchor, rates, t_end - anchor_t))
    return dict(
        events=events,
        samples=samples,
        anchor_t=np.array(anchors_t),
        anchor_states=np.array(anchors, dtype=float).reshape(len(anchors), len(anchor)),
        final=final,
        n_candidates=n_cand,
        max_acceptance_ratio=max_ratio,
    )


def _sample_grid(horizon, sample_dt, sample_times, t0=0.0):
    if sample_times is not None:
        return sorted(float(s) for s in sample_times)
    if sample_dt is None:
        return []
    if not sample_dt > 0:
        raise ValueError("sample_dt must be > 0")
    n = int(math.floor(horizon / sample_dt + 1e-9))
    return [t0 + k * sample_dt for k in range(n + 1)]


def simulate(
    params: ModelParams,
    init: SystemState,
    horizon: float,
    rng: RngContract,
    sample_dt: float | None = None,
    *,
    sample_times: Sequence[float] | None = None,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> Trajectory:
    """Simulate ``(X+, X-)`` exactly on ``[init.t, init.t + horizon]``.

    States are recorded on the grid ``init.t + k * sample_dt`` if
    ``sample_dt`` is given, or at explicit absolute ``sample_times``.
    Raises :class:`ExplosionGuard` once more than ``max_events`` spikes occur.
    """
    grid = _sample_grid(horizon, sample_dt, sample_times, init.t)
    out = _thinning(
        params,
        init.t,
        (init.x_plus, init.x_minus),
        (params.nu_plus, params.nu_minus),
        (0,),
        (1,),
        params.jump_plus,
        params.jump_minus,
        horizon,
        rng,
        grid,
        max_events,
    )
    t_end, fin = out.pop("final")
    return Trajectory(
        params=params,
        horizon=horizon,
        samples=[SystemState(s, c[0], c[1]) for s, c in out.pop("samples")],
        final=SystemState(t_end, fin[0], fin[1]),
        **out,
    )


def simulate_lifted(
    params: ModelParams,
    init: LiftedState,
    horizon: float,
    rng: RngContract,
    sample_dt: float | None = None,
    *,
    sample_times: Sequence[float] | None = None,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> Trajectory:
    """Simulate the four-coordinate lift ``(x_pp, x_mp, x_pm, x_mm)``.

    Intensities depend only on the projections ``x_pp + x_mp`` and
    ``x_pm + x_mm``; with the same ``rng`` the projected path coincides with
    :func:`simulate` started from the projected initial state.
    """
    grid = _sample_grid(horizon, sample_dt, sample_times, init.t)
    jp, jm = params.jump_plus, params.jump_minus
    out = _thinning(
        params,
        init.t,
        (init.x_pp, init.x_mp, init.x_pm, init.x_mm),
        (params.nu_plus, params.nu_plus, params.nu_minus, params.nu_minus),
        (0, 1),
        (2, 3),
        (jp[0], 0.0, jp[1], 0.0),
        (0.0, jm[0], 0.0, jm[1]),
        horizon,
        rng,
        grid,
        max_events,
    )
    t_end, fin = out.pop("final")
    return Trajectory(
        params=params,
        horizon=horizon,
        samples=[LiftedState(s, *c) for s, c in out.pop("samples")],
        final=LiftedState(t_end, *fin),
        **out,
    )
