"""Empirical stability diagnostics.

Long-run time averages, two-start coupling gaps, collapse onto the invariant
line in the degenerate regime, and the one-spike-per-population density that
underlies the local minorization bound.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
from shapely.geometry import Polygon, box
from shapely.geometry.polygon import orient

from .errors import NotDegenerate, PreconditionError, SingularC
from .lyapunov import LyapunovConfig, choose_pq, eval_V
from .model import ModelParams
from .simulator import RngContract, SystemState, Trajectory, simulate


@dataclass
class ErgodicReport:
    time_avg_V: float
    second_half_avg_V: float
    max_abs_state: float
    moment_estimates: list[dict[str, float]]
    window: tuple[float, float]
    n_events: int

    def to_dict(self):
        return asdict(self)


@dataclass
class ConvergenceReport:
    horizons: list[float]
    mean_gap: list[float]
    gap_se: list[float]
    mean_a: list[float]
    mean_b: list[float]
    fitted_rate: float

    def to_dict(self):
        return asdict(self)


@dataclass
class MinorizationReport:
    x_edges: np.ndarray
    y_edges: np.ndarray
    empirical_density: np.ndarray
    analytic_density: np.ndarray
    sup_rel_error_on_bulk: float
    bulk_bins: int
    empirical_mass: float
    analytic_mass: float
    support_ok: bool

    def to_dict(self):
        return {
            "x_edges": self.x_edges.tolist(),
            "y_edges": self.y_edges.tolist(),
            "empirical_density": self.empirical_density.tolist(),
            "analytic_density": self.analytic_density.tolist(),
            "sup_rel_error_on_bulk": self.sup_rel_error_on_bulk,
            "bulk_bins": self.bulk_bins,
            "empirical_mass": self.empirical_mass,
            "analytic_mass": self.analytic_mass,
            "support_ok": self.support_ok,
        }


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("HAWKES_EI_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# exact path integrals


def _decay_integral(k, L):
    """Integral of exp(-k s) over [0, L]."""
    return -np.expm1(-k * L) / k


def window_integrals(traj: Trajectory, config: LyapunovConfig, t0: float, t1: float) -> dict[str, float]:
    """Closed-form integrals of x, y, x^2, y^2, xy and V over ``[t0, t1]``.

    Along the flow neither coordinate changes sign, so V stays on one branch
    per segment and every integrand is a sum of decaying exponentials.
    """
    params = traj.params
    nup, num = params.nu_plus, params.nu_minus
    start, length, coords = traj.segments()
    s0 = np.maximum(start, t0)
    s1 = np.minimum(start + length, t1)
    keep = s1 > s0
    s0, s1 = s0[keep], s1[keep]
    lag = s0 - start[keep]
    x = coords[keep, 0] * np.exp(-nup * lag)
    y = coords[keep, 1] * np.exp(-num * lag)
    L = s1 - s0

    ix = x * _decay_integral(nup, L)
    iy = y * _decay_integral(num, L)
    ixx = x * x * _decay_integral(2 * nup, L)
    iyy = y * y * _decay_integral(2 * num, L)
    ixy = x * y * _decay_integral(nup + num, L)

    alpha = np.where(x >= 0, params.c_pm, config.p)
    beta = np.where(y >= 0, -params.c_mp, config.q)
    iv = alpha * ixx + beta * iyy - config.delta_star * ixy
    return {
        "x": float(ix.sum()),
        "y": float(iy.sum()),
        "xx": float(ixx.sum()),
        "yy": float(iyy.sum()),
        "xy": float(ixy.sum()),
        "V": float(iv.sum()),
        "T": float(t1 - t0),
    }


def ergodic_stats(
    params: ModelParams,
    config: LyapunovConfig | None,
    horizon: float,
    rng: RngContract,
    burn_in_fraction: float = 0.5,
    init: SystemState | None = None,
    max_events: int | None = None,
) -> ErgodicReport:
    """Time averages over ``[burn_in_fraction * horizon, horizon]``.

    ``second_half_avg_V`` averages V over the second half of that window, so
    comparing it with ``time_avg_V`` measures drift of the running average.
    """
    if not 0 <= burn_in_fraction < 1:
        raise ValueError("burn_in_fraction must lie in [0, 1)")
    if config is None:
        config = choose_pq(params)
    init = init or SystemState(0.0, 0.0, 0.0)
    kw = {} if max_events is None else {"max_events": max_events}
    traj = simulate(params, init, horizon, rng, **kw)
    t_end = init.t + horizon
    t0 = init.t + burn_in_fraction * horizon
    full = window_integrals(traj, config, t0, t_end)
    half = window_integrals(traj, config, (t0 + t_end) / 2, t_end)
    T = full["T"]
    mean_x, mean_y = full["x"] / T, full["y"] / T
    fin = traj.final
    max_abs = max(float(np.abs(traj.anchor_states).max()), abs(fin.x_plus), abs(fin.x_minus))
    return ErgodicReport(
        time_avg_V=full["V"] / T,
        second_half_avg_V=half["V"] / half["T"],
        max_abs_state=max_abs,
        moment_estimates=[
            {"name": "x_plus", "mean": mean_x, "var": full["xx"] / T - mean_x**2},
            {"name": "x_minus", "mean": mean_y, "var": full["yy"] / T - mean_y**2},
        ],
        window=(t0, t_end),
        n_events=len(traj.events),
    )


# ---------------------------------------------------------------------------
# two-start gaps


def indicator_box(x_lo: float, x_hi: float, y_lo: float, y_hi: float) -> Callable:
    def g(x, y):
        return ((x_lo <= x) & (x < x_hi) & (y_lo <= y) & (y < y_hi)).astype(float)

    g.__name__ = f"box[{x_lo},{x_hi})x[{y_lo},{y_hi})"
    return g


def _resolve_test_fn(test_fn, params, config):
    if callable(test_fn):
        return test_fn
    if test_fn == "x":
        return lambda x, y: x
    if test_fn == "y":
        return lambda x, y: y
    if test_fn == "V":
        cfg = config or choose_pq(params)
        return lambda x, y: eval_V(x, y, cfg, params)
    raise ValueError(f"unknown test function {test_fn!r}")


def _replicate_states(args):
    params, start, horizons, seed, streams = args
    out = np.empty((len(streams), len(horizons), 2))
    T = max(horizons)
    for r, stream in enumerate(streams):
        traj = simulate(params, SystemState(0.0, *start), T, RngContract(seed, stream), sample_times=horizons)
        out[r] = [(s.x_plus, s.x_minus) for s in traj.samples]
    return out


def _endpoint_states(params, start, horizons, seed, streams, workers):
    if workers <= 1:
        return _replicate_states((params, start, horizons, seed, streams))
    chunks = [c for c in np.array_split(np.asarray(streams), workers) if len(c)]
    jobs = [(params, start, horizons, seed, [int(s) for s in c]) for c in chunks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(_replicate_states, jobs))
    return np.concatenate(parts, axis=0)


def two_start_gap(
    params: ModelParams,
    start_a: tuple[float, float],
    start_b: tuple[float, float],
    test_fn,
    horizons: Sequence[float],
    replicates: int,
    rng: RngContract,
    config: LyapunovConfig | None = None,
    workers: int | None = None,
) -> ConvergenceReport:
    """Monte Carlo estimate of ``|E_a g(X_T) - E_b g(X_T)|`` for each horizon ``T``.

    Replicate ``r`` from ``start_a`` uses stream ``rng.stream_index + r`` and
    from ``start_b`` stream ``rng.stream_index + replicates + r``, so the two
    samples are independent. ``fitted_rate`` is the least-squares slope of
    ``log(gap)`` against ``T`` over horizons whose gap exceeds three combined
    standard errors (NaN when fewer than two qualify).
    """
    if replicates < 100:
        raise PreconditionError("two_start_gap needs at least 100 replicates")
    horizons = [float(h) for h in horizons]
    if not horizons or min(horizons) <= 0:
        raise PreconditionError("horizons must be positive")
    order = np.argsort(horizons)
    hs = [horizons[i] for i in order]
    g = _resolve_test_fn(test_fn, params, config)
    workers = default_workers() if workers is None else workers
    base = rng.stream_index
    sa = _endpoint_states(params, start_a, hs, rng.seed, list(range(base, base + replicates)), workers)
    sb = _endpoint_states(
        params, start_b, hs, rng.seed, list(range(base + replicates, base + 2 * replicates)), workers
    )
    ga = np.asarray(g(sa[..., 0], sa[..., 1]), dtype=float)
    gb = np.asarray(g(sb[..., 0], sb[..., 1]), dtype=float)
    ma, mb = ga.mean(axis=0), gb.mean(axis=0)
    se = np.sqrt(ga.var(axis=0, ddof=1) / replicates + gb.var(axis=0, ddof=1) / replicates)
    gap = np.abs(ma - mb)

    sig = gap > 3 * se
    if sig.sum() >= 2:
        slope = float(np.polyfit(np.asarray(hs)[sig], np.log(gap[sig]), 1)[0])
    else:
        slope = float("nan")
    return ConvergenceReport(
        horizons=hs,
        mean_gap=gap.tolist(),
        gap_se=se.tolist(),
        mean_a=ma.tolist(),
        mean_b=mb.tolist(),
        fitted_rate=slope,
    )


# ---------------------------------------------------------------------------
# degenerate line


def h_distance_series(
    params: ModelParams,
    init: SystemState,
    horizon: float,
    rng: RngContract,
    sample_dt: float | None = None,
) -> list[tuple[float, float]]:
    """Distance to ``H = span{(c_pp, c_pm)}`` along an exact trajectory.

    Only defined in the degenerate regime (equal leak rates, collinear jump
    vectors). Distances are reported on the sampling grid and right after
    every spike, merged in time order.
    """
    if params.nu_plus != params.nu_minus:
        raise NotDegenerate("leak rates differ")
    if params.c_pp * params.c_mm - params.c_mp * params.c_pm != 0.0:
        raise NotDegenerate("jump vectors are linearly independent")
    hx, hy = params.c_pp, params.c_pm
    if hx == 0 and hy == 0:
        hx, hy = params.c_mp, params.c_mm
    norm = math.hypot(hx, hy)

    def dist(x, y):
        if norm == 0:
            return math.hypot(x, y)
        return abs(hx * y - hy * x) / norm

    dt = horizon / 1000 if sample_dt is None else sample_dt
    traj = simulate(params, init, horizon, rng, sample_dt=dt)
    pts = [(s.t, dist(s.x_plus, s.x_minus)) for s in traj.samples]
    pts += [(float(t), dist(c[0], c[1])) for t, c in zip(traj.anchor_t[1:], traj.anchor_states[1:])]
    pts.sort()
    return pts


# ---------------------------------------------------------------------------
# minorization density


def _jump_matrix(params: ModelParams) -> np.ndarray:
    """Columns are the excitatory and inhibitory jump vectors."""
    jp, jm = params.jump_plus, params.jump_minus
    return np.array([[jp[0], jm[0]], [jp[1], jm[1]]])


def _check_minorization_domain(params: ModelParams):
    if params.nu_plus != params.nu_minus:
        raise PreconditionError("minorization construction needs nu_plus == nu_minus")
    if params.n_plus != 1 or params.n_minus != 1:
        raise PreconditionError("minorization construction needs n_plus == n_minus == 1")
    C = _jump_matrix(params)
    if np.linalg.det(C) == 0.0 or params.c_pp * params.c_mm - params.c_mp * params.c_pm == 0.0:
        raise SingularC("jump matrix is singular")
    return C


def sample_conditional_endpoint(params: ModelParams, z: SystemState, T: float, n: int, rng: RngContract):
    """Draw ``X(T)`` given exactly one spike per population on ``[0, T]``."""
    C = _check_minorization_domain(params)
    nu = params.nu_plus
    gen = rng.generator()
    u = gen.uniform(0.0, T, size=(n, 2))
    w = np.exp(-nu * u)
    shift = np.exp(-nu * T) * np.array([z.x_plus, z.x_minus])
    return shift + w @ C.T


def analytic_density(v, params: ModelParams, z: SystemState, T: float):
    """Density of the conditional endpoint at points ``v`` (shape ``(..., 2)``)."""
    C = _check_minorization_domain(params)
    nu = params.nu_plus
    lo = math.exp(-nu * T)
    shift = lo * np.array([z.x_plus, z.x_minus])
    u = (np.asarray(v, dtype=float) - shift) @ np.linalg.inv(C).T
    inside = np.all((u >= lo) & (u <= 1.0), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = 1.0 / (nu * nu * T * T * u[..., 0] * u[..., 1])
    return np.where(inside, f, 0.0) / abs(np.linalg.det(C))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _mass_in_u(poly: Polygon, nu: float, T: float) -> float:
    """Integral of 1/(nu^2 T^2 u1 u2) over a polygon in the positive quadrant.

    Green's theorem with F = log(u1) / u2, so that dF/du1 is the integrand;
    each edge integral is done by Gauss-Legendre.
    """
    if poly.is_empty or poly.area == 0.0:
        return 0.0
    pts = np.asarray(orient(poly, 1.0).exterior.coords)
    P, Q = pts[:-1], pts[1:]
    s = (_GL_NODES + 1) / 2
    wts = _GL_WEIGHTS / 2
    u = P[:, None, :] + s[None, :, None] * (Q - P)[:, None, :]
    F = np.log(u[..., 0]) / u[..., 1]
    total = np.sum((Q[:, 1] - P[:, 1]) * (F @ wts))
    return float(total) / (nu * nu * T * T)


def minorization_sample(
    params: ModelParams,
    z: SystemState,
    T: float,
    samples: int,
    rng: RngContract,
    bins: int = 10,
    bulk_fraction: float = 0.1,
) -> MinorizationReport:
    """Histogram the conditional endpoint on a ``bins x bins`` grid over its support.

    The analytic density of each bin is its exact probability mass divided by
    the bin area: the bin is pulled back through the jump matrix, clipped to
    the square ``[exp(-nu T), 1]^2`` of decayed spike weights and integrated.
    The sup relative error is taken over bins whose analytic density is at
    least ``bulk_fraction`` of the largest one.
    """
    C = _check_minorization_domain(params)
    nu = params.nu_plus
    lo = math.exp(-nu * T)
    shift = lo * np.array([z.x_plus, z.x_minus])
    corners = np.array([[a, b] for a in (lo, 1.0) for b in (lo, 1.0)]) @ C.T + shift
    (x0, y0), (x1, y1) = corners.min(axis=0), corners.max(axis=0)
    x_edges = np.linspace(x0, x1, bins + 1)
    y_edges = np.linspace(y0, y1, bins + 1)

    pts = sample_conditional_endpoint(params, z, T, samples, rng)
    u = (pts - shift) @ np.linalg.inv(C).T
    tol = 1e-12
    support_ok = bool(np.all((u >= lo - tol) & (u <= 1 + tol)))
    counts, _, _ = np.histogram2d(pts[:, 0], pts[:, 1], bins=[x_edges, y_edges])
    area = (x_edges[1] - x_edges[0]) * (y_edges[1] - y_edges[0])
    emp = counts / (samples * area)

    Cinv = np.linalg.inv(C)
    square = box(lo, lo, 1.0, 1.0)
    mass = np.zeros((bins, bins))
    for i in range(bins):
        for j in range(bins):
            rect = np.array(
                [
                    [x_edges[i], y_edges[j]],
                    [x_edges[i + 1], y_edges[j]],
                    [x_edges[i + 1], y_edges[j + 1]],
                    [x_edges[i], y_edges[j + 1]],
                ]
            )
            pre = Polygon((rect - shift) @ Cinv.T)
            mass[i, j] = _mass_in_u(pre.intersection(square), nu, T)
    ana = mass / area

    bulk = ana >= bulk_fraction * ana.max()
    rel = np.abs(emp[bulk] - ana[bulk]) / ana[bulk]
    return MinorizationReport(
        x_edges=x_edges,
        y_edges=y_edges,
        empirical_density=emp,
        analytic_density=ana,
        sup_rel_error_on_bulk=float(rel.max()),
        bulk_bins=int(bulk.sum()),
        empirical_mass=float(emp.sum() * area),
        analytic_mass=float(ana.sum() * area),
        support_ok=support_ok,
    )


def event_E_probability(params: ModelParams, T: float, M: float) -> float:
    """Probability that each population has exactly one baseline spike and no others.

    For every population the Poisson measure must put one point in
    ``[0, T] x [0, a]`` and none in the guard strip above it, of height
    ``c_pp + M`` for ``+`` and ``c_pm + M`` for ``-``.
    """
    if params.n_plus != 1 or params.n_minus != 1:
        raise PreconditionError("event E is defined for n_plus == n_minus == 1")
    ap, am = params.a_plus[0], params.a_minus[0]
    plus = ap * T * math.exp(-ap * T) * math.exp(-(params.c_pp + M) * T)
    minus = am * T * math.exp(-am * T) * math.exp(-(params.c_pm + M) * T)
    return plus * minus


def event_E_monte_carlo(params: ModelParams, T: float, M: float, trials: int, rng: RngContract):
    """Brute-force frequency of E from raw Poisson point clouds.

    Each trial samples the Poisson measure of both populations on
    ``[0, T] x [0, a + c + M]`` as a point cloud and counts points in the two
    regions. Returns ``(estimate, standard_error)``.
    """
    if params.n_plus != 1 or params.n_minus != 1:
        raise PreconditionError("event E is defined for n_plus == n_minus == 1")
    gen = rng.generator()
    ok = np.ones(trials, dtype=bool)
    for a, c in ((params.a_plus[0], params.c_pp), (params.a_minus[0], params.c_pm)):
        top = a + c + M
        n = gen.poisson(top * T, size=trials)
        owner = np.repeat(np.arange(trials), n)
        # time marks are uniform on [0, T] and every region spans all of it
        zz = gen.uniform(0.0, top, size=n.sum())
        in_base = np.bincount(owner, weights=zz <= a, minlength=trials)
        in_guard = np.bincount(owner, weights=(zz > a) & (zz < top), minlength=trials)
        ok &= (in_base == 1) & (in_guard == 0)
    p = ok.mean()
    return float(p), float(math.sqrt(p * (1 - p) / trials))
