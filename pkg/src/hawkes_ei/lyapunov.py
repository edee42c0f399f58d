"""Piecewise-quadratic Lyapunov function and Foster-Lyapunov drift checks.

On each quadrant the function is ``alpha * x**2 + beta * y**2 - delta * x * y``
with ``delta = c*_pp - c*_mm`` and

=========  ========  ==========
quadrant   alpha     beta
=========  ========  ==========
``++``     c_pm      -c_mp
``+-``     c_pm      q
``-+``     p         -c_mp
``--``     p         q
=========  ========  ==========

The cross term is shared by all quadrants and the pure terms agree on the
axes, so the function is continuously differentiable.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import AssumptionViolated, DriftFailed, SingularFit
from .model import ModelParams, check_assumption_one, effective_weights

QUADRANTS = ("++", "+-", "-+", "--")


@dataclass(frozen=True)
class LyapunovConfig:
    p: float
    q: float
    c_star_pp: float
    c_star_mm: float
    delta_star: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class QuadrantCoeffs:
    quadrant: str
    a: float  # x**2
    b: float  # x*y
    d: float  # y**2

    def as_tuple(self):
        return (self.a, self.b, self.d)


@dataclass
class DriftReport:
    kappa: float
    c: float
    K: float
    violations: list[tuple[float, float]] = field(default_factory=list)
    n_exterior: int = 0
    max_exterior_excess: float = float("-inf")

    def to_dict(self):
        return asdict(self)


def _require_assumption_one(params: ModelParams):
    rep = check_assumption_one(params)
    if not rep.assumption1:
        failed = [n for n, ok in (("cond1", rep.cond1), ("cond2", rep.cond2), ("cond3", rep.cond3)) if not ok]
        raise AssumptionViolated(f"balance conditions fail ({', '.join(failed)})")


def config_conditions(params: ModelParams, config: LyapunovConfig) -> tuple[float, float, float]:
    """Margins of the three constraints on ``(p, q)``; all must be positive."""
    d = config.delta_star
    p_margin = -d * (params.c_mm - params.nu_plus - params.nu_minus) + 2 * config.p * params.c_mp
    q_margin = d * (params.nu_plus + params.nu_minus - params.c_pp) + 2 * config.q * params.c_pm
    pq_margin = 4 * config.p * config.q - d * d
    return p_margin, q_margin, pq_margin


def _select_pq(params: ModelParams) -> LyapunovConfig:
    w = effective_weights(params)
    delta = w.c_star_pp - w.c_star_mm
    if params.c_mp < 0:
        p_max = -delta * (params.c_mm - params.nu_plus - params.nu_minus) / (-2.0 * params.c_mp)
        p = p_max / 2.0
    else:
        p = 1.0
    if params.c_pm > 0:
        q_min = max(0.0, -delta * (params.nu_plus + params.nu_minus - params.c_pp) / (2.0 * params.c_pm))
    else:
        q_min = 0.0
    q = 2.0 * max(q_min, delta * delta / (4.0 * p))
    cfg = LyapunovConfig(p=p, q=q, c_star_pp=w.c_star_pp, c_star_mm=w.c_star_mm, delta_star=delta)
    if min(config_conditions(params, cfg)) <= 0 or not (p > 0 and q > 0):
        raise RuntimeError(f"internal error: p/q selection produced an invalid config {cfg}")
    return cfg


def choose_pq(params: ModelParams) -> LyapunovConfig:
    """Deterministic choice of ``p`` (half its upper bound) and ``q`` (twice its lower bound)."""
    _require_assumption_one(params)
    return _select_pq(params)


def branch_coeffs(quadrant: str, config: LyapunovConfig, params: ModelParams):
    """``(alpha, beta, gamma)`` with ``V = alpha x^2 + beta y^2 + gamma x y`` on ``quadrant``."""
    alpha = params.c_pm if quadrant[0] == "+" else config.p
    beta = -params.c_mp if quadrant[1] == "+" else config.q
    return alpha, beta, -config.delta_star


def eval_V(x, y, config: LyapunovConfig, params: ModelParams):
    """Evaluate V; accepts scalars or arrays. Zero coordinates use the ``+`` branch."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    alpha = np.where(x >= 0, params.c_pm, config.p)
    beta = np.where(y >= 0, -params.c_mp, config.q)
    v = alpha * x * x + beta * y * y - config.delta_star * x * y
    return v if v.ndim else float(v)


def grad_V(x, y, config: LyapunovConfig, params: ModelParams):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    alpha = np.where(x >= 0, params.c_pm, config.p)
    beta = np.where(y >= 0, -params.c_mp, config.q)
    gx = 2 * alpha * x - config.delta_star * y
    gy = 2 * beta * y - config.delta_star * x
    if gx.ndim:
        return gx, gy
    return float(gx), float(gy)


class Lyapunov:
    """Callable wrapper bundling V with its analytic gradient."""

    def __init__(self, config: LyapunovConfig, params: ModelParams):
        self.config = config
        self.params = params

    def __call__(self, x, y):
        return eval_V(x, y, self.config, self.params)

    def gradient(self, x, y):
        return grad_V(x, y, self.config, self.params)


def _fd_gradient(g, x, y):
    h = 1e-6 * np.maximum(1.0, np.maximum(np.abs(x), np.abs(y)))
    gx = (g(x + h, y) - g(x - h, y)) / (2 * h)
    gy = (g(x, y + h) - g(x, y - h)) / (2 * h)
    return gx, gy


def generator_apply(
    g: Callable,
    x,
    y,
    params: ModelParams,
    grad: Callable | None = None,
):
    """Apply the process generator to ``g`` at ``(x, y)``.

    The gradient comes from ``grad``, else from ``g.gradient`` when present,
    else from central differences. Vectorised over array inputs when ``g`` is.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if grad is None:
        grad = getattr(g, "gradient", None)
    gx, gy = grad(x, y) if grad is not None else _fd_gradient(g, x, y)
    base = g(x, y)
    rate_p = sum(params.a_plus) + params.n_plus * np.maximum(x, 0.0)
    rate_m = sum(params.a_minus) + params.n_minus * np.maximum(y, 0.0)
    dxp, dyp = params.jump_plus
    dxm, dym = params.jump_minus
    out = (
        -params.nu_plus * x * gx
        - params.nu_minus * y * gy
        + rate_p * (g(x + dxp, y + dyp) - base)
        + rate_m * (g(x + dxm, y + dym) - base)
    )
    return out if np.ndim(out) else float(out)


def quadrant_drift_coeffs(quadrant: str, params: ModelParams, config: LyapunovConfig) -> QuadrantCoeffs:
    """Quadratic part of ``A V`` away from the axes, in closed form."""
    _require_assumption_one(params)
    s = config.c_star_pp + config.c_star_mm
    d = config.delta_star
    nu_sum = params.nu_plus + params.nu_minus
    p, q = config.p, config.q
    if quadrant == "++":
        a, b, dd = params.c_pm * s, -d * s, -params.c_mp * s
    elif quadrant == "+-":
        a, b, dd = params.c_pm * s, d * (nu_sum - params.c_pp) + 2 * q * params.c_pm, -2 * params.nu_minus * q
    elif quadrant == "-+":
        a, b, dd = -2 * params.nu_plus * p, d * (nu_sum - params.c_mm) + 2 * p * params.c_mp, -params.c_mp * s
    elif quadrant == "--":
        a, b, dd = -2 * params.nu_plus * p, d * nu_sum, -2 * params.nu_minus * q
    else:
        raise ValueError(f"unknown quadrant {quadrant!r}")
    return QuadrantCoeffs(quadrant, a, b, dd)


def interior_scale(params: ModelParams) -> float:
    return 10.0 * (params.max_jump + 1.0)


def fit_numeric_coeffs(
    quadrant: str,
    params: ModelParams,
    config: LyapunovConfig,
    *,
    return_full: bool = False,
):
    """Least-squares quadratic fit of ``A V`` sampled deep inside ``quadrant``.

    Sample points sit at least ``10 * (max jump + 1)`` from both axes, so no
    single jump changes the branch of V. With ``return_full`` the linear and
    constant parts ``(e, f, g0)`` are returned alongside.
    """
    _require_assumption_one(params)
    if quadrant not in QUADRANTS:
        raise ValueError(f"unknown quadrant {quadrant!r}")
    S = interior_scale(params)
    sx = 1.0 if quadrant[0] == "+" else -1.0
    sy = 1.0 if quadrant[1] == "+" else -1.0
    u, v = np.meshgrid([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    x = sx * S * u.ravel()
    y = sy * S * v.ravel()
    vals = generator_apply(Lyapunov(config, params), x, y, params)
    design = np.column_stack([x * x, x * y, y * y, x, y, np.ones_like(x)])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise SingularFit("degenerate sample layout")
    coef, *_ = np.linalg.lstsq(design, vals, rcond=None)
    fit = QuadrantCoeffs(quadrant, float(coef[0]), float(coef[1]), float(coef[2]))
    if return_full:
        return fit, tuple(float(c) for c in coef[3:])
    return fit


def _grid(extent: float, step: float):
    n = int(np.floor(extent / step + 1e-9))
    ax = step * np.arange(-n, n + 1)
    X, Y = np.meshgrid(ax, ax)
    X, Y = X.ravel(), Y.ravel()
    keep = np.abs(X) + np.abs(Y) <= extent * (1 + 1e-12)
    return X[keep], Y[keep]


def verify_drift(
    params: ModelParams,
    config: LyapunovConfig,
    grid_extent: float = 50.0,
    grid_step: float = 0.25,
    K_candidate: float | None = None,
    kappa_candidate: float | None = None,
) -> DriftReport:
    """Check ``A V <= -kappa V + c 1{|z|_1 <= K}`` on a square lattice.

    Without ``K_candidate`` the smallest lattice threshold is used: ``K`` is
    the largest ``|z|_1`` of any violating point, and the check fails unless
    ``K < grid_extent``.
    ``kappa_candidate`` defaults to half of ``|c*_pp + c*_mm|``.
    """
    _require_assumption_one(params)
    kappa = (
        abs(config.c_star_pp + config.c_star_mm) / 2.0 if kappa_candidate is None else float(kappa_candidate)
    )
    X, Y = _grid(grid_extent, grid_step)
    excess = generator_apply(Lyapunov(config, params), X, Y, params) + kappa * eval_V(X, Y, config, params)
    norm1 = np.abs(X) + np.abs(Y)

    def report(K):
        ext = norm1 > K
        bad = ext & (excess > 0)
        inner = excess[~ext]
        return DriftReport(
            kappa=kappa,
            c=max(0.0, float(inner.max())) if inner.size else 0.0,
            K=float(K),
            violations=[(float(a), float(b)) for a, b in zip(X[bad], Y[bad])],
            n_exterior=int(ext.sum()),
            max_exterior_excess=float(excess[ext].max()) if ext.any() else float("-inf"),
        )

    if K_candidate is not None:
        if not 0 < K_candidate < grid_extent:
            raise ValueError("need 0 < K_candidate < grid_extent")
        return report(K_candidate)

    # tightest lattice threshold: the largest |z|_1 that still violates
    bad = excess > 0
    K = float(norm1[bad].max()) if bad.any() else grid_step
    if K >= grid_extent:
        raise DriftFailed(f"violations reach |z|_1 = {K} >= extent {grid_extent} for kappa={kappa}")
    return report(K)
