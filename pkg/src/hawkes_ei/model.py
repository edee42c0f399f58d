"""Two-population excitatory/inhibitory Hawkes model: parameters and stability checks.

Units of population ``+`` excite, units of population ``-`` inhibit. Weights
follow the convention ``c_ab`` = influence of a unit in population ``a`` on the
potential of population ``b``::

    c_pp >= 0   (+ -> +)      c_pm >= 0   (+ -> -)
    c_mp <= 0   (- -> +)      c_mm <= 0   (- -> -)
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import LengthMismatch, NonPositiveRate, ParamError, SignViolation

PARAM_KEYS = (
    "n_plus",
    "n_minus",
    "c_pp",
    "c_pm",
    "c_mp",
    "c_mm",
    "nu_plus",
    "nu_minus",
    "a_plus",
    "a_minus",
)


@dataclass(frozen=True)
class ModelParams:
    n_plus: int
    n_minus: int
    c_pp: float
    c_pm: float
    c_mp: float
    c_mm: float
    nu_plus: float
    nu_minus: float
    a_plus: tuple[float, ...]
    a_minus: tuple[float, ...]

    @property
    def jump_plus(self) -> tuple[float, float]:
        """Displacement of ``(x_plus, x_minus)`` caused by one excitatory spike."""
        return (self.c_pp / self.n_plus, self.c_pm / self.n_plus)

    @property
    def jump_minus(self) -> tuple[float, float]:
        """Displacement of ``(x_plus, x_minus)`` caused by one inhibitory spike."""
        return (self.c_mp / self.n_minus, self.c_mm / self.n_minus)

    @property
    def max_jump(self) -> float:
        return max(abs(v) for v in self.jump_plus + self.jump_minus)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["a_plus"] = list(self.a_plus)
        d["a_minus"] = list(self.a_minus)
        return d


@dataclass(frozen=True)
class EffectiveWeights:
    c_star_pp: float
    c_star_mm: float


@dataclass(frozen=True)
class WeightMatrix:
    """The 2x2 nonnegative offspring matrix ``[[l11, l12], [l21, l22]]``."""

    l11: float
    l12: float
    l21: float
    l22: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.l11, self.l12], [self.l21, self.l22]])


@dataclass(frozen=True)
class AssumptionReport:
    cond1: bool
    cond2: bool
    cond3: bool
    assumption1: bool
    assumption2: bool
    spectral_radius: float
    subcritical: bool
    # raw margins; each condition holds iff its margin is > 0
    margin1: float
    margin2: float
    margin3: float
    det_jumps: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _as_list(value, n, field):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)] * n
    try:
        out = [float(v) for v in value]
    except TypeError:
        raise ParamError(f"{field} must be a number or a list of numbers") from None
    if len(out) != n:
        raise LengthMismatch(field, len(out), n)
    return out


def validate_params(raw: Mapping[str, Any]) -> ModelParams:
    """Build a :class:`ModelParams` from a mapping, enforcing every sign constraint.

    Scalar baselines are broadcast to one value per unit. The first violated
    constraint is reported.
    """
    missing = [k for k in PARAM_KEYS if k not in raw]
    if missing:
        raise ParamError(f"missing parameter {missing[0]!r}")

    counts = {}
    for key in ("n_plus", "n_minus"):
        v = raw[key]
        if isinstance(v, bool) or not float(v).is_integer():
            raise ParamError(f"{key}={v!r} must be an integer")
        if int(v) < 1:
            raise NonPositiveRate(key, v)
        counts[key] = int(v)

    vals = {}
    for key in ("c_pp", "c_pm", "c_mp", "c_mm", "nu_plus", "nu_minus"):
        v = float(raw[key])
        if not math.isfinite(v):
            raise ParamError(f"{key}={v!r} must be finite")
        vals[key] = v

    if vals["c_pp"] < 0:
        raise SignViolation("c_pp", vals["c_pp"], "c_pp >= 0")
    if vals["c_pm"] < 0:
        raise SignViolation("c_pm", vals["c_pm"], "c_pm >= 0")
    if vals["c_mp"] > 0:
        raise SignViolation("c_mp", vals["c_mp"], "c_mp <= 0")
    if vals["c_mm"] > 0:
        raise SignViolation("c_mm", vals["c_mm"], "c_mm <= 0")
    for key in ("nu_plus", "nu_minus"):
        if vals[key] <= 0:
            raise NonPositiveRate(key, vals[key])

    a_plus = _as_list(raw["a_plus"], counts["n_plus"], "a_plus")
    a_minus = _as_list(raw["a_minus"], counts["n_minus"], "a_minus")
    for field, arr in (("a_plus", a_plus), ("a_minus", a_minus)):
        for i, a in enumerate(arr):
            if not a > 0 or not math.isfinite(a):
                raise NonPositiveRate(f"{field}[{i}]", a)

    return ModelParams(
        n_plus=counts["n_plus"],
        n_minus=counts["n_minus"],
        a_plus=tuple(a_plus),
        a_minus=tuple(a_minus),
        **vals,
    )


def effective_weights(params: ModelParams) -> EffectiveWeights:
    return EffectiveWeights(
        c_star_pp=params.c_pp - params.nu_plus,
        c_star_mm=params.c_mm - params.nu_minus,
    )


def weight_matrix(params: ModelParams) -> WeightMatrix:
    """Offspring matrix; inhibitory weights enter through their absolute value."""
    return WeightMatrix(
        l11=params.c_pp / params.nu_plus,
        l12=abs(params.c_mp) / params.nu_plus,
        l21=params.c_pm / params.nu_minus,
        l22=abs(params.c_mm) / params.nu_minus,
    )


def spectral_radius(m: WeightMatrix) -> float:
    """Largest eigenvalue modulus of a 2x2 matrix, in closed form."""
    tr = m.l11 + m.l22
    # tr^2 - 4 det, written without cancellation
    disc = (m.l11 - m.l22) ** 2 + 4.0 * m.l12 * m.l21
    if disc >= 0:
        r = math.sqrt(disc)
        return max(abs(tr + r), abs(tr - r)) / 2.0
    # complex conjugate pair: |lambda|^2 = det
    return math.sqrt(m.l11 * m.l22 - m.l12 * m.l21)


def _jump_det(params: ModelParams) -> float:
    return params.c_pp * params.c_mm - params.c_mp * params.c_pm


def check_assumption_two(params: ModelParams) -> bool:
    """Distinct leak rates, or equal rates with linearly independent jump vectors."""
    if params.nu_plus != params.nu_minus:
        return True
    return _jump_det(params) != 0.0


def assumption_two_near_singular(params: ModelParams, rel: float = 1e-12) -> bool:
    """True when non-degeneracy holds only through a determinant within rounding of zero."""
    if params.nu_plus != params.nu_minus:
        return False
    scale = max(abs(params.c_pp), abs(params.c_pm)) * max(abs(params.c_mp), abs(params.c_mm))
    return 0.0 < abs(_jump_det(params)) < rel * scale


def check_assumption_one(params: ModelParams) -> AssumptionReport:
    """Evaluate the balance conditions together with non-degeneracy and subcriticality.

    All three inequalities are strict: a margin of exactly zero fails.
    """
    w = effective_weights(params)
    s = w.c_star_pp + w.c_star_mm
    delta = w.c_star_pp - w.c_star_mm
    margin1 = -s
    margin2 = 4.0 * params.c_pm * abs(params.c_mp) - delta * delta
    margin3 = delta
    cond1, cond2, cond3 = margin1 > 0, margin2 > 0, margin3 > 0
    rho = spectral_radius(weight_matrix(params))
    return AssumptionReport(
        cond1=cond1,
        cond2=cond2,
        cond3=cond3,
        assumption1=cond1 and cond2 and cond3,
        assumption2=check_assumption_two(params),
        spectral_radius=rho,
        subcritical=rho < 1.0,
        margin1=margin1,
        margin2=margin2,
        margin3=margin3,
        det_jumps=_jump_det(params),
    )


def scale_params(params: ModelParams, C: float, eps: float) -> ModelParams:
    """Multiply all weights by ``C`` and both leak rates by ``eps``."""
    return replace(
        params,
        c_pp=params.c_pp * C,
        c_pm=params.c_pm * C,
        c_mp=params.c_mp * C,
        c_mm=params.c_mm * C,
        nu_plus=params.nu_plus * eps,
        nu_minus=params.nu_minus * eps,
    )


def make_params(
    c_pp: float,
    c_pm: float,
    c_mp: float,
    c_mm: float,
    nu_plus: float = 1.0,
    nu_minus: float = 1.0,
    n_plus: int = 1,
    n_minus: int = 1,
    a_plus: float | Sequence[float] = 1.0,
    a_minus: float | Sequence[float] = 1.0,
) -> ModelParams:
    """Keyword shortcut around :func:`validate_params`."""
    return validate_params(
        dict(
            n_plus=n_plus,
            n_minus=n_minus,
            c_pp=c_pp,
            c_pm=c_pm,
            c_mp=c_mp,
            c_mm=c_mm,
            nu_plus=nu_plus,
            nu_minus=nu_minus,
            a_plus=a_plus,
            a_minus=a_minus,
        )
    )
