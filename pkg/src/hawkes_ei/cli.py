"""Command-line interface.

Exit codes: 0 success, 1 configuration or usage error, 2 precondition
failure, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import diagnostics, lyapunov
from .config import ConfigError, RunConfig, parse_config
from .errors import ParamError, PreconditionError, RuntimeFailure
from .model import assumption_two_near_singular, check_assumption_one, validate_params
from .simulator import DEFAULT_MAX_EVENTS, RngContract, SystemState, simulate

EXIT_OK, EXIT_USAGE, EXIT_PRECONDITION, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt(v) -> str:
    """Shortest round-trip text for floats, plain text otherwise."""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'X,Y', got {text!r}") from None
    return a, b


def _float_list(text: str) -> list[float]:
    try:
        return [float(s) for s in text.strip("[]").split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


def _dump_json(payload, path=None):
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default, allow_nan=True)
    if path is None:
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _load(args, **overrides) -> RunConfig:
    return parse_config(args.config, overrides)


def _require(cfg: RunConfig, key: str):
    if key not in cfg.run:
        raise ConfigError(f"{key!r} is required (flag or config key)")
    return cfg.run[key]


def _envelope(cfg: RunConfig, seed=None, **extra):
    return {"config": cfg.resolved(), "seed": seed, **extra}


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(args) -> int:
    cfg = _load(args)
    rep = check_assumption_one(cfg.params)
    if assumption_two_near_singular(cfg.params):
        print("warning: jump-vector determinant is within rounding of zero", file=sys.stderr)
    _dump_json({**rep.to_dict(), **_envelope(cfg, cfg.run.get("seed"))})
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args, seed=args.seed, horizon=args.horizon, sample_dt=args.sample_dt, max_events=args.max_events)
    seed = _require(cfg, "seed")
    horizon = _require(cfg, "horizon")
    init = SystemState(0.0, cfg.run.get("x0", 0.0), cfg.run.get("y0", 0.0))
    traj = simulate(
        cfg.params,
        init,
        horizon,
        RngContract(seed),
        sample_dt=cfg.run.get("sample_dt"),
        max_events=cfg.run.get("max_events", DEFAULT_MAX_EVENTS),
    )
    if cfg.run.get("sample_dt") is not None:
        rows = [(s.t, s.x_plus, s.x_minus) for s in traj.samples]
    else:
        rows = [(float(t), float(c[0]), float(c[1])) for t, c in zip(traj.anchor_t, traj.anchor_states)]
        rows.append((traj.final.t, traj.final.x_plus, traj.final.x_minus))
    _write_csv(args.out, ["t", "x_plus", "x_minus"], rows)
    if args.events:
        _write_csv(args.events, ["t", "pop", "unit"], [(e.t, e.pop, e.unit) for e in traj.events])
    return EXIT_OK


def cmd_drift(args) -> int:
    cfg = _load(args)
    params = cfg.params
    config = lyapunov.choose_pq(params)
    quadrants = {}
    for q in lyapunov.QUADRANTS:
        closed = lyapunov.quadrant_drift_coeffs(q, params, config)
        fit, linear = lyapunov.fit_numeric_coeffs(q, params, config, return_full=True)
        quadrants[q] = {
            "closed_form": {"a": closed.a, "b": closed.b, "d": closed.d},
            "fitted": {"a": fit.a, "b": fit.b, "d": fit.d},
            "fitted_linear": dict(zip(("e", "f", "g0"), linear)),
        }
    rep = lyapunov.verify_drift(params, config, args.extent, args.step, kappa_candidate=args.kappa)
    _dump_json(
        {
            "lyapunov": config.to_dict(),
            "quadrants": quadrants,
            "drift": rep.to_dict(),
            "grid": {"extent": args.extent, "step": args.step},
            **_envelope(cfg, cfg.run.get("seed")),
        },
        args.out,
    )
    return EXIT_OK


def _test_fn(name: str):
    if name in ("x", "y", "V"):
        return name
    if name.startswith("box:"):
        vals = _float_list(name[4:])
        if len(vals) != 4:
            raise UsageError("box test function needs x_lo,x_hi,y_lo,y_hi")
        return diagnostics.indicator_box(*vals)
    raise UsageError(f"unknown test function {name!r}")


def cmd_converge(args) -> int:
    cfg = _load(args, seed=args.seed)
    seed = _require(cfg, "seed")
    rep = diagnostics.two_start_gap(
        cfg.params,
        args.start_a,
        args.start_b,
        _test_fn(args.test_fn),
        args.horizons,
        args.replicates,
        RngContract(seed),
        workers=args.workers,
    )
    rows = zip(rep.horizons, rep.mean_a, rep.mean_b, rep.mean_gap, rep.gap_se)
    _write_csv(args.out, ["horizon", "mean_a", "mean_b", "gap", "se"], rows)
    _dump_json(
        {
            "fitted_rate": rep.fitted_rate,
            "start_a": list(args.start_a),
            "start_b": list(args.start_b),
            "test_fn": args.test_fn,
            "replicates": args.replicates,
            **_envelope(cfg, seed),
        }
    )
    return EXIT_OK


def cmd_minorize(args) -> int:
    cfg = _load(args, seed=args.seed)
    seed = _require(cfg, "seed")
    z = SystemState(0.0, *args.z)
    rep = diagnostics.minorization_sample(cfg.params, z, args.T, args.samples, RngContract(seed), bins=args.bins)
    _dump_json(
        {
            **rep.to_dict(),
            "T": args.T,
            "z": list(args.z),
            "samples": args.samples,
            "bins": args.bins,
            **_envelope(cfg, seed),
        },
        args.out,
    )
    return EXIT_OK


_SWEEPABLE = ("c_pp", "c_pm", "c_mp", "c_mm", "nu_plus", "nu_minus", "a_plus", "a_minus", "n_plus", "n_minus")


def _parse_vary(text: str):
    axes = []
    for part in text.split(","):
        try:
            key, rng = part.split("=", 1)
            lo, hi, step = (float(s) for s in rng.split(":"))
        except ValueError:
            raise UsageError(f"bad --vary item {part!r}; expected key=lo:hi:step") from None
        key = key.strip()
        if key not in _SWEEPABLE:
            raise UsageError(f"cannot vary {key!r}")
        if step <= 0 or hi < lo:
            raise UsageError(f"bad range for {key!r}")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        axes.append((key, [lo + k * step for k in range(n)]))
    return axes


def cmd_sweep(args) -> int:
    cfg = _load(args)
    axes = _parse_vary(args.vary)
    keys = [k for k, _ in axes]
    fields = [
        "valid",
        "cond1",
        "cond2",
        "cond3",
        "assumption1",
        "assumption2",
        "subcritical",
        "spectral_radius",
        "margin1",
        "margin2",
        "margin3",
        "det_jumps",
    ]
    base = cfg.params.to_dict()
    for key in ("a_plus", "a_minus"):
        if len(set(base[key])) == 1:
            base[key] = base[key][0]
    rows = []
    for combo in itertools.product(*(vals for _, vals in axes)):
        raw = dict(base)
        for k, v in zip(keys, combo):
            raw[k] = v
        try:
            rep = check_assumption_one(validate_params(raw)).to_dict()
            rows.append(list(combo) + [True] + [rep[f] for f in fields[1:]])
        except ParamError:
            rows.append(list(combo) + [False] + [""] * (len(fields) - 1))
    _write_csv(args.out, keys + fields, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hawkes-ei", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    s = sub.add_parser("check", help="evaluate stability assumptions")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("simulate", help="exact trajectory to CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--horizon", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--sample-dt", type=float, dest="sample_dt")
    s.add_argument("--max-events", type=int, dest="max_events")
    s.add_argument("--out", required=True)
    s.add_argument("--events")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("drift", help="Lyapunov drift verification")
    s.add_argument("--config", required=True)
    s.add_argument("--extent", type=float, default=50.0)
    s.add_argument("--step", type=float, default=0.25)
    s.add_argument("--kappa", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_drift)

    s = sub.add_parser("converge", help="two-start convergence gaps")
    s.add_argument("--config", required=True)
    s.add_argument("--start-a", type=_pair, required=True, dest="start_a")
    s.add_argument("--start-b", type=_pair, required=True, dest="start_b")
    s.add_argument("--replicates", type=int, required=True)
    s.add_argument("--horizons", type=_float_list, required=True)
    s.add_argument("--test-fn", default="x", dest="test_fn", help="x, y, V or box:x_lo,x_hi,y_lo,y_hi")
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_converge)

    s = sub.add_parser("minorize", help="conditional endpoint density check")
    s.add_argument("--config", required=True)
    s.add_argument("--T", type=float, required=True, dest="T")
    s.add_argument("--z", type=_pair, default=(0.0, 0.0))
    s.add_argument("--samples", type=int, default=10**6)
    s.add_argument("--bins", type=int, default=10)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_minorize)

    s = sub.add_parser("sweep", help="assumption scan over a parameter grid")
    s.add_argument("--config", required=True)
    s.add_argument("--vary", required=True, help="key=lo:hi:step[,key=lo:hi:step]")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)
    return p


def dispatch(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (UsageError, ConfigError, ParamError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PreconditionError as e:
        print(f"precondition failed: {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (RuntimeFailure, OSError) as e:
        print(f"runtime failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
