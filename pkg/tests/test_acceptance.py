"""Acceptance suite: one test per criterion, each with its tolerance and runtime bound.

Every test records a pass/fail line that is printed in the pytest terminal
summary. Run directly with ``python tests/test_acceptance.py`` or through
``pytest tests/test_acceptance.py -v``.
"""

import math
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy import stats

from conftest import ACCEPTANCE_RESULTS, p0, p1, random_assumption_one_params
from hawkes_ei.cli import dispatch
from hawkes_ei.diagnostics import (
    ergodic_stats,
    event_E_monte_carlo,
    event_E_probability,
    h_distance_series,
    minorization_sample,
    two_start_gap,
)
from hawkes_ei.lyapunov import QUADRANTS, choose_pq, fit_numeric_coeffs, quadrant_drift_coeffs, verify_drift
from hawkes_ei.model import check_assumption_one, make_params, scale_params, spectral_radius, weight_matrix
from hawkes_ei.simulator import LiftedState, RngContract, SystemState, simulate, simulate_lifted

# documented seeds
KS_SEEDS = (101, 202, 303, 404, 505)
ERGODIC_SEEDS = (0, 1, 2, 3, 4)
TWO_START_SEED = 7
MINORIZATION_SEED = 2024
H_COLLAPSE_SEED = 6
LIFTED_SEED = 31
DETERMINISM_SEED = 11
EVENT_E_SEED = 12
RANDOM_PARAMS_SEED = 20240611


class _Clock:
    elapsed = 0.0


@contextmanager
def timed():
    clock = _Clock()
    t0 = time.perf_counter()
    yield clock
    clock.elapsed = time.perf_counter() - t0


def record(key, ok, detail, elapsed, limit):
    fast = elapsed < limit
    ACCEPTANCE_RESULTS[key] = (ok and fast, f"{detail}; {elapsed:.2f}s (limit {limit:g}s)")
    print(f"[{'PASS' if ok and fast else 'FAIL'}] {key}: {ACCEPTANCE_RESULTS[key][1]}")
    assert ok, detail
    assert fast, f"runtime {elapsed:.2f}s exceeds {limit}s"


def rel(a, b):
    return abs(a - b) / abs(b)


def test_ac01_separation_witness():
    with timed() as clk:
        rep = check_assumption_one(p0())
    ok = (
        rep.assumption1
        and rep.assumption2
        and abs(rep.spectral_radius - 5.0) <= 1e-9
        and not rep.subcritical
    )
    detail = (
        f"assumption1={rep.assumption1} assumption2={rep.assumption2} "
        f"rho={rep.spectral_radius!r} subcritical={rep.subcritical}"
    )
    record("AC1 separation witness", ok, detail, clk.elapsed, 1.0)


def test_ac02_scaling_law():
    with timed() as clk:
        base = p1()
        rho = spectral_radius(weight_matrix(base))
        worst, preserved = 0.0, True
        for C in (1.5, 2.0, 10.0):
            for eps in (1.0, 0.5, 0.1):
                scaled = scale_params(base, C, eps)
                preserved &= check_assumption_one(scaled).assumption1
                worst = max(worst, rel(spectral_radius(weight_matrix(scaled)), C / eps * rho))
    ok = preserved and worst <= 1e-12
    record("AC2 scaling law", ok, f"assumption1 preserved={preserved} max rel err={worst:.2e}", clk.elapsed, 1.0)


def test_ac03_drift_coefficient_oracle():
    with timed() as clk:
        sets = [p0()] + random_assumption_one_params(np.random.default_rng(RANDOM_PARAMS_SEED), 20)
        worst = 0.0
        for params in sets:
            cfg = choose_pq(params)
            for q in QUADRANTS:
                fit = fit_numeric_coeffs(q, params, cfg).as_tuple()
                closed = quadrant_drift_coeffs(q, params, cfg).as_tuple()
                worst = max(worst, max(rel(f, c) for f, c in zip(fit, closed)))
    ok = worst <= 1e-6
    record("AC3 drift coefficient oracle", ok, f"{len(sets)} parameter sets, max rel err={worst:.2e}", clk.elapsed, 10.0)


def test_ac04_drift_inequality():
    with timed() as clk:
        params = p0()
        rep = verify_drift(params, choose_pq(params), 50.0, 0.25, kappa_candidate=1.0)
    ok = not rep.violations and rep.K <= 50
    detail = f"kappa={rep.kappa} K={rep.K} c={rep.c:.4g} violations={len(rep.violations)}"
    record("AC4 drift inequality", ok, detail, clk.elapsed, 30.0)


def test_ac05_thinning_exactness():
    a, T = 1.0, 1000.0
    params = make_params(0, 0, 0, 0, a_plus=a, a_minus=a)
    lines, ok = [], True
    with timed() as clk:
        for seed in KS_SEEDS:
            traj = simulate(params, SystemState(0, 0, 0), T, RngContract(seed))
            for pop in "+-":
                times = np.array([e.t for e in traj.events if e.pop == pop])
                gaps = np.diff(np.concatenate([[0.0], times]))
                pval = stats.kstest(gaps, "expon", args=(0, 1 / a)).pvalue
                z = (len(times) - a * T) / math.sqrt(a * T)
                ok &= pval > 0.01 and abs(z) <= 4
                lines.append(f"{seed}{pop}:p={pval:.3f},z={z:+.2f}")
    record("AC5 thinning exactness", ok, " ".join(lines), clk.elapsed, 5.0)


def test_ac06_supercritical_yet_stable():
    params = p0()
    cfg = choose_pq(params)
    lines, ok = [], True
    with timed() as clk:
        for seed in ERGODIC_SEEDS:
            # full-horizon window, compared against its second half
            rep = ergodic_stats(params, cfg, 1e4, RngContract(seed), burn_in_fraction=0.0)
            d = abs(rep.second_half_avg_V - rep.time_avg_V) / rep.time_avg_V
            ok &= d <= 0.1
            lines.append(f"seed {seed}: {d:.3f}")
    record("AC6 supercritical-yet-stable", ok, "rel diff " + ", ".join(lines), clk.elapsed, 60.0)


def test_ac07_two_start_mixing():
    with timed() as clk:
        rep = two_start_gap(p0(), (10.0, 10.0), (-10.0, -10.0), "x", [20.0], 1000, RngContract(TWO_START_SEED))
    gap, se = rep.mean_gap[0], rep.gap_se[0]
    ok = gap <= 3 * se
    record("AC7 two-start mixing", ok, f"gap={gap:.4f} se={se:.4f} ({gap / se:.2f} SE)", clk.elapsed, 60.0)


def test_ac08_minorization_density():
    with timed() as clk:
        rep = minorization_sample(p0(), SystemState(0, 0, 0), 1.0, 10**6, RngContract(MINORIZATION_SEED))
    ok = (
        rep.support_ok
        and rep.sup_rel_error_on_bulk <= 0.05
        and abs(rep.empirical_mass - 1) <= 0.02
        and abs(rep.analytic_mass - 1) <= 0.02
    )
    detail = (
        f"sup rel err={rep.sup_rel_error_on_bulk:.4f} on {rep.bulk_bins} bins, "
        f"masses {rep.empirical_mass:.6f}/{rep.analytic_mass:.6f}"
    )
    record("AC8 minorization density", ok, detail, clk.elapsed, 60.0)


def test_ac09_degenerate_h_collapse():
    params = make_params(1.0, 2.0, -0.5, -1.0)
    with timed() as clk:
        series = h_distance_series(params, SystemState(0, -2000.0, 1000.0), 20.0, RngContract(H_COLLAPSE_SEED))
        d0 = series[0][1]
        worst = max(abs(d / (d0 * math.exp(-t)) - 1) for t, d in series)
    ok = worst <= 1e-9 and d0 > 0
    record("AC9 degenerate H-collapse", ok, f"{len(series)} samples, max rel err={worst:.2e}", clk.elapsed, 5.0)


def test_ac10_lifted_projection():
    params = p0()
    init = LiftedState(0.0, 1.5, -0.5, 2.0, 1.0)
    with timed() as clk:
        lifted = simulate_lifted(params, init, 100.0, RngContract(LIFTED_SEED), sample_dt=0.01)
        flat = simulate(params, init.project(), 100.0, RngContract(LIFTED_SEED), sample_dt=0.01)
        A = np.array([[1, 1, 0, 0], [0, 0, 1, 1]], dtype=float)
        same_spikes = [(e.pop, e.unit) for e in lifted.events] == [(e.pop, e.unit) for e in flat.events]
        grid_l = np.array([[s.x_pp, s.x_mp, s.x_pm, s.x_mm] for s in lifted.samples])
        grid_f = np.array([[s.x_plus, s.x_minus] for s in flat.samples])
        dev = max(
            float(np.abs(grid_l @ A.T - grid_f).max()),
            float(np.abs(lifted.anchor_states @ A.T - flat.anchor_states).max()),
        )
    ok = same_spikes and dev <= 1e-9
    detail = f"{len(flat.events)} spikes, identical sequence={same_spikes}, max deviation={dev:.2e}"
    record("AC10 lifted-process projection", ok, detail, clk.elapsed, 5.0)


def test_ac11_determinism(tmp_path):
    cfg = tmp_path / "p0.cfg"
    cfg.write_text(
        "n_plus = 1\nn_minus = 1\nc_pp = 1.0\nc_pm = 4.0\nc_mp = -4.0\nc_mm = -1.0\n"
        "nu_plus = 1.0\nnu_minus = 1.0\na_plus = 1.0\na_minus = 1.0\n"
        f"seed = {DETERMINISM_SEED}\nhorizon = 200\nsample_dt = 0.05\n"
    )
    blobs, codes = [], []
    with timed() as clk:
        for k in range(2):
            s, e = tmp_path / f"states{k}.csv", tmp_path / f"events{k}.csv"
            codes.append(dispatch(["simulate", "--config", str(cfg), "--out", str(s), "--events", str(e)]))
            blobs.append((s.read_bytes(), e.read_bytes()))
    ok = codes == [0, 0] and blobs[0] == blobs[1] and len(blobs[0][1]) > 0
    detail = f"exit codes {codes}, states {len(blobs[0][0])} B, events {len(blobs[0][1])} B, identical={blobs[0] == blobs[1]}"
    record("AC11 determinism", ok, detail, clk.elapsed, 5.0)


def test_ac12_event_E_probability():
    params, T, M = p0(), 0.5, 1.0
    with timed() as clk:
        exact = event_E_probability(params, T, M)
        p, se = event_E_monte_carlo(params, T, M, 10**6, RngContract(EVENT_E_SEED))
    ok = abs(p - exact) <= 3 * se
    detail = f"closed form={exact:.6g} MC={p:.6g} se={se:.2g} ({abs(p - exact) / se:.2f} sigma)"
    record("AC12 event-E probability", ok, detail, clk.elapsed, 30.0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
