"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Tolerances are the contract values; nothing here is loosened to make a
criterion pass. Run with ``pytest tests/test_acceptance.py`` and read the
"acceptance criteria" section of the terminal summary.
"""

import time
import warnings

import numpy as np
from conftest import SEED, Case
from oracles import exact_det, exact_tridiag_inverse

from lanczos_filters.bidiag import TridiagExt, offdiag_products, to_tridiag
from lanczos_filters.filters import (
    cg_polynomial_filter,
    lanczos_filters_ratio,
    lanczos_filters_recurrence,
    natural_residual_via_filters,
)
from lanczos_filters.problems import add_noise, build_gravity, build_shaw, compute_svd
from lanczos_filters.solvers import (
    best_cgt_parameter,
    cgne_iterate,
    cgt_iterate,
    cgt_via_recurrence,
    discrepancy_stop,
    residual_relation_check,
)
from lanczos_filters.tridiag import det_shift, inverse_matrix, ritz_values, shift_poly_coefficients
from lanczos_filters.verify import filter_path_gap, random_spd_tridiag

ENSEMBLE_SEED = 20240601
LADDER = (0.0, 1e-8, 1e-4, 1.0, 1e4)


def ensemble(count=200):
    rng = np.random.default_rng(ENSEMBLE_SEED)
    mats = [random_spd_tridiag(rng, int(rng.integers(2, 21))) for _ in range(count)]
    shifts = 10.0 ** rng.uniform(-8, 3, count)
    return mats, shifts


def test_criterion_01_inverse_oracle(gate):
    mats, shifts = ensemble()
    start = time.perf_counter()
    worst = 0.0
    for T, c in zip(mats, shifts):
        for shift in (0.0, c):
            got = inverse_matrix(T, shift)
            ref = exact_tridiag_inverse(T.a, T.b_off, shift)
            worst = max(worst, float(np.max(np.abs(got - ref) / np.abs(ref))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 10
    gate.record(1, ok, f"max entrywise rel err {worst:.2e} (tol 1e-9), {elapsed:.1f} s (limit 10 s)")
    assert ok


def test_criterion_02_det_shift(gate):
    mats, _ = ensemble()
    worst = 0.0
    for T in mats:
        for c in (1e-8, 1e-3, 1.0, 1e3):
            _, shifted = det_shift(T, c)
            ref = exact_det(T.a, T.b_off, c)
            worst = max(worst, abs(shifted - ref) / abs(ref))
    ok = worst <= 1e-9
    gate.record(2, ok, f"max rel err {worst:.2e} (tol 1e-9)")
    assert ok


def test_criterion_03_monic(gate, shaw_case, gravity_case):
    worst = 0.0
    degree_ok = True
    mats, _ = ensemble(50)
    tridiags = [to_tridiag(case.gkb, m) for case in (shaw_case, gravity_case) for m in range(1, 13)]
    tridiags += [T for T in mats if T.m <= 12]
    for T in tridiags:
        g, h = shift_poly_coefficients(T)
        for l in range(1, T.m + 1):
            degree_ok &= g[l].size == l + 1 and h[l].size == T.m - l + 2
            worst = max(worst, abs(g[l][-1] - 1), abs(h[l][-1] - 1))
    ok = degree_ok and worst <= 1e-9
    gate.record(3, ok, f"degrees {'ok' if degree_ok else 'WRONG'}, max |lead - 1| {worst:.2e} (tol 1e-9)")
    assert ok


def test_criterion_04_cgt_representation(gate, shaw_case, gravity_case):
    worst = 0.0
    for case in (shaw_case, gravity_case):
        amax = to_tridiag(case.gkb, 15).a.max()
        for m in range(1, 16):
            for k in LADDER:
                r1 = cgt_iterate(case.gkb, m, k * amax)
                r2 = cgt_via_recurrence(case.gkb, m, k * amax)
                worst = max(worst, np.linalg.norm(r1.omega - r2.omega) / np.linalg.norm(r1.omega))
    ok = worst <= 1e-7
    gate.record(4, ok, f"max normwise rel coefficient gap {worst:.2e} (tol 1e-7)")
    assert ok


def test_criterion_05_filter_identities(gate, shaw_case, gravity_case):
    unity = agree = limit = 0.0
    for case in (shaw_case, gravity_case):
        for m in range(1, 31):
            T = to_tridiag(case.gkb, m)
            amax = T.a.max()
            for f in (lanczos_filters_recurrence(T, 0.0), lanczos_filters_ratio(case.gkb, m, 0.0)):
                unity = max(unity, np.nanmax(np.abs(f.gamma - 1)))
            for k in LADDER[1:]:
                f1 = lanczos_filters_recurrence(T, k * amax)
                f2 = lanczos_filters_ratio(case.gkb, m, k * amax)
                assert f1.defined.all() and f2.defined.all()
                agree = max(agree, filter_path_gap(f1, f2))
            limit = max(limit, np.nanmax(np.abs(lanczos_filters_recurrence(T, 1e12 * amax).gamma)))
    ok = unity <= 1e-10 and agree <= 1e-6 and limit <= 1e-6
    gate.record(5, ok, f"|gamma(0) - 1| {unity:.1e} (1e-10), path gap {agree:.1e} (1e-6), gamma(1e12 a_max) {limit:.1e} (1e-6)")
    assert ok


def test_criterion_06_residual_norm(gate, shaw_case, gravity_case):
    worst = 0.0
    for case in (shaw_case, gravity_case):
        for c in (0.0, case.c_opt):
            for m in range(1, 16):
                _, nrm = natural_residual_via_filters(case.gkb, m, c)
                direct = cgt_iterate(case.gkb, m, c).nat_res_norm
                worst = max(worst, abs(nrm - direct) / direct)
    ok = worst <= 1e-8
    gate.record(6, ok, f"max rel err {worst:.2e} (tol 1e-8)")
    assert ok


def test_criterion_07_residual_ratio(gate, shaw_case, gravity_case):
    worst = 0.0
    where = ""
    for case in (shaw_case, gravity_case):
        for c in (1e-6, case.c_opt):
            for m in range(1, 13):
                rep = residual_relation_check(case.gkb, m, c)
                if not rep.rel_diff <= worst:
                    worst, where = rep.rel_diff, f"{case.name} m={m} c={c:.1e}"
    ok = worst <= 1e-7
    gate.record(7, ok, f"max rel gap {worst:.2e} at {where} (tol 1e-7)")
    assert ok


def test_criterion_08_ritz_interpolation(gate, shaw_case):
    worst = 0.0
    for m in range(1, 13):
        T = to_tridiag(shaw_case.gkb, m)
        worst = max(worst, np.max(np.abs(cg_polynomial_filter(T, ritz_values(T)) - 1)))
    ok = worst <= 1e-8
    gate.record(8, ok, f"max |f_m(eta) - 1| {worst:.2e} (tol 1e-8)")
    assert ok


def test_criterion_09_experiments(gate):
    start = time.perf_counter()
    parts = []
    ok = True
    for name, problem, lo, hi in (
        ("shaw", add_noise(build_shaw(400), 1e-4, seed=SEED), 5, 9),
        ("gravity", add_noise(build_gravity(200), 1e-2, seed=SEED), 1, 3),
    ):
        case = Case(name, problem, steps=30)
        stop = discrepancy_stop(case.gkb, problem.abs_noise, x_true=problem.x_true)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            best = best_cgt_parameter(case.gkb, 30, problem.x_true)
        in_range = lo <= stop.m <= hi
        beats = best.error <= stop.record.err_norm
        ok &= in_range and beats
        parts.append(
            f"{name}: m_discr={stop.m} (want [{lo},{hi}]), best CGT(30) err {best.error:.3f} vs discrepancy err {stop.record.err_norm:.3f}"
        )
    elapsed = time.perf_counter() - start
    ok &= elapsed < 30
    gate.record(9, ok, "; ".join(parts) + f"; {elapsed:.1f} s (limit 30 s)")
    assert ok


def test_criterion_10_semiconvergence(gate, shaw_case):
    x_true = shaw_case.problem.x_true
    err = np.array([cgne_iterate(shaw_case.gkb, m, x_true).err_norm for m in range(1, 31)])
    k = int(np.argmin(err))
    ok = 0 < k < err.size - 1
    gate.record(10, ok, f"error minimum {err[k]:.3f} at m={k + 1}, error at m=1 {err[0]:.3f}, at m=30 {err[-1]:.2e}")
    assert ok


def test_criterion_11_offdiag_decay(gate, shaw_case):
    sigma = compute_svd(shaw_case.problem).singular_values
    logs = offdiag_products(to_tridiag(shaw_case.gkb, 20)).log_abs  # j = 2..20
    j = np.arange(2, 21)
    bound = np.log(np.linalg.norm(shaw_case.problem.rhs)) + np.cumsum(np.log(sigma[:20] ** 2))[j - 1]
    slack = bound - logs
    ok = bool(np.all(slack >= 0))
    worst = int(np.argmin(slack))
    gate.record(11, ok, f"min (bound - log prod) {slack[worst]:.2f} at j={j[worst]} (need >= 0 for all j <= 20)")
    assert ok
