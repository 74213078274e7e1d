"""
Self-check suite: evaluates the identities the library relies on, on a
given bidiagonalization plus a seeded ensemble of random SPD tridiagonals,
and reports the measured deviation next to each tolerance.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .bidiag import GKBState, TridiagExt, to_tridiag
from .filters import (
    cg_polynomial_filter,
    lanczos_filters_ratio,
    lanczos_filters_recurrence,
    natural_residual_via_filters,
)
from .solvers import cgt_iterate, cgt_via_recurrence, residual_relation_check
from .tridiag import compute_thetas, det_shift, inverse_matrix, ritz_values, shift_poly_coefficients

__all__ = ["CheckResult", "run_checks", "random_spd_tridiag", "filter_path_gap", "FAULTS"]

FAULTS = ("negative-b",)
DEFAULT_LADDER = (1e-8, 1e-4, 1.0, 1e4)  # multiples of max(a_i)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["measured"] = float(d["measured"]) if np.isfinite(d["measured"]) else None
        return d


def random_spd_tridiag(rng: np.random.Generator, m: int) -> TridiagExt:
    """Diagonal in [1, 10], off-diagonal in (0, 1] * min(diag) / 2: diagonally dominant."""
    a = rng.uniform(1.0, 10.0, m)
    b = (1.0 - rng.uniform(0.0, 1.0, m - 1)) * a.min() / 2
    return TridiagExt(a, b)


def filter_path_gap(f1, f2) -> float:
    """Largest ``|f1/f2 - 1|`` over entries defined on both paths.

    Entries that underflow to zero on both paths agree; zero on one side
    only counts as an infinite gap.
    """
    ok = f1.defined & f2.defined
    g1, g2 = f1.gamma[ok], f2.gamma[ok]
    both_zero = (g1 == 0) & (g2 == 0)
    one_zero = (g1 == 0) ^ (g2 == 0)
    if np.any(one_zero):
        return float("inf")
    keep = ~both_zero
    if not np.any(keep):
        return 0.0
    return float(np.max(np.abs(g1[keep] / g2[keep] - 1)))


def _check(name, measured, tol, detail="", *, upper=True):
    ok = bool(measured <= tol) if upper else bool(measured >= tol)
    return CheckResult(name, ok and bool(np.isfinite(measured)), float(measured), float(tol), detail)


def _ensemble(seed: int, count: int):
    rng = np.random.default_rng(seed)
    return [random_spd_tridiag(rng, int(rng.integers(2, 21))) for _ in range(count)]


def _positivity(T: TridiagExt) -> CheckResult:
    theta = compute_thetas(T)
    bad = int(np.sum(T.a <= 0) + np.sum(T.b_off <= 0) + np.sum(theta.sign[1:] <= 0))
    return CheckResult("tridiag_positivity", bad == 0, float(bad), 0.0, "count of nonpositive a_i, b_i, theta_l")


def run_checks(
    state: GKBState,
    *,
    m_max: int = 15,
    c_values=None,
    fault: str | None = None,
    ensemble_seed: int = 12345,
    ensemble_size: int = 50,
) -> list[CheckResult]:
    """Run the identity suite.

    ``c_values`` are absolute shifts; by default a ladder relative to
    ``max(a_i)`` of ``T_m``. ``fault="negative-b"`` flips the sign of an
    off-diagonal entry of the tridiagonal used for the positivity check.
    """
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; choose from {FAULTS}")
    m_top = min(m_max, state.m)
    T_top = to_tridiag(state, m_top)
    amax = float(T_top.a.max())
    if c_values is None:
        c_values = [k * amax for k in DEFAULT_LADDER]
    c_values = [float(c) for c in c_values]
    results = []

    T_chk = T_top
    if fault == "negative-b" and T_top.m > 1:
        b = T_top.b_off.copy()
        b[0] = -b[0]
        T_chk = TridiagExt(T_top.a, b, T_top.b1, T_top.b_next)
    results.append(_positivity(T_chk))

    ens = _ensemble(ensemble_seed, ensemble_size)
    worst = 0.0
    for T in ens:
        for c in (0.0, 1.0):
            ref = np.linalg.inv(T.dense(c))
            worst = max(worst, np.max(np.abs(inverse_matrix(T, c) - ref)) / np.max(np.abs(ref)))
    results.append(_check("inverse_entry_oracle", worst, 1e-9, "max |closed form - dense inverse| / max |inverse|"))

    worst = 0.0
    for T in ens:
        for c in (1e-8, 1e-3, 1.0, 1e3):
            _, shifted = det_shift(T, c)
            sign, logdet = np.linalg.slogdet(T.dense(c))
            worst = max(worst, abs(shifted / (sign * np.exp(logdet)) - 1))
    results.append(_check("det_shift", worst, 1e-9, "det(T+cI) vs det T + g_m(c)"))

    worst = 0.0
    for m in range(1, min(m_top, 12) + 1):
        g, h = shift_poly_coefficients(to_tridiag(state, m))
        for l in range(1, m + 1):
            if g[l].size != l + 1:
                worst = np.inf
            else:
                worst = max(worst, abs(g[l][-1] - 1))
            if h[l].size != m - l + 2:
                worst = np.inf
            else:
                worst = max(worst, abs(h[l][-1] - 1))
    results.append(_check("monic_degree", worst, 1e-9, "g_l degree l, h_l degree m-l+1, leading coefficient 1"))

    worst = split = 0.0
    for m in range(1, m_top + 1):
        for c in [0.0] + c_values:
            r1 = cgt_iterate(state, m, c)
            r2 = cgt_via_recurrence(state, m, c)
            worst = max(worst, np.max(np.abs(r1.omega - r2.omega)) / np.linalg.norm(r1.omega))
            split = max(split, r2.diagnostics["split_gap"])
    results.append(_check("coefficient_paths", worst, 1e-7, "projected solve vs determinant recurrence"))
    results.append(_check("split_representation", split, 1e-7, "det ratio * x_m + correction vs direct"))

    unity = agree = 0.0
    for m in range(1, m_top + 1):
        T = to_tridiag(state, m)
        for f in (lanczos_filters_ratio(state, m, 0.0), lanczos_filters_recurrence(T, 0.0)):
            unity = max(unity, np.nanmax(np.abs(f.gamma - 1)))
        for c in c_values:
            gap = filter_path_gap(lanczos_filters_recurrence(T, c), lanczos_filters_ratio(state, m, c))
            agree = max(agree, gap)
    results.append(_check("filter_unity", unity, 1e-10, "gamma_i(0) = 1"))
    results.append(_check("filter_paths", agree, 1e-6, "recurrence vs coefficient-ratio filters"))
    limit = max(np.nanmax(lanczos_filters_recurrence(to_tridiag(state, m), 1e12 * amax).gamma) for m in range(1, m_top + 1))
    results.append(_check("filter_limit", limit, 1e-6, "gamma_i at c = 1e12 max(a_i)"))

    worst = 0.0
    for m in range(1, m_top + 1):
        for c in [0.0] + c_values:
            _, nrm = natural_residual_via_filters(state, m, c)
            direct = cgt_iterate(state, m, c).nat_res_norm
            worst = max(worst, abs(nrm - direct) / direct)
    results.append(_check("residual_norm_formula", worst, 1e-8, "u-basis coefficient norm vs ||y - A x||"))

    # Beyond m ~ 8 on severely ill-posed data the shifted residual sinks
    # below the roundoff floor for the shifts used here.
    worst = 0.0
    cos_gap = 0.0
    for m in range(1, min(m_top, 8) + 1):
        rep = residual_relation_check(state, m, 1e-6)
        worst = max(worst, rep.rel_diff)
        cos_gap = max(cos_gap, 1 - abs(rep.cos_angle))
    results.append(_check("residual_relation", worst, 1e-7, "empirical vs theta/(theta+g), c = 1e-6, m <= 8"))
    results.append(_check("residual_collinearity", cos_gap, 1e-8, "1 - |cos(A^T r_m, v_{m+1})|, m <= 8"))

    worst = 0.0
    for m in range(1, min(m_top, 12) + 1):
        T = to_tridiag(state, m)
        worst = max(worst, np.max(np.abs(cg_polynomial_filter(T, ritz_values(T)) - 1)))
    results.append(_check("ritz_interpolation", worst, 1e-8, "f_m(eta_i) = 1"))
    return results
