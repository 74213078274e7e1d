"""
CGNE and CG-Tikhonov iterates in the Lanczos basis.

The m-th CGNE iterate is ``x_m = V_m y_m`` with ``T_m y_m = b_1 e_1``; the
CGT iterate replaces ``T_m`` by ``T_m + cI`` (identity shifts leave the
Krylov space unchanged). Two routes are provided for the coefficients:
a direct LDL^T solve of the projected system, and the closed form built
from the determinant recurrences.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .bidiag import GKBState, TridiagExt, to_tridiag
from .problems import OptimalParameter, minimize_log_parameter
from .tridiag import SingularMatrixError, shift_increments

__all__ = [
    "IterateRecord",
    "DiscrepancyResult",
    "ResidualRelationReport",
    "ldl_solve",
    "projected_coefficients",
    "recurrence_coefficients",
    "cgne_iterate",
    "cgt_iterate",
    "cgne_via_recurrence",
    "cgt_via_recurrence",
    "discrepancy_stop",
    "residual_relation_check",
    "best_cgt_parameter",
    "default_max_iter",
]


@dataclass(frozen=True, eq=False)
class IterateRecord:
    m: int
    c: float
    omega: np.ndarray
    x: np.ndarray = field(repr=False)
    nat_res_norm: float
    ne_res_norm: float
    err_norm: float | None = None
    diagnostics: dict = field(default_factory=dict, repr=False)


def ldl_solve(diag, off, rhs) -> np.ndarray:
    """Solve a symmetric tridiagonal system by unpivoted ``L D L^T``."""
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    m = diag.size
    d = np.empty(m)
    ell = np.empty(max(m - 1, 0))
    z = np.empty(m)
    d[0] = diag[0]
    z[0] = rhs[0]
    for k in range(1, m):
        if d[k - 1] == 0:
            raise SingularMatrixError(f"zero pivot at position {k}")
        ell[k - 1] = off[k - 1] / d[k - 1]
        d[k] = diag[k] - ell[k - 1] * off[k - 1]
        z[k] = rhs[k] - ell[k - 1] * z[k - 1]
    if d[-1] == 0:
        raise SingularMatrixError(f"zero pivot at position {m}")
    y = z / d
    for k in range(m - 2, -1, -1):
        y[k] -= ell[k] * y[k + 1]
    return y


def projected_coefficients(T: TridiagExt, c: float = 0.0) -> np.ndarray:
    """Solution of ``(T + cI) y = b_1 e_1``."""
    rhs = np.zeros(T.m)
    rhs[0] = T.b1
    return ldl_solve(T.a + c, T.b_off, rhs)


def recurrence_coefficients(T: TridiagExt, c: float = 0.0):
    """Closed-form coefficients and the pieces of the split representation.

    ``omega_i = (-1)^{i+1} b_1 ... b_i (phi_{i+1} + h_{i+1}) / (theta_m + g_m)``.
    Returns ``(omega, inc)``; evaluation is done in log space.
    """
    inc = shift_increments(T, c)
    m = T.m
    denom_sign = inc.theta_shifted.sign[m]
    if denom_sign == 0:
        raise SingularMatrixError("shifted tridiagonal is singular")
    b = np.concatenate([[T.b1], T.b_off])
    with np.errstate(divide="ignore"):
        log_b = np.cumsum(np.log(np.abs(b)))
    sign_b = np.cumprod(np.sign(b))
    i = np.arange(1, m + 1)
    alt = np.where(i % 2 == 1, 1.0, -1.0)
    num_sign = inc.phi_shifted.sign[2 : m + 2]
    num_log = inc.phi_shifted.log_abs[2 : m + 2]
    log_abs = log_b + num_log - inc.theta_shifted.log_abs[m]
    sign = alt * sign_b * num_sign * denom_sign
    with np.errstate(under="ignore", over="ignore"):
        omega = np.where(sign == 0, 0.0, sign * np.exp(log_abs))
    return omega, inc


def _record(state: GKBState, m: int, c: float, omega: np.ndarray, x_true=None, diagnostics=None) -> IterateRecord:
    A, y = state.matrix, state.U[:, 0] * state.beta0
    x = state.V[:, :m] @ omega if m > 0 else np.zeros(A.shape[1])
    r = y - A @ x
    ne = A.T @ r - c * x
    err = None if x_true is None else float(np.linalg.norm(x - x_true))
    return IterateRecord(
        m=m,
        c=float(c),
        omega=omega,
        x=x,
        nat_res_norm=float(np.linalg.norm(r)),
        ne_res_norm=float(np.linalg.norm(ne)),
        err_norm=err,
        diagnostics=diagnostics or {},
    )


def _check_order(state: GKBState, m: int):
    if m < 0 or m > state.m:
        raise ValueError(f"iteration {m} not available (bidiagonalization has {state.m} steps)")


def cgt_iterate(state: GKBState, m: int, c: float = 0.0, x_true=None) -> IterateRecord:
    """m-th CG-Tikhonov iterate from the projected shifted system."""
    if c < 0:
        raise ValueError(f"shift must be nonnegative, got {c}")
    _check_order(state, m)
    if m == 0:
        return _record(state, 0, c, np.empty(0), x_true)
    omega = projected_coefficients(to_tridiag(state, m), c)
    return _record(state, m, c, omega, x_true)


def cgne_iterate(state: GKBState, m: int, x_true=None) -> IterateRecord:
    return cgt_iterate(state, m, 0.0, x_true)


def cgt_via_recurrence(state: GKBState, m: int, c: float = 0.0, x_true=None) -> IterateRecord:
    """CGT iterate from the determinant recurrences.

    Also evaluates the split form
    ``x^(c) = det T/det(T + cI) x + (1/det(T + cI)) sum (-1)^{i+1} b_1..b_i h_{i+1} v_i``
    and stores its deviation from the direct formula in ``diagnostics``.
    """
    if c < 0:
        raise ValueError(f"shift must be nonnegative, got {c}")
    _check_order(state, m)
    if m == 0:
        return _record(state, 0, c, np.empty(0), x_true)
    T = to_tridiag(state, m)
    omega, inc = recurrence_coefficients(T, c)
    omega0, _ = recurrence_coefficients(T, 0.0) if c != 0 else (omega, inc)

    b = np.concatenate([[T.b1], T.b_off])
    with np.errstate(divide="ignore"):
        log_b = np.cumsum(np.log(np.abs(b)))
    i = np.arange(1, m + 1)
    alt = np.where(i % 2 == 1, 1.0, -1.0)
    det_ratio_log = inc.theta.log_abs[m] - inc.theta_shifted.log_abs[m]
    det_ratio = inc.theta.sign[m] * inc.theta_shifted.sign[m] * np.exp(det_ratio_log)
    with np.errstate(under="ignore", over="ignore"):
        corr = (
            alt
            * np.cumprod(np.sign(b))
            * inc.h.sign[2 : m + 2]
            * inc.theta_shifted.sign[m]
            * np.exp(log_b + inc.h.log_abs[2 : m + 2] - inc.theta_shifted.log_abs[m])
        )
    corr = np.where(inc.h.sign[2 : m + 2] == 0, 0.0, corr)
    split = det_ratio * omega0 + corr
    scale = max(np.linalg.norm(omega), np.finfo(float).tiny)
    diagnostics = {
        "det_ratio": float(det_ratio),
        "split_gap": float(np.max(np.abs(split - omega)) / scale),
    }
    return _record(state, m, c, omega, x_true, diagnostics)


def cgne_via_recurrence(state: GKBState, m: int, x_true=None) -> IterateRecord:
    return cgt_via_recurrence(state, m, 0.0, x_true)


def default_max_iter(state: GKBState) -> int:
    return min(state.matrix.shape[1], 60)


@dataclass(frozen=True, eq=False)
class DiscrepancyResult:
    m: int
    record: IterateRecord
    capped: bool
    residual_norms: np.ndarray = field(repr=False)


def discrepancy_stop(state: GKBState, abs_noise: float, tau: float = 1.0, max_iter: int | None = None, x_true=None) -> DiscrepancyResult:
    """First ``m`` with ``||y - A x_m|| <= tau * abs_noise``.

    Iterations beyond what ``state`` holds are not computed; if the rule
    is never met up to the cap the last iterate is returned with
    ``capped=True`` and a warning.
    """
    if not abs_noise > 0:
        raise ValueError(f"noise norm must be positive, got {abs_noise}")
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    cap = default_max_iter(state) if max_iter is None else max_iter
    cap = min(cap, state.m)
    target = tau * abs_noise
    norms = []
    rec = None
    for m in range(0, cap + 1):
        rec = cgne_iterate(state, m, x_true)
        norms.append(rec.nat_res_norm)
        if rec.nat_res_norm <= target:
            return DiscrepancyResult(m=m, record=rec, capped=False, residual_norms=np.array(norms))
    warnings.warn(f"discrepancy principle not satisfied within {cap} iterations", RuntimeWarning, stacklevel=2)
    return DiscrepancyResult(m=cap, record=rec, capped=True, residual_norms=np.array(norms))


@dataclass(frozen=True)
class ResidualRelationReport:
    m: int
    c: float
    cos_angle: float  # between A^T r_m and v_{m+1}
    empirical_ratio: float
    predicted_ratio: float
    rel_diff: float
    empirical_prefactor: float  # A^T r_m = prefactor * v_{m+1}
    prefactor_b_next: float  # -b_1 b_{m+1} (T^-1)_{m1}
    prefactor_b_m: float  # -b_1 b_m (T^-1)_{m1}


def residual_relation_check(state: GKBState, m: int, c: float) -> ResidualRelationReport:
    """Compare the shifted and unshifted normal-equation residuals.

    The predicted ratio is ``theta_m / (theta_m + g_m(c))``; the empirical
    one is the least-squares scalar between the two residual vectors.
    """
    if m < 1 or m >= state.m + 1:
        raise ValueError(f"need 1 <= m <= {state.m}")
    A = state.matrix
    y = state.U[:, 0] * state.beta0
    x0 = cgne_iterate(state, m).x
    xc = cgt_iterate(state, m, c).x
    r0 = A.T @ (y - A @ x0)
    rc = A.T @ y - A.T @ (A @ xc) - c * xc
    v_next = state.V[:, m]
    nr0 = np.linalg.norm(r0)
    nv = np.linalg.norm(v_next)
    cos = float(r0 @ v_next / (nr0 * nv)) if nr0 > 0 and nv > 0 else float("nan")
    empirical = float(rc @ r0 / (r0 @ r0)) if nr0 > 0 else float("nan")

    T = to_tridiag(state, m)
    inc = shift_increments(T, c)
    predicted = float(inc.theta.sign[m] * inc.theta_shifted.sign[m] * np.exp(inc.theta.log_abs[m] - inc.theta_shifted.log_abs[m]))
    inv_m1 = projected_coefficients(T, 0.0)[m - 1] / T.b1  # (T^-1)_{m1}
    return ResidualRelationReport(
        m=m,
        c=float(c),
        cos_angle=cos,
        empirical_ratio=empirical,
        predicted_ratio=predicted,
        rel_diff=abs(empirical - predicted) / abs(predicted) if predicted != 0 else float("inf"),
        empirical_prefactor=float(r0 @ v_next),
        prefactor_b_next=float(-T.b1 * T.b_next * inv_m1),
        prefactor_b_m=float(-T.b1 * T.b(m) * inv_m1),
    )


def best_cgt_parameter(state: GKBState, m: int, x_true, c_range: tuple[float, float] | None = None) -> OptimalParameter:
    """Shift minimising ``||x_m^(c) - x_true||`` for a fixed iteration ``m``.

    The default bracket is ``[1e-16 a_max, a_max]`` with ``a_max`` the
    largest diagonal entry of ``T_m``.
    """
    if x_true is None:
        raise ValueError("best CGT parameter needs x_true")
    _check_order(state, m)
    T = to_tridiag(state, m)
    Vm = state.V[:, :m]

    def error_of(c):
        return float(np.linalg.norm(Vm @ projected_coefficients(T, c) - x_true))

    if c_range is None:
        top = np.log10(T.a.max())
        lo, hi = top - 16.0, top
    else:
        lo, hi = np.log10(c_range[0]), np.log10(c_range[1])
    best = minimize_log_parameter(error_of, lo, hi)
    if best.at_boundary:
        warnings.warn(f"CGT error minimum on the bracket boundary (c = {best.c:.3e})", RuntimeWarning, stacklevel=2)
    return best
