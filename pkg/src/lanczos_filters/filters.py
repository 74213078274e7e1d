"""
Filter factors: SVD-domain filters, CG/CGT polynomial filters at Ritz
values, and the Lanczos filters that map CGNE coefficients onto CGT ones.

For a fixed Lanczos basis ``v_1..v_m`` the CGT coefficients are damped
CGNE coefficients, ``omega_i(c) = gamma_i(c) omega_i``, with

    gamma_i(c) = theta_m (phi_{i+1} + h_{i+1}(c)) / (phi_{i+1} (theta_m + g_m(c))).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bidiag import GKBState, TridiagExt, to_tridiag
from .solvers import projected_coefficients
from .tridiag import ritz_values, shift_increments

__all__ = [
    "LanczosFilterSet",
    "UNDEFINED_TOL",
    "lanczos_filters_recurrence",
    "lanczos_filters_ratio",
    "svd_filters",
    "cg_polynomial_filter",
    "cgt_filter_at_ritz",
    "natural_residual_via_filters",
    "truncation_filters",
]

UNDEFINED_TOL = 1e-300


@dataclass(frozen=True, eq=False)
class LanczosFilterSet:
    """``gamma[i-1]`` is the filter on ``v_i``; ``defined`` flags usable entries.

    Undefined entries hold NaN in ``gamma`` and False in ``defined``.
    """

    m: int
    c: float
    gamma: np.ndarray
    defined: np.ndarray
    path: str  # "recurrence" or "coefficient_ratio"


def lanczos_filters_recurrence(T: TridiagExt, c: float) -> LanczosFilterSet:
    """Lanczos filters from the determinant recurrences (reference path).

    Evaluated as a ratio of minors in log space, so it stays finite where
    ``theta_m`` or ``phi_l`` leave the double range.
    """
    if c < 0:
        raise ValueError(f"shift must be nonnegative, got {c}")
    m = T.m
    inc = shift_increments(T, c)
    phi_sign = inc.phi.sign[2 : m + 2]
    defined = phi_sign != 0
    sign = (
        inc.theta.sign[m]
        * inc.theta_shifted.sign[m]
        * inc.phi_shifted.sign[2 : m + 2]
        * np.where(defined, phi_sign, 1.0)
    )
    log_abs = (
        inc.theta.log_abs[m]
        - inc.theta_shifted.log_abs[m]
        + inc.phi_shifted.log_abs[2 : m + 2]
        - inc.phi.log_abs[2 : m + 2]
    )
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        gamma = np.where(sign == 0, 0.0, sign * np.exp(log_abs))
    gamma = np.where(defined, gamma, np.nan)
    return LanczosFilterSet(m=m, c=float(c), gamma=gamma, defined=defined, path="recurrence")


def _ratio(num, den, tol=UNDEFINED_TOL):
    defined = np.abs(den) >= tol
    with np.errstate(divide="ignore", invalid="ignore"):
        gamma = np.where(defined, num / np.where(defined, den, 1.0), np.nan)
    return gamma, defined


def lanczos_filters_ratio(state: GKBState, m: int, c: float) -> LanczosFilterSet:
    """Lanczos filters as the ratio of CGT to CGNE projected coefficients."""
    if c < 0:
        raise ValueError(f"shift must be nonnegative, got {c}")
    T = to_tridiag(state, m)
    omega = projected_coefficients(T, 0.0)
    omega_c = projected_coefficients(T, c)
    gamma, defined = _ratio(omega_c, omega)
    return LanczosFilterSet(m=m, c=float(c), gamma=gamma, defined=defined, path="coefficient_ratio")


def svd_filters(sigma, method: str, param) -> np.ndarray:
    """Classical filter factors on singular values.

    ``method="tikhonov"`` with ``param = c`` gives ``sigma^2 / (sigma^2 + c)``;
    ``method="tsvd"`` with ``param = k`` keeps the first ``k`` components.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise ValueError("singular values must be nonnegative")
    if method == "tikhonov":
        c = float(param)
        if c < 0:
            raise ValueError(f"Tikhonov parameter must be nonnegative, got {c}")
        s2 = sigma**2
        if c == 0:
            return np.where(s2 > 0, 1.0, 0.0)
        return s2 / (s2 + c)
    if method == "tsvd":
        k = int(param)
        if k < 0:
            raise ValueError(f"truncation index must be nonnegative, got {k}")
        return (np.arange(sigma.size) < k).astype(float)
    raise ValueError(f"unknown filter method {method!r}")


def _leading(T: TridiagExt, m: int | None) -> TridiagExt:
    return T if m is None or m == T.m else T.leading(m)


def cg_polynomial_filter(T: TridiagExt, x, m: int | None = None) -> np.ndarray:
    """CGNE filter ``f_m(x) = 1 - prod_i (1 - x / eta_i)`` over the Ritz values of ``T_m``."""
    eta = ritz_values(_leading(T, m))
    if np.any(eta <= 0):
        raise ValueError(f"nonpositive Ritz value {eta.min():.3e}; T is not positive definite")
    x = np.asarray(x, dtype=float)
    resid = np.prod(1.0 - x[..., None] / eta, axis=-1)
    return 1.0 - resid


def cgt_filter_at_ritz(T: TridiagExt, c: float, m: int | None = None) -> np.ndarray:
    """CGT filter values ``eta_i / (eta_i + c)`` at the Ritz values of ``T_m``."""
    if c < 0:
        raise ValueError(f"shift must be nonnegative, got {c}")
    eta = ritz_values(_leading(T, m))
    return eta / (eta + c)


def natural_residual_via_filters(state: GKBState, m: int, c: float = 0.0):
    """Coefficients of ``y - A x_m(c)`` in ``u_1..u_{m+1}`` and their norm.

    With ``w_i = gamma_i omega_i`` the coefficients are

        u_1:      beta_0 - w_1 alpha_1
        u_i:      -(w_i alpha_i + w_{i-1} beta_i),   2 <= i <= m
        u_{m+1}:  -w_m beta_{m+1}

    The norm is their Euclidean length, valid while the u-basis stays
    orthonormal (full reorthogonalization).
    """
    if m == 0:
        coeffs = np.array([state.beta0])
        return coeffs, float(state.beta0)
    T = to_tridiag(state, m)
    omega = projected_coefficients(T, 0.0)
    filt = lanczos_filters_ratio(state, m, c)
    w = np.where(filt.defined, filt.gamma * omega, projected_coefficients(T, c))
    alpha = state.alphas[:m]
    beta = state.betas[:m]  # beta_2 .. beta_{m+1}
    coeffs = np.zeros(m + 1)
    coeffs[0] = state.beta0
    coeffs[:m] -= w * alpha
    coeffs[1:m] -= w[:-1] * beta[:-1]
    coeffs[m] = -w[-1] * beta[-1]
    return coeffs, float(np.linalg.norm(coeffs))


def truncation_filters(state: GKBState, m_stop: int, m: int):
    """Filters expressing ``x_{m_stop}`` in the basis of ``x_m``.

    Returns ``(gamma, defined)`` of length ``m``: ``omega_i^{(m_stop)} / omega_i^{(m)}``
    for ``i <= m_stop`` and exactly 0 beyond.
    """
    if not 0 <= m_stop <= m:
        raise ValueError(f"need 0 <= m_stop <= m, got m_stop={m_stop}, m={m}")
    omega_m = projected_coefficients(to_tridiag(state, m), 0.0)
    gamma = np.zeros(m)
    defined = np.ones(m, dtype=bool)
    if m_stop > 0:
        omega_s = projected_coefficients(to_tridiag(state, m_stop), 0.0)
        head, head_def = _ratio(omega_s, omega_m[:m_stop])
        gamma[:m_stop] = head
        defined[:m_stop] = head_def
    return gamma, defined
