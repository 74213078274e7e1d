"""
Determinant recurrences for symmetric tridiagonals and the explicit inverse.

For ``T_m`` with diagonal ``a_l`` and off-diagonal ``b_l`` the leading
minors ``theta_l`` and trailing minors ``phi_l`` satisfy

    theta_l = a_l theta_{l-1} - b_l^2 theta_{l-2},   theta_0 = 1, theta_1 = a_1
    phi_l   = a_l phi_{l+1}   - b_{l+1}^2 phi_{l+2},  phi_{m+1} = 1, phi_m = a_m

and for ``i <= j``

    (T^{-1})_{ij} = (-1)^{i+j} b_{i+1} ... b_j theta_{i-1} phi_{j+1} / theta_m.

Shifting the diagonal by ``c`` changes the minors by increments
``g_l(c)`` and ``h_l(c)`` that obey inhomogeneous versions of the same
recurrences; both are monic polynomials in ``c``.

Minors behave like products of eigenvalues and leave the double range for
moderate ``m``, so every recurrence is run on a rescaled state with the
scale tracked in log space. Each sequence is returned both as plain floats
(which may over/underflow) and as ``(sign, log|value|)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.linalg import eigh_tridiagonal

from .bidiag import TridiagExt

__all__ = [
    "SingularMatrixError",
    "SignedLogSeq",
    "ThetaPhiTable",
    "ShiftIncrements",
    "compute_thetas",
    "compute_phis",
    "theta_phi_table",
    "shift_increments",
    "eval_g",
    "eval_h",
    "inverse_entry",
    "shifted_inverse_entry",
    "inverse_matrix",
    "det_shift",
    "shift_poly_coefficients",
    "ritz_values",
    "COEFFICIENT_CAP",
]

COEFFICIENT_CAP = 30
_BIG = 1e100


class SingularMatrixError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class SignedLogSeq:
    """A real sequence stored as plain values and as ``sign * exp(log_abs)``.

    Index 0 may hold a NaN placeholder for sequences that start at 1.
    """

    values: np.ndarray
    sign: np.ndarray
    log_abs: np.ndarray

    def __len__(self):
        return self.values.size

    def __getitem__(self, k):
        return self.values[k]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    @classmethod
    def from_scaled(cls, mantissa, log_scale):
        mantissa = np.asarray(mantissa, dtype=float)
        sign = np.sign(mantissa)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_abs = np.log(np.abs(mantissa)) + log_scale
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            values = sign * np.exp(log_abs)
        values = np.where(np.isnan(mantissa), np.nan, values)
        return cls(values=values, sign=sign, log_abs=log_abs)


def _b_squared(T: TridiagExt) -> np.ndarray:
    """``bsq[l] = b_l^2`` for l = 2..m (indices 0 and 1 unused)."""
    bsq = np.zeros(T.m + 1)
    bsq[2:] = T.b_off**2
    return bsq


def _rescale(states, log_scale):
    peak = max(abs(v) for v in states)
    if peak > _BIG or 0 < peak < 1 / _BIG:
        return [v / peak for v in states], log_scale + np.log(peak)
    return states, log_scale


def _source(c, t, t_scale, g_states, g_scale):
    """``c * t`` expressed at the scale of the g-state, rescaling that state if needed."""
    if c == 0 or t == 0:
        return 0.0, g_states, g_scale
    log_src = np.log(abs(c * t)) + t_scale - g_scale
    if log_src > 300:  # the source dwarfs the current g-state
        g_states = [v * np.exp(-log_src) for v in g_states]
        g_scale += log_src
        log_src = 0.0
    return np.sign(c * t) * np.exp(log_src), g_states, g_scale


def _combine(m1, s1, m2, s2):
    """Mantissa/scale of ``m1 e^{s1} + m2 e^{s2}`` elementwise."""
    with np.errstate(divide="ignore", invalid="ignore"):
        l1 = np.where(m1 == 0, -np.inf, np.log(np.abs(m1)) + s1)
        l2 = np.where(m2 == 0, -np.inf, np.log(np.abs(m2)) + s2)
        top = np.maximum(l1, l2)
        top = np.where(np.isfinite(top), top, 0.0)
        with np.errstate(under="ignore"):
            mant = np.sign(m1) * np.exp(l1 - top) + np.sign(m2) * np.exp(l2 - top)
    return np.where(np.isnan(m1), np.nan, mant), top


def _run(diag_at, bsq_at, first, c, order, size):
    """Shared driver for the forward (theta, g) and backward (phi, h) sweeps.

    ``order`` lists the indices to fill after the two seeds; ``first`` gives
    the seed indices ``(k0, k1)`` holding value 1 and ``diag_at(k1)``.
    Each sequence carries its own log scale.
    """
    k0, k1 = first
    t = np.zeros(size)
    g = np.zeros(size)
    ts = np.zeros(size)
    gs = np.zeros(size)
    t[k0], g[k0] = 1.0, 0.0
    t[k1], g[k1] = diag_at(k1), c
    t1, t2, tsc = t[k1], t[k0], 0.0
    g1, g2, gsc = g[k1], g[k0], 0.0
    for l in order:
        al, bq = diag_at(l), bsq_at(l)
        src, (g1, g2), gsc = _source(c, t1, tsc, [g1, g2], gsc)
        g_new = (al + c) * g1 - bq * g2 + src
        (g_new, g1), gsc = _rescale([g_new, g1], gsc)
        t_new = al * t1 - bq * t2
        (t_new, t1), tsc = _rescale([t_new, t1], tsc)
        t[l], ts[l], g[l], gs[l] = t_new, tsc, g_new, gsc
        t1, t2 = t_new, t1
        g1, g2 = g_new, g1
    return t, ts, g, gs


def _forward(T: TridiagExt, c: float):
    """theta_l, g_l(c) and theta_l + g_l(c) for l = 0..m."""
    m, a, bsq = T.m, T.a, _b_squared(T)
    t, ts, g, gs = _run(lambda l: a[l - 1], lambda l: bsq[l], (0, 1), c, range(2, m + 1), m + 1)
    tg, tgs = _combine(t, ts, g, gs)
    return (
        SignedLogSeq.from_scaled(t, ts),
        SignedLogSeq.from_scaled(g, gs),
        SignedLogSeq.from_scaled(tg, tgs),
    )


def _backward(T: TridiagExt, c: float):
    """phi_l, h_l(c) and phi_l + h_l(c) for l = 1..m+1; index 0 is NaN."""
    m, a, bsq = T.m, T.a, _b_squared(T)
    # b_{l+1}^2 lives at bsq[l+1]
    p, ps, h, hs = _run(lambda l: a[l - 1], lambda l: bsq[l + 1], (m + 1, m), c, range(m - 1, 0, -1), m + 2)
    p[0] = h[0] = np.nan
    ph, phs = _combine(p, ps, h, hs)
    return (
        SignedLogSeq.from_scaled(p, ps),
        SignedLogSeq.from_scaled(h, hs),
        SignedLogSeq.from_scaled(ph, phs),
    )


def compute_thetas(T: TridiagExt) -> SignedLogSeq:
    """Leading principal minors ``theta_0..theta_m``; ``theta_m = det T``."""
    return _forward(T, 0.0)[0]


def compute_phis(T: TridiagExt) -> SignedLogSeq:
    """Trailing minors; entry ``l`` is ``phi_l`` for l = 1..m+1 (entry 0 is NaN)."""
    return _backward(T, 0.0)[0]


@dataclass(frozen=True, eq=False)
class ThetaPhiTable:
    theta: SignedLogSeq
    phi: SignedLogSeq
    order: int


def theta_phi_table(T: TridiagExt) -> ThetaPhiTable:
    return ThetaPhiTable(theta=compute_thetas(T), phi=compute_phis(T), order=T.m)


@dataclass(frozen=True, eq=False)
class ShiftIncrements:
    """Everything the shifted inverse needs at one value of ``c``.

    ``g`` is indexed l = 0..m, ``h`` l = 0..m+1 with a NaN at 0.
    ``theta_shifted``/``phi_shifted`` are the minors of ``T + cI`` computed
    as ``theta + g`` and ``phi + h``.
    """

    c: float
    theta: SignedLogSeq
    phi: SignedLogSeq
    g: SignedLogSeq
    h: SignedLogSeq
    theta_shifted: SignedLogSeq
    phi_shifted: SignedLogSeq

    @property
    def g_values(self):
        return self.g.values

    @property
    def h_values(self):
        return self.h.values


def shift_increments(T: TridiagExt, c: float) -> ShiftIncrements:
    c = float(c)
    if not np.isfinite(c):
        raise ValueError(f"shift must be finite, got {c}")
    theta, g, theta_c = _forward(T, c)
    phi, h, phi_c = _backward(T, c)
    return ShiftIncrements(c=c, theta=theta, phi=phi, g=g, h=h, theta_shifted=theta_c, phi_shifted=phi_c)


def eval_g(T: TridiagExt, c: float) -> SignedLogSeq:
    return shift_increments(T, c).g


def eval_h(T: TridiagExt, c: float) -> SignedLogSeq:
    return shift_increments(T, c).h


def _entry_from(theta: SignedLogSeq, phi: SignedLogSeq, T: TridiagExt, i: int, j: int) -> float:
    m = T.m
    if not (1 <= i <= m and 1 <= j <= m):
        raise IndexError(f"entry ({i}, {j}) outside a {m}x{m} matrix")
    if theta.sign[m] == 0:
        raise SingularMatrixError("tridiagonal matrix is singular (theta_m = 0)")
    if i > j:
        i, j = j, i
    b = T.b_off[i - 1 : j - 1]  # b_{i+1} .. b_j
    with np.errstate(divide="ignore"):
        log_b = float(np.sum(np.log(np.abs(b))))
    sign = (-1) ** (i + j) * np.prod(np.sign(b)) * theta.sign[i - 1] * phi.sign[j + 1] * theta.sign[m]
    log_abs = log_b + theta.log_abs[i - 1] + phi.log_abs[j + 1] - theta.log_abs[m]
    if sign == 0:
        return 0.0
    return float(sign * np.exp(log_abs))


def inverse_entry(T: TridiagExt, i: int, j: int, *, table: ThetaPhiTable | None = None) -> float:
    """Entry ``(i, j)`` (1-based) of ``T^{-1}`` from the minors."""
    table = table or theta_phi_table(T)
    return _entry_from(table.theta, table.phi, T, i, j)


def shifted_inverse_entry(T: TridiagExt, c: float, i: int, j: int, *, inc: ShiftIncrements | None = None) -> float:
    """Entry ``(i, j)`` of ``(T + cI)^{-1}`` via ``theta + g`` and ``phi + h``."""
    inc = inc or shift_increments(T, c)
    return _entry_from(inc.theta_shifted, inc.phi_shifted, T, i, j)


def inverse_matrix(T: TridiagExt, c: float = 0.0) -> np.ndarray:
    """All entries of ``(T + cI)^{-1}`` from the closed form."""
    inc = shift_increments(T, c)
    m = T.m
    out = np.empty((m, m))
    for i in range(1, m + 1):
        for j in range(i, m + 1):
            out[i - 1, j - 1] = out[j - 1, i - 1] = _entry_from(inc.theta_shifted, inc.phi_shifted, T, i, j)
    return out


def det_shift(T: TridiagExt, c: float) -> tuple[float, float]:
    """``(det T, det T + g_m(c))``; the second equals ``det(T + cI)``."""
    inc = shift_increments(T, c)
    m = T.m
    return float(inc.theta.values[m]), float(inc.theta_shifted.values[m])


def shift_poly_coefficients(T: TridiagExt, cap: int = COEFFICIENT_CAP):
    """Ascending coefficient vectors of ``g_l(c)`` and ``h_l(c)``.

    Returns ``(g_coeffs, h_coeffs)`` as lists indexed by ``l``;
    ``g_coeffs`` covers l = 0..m and ``h_coeffs`` l = 0..m+1 with
    ``h_coeffs[0] = None``. The zero polynomial is ``array([0.])``.
    """
    m = T.m
    if m > cap:
        raise NotImplementedError(f"coefficient mode is capped at m = {cap}; use eval_g/eval_h")
    a, bsq = T.a, _b_squared(T)
    theta = compute_thetas(T).values
    phi = compute_phis(T).values
    shift = np.array([0.0, 1.0])  # the polynomial c

    g = [np.array([0.0]), np.array([0.0, 1.0])]
    for l in range(2, m + 1):
        term = P.polymul([a[l - 1], 1.0], g[l - 1])
        term = P.polysub(term, bsq[l] * g[l - 2])
        term = P.polyadd(term, theta[l - 1] * shift)
        g.append(P.polytrim(term, 0) if np.any(term) else np.array([0.0]))

    h = [None] * (m + 2)
    h[m + 1] = np.array([0.0])
    h[m] = np.array([0.0, 1.0])
    for l in range(m - 1, 0, -1):
        term = P.polymul([a[l - 1], 1.0], h[l + 1])
        term = P.polysub(term, bsq[l + 1] * h[l + 2])
        term = P.polyadd(term, phi[l + 1] * shift)
        h[l] = P.polytrim(term, 0) if np.any(term) else np.array([0.0])
    return g[: m + 1], h


def ritz_values(T: TridiagExt) -> np.ndarray:
    """Eigenvalues of ``T`` in nondecreasing order."""
    if T.m == 1:
        return T.a.copy()
    return eigh_tridiagonal(T.a, T.b_off, eigvals_only=True)
