"""Reference implementations that share no code with the package."""

from fractions import Fraction

import numpy as np


def exact_tridiag_inverse(a, b, c=0.0):
    """Inverse of the symmetric tridiagonal ``diag(a + c) + offdiag(b)`` in exact
    rational arithmetic (column-wise Thomas elimination), rounded to float."""
    m = len(a)
    d = [Fraction(float(x)) + Fraction(float(c)) for x in a]
    e = [Fraction(float(x)) for x in b]
    # LDL^T pivots
    piv = [d[0]]
    mult = []
    for k in range(1, m):
        lk = e[k - 1] / piv[k - 1]
        mult.append(lk)
        piv.append(d[k] - lk * e[k - 1])
    inv = np.empty((m, m))
    for j in range(m):
        z = [Fraction(0)] * m
        z[j] = Fraction(1)
        for k in range(1, m):
            z[k] -= mult[k - 1] * z[k - 1]
        y = [z[k] / piv[k] for k in range(m)]
        for k in range(m - 2, -1, -1):
            y[k] -= mult[k] * y[k + 1]
        inv[:, j] = [float(v) for v in y]
    return inv


def exact_det(a, b, c=0.0):
    """Determinant of the shifted tridiagonal in exact arithmetic."""
    t_prev, t = Fraction(1), Fraction(float(a[0])) + Fraction(float(c))
    for k in range(1, len(a)):
        bk = Fraction(float(b[k - 1]))
        t_prev, t = t, (Fraction(float(a[k])) + Fraction(float(c))) * t - bk * bk * t_prev
    return float(t)


def lsqr_classic(A, y, iters, reorth=True):
    """Paige-Saunders LSQR: bidiagonalization plus Givens QR of the bidiagonal.

    Written independently of the package; reorthogonalization uses modified
    Gram-Schmidt so the oracle shares neither code nor orthogonalization
    scheme with the library.
    """
    A = np.asarray(A, dtype=float)
    beta = np.linalg.norm(y)
    u = y / beta
    v = A.T @ u
    alpha = np.linalg.norm(v)
    v = v / alpha
    Us, Vs = [u], [v]
    w = v.copy()
    x = np.zeros(A.shape[1])
    phibar, rhobar = beta, alpha
    for _ in range(iters):
        u = A @ v - alpha * u
        if reorth:
            for q in Us:
                u -= (q @ u) * q
        beta = np.linalg.norm(u)
        u /= beta
        v = A.T @ u - beta * v
        if reorth:
            for q in Vs:
                v -= (q @ v) * q
        alpha = np.linalg.norm(v)
        v /= alpha
        Us.append(u)
        Vs.append(v)
        rho = np.hypot(rhobar, beta)
        cs, sn = rhobar / rho, beta / rho
        theta = sn * alpha
        rhobar = -cs * alpha
        phi = cs * phibar
        phibar = sn * phibar
        x = x + (phi / rho) * w
        w = v - (theta / rho) * w
    return x
