"""
Golub-Kahan bidiagonalization of ``(A, y)`` and the tridiagonal it induces.

With ``u_1 = y / beta_0`` and ``alpha_1 v_1 = A^T u_1`` the recurrences

    A v_i       = alpha_i u_i + beta_{i+1} u_{i+1}
    A^T u_{i+1} = beta_{i+1} v_i + alpha_{i+1} v_{i+1}

generate orthonormal bases of K_m(A A^T, y) and K_m(A^T A, A^T y). The
projection of ``A^T A`` onto the second basis is the symmetric tridiagonal
with diagonal ``alpha_i^2 + beta_{i+1}^2`` and off-diagonal
``beta_i alpha_i`` (taking ``beta_1 = beta_0``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

__all__ = [
    "Breakdown",
    "GKBState",
    "TridiagExt",
    "OffdiagProducts",
    "gkb_init",
    "gkb_step",
    "bidiagonalize",
    "to_tridiag",
    "offdiag_products",
    "estimate_norm",
    "dump_state",
]

# Severely ill-posed problems drive alpha/beta down to ~1e-17 ||A|| while the
# reorthogonalized bases stay orthonormal, so only (near) exact zeros count.
BREAKDOWN_RTOL = 1e-20


class Breakdown(NamedTuple):
    kind: str  # "alpha" or "beta"
    index: int


@dataclass(frozen=True, eq=False)
class GKBState:
    """Immutable snapshot after ``m`` bidiagonalization steps.

    Holds ``alpha_1..alpha_{m+1}``, ``beta_2..beta_{m+1}`` and the basis
    columns ``U[:, :m+1]``, ``V[:, :m+1]``. After a breakdown the offending
    coefficient is stored as 0 with a zero basis column, and no further
    steps are allowed.
    """

    matrix: np.ndarray = field(repr=False)
    beta0: float
    alphas: np.ndarray
    betas: np.ndarray
    U: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)
    reorth: str
    m: int
    norm_estimate: float
    breakdown: Breakdown | None = None
    breakdown_rtol: float = BREAKDOWN_RTOL

    @property
    def tol(self) -> float:
        return self.breakdown_rtol * self.norm_estimate

    @property
    def u_vectors(self) -> np.ndarray:
        return self.U

    @property
    def v_vectors(self) -> np.ndarray:
        return self.V

    def beta(self, i: int) -> float:
        """``beta_i`` with the convention ``beta_1 = beta_0``."""
        if i == 1:
            return self.beta0
        return float(self.betas[i - 2])

    def alpha(self, i: int) -> float:
        return float(self.alphas[i - 1])

    def lower_bidiagonal(self, m: int | None = None) -> np.ndarray:
        """The (m+1) x m lower bidiagonal ``B_m`` (underlined in the usual notation)."""
        m = self.m if m is None else m
        B = np.zeros((m + 1, m))
        idx = np.arange(m)
        B[idx, idx] = self.alphas[:m]
        B[idx + 1, idx] = self.betas[:m]
        return B

    def to_dict(self) -> dict:
        return {
            "beta0": self.beta0,
            "alphas": self.alphas.tolist(),
            "betas": self.betas.tolist(),
            "m": self.m,
            "reorth": self.reorth,
            "norm_estimate": self.norm_estimate,
            "breakdown": None if self.breakdown is None else list(self.breakdown),
            "breakdown_rtol": self.breakdown_rtol,
        }


def estimate_norm(matrix, steps: int = 30) -> float:
    """Power-iteration estimate of the spectral norm (deterministic start)."""
    matrix = np.asarray(matrix)
    n = matrix.shape[1]
    x = np.ones(n) + np.linspace(0.0, 1.0, n)
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(steps):
        y = matrix.T @ (matrix @ x)
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        sigma = np.sqrt(ny)
        x = y / ny
    return float(sigma)


def _orthogonalize(w, Q, k):
    # classical Gram-Schmidt, applied twice
    if k == 0:
        return w
    Qk = Q[:, :k]
    for _ in range(2):
        w = w - Qk @ (Qk.T @ w)
    return w


def gkb_init(matrix, y, reorth: str = "full", norm_estimate: float | None = None, breakdown_rtol: float = BREAKDOWN_RTOL) -> GKBState:
    if reorth not in ("full", "none"):
        raise ValueError(f"reorth must be 'full' or 'none', got {reorth!r}")
    A = np.asarray(matrix, dtype=float)
    y = np.asarray(y, dtype=float)
    beta0 = float(np.linalg.norm(y))
    if beta0 == 0:
        raise ValueError("right-hand side is zero")
    if norm_estimate is None:
        norm_estimate = estimate_norm(A)
    u1 = y / beta0
    w = A.T @ u1
    alpha1 = float(np.linalg.norm(w))
    breakdown = None
    if alpha1 <= breakdown_rtol * norm_estimate:
        alpha1, w, breakdown = 0.0, np.zeros_like(w), Breakdown("alpha", 1)
    else:
        w = w / alpha1
    return GKBState(
        matrix=A,
        beta0=beta0,
        alphas=np.array([alpha1]),
        betas=np.empty(0),
        U=u1[:, None],
        V=w[:, None],
        reorth=reorth,
        m=0,
        norm_estimate=float(norm_estimate),
        breakdown=breakdown,
        breakdown_rtol=breakdown_rtol,
    )


def gkb_step(state: GKBState) -> GKBState:
    """One bidiagonalization step: append ``beta_{m+1}, u_{m+1}, alpha_{m+1}, v_{m+1}``."""
    if state.breakdown is not None:
        raise ValueError(f"cannot step past breakdown {state.breakdown}")
    A, m, full = state.matrix, state.m, state.reorth == "full"
    k = m + 1  # number of columns already stored
    u_prev, v_prev = state.U[:, m], state.V[:, m]
    alpha_prev = state.alphas[m]

    p = A @ v_prev - alpha_prev * u_prev
    if full:
        p = _orthogonalize(p, state.U, k)
    beta = float(np.linalg.norm(p))
    breakdown = None
    # with k orthonormal columns in R^k nothing new can be generated
    if beta <= state.tol or (full and k >= A.shape[0]):
        beta, alpha = 0.0, 0.0
        u = np.zeros_like(u_prev)
        v = np.zeros_like(v_prev)
        breakdown = Breakdown("beta", m + 2)
    else:
        u = p / beta
        q = A.T @ u - beta * v_prev
        if full:
            q = _orthogonalize(q, state.V, k)
        alpha = float(np.linalg.norm(q))
        if alpha <= state.tol or (full and k >= A.shape[1]):
            alpha, v = 0.0, np.zeros_like(v_prev)
            breakdown = Breakdown("alpha", m + 2)
        else:
            v = q / alpha

    return GKBState(
        matrix=A,
        beta0=state.beta0,
        alphas=np.append(state.alphas, alpha),
        betas=np.append(state.betas, beta),
        U=np.column_stack([state.U, u]),
        V=np.column_stack([state.V, v]),
        reorth=state.reorth,
        m=m + 1,
        norm_estimate=state.norm_estimate,
        breakdown=breakdown,
        breakdown_rtol=state.breakdown_rtol,
    )


def bidiagonalize(matrix, y, steps: int, reorth: str = "full", breakdown_rtol: float = BREAKDOWN_RTOL) -> GKBState:
    """Run ``steps`` GKB steps, stopping early on breakdown."""
    state = gkb_init(matrix, y, reorth=reorth, breakdown_rtol=breakdown_rtol)
    while state.m < steps and state.breakdown is None:
        state = gkb_step(state)
    return state


@dataclass(frozen=True, eq=False)
class TridiagExt:
    """Symmetric tridiagonal ``T_m`` plus its boundary couplings.

    ``a`` holds a_1..a_m, ``b_off`` holds b_2..b_m. ``b1`` is the scale of
    the projected right-hand side (``||A^T y||`` for GKB data) and
    ``b_next`` the coupling ``b_{m+1}`` to the next basis vector.
    """

    a: np.ndarray
    b_off: np.ndarray
    b1: float = 1.0
    b_next: float = 0.0

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b_off, dtype=float))
        if a.ndim != 1 or a.size < 1:
            raise ValueError("need at least one diagonal entry")
        if b.shape != (a.size - 1,):
            raise ValueError(f"expected {a.size - 1} off-diagonal entries, got {b.size}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b_off", b)
        object.__setattr__(self, "b1", float(self.b1))
        object.__setattr__(self, "b_next", float(self.b_next))

    @property
    def m(self) -> int:
        return self.a.size

    def b(self, i: int) -> float:
        """Off-diagonal ``b_i`` for i = 1..m+1 (b_1 and b_{m+1} are the boundary values)."""
        if i == 1:
            return self.b1
        if i == self.m + 1:
            return self.b_next
        return float(self.b_off[i - 2])

    def dense(self, c: float = 0.0) -> np.ndarray:
        return np.diag(self.a + c) + np.diag(self.b_off, 1) + np.diag(self.b_off, -1)

    def leading(self, k: int) -> "TridiagExt":
        """Leading k x k principal block, with ``b_{k+1}`` as the new boundary."""
        if not 1 <= k <= self.m:
            raise ValueError(f"order {k} outside [1, {self.m}]")
        return TridiagExt(self.a[:k], self.b_off[: k - 1], self.b1, self.b(k + 1))

    def to_dict(self) -> dict:
        return {
            "a": self.a.tolist(),
            "b_off": self.b_off.tolist(),
            "b1": self.b1,
            "b_next": self.b_next,
        }

    @classmethod
    def from_dict(cls, data) -> "TridiagExt":
        return cls(data["a"], data["b_off"], data.get("b1", 1.0), data.get("b_next", 0.0))


def to_tridiag(state: GKBState, m: int | None = None) -> TridiagExt:
    m = state.m if m is None else m
    if m < 1:
        raise ValueError("tridiagonal order must be at least 1")
    if m > state.m:
        raise ValueError(f"requested order {m} exceeds bidiagonalization length {state.m}")
    alphas = state.alphas
    betas = state.betas  # beta_2 .. beta_{state.m+1}
    a = alphas[:m] ** 2 + betas[:m] ** 2
    b_off = betas[: m - 1] * alphas[1:m]
    return TridiagExt(
        a=a,
        b_off=b_off,
        b1=state.beta0 * alphas[0],
        b_next=betas[m - 1] * alphas[m],
    )


class OffdiagProducts(NamedTuple):
    """Partial products ``prod_{i=2}^j b_i`` for j = 2..m.

    ``log_abs`` is authoritative; ``plain`` may underflow to 0.
    """

    plain: np.ndarray
    log_abs: np.ndarray
    sign: np.ndarray


def offdiag_products(T: TridiagExt) -> OffdiagProducts:
    b = T.b_off
    with np.errstate(divide="ignore"):
        log_abs = np.cumsum(np.log(np.abs(b)))
    sign = np.cumprod(np.sign(b))
    with np.errstate(under="ignore", over="ignore"):
        plain = sign * np.exp(log_abs)
    return OffdiagProducts(plain=plain, log_abs=log_abs, sign=sign)


def dump_state(state: GKBState, directory, stem: str = "gkb", vectors: bool = False) -> list[Path]:
    """Write the coefficient JSON and, optionally, the raw basis blocks.

    Vector blocks are little-endian float64, C order, with a JSON sidecar
    ``{"shape": [...], "dtype": "<f8", "order": "C"}``.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    meta = directory / f"{stem}.json"
    meta.write_text(json.dumps(state.to_dict(), indent=2))
    written.append(meta)
    if vectors:
        for name, block in (("U", state.U), ("V", state.V)):
            raw = directory / f"{stem}_{name}.f64"
            np.ascontiguousarray(block, dtype="<f8").tofile(raw)
            side = directory / f"{stem}_{name}.json"
            side.write_text(json.dumps({"shape": list(block.shape), "dtype": "<f8", "order": "C"}))
            written += [raw, side]
    return written


def load_vector_block(raw_path) -> np.ndarray:
    raw_path = Path(raw_path)
    header = json.loads(raw_path.with_suffix(".json").read_text())
    data = np.fromfile(raw_path, dtype=header["dtype"])
    return data.reshape(header["shape"], order=header["order"])
