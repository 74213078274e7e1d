"""
Discretized first-kind Fredholm test problems and SVD-based direct regularizers.

The two built-in kernels follow the classical Regularization Tools
constructions (midpoint quadrature on n equispaced nodes):

* ``shaw``    -- 1-D image restoration on [-pi/2, pi/2]
* ``gravity`` -- 1-D gravity surveying on [0, 1] with depth 1/4

Any square matrix can also be wrapped with :func:`from_matrix`.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import optimize

__all__ = [
    "DiscreteProblem",
    "SingularSystem",
    "OptimalParameter",
    "build_shaw",
    "build_gravity",
    "build_problem",
    "from_matrix",
    "add_noise",
    "compute_svd",
    "tikhonov_direct",
    "tsvd_solve",
    "optimal_tikhonov_parameter",
    "shaw_kernel",
    "gravity_kernel",
    "save_problem",
    "load_problem",
    "write_matrix_csv",
    "read_matrix_csv",
]

GRAVITY_DEPTH = 0.25


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    """A quadrature-discretized linear ill-posed problem ``A x = y``.

    ``y_noisy`` is ``None`` until :func:`add_noise` has been applied. For
    user-supplied data ``x_true``/``y_true`` may be unknown (``None``).
    """

    kernel_name: str
    matrix: np.ndarray
    grid_s: np.ndarray
    grid_t: np.ndarray
    weights: np.ndarray
    x_true: np.ndarray | None
    y_true: np.ndarray | None
    y_noisy: np.ndarray | None = None
    noise: np.ndarray | None = None
    rel_noise: float = 0.0
    abs_noise: float = 0.0
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    @property
    def rhs(self) -> np.ndarray:
        """The data the solvers see: noisy if available, else clean."""
        if self.y_noisy is not None:
            return self.y_noisy
        if self.y_true is None:
            raise ValueError("problem has no right-hand side")
        return self.y_true

    def error(self, x) -> float | None:
        if self.x_true is None:
            return None
        return float(np.linalg.norm(np.asarray(x) - self.x_true))

    def to_dict(self) -> dict:
        def lst(v):
            return None if v is None else np.asarray(v, dtype=float).tolist()

        return {
            "kernel_name": self.kernel_name,
            "n": self.n,
            "seed": self.seed,
            "rel_noise": self.rel_noise,
            "abs_noise": self.abs_noise,
            "grids": {
                "s": lst(self.grid_s),
                "t": lst(self.grid_t),
                "weights": lst(self.weights),
            },
            "matrix": lst(self.matrix),
            "x_true": lst(self.x_true),
            "y_true": lst(self.y_true),
            "y_noisy": lst(self.y_noisy),
            "noise": lst(self.noise),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteProblem":
        def arr(v):
            return None if v is None else np.asarray(v, dtype=float)

        matrix = arr(data["matrix"])
        if matrix is None or matrix.ndim != 2:
            raise ValueError("problem container needs a 2-D 'matrix'")
        if matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"matrix must be square, got shape {matrix.shape}")
        grids = data.get("grids") or {}
        n = matrix.shape[1]
        t = arr(grids.get("t"))
        s = arr(grids.get("s"))
        w = arr(grids.get("weights"))
        y_true = arr(data.get("y_true"))
        y_noisy = arr(data.get("y_noisy"))
        noise = arr(data.get("noise"))
        if noise is None and y_noisy is not None and y_true is not None:
            noise = y_noisy - y_true
        return cls(
            kernel_name=data.get("kernel_name", "file"),
            matrix=matrix,
            grid_s=s if s is not None else np.arange(matrix.shape[0], dtype=float),
            grid_t=t if t is not None else np.arange(n, dtype=float),
            weights=w if w is not None else np.ones(n),
            x_true=arr(data.get("x_true")),
            y_true=y_true,
            y_noisy=y_noisy,
            noise=noise,
            rel_noise=float(data.get("rel_noise") or 0.0),
            abs_noise=float(data.get("abs_noise") or 0.0),
            seed=data.get("seed"),
        )


@dataclass(frozen=True, eq=False)
class SingularSystem:
    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


@dataclass(frozen=True)
class OptimalParameter:
    """Result of a bracketed error minimisation over ``log10 c``."""

    c: float
    error: float
    at_boundary: bool


# ---------------------------------------------------------------------------
# kernels and builders


def shaw_kernel(s, t):
    """``(cos s + cos t)^2 (sin u / u)^2`` with ``u = pi (sin s + sin t)``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    u = np.pi * (np.sin(s) + np.sin(t))
    # np.sinc(x) = sin(pi x)/(pi x) and already returns 1 at x = 0
    sinc = np.sinc(u / np.pi)
    return (np.cos(s) + np.cos(t)) ** 2 * sinc**2


def gravity_kernel(s, t, depth=GRAVITY_DEPTH):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return depth * (depth**2 + (s - t) ** 2) ** -1.5


def build_shaw(n: int = 400) -> DiscreteProblem:
    """Midpoint discretization of the shaw problem (no noise).

    The true solution is the classical two-bump profile
    ``2 exp(-6 (t - 0.8)^2) + exp(-2 (t + 0.5)^2)``.
    """
    n = _check_size(n)
    h = np.pi / n
    nodes = -np.pi / 2 + (np.arange(n) + 0.5) * h
    matrix = h * shaw_kernel(nodes[:, None], nodes[None, :])
    x = 2.0 * np.exp(-6.0 * (nodes - 0.8) ** 2) + np.exp(-2.0 * (nodes + 0.5) ** 2)
    return DiscreteProblem(
        kernel_name="shaw",
        matrix=matrix,
        grid_s=nodes.copy(),
        grid_t=nodes,
        weights=np.full(n, h),
        x_true=x,
        y_true=matrix @ x,
    )


def _gravity_solution(n: int, choice: str) -> np.ndarray:
    t = (np.arange(n) + 0.5) / n
    if choice == "smooth":
        return np.sin(np.pi * t) + 0.5 * np.sin(2 * np.pi * t)
    if choice != "piecewise_linear":
        raise ValueError(f"unknown gravity solution choice {choice!r}")
    # ramp 0 -> 2 on the first third, 2 -> 1 up to 7/8, then 1 -> 0
    i = np.arange(1, n + 1, dtype=float)
    n1 = round(n / 3)
    n2 = round(7 * n / 8)
    x = np.empty(n)
    x[:n1] = 2.0 / n1 * i[:n1]
    x[n1:n2] = ((2 * n2 - n1) - i[n1:n2]) / (n2 - n1)
    x[n2:] = (n - i[n2:]) / (n - n2)
    return x


def build_gravity(n: int = 200, solution_choice: str = "piecewise_linear") -> DiscreteProblem:
    n = _check_size(n)
    h = 1.0 / n
    nodes = (np.arange(n) + 0.5) * h
    matrix = h * gravity_kernel(nodes[:, None], nodes[None, :])
    x = _gravity_solution(n, solution_choice)
    return DiscreteProblem(
        kernel_name="gravity",
        matrix=matrix,
        grid_s=nodes.copy(),
        grid_t=nodes,
        weights=np.full(n, h),
        x_true=x,
        y_true=matrix @ x,
    )


def build_problem(name: str, n: int | None = None, **kwargs) -> DiscreteProblem:
    if name == "shaw":
        return build_shaw(400 if n is None else n)
    if name == "gravity":
        return build_gravity(200 if n is None else n, **kwargs)
    raise ValueError(f"unknown problem {name!r}")


def from_matrix(matrix, rhs=None, x_true=None, kernel_name="file") -> DiscreteProblem:
    """Wrap a user-supplied square operator.

    If ``x_true`` is given the clean data is ``matrix @ x_true``; ``rhs``
    (if given) is then treated as the measured noisy data.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"matrix must be square, got shape {matrix.shape}")
    n = matrix.shape[0]
    x = None if x_true is None else np.asarray(x_true, dtype=float)
    y_true = None if x is None else matrix @ x
    y_noisy = noise = None
    abs_noise = rel_noise = 0.0
    if rhs is not None:
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (n,):
            raise ValueError(f"rhs must have shape ({n},), got {rhs.shape}")
        y_noisy = rhs
        if y_true is not None:
            noise = rhs - y_true
            abs_noise = float(np.linalg.norm(noise))
            rel_noise = abs_noise / float(np.linalg.norm(y_true))
    if y_true is None and y_noisy is None:
        raise ValueError("need either rhs or x_true")
    grid = np.arange(n, dtype=float)
    return DiscreteProblem(
        kernel_name=kernel_name,
        matrix=matrix,
        grid_s=grid,
        grid_t=grid.copy(),
        weights=np.ones(n),
        x_true=x,
        y_true=y_true,
        y_noisy=y_noisy,
        noise=noise,
        rel_noise=rel_noise,
        abs_noise=abs_noise,
    )


def _check_size(n) -> int:
    if int(n) != n or n < 2:
        raise ValueError(f"need an integer n >= 2, got {n!r}")
    return int(n)


def add_noise(problem: DiscreteProblem, rel_level: float, seed: int = 0) -> DiscreteProblem:
    """Return a copy with ``y_noisy = y_true + rel_level ||y_true|| w/||w||``.

    ``w`` is a standard normal vector drawn from ``numpy.random.default_rng(seed)``.
    """
    if rel_level < 0:
        raise ValueError(f"noise level must be nonnegative, got {rel_level}")
    if problem.y_true is None:
        raise ValueError("add_noise needs the clean data y_true")
    y = problem.y_true
    w = np.random.default_rng(seed).standard_normal(y.shape[0])
    noise = (rel_level * np.linalg.norm(y) / np.linalg.norm(w)) * w
    return replace(
        problem,
        y_noisy=y + noise,
        noise=noise,
        rel_noise=float(rel_level),
        abs_noise=float(np.linalg.norm(noise)),
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# SVD-based direct methods


def compute_svd(problem) -> SingularSystem:
    matrix = problem.matrix if isinstance(problem, DiscreteProblem) else np.asarray(problem)
    u, s, vt = np.linalg.svd(matrix)
    return SingularSystem(left_vectors=u, singular_values=s, right_vectors=vt.T)


def _svd_and_coeffs(problem, svd):
    if svd is None:
        svd = compute_svd(problem)
    coeffs = svd.left_vectors.T @ problem.rhs
    return svd, coeffs


def tikhonov_direct(problem, c, *, svd=None, pseudoinverse=False) -> np.ndarray:
    """Tikhonov solution ``sum_i sigma_i/(sigma_i^2 + c) (u_i . y) v_i``.

    ``c`` must be positive; the unregularized pseudoinverse solution is
    only produced when ``pseudoinverse=True`` is passed explicitly.
    """
    svd, beta = _svd_and_coeffs(problem, svd)
    sigma = svd.singular_values
    if pseudoinverse:
        keep = sigma > sigma[0] * sigma.size * np.finfo(float).eps
        factors = np.zeros_like(sigma)
        factors[keep] = 1.0 / sigma[keep]
    else:
        if not c > 0:
            raise ValueError(f"Tikhonov parameter must be positive, got {c}")
        factors = sigma / (sigma**2 + c)
    return svd.right_vectors @ (factors * beta)


def tsvd_solve(problem, k: int, *, svd=None) -> np.ndarray:
    svd, beta = _svd_and_coeffs(problem, svd)
    sigma = svd.singular_values
    if not 1 <= k <= sigma.size:
        raise ValueError(f"truncation index must lie in [1, {sigma.size}], got {k}")
    if sigma[k - 1] == 0:
        raise ValueError(f"sigma_{k} is zero")
    return svd.right_vectors[:, :k] @ (beta[:k] / sigma[:k])


def minimize_log_parameter(error_of, lo, hi, grid_points=49) -> OptimalParameter:
    """Minimise ``error_of(c)`` over ``log10 c`` in ``[lo, hi]``.

    A coarse log grid locates the basin, bounded Brent refines it. The
    boundary flag is raised when the grid minimum sits on either end.
    """
    grid = np.linspace(lo, hi, grid_points)
    errs = np.array([error_of(10.0**p) for p in grid])
    k = int(np.argmin(errs))
    if k in (0, grid_points - 1):
        return OptimalParameter(c=float(10.0 ** grid[k]), error=float(errs[k]), at_boundary=True)
    res = optimize.minimize_scalar(
        lambda p: error_of(10.0**p),
        bounds=(grid[k - 1], grid[k + 1]),
        method="bounded",
        options={"xatol": 1e-6},
    )
    p, err = float(res.x), float(res.fun)
    if err > errs[k]:
        p, err = float(grid[k]), float(errs[k])
    return OptimalParameter(c=10.0**p, error=err, at_boundary=False)


def optimal_tikhonov_parameter(problem, *, svd=None) -> OptimalParameter:
    """Parameter minimising the true error ``||x_c - x_true||``.

    Only meaningful for synthetic problems where ``x_true`` is known. The
    search bracket is ``[1e-16 sigma_1^2, sigma_1^2]``.
    """
    if problem.x_true is None:
        raise ValueError("optimal Tikhonov parameter needs x_true")
    svd, beta = _svd_and_coeffs(problem, svd)
    sigma = svd.singular_values
    vt_x = svd.right_vectors.T @ problem.x_true

    # in the right-singular basis the error is a diagonal expression
    def error_of(c):
        return float(np.linalg.norm(sigma / (sigma**2 + c) * beta - vt_x))

    top = np.log10(sigma[0] ** 2)
    best = minimize_log_parameter(error_of, top - 16.0, top)
    if best.at_boundary:
        warnings.warn(
            f"error minimum on the bracket boundary (c = {best.c:.3e})",
            RuntimeWarning,
            stacklevel=2,
        )
    return best


# ---------------------------------------------------------------------------
# serialization


def save_problem(problem: DiscreteProblem, path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(problem.to_dict(), fh)
    return path


def load_problem(path) -> DiscreteProblem:
    with open(path) as fh:
        return DiscreteProblem.from_dict(json.load(fh))


def write_matrix_csv(matrix, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in np.asarray(matrix, dtype=float):
            writer.writerow([repr(float(v)) for v in row])
    return path


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row and not row[0].startswith("#")]
    return np.asarray(rows, dtype=float)
