import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lanczos_filters.bidiag import estimate_norm
from lanczos_filters.filters import svd_filters
from lanczos_filters.problems import (
    DiscreteProblem,
    add_noise,
    build_gravity,
    build_shaw,
    compute_svd,
    from_matrix,
    gravity_kernel,
    load_problem,
    optimal_tikhonov_parameter,
    read_matrix_csv,
    save_problem,
    shaw_kernel,
    tikhonov_direct,
    tsvd_solve,
    write_matrix_csv,
)


@pytest.fixture(scope="module")
def shaw():
    return build_shaw(400)


@pytest.fixture(scope="module")
def shaw_svd(shaw):
    return compute_svd(shaw)


def test_shaw_kernel_center_value():
    assert shaw_kernel(0.0, 0.0) == pytest.approx(4.0, rel=1e-15)
    # odd n puts a node at 0
    p = build_shaw(401)
    mid = 200
    assert p.grid_t[mid] == pytest.approx(0.0, abs=1e-15)
    assert p.matrix[mid, mid] == pytest.approx(4.0 * np.pi / 401, rel=1e-14)


def test_shaw_symmetric_and_finite(shaw):
    A = shaw.matrix
    assert np.all(np.isfinite(A))
    assert np.max(np.abs(A - A.T)) <= 1e-14 * np.max(np.abs(A))


def test_shaw_kernel_removable_singularity():
    # u = pi (sin s + sin t) vanishes on s = -t
    s = np.linspace(-1.5, 1.5, 31)
    assert np.all(np.isfinite(shaw_kernel(s, -s)))
    assert np.allclose(shaw_kernel(s, -s), (2 * np.cos(s)) ** 2)


def test_shaw_singular_value_decay(shaw_svd):
    sigma = shaw_svd.singular_values
    # measured ratio is ~2e-13: severe, but not below 1e-16
    assert sigma[19] / sigma[0] < 1e-12


def test_gravity_kernel_values():
    assert gravity_kernel(0.3, 0.3) == pytest.approx(16.0, rel=1e-15)
    exact = 0.25 * (1 / 16 + 1) ** -1.5
    assert gravity_kernel(0.0, 1.0) == pytest.approx(exact, rel=1e-15)
    assert gravity_kernel(0.0, 1.0) == pytest.approx(0.2274, rel=5e-3)


def test_gravity_piecewise_linear_has_slope_breaks():
    p = build_gravity(200, "piecewise_linear")
    slopes = np.diff(p.x_true)
    jumps = np.abs(np.diff(slopes))
    assert np.sum(jumps > 1e-8) >= 2  # slope changes at the kinks only
    assert np.sum(jumps > 1e-8) <= 4
    assert np.all(np.isfinite(p.x_true))
    assert p.x_true.max() == pytest.approx(2.0, abs=0.02)


def test_gravity_smooth_option():
    p = build_gravity(100, "smooth")
    assert np.max(np.abs(np.diff(p.x_true, 2))) < 1e-2


@pytest.mark.parametrize("builder", [build_shaw, build_gravity])
def test_construction_identity(builder):
    p = builder(64)
    assert np.linalg.norm(p.matrix @ p.x_true - p.y_true) <= 1e-12 * np.linalg.norm(p.y_true)


@pytest.mark.parametrize("bad", [0, 1, -3, 2.5])
def test_builders_reject_small_n(bad):
    with pytest.raises(ValueError):
        build_shaw(bad)
    with pytest.raises(ValueError):
        build_gravity(bad)


def test_gravity_rejects_unknown_solution():
    with pytest.raises(ValueError):
        build_gravity(10, "wiggly")


def test_noise_zero_level(shaw):
    p = add_noise(shaw, 0.0, seed=3)
    assert np.array_equal(p.y_noisy, p.y_true)
    assert p.abs_noise == 0.0


def test_noise_deterministic_and_exact(shaw):
    p1 = add_noise(shaw, 1e-4, seed=7)
    p2 = add_noise(shaw, 1e-4, seed=7)
    assert np.array_equal(p1.y_noisy, p2.y_noisy)
    assert np.array_equal(p1.y_noisy, p1.y_true + p1.noise)
    rel = np.linalg.norm(p1.y_noisy - p1.y_true) / np.linalg.norm(p1.y_true)
    assert rel == pytest.approx(1e-4, rel=1e-14)
    assert p1.abs_noise == pytest.approx(np.linalg.norm(p1.noise), rel=1e-15)
    assert p1.seed == 7
    assert not np.array_equal(add_noise(shaw, 1e-4, seed=8).y_noisy, p1.y_noisy)


@settings(max_examples=30, deadline=None)
@given(level=st.one_of(st.just(0.0), st.floats(1e-12, 1)), seed=st.integers(0, 2**31))
def test_noise_level_property(level, seed):
    p = add_noise(build_shaw(16), level, seed=seed)
    norm = np.linalg.norm(p.noise)
    assert norm == pytest.approx(level * np.linalg.norm(p.y_true), rel=1e-14, abs=1e-300)


def test_noise_rejects_negative(shaw):
    with pytest.raises(ValueError):
        add_noise(shaw, -1e-3)


def test_svd_identity_and_diag():
    s = compute_svd(np.eye(3))
    assert np.allclose(s.singular_values, 1.0)
    s = compute_svd(np.diag([3.0, 2.0, 1.0]))
    assert np.allclose(s.singular_values, [3, 2, 1])
    assert np.allclose(np.abs(s.left_vectors), np.eye(3))
    assert np.allclose(np.abs(s.right_vectors), np.eye(3))


def test_svd_invariants(shaw, shaw_svd):
    sigma = shaw_svd.singular_values
    assert np.all(np.diff(sigma) <= 0) and sigma[-1] >= 0
    err = np.linalg.norm(shaw.matrix - shaw_svd.reconstruct(), 2)
    assert err <= 1e-10 * sigma[0]
    n = shaw.n
    assert np.max(np.abs(shaw_svd.left_vectors.T @ shaw_svd.left_vectors - np.eye(n))) < 1e-12


def test_sigma_max_matches_power_iteration(shaw, shaw_svd):
    assert estimate_norm(shaw.matrix, steps=60) == pytest.approx(shaw_svd.singular_values[0], rel=1e-8)


def test_tikhonov_identity_example():
    p = from_matrix(np.eye(3), rhs=np.array([1.0, 0, 0]))
    assert np.allclose(tikhonov_direct(p, 1.0), [0.5, 0, 0])


def test_tikhonov_large_c_vanishes(shaw, shaw_svd):
    p = add_noise(shaw, 1e-4)
    s1 = shaw_svd.singular_values[0] ** 2
    big = tikhonov_direct(p, 1e16 * s1, svd=shaw_svd)
    ref = tikhonov_direct(p, s1, svd=shaw_svd)
    assert np.linalg.norm(big) <= 1e-12 * np.linalg.norm(ref) * 10


@pytest.mark.parametrize("c", [1e-10, 1e-6, 1e-2, 1.0])
def test_tikhonov_normal_equations_residual(shaw, shaw_svd, c):
    p = add_noise(shaw, 1e-4)
    A, y = p.matrix, p.rhs
    x = tikhonov_direct(p, c, svd=shaw_svd)
    r = A.T @ (A @ x) + c * x - A.T @ y
    assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(A.T @ y)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), logc=st.floats(-4, 2))
def test_tikhonov_matches_dense_solve(seed, logc):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((20, 20))
    y = rng.standard_normal(20)
    c = 10.0**logc
    p = from_matrix(A, rhs=y)
    ref = np.linalg.solve(A.T @ A + c * np.eye(20), A.T @ y)
    assert np.linalg.norm(tikhonov_direct(p, c) - ref) <= 1e-10 * np.linalg.norm(ref)


@pytest.mark.parametrize("c", [0.0, -1.0])
def test_tikhonov_rejects_nonpositive(c):
    p = from_matrix(np.eye(2), rhs=np.ones(2))
    with pytest.raises(ValueError):
        tikhonov_direct(p, c)
    assert np.allclose(tikhonov_direct(p, c, pseudoinverse=True), np.ones(2))


def test_tsvd_full_rank_equals_solve():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((8, 8)) + 8 * np.eye(8)
    y = rng.standard_normal(8)
    p = from_matrix(A, rhs=y)
    x = tsvd_solve(p, 8)
    assert np.linalg.norm(x - np.linalg.solve(A, y)) <= 1e-10 * np.linalg.norm(x)


def test_tsvd_rank_one_is_multiple_of_v1(shaw, shaw_svd):
    p = add_noise(shaw, 1e-4)
    x = tsvd_solve(p, 1, svd=shaw_svd)
    v1 = shaw_svd.right_vectors[:, 0]
    assert np.linalg.norm(x - (x @ v1) * v1) <= 1e-12 * np.linalg.norm(x)


def test_tsvd_error_is_u_shaped(shaw, shaw_svd):
    p = add_noise(shaw, 1e-4)
    errs = np.array([p.error(tsvd_solve(p, k, svd=shaw_svd)) for k in range(1, 31)])
    k = int(np.argmin(errs))
    assert 0 < k < errs.size - 1
    assert errs[-1] > 10 * errs[k]


@pytest.mark.parametrize("k", [0, 401])
def test_tsvd_rejects_bad_index(shaw, shaw_svd, k):
    with pytest.raises(ValueError):
        tsvd_solve(shaw, k, svd=shaw_svd)


@settings(max_examples=40, deadline=None)
@given(
    sigma=st.lists(st.floats(1e-8, 1e4), min_size=2, max_size=20),
    c=st.floats(1e-10, 1e6),
)
def test_tikhonov_filter_range_and_monotone(sigma, c):
    s = np.sort(np.asarray(sigma))
    f = svd_filters(s, "tikhonov", c)
    assert np.all((f > 0) & (f < 1) | np.isclose(f, 1.0))
    assert np.all(np.diff(f) >= -1e-15)


def test_optimal_parameter_noise_free_hits_boundary(shaw):
    with pytest.warns(RuntimeWarning, match="boundary"):
        best = optimal_tikhonov_parameter(shaw)
    assert best.at_boundary


def test_optimal_parameter_local_optimality(case):
    p = case.problem
    svd = compute_svd(p)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        best = optimal_tikhonov_parameter(p, svd=svd)
    assert not best.at_boundary
    e = p.error(tikhonov_direct(p, best.c, svd=svd))
    assert e == pytest.approx(best.error, rel=1e-10)
    assert e <= p.error(tikhonov_direct(p, 10 * best.c, svd=svd))
    assert e <= p.error(tikhonov_direct(p, best.c / 10, svd=svd))


def test_json_round_trip(tmp_path, shaw):
    p = add_noise(build_shaw(32), 1e-3, seed=1)
    path = save_problem(p, tmp_path / "p.json")
    q = load_problem(path)
    for name in ("matrix", "grid_s", "grid_t", "weights", "x_true", "y_true", "y_noisy", "noise"):
        assert np.array_equal(getattr(p, name), getattr(q, name)), name
    assert (q.kernel_name, q.seed, q.rel_noise, q.abs_noise) == (p.kernel_name, p.seed, p.rel_noise, p.abs_noise)
    # byte-identical on a second save
    assert save_problem(q, tmp_path / "q.json").read_bytes() == path.read_bytes()


def test_matrix_csv_round_trip(tmp_path):
    A = np.random.default_rng(0).standard_normal((5, 5)) * 1e-7
    assert np.array_equal(read_matrix_csv(write_matrix_csv(A, tmp_path / "a.csv")), A)


def test_non_square_rejected():
    with pytest.raises(ValueError, match="square"):
        from_matrix(np.ones((3, 2)), rhs=np.ones(3))
    data = build_shaw(4).to_dict()
    data["matrix"] = [[1.0, 2.0, 3.0]]
    with pytest.raises(ValueError, match="square"):
        DiscreteProblem.from_dict(data)


def test_from_matrix_with_truth():
    A = np.diag([2.0, 1.0])
    p = from_matrix(A, rhs=np.array([2.1, 1.0]), x_true=np.array([1.0, 1.0]))
    assert np.allclose(p.noise, [0.1, 0.0])
    assert p.abs_noise == pytest.approx(0.1)
    with pytest.raises(ValueError):
        from_matrix(A)
