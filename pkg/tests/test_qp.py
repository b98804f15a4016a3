import time

import numpy as np
import pytest

from koopfxt.errors import ConfigurationError, SolverFailureError
from koopfxt.qp import QpProblem, kkt_residual, solve, solve_penalized, solve_with_slack
from qp_oracle import enumerate_qp, random_feasible


def test_no_rows_returns_nominal():
    p = QpProblem.from_rows([1.0, -2.0], [])
    s = solve(p)
    assert s.solved and s.iterations == 0
    np.testing.assert_array_equal(s.u_star, [1.0, -2.0])


def test_half_space_projection():
    s = solve(QpProblem.from_rows([1.0, 0.0], [([-1.0, 0.0], 0.0)]))
    assert s.solved
    np.testing.assert_allclose(s.u_star, [0.0, 0.0], atol=1e-15)
    assert s.active_set == (0,)
    assert s.multipliers[0] == pytest.approx(1.0)


def test_inactive_row_leaves_nominal():
    s = solve(QpProblem.from_rows([1.0, 1.0], [([1.0, 0.0], -5.0)]))
    np.testing.assert_array_equal(s.u_star, [1.0, 1.0])
    assert s.active_set == ()


def test_ten_random_problems_against_oracle(rng):
    for _ in range(10):
        u0, A, b = random_feasible(rng)
        s = solve(QpProblem(u0, A, b))
        assert s.solved
        np.testing.assert_allclose(s.u_star, enumerate_qp(u0, A, b), atol=1e-8)


def test_infeasible_with_certificate():
    A = np.array([[1.0, 0.0], [-1.0, 0.0]])
    b = np.array([1.0, 1.0])
    s = solve(QpProblem([0.0, 0.0], A, b))
    assert s.status == "infeasible" and not s.solved
    y = s.certificate
    assert np.all(y >= 0)
    np.testing.assert_allclose(y @ A, 0.0, atol=1e-12)
    assert y @ b > 0


def test_infeasible_three_rows_certificate(rng):
    # x >= 1, y >= 1, x + y <= 1
    A = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
    b = np.array([1.0, 1.0, -1.0])
    s = solve(QpProblem(rng.normal(size=2), A, b))
    assert s.status == "infeasible"
    y = s.certificate
    assert np.all(y >= 0) and y @ b > 0
    np.testing.assert_allclose(y @ A, 0.0, atol=1e-10)


def test_iteration_cap():
    A = np.array([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(SolverFailureError):
        solve(QpProblem([-1.0, -1.0], A, np.array([1.0, 1.0])), max_iter=1)


def test_dependent_rows():
    A = np.array([[1.0, 0.0], [2.0, 0.0], [1.0, 0.0]])
    b = np.array([1.0, 2.0, 1.0])
    s = solve(QpProblem([0.0, 3.0], A, b))
    assert s.solved
    np.testing.assert_allclose(s.u_star, [1.0, 3.0], atol=1e-12)
    assert s.kkt_residual <= 1e-8


def test_tie_breaks_to_lowest_index():
    A = np.array([[1.0, 0.0], [0.0, 1.0]])
    s = solve(QpProblem([0.0, 0.0], A, np.array([1.0, 1.0])), max_iter=100)
    assert s.solved and s.active_set == (0, 1)
    one = solve(QpProblem([0.0, 0.0], A, np.array([1.0, 1.0])), max_iter=2)
    assert one.solved


@pytest.mark.parametrize("u0, A, b", [([np.nan, 0.0], [[1.0, 0.0]], [0.0]), ([0.0, 0.0], [[np.inf, 0.0]], [0.0]), ([], [], [])])
def test_problem_validation(u0, A, b):
    with pytest.raises(ConfigurationError):
        QpProblem(u0, A, b)


def test_row_count_mismatch():
    with pytest.raises(ConfigurationError):
        QpProblem([0.0, 0.0], [[1.0, 0.0]], [0.0, 1.0])


def test_determinism(rng):
    u0, A, b = random_feasible(rng, max_rows=4)
    s1, s2 = solve(QpProblem(u0, A, b)), solve(QpProblem(u0, A, b))
    assert s1.u_star.tobytes() == s2.u_star.tobytes()
    assert s1.active_set == s2.active_set


def test_optimality_perturbations(rng):
    for _ in range(20):
        u0, A, b = random_feasible(rng)
        s = solve(QpProblem(u0, A, b))
        f = 0.5 * np.sum((s.u_star - u0) ** 2)
        for _ in range(100):
            d = rng.normal(size=2)
            d *= 1e-4 / np.linalg.norm(d)
            v = s.u_star + d
            if A.size and np.any(A @ v < b):
                continue
            assert 0.5 * np.sum((v - u0) ** 2) >= f - 1e-15


def test_complementary_slackness(rng):
    for _ in range(100):
        u0, A, b = random_feasible(rng)
        s = solve(QpProblem(u0, A, b))
        if A.size:
            assert np.all(np.abs(s.multipliers * (A @ s.u_star - b)) <= 1e-8)
            assert np.all(A @ s.u_star >= b - 1e-8)


def test_kkt_residual_flags_bad_point():
    p = QpProblem([1.0, 0.0], [[-1.0, 0.0]], [0.0])
    assert kkt_residual(p, [0.0, 0.0], [1.0]) <= 1e-15
    assert kkt_residual(p, [1.0, 0.0], [0.0]) > 0.1


# slack fallback -------------------------------------------------------------

def test_slack_zero_on_feasible(rng):
    u0, A, b = random_feasible(rng, max_rows=3)
    a = solve(QpProblem(u0, A, b))
    s = solve_with_slack(QpProblem(u0, A, b), 1e3)
    np.testing.assert_array_equal(s.u_star, a.u_star)
    np.testing.assert_array_equal(s.slack, 0.0)


def test_slack_contradictory_rows_closed_form():
    # u_x >= 1 and -u_x >= 1 with weight w: minimize 1/2 u^2 + w/2 (s1^2 + s2^2)
    w = 1e3
    p = QpProblem([0.0, 0.0], [[1.0, 0.0], [-1.0, 0.0]], [1.0, 1.0])
    s = solve_with_slack(p, w)
    assert s.solved
    np.testing.assert_allclose(s.u_star, [0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(s.slack, [1.0, 1.0], atol=1e-12)
    # asymmetric nominal shifts the split: u = w (s1 - s2) / ... closed form
    p2 = QpProblem([0.5, 0.0], [[1.0, 0.0], [-1.0, 0.0]], [1.0, 1.0])
    s2 = solve_with_slack(p2, w)
    ux = 0.5 / (1 + 2 * w)
    assert s2.u_star[0] == pytest.approx(ux, rel=1e-10)
    np.testing.assert_allclose(s2.slack, [1 - ux, 1 + ux], rtol=1e-10)


def test_penalty_converges_to_exact(rng):
    for _ in range(20):
        u0, A, b = random_feasible(rng, max_rows=3)
        p = QpProblem(u0, A, b)
        exact = solve(p).u_star
        hi = solve_penalized(p, 1e8).u_star
        lo = solve_penalized(p, 1e3).u_star
        assert np.max(np.abs(hi - exact)) <= 1e-5
        assert np.max(np.abs(hi - exact)) <= np.max(np.abs(lo - exact)) + 1e-12


def test_slack_weight_must_be_positive():
    p = QpProblem([0.0], [[1.0]], [0.0])
    with pytest.raises(ConfigurationError):
        solve_with_slack(p, 0.0)
    with pytest.raises(ConfigurationError):
        solve_penalized(p, -1.0)


def test_thousand_instances_fast(rng):
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        u0, A, b = random_feasible(rng)
        s = solve(QpProblem(u0, A, b))
        assert s.solved and s.kkt_residual <= 1e-8
        worst = max(worst, float(np.max(np.abs(s.u_star - enumerate_qp(u0, A, b)))))
    assert worst <= 1e-8
    assert time.perf_counter() - start < 5.0
