import logging

import numpy as np
import pytest

from conftest import central_jacobian, rel_err
from koopfxt.errors import ConfigurationError
from koopfxt.plant import DOUBLE_INTEGRATOR, drift, input_matrix
from koopfxt.safety import (
    ObstacleCbf,
    build_naive,
    build_robust,
    build_robust_adaptive,
    hocbf_surrogate,
    min_barrier,
)

CBF = ObstacleCbf((-2.5, 0.0), 1.5)


def H_of(cbf, z):
    return hocbf_surrogate(cbf, z)[0]


@pytest.mark.parametrize("kw", [dict(radius=0.0), dict(radius=1.0, k1=0.0), dict(radius=1.0, alpha_gain=-1.0)])
def test_cbf_validation(kw):
    with pytest.raises(ConfigurationError):
        ObstacleCbf((0.0, 0.0), **kw)


def test_h_gradient_finite_differences(rng):
    for _ in range(100):
        z = rng.uniform(-5, 5, 4)
        fd = central_jacobian(lambda v: np.array([CBF.h(v)]), z)[0]
        assert rel_err(CBF.grad_h(z), fd) <= 1e-6


def test_surrogate_on_boundary_at_rest():
    H, grad, drift_terms = hocbf_surrogate(CBF, np.array([-1.0, 0.0, 0.0, 0.0]))
    assert CBF.h([-1.0, 0.0]) == 0.0
    assert H == 0.0 and drift_terms == 0.0


def test_surrogate_positive_moving_outward(rng):
    for _ in range(50):
        d = rng.normal(size=2)
        d /= np.linalg.norm(d)
        p = np.array(CBF.center) + d * rng.uniform(1.5, 4.0)
        v = d * rng.uniform(0.1, 3.0)
        assert H_of(CBF, np.concatenate([p, v])) > 0


def test_surrogate_formula_and_gradient(rng):
    cbf = ObstacleCbf((2.0, -1.0), 1.5, k1=0.7)
    for _ in range(100):
        z = rng.uniform(-4, 4, 4)
        H, grad, drift_terms = hocbf_surrogate(cbf, z)
        px, py = z[0] - 2.0, z[1] + 1.0
        assert H == pytest.approx(2 * px * z[2] + 2 * py * z[3] + 0.7 * cbf.h(z), rel=1e-12)
        fd = central_jacobian(lambda v: np.array([H_of(cbf, v)]), z)[0]
        assert rel_err(grad, fd) <= 1e-6
        assert drift_terms == pytest.approx(grad @ drift(z), rel=1e-12)


def test_lie_derivatives_match_chain_rule(rng):
    # Hdot along f + g u + d equals grad_H . zdot, by finite differences in time
    for _ in range(20):
        z = rng.uniform(-4, 4, 4)
        u = rng.normal(size=2)
        d = np.array([0, 0, *rng.normal(size=2)])
        c = build_naive(CBF, z, d)
        zdot = drift(z) + input_matrix() @ u + d
        h = 1e-6
        fd = (H_of(CBF, z + h * zdot) - H_of(CBF, z - h * zdot)) / (2 * h)
        H, _, LfH = hocbf_surrogate(CBF, z)
        Hdot = LfH + c.row @ u + hocbf_surrogate(CBF, z)[1] @ d
        assert Hdot == pytest.approx(fd, rel=1e-6, abs=1e-6)


def test_naive_far_from_obstacle_is_slack():
    c = build_naive(CBF, np.array([6.0, 6.0, 0.0, 0.0]), np.zeros(4))
    assert c.rhs < -50
    assert c.satisfied(np.zeros(2))


def test_naive_with_true_disturbance(rng):
    z = rng.uniform(-3, 3, 4)
    d = np.array([0, 0, 1.5, -2.0])
    c = build_naive(CBF, z, d)
    H, grad, LfH = hocbf_surrogate(CBF, z)
    assert c.rhs == pytest.approx(-H - LfH - grad @ d, rel=1e-12)
    np.testing.assert_allclose(c.row, grad @ input_matrix())


def test_naive_affine_in_estimate(rng):
    for _ in range(50):
        z = rng.uniform(-3, 3, 4)
        d1, d2 = rng.normal(size=4), rng.normal(size=4)
        _, grad, _ = hocbf_surrogate(CBF, z)
        diff = build_naive(CBF, z, d1).rhs - build_naive(CBF, z, d2).rhs
        assert diff == pytest.approx(-grad @ (d1 - d2), rel=1e-9, abs=1e-12)


def test_robust_zero_delta_is_naive(rng):
    for _ in range(20):
        z, d = rng.uniform(-3, 3, 4), rng.normal(size=4)
        assert abs(build_robust(CBF, z, d, 0.0).rhs - build_naive(CBF, z, d).rhs) <= 1e-12
        assert abs(build_robust_adaptive(CBF, z, d, 0.0, 0.0, np.ones(4)).rhs - build_naive(CBF, z, d).rhs) <= 1e-12


def test_robust_tightening_example():
    # grad_H = (2, 0, 0, 0): at rest, k1 = 1, p - c = (0, 1) gives grad_H = (0, 2, 0, 2)
    cbf = ObstacleCbf((0.0, 0.0), 0.5)
    z = np.array([1.0, 0.0, 0.0, 0.0])
    _, grad, _ = hocbf_surrogate(cbf, z)
    np.testing.assert_allclose(grad, [2.0, 0.0, 2.0, 0.0])
    # a state with grad_H exactly (2, 0, 0, 0): p - c = 0, v = (1, 0)
    z2 = np.array([0.0, 0.0, 1.0, 0.0])
    _, grad2, _ = hocbf_surrogate(cbf, z2)
    np.testing.assert_allclose(grad2, [2.0, 0.0, 0.0, 0.0])
    d = np.zeros(4)
    assert build_robust(cbf, z2, d, 1.0).rhs - build_naive(cbf, z2, d).rhs == pytest.approx(2.0, rel=1e-15)


def test_robust_monotone_in_delta(rng):
    for _ in range(100):
        z, d = rng.uniform(-3, 3, 4), rng.normal(size=4)
        lo, hi = sorted(rng.uniform(0, 5, 2))
        assert build_robust(CBF, z, d, lo).rhs <= build_robust(CBF, z, d, hi).rhs
        assert build_naive(CBF, z, d).rhs <= build_robust(CBF, z, d, hi).rhs


def test_robust_rejects_negative_delta():
    with pytest.raises(ConfigurationError):
        build_robust(CBF, np.zeros(4), np.zeros(4), -1.0)
    with pytest.raises(ConfigurationError):
        build_robust_adaptive(CBF, np.zeros(4), np.zeros(4), -1.0, 0.0, np.ones(4))


def test_robust_adaptive_terms(rng):
    z = np.array([1.0, 2.0, 0.5, -0.3])
    d = rng.normal(size=4)
    delta, ddot, omega = 0.4, -2.0, 2.0
    H, grad, LfH = hocbf_surrogate(CBF, z)
    h_r = H - (4 / (2 * omega)) * delta**2
    c = build_robust_adaptive(CBF, z, d, delta, ddot, np.full(4, omega))
    expected = -h_r - LfH - grad @ d + (4 / omega) * delta * ddot + delta * np.abs(grad).sum()
    assert c.rhs == pytest.approx(expected, rel=1e-12)
    rob = build_robust(CBF, z, d, delta)
    # the delta*deltadot term relaxes, the smaller h_r tightens
    relax = (4 / omega) * delta * ddot
    tighten = (4 / (2 * omega)) * delta**2
    assert c.rhs - rob.rhs == pytest.approx(relax + tighten, rel=1e-12)
    assert relax < 0 < tighten


def test_robust_adaptive_omega_validation():
    with pytest.raises(ConfigurationError):
        build_robust_adaptive(CBF, np.zeros(4), np.zeros(4), 0.1, 0.0, np.array([1.0, 0.0, 1.0, 1.0]))


def test_robust_adaptive_warns_outside_shrunk_set(caplog):
    z = np.array([-0.9, 0.0, 0.0, 0.0])  # just outside the disc, H small
    with caplog.at_level(logging.WARNING, logger="koopfxt.safety"):
        c = build_robust_adaptive(CBF, z, np.zeros(4), 5.0, -1.0, np.ones(4))
    assert np.isfinite(c.rhs)
    assert any("robust-adaptive safe set" in r.message for r in caplog.records)


def test_constraint_provenance():
    z = np.array([0.0, 0.0, 0.0, 0.0])
    c = build_robust(CBF, z, np.zeros(4), 0.5, obstacle=1)
    assert c.obstacle == 1 and c.regime == "robust"
    assert c.margin == pytest.approx(CBF.h(z))
    assert np.all(np.isfinite(c.row)) and np.isfinite(c.rhs)


def test_min_barrier():
    assert min_barrier(np.array([[3.0, 1.0], [2.0, -0.5]])) == -0.5
    with pytest.raises(ValueError):
        min_barrier(np.zeros((0, 2)))


def test_min_barrier_geometric_oracle():
    # straight line y = 3 past the disc at (-2.5, 0): closest approach at x = -2.5
    xs = np.linspace(-8, 4, 1201)
    h = np.array([[CBF.h([x, 3.0])] for x in xs])
    assert min_barrier(h) == pytest.approx(9.0 - 2.25, rel=1e-12)


def test_double_integrator_handles():
    assert DOUBLE_INTEGRATOR.f is drift
    np.testing.assert_array_equal(DOUBLE_INTEGRATOR.g(None), input_matrix())
