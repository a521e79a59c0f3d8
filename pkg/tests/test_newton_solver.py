import numpy as np
import pytest

from helpers import shared_system_with_root
from qroot.newton_solver import (
    NewtonConfig,
    encode_diag_f,
    encode_diag_gradient,
    encode_jacobian,
    encode_state_diag,
    newton_step,
    solve,
    solve_lm,
)
from qroot.nonlinear_system import (
    FunctionFamily,
    Kind,
    classical_lm,
    classical_newton,
    linear_family,
)
from qroot.physics_apps import MassChainSpec, build_equilibrium_system


def test_encode_diag_gradient_linear_rows():
    rng = np.random.default_rng(0)
    a = rng.uniform(-0.5, 0.5, (4, 1, 4))
    fam = FunctionFamily(Kind.SUM_OF_POWERS, a)
    x = rng.uniform(-0.3, 0.3, 4)
    enc = encode_diag_gradient(fam, encode_state_diag(x), 2, m_grad=2.0)
    np.testing.assert_allclose(np.diag(enc.effective), a[2, 0] / 2.0,
                               atol=1e-14)


def test_encode_diag_gradient_matches_analytic():
    rng = np.random.default_rng(1)
    fam, _ = shared_system_with_root(rng, 4)
    x = rng.uniform(-0.2, 0.2, 4)
    m = 4.0
    for j in range(4):
        enc = encode_diag_gradient(fam, encode_state_diag(x), j, m)
        np.testing.assert_allclose(np.diag(enc.effective).real,
                                   fam.jacobian(x)[j] / m, atol=1e-12)


def test_encode_diag_gradient_zero_state_keeps_linear_layer():
    a = np.zeros((2, 3, 2))
    a[:, 0, :] = np.array([[0.5, 0.1], [0.2, 0.3]])
    a[:, 2, :] = 0.4
    fam = FunctionFamily(Kind.SUM_OF_POWERS, a)
    enc = encode_diag_gradient(fam, encode_state_diag(np.zeros(2)), 0, 1.0)
    np.testing.assert_allclose(np.diag(enc.effective).real, a[0, 0],
                               atol=1e-14)


def test_encode_diag_gradient_bound_violation():
    a = np.ones((2, 1, 2))
    fam = FunctionFamily(Kind.SUM_OF_POWERS, a)
    with pytest.raises(ValueError, match="exceeds declared bound"):
        encode_diag_gradient(fam, encode_state_diag(np.zeros(2)), 0, 0.5)


def test_encode_jacobian_linear_general_prefactor():
    rng = np.random.default_rng(2)
    a = rng.uniform(-0.4, 0.4, (4, 1, 4))
    fam = FunctionFamily(Kind.SUM_OF_POWERS, a)
    x = rng.uniform(-0.2, 0.2, 4)
    m_grad = 2.0
    res = encode_jacobian(fam, encode_state_diag(x), m_grad, "general")
    assert res.prefactor == pytest.approx(m_grad * 16)
    np.testing.assert_allclose(res.enc.effective * res.prefactor, a[:, 0, :],
                               atol=1e-9)


def test_encode_jacobian_shared_matches_analytic():
    rng = np.random.default_rng(3)
    fam, _ = shared_system_with_root(rng, 8)
    x = rng.uniform(-0.2, 0.2, 8)
    res = encode_jacobian(fam, encode_state_diag(x), strategy="shared")
    np.testing.assert_allclose(res.enc.effective * res.prefactor,
                               fam.jacobian(x), atol=1e-9)


def test_encode_jacobian_transpose_consistency():
    from qroot.block_encoding import transpose

    rng = np.random.default_rng(4)
    fam, _ = shared_system_with_root(rng, 4)
    x = rng.uniform(-0.2, 0.2, 4)
    res = encode_jacobian(fam, encode_state_diag(x), strategy="shared")
    np.testing.assert_allclose(transpose(res.enc).effective,
                               res.enc.effective.T)


@pytest.mark.parametrize("kind", list(Kind))
def test_encode_diag_f_strategies_agree(kind):
    rng = np.random.default_rng(5)
    n, depth = 4, 2
    a = rng.uniform(-0.5, 0.5, (n, depth, n)) / (2 * depth * n)
    b = rng.uniform(-0.3, 0.3, (n, depth)) \
        if kind is Kind.PRODUCT_OF_AFFINE_POWERS else None
    fam = FunctionFamily(kind, a, b)
    x = rng.uniform(-0.3, 0.3, n)
    enc_shared = encode_diag_f(fam, encode_state_diag(x), "shared")
    enc_general = encode_diag_f(fam, encode_state_diag(x), "general")
    np.testing.assert_allclose(np.diag(enc_shared.effective).real,
                               fam.eval(x), atol=1e-9)
    np.testing.assert_allclose(np.diag(enc_general.effective).real,
                               fam.eval(x), atol=1e-9)


def test_encode_diag_f_identity_map():
    n = 4
    fam = FunctionFamily(Kind.SUM_OF_POWERS, np.eye(n)[:, None, :])
    x = np.array([0.2, -0.1, 0.05, 0.3])
    enc = encode_diag_f(fam, encode_state_diag(x), "shared")
    np.testing.assert_allclose(np.diag(enc.effective).real, x, atol=1e-12)


def test_encode_diag_f_spring_chain_premap_path():
    chain = MassChainSpec(np.ones(2), np.array([1.0]))
    fam = build_equilibrium_system(chain)
    # the 1/2 value bound needs a shrunken state for this steep map
    x = np.array([0.1, -0.1])
    enc = encode_diag_f(fam, encode_state_diag(x), "shared")
    np.testing.assert_allclose(np.diag(enc.effective).real, [-0.4, 0.4],
                               atol=1e-12)


def test_strategy_ledger_ratio_grows_linearly():
    # the one-loading-per-layer advantage of the shared route presumes
    # normalized coefficient mass, so scale the tensors accordingly
    rng = np.random.default_rng(6)
    ratios = []
    for n in (4, 8, 16):
        fam, xstar = shared_system_with_root(rng, n)
        mass = max(np.sum(np.abs(fam.a[:, i, :])) for i in range(fam.depth))
        fam = FunctionFamily(fam.kind, fam.a / mass)
        enc = encode_state_diag(xstar)
        shared = encode_diag_f(fam, enc, "shared").cost.modeled_depth
        general = encode_diag_f(fam, enc, "general").cost.modeled_depth
        ratios.append(general / shared)
    assert ratios[1] / ratios[0] == pytest.approx(2.0, rel=0.35)
    assert ratios[2] / ratios[1] == pytest.approx(2.0, rel=0.35)


def test_newton_step_affine_exactness():
    rng = np.random.default_rng(7)
    mat = np.eye(4) + 0.15 * rng.standard_normal((4, 4)) / 2
    xstar = rng.uniform(-0.2, 0.2, 4)
    fam = linear_family(mat, mat @ xstar)
    cfg = NewtonConfig(iterations=1, eps=1e-8, seed=0)
    _, rec = newton_step(fam, encode_state_diag(np.zeros(4)), cfg)
    np.testing.assert_allclose(rec.x, xstar, atol=1e-8)


def test_newton_step_matches_classical_iterates():
    rng = np.random.default_rng(8)
    fam, xstar = shared_system_with_root(rng, 4)
    x0 = xstar + rng.uniform(-0.04, 0.04, 4)
    cls = classical_newton(fam, x0, 4)
    cfg = NewtonConfig(iterations=4, eps=1e-8, seed=0)
    enc = encode_state_diag(x0)
    for t in range(4):
        enc, rec = newton_step(fam, enc, cfg, index=t)
        assert np.max(np.abs(rec.x - cls[t + 1])) <= 1e-8
        assert np.max(np.abs(rec.x - cls[t + 1])) <= rec.eps


def test_step_eps_reported_bounds_measured_deviation():
    rng = np.random.default_rng(9)
    for _ in range(20):
        fam, xstar = shared_system_with_root(rng, 4)
        x0 = xstar + rng.uniform(-0.03, 0.03, 4)
        cfg = NewtonConfig(iterations=1, eps=1e-6, seed=0)
        _, rec = newton_step(fam, encode_state_diag(x0), cfg)
        cls = classical_newton(fam, x0, 1)[-1]
        assert np.max(np.abs(rec.x - cls)) <= rec.eps


def test_solve_linear_small_system():
    rng = np.random.default_rng(10)
    mat = np.eye(4) + 0.2 * rng.standard_normal((4, 4)) / 2
    xstar = rng.uniform(-0.25, 0.25, 4)
    fam = linear_family(mat, mat @ xstar)
    rep = solve(fam, np.zeros(4), NewtonConfig(iterations=2, eps=1e-8, seed=1))
    assert rep.residual <= 1e-8
    np.testing.assert_allclose(rep.x_final, xstar, atol=1e-7)


def test_solve_fixed_point_at_root():
    rng = np.random.default_rng(11)
    fam, xstar = shared_system_with_root(rng, 4)
    rep = solve(fam, xstar, NewtonConfig(iterations=2, eps=1e-8, seed=2))
    np.testing.assert_allclose(rep.x_final, xstar, atol=1e-9)


def test_solve_postselect_identity():
    rng = np.random.default_rng(12)
    fam, xstar = shared_system_with_root(rng, 4)
    rep = solve(fam, xstar + rng.uniform(-0.03, 0.03, 4),
                NewtonConfig(iterations=3, eps=1e-8, seed=3))
    assert abs(rep.postselect_prob
               - np.linalg.norm(rep.x_final) ** 2 / 4) <= 1e-10
    np.testing.assert_allclose(rep.state,
                               rep.x_final / np.linalg.norm(rep.x_final))


def test_solve_lm_tiny_damping_matches_newton():
    rng = np.random.default_rng(13)
    fam, xstar = shared_system_with_root(rng, 4)
    x0 = xstar + rng.uniform(-0.03, 0.03, 4)
    cfg = NewtonConfig(iterations=3, eps=1e-9, seed=4)
    newton = solve(fam, x0, cfg)
    damped = solve_lm(fam, x0, 1e-10, cfg)
    np.testing.assert_allclose(damped.x_final, newton.x_final, atol=1e-6)


def test_solve_lm_singular_chain_residual_decreases():
    fam = build_equilibrium_system(MassChainSpec(np.ones(4),
                                                 np.array([1.0, 0.5])))
    x0 = np.array([0.15, -0.1, 0.05, 0.1])
    cfg = NewtonConfig(iterations=5, eps=1e-8, seed=5)
    rep = solve_lm(fam, x0, 0.1, cfg)
    cls = classical_lm(fam, x0, 0.1, 5)
    np.testing.assert_allclose(rep.x_final, cls[-1], atol=1e-7)
    residuals = [np.linalg.norm(fam.eval(s.x)) for s in rep.steps]
    start = np.linalg.norm(fam.eval(x0))
    assert residuals[0] <= start and residuals[-1] <= residuals[0]


def test_solve_lm_huge_damping_step_bound():
    rng = np.random.default_rng(14)
    fam, xstar = shared_system_with_root(rng, 4)
    x0 = xstar + rng.uniform(-0.05, 0.05, 4)
    lam = 1e5
    cfg = NewtonConfig(iterations=1, eps=1e-6, seed=6)
    rep = solve_lm(fam, x0, lam, cfg)
    step = rep.x_final - x0
    bound = np.linalg.norm(fam.jacobian(x0).T @ fam.eval(x0)) / lam
    assert np.linalg.norm(step) <= bound * (1 + 1e-6)


def test_solve_lm_requires_positive_damping():
    fam = linear_family(np.eye(2), np.zeros(2))
    with pytest.raises(ValueError, match="damping"):
        solve_lm(fam, np.zeros(2), 0.0, NewtonConfig(iterations=1))


def test_solve_report_json_round_trip():
    import json

    rng = np.random.default_rng(15)
    fam, xstar = shared_system_with_root(rng, 4)
    rep = solve(fam, xstar, NewtonConfig(iterations=1, eps=1e-6, seed=7))
    payload = json.loads(rep.to_json())
    assert payload["converged"] is True
    assert len(payload["steps"]) == 1
