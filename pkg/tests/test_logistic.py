import math

import numpy as np
import pytest

from madmm.data import Dataset, make_rng, normalize_columns, synthetic_generate
from madmm.logistic import (
    bregman_constant_x1,
    build_problem,
    default_beta,
    fitting_error,
    initial_state,
    l1_quartic_solve,
    logistic_h,
    logistic_smooth_term,
    phi_eval,
    phi_jac_block_apply,
    x1_update,
    x2_update,
    x3_update,
)
from madmm.model import BlockVector, smooth_part_block_grad, smooth_part_value
from madmm.solver import SolverConfig, check_beta_condition, dual_update, run, y_update
from madmm.surrogates import (
    bregman_divergence,
    mm_block_update,
    quartic_kernel,
    surrogate_value,
)


def _toy_data(d=6, q=4, seed=0):
    return synthetic_generate(d, q, make_rng(seed))


def test_phi_eval_single_sample():
    data = Dataset(A=np.array([[1.0], [0.0]]), b=np.array([1.0]))
    got = phi_eval(data, np.array([2.0, 0.0]), np.array([0.0, 1.0]), 3.0)
    np.testing.assert_allclose(got, [7.0])


def test_phi_eval_matches_scalar_loop():
    data = _toy_data()
    rng = make_rng(5)
    x1 = rng.standard_normal(data.d)
    x2 = rng.standard_normal(data.d)
    x3 = 0.7
    got = phi_eval(data, x1, x2, x3)
    for i in range(data.q):
        a = data.A[:, i]
        dot1 = math.fsum(a[k] * x1[k] for k in range(data.d))
        dot2 = math.fsum(a[k] * x2[k] for k in range(data.d))
        np.testing.assert_allclose(got[i], dot1 * dot1 + dot2 + x3, rtol=1e-12)


def test_phi_jacobian_actions_match_finite_differences():
    data = _toy_data()
    rng = make_rng(8)
    x1 = rng.standard_normal(data.d)
    x2 = rng.standard_normal(data.d)
    x3 = -0.4
    w = rng.standard_normal(data.q)
    eps = 1e-6

    def pairing(x1v, x2v, x3v):
        return float(w @ phi_eval(data, x1v, x2v, x3v))

    fd1 = np.empty(data.d)
    fd2 = np.empty(data.d)
    for k in range(data.d):
        e = np.zeros(data.d)
        e[k] = eps
        fd1[k] = (pairing(x1 + e, x2, x3) - pairing(x1 - e, x2, x3)) / (2 * eps)
        fd2[k] = (pairing(x1, x2 + e, x3) - pairing(x1, x2 - e, x3)) / (2 * eps)
    fd3 = (pairing(x1, x2, x3 + eps) - pairing(x1, x2, x3 - eps)) / (2 * eps)

    np.testing.assert_allclose(phi_jac_block_apply(data, 0, x1, w), fd1, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(phi_jac_block_apply(data, 1, x1, w), fd2, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(phi_jac_block_apply(data, 2, x1, w), [fd3], rtol=1e-6)
    with pytest.raises(ValueError):
        phi_jac_block_apply(data, 3, x1, w)


def test_logistic_h_at_zero_scores():
    data = _toy_data()
    value, grad = logistic_h(data, np.zeros(data.q))
    assert value == pytest.approx(math.log(2.0))
    np.testing.assert_allclose(grad, -data.b / (2.0 * data.q), rtol=1e-15)


def test_logistic_h_matches_log1p_loop():
    data = _toy_data()
    y = make_rng(3).standard_normal(data.q) * 3.0
    value, grad = logistic_h(data, y)
    oracle_v = math.fsum(math.log1p(math.exp(-data.b[i] * y[i])) for i in range(data.q))
    np.testing.assert_allclose(value, oracle_v / data.q, rtol=1e-14)
    for i in range(data.q):
        t = data.b[i] * y[i]
        np.testing.assert_allclose(
            grad[i], -data.b[i] / (1.0 + math.exp(t)) / data.q, rtol=1e-12
        )


def test_logistic_h_extreme_scores_stay_finite():
    data = Dataset(A=np.eye(2), b=np.array([1.0, -1.0]))
    with np.errstate(over="raise"):
        value, grad = logistic_h(data, np.array([-1000.0, 1000.0]))
    # Both samples are maximally misclassified: loss is |score| each.
    assert value == pytest.approx(1000.0)
    np.testing.assert_allclose(grad, [-0.5, 0.5], rtol=1e-15)
    tiny, _ = logistic_h(data, np.array([1000.0, -1000.0]))
    assert 0.0 <= tiny < 1e-300


def test_logistic_smooth_term_constants():
    data = _toy_data()
    term = logistic_smooth_term(data)
    assert term.lipschitz_const == pytest.approx(1.0 / (4.0 * data.q))
    y = make_rng(1).standard_normal(data.q)
    v, g = logistic_h(data, y)
    assert term.eval(y) == v
    np.testing.assert_array_equal(term.grad(y), g)


def test_bregman_constant_unit_sample_value():
    # One unit-norm sample, everything else zero, beta = 1:
    # cap = max(0 + 0, 3) = 3 and the constant is 2 * 1 * 3 = 6.
    data = Dataset(A=np.array([[1.0], [0.0]]), b=np.array([1.0]))
    got = bregman_constant_x1(data, np.zeros(2), 0.0, np.zeros(1), np.zeros(1), 1.0)
    assert got == pytest.approx(6.0)


def test_bregman_constant_scales_linearly_in_beta_when_w_zero():
    data = _toy_data()
    rng = make_rng(4)
    x2 = rng.standard_normal(data.d)
    x3 = 0.3
    y = rng.standard_normal(data.q)
    w = np.zeros(data.q)
    c1 = bregman_constant_x1(data, x2, x3, y, w, 1.0)
    c2 = bregman_constant_x1(data, x2, x3, y, w, 2.0)
    assert c2 == pytest.approx(2.0 * c1)


def test_bregman_constant_matches_scalar_loop():
    data = _toy_data(d=5, q=7, seed=2)
    rng = make_rng(6)
    x2 = rng.standard_normal(5)
    x3 = -0.2
    y = rng.standard_normal(7)
    w = rng.standard_normal(7)
    beta = 0.8
    oracle = math.fsum(
        2.0
        * float(data.A[:, j] @ data.A[:, j])
        * max(
            abs(w[j] - beta * y[j])
            + beta * abs(float(data.A[:, j] @ x2) + x3),
            3.0 * beta * float(data.A[:, j] @ data.A[:, j]),
        )
        for j in range(7)
    )
    got = bregman_constant_x1(data, x2, x3, y, w, beta)
    np.testing.assert_allclose(got, oracle, rtol=1e-13)
    with pytest.raises(ValueError):
        bregman_constant_x1(data, x2, x3, y, w, 0.0)


def test_l1_quartic_solve_worked_example():
    x = l1_quartic_solve(np.array([3.0, -1.0]), 1.0, 2.0)
    # Direction -soft((3,-1), 1) = (-2, 0), magnitude from t^3 + t = 1.
    t = x[0] * -1.0
    assert x[1] == 0.0
    np.testing.assert_allclose(x, [-0.6823278038280193, 0.0], rtol=1e-12)
    assert abs(2.0 * (t**3 + t) - 2.0) <= 1e-10 * 3.0


def test_l1_quartic_solve_zero_when_threshold_dominates():
    out = l1_quartic_solve(np.array([0.5, -0.3]), 1.0, 2.0)
    np.testing.assert_array_equal(out, np.zeros(2))


def test_l1_quartic_solve_no_penalty_keeps_direction():
    c = np.array([1.0, 2.0, -2.0])
    out = l1_quartic_solve(c, 0.0, 0.7)
    # Minimizer is antiparallel to the linear term.
    cos = float(out @ c) / (np.linalg.norm(out) * np.linalg.norm(c))
    assert cos == pytest.approx(-1.0)
    mag = float(np.linalg.norm(out))
    assert abs(0.7 * (mag**3 + mag) - np.linalg.norm(c)) <= 1e-10 * (
        1.0 + np.linalg.norm(c)
    )


def test_l1_quartic_solve_beats_probes():
    rng = make_rng(9)
    for trial in range(20):
        n = int(rng.integers(1, 8))
        c = 3.0 * rng.standard_normal(n)
        lam = float(rng.random())
        ell = 0.1 + 2.0 * float(rng.random())
        x = l1_quartic_solve(c, lam, ell)

        def obj(v):
            s = float(v @ v)
            return lam * float(np.abs(v).sum()) + float(c @ v) + ell * (
                0.25 * s * s + 0.5 * s
            )

        base = obj(x)
        assert base <= obj(np.zeros(n)) + 1e-12
        for _ in range(40):
            p = x + rng.standard_normal(n) * 0.5
            assert base <= obj(p) + 1e-10


def test_l1_quartic_solve_rejects_bad_parameters():
    with pytest.raises(ValueError):
        l1_quartic_solve(np.ones(2), 1.0, 0.0)
    with pytest.raises(ValueError):
        l1_quartic_solve(np.ones(2), -0.1, 1.0)


def _random_state(data, seed):
    rng = make_rng(seed)
    x1 = rng.standard_normal(data.d)
    x2 = rng.standard_normal(data.d)
    x3 = float(rng.standard_normal())
    y = rng.standard_normal(data.q)
    w = rng.standard_normal(data.q)
    return x1, x2, x3, y, w


def test_block_updates_match_generic_machinery():
    data = _toy_data()
    lam1, lam2 = 0.05, 0.02
    beta = 0.9
    setup = build_problem(data, lam1, lam2, kappa1=1.2)
    x1, x2, x3, y, w = _random_state(data, 14)
    x = BlockVector([x1, x2, np.array([x3])])

    got0 = mm_block_update(0, setup.surrogates[0], setup.spec, x, y, w, beta)
    ref0 = x1_update(data, x1, x2, x3, y, w, beta, lam1, kappa1=1.2)
    np.testing.assert_allclose(got0.x_new, ref0, rtol=1e-12, atol=1e-14)

    got1 = mm_block_update(1, setup.surrogates[1], setup.spec, x, y, w, beta)
    ref1 = x2_update(data, x1, x2, x3, y, w, beta, lam2)
    np.testing.assert_allclose(got1.x_new, ref1, rtol=1e-12, atol=1e-14)

    got2 = mm_block_update(2, setup.surrogates[2], setup.spec, x, y, w, beta)
    ref2 = x3_update(data, x1, x2, x3, y, w, beta)
    np.testing.assert_allclose(got2.x_new, [ref2], rtol=1e-12)


def test_x1_update_minimizes_its_subproblem():
    data = _toy_data(d=4, q=5, seed=3)
    lam1 = 0.1
    beta = 1.1
    setup = build_problem(data, lam1, 0.0, kappa1=1.3)
    x1, x2, x3, y, w = _random_state(data, 21)
    x = BlockVector([x1, x2, np.array([x3])])
    res = mm_block_update(0, setup.surrogates[0], setup.spec, x, y, w, beta)
    rng = make_rng(77)

    def sub_obj(v):
        return surrogate_value(
            setup.surrogates[0], setup.spec, 0, x, y, w, beta, v
        ) + lam1 * float(np.abs(v).sum())

    base = sub_obj(res.x_new)
    assert base <= sub_obj(x1) + 1e-10
    for scale in (0.05, 0.5, 2.0):
        for _ in range(60):
            assert base <= sub_obj(res.x_new + scale * rng.standard_normal(4)) + 1e-9


def test_relative_smoothness_certificate_for_block0():
    # The state-dependent constant must majorize the block-0 smooth part
    # relative to the quartic kernel everywhere, not just near the anchor.
    data = _toy_data(d=5, q=6, seed=4)
    kernel = quartic_kernel()
    rng = make_rng(100)
    setup = build_problem(data, 0.0, 0.0)
    for _ in range(200):
        x1 = rng.standard_normal(5) * float(1.0 + 2.0 * rng.random())
        x2 = rng.standard_normal(5)
        x3 = float(rng.standard_normal())
        y = rng.standard_normal(6)
        w = rng.standard_normal(6)
        beta = 0.2 + 2.0 * float(rng.random())
        v = x1 + rng.standard_normal(5) * float(3.0 * rng.random())
        x = BlockVector([x1, x2, np.array([x3])])
        ell = bregman_constant_x1(data, x2, x3, y, w, beta)
        psi_z = smooth_part_value(setup.spec, x, y, w, beta)
        psi_v = smooth_part_value(setup.spec, x.with_block(0, v), y, w, beta)
        grad_z = smooth_part_block_grad(setup.spec, 0, x, y, w, beta)
        gap = (
            psi_z
            + float(grad_z @ (v - x1))
            + ell * bregman_divergence(kernel, v, x1)
            - psi_v
        )
        assert gap >= -1e-8 * (1.0 + abs(psi_v))


def test_fitting_error_at_origin_is_log_two():
    data = _toy_data()
    got = fitting_error(data, np.zeros(data.d), np.zeros(data.d), 0.0, 0.5, 0.5)
    assert got == pytest.approx(math.log(2.0))
    # Penalties enter linearly with their weights.
    e1 = np.zeros(data.d)
    e1[0] = 2.0
    with_pen = fitting_error(data, e1, np.zeros(data.d), 0.0, 0.5, 0.25)
    loss, _ = logistic_h(data, phi_eval(data, e1, np.zeros(data.d), 0.0))
    assert with_pen == pytest.approx(loss + 1.0)


def test_default_beta():
    assert default_beta(100) == pytest.approx(0.025)


def test_initial_state_pinned_draw_order():
    data = _toy_data(d=3, q=5, seed=7)
    x, y, w = initial_state(data, seed=42)
    rng = make_rng(42)
    np.testing.assert_array_equal(x.blocks[0], rng.random(3))
    np.testing.assert_array_equal(x.blocks[1], rng.random(3))
    np.testing.assert_array_equal(x.blocks[2], rng.random(1))
    np.testing.assert_array_equal(y, rng.random(5))
    np.testing.assert_array_equal(w, np.zeros(5))
    x_again, _, _ = initial_state(data, seed=42)
    np.testing.assert_array_equal(x.concat(), x_again.concat())


def test_build_problem_wiring_and_validation():
    data = _toy_data()
    setup = build_problem(data, 0.01, 0.02)
    assert setup.spec.m == 3
    assert setup.spec.B.scale == -1.0
    assert setup.spec.h.lipschitz_const == pytest.approx(1.0 / (4.0 * data.q))
    assert setup.spec.lower_bound_hint == 0.0
    kinds = [s.kind.value for s in setup.surrogates]
    assert kinds == ["bregman", "lipschitz_gradient", "lipschitz_gradient"]
    x, y, w = initial_state(data, 0)
    col_sq = float(np.sum(data.column_norms**2))
    assert setup.surrogates[1].const_at(setup.spec, x, y, w, 2.0) == pytest.approx(
        2.0 * col_sq
    )
    assert setup.surrogates[2].const_at(setup.spec, x, y, w, 2.0) == pytest.approx(
        2.0 * data.q
    )
    with pytest.raises(ValueError):
        build_problem(data, -0.1, 0.0)
    with pytest.raises(ValueError):
        build_problem(data, 0.0, 0.0, kappa1=0.9)


def test_one_solver_iteration_equals_manual_cycle():
    data = _toy_data(d=5, q=8, seed=11)
    lam1, lam2 = 0.01, 0.03
    beta = default_beta(data.q)
    setup = build_problem(data, lam1, lam2)
    x0, y0, w0 = initial_state(data, seed=5)
    config = SolverConfig(beta=beta, max_outer_iters=1, diagnostics_level="off")
    res = run(setup.spec, setup.surrogates, x0, y0, w0, config)

    x1 = x1_update(
        data, x0.blocks[0], x0.blocks[1], x0.blocks[2][0], y0, w0, beta, lam1
    )
    x2 = x2_update(data, x1, x0.blocks[1], x0.blocks[2][0], y0, w0, beta, lam2)
    x3 = x3_update(data, x1, x2, x0.blocks[2][0], y0, w0, beta)
    phi_new = phi_eval(data, x1, x2, x3)
    y1, _, _ = y_update(setup.spec, phi_new, y0, w0, beta)
    w1 = dual_update(w0, phi_new - y1, beta)

    np.testing.assert_allclose(res.x.blocks[0], x1, rtol=1e-14)
    np.testing.assert_allclose(res.x.blocks[1], x2, rtol=1e-14)
    np.testing.assert_allclose(res.x.blocks[2], [x3], rtol=1e-14)
    np.testing.assert_allclose(res.y, y1, rtol=1e-14)
    np.testing.assert_allclose(res.w, w1, rtol=1e-14)


def test_solver_run_on_logistic_is_clean_and_descends():
    data = _toy_data(d=20, q=12, seed=9)
    setup = build_problem(data, 0.001, 0.1)
    beta = default_beta(data.q)
    ok, _, _ = check_beta_condition(setup.spec, beta, 1.5)
    assert ok
    x0, y0, w0 = initial_state(data, seed=1)
    config = SolverConfig(
        beta=beta,
        delta_tilde=1.5,
        max_outer_iters=150,
        diagnostics_level="full_lyapunov",
    )
    res = run(setup.spec, setup.surrogates, x0, y0, w0, config, fit_fn=setup.fitting)
    assert res.violations == []
    assert res.stop_reason == "max_iters"
    start_fit = setup.fitting(x0)
    assert res.trace[-1].fit < start_fit
    assert math.isfinite(res.lagrangian)
    assert res.min_eta >= 1e-8


def test_normalized_real_shape_smoke():
    # Unnormalized columns are fine for the math; the benchmark path always
    # normalizes first. Check the two agree once normalization is applied.
    rng = make_rng(31)
    A = rng.random((4, 3)) + 0.5
    data = normalize_columns(Dataset(A=A, b=np.array([1.0, -1.0, 1.0])))
    np.testing.assert_allclose(data.column_norms, np.ones(3), rtol=1e-12)
    setup = build_problem(data, 0.01, 0.01)
    assert setup.spec.phi.out_dim == 3
