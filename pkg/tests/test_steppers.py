import numpy as np
import pytest

from conservo import (
    DomainViolation,
    InvalidParams,
    SingularMatrix,
    StepperConfig,
    SystemSpec,
    base_scheme_f_tau,
    integrate,
    mn_correct,
    mn_correct_m1,
    mn_correct_m2,
    predictor_improved_euler,
    step_implicit_midpoint,
    step_mn,
    step_rk4,
    telescoping_multiplier,
)
from conservo._jit import vector_kernel
from conservo.linalg import kernel_basis
from conservo.steppers import MN_VARIANTS
from conservo.systems import EXPERIMENTS, make_lorenz, make_lv2, make_lv3

from conftest import (
    anywhere,
    first_coordinate,
    oscillator,
    rigid_body,
    rotation_exact,
    zero_system,
)


@vector_kernel
def linear_source(t, x, p):
    # x' = A x with A stored row-major in p
    n = x.shape[0]
    return p.reshape(n, n) @ x


@vector_kernel
def constant_source(t, x, p):
    return p.copy()


def linear_system(a):
    a = np.asarray(a, dtype=float)
    return SystemSpec("linear", a.shape[0], 1, linear_source, first_coordinate, anywhere,
                      np.ascontiguousarray(a.ravel()))


def random_triple(rng, m, n):
    u, _ = np.linalg.qr(rng.standard_normal((m, m)))
    v, _ = np.linalg.qr(rng.standard_normal((n, m)))
    sigma = np.geomspace(1.0, 0.01, m) if m > 1 else np.ones(1)
    return (u * sigma) @ v.T, rng.standard_normal(n), rng.standard_normal(m)


class TestPredictor:
    def test_zero_field(self):
        y = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(predictor_improved_euler(zero_system(), 0.0, y, 0.3), y)

    def test_constant_field_is_exact(self):
        sys = SystemSpec("const", 2, 1, constant_source, first_coordinate, anywhere,
                         np.array([2.0, -1.0]))
        np.testing.assert_allclose(predictor_improved_euler(sys, 0.0, [1.0, 1.0], 0.25),
                                   [1.5, 0.75], rtol=1e-15)

    def test_exponential_hand_value(self):
        sys = linear_system(np.eye(2))
        x = predictor_improved_euler(sys, 0.0, [1.0, 1.0], 0.1)
        np.testing.assert_allclose(x, [1.105, 1.105], rtol=1e-15)

    def test_leaving_domain(self):
        sys = make_lv2()
        with pytest.raises(DomainViolation):
            predictor_improved_euler(sys, 0.0, [0.01, 5.0], 10.0)


class TestBaseScheme:
    def test_constant_field(self):
        sys = SystemSpec("const", 2, 1, constant_source, first_coordinate, anywhere,
                         np.array([2.0, -1.0]))
        for scheme in ("improved_euler", "trapezoidal"):
            np.testing.assert_allclose(
                base_scheme_f_tau(sys, 0.0, [5.0, 5.0], [1.0, 1.0], 0.1, scheme), [2.0, -1.0])

    def test_linear_field_expansion(self):
        a = np.array([[0.5, -1.0], [2.0, 0.25]])
        tau = 0.2
        x_old = np.array([0.7, -1.3])
        expected = (a + 0.5 * tau * a @ a) @ x_old
        got = base_scheme_f_tau(linear_system(a), 0.0, [9.0, 9.0], x_old, tau)
        np.testing.assert_allclose(got, expected, rtol=1e-14)

    def test_trapezoidal_on_fixed_state(self):
        sys = oscillator()
        x = np.array([0.3, 0.4])
        np.testing.assert_allclose(base_scheme_f_tau(sys, 0.0, x, x, 0.1, "trapezoidal"),
                                   sys.source(0.0, x))

    def test_unknown_scheme(self, rotation):
        with pytest.raises(InvalidParams):
            base_scheme_f_tau(rotation, 0.0, [1.0, 0.0], [1.0, 0.0], 0.1, "euler")


class TestMnCorrect:
    def test_consistent_input_is_unchanged(self):
        lam = np.array([[1.0, 2.0, 0.0]])
        f = np.array([2.0, -1.0, 5.0])
        for variant in MN_VARIANTS:
            f_mn, kappa = mn_correct(lam, f, [0.0], variant)
            np.testing.assert_allclose(f_mn, f, atol=1e-15)
            assert kappa == 1.0

    def test_kernel_projection(self):
        for variant in MN_VARIANTS:
            f_mn, _ = mn_correct(np.array([[1.0, 0.0]]), [2.0, 3.0], [0.0], variant)
            np.testing.assert_allclose(f_mn, [0.0, 3.0], atol=1e-15)

    def test_variants_agree_and_satisfy_constraint(self, rng):
        for _ in range(1000):
            m = int(rng.integers(1, 5))
            n = m + int(rng.integers(1, 6))
            lam, f, dt = random_triple(rng, m, n)
            out = {v: mn_correct(lam, f, dt, v) for v in MN_VARIANTS}
            ref = out["direct"][0]
            scale = np.linalg.norm(ref)
            for v, (f_mn, _) in out.items():
                assert np.linalg.norm(f_mn - ref) <= 1e-10 * scale, v
                assert np.abs(lam @ f_mn + dt).max() <= 1e-11 * max(1.0, np.abs(dt).max())

    def test_kappa_per_variant(self, rng):
        lam, f, dt = random_triple(rng, 3, 6)
        cond_a = np.linalg.cond(lam)
        assert mn_correct(lam, f, dt, "mixed_svd")[1] == pytest.approx(cond_a, rel=1e-10)
        for v in ("direct", "mixed"):
            assert mn_correct(lam, f, dt, v)[1] == pytest.approx(cond_a ** 2, rel=1e-8)

    def test_rank_loss(self):
        lam = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
        for v in MN_VARIANTS:
            with pytest.raises(SingularMatrix):
                mn_correct(lam, [1.0, 1.0, 1.0], [0.0, 0.0], v)

    def test_unknown_variant(self):
        with pytest.raises(InvalidParams):
            mn_correct(np.eye(2)[:1], [1.0, 1.0], [0.0], "rk4")

    def test_minimal_norm(self, rng):
        lam, f, dt = random_triple(rng, 2, 6)
        f_mn, _ = mn_correct(lam, f, dt, "mixed_svd")
        kern = kernel_basis(lam)
        base = np.linalg.norm(f - f_mn)
        for _ in range(100):
            g = f_mn + kern @ rng.standard_normal(kern.shape[1])
            assert base <= np.linalg.norm(f - g) + 1e-14


class TestClosedForms:
    def test_m1_unit_row(self):
        np.testing.assert_array_equal(mn_correct_m1([1.0, 0.0], [2.0, 3.0], 0.0), [0.0, 3.0])

    def test_m1_scalar_projection_form(self, rng):
        d = rng.standard_normal(5)
        f = rng.standard_normal(5)
        alpha = d @ f / (d @ d)
        np.testing.assert_allclose(mn_correct_m1(d, f, 0.0), f - alpha * d, rtol=1e-14)

    def test_m1_matches_generic(self, rng):
        d, f = rng.standard_normal(4), rng.standard_normal(4)
        dt = rng.standard_normal()
        ref, _ = mn_correct(d[None, :], f, [dt], "direct")
        np.testing.assert_allclose(mn_correct_m1(d, f, dt), ref, rtol=1e-13, atol=1e-15)

    def test_m1_vanishing_row(self):
        with pytest.raises(SingularMatrix):
            mn_correct_m1([0.0, 0.0], [1.0, 2.0], 0.0)

    def test_m2_coordinate_projection(self):
        e = np.eye(4)
        np.testing.assert_allclose(mn_correct_m2((e[0], e[1]), [1.0, 2.0, 3.0, 4.0], [0.0, 0.0]),
                                   [0.0, 0.0, 3.0, 4.0], atol=1e-15)

    def test_m2_parallel_rows(self):
        with pytest.raises(SingularMatrix):
            mn_correct_m2(([1.0, 2.0, 3.0], [2.0, 4.0, 6.0]), [1.0, 1.0, 1.0], [0.0, 0.0])

    def test_m2_matches_generic_on_lv3(self, rng):
        sys = make_lv3()
        for _ in range(20):
            x_old = rng.uniform(0.1, 2.0, 3)
            x_new = x_old * rng.uniform(0.9, 1.1, 3)
            lam = telescoping_multiplier(sys, 0.0, x_new, x_old).matrix
            f = sys.source(0.0, x_old)
            ref, _ = mn_correct(lam, f, [0.0, 0.0], "mixed")
            got = mn_correct_m2((lam[0], lam[1]), f, [0.0, 0.0])
            assert np.linalg.norm(got - ref) <= 1e-11 * np.linalg.norm(ref)


class TestStepMn:
    def test_rotation_stays_on_circle(self, rotation):
        for variant in MN_VARIANTS:
            cfg = StepperConfig(tau=0.1, variant=variant)
            x, diag = step_mn(rotation, cfg, 0.0, [1.0, 0.0], [1.0])
            assert diag.converged
            assert abs(x @ x - 1.0) < 1e-15
            assert diag.psi_defect[0] < 1e-15
            assert diag.kappa == 1.0
            assert 1 <= diag.iterations <= cfg.max_iters

    def test_zero_field_one_iteration(self):
        sys = zero_system()
        y = np.array([0.5, 1.0, -2.0])
        x, diag = step_mn(sys, StepperConfig(tau=0.5), 0.0, y, [0.5])
        np.testing.assert_array_equal(x, y)
        assert diag.iterations == 1 and diag.converged

    def test_rigid_body_two_invariants(self):
        sys = rigid_body()
        y = np.array([0.3, 0.9, -0.4])
        ref = sys.conserved(0.0, y)
        for variant in MN_VARIANTS:
            cfg = StepperConfig(tau=0.05, variant=variant, delta=1e-14)
            x = y
            for k in range(50):
                x, diag = step_mn(sys, cfg, k * cfg.tau, x, ref)
                assert diag.converged
                assert np.all(diag.psi_defect < cfg.delta)
                assert diag.kappa >= 1.0

    def test_time_dependent_invariant(self):
        sys = make_lorenz()
        exp = EXPERIMENTS["lorenz"]
        _, x = exp.build(0)
        ref = sys.conserved(0.0, x)
        cfg = StepperConfig(tau=exp.tau, delta=1e-12, epsilon=1e-13)
        for k in range(100):
            x, diag = step_mn(sys, cfg, k * cfg.tau, x, ref)
            assert diag.converged
        assert abs(sys.conserved(100 * cfg.tau, x)[0] - ref[0]) < 1e-12

    def test_variants_agree_per_step(self, rng):
        for sys, y in ((rigid_body(), np.array([0.3, 0.9, -0.4])),
                       (make_lv2(), np.array([0.3, 0.7]))):
            ref = sys.conserved(0.0, y)
            xs = [step_mn(sys, StepperConfig(tau=0.05, variant=v), 0.0, y, ref)[0]
                  for v in MN_VARIANTS]
            for x in xs[1:]:
                assert np.linalg.norm(x - xs[0]) <= 1e-9 * np.linalg.norm(xs[0])

    def test_iterations_do_not_grow_as_tau_shrinks(self, rotation):
        counts = []
        for tau in (0.2, 0.1, 0.05, 0.025):
            _, diag = step_mn(rotation, StepperConfig(tau=tau), 0.0, [1.0, 0.0], [1.0])
            counts.append(diag.iterations)
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_iteration_cap(self, rotation):
        cfg = StepperConfig(tau=0.1, max_iters=1)
        x, diag = step_mn(rotation, cfg, 0.0, [1.0, 0.0], [1.0])
        assert diag.iterations == 1
        assert not diag.converged
        assert np.all(np.isfinite(x))

    def test_cap_returns_level_set_iterate(self, rotation):
        # the increment test can never pass, the loose level-set test can
        cfg = StepperConfig(tau=0.1, delta=1e-6, epsilon=1e-300, max_iters=4)
        x, diag = step_mn(rotation, cfg, 0.0, [1.0, 0.0], [1.0])
        assert not diag.converged
        assert diag.iterations == 4
        assert abs(x @ x - 1.0) < 1e-6
        assert diag.psi_defect[0] < 1e-6

    def test_rejects_baseline_variant(self, rotation):
        with pytest.raises(InvalidParams):
            step_mn(rotation, StepperConfig(tau=0.1, variant="rk4"), 0.0, [1.0, 0.0], [1.0])

    def test_domain_violation(self):
        sys = make_lv2()
        with pytest.raises(DomainViolation):
            step_mn(sys, StepperConfig(tau=10.0), 0.0, [0.01, 5.0], [0.0])

    def test_trapezoidal_base_scheme(self, rotation):
        cfg = StepperConfig(tau=0.1, base_scheme="trapezoidal")
        x, diag = step_mn(rotation, cfg, 0.0, [1.0, 0.0], [1.0])
        assert diag.converged and diag.psi_defect[0] < 1e-15
        np.testing.assert_allclose(x, rotation_exact([1.0, 0.0], 0.1), atol=1e-3)


@pytest.mark.parametrize("name,t_final", [("lv2", 20.0), ("arenstorf", 0.01),
                                          ("lorenz", 0.2), ("lv3", 5.0)])
def test_fast_path_matches_generic(name, t_final):
    exp = EXPERIMENTS[name]
    sys, x0 = exp.build(0)
    runs = []
    for fast in (False, True):
        cfg = StepperConfig(tau=exp.tau, delta=exp.delta, epsilon=exp.epsilon,
                            variant="mixed", fast_path=fast)
        traj = integrate(sys, cfg, x0, exp.t0, t_final)
        assert not traj.truncated
        runs.append(traj.states)
    scale = np.abs(runs[0]).max()
    assert np.abs(runs[1] - runs[0]).max() <= 1e-11 * scale


class TestRk4:
    def test_zero_field(self):
        y = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(step_rk4(zero_system(), 0.0, y, 0.5), y)

    def test_constant_field(self):
        sys = SystemSpec("const", 2, 1, constant_source, first_coordinate, anywhere,
                         np.array([1.0, 1.0]))
        np.testing.assert_allclose(step_rk4(sys, 0.0, [2.0, 3.0], 0.25), [2.25, 3.25])

    def test_taylor_polynomial(self):
        tau = 0.1
        taylor = 1 + tau + tau ** 2 / 2 + tau ** 3 / 6 + tau ** 4 / 24
        x = step_rk4(linear_system(np.eye(2)), 0.0, [1.0, 1.0], tau)
        np.testing.assert_allclose(x, [taylor, taylor], rtol=1e-15)
        assert x[0] == pytest.approx(1.1051708333333333, abs=1e-15)
        assert abs(x[0] - np.exp(tau)) < 1e-7

    def test_fourth_order_local_error(self, rotation):
        errs = []
        for tau in (0.1, 0.05):
            errs.append(np.abs(step_rk4(rotation, 0.0, [1.0, 0.0], tau)
                               - rotation_exact([1.0, 0.0], tau)).max())
        assert np.log2(errs[0] / errs[1]) == pytest.approx(5.0, abs=0.2)

    def test_domain_violation(self):
        with pytest.raises(DomainViolation):
            step_rk4(make_lv2(), 0.0, [0.01, 5.0], 10.0)


class TestImplicitMidpoint:
    def test_zero_field(self):
        y = np.array([1.0, 2.0, 3.0])
        x, diag = step_implicit_midpoint(zero_system(), StepperConfig(tau=0.5), 0.0, y, [1.0])
        np.testing.assert_array_equal(x, y)
        assert diag.converged

    def test_cayley_map(self):
        lam, tau = -0.8, 0.1
        sys = linear_system(lam * np.eye(2))
        cfg = StepperConfig(tau=tau, epsilon=1e-15, max_iters=50)
        x, diag = step_implicit_midpoint(sys, cfg, 0.0, [1.0, 2.0], [1.0])
        cayley = (1 + tau * lam / 2) / (1 - tau * lam / 2)
        np.testing.assert_allclose(x, cayley * np.array([1.0, 2.0]), rtol=1e-14)
        assert diag.converged
        assert np.isnan(diag.kappa)

    def test_preserves_quadratic_invariant(self):
        sys = oscillator()
        cfg = StepperConfig(tau=0.1, epsilon=1e-15, max_iters=50)
        y = np.array([0.6, 0.8])
        x, diag = step_implicit_midpoint(sys, cfg, 0.0, y, [1.0])
        assert abs(np.linalg.norm(x) - 1.0) < 1e-14
        assert diag.psi_defect[0] < 1e-14

    def test_defect_reported_not_enforced(self, rotation):
        cfg = StepperConfig(tau=0.1, max_iters=50)
        _, diag = step_implicit_midpoint(rotation, cfg, 0.0, [1.0, 0.0], [2.0])
        assert diag.converged
        assert diag.psi_defect[0] == pytest.approx(1.0, abs=1e-14)


class TestStepperConfig:
    @pytest.mark.parametrize("kwargs", [
        {"tau": 0.0}, {"tau": -1.0}, {"tau": 0.1, "delta": 0.0}, {"tau": 0.1, "epsilon": -1.0},
        {"tau": 0.1, "max_iters": 0}, {"tau": 0.1, "variant": "euler"},
        {"tau": 0.1, "base_scheme": "rk4"},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidParams):
            StepperConfig(**kwargs)

    def test_defaults(self):
        cfg = StepperConfig(tau=0.1)
        assert (cfg.delta, cfg.epsilon, cfg.max_iters) == (1e-15, 1e-15, 20)
        assert cfg.variant == "direct" and cfg.base_scheme == "improved_euler"
        assert not cfg.fast_path
