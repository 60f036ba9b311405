import numpy as np
import pytest

from alefsi.assembly import FsiState
from alefsi.driver import make_linsolver
from alefsi.config import SolverConfig
from alefsi.errors import ConfigError, NonconvergenceError
from alefsi.materials import MaterialParams
from alefsi.newton import (
    CRANK_NICOLSON,
    IMPLICIT,
    SHIFTED_CN,
    ThetaScheme,
    advance,
    newton_core,
)

PARAMS = MaterialParams()


class _Dense:
    stats = {"iterations": 1}

    def setup(self, A):
        self._A = np.atleast_2d(np.asarray(A, dtype=float))

    def solve(self, b):
        return np.linalg.solve(self._A, np.atleast_1d(b))


class TestThetaScheme:
    def test_variants(self):
        assert ThetaScheme(IMPLICIT, 0.1).theta == 1.0
        assert ThetaScheme(CRANK_NICOLSON, 0.1).theta == 0.5
        assert ThetaScheme(SHIFTED_CN, 0.005).theta == 0.5 + 0.005

    def test_shifted_follows_dt(self):
        s = ThetaScheme(SHIFTED_CN, 0.1)
        s.dt = 0.02
        assert s.theta == 0.52

    def test_validation(self):
        with pytest.raises(ConfigError):
            ThetaScheme("nope", 0.1)
        with pytest.raises(ConfigError):
            ThetaScheme(IMPLICIT, -1.0)


def theta_step_residual(x, x0, dt, theta):
    # one-step-theta discretization of u' = -u
    return (x - x0) + dt * (theta * x + (1.0 - theta) * x0)


class TestNewtonCore:
    def test_zero_residual_immediate(self):
        x, stats = newton_core(lambda x: np.zeros(2), lambda x: np.eye(2), np.ones(2), _Dense())
        assert stats.iterations == 0
        assert np.allclose(x, 1.0)

    def test_linear_problem_one_iteration(self):
        A = np.array([[2.0, 1.0], [0.0, 3.0]])
        b = np.array([1.0, 2.0])
        x, stats = newton_core(lambda x: A @ x - b, lambda x: A, np.zeros(2), _Dense())
        assert stats.iterations == 1
        assert np.allclose(x, np.linalg.solve(A, b))

    def test_quadratic_convergence_with_full_reassembly(self):
        # residual r(x) = x + x^3 - b; qn_factor 0 forces reassembly each step
        rng = np.random.default_rng(0)
        b = rng.standard_normal(5)

        def r(x):
            return x + x**3 - b

        def jac(x):
            return np.diag(1.0 + 3.0 * x**2)

        x, stats = newton_core(r, jac, np.zeros(5), _Dense(), tol_rel=1e-14, qn_factor=0.0)
        res = stats.residuals
        assert stats.reassemblies == stats.iterations
        # quadratic phase: each residual is bounded by C times the square of
        # the previous one, with one common constant
        tail = [v for v in res if 0.0 < v < 0.1]
        assert len(tail) >= 2
        C = max(r2 / r1**2 for r1, r2 in zip(tail, tail[1:]))
        assert C < 1e3

    def test_quasi_newton_reuses_jacobian(self):
        calls = {"jac": 0}

        def r(x):
            return 0.5 * (x - 2.0)

        def jac(x):
            calls["jac"] += 1
            return np.array([[1.0]])  # wrong by 2x: linear contraction

        x, stats = newton_core(r, jac, np.zeros(1), _Dense(), tol_rel=1e-6, qn_factor=0.9)
        assert calls["jac"] == 1
        assert stats.reassemblies == 1
        assert abs(x[0] - 2.0) < 1e-5

    def test_nonconvergence_raises_with_stats(self):
        def r(x):
            return np.array([1.0 + x[0] ** 2])  # no root

        with pytest.raises(NonconvergenceError) as exc:
            newton_core(
                r, lambda x: np.array([[2.0 * x[0] + 1e-2]]), np.ones(1), _Dense(), max_iter=5
            )
        assert exc.value.stats.iterations == 5


class TestOdeAdapter:
    def solve_ode(self, theta, dt, t_end):
        x = np.array([1.0])
        t = 0.0
        while t < t_end - 1e-12:
            x0 = x.copy()
            x, _ = newton_core(
                lambda y: theta_step_residual(y, x0, dt, theta),
                lambda y: np.array([[1.0 + dt * theta]]),
                x0,
                _Dense(),
                tol_rel=1e-14,
            )
            t += dt
        return x[0]

    def test_implicit_euler_closed_form(self):
        dt = 0.1
        got = self.solve_ode(1.0, dt, dt)
        assert got == pytest.approx(1.0 / (1.0 + dt), rel=1e-12)

    def test_crank_nicolson_second_order(self):
        exact = np.exp(-1.0)
        e1 = abs(self.solve_ode(0.5, 0.1, 1.0) - exact)
        e2 = abs(self.solve_ode(0.5, 0.05, 1.0) - exact)
        assert 3.3 < e1 / e2 < 4.7


class TestAdvance:
    def test_zero_inflow_stays_zero(self, fsi2_dofmap_q1):
        dm = fsi2_dofmap_q1
        scheme = ThetaScheme(SHIFTED_CN, 0.005)
        linsolver = make_linsolver(SolverConfig())
        state = FsiState.zero(dm)
        for step in range(1, 4):
            state, stats = advance(state, step * 0.005, scheme, PARAMS, linsolver, dm)
            assert stats.iterations == 0
            assert np.all(state.vec == 0.0)
        assert state.t == pytest.approx(0.015)
