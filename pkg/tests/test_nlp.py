"""Interior-point NLP solver on small problems with independent oracles."""

import numpy as np
import pytest
from scipy import optimize, sparse

from distdelay import nlp


def quadratic_problem():
    """min (w0-2)^2 + (w1-2)^2  s.t.  w0 + w1 = 2; solution (1, 1)."""
    jac = sparse.csr_matrix(np.array([[1.0, 1.0]]))
    return nlp.NlpProblem(
        n=2,
        objective=lambda w: float((w[0] - 2.0) ** 2 + (w[1] - 2.0) ** 2),
        gradient=lambda w: 2.0 * (w - 2.0),
        residual=lambda w: np.array([w[0] + w[1] - 2.0]),
        jacobian=lambda w: jac,
        hess=lambda w, y: sparse.identity(2, format="csc") * 2.0,
    )


def bound_problem():
    """min (w-2)^2  s.t.  w <= 1; solution w = 1."""
    return nlp.NlpProblem(
        n=1,
        objective=lambda w: float((w[0] - 2.0) ** 2),
        gradient=lambda w: 2.0 * (w - 2.0),
        lb=np.array([-5.0]),
        ub=np.array([1.0]),
        hess=lambda w, y: sparse.identity(1, format="csc") * 2.0,
    )


def rosenbrock_circle_problem():
    """Rosenbrock restricted to the unit circle."""

    def objective(w):
        return float((1.0 - w[0]) ** 2 + 100.0 * (w[1] - w[0] ** 2) ** 2)

    def gradient(w):
        x, y = w
        return np.array([
            -2.0 * (1.0 - x) - 400.0 * x * (y - x * x),
            200.0 * (y - x * x),
        ])

    def hess(w, y_mult):
        x, y = w
        h = np.array([
            [2.0 - 400.0 * (y - 3.0 * x * x), -400.0 * x],
            [-400.0 * x, 200.0],
        ])
        h += 2.0 * float(y_mult[0]) * np.eye(2)
        return sparse.csc_matrix(h)

    return nlp.NlpProblem(
        n=2,
        objective=objective,
        gradient=gradient,
        residual=lambda w: np.array([w @ w - 1.0]),
        jacobian=lambda w: sparse.csr_matrix(2.0 * w[None, :]),
        hess=hess,
    )


class TestEqualityQp:
    def test_solution(self):
        w, report = nlp.solve(quadratic_problem(), np.array([5.0, -3.0]),
                              nlp.SolverOptions(tol=1e-10))
        assert report.converged
        np.testing.assert_allclose(w, [1.0, 1.0], atol=1e-8)

    def test_report_fields(self):
        w, report = nlp.solve(quadratic_problem(), np.array([5.0, -3.0]),
                              nlp.SolverOptions(tol=1e-10))
        assert report.status == "converged"
        assert report.feasibility < 1e-10
        assert report.stationarity < 1e-10
        assert report.objective == pytest.approx(2.0, abs=1e-7)
        assert report.iterations >= 1
        assert report.wall_time >= 0.0


class TestBounds:
    def test_active_upper_bound(self):
        # complementarity cannot fall below the barrier floor mu_min, so the
        # tolerance for bound-constrained problems must sit above it
        w, report = nlp.solve(bound_problem(), np.array([0.0]),
                              nlp.SolverOptions(tol=1e-8))
        assert report.converged
        assert w[0] == pytest.approx(1.0, abs=1e-7)

    def test_interior_solution_unclipped(self):
        problem = nlp.NlpProblem(
            n=1,
            objective=lambda w: float((w[0] - 0.25) ** 2),
            gradient=lambda w: 2.0 * (w - 0.25),
            lb=np.array([-5.0]),
            ub=np.array([1.0]),
            hess=lambda w, y: sparse.identity(1, format="csc") * 2.0,
        )
        w, report = nlp.solve(problem, np.array([0.9]),
                              nlp.SolverOptions(tol=1e-8))
        assert report.converged
        assert w[0] == pytest.approx(0.25, abs=1e-7)

    def test_start_outside_bounds_is_projected(self):
        w, report = nlp.solve(bound_problem(), np.array([40.0]),
                              nlp.SolverOptions(tol=1e-8))
        assert report.converged
        assert w[0] == pytest.approx(1.0, abs=1e-7)


class TestRosenbrockOnCircle:
    def oracle(self):
        # independent 1-D oracle: parameterize the circle by angle and
        # polish the best grid angle with a scalar minimizer
        def f(theta):
            x, y = np.cos(theta), np.sin(theta)
            return (1.0 - x) ** 2 + 100.0 * (y - x * x) ** 2

        thetas = np.linspace(-np.pi, np.pi, 2001)
        best = thetas[np.argmin([f(t) for t in thetas])]
        res = optimize.minimize_scalar(f, bounds=(best - 0.01, best + 0.01),
                                       method="bounded",
                                       options={"xatol": 1e-12})
        return np.array([np.cos(res.x), np.sin(res.x)]), float(res.fun)

    def test_matches_angle_parameterized_oracle(self):
        w_star, f_star = self.oracle()
        w, report = nlp.solve(rosenbrock_circle_problem(),
                              np.array([0.5, 0.5]),
                              nlp.SolverOptions(tol=1e-12, max_iter=400))
        assert report.converged
        np.testing.assert_allclose(w, w_star, atol=1e-6)
        assert report.objective == pytest.approx(f_star, abs=1e-9)


class TestKktResiduals:
    def test_zero_at_qp_solution(self):
        problem = quadratic_problem()
        w = np.array([1.0, 1.0])
        y = np.array([2.0])  # gradient (-2, -2) + y * (1, 1) = 0
        stat, feas, comp = nlp.kkt_residuals(problem, w, y,
                                             np.zeros(2), np.zeros(2), mu=0.0)
        assert stat < 1e-12
        assert feas < 1e-12
        assert comp == 0.0

    def test_feasibility_is_constraint_norm(self):
        problem = quadratic_problem()
        w = np.array([4.0, 3.0])
        _, feas, _ = nlp.kkt_residuals(problem, w, np.zeros(1),
                                       np.zeros(2), np.zeros(2), mu=0.0)
        assert feas == pytest.approx(abs(w[0] + w[1] - 2.0), rel=1e-14)

    def test_bound_multiplier_enters_stationarity(self):
        problem = bound_problem()
        w = np.array([1.0 - 1e-9])
        z_ub = np.array([2.0])  # gradient -2 at the bound; z_ub balances it
        stat, _, _ = nlp.kkt_residuals(problem, w, np.zeros(0),
                                       np.zeros(1), z_ub, mu=0.0)
        assert stat < 1e-8


class TestDeterminism:
    def test_identical_runs_bitwise_equal(self):
        opts = nlp.SolverOptions(tol=1e-10)
        w1, r1 = nlp.solve(rosenbrock_circle_problem(), np.array([0.5, 0.5]), opts)
        w2, r2 = nlp.solve(rosenbrock_circle_problem(), np.array([0.5, 0.5]), opts)
        np.testing.assert_array_equal(w1, w2)
        assert r1.iterations == r2.iterations
        assert r1.objective == r2.objective

    def test_permuted_variables_give_permuted_solution(self):
        # same QP with the two variables swapped but asymmetric targets
        def make(flip):
            t = np.array([3.0, 1.0][::-1] if flip else [3.0, 1.0])
            jac = sparse.csr_matrix(np.array([[1.0, 1.0]]))
            return nlp.NlpProblem(
                n=2,
                objective=lambda w: float(np.sum((w - t) ** 2)),
                gradient=lambda w: 2.0 * (w - t),
                residual=lambda w: np.array([w[0] + w[1] - 2.0]),
                jacobian=lambda w: jac,
                hess=lambda w, y: sparse.identity(2, format="csc") * 2.0,
            )

        w_a, _ = nlp.solve(make(False), np.array([0.3, -0.8]),
                           nlp.SolverOptions(tol=1e-11))
        w_b, _ = nlp.solve(make(True), np.array([-0.8, 0.3]),
                           nlp.SolverOptions(tol=1e-11))
        np.testing.assert_allclose(w_a, w_b[::-1], atol=1e-9)


class TestOptions:
    def test_iteration_limit_status(self):
        w, report = nlp.solve(rosenbrock_circle_problem(),
                              np.array([0.5, 0.5]),
                              nlp.SolverOptions(tol=1e-12, max_iter=2))
        assert not report.converged
        assert report.status == "iteration-limit"

    def test_option_validation(self):
        with pytest.raises(ValueError):
            nlp.SolverOptions(tol=0.0)
        with pytest.raises(ValueError):
            nlp.SolverOptions(max_iter=0)

    def test_log_callback_receives_lines(self):
        lines = []
        nlp.solve(quadratic_problem(), np.array([5.0, -3.0]),
                  nlp.SolverOptions(tol=1e-10, log=lines.append))
        assert len(lines) >= 2
        assert "objective" in lines[0]
