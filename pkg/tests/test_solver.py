import math

from unittest.mock import MagicMock, patch

import numpy as np
import pytest

from scipy.sparse.linalg import aslinearoperator

from dirlap.config import SamplingConfig, SolverConfig
from dirlap.core import DirectedLaplacian, SparseGraph, normalize, validate_laplacian
from dirlap.events import ChainLevelEvent, EventBus, SolveEvent
from dirlap.exceptions import (
    DemandProjectedWarning,
    NonFiniteError,
    NotEulerianError,
    NotStronglyConnectedError,
    RecursionBudgetExceededError,
)
from dirlap.generators import (
    bidirected_complete,
    bidirected_path,
    directed_cycle,
    random_demand,
    random_eulerian,
)
from dirlap.oracle import (
    approx_norm,
    dense,
    dense_pinv,
    generalized_eigs,
    lambda_star,
    materialize,
    pseudoinverse_error,
    u_norm,
)
from dirlap.solver import (
    CHAIN_ALPHA,
    ImplicitOperator,
    OperatorBudget,
    base_solver,
    build_chain,
    default_inner_solver,
    estimate_lambda,
    identity_minus_walk,
    precon_richardson,
    prepare_demand,
    richardson_operator,
    scaled_identity,
    solve_eulerian,
    solve_recursive,
)


def _relative_error(laplacian: DirectedLaplacian, x, expected) -> float:
    u = (dense(laplacian) + dense(laplacian).T) / 2
    return u_norm(x - expected, u) / u_norm(expected, u)


class TestOperatorBudget:
    def test_charge(self):
        budget = OperatorBudget(3)
        budget.charge()
        budget.charge(2)
        assert budget.used == 3
        with pytest.raises(RecursionBudgetExceededError) as exc_info:
            budget.charge()
        assert exc_info.value.details == {"limit": 3, "used": 4}

    @pytest.mark.parametrize(
        "d, expected",
        [(0, 20.0), (1, 20.0), (4, 20.0 * 2.0 ** (3 * math.sqrt(4 * math.log(4))))],
        ids=["empty chain", "single level", "four levels"],
    )
    def test_for_chain(self, d, expected):
        assert OperatorBudget.for_chain(10, d, 2.0).limit == pytest.approx(expected)

    def test_unlimited(self):
        budget = OperatorBudget()
        budget.charge(10**9)
        assert budget.used == 10**9


class TestImplicitOperator:
    def test_kernel_projection(self):
        kernel = np.ones(4) / 2
        operator = scaled_identity(4, 3.0, kernel)
        result = operator.matvec(np.array([1.0, 2.0, 3.0, 4.0]))
        np.testing.assert_allclose(result, 3.0 * np.array([-1.5, -0.5, 0.5, 1.5]))
        assert abs(kernel @ result) < 1e-12

    def test_identity_minus_walk_charges_budget(self, eulerian: DirectedLaplacian):
        walk = normalize(eulerian)
        budget = OperatorBudget()
        operator = identity_minus_walk(walk.walk, walk.kernel, budget)
        x = walk.kernel.copy()
        np.testing.assert_allclose(operator.apply(x), 0.0, atol=1e-12)
        operator.apply(np.ones(eulerian.n))
        assert budget.used == 2
        assert operator.cost == 1

    def test_repr(self):
        operator = ImplicitOperator(lambda x: x, 3, name="id")
        assert repr(operator) == "ImplicitOperator('id', n=3, cost=0)"


class TestRichardson:
    def test_zero_iterations(self):
        m = aslinearoperator(np.diag([1.0, 2.0]))
        result = precon_richardson(m, m, np.array([1.0, 1.0]), 1.0, 0)
        np.testing.assert_array_equal(result, [0.0, 0.0])

    def test_first_step_is_preconditioned_demand(self):
        m = aslinearoperator(np.diag([1.0, 2.0]))
        z = aslinearoperator(0.5 * np.eye(2))
        result = precon_richardson(m, z, np.array([1.0, 4.0]), 0.8, 1)
        np.testing.assert_allclose(result, [0.4, 1.6])

    def test_converges(self):
        matrix = np.array([[2.0, 0.5, 0.0], [0.5, 3.0, 0.5], [0.0, 0.5, 2.5]])
        b = np.array([1.0, -2.0, 0.5])
        z = aslinearoperator(np.eye(3) / 4)
        result = precon_richardson(aslinearoperator(matrix), z, b, 1.0, 200)
        np.testing.assert_allclose(result, np.linalg.solve(matrix, b), atol=1e-10)

    def test_is_linear(self):
        m = aslinearoperator(np.array([[2.0, 1.0], [0.0, 1.5]]))
        z = aslinearoperator(np.eye(2) / 3)
        a, b = np.array([1.0, 2.0]), np.array([-3.0, 0.5])
        combined = precon_richardson(m, z, 2 * a + b, 1.0, 7)
        separate = 2 * precon_richardson(m, z, a, 1.0, 7) + precon_richardson(
            m, z, b, 1.0, 7
        )
        np.testing.assert_allclose(combined, separate, atol=1e-12)

    def test_negative_iterations(self):
        m = aslinearoperator(np.eye(2))
        with pytest.raises(ValueError, match="nonnegative"):
            precon_richardson(m, m, np.ones(2), 1.0, -1)

    def test_operator_cost(self, eulerian: DirectedLaplacian):
        walk = normalize(eulerian)
        system = identity_minus_walk(walk.walk, walk.kernel)
        operator = richardson_operator(
            system, scaled_identity(eulerian.n, 1.0, walk.kernel), 0.5, 5
        )
        assert operator.cost == 4
        b = walk.kernel[::-1] - (walk.kernel[::-1] @ walk.kernel) * walk.kernel
        np.testing.assert_allclose(
            operator.matvec(b),
            precon_richardson(
                system, scaled_identity(eulerian.n, 1.0, walk.kernel), b, 0.5, 5
            ),
        )


class TestEstimateLambda:
    def test_complete_graph(self, complete: DirectedLaplacian):
        walk = normalize(complete)
        estimate = estimate_lambda(walk.walk, walk.kernel)
        assert 20 / 39 * (1 - 1e-8) <= estimate <= 40 / 39

    def test_bounds(self, eulerian: DirectedLaplacian):
        walk = normalize(eulerian)
        matrix = walk.walk.csr.toarray()
        exact = lambda_star(np.eye(eulerian.n) - (matrix + matrix.T) / 2)
        estimate = estimate_lambda(walk.walk, walk.kernel, seed=3)
        assert exact / 2 * (1 - 1e-6) <= estimate <= exact * (1 + 1e-9)


class TestBaseSolver:
    def test_inverts_walk(self, complete: DirectedLaplacian):
        walk = normalize(complete)
        operator = base_solver(walk, 0.5, 0, 1e-8)
        system = np.eye(complete.n) - walk.walk.csr.toarray()
        projector = np.eye(complete.n) - np.outer(walk.kernel, walk.kernel)
        np.testing.assert_allclose(
            materialize(operator) @ system, projector, atol=1e-7
        )


class TestBuildChain:
    def test_exact_squares(self, eulerian: DirectedLaplacian):
        callback = MagicMock()
        chain = build_chain(
            eulerian,
            2,
            CHAIN_ALPHA,
            1e-3,
            0.01,
            seed=0,
            sampling=SamplingConfig(verify=False),
            event_bus=EventBus([callback]),
        )
        assert chain.d == 2
        assert len(chain.nnz()) == 3
        np.testing.assert_array_equal(chain.degrees, eulerian.out_degrees)
        for level in range(chain.d):
            lazy = chain.lazy(level).csr.toarray()
            np.testing.assert_allclose(
                chain.walks[level + 1].walk.csr.toarray(), lazy @ lazy, atol=1e-12
            )
        levels = [
            c.args[0].level
            for c in callback.call_args_list
            if isinstance(c.args[0], ChainLevelEvent)
        ]
        assert levels == [0, 1, 2]

    @pytest.mark.parametrize(
        "laplacian",
        [directed_cycle(24), bidirected_path(24), bidirected_complete(12)],
        ids=["cycle", "path", "complete"],
    )
    def test_levels_never_exceed_exact_squares(self, laplacian: DirectedLaplacian):
        chain = build_chain(laplacian, 5, CHAIN_ALPHA, 0.5, 0.01, seed=4)
        n = laplacian.n
        assert chain.nnz()[0] <= laplacian.nnz
        for level in range(chain.d):
            lazy = chain.lazy(level).csr.toarray()
            exact = np.count_nonzero(lazy @ lazy)
            assert chain.walks[level + 1].walk.nnz <= min(exact, n * n)

    @pytest.mark.slow
    def test_dense_level_loses_edges(self):
        laplacian = bidirected_complete(30)
        sparser = 0
        for seed in range(20):
            chain = build_chain(laplacian, 1, CHAIN_ALPHA, 0.75, 0.01, seed=seed)
            sparser += chain.nnz()[1] < 30 * 30
        assert sparser >= 15

    def test_kernel_is_fixed(self, eulerian: DirectedLaplacian):
        chain = build_chain(eulerian, 3, CHAIN_ALPHA, 1e-3, 0.01, seed=1)
        for walk in chain.walks:
            np.testing.assert_allclose(walk.matvec(chain.kernel), chain.kernel)

    def test_zero_length(self, eulerian: DirectedLaplacian):
        chain = build_chain(
            eulerian,
            0,
            CHAIN_ALPHA,
            1e-3,
            0.01,
            seed=0,
            sampling=SamplingConfig(verify=False),
        )
        assert chain.d == 0
        assert chain.walks[0].walk == normalize(eulerian).walk

    @pytest.mark.parametrize(
        "d, alpha", [(2, 0.5), (-1, CHAIN_ALPHA)], ids=["laziness", "length"]
    )
    def test_invalid(self, eulerian: DirectedLaplacian, d, alpha):
        with pytest.raises(ValueError):
            build_chain(eulerian, d, alpha, 1e-3, 0.01, seed=0)

    def test_not_eulerian(self, strongly_connected: DirectedLaplacian):
        with pytest.raises(NotEulerianError):
            build_chain(strongly_connected, 1, CHAIN_ALPHA, 1e-3, 0.01, seed=0)


class TestSolveRecursive:
    def test_inverts_first_level(self, complete: DirectedLaplacian):
        chain = build_chain(complete, 2, CHAIN_ALPHA, 1e-3, 0.01, seed=0)
        operator = solve_recursive(chain, 0, 0.5, 1e-6)
        n = complete.n
        system = np.eye(n) - chain.walks[0].walk.csr.toarray()
        projector = np.eye(n) - np.outer(chain.kernel, chain.kernel)
        np.testing.assert_allclose(
            materialize(operator) @ system, projector, atol=1e-3
        )

    def test_last_level_is_base_case(self, complete: DirectedLaplacian):
        chain = build_chain(complete, 1, CHAIN_ALPHA, 1e-3, 0.01, seed=0)
        operator = solve_recursive(chain, 1, 0.5, 1e-6)
        expected = base_solver(chain.walks[1], 0.5, 1, 1e-6)
        np.testing.assert_allclose(materialize(operator), materialize(expected))


class TestPrepareDemand:
    def test_orthogonal_demand_is_kept(self, eulerian, demand):
        projected, moved = prepare_demand(eulerian, demand)
        assert not moved
        np.testing.assert_allclose(projected, demand, atol=1e-14)

    def test_projection_warns(self, eulerian: DirectedLaplacian):
        with pytest.warns(DemandProjectedWarning):
            projected, moved = prepare_demand(eulerian, np.ones(eulerian.n))
        assert moved
        np.testing.assert_allclose(projected, 0.0, atol=1e-14)

    @pytest.mark.parametrize(
        "values, exception",
        [([1.0, -1.0], ValueError), ([np.nan] * 16, NonFiniteError)],
        ids=["length", "nan"],
    )
    def test_invalid(self, eulerian: DirectedLaplacian, values, exception):
        with pytest.raises(exception):
            prepare_demand(eulerian, values)


class TestSolveEulerian:
    def test_accuracy(self, eulerian: DirectedLaplacian, demand):
        x = solve_eulerian(eulerian, demand, 1e-6, seed=0)
        expected = dense_pinv(eulerian) @ demand
        assert abs(x.sum()) < 1e-10
        assert _relative_error(eulerian, x, expected) <= 1e-4

    def test_report(self, eulerian: DirectedLaplacian, demand):
        callback = MagicMock()
        solve_eulerian(eulerian, demand, 1e-6, seed=0, event_bus=EventBus([callback]))
        solves = [
            c.args[0]
            for c in callback.call_args_list
            if isinstance(c.args[0], SolveEvent)
        ]
        assert len(solves) == 1
        report = solves[0].report
        assert report.eps == 1e-6
        assert report.residual < 1e-3
        assert not report.projected
        assert len(report.chain_nnz) == report.depth + 1
        assert report.applications > 0
        assert report.lambda_hat > 0

    def test_recursion_uses_chain_accuracy(self, eulerian: DirectedLaplacian, demand):
        with (
            patch("dirlap.solver.solve.build_chain", wraps=build_chain) as chain,
            patch(
                "dirlap.solver.solve.solve_recursive", wraps=solve_recursive
            ) as recursive,
        ):
            solve_eulerian(eulerian, demand, 1e-6, seed=0)
        eps_hat = chain.call_args.args[3]
        assert recursive.call_args.args[3] == eps_hat
        assert eps_hat < SolverConfig().sparsify_eps

    def test_analysis_constants(self):
        config = SolverConfig.theoretical()
        assert config.depth_factor == 6.0
        assert config.error_decay == 5.0
        assert config.inner_denominator == 30.0
        assert config.outer_factor == 10.0
        assert config.base_step is None
        assert config.base_iteration_factor == 8.0
        assert config.base_iteration_power == 2.0
        assert config.ell_cap == 0.25

    def test_reproducible(self, eulerian: DirectedLaplacian, demand):
        first = solve_eulerian(eulerian, demand, 1e-4, seed=9)
        second = solve_eulerian(eulerian, demand, 1e-4, seed=9)
        np.testing.assert_array_equal(first, second)

    def test_projects_demand(self, eulerian: DirectedLaplacian, demand):
        shifted = demand + 1.0
        with pytest.warns(DemandProjectedWarning):
            x = solve_eulerian(eulerian, shifted, 1e-6, seed=0)
        expected = dense_pinv(eulerian) @ demand
        assert _relative_error(eulerian, x, expected) <= 1e-4

    def test_zero_demand(self, eulerian: DirectedLaplacian):
        np.testing.assert_array_equal(
            solve_eulerian(eulerian, np.zeros(eulerian.n), 1e-6), 0.0
        )

    def test_not_eulerian(self, strongly_connected: DirectedLaplacian):
        with pytest.raises(NotEulerianError):
            solve_eulerian(strongly_connected, np.zeros(strongly_connected.n), 0.1)

    def test_isolated_vertex(self):
        laplacian = validate_laplacian(
            SparseGraph.from_edges(3, [(0, 1, 1.0), (1, 0, 1.0)])
        )
        with pytest.raises(NotStronglyConnectedError):
            solve_eulerian(laplacian, np.array([1.0, -1.0, 0.0]), 0.1)

    @pytest.mark.parametrize("eps", [0.0, 1.0], ids=["zero", "one"])
    def test_invalid_eps(self, eulerian: DirectedLaplacian, demand, eps):
        with pytest.raises(ValueError, match="eps"):
            solve_eulerian(eulerian, demand, eps)

    def test_budget_exceeded(self, eulerian: DirectedLaplacian, demand):
        with pytest.raises(RecursionBudgetExceededError):
            solve_eulerian(eulerian, demand, 1e-6, config=SolverConfig(c_budget=1e-3))


def test_default_inner_solver(eulerian: DirectedLaplacian, demand):
    inner = default_inner_solver(seed=4)
    np.testing.assert_array_equal(
        inner(eulerian, demand, 1e-4), solve_eulerian(eulerian, demand, 1e-4, seed=4)
    )


def _undirected(walk: np.ndarray) -> np.ndarray:
    """I - U_W for a normalized walk."""
    return np.eye(len(walk)) - (walk + walk.T) / 2


class TestChainProperties:
    @pytest.mark.parametrize(
        "laplacian",
        [directed_cycle(3), directed_cycle(12), bidirected_path(10)],
        ids=["C3", "C12", "path"],
    )
    def test_condition_numbers_and_gap_growth(self, laplacian: DirectedLaplacian):
        eps = 0.2
        chain = build_chain(laplacian, 2, CHAIN_ALPHA, eps, 0.01, seed=0)
        walks = [walk.walk.csr.toarray() for walk in chain.walks]
        for level in range(1, chain.d + 1):
            low, high = generalized_eigs(
                _undirected(walks[level]), _undirected(walks[level - 1])
            )
            assert high / low <= 21
        first = lambda_star(_undirected(walks[0]))
        last = lambda_star(_undirected(walks[-1]))
        growth = ((1 - eps) * 1.25) ** chain.d
        assert last >= min(0.25, first * growth) * (1 - 1e-9)

    def test_truncated_chain_preconditioner(self):
        laplacian = random_eulerian(10, 14, seed=2, low=1.0, high=3.0)
        chain = build_chain(laplacian, 3, CHAIN_ALPHA, 0.3, 0.01, seed=5)
        n = chain.n
        identity = np.eye(n)
        walks = [walk.walk.csr.toarray() for walk in chain.walks]
        lazy = [chain.lazy(level).csr.toarray() for level in range(chain.d)]
        eps = max(
            approx_norm(
                identity - lazy[level] @ lazy[level], identity - walks[level + 1]
            )
            for level in range(chain.d)
        )
        assert eps <= 0.5
        for level in range(chain.d):
            for jump in range(1, chain.d - level + 1):
                product = identity
                for j in range(level, level + jump):
                    product = (identity + lazy[j]) @ product
                preconditioner = (
                    (1 - CHAIN_ALPHA) ** jump
                    * dense_pinv(identity - walks[level + jump])
                    @ product
                )
                error = pseudoinverse_error(
                    preconditioner,
                    identity - walks[level],
                    _undirected(walks[level]),
                )
                assert error <= math.exp(5 * jump) * eps + 1e-9


class TestRichardsonContraction:
    @pytest.mark.parametrize("seed", range(5), ids=lambda seed: f"seed {seed}")
    def test_error_decays_geometrically(self, seed: int):
        laplacian = random_eulerian(12, 16, seed=seed, low=0.5, high=2.0)
        n = laplacian.n
        matrix = dense(laplacian)
        u = (matrix + matrix.T) / 2
        pinv = dense_pinv(laplacian)
        projector = np.eye(n) - np.full((n, n), 1 / n)
        noise = projector @ np.random.default_rng(seed).standard_normal((n, n))
        noise = noise @ projector
        raw = pseudoinverse_error(pinv + noise, matrix, u)
        degraded = pinv + 0.5 / raw * noise
        eps = pseudoinverse_error(degraded, matrix, u)
        assert eps == pytest.approx(0.5)
        b = random_demand(n, seed=seed)
        expected = pinv @ b
        for steps in range(1, 9):
            x = precon_richardson(
                aslinearoperator(matrix), aslinearoperator(degraded), b, 1.0, steps
            )
            bound = eps**steps * u_norm(expected, u)
            assert u_norm(x - expected, u) <= bound * (1 + 1e-6) + 1e-12
