import numpy as np
import pytest

from pysubbotin.bench import f1_score
from pysubbotin.core import Dataset, Graph, standardize
from pysubbotin.errors import InvalidParameterError, SolverError
from pysubbotin.estimator import CombinationRule, assemble_graph, coefficient_matrix, design_for_node, edge_path, \
    fit_graph, fit_neighborhood, fit_neighborhoods, oracle_tune, parallel_map
from pysubbotin.simgen import GraphKind, GraphSpec, ThetaSpec, gen_subbotin


def try_helper(try_code, exception_str, exception):
    try:
        try_code()
        assert False
    except exception as e:
        assert str(e) == exception_str


CHAIN = Graph(5, frozenset((i, i + 1) for i in range(4)))


def gaussian_chain(n=2000, seed=0):
    precision = np.eye(5) - 0.4 * (np.eye(5, k=1) + np.eye(5, k=-1))
    rng = np.random.default_rng(seed)
    values = rng.multivariate_normal(np.zeros(5), np.linalg.inv(precision), size=n)
    return standardize(Dataset(values))


def coordinate_descent_lasso(X, y, lambda_, sweeps=5000, tol=1e-13):
    # cyclic coordinate descent for mean(r^2) / 2 + lambda * |beta|_1
    n, d = X.shape
    beta = np.zeros(d)
    col_sq = (X ** 2).sum(axis=0) / n
    residual = y.copy()
    for _ in range(sweeps):
        largest = 0.0
        for j in range(d):
            old = beta[j]
            z = X[:, j] @ residual / n + col_sq[j] * old
            beta[j] = np.sign(z) * max(abs(z) - lambda_, 0.0) / col_sq[j]
            residual -= X[:, j] * (beta[j] - old)
            largest = max(largest, abs(beta[j] - old))
        if largest < tol:
            break
    return beta


class TestAssembly:
    def test_design_for_node(self):
        values = np.arange(12.0).reshape(4, 3)
        X, y = design_for_node(values, 1)
        assert np.array_equal(y, values[:, 1])
        assert np.array_equal(X, values[:, [0, 2]])
        try_helper(lambda: design_for_node(values, 3), "node 3 is out of range for 3 columns", InvalidParameterError)

    def test_coefficient_matrix(self):
        m = coefficient_matrix([np.array([0.5, 0.0]), np.array([0.1, 0.2]), np.array([0.0, 0.3])])
        assert np.allclose(m, [[0, 0.5, 0], [0.1, 0, 0.2], [0, 0.3, 0]])

    def test_and_or(self):
        neighborhoods = [np.array([0.5, 0.0]), np.array([0.0, 0.0]), np.array([0.0, 0.3])]
        assert assemble_graph(neighborhoods, CombinationRule.AND).edge_count == 0
        assert assemble_graph(neighborhoods, "or").sorted_edges() == [(0, 1), (1, 2)]

    def test_and_is_subgraph_of_or(self):
        data = gaussian_chain(300, seed=1)
        neighborhoods = fit_neighborhoods(data, 0.05, 2)
        assert assemble_graph(neighborhoods, "and").is_subgraph_of(assemble_graph(neighborhoods, "or"))

    def test_zero_tol(self):
        neighborhoods = [np.array([1e-9]), np.array([1e-9])]
        assert assemble_graph(neighborhoods, "or").edge_count == 0
        assert assemble_graph(neighborhoods, "or", zero_tol=0.0).edge_count == 1

    def test_rule_parse(self):
        assert CombinationRule.parse("OR") is CombinationRule.OR
        try_helper(lambda: CombinationRule.parse("xor"), "combination rule must be 'and' or 'or', got 'xor'",
                   InvalidParameterError)

    def test_parallel_map_keeps_order(self):
        assert parallel_map(lambda x: x * x, range(20), threads=4) == [x * x for x in range(20)]
        try_helper(lambda: parallel_map(abs, [1], threads=0), "threads must be at least 1, got 0",
                   InvalidParameterError)


class TestNeighborhoods:
    def test_strong_dependence_selected(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(500, 3))
        x[:, 0] = 0.9 * x[:, 2] + 0.1 * rng.normal(size=500)
        data = standardize(Dataset(x))
        coefficients = fit_neighborhood(data, 0, 0.01, 4)
        # coefficient 1 of node 0 is column 2
        assert abs(coefficients[1]) > 0.5
        assert abs(coefficients[0]) < abs(coefficients[1])

    def test_failure_names_node(self):
        values = np.array([[1e60, 0.0], [0.0, 1.0], [1.0, 0.0]])
        try_helper(lambda: fit_neighborhood(Dataset(values), 0, 0.1, 8),
                   "objective is not finite at the starting point (PowerLoss(nu=8)) (node 0, lambda 0.1)", SolverError)

    def test_threads_do_not_change_result(self):
        data = gaussian_chain(500, seed=3)
        one = fit_neighborhoods(data, 0.05, 4, threads=1)
        many = fit_neighborhoods(data, 0.05, 4, threads=3)
        for a, b in zip(one, many):
            assert np.array_equal(a, b)

    def test_permutation_equivariance(self):
        data = gaussian_chain(500, seed=4)
        permutation = [3, 0, 4, 1, 2]
        graph = fit_graph(data, 0.1, 2)
        permuted = fit_graph(data.permute_columns(permutation), 0.1, 2)
        assert permuted == graph.relabel(permutation)

    def test_gaussian_case_matches_coordinate_descent(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            p = int(rng.integers(4, 8))
            precision = np.eye(p)
            for i in range(p - 1):
                if rng.random() < 0.7:
                    precision[i, i + 1] = precision[i + 1, i] = rng.choice([-0.4, 0.4])
            values = rng.multivariate_normal(np.zeros(p), np.linalg.inv(precision), size=300)
            data = standardize(Dataset(values))
            lam = 0.08
            neighborhoods = [coordinate_descent_lasso(*design_for_node(data.values, i), lam) for i in range(p)]
            expected = assemble_graph(neighborhoods, "and")
            assert fit_graph(data, lam, 2, rule="and", tol=1e-12) == expected


class TestPathAndTuning:
    def test_edge_path(self):
        data = gaussian_chain(500, seed=5)
        graphs = edge_path(data, 2)
        lambdas = [lam for lam, _ in graphs]
        assert np.all(np.diff(lambdas) < 0)
        assert graphs[0][1].edge_count == 0
        assert graphs[-1][1].edge_count >= 4

    def test_oracle_recovers_gaussian_chain(self):
        data = gaussian_chain()
        lam, graph = oracle_tune(data, 2, CHAIN.edge_count)
        assert graph == CHAIN
        assert lam > 0

    def test_oracle_on_subbotin_chain(self):
        data, truth = gen_subbotin(5, 1000, 4, GraphSpec(GraphKind.CHAIN, 5), ThetaSpec(magnitude=0.4), seed=1,
                                   burn_in=100)
        assert truth == CHAIN
        _, graph = oracle_tune(data, 4, truth.edge_count)
        f1, _, _ = f1_score(graph, truth)
        assert f1 >= 0.75

    def test_oracle_empty_target(self):
        data = gaussian_chain(200, seed=6)
        lam, graph = oracle_tune(data, 2, 0)
        assert graph.edge_count == 0

    def test_oracle_negative_target(self):
        data = gaussian_chain(200, seed=7)
        try_helper(lambda: oracle_tune(data, 2, -1), "target edge count can't be negative, got -1",
                   InvalidParameterError)

    @pytest.mark.parametrize("target", [2, 3, 6])
    def test_oracle_count_is_closest_on_grid(self, target):
        data = gaussian_chain(400, seed=8)
        lambdas = np.geomspace(1.0, 1e-3, 15)
        _, graph = oracle_tune(data, 2, target, lambdas=lambdas)
        grid_counts = [g.edge_count for _, g in edge_path(data, 2, lambdas)]
        assert abs(graph.edge_count - target) <= min(abs(c - target) for c in grid_counts)
