import math

import numpy as np
import pytest
from scipy import integrate, special

from pysubbotin.core import Dataset, Graph, ParamMatrix, ShapeParam, check_normalizable, conditional_location, \
    log_normalizer, log_unnormalized_density, precision_from_theta, q_component, standardize, subbotin_moment, \
    univariate_log_density
from pysubbotin.errors import DegenerateColumnError, DomainError, InvalidParameterError, NormalizabilityError


def try_helper(try_code, exception_str, exception):
    try:
        try_code()
        assert False
    except exception as e:
        assert str(e) == exception_str


def tridiagonal(p, diag, off):
    return diag * np.eye(p) + off * (np.eye(p, k=1) + np.eye(p, k=-1))


class TestShapeParam:
    def test_valid(self):
        assert ShapeParam(4).nu == 4
        assert ShapeParam(8.0).nu == 8
        assert int(ShapeParam(2)) == 2
        assert ShapeParam(ShapeParam(6)).nu == 6

    def test_invalid(self):
        try_helper(lambda: ShapeParam(3), "shape parameter must be an even integer >= 2, got 3", InvalidParameterError)
        try_helper(lambda: ShapeParam(0), "shape parameter must be an even integer >= 2, got 0", InvalidParameterError)
        try_helper(lambda: ShapeParam(2.5), "shape parameter must be an even integer, got 2.5", InvalidParameterError)
        with pytest.raises(InvalidParameterError):
            ShapeParam(True)


class TestGraph:
    def test_canonical_edges(self):
        g = Graph(4, frozenset([(2, 1), (0, 3), (1, 2)]))
        assert g.sorted_edges() == [(0, 3), (1, 2)]
        assert g.edge_count == 2
        assert g.has_edge(3, 0) and not g.has_edge(0, 1)
        assert g.neighbors(1) == [2]

    def test_invalid_edges(self):
        try_helper(lambda: Graph(3, frozenset([(1, 1)])), "self-loop on node 1 is not allowed", InvalidParameterError)
        try_helper(lambda: Graph(3, frozenset([(0, 3)])), "edge (0, 3) is out of range for 3 nodes",
                   InvalidParameterError)

    def test_adjacency_networkx(self):
        g = Graph(3, frozenset([(0, 2)]))
        adj = g.adjacency()
        assert adj[0, 2] and adj[2, 0] and not adj[0, 1]
        assert Graph.from_adjacency(adj) == g
        assert Graph.from_networkx(g.to_networkx()) == g

    def test_relabel(self):
        g = Graph(3, frozenset([(0, 1)]))
        assert g.relabel([2, 0, 1]).sorted_edges() == [(0, 2)]


class TestParamMatrix:
    def test_sign_convention(self):
        theta = ParamMatrix.from_conditional_weights([[1.0, 0.3], [0.3, 2.0]])
        assert theta.values[0, 1] == pytest.approx(-0.3)
        assert theta.weight(0, 1) == pytest.approx(0.3)
        assert theta.weight(1, 1) == pytest.approx(2.0)
        assert np.allclose(theta.conditional_weights(), [[0, 0.3], [0.3, 0]])
        assert theta.support().sorted_edges() == [(0, 1)]

    def test_invalid(self):
        try_helper(lambda: ParamMatrix([[1.0, 0.2], [0.1, 1.0]]), "parameter matrix must be symmetric",
                   InvalidParameterError)
        try_helper(lambda: ParamMatrix([[1.0, 0.0], [0.0, 0.0]]), "parameter matrix diagonal must be strictly positive",
                   InvalidParameterError)
        with pytest.raises(InvalidParameterError):
            ParamMatrix([[1.0, np.nan], [np.nan, 1.0]])

    def test_values_are_read_only(self):
        theta = ParamMatrix(np.eye(2))
        with pytest.raises(ValueError):
            theta.values[0, 0] = 5.0


class TestUnivariate:
    def test_gaussian_normalizer(self):
        assert log_normalizer(2) == pytest.approx(0.5 * math.log(math.pi))

    @pytest.mark.parametrize("nu", [2, 4, 8])
    def test_density_integrates_to_one(self, nu):
        total, _ = integrate.quad(lambda x: math.exp(univariate_log_density(x, nu)), -10, 10, limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_density_domain(self):
        with pytest.raises(DomainError):
            univariate_log_density(math.inf, 4)

    def test_moments(self):
        assert subbotin_moment(2, 2) == pytest.approx(0.5)
        assert subbotin_moment(4, 8) == pytest.approx(special.gamma(5 / 8) / special.gamma(1 / 8))


class TestJointDensity:
    def test_zero_at_origin(self):
        theta = ParamMatrix(tridiagonal(3, 1.0, -0.3))
        assert log_unnormalized_density(np.zeros(3), theta, 4) == 0.0

    def test_univariate_reduction(self):
        theta = ParamMatrix([[1.0]])
        assert log_unnormalized_density([1.5], theta, 4) == pytest.approx(-1.5 ** 4)

    def test_diagonal_theta(self):
        theta = ParamMatrix(np.diag([1.0, 2.0, 0.5]))
        x = np.array([0.4, -0.7, 1.2])
        expected = -np.sum((np.diag(theta.values) * x) ** 6)
        assert log_unnormalized_density(x, theta, 6) == pytest.approx(expected)

    def test_components_sum_to_total(self):
        rng = np.random.default_rng(3)
        theta = ParamMatrix.from_conditional_weights(np.eye(4) + 0.2 * (np.ones((4, 4)) - np.eye(4)))
        for _ in range(5):
            x = rng.normal(size=4)
            total = sum(q_component(i, x, theta, 4) for i in range(4))
            assert log_unnormalized_density(x, theta, 4) == pytest.approx(total)

    def test_stacked_observations(self):
        theta = ParamMatrix(tridiagonal(3, 1.0, -0.3))
        xs = np.array([[0.1, 0.2, 0.3], [1.0, -1.0, 0.5]])
        values = log_unnormalized_density(xs, theta, 2)
        assert values.shape == (2,)
        assert values[1] == pytest.approx(log_unnormalized_density(xs[1], theta, 2))

    def test_component_is_non_positive_for_unit_node(self):
        # with no predecessors, the first component is -(theta_11 x_1)^nu
        theta = ParamMatrix(tridiagonal(3, 1.0, -0.3))
        assert q_component(0, [2.0, 5.0, -1.0], theta, 4) == pytest.approx(-16.0)

    def test_observation_length(self):
        theta = ParamMatrix(np.eye(3))
        try_helper(lambda: log_unnormalized_density([1.0, 2.0], theta, 2), "observation has 2 entries, expected 3",
                   InvalidParameterError)

    def test_conditional_location(self):
        theta = ParamMatrix([[2.0, -0.5], [-0.5, 1.0]])
        location, scale = conditional_location(0, [10.0, 4.0], theta)
        assert location == pytest.approx(1.0)
        assert scale == pytest.approx(0.5)


def random_conditional_weights(rng, p):
    off = rng.normal(scale=0.7, size=(p, p))
    weights = (off + off.T) / 2
    np.fill_diagonal(weights, rng.uniform(0.5, 2.0, size=p))
    return weights


def unit_diagonal_positive_definite(rng, p):
    a = rng.normal(size=(p, p))
    s = a @ a.T + p * np.eye(p)
    d = 1.0 / np.sqrt(np.diag(s))
    return s * d[:, None] * d[None, :]


class TestComponentShape:
    def test_worked_values(self):
        theta = ParamMatrix.from_conditional_weights([[1.0, 0.5], [0.5, 1.0]])
        x = [1.0, 0.2]
        assert log_unnormalized_density(x, theta, 4) == pytest.approx(-0.9456)
        assert q_component(0, x, theta, 4) == pytest.approx(-1.0)
        assert q_component(1, x, theta, 2) == pytest.approx(0.16)
        assert q_component(1, x, theta, 4) == pytest.approx(0.0544)

    def test_sign_agrees_across_shapes(self):
        rng = np.random.default_rng(21)
        checked = 0
        for _ in range(10000):
            theta = ParamMatrix.from_conditional_weights(random_conditional_weights(rng, 4))
            x = rng.normal(scale=1.5, size=4)
            i = int(rng.integers(4))
            q2 = q_component(i, x, theta, 2)
            if abs(q2) <= 1e-9:
                continue
            checked += 1
            for nu in (4, 6, 8):
                assert np.sign(q_component(i, x, theta, nu)) == np.sign(q2)
        assert checked > 9000

    @pytest.mark.parametrize("nu", [4, 6, 8])
    def test_gaussian_ratio_decays_in_the_tail(self, nu):
        theta = ParamMatrix.from_conditional_weights([[1.0, 0.5, 0.3], [0.5, 1.0, -0.2], [0.3, -0.2, 1.0]])
        ratios = []
        for xi in np.geomspace(10, 1e3, 25):
            x = np.array([1.0, -0.5, xi])
            ratios.append(abs(q_component(2, x, theta, 2) / q_component(2, x, theta, nu)))
        assert np.all(np.diff(ratios) < 0)
        if nu == 8:
            assert ratios[-1] < 1e-3

    def test_gaussian_case_is_quadratic_form(self):
        rng = np.random.default_rng(22)
        for p in (2, 3, 5, 8):
            values = unit_diagonal_positive_definite(rng, p)
            theta = ParamMatrix(values)
            for _ in range(20):
                x, y = rng.normal(size=p), rng.normal(size=p)
                difference = log_unnormalized_density(x, theta, 2) - log_unnormalized_density(y, theta, 2)
                assert difference == pytest.approx(-x @ values @ x + y @ values @ y, rel=1e-10, abs=1e-10)


class TestNormalizability:
    def test_identity(self):
        assert check_normalizable(np.eye(3))

    def test_indefinite_tridiagonal(self):
        assert not check_normalizable(tridiagonal(3, 1.0, 0.8))
        assert check_normalizable(tridiagonal(3, 1.0, 0.4))

    def test_agrees_with_eigen_decomposition(self):
        rng = np.random.default_rng(11)
        outcomes = set()
        for _ in range(1000):
            p = int(rng.integers(2, 6))
            a = rng.normal(size=(p, p))
            m = (a + a.T) / 2 + rng.uniform(-1.0, 3.0) * np.eye(p)
            eig = np.linalg.eigvalsh(m)
            expected = np.max(np.diag(m)) > 0 and eig[0] > 1e-10 * np.max(np.diag(m))
            assert check_normalizable(m) == expected
            outcomes.add(expected)
        assert outcomes == {True, False}

    def test_asymmetric(self):
        try_helper(lambda: check_normalizable([[1.0, 0.5], [0.0, 1.0]]), "parameter matrix must be symmetric",
                   InvalidParameterError)

    def test_integral_finite_for_positive_definite(self):
        rng = np.random.default_rng(12)
        for r in rng.uniform(-0.9, 0.9, size=20):
            theta = ParamMatrix([[1.0, r], [r, 1.0]])
            assert check_normalizable(theta)
            total, _ = integrate.dblquad(lambda y, x: math.exp(log_unnormalized_density([x, y], theta, 2)),
                                         -20, 20, -20, 20)
            assert np.isfinite(total)
            assert total == pytest.approx(math.pi / math.sqrt(1 - r ** 2), rel=1e-4)

    def test_indefinite_grows_along_negative_direction(self):
        rng = np.random.default_rng(13)
        for r in rng.uniform(1.1, 3.0, size=20) * rng.choice([-1.0, 1.0], size=20):
            theta = ParamMatrix([[1.0, r], [r, 1.0]])
            assert not check_normalizable(theta)
            _, vectors = np.linalg.eigh(theta.values)
            direction = vectors[:, 0]
            assert log_unnormalized_density(1e3 * direction, theta, 2) > math.log(1e10)


class TestPrecision:
    def test_gaussian_precision(self):
        theta = ParamMatrix([[1.0, -0.4], [-0.4, 1.0]])
        assert np.allclose(precision_from_theta(theta, 2), 2 * theta.values)

    def test_nu_four(self):
        c = special.gamma(0.25) / special.gamma(0.75)
        assert np.allclose(precision_from_theta(ParamMatrix(np.eye(2)), 4), c * np.eye(2))
        assert c == pytest.approx(2.9587, abs=1e-4)

    def test_not_normalizable(self):
        with pytest.raises(NormalizabilityError):
            precision_from_theta(ParamMatrix(tridiagonal(3, 1.0, 0.8)), 2)


class TestDataset:
    def test_standardize(self):
        rng = np.random.default_rng(0)
        raw = Dataset(rng.normal(3.0, 2.0, size=(100, 3)))
        data = standardize(raw)
        assert data.standardized
        assert np.allclose(data.values.mean(axis=0), 0)
        assert np.allclose(data.values.std(axis=0, ddof=1), 1)
        assert np.allclose(data.destandardize(), raw.values)

    def test_constant_column(self):
        values = np.column_stack([np.arange(5.0), np.ones(5)])
        with pytest.raises(DegenerateColumnError) as e:
            standardize(Dataset(values))
        assert e.value.column == 1

    def test_non_finite(self):
        try_helper(lambda: Dataset([[1.0, np.inf]]), "dataset has non-finite entries", DomainError)

    def test_false_standardized_flag(self):
        with pytest.raises(InvalidParameterError):
            Dataset(np.arange(6.0).reshape(3, 2), standardized=True)

    def test_permute_columns(self):
        data = Dataset(np.array([[1.0, 2.0, 3.0]]))
        assert np.array_equal(data.permute_columns([2, 0, 1]).values, [[2.0, 3.0, 1.0]])
