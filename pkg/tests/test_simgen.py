import numpy as np
import pytest

from pysubbotin.core import check_normalizable
from pysubbotin.errors import InvalidParameterError, UnstableHawkesError
from pysubbotin.sampler import make_rng
from pysubbotin.simgen import GraphKind, GraphSpec, HawkesParams, SignScheme, ThetaSpec, gen_block_maxima, gen_pot, \
    gen_subbotin, make_graph, make_theta, positive_gumbel, simulate_hawkes, truncated_weak_gaussian


def try_helper(try_code, exception_str, exception):
    try:
        try_code()
        assert False
    except exception as e:
        assert str(e) == exception_str


class TestGraphs:
    def test_clique_edge_count_preserved(self):
        graph = make_graph(GraphSpec(GraphKind.SMALL_WORLD_CLIQUES, 100, seed=3, cliques=5))
        assert graph.edge_count == 5 * 20 * 19 // 2

    def test_uneven_cliques(self):
        graph = make_graph(GraphSpec(GraphKind.SMALL_WORLD_CLIQUES, 12, seed=0, cliques=5, rewire_prob=0.0))
        # groups of 3, 3, 2, 2, 2
        assert graph.edge_count == 3 + 3 + 1 + 1 + 1
        assert graph.has_edge(0, 2) and not graph.has_edge(2, 3)

    def test_rewiring_moves_edges_across_cliques(self):
        spec = GraphSpec(GraphKind.SMALL_WORLD_CLIQUES, 30, seed=1, cliques=5, rewire_prob=0.5)
        graph = make_graph(spec)
        cross = [(i, j) for i, j in graph.edges if i // 6 != j // 6]
        assert len(cross) > 0

    def test_deterministic(self):
        spec = GraphSpec(GraphKind.SMALL_WORLD_CLIQUES, 30, seed=7)
        assert make_graph(spec) == make_graph(spec)
        assert make_graph(spec) != make_graph(GraphSpec(GraphKind.SMALL_WORLD_CLIQUES, 30, seed=8))

    def test_chain_and_erdos_renyi(self):
        assert make_graph(GraphSpec(GraphKind.CHAIN, 6)).sorted_edges() == [(i, i + 1) for i in range(5)]
        spec = GraphSpec("erdos_renyi", 40, seed=2, edge_prob=0.2)
        graph = make_graph(spec)
        assert graph == make_graph(spec)
        assert 0.1 < graph.edge_count / (40 * 39 / 2) < 0.3

    def test_invalid(self):
        try_helper(lambda: GraphSpec(GraphKind.SMALL_WORLD_CLIQUES, 3, cliques=5), "clique count must be in [1, p=3], got 5",
                   InvalidParameterError)
        try_helper(lambda: GraphSpec("ring", 3), "unknown graph kind 'ring'", InvalidParameterError)


class TestTheta:
    def test_chain_unrepaired(self):
        graph = make_graph(GraphSpec(GraphKind.CHAIN, 3))
        theta = make_theta(graph, ThetaSpec(magnitude=0.4), make_rng(0))
        expected = np.eye(3) - 0.4 * (np.eye(3, k=1) + np.eye(3, k=-1))
        assert np.allclose(theta.values, expected)
        assert theta.weight(0, 1) == pytest.approx(0.4)

    def test_repair_keeps_support_and_unit_diagonal(self):
        graph = make_graph(GraphSpec(GraphKind.SMALL_WORLD_CLIQUES, 12, seed=0, cliques=2, rewire_prob=0.0))
        theta = make_theta(graph, ThetaSpec(magnitude=0.5), make_rng(0))
        assert check_normalizable(theta)
        assert np.allclose(theta.diagonal, 1.0)
        assert theta.support() == graph
        assert np.linalg.eigvalsh(theta.values)[0] > 0

    def test_random_signs(self):
        graph = make_graph(GraphSpec(GraphKind.SMALL_WORLD_CLIQUES, 30, seed=4))
        theta = make_theta(graph, ThetaSpec(sign_scheme=SignScheme.RANDOM_SIGN), make_rng(1))
        weights = [theta.weight(i, j) for i, j in graph.edges]
        assert min(weights) < 0 < max(weights)
        assert theta.support() == graph


class TestSubbotinData:
    def test_shape_and_standardized(self):
        data, graph = gen_subbotin(6, 200, 4, GraphSpec(GraphKind.CHAIN, 6), seed=3, burn_in=50)
        assert data.n == 200 and data.p == 6
        assert data.standardized
        assert graph.edge_count == 5

    def test_deterministic(self):
        spec = GraphSpec(GraphKind.SMALL_WORLD_CLIQUES, 6, cliques=2)
        a, _ = gen_subbotin(6, 50, 8, spec, seed=1, burn_in=10)
        b, _ = gen_subbotin(6, 50, 8, spec, seed=1, burn_in=10)
        assert np.array_equal(a.values, b.values)

    def test_mismatched_p(self):
        try_helper(lambda: gen_subbotin(5, 10, 4, GraphSpec(GraphKind.CHAIN, 6)),
                   "graph spec has 6 nodes but 5 were requested", InvalidParameterError)


class TestBlockMaxima:
    def test_one_maximum_row_per_block(self):
        data, graph = gen_block_maxima(5, 40, 10, GraphSpec(GraphKind.CHAIN, 5), seed=2)
        assert data.n == 400 and data.p == 5
        blocks = data.values.reshape(40, 10, 5)
        argmax = blocks.argmax(axis=1)
        # the latent row carries every column's maximum
        assert np.all(argmax == argmax[:, :1])

    def test_maxima_mean(self):
        data, _ = gen_block_maxima(3, 2000, 2, GraphSpec(GraphKind.CHAIN, 3), seed=3)
        maxima = data.values.reshape(2000, 2, 3).max(axis=1)
        assert np.allclose(maxima.mean(axis=0), 5.0, atol=0.1)

    def test_latent_correlation_follows_graph(self):
        data, graph = gen_block_maxima(4, 3000, 2, GraphSpec(GraphKind.CHAIN, 4), ThetaSpec(magnitude=0.4), seed=4)
        maxima = data.values.reshape(3000, 2, 4).max(axis=1)
        corr = np.corrcoef(maxima.T)
        assert corr[0, 1] > corr[0, 3] + 0.1

    def test_invalid(self):
        try_helper(lambda: gen_block_maxima(3, 10, 1, GraphSpec(GraphKind.CHAIN, 3)),
                   "block size must be at least 2, got 1", InvalidParameterError)


class TestTruncatedGaussian:
    def test_below_caps(self):
        caps = np.full((500, 4), 0.5)
        draws = truncated_weak_gaussian(caps, make_rng(0))
        assert np.all(draws < caps)

    def test_exact_fallback_for_tight_caps(self):
        caps = np.full((50, 6), -2.5)
        draws = truncated_weak_gaussian(caps, make_rng(1))
        assert np.all(draws < caps)
        assert np.all(np.isfinite(draws))


class TestHawkes:
    def test_poisson_without_edges(self):
        times, nodes = simulate_hawkes(np.zeros((3, 3)), 0.5, 1.0, 2000.0, make_rng(0))
        assert np.all(np.diff(times) >= 0)
        assert times.min() >= 0 and times.max() < 2000.0
        assert len(times) == pytest.approx(3000, rel=0.1)
        assert set(nodes.tolist()) == {0, 1, 2}

    def test_excitation_increases_rate(self):
        branching = 0.4 * np.array([[0.0, 1.0], [1.0, 0.0]])
        calm, _ = simulate_hawkes(np.zeros((2, 2)), 0.2, 1.0, 5000.0, make_rng(1))
        excited, _ = simulate_hawkes(branching, 0.2, 1.0, 5000.0, make_rng(1))
        # stationary rate per node is baseline / (1 - 0.4)
        assert len(excited) / len(calm) == pytest.approx(1 / 0.6, rel=0.1)

    def test_params(self):
        graph = make_graph(GraphSpec(GraphKind.CHAIN, 4))
        params = HawkesParams()
        branching = params.branching_matrix(graph)
        assert np.max(np.abs(np.linalg.eigvals(branching))) == pytest.approx(0.5)
        amplification = np.linalg.solve(np.eye(4) - branching, np.ones(4))
        assert params.baseline_rate(graph) * np.mean(amplification) == pytest.approx(params.target_rate)

    def test_unstable(self):
        with pytest.raises(UnstableHawkesError):
            HawkesParams(spectral_radius=1.0)
        graph = make_graph(GraphSpec(GraphKind.SMALL_WORLD_CLIQUES, 10, cliques=2, rewire_prob=0.0))
        with pytest.raises(UnstableHawkesError):
            HawkesParams(excitation=0.5).branching_matrix(graph)

    def test_positive_gumbel(self):
        assert np.all(positive_gumbel(make_rng(0), 1000) > 0)


class TestPot:
    def test_extremes_only_from_events(self):
        data, graph = gen_pot(6, 2000, 10.0, GraphSpec(GraphKind.CHAIN, 6), seed=1,
                              hawkes=HawkesParams(target_rate=0.01))
        assert data.n == 2000 and data.p == 6
        extreme = data.values > 10.0
        assert 0 < extreme.sum() < data.values.size
        assert np.all(data.values[~extreme] < 10.0)

    def test_connected_pairs_co_occur_more(self):
        connected, unconnected = [], []
        for seed in range(10):
            data, graph = gen_pot(6, 3000, 10.0, GraphSpec(GraphKind.CHAIN, 6), seed=seed,
                                  hawkes=HawkesParams(target_rate=0.02, decay=5.0))
            extreme = (data.values > 10.0).astype(int)
            co = extreme.T @ extreme
            for i in range(6):
                for j in range(i + 1, 6):
                    (connected if graph.has_edge(i, j) else unconnected).append(co[i, j])
        assert np.mean(connected) > np.mean(unconnected)

    def test_invalid_threshold(self):
        try_helper(lambda: gen_pot(3, 10, 0.0, GraphSpec(GraphKind.CHAIN, 3)), "threshold must be positive, got 0.0",
                   InvalidParameterError)
