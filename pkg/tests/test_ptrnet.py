import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptrnet_ea import ptrnet, tsp
from ptrnet_ea.exceptions import ConfigError, InvalidDimensionError, LayoutError, NumericError

TINY = ptrnet.NetworkConfig(embedding_size=2, hidden_size=4, num_layers=1)
SMALL = ptrnet.NetworkConfig(embedding_size=8, hidden_size=32, num_layers=1)


def reference_decode(nodes, params, config):
    """Straight-line, one-vector-at-a-time evaluation of the documented network."""
    E, d, L = config.embedding_size, config.hidden_size, config.num_layers
    flat = np.asarray(params, dtype=np.float64)
    pos = 0

    def take(*shape):
        nonlocal pos
        size = int(np.prod(shape))
        block = flat[pos : pos + size].reshape(shape)
        pos += size
        return block

    emb_w, start = take(2, E), take(E)
    stacks = {}
    for name in ("enc", "dec"):
        stacks[name] = [(take(4 * d, E if l == 0 else d), take(4 * d, d), take(4 * d)) for l in range(L)]
    w_ref, w_q, v = take(d, d), take(d, d), take(d)
    assert pos == flat.size

    sig = lambda x: 1.0 / (1.0 + np.exp(-x))

    def cell(x, h, c, w):
        z = w[0] @ x + w[1] @ h + w[2]
        i, f, g, o = z[:d], z[d : 2 * d], z[2 * d : 3 * d], z[3 * d :]
        c = sig(f) * c + sig(i) * np.tanh(g)
        return sig(o) * np.tanh(c), c

    embs = [emb_w.T @ np.asarray(p, dtype=np.float64) for p in nodes]
    hs = [np.zeros(d) for _ in range(L)]
    cs = [np.zeros(d) for _ in range(L)]
    refs = []
    for x in embs:
        for l in range(L):
            hs[l], cs[l] = cell(x, hs[l], cs[l], stacks["enc"][l])
            x = hs[l]
        refs.append(x)
    n = len(nodes)
    visited, tour, dists = [], [], []
    x = start
    for _ in range(n):
        for l in range(L):
            hs[l], cs[l] = cell(x, hs[l], cs[l], stacks["dec"][l])
            x = hs[l]
        u = np.array([v @ np.tanh(w_ref @ r + w_q @ x) for r in refs])
        p = np.zeros(n)
        free = [i for i in range(n) if i not in visited]
        e = np.exp(u[free] - u[free].max())
        p[free] = e / e.sum()
        k = int(np.argmax(p))
        dists.append(p)
        tour.append(k)
        visited.append(k)
        x = embs[k]
    return tuple(tour), np.array(dists)


class TestLayout:
    def test_tiny_count_by_hand(self):
        # embedding 2*2 + start 2 + two stacks of (16*2 + 16*4 + 16) + 4*4 + 4*4 + 4
        assert ptrnet.param_count(TINY) == 4 + 2 + 2 * (32 + 64 + 16) + 16 + 16 + 4 == 266

    def test_default_config_blocks(self):
        cfg = ptrnet.NetworkConfig()
        layout = ptrnet.param_layout(cfg)
        recurrent = sum(
            s.stop - s.start for name, (s, _) in layout.items() if name.startswith("encoder") and "w_hh" in name
        )
        assert recurrent == 5 * 4 * 256 * 256 == 1_310_720
        attention = {name: shape for name, (_, shape) in layout.items() if name.startswith("attention")}
        assert attention == {"attention.w_ref": (256, 256), "attention.w_q": (256, 256), "attention.v": (256,)}

    def test_default_config_total(self):
        E, d = 32, 256
        stack = 4 * d * (E + d + 1) + 4 * 4 * d * (d + d + 1)
        assert ptrnet.param_count(ptrnet.NetworkConfig()) == 3 * E + 2 * stack + 2 * d * d + d == 4_925_792

    def test_desk_config_total(self):
        # 3*8 + 2 * 4*32*(8+32+1) + 2*32*32 + 32
        assert ptrnet.param_count(ptrnet.NetworkConfig(8, 32, 1)) == 12_600

    def test_segments_disjoint_and_covering(self):
        cfg = ptrnet.NetworkConfig(3, 5, 3)
        covered = np.zeros(ptrnet.param_count(cfg), dtype=int)
        for s, shape in ptrnet.param_layout(cfg).values():
            assert s.stop - s.start == int(np.prod(shape))
            covered[s] += 1
        assert (covered == 1).all()

    def test_bad_config(self):
        with pytest.raises(ConfigError):
            ptrnet.NetworkConfig(hidden_size=0)
        with pytest.raises(ConfigError):
            ptrnet.NetworkConfig(decode_mode="beam")


class TestInit:
    def test_deterministic_and_bounded(self):
        a = ptrnet.init_params(SMALL, 3)
        b = ptrnet.init_params(SMALL, 3)
        assert a.dtype == np.float32
        assert np.array_equal(a, b)
        assert np.abs(a).max() <= 0.08
        assert not np.array_equal(a, ptrnet.init_params(SMALL, 4))

    def test_mean_near_zero(self):
        big = ptrnet.NetworkConfig(embedding_size=32, hidden_size=128, num_layers=5)
        values = ptrnet.init_params(big, 0)
        assert values.size > 1_000_000
        assert abs(float(values[:1_000_000].mean())) < 0.001

    def test_read_only(self):
        with pytest.raises(ValueError):
            ptrnet.init_params(TINY, 0)[0] = 1.0


class TestCell:
    def test_zero_weights_give_zero_state(self):
        d = 6
        rng = np.random.default_rng(0)
        x = rng.normal(size=(3, 4))
        h, c = ptrnet.lstm_step(
            x, np.zeros((3, d)), np.zeros((3, d)), np.zeros((4 * d, 4)), np.zeros((4 * d, d)), np.zeros(4 * d)
        )
        assert np.array_equal(h, np.zeros((3, d)))
        assert np.array_equal(c, np.zeros((3, d)))


class TestDecode:
    NODES = tsp.generate_instance(5, 77)

    def test_golden_tiny_network(self):
        params = ptrnet.init_params(TINY, 2024)
        trace = ptrnet.forward_decode(self.NODES, params, TINY)
        tour, dists = reference_decode(self.NODES.nodes, params, TINY)
        assert trace.tour == tour
        np.testing.assert_allclose(trace.step_distributions, dists, atol=1e-12)
        # frozen from the reference evaluation above
        assert tour == (0, 1, 2, 4, 3)
        np.testing.assert_allclose(
            dists[0], [0.20000817, 0.20000003, 0.19999806, 0.1999966, 0.19999714], atol=1e-8
        )

    @pytest.mark.parametrize("layers", [1, 3])
    def test_matches_reference_larger(self, layers):
        cfg = ptrnet.NetworkConfig(embedding_size=5, hidden_size=7, num_layers=layers)
        # scale weights up so distributions are far from uniform
        params = ptrnet.as_param_vector(ptrnet.init_params(cfg, 1) * 20)
        inst = tsp.generate_instance(9, 5)
        trace = ptrnet.forward_decode(inst, params, cfg)
        tour, dists = reference_decode(inst.nodes, params, cfg)
        assert trace.tour == tour
        np.testing.assert_allclose(trace.step_distributions, dists, atol=1e-10)

    def test_two_nodes(self):
        inst = tsp.generate_instance(2, 0)
        trace = ptrnet.forward_decode(inst, ptrnet.init_params(SMALL, 0), SMALL)
        assert sorted(trace.tour) == [0, 1]
        last = trace.step_distributions[1]
        assert last[trace.tour[1]] == 1.0 and last[trace.tour[0]] == 0.0

    def test_two_node_relabel(self):
        # relabelling moves the point mass of step 2 to the other index
        inst = tsp.generate_instance(2, 3)
        swapped = tsp.Instance(inst.nodes[::-1])
        params = ptrnet.init_params(SMALL, 8)
        for case in (inst, swapped):
            trace = ptrnet.forward_decode(case, params, SMALL)
            assert trace.step_distributions[1][1 - trace.tour[0]] == 1.0

    def test_layout_error(self):
        with pytest.raises(LayoutError):
            ptrnet.forward_decode(self.NODES, np.zeros(10, dtype=np.float32), TINY)

    def test_numeric_error(self):
        params = np.zeros(ptrnet.param_count(TINY))
        sl, _ = ptrnet.param_layout(TINY)["attention.v"]
        params[sl] = np.inf
        with np.errstate(invalid="ignore"), pytest.raises(NumericError, match="step 0"):
            ptrnet.forward_decode(self.NODES, params, TINY)

    def test_sample_mode_determinism(self):
        cfg = ptrnet.NetworkConfig(8, 16, 1, decode_mode="sample")
        params = ptrnet.init_params(cfg, 0)
        inst = tsp.generate_instance(12, 1)
        a = ptrnet.forward_decode(inst, params, cfg, seed=5)
        b = ptrnet.forward_decode(inst, params, cfg, seed=5)
        assert a.tour == b.tour
        assert tsp.validate_tour(inst, a.tour).ok
        tours = {ptrnet.forward_decode(inst, params, cfg, seed=s).tour for s in range(10)}
        assert len(tours) > 1

    @settings(max_examples=60, deadline=None)
    @given(
        n=st.sampled_from([2, 3, 5, 20]),
        seed=st.integers(0, 10_000),
        scale=st.sampled_from([1.0, 10.0, 50.0]),
        mode=st.sampled_from(["greedy", "sample"]),
    )
    def test_trace_invariants(self, n, seed, scale, mode):
        cfg = ptrnet.NetworkConfig(4, 8, 2, decode_mode=mode)
        params = ptrnet.as_param_vector(ptrnet.init_params(cfg, seed) * scale)
        inst = tsp.generate_instance(n, seed)
        trace = ptrnet.forward_decode(inst, params, cfg, seed=seed)
        assert tsp.validate_tour(inst, trace.tour).ok
        for t, (p, masked) in enumerate(zip(trace.step_distributions, trace.masked)):
            assert masked == frozenset(trace.tour[:t])
            assert all(p[i] == 0.0 for i in masked)
            assert abs(p.sum() - 1.0) <= 1e-6
            assert np.count_nonzero(p) <= n - t


class TestBatch:
    def test_matches_single(self):
        params = ptrnet.init_params(SMALL, 4)
        ds = tsp.generate_dataset(20, 16, 2)
        batch = ptrnet.batch_decode(ds.instances, params, SMALL)
        single = [ptrnet.forward_decode(inst, params, SMALL).tour for inst in ds.instances]
        assert batch == single

    def test_batch_of_one_and_order(self):
        params = ptrnet.init_params(SMALL, 4)
        ds = tsp.generate_dataset(10, 6, 3)
        insts = list(ds.instances)
        assert ptrnet.batch_decode(insts[:1], params, SMALL) == [ptrnet.forward_decode(insts[0], params, SMALL).tour]
        order = [3, 0, 5, 1, 4, 2]
        straight = ptrnet.batch_decode(insts, params, SMALL)
        permuted = ptrnet.batch_decode([insts[i] for i in order], params, SMALL)
        assert permuted == [straight[i] for i in order]

    def test_mean_length_256(self):
        params = ptrnet.init_params(SMALL, 9)
        ds = tsp.generate_dataset(20, 256, 6)
        tours = ptrnet.batch_decode(ds.instances, params, SMALL)
        batch_mean = np.mean([tsp.tour_length(i, t) for i, t in zip(ds.instances, tours)])
        single_mean = np.mean(
            [tsp.tour_length(i, ptrnet.forward_decode(i, params, SMALL).tour) for i in ds.instances]
        )
        assert batch_mean == single_mean

    def test_mixed_n(self):
        with pytest.raises(InvalidDimensionError):
            ptrnet.batch_decode(
                [tsp.generate_instance(4, 0), tsp.generate_instance(5, 0)], ptrnet.init_params(TINY, 0), TINY
            )
