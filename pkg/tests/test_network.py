import numpy as np
import pytest

from macroflow import Canvas, Macro, ModelConfig, Netlist, PlacementInstance, VelocityModel, time_embed
from macroflow.autodiff import Tensor
from macroflow.network import _graph_arrays
from macroflow.training import make_training_pair

from conftest import random_instance
from helpers import model_gradcheck, perturb_params

SMALL = ModelConfig(hidden_dim=16, num_blocks=2, num_heads=2, time_dim=8)


class TestTimeEmbedding:
    def test_t_zero(self):
        emb = time_embed(0.0, 16)
        np.testing.assert_array_equal(emb[0::2], 0.0)
        np.testing.assert_array_equal(emb[1::2], 1.0)

    def test_range(self, rng):
        for t in rng.uniform(0, 1, size=50):
            emb = time_embed(float(t), 32)
            assert np.all(emb >= -1.0) and np.all(emb <= 1.0)

    def test_lipschitz_bound_from_max_frequency(self, rng):
        # |d/dt sin(w t)| <= w, so a 1e-7 nudge moves entries by at most w_max * 1e-7
        max_freq = 100.0
        for t in rng.uniform(0, 1 - 1e-7, size=20):
            a = time_embed(float(t), 32, max_freq)
            b = time_embed(float(t) + 1e-7, 32, max_freq)
            assert np.max(np.abs(a - b)) <= max_freq * 1e-7 * (1 + 1e-9) + 1e-15

    def test_odd_dim_rejected(self):
        with pytest.raises(ValueError):
            time_embed(0.5, 7)


class TestForward:
    def test_zero_init_decoder_gives_zero_velocity(self, rng):
        model = VelocityModel(SMALL, seed=0)
        inst = random_instance(rng, n_macros=5, n_edges=6)
        out = model.velocity(rng.normal(size=(5, 2)), 0.4, inst)
        np.testing.assert_array_equal(out, np.zeros((5, 2)))

    def test_deterministic(self, rng):
        model = VelocityModel(SMALL, seed=1)
        perturb_params(model, rng)
        inst = random_instance(rng, n_macros=6, n_edges=8)
        x = rng.normal(size=(6, 2))
        a = model.velocity(x, 0.3, inst)
        b = model.velocity(x, 0.3, inst)
        np.testing.assert_array_equal(a, b)

    def test_size_agnostic(self, rng):
        model = VelocityModel(SMALL, seed=2)
        perturb_params(model, rng)
        for n in (4, 16, 64):
            inst = random_instance(rng, n_macros=n, n_edges=2 * n)
            out = model.velocity(rng.normal(size=(n, 2)), 0.5, inst)
            assert out.shape == (n, 2)
            assert np.all(np.isfinite(out))

    def test_permutation_equivariance(self, rng):
        model = VelocityModel(SMALL, seed=3)
        perturb_params(model, rng)
        inst = random_instance(rng, n_macros=7, n_edges=12)
        x = rng.normal(size=(7, 2))
        out = model.velocity(x, 0.25, inst)

        perm = rng.permutation(7)
        inverse = np.argsort(perm)
        macros = tuple(
            Macro(id=k, width=inst.macros[p].width, height=inst.macros[p].height, pins=inst.macros[p].pins)
            for k, p in enumerate(perm)
        )
        edges = inst.netlist.edges.copy()
        edges[:, 0] = inverse[edges[:, 0]]
        edges[:, 2] = inverse[edges[:, 2]]
        permuted = PlacementInstance(inst.canvas, macros, Netlist(edges))
        out_perm = model.velocity(x[perm], 0.25, permuted)
        # float summation order changes under permutation, hence the tiny tolerance
        np.testing.assert_allclose(out_perm, out[perm], atol=1e-12, rtol=1e-12)

    def test_zero_edge_graph_layer_is_identity(self, rng):
        model = VelocityModel(SMALL, seed=4)
        perturb_params(model, rng)
        h = Tensor(rng.normal(size=(5, SMALL.hidden_dim)))
        empty = np.zeros(0, dtype=np.intp)
        out = model._gat_layer(h, "block0.gat.", empty, empty, np.zeros((0, 4)), 5)
        np.testing.assert_array_equal(out.data, h.data)

    def test_nonfinite_input_rejected(self, rng):
        model = VelocityModel(SMALL, seed=5)
        inst = random_instance(rng, n_macros=3, n_edges=2)
        bad = np.full((3, 2), np.nan)
        with pytest.raises(ValueError, match="non-finite"):
            model.velocity(bad, 0.1, inst)

    def test_directed_edges_cover_both_directions(self, rng):
        inst = random_instance(rng, n_macros=4, n_edges=3)
        src, dst, feat = _graph_arrays(inst)
        assert len(src) == 6 and feat.shape == (6, 4)
        np.testing.assert_array_equal(src[:3], dst[3:])


class TestBackward:
    def test_full_model_matches_finite_differences(self, rng):
        model = VelocityModel(SMALL, seed=6)
        perturb_params(model, rng)
        inst = random_instance(rng, n_macros=4, n_edges=6)
        x_t, t, target = make_training_pair(inst, rng.uniform(-0.5, 0.5, size=(4, 2)), "uniform", rng)
        max_rel, worst = model_gradcheck(model, [(inst, x_t, t, target)], rng, n_coords=60)
        assert max_rel <= 1e-4, f"worst coordinate {worst}"

    def test_unused_parameters_get_no_gradient(self, rng):
        # with a zero decoder head, upstream parameters receive zero gradient
        model = VelocityModel(SMALL, seed=7)
        inst = random_instance(rng, n_macros=3, n_edges=2)
        x_t = rng.normal(size=(3, 2))
        model.zero_grad()
        out = model.forward(x_t, 0.5, inst)
        (out * out).sum().backward()
        assert np.allclose(model.params["enc.w"].grad, 0.0)


class TestCheckpoint:
    def test_roundtrip_is_bit_exact(self, tmp_path, rng):
        model = VelocityModel(SMALL, seed=8)
        perturb_params(model, rng)
        first = tmp_path / "m1.ckpt"
        second = tmp_path / "m2.ckpt"
        model.save(first)
        loaded = VelocityModel.load(first)
        loaded.save(second)
        assert first.read_bytes() == second.read_bytes()

    def test_loaded_model_matches_float32_precision(self, tmp_path, rng):
        model = VelocityModel(SMALL, seed=9)
        perturb_params(model, rng)
        path = tmp_path / "m.ckpt"
        model.save(path)
        loaded = VelocityModel.load(path)
        assert loaded.config == model.config
        inst = random_instance(rng, n_macros=5, n_edges=5)
        x = rng.normal(size=(5, 2))
        np.testing.assert_allclose(loaded.velocity(x, 0.3, inst), model.velocity(x, 0.3, inst), atol=1e-5)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"not a checkpoint at all")
        with pytest.raises(ValueError, match="bad magic"):
            VelocityModel.load(path)

    def test_hyperparameters_preserved(self, tmp_path):
        cfg = ModelConfig(hidden_dim=32, num_blocks=1, num_heads=4, time_dim=16)
        model = VelocityModel(cfg, seed=10)
        path = tmp_path / "m.ckpt"
        model.save(path)
        assert VelocityModel.load(path).config == cfg

    def test_param_count_deterministic_from_config(self):
        a = VelocityModel(SMALL, seed=0)
        b = VelocityModel(SMALL, seed=99)
        assert a.num_params() == b.num_params()
