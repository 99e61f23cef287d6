import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from textlink.features import (EmbeddingConfig, FeatureProvider, MissingFeatureError,
                               assemble_feature_matrix, component_embedding, embed_attributes,
                               embed_scalar, normalize_to_pivot, raw_node_features)
from textlink.geometry import TextComponent
from textlink.graph import build_local_graph


def test_zero_embeds_to_alternating_pattern():
    e = embed_scalar(0.0)
    assert np.array_equal(e[0::2], np.ones(8)) and np.array_equal(e[1::2], np.zeros(8))


def test_known_values_for_c_eps_four():
    e = embed_scalar(10.0, EmbeddingConfig(c_eps=4))
    ref = [math.cos(10), math.sin(10), math.cos(10 / math.sqrt(1000)), math.sin(10 / math.sqrt(1000))]
    assert e == pytest.approx(ref, abs=1e-15)
    assert e == pytest.approx([-0.83907, -0.54402, 0.95042, 0.31098], abs=5e-6)


@given(st.floats(-5000, 5000), st.sampled_from([2, 4, 8, 16, 32]))
def test_pair_norm_identity(z, c):
    e = embed_scalar(z, EmbeddingConfig(c_eps=c))
    assert np.all(np.abs(e[0::2] ** 2 + e[1::2] ** 2 - 1) < 1e-12)


@pytest.mark.parametrize("c", [0, 3, -2])
def test_invalid_c_eps(c):
    with pytest.raises(ValueError):
        EmbeddingConfig(c_eps=c)


def test_component_embedding_slot_by_slot():
    rng = np.random.default_rng(3)
    for _ in range(10):
        c = TextComponent.from_angle(*rng.uniform(0, 600, 2), rng.uniform(5, 40),
                                     rng.uniform(8, 24), rng.uniform(-3, 3))
        e = component_embedding(c)
        assert e.shape == (96,)
        attrs = [c.x, c.y, c.h, c.w, c.cos_t, c.sin_t]
        for a, z in enumerate(attrs):
            for i in range(8):
                lam = 1000 ** (2 * i / 16)
                assert e[16 * a + 2 * i] == pytest.approx(math.cos(z / lam), abs=1e-12)
                assert e[16 * a + 2 * i + 1] == pytest.approx(math.sin(z / lam), abs=1e-12)
        assert np.allclose(embed_attributes(c.attributes()[None])[0], e, atol=0, rtol=0)


def test_all_zero_attributes_pattern():
    c = TextComponent(0.0, 0.0, 1.0, 1.0)
    e = embed_attributes(np.zeros((1, 6)))[0]
    assert np.array_equal(e, np.tile([1.0, 0.0], 48))
    assert component_embedding(c).shape == (96,)


def scene_graph():
    comps = [TextComponent(10.0 * k, 3.0 * (k % 2), 12, 8) for k in range(12)]
    return comps, build_local_graph(5, comps, 200, 200)


def test_feature_matrix_shape_and_pivot_row():
    comps, g = scene_graph()
    x = assemble_feature_matrix(g, comps)
    assert x.shape == (len(g.nodes), 96)
    assert np.all(x[0] == 0) and np.all(np.isfinite(x))


def test_shift_invariance():
    comps, g = scene_graph()
    raw = raw_node_features(g.nodes, comps)
    shift = np.random.default_rng(0).normal(size=raw.shape[1])
    assert np.allclose(normalize_to_pivot(raw + shift), normalize_to_pivot(raw), atol=1e-12)


def test_external_provider(tmp_path):
    comps, g = scene_graph()
    vecs = {i: np.full(5, float(i)) for i in range(len(comps))}
    prov = FeatureProvider(vecs, 5)
    assert prov.mode == "external"
    x = assemble_feature_matrix(g, comps, prov)
    assert x.shape == (len(g.nodes), 101)
    assert x[1, :5] == pytest.approx(np.full(5, g.nodes[1] - g.nodes[0]))
    prov.save(tmp_path / "f.json")
    back = FeatureProvider.from_file(tmp_path / "f.json")
    assert np.array_equal(assemble_feature_matrix(g, comps, back), x)
    assert json.loads((tmp_path / "f.json").read_text())["dim"] == 5


def test_missing_external_vector_names_node():
    comps, g = scene_graph()
    prov = FeatureProvider({i: np.zeros(2) for i in range(3)}, 2)
    with pytest.raises(MissingFeatureError, match="component"):
        assemble_feature_matrix(g, comps, prov)
    with pytest.raises(ValueError):
        FeatureProvider({0: np.zeros(3)}, 2)
