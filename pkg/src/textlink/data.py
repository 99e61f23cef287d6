"""Turning scenes into network-ready local-graph samples."""
from typing import Iterable, List, Optional, Sequence

import numpy as np

from textlink.features import EmbeddingConfig, FeatureProvider, assemble_feature_matrix
from textlink.gcn import GraphSample, normalized_laplacian
from textlink.geometry import TextComponent
from textlink.graph import LocalGraph, NeighborIndex, select_training_pivots
from textlink.synth import GeneratorConfig, NoiseModel, Scene, generate_scene, perturb_components


def graph_to_sample(g: LocalGraph, comps: Sequence[TextComponent],
                    provider: Optional[FeatureProvider] = None,
                    cfg: EmbeddingConfig = EmbeddingConfig()) -> GraphSample:
    x = assemble_feature_matrix(g, comps, provider, cfg)
    return GraphSample(x, normalized_laplacian(g.adjacency), g.one_hop_positions, g.labels)


def scene_training_graphs(scene: Scene, xi: float = 0.75) -> List[LocalGraph]:
    comps = scene.components
    index = NeighborIndex(comps, scene.width, scene.height)
    return select_training_pivots(comps, scene.width, scene.height, xi=xi, index=index)


def samples_from_scenes(scenes: Iterable[Scene], max_graphs: Optional[int] = None,
                        provider: Optional[FeatureProvider] = None,
                        cfg: EmbeddingConfig = EmbeddingConfig(), xi: float = 0.75) -> List[GraphSample]:
    out: List[GraphSample] = []
    for scene in scenes:
        for g in scene_training_graphs(scene, xi):
            out.append(graph_to_sample(g, scene.components, provider, cfg))
            if max_graphs is not None and len(out) >= max_graphs:
                return out
    return out


def noisy_scene(seed: int, config: Optional[GeneratorConfig] = None,
                noise: Optional[NoiseModel] = None) -> Scene:
    """A generated scene whose components went through the proposal-noise model."""
    scene = generate_scene(config, seed)
    scene.components = perturb_components(scene.components, noise, seed=seed + 7919, scene=scene)
    return scene


def synthetic_training_set(n_graphs: int, seed: int = 0,
                           config: Optional[GeneratorConfig] = None,
                           noise: Optional[NoiseModel] = None,
                           cfg: EmbeddingConfig = EmbeddingConfig()) -> List[GraphSample]:
    """At least ``n_graphs`` labelled samples drawn from consecutive scene seeds."""
    out: List[GraphSample] = []
    s = seed
    while len(out) < n_graphs:
        out.extend(samples_from_scenes([noisy_scene(s, config, noise)], n_graphs - len(out),
                                       cfg=cfg))
        s += 1
    return out


def label_balance(samples: Sequence[GraphSample]) -> float:
    labels = np.concatenate([s.labels for s in samples])
    return float(labels.mean())
