"""Node features for local graphs.

Each component's geometry (x, y, h, w, cos, sin) is lifted with sinusoids of
geometrically spaced wavelengths, optionally prefixed by an externally
supplied per-component vector, and every row is then expressed relative to
the pivot row.
"""
from dataclasses import dataclass
import json
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np

from textlink.geometry import TextComponent

WAVELENGTH_BASE = 1000.0


class MissingFeatureError(LookupError):
    pass


@dataclass(frozen=True)
class EmbeddingConfig:
    c_eps: int = 16
    wavelength_base: float = WAVELENGTH_BASE
    scale: float = 1.0

    def __post_init__(self):
        if self.c_eps < 2 or self.c_eps % 2:
            raise ValueError(f"c_eps must be an even integer >= 2, got {self.c_eps}")

    @property
    def geometric_dim(self) -> int:
        return 6 * self.c_eps

    def inverse_wavelengths(self) -> np.ndarray:
        i = np.arange(self.c_eps // 2)
        return 1.0 / self.wavelength_base ** (2.0 * i / self.c_eps)


class FeatureProvider:
    """External per-component vectors, or nothing in geometric-only mode."""

    def __init__(self, vectors: Optional[Dict[int, np.ndarray]] = None, dim: int = 0):
        self.vectors = vectors
        self.dim = dim if vectors is not None else 0
        if vectors is not None:
            for k, v in vectors.items():
                if len(v) != dim:
                    raise ValueError(f"external vector for component {k} has width {len(v)}, "
                                     f"expected {dim}")

    @property
    def mode(self) -> str:
        return "geometric" if self.vectors is None else "external"

    def get(self, idx: int) -> np.ndarray:
        if self.vectors is None:
            return np.zeros(0)
        try:
            return self.vectors[idx]
        except KeyError:
            raise MissingFeatureError(f"no external feature vector for component {idx}") from None

    @classmethod
    def geometric(cls) -> "FeatureProvider":
        return cls()

    @classmethod
    def from_file(cls, path) -> "FeatureProvider":
        d = json.loads(Path(path).read_text())
        dim = int(d["dim"])
        vectors = {int(k): np.asarray(v, dtype=float) for k, v in d["vectors"].items()}
        return cls(vectors, dim)

    def save(self, path) -> None:
        vecs = {} if self.vectors is None else {str(k): v.tolist() for k, v in self.vectors.items()}
        Path(path).write_text(json.dumps({"dim": self.dim, "vectors": vecs}))


def embed_scalar(z: float, cfg: EmbeddingConfig = EmbeddingConfig()) -> np.ndarray:
    """Interleaved ``cos, sin`` of ``z`` at ``c_eps / 2`` wavelengths."""
    arg = z * cfg.scale * cfg.inverse_wavelengths()
    out = np.empty(cfg.c_eps)
    out[0::2] = np.cos(arg)
    out[1::2] = np.sin(arg)
    return out


def embed_attributes(attrs: np.ndarray, cfg: EmbeddingConfig = EmbeddingConfig()) -> np.ndarray:
    """Vectorised embedding of an (n, 6) attribute array into (n, 6 * c_eps)."""
    attrs = np.asarray(attrs, dtype=float).reshape(-1, 6)
    arg = attrs[:, :, None] * cfg.scale * cfg.inverse_wavelengths()[None, None, :]
    out = np.empty(attrs.shape + (cfg.c_eps,))
    out[..., 0::2] = np.cos(arg)
    out[..., 1::2] = np.sin(arg)
    return out.reshape(len(attrs), -1)


def component_embedding(c: TextComponent, cfg: EmbeddingConfig = EmbeddingConfig()) -> np.ndarray:
    return np.concatenate([embed_scalar(z, cfg) for z in c.attributes()])


def raw_node_features(nodes: Sequence[int], comps: Sequence[TextComponent],
                      provider: Optional[FeatureProvider] = None,
                      cfg: EmbeddingConfig = EmbeddingConfig()) -> np.ndarray:
    provider = provider or FeatureProvider.geometric()
    attrs = np.array([comps[i].attributes() for i in nodes]).reshape(-1, 6)
    geo = embed_attributes(attrs, cfg)
    if provider.vectors is None:
        return geo
    ext = np.stack([provider.get(i) for i in nodes]).reshape(len(nodes), provider.dim)
    return np.concatenate([ext, geo], axis=1)


def normalize_to_pivot(raw: np.ndarray) -> np.ndarray:
    """Subtract the pivot (first) row from every row."""
    return raw - raw[0:1]


def assemble_feature_matrix(g, comps: Sequence[TextComponent],
                            provider: Optional[FeatureProvider] = None,
                            cfg: EmbeddingConfig = EmbeddingConfig()) -> np.ndarray:
    return normalize_to_pivot(raw_node_features(g.nodes, comps, provider, cfg))
