"""Translation-based knowledge-graph embeddings.

A triple (h, r, t) is scored by the L2 distance ``||E[h] + R[r] - E[t]||``;
lower is better.  Entity rows live on (or near) the unit sphere: they are
renormalized once per training epoch, relation rows never are.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class ModelConfig:
    """Embedding dimension and ranking margin."""

    dim: int = 50
    margin: float = 1.0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.margin <= 0:
            raise ValueError(f"margin must be positive, got {self.margin}")


@dataclass(eq=False)
class TransEModel:
    """Embedding tables: ``entities`` is (nE, d), ``relations`` is (nR, d), float64."""

    config: ModelConfig
    entities: np.ndarray
    relations: np.ndarray

    @property
    def num_entities(self) -> int:
        return self.entities.shape[0]

    @property
    def num_relations(self) -> int:
        return self.relations.shape[0]

    def copy(self) -> "TransEModel":
        return TransEModel(self.config, self.entities.copy(), self.relations.copy())


def init_embeddings(
    num_entities: int,
    num_relations: int,
    config: ModelConfig,
    rng: np.random.Generator,
) -> TransEModel:
    """Draw both tables uniform in [-6/sqrt(d), 6/sqrt(d)], then normalize entities.

    Entity rows are drawn before relation rows; with a fixed generator the
    result is fully determined.
    """
    bound = 6.0 / np.sqrt(config.dim)
    entities = rng.uniform(-bound, bound, size=(num_entities, config.dim))
    relations = rng.uniform(-bound, bound, size=(num_relations, config.dim))
    model = TransEModel(config, entities, relations)
    normalize_entities(model)
    return model


def normalize_entities(model: TransEModel) -> None:
    """Scale each entity row to unit L2 norm, in place.  Zero rows are left alone."""
    e = model.entities
    norms = np.sqrt(np.sum(e * e, axis=1))
    nonzero = norms > 0.0
    e[nonzero] /= norms[nonzero, None]


def score(model: TransEModel, triples: np.ndarray) -> np.ndarray | float:
    """L2 distance ||E[h] + R[r] - E[t]|| for one triple or a batch.

    ``triples`` is (3,) or (n, 3) integer ids; returns a float or an (n,)
    float64 array correspondingly.
    """
    triples = np.asarray(triples)
    single = triples.ndim == 1
    t2 = triples.reshape(-1, 3)
    v = model.entities[t2[:, 0]] + model.relations[t2[:, 1]] - model.entities[t2[:, 2]]
    d = np.sqrt(np.sum(v * v, axis=-1))
    return float(d[0]) if single else d


def save_checkpoint(model: TransEModel, path: str | Path) -> None:
    """Write both tables and the config to an ``.npz`` archive."""
    np.savez(
        Path(path),
        entities=model.entities,
        relations=model.relations,
        dim=np.int64(model.config.dim),
        margin=np.float64(model.config.margin),
    )


def load_checkpoint(path: str | Path) -> TransEModel:
    """Inverse of :func:`save_checkpoint`."""
    with np.load(Path(path)) as data:
        config = ModelConfig(dim=int(data["dim"]), margin=float(data["margin"]))
        model = TransEModel(
            config,
            np.ascontiguousarray(data["entities"], dtype=np.float64),
            np.ascontiguousarray(data["relations"], dtype=np.float64),
        )
    if model.entities.shape[1] != config.dim or model.relations.shape[1] != config.dim:
        raise ValueError("checkpoint table width does not match stored dim")
    return model
