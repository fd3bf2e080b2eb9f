"""Shared fixtures: tiny handmade graphs, seeded models, dataset gating."""

import os
from pathlib import Path

import numpy as np
import pytest

from kgcl.dataset import RawTriple, build_graph
from kgcl.seeds import make_rng
from kgcl.transe import ModelConfig, init_embeddings


def fb15k_dir() -> Path | None:
    """Benchmark directory, if present: $KGCL_DATA_DIR or ./data/fb15k-237."""
    env = os.environ.get("KGCL_DATA_DIR")
    candidates = [Path(env)] if env else []
    candidates.append(Path(__file__).resolve().parent.parent / "data" / "fb15k-237")
    for cand in candidates:
        if cand.is_dir() and (cand / "train.txt").is_file():
            return cand
    return None


requires_fb15k = pytest.mark.skipif(
    fb15k_dir() is None,
    reason="benchmark triples not found (set KGCL_DATA_DIR or place data/fb15k-237)",
)


def make_model(num_entities: int, num_relations: int, dim: int = 8, seed: int = 0):
    return init_embeddings(
        num_entities, num_relations, ModelConfig(dim=dim), make_rng(seed, "init")
    )


@pytest.fixture
def tiny_graph():
    """Six entities, three relations, all splits populated, known by hand."""
    train = [
        RawTriple("a", "r0", "b"),
        RawTriple("a", "r0", "c"),
        RawTriple("b", "r1", "c"),
        RawTriple("c", "r1", "d"),
        RawTriple("d", "r2", "e"),
        RawTriple("e", "r2", "f"),
        RawTriple("f", "r0", "a"),
        RawTriple("b", "r2", "d"),
    ]
    valid = [RawTriple("a", "r1", "d"), RawTriple("c", "r2", "e")]
    test = [
        RawTriple("b", "r0", "d"),
        RawTriple("d", "r1", "f"),
        RawTriple("e", "r0", "c"),
    ]
    return build_graph(train, valid, test)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
