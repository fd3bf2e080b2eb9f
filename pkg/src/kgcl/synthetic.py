"""Small synthetic knowledge graphs for demos and self-contained runs.

The block generator assigns entities to groups and makes each relation a
bridge between a fixed pair of groups, so translations are learnable.
Dense random pairing gives a quick generic graph; matching-based pairing
makes each relation a near-bijection the model can fit almost exactly,
which is what produces visible forgetting dynamics at toy scale.  Every
relation gets its own train/valid/test share, keeping both partition
strategies and the per-task evaluation sets non-degenerate.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset import KnowledgeGraph, RawTriple, build_graph, write_triple_file


def make_random_triples(
    num_entities: int,
    num_relations: int,
    num_triples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Distinct uniform (h, r, t) rows; count is capped by the possible total."""
    cap = num_entities * num_entities * num_relations
    num_triples = min(num_triples, cap)
    seen: set[tuple[int, int, int]] = set()
    rows: list[tuple[int, int, int]] = []
    while len(rows) < num_triples:
        h = int(rng.integers(num_entities))
        r = int(rng.integers(num_relations))
        t = int(rng.integers(num_entities))
        if (h, r, t) not in seen:
            seen.add((h, r, t))
            rows.append((h, r, t))
    return np.asarray(rows, dtype=np.int64).reshape(-1, 3)


def make_block_dataset(
    num_entities: int = 120,
    num_relations: int = 9,
    num_groups: int = 6,
    triples_per_relation: int = 160,
    valid_fraction: float = 0.1,
    test_fraction: float = 0.15,
    pairing: str = "random",
    eval_within_train: bool = False,
    seed: int = 0,
) -> tuple[list[RawTriple], list[RawTriple], list[RawTriple]]:
    """String-triple splits for a group-structured random graph.

    Entities are dealt to groups round-robin; relation r links heads from
    one group to tails from another (possibly the same).  With
    ``pairing="random"`` the links are dense uniform pairs; with
    ``pairing="matching"`` each round pairs every head with a distinct
    tail, so relations are near-bijections a translation model can fit
    almost exactly.

    Random pairings carry no statistical regularity, so genuinely held-out
    triples are unpredictable no matter how well the model trains.  For
    forgetting demos set ``eval_within_train=True``: valid/test are then
    sampled from the training pairs (which all stay in train), and the
    metric measures retention of learned facts, the quantity sequential
    training actually destroys.  Splits are cut per relation so each
    relation keeps at least one training triple and, when the fractions
    allow, shows up in valid and test too.
    """
    if pairing not in ("random", "matching"):
        raise ValueError(f"unknown pairing mode: {pairing!r}")
    rng = np.random.default_rng(seed)
    groups = [np.arange(g, num_entities, num_groups) for g in range(num_groups)]

    train: list[RawTriple] = []
    valid: list[RawTriple] = []
    test: list[RawTriple] = []
    for r in range(num_relations):
        src, dst = rng.integers(num_groups, size=2)
        heads, tails = groups[src], groups[dst]
        seen: set[tuple[int, int]] = set()
        pairs: list[tuple[int, int]] = []
        cap = len(heads) * len(tails)
        need = min(triples_per_relation, cap)
        while len(pairs) < need:
            if pairing == "matching":
                before = len(pairs)
                perm = rng.permutation(len(tails))
                for i in rng.permutation(len(heads)):
                    h = int(heads[i])
                    t = int(tails[perm[i % len(tails)]])
                    if (h, t) not in seen and len(pairs) < need:
                        seen.add((h, t))
                        pairs.append((h, t))
                if len(pairs) == before:
                    # permutations stopped landing on unseen pairs; finish by scan
                    for h in heads:
                        for t in tails:
                            if (int(h), int(t)) not in seen and len(pairs) < need:
                                seen.add((int(h), int(t)))
                                pairs.append((int(h), int(t)))
            else:
                h = int(heads[rng.integers(len(heads))])
                t = int(tails[rng.integers(len(tails))])
                if (h, t) not in seen:
                    seen.add((h, t))
                    pairs.append((h, t))
        raw = [RawTriple(f"e{h}", f"rel{r}", f"e{t}") for h, t in pairs]
        n = len(raw)
        n_test = int(round(test_fraction * n))
        n_valid = int(round(valid_fraction * n))
        if eval_within_train:
            train.extend(raw)
            picks = rng.permutation(n)
            test.extend(raw[i] for i in picks[:n_test])
            valid.extend(raw[i] for i in picks[n_test : n_test + n_valid])
        else:
            n_train = n - n_test - n_valid
            if n_train < 1:
                n_train, n_valid, n_test = 1, 0, n - 1
            train.extend(raw[:n_train])
            valid.extend(raw[n_train : n_train + n_valid])
            test.extend(raw[n_train + n_valid :])
    return train, valid, test


def make_block_graph(**kwargs) -> KnowledgeGraph:
    """Encoded form of :func:`make_block_dataset`."""
    train, valid, test = make_block_dataset(**kwargs)
    return build_graph(train, valid, test)


def write_synthetic_dataset(data_dir: str | Path, **kwargs) -> Path:
    """Write a block dataset as train/valid/test.txt under ``data_dir``."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    train, valid, test = make_block_dataset(**kwargs)
    write_triple_file(data_dir / "train.txt", train)
    write_triple_file(data_dir / "valid.txt", valid)
    write_triple_file(data_dir / "test.txt", test)
    return data_dir
