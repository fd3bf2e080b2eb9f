"""Triple-file loading, vocabulary encoding, and task partitioning.

The on-disk format is the one used by the public FB15k-237 distribution:
``train.txt`` / ``valid.txt`` / ``test.txt``, UTF-8, one triple per line,
``head <TAB> relation <TAB> tail``.  Triples are encoded against dense
integer vocabularies built in first-appearance order (train, then valid,
then test), and the training set can be split into ordered tasks either by
relation round-robin or by a seeded random shuffle.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

RELATION_ROUNDROBIN = "relation_roundrobin"
RANDOM = "random"
PARTITION_STRATEGIES = (RELATION_ROUNDROBIN, RANDOM)


class RawTriple(NamedTuple):
    """A string-identified (head, relation, tail) fact."""

    head: str
    relation: str
    tail: str


def parse_triple_file(path: str | Path) -> list[RawTriple]:
    """Read tab-separated triples from ``path``, one per line.

    Blank lines are skipped.  A line with the wrong field count, or with a
    field that is empty after whitespace trimming, raises ``ValueError``
    naming the line number.
    """
    path = Path(path)
    triples: list[RawTriple] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\r\n").split("\t")
            if len(fields) != 3:
                raise ValueError(
                    f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}"
                )
            head, relation, tail = (f.strip() for f in fields)
            if not (head and relation and tail):
                raise ValueError(f"{path}:{lineno}: empty field in triple")
            triples.append(RawTriple(head, relation, tail))
    return triples


def write_triple_file(path: str | Path, triples: Sequence[RawTriple]) -> None:
    """Inverse of :func:`parse_triple_file`."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(f"{t.head}\t{t.relation}\t{t.tail}\n")


@dataclass(eq=False)
class KnowledgeGraph:
    """Integer-encoded entity/relation vocabularies plus the three triple splits.

    Triple splits are ``(n, 3)`` int64 arrays with columns (head, relation,
    tail).  Vocabularies are bijective: ``id2ent[ent2id[s]] == s``.
    """

    ent2id: dict[str, int]
    id2ent: list[str]
    rel2id: dict[str, int]
    id2rel: list[str]
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray

    @property
    def num_entities(self) -> int:
        return len(self.id2ent)

    @property
    def num_relations(self) -> int:
        return len(self.id2rel)

    def encode(self, triple: RawTriple) -> tuple[int, int, int]:
        return (
            self.ent2id[triple.head],
            self.rel2id[triple.relation],
            self.ent2id[triple.tail],
        )

    def decode(self, triple: Sequence[int]) -> RawTriple:
        h, r, t = (int(x) for x in triple)
        return RawTriple(self.id2ent[h], self.id2rel[r], self.id2ent[t])

    def all_triples(self) -> np.ndarray:
        """Concatenation of train, valid, and test (duplicates possible)."""
        return np.concatenate([self.train, self.valid, self.test], axis=0)


def _encode_split(
    triples: Sequence[RawTriple], ent2id: dict[str, int], rel2id: dict[str, int]
) -> np.ndarray:
    out = np.empty((len(triples), 3), dtype=np.int64)
    for i, (h, r, t) in enumerate(triples):
        out[i, 0] = ent2id[h]
        out[i, 1] = rel2id[r]
        out[i, 2] = ent2id[t]
    return out


def build_graph(
    train: Sequence[RawTriple],
    valid: Sequence[RawTriple] = (),
    test: Sequence[RawTriple] = (),
) -> KnowledgeGraph:
    """Assign ids in first-appearance order and encode all three splits.

    Entities and relations that occur only in valid/test are still admitted
    to the vocabulary, so every embedding row exists from initialization.
    Duplicate training triples are dropped (first occurrence kept).
    """
    ent2id: dict[str, int] = {}
    rel2id: dict[str, int] = {}
    for split in (train, valid, test):
        for h, r, t in split:
            if h not in ent2id:
                ent2id[h] = len(ent2id)
            if r not in rel2id:
                rel2id[r] = len(rel2id)
            if t not in ent2id:
                ent2id[t] = len(ent2id)

    seen: set[RawTriple] = set()
    train_unique: list[RawTriple] = []
    for t in train:
        if t not in seen:
            seen.add(t)
            train_unique.append(t)

    id2ent = [""] * len(ent2id)
    for s, i in ent2id.items():
        id2ent[i] = s
    id2rel = [""] * len(rel2id)
    for s, i in rel2id.items():
        id2rel[i] = s

    return KnowledgeGraph(
        ent2id=ent2id,
        id2ent=id2ent,
        rel2id=rel2id,
        id2rel=id2rel,
        train=_encode_split(train_unique, ent2id, rel2id),
        valid=_encode_split(valid, ent2id, rel2id),
        test=_encode_split(test, ent2id, rel2id),
    )


def load_triple_dataset(data_dir: str | Path) -> KnowledgeGraph:
    """Load ``train.txt`` / ``valid.txt`` / ``test.txt`` from a directory."""
    data_dir = Path(data_dir)
    return build_graph(
        parse_triple_file(data_dir / "train.txt"),
        parse_triple_file(data_dir / "valid.txt"),
        parse_triple_file(data_dir / "test.txt"),
    )


@dataclass(eq=False)
class TaskPartition:
    """Assignment of training (and matched evaluation) triples to ordered tasks.

    ``train_tasks`` are pairwise disjoint and union to the training set;
    ``eval_tasks`` are pairwise disjoint subsets of the test split.
    ``relation_assignment`` maps relation id to task index and is present
    only for the round-robin strategy.
    """

    strategy: str
    num_tasks: int
    train_tasks: list[np.ndarray]
    eval_tasks: list[np.ndarray]
    relation_assignment: np.ndarray | None = None

    def manifest(self) -> str:
        """Plain-text audit table of the partition."""
        lines = [f"# partition strategy={self.strategy} num_tasks={self.num_tasks}"]
        if self.relation_assignment is not None:
            lines.append("# columns: task relation_id train_triples")
            for task in range(self.num_tasks):
                relations = np.flatnonzero(self.relation_assignment == task)
                counts = {
                    int(r): int(np.sum(self.train_tasks[task][:, 1] == r))
                    for r in relations
                }
                for r in relations:
                    lines.append(f"{task}\t{int(r)}\t{counts[int(r)]}")
        lines.append("# columns: task train_triples eval_triples")
        for task in range(self.num_tasks):
            lines.append(
                f"{task}\t{len(self.train_tasks[task])}\t{len(self.eval_tasks[task])}"
            )
        return "\n".join(lines) + "\n"


def partition_relation_roundrobin(graph: KnowledgeGraph, num_tasks: int) -> TaskPartition:
    """Group triples by relation and deal relations to tasks round-robin.

    Relations are sorted by training-triple frequency, most frequent first,
    ties broken by ascending relation id, and the relation at sorted
    position ``p`` goes to task ``p mod num_tasks``.  All triples sharing a
    relation therefore land in the same task, and each test triple follows
    its relation's task to form the evaluation sets.
    """
    if num_tasks < 2:
        raise ValueError(f"num_tasks must be >= 2, got {num_tasks}")
    if num_tasks > graph.num_relations:
        raise ValueError(
            f"num_tasks={num_tasks} exceeds relation count {graph.num_relations}"
        )
    counts = np.bincount(graph.train[:, 1], minlength=graph.num_relations)
    if np.any(counts == 0):
        missing = np.flatnonzero(counts == 0)[:5].tolist()
        raise ValueError(f"relations without training triples: {missing} ...")

    # lexsort: last key is primary, so this is frequency-descending with
    # ascending-id tie-break.
    order = np.lexsort((np.arange(graph.num_relations), -counts))
    assignment = np.empty(graph.num_relations, dtype=np.int64)
    assignment[order] = np.arange(graph.num_relations) % num_tasks

    train_tasks = [
        graph.train[assignment[graph.train[:, 1]] == k] for k in range(num_tasks)
    ]
    eval_tasks = [
        graph.test[assignment[graph.test[:, 1]] == k] for k in range(num_tasks)
    ]
    return TaskPartition(
        strategy=RELATION_ROUNDROBIN,
        num_tasks=num_tasks,
        train_tasks=train_tasks,
        eval_tasks=eval_tasks,
        relation_assignment=assignment,
    )


def _chunk_sizes(n: int, num_tasks: int) -> list[int]:
    # first n mod num_tasks chunks receive one extra element
    base, extra = divmod(n, num_tasks)
    return [base + (1 if k < extra else 0) for k in range(num_tasks)]


def partition_random(
    graph: KnowledgeGraph, num_tasks: int, seed: int | np.random.SeedSequence
) -> TaskPartition:
    """Shuffle training triples with a seeded generator and cut into chunks.

    The test split is shuffled and cut by the same rule (one further draw
    from the same generator) to form the evaluation sets.  Pure function of
    (graph, num_tasks, seed).
    """
    if num_tasks < 2:
        raise ValueError(f"num_tasks must be >= 2, got {num_tasks}")
    if num_tasks > len(graph.train):
        raise ValueError(
            f"num_tasks={num_tasks} exceeds training-set size {len(graph.train)}"
        )
    rng = np.random.default_rng(seed)

    def cut(triples: np.ndarray) -> list[np.ndarray]:
        perm = rng.permutation(len(triples))
        shuffled = triples[perm]
        sizes = _chunk_sizes(len(triples), num_tasks)
        bounds = np.cumsum([0] + sizes)
        return [shuffled[bounds[k] : bounds[k + 1]] for k in range(num_tasks)]

    train_tasks = cut(graph.train)
    eval_tasks = cut(graph.test)
    return TaskPartition(
        strategy=RANDOM,
        num_tasks=num_tasks,
        train_tasks=train_tasks,
        eval_tasks=eval_tasks,
    )
