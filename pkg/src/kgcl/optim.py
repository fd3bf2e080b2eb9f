"""Margin-ranking training loop with sparse Adam updates.

Each positive triple is paired with one corrupted-tail negative, drawn
uniformly over all entities without filtering, so a "negative" can collide
with a true triple.  The batch objective is the SUM of active hinge terms
(plus any externally supplied penalty); inactive pairs contribute nothing,
not even zero-valued gradient rows, which matters because Adam moments
decay only on rows that appear in a step's gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .transe import TransEModel, normalize_entities

ENTITIES = "entities"
RELATIONS = "relations"
TABLES = (ENTITIES, RELATIONS)


class NegativeSample(NamedTuple):
    """Positive triples (n, 3) paired one-to-one with corrupted tails (n,)."""

    positives: np.ndarray
    corrupt_tails: np.ndarray


def sample_negative(
    triples: np.ndarray, num_entities: int, rng: np.random.Generator
) -> NegativeSample:
    """Draw one uniform replacement tail per triple, unfiltered.

    The draw is over all ``num_entities`` ids including the original tail;
    no check against known true triples is made.
    """
    tails = rng.integers(0, num_entities, size=len(triples), dtype=np.int64)
    return NegativeSample(np.asarray(triples, dtype=np.int64), tails)


class SparseGradient:
    """Row-sparse gradient for the two embedding tables.

    Contributions are appended as (indices, vectors) chunks and only summed
    on :meth:`coalesce`.  Coalescing preserves the order contributions were
    added in: per row, vectors are summed left to right in chunk-insertion
    order, matching a plain sequential accumulation loop bit for bit.
    """

    def __init__(self) -> None:
        self._chunks: dict[str, list[tuple[np.ndarray, np.ndarray]]] = {
            ENTITIES: [],
            RELATIONS: [],
        }

    def add(self, table: str, indices: np.ndarray, vectors: np.ndarray) -> None:
        if table not in self._chunks:
            raise KeyError(f"unknown table {table!r}")
        indices = np.asarray(indices, dtype=np.int64)
        vectors = np.asarray(vectors, dtype=np.float64)
        if indices.ndim != 1 or vectors.shape != (len(indices),) + vectors.shape[1:]:
            raise ValueError("indices must be (n,) and vectors (n, d)")
        if len(indices) == 0:
            return
        self._chunks[table].append((indices, vectors))

    def merge(self, other: "SparseGradient") -> None:
        """Append the other gradient's chunks after this one's."""
        for table in TABLES:
            self._chunks[table].extend(other._chunks[table])

    def is_empty(self) -> bool:
        return all(not self._chunks[table] for table in TABLES)

    def coalesce(self, table: str) -> tuple[np.ndarray, np.ndarray] | None:
        """Sum duplicate rows; returns (unique_indices, summed_vectors) or None.

        Rows come back in ascending index order.  Per-row summation runs
        left to right in the order contributions were added (unbuffered
        indexed accumulation), so the result matches a plain sequential
        loop bit for bit.  numpy's pairwise-summing reductions would not.
        """
        chunks = self._chunks[table]
        if not chunks:
            return None
        if len(chunks) == 1:
            idx, vec = chunks[0]
        else:
            idx = np.concatenate([c[0] for c in chunks])
            vec = np.concatenate([c[1] for c in chunks], axis=0)
        uniq, inverse = np.unique(idx, return_inverse=True)
        summed = np.zeros((len(uniq), vec.shape[1]))
        np.add.at(summed, inverse, vec)
        return uniq, summed


# Gradient-producing hook: called once per batch with the current model,
# returns a SparseGradient to merge into the batch gradient.
PenaltyGradFn = Callable[[TransEModel], SparseGradient]


def margin_loss(model: TransEModel, sample: NegativeSample) -> np.ndarray:
    """Per-pair hinge max(0, margin + d_pos - d_neg) as an (n,) float64 array."""
    pos, neg_t = sample
    e, r = model.entities, model.relations
    vp = e[pos[:, 0]] + r[pos[:, 1]] - e[pos[:, 2]]
    vn = e[pos[:, 0]] + r[pos[:, 1]] - e[neg_t]
    dp = np.sqrt(np.sum(vp * vp, axis=-1))
    dn = np.sqrt(np.sum(vn * vn, axis=-1))
    return np.maximum(0.0, model.config.margin + dp - dn)


def loss_gradients(
    model: TransEModel, sample: NegativeSample
) -> tuple[float, int, SparseGradient]:
    """Summed batch loss, number of active pairs, and the gradient of the sum.

    Distance gradients are the unit residual vectors; the subgradient at an
    exactly-zero distance is taken as the zero vector.  Rows touched only by
    inactive pairs do not appear in the gradient at all.
    """
    pos, neg_t = sample
    e, r = model.entities, model.relations
    h, rel, t = pos[:, 0], pos[:, 1], pos[:, 2]
    vp = e[h] + r[rel] - e[t]
    vn = e[h] + r[rel] - e[neg_t]
    dp = np.sqrt(np.sum(vp * vp, axis=-1))
    dn = np.sqrt(np.sum(vn * vn, axis=-1))
    losses = model.config.margin + dp - dn
    loss_sum = float(np.sum(np.maximum(losses, 0.0)))

    grad = SparseGradient()
    active = np.flatnonzero(losses > 0.0)
    if len(active) == 0:
        return loss_sum, 0, grad

    def unit(v: np.ndarray, d: np.ndarray) -> np.ndarray:
        u = np.zeros_like(v)
        nz = d > 0.0
        u[nz] = v[nz] / d[nz, None]
        return u

    up = unit(vp[active], dp[active])
    un = unit(vn[active], dn[active])
    # chunk order: heads, positive tails, corrupted tails, then relations
    grad.add(ENTITIES, h[active], up - un)
    grad.add(ENTITIES, t[active], -up)
    grad.add(ENTITIES, neg_t[active], un)
    grad.add(RELATIONS, rel[active], up - un)
    return loss_sum, len(active), grad


@dataclass(frozen=True)
class TrainConfig:
    """Per-task training hyperparameters."""

    epochs: int = 20
    batch_size: int = 256
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")


@dataclass(eq=False)
class AdamState:
    """First/second moment tables plus the shared step counter.

    The counter advances once per :func:`adam_step` call; moments for rows
    absent from a step's gradient are left untouched.
    """

    m_entities: np.ndarray
    v_entities: np.ndarray
    m_relations: np.ndarray
    v_relations: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, num_entities: int, num_relations: int, dim: int) -> "AdamState":
        return cls(
            m_entities=np.zeros((num_entities, dim)),
            v_entities=np.zeros((num_entities, dim)),
            m_relations=np.zeros((num_relations, dim)),
            v_relations=np.zeros((num_relations, dim)),
        )

    def moments(self, table: str) -> tuple[np.ndarray, np.ndarray]:
        if table == ENTITIES:
            return self.m_entities, self.v_entities
        if table == RELATIONS:
            return self.m_relations, self.v_relations
        raise KeyError(f"unknown table {table!r}")


def adam_step(
    model: TransEModel,
    state: AdamState,
    grad: SparseGradient,
    config: TrainConfig,
) -> None:
    """One bias-corrected Adam update restricted to rows present in ``grad``.

    The step counter increments even when the gradient is empty, so the
    number of calls, not the number of touched rows, sets the bias
    correction.
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - config.beta1**t
    bc2 = 1.0 - config.beta2**t
    params = {ENTITIES: model.entities, RELATIONS: model.relations}
    for table in TABLES:
        coalesced = grad.coalesce(table)
        if coalesced is None:
            continue
        idx, g = coalesced
        m, v = state.moments(table)
        m[idx] = config.beta1 * m[idx] + (1.0 - config.beta1) * g
        v[idx] = config.beta2 * v[idx] + (1.0 - config.beta2) * (g * g)
        update = (m[idx] / bc1) / (np.sqrt(v[idx] / bc2) + config.eps)
        params[table][idx] -= config.learning_rate * update


@dataclass(eq=False)
class TrainLog:
    """Per-epoch training telemetry for one task."""

    num_task_triples: int
    num_replay_triples: int
    epoch_loss: np.ndarray = field(default_factory=lambda: np.zeros(0))
    epoch_pairs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    epoch_active: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def as_dict(self) -> dict:
        return {
            "num_task_triples": self.num_task_triples,
            "num_replay_triples": self.num_replay_triples,
            "epoch_loss": [float(x) for x in self.epoch_loss],
            "epoch_pairs": [int(x) for x in self.epoch_pairs],
            "epoch_active": [int(x) for x in self.epoch_active],
        }


def iter_batches(n: int, batch_size: int) -> Iterator[slice]:
    """Slices covering 0..n in order; the final short batch is kept."""
    for start in range(0, n, batch_size):
        yield slice(start, min(start + batch_size, n))


def train_task(
    model: TransEModel,
    state: AdamState,
    triples: np.ndarray,
    config: TrainConfig,
    seed: np.random.SeedSequence,
    penalty_grad_fn: PenaltyGradFn | None = None,
    replay: np.ndarray | None = None,
) -> TrainLog:
    """Train the model in place on one task's triples.

    Two independent child streams are spawned from ``seed``: one drives the
    epoch shuffles, the other the negative tails, so adding a penalty hook
    perturbs neither.  Replay triples, when given, join the shuffle pool of
    every epoch alongside the task's own triples.  Entity rows are
    renormalized at the start of each epoch; one Adam step is taken per
    batch whether or not any pair is active.
    """
    shuffle_ss, negative_ss = seed.spawn(2)
    shuffle_rng = np.random.Generator(np.random.PCG64(shuffle_ss))
    negative_rng = np.random.Generator(np.random.PCG64(negative_ss))

    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    if replay is not None and len(replay) > 0:
        pool = np.concatenate([triples, np.asarray(replay, dtype=np.int64)], axis=0)
    else:
        pool = triples

    log = TrainLog(
        num_task_triples=len(triples),
        num_replay_triples=len(pool) - len(triples),
        epoch_loss=np.zeros(config.epochs),
        epoch_pairs=np.zeros(config.epochs, dtype=np.int64),
        epoch_active=np.zeros(config.epochs, dtype=np.int64),
    )
    num_entities = model.num_entities

    for epoch in range(config.epochs):
        normalize_entities(model)
        if len(pool) == 0:
            continue
        perm = shuffle_rng.permutation(len(pool))
        shuffled = pool[perm]
        for batch in iter_batches(len(shuffled), config.batch_size):
            sample = sample_negative(shuffled[batch], num_entities, negative_rng)
            loss_sum, active, grad = loss_gradients(model, sample)
            if penalty_grad_fn is not None:
                grad.merge(penalty_grad_fn(model))
            adam_step(model, state, grad, config)
            log.epoch_loss[epoch] += loss_sum
            log.epoch_pairs[epoch] += len(sample.positives)
            log.epoch_active[epoch] += active
    return log
