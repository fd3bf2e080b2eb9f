"""Weight anchoring and replay for sequential training.

After each task the trainer can snapshot the parameters together with a
diagonal Fisher estimate; later tasks then pay a quadratic penalty for
moving anchored rows.  Anchors are kept per task and never merged, so the
penalty (and its gradient) is a sum over all previous tasks.  The replay
alternative keeps a small per-task sample of training triples and mixes it
into later tasks' epochs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .optim import ENTITIES, RELATIONS, SparseGradient, iter_batches, loss_gradients, sample_negative
from .transe import TransEModel

REPLAY_RANDOM = "random"
REPLAY_WAVE = "wave"
REPLAY_MODES = (REPLAY_RANDOM, REPLAY_WAVE)


@dataclass(frozen=True)
class EwcConfig:
    """Penalty strength; zero disables anchoring entirely."""

    lam: float = 1.0
    fisher_batch_size: int = 256

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.fisher_batch_size < 1:
            raise ValueError(f"fisher_batch_size must be >= 1, got {self.fisher_batch_size}")


@dataclass(eq=False)
class FisherDiagonal:
    """Per-parameter curvature estimate, same shapes as the embedding tables.

    Rows of parameters never touched by the estimating task are exactly
    zero, which later lets the penalty restrict itself to the touched rows
    without changing its value.
    """

    entities: np.ndarray
    relations: np.ndarray


def compute_fisher_diagonal(
    model: TransEModel,
    triples: np.ndarray,
    seed: np.random.SeedSequence,
    batch_size: int = 256,
) -> FisherDiagonal:
    """Mean over batches of the squared batch-loss gradient.

    Batches walk the triples in stored order; negatives are drawn fresh
    from ``seed`` rather than reusing training draws, so estimating the
    diagonal never perturbs the training streams.  The gradient is the
    plain margin loss one, penalty-free.  The model is not modified.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    fe = np.zeros_like(model.entities)
    fr = np.zeros_like(model.relations)
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    num_batches = 0
    for batch in iter_batches(len(triples), batch_size):
        sample = sample_negative(triples[batch], model.num_entities, rng)
        _, _, grad = loss_gradients(model, sample)
        for table, acc in ((ENTITIES, fe), (RELATIONS, fr)):
            coalesced = grad.coalesce(table)
            if coalesced is None:
                continue
            idx, g = coalesced
            acc[idx] += g * g
        num_batches += 1
    if num_batches > 0:
        fe /= num_batches
        fr /= num_batches
    return FisherDiagonal(entities=fe, relations=fr)


@dataclass(eq=False)
class EwcAnchor:
    """Parameter snapshot plus Fisher diagonal taken after one task.

    ``entity_rows`` / ``relation_rows`` cache which rows carry any nonzero
    Fisher mass; penalty terms outside them vanish identically.
    """

    task_index: int
    entities: np.ndarray
    relations: np.ndarray
    fisher: FisherDiagonal
    entity_rows: np.ndarray = field(init=False)
    relation_rows: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.entity_rows = np.flatnonzero(np.any(self.fisher.entities != 0.0, axis=1))
        self.relation_rows = np.flatnonzero(np.any(self.fisher.relations != 0.0, axis=1))


def make_anchor(task_index: int, model: TransEModel, fisher: FisherDiagonal) -> EwcAnchor:
    """Snapshot the current parameters (copies, not views) with their Fisher."""
    return EwcAnchor(
        task_index=task_index,
        entities=model.entities.copy(),
        relations=model.relations.copy(),
        fisher=fisher,
    )


def ewc_penalty(model: TransEModel, anchors: list[EwcAnchor], config: EwcConfig) -> float:
    """Sum over anchors of (lam / 2) * sum_j F_j * (theta_j - theta*_j)^2."""
    if config.lam == 0.0 or not anchors:
        return 0.0
    total = 0.0
    for anchor in anchors:
        re, rr = anchor.entity_rows, anchor.relation_rows
        de = model.entities[re] - anchor.entities[re]
        dr = model.relations[rr] - anchor.relations[rr]
        total += float(np.sum(anchor.fisher.entities[re] * de * de))
        total += float(np.sum(anchor.fisher.relations[rr] * dr * dr))
    return 0.5 * config.lam * total


def ewc_penalty_gradients(
    model: TransEModel, anchors: list[EwcAnchor], config: EwcConfig
) -> SparseGradient:
    """Gradient of :func:`ewc_penalty`: lam * F_j * (theta - theta*_j) per anchor.

    With ``lam == 0`` the result is empty rather than a zero-valued gradient
    on the anchored rows.  The distinction matters: zero-valued rows would
    still be "present" to the optimizer and decay its moments, so only an
    empty gradient leaves a run bit-identical to one with no penalty at all.
    """
    grad = SparseGradient()
    if config.lam == 0.0 or not anchors:
        return grad
    for anchor in anchors:
        re, rr = anchor.entity_rows, anchor.relation_rows
        ge = config.lam * anchor.fisher.entities[re] * (model.entities[re] - anchor.entities[re])
        gr = config.lam * anchor.fisher.relations[rr] * (model.relations[rr] - anchor.relations[rr])
        grad.add(ENTITIES, re, ge)
        grad.add(RELATIONS, rr, gr)
    return grad


@dataclass(eq=False)
class ReplayBuffer:
    """Per-task samples of training triples, pooled for later tasks."""

    mode: str
    selections: list[np.ndarray] = field(default_factory=list)

    def add_task(self, selection: np.ndarray) -> None:
        self.selections.append(np.asarray(selection, dtype=np.int64).reshape(-1, 3))

    def pool(self) -> np.ndarray:
        """Everything stored so far, in task order, as one (m, 3) array."""
        if not self.selections:
            return np.zeros((0, 3), dtype=np.int64)
        return np.concatenate(self.selections, axis=0)

    def __len__(self) -> int:
        return sum(len(s) for s in self.selections)


def _wave_positions(n: int, size: int, num_waves: int) -> np.ndarray:
    """Interleaved evenly spaced position combs covering the range [0, n).

    Comb c places its teeth at floor((j + c/W) * n / k_c), a fraction c/W of
    one tooth gap ahead of comb 0.  Duplicate positions (possible for small
    n) are dropped and backfilled with the earliest unused positions so the
    selection size is always min(size, n).
    """
    if n <= size:
        return np.arange(n, dtype=np.int64)
    teeth: list[np.ndarray] = []
    base, extra = divmod(size, num_waves)
    for c in range(num_waves):
        k = base + (1 if c < extra else 0)
        if k == 0:
            continue
        pos = np.floor((np.arange(k) + c / num_waves) * n / k).astype(np.int64)
        teeth.append(np.minimum(pos, n - 1))
    chosen = np.unique(np.concatenate(teeth))
    if len(chosen) < size:
        unused = np.setdiff1d(np.arange(n, dtype=np.int64), chosen, assume_unique=True)
        chosen = np.sort(np.concatenate([chosen, unused[: size - len(chosen)]]))
    return chosen


def build_replay_buffer(
    triples: np.ndarray,
    size: int,
    mode: str,
    seed: np.random.SeedSequence | None = None,
) -> np.ndarray:
    """Select ``min(size, len(triples))`` triples from one task for replay.

    ``random`` draws uniformly without replacement (needs ``seed``) and
    keeps the draw order.  ``wave`` is deterministic: five interleaved
    evenly spaced combs over the task's stored training order, returned in
    ascending position.
    """
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    size = min(size, len(triples))
    if mode == REPLAY_RANDOM:
        if seed is None:
            raise ValueError("random replay selection requires a seed")
        rng = np.random.Generator(np.random.PCG64(seed))
        return triples[rng.choice(len(triples), size=size, replace=False)]
    if mode == REPLAY_WAVE:
        return triples[_wave_positions(len(triples), size, num_waves=5)]
    raise ValueError(f"unknown replay mode {mode!r}; known: {REPLAY_MODES}")
