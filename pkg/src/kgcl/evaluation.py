"""Filtered link-prediction ranking and retention bookkeeping.

Every evaluation triple is turned into two queries, tail replacement and
head replacement.  Candidates that form a known true triple (anywhere in
train, valid, or test) are removed before ranking, except the queried
answer itself.  The rank of the answer among the survivors is

    1 + #{strictly closer} + floor(#{other survivors at the same distance} / 2)

so exact ties resolve to the middle rank rather than optimistically or
pessimistically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .transe import TransEModel

TAIL = "tail"
HEAD = "head"

# Above this many broadcast elements per query batch, distances switch from
# the elementwise path to a norms-plus-matmul expansion.  The elementwise
# path reproduces the per-triple scoring arithmetic bit for bit, which the
# exhaustive small-graph rank checks rely on; the expansion path is for
# full-vocabulary evaluation where the broadcast would not fit in memory.
EXACT_PATH_MAX_ELEMENTS = 4_000_000


@dataclass(eq=False)
class FilterIndex:
    """Known-true completions grouped by query key.

    ``tails[(h, r)]`` holds every entity id appearing as tail of a known
    (h, r, *) triple; ``heads[(r, t)]`` likewise for heads.  Built from the
    union of all splits, deduplicated.
    """

    tails: dict[tuple[int, int], np.ndarray]
    heads: dict[tuple[int, int], np.ndarray]

    @classmethod
    def from_splits(cls, *splits: np.ndarray) -> "FilterIndex":
        parts = [np.asarray(s, dtype=np.int64).reshape(-1, 3) for s in splits if len(s)]
        if not parts:
            return cls(tails={}, heads={})
        triples = np.unique(np.concatenate(parts, axis=0), axis=0)

        def group(keys: np.ndarray, values: np.ndarray) -> dict[tuple[int, int], np.ndarray]:
            order = np.lexsort((keys[:, 1], keys[:, 0]))
            k = keys[order]
            v = values[order]
            changed = np.any(np.diff(k, axis=0) != 0, axis=1)
            starts = np.concatenate([[0], np.flatnonzero(changed) + 1, [len(k)]])
            return {
                (int(k[starts[i], 0]), int(k[starts[i], 1])): v[starts[i] : starts[i + 1]].copy()
                for i in range(len(starts) - 1)
            }

        return cls(
            tails=group(triples[:, [0, 1]], triples[:, 2]),
            heads=group(triples[:, [1, 2]], triples[:, 0]),
        )


def _candidate_distances(model: TransEModel, triples: np.ndarray, direction: str) -> np.ndarray:
    """(B, nE) distances from each query to every candidate entity."""
    e, r = model.entities, model.relations
    n_ent = model.num_entities
    h, rel, t = triples[:, 0], triples[:, 1], triples[:, 2]
    if len(triples) * n_ent * model.config.dim <= EXACT_PATH_MAX_ELEMENTS:
        if direction == TAIL:
            diff = (e[h] + r[rel])[:, None, :] - e[None, :, :]
        else:
            diff = (e[None, :, :] + r[rel][:, None, :]) - e[t][:, None, :]
        return np.sqrt(np.sum(diff * diff, axis=-1))
    ent_sq = np.sum(e * e, axis=1)
    if direction == TAIL:
        x = e[h] + r[rel]
        sq = np.sum(x * x, axis=1)[:, None] - 2.0 * (x @ e.T) + ent_sq[None, :]
    else:
        y = r[rel] - e[t]
        sq = ent_sq[None, :] + 2.0 * (y @ e.T) + np.sum(y * y, axis=1)[:, None]
    return np.sqrt(np.maximum(sq, 0.0))


def _ranks_one_direction(
    model: TransEModel,
    triples: np.ndarray,
    index: FilterIndex,
    direction: str,
    batch_size: int,
) -> np.ndarray:
    if direction not in (TAIL, HEAD):
        raise ValueError(f"direction must be {TAIL!r} or {HEAD!r}, got {direction!r}")
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    known = index.tails if direction == TAIL else index.heads
    ranks = np.empty(len(triples), dtype=np.int64)
    for start in range(0, len(triples), batch_size):
        batch = triples[start : start + batch_size]
        dist = _candidate_distances(model, batch, direction)
        for i, (h, rel, t) in enumerate(batch):
            answer = int(t if direction == TAIL else h)
            key = (int(h), int(rel)) if direction == TAIL else (int(rel), int(t))
            row = dist[i]
            d_true = row[answer]
            filtered = known.get(key)
            smaller = int(np.sum(row < d_true))
            equal = int(np.sum(row == d_true))
            if filtered is not None:
                smaller -= int(np.sum(row[filtered] < d_true))
                equal -= int(np.sum(row[filtered] == d_true))
                if not np.any(filtered == answer):
                    equal -= 1  # answer not indexed: discount it by hand
            else:
                equal -= 1  # the answer itself
            ranks[start + i] = 1 + smaller + equal // 2
    return ranks


def filtered_rank(
    model: TransEModel,
    index: FilterIndex,
    triple: np.ndarray,
    direction: str,
) -> int:
    """Mid-tie filtered rank of one triple's answer in the given direction."""
    triple = np.asarray(triple, dtype=np.int64).reshape(1, 3)
    return int(_ranks_one_direction(model, triple, index, direction, batch_size=1)[0])


def eval_ranks(
    model: TransEModel,
    index: FilterIndex,
    triples: np.ndarray,
    batch_size: int = 512,
) -> np.ndarray:
    """Both-direction ranks for a triple set: all tail ranks, then all head ranks."""
    return np.concatenate(
        [
            _ranks_one_direction(model, triples, index, TAIL, batch_size),
            _ranks_one_direction(model, triples, index, HEAD, batch_size),
        ]
    )


def mrr(ranks: np.ndarray) -> float:
    """Mean reciprocal rank; NaN for an empty rank set."""
    ranks = np.asarray(ranks)
    if ranks.size == 0:
        return float("nan")
    return float(np.mean(1.0 / ranks))


@dataclass(eq=False)
class RetentionMatrix:
    """Lower-triangular MRR history: entry (i, j) is task j's MRR after task i.

    Entries above the diagonal stay NaN.  ``eval_sizes`` records how many
    evaluation triples each task owns (each contributes two rankings).
    """

    values: np.ndarray
    eval_sizes: np.ndarray

    @classmethod
    def empty(cls, num_tasks: int, eval_sizes: np.ndarray | list[int]) -> "RetentionMatrix":
        return cls(
            values=np.full((num_tasks, num_tasks), np.nan),
            eval_sizes=np.asarray(eval_sizes, dtype=np.int64),
        )

    @property
    def num_tasks(self) -> int:
        return self.values.shape[0]


def retention_update(
    matrix: RetentionMatrix,
    model: TransEModel,
    index: FilterIndex,
    eval_tasks: list[np.ndarray],
    after_task: int,
    batch_size: int = 512,
) -> None:
    """Fill row ``after_task`` with the MRR of every task seen so far."""
    for j in range(after_task + 1):
        matrix.values[after_task, j] = mrr(
            eval_ranks(model, index, eval_tasks[j], batch_size=batch_size)
        )


@dataclass(eq=False)
class ForgettingReport:
    """Forgetting and final-performance summary of a retention matrix.

    Forgetting for task j compares its freshly-trained MRR (diagonal) with
    its MRR after the final task; the mean runs over tasks 0..T-2.  Both
    final MRR aggregates cover the full last row: the plain mean weights
    tasks equally, the pooled one weights them by ranking count.
    """

    per_task_forgetting: np.ndarray
    mean_forgetting: float
    final_mrr: float
    final_mrr_pooled: float
    diagonal: np.ndarray
    last_row: np.ndarray

    def as_dict(self) -> dict:
        return {
            "per_task_forgetting": [float(x) for x in self.per_task_forgetting],
            "mean_forgetting": float(self.mean_forgetting),
            "final_mrr": float(self.final_mrr),
            "final_mrr_pooled": float(self.final_mrr_pooled),
            "diagonal": [float(x) for x in self.diagonal],
            "last_row": [float(x) for x in self.last_row],
        }


def forgetting_report(matrix: RetentionMatrix) -> ForgettingReport:
    num_tasks = matrix.num_tasks
    diagonal = np.diagonal(matrix.values).copy()
    last_row = matrix.values[num_tasks - 1].copy()
    per_task = diagonal[: num_tasks - 1] - last_row[: num_tasks - 1]
    weights = matrix.eval_sizes.astype(np.float64)
    pooled = float(np.sum(last_row * weights) / np.sum(weights)) if weights.sum() else float("nan")
    return ForgettingReport(
        per_task_forgetting=per_task,
        mean_forgetting=float(np.mean(per_task)) if len(per_task) else float("nan"),
        final_mrr=float(np.mean(last_row)),
        final_mrr_pooled=pooled,
        diagonal=diagonal,
        last_row=last_row,
    )
