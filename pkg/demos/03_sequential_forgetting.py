"""Show catastrophic forgetting under sequential training.

Trains one model through a sequence of tasks with no mitigation and
prints the retention matrix: row i holds the filtered MRR on every seen
task's test split after finishing task i.  Reading down a column shows
how performance on an early task decays as later tasks overwrite the
embeddings.

The synthetic graph uses matching-style relations (near-bijections
between entity groups) with eval triples sampled from the training
pairs, so the metric tracks retention of facts the model demonstrably
learned.  On the relation partition, later tasks re-pair the same
entities under new relations and early-task skill collapses.  The same
sequence under a random partition rehearses every relation throughout
and shows backward transfer instead.
"""

import numpy as np

from kgcl import ExperimentConfig, run_experiment
from kgcl.dataset import RANDOM, RELATION_ROUNDROBIN
from kgcl.synthetic import make_block_graph

DESK = dict(num_tasks=4, epochs=80, dim=16, batch_size=64, learning_rate=0.01,
            seed=42)


def show(record):
    values = record.retention.values
    print("  retention matrix (rows: after task i, cols: task j test MRR):")
    for i, row in enumerate(values):
        cells = [f"{v:.3f}" if not np.isnan(v) else "  .  " for v in row]
        print(f"    after task {i}:  " + "  ".join(cells))
    report = record.report()
    per_task = ", ".join(f"{100 * f:+.1f}" for f in report.per_task_forgetting)
    print(f"  forgetting per early task (pp): {per_task}")
    print(f"  mean forgetting: {100 * report.mean_forgetting:+.2f}pp")
    print(f"  final mean MRR:  {report.final_mrr:.4f}")


def main():
    graph = make_block_graph(
        num_entities=120, num_relations=9, num_groups=3, triples_per_relation=40,
        pairing="matching", eval_within_train=True, seed=3,
    )
    print(
        f"graph: {graph.num_entities} entities, {graph.num_relations} relations, "
        f"{len(graph.train)} train triples, eval drawn from learned facts"
    )

    print("\n=== relation round-robin partition (disjoint relations) ===")
    record = run_experiment(
        graph, ExperimentConfig(method="naive", partition=RELATION_ROUNDROBIN, **DESK)
    )
    show(record)

    print("\n=== random partition (shared relations) ===")
    record = run_experiment(
        graph, ExperimentConfig(method="naive", partition=RANDOM, **DESK)
    )
    show(record)

    print(
        "\nThe first column tells the story: strong after task 0, gone three "
        "tasks later on the relation split, intact (even improved) on the "
        "random split where task 0's relations keep being rehearsed."
    )


if __name__ == "__main__":
    main()
