"""Top-k architecture voting over batches of candidate designs."""

from __future__ import annotations

from ..errors import AugmentError, NetlearnError
from .client import Design, GeneratorClient
from .filters import FilterResult, StageOutcome

BATCH_SIZE = 10
WINNERS = 3


def architecture_vote(batch: list[Design], client: GeneratorClient, k: int = WINNERS) -> FilterResult:
    """Keep the ``k`` best-scored designs; ties go to the smaller design id.

    ``kept`` is in score order, ``outcomes`` follows the batch order.
    """
    if not batch:
        raise AugmentError("CONFIG_ERROR", "empty vote batch")
    if not 1 <= k <= len(batch):
        raise AugmentError("CONFIG_ERROR", f"k={k} must lie in [1, {len(batch)}]")
    try:
        scores = [float(s) for s in client.evaluate(batch)]
    except AugmentError:
        raise
    except NetlearnError as exc:
        raise AugmentError("EVALUATOR_FAILURE", str(exc)) from exc
    if len(scores) != len(batch):
        raise AugmentError("EVALUATOR_FAILURE", f"{len(scores)} scores for {len(batch)} designs")
    order = sorted(range(len(batch)), key=lambda i: (-scores[i], batch[i].design_id))
    rank = {i: r for r, i in enumerate(order)}
    outcomes = []
    for i, s in enumerate(scores):
        verdict = "kept" if rank[i] < k else "discarded"
        outcomes.append(StageOutcome("vote", verdict, s, f"rank {rank[i] + 1} of {len(batch)}, top {k} kept"))
    return FilterResult([batch[i] for i in order[:k]], outcomes)
