"""Label balancing by sampling implausible events from an auxiliary pool."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, replace

from .corpus import DatasetBundle, Origin, Split
from .errors import InsufficientPoolError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AugmentationPlan:
    seed: int
    target: str = "equalize"
    pool_id: str = "pool"

    def __post_init__(self):
        if self.target != "equalize":
            raise ValueError(f"unsupported augmentation target {self.target!r}")


def augment_balance(base: DatasetBundle, pool: DatasetBundle, plan: AugmentationPlan) -> DatasetBundle:
    """Add label-0 pool events to ``base`` until both labels have equal counts.

    Candidates are the pool's implausible events, deduplicated by triple (first
    occurrence wins) and excluding any triple already present in ``base``.
    They are drawn uniformly without replacement with ``random.Random(seed)``
    and appended after the base events, marked as augmented train events.
    """
    counts = base.label_counts()
    need = counts[1] - counts[0]
    if need < 0:
        log.warning(
            "base is skewed toward implausible events (%d/%d); augmentation skipped",
            counts[1], counts[0],
        )
        return base
    if need == 0:
        return base

    taken = {e.triple for e in base}
    candidates, seen = [], set()
    for ev in pool:
        if ev.label != 0 or ev.triple in taken or ev.triple in seen:
            continue
        seen.add(ev.triple)
        candidates.append(ev)

    if len(candidates) < need:
        deficit = need - len(candidates)
        raise InsufficientPoolError(
            f"pool {plan.pool_id!r} has {len(candidates)} usable implausible event(s), "
            f"{need} needed (deficit {deficit})",
            deficit=deficit,
        )

    rng = random.Random(plan.seed)
    sampled = rng.sample(candidates, need)
    added = [replace(ev, split=Split.TRAIN, origin=Origin.AUGMENTED) for ev in sampled]
    log.info("augmented %d implausible event(s): before %s, after %d/%d",
             need, counts, counts[1], counts[1])
    return DatasetBundle(base.events + tuple(added), base.conflicts)
