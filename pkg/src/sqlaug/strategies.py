"""Training-data scheduling over labeled and generated examples.

Three ways to feed generated data to a downstream parser:

* ``pretrain`` — first epochs see only generated data, later epochs only
  labeled data (phase lengths are parameters).
* ``merge`` — every epoch sees all labeled plus all generated examples.
* ``sample`` — every epoch sees all labeled examples plus a fresh uniform
  sample of generated examples the same size as the labeled set.
"""

from __future__ import annotations

import logging
import random
import warnings
from dataclasses import dataclass

from .generate import stable_seed, _sample_indices, _digit

log = logging.getLogger(__name__)

STRATEGIES = ("pretrain", "merge", "sample")


class InvalidStrategy(ValueError):
    """Unknown strategy name."""


class SampleLargerThanPool(Warning):
    """Sample strategy asked for more generated items than exist."""


@dataclass(frozen=True)
class EpochPlan:
    """Which example ids one training epoch includes."""

    strategy: str
    epoch: int
    labeled_ids: tuple[int, ...]
    generated_ids: tuple[int, ...]
    seed: int


def plan_epochs(strategy: str, labeled_size: int, generated_size: int,
                epochs: int, seed: int = 0,
                pretrain_phase: int | None = None) -> list[EpochPlan]:
    """Build per-epoch id plans.

    ``pretrain_phase`` is how many initial epochs use generated data under
    the pretrain strategy (default: half, rounded up).  Sampling is
    uniform without replacement per epoch, reproducible from (seed,
    epoch); when the generated pool is smaller than the labeled set it
    falls back to with-replacement and logs a warning.
    """
    if strategy not in STRATEGIES:
        raise InvalidStrategy(f"unknown strategy {strategy!r};"
                              f" expected one of {STRATEGIES}")
    if labeled_size < 0 or generated_size < 0 or epochs < 0:
        raise ValueError("sizes and epoch count must be nonnegative")

    labeled = tuple(range(labeled_size))
    generated = tuple(range(generated_size))
    plans = []

    if strategy == "pretrain":
        phase1 = (pretrain_phase if pretrain_phase is not None
                  else (epochs + 1) // 2)
        if not 0 <= phase1 <= epochs:
            raise ValueError("pretrain_phase out of range")
        for epoch in range(epochs):
            in_phase1 = epoch < phase1
            plans.append(EpochPlan(
                strategy=strategy, epoch=epoch,
                labeled_ids=() if in_phase1 else labeled,
                generated_ids=generated if in_phase1 else (),
                seed=seed))
        return plans

    if strategy == "merge":
        for epoch in range(epochs):
            plans.append(EpochPlan(strategy=strategy, epoch=epoch,
                                   labeled_ids=labeled,
                                   generated_ids=generated, seed=seed))
        return plans

    # sample
    for epoch in range(epochs):
        rng = random.Random(stable_seed("epoch-sample", seed, epoch))
        if generated_size >= labeled_size:
            picked = _sample_indices(rng, generated_size, labeled_size)
        else:
            message = (f"sample strategy: generated pool ({generated_size}) "
                       f"smaller than labeled set ({labeled_size}); "
                       "sampling with replacement")
            warnings.warn(message, SampleLargerThanPool, stacklevel=2)
            log.warning(message)
            if generated_size == 0:
                picked = []
            else:
                picked = sorted(_digit(rng, generated_size)
                                for _ in range(labeled_size))
        plans.append(EpochPlan(strategy=strategy, epoch=epoch,
                               labeled_ids=labeled,
                               generated_ids=tuple(picked), seed=seed))
    return plans
