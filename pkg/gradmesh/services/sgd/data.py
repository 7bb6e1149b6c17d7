from dataclasses import dataclass

import numpy as np
from loguru import logger

from gradmesh.core.exceptions import ConfigurationError
from gradmesh.services.sgd.engine import Minibatch

Schedule = list[Minibatch]


@dataclass(frozen=True)
class Dataset:
    """Synthetic classification data, reproducible from its seed."""

    examples: np.ndarray
    labels: np.ndarray
    seed: int
    classes: int
    features: int

    def __post_init__(self):
        if self.examples.shape[0] != self.labels.shape[0]:
            raise ConfigurationError("examples and labels must have the same length")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def full_batch(self) -> Minibatch:
        return Minibatch(examples=self.examples, labels=self.labels)

    def take(self, indices: np.ndarray) -> Minibatch:
        return Minibatch(examples=self.examples[indices], labels=self.labels[indices])


def _class_centers(classes: int, features: int, separation: float, rng: np.random.Generator) -> np.ndarray:
    # Scaled basis vectors are exactly `separation` apart pairwise
    scale = separation / np.sqrt(2.0)
    if classes <= features:
        centers = np.zeros((classes, features))
        centers[np.arange(classes), np.arange(classes)] = scale
        return centers
    directions = rng.normal(size=(classes, features))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return directions * scale


def generate_synthetic_dataset(n: int, classes: int, features: int, separation: float, seed: int) -> Dataset:
    """
    Gaussian clusters, one per class, unit variance around centers `separation` apart.

    Labels are assigned round-robin (so every class count is within 1 of n / classes)
    and then shuffled with the seed.
    """
    if classes < 2 or features < 1:
        raise ConfigurationError(f"need classes >= 2 and features >= 1, got ({classes}, {features})")
    if n < classes:
        raise ConfigurationError(f"need at least one example per class: n={n} < classes={classes}")
    rng = np.random.default_rng(seed)
    centers = _class_centers(classes, features, separation, rng)
    labels = rng.permutation(np.arange(n) % classes)
    examples = centers[labels] + rng.normal(size=(n, features))
    logger.debug(f"Generated synthetic dataset n={n} classes={classes} features={features} seed={seed}")
    return Dataset(examples=examples, labels=labels.astype(np.int64), seed=seed, classes=classes, features=features)


def partition_dataset(
    ds: Dataset,
    workers: int,
    batches_per_worker: int,
    batch_size: int,
    seed: int | tuple[int, ...] | None = None,
) -> list[Schedule]:
    """
    Split one epoch's worth of data into disjoint per-worker minibatch schedules.

    Sampling is without replacement: a seeded permutation is cut into
    workers × batches_per_worker consecutive blocks of batch_size examples. `seed` may be a
    tuple such as (run_seed, epoch) to reshuffle every epoch.
    """
    if workers < 1 or batches_per_worker < 1 or batch_size < 1:
        raise ConfigurationError("workers, batches_per_worker and batch_size must all be >= 1")
    needed = workers * batches_per_worker * batch_size
    if needed > len(ds):
        raise ConfigurationError(
            f"insufficient data: {workers} workers x {batches_per_worker} batches x {batch_size} "
            f"= {needed} examples > {len(ds)}"
        )
    rng = np.random.default_rng(ds.seed if seed is None else seed)
    order = rng.permutation(len(ds))
    schedules: list[Schedule] = []
    for worker in range(workers):
        schedule = []
        for batch in range(batches_per_worker):
            start = (worker * batches_per_worker + batch) * batch_size
            schedule.append(ds.take(order[start : start + batch_size]))
        schedules.append(schedule)
    return schedules
