"""Cross-validated structure selection and inference-accuracy evaluation.

Folds always partition participants' sequences, never single events, so a
participant's own rides never leak between training and held-out data.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..dbn.inference import BeliefState, filter_step, log_likelihood
from ..dbn.model import I, T, W, StructureCandidate
from ..errors import UsageError
from .estimation import estimate_cpds

TARGETS = (W, T, I)


def fold_indices(n_sequences: int, folds: int, rng: np.random.Generator | None = None) -> list[np.ndarray]:
    """Split sequence indices into ``folds`` near-equal parts (shuffled if ``rng``)."""
    if folds < 2:
        raise UsageError("need at least two folds")
    if n_sequences < folds:
        raise UsageError(f"{n_sequences} sequences cannot fill {folds} folds")
    order = np.arange(n_sequences) if rng is None else rng.permutation(n_sequences)
    return [np.sort(part) for part in np.array_split(order, folds)]


def _train_test(dataset, parts: Sequence[np.ndarray], k: int):
    train = np.concatenate([p for j, p in enumerate(parts) if j != k])
    return dataset.subset(np.sort(train)), dataset.subset(parts[k])


@dataclass(frozen=True)
class SelectionResult:
    winner: StructureCandidate
    scores: list[tuple[str, float]]
    per_fold: list[list[float]] = field(default_factory=list)


def select_structure(
    candidates: Sequence[StructureCandidate],
    dataset,
    folds: int = 5,
    alpha: float = 1.0,
    seed: int | None = None,
    workers: int = 1,
) -> SelectionResult:
    """Pick the candidate with the highest mean held-out log-likelihood.

    All candidates see the same folds. Ties go to the earliest candidate.
    """
    if not candidates:
        raise UsageError("no candidate structures given")
    rng = None if seed is None else np.random.Generator(np.random.PCG64(seed))
    parts = fold_indices(len(dataset), folds, rng)
    splits = [_train_test(dataset, parts, k) for k in range(folds)]

    def score(job):
        c, (train, test) = job
        return log_likelihood(estimate_cpds(train, c, alpha), test)

    jobs = [(c, s) for c in candidates for s in splits]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        flat = list(pool.map(score, jobs))
    per_fold = [flat[i * folds : (i + 1) * folds] for i in range(len(candidates))]
    means = [float(np.mean(f)) for f in per_fold]
    best = 0
    for i, m in enumerate(means):
        if m > means[best]:
            best = i
    return SelectionResult(candidates[best], [(c.structure_id, m) for c, m in zip(candidates, means)], per_fold)


def accuracy_counts(model, dataset) -> dict[str, tuple[int, int]]:
    """(correct, total) per target for MAP inference with the target hidden."""
    tally = {t: [0, 0] for t in TARGETS}
    for seq in dataset.event_sequences():
        belief = BeliefState.initial(model)
        for ev in seq:
            observed = ev.latent_evidence()
            for target in TARGETS:
                if target not in observed or target not in model.latent_names:
                    continue
                post = filter_step(belief, ev.hiding(target), model)
                tally[target][0] += int(post.map_value(target) == observed[target])
                tally[target][1] += 1
            belief = filter_step(belief, ev, model)
    return {t: (c, n) for t, (c, n) in tally.items()}


@dataclass(frozen=True)
class AccuracyReport:
    per_target_accuracy: dict[str, float]
    per_fold_loglik: list[float]
    seed: int
    config: dict

    def to_dict(self) -> dict:
        return {
            "per_target_accuracy": self.per_target_accuracy,
            "per_fold_loglik": self.per_fold_loglik,
            "seed": self.seed,
            "config": self.config,
        }


def evaluate_accuracy(
    dataset,
    structure: StructureCandidate,
    folds: int = 5,
    iterations: int = 100,
    seed: int = 0,
    alpha: float = 1.0,
    workers: int = 1,
) -> AccuracyReport:
    """Repeated k-fold accuracy of MAP inference for well-being, trust and intention.

    For every held-out event the target is hidden while the event's other
    observations stay, the posterior MAP (lowest index on ties) is compared
    with the discretized label, and the belief then absorbs the full event.
    Accuracy is averaged over folds and iterations; each iteration reshuffles
    folds with a seed derived from ``(seed, iteration)``.
    """
    if iterations < 1:
        raise UsageError("iterations must be >= 1")
    jobs = []
    for it in range(iterations):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, it])))
        parts = fold_indices(len(dataset), folds, rng)
        jobs.extend(_train_test(dataset, parts, k) for k in range(folds))

    def run(job):
        train, test = job
        model = estimate_cpds(train, structure, alpha)
        return accuracy_counts(model, test), log_likelihood(model, test)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(run, jobs))

    accuracy = {}
    for target in TARGETS:
        fold_acc = [r[0][target][0] / r[0][target][1] for r in results if r[0][target][1] > 0]
        accuracy[target] = float(np.mean(fold_acc)) if fold_acc else float("nan")
    config = {"folds": folds, "iterations": iterations, "alpha": alpha, "structure_id": structure.structure_id}
    return AccuracyReport(accuracy, [float(r[1]) for r in results], seed, config)
