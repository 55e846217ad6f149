"""Dirichlet-smoothed CPD estimation from fully observed transitions."""

from __future__ import annotations

import numpy as np

from ..dbn.model import INPUTS, REGIMES, DbnModel, StructureCandidate, prev
from ..errors import ModelError, UsageError


def dirichlet_estimate(counts: np.ndarray, alpha: float) -> np.ndarray:
    """(N + alpha) / (sum N + alpha * k) along the last axis."""
    k = counts.shape[-1]
    return (counts + alpha) / (counts.sum(axis=-1, keepdims=True) + alpha * k)


def transition_rows(dataset) -> dict[str, list[dict[str, int]]]:
    """Observed values for every event that has a predecessor, by regime.

    Each row holds the event's inputs, its latent observations and the
    previous event's latent observations under ``_prev`` names.
    """
    rows: dict[str, list[dict[str, int]]] = {r: [] for r in REGIMES}
    for seq in dataset.event_sequences():
        before: dict[str, int] | None = None
        for ev in seq:
            obs = ev.latent_evidence()
            if before is not None:
                row = {**ev.inputs(), **obs, **{prev(n): v for n, v in before.items()}}
                rows[ev.contributor].append(row)
            before = obs
    return rows


def input_counts(dataset) -> dict[str, np.ndarray]:
    counts = {name: np.zeros(v.cardinality) for name, v in INPUTS.items()}
    for seq in dataset.event_sequences():
        for ev in seq:
            for name, value in ev.inputs().items():
                counts[name][value] += 1
    return counts


def count_cpd(rows, child: str, parents: list[str], shape: tuple[int, ...]) -> np.ndarray:
    counts = np.zeros(shape)
    for row in rows:
        try:
            idx = tuple(row[p] for p in parents) + (row[child],)
        except KeyError:
            continue
        counts[idx] += 1
    return counts


def cpd_counts(dataset, structure: StructureCandidate) -> dict[str, dict[str, np.ndarray]]:
    """Transition counts per CPD, shaped ``(*parent_cards, child_card)``.

    Only transitions where the child and all parents are observed count.
    CPDs tied to another regime count that regime's transitions under the
    mapped names.
    """
    rows = transition_rows(dataset)
    out: dict[str, dict[str, np.ndarray]] = {}
    for regime in REGIMES:
        out[regime] = {}
        for spec in structure.regimes[regime]:
            shape = tuple(structure.variable(p).cardinality for p in spec.parents)
            shape += (structure.variable(spec.child).cardinality,)
            if spec.tie is None:
                counts = count_cpd(rows[regime], spec.child, list(spec.parents), shape)
            else:
                src = [spec.tie.source_parent(p) for p in spec.parents]
                counts = count_cpd(rows[spec.tie.regime], spec.tie.child, src, shape)
            out[regime][spec.child] = counts
    return out


def estimate_cpds(dataset, structure: StructureCandidate, alpha: float = 1.0) -> DbnModel:
    """Fit every CPD of ``structure`` with a uniform Dirichlet prior.

    Input priors are fitted the same way; the initial latent prior stays
    uniform.
    """
    if not alpha > 0:
        raise UsageError("alpha must be > 0")
    n_bins = getattr(dataset, "n_bins", structure.n_bins)
    if n_bins != structure.n_bins:
        raise ModelError(f"dataset uses {n_bins} bins but the structure declares {structure.n_bins}")
    counts = cpd_counts(dataset, structure)
    arrays = {r: {c: dirichlet_estimate(n, alpha) for c, n in by_child.items()} for r, by_child in counts.items()}
    ipri = {name: dirichlet_estimate(c, alpha) for name, c in input_counts(dataset).items()}
    return DbnModel.from_arrays(structure, arrays, input_priors=ipri)
