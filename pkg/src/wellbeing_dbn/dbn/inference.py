"""Exact filtering, prediction and forward simulation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..core import (
    NORMALIZATION_TOL,
    Factor,
    argmax_lowest,
    contract,
    marginal,
    midpoints,
    reduce,
    rename,
)
from ..errors import DegenerateEvidenceError, UsageError
from .model import A_O, A_O_PREV, A_R, AL, I, REGIME_INPUTS, REGIMES, T, W, WO, DbnModel, prev


@dataclass(frozen=True)
class EventInput:
    """Observed inputs of one interaction event.

    ``contributor`` selects the regime. ``prev_a_O`` is the other road
    user's action in the immediately preceding event and only applies to
    AV-contributor events. ``observed`` holds any further latent
    observations by name (bin indices for well-being and trust).
    """

    contributor: str
    a_R: int | None = None
    a_O: int | None = None
    alignment: int | None = None
    intention: int | None = None
    prev_a_O: int | None = None
    observed: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        problems = []
        if self.contributor not in REGIMES:
            problems.append(f"contributor must be one of {REGIMES}, got {self.contributor!r}")
        elif self.contributor == "R":
            if self.a_R is None:
                problems.append("AV-contributor event needs a_R")
            if self.a_O is not None:
                problems.append("AV-contributor event cannot carry a_O (use prev_a_O)")
        else:
            if self.a_O is None:
                problems.append("other-contributor event needs a_O")
            if self.a_R is not None or self.alignment is not None or self.prev_a_O is not None:
                problems.append("other-contributor event cannot carry a_R, alignment or prev_a_O")
        if problems:
            raise UsageError("; ".join(problems))
        object.__setattr__(self, "observed", dict(self.observed))

    def inputs(self) -> dict[str, int]:
        if self.contributor == "R":
            raw = {A_R: self.a_R, AL: self.alignment, A_O_PREV: self.prev_a_O}
        else:
            raw = {A_O: self.a_O}
        return {k: int(v) for k, v in raw.items() if v is not None}

    def latent_evidence(self) -> dict[str, int]:
        ev = {k: int(v) for k, v in self.observed.items()}
        if self.intention is not None:
            ev[I] = int(self.intention)
        return ev

    def hiding(self, *names: str) -> "EventInput":
        """Copy with the given latent observations removed."""
        observed = {k: v for k, v in self.observed.items() if k not in names}
        intention = None if I in names else self.intention
        return replace(self, observed=observed, intention=intention)

    def without_latent_evidence(self) -> "EventInput":
        return replace(self, observed={}, intention=None)


class BeliefState:
    """Posterior over every slice-k latent after ``event_index`` events.

    The full joint is kept so that filtering stays exact when the user's and
    the other road user's latents become correlated through an unobserved
    input; ``user_joint`` and ``other_marginal`` are views of it.
    """

    __slots__ = ("joint", "event_index", "other_names")

    def __init__(self, joint: Factor, event_index: int = 0, other_names: Iterable[str] = (WO,)):
        if abs(joint.total() - 1.0) > NORMALIZATION_TOL:
            raise UsageError(f"belief must be normalized (total {joint.total()!r})")
        object.__setattr__(self, "joint", joint)
        object.__setattr__(self, "event_index", event_index)
        object.__setattr__(self, "other_names", tuple(n for n in other_names if n in joint.names))

    def __setattr__(self, key, value):
        raise AttributeError("BeliefState is immutable")

    def __repr__(self):
        return f"BeliefState(k={self.event_index}, {list(self.joint.names)})"

    @classmethod
    def initial(cls, model: DbnModel) -> "BeliefState":
        return cls(model.prior_joint(), 0, model.structure.other_latents)

    @classmethod
    def from_parts(cls, user_joint: Factor, other_marginal: Factor, event_index: int = 0) -> "BeliefState":
        joint = contract([user_joint, other_marginal], user_joint.names + other_marginal.names)
        return cls(joint, event_index, other_marginal.names)

    @property
    def user_joint(self) -> Factor:
        return marginal(self.joint, [n for n in self.joint.names if n not in self.other_names])

    @property
    def other_marginal(self) -> Factor:
        return marginal(self.joint, self.other_names)

    def marginal(self, name: str) -> np.ndarray:
        return marginal(self.joint, [name]).values

    def expectation(self, name: str) -> float:
        """Expected value of a bin-valued latent, reading each bin at its midpoint."""
        p = self.marginal(name)
        return float(p @ midpoints(p.size))

    def map_value(self, name: str) -> int:
        return argmax_lowest(self.marginal(name))


def _check_event(event: EventInput, model: DbnModel) -> None:
    for name in event.latent_evidence():
        if name not in model.latent_names:
            raise UsageError(f"observation of {name!r}, which is not a latent of the model")


def propagate(belief: BeliefState, event: EventInput, model: DbnModel, use_evidence: bool = True) -> Factor:
    """Unnormalized P(x_k, evidence_k | evidence_1:k-1).

    The previous belief is renamed onto the ``_prev`` variables, multiplied
    by the regime's CPDs instantiated at the observed inputs (unobserved
    inputs are weighted by their priors) and by indicators of observed
    latents, then the previous slice is summed out.
    """
    _check_event(event, model)
    regime = event.contributor
    inputs = event.inputs()
    names = model.latent_names
    factors = [rename(belief.joint, {n: prev(n) for n in names})]
    for name in REGIME_INPUTS[regime]:
        if name not in inputs:
            factors.append(model.input_priors[name])
    factors.extend(reduce(cpd.table, inputs) for cpd in model.regime_cpds(regime))
    if use_evidence:
        for name, value in event.latent_evidence().items():
            factors.append(Factor.indicator(model.variable(name), value))
    return contract(factors, names)


def _normalized(unnorm: Factor, belief: BeliefState) -> BeliefState:
    total = unnorm.total()
    if not total > 0:
        raise DegenerateEvidenceError(f"evidence at event {belief.event_index + 1} has zero probability")
    return BeliefState(Factor(unnorm.scope, unnorm.values / total), belief.event_index + 1, belief.other_names)


def filter_step(belief: BeliefState, event: EventInput, model: DbnModel) -> BeliefState:
    """P(x_k | evidence_1:k) from P(x_k-1 | evidence_1:k-1)."""
    return _normalized(propagate(belief, event, model), belief)


def predict(belief: BeliefState, planned: EventInput, model: DbnModel) -> BeliefState:
    """P(x_k+1 | evidence_1:k) for a planned event; latent observations are ignored."""
    return _normalized(propagate(belief, planned, model, use_evidence=False), belief)


def chain_events(events: Sequence[EventInput]) -> list[EventInput]:
    """Fill ``prev_a_O`` of AV-contributor events from the event just before."""
    out = []
    last_a_O = None
    for ev in events:
        if ev.contributor == "R" and ev.prev_a_O is None and last_a_O is not None:
            ev = replace(ev, prev_a_O=last_a_O)
        out.append(ev)
        last_a_O = ev.a_O if ev.contributor == "O" else None
    return out


def filter_sequence(model: DbnModel, events: Sequence[EventInput], belief: BeliefState | None = None) -> list[BeliefState]:
    belief = belief or BeliefState.initial(model)
    out = []
    for ev in chain_events(events):
        belief = filter_step(belief, ev, model)
        out.append(belief)
    return out


@dataclass(frozen=True)
class TrajectoryPoint:
    event_index: int
    E_w: float
    E_t: float
    P_I_plus: float
    E_wO: float


TRAJECTORY_COLUMNS = ("event_index", "E_w", "E_t", "P_I_plus", "E_wO")


def summarize(belief: BeliefState) -> TrajectoryPoint:
    names = belief.joint.names

    def exp(n):
        return belief.expectation(n) if n in names else math.nan

    p_i = float(belief.marginal(I)[1]) if I in names else math.nan
    return TrajectoryPoint(belief.event_index, exp(W), exp(T), p_i, exp(WO))


def forward_simulate(init: BeliefState, script: Sequence[EventInput], model: DbnModel) -> list[TrajectoryPoint]:
    """Filter a scripted run of events and read off expected states after each."""
    if not script:
        raise UsageError("script must contain at least one event")
    return [summarize(b) for b in filter_sequence(model, script, init)]


def write_trajectory_csv(points: Sequence[TrajectoryPoint], path: str | Path, header_comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_COLUMNS)
        for p in points:
            writer.writerow([p.event_index, repr(p.E_w), repr(p.E_t), repr(p.P_I_plus), repr(p.E_wO)])


def sequence_log_likelihood(model: DbnModel, events: Sequence[EventInput]) -> float:
    """log P(latent observations | inputs) of one sequence; ``-inf`` if impossible."""
    belief = BeliefState.initial(model)
    total = 0.0
    for ev in chain_events(events):
        unnorm = propagate(belief, ev, model)
        mass = unnorm.total()
        if not mass > 0:
            return -math.inf
        total += math.log(mass)
        belief = BeliefState(Factor(unnorm.scope, unnorm.values / mass), belief.event_index + 1, belief.other_names)
    return total


def _as_sequences(dataset) -> list[list[EventInput]]:
    if hasattr(dataset, "event_sequences"):
        return dataset.event_sequences()
    return [list(s) for s in dataset]


def log_likelihood(model: DbnModel, dataset) -> float:
    """Total log-likelihood of a dataset (or of a list of event sequences).

    Inputs are conditioned on, latent observations are scored. Sequences
    with an impossible observation contribute ``-inf``; use
    :func:`log_likelihood_by_sequence` to see which.
    """
    return float(sum(log_likelihood_by_sequence(model, dataset)))


def log_likelihood_by_sequence(model: DbnModel, dataset) -> list[float]:
    return [sequence_log_likelihood(model, seq) for seq in _as_sequences(dataset)]
