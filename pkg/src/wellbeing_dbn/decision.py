"""Decision layer: expected utility of the AV's accommodative action.

The decision slice is one AV-contributor transition. Previous-slice latents
follow a prior belief, the other's preceding action follows its input
prior, the AV action ``a_R`` is the decision and, when the model has an
intention latent, the alignment is derived from it: aligned exactly when
the action matches the intention. Utilities read bin-valued latents at bin
midpoints.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import Factor, Variable, contract, midpoints, normalize, reduce, rename
from .dbn.inference import BeliefState
from .dbn.model import A_O_PREV, A_R, AL, I, INPUTS, R_MINUS, R_PLUS, T, W, WO, DbnModel, prev
from .errors import DegenerateEvidenceError, ModelError, UsageError

ACTIONS = (R_PLUS, R_MINUS)
ACTION_LABELS = {R_PLUS: "R_PLUS", R_MINUS: "R_MINUS"}


class Utility:
    """Utility over slice-k latents and the decision.

    Subclasses define ``scope`` and :meth:`value`; :meth:`table` tabulates
    it with axes in ``scope`` order.
    """

    scope: tuple[str, ...] = ()

    def value(self, assignment: Mapping[str, int], action: int, model: DbnModel) -> float:
        raise NotImplementedError

    def table(self, model: DbnModel, action: int) -> np.ndarray:
        shape = tuple(model.variable(n).cardinality for n in self.scope)
        values = np.zeros(shape)
        for idx in np.ndindex(shape):
            values[idx] = self.value(dict(zip(self.scope, idx)), action, model)
        return values


@dataclass(frozen=True)
class UtilitySpec(Utility):
    """Built-in utilities: the user's well-being, the user's trust, or the
    trade-off ``w + wO`` with a yielding cost subtracted when yielding."""

    kind: str
    cost: float = 0.0

    KINDS = ("wellbeing", "trust", "tradeoff")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise UsageError(f"utility kind must be one of {self.KINDS}, got {self.kind!r}")
        if self.cost < 0:
            raise UsageError("cost must be >= 0")
        if self.kind != "tradeoff" and self.cost:
            raise UsageError("cost only applies to the trade-off utility")

    @property
    def scope(self) -> tuple[str, ...]:
        return {"wellbeing": (W,), "trust": (T,), "tradeoff": (W, WO)}[self.kind]

    def value(self, assignment, action, model):
        def mid(n):
            return (assignment[n] + 0.5) / model.variable(n).cardinality

        if self.kind == "wellbeing":
            return mid(W)
        if self.kind == "trust":
            return mid(T)
        return mid(W) + mid(WO) - (self.cost if action == R_PLUS else 0.0)

    def table(self, model, action):
        if self.kind != "tradeoff":
            return midpoints(model.variable(self.scope[0]).cardinality)
        vals = midpoints(model.variable(W).cardinality)[:, None] + midpoints(model.variable(WO).cardinality)[None, :]
        if action == R_PLUS:
            vals = vals - self.cost
        return vals


class TableUtility(Utility):
    """Arbitrary utility given as one array per action over ``scope`` (in the
    order given)."""

    def __init__(self, scope: Sequence[str], tables: Mapping[int, np.ndarray]):
        self.scope = tuple(scope)
        self.tables = {a: np.asarray(tables[a], dtype=np.float64) for a in ACTIONS}

    def value(self, assignment, action, model):
        return float(self.tables[action][tuple(assignment[n] for n in self.scope)])

    def affine(self, scale: float, offset: float) -> "TableUtility":
        return TableUtility(self.scope, {a: scale * t + offset for a, t in self.tables.items()})

    def __add__(self, other: "TableUtility") -> "TableUtility":
        if other.scope != self.scope:
            raise UsageError("can only add utilities over the same scope")
        return TableUtility(self.scope, {a: self.tables[a] + other.tables[a] for a in ACTIONS})


@dataclass(frozen=True)
class InfluenceDiagram:
    model: DbnModel
    utility: Utility
    belief: BeliefState | None = None

    def __post_init__(self):
        for n in self.utility.scope:
            if n not in self.model.latent_names:
                raise UsageError(f"utility reads {n!r}, which is not a slice latent")
        if self.derives_alignment and AL in self._slice_ancestors(I):
            raise ModelError("alignment is derived from intention, so intention cannot depend on alignment")

    def _slice_ancestors(self, name: str) -> set[str]:
        parents = {s.child: s.parents for s in self.model.structure.regimes["R"]}
        seen: set[str] = set()
        stack = [name]
        while stack:
            for p in parents.get(stack.pop(), ()):
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    @property
    def derives_alignment(self) -> bool:
        names = self.model.latent_names
        return I in names and self.model.variable(I).cardinality == 2

    def with_utility(self, utility: Utility) -> "InfluenceDiagram":
        return InfluenceDiagram(self.model, utility, self.belief)

    def prior(self) -> Factor:
        joint = self.belief.joint if self.belief is not None else self.model.prior_joint()
        return rename(joint, {n: prev(n) for n in self.model.latent_names})

    def chance_variables(self) -> list[Variable]:
        m = self.model
        out = [m.variable(prev(n)) for n in m.latent_names] + [INPUTS[A_O_PREV], INPUTS[AL]]
        return out + list(m.latents)

    def descendants_of_decision(self) -> set[str]:
        desc = {A_R}
        if self.derives_alignment:
            desc.add(AL)
        specs = self.model.structure.regimes["R"]
        changed = True
        while changed:
            changed = False
            for s in specs:
                if s.child not in desc and any(p in desc for p in s.parents):
                    desc.add(s.child)
                    changed = True
        desc.discard(A_R)
        return desc

    def informational_nodes(self) -> list[str]:
        """Chance nodes that can be observed before the decision."""
        desc = self.descendants_of_decision()
        return [v.name for v in self.chance_variables() if v.name not in desc]

    def factors(self, action: int, ev: Mapping[str, int]) -> list[Factor]:
        m = self.model
        factors = [self.prior(), m.input_priors[A_O_PREV]]
        if self.derives_alignment:
            align = np.zeros((2, 2, 2))  # a_R, i, al
            for i in range(2):
                align[action, i, int(i == action)] = 1.0
            factors.append(reduce(Factor([INPUTS[A_R], m.variable(I), INPUTS[AL]], align), {A_R: action}))
        else:
            factors.append(m.input_priors[AL])
        factors.extend(reduce(c.table, {A_R: action}) for c in m.regime_cpds("R"))
        for name, value in ev.items():
            factors.append(Factor.indicator(self.variable(name), value))
        return factors

    def variable(self, name: str) -> Variable:
        for v in self.chance_variables():
            if v.name == name:
                return v
        raise UsageError(f"{name!r} is not a chance node of the decision slice")

    def check_evidence(self, ev: Mapping[str, int]) -> dict[str, int]:
        allowed = set(self.informational_nodes())
        out = {}
        for name, value in ev.items():
            if name not in allowed:
                raise UsageError(f"cannot condition on {name!r}: not observable before the decision")
            out[name] = self.variable(name).index_of(value)
        return out

    def posterior(self, keep: Iterable[str], action: int, ev: Mapping[str, int]) -> Factor:
        try:
            return normalize(contract(self.factors(action, ev), keep))
        except DegenerateEvidenceError as exc:
            raise DegenerateEvidenceError(f"evidence {dict(ev)} has zero probability") from exc


def expected_utility(cim: InfluenceDiagram, action: int, ev: Mapping[str, int] | None = None) -> float:
    """Sum over outcomes of P(outcome | ev, action) * U(outcome, action)."""
    if action not in ACTIONS:
        raise UsageError(f"action must be R_PLUS or R_MINUS, got {action!r}")
    ev = cim.check_evidence(ev or {})
    scope = cim.utility.scope
    post = cim.posterior(scope, action, ev)
    util = cim.utility.table(cim.model, action)
    return float(np.sum(post.transposed(scope) * util))


@dataclass(frozen=True)
class PolicyDecision:
    action: int
    eu_yield: float
    eu_unyield: float

    @property
    def label(self) -> str:
        return ACTION_LABELS[self.action]


def _decide(eu_yield: float, eu_unyield: float) -> PolicyDecision:
    return PolicyDecision(R_PLUS if eu_yield >= eu_unyield else R_MINUS, eu_yield, eu_unyield)


def optimal_policy(cim: InfluenceDiagram, ev: Mapping[str, int] | None = None) -> PolicyDecision:
    """Action maximizing expected utility; exact ties go to yielding."""
    return _decide(expected_utility(cim, R_PLUS, ev), expected_utility(cim, R_MINUS, ev))


@dataclass(frozen=True)
class PolicyRow:
    evidence_var: str
    value: int
    label: str
    lower: float | None
    upper: float | None
    decision: PolicyDecision


def _value_label(var: Variable, value: int) -> tuple[str, float | None, float | None]:
    if var.states:
        return var.states[value], None, None
    n = var.cardinality
    return str(value), value / n, (value + 1) / n


def policy_table(cim: InfluenceDiagram, ev_var: str, ev: Mapping[str, int] | None = None) -> list[PolicyRow]:
    """Optimal action for every value of ``ev_var``; bin-valued variables
    report the bin interval each decision applies to."""
    ev = dict(ev or {})
    if ev_var in ev:
        raise UsageError(f"{ev_var!r} is already in the evidence")
    var = cim.variable(ev_var)
    rows = []
    for value in range(var.cardinality):
        label, lo, hi = _value_label(var, value)
        rows.append(PolicyRow(ev_var, value, label, lo, hi, optimal_policy(cim, {**ev, ev_var: value})))
    return rows


def thresholds(rows: Sequence[PolicyRow]) -> list[tuple[float | None, float | None, str]]:
    """Merge consecutive rows with the same action into ``(lower, upper, action)``."""
    merged: list[list] = []
    for r in rows:
        if merged and merged[-1][2] == r.decision.label:
            merged[-1][1] = r.upper
        else:
            merged.append([r.lower, r.upper, r.decision.label])
    return [tuple(m) for m in merged]


def best_expected_utility(cim: InfluenceDiagram, ev: Mapping[str, int]) -> float:
    d = optimal_policy(cim, ev)
    return max(d.eu_yield, d.eu_unyield)


def value_of_information(cim: InfluenceDiagram, node: str, ev: Mapping[str, int] | None = None) -> float:
    """Expected gain in optimal expected utility from observing ``node`` first."""
    ev = cim.check_evidence(ev or {})
    if node in ev:
        raise UsageError(f"{node!r} is already observed")
    if node not in cim.informational_nodes():
        raise UsageError(f"{node!r} cannot be observed before the decision")
    # The node precedes the decision, so its posterior does not depend on the action.
    p_node = cim.posterior([node], R_PLUS, ev).values
    base = best_expected_utility(cim, ev)
    gain = 0.0
    for value, p in enumerate(p_node):
        if p > 0:
            gain += p * best_expected_utility(cim, {**ev, node: value})
    return float(gain - base)


def voi_report(cim: InfluenceDiagram, ev: Mapping[str, int] | None = None) -> dict[str, float]:
    ev = dict(ev or {})
    return {n: value_of_information(cim, n, ev) for n in cim.informational_nodes() if n not in ev}


@dataclass(frozen=True)
class SweepRow:
    cost: float
    evidence_var: str
    evidence_value: str
    optimal_action: str
    eu_yield: float
    eu_unyield: float


SWEEP_COLUMNS = ("cost", "evidence_var", "evidence_value", "optimal_action", "eu_yield", "eu_unyield")


def cost_sensitivity_sweep(
    cim: InfluenceDiagram,
    cost_grid: Sequence[float],
    ev_var: str | None = None,
    ev: Mapping[str, int] | None = None,
    workers: int = 1,
) -> list[SweepRow]:
    """Optimal action of the trade-off utility for each cost and evidence value.

    The cost-free expected utilities are computed once per evidence value;
    the yielding branch is then shifted by each cost, which keeps the
    yielding region exactly downward-closed in cost.
    """
    if not isinstance(cim.utility, UtilitySpec) or cim.utility.kind != "tradeoff":
        raise UsageError("cost sweep needs the trade-off utility")
    if any(c < 0 for c in cost_grid):
        raise UsageError("costs must be >= 0")
    base = cim.with_utility(UtilitySpec("tradeoff", 0.0))
    ev = dict(ev or {})
    if ev_var is None:
        settings = [("", "", ev)]
    else:
        var = base.variable(ev_var)
        settings = [(ev_var, _value_label(var, v)[0], {**ev, ev_var: v}) for v in range(var.cardinality)]

    def solve(setting):
        _, _, e = setting
        return expected_utility(base, R_PLUS, e), expected_utility(base, R_MINUS, e)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        eus = list(pool.map(solve, settings))

    rows = []
    for cost in cost_grid:
        for (name, label, _), (y0, u0) in zip(settings, eus):
            d = _decide(y0 - cost, u0)
            rows.append(SweepRow(float(cost), name, label, d.label, d.eu_yield, d.eu_unyield))
    return rows


def write_sweep_csv(rows: Sequence[SweepRow], path: str | Path, header_comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for r in rows:
            writer.writerow([repr(r.cost), r.evidence_var, r.evidence_value, r.optimal_action, repr(r.eu_yield), repr(r.eu_unyield)])
