"""Network templates for the two interaction regimes and the model document.

Slice-k latents carry their plain names (``w``, ``t``, ``i``, ``wO``); the
previous slice uses a ``_prev`` suffix. Event inputs are fixed per regime:
when the AV contributes (regime ``R``) transitions may condition on its
action ``a_R``, the alignment ``al`` and the other's preceding action
``a_O_prev``; when the other road user contributes (regime ``O``) they may
condition on its action ``a_O``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..core import DEFAULT_N_BINS, CpdTable, Factor, Variable, contract
from ..errors import ModelError

MODEL_FORMAT = "wellbeing-dbn/model"
STRUCTURE_FORMAT = "wellbeing-dbn/structure"

W, T, I, WO = "w", "t", "i", "wO"
A_R, A_O, AL, A_O_PREV = "a_R", "a_O", "al", "a_O_prev"

R_MINUS, R_PLUS = 0, 1
O_MINUS, O_PLUS = 0, 1
AL0, AL1 = 0, 1
I_MINUS, I_PLUS = 0, 1

INTENTION_STATES = ("I_MINUS", "I_PLUS")

INPUTS: dict[str, Variable] = {
    A_R: Variable(A_R, 2, ("R_MINUS", "R_PLUS")),
    A_O: Variable(A_O, 2, ("O_MINUS", "O_PLUS")),
    AL: Variable(AL, 2, ("AL0", "AL1")),
    A_O_PREV: Variable(A_O_PREV, 2, ("O_MINUS", "O_PLUS")),
}

REGIME_INPUTS: dict[str, tuple[str, ...]] = {
    "R": (A_R, AL, A_O_PREV),
    "O": (A_O,),
}
REGIMES = ("R", "O")


def prev(name: str) -> str:
    return f"{name}_prev"


@dataclass(frozen=True)
class Tie:
    """Borrow a CPD's parameters from another regime's CPD.

    Used for variables that are never measured: the other road user's
    well-being reuses the transition the user shows under the mirrored
    action. ``parents`` maps this CPD's parent names onto the source CPD's.
    """

    regime: str
    child: str
    parents: Mapping[str, str] = field(default_factory=dict)

    def source_parent(self, name: str) -> str:
        return self.parents.get(name, name)


@dataclass(frozen=True)
class CpdSpec:
    child: str
    parents: tuple[str, ...]
    tie: Tie | None = None


@dataclass(frozen=True)
class StructureCandidate:
    """Edge sets for both regimes over a declared set of latents."""

    structure_id: str
    latents: tuple[Variable, ...]
    regimes: Mapping[str, tuple[CpdSpec, ...]]
    other_latents: frozenset[str] | None = None
    n_bins: int = DEFAULT_N_BINS

    def __post_init__(self):
        object.__setattr__(self, "latents", tuple(self.latents))
        if self.other_latents is None:
            other = {WO} & {v.name for v in self.latents}
        else:
            other = self.other_latents
        object.__setattr__(self, "other_latents", frozenset(other))
        object.__setattr__(self, "regimes", {k: tuple(v) for k, v in self.regimes.items()})
        _validate_structure(self)

    @property
    def latent_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.latents)

    def variable(self, name: str) -> Variable:
        for v in self.latents:
            if v.name == name:
                return v
            if prev(v.name) == name:
                return Variable(name, v.cardinality, v.states)
        if name in INPUTS:
            return INPUTS[name]
        raise ModelError(f"undeclared variable {name!r}")

    def spec(self, regime: str, child: str) -> CpdSpec:
        for s in self.regimes[regime]:
            if s.child == child:
                return s
        raise ModelError(f"regime {regime!r} has no CPD for {child!r}")

    def order(self, regime: str) -> tuple[str, ...]:
        """Slice-k latents of ``regime`` in topological order."""
        return _topological(self.regimes[regime], self.latent_names)

    def without_edge(self, regime: str, child: str, parent: str, structure_id: str | None = None) -> "StructureCandidate":
        regimes = dict(self.regimes)
        regimes[regime] = tuple(
            CpdSpec(s.child, tuple(p for p in s.parents if p != parent), s.tie) if s.child == child else s
            for s in self.regimes[regime]
        )
        return StructureCandidate(
            structure_id or f"{self.structure_id}-{regime}:{parent}->{child}",
            self.latents,
            regimes,
            self.other_latents,
            self.n_bins,
        )


def _topological(specs: Sequence[CpdSpec], latents: Sequence[str]) -> tuple[str, ...]:
    deps = {s.child: [p for p in s.parents if p in latents] for s in specs}
    done: list[str] = []
    state: dict[str, int] = {}

    def visit(n: str) -> None:
        mark = state.get(n, 0)
        if mark == 2:
            return
        if mark == 1:
            raise ModelError(f"intra-slice cycle through {n!r}")
        state[n] = 1
        for p in deps.get(n, []):
            visit(p)
        state[n] = 2
        done.append(n)

    for s in specs:
        visit(s.child)
    return tuple(done)


def _validate_structure(s: StructureCandidate) -> None:
    names = [v.name for v in s.latents]
    if len(set(names)) != len(names):
        raise ModelError(f"latent names must be unique: {names}")
    for n in names:
        if n in INPUTS or n.endswith("_prev"):
            raise ModelError(f"latent name {n!r} clashes with a reserved name")
    for n in s.other_latents:
        if n not in names:
            raise ModelError(f"other-road-user latent {n!r} is not declared")
    if set(s.regimes) != set(REGIMES):
        raise ModelError(f"structure must define regimes {REGIMES}, got {sorted(s.regimes)}")
    for regime, specs in s.regimes.items():
        children = [sp.child for sp in specs]
        if sorted(children) != sorted(names):
            raise ModelError(f"regime {regime!r} must have exactly one CPD per latent; got {children}")
        allowed = {prev(n) for n in names} | set(REGIME_INPUTS[regime])
        for sp in specs:
            for p in sp.parents:
                if p == sp.child:
                    raise ModelError(f"{sp.child!r} cannot be its own parent")
                if p not in allowed and p not in names:
                    raise ModelError(f"regime {regime!r}: parent {p!r} of {sp.child!r} is undeclared or not allowed")
            if len(set(sp.parents)) != len(sp.parents):
                raise ModelError(f"regime {regime!r}: duplicate parents for {sp.child!r}")
        _topological(specs, names)
    for regime, specs in s.regimes.items():
        for sp in specs:
            if sp.tie is None:
                continue
            t = sp.tie
            if t.regime not in REGIMES or t.child not in names:
                raise ModelError(f"tie for {regime}:{sp.child} references unknown {t.regime}:{t.child}")
            src_allowed = {prev(n) for n in names} | set(REGIME_INPUTS[t.regime]) | set(names)
            if s.variable(t.child).cardinality != s.variable(sp.child).cardinality:
                raise ModelError(f"tie {regime}:{sp.child} -> {t.regime}:{t.child}: cardinality mismatch")
            for p in sp.parents:
                q = t.source_parent(p)
                if q not in src_allowed or q == t.child:
                    raise ModelError(f"tie for {regime}:{sp.child} maps {p!r} to invalid {q!r}")
                if s.variable(q).cardinality != s.variable(p).cardinality:
                    raise ModelError(f"tie for {regime}:{sp.child}: {p!r} and {q!r} differ in cardinality")


def standard_latents(n_bins: int = DEFAULT_N_BINS) -> tuple[Variable, ...]:
    return (
        Variable(W, n_bins),
        Variable(T, n_bins),
        Variable(I, 2, INTENTION_STATES),
        Variable(WO, n_bins),
    )


def default_structure(n_bins: int = DEFAULT_N_BINS) -> StructureCandidate:
    """Edges for the dependencies found significant in the interaction study.

    Robot yielding raises well-being, the AV's action drives trust, yielding
    intention goes with higher well-being, alignment affects well-being and
    trust, and prior trust feeds well-being. Every latent persists from its
    previous value. The other road user's well-being is never measured, so
    its CPDs are tied to the user's response to the mirrored action.
    """
    r = (
        CpdSpec(W, (prev(W), prev(T), I, AL, A_O_PREV)),
        CpdSpec(T, (prev(T), A_R, AL)),
        CpdSpec(I, (prev(I),)),
        CpdSpec(WO, (prev(WO), A_R), Tie("O", W, {prev(WO): prev(W), A_R: A_O})),
    )
    o = (
        CpdSpec(W, (prev(W), prev(T), A_O)),
        CpdSpec(T, (prev(T),)),
        CpdSpec(I, (prev(I),)),
        CpdSpec(WO, (prev(WO), A_O), Tie("R", W, {prev(WO): prev(W), A_O: A_R})),
    )
    return StructureCandidate("default", standard_latents(n_bins), {"R": r, "O": o}, n_bins=n_bins)


class DbnModel:
    """A structure with parameters for both regimes, an initial prior and
    priors for event inputs that may go unobserved."""

    __slots__ = ("structure", "cpds", "prior", "input_priors")

    def __init__(
        self,
        structure: StructureCandidate,
        cpds: Mapping[str, Mapping[str, CpdTable]],
        prior: Mapping[str, Factor] | None = None,
        input_priors: Mapping[str, Factor] | None = None,
    ):
        object.__setattr__(self, "structure", structure)
        checked: dict[str, dict[str, CpdTable]] = {}
        for regime in REGIMES:
            table = dict(cpds.get(regime, {}))
            checked[regime] = {}
            for spec in structure.regimes[regime]:
                cpd = table.pop(spec.child, None)
                if cpd is None:
                    raise ModelError(f"regime {regime!r} is missing the CPD for {spec.child!r}")
                want = [structure.variable(p) for p in spec.parents]
                if cpd.child != structure.variable(spec.child) or list(cpd.parents) != want:
                    raise ModelError(f"CPD {cpd!r} does not match structure {regime}:{spec}")
                checked[regime][spec.child] = cpd
            if table:
                raise ModelError(f"regime {regime!r} has CPDs for undeclared latents {sorted(table)}")
        object.__setattr__(self, "cpds", checked)

        pri = {}
        for v in structure.latents:
            f = (prior or {}).get(v.name) or Factor.uniform([v])
            if f.names != (v.name,) or abs(f.total() - 1.0) > 1e-9:
                raise ModelError(f"prior for {v.name!r} must be a normalized factor over it")
            pri[v.name] = f
        object.__setattr__(self, "prior", pri)
        ipri = {}
        for name, v in INPUTS.items():
            f = (input_priors or {}).get(name) or Factor.uniform([v])
            if f.names != (name,) or abs(f.total() - 1.0) > 1e-9:
                raise ModelError(f"input prior for {name!r} must be a normalized factor over it")
            ipri[name] = f
        object.__setattr__(self, "input_priors", ipri)

    def __setattr__(self, key, value):
        raise AttributeError("DbnModel is immutable")

    def __repr__(self):
        return f"DbnModel({self.structure.structure_id!r}, latents={list(self.latent_names)})"

    @property
    def structure_id(self) -> str:
        return self.structure.structure_id

    @property
    def latents(self) -> tuple[Variable, ...]:
        return self.structure.latents

    @property
    def latent_names(self) -> tuple[str, ...]:
        return self.structure.latent_names

    @property
    def n_bins(self) -> int:
        return self.structure.n_bins

    def variable(self, name: str) -> Variable:
        return self.structure.variable(name)

    def regime_cpds(self, regime: str) -> list[CpdTable]:
        return [self.cpds[regime][c] for c in self.structure.order(regime)]

    def prior_joint(self) -> Factor:
        return contract(list(self.prior.values()), self.latent_names)

    @classmethod
    def uniform(cls, structure: StructureCandidate) -> "DbnModel":
        cpds = {
            regime: {
                s.child: CpdTable.uniform(structure.variable(s.child), [structure.variable(p) for p in s.parents])
                for s in specs
            }
            for regime, specs in structure.regimes.items()
        }
        return cls(structure, cpds)

    @classmethod
    def from_arrays(
        cls,
        structure: StructureCandidate,
        arrays: Mapping[str, Mapping[str, np.ndarray]],
        prior: Mapping[str, Sequence[float]] | None = None,
        input_priors: Mapping[str, Sequence[float]] | None = None,
    ) -> "DbnModel":
        """Build from arrays shaped ``(*parent_cards, child_card)`` per CPD."""
        cpds = {}
        for regime, specs in structure.regimes.items():
            cpds[regime] = {}
            for s in specs:
                parents = [structure.variable(p) for p in s.parents]
                cpds[regime][s.child] = CpdTable.from_array(structure.variable(s.child), parents, arrays[regime][s.child])
        pri = {n: Factor([structure.variable(n)], v) for n, v in (prior or {}).items()}
        ipri = {n: Factor([INPUTS[n]], v) for n, v in (input_priors or {}).items()}
        return cls(structure, cpds, pri, ipri)


# -- JSON documents ---------------------------------------------------------


def _variable_doc(v: Variable, group: str) -> dict:
    doc = {"name": v.name, "cardinality": v.cardinality, "group": group}
    if v.states:
        doc["states"] = list(v.states)
    return doc


def structure_to_dict(s: StructureCandidate) -> dict:
    regimes = {}
    for regime in REGIMES:
        rows = []
        for sp in s.regimes[regime]:
            row: dict = {"child": sp.child, "parents": list(sp.parents)}
            if sp.tie is not None:
                row["tie"] = {"regime": sp.tie.regime, "child": sp.tie.child, "parents": dict(sp.tie.parents)}
            rows.append(row)
        regimes[regime] = rows
    return {
        "format": STRUCTURE_FORMAT,
        "structure_id": s.structure_id,
        "n_bins": s.n_bins,
        "latents": [_variable_doc(v, "other" if v.name in s.other_latents else "user") for v in s.latents],
        "regimes": regimes,
    }


def structure_from_dict(doc: Mapping) -> StructureCandidate:
    try:
        latents = tuple(
            Variable(d["name"], int(d["cardinality"]), tuple(d.get("states", ()))) for d in doc["latents"]
        )
        other = frozenset(d["name"] for d in doc["latents"] if d.get("group", "user") == "other")
        regimes = {}
        for regime, rows in doc["regimes"].items():
            specs = []
            for row in rows:
                tie = row.get("tie")
                specs.append(
                    CpdSpec(
                        row["child"],
                        tuple(row["parents"]),
                        Tie(tie["regime"], tie["child"], dict(tie.get("parents", {}))) if tie else None,
                    )
                )
            regimes[regime] = tuple(specs)
        return StructureCandidate(
            str(doc["structure_id"]), latents, regimes, other, int(doc.get("n_bins", DEFAULT_N_BINS))
        )
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed structure document: {exc!r}") from exc


def model_to_dict(model: DbnModel) -> dict:
    doc = structure_to_dict(model.structure)
    doc["format"] = MODEL_FORMAT
    for regime in REGIMES:
        for row in doc["regimes"][regime]:
            cpd = model.cpds[regime][row["child"]]
            row["scope"] = list(cpd.table.names)
            row["values"] = cpd.table.flat()
    doc["prior"] = {n: f.flat() for n, f in model.prior.items()}
    doc["input_priors"] = {n: f.flat() for n, f in model.input_priors.items()}
    return doc


def model_from_dict(doc: Mapping) -> DbnModel:
    if doc.get("format") != MODEL_FORMAT:
        raise ModelError(f"not a model document (format={doc.get('format')!r})")
    structure = structure_from_dict(doc)
    try:
        cpds: dict[str, dict[str, CpdTable]] = {}
        for regime, rows in doc["regimes"].items():
            cpds[regime] = {}
            for row in rows:
                scope = [structure.variable(n) for n in row["scope"]]
                child = structure.variable(row["child"])
                parents = [structure.variable(p) for p in row["parents"]]
                cpds[regime][row["child"]] = CpdTable(child, parents, Factor(scope, row["values"]))
        prior = {n: Factor([structure.variable(n)], v) for n, v in doc.get("prior", {}).items()}
        ipri = {n: Factor([INPUTS[n]], v) for n, v in doc.get("input_priors", {}).items()}
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model document: {exc!r}") from exc
    return DbnModel(structure, cpds, prior, ipri)


def save_json(doc: Mapping, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_model(path: str | Path) -> DbnModel:
    return model_from_dict(json.loads(Path(path).read_text()))


def load_structure(path: str | Path) -> StructureCandidate:
    return structure_from_dict(json.loads(Path(path).read_text()))
