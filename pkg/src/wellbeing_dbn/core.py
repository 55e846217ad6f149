"""Discretization and exact factor algebra over small discrete variables.

Factors are dense numpy arrays whose axes follow the canonical scope order
(variables sorted by name). Everything here is immutable; operations return
new factors.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateEvidenceError, DomainError, ModelError, UsageError

NORMALIZATION_TOL = 1e-9
DEFAULT_N_BINS = 6

_LETTERS = string.ascii_letters


@dataclass(frozen=True)
class Variable:
    """A named discrete variable.

    ``states`` optionally labels each value (e.g. ``("R_MINUS", "R_PLUS")``);
    bin-valued variables leave it empty and are addressed by index.
    """

    name: str
    cardinality: int
    states: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name:
            raise ModelError("variable name must be non-empty")
        if int(self.cardinality) != self.cardinality or self.cardinality < 2:
            raise ModelError(f"variable {self.name!r}: cardinality must be an integer >= 2")
        if self.states and len(self.states) != self.cardinality:
            raise ModelError(f"variable {self.name!r}: {len(self.states)} state labels for cardinality {self.cardinality}")

    def index_of(self, value: int | str) -> int:
        """Resolve a state label or integer to an index."""
        if isinstance(value, str):
            if value not in self.states:
                raise UsageError(f"{value!r} is not a state of {self.name!r}")
            return self.states.index(value)
        value = int(value)
        if not 0 <= value < self.cardinality:
            raise UsageError(f"value {value} out of range for {self.name!r}")
        return value

    def label(self, index: int) -> str:
        return self.states[index] if self.states else str(index)


@dataclass(frozen=True)
class Bin:
    index: int
    n_bins: int = DEFAULT_N_BINS

    def __post_init__(self):
        if self.n_bins < 2:
            raise DomainError("n_bins must be >= 2")
        if not 0 <= self.index < self.n_bins:
            raise DomainError(f"bin index {self.index} outside [0, {self.n_bins})")

    @property
    def lower(self) -> float:
        return self.index / self.n_bins

    @property
    def upper(self) -> float:
        return (self.index + 1) / self.n_bins


def discretize(x: float, n_bins: int = DEFAULT_N_BINS) -> Bin:
    """Map ``x`` in [0, 1] to its bin; bins are half-open except the last."""
    if n_bins < 2:
        raise DomainError("n_bins must be >= 2")
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"value {x!r} outside [0, 1]")
    return Bin(min(int(math.floor(x * n_bins)), n_bins - 1), n_bins)


def bin_midpoint(b: Bin) -> float:
    return (b.index + 0.5) / b.n_bins


def midpoints(n_bins: int) -> np.ndarray:
    return (np.arange(n_bins) + 0.5) / n_bins


def _canonical(scope: Sequence[Variable]) -> tuple[Variable, ...]:
    return tuple(sorted(scope, key=lambda v: v.name))


class Factor:
    """Non-negative table over an ordered set of variables.

    The constructor accepts ``values`` laid out in the order of ``scope`` as
    given and transposes it into canonical order.
    """

    __slots__ = ("scope", "values")

    def __init__(self, scope: Iterable[Variable], values):
        scope = tuple(scope)
        names = [v.name for v in scope]
        if len(set(names)) != len(names):
            raise ModelError(f"duplicate variables in factor scope: {names}")
        shape = tuple(v.cardinality for v in scope)
        arr = np.asarray(values, dtype=np.float64)
        if arr.size != math.prod(shape):
            raise ModelError(f"factor over {names} needs {math.prod(shape)} values, got {arr.size}")
        arr = arr.reshape(shape)
        if np.any(~np.isfinite(arr)) or np.any(arr < 0):
            raise ModelError("factor values must be finite and non-negative")
        canon = _canonical(scope)
        if canon != scope:
            arr = np.transpose(arr, [scope.index(v) for v in canon])
        arr = np.array(arr, order="C")
        arr.flags.writeable = False
        object.__setattr__(self, "scope", canon)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, key, value):
        raise AttributeError("Factor is immutable")

    def __repr__(self):
        return f"Factor({[v.name for v in self.scope]}, total={self.total():.6g})"

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.scope)

    def variable(self, name: str) -> Variable:
        for v in self.scope:
            if v.name == name:
                return v
        raise UsageError(f"{name!r} not in factor scope {self.names}")

    def total(self) -> float:
        return float(self.values.sum())

    def flat(self) -> list[float]:
        return [float(x) for x in self.values.ravel()]

    def value(self, assignment: Mapping[str, int]) -> float:
        return float(self.values[tuple(int(assignment[v.name]) for v in self.scope)])

    def transposed(self, names: Sequence[str]) -> np.ndarray:
        """Values with axes in the requested order."""
        return np.transpose(self.values, [self.names.index(n) for n in names])

    @classmethod
    def ones(cls, scope: Iterable[Variable]) -> "Factor":
        scope = tuple(scope)
        return cls(scope, np.ones(tuple(v.cardinality for v in scope)))

    @classmethod
    def uniform(cls, scope: Iterable[Variable]) -> "Factor":
        scope = tuple(scope)
        n = math.prod(v.cardinality for v in scope)
        return cls(scope, np.full(n, 1.0 / n))

    @classmethod
    def scalar(cls, value: float) -> "Factor":
        return cls((), np.asarray(value, dtype=np.float64))

    @classmethod
    def indicator(cls, var: Variable, index: int) -> "Factor":
        vals = np.zeros(var.cardinality)
        vals[var.index_of(index)] = 1.0
        return cls((var,), vals)


def _letter_map(factors: Sequence[Factor]) -> dict[str, tuple[str, Variable]]:
    table: dict[str, tuple[str, Variable]] = {}
    for f in factors:
        for v in f.scope:
            seen = table.get(v.name)
            if seen is None:
                if len(table) >= len(_LETTERS):
                    raise ModelError("too many distinct variables for one contraction")
                table[v.name] = (_LETTERS[len(table)], v)
            elif seen[1].cardinality != v.cardinality:
                raise ModelError(
                    f"variable {v.name!r} has cardinality {seen[1].cardinality} and {v.cardinality}"
                )
    return table


def contract(factors: Sequence[Factor], keep: Iterable[str]) -> Factor:
    """Multiply ``factors`` and sum out every variable not in ``keep``."""
    factors = list(factors)
    keep = list(keep)
    table = _letter_map(factors)
    missing = [n for n in keep if n not in table]
    if missing:
        raise UsageError(f"cannot keep {missing}: not in any factor scope")
    out_vars = _canonical([table[n][1] for n in keep])
    subs = ",".join("".join(table[v.name][0] for v in f.scope) for f in factors)
    out = "".join(table[v.name][0] for v in out_vars)
    if not factors:
        return Factor.scalar(1.0)
    values = np.einsum(f"{subs}->{out}", *[f.values for f in factors], optimize=len(factors) > 2)
    return Factor(out_vars, values)


def factor_product(f: Factor, g: Factor) -> Factor:
    union = {v.name for v in f.scope} | {v.name for v in g.scope}
    return contract([f, g], union)


def marginalize(f: Factor, v: Variable | str) -> Factor:
    name = v if isinstance(v, str) else v.name
    if name not in f.names:
        raise UsageError(f"cannot marginalize {name!r}: not in scope {f.names}")
    axis = f.names.index(name)
    return Factor(f.scope[:axis] + f.scope[axis + 1 :], f.values.sum(axis=axis))


def marginal(f: Factor, keep: Iterable[str]) -> Factor:
    """Marginal of ``f`` over the variables in ``keep``."""
    keep = set(keep)
    for n in keep:
        f.variable(n)
    axes = tuple(i for i, n in enumerate(f.names) if n not in keep)
    return Factor(tuple(v for v in f.scope if v.name in keep), f.values.sum(axis=axes))


def normalize(f: Factor) -> Factor:
    total = f.values.sum()
    if not total > 0:
        raise DegenerateEvidenceError("factor has zero total mass; evidence is impossible under the model")
    return Factor(f.scope, f.values / total)


def reduce(f: Factor, assignment: Mapping[str, int]) -> Factor:
    """Instantiate the variables of ``assignment`` that appear in ``f``."""
    index = []
    rest = []
    for v in f.scope:
        if v.name in assignment:
            index.append(v.index_of(assignment[v.name]))
        else:
            index.append(slice(None))
            rest.append(v)
    if len(rest) == len(f.scope):
        return f
    return Factor(rest, f.values[tuple(index)])


def rename(f: Factor, mapping: Mapping[str, str]) -> Factor:
    """Return ``f`` with variables renamed; values follow their variables."""
    new_scope = [Variable(mapping.get(v.name, v.name), v.cardinality, v.states) for v in f.scope]
    return Factor(new_scope, f.values)


def argmax_lowest(values: np.ndarray) -> int:
    """Index of the maximum, ties resolved to the lowest index."""
    return int(np.argmax(values))


class CpdTable:
    """P(child | parents) stored as a factor over child and parents."""

    __slots__ = ("child", "parents", "table")

    def __init__(self, child: Variable, parents: Sequence[Variable], table: Factor, tol: float = NORMALIZATION_TOL):
        parents = tuple(parents)
        expected = {child.name, *(p.name for p in parents)}
        if len(expected) != len(parents) + 1:
            raise ModelError(f"CPD for {child.name!r} repeats a variable among its parents")
        if set(table.names) != expected:
            raise ModelError(f"CPD table scope {table.names} does not match {sorted(expected)}")
        sums = marginalize(table, child.name).values
        if sums.size and np.max(np.abs(sums - 1.0)) > tol:
            raise ModelError(f"CPD for {child.name!r} has a column summing to {sums.ravel()[np.argmax(np.abs(sums - 1.0))]!r}")
        object.__setattr__(self, "child", child)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "table", table)

    def __setattr__(self, key, value):
        raise AttributeError("CpdTable is immutable")

    def __repr__(self):
        return f"CpdTable({self.child.name} | {', '.join(p.name for p in self.parents)})"

    @classmethod
    def from_array(cls, child: Variable, parents: Sequence[Variable], array) -> "CpdTable":
        """Build from an array shaped ``(*parent_cards, child_card)``."""
        parents = tuple(parents)
        return cls(child, parents, Factor(parents + (child,), array))

    @classmethod
    def uniform(cls, child: Variable, parents: Sequence[Variable]) -> "CpdTable":
        parents = tuple(parents)
        shape = tuple(p.cardinality for p in parents) + (child.cardinality,)
        return cls.from_array(child, parents, np.full(shape, 1.0 / child.cardinality))

    def as_array(self) -> np.ndarray:
        """Values shaped ``(*parent_cards, child_card)`` in parent order."""
        return self.table.transposed([p.name for p in self.parents] + [self.child.name])

    def prob(self, child_value: int, parent_values: Mapping[str, int]) -> float:
        return self.table.value({self.child.name: child_value, **parent_values})
