"""Event logs: questionnaire scoring, CSV ingestion and synthetic data.

CSV schema (header must match exactly)::

    participant_id,ride,event,contributor,a_R,a_O,alignment,intention,q1,...,q8

Categorical cells use the literal tokens R_PLUS/R_MINUS, O_PLUS/O_MINUS,
AL0/AL1 and I_PLUS/I_MINUS; an empty cell means unobserved. Questionnaire
items are 7-point Likert values already oriented so that higher is more
positive (the semantic-differential items Q3-Q5 are not flipped here).
Leading lines starting with ``#`` are comments.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import DEFAULT_N_BINS, discretize
from .dbn.inference import EventInput, chain_events
from .dbn.model import A_O, A_O_PREV, A_R, AL, I, T, W, DbnModel, prev
from .errors import DomainError, ModelError, ValidationError

LIKERT_MIN, LIKERT_MAX = 1, 7
QUESTION_COLUMNS = tuple(f"q{i}" for i in range(1, 9))
CSV_COLUMNS = ("participant_id", "ride", "event", "contributor", "a_R", "a_O", "alignment", "intention") + QUESTION_COLUMNS

TOKENS = {
    "a_R": ("R_MINUS", "R_PLUS"),
    "a_O": ("O_MINUS", "O_PLUS"),
    "alignment": ("AL0", "AL1"),
    "intention": ("I_MINUS", "I_PLUS"),
}


def likert_to_unit(v: int) -> float:
    if isinstance(v, bool) or int(v) != v or not LIKERT_MIN <= v <= LIKERT_MAX:
        raise DomainError(f"Likert value {v!r} outside {LIKERT_MIN}..{LIKERT_MAX}")
    return (int(v) - 1) / 6


@dataclass(frozen=True)
class QuestionnaireResponse:
    q1: int
    q2: int
    q3: int
    q4: int
    q5: int
    q6: int
    q7: int
    q8: int

    def __post_init__(self):
        bad = [f"q{i + 1}={v!r}" for i, v in enumerate(self.items()) if not _valid_likert(v)]
        if bad:
            raise DomainError(f"Likert values out of range: {', '.join(bad)}")

    def items(self) -> tuple[int, ...]:
        return (self.q1, self.q2, self.q3, self.q4, self.q5, self.q6, self.q7, self.q8)

    @classmethod
    def from_items(cls, items: Sequence[int]) -> "QuestionnaireResponse":
        if len(items) != 8:
            raise DomainError(f"expected 8 questionnaire items, got {len(items)}")
        return cls(*items)


def _valid_likert(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool) and LIKERT_MIN <= v <= LIKERT_MAX


def score_wellbeing(r: QuestionnaireResponse) -> float:
    """Mean of items 1-7 mapped onto [0, 1]."""
    return sum(likert_to_unit(q) for q in r.items()[:7]) / 7


def score_trust(r: QuestionnaireResponse) -> float:
    return likert_to_unit(r.q8)


@dataclass(frozen=True)
class EventRecord:
    participant_id: str
    ride: int
    event: int
    contributor: str
    a_R: int | None
    a_O: int | None
    alignment: int | None
    intention: int | None
    responses: QuestionnaireResponse

    def to_event(self, n_bins: int = DEFAULT_N_BINS) -> EventInput:
        observed = {
            W: discretize(score_wellbeing(self.responses), n_bins).index,
            T: discretize(score_trust(self.responses), n_bins).index,
        }
        return EventInput(
            self.contributor,
            a_R=self.a_R,
            a_O=self.a_O,
            alignment=self.alignment,
            intention=self.intention,
            observed=observed,
        )


@dataclass(frozen=True)
class Dataset:
    sequences: tuple[tuple[EventRecord, ...], ...]
    n_bins: int = DEFAULT_N_BINS

    def __post_init__(self):
        object.__setattr__(self, "sequences", tuple(tuple(s) for s in self.sequences))
        if any(len(s) == 0 for s in self.sequences):
            raise ValidationError("dataset sequences must be non-empty")

    def __len__(self):
        return len(self.sequences)

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset(tuple(self.sequences[i] for i in indices), self.n_bins)

    def records(self) -> list[EventRecord]:
        return [r for s in self.sequences for r in s]

    def event_sequences(self) -> list[list[EventInput]]:
        return [chain_events([r.to_event(self.n_bins) for r in s]) for s in self.sequences]

    def to_dict(self) -> dict:
        return {
            "n_bins": self.n_bins,
            "sequences": [[_record_to_dict(r) for r in s] for s in self.sequences],
        }

    @classmethod
    def from_dict(cls, doc) -> "Dataset":
        seqs = tuple(tuple(_record_from_dict(r) for r in s) for s in doc["sequences"])
        return cls(seqs, int(doc.get("n_bins", DEFAULT_N_BINS)))


def _record_to_dict(r: EventRecord) -> dict:
    d = asdict(r)
    d["responses"] = list(r.responses.items())
    return d


def _record_from_dict(d) -> EventRecord:
    return EventRecord(
        str(d["participant_id"]),
        int(d["ride"]),
        int(d["event"]),
        d["contributor"],
        d.get("a_R"),
        d.get("a_O"),
        d.get("alignment"),
        d.get("intention"),
        QuestionnaireResponse.from_items(d["responses"]),
    )


def save_dataset_json(ds: Dataset, path: str | Path) -> None:
    Path(path).write_text(json.dumps(ds.to_dict(), indent=1) + "\n")


def load_dataset_json(path: str | Path) -> Dataset:
    return Dataset.from_dict(json.loads(Path(path).read_text()))


# -- CSV --------------------------------------------------------------------


def _strip_comments(text: str) -> tuple[list[str], int]:
    lines = text.splitlines()
    skipped = 0
    while skipped < len(lines) and lines[skipped].startswith("#"):
        skipped += 1
    return lines[skipped:], skipped


def parse_event_log(path: str | Path, n_bins: int = DEFAULT_N_BINS) -> Dataset:
    """Read and validate an event-log CSV.

    Every problem in the file is collected and raised together as one
    :class:`ValidationError` naming line numbers and columns.
    """
    lines, offset = _strip_comments(Path(path).read_text())
    reader = csv.reader(io.StringIO("\n".join(lines)))
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
        raise ValidationError(f"line {offset + 1}: header must be {','.join(CSV_COLUMNS)}, got {header}")

    problems: list[str] = []
    records: list[EventRecord] = []
    seen: dict[tuple, int] = {}
    for lineno, row in enumerate(reader, start=offset + 2):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(CSV_COLUMNS):
            problems.append(f"line {lineno}: expected {len(CSV_COLUMNS)} columns, got {len(row)}")
            continue
        rec = _parse_row(dict(zip(CSV_COLUMNS, (c.strip() for c in row))), lineno, problems)
        if rec is None:
            continue
        key = (rec.participant_id, rec.ride, rec.event)
        if key in seen:
            problems.append(f"line {lineno}: duplicate (participant, ride, event) {key}, first seen on line {seen[key]}")
            continue
        seen[key] = lineno
        records.append(rec)
    if problems:
        raise ValidationError(problems)
    return Dataset(_group(records), n_bins)


def _group(records: Sequence[EventRecord]) -> tuple[tuple[EventRecord, ...], ...]:
    by_participant: dict[str, list[EventRecord]] = {}
    for r in records:
        by_participant.setdefault(r.participant_id, []).append(r)
    return tuple(tuple(sorted(rs, key=lambda r: (r.ride, r.event))) for rs in by_participant.values())


def _parse_row(cells: dict[str, str], lineno: int, problems: list[str]) -> EventRecord | None:
    start = len(problems)

    def fail(col: str, msg: str) -> None:
        problems.append(f"line {lineno}, column {col}: {msg}")

    pid = cells["participant_id"]
    if not pid:
        fail("participant_id", "must be non-empty")
    ints = {}
    for col in ("ride", "event"):
        try:
            ints[col] = int(cells[col])
            if ints[col] < 1:
                raise ValueError
        except ValueError:
            fail(col, f"expected a positive integer, got {cells[col]!r}")
    contributor = cells["contributor"]
    if contributor not in ("R", "O"):
        fail("contributor", f"expected R or O, got {contributor!r}")
    cats: dict[str, int | None] = {}
    for col, tokens in TOKENS.items():
        raw = cells[col]
        if raw == "":
            cats[col] = None
        elif raw in tokens:
            cats[col] = tokens.index(raw)
        else:
            fail(col, f"expected one of {tokens} or empty, got {raw!r}")
            cats[col] = None
    items = []
    for col in QUESTION_COLUMNS:
        raw = cells[col]
        try:
            v = int(raw)
        except ValueError:
            fail(col, f"expected a Likert integer 1-7, got {raw!r}")
            continue
        if not LIKERT_MIN <= v <= LIKERT_MAX:
            fail(col, f"Likert value {v} outside 1-7")
            continue
        items.append(v)

    if contributor == "R":
        if cats["a_R"] is None:
            fail("a_R", "AV-contributor events need the AV action")
        if cats["a_O"] is not None:
            fail("a_O", "AV-contributor events cannot carry an other-road-user action")
        if cats["intention"] is None:
            fail("intention", "AV-contributor events need the stated intention")
        if None not in (cats["alignment"], cats["intention"], cats["a_R"]):
            if cats["alignment"] != int(cats["intention"] == cats["a_R"]):
                fail("alignment", "inconsistent with intention and a_R")
    elif contributor == "O":
        if cats["a_O"] is None:
            fail("a_O", "other-contributor events need the other road user's action")
        for col in ("a_R", "alignment"):
            if cats[col] is not None:
                fail(col, "only AV-contributor events may carry this field")
    if len(problems) > start:
        return None
    return EventRecord(
        pid, ints["ride"], ints["event"], contributor,
        cats["a_R"], cats["a_O"], cats["alignment"], cats["intention"],
        QuestionnaireResponse(*items),
    )


def write_event_log(ds: Dataset, path: str | Path, header_comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in ds.records():
            cats = [
                "" if v is None else TOKENS[col][v]
                for col, v in (("a_R", r.a_R), ("a_O", r.a_O), ("alignment", r.alignment), ("intention", r.intention))
            ]
            writer.writerow([r.participant_id, r.ride, r.event, r.contributor, *cats, *r.responses.items()])


# -- synthetic data ---------------------------------------------------------


def wellbeing_items_for_bin(b: int, n_bins: int) -> tuple[int, ...]:
    """Seven Likert answers whose mean score falls nearest the bin midpoint."""
    target = (b + 0.5) / n_bins
    in_bin = [s for s in range(43) if discretize(s / 42, n_bins).index == b]
    pool = in_bin or list(range(43))
    total = min(pool, key=lambda s: (abs(s / 42 - target), s))
    base, extra = divmod(total, 7)
    return tuple(base + 1 + (1 if j < extra else 0) for j in range(7))


def trust_item_for_bin(b: int, n_bins: int) -> int:
    target = (b + 0.5) / n_bins
    in_bin = [q for q in range(1, 8) if discretize((q - 1) / 6, n_bins).index == b]
    pool = in_bin or list(range(1, 8))
    return min(pool, key=lambda q: (abs((q - 1) / 6 - target), q))


def _draw(rng: np.random.Generator, p: np.ndarray) -> int:
    cdf = np.cumsum(p)
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), p.size - 1))


def generate_synthetic(model: DbnModel, n_participants: int, events_per_participant: int, seed: int) -> Dataset:
    """Sample event logs from ``model``.

    Each participant alternates other-contributor and AV-contributor events
    (two events per ride), keeps one robot action throughout, and states an
    intention on AV-contributor events; alignment is whether the AV action
    matches that intention. Uses PCG64 seeded explicitly.
    """
    if n_participants < 1 or events_per_participant < 1:
        raise ValidationError("need at least one participant and one event")
    for name in (W, T, I):
        if name not in model.latent_names:
            raise ModelError(f"synthetic data needs latent {name!r}")
    n_bins = model.n_bins
    rng = np.random.Generator(np.random.PCG64(seed))
    names = model.latent_names
    arrays = {r: {c: cpd.as_array() for c, cpd in model.cpds[r].items()} for r in model.cpds}
    parents = {r: {c: [p.name for p in cpd.parents] for c, cpd in model.cpds[r].items()} for r in model.cpds}
    order = {r: model.structure.order(r) for r in model.cpds}
    # Alignment is derived from the freshly drawn intention, so intention must
    # not depend on alignment or on other slice latents.
    if any(p in names or p == AL for p in parents["R"][I]):
        raise ModelError("synthetic data needs the intention CPD to depend only on earlier slices")
    w_items = [wellbeing_items_for_bin(b, n_bins) for b in range(n_bins)]
    t_items = [trust_item_for_bin(b, n_bins) for b in range(n_bins)]

    sequences = []
    for p_idx in range(n_participants):
        state = {n: _draw(rng, model.prior[n].values) for n in names}
        a_O_fixed = _draw(rng, model.input_priors[A_O].values)
        prev_a_O = None
        records = []
        for e in range(events_per_participant):
            regime = "O" if e % 2 == 0 else "R"
            values = {prev(n): v for n, v in state.items()}
            if regime == "O":
                values[A_O] = a_O_fixed
            else:
                values[A_R] = _draw(rng, model.input_priors[A_R].values)
                values[A_O_PREV] = prev_a_O if prev_a_O is not None else _draw(rng, model.input_priors[A_O_PREV].values)
            current: dict[str, int] = {}
            if regime == "R":
                col = arrays["R"][I][tuple(values[p] for p in parents["R"][I])]
                current[I] = _draw(rng, col)
                values[AL] = int(current[I] == values[A_R])
            for child in order[regime]:
                if child in current:
                    continue
                ctx = {**values, **current}
                col = arrays[regime][child][tuple(ctx[p] for p in parents[regime][child])]
                current[child] = _draw(rng, col)
            state = current
            records.append(
                EventRecord(
                    participant_id=f"P{p_idx + 1:04d}",
                    ride=e // 2 + 1,
                    event=e % 2 + 1,
                    contributor=regime,
                    a_R=values[A_R] if regime == "R" else None,
                    a_O=values[A_O] if regime == "O" else None,
                    alignment=values[AL] if regime == "R" else None,
                    intention=current[I] if regime == "R" else None,
                    responses=QuestionnaireResponse(*w_items[current[W]], t_items[current[T]]),
                )
            )
            prev_a_O = values[A_O] if regime == "O" else None
        sequences.append(tuple(records))
    return Dataset(tuple(sequences), n_bins)
