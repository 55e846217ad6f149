import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import point_mass_model
from wellbeing_dbn.core import discretize
from wellbeing_dbn.data import (
    CSV_COLUMNS,
    Dataset,
    EventRecord,
    QuestionnaireResponse,
    generate_synthetic,
    likert_to_unit,
    load_dataset_json,
    parse_event_log,
    save_dataset_json,
    score_trust,
    score_wellbeing,
    trust_item_for_bin,
    wellbeing_items_for_bin,
    write_event_log,
)
from wellbeing_dbn.dbn import reference_model
from wellbeing_dbn.errors import DomainError, ValidationError

HEADER = ",".join(CSV_COLUMNS)


def write(tmp_path, *rows, name="log.csv"):
    path = tmp_path / name
    path.write_text("\n".join((HEADER,) + rows) + "\n")
    return path


@pytest.mark.parametrize("v, expected", [(1, 0.0), (7, 1.0), (4, 0.5)])
def test_likert_examples(v, expected):
    assert likert_to_unit(v) == expected


@pytest.mark.parametrize("v", [0, 8, 2.5, True])
def test_likert_out_of_range(v):
    with pytest.raises(DomainError):
        likert_to_unit(v)


def test_scoring_examples():
    assert score_wellbeing(QuestionnaireResponse(*[7] * 8)) == 1.0
    assert score_wellbeing(QuestionnaireResponse(*[1] * 8)) == 0.0
    assert score_wellbeing(QuestionnaireResponse(7, 7, 7, 1, 1, 1, 4, 1)) == pytest.approx(0.5, abs=1e-15)
    assert score_trust(QuestionnaireResponse(*[4] * 7, 7)) == 1.0
    assert score_trust(QuestionnaireResponse(*[4] * 7, 1)) == 0.0
    assert score_trust(QuestionnaireResponse(*[4] * 7, 5)) == pytest.approx(2 / 3, abs=1e-15)
    with pytest.raises(DomainError):
        QuestionnaireResponse(*[4] * 7, 9)


likert = st.integers(1, 7)


@given(st.lists(likert, min_size=8, max_size=8), st.permutations(range(7)))
def test_scores_in_unit_interval_and_permutation_invariant(items, perm):
    r = QuestionnaireResponse(*items)
    shuffled = QuestionnaireResponse(*[items[j] for j in perm], items[7])
    assert 0.0 <= score_wellbeing(r) <= 1.0 and 0.0 <= score_trust(r) <= 1.0
    assert score_wellbeing(r) == pytest.approx(score_wellbeing(shuffled), abs=1e-15)


def test_items_for_bin_land_in_bin():
    for n in (3, 6):
        for b in range(n):
            r = QuestionnaireResponse(*wellbeing_items_for_bin(b, n), trust_item_for_bin(b, n))
            assert discretize(score_wellbeing(r), n).index == b
            assert discretize(score_trust(r), n).index == b


def test_parse_empty_and_single(tmp_path):
    assert len(parse_event_log(write(tmp_path))) == 0
    ds = parse_event_log(write(tmp_path, "P1,1,2,R,R_PLUS,,AL1,I_PLUS,5,5,5,5,5,5,5,6"))
    assert len(ds) == 1 and len(ds.sequences[0]) == 1
    rec = ds.sequences[0][0]
    assert (rec.a_R, rec.alignment, rec.intention) == (1, 1, 1)
    ev = rec.to_event()
    assert ev.observed == {"w": 4, "t": 5}


def test_parse_reports_row_and_column(tmp_path):
    path = write(tmp_path, "P1,1,1,O,,O_PLUS,,,5,5,5,9,5,5,5,6")
    with pytest.raises(ValidationError) as err:
        parse_event_log(path)
    assert "line 2, column q4" in str(err.value)


def test_parse_collects_every_problem(tmp_path):
    path = write(
        tmp_path,
        "P1,1,1,O,R_PLUS,O_PLUS,,,5,5,5,5,5,5,5,6",
        "P1,1,2,R,R_PLUS,,AL0,I_PLUS,5,5,5,5,5,5,5,6",
        "P1,2,2,R,R_MINUS,,AL1,I_MINUS,5,5,5,5,5,5,5,6",
        "P1,2,2,R,R_MINUS,,AL1,I_MINUS,5,5,5,5,5,5,5,6",
        "P2,x,1,Q,,,,,5,5,5,5,5,5,5",
    )
    with pytest.raises(ValidationError) as err:
        parse_event_log(path)
    msg = str(err.value)
    assert "line 2, column a_R" in msg
    assert "line 3, column alignment" in msg
    assert "line 5: duplicate" in msg and "first seen on line 4" in msg
    assert "line 6: expected 16 columns" in msg


def test_parse_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("participant,ride\n")
    with pytest.raises(ValidationError):
        parse_event_log(path)


def test_parse_groups_and_orders(tmp_path):
    ds = parse_event_log(write(
        tmp_path,
        "B,2,1,O,,O_MINUS,,,4,4,4,4,4,4,4,4",
        "A,1,2,R,R_MINUS,,AL1,I_MINUS,4,4,4,4,4,4,4,4",
        "B,1,1,O,,O_MINUS,,,4,4,4,4,4,4,4,4",
        "A,1,1,O,,O_PLUS,,,4,4,4,4,4,4,4,4",
    ))
    assert [s[0].participant_id for s in ds.sequences] == ["B", "A"]
    assert [(r.ride, r.event) for r in ds.sequences[0]] == [(1, 1), (2, 1)]
    chained = ds.event_sequences()[1]
    assert chained[1].prev_a_O == 1


def test_csv_and_json_round_trip(tmp_path):
    ds = generate_synthetic(reference_model(), 5, 6, seed=11)
    write_event_log(ds, tmp_path / "d.csv", "run: {}")
    assert parse_event_log(tmp_path / "d.csv") == ds
    save_dataset_json(ds, tmp_path / "d.json")
    assert load_dataset_json(tmp_path / "d.json") == ds


def test_synthetic_reproducible():
    a = generate_synthetic(reference_model(), 8, 6, seed=42)
    b = generate_synthetic(reference_model(), 8, 6, seed=42)
    c = generate_synthetic(reference_model(), 8, 6, seed=43)
    assert a == b and a != c


def test_synthetic_layout():
    ds = generate_synthetic(reference_model(), 3, 5, seed=0)
    seq = ds.sequences[0]
    assert [r.contributor for r in seq] == ["O", "R", "O", "R", "O"]
    assert [(r.ride, r.event) for r in seq] == [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1)]
    assert len({r.a_O for r in seq if r.contributor == "O"}) == 1
    for r in seq:
        if r.contributor == "R":
            assert r.alignment == int(r.intention == r.a_R)


def test_point_mass_model_gives_identical_records():
    ds = generate_synthetic(point_mass_model(), 4, 4, seed=1)
    strip = [[(r.contributor, r.a_R, r.a_O, r.alignment, r.intention, r.responses) for r in s] for s in ds.sequences]
    assert all(s == strip[0] for s in strip)
    assert len({r.responses for r in ds.records()}) == 1


def test_synthetic_validation():
    with pytest.raises(ValidationError):
        generate_synthetic(reference_model(), 0, 4, seed=0)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_serialize_parse_identity(seed):
    ds = generate_synthetic(reference_model(3), 3, 3, seed=seed)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "d.csv"
        write_event_log(ds, path)
        assert parse_event_log(path, n_bins=3) == ds
    assert Dataset.from_dict(ds.to_dict()) == ds


def test_event_record_dataset_rules():
    with pytest.raises(ValidationError):
        Dataset(((),))
    rec = EventRecord("P", 1, 1, "O", None, 1, None, None, QuestionnaireResponse(*[4] * 8))
    assert np.isclose(score_wellbeing(rec.responses), 0.5)
