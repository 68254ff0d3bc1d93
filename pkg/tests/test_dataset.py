import io
import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kbcompleteness.dataset import (
    DatasetError,
    EditRecord,
    GenderLabel,
    load_edits,
    load_name_dictionary,
    load_registry,
    merge_edits,
    parse_edit_record,
    parse_timestamp,
    serialize_edit_record,
    validate_dataset,
    write_registry,
)

LINE = '{"entity":"Samantha_Cristoforetti","ts":"2021-03-05T12:00:00Z","rev":1001,"classes":["Astronaut"]}'


def test_parse_edit_record_fields():
    rec = parse_edit_record(LINE)
    assert rec.entity_id == "Samantha_Cristoforetti"
    assert rec.timestamp == parse_timestamp("2021-03-05T12:00:00Z")
    assert rec.revision_id == 1001
    assert rec.class_ids == ("Astronaut",)
    assert serialize_edit_record(rec) == LINE


@pytest.mark.parametrize(
    "line, field",
    [
        ('{"entity":"","ts":"2021-03-05T12:00:00Z","rev":1,"classes":["Astronaut"]}', "entity"),
        ('{"ts":"2021-03-05T12:00:00Z","rev":1,"classes":["Astronaut"]}', "entity"),
        ('{"entity":"X","ts":"2021-03-05T12:00:00+02:00","rev":1,"classes":["Astronaut"]}', "ts"),
        ('{"entity":"X","ts":"2021-03-05T12:00:00","rev":1,"classes":["Astronaut"]}', "ts"),
        ('{"entity":"X","ts":"2021-03-05","rev":1,"classes":["Astronaut"]}', "ts"),
        ('{"entity":"X","ts":"2021-03-05T12:00:00Z","rev":-1,"classes":["Astronaut"]}', "rev"),
        ('{"entity":"X","ts":"2021-03-05T12:00:00Z","rev":"7","classes":["Astronaut"]}', "rev"),
        ('{"entity":"X","ts":"2021-03-05T12:00:00Z","rev":1,"classes":[]}', "classes"),
        ('{"entity":"X","ts":"2021-03-05T12:00:00Z","rev":1}', "classes"),
        ('{"entity":"a\\nb","ts":"2021-03-05T12:00:00Z","rev":1,"classes":["A"]}', "entity"),
    ],
)
def test_parse_edit_record_errors_name_field(line, field):
    with pytest.raises(DatasetError) as err:
        parse_edit_record(line, lineno=7)
    assert err.value.field == field
    assert err.value.lineno == 7
    assert "line 7" in str(err.value)


def test_empty_entity_message():
    with pytest.raises(DatasetError, match="empty entity_id"):
        parse_edit_record('{"entity":"","ts":"2021-03-05T12:00:00Z","rev":1,"classes":["Astronaut"]}')


def test_malformed_json_has_line_number():
    with pytest.raises(DatasetError, match="line 2"):
        load_edits(io.BytesIO((LINE + "\n{not json\n").encode()))


def test_fixture_round_trip_byte_exact(fixture_paths):
    raw = fixture_paths["edits"].read_bytes().decode("utf-8")
    lines = raw.splitlines()
    assert len(lines) > 100
    for line in lines:
        assert serialize_edit_record(parse_edit_record(line)) == line


entity_ids = st.text(st.characters(blacklist_categories=("Cs",), blacklist_characters="\n\r"), min_size=1, max_size=30)
classes = st.lists(st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=10), min_size=1, max_size=3)


@given(
    entity=entity_ids,
    ts=st.datetimes(min_value=__import__("datetime").datetime(1970, 1, 1), max_value=__import__("datetime").datetime(2100, 1, 1)),
    rev=st.integers(min_value=0, max_value=2**53),
    cls=classes,
)
def test_parse_serialize_identity(entity, ts, rev, cls):
    from datetime import timezone

    rec = EditRecord(entity, ts.replace(microsecond=0, tzinfo=timezone.utc), rev, tuple(cls))
    line = serialize_edit_record(rec)
    assert "\n" not in line
    assert parse_edit_record(line) == rec
    assert serialize_edit_record(parse_edit_record(line)) == line


def test_duplicate_revisions_deduplicated_with_counter():
    other = LINE.replace("1001", "1002")
    log = load_edits(io.BytesIO(f"{LINE}\n{other}\n{LINE}\n".encode()))
    assert len(log) == 2
    assert log.duplicates == 1


def test_line_independence(fixture_paths):
    lines = fixture_paths["edits"].read_text(encoding="utf-8").splitlines()
    shuffled = lines[:]
    random.Random(3).shuffle(shuffled)
    a = load_edits(lines).records
    b = load_edits(shuffled).records
    assert sorted(a, key=lambda r: (r.entity_id, r.revision_id)) == sorted(b, key=lambda r: (r.entity_id, r.revision_id))

    reg_lines = fixture_paths["registry"].read_text(encoding="utf-8").splitlines()
    random.Random(4).shuffle(reg_lines)
    with open(fixture_paths["registry"], "rb") as fh:
        assert load_registry(reg_lines) == load_registry(fh)


def _reg_line(entity, classes=("Astronaut",), gender="female"):
    return json.dumps({"entity": entity, "label": entity.replace("_", " "), "classes": list(classes), "gender": gender})


def test_registry_two_distinct():
    reg = load_registry(io.StringIO(_reg_line("A") + "\n" + _reg_line("B") + "\n"))
    assert len(reg) == 2
    assert reg["A"].gender is GenderLabel.FEMALE


def test_registry_duplicate_names_id_and_both_lines():
    src = io.StringIO(_reg_line("A") + "\n" + _reg_line("B") + "\n" + _reg_line("A", gender="male") + "\n")
    with pytest.raises(DatasetError) as err:
        load_registry(src)
    msg = str(err.value)
    assert "'A'" in msg and "lines 1 and 3" in msg
    assert err.value.lineno == 3


def test_registry_rejects_unknown_gender():
    with pytest.raises(DatasetError, match="gender"):
        load_registry([_reg_line("A", gender="other")])


def test_fixture_registry_shape(fixture_registry):
    assert len(fixture_registry) == 50
    assert fixture_registry.class_ids() == ["Astronaut", "Engineer"]


def test_registry_write_round_trip(fixture_registry):
    buf = io.StringIO()
    write_registry(fixture_registry, buf)
    assert load_registry(io.StringIO(buf.getvalue())) == fixture_registry


def test_validate_dataset_flags_unknown_class(fixture_registry, fixture_edits):
    validate_dataset(fixture_registry, fixture_edits)
    stray = parse_edit_record(LINE.replace("Astronaut", "Monarch"))
    with pytest.raises(DatasetError, match="Monarch"):
        validate_dataset(fixture_registry, [*fixture_edits, stray])


def test_name_dictionary_entry():
    d = load_name_dictionary(io.BytesIO(b"name,p_female\nsamantha,0.98\n"))
    assert d["samantha"] == 0.98
    assert len(d) == 1


@pytest.mark.parametrize(
    "text, match",
    [
        ("name,p_female\nalex,1.5\n", "out of range"),
        ("name,p_female\nalex,-0.1\n", "out of range"),
        ("name,p_female\nalex,nan\n", "out of range"),
        ("name,p_female\nalex,abc\n", "not a number"),
        ("name,p_female\nalex,0.5\nalex,0.6\n", "duplicate name 'alex'"),
        ("alex,0.5\n", "missing header"),
        ("", "missing header"),
    ],
)
def test_name_dictionary_errors(text, match):
    with pytest.raises(DatasetError, match=match):
        load_name_dictionary(io.StringIO(text))


def test_name_dictionary_error_line_number():
    with pytest.raises(DatasetError) as err:
        load_name_dictionary(io.StringIO("name,p_female\nanna,0.9\n\nalex,1.5\n"))
    assert err.value.lineno == 4


def test_fixture_dictionary(fixture_names):
    assert len(fixture_names) == 20
    assert fixture_names.lookup("samantha") == 0.98
    assert fixture_names.lookup("zzyzx") is None


def test_merge_is_idempotent(fixture_edits):
    once = merge_edits([], fixture_edits)
    assert merge_edits(once, fixture_edits) == once
    assert merge_edits(once, once[:10]) == once
