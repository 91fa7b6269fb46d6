import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medlang.corpus import (
    AnalysisUnit,
    Utterance,
    extract_units,
    parse_case_metadata,
    parse_transcript,
    units_from_json,
    unit_to_json,
    utterance_to_json,
    write_transcript,
)
from medlang.errors import DataError, ParseError


def line(case_id, index, speaker, role, text):
    return json.dumps(
        {
            "case_id": case_id,
            "index": index,
            "speaker_id": speaker,
            "speaker_role": role,
            "text": text,
        }
    )


def test_parse_single_justice_turn():
    src = line("2008-07-636", 0, "Antonin Scalia", "justice",
               "Well, if it's an alienation, but his point is that a waiver is not an alienation.")
    (utt,) = parse_transcript(src)
    assert utt.speaker_role == "justice"
    assert utt.case_id == "2008-07-636"
    assert utt.index == 0
    assert utt.text.startswith("Well, if it's an alienation")


def test_parse_empty_stream():
    assert parse_transcript("") == []
    assert parse_transcript(io.BytesIO(b"")) == []


def test_parse_interleaved_cases_matches_reference_reader():
    rows = [
        ("a", 0, "adv one", "advocate", "First point."),
        ("b", 0, "adv two", "advocate", "Other case opening."),
        ("a", 1, "justice j", "justice", "A question?"),
        ("b", 1, "justice j", "justice", "Another question?"),
        ("a", 2, "adv one", "advocate", "An answer."),
    ]
    text = "\n".join(line(*row) for row in rows)

    # Reference reader: plain line-by-line json decoding, no validation.
    reference = [json.loads(l) for l in text.splitlines()]
    parsed = parse_transcript(text)
    assert len(parsed) == len(reference)
    for utt, ref in zip(parsed, reference):
        assert utt.case_id == ref["case_id"]
        assert utt.index == ref["index"]
        assert utt.speaker_id == ref["speaker_id"]
        assert utt.speaker_role == ref["speaker_role"]
        assert utt.text == ref["text"]
    # per-case indices remain contiguous from 0
    for case in ("a", "b"):
        indices = [u.index for u in parsed if u.case_id == case]
        assert indices == list(range(len(indices)))


def test_parse_duplicate_index_errors():
    text = "\n".join([
        line("a", 0, "s", "advocate", "x"),
        line("a", 1, "s", "justice", "y"),
        line("a", 1, "s", "justice", "z"),
    ])
    with pytest.raises(ParseError, match="duplicate"):
        parse_transcript(text)


def test_parse_noncontiguous_index_errors():
    text = "\n".join([line("a", 0, "s", "advocate", "x"), line("a", 2, "s", "justice", "y")])
    with pytest.raises(ParseError, match="non-contiguous"):
        parse_transcript(text)


def test_parse_unknown_role_names_value():
    with pytest.raises(ParseError, match="'clerk'"):
        parse_transcript(line("a", 0, "s", "clerk", "x"))


def test_parse_malformed_line_carries_line_number():
    text = line("a", 0, "s", "advocate", "x") + "\n{not json"
    with pytest.raises(ParseError, match="line 2"):
        parse_transcript(text)


def test_parse_field_discipline():
    missing = json.dumps({"case_id": "a", "index": 0, "speaker_id": "s", "text": "x"})
    with pytest.raises(ParseError, match="missing"):
        parse_transcript(missing)
    extra = json.dumps(
        {"case_id": "a", "index": 0, "speaker_id": "s", "speaker_role": "justice",
         "text": "x", "mood": "stern"}
    )
    with pytest.raises(ParseError, match="unexpected"):
        parse_transcript(extra)


def test_parse_blank_text_errors():
    with pytest.raises(ParseError, match="empty"):
        parse_transcript(line("a", 0, "s", "advocate", "   "))


def test_round_trip_is_field_exact(paired_utterances):
    buf = io.StringIO()
    write_transcript(paired_utterances, buf)
    again = parse_transcript(buf.getvalue())
    assert again == paired_utterances
    # and a second serialization is byte-identical
    assert [utterance_to_json(u) for u in again] == [
        utterance_to_json(u) for u in paired_utterances
    ]


def test_extract_minimal_pair():
    utts = parse_transcript("\n".join([
        line("a", 0, "adv", "advocate", "Opening argument."),
        line("a", 1, "justice j", "justice", "A question?"),
    ]))
    units = extract_units(utts)
    assert len(units) == 1
    assert units[0].p2_utterance is not None
    assert units[0].p2_utterance.speaker_role == "justice"


def test_extract_four_turn_fixture_by_hand_enumeration():
    # [justice, advocate, advocate, justice]: the first advocate turn is
    # followed by another advocate turn, so its responder slot is empty.
    utts = parse_transcript("\n".join([
        line("a", 0, "justice j", "justice", "Preliminary question?"),
        line("a", 1, "adv", "advocate", "First answer."),
        line("a", 2, "adv", "advocate", "Continued answer."),
        line("a", 3, "justice j", "justice", "Follow-up?"),
    ]))
    units = extract_units(utts)
    assert len(units) == 2
    assert units[0].p2_utterance is None
    assert units[1].p2_utterance is not None
    assert units[1].p2_utterance.index == 3


def test_extract_pairs_adams_with_followup(paired_units):
    adams = [u for u in paired_units if u.p1_utterance.speaker_id == "Ann O'Connell Adams"]
    assert len(adams) == 1
    assert adams[0].p2_utterance is not None
    assert adams[0].p2_utterance.text.startswith("Have they exercised it?")


def test_extract_unit_order_and_count(paired_units, paired_utterances):
    advocates = [u for u in paired_utterances if u.speaker_role == "advocate"]
    assert len(paired_units) == len(advocates)
    assert [u.p1_utterance for u in paired_units] == advocates


def test_context_features(paired_units, paired_meta):
    by_case = {u.p1_utterance.case_id: u for u in paired_units}
    assert by_case["2008-07-636"].context_features["issue_area"] == "economic_activity"
    assert by_case["2013-12-820"].context_features["issue_area"] == "civil_rights"
    for unit in paired_units:
        assert unit.context_features["prior_interruption_bucket"] == "0"
        assert unit.context_features["responder_role"] == "justice"


def test_prior_interruption_bucket_counts_earlier_marked_turns():
    utts = parse_transcript("\n".join([
        line("a", 0, "adv", "advocate", "I was saying - -"),
        line("a", 1, "justice j", "justice", "Stop."),
        line("a", 2, "adv", "advocate", "As I said - -"),
        line("a", 3, "justice j", "justice", "Again."),
        line("a", 4, "adv", "advocate", "Third attempt."),
        line("a", 5, "justice j", "justice", "Go on."),
    ]))
    units = extract_units(utts)
    buckets = [u.context_features["prior_interruption_bucket"] for u in units]
    assert buckets == ["0", "1", "2+"]


def test_chief_justice_counts_as_responder():
    utts = parse_transcript("\n".join([
        line("a", 0, "adv", "advocate", "Argument."),
        line("a", 1, "chief c", "chief_justice", "Noted."),
    ]))
    (unit,) = extract_units(utts)
    assert unit.p2_utterance is not None
    assert unit.context_features["responder_role"] == "chief_justice"


def test_other_unit_levels_recognized_but_unimplemented(paired_utterances):
    with pytest.raises(DataError, match="not implemented"):
        extract_units(paired_utterances, unit_level="thread")
    with pytest.raises(DataError, match="unknown unit level"):
        extract_units(paired_utterances, unit_level="paragraph")


def test_unit_json_round_trip(paired_units):
    text = "".join(unit_to_json(u) + "\n" for u in paired_units)
    again = units_from_json(text)
    assert [u.unit_id for u in again] == [u.unit_id for u in paired_units]
    assert again[0].p1_utterance == paired_units[0].p1_utterance


def test_metadata_duplicate_case_errors():
    text = '{"case_id": "a", "issue_area": "x"}\n{"case_id": "a", "issue_area": "y"}'
    with pytest.raises(ParseError, match="duplicate"):
        parse_case_metadata(text)


@settings(max_examples=60, deadline=None)
@given(
    roles=st.lists(
        st.sampled_from(["advocate", "justice", "chief_justice"]), min_size=0, max_size=12
    )
)
def test_unit_count_equals_advocate_count(roles):
    utts = [
        Utterance(case_id="c", index=i, speaker_id=f"s{i}", speaker_role=role, text=f"turn {i}.")
        for i, role in enumerate(roles)
    ]
    units = extract_units(utts)
    assert len(units) == sum(1 for r in roles if r == "advocate")
    assert [u.p1_utterance.index for u in units] == [
        u.index for u in utts if u.speaker_role == "advocate"
    ]
    assert len({u.unit_id for u in units}) == len(units)
