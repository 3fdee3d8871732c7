"""Corpus loading, schema validation and name normalization."""

import json

import pytest

from sgdst.corpus import (
    DONTCARE,
    NONE_INTENT,
    DialogueValidationError,
    SchemaValidationError,
    informable_slots,
    load_dialogues,
    load_schema,
    normalize_name,
)


def test_schema_loads_services_and_injects_none_intent(train_schema):
    names = sorted(s.name for s in train_schema)
    assert names == ["Eatery_1", "Homes_7", "RideShare_2"]
    eatery = train_schema.service("Eatery_1")
    assert eatery.intents[0].name == NONE_INTENT
    declared = [i.name for i in eatery.intents[1:]]
    assert declared == ["FindEatery", "BookTable"]


def test_informable_slots_are_required_or_optional_in_some_intent(train_schema):
    eatery = train_schema.service("Eatery_1")
    inf = informable_slots(eatery)
    # address and phone_number appear in no intent's slot lists
    assert "address" not in inf and "phone_number" not in inf
    assert "city" in inf and "time" in inf and "party_size" in inf
    # schema slot order is preserved
    schema_order = [s.name for s in eatery.slots if s.name in set(inf)]
    assert inf == schema_order


def test_categorical_flag_matches_value_inventory(train_schema):
    eatery = train_schema.service("Eatery_1")
    assert eatery.slot("cuisine").is_categorical
    assert eatery.slot("cuisine").possible_values
    assert not eatery.slot("city").is_categorical
    assert eatery.slot("city").possible_values == ()


@pytest.mark.parametrize(
    "raw,expected",
    [
        ("party_size", "party size"),
        ("FindRestaurants", "find restaurants"),
        ("number_of_rooms", "number of rooms"),
        ("GetRide", "get ride"),
        ("NONE", "none"),
        ("party size", "party size"),  # idempotent
    ],
)
def test_normalize_name(raw, expected):
    assert normalize_name(raw) == expected


def test_state_value_variants_keep_canonical_first(train_dialogues):
    found = None
    for dialogue in train_dialogues:
        for turn in dialogue.turns:
            for frame in turn.frames:
                for slot, variants in frame.value_variants.items():
                    if len(variants) > 1:
                        found = (frame, slot, variants)
                        break
    assert found is not None, "the toy corpus must exercise multi-variant values"
    frame, slot, variants = found
    assert frame.state.slot_values[slot] == variants[0]


def test_speaker_alternation_and_user_frames_have_state(train_dialogues):
    for dialogue in train_dialogues:
        speakers = [t.speaker for t in dialogue.turns]
        assert speakers[0] == "USER"
        for a, b in zip(speakers, speakers[1:]):
            assert a != b
        for turn in dialogue.turns:
            if turn.speaker == "USER":
                assert all(f.state is not None for f in turn.frames)


def test_load_dialogues_empty_directory_gives_empty_list(tmp_path, train_schema):
    assert load_dialogues(tmp_path, train_schema) == []


def _minimal_schema(tmp_path, services):
    path = tmp_path / "schema.json"
    path.write_text(json.dumps(services), encoding="utf-8")
    return path


def test_schema_rejects_categorical_without_values(tmp_path):
    services = [
        {
            "service_name": "S_1",
            "description": "",
            "slots": [
                {"name": "a", "description": "", "is_categorical": True, "possible_values": []}
            ],
            "intents": [
                {
                    "name": "Find",
                    "required_slots": ["a"],
                    "optional_slots": {},
                }
            ],
        }
    ]
    with pytest.raises(SchemaValidationError):
        load_schema(_minimal_schema(tmp_path, services))


def test_schema_rejects_reserved_intent_name(tmp_path):
    services = [
        {
            "service_name": "S_1",
            "description": "",
            "slots": [
                {"name": "a", "description": "", "is_categorical": False, "possible_values": []}
            ],
            "intents": [
                {"name": NONE_INTENT, "required_slots": ["a"], "optional_slots": {}}
            ],
        }
    ]
    with pytest.raises(SchemaValidationError):
        load_schema(_minimal_schema(tmp_path, services))


def test_dialogue_rejects_frame_for_undeclared_service(tmp_path, train_schema):
    dialogue = {
        "dialogue_id": "X",
        "services": ["Eatery_1"],
        "turns": [
            {
                "speaker": "USER",
                "utterance": "hi",
                "frames": [
                    {
                        "service": "Homes_1",
                        "actions": [],
                        "state": {
                            "active_intent": NONE_INTENT,
                            "requested_slots": [],
                            "slot_values": {},
                        },
                        "slots": [],
                    }
                ],
            }
        ],
    }
    path = tmp_path / "dialogues_001.json"
    path.write_text(json.dumps([dialogue]), encoding="utf-8")
    with pytest.raises(DialogueValidationError):
        load_dialogues(tmp_path, train_schema)


def test_dontcare_constant_matches_corpus_convention():
    assert DONTCARE == "dontcare"
