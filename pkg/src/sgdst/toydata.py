"""A small synthetic corpus in the SGD on-disk format.

The real dataset is large and lives behind a download; for unit tests, the
oracle-consistency gate and the overfit smoke test we generate a handful of
templated dialogues instead.  The flows are built so that every label source
occurs: user spans, categorical choices, dontcare, values picked up from the
last system utterance, from earlier offers of the same service, and from
another service entirely.  All spans carry exact character offsets, so label
derivation is fully resolvable by construction.

The test split adds a weather service that train/dev never see, giving the
seen/unseen evaluation breakdown something to measure.
"""

from __future__ import annotations

import json
import random
from pathlib import Path
from typing import Callable, Sequence

from sgdst.corpus import load_dialogues, load_schema

CITIES = ["san jose", "fresno", "oakland", "berkeley", "palo alto", "sunnyvale"]
EATERIES = ["Taco Palace", "Curry House", "Pasta Corner", "Golden Wok", "Blue Olive"]
CUISINES = ["mexican", "italian", "indian", "thai"]
PRICES = ["cheap", "moderate", "expensive"]
TIMES = ["noon", "six in the evening", "7 pm", "half past five", "eight thirty"]
TIME_ALIASES = {"noon": "12 pm", "six in the evening": "6 pm", "half past five": "5:30 pm"}
DATES = ["tomorrow", "next friday", "march 3rd", "this weekend", "monday"]
ADDRESSES = ["123 main street", "44 oak avenue", "9 pine road"]
AREAS = ["riverside", "downtown", "lakeview", "old town"]
PROPERTIES = ["Rose Garden Apartments", "Maple Court", "Sunset Villas"]
RENTS = ["1800 dollars", "2100 dollars", "1500 dollars"]
RIDE_TYPES = ["pool", "regular", "luxury"]
FARES = ["12 dollars", "18 dollars", "25 dollars"]
WAITS = ["5 minutes", "9 minutes", "14 minutes"]
TEMPS = ["75 degrees", "58 degrees", "90 degrees"]


def _slot(name, description, values=None):
    return {
        "name": name,
        "description": description,
        "is_categorical": values is not None,
        "possible_values": values or [],
    }


EATERY_SCHEMA = {
    "service_name": "Eatery_1",
    "description": "Find eateries and reserve tables",
    "slots": [
        _slot("city", "city to search in"),
        _slot("cuisine", "type of food", CUISINES),
        _slot("price_range", "price bracket of the eatery", PRICES),
        _slot("eatery_name", "name of the eatery"),
        _slot("time", "time of the reservation"),
        _slot("party_size", "number of seats", ["1", "2", "3", "4", "5", "6"]),
        _slot("date", "date of the reservation"),
        _slot("address", "street address of the eatery"),
        _slot("phone_number", "phone number of the eatery"),
    ],
    "intents": [
        {
            "name": "FindEatery",
            "required_slots": ["city"],
            "optional_slots": {"cuisine": "dontcare", "price_range": "dontcare"},
        },
        {
            "name": "BookTable",
            "required_slots": ["eatery_name", "time", "party_size"],
            "optional_slots": {"date": "dontcare"},
        },
    ],
}

HOMES_SCHEMA = {
    "service_name": "Homes_7",
    "description": "Search rental properties and schedule visits",
    "slots": [
        _slot("area", "neighbourhood to search in"),
        _slot("pets_allowed", "whether pets are allowed", ["True", "False"]),
        _slot("number_of_rooms", "number of rooms", ["1", "2", "3", "4"]),
        _slot("property_name", "name of the property"),
        _slot("visit_date", "date of the property visit"),
        _slot("rent", "monthly rent"),
    ],
    "intents": [
        {
            "name": "FindHome",
            "required_slots": ["area"],
            "optional_slots": {"pets_allowed": "dontcare", "number_of_rooms": "dontcare"},
        },
        {
            "name": "TourHome",
            "required_slots": ["property_name", "visit_date"],
            "optional_slots": {},
        },
    ],
}

RIDESHARE_SCHEMA = {
    "service_name": "RideShare_2",
    "description": "Book cabs to any destination",
    "slots": [
        _slot("destination", "where the ride goes"),
        _slot("number_of_riders", "number of riders", ["1", "2", "3", "4"]),
        _slot("ride_type", "class of the ride", RIDE_TYPES),
        _slot("fare", "total fare of the ride"),
        _slot("wait_time", "minutes until pickup"),
    ],
    "intents": [
        {
            "name": "GetRide",
            "required_slots": ["destination", "number_of_riders"],
            "optional_slots": {"ride_type": "pool"},
        },
    ],
}

WEATHER_SCHEMA = {
    "service_name": "Weather_5",
    "description": "Check the weather anywhere",
    "slots": [
        _slot("city", "city to check"),
        _slot("date", "date to check"),
        _slot("temperature", "forecast temperature"),
    ],
    "intents": [
        {"name": "CheckWeather", "required_slots": ["city"], "optional_slots": {"date": "dontcare"}},
    ],
}

TRAIN_SERVICES = [EATERY_SCHEMA, HOMES_SCHEMA, RIDESHARE_SCHEMA]
TEST_SERVICES = TRAIN_SERVICES + [WEATHER_SCHEMA]


# ---------------------------------------------------------------------------
# Dialogue assembly helpers
# ---------------------------------------------------------------------------

def _utt(*pieces):
    """Compose an utterance from plain chunks and (slot, chunk) spans,
    returning the text and exact character annotations."""
    text = ""
    spans = []
    for piece in pieces:
        slot, chunk = (None, piece) if isinstance(piece, str) else piece
        if text and not chunk.startswith((",", ".", "?", "!")):
            text += " "
        start = len(text)
        text += chunk
        if slot is not None:
            spans.append({"slot": slot, "start": start, "exclusive_end": start + len(chunk)})
    return text, spans


def _act(act, slot="", values=()):
    return {"act": act, "slot": slot, "values": list(values)}


def _state(intent, slot_values, requested=()):
    return {
        "active_intent": intent,
        "requested_slots": list(requested),
        "slot_values": {k: list(v) for k, v in slot_values.items()},
    }


def _user(utterance, *frames):
    return {"speaker": "USER", "utterance": utterance, "frames": list(frames)}


def _system(utterance, *frames):
    return {"speaker": "SYSTEM", "utterance": utterance, "frames": list(frames)}


def _frame(service, actions, state=None, spans=()):
    frame = {"service": service, "actions": list(actions), "slots": list(spans)}
    if state is not None:
        frame["state"] = state
    return frame


# ---------------------------------------------------------------------------
# Flows
# ---------------------------------------------------------------------------

def _flow_eatery_book(rng: random.Random, did: str) -> dict:
    """Find an eatery, accept the system's offer (carryover from the last
    system utterance), then book a table with user-stated span values."""
    city = rng.choice(CITIES)
    cuisine = rng.choice(CUISINES)
    price = rng.choice(PRICES) if rng.random() < 0.5 else None
    eatery = rng.choice(EATERIES)
    time = rng.choice(TIMES)
    size = rng.choice(["2", "3", "4", "5"])
    date = rng.choice(DATES)
    address = rng.choice(ADDRESSES)
    count = str(rng.randint(2, 9))
    time_values = [time]
    if time in TIME_ALIASES and rng.random() < 0.5:
        time_values.append(TIME_ALIASES[time])
    date_up_front = rng.random() < 0.5

    sv = {"city": [city], "cuisine": [cuisine]}
    u1_actions = [
        _act("INFORM_INTENT", "intent", ["FindEatery"]),
        _act("INFORM", "cuisine", [cuisine]),
        _act("INFORM", "city", [city]),
    ]
    if price:
        sv["price_range"] = [price]
        u1_actions.append(_act("INFORM", "price_range", [price]))
        text, spans = _utt(
            "i want to find a", price, cuisine, "restaurant in", ("city", city), "."
        )
    else:
        text, spans = _utt("i want to find a", cuisine, "restaurant in", ("city", city), ".")
    turns = [
        _user(text, _frame("Eatery_1", u1_actions, _state("FindEatery", sv), spans))
    ]

    text, spans = _utt("i found", count, "options. how about", ("eatery_name", eatery), "?")
    turns.append(
        _system(
            text,
            _frame(
                "Eatery_1",
                [_act("INFORM_COUNT", "count", [count]), _act("OFFER", "eatery_name", [eatery])],
                spans=spans,
            ),
        )
    )

    sv = {**sv, "eatery_name": [eatery]}
    turns.append(
        _user(
            "sounds perfect. what is their address?",
            _frame(
                "Eatery_1",
                [_act("SELECT"), _act("REQUEST", "address")],
                _state("FindEatery", sv, ["address"]),
            ),
        )
    )

    text, spans = _utt("they are located at", ("address", address), ".")
    turns.append(
        _system(text, _frame("Eatery_1", [_act("INFORM", "address", [address])], spans=spans))
    )

    sv = {**sv, "time": time_values, "party_size": [size]}
    u3_actions = [
        _act("INFORM_INTENT", "intent", ["BookTable"]),
        _act("INFORM", "time", [time]),
        _act("INFORM", "party_size", [size]),
    ]
    if date_up_front:
        sv["date"] = [date]
        u3_actions.append(_act("INFORM", "date", [date]))
        text, spans = _utt(
            "great, book me a table there at", ("time", time),
            "for", size, "people on", ("date", date), ".",
        )
    else:
        text, spans = _utt(
            "great, book me a table there at", ("time", time), "for", size, "people."
        )
    turns.append(_user(text, _frame("Eatery_1", u3_actions, _state("BookTable", sv), spans)))

    if not date_up_front:
        turns.append(
            _system(
                "what day would you like to go?",
                _frame("Eatery_1", [_act("REQUEST", "date")]),
            )
        )
        sv = {**sv, "date": [date]}
        text, spans = _utt("make it", ("date", date), ".")
        turns.append(
            _user(
                text,
                _frame(
                    "Eatery_1",
                    [_act("INFORM", "date", [date])],
                    _state("BookTable", sv),
                    spans,
                ),
            )
        )

    text, spans = _utt(
        "please confirm: a table for", size, "people at", ("eatery_name", eatery),
        "at", ("time", time), "on", ("date", date), ".",
    )
    turns.append(
        _system(
            text,
            _frame(
                "Eatery_1",
                [
                    _act("CONFIRM", "eatery_name", [eatery]),
                    _act("CONFIRM", "time", [time]),
                    _act("CONFIRM", "party_size", [size]),
                    _act("CONFIRM", "date", [date]),
                ],
                spans=spans,
            ),
        )
    )
    turns.append(
        _user(
            "yes that works for me.",
            _frame("Eatery_1", [_act("AFFIRM")], _state("BookTable", sv)),
        )
    )
    turns.append(
        _system("your table is booked. enjoy!", _frame("Eatery_1", [_act("NOTIFY_SUCCESS")]))
    )
    turns.append(
        _user(
            "thank you, that is all.",
            _frame("Eatery_1", [_act("THANK_YOU"), _act("GOODBYE")], _state("BookTable", sv)),
        )
    )
    return {"dialogue_id": did, "services": ["Eatery_1"], "turns": turns}


def _flow_homes(rng: random.Random, did: str) -> dict:
    """Rental search with a dontcare slot and a property name carried over
    from an offer two system turns back (same-service history)."""
    area = rng.choice(AREAS)
    prop = rng.choice(PROPERTIES)
    rent = rng.choice(RENTS)
    vdate = rng.choice(DATES)
    with_pets = rng.random() < 0.5

    sv = {"area": [area]}
    u1_actions = [_act("INFORM_INTENT", "intent", ["FindHome"]), _act("INFORM", "area", [area])]
    if with_pets:
        sv["pets_allowed"] = ["True"]
        u1_actions.append(_act("INFORM", "pets_allowed", ["True"]))
        text, spans = _utt(
            "i am looking for a place to rent in", ("area", area), "that allows pets."
        )
    else:
        text, spans = _utt("i am looking for a place to rent in", ("area", area), ".")
    turns = [_user(text, _frame("Homes_7", u1_actions, _state("FindHome", sv), spans))]

    text, spans = _utt("there is a lovely property called", ("property_name", prop), ".")
    turns.append(
        _system(text, _frame("Homes_7", [_act("OFFER", "property_name", [prop])], spans=spans))
    )

    sv = {**sv, "number_of_rooms": ["dontcare"]}
    turns.append(
        _user(
            "i do not care about the number of rooms. what is the rent?",
            _frame(
                "Homes_7",
                [_act("INFORM", "number_of_rooms", ["dontcare"]), _act("REQUEST", "rent")],
                _state("FindHome", sv, ["rent"]),
            ),
        )
    )

    text, spans = _utt("the rent is", ("rent", rent), "per month.")
    turns.append(_system(text, _frame("Homes_7", [_act("INFORM", "rent", [rent])], spans=spans)))

    # The property name is not restated and no longer in the last system
    # utterance, so it must come from this service's earlier offer.
    sv = {**sv, "property_name": [prop], "visit_date": [vdate]}
    text, spans = _utt("sounds fair. i would like to visit it", ("visit_date", vdate), ".")
    turns.append(
        _user(
            text,
            _frame(
                "Homes_7",
                [_act("INFORM_INTENT", "intent", ["TourHome"]), _act("INFORM", "visit_date", [vdate])],
                _state("TourHome", sv),
                spans,
            ),
        )
    )

    text, spans = _utt(
        "confirming your visit to", ("property_name", prop), "on", ("visit_date", vdate), "."
    )
    turns.append(
        _system(
            text,
            _frame(
                "Homes_7",
                [_act("CONFIRM", "property_name", [prop]), _act("CONFIRM", "visit_date", [vdate])],
                spans=spans,
            ),
        )
    )
    turns.append(
        _user("yes please.", _frame("Homes_7", [_act("AFFIRM")], _state("TourHome", sv)))
    )
    turns.append(
        _system("done. have a nice visit.", _frame("Homes_7", [_act("NOTIFY_SUCCESS")]))
    )
    turns.append(
        _user("goodbye!", _frame("Homes_7", [_act("GOODBYE")], _state("TourHome", sv)))
    )
    return {"dialogue_id": did, "services": ["Homes_7"], "turns": turns}


def _flow_cross_ride(rng: random.Random, did: str) -> dict:
    """Book a table, then a ride whose destination and rider count are never
    restated: both must be carried over from the eatery service."""
    city = rng.choice(CITIES)
    cuisine = rng.choice(CUISINES)
    eatery = rng.choice(EATERIES)
    eatery_said = eatery.lower()
    time = rng.choice(TIMES)
    size = rng.choice(["2", "3", "4"])
    fare = rng.choice(FARES)
    wait = rng.choice(WAITS)

    sv = {"city": [city], "cuisine": [cuisine]}
    text, spans = _utt("find me a", cuisine, "place in", ("city", city), ".")
    turns = [
        _user(
            text,
            _frame(
                "Eatery_1",
                [
                    _act("INFORM_INTENT", "intent", ["FindEatery"]),
                    _act("INFORM", "cuisine", [cuisine]),
                    _act("INFORM", "city", [city]),
                ],
                _state("FindEatery", sv),
                spans,
            ),
        )
    ]

    text, spans = _utt("how about", ("eatery_name", eatery), "?")
    turns.append(
        _system(text, _frame("Eatery_1", [_act("OFFER", "eatery_name", [eatery])], spans=spans))
    )

    sv = {**sv, "eatery_name": [eatery_said], "time": [time], "party_size": [size]}
    text, spans = _utt(
        "book a table at", ("eatery_name", eatery_said),
        "at", ("time", time), "for", size, "people.",
    )
    turns.append(
        _user(
            text,
            _frame(
                "Eatery_1",
                [
                    _act("INFORM_INTENT", "intent", ["BookTable"]),
                    _act("INFORM", "eatery_name", [eatery_said]),
                    _act("INFORM", "time", [time]),
                    _act("INFORM", "party_size", [size]),
                ],
                _state("BookTable", sv),
                spans,
            ),
        )
    )

    text, spans = _utt(
        "please confirm: a table at", ("eatery_name", eatery),
        "at", ("time", time), "for", size, "people.",
    )
    turns.append(
        _system(
            text,
            _frame(
                "Eatery_1",
                [
                    _act("CONFIRM", "eatery_name", [eatery]),
                    _act("CONFIRM", "time", [time]),
                    _act("CONFIRM", "party_size", [size]),
                ],
                spans=spans,
            ),
        )
    )
    turns.append(
        _user("yes, perfect.", _frame("Eatery_1", [_act("AFFIRM")], _state("BookTable", sv)))
    )
    turns.append(
        _system("all set. enjoy your meal!", _frame("Eatery_1", [_act("NOTIFY_SUCCESS")]))
    )

    ride_sv = {"destination": [eatery_said], "number_of_riders": [size]}
    turns.append(
        _user(
            "i will need a ride there for the same group.",
            _frame("Eatery_1", [], _state("BookTable", sv)),
            _frame(
                "RideShare_2",
                [_act("INFORM_INTENT", "intent", ["GetRide"])],
                _state("GetRide", ride_sv),
            ),
        )
    )

    text, spans = _utt("your driver is on the way. the fare is", ("fare", fare), ".")
    turns.append(
        _system(
            text,
            _frame(
                "RideShare_2",
                [_act("NOTIFY_SUCCESS"), _act("INFORM", "fare", [fare])],
                spans=spans,
            ),
        )
    )
    turns.append(
        _user(
            "how long is the wait?",
            _frame(
                "RideShare_2",
                [_act("REQUEST", "wait_time")],
                _state("GetRide", ride_sv, ["wait_time"]),
            ),
        )
    )
    text, spans = _utt("about", ("wait_time", wait), ".")
    turns.append(
        _system(text, _frame("RideShare_2", [_act("INFORM", "wait_time", [wait])], spans=spans))
    )
    turns.append(
        _user(
            "thank you, goodbye.",
            _frame("RideShare_2", [_act("THANK_YOU"), _act("GOODBYE")], _state("GetRide", ride_sv)),
        )
    )
    return {"dialogue_id": did, "services": ["Eatery_1", "RideShare_2"], "turns": turns}


def _flow_ride(rng: random.Random, did: str) -> dict:
    """Single-turn ride booking; everything stated up front."""
    dest = rng.choice(CITIES)
    n = rng.choice(["1", "2", "3"])
    rtype = rng.choice(RIDE_TYPES)
    fare = rng.choice(FARES)
    wait = rng.choice(WAITS)

    sv = {"destination": [dest], "number_of_riders": [n], "ride_type": [rtype]}
    text, spans = _utt("get me a", rtype, "ride to", ("destination", dest), "for", n, "riders.")
    turns = [
        _user(
            text,
            _frame(
                "RideShare_2",
                [
                    _act("INFORM_INTENT", "intent", ["GetRide"]),
                    _act("INFORM", "ride_type", [rtype]),
                    _act("INFORM", "destination", [dest]),
                    _act("INFORM", "number_of_riders", [n]),
                ],
                _state("GetRide", sv),
                spans,
            ),
        )
    ]
    text, spans = _utt("booked! the fare is", ("fare", fare), ".")
    turns.append(
        _system(
            text,
            _frame(
                "RideShare_2",
                [_act("NOTIFY_SUCCESS"), _act("INFORM", "fare", [fare])],
                spans=spans,
            ),
        )
    )
    if rng.random() < 0.5:
        turns.append(
            _user(
                "how long until it arrives?",
                _frame(
                    "RideShare_2",
                    [_act("REQUEST", "wait_time")],
                    _state("GetRide", sv, ["wait_time"]),
                ),
            )
        )
        text, spans = _utt("around", ("wait_time", wait), ".")
        turns.append(
            _system(text, _frame("RideShare_2", [_act("INFORM", "wait_time", [wait])], spans=spans))
        )
        turns.append(
            _user("thanks!", _frame("RideShare_2", [_act("THANK_YOU")], _state("GetRide", sv)))
        )
    else:
        turns.append(
            _user("thanks!", _frame("RideShare_2", [_act("THANK_YOU")], _state("GetRide", sv)))
        )
    return {"dialogue_id": did, "services": ["RideShare_2"], "turns": turns}


def _flow_weather_cross(rng: random.Random, did: str) -> dict:
    """Test-only: a weather check whose city comes from the eatery search,
    exercising cross-service carryover into an unseen service."""
    city = rng.choice(CITIES)
    eatery = rng.choice(EATERIES)
    wdate = rng.choice(DATES)
    temp = rng.choice(TEMPS)

    sv = {"city": [city]}
    text, spans = _utt("are there any good restaurants in", ("city", city), "?")
    turns = [
        _user(
            text,
            _frame(
                "Eatery_1",
                [_act("INFORM_INTENT", "intent", ["FindEatery"]), _act("INFORM", "city", [city])],
                _state("FindEatery", sv),
                spans,
            ),
        )
    ]
    text, spans = _utt("you could try", ("eatery_name", eatery), ".")
    turns.append(
        _system(text, _frame("Eatery_1", [_act("OFFER", "eatery_name", [eatery])], spans=spans))
    )

    weather_sv = {"city": [city], "date": [wdate]}
    text, spans = _utt("before i decide, what will the weather there be", ("date", wdate), "?")
    turns.append(
        _user(
            text,
            _frame("Eatery_1", [], _state("FindEatery", sv)),
            _frame(
                "Weather_5",
                [_act("INFORM_INTENT", "intent", ["CheckWeather"]), _act("INFORM", "date", [wdate])],
                _state("CheckWeather", weather_sv),
                spans,
            ),
        )
    )
    text, spans = _utt("expect", ("temperature", temp), ".")
    turns.append(
        _system(text, _frame("Weather_5", [_act("INFORM", "temperature", [temp])], spans=spans))
    )
    turns.append(
        _user(
            "sounds good, thanks!",
            _frame("Eatery_1", [_act("THANK_YOU")], _state("FindEatery", sv)),
            _frame("Weather_5", [], _state("CheckWeather", weather_sv)),
        )
    )
    return {"dialogue_id": did, "services": ["Eatery_1", "Weather_5"], "turns": turns}


def _flow_weather_only(rng: random.Random, did: str) -> dict:
    city = rng.choice(CITIES)
    wdate = rng.choice(DATES)
    temp = rng.choice(TEMPS)

    sv = {"city": [city], "date": [wdate]}
    text, spans = _utt("what is the weather in", ("city", city), ("date", wdate), "?")
    turns = [
        _user(
            text,
            _frame(
                "Weather_5",
                [
                    _act("INFORM_INTENT", "intent", ["CheckWeather"]),
                    _act("INFORM", "city", [city]),
                    _act("INFORM", "date", [wdate]),
                ],
                _state("CheckWeather", sv),
                spans,
            ),
        )
    ]
    text, spans = _utt("it will be", ("temperature", temp), ".")
    turns.append(
        _system(text, _frame("Weather_5", [_act("INFORM", "temperature", [temp])], spans=spans))
    )
    turns.append(
        _user("thanks a lot!", _frame("Weather_5", [_act("THANK_YOU")], _state("CheckWeather", sv)))
    )
    return {"dialogue_id": did, "services": ["Weather_5"], "turns": turns}


TRAIN_FLOWS: Sequence[Callable] = (_flow_eatery_book, _flow_homes, _flow_cross_ride, _flow_ride)
TEST_FLOWS: Sequence[Callable] = TRAIN_FLOWS + (_flow_weather_cross, _flow_weather_only)


# ---------------------------------------------------------------------------
# Generation entry points
# ---------------------------------------------------------------------------

def _build_split(rng: random.Random, flows: Sequence[Callable], count: int) -> list[dict]:
    return [flows[i % len(flows)](rng, f"{i + 1:05d}") for i in range(count)]


def generate_toy_corpus(
    root: str | Path,
    seed: int = 0,
    n_train: int = 24,
    n_dev: int = 8,
    n_test: int = 12,
) -> dict[str, Path]:
    """Write train/dev/test splits under root and validate them by loading
    them back.  Returns the split directories."""
    root = Path(root)
    plans = [
        ("train", TRAIN_SERVICES, TRAIN_FLOWS, n_train),
        ("dev", TRAIN_SERVICES, TRAIN_FLOWS, n_dev),
        ("test", TEST_SERVICES, TEST_FLOWS, n_test),
    ]
    out = {}
    for offset, (split, services, flows, count) in enumerate(plans):
        split_dir = root / split
        split_dir.mkdir(parents=True, exist_ok=True)
        rng = random.Random(seed * 7919 + offset)
        (split_dir / "schema.json").write_text(
            json.dumps(services, indent=1), encoding="utf-8"
        )
        (split_dir / "dialogues_001.json").write_text(
            json.dumps(_build_split(rng, flows, count), indent=1), encoding="utf-8"
        )
        schema = load_schema(split_dir / "schema.json")
        load_dialogues(split_dir, schema)  # generator must emit valid SGD data
        out[split] = split_dir
    return out


def ensure_toy_corpus(root: str | Path, seed: int = 0, **sizes) -> dict[str, Path]:
    root = Path(root)
    if all((root / split / "schema.json").exists() for split in ("train", "dev", "test")):
        return {split: root / split for split in ("train", "dev", "test")}
    return generate_toy_corpus(root, seed=seed, **sizes)
