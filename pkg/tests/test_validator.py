from __future__ import annotations

import json

import pytest

from oracles import reference_edit_distance
from todbench.calls import canonicalize, parse_call
from todbench.errors import ContractViolation
from todbench.schema import build_registry, schema_from_document
from todbench.textnorm import levenshtein
from todbench.validator import (
    MISSING_REQUIRED_SLOT,
    UNKNOWN_METHOD,
    UNKNOWN_SLOT,
    feedback_message,
    validate,
)

WEATHER = {
    "service_name": "Weather",
    "intents": [{"name": "GetWeather", "is_transactional": False,
                 "required_slots": ["city"], "optional_slots": ["date"]}],
    "slots": [{"name": "city", "possible_values": []},
              {"name": "date", "possible_values": []}],
}

CARS = {
    "service_name": "RentalCars",
    "intents": [{"name": "ReserveCar", "is_transactional": True,
                 "required_slots": ["pickup_location", "start_date", "end_date",
                                    "pickup_time", "car_type"],
                 "optional_slots": ["add_insurance"]}],
    "slots": [{"name": n, "possible_values": []}
              for n in ("pickup_location", "start_date", "end_date",
                        "pickup_time", "car_type", "add_insurance")],
}


@pytest.fixture()
def registry():
    return build_registry([schema_from_document(WEATHER),
                           schema_from_document(CARS)])


def _call(text):
    return canonicalize(parse_call(text))


def test_valid_call_passes(registry):
    verdict = validate(_call(
        "APICall(method='GetWeather', parameters={city: Vancouver, date: 2024-03-02})"),
        registry)
    assert verdict.ok and verdict.errors == ()


def test_unknown_method(registry):
    verdict = validate(_call(
        "APICall(method='BookSpaceship', parameters={city: Mars})"), registry)
    assert not verdict.ok
    assert [e.kind for e in verdict.errors] == [UNKNOWN_METHOD]
    assert verdict.errors[0].offending_names == ()


def test_unknown_method_short_circuits_slot_checks(registry):
    verdict = validate(_call(
        "APICall(method='BookSpaceship', parameters={citty: Mars})"), registry)
    assert [e.kind for e in verdict.errors] == [UNKNOWN_METHOD]


def test_unknown_slot_with_suggestion(registry):
    verdict = validate(_call(
        "APICall(method='GetWeather', parameters={citty: Vancouver})"), registry)
    kinds = [e.kind for e in verdict.errors]
    assert UNKNOWN_SLOT in kinds
    slot_error = next(e for e in verdict.errors if e.kind == UNKNOWN_SLOT)
    assert slot_error.offending_names == ("citty",)
    assert "city" in slot_error.suggestions


def test_missing_required_slot_single_deletions(registry):
    full = _call("APICall(method='ReserveCar', parameters={"
                 "pickup_location: Airport, start_date: 2019-03-02, "
                 "end_date: 2019-03-03, pickup_time: 15:00, "
                 "car_type: Hatchback, add_insurance: True})")
    assert validate(full, registry).ok
    for dropped in ("pickup_location", "start_date", "end_date",
                    "pickup_time", "car_type"):
        reduced = full.__class__(
            method=full.method,
            params=tuple(t for t in full.params if t.name != dropped))
        verdict = validate(reduced, registry)
        assert [e.kind for e in verdict.errors] == [MISSING_REQUIRED_SLOT]
        assert verdict.errors[0].offending_names == (dropped,)


def test_optional_slot_deletion_stays_valid(registry):
    full = _call("APICall(method='ReserveCar', parameters={"
                 "pickup_location: Airport, start_date: 2019-03-02, "
                 "end_date: 2019-03-03, pickup_time: 15:00, car_type: Hatchback})")
    assert validate(full, registry).ok


def test_all_violations_listed_in_check_order(registry):
    verdict = validate(_call(
        "APICall(method='GetWeather', parameters={citty: Vancouver, bogus: 1})"),
        registry)
    kinds = [e.kind for e in verdict.errors]
    assert kinds == [UNKNOWN_SLOT, UNKNOWN_SLOT, MISSING_REQUIRED_SLOT]
    assert verdict.errors[-1].offending_names == ("city",)


def test_feedback_message_contents(registry):
    verdict = validate(_call(
        "APICall(method='GetWeather', parameters={citty: Vancouver})"), registry)
    message = feedback_message(verdict, registry)
    assert 'unknown parameter "citty"' in message
    assert "city" in message
    assert 'required parameter "city" is missing' in message
    assert message.endswith("parameters={<name>: <value>, ...}).")


def test_feedback_message_golden(registry):
    verdict = validate(_call(
        "APICall(method='ReserveCar', parameters={pickup_location: Airport, "
        "start_date: 2019-03-02, end_date: 2019-03-03, car_type: Hatchback})"),
        registry)
    expected = (
        "Your API call is not valid for the provided schemas. Problems found:\n"
        '- required parameter "pickup_time" is missing for method "ReserveCar"\n'
        "Please re-emit the corrected call on a single line in the same format: "
        "APICall(method='<method>', parameters={<name>: <value>, ...})."
    )
    assert feedback_message(verdict, registry) == expected
    assert feedback_message(verdict, registry) == expected  # byte-stable


def test_feedback_on_ok_verdict_is_contract_violation(registry):
    verdict = validate(_call(
        "APICall(method='GetWeather', parameters={city: Vancouver})"), registry)
    with pytest.raises(ContractViolation):
        feedback_message(verdict, registry)


def test_adding_optional_schema_slot_is_monotonic(registry):
    call = _call("APICall(method='GetWeather', parameters={city: Vancouver})")
    assert validate(call, registry).ok
    wider = json.loads(json.dumps(WEATHER))
    wider["slots"].append({"name": "units", "possible_values": ["C", "F"]})
    wider["intents"][0]["optional_slots"].append("units")
    wider_registry = build_registry([schema_from_document(wider),
                                     schema_from_document(CARS)])
    assert validate(call, wider_registry).ok


def test_levenshtein_matches_reference_oracle():
    pairs = [("citty", "city"), ("", "abc"), ("kitten", "sitting"),
             ("pickup time", "pickup location"), ("same", "same"),
             ("get weather", "get wether")]
    for a, b in pairs:
        assert levenshtein(a, b) == reference_edit_distance(a, b)


def test_suggestions_match_exhaustive_scan(registry):
    verdict = validate(_call(
        "APICall(method='GetWether', parameters={city: Vancouver})"), registry)
    error = verdict.errors[0]
    assert error.kind == UNKNOWN_METHOD
    all_intents = ["GetWeather", "ReserveCar"]
    expected = sorted(
        (reference_edit_distance("getwether", name.lower()), name)
        for name in all_intents
        if 0 < reference_edit_distance("getwether", name.lower()) <= 3
    )
    assert list(error.suggestions) == [name for _, name in expected][:3]
