#!/usr/bin/env python3
"""Regenerate the committed fixture corpus under corpus/fixture.

Deterministic: rerunning produces byte-identical files. The corpus covers 6
domains, 20 dialogs (10 single-domain, 10 multi-domain with 3 calls each,
40 gold calls total), every call operator tag, and per-dialog replay search
results whose rows carry every requested slot value.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from todbench.schema import build_registry, schema_from_document  # noqa: E402
from todbench.transcript import DialogTranscript, Turn, dump_transcripts  # noqa: E402

OUT = ROOT / "corpus" / "fixture"

SCHEMAS = {
    "Weather": {
        "service_name": "Weather",
        "intents": [
            {"name": "GetWeather", "is_transactional": False,
             "required_slots": ["city"], "optional_slots": ["date"]},
        ],
        "slots": [
            {"name": "city", "possible_values": []},
            {"name": "date", "possible_values": []},
            {"name": "temperature", "possible_values": [],
             "description": "forecast temperature in Fahrenheit"},
            {"name": "humidity", "possible_values": []},
        ],
    },
    "Homes": {
        "service_name": "Homes",
        "intents": [
            {"name": "FindApartment", "is_transactional": False,
             "required_slots": ["area"], "optional_slots": ["number_of_beds"]},
            {"name": "ScheduleVisit", "is_transactional": True,
             "required_slots": ["property_name", "visit_date"],
             "optional_slots": []},
        ],
        "slots": [
            {"name": "area", "possible_values": []},
            {"name": "number_of_beds", "possible_values": ["1", "2", "3", "4"]},
            {"name": "property_name", "possible_values": []},
            {"name": "visit_date", "possible_values": []},
            {"name": "address", "possible_values": []},
            {"name": "phone_number", "possible_values": []},
        ],
    },
    "RentalCars": {
        "service_name": "RentalCars",
        "intents": [
            {"name": "GetCarsAvailable", "is_transactional": False,
             "required_slots": ["pickup_location", "start_date", "end_date"],
             "optional_slots": ["car_type"]},
            {"name": "ReserveCar", "is_transactional": True,
             "required_slots": ["pickup_location", "start_date", "end_date",
                                "pickup_time", "car_type"],
             "optional_slots": ["add_insurance"]},
        ],
        "slots": [
            {"name": "pickup_location", "possible_values": []},
            {"name": "start_date", "possible_values": []},
            {"name": "end_date", "possible_values": []},
            {"name": "pickup_time", "possible_values": [], "aliases": ["time"]},
            {"name": "car_type",
             "possible_values": ["Hatchback", "Sedan", "SUV", "Standard"]},
            {"name": "add_insurance", "possible_values": ["True", "False"],
             "aliases": ["insurance"]},
            {"name": "car_name", "possible_values": []},
            {"name": "price_per_day", "possible_values": []},
        ],
    },
    "Restaurants": {
        "service_name": "Restaurants",
        "intents": [
            {"name": "FindRestaurant", "is_transactional": False,
             "required_slots": ["location", "cuisine"],
             "optional_slots": ["rating", "price_level"]},
            {"name": "BookRestaurant", "is_transactional": True,
             "required_slots": ["restaurant_name", "booking_date",
                                "booking_time", "number_of_people"],
             "optional_slots": []},
        ],
        "slots": [
            {"name": "location", "possible_values": []},
            {"name": "cuisine", "possible_values": []},
            {"name": "rating", "possible_values": ["1", "2", "3", "4", "5"]},
            {"name": "price_level", "possible_values": ["1", "2", "3"]},
            {"name": "restaurant_name", "possible_values": []},
            {"name": "booking_date", "possible_values": []},
            {"name": "booking_time", "possible_values": [], "aliases": ["time"]},
            {"name": "number_of_people", "possible_values": [],
             "aliases": ["people", "party size"]},
            {"name": "phone_number", "possible_values": []},
        ],
    },
    "Hotels": {
        "service_name": "Hotels",
        "intents": [
            {"name": "SearchHotel", "is_transactional": False,
             "required_slots": ["location", "stars"],
             "optional_slots": ["price_per_night"]},
            {"name": "BookHotel", "is_transactional": True,
             "required_slots": ["hotel_name", "check_in_date",
                                "number_of_nights", "number_of_rooms"],
             "optional_slots": []},
        ],
        "slots": [
            {"name": "location", "possible_values": []},
            {"name": "stars", "possible_values": ["1", "2", "3", "4", "5"]},
            {"name": "price_per_night", "possible_values": []},
            {"name": "hotel_name", "possible_values": []},
            {"name": "check_in_date", "possible_values": []},
            {"name": "number_of_nights", "possible_values": []},
            {"name": "number_of_rooms", "possible_values": []},
        ],
    },
    "Flights": {
        "service_name": "Flights",
        "intents": [
            {"name": "SearchFlight", "is_transactional": False,
             "required_slots": ["origin", "destination", "departure_date"],
             "optional_slots": ["seating_class"]},
        ],
        "slots": [
            {"name": "origin", "possible_values": []},
            {"name": "destination", "possible_values": []},
            {"name": "departure_date", "possible_values": []},
            {"name": "seating_class",
             "possible_values": ["Economy", "Business", "First"]},
            {"name": "airline", "possible_values": []},
        ],
    },
}


def call(method: str, entries: str) -> str:
    return f"APICall(method='{method}', parameters={{{entries}}})"


# Per dialog: goal calls, request slots per goal, replay rows, request values.
# A "request" tuple is (goal_index, slot, value); the value always appears in
# that goal's replay row.

DIALOGS = {
    # ---- single domain -----------------------------------------------------
    "s01-weather": {
        "calls": [call("GetWeather", "city: Vancouver, date: 2024-03-02")],
        "requests": [(0, "temperature", "68")],
        "rows": {"GetWeather": [[{"city": "Vancouver", "date": "2024-03-02",
                                  "temperature": 68, "precipitation": 25,
                                  "humidity": 26, "wind": 6}]]},
    },
    "s02-weather": {
        "calls": [call("GetWeather", "city: Toronto, date: 2024-05-11")],
        "requests": [(0, "humidity", "52")],
        "rows": {"GetWeather": [[{"city": "Toronto", "date": "2024-05-11",
                                  "temperature": 61, "humidity": 52}]]},
    },
    "s03-homes-find": {
        "calls": [call("FindApartment", "area: Hayward, number_of_beds: 3")],
        "requests": [(0, "phone_number", "510-581-0911")],
        "rows": {"FindApartment": [[{"property_name": "Golf Club Manor Apartments",
                                     "area": "Hayward", "number_of_beds": 3,
                                     "phone_number": "510-581-0911",
                                     "price": 2500}]]},
    },
    "s04-homes-visit": {
        "calls": [call("ScheduleVisit",
                       "property_name: Golf Club Manor Apartments, "
                       "visit_date: 2024-03-02")],
        "requests": [(0, "address", "375 Industrial Parkway # 314")],
        "rows": {"ScheduleVisit": [[{"property_name": "Golf Club Manor Apartments",
                                     "address": "375 Industrial Parkway # 314",
                                     "visit_date": "2024-03-02"}]]},
    },
    "s05-cars-browse": {
        "calls": [call("GetCarsAvailable",
                       "pickup_location: Indira Gandhi International Airport, "
                       "start_date: 2019-03-02, end_date: 2019-03-03, "
                       "car_type: Hatchback")],
        "requests": [(0, "price_per_day", "39.0")],
        "rows": {"GetCarsAvailable": [[{"car_name": "Fiat Panda",
                                        "car_type": "Hatchback",
                                        "pickup_location":
                                            "Indira Gandhi International Airport",
                                        "price_per_day": 39.0}]]},
    },
    "s06-restaurants-find": {
        "calls": [call("FindRestaurant",
                       "location: Oakland, cuisine: one_of(Italian|Thai), "
                       "rating: at_least(4)")],
        "requests": [(0, "restaurant_name", "Trattoria Fiore")],
        "rows": {"FindRestaurant": [[{"restaurant_name": "Trattoria Fiore",
                                      "location": "Oakland",
                                      "cuisine": "Italian", "rating": 4.5,
                                      "price_level": 2}]]},
    },
    "s07-restaurants-book": {
        "calls": [call("BookRestaurant",
                       "restaurant_name: Trattoria Fiore, "
                       "booking_date: 2024-04-19, booking_time: 19:00, "
                       "number_of_people: 4")],
        "requests": [(0, "phone_number", "415-224-7788")],
        "rows": {"BookRestaurant": [[{"restaurant_name": "Trattoria Fiore",
                                      "booking_date": "2024-04-19",
                                      "booking_time": "19:00",
                                      "number_of_people": 4,
                                      "phone_number": "415-224-7788"}]]},
    },
    "s08-hotels-search": {
        "calls": [call("SearchHotel",
                       "location: Kowloon, stars: at_least(4), "
                       "price_per_night: at_most(150)")],
        "requests": [(0, "hotel_name", "Harbour View Inn")],
        "rows": {"SearchHotel": [[{"hotel_name": "Harbour View Inn",
                                   "location": "Kowloon", "stars": 4,
                                   "price_per_night": 138.0}]]},
    },
    "s09-flights-search": {
        "calls": [call("SearchFlight",
                       "origin: Seattle, destination: New York, "
                       "departure_date: 2024-06-05, "
                       "seating_class: one_of(Economy|Business)")],
        "requests": [(0, "airline", "Delta")],
        "rows": {"SearchFlight": [[{"airline": "Delta", "origin": "Seattle",
                                    "destination": "New York",
                                    "departure_date": "2024-06-05",
                                    "seating_class": "Economy",
                                    "price": 342}]]},
    },
    "s10-restaurants-not": {
        "calls": [call("FindRestaurant",
                       "location: not(Downtown), cuisine: Mexican")],
        "requests": [(0, "rating", "4.5")],
        "rows": {"FindRestaurant": [[{"restaurant_name": "Casa Azul",
                                      "location": "Mission District",
                                      "cuisine": "Mexican", "rating": 4.5}]]},
    },
    # ---- multi domain ------------------------------------------------------
    "m01-trip-west": {
        "calls": [
            call("GetWeather", "city: Vancouver, date: 2019-03-02"),
            call("ScheduleVisit",
                 "property_name: Golf Club Manor Apartments, "
                 "visit_date: 2019-03-02"),
            call("ReserveCar",
                 "pickup_location: Indira Gandhi International Airport, "
                 "car_type: Hatchback, start_date: 2019-03-02, "
                 "end_date: 2019-03-03, pickup_time: 15:00, "
                 "add_insurance: True"),
        ],
        "requests": [(0, "temperature", "67"), (2, "price_per_day", "39.0")],
        "rows": {
            "GetWeather": [[{"city": "Vancouver", "date": "2019-03-02",
                             "temperature": 67, "precipitation": 49}]],
            "ScheduleVisit": [[{"property_name": "Golf Club Manor Apartments",
                                "address": "375 Industrial Parkway # 314",
                                "phone_number": "510-581-0911"}]],
            "ReserveCar": [[{"car_name": "Fiat Panda", "car_type": "Hatchback",
                             "pickup_time": "15:00", "price_per_day": 39.0,
                             "add_insurance": True}]],
        },
    },
    "m02-dinner-out": {
        "calls": [
            call("FindRestaurant",
                 "location: Hong Kong, cuisine: one_of(Cantonese|Sichuan), "
                 "rating: at_least(4)"),
            call("BookRestaurant",
                 "restaurant_name: Golden Lotus, booking_date: 2024-07-02, "
                 "booking_time: 18:30, number_of_people: 2"),
            call("GetWeather", "city: Hong Kong, date: 2024-07-02"),
        ],
        "requests": [(0, "restaurant_name", "Golden Lotus"),
                     (2, "temperature", "88")],
        "rows": {
            "FindRestaurant": [[{"restaurant_name": "Golden Lotus",
                                 "location": "Hong Kong",
                                 "cuisine": "Cantonese", "rating": 4.6}]],
            "BookRestaurant": [[{"restaurant_name": "Golden Lotus",
                                 "booking_date": "2024-07-02",
                                 "booking_time": "18:30"}]],
            "GetWeather": [[{"city": "Hong Kong", "date": "2024-07-02",
                             "temperature": 88, "humidity": 78}]],
        },
    },
    "m03-hk-stay": {
        "calls": [
            call("SearchHotel", "location: Kowloon, stars: at_least(4), "
                                "price_per_night: at_most(180)"),
            call("BookHotel", "hotel_name: Harbour View Inn, "
                              "check_in_date: 2024-08-10, number_of_nights: 3, "
                              "number_of_rooms: 1"),
            call("SearchFlight", "origin: Singapore, destination: Hong Kong, "
                                 "departure_date: 2024-08-09, "
                                 "seating_class: Economy"),
        ],
        "requests": [(0, "hotel_name", "Harbour View Inn"),
                     (2, "airline", "Cathay Pacific")],
        "rows": {
            "SearchHotel": [[{"hotel_name": "Harbour View Inn",
                              "location": "Kowloon", "stars": 4,
                              "price_per_night": 155.0}]],
            "BookHotel": [[{"hotel_name": "Harbour View Inn",
                            "check_in_date": "2024-08-10"}]],
            "SearchFlight": [[{"airline": "Cathay Pacific",
                               "origin": "Singapore",
                               "destination": "Hong Kong", "price": 410}]],
        },
    },
    "m04-denver-trip": {
        "calls": [
            call("SearchFlight", "origin: Seattle, destination: Denver, "
                                 "departure_date: 2024-09-14, "
                                 "seating_class: one_of(Economy|Business)"),
            call("SearchHotel", "location: Denver, stars: at_least(3)"),
            call("BookHotel", "hotel_name: Alpine Lodge, "
                              "check_in_date: 2024-09-14, number_of_nights: 2, "
                              "number_of_rooms: 1"),
        ],
        "requests": [(0, "airline", "United"), (1, "price_per_night", "129.0")],
        "rows": {
            "SearchFlight": [[{"airline": "United", "origin": "Seattle",
                               "destination": "Denver", "price": 210}]],
            "SearchHotel": [[{"hotel_name": "Alpine Lodge",
                              "location": "Denver", "stars": 3,
                              "price_per_night": 129.0}]],
            "BookHotel": [[{"hotel_name": "Alpine Lodge",
                            "check_in_date": "2024-09-14"}]],
        },
    },
    "m05-date-night": {
        "calls": [
            call("GetWeather", "city: San Francisco, date: 2024-04-19"),
            call("FindRestaurant", "location: North Beach, cuisine: Italian, "
                                   "price_level: at_most(2)"),
            call("BookRestaurant", "restaurant_name: Trattoria Fiore, "
                                   "booking_date: 2024-04-19, "
                                   "booking_time: 20:00, number_of_people: 2"),
        ],
        "requests": [(1, "phone_number", "415-224-7788")],
        "rows": {
            "GetWeather": [[{"city": "San Francisco", "date": "2024-04-19",
                             "temperature": 58}]],
            "FindRestaurant": [[{"restaurant_name": "Trattoria Fiore",
                                 "location": "North Beach",
                                 "cuisine": "Italian", "price_level": 2,
                                 "phone_number": "415-224-7788"}]],
            "BookRestaurant": [[{"restaurant_name": "Trattoria Fiore",
                                 "booking_time": "20:00"}]],
        },
    },
    "m06-house-hunt": {
        "calls": [
            call("FindApartment", "area: Hayward, number_of_beds: 2"),
            call("ScheduleVisit", "property_name: Creekside Commons, "
                                  "visit_date: 2024-05-18"),
            call("GetWeather", "city: Hayward, date: 2024-05-18"),
        ],
        "requests": [(0, "address", "88 Creekside Lane"),
                     (2, "temperature", "71")],
        "rows": {
            "FindApartment": [[{"property_name": "Creekside Commons",
                                "area": "Hayward", "number_of_beds": 2,
                                "address": "88 Creekside Lane"}]],
            "ScheduleVisit": [[{"property_name": "Creekside Commons",
                                "visit_date": "2024-05-18"}]],
            "GetWeather": [[{"city": "Hayward", "date": "2024-05-18",
                             "temperature": 71}]],
        },
    },
    "m07-car-upgrade": {
        "calls": [
            call("GetCarsAvailable", "pickup_location: SFO International Airport, "
                                     "start_date: 2024-06-20, "
                                     "end_date: 2024-06-23"),
            call("ReserveCar", "pickup_location: SFO International Airport, "
                               "car_type: SUV, start_date: 2024-06-20, "
                               "end_date: 2024-06-23, pickup_time: 09:30"),
            call("GetWeather", "city: San Francisco, date: 2024-06-20"),
        ],
        "requests": [(0, "price_per_day", "54.0"), (1, "car_name", "Toyota RAV4")],
        "rows": {
            "GetCarsAvailable": [[{"car_name": "Toyota RAV4", "car_type": "SUV",
                                   "price_per_day": 54.0}]],
            "ReserveCar": [[{"car_name": "Toyota RAV4", "car_type": "SUV",
                             "pickup_time": "09:30"}]],
            "GetWeather": [[{"city": "San Francisco", "date": "2024-06-20",
                             "temperature": 64}]],
        },
    },
    "m08-relocation": {
        "calls": [
            call("FindRestaurant", "location: not(Downtown), cuisine: Vegan"),
            call("GetWeather", "city: Portland, date: 2024-10-03"),
            call("ScheduleVisit", "property_name: Rose Garden Flats, "
                                  "visit_date: 2024-10-04"),
        ],
        "requests": [(0, "rating", "4.2")],
        "rows": {
            "FindRestaurant": [[{"restaurant_name": "Green Fork",
                                 "location": "Alberta Arts", "cuisine": "Vegan",
                                 "rating": 4.2}]],
            "GetWeather": [[{"city": "Portland", "date": "2024-10-03",
                             "temperature": 59}]],
            "ScheduleVisit": [[{"property_name": "Rose Garden Flats",
                                "visit_date": "2024-10-04"}]],
        },
    },
    "m09-anniversary": {
        "calls": [
            call("SearchFlight", "origin: Chicago, destination: Boston, "
                                 "departure_date: 2024-11-22"),
            call("GetWeather", "city: Boston, date: 2024-11-22"),
            call("BookRestaurant", "restaurant_name: The Beacon Room, "
                                   "booking_date: 2024-11-22, "
                                   "booking_time: 19:30, number_of_people: 2"),
        ],
        "requests": [(1, "humidity", "63")],
        "rows": {
            "SearchFlight": [[{"airline": "American", "origin": "Chicago",
                               "destination": "Boston", "price": 189}]],
            "GetWeather": [[{"city": "Boston", "date": "2024-11-22",
                             "temperature": 41, "humidity": 63}]],
            "BookRestaurant": [[{"restaurant_name": "The Beacon Room",
                                 "booking_time": "19:30"}]],
        },
    },
    "m10-two-cities": {
        "calls": [
            call("GetWeather", "city: Vancouver, date: 2024-12-01"),
            call("GetWeather", "city: Seattle, date: 2024-12-01"),
            call("SearchFlight", "origin: Vancouver, destination: Seattle, "
                                 "departure_date: 2024-12-01, "
                                 "seating_class: Business"),
        ],
        "requests": [(0, "temperature", "43"), (1, "humidity", "81")],
        "rows": {
            "GetWeather": [
                [{"city": "Vancouver", "date": "2024-12-01", "temperature": 43,
                  "humidity": 77}],
                [{"city": "Seattle", "date": "2024-12-01", "temperature": 46,
                  "humidity": 81}],
            ],
            "SearchFlight": [[{"airline": "Alaska", "origin": "Vancouver",
                               "destination": "Seattle", "price": 120}]],
        },
    },
}

SEED_DIALOGS = {
    "Weather": [
        ("user", "Hello! What's the weather going to be like in Vancouver on "
                 "March 2nd?"),
        ("system", "Happy to check that. Just to confirm, you want the "
                   "forecast for Vancouver on 2024-03-02?"),
        ("user", "Yes, that's correct."),
        ("api_call", call("GetWeather", "city: Vancouver, date: 2024-03-02")),
        ("search_results", "[{'city': 'Vancouver', 'date': '2024-03-02', "
                           "'temperature': 68, 'precipitation': 25}]"),
        ("system", "On March 2nd the temperature in Vancouver will be around "
                   "68 degrees Fahrenheit with a 25 percent chance of rain."),
        ("user", "Great, thank you. That's everything."),
        ("system", "You're welcome. Have a great day!"),
    ],
    "Restaurants": [
        ("user", "Hi! I'm after a highly rated Italian or Thai place in "
                 "Oakland."),
        ("system", "Sure. Should I only include restaurants rated 4 stars or "
                   "better?"),
        ("user", "Yes please, at least 4."),
        ("api_call", call("FindRestaurant",
                          "location: Oakland, cuisine: one_of(Italian|Thai), "
                          "rating: at_least(4)")),
        ("search_results", "[{'restaurant_name': 'Trattoria Fiore', "
                           "'location': 'Oakland', 'cuisine': 'Italian', "
                           "'rating': 4.5}]"),
        ("system", "Trattoria Fiore is a well rated Italian option in "
                   "Oakland. Would you like me to book it?"),
        ("user", "Not right now, thanks. That's all."),
        ("system", "You're welcome. Have a great day!"),
    ],
}


def write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n",
                    encoding="utf-8")


def main() -> None:
    from todbench.calls import parse_call

    registry = build_registry(
        schema_from_document(doc) for doc in SCHEMAS.values())

    for name, doc in SCHEMAS.items():
        write_json(OUT / "schemas" / f"{name}.json", doc)

    for dialog_id, spec in sorted(DIALOGS.items()):
        goal_doc = {
            "goal_calls": spec["calls"],
            "request_slots": [],
            "closing_utterance": "Thank you, that's all I need for now.",
        }
        by_goal: dict[int, list[str]] = {}
        for goal_index, slot, _value in spec["requests"]:
            by_goal.setdefault(goal_index, []).append(slot)
        goal_doc["request_slots"] = [
            {"goal_index": index, "slots": slots}
            for index, slots in sorted(by_goal.items())
        ]
        write_json(OUT / "goals" / f"{dialog_id}.json", goal_doc)

        gold_lines = [json.dumps({"kind": "call", "call": text},
                                 ensure_ascii=False)
                      for text in spec["calls"]]
        for _goal_index, slot, value in spec["requests"]:
            gold_lines.append(json.dumps(
                {"kind": "request", "slot": slot, "value": value,
                 "turn_index": 0}, ensure_ascii=False))
        gold_path = OUT / "gold" / f"{dialog_id}.jsonl"
        gold_path.parent.mkdir(parents=True, exist_ok=True)
        gold_path.write_text("\n".join(gold_lines) + "\n", encoding="utf-8")

        results_doc = {
            intent: {str(occurrence): rows
                     for occurrence, rows in enumerate(rows_by_occurrence)}
            for intent, rows_by_occurrence in spec["rows"].items()
        }
        write_json(OUT / "results" / f"{dialog_id}.json", results_doc)

        for text in spec["calls"]:
            parse_call(text)

    for domain, turns in SEED_DIALOGS.items():
        transcript = DialogTranscript(
            dialog_id=f"seed-{domain.lower()}", domains=(domain,),
            turns=tuple(
                Turn(role=role, text=text,
                     call=parse_call(text) if role == "api_call" else None,
                     timestamp=index)
                for index, (role, text) in enumerate(turns)))
        seed_path = OUT / "seeds" / f"{domain}.jsonl"
        seed_path.parent.mkdir(parents=True, exist_ok=True)
        seed_path.write_text(dump_transcripts([transcript]), encoding="utf-8")

    print(f"fixture corpus written to {OUT}")


if __name__ == "__main__":
    main()
