#!/usr/bin/env python3
"""Regenerate the golden prompt files under goldens/<TEMPLATE_VERSION>.

The goldens pin the exact bytes of rendered stage-1 and stage-2 prompts for
one fixed fixture (Weather seed, Homes target). Regenerate only after a
deliberate template change, then review the diff.
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from todbench.corpus import load_corpus  # noqa: E402
from todbench.prompts import TEMPLATE_VERSION, render_p1, render_p2  # noqa: E402
from todbench.transcript import Turn  # noqa: E402


def main() -> None:
    corpus = load_corpus(ROOT / "corpus" / "fixture")
    weather_seed = next(dialog for schema, dialog in corpus.seeds
                        if schema.domain_name == "Weather")
    weather = corpus.registry.get("Weather")
    homes = corpus.registry.get("Homes")

    out = ROOT / "goldens" / TEMPLATE_VERSION
    out.mkdir(parents=True, exist_ok=True)

    p1 = render_p1(weather, weather_seed, homes)
    (out / "p1_weather_to_homes.txt").write_text(p1.rendered, encoding="utf-8")

    history = (
        Turn(role="user", text="I'd like to schedule a visit to the Golf "
                               "Club Manor Apartments.", timestamp=0),
        Turn(role="system", text="Of course. What date works for you?",
             timestamp=1),
        Turn(role="user", text="The visit date is 2024-03-02.", timestamp=2),
    )
    p2 = render_p2([homes], weather_seed, history)
    (out / "p2_homes_session.txt").write_text(p2.rendered, encoding="utf-8")

    p2_empty = render_p2([homes], weather_seed, ())
    (out / "p2_homes_empty_history.txt").write_text(p2_empty.rendered,
                                                    encoding="utf-8")
    print(f"golden prompts written to {out}")


if __name__ == "__main__":
    main()
