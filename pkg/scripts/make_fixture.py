"""Regenerate the bundled 50-entity fixture dataset.

Usage: python scripts/make_fixture.py [OUT_DIR]

Output is deterministic (PCG64, seed 20190101); rerunning it must leave the
files byte-identical.
"""

import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from kbcompleteness.dataset import (
    EditRecord,
    EntityRegistry,
    NameDictionary,
    RegistryEntry,
    open_text,
    sort_edits,
    write_edits,
    write_name_dictionary,
    write_registry,
)
from kbcompleteness.gender import ClassifierConfig, classify_registry

NAMES = {
    "samantha": 0.98, "maria": 0.99, "anna": 0.97, "valentina": 0.995, "sally": 0.99, "mae": 0.96,
    "yuri": 0.01, "neil": 0.005, "john": 0.004, "peter": 0.02, "chris": 0.08,
    "alex": 0.5, "jean": 0.3, "kim": 0.6, "sasha": 0.55, "robin": 0.4,
    "leslie": 0.9, "jordan": 0.1, "ashley": 0.85, "andrea": 0.12,
}

# (title, classes)
ENTITIES = [
    ("Samantha_Cristoforetti", ["Astronaut"]),
    ("Valentina_Tereshkova", ["Astronaut"]),
    ("Sally_Ride", ["Astronaut"]),
    ("Mae_Jemison", ["Astronaut"]),
    ("Anna_Lee_Fisher", ["Astronaut"]),
    ("Maria_Kurz", ["Astronaut"]),
    ("Leslie_Orbit", ["Astronaut"]),
    ("Samantha_Vega", ["Astronaut", "Engineer"]),
    ("Yuri_Gagarin", ["Astronaut"]),
    ("Neil_Armstrong", ["Astronaut"]),
    ("John_Glenn_(astronaut)", ["Astronaut"]),
    ("Peter_Wisoff", ["Astronaut"]),
    ("Chris_Hadfield", ["Astronaut"]),
    ("Jordan_Vance", ["Astronaut"]),
    ("Yuri_Malenchenko", ["Astronaut"]),
    ("John_Young_(astronaut)", ["Astronaut"]),
    ("Neil_Woodward", ["Astronaut", "Engineer"]),
    ("Peter_Kalmar", ["Astronaut"]),
    ("Chris_Cassidy", ["Astronaut"]),
    ("Alex_Gerst", ["Astronaut"]),
    ("Sasha_Petrov", ["Astronaut"]),
    ("Buzz_Aldrin", ["Astronaut"]),
    ("Jean-Loup_Chretien", ["Astronaut"]),
    ("Kim_Novak_(astronaut)", ["Astronaut"]),
    ("Zzyzx_Quill", ["Astronaut"]),
    ("Maria_Telkes", ["Engineer"]),
    ("Anna_Botnar", ["Engineer"]),
    ("Sally_Hudson", ["Engineer"]),
    ("Mae_Keane", ["Engineer"]),
    ("Valentina_Cortese_(engineer)", ["Engineer"]),
    ("Leslie_Comrie", ["Engineer"]),
    ("John_Smeaton", ["Engineer"]),
    ("Peter_Cooper", ["Engineer"]),
    ("Neil_Gershenfeld", ["Engineer"]),
    ("Chris_Urmson", ["Engineer"]),
    ("Yuri_Kondratyuk", ["Engineer"]),
    ("John_Rennie", ["Engineer"]),
    ("Peter_Brotherhood", ["Engineer"]),
    ("Jordan_Mechner", ["Engineer"]),
    ("Chris_Lattner", ["Engineer"]),
    ("Neil_Ferguson_(engineer)", ["Engineer"]),
    ("Alex_Moulton", ["Engineer"]),
    ("Robin_Saxby", ["Engineer"]),
    ("Ashley_Thomas", ["Engineer"]),
    ("Andrea_Rossi", ["Engineer"]),
    ("Jean_Bartik", ["Engineer"]),
    ("Isambard_Kingdom_Brunel", ["Engineer"]),
    ("Gustave_Eiffel", ["Engineer"]),
    ("Sasha_Ilyin", ["Engineer"]),
    ("Kim_Jong-soo", ["Engineer"]),
]

START = datetime(2019, 1, 1, tzinfo=timezone.utc)
END = datetime(2024, 1, 1, tzinfo=timezone.utc)


def main(out: Path) -> None:
    assert len(ENTITIES) == 50
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(20190101)))
    registry = EntityRegistry.from_entries(
        RegistryEntry(title, title.replace("_", " "), tuple(classes)) for title, classes in ENTITIES
    )
    registry = classify_registry(registry, NameDictionary(NAMES), ClassifierConfig(0.1))

    period = (END - START).total_seconds()
    records = []
    rev = 880000000
    for title, classes in ENTITIES:
        if title == "Zzyzx_Quill":
            continue  # registered but never edited
        # edits per week, heavy-tailed across entities
        rate = float(np.exp(rng.normal(np.log(0.012), 1.0)))
        n_edits = int(rng.poisson(rate * period / (7 * 86400)))
        offsets = np.sort(rng.random(n_edits) * period)
        for off in offsets:
            rev += int(rng.integers(1, 5000))
            records.append(EditRecord(title, START + timedelta(seconds=int(off)), rev, tuple(classes)))
    # a few revisions outside the observation period
    for title, classes in ENTITIES[:3]:
        rev += 7
        records.append(EditRecord(title, datetime(2018, 12, 31, 23, 59, 59, tzinfo=timezone.utc), rev, tuple(classes)))
        rev += 7
        records.append(EditRecord(title, datetime(2024, 1, 1, 0, 0, 0, tzinfo=timezone.utc), rev, tuple(classes)))

    out.mkdir(parents=True, exist_ok=True)
    with open_text(out / "registry.ndjson", "w") as fh:
        write_registry(registry, fh)
    with open_text(out / "edits.ndjson", "w") as fh:
        write_edits(sort_edits(records), fh)
    with open_text(out / "names.csv", "w") as fh:
        write_name_dictionary(NAMES, fh)


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "src/kbcompleteness/data/fixture")
