from datetime import datetime, timedelta, timezone
from importlib import resources
from pathlib import Path

import pytest

from kbcompleteness.dataset import EditRecord, EntityRegistry, GenderLabel, RegistryEntry, load_edits, load_name_dictionary, load_registry
from kbcompleteness.windowing import WindowSpec

GOLDEN = Path(__file__).parent / "golden"
HTTP_FIXTURES = Path(__file__).parent / "fixtures" / "http"

T0 = datetime(2019, 1, 1, tzinfo=timezone.utc)


def fixture_dir() -> Path:
    return Path(str(resources.files("kbcompleteness") / "data" / "fixture"))


@pytest.fixture(scope="session")
def fixture_paths():
    d = fixture_dir()
    return {"registry": d / "registry.ndjson", "edits": d / "edits.ndjson", "names": d / "names.csv"}


@pytest.fixture(scope="session")
def fixture_registry(fixture_paths):
    with open(fixture_paths["registry"], "rb") as fh:
        return load_registry(fh)


@pytest.fixture(scope="session")
def fixture_edits(fixture_paths):
    with open(fixture_paths["edits"], "rb") as fh:
        return load_edits(fh).records


@pytest.fixture(scope="session")
def fixture_names(fixture_paths):
    with open(fixture_paths["names"], "rb") as fh:
        return load_name_dictionary(fh)


def at(day: float, hour: int = 12) -> datetime:
    return T0 + timedelta(days=day, hours=hour)


@pytest.fixture
def abc():
    """A edited in weeks 1 and 2 (three times in week 1), B in week 1, C in week 3."""
    registry = EntityRegistry.from_entries(
        [
            RegistryEntry("A", "Anna A", ("Astronaut",), GenderLabel.FEMALE),
            RegistryEntry("B", "Bob B", ("Astronaut",), GenderLabel.MALE),
            RegistryEntry("C", "Cy C", ("Astronaut",), GenderLabel.UNDEFINED),
        ]
    )
    events = [
        EditRecord("A", at(0), 1, ("Astronaut",)),
        EditRecord("A", at(1), 2, ("Astronaut",)),
        EditRecord("A", at(2), 3, ("Astronaut",)),
        EditRecord("A", at(8), 4, ("Astronaut",)),
        EditRecord("B", at(3), 5, ("Astronaut",)),
        EditRecord("C", at(16), 6, ("Astronaut",)),
    ]
    spec = WindowSpec(T0, T0 + timedelta(days=21), 7)
    return registry, events, spec
