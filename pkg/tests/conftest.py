import numpy as np
import pytest

from hierminer.ingestion import Dataset

# The 10-snapshot toy table: 4 descriptive attributes and a 5-concept
# counter sub-hierarchy (sizes in MB).
TOY_ROWS = [
    # softType, softVersion, Xmx, weekDay, java.lang, reflect, Field, Method, String
    ("Sales", "V_3", 4.2e9, True, 3242, 2980, 280, 2700, 176),
    ("Sales", "V_3", 2.3e9, False, 3296, 3003, 322, 2678, 355),
    ("EDI", "V_1", 6.4e9, True, 2305, 1474, 264, 1210, 163),
    ("Factory", "V_1", 1.8e9, False, 2217, 1481, 386, 1095, 480),
    ("Factory", "V_2", 2.4e9, True, 2475, 1582, 390, 1192, 513),
    ("Manager", "V_2", 5.3e9, True, 2016, 1258, 56, 1202, 140),
    ("Sales", "V_3", 2.4e9, True, 3398, 2814, 320, 2494, 402),
    ("Factory", "V_3", 8.2e9, False, 2715, 1326, 84, 1200, 147),
    ("Sales", "V_3", 6.4e9, True, 2430, 1577, 412, 1165, 120),
    ("Sales", "V_1", 4.5e9, True, 2570, 1283, 68, 1215, 422),
]

CONCEPT_COLUMNS = (
    "java.lang",
    "java.lang.reflect",
    "java.lang.reflect.Field",
    "java.lang.reflect.Method",
    "java.lang.String",
)


def toy_payload() -> dict:
    objects = []
    for i, row in enumerate(TOY_ROWS, start=1):
        soft_type, version, xmx, weekday = row[:4]
        counters = dict(zip(CONCEPT_COLUMNS, row[4:]))
        objects.append(
            {
                "id": f"o{i}",
                "attrs": {
                    "softType": soft_type,
                    "softVersion": version,
                    "Xmx": xmx,
                    "weekDay": weekday,
                },
                "counters": counters,
            }
        )
    return {
        "schema": [
            {"name": "softType", "kind": "categorical"},
            {"name": "softVersion", "kind": "categorical"},
            {"name": "Xmx", "kind": "numeric"},
            {"name": "weekDay", "kind": "boolean"},
        ],
        "objects": objects,
    }


@pytest.fixture(scope="session")
def toy_dataset() -> Dataset:
    return Dataset.from_json(toy_payload())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
