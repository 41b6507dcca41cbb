from pathlib import Path
import sys

import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from backend import QOS_DATA_DIR  # noqa: E402
from backend.catalog.storage import load_catalog, load_request, load_requests  # noqa: E402
from backend.ontology import load_ontology  # noqa: E402


@pytest.fixture(scope="session")
def ontology():
    return load_ontology(QOS_DATA_DIR / "ontology.json")


@pytest.fixture(scope="session")
def table1_catalog(ontology):
    return load_catalog(QOS_DATA_DIR / "table1_catalog.json", ontology)


@pytest.fixture(scope="session")
def table1_request(ontology):
    return load_request(QOS_DATA_DIR / "table1_request.json", ontology)


@pytest.fixture(scope="session")
def camera_catalog(ontology):
    return load_catalog(QOS_DATA_DIR / "camera_catalog.json", ontology)


@pytest.fixture(scope="session")
def camera_requests(ontology):
    return load_requests(QOS_DATA_DIR / "camera_requests.json", ontology)
