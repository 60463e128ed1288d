from pathlib import Path

import pytest

from advscale.run_data import load_runs
from advscale.validity import load_images, load_labels

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURES = REPO_ROOT / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def dg_runs():
    return load_runs(FIXTURES / "runs_dg.jsonl")


@pytest.fixture(scope="session")
def study_labels():
    return load_labels(FIXTURES / "labels.jsonl")


@pytest.fixture(scope="session")
def study_images():
    return load_images(FIXTURES / "images.jsonl")
