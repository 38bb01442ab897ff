import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from sstikit import scenario_io, shaft  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

# shaft data of the study case (kg m^2, N m/rad, N m s/rad)
STUDY_J = (1293.0, 4321.0, 22249.0, 22249.0, 10402.0, 176.0)
STUDY_K = (1.134e8, 2.478e8, 1.653e8, 1.033e8, 0.071e8)
STUDY_D = (5675.0, 12395.0, 8265.0, 5165.0, 355.0)
STUDY_F = (14.07, 22.092, 32.341, 34.933, 58.772)
STUDY_DM = (0.98, 4.74, 86.94, 7140.0, 3.72e7)


@pytest.fixture(scope="session")
def study():
    return scenario_io.bundled()


@pytest.fixture(scope="session")
def aramon(study):
    return study.scenario


@pytest.fixture(scope="session")
def study_shaft():
    return shaft.ShaftModel(STUDY_J, STUDY_K, STUDY_D, generator_index=5)


@pytest.fixture(scope="session")
def modal(study_shaft):
    return shaft.modal_inertia_and_damping(study_shaft)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE, key=lambda k: int(k.split("-")[1])):
            terminalreporter.write_line(ACCEPTANCE[key])
