import pytest

from swarmselect.dataset import generate_synthetic_textures
from swarmselect.features import extract_dataset

# the fixture used for calibration and the relative-ordering checks
TEXTURE_FIXTURE = dict(n_per_class=50, image_size=64, seed=7)

_ACCEPTANCE_LINES: dict[int, str] = {}


def report_line(number: int, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    _ACCEPTANCE_LINES[number] = line
    print(line)


@pytest.fixture(scope="session")
def texture_features():
    images, labels = generate_synthetic_textures(**TEXTURE_FIXTURE)
    return extract_dataset(images, labels)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(_ACCEPTANCE_LINES[number])
