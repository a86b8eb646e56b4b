import numpy as np
import pytest

from boomtrack.fiducial import generate_dictionary


@pytest.fixture(scope="session")
def dict6():
    """6x6, 50 ids, distance 5 (corrects up to 2 bits)."""
    return generate_dictionary(6, 50, 5, seed=0)


@pytest.fixture(scope="session")
def dict6_h3():
    return generate_dictionary(6, 50, 3, seed=0)


def paste(canvas: np.ndarray, sprite: np.ndarray, x0: int, y0: int) -> np.ndarray:
    out = canvas.copy()
    out[y0 : y0 + sprite.shape[0], x0 : x0 + sprite.shape[1]] = sprite
    return out


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
