import numpy as np
import pytest

from omninav import worlds
from omninav.core import OccupancyGrid, Pose2D


@pytest.fixture(scope="session")
def lab_nav_map():
    return worlds.lab_nav_map()


@pytest.fixture
def small_grid():
    """10x10 free grid at 0.1 m resolution, origin at the world origin."""
    return OccupancyGrid(10, 10, 0.1, Pose2D(0.0, 0.0, 0.0))


def random_grid(rng: np.random.Generator, max_side: int = 50, p_occupied: float = 0.3):
    from omninav.core import FREE, OCCUPIED

    h = int(rng.integers(3, max_side + 1))
    w = int(rng.integers(3, max_side + 1))
    cells = np.where(rng.uniform(size=(h, w)) < p_occupied, OCCUPIED, FREE).astype(np.int8)
    return OccupancyGrid(w, h, 0.05, Pose2D(0.0, 0.0, 0.0), cells)
