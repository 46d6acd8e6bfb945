import numpy as np
import pytest

from carimorph.mesh import HeadMesh
from carimorph.synthetic import grid_mesh, sphere_mesh


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def tetra_slice() -> HeadMesh:
    # 4 vertices, 2 faces: the smallest mesh exercising shared edges.
    vertices = np.array(
        [
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    faces = np.array([[0, 1, 2], [0, 2, 3]])
    return HeadMesh(vertices, faces)


@pytest.fixture
def unit_cube() -> HeadMesh:
    vertices = np.array(
        [[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)]
    )
    faces = np.array(
        [
            [0, 1, 3], [0, 3, 2],
            [4, 6, 7], [4, 7, 5],
            [0, 4, 5], [0, 5, 1],
            [2, 3, 7], [2, 7, 6],
            [0, 2, 6], [0, 6, 4],
            [1, 5, 7], [1, 7, 3],
        ]
    )
    return HeadMesh(vertices, faces)


@pytest.fixture
def small_grid() -> HeadMesh:
    return grid_mesh(6, 5)


@pytest.fixture
def small_sphere() -> HeadMesh:
    return sphere_mesh(8, 12)


def random_mesh(rng: np.random.Generator, n_v: int = 30) -> HeadMesh:
    """Random point cloud with a deterministic fan triangulation."""
    vertices = rng.standard_normal((n_v, 3))
    faces = np.array([[0, i, i + 1] for i in range(1, n_v - 1)])
    return HeadMesh(vertices, faces)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
