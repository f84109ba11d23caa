import numpy as np
import pytest
from scipy.spatial import Delaunay

from qcfold.foldconfig import FoldColoring
from qcfold.mesh import PinSet, TriMesh, face_signed_areas, validate


def grid_mesh(nx: int, ny: int, width: float = 1.0, height: float = 1.0) -> TriMesh:
    """Rectangle [0, width] x [0, height] cut into nx * ny cells, two triangles each."""
    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.reshape(-1), Y.reshape(-1)])
    faces = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b, c, d = a + 1, a + nx + 2, a + nx + 1
            faces += [(a, b, c), (a, c, d)]
    return TriMesh(vertices, np.array(faces))


def vertex_at(mesh: TriMesh, x: float, y: float) -> int:
    return int(np.argmin(np.linalg.norm(mesh.vertices - [x, y], axis=1)))


def half_fold_coloring(mesh: TriMesh, x_fold: float = 0.5) -> FoldColoring:
    centroid_x = mesh.vertices[mesh.faces][:, :, 0].mean(axis=1)
    return FoldColoring(np.where(centroid_x < x_fold, 1, -1))


def half_fold_image(points: np.ndarray, x_fold: float = 0.5) -> np.ndarray:
    """Fold the part right of x = x_fold over onto the left."""
    image = points.copy()
    right = points[:, 0] > x_fold
    image[right, 0] = 2 * x_fold - points[right, 0]
    return image


def random_disk(seed: int, n_interior: int = 30, n_boundary: int = 16) -> TriMesh:
    rng = np.random.default_rng(seed)
    theta = np.linspace(0, 2 * np.pi, n_boundary, endpoint=False) + 0.1 * rng.uniform(size=n_boundary)
    radius = 1.0 + 0.02 * rng.uniform(size=n_boundary)
    boundary = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    r = 0.8 * np.sqrt(rng.uniform(size=n_interior))
    phi = rng.uniform(0, 2 * np.pi, n_interior)
    interior = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    points = np.vstack([boundary, interior])
    faces = Delaunay(points).simplices.copy()
    flipped = face_signed_areas(points, faces) < 0
    faces[flipped] = faces[flipped][:, [0, 2, 1]]
    mesh = TriMesh(points, faces)
    assert validate(mesh).ok
    return mesh


@pytest.fixture()
def unit_square() -> TriMesh:
    return TriMesh(
        np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
        np.array([[0, 1, 2], [0, 2, 3]]),
    )


@pytest.fixture()
def square_grid() -> TriMesh:
    return grid_mesh(4, 4)


@pytest.fixture()
def half_fold(square_grid):
    """Unit square folded along x = 0.5: mesh, coloring, exact fold image."""
    return square_grid, half_fold_coloring(square_grid), half_fold_image(square_grid.vertices)


@pytest.fixture()
def corner_pins(square_grid) -> PinSet:
    corners = [vertex_at(square_grid, x, y) for x, y in [(0, 0), (1, 0), (1, 1), (0, 1)]]
    return PinSet.in_place(square_grid, corners)


@pytest.fixture()
def left_edge_pins(square_grid) -> PinSet:
    return PinSet.in_place(square_grid, [vertex_at(square_grid, 0, 0), vertex_at(square_grid, 0, 1)])
