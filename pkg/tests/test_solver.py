import logging
import math
import time

import numpy as np
import pytest

from conftest import grid_mesh, half_fold_coloring, half_fold_image, random_disk, vertex_at
from qcfold.assembly import Mode, assemble_system
from qcfold.coeff import INF, BeltramiField, third_vertex_image
from qcfold.errors import DegenerateFaceError, PinError, SolverError
from qcfold.foldconfig import FoldColoring, fold_field
from qcfold.mesh import PinSet, TriMesh
from qcfold.solver import default_pins, energy, loss, lsqc_solve, stack


def affine(points, c):
    """z -> (z + c*conj(z)) / (1 + c), which fixes 0 and 1."""
    z = points[:, 0] + 1j * points[:, 1]
    w = (z + c * np.conj(z)) / (1 + c)
    return np.column_stack([w.real, w.imag])


@pytest.fixture()
def base_pins():
    return PinSet.from_mapping({0: (0.0, 0.0), 1: (1.0, 0.0)})


def test_identity_solve(unit_square, base_pins):
    result = lsqc_solve(unit_square, BeltramiField.constant(2, 0), base_pins, Mode.SIGNED)
    assert np.allclose(result.image, unit_square.vertices, atol=1e-9)
    assert result.residual < 1e-10
    assert result.energy == pytest.approx(0.0, abs=1e-12)
    assert np.abs(result.mu).max() < 1e-9


def test_reflection_solve(unit_square, base_pins):
    result = lsqc_solve(unit_square, BeltramiField.constant(2, INF), base_pins, Mode.GENERALIZED)
    assert np.allclose(result.image, unit_square.vertices * [1, -1], atol=1e-9)
    assert np.isinf(result.mu).all()


def test_half_fold_solve(half_fold, left_edge_pins):
    mesh, coloring, expected = half_fold
    result = lsqc_solve(mesh, fold_field(coloring), left_edge_pins, Mode.GENERALIZED)
    assert np.allclose(result.image, expected, atol=1e-8)
    assert result.energy == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("c", [0.3, -0.2 + 0.4j, 0.1j])
def test_constant_field_recovers_affine_map(square_grid, c):
    pins = PinSet.in_place(square_grid, [0, 4])
    result = lsqc_solve(square_grid, BeltramiField.constant(square_grid.n_faces, c), pins)
    assert np.allclose(result.image, affine(square_grid.vertices, c), atol=1e-9)
    assert np.allclose(result.mu, c, atol=1e-9)


@pytest.mark.parametrize("mu", [0.5, 0.3 - 0.6j, 2.0, -1.5 + 3j, INF])
def test_single_triangle_matches_third_vertex_formula(mu):
    p = (0.3, 0.9)
    mesh = TriMesh(np.array([[0.0, 0.0], [1.0, 0.0], p]), np.array([[0, 1, 2]]))
    pins = PinSet.in_place(mesh, [0, 1])
    result = lsqc_solve(mesh, BeltramiField([mu]), pins, Mode.GENERALIZED)
    assert np.allclose(result.image[2], third_vertex_image(mu, p), atol=1e-10)


def test_single_triangle_over_random_coefficients():
    rng = np.random.default_rng(11)
    p = (0.3, 0.9)
    mesh = TriMesh(np.array([[0.0, 0.0], [1.0, 0.0], p]), np.array([[0, 1, 2]]))
    pins = PinSet.in_place(mesh, [0, 1])
    radii = np.concatenate([rng.uniform(0.0, 0.95, 100), rng.uniform(1.05, 10.0, 100)])
    values = radii * np.exp(1j * rng.uniform(0, 2 * np.pi, 200))
    for mu in values:
        result = lsqc_solve(mesh, BeltramiField([mu]), pins, Mode.GENERALIZED)
        expected = third_vertex_image(mu, p)
        assert np.allclose(result.image[2], expected, rtol=1e-9, atol=1e-9), mu


def test_pins_are_reproduced_exactly():
    mesh = random_disk(0)
    rng = np.random.default_rng(0)
    pins = PinSet.from_mapping({3: (0.25, -1.0), 20: (2.0, 0.5), 40: (1.0, 1.0)})
    field = BeltramiField(0.5 * rng.uniform(size=mesh.n_faces) * np.exp(1j * rng.uniform(0, 6, mesh.n_faces)))
    result = lsqc_solve(mesh, field, pins)
    assert np.array_equal(result.image[pins.indices], pins.targets)


def test_signed_solution_is_the_minimizer():
    rng = np.random.default_rng(1)
    mesh = random_disk(1)
    field = BeltramiField(0.8 * rng.uniform(size=mesh.n_faces) * np.exp(1j * rng.uniform(0, 6, mesh.n_faces)))
    pins = default_pins(mesh)
    result = lsqc_solve(mesh, field, pins, Mode.SIGNED)
    system = assemble_system(mesh, field, Mode.SIGNED)
    x = stack(result.image)
    free = np.ones(2 * mesh.n_vertices, dtype=bool)
    free[np.concatenate([pins.indices, pins.indices + mesh.n_vertices])] = False
    for _ in range(20):
        y = x.copy()
        y[free] += 0.1 * rng.normal(size=free.sum())
        assert system.quadratic(y) >= system.quadratic(x) - 1e-10


def test_generalized_solution_is_stationary():
    rng = np.random.default_rng(2)
    mesh = random_disk(2)
    values = rng.uniform(0.1, 0.8, mesh.n_faces) * np.exp(1j * rng.uniform(0, 6, mesh.n_faces))
    outside = rng.uniform(size=mesh.n_faces) < 0.5
    values[outside] = 1.0 / np.conj(values[outside])
    field = BeltramiField(values)
    pins = default_pins(mesh)
    result = lsqc_solve(mesh, field, pins, Mode.GENERALIZED)
    gradient = assemble_system(mesh, field, Mode.GENERALIZED).matrix @ stack(result.image)
    free = np.ones(2 * mesh.n_vertices, dtype=bool)
    free[np.concatenate([pins.indices, pins.indices + mesh.n_vertices])] = False
    for _ in range(20):
        direction = np.where(free, rng.normal(size=free.size), 0.0)
        assert abs(direction @ gradient) < 1e-8


@pytest.mark.parametrize("seed", range(10))
def test_two_pins_always_suffice(seed):
    rng = np.random.default_rng(100 + seed)
    mesh = random_disk(seed)
    assert mesh.n_faces <= 100
    radius = rng.choice([rng.uniform(0, 0.9), rng.uniform(1.1, 5)])
    c = radius * np.exp(1j * rng.uniform(0, 2 * np.pi))
    result = lsqc_solve(mesh, BeltramiField.constant(mesh.n_faces, c), default_pins(mesh), Mode.GENERALIZED)
    assert result.residual < 1e-10
    assert np.all(np.isfinite(result.image))


def test_solve_is_deterministic():
    mesh = random_disk(3)
    field = BeltramiField.constant(mesh.n_faces, 0.2 + 0.1j)
    first = lsqc_solve(mesh, field, default_pins(mesh))
    second = lsqc_solve(mesh, field, default_pins(mesh))
    assert np.array_equal(first.image, second.image)


def test_solve_errors(unit_square):
    field = BeltramiField.constant(2, 0)
    with pytest.raises(PinError, match="at least 2 pins"):
        lsqc_solve(unit_square, field, PinSet.from_mapping({0: (0.0, 0.0)}))
    mesh = random_disk(4)
    with pytest.raises(SolverError, match="tolerance"):
        lsqc_solve(mesh, BeltramiField.constant(mesh.n_faces, 0.3), default_pins(mesh), tol=1e-300)


def test_report(half_fold, left_edge_pins):
    mesh, coloring, _ = half_fold
    result = lsqc_solve(mesh, fold_field(coloring), left_edge_pins, Mode.GENERALIZED)
    report = result.report()
    assert report["mode"] == "generalized"
    assert report["faces"] == mesh.n_faces
    assert report["pins"] == 2
    assert report["mu_stats"]["infinite"] + report["mu_stats"]["collapsed"] <= int(coloring.negative.sum())
    assert np.array_equal(result.as_mesh().faces, mesh.faces)


def test_energy_examples(unit_square):
    identity = unit_square.vertices
    plus = FoldColoring([1, 1])
    minus = FoldColoring([-1, -1])
    assert energy(unit_square, identity, plus) == pytest.approx(0.0, abs=1e-14)
    assert energy(unit_square, identity * [1, -1], minus) == pytest.approx(0.0, abs=1e-14)
    assert energy(unit_square, identity, minus) == pytest.approx(1.0)
    # signed mode treats every face as +
    assert energy(unit_square, identity, minus, Mode.SIGNED) == pytest.approx(0.0, abs=1e-14)
    # a field labels faces by whether |mu| > 1
    assert energy(unit_square, identity, BeltramiField.constant(2, INF)) == pytest.approx(1.0)


def test_energy_is_half_the_quadratic_form():
    rng = np.random.default_rng(5)
    mesh = random_disk(5)
    coloring = FoldColoring(np.where(mesh.vertices[mesh.faces][:, :, 0].mean(axis=1) < 0.1, 1, -1))
    system = assemble_system(mesh, fold_field(coloring), Mode.GENERALIZED)
    for _ in range(5):
        image = rng.normal(size=mesh.vertices.shape)
        assert energy(mesh, image, coloring) == pytest.approx(0.5 * system.quadratic(stack(image)), rel=1e-10)


def test_loss_of_exact_fold_is_zero(half_fold):
    mesh, coloring, image = half_fold
    assert loss(mesh, image, coloring) < 1e-16


def test_loss_reports_divergent_faces(unit_square, caplog):
    with caplog.at_level(logging.WARNING, logger="qcfold"):
        value = loss(unit_square, unit_square.vertices, FoldColoring([-1, 1]))
    assert math.isinf(value)
    assert "diverges on 1 face(s)" in caplog.text


def test_loss_of_constant_coefficient(square_grid):
    image = affine(square_grid.vertices, 0.3)
    coloring = FoldColoring(np.ones(square_grid.n_faces, dtype=int))
    assert loss(square_grid, image, coloring) == pytest.approx(0.09 * square_grid.n_faces, rel=1e-9)


def test_loss_rejects_collapsed_faces(unit_square):
    image = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    with pytest.raises(DegenerateFaceError, match="faces 1"):
        loss(unit_square, image, FoldColoring([1, 1]))


def test_default_pins(unit_square):
    pins = default_pins(unit_square)
    assert len(pins) == 2
    a, b = pins.targets
    assert np.linalg.norm(a - b) == pytest.approx(math.sqrt(2))
    assert np.array_equal(pins.targets, unit_square.vertices[pins.indices])


@pytest.mark.parametrize("mode", list(Mode))
def test_solve_at_scale(mode):
    mesh = grid_mesh(100, 100)
    assert mesh.n_faces == 20_000
    coloring = half_fold_coloring(mesh)
    pins = PinSet.in_place(mesh, [vertex_at(mesh, 0, 0), vertex_at(mesh, 0, 1)])
    field = fold_field(coloring) if mode is Mode.GENERALIZED else BeltramiField.constant(mesh.n_faces, 0.2j)
    started = time.perf_counter()
    result = lsqc_solve(mesh, field, pins, mode)
    assert time.perf_counter() - started < 10.0
    assert result.residual < 1e-10
    if mode is Mode.GENERALIZED:
        assert np.allclose(result.image, half_fold_image(mesh.vertices), atol=1e-6)
