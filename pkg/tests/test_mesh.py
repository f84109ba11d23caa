import numpy as np
import pytest

from conftest import grid_mesh, random_disk
from qcfold.errors import FormatError, InputError, MeshError, PinError
from qcfold.mesh import (
    PinSet,
    TriMesh,
    load_mesh,
    polygon_area,
    read_obj,
    save_mesh,
    signed_area,
    validate,
)


def write_obj(path, vertices, faces):
    lines = [f"v {x} {y} 0" for x, y in vertices]
    lines += ["f " + " ".join(str(i + 1) for i in f) for f in faces]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_load_unit_square(tmp_path):
    path = write_obj(tmp_path / "sq.obj", [(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1, 2), (0, 2, 3)])
    mesh = load_mesh(path)
    assert mesh.n_vertices == 4
    assert mesh.n_faces == 2
    loops = mesh.boundary_loops()
    assert len(loops) == 1
    assert len(loops[0]) == 4


def test_load_rejects_flipped_face(tmp_path):
    path = write_obj(tmp_path / "bad.obj", [(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1, 2), (0, 3, 2)])
    with pytest.raises(MeshError) as exc:
        load_mesh(path)
    assert "inconsistent orientation at edge (2, 0)" in str(exc.value)


def test_load_rejects_dangling_triangles(tmp_path):
    path = write_obj(
        tmp_path / "bow.obj",
        [(0, 0), (1, 0), (0.5, 1), (-1, 0), (-0.5, -1)],
        [(0, 1, 2), (0, 3, 4)],
    )
    with pytest.raises(MeshError) as exc:
        load_mesh(path)
    assert any(p.startswith("dangling") for p in exc.value.problems)


def test_load_accepts_slashed_face_tokens(tmp_path):
    path = tmp_path / "tex.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n")
    mesh = load_mesh(path)
    assert mesh.faces.tolist() == [[0, 1, 2]]


def test_load_rejects_quads_and_nonplanar(tmp_path):
    quad = tmp_path / "quad.obj"
    quad.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    with pytest.raises(FormatError, match="only triangles"):
        load_mesh(quad)

    lifted = tmp_path / "lifted.obj"
    lifted.write_text("v 0 0 0\nv 1 0 0.5\nv 0 1 0\nf 1 2 3\n")
    with pytest.raises(FormatError, match="z = 0.5"):
        load_mesh(lifted)

    junk = tmp_path / "junk.obj"
    junk.write_text("v 0 zero 0\n")
    with pytest.raises(FormatError, match="cannot parse"):
        load_mesh(junk)


def test_save_load_roundtrip(tmp_path, unit_square):
    mesh = unit_square.with_vertices(unit_square.vertices + [[1 / 3, 0.0]])
    path = tmp_path / "out.obj"
    save_mesh(mesh, path)

    v_lines = [line for line in path.read_text().splitlines() if line.startswith("v ")]
    assert len(v_lines) == 4
    assert all(line.split()[3] in ("0", "0.0") for line in v_lines)
    assert "333333333333333" in v_lines[0]
    again = load_mesh(path)
    assert np.array_equal(again.faces, mesh.faces)
    assert np.array_equal(again.vertices, mesh.vertices)
    assert validate(again).ok


def test_load_rejects_empty_file(tmp_path):
    empty = tmp_path / "empty.obj"
    empty.write_text("# nothing here\n")
    with pytest.raises(FormatError):
        load_mesh(empty)


def test_save_to_missing_directory_fails(tmp_path, unit_square):
    with pytest.raises(OSError):
        save_mesh(unit_square, tmp_path / "missing" / "m.obj")


def test_signed_area(unit_square):
    assert signed_area(unit_square, unit_square.vertices) == pytest.approx(1.0)
    reflected = unit_square.vertices * [1, -1]
    assert signed_area(unit_square, reflected) == pytest.approx(-1.0)
    assert signed_area(unit_square, np.zeros((4, 2))) == 0.0
    with pytest.raises(InputError):
        signed_area(unit_square, np.zeros((3, 2)))


def test_validate_reports():
    assert str(validate(grid_mesh(2, 2))) == "ok"

    two = TriMesh(
        np.array([[0, 0], [1, 0], [0, 1], [5, 5], [6, 5], [5, 6]], dtype=float),
        np.array([[0, 1, 2], [3, 4, 5]]),
    )
    assert "connectivity" in validate(two).checks

    sliver = TriMesh(
        np.array([[0, 0], [1, 0], [0, 1], [0.5, 0]], dtype=float),
        np.array([[0, 1, 2], [1, 0, 3]]),
    )
    report = validate(sliver)
    assert "positivity" in report.checks
    assert "zero area" in str(report)


def test_validate_reversed_faces_only_when_allowed(unit_square):
    reflected = unit_square.with_vertices(unit_square.vertices * [1, -1])
    assert "positivity" in validate(reflected).checks
    assert validate(reflected, allow_reversed=True).ok


def test_validate_bad_indices():
    mesh = TriMesh(np.zeros((3, 2)), np.array([[0, 1, 7]]))
    assert validate(mesh).checks == {"indices"}


@pytest.mark.parametrize("seed", range(5))
def test_face_areas_match_boundary_shoelace(seed):
    mesh = random_disk(seed)
    loops = mesh.boundary_loops()
    assert len(loops) == 1
    total = signed_area(mesh, mesh.vertices)
    assert total == pytest.approx(polygon_area(mesh.vertices, loops[0]), abs=1e-10)
    assert total > 0


def test_boundary_structures():
    mesh = grid_mesh(3, 2)
    assert len(mesh.boundary_vertices) == 2 * 3 + 2 * 2
    ef = mesh.topology.edge_faces
    interior = ef[:, 1] >= 0
    assert interior.sum() == len(mesh.topology.interior_edge_ids)
    assert len(mesh.edges) == interior.sum() + len(mesh.boundary_vertices)


def test_fan_is_counterclockwise():
    mesh = grid_mesh(2, 2)
    center = 4
    fan = mesh.topology.fan(center)
    assert len(fan) == 6
    directions = []
    for corner in fan:
        f, k = divmod(corner, 3)
        d = mesh.vertices[mesh.faces[f, (k + 1) % 3]] - mesh.vertices[center]
        directions.append(np.arctan2(d[1], d[0]))
    steps = np.diff(np.unwrap(directions))
    assert np.all(steps > 0)


def test_with_vertices_shares_topology(unit_square):
    topo = unit_square.topology
    moved = unit_square.with_vertices(unit_square.vertices * 2)
    assert moved.topology is topo
    assert moved.face_areas == pytest.approx([2.0, 2.0])
    with pytest.raises(InputError):
        unit_square.with_vertices(np.zeros((5, 2)))


def test_read_obj_skips_validation(tmp_path, unit_square):
    path = tmp_path / "r.obj"
    save_mesh(unit_square.with_vertices(unit_square.vertices * [1, -1]), path)
    assert read_obj(path).face_areas == pytest.approx([-0.5, -0.5])


def test_pinset(unit_square):
    pins = PinSet.from_mapping({2: (1.0, 1.0), 0: (0.0, 0.0)})
    assert pins.indices.tolist() == [0, 2]
    pins.check(unit_square)
    assert pins.as_dict() == {0: (0.0, 0.0), 2: (1.0, 1.0)}

    with pytest.raises(PinError, match="at least 2 pins"):
        PinSet.from_mapping({0: (0.0, 0.0)}).check(unit_square)
    with pytest.raises(PinError, match="does not exist"):
        PinSet.from_mapping({0: (0.0, 0.0), 9: (1.0, 0.0)}).check(unit_square)
    with pytest.raises(PinError, match="more than once"):
        PinSet([1, 1], [[0, 0], [1, 1]])
