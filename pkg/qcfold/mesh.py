"""Planar triangle meshes: representation, OBJ I/O and structural validation.

Vertices are 2D points, faces are oriented index triples. Derived structures
(half-edge twins, undirected edges, boundary loops) depend on the faces only and
are shared between meshes produced by :meth:`TriMesh.with_vertices`, so moving
vertices around during an iteration never rebuilds the topology.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, NamedTuple

import meshio
import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from qcfold.errors import FormatError, InputError, MeshError, PinError
from qcfold.fsutil import atomic_target

logger = logging.getLogger(__name__)

OBJ_Z_TOL = 1e-9
# faces with |area| below this times (longest edge)^2 count as degenerate
DEGENERATE_AREA_RTOL = 1e-14


def face_signed_areas(points: np.ndarray, faces: np.ndarray) -> np.ndarray:
    p0 = points[faces[:, 0]]
    p1 = points[faces[:, 1]]
    p2 = points[faces[:, 2]]
    return 0.5 * (
        (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
        - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
    )


def _longest_edge_sq(points: np.ndarray, faces: np.ndarray) -> np.ndarray:
    tri = points[faces]
    e = tri[:, [1, 2, 0]] - tri[:, [2, 0, 1]]
    return np.max(np.sum(e * e, axis=2), axis=1)


def degenerate_faces(points: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Indices of faces whose area vanishes relative to their size."""
    area = np.abs(face_signed_areas(points, faces))
    return np.flatnonzero(area <= DEGENERATE_AREA_RTOL * _longest_edge_sq(points, faces))


class MeshTopology:
    """Half-edge bookkeeping for a face list.

    Half-edge ``h = 3*f + k`` runs from ``faces[f, k]`` to ``faces[f, (k+1) % 3]``.
    It doubles as the corner of face ``f`` at vertex ``faces[f, k]``.
    """

    def __init__(self, faces: np.ndarray, n_vertices: int):
        self.n_vertices = n_vertices
        self.n_faces = len(faces)
        self.src = faces.reshape(-1)
        self.dst = faces[:, [1, 2, 0]].reshape(-1)
        self.face_of = np.repeat(np.arange(self.n_faces), 3)

        lo = np.minimum(self.src, self.dst)
        hi = np.maximum(self.src, self.dst)
        keys = lo * n_vertices + hi
        uniq, self.edge_of, counts = np.unique(keys, return_inverse=True, return_counts=True)
        self.edges = np.column_stack([uniq // n_vertices, uniq % n_vertices])
        self.edge_counts = counts

        order = np.argsort(self.edge_of, kind="stable")
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        self.twin = np.full(3 * self.n_faces, -1, dtype=np.int64)
        pair = counts == 2
        first = order[starts[pair]]
        second = order[starts[pair] + 1]
        self.twin[first] = second
        self.twin[second] = first

        self.edge_faces = np.full((len(uniq), 2), -1, dtype=np.int64)
        self.edge_faces[:, 0] = self.face_of[order[starts]]
        self.edge_faces[pair, 1] = self.face_of[second]

    @cached_property
    def interior_edge_ids(self) -> np.ndarray:
        return np.flatnonzero(self.edge_counts == 2)

    @cached_property
    def boundary_halfedges(self) -> np.ndarray:
        return np.flatnonzero(self.twin < 0)

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.src[self.boundary_halfedges])

    @cached_property
    def is_boundary_vertex(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = True
        return mask

    def ccw_next(self, h: int) -> int:
        """Corner following ``h`` counterclockwise around its vertex, or -1 at the boundary."""
        f, k = divmod(int(h), 3)
        return int(self.twin[3 * f + (k + 2) % 3])

    def ccw_prev(self, h: int) -> int:
        t = int(self.twin[h])
        if t < 0:
            return -1
        f, k = divmod(t, 3)
        return 3 * f + (k + 1) % 3

    @cached_property
    def corners_of_vertex(self) -> list[np.ndarray]:
        order = np.argsort(self.src, kind="stable")
        bounds = np.searchsorted(self.src[order], np.arange(self.n_vertices + 1))
        return [order[bounds[v]:bounds[v + 1]] for v in range(self.n_vertices)]

    def fan(self, v: int) -> list[int]:
        """Corners at ``v`` in counterclockwise order.

        For a boundary vertex the fan starts at the corner whose incoming edge lies
        on the boundary; for an interior vertex it is a cycle starting anywhere.
        """
        corners = self.corners_of_vertex[v]
        if len(corners) == 0:
            return []
        start = int(corners[0])
        while True:
            prev = self.ccw_prev(start)
            if prev < 0 or prev == int(corners[0]):
                break
            start = prev
        out = [start]
        h = self.ccw_next(start)
        while h >= 0 and h != start:
            out.append(h)
            h = self.ccw_next(h)
        return out

    def boundary_loops(self) -> list[list[int]]:
        nxt = {int(self.src[h]): int(self.dst[h]) for h in self.boundary_halfedges}
        loops: list[list[int]] = []
        seen: set[int] = set()
        for start in sorted(nxt):
            if start in seen:
                continue
            loop = [start]
            seen.add(start)
            v = nxt[start]
            while v != start:
                loop.append(v)
                seen.add(v)
                v = nxt[v]
            loops.append(loop)
        return loops


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        f = np.array(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise InputError(f"vertices must have shape (n, 2), got {v.shape}")
        if f.size == 0:
            f = f.reshape(0, 3)
        if f.ndim != 2 or f.shape[1] != 3:
            raise InputError(f"faces must have shape (m, 3), got {f.shape}")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def topology(self) -> MeshTopology:
        return MeshTopology(self.faces, self.n_vertices)

    @cached_property
    def face_areas(self) -> np.ndarray:
        return face_signed_areas(self.vertices, self.faces)

    def with_vertices(self, points: np.ndarray) -> TriMesh:
        """Same connectivity, new positions."""
        points = np.asarray(points, dtype=float)
        if points.shape != self.vertices.shape:
            raise InputError(
                f"expected {self.vertices.shape} vertex positions, got {points.shape}"
            )
        moved = TriMesh(points, self.faces)
        if "topology" in self.__dict__:
            moved.__dict__["topology"] = self.__dict__["topology"]
        return moved

    @property
    def edges(self) -> np.ndarray:
        return self.topology.edges

    @property
    def boundary_vertices(self) -> np.ndarray:
        return self.topology.boundary_vertices

    def boundary_loops(self) -> list[list[int]]:
        return self.topology.boundary_loops()


class Problem(NamedTuple):
    check: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    problems: tuple[Problem, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.problems

    @property
    def checks(self) -> set[str]:
        return {p.check for p in self.problems}

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(f"{p.check}: {p.message}" for p in self.problems)


def _index_problems(mesh: TriMesh) -> list[Problem]:
    f = mesh.faces
    problems = []
    if mesh.n_faces == 0:
        return [Problem("indices", "mesh has no faces")]
    bad = np.flatnonzero(((f < 0) | (f >= mesh.n_vertices)).any(axis=1))
    if len(bad):
        problems.append(Problem("indices", f"face {bad[0]} references a missing vertex"))
    repeated = np.flatnonzero((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2]))
    if len(repeated):
        problems.append(Problem("indices", f"face {repeated[0]} repeats a vertex"))
    return problems


def validate(mesh: TriMesh, allow_reversed: bool = False) -> ValidationReport:
    """Check every structural invariant and report all failures.

    With ``allow_reversed`` negatively oriented faces are accepted (a folded
    surface used as the domain of an unfolding); zero-area faces never are.
    """
    problems = _index_problems(mesh)
    if problems:
        return ValidationReport(tuple(problems))

    topo = mesh.topology
    pairs = topo.src * mesh.n_vertices + topo.dst
    uniq, counts = np.unique(pairs, return_counts=True)
    for key in uniq[counts > 1][:5]:
        a, b = divmod(int(key), mesh.n_vertices)
        problems.append(Problem("orientation", f"inconsistent orientation at edge ({a}, {b})"))
    for eid in np.flatnonzero(topo.edge_counts > 2)[:5]:
        a, b = topo.edges[eid]
        problems.append(Problem("manifold", f"edge ({a}, {b}) is shared by more than two faces"))

    areas = mesh.face_areas
    degenerate = degenerate_faces(mesh.vertices, mesh.faces)
    if len(degenerate):
        problems.append(Problem("positivity", f"face {degenerate[0]} has zero area"))
    if not allow_reversed:
        flipped = np.setdiff1d(np.flatnonzero(areas < 0), degenerate)
        if len(flipped):
            problems.append(
                Problem("positivity", f"face {flipped[0]} has negative signed area")
            )

    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[mesh.faces.reshape(-1)] = True
    if not used.all():
        problems.append(
            Problem("unreferenced", f"vertex {np.flatnonzero(~used)[0]} belongs to no face")
        )

    interior = topo.interior_edge_ids
    fa, fb = topo.edge_faces[interior, 0], topo.edge_faces[interior, 1]
    adj = sparse.coo_matrix(
        (np.ones(len(interior)), (fa, fb)), shape=(mesh.n_faces, mesh.n_faces)
    )
    n_comp, _ = connected_components(adj, directed=False)
    if n_comp > 1:
        problems.append(Problem("connectivity", f"mesh has {n_comp} edge-connected components"))

    # corners around one vertex must form a single edge-connected fan
    h = np.arange(3 * mesh.n_faces)
    k = h % 3
    nxt = topo.twin[h - k + (k + 2) % 3]
    linked = nxt >= 0
    corner_graph = sparse.coo_matrix(
        (np.ones(linked.sum()), (h[linked], nxt[linked])), shape=(len(h), len(h))
    )
    _, labels = connected_components(corner_graph, directed=False)
    fans = np.unique(topo.src * len(h) + labels)
    per_vertex = np.bincount(fans // len(h), minlength=mesh.n_vertices)
    pinched = np.flatnonzero(per_vertex > 1)
    if len(pinched):
        problems.append(
            Problem("dangling", f"vertex {pinched[0]} joins faces that share no edge (dangling triangles)")
        )
    return ValidationReport(tuple(problems))


def read_obj(path: str | os.PathLike) -> TriMesh:
    """Read a planar OBJ triangle mesh without checking its structure."""
    try:
        data = meshio.read(path, file_format="obj")
    except meshio.ReadError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: cannot parse ({exc})") from exc

    points = np.asarray(data.points, dtype=float)
    if points.size == 0:
        raise FormatError(f"{path}: no vertices")
    if points.ndim != 2 or points.shape[1] not in (2, 3, 4):
        raise FormatError(f"{path}: malformed vertex lines")
    if points.shape[1] >= 3:
        lifted = np.flatnonzero(np.abs(points[:, 2]) > OBJ_Z_TOL)
        if len(lifted):
            v = int(lifted[0])
            raise FormatError(
                f"{path}: vertex {v + 1} has z = {float(points[v, 2])!r}; only planar meshes are supported"
            )

    blocks = []
    for block in data.cells:
        if block.type != "triangle":
            corners = np.asarray(block.data).shape[-1] if len(block.data) else 0
            raise FormatError(f"{path}: face with {corners} vertices; only triangles are supported")
        blocks.append(np.asarray(block.data, dtype=np.int64))
    faces = np.concatenate(blocks) if blocks else np.empty((0, 3), dtype=np.int64)
    return TriMesh(points[:, :2].copy(), faces.reshape(-1, 3))


def load_mesh(path: str | os.PathLike, allow_reversed: bool = False) -> TriMesh:
    mesh = read_obj(path)
    report = validate(mesh, allow_reversed=allow_reversed)
    if not report.ok:
        raise MeshError([f"{p.check}: {p.message}" for p in report.problems])
    logger.debug("loaded %s: %d vertices, %d faces", path, mesh.n_vertices, mesh.n_faces)
    return mesh


def save_mesh(mesh: TriMesh, path: str | os.PathLike) -> None:
    """Write ``mesh`` as OBJ with z = 0; coordinates keep their full float64 precision."""
    points = np.column_stack([mesh.vertices, np.zeros(mesh.n_vertices)])
    out = meshio.Mesh(points, [("triangle", np.asarray(mesh.faces, dtype=np.int64))])
    with atomic_target(path, suffix=".obj") as tmp:
        meshio.write(tmp, out, file_format="obj")


def signed_area(mesh: TriMesh, embedding: np.ndarray) -> float:
    points = np.asarray(embedding, dtype=float)
    if points.shape != (mesh.n_vertices, 2):
        raise InputError(
            f"embedding has shape {points.shape}, mesh has {mesh.n_vertices} vertices"
        )
    return float(np.sum(face_signed_areas(points, mesh.faces)))


def polygon_area(points: np.ndarray, loop: list[int]) -> float:
    """Shoelace area of a vertex loop (positive when counterclockwise)."""
    p = points[loop]
    q = np.roll(p, -1, axis=0)
    return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))


@dataclass(frozen=True, eq=False)
class PinSet:
    """Hard positional constraints: vertex index -> target point."""

    indices: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        tgt = np.asarray(self.targets, dtype=float).reshape(-1, 2)
        if len(idx) != len(tgt):
            raise PinError(f"{len(idx)} pin indices but {len(tgt)} targets")
        if len(np.unique(idx)) != len(idx):
            raise PinError("a vertex is pinned more than once")
        order = np.argsort(idx, kind="stable")
        idx, tgt = idx[order], tgt[order]
        idx.setflags(write=False)
        tgt.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "targets", tgt)

    @classmethod
    def from_mapping(cls, entries: Mapping[int, tuple[float, float]]) -> PinSet:
        keys = sorted(entries)
        return cls(np.array(keys, dtype=np.int64), np.array([entries[k] for k in keys], dtype=float))

    @classmethod
    def in_place(cls, mesh: TriMesh, vertices) -> PinSet:
        """Pin the given vertices to their current positions."""
        idx = np.asarray(vertices, dtype=np.int64)
        return cls(idx, mesh.vertices[idx])

    def __len__(self) -> int:
        return len(self.indices)

    def as_dict(self) -> dict[int, tuple[float, float]]:
        return {int(i): (float(x), float(y)) for i, (x, y) in zip(self.indices, self.targets)}

    def check(self, mesh: TriMesh) -> None:
        if len(self) < 2:
            raise PinError(f"at least 2 pins are required, got {len(self)}")
        bad = self.indices[(self.indices < 0) | (self.indices >= mesh.n_vertices)]
        if len(bad):
            raise PinError(f"pinned vertex {bad[0]} does not exist (mesh has {mesh.n_vertices})")
        if not np.all(np.isfinite(self.targets)):
            raise PinError("pin targets must be finite")
