"""Fold colorings and what can be read off them.

A coloring labels every face +1 (orientation kept) or -1 (orientation reversed).
Interior edges between differently labelled faces form the singular set; its
vertices are folding points (two sectors) or cusps (2n sectors).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from qcfold.coeff import INF, BeltramiField, face_coefficients
from qcfold.errors import ColoringError, InputError
from qcfold.mesh import DEGENERATE_AREA_RTOL, TriMesh, face_signed_areas

logger = logging.getLogger(__name__)

MAX_DAMPING_STEPS = 40


@dataclass(frozen=True, eq=False)
class FoldColoring:
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise ColoringError(f"coloring must be a flat list of labels, got shape {labels.shape}")
        bad = np.flatnonzero((labels != 1) & (labels != -1))
        if len(bad):
            raise ColoringError(f"face {bad[0]} has label {labels[bad[0]].item()!r}; labels must be +1 or -1")
        labels = labels.astype(np.int8)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    def check_faces(self, n_faces: int) -> None:
        if len(self) != n_faces:
            raise ColoringError(f"coloring has {len(self)} labels but the mesh has {n_faces} faces")

    @property
    def negative(self) -> np.ndarray:
        return self.labels < 0


@dataclass(frozen=True)
class SingularVertexClass:
    folding: tuple[int, ...] = ()
    cusps: dict[int, int] = field(default_factory=dict)
    boundary: tuple[int, ...] = ()

    def kind(self, vertex: int) -> str | None:
        if vertex in self.cusps:
            return f"cusp({self.cusps[vertex]})"
        if vertex in self.folding:
            return "folding"
        if vertex in self.boundary:
            return "boundary"
        return None

    @property
    def interior(self) -> list[int]:
        return sorted([*self.folding, *self.cusps])

    def as_dict(self) -> dict:
        return {
            "folding": list(self.folding),
            "cusps": {str(v): n for v, n in sorted(self.cusps.items())},
            "boundary": list(self.boundary),
        }


def coloring_from_field(field: BeltramiField) -> FoldColoring:
    return FoldColoring(np.where(field.is_reversed, -1, 1))


def fold_field(coloring: FoldColoring) -> BeltramiField:
    """mu = 0 on + faces and infinity on - faces."""
    return BeltramiField(np.where(coloring.labels > 0, 0j, INF))


def _singular_edge_ids(mesh: TriMesh, coloring: FoldColoring) -> np.ndarray:
    coloring.check_faces(mesh.n_faces)
    topo = mesh.topology
    interior = topo.interior_edge_ids
    fa, fb = topo.edge_faces[interior, 0], topo.edge_faces[interior, 1]
    return interior[coloring.labels[fa] != coloring.labels[fb]]


def singular_edges(mesh: TriMesh, coloring: FoldColoring) -> np.ndarray:
    """Singular edges as sorted vertex pairs, shape (k, 2)."""
    return mesh.topology.edges[_singular_edge_ids(mesh, coloring)]


def _singular_degree(mesh: TriMesh, coloring: FoldColoring) -> np.ndarray:
    edges = singular_edges(mesh, coloring)
    return np.bincount(edges.reshape(-1), minlength=mesh.n_vertices)


def classify_singular_vertices(mesh: TriMesh, coloring: FoldColoring) -> SingularVertexClass:
    degree = _singular_degree(mesh, coloring)
    on_boundary = mesh.topology.is_boundary_vertex
    folding, cusps, boundary = [], {}, []
    for v in np.flatnonzero(degree):
        v = int(v)
        if on_boundary[v]:
            boundary.append(v)
        elif degree[v] % 2:
            raise ColoringError(
                f"vertex {v} has {degree[v]} singular sectors; an interior vertex needs an even count"
            )
        elif degree[v] == 2:
            folding.append(v)
        else:
            cusps[v] = int(degree[v]) // 2
    return SingularVertexClass(tuple(folding), cusps, tuple(boundary))


def _corner_angle(points: np.ndarray, a: int, b: int, c: int) -> float:
    """Angle at ``a`` between rays to ``b`` and ``c``."""
    u = points[b] - points[a]
    w = points[c] - points[a]
    return math.atan2(abs(u[0] * w[1] - u[1] * w[0]), float(u @ w))


def sector_angles(mesh: TriMesh, coloring: FoldColoring, vertex: int) -> list[float]:
    """Angles between consecutive singular edges around an interior vertex.

    Counterclockwise, starting from the singular edge whose direction makes the
    smallest angle in [0, 2pi) with the +x axis.
    """
    coloring.check_faces(mesh.n_faces)
    topo = mesh.topology
    if not 0 <= vertex < mesh.n_vertices:
        raise InputError(f"no vertex {vertex}")
    if topo.is_boundary_vertex[vertex]:
        raise InputError(f"vertex {vertex} is on the boundary")
    fan = topo.fan(vertex)
    faces = mesh.faces
    pts = mesh.vertices
    angles, after_singular, directions = [], [], []
    for i, c in enumerate(fan):
        f, k = divmod(c, 3)
        nxt, prv = int(faces[f, (k + 1) % 3]), int(faces[f, (k + 2) % 3])
        angles.append(_corner_angle(pts, vertex, nxt, prv))
        following = fan[(i + 1) % len(fan)] // 3
        after_singular.append(coloring.labels[f] != coloring.labels[following])
        d = pts[prv] - pts[vertex]
        directions.append(math.atan2(d[1], d[0]) % (2 * math.pi))
    cuts = [i for i, s in enumerate(after_singular) if s]
    if not cuts:
        raise InputError(f"vertex {vertex} is not singular")
    first = min(range(len(cuts)), key=lambda j: directions[cuts[j]])
    cuts = cuts[first:] + cuts[:first]
    sectors = []
    for j, start in enumerate(cuts):
        stop = cuts[(j + 1) % len(cuts)]
        total, i = 0.0, start
        while True:
            i = (i + 1) % len(fan)
            total += angles[i]
            if i == stop:
                break
        sectors.append(total)
    return sectors


def kawasaki_defect(mesh: TriMesh, coloring: FoldColoring, vertex: int) -> float:
    """Alternating sum -a1 + a2 - a3 + ... of the sector angles, in radians."""
    sectors = sector_angles(mesh, coloring, vertex)
    return float(sum((-1) ** (i + 1) * a for i, a in enumerate(sectors)))


def kawasaki_defects(mesh: TriMesh, coloring: FoldColoring) -> dict[int, float]:
    classes = classify_singular_vertices(mesh, coloring)
    return {v: kawasaki_defect(mesh, coloring, v) for v in classes.interior}


def max_distortion(mesh: TriMesh, image: np.ndarray, coloring: FoldColoring) -> float:
    """max(|mu| over + faces, 1/|mu| over - faces); 0 for an exact flat fold."""
    coloring.check_faces(mesh.n_faces)
    abs_mu = np.abs(face_coefficients(mesh.vertices, mesh.faces, image))
    with np.errstate(divide="ignore"):
        per_face = np.where(coloring.labels > 0, abs_mu, 1.0 / abs_mu)
    return float(per_face.max())


def folding_lines(mesh: TriMesh, coloring: FoldColoring) -> list[list[int]]:
    """Maximal chains of folding points, each running between two junctions.

    Junctions are cusps and boundary vertices. Closed fold curves without a junction
    are skipped.
    """
    edges = singular_edges(mesh, coloring)
    degree = np.bincount(edges.reshape(-1), minlength=mesh.n_vertices)
    junction = (degree > 0) & ((degree != 2) | mesh.topology.is_boundary_vertex)
    neighbours: dict[int, list[int]] = {}
    for a, b in edges:
        neighbours.setdefault(int(a), []).append(int(b))
        neighbours.setdefault(int(b), []).append(int(a))
    for nbrs in neighbours.values():
        nbrs.sort()

    chains: list[list[int]] = []
    used: set[tuple[int, int]] = set()
    for start in np.flatnonzero(junction):
        start = int(start)
        for nxt in neighbours[start]:
            if (start, nxt) in used:
                continue
            chain, prev, cur = [start], start, nxt
            used.add((start, nxt))
            while True:
                chain.append(cur)
                if junction[cur]:
                    used.add((cur, prev))
                    break
                a, b = neighbours[cur]
                prev, cur = cur, (b if a == prev else a)
            chains.append(chain)
    loose = set(neighbours) - {v for c in chains for v in c}
    if loose:
        logger.debug("skipping %d vertices on closed fold curves", len(loose))
    return chains


def _straightened_targets(points: np.ndarray, chains: list[list[int]]) -> np.ndarray:
    target = points.copy()
    for chain in chains:
        if len(chain) < 3 or chain[0] == chain[-1]:
            continue
        a, b = points[chain[0]], points[chain[-1]]
        ab = b - a
        inner = np.array(chain[1:-1])
        t = np.clip(((points[inner] - a) @ ab) / float(ab @ ab), 0.0, 1.0)
        target[inner] = a + t[:, None] * ab
    return target


def straighten_folding_lines(mesh: TriMesh, coloring: FoldColoring) -> TriMesh:
    """Move every folding line onto the segment joining its end points.

    If the full move would invert or collapse a face, the move is halved until
    it does not.
    """
    chains = folding_lines(mesh, coloring)
    points = mesh.vertices
    move = _straightened_targets(points, chains) - points
    if not np.any(move):
        return mesh
    before = np.sign(mesh.face_areas)
    factor = 1.0
    for _ in range(MAX_DAMPING_STEPS):
        moved = points + factor * move
        areas = face_signed_areas(moved, mesh.faces)
        tri = moved[mesh.faces]
        e = tri[:, [1, 2, 0]] - tri
        longest = np.max(np.sum(e * e, axis=2), axis=1)
        if np.all(np.sign(areas) == before) and np.all(np.abs(areas) > DEGENERATE_AREA_RTOL * longest):
            break
        factor *= 0.5
    else:
        logger.warning("folding lines left in place: every damped move inverts a face")
        return mesh
    if factor < 1.0:
        logger.warning("straightening damped by factor %g to avoid inverting faces", factor)
    logger.info("straightened %d folding line(s)", len(chains))
    return mesh.with_vertices(moved)
