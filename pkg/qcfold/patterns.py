"""Miura-ori crease patterns, conformal perturbations of them, and foldability repair."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial

from qcfold.assembly import Mode
from qcfold.errors import DegenerateFaceError, InputError
from qcfold.foldconfig import FoldColoring, fold_field, max_distortion
from qcfold.mesh import PinSet, TriMesh, degenerate_faces, face_signed_areas
from qcfold.reinforce import IterationLog, IterationRow, unfold_step
from qcfold.solver import SolveResult, energy, loss, lsqc_solve

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MiuraSpec:
    """A Miura-ori sheet of ``rows`` x ``cols`` cells; each cell is 2 x 2 parallelogram panels.

    ``angle`` is the acute angle (radians) between the zigzag creases and the
    straight horizontal ones.
    """

    rows: int
    cols: int
    cell_width: float = 1.0
    cell_height: float = 1.0
    angle: float = math.radians(60.0)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InputError(f"need at least 1 x 1 cells, got {self.rows} x {self.cols}")
        if not (self.cell_width > 0 and self.cell_height > 0):
            raise InputError("cell width and height must be positive")
        if not 0.0 < self.angle < math.pi / 2:
            raise InputError(f"angle must lie in (0, 90) degrees, got {math.degrees(self.angle):.6g}")
        if self.shift >= self.panel_width:
            raise InputError(
                f"angle {math.degrees(self.angle):.6g} deg is too shallow for cell "
                f"{self.cell_width:g} x {self.cell_height:g}: panels would overlap"
            )

    @property
    def panel_width(self) -> float:
        return self.cell_width / 2.0

    @property
    def panel_height(self) -> float:
        return self.cell_height / 2.0

    @property
    def shift(self) -> float:
        """Horizontal offset of odd rows of vertices."""
        return self.panel_height / math.tan(self.angle)


def miura_pattern(spec: MiuraSpec) -> tuple[TriMesh, FoldColoring]:
    nx, ny = 2 * spec.cols, 2 * spec.rows
    i, j = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    x = i * spec.panel_width + (j % 2) * spec.shift
    y = j * spec.panel_height
    vertices = np.column_stack([x.reshape(-1), y.reshape(-1)])

    pi, pj = np.meshgrid(np.arange(nx), np.arange(ny))
    pi, pj = pi.reshape(-1), pj.reshape(-1)
    a = pj * (nx + 1) + pi
    b = a + 1
    c = a + nx + 2
    d = a + nx + 1
    faces = np.empty((2 * len(a), 3), dtype=np.int64)
    faces[0::2] = np.column_stack([a, b, c])
    faces[1::2] = np.column_stack([a, c, d])
    colors = np.repeat(np.where((pi + pj) % 2 == 0, 1, -1), 2)

    mesh = TriMesh(vertices, faces)
    logger.info(
        "miura pattern %dx%d cells: %d vertices, %d faces", spec.rows, spec.cols, mesh.n_vertices, mesh.n_faces
    )
    return mesh, FoldColoring(colors)


def compose_conformal(mesh: TriMesh, poly: Sequence[complex]) -> TriMesh:
    """Replace every vertex z by poly(z); coefficients in ascending order."""
    coeffs = np.asarray(poly, dtype=complex)
    if coeffs.ndim != 1 or len(coeffs) == 0:
        raise InputError("polynomial needs at least one coefficient")
    z = mesh.vertices[:, 0] + 1j * mesh.vertices[:, 1]
    w = polynomial.polyval(z, coeffs)
    points = np.column_stack([w.real, w.imag])
    bad = np.union1d(
        np.flatnonzero(face_signed_areas(points, mesh.faces) <= 0), degenerate_faces(points, mesh.faces)
    )
    if len(bad):
        raise DegenerateFaceError("conformal map inverts or collapses faces", bad)
    return mesh.with_vertices(points)


def edge_pins(mesh: TriMesh) -> PinSet:
    """End points of the longest boundary edge, pinned where they are.

    Both pins lie on one face, so they stay distinct in any flat fold.
    """
    topo = mesh.topology
    h = topo.boundary_halfedges
    src, dst = topo.src[h], topo.dst[h]
    length = np.linalg.norm(mesh.vertices[dst] - mesh.vertices[src], axis=1)
    best = int(np.argmax(length))
    return PinSet.in_place(mesh, [src[best], dst[best]])


def fold_pattern(mesh: TriMesh, coloring: FoldColoring, pins: PinSet | None = None) -> SolveResult:
    return lsqc_solve(mesh, fold_field(coloring), pins or edge_pins(mesh), Mode.GENERALIZED)


def repair_flat_foldability(
    mesh: TriMesh, coloring: FoldColoring, tol: float, itermax: int
) -> tuple[TriMesh, IterationLog]:
    """Fold, measure, unfold with the boundary held in place; repeat until foldable.

    The unfold step pins the boundary to the current domain's positions, so the
    interior drifts toward a flat-foldable configuration while the outline stays.
    """
    if tol < 0:
        raise InputError(f"tolerance must be >= 0, got {tol}")
    if itermax < 0:
        raise InputError(f"itermax must be >= 0, got {itermax}")
    coloring.check_faces(mesh.n_faces)
    log = IterationLog()
    domain = mesh
    for n in range(1, itermax + 1):
        started = time.perf_counter()
        fold = fold_pattern(domain, coloring)
        distortion = max_distortion(domain, fold.image, coloring)
        row = IterationRow(
            iter=n,
            energy=energy(domain, fold.image, coloring),
            loss=loss(domain, fold.image, coloring),
            max_distortion=distortion,
            seconds=time.perf_counter() - started,
        )
        log.append(row)
        logger.info("repair %d: max_distortion=%.3e", n, distortion)
        if distortion <= tol or n == itermax:
            break
        shape = PinSet.in_place(domain, domain.boundary_vertices)
        domain = domain.with_vertices(unfold_step(fold, coloring, shape).image)
    return domain, log
