"""Pin-constrained solves of Mx = 0 and the energies used to judge them."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.sparse.linalg import splu
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist, squareform

from qcfold.assembly import Mode, assemble_system
from qcfold.coeff import BeltramiField, affine_derivatives, face_coefficients
from qcfold.config import get_settings
from qcfold.errors import InputError, SolverError
from qcfold.foldconfig import FoldColoring, coloring_from_field
from qcfold.mesh import PinSet, TriMesh

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SolveResult:
    domain: TriMesh
    image: np.ndarray
    residual: float
    energy: float
    mu: np.ndarray
    mode: Mode
    pins: PinSet

    def as_mesh(self) -> TriMesh:
        """The image as a mesh on the domain's faces (may overlap itself)."""
        return self.domain.with_vertices(self.image)

    def report(self) -> dict[str, Any]:
        finite = self.mu[np.isfinite(self.mu)]
        abs_mu = np.abs(finite)
        return {
            "mode": self.mode.value,
            "vertices": self.domain.n_vertices,
            "faces": self.domain.n_faces,
            "pins": len(self.pins),
            "residual": float(self.residual),
            "energy": float(self.energy),
            "mu_stats": {
                "max_abs_finite": float(abs_mu.max()) if len(abs_mu) else None,
                "mean_abs_finite": float(abs_mu.mean()) if len(abs_mu) else None,
                "infinite": int(np.isinf(self.mu).sum()),
                "collapsed": int(np.isnan(self.mu).sum()),
            },
        }


def default_pins(mesh: TriMesh) -> PinSet:
    """Two boundary vertices at maximal distance, pinned where they are."""
    boundary = mesh.boundary_vertices
    points = mesh.vertices[boundary]
    hull = np.sort(ConvexHull(points).vertices)
    dist = squareform(pdist(points[hull]))
    a, b = np.unravel_index(np.argmax(dist), dist.shape)
    return PinSet.in_place(mesh, boundary[hull[[a, b]]])


def stack(points: np.ndarray) -> np.ndarray:
    """(n, 2) points -> stacked (u; v) vector."""
    points = np.asarray(points, dtype=float)
    return np.concatenate([points[:, 0], points[:, 1]])


def lsqc_solve(
    mesh: TriMesh,
    field: BeltramiField,
    pins: PinSet,
    mode: Mode | str = Mode.SIGNED,
    tol: float | None = None,
) -> SolveResult:
    """Solve Mx = 0 with the pinned unknowns eliminated.

    ``mesh`` may carry negatively oriented faces (a folded surface being unfolded);
    the caller is responsible for its structural validity.
    """
    mode = Mode(mode)
    tol = get_settings().solver_tol if tol is None else tol
    pins.check(mesh)
    field.check_faces(mesh.n_faces)
    system = assemble_system(mesh, field, mode)

    n = mesh.n_vertices
    pinned = np.concatenate([pins.indices, pins.indices + n])
    free = np.ones(2 * n, dtype=bool)
    free[pinned] = False
    x = np.zeros(2 * n)
    x[pinned] = np.concatenate([pins.targets[:, 0], pins.targets[:, 1]])

    M = system.matrix
    M_free = M[free][:, free].tocsc()
    rhs = -(M[free][:, pinned] @ x[pinned])
    try:
        lu = splu(M_free)
    except RuntimeError as exc:
        raise SolverError(
            f"singular factorization ({exc}); suspected cause: fewer than 2 effective pins "
            "or a mesh that is not edge-connected"
        ) from exc
    logger.debug("factorized %d free unknowns: L nnz=%d, U nnz=%d", M_free.shape[0], lu.L.nnz, lu.U.nnz)
    x_free = lu.solve(rhs)
    if not np.all(np.isfinite(x_free)):
        raise SolverError("solution is not finite; the pinned system is singular")
    residual = float(np.linalg.norm(M_free @ x_free - rhs) / max(1.0, np.linalg.norm(rhs)))
    if residual > tol:
        raise SolverError(f"residual {residual:.3e} exceeds tolerance {tol:.1e}")
    x[free] = x_free

    image = np.column_stack([x[:n], x[n:]])
    result = SolveResult(
        domain=mesh,
        image=image,
        residual=residual,
        energy=system.quadratic(x),
        mu=face_coefficients(mesh.vertices, mesh.faces, image, strict=False),
        mode=mode,
        pins=pins,
    )
    logger.info(
        "lsqc solve: %d vertices, %d faces, mode=%s, residual=%.3e, energy=%.6g",
        n, mesh.n_faces, mode.value, residual, result.energy,
    )
    return result


def _labels(mesh: TriMesh, labels: FoldColoring | BeltramiField) -> np.ndarray:
    if isinstance(labels, BeltramiField):
        labels = coloring_from_field(labels)
    labels.check_faces(mesh.n_faces)
    return labels.labels


def energy(
    mesh: TriMesh,
    image: np.ndarray,
    labels: FoldColoring | BeltramiField,
    mode: Mode | str = Mode.GENERALIZED,
) -> float:
    """Conformal distortion of ``image``: area-weighted |f_zbar|^2 on + faces, |f_z|^2 on - faces.

    Uses the standard Wirtinger derivatives, so the identity measured on a
    unit-area - region gives 1. In signed mode every face counts as +.
    """
    mode = Mode(mode)
    image = np.asarray(image, dtype=float)
    if image.shape != mesh.vertices.shape:
        raise InputError(f"image has shape {image.shape}, mesh has {mesh.n_vertices} vertices")
    signs = _labels(mesh, labels)
    fz, fzbar = affine_derivatives(mesh.vertices, mesh.faces, image)
    if mode is Mode.SIGNED:
        density = np.abs(fzbar) ** 2
    else:
        density = np.where(signs > 0, np.abs(fzbar) ** 2, np.abs(fz) ** 2)
    return float(np.sum(np.abs(mesh.face_areas) * density) / 4.0)


def loss(mesh: TriMesh, image: np.ndarray, coloring: FoldColoring) -> float:
    """Scale-free distortion: sum of |mu|^2 over + faces and 1/|mu|^2 over - faces.

    A face whose map has the wrong orientation type entirely (mu = 0 on a - face,
    mu = infinity on a + face) makes the sum diverge; it is logged and +inf returned.
    """
    coloring.check_faces(mesh.n_faces)
    mu = face_coefficients(mesh.vertices, mesh.faces, image)
    abs_mu = np.abs(mu)
    plus = coloring.labels > 0
    with np.errstate(divide="ignore", over="ignore"):
        terms = np.where(plus, abs_mu**2, 1.0 / abs_mu**2)
    divergent = np.flatnonzero(np.isinf(terms))
    if len(divergent):
        logger.warning(
            "loss diverges on %d face(s) whose map contradicts the coloring: %s",
            len(divergent), ", ".join(str(f) for f in divergent[:20]),
        )
        return float("inf")
    return float(np.sum(terms))
