"""Sparse assembly of M = diag(L_mu, L_mu) - 2 * AreaMatrix.

Stacked unknowns are x = (u_0..u_{n-1}, v_0..v_{n-1}). The element matrices of
L_mu are cotangent weights of each face after the transform v' = P^{-1} v, with
P built from the reduced coefficient. The area matrix carries a per-face sign:
in generalized mode faces with |mu| > 1 (or infinity) count their image area
negatively, which turns the fold faces into an unsigned-area term.
"""
from __future__ import annotations

import io
import logging
import os
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.io
from scipy import sparse

from qcfold.coeff import BeltramiField, reduce_coefficient
from qcfold.errors import DegenerateFaceError, InputError
from qcfold.fsutil import atomic_write_text
from qcfold.mesh import DEGENERATE_AREA_RTOL, TriMesh

logger = logging.getLogger(__name__)


class Mode(str, Enum):
    SIGNED = "signed"
    GENERALIZED = "generalized"


def _apply_inverse_p(tri: np.ndarray, mu_star: np.ndarray) -> np.ndarray:
    rho = mu_star.real[:, None]
    tau = mu_star.imag[:, None]
    s = 1.0 / np.sqrt(1.0 - np.abs(mu_star) ** 2)[:, None]
    x, y = tri[..., 0], tri[..., 1]
    return np.stack([s * ((1.0 + rho) * x + tau * y), s * (tau * x + (1.0 - rho) * y)], axis=-1)


def transformed_triangle(tri, mu: complex) -> tuple[np.ndarray, bool]:
    tri = np.asarray(tri, dtype=float).reshape(3, 2)
    mu_star, reversed_ = reduce_coefficient(mu)
    out = _apply_inverse_p(tri[None], np.array([mu_star]))[0]
    _element_matrices(out[None], np.array([0]))
    return out, reversed_


def _element_matrices(tri: np.ndarray, face_ids: np.ndarray) -> np.ndarray:
    """(e_i . e_j) / (4 |A|) for a stack of triangles, e_i the edge opposite vertex i."""
    e = tri[:, [2, 0, 1]] - tri[:, [1, 2, 0]]
    area = 0.5 * np.abs(e[:, 1, 0] * e[:, 2, 1] - e[:, 1, 1] * e[:, 2, 0])
    longest = np.max(np.sum(e * e, axis=2), axis=1)
    bad = np.flatnonzero(area <= DEGENERATE_AREA_RTOL * longest)
    if len(bad):
        raise DegenerateFaceError("degenerate triangle", face_ids[bad])
    return np.einsum("fik,fjk->fij", e, e) / (4.0 * area)[:, None, None]


def cotangent_weights(tri_prime) -> np.ndarray:
    tri_prime = np.asarray(tri_prime, dtype=float).reshape(1, 3, 2)
    return _element_matrices(tri_prime, np.array([0]))[0]


def _mesh_elements(mesh: TriMesh, field: BeltramiField) -> tuple[np.ndarray, np.ndarray]:
    field.check_faces(mesh.n_faces)
    mu_star, reversed_ = field.reduced()
    tri = _apply_inverse_p(mesh.vertices[mesh.faces], mu_star)
    return _element_matrices(tri, np.arange(mesh.n_faces)), reversed_


def _scatter_laplacian(mesh: TriMesh, elements: np.ndarray) -> sparse.csr_matrix:
    rows = np.repeat(mesh.faces, 3, axis=1).reshape(-1)
    cols = np.tile(mesh.faces, (1, 3)).reshape(-1)
    n = mesh.n_vertices
    L = sparse.coo_matrix((elements.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    return (0.5 * (L + L.T)).tocsr()


def assemble_laplacian(mesh: TriMesh, field: BeltramiField) -> sparse.csr_matrix:
    elements, _ = _mesh_elements(mesh, field)
    return _scatter_laplacian(mesh, elements)


def face_signs(mesh: TriMesh, field: BeltramiField, mode: Mode | str) -> np.ndarray:
    """s_T = sigma_T * sign(domain area); sigma_T = -1 only for reversed faces in generalized mode."""
    mode = Mode(mode)
    field.check_faces(mesh.n_faces)
    sigma = np.ones(mesh.n_faces)
    if mode is Mode.GENERALIZED:
        sigma[field.is_reversed] = -1.0
    return sigma * np.sign(mesh.face_areas)


def _scatter_area(mesh: TriMesh, signs: np.ndarray) -> sparse.csr_matrix:
    n = mesh.n_vertices
    i = mesh.faces.reshape(-1)
    j = mesh.faces[:, [1, 2, 0]].reshape(-1)
    w = np.repeat(signs, 3) / 4.0
    rows = np.concatenate([i, n + j, j, n + i])
    cols = np.concatenate([n + j, i, n + i, j])
    data = np.concatenate([w, w, -w, -w])
    area = sparse.coo_matrix((data, (rows, cols)), shape=(2 * n, 2 * n)).tocsr()
    area.eliminate_zeros()
    return area


def assemble_area_matrix(mesh: TriMesh, field: BeltramiField, mode: Mode | str) -> sparse.csr_matrix:
    return _scatter_area(mesh, face_signs(mesh, field, mode))


@dataclass(frozen=True, eq=False)
class SparseSymmetricSystem:
    matrix: sparse.csr_matrix
    laplacian: sparse.csr_matrix
    area: sparse.csr_matrix
    elements: np.ndarray
    face_signs: np.ndarray
    mode: Mode

    @property
    def n_vertices(self) -> int:
        return self.laplacian.shape[0]

    def quadratic(self, x: np.ndarray) -> float:
        """0.5 * x^T M x for stacked x = (u; v)."""
        x = np.asarray(x, dtype=float).reshape(-1)
        return 0.5 * float(x @ (self.matrix @ x))


def assemble_system(mesh: TriMesh, field: BeltramiField, mode: Mode | str) -> SparseSymmetricSystem:
    mode = Mode(mode)
    elements, _ = _mesh_elements(mesh, field)
    L = _scatter_laplacian(mesh, elements)
    signs = face_signs(mesh, field, mode)
    area = _scatter_area(mesh, signs)
    M = sparse.block_diag([L, L], format="csr") - 2.0 * area
    M = (0.5 * (M + M.T)).tocsr()
    M.sort_indices()
    logger.debug(
        "assembled %s system: %d unknowns, %d nonzeros", mode.value, M.shape[0], M.nnz
    )
    return SparseSymmetricSystem(
        matrix=M, laplacian=L, area=area, elements=elements, face_signs=signs, mode=mode
    )


def dump_matrix_market(system: SparseSymmetricSystem, path: str | os.PathLike, which: str = "matrix") -> None:
    """Write one of the assembled matrices (matrix, laplacian or area) in MatrixMarket format."""
    if which not in ("matrix", "laplacian", "area"):
        raise InputError(f"unknown matrix {which!r}; expected matrix, laplacian or area")
    buf = io.BytesIO()
    scipy.io.mmwrite(buf, getattr(system, which), comment=f"qcfold {which} ({system.mode.value})")
    atomic_write_text(path, buf.getvalue().decode("ascii"))
