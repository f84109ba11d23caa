"""Beltrami coefficients on the Riemann sphere.

A coefficient is a Python ``complex``; the point at infinity is ``INF`` (any complex
with an infinite part is treated as infinity). Per-face fields are complex numpy
arrays with the same convention.

Complex derivatives use the unscaled forms

    f_zbar = (u_x - v_y) + i (u_y + v_x)
    f_z    = (u_x + v_y) + i (v_x - u_y)

so mu = f_zbar / f_z carries no factor of 1/2. Energies that need the standard
Wirtinger scaling apply it themselves.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from qcfold.errors import CoefficientError, DegenerateFaceError, InputError

DELTA_UNIT = 1e-6
INF = complex(math.inf, 0.0)

# |f_z| below this fraction of |f_zbar| counts as exactly anti-conformal
ANTI_CONFORMAL_RTOL = 1e-14
DEGENERATE_RTOL = 1e-14

# 2x2 real symmetric matrix with determinant 1
DistortionMatrix = np.ndarray


def check_admissible(mu: complex, face: int | None = None) -> complex:
    """Return ``mu`` as a complex (``INF`` for infinity) or raise if it sits on the equator."""
    mu = complex(mu)
    if cmath.isnan(mu):
        raise CoefficientError("mu is NaN", face)
    if cmath.isinf(mu):
        return INF
    if abs(abs(mu) - 1.0) < DELTA_UNIT:
        raise CoefficientError(
            f"|mu| = {abs(mu):.12g} is within {DELTA_UNIT:g} of the unit circle", face
        )
    return mu


def mu_to_A(mu: complex) -> DistortionMatrix:
    mu = check_admissible(mu)
    if cmath.isinf(mu):
        return -np.eye(2)
    rho, tau = mu.real, mu.imag
    scale = 1.0 / (1.0 - abs(mu) ** 2)
    return scale * np.array(
        [
            [(rho - 1.0) ** 2 + tau**2, -2.0 * tau],
            [-2.0 * tau, (1.0 + rho) ** 2 + tau**2],
        ]
    )


def mu_to_P(mu: complex) -> np.ndarray:
    """Symmetric square root factor of A: P^T P = A, det P = 1. Needs |mu| < 1."""
    mu = check_admissible(mu)
    if cmath.isinf(mu) or abs(mu) >= 1.0:
        raise CoefficientError(
            f"mu_to_P needs |mu| < 1, got |mu| = {abs(mu):.6g}; reduce the coefficient first"
        )
    rho, tau = mu.real, mu.imag
    scale = 1.0 / math.sqrt(1.0 - abs(mu) ** 2)
    return scale * np.array([[1.0 - rho, -tau], [-tau, 1.0 + rho]])


def reduce_coefficient(mu: complex) -> tuple[complex, bool]:
    """Map |mu| > 1 (and infinity) to 1/conj(mu), flagging the orientation reversal.

    Uses the identity -A(mu) = A(1/conj(mu)).
    """
    mu = check_admissible(mu)
    if cmath.isinf(mu):
        return 0j, True
    if abs(mu) > 1.0:
        return 1.0 / mu.conjugate(), True
    return mu, False


def reduce_field(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`reduce_coefficient` over an already admissible array."""
    values = np.asarray(values, dtype=complex)
    infinite = np.isinf(values)
    reversed_ = infinite | (np.abs(np.where(infinite, 0, values)) > 1.0)
    safe = np.where(reversed_ & ~infinite, values, 1.0)
    star = np.where(reversed_, 1.0 / np.conj(safe), values)
    star = np.where(infinite, 0j, star)
    return star, reversed_


def affine_derivatives(
    points: np.ndarray, faces: np.ndarray, image: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-face (f_z, f_zbar) of the piecewise-linear map ``points -> image``.

    Domain faces may have either orientation; degenerate ones raise.
    """
    tri = points[faces]
    e = tri[:, [2, 0, 1]] - tri[:, [1, 2, 0]]
    area2 = e[:, 1, 0] * e[:, 2, 1] - e[:, 1, 1] * e[:, 2, 0]
    longest = np.max(np.sum(e * e, axis=2), axis=1)
    bad = np.flatnonzero(np.abs(area2) <= 2.0 * DEGENERATE_RTOL * longest)
    if len(bad):
        raise DegenerateFaceError("degenerate domain triangle", bad)

    img = image[faces]
    u, v = img[:, :, 0], img[:, :, 1]
    gx = -e[:, :, 1] / area2[:, None]
    gy = e[:, :, 0] / area2[:, None]
    ux, uy = np.sum(u * gx, axis=1), np.sum(u * gy, axis=1)
    vx, vy = np.sum(v * gx, axis=1), np.sum(v * gy, axis=1)
    fz = (ux + vy) + 1j * (vx - uy)
    fzbar = (ux - vy) + 1j * (uy + vx)
    return fz, fzbar


def constant_image_faces(faces: np.ndarray, image: np.ndarray) -> np.ndarray:
    img = image[faces]
    span = np.max(np.abs(img - img[:, [1, 2, 0]]), axis=(1, 2))
    mag = np.max(np.abs(img), axis=(1, 2))
    return np.flatnonzero(span <= DEGENERATE_RTOL * mag)


def face_coefficients(
    points: np.ndarray, faces: np.ndarray, image: np.ndarray, strict: bool = True
) -> np.ndarray:
    """Beltrami coefficient of the affine map on every face, ``INF`` where anti-conformal.

    Faces whose image collapses to a point raise, or get NaN when ``strict`` is off.
    """
    points = np.asarray(points, dtype=float)
    image = np.asarray(image, dtype=float)
    faces = np.asarray(faces, dtype=np.int64)
    if image.shape != points.shape:
        raise InputError(f"image has shape {image.shape}, domain has {points.shape}")
    fz, fzbar = affine_derivatives(points, faces, image)
    constant = constant_image_faces(faces, image)
    if strict and len(constant):
        raise DegenerateFaceError("image triangle collapses to a point", constant)
    anti = np.abs(fz) <= ANTI_CONFORMAL_RTOL * np.abs(fzbar)
    mu = np.empty(len(faces), dtype=complex)
    mu[anti] = INF
    mu[~anti] = fzbar[~anti] / fz[~anti]
    mu[constant] = complex(math.nan, math.nan)
    return mu


def mu_of_map(domain_tri, image_tri) -> complex:
    domain_tri = np.asarray(domain_tri, dtype=float).reshape(3, 2)
    image_tri = np.asarray(image_tri, dtype=float).reshape(3, 2)
    mu = face_coefficients(domain_tri, np.array([[0, 1, 2]]), image_tri)[0]
    return INF if cmath.isinf(mu) else complex(mu)


def mu_from_metric(G, orientation: int) -> complex:
    """Coefficient of a map whose pulled-back metric is the unimodular ``G``."""
    G = np.asarray(G, dtype=float)
    if G.shape != (2, 2):
        raise InputError(f"metric must be 2x2, got {G.shape}")
    if orientation not in (1, -1):
        raise InputError(f"orientation must be +1 or -1, got {orientation!r}")
    q11, q12, q22 = G[0, 0], G[0, 1], G[1, 1]
    if abs(q12 - G[1, 0]) > 1e-9 * max(1.0, abs(q12)):
        raise CoefficientError("metric is not symmetric")
    det = float(np.linalg.det(G))
    if abs(det - 1.0) > 1e-9 or q11 <= 0:
        raise CoefficientError(f"metric must be positive definite with det 1, got det = {det:.12g}")
    num = complex(q11 - q22, 2.0 * q12)
    den = q11 + q22 + 2.0 * orientation
    # q11 + q22 >= 2 with equality only at the identity
    if abs(den) <= 1e-12 * (q11 + q22):
        return INF
    return num / den


def third_vertex_image(mu: complex, p) -> np.ndarray:
    """Image of ``p`` under the affine map with coefficient ``mu`` fixing (0,0) and (1,0)."""
    mu = check_admissible(mu)
    x, y = float(p[0]), float(p[1])
    if cmath.isinf(mu):
        return np.array([x, -y])
    rho, tau = mu.real, mu.imag
    d = (1.0 + rho) ** 2 + tau**2
    return np.array([x + 2.0 * tau / d * y, (1.0 - abs(mu) ** 2) / d * y])


@dataclass(frozen=True, eq=False)
class BeltramiField:
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=complex).reshape(-1)
        nan = np.flatnonzero(np.isnan(values))
        if len(nan):
            raise CoefficientError("mu is NaN", int(nan[0]))
        infinite = np.isinf(values)
        near = np.flatnonzero(~infinite & (np.abs(np.abs(np.where(infinite, 0, values)) - 1.0) < DELTA_UNIT))
        if len(near):
            check_admissible(values[near[0]], int(near[0]))
        values[infinite] = INF
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, n_faces: int, mu: complex) -> BeltramiField:
        return cls(np.full(n_faces, check_admissible(mu), dtype=complex))

    @classmethod
    def from_entries(cls, n_faces: int, entries: Mapping[int, complex]) -> BeltramiField:
        """Field with the given per-face values; faces not listed get mu = 0."""
        values = np.zeros(n_faces, dtype=complex)
        for face, mu in entries.items():
            if not 0 <= face < n_faces:
                raise CoefficientError(f"no such face (mesh has {n_faces})", face)
            values[face] = check_admissible(mu, face)
        return cls(values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def is_reversed(self) -> np.ndarray:
        return reduce_field(self.values)[1]

    def reduced(self) -> tuple[np.ndarray, np.ndarray]:
        return reduce_field(self.values)

    def check_faces(self, n_faces: int) -> None:
        if len(self) != n_faces:
            raise InputError(f"field has {len(self)} values but the mesh has {n_faces} faces")
