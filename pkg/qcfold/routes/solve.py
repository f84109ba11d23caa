from __future__ import annotations

import math
from contextlib import contextmanager
from typing import Literal, Optional, Union

import numpy as np
from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from qcfold.assembly import Mode
from qcfold.coeff import face_coefficients
from qcfold.errors import InputError, MeshError, NumericError
from qcfold.foldconfig import FoldColoring, classify_singular_vertices, kawasaki_defects, max_distortion
from qcfold.mesh import PinSet, TriMesh, validate
from qcfold.patterns import MiuraSpec, compose_conformal, fold_pattern, miura_pattern
from qcfold.solver import default_pins, lsqc_solve
from qcfold.store import FieldDocument, MuEntry, PinEntry, field_from_document

router = APIRouter(prefix="/api", tags=["solve"])

Point = tuple[float, float]


class MeshIn(BaseModel):
    vertices: list[Point]
    faces: list[tuple[int, int, int]]


class SolveRequest(MeshIn):
    mu: list[MuEntry] = Field(default_factory=list)
    pins: Optional[list[PinEntry]] = None
    mode: Mode = Mode.SIGNED


class MuRequest(MeshIn):
    image: list[Point]


class CheckRequest(MeshIn):
    coloring: list[Literal[1, -1]]
    image: Optional[list[Point]] = None


class MiuraRequest(BaseModel):
    rows: int = Field(ge=1, le=200)
    cols: int = Field(ge=1, le=200)
    cell_width: float = Field(1.0, gt=0)
    cell_height: float = Field(1.0, gt=0)
    angle_deg: float = Field(60.0, gt=0, lt=90)
    compose: Optional[list[Point]] = None


@contextmanager
def translate_errors():
    try:
        yield
    except MeshError as e:
        raise HTTPException(status_code=422, detail={"error": "invalid mesh", "problems": e.problems})
    except InputError as e:
        raise HTTPException(status_code=422, detail={"error": str(e)})
    except NumericError as e:
        raise HTTPException(status_code=500, detail={"error": "numerical failure", "message": str(e)})


def _mesh(req: MeshIn) -> TriMesh:
    mesh = TriMesh(np.array(req.vertices, dtype=float).reshape(-1, 2), np.array(req.faces, dtype=np.int64).reshape(-1, 3))
    report = validate(mesh)
    if not report.ok:
        raise MeshError([f"{p.check}: {p.message}" for p in report.problems])
    return mesh


def _points(points: list[Point], mesh: TriMesh) -> np.ndarray:
    out = np.array(points, dtype=float).reshape(-1, 2)
    if out.shape != mesh.vertices.shape:
        raise InputError(f"expected {mesh.n_vertices} image points, got {len(out)}")
    return out


def _encode_mu(values: np.ndarray) -> list[Union[list[float], str, None]]:
    out: list[Union[list[float], str, None]] = []
    for mu in values:
        if np.isnan(mu):
            out.append(None)
        elif np.isinf(mu):
            out.append("inf")
        else:
            out.append([float(mu.real), float(mu.imag)])
    return out


@router.post("/solve")
def solve(req: SolveRequest):
    """
    Beltrami solve on an uploaded mesh.
    - Faces missing from `mu` get mu = 0.
    - Without `pins`, the two boundary vertices furthest apart are pinned in place.
    """
    with translate_errors():
        mesh = _mesh(req)
        field = field_from_document(FieldDocument(faces=req.mu), mesh.n_faces)
        if req.pins is None:
            pins = default_pins(mesh)
        else:
            pins = PinSet.from_mapping({p.vertex: (p.x, p.y) for p in req.pins})
        result = lsqc_solve(mesh, field, pins, req.mode)

    return {
        "image": result.image.tolist(),
        "mu": _encode_mu(result.mu),
        **result.report(),
    }


@router.post("/mu")
def mu(req: MuRequest):
    with translate_errors():
        mesh = _mesh(req)
        values = face_coefficients(mesh.vertices, mesh.faces, _points(req.image, mesh))
    return {"faces": [{"face": i, "mu": m} for i, m in enumerate(_encode_mu(values))]}


@router.post("/check")
def check(req: CheckRequest):
    """
    Singular vertices and Kawasaki defects of a colored mesh.
    - With `image`, also the maximal distortion of that fold; without it the mesh
      is folded on its longest boundary edge first.
    """
    with translate_errors():
        mesh = _mesh(req)
        coloring = FoldColoring(req.coloring)
        coloring.check_faces(mesh.n_faces)
        classes = classify_singular_vertices(mesh, coloring)
        defects = kawasaki_defects(mesh, coloring)
        if req.image is not None:
            image = _points(req.image, mesh)
        else:
            image = fold_pattern(mesh, coloring).image
        distortion = max_distortion(mesh, image, coloring)

    return {
        "classification": classes.as_dict(),
        "kawasaki_defects": {str(v): d for v, d in defects.items()},
        "max_distortion": distortion,
    }


@router.post("/miura")
def miura(req: MiuraRequest):
    with translate_errors():
        spec = MiuraSpec(req.rows, req.cols, req.cell_width, req.cell_height, math.radians(req.angle_deg))
        mesh, coloring = miura_pattern(spec)
        if req.compose:
            mesh = compose_conformal(mesh, [complex(re, im) for re, im in req.compose])

    return {
        "vertices": mesh.vertices.tolist(),
        "faces": mesh.faces.tolist(),
        "coloring": coloring.labels.tolist(),
    }
