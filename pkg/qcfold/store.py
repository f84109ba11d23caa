"""JSON and CSV side files: pins, Beltrami fields, colorings, reports and iteration logs.

Documents are validated through pydantic models. Everything written carries
``"format": 1`` except pin files, which are a bare JSON array; readers accept
either shape for pins.
"""
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError

from qcfold.coeff import INF, BeltramiField
from qcfold.errors import FormatError
from qcfold.foldconfig import FoldColoring
from qcfold.fsutil import atomic_write_text
from qcfold.mesh import PinSet
from qcfold.reinforce import IterationLog

FORMAT_VERSION = 1


class PinEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    vertex: int = Field(ge=0)
    x: float
    y: float


class PinsDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: Literal[1] = 1
    pins: list[PinEntry]


class MuEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    face: int = Field(ge=0)
    mu: Union[tuple[float, float], Literal["inf"]]

    def value(self) -> complex:
        return INF if self.mu == "inf" else complex(*self.mu)


class FieldDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: Literal[1] = 1
    faces: list[MuEntry] = Field(default_factory=list)


class ColoringDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: Literal[1] = 1
    faces: list[Literal[1, -1]]


_PinsInput = TypeAdapter(Union[list[PinEntry], PinsDocument])
_FieldInput = TypeAdapter(FieldDocument)
_ColoringInput = TypeAdapter(ColoringDocument)


def _read(path: str | os.PathLike) -> str:
    return Path(path).read_text(encoding="utf-8")


def _parse(adapter: TypeAdapter, path: str | os.PathLike, what: str):
    try:
        return adapter.validate_json(_read(path))
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise FormatError(f"{path}: invalid {what} file at {where or 'top level'}: {first['msg']}") from exc


def _write_json(path: str | os.PathLike, payload: Any) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


def load_pins(path: str | os.PathLike) -> PinSet:
    doc = _parse(_PinsInput, path, "pins")
    entries = doc.pins if isinstance(doc, PinsDocument) else doc
    seen: set[int] = set()
    for e in entries:
        if e.vertex in seen:
            raise FormatError(f"{path}: vertex {e.vertex} is pinned twice")
        seen.add(e.vertex)
    return PinSet.from_mapping({e.vertex: (e.x, e.y) for e in entries})


def save_pins(pins: PinSet, path: str | os.PathLike) -> None:
    _write_json(path, [{"vertex": v, "x": x, "y": y} for v, (x, y) in pins.as_dict().items()])


def coefficients_to_dict(values) -> dict[str, Any]:
    """Per-face coefficients as a field document; no admissibility check."""
    faces = []
    for i, mu in enumerate(values):
        value: Any = "inf" if np.isinf(mu) else [float(mu.real), float(mu.imag)]
        faces.append({"face": i, "mu": value})
    return {"format": FORMAT_VERSION, "faces": faces}


def field_from_document(doc: FieldDocument, n_faces: int) -> BeltramiField:
    entries: dict[int, complex] = {}
    for e in doc.faces:
        if e.face in entries:
            raise FormatError(f"face {e.face} appears twice in the Beltrami field")
        entries[e.face] = e.value()
    return BeltramiField.from_entries(n_faces, entries)


def load_field(path: str | os.PathLike, n_faces: int) -> BeltramiField:
    """Per-face coefficients; faces not listed get mu = 0."""
    return field_from_document(_parse(_FieldInput, path, "Beltrami field"), n_faces)


def save_field(field: BeltramiField, path: str | os.PathLike) -> None:
    _write_json(path, coefficients_to_dict(field.values))


def save_coefficients(values, path: str | os.PathLike) -> None:
    _write_json(path, coefficients_to_dict(values))


def load_coloring(path: str | os.PathLike) -> FoldColoring:
    doc = _parse(_ColoringInput, path, "coloring")
    return FoldColoring(doc.faces)


def save_coloring(coloring: FoldColoring, path: str | os.PathLike) -> None:
    _write_json(path, {"format": FORMAT_VERSION, "faces": [int(c) for c in coloring.labels]})


def save_report(report: dict[str, Any], path: str | os.PathLike) -> None:
    _write_json(path, {"format": FORMAT_VERSION, **report})


def save_log(log: IterationLog, path: str | os.PathLike) -> None:
    atomic_write_text(path, log.csv_text())
