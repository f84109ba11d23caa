from __future__ import annotations

from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:
    from qcfold.reinforce import IterationLog


class QCFoldError(Exception):
    """Base class for every error raised by qcfold."""


class InputError(QCFoldError, ValueError):
    """The caller handed us something we cannot work with."""


class FormatError(InputError):
    pass


class MeshError(InputError):
    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("invalid mesh: " + "; ".join(self.problems))


class CoefficientError(InputError):
    def __init__(self, message: str, face: int | None = None):
        self.face = face
        if face is not None:
            message = f"face {face}: {message}"
        super().__init__(message)


class PinError(InputError):
    pass


class ColoringError(InputError):
    pass


class DegenerateFaceError(InputError):
    def __init__(self, message: str, faces: Sequence[int] = ()):
        self.faces = [int(f) for f in faces]
        if self.faces:
            shown = ", ".join(str(f) for f in self.faces[:20])
            more = "" if len(self.faces) <= 20 else f" (+{len(self.faces) - 20} more)"
            message = f"{message}: faces {shown}{more}"
        super().__init__(message)


class NumericError(QCFoldError, ArithmeticError):
    """The numbers did not work out (singular system, residual too large, ...)."""


class SolverError(NumericError):
    pass


class ReinforceError(NumericError):
    def __init__(self, message: str, log: "IterationLog"):
        self.log = log
        super().__init__(message)
