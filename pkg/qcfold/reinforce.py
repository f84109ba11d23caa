"""Reinforcement iteration: alternate fold and unfold solves until the fold stops changing.

Each round folds the current domain with the visible-data pins (mu = 0 on + faces,
infinity on - faces), then unfolds the folded surface back onto the plane with the
boundary shape pins. The unfolded positions become the next domain; connectivity
and coloring never change.
"""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass
from typing import Iterator, NamedTuple

from qcfold.assembly import Mode
from qcfold.errors import InputError, QCFoldError, ReinforceError
from qcfold.foldconfig import FoldColoring, fold_field, max_distortion, straighten_folding_lines
from qcfold.mesh import PinSet, TriMesh, save_mesh
from qcfold.solver import SolveResult, energy, loss, lsqc_solve

logger = logging.getLogger(__name__)

CSV_HEADER = ("iter", "energy", "loss", "max_distortion", "seconds")


class IterationRow(NamedTuple):
    iter: int
    energy: float
    loss: float
    max_distortion: float
    seconds: float


class IterationLog:
    def __init__(self, rows: list[IterationRow] | None = None):
        self.rows: list[IterationRow] = list(rows or [])

    def append(self, row: IterationRow) -> None:
        if self.rows and row.iter <= self.rows[-1].iter:
            raise ValueError(f"iteration {row.iter} logged after {self.rows[-1].iter}")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[IterationRow]:
        return iter(self.rows)

    def __getitem__(self, i: int) -> IterationRow:
        return self.rows[i]

    def column(self, name: str) -> list[float]:
        return [getattr(r, name) for r in self.rows]

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([r.iter, repr(r.energy), repr(r.loss), repr(r.max_distortion), f"{r.seconds:.6f}"])
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class ReinforceProblem:
    domain: TriMesh
    coloring: FoldColoring
    vis_pins: PinSet
    shape_pins: PinSet
    eps: float = 1e-8
    itermax: int = 200
    straighten_every: int = 25
    dump_every: int = 0
    dump_prefix: str | None = None

    def check(self) -> None:
        self.coloring.check_faces(self.domain.n_faces)
        self.vis_pins.check(self.domain)
        self.shape_pins.check(self.domain)
        if self.eps < 0:
            raise InputError(f"eps must be >= 0, got {self.eps}")
        if self.itermax < 0:
            raise InputError(f"itermax must be >= 0, got {self.itermax}")
        if self.straighten_every < 0:
            raise InputError(f"straightening period must be >= 0, got {self.straighten_every}")
        if self.dump_every < 0:
            raise InputError(f"dump period must be >= 0, got {self.dump_every}")


def fold_step(domain: TriMesh, coloring: FoldColoring, vis_pins: PinSet) -> SolveResult:
    return lsqc_solve(domain, fold_field(coloring), vis_pins, Mode.GENERALIZED)


def unfold_step(folded: SolveResult | TriMesh, coloring: FoldColoring, shape_pins: PinSet) -> SolveResult:
    """Flatten a folded surface: its + faces map conformally, its - faces anti-conformally."""
    surface = folded.as_mesh() if isinstance(folded, SolveResult) else folded
    return lsqc_solve(surface, fold_field(coloring), shape_pins, Mode.GENERALIZED)


def _dump(problem: ReinforceProblem, n: int, domain: TriMesh, fold: SolveResult) -> None:
    prefix = problem.dump_prefix
    save_mesh(domain, f"{prefix}_domain_{n:04d}.obj")
    save_mesh(fold.as_mesh(), f"{prefix}_fold_{n:04d}.obj")
    logger.debug("dumped iteration %d to %s_*_%04d.obj", n, prefix, n)


def reinforce(problem: ReinforceProblem) -> tuple[TriMesh, SolveResult | None, IterationLog]:
    """Run the iteration; returns the last folded domain, its fold and the log.

    Stops when the energy changes by at most ``eps`` between rounds or after
    ``itermax`` rounds. With ``straighten_every = k > 0`` the folding lines are
    straightened before rounds k+1, 2k+1, ... and the energy comparison restarts.
    """
    problem.check()
    coloring = problem.coloring
    log = IterationLog()
    domain = problem.domain
    fold: SolveResult | None = None
    # E_0 = 0: a first fold with energy <= eps is already a fixed point and stops at n = 1
    previous: float | None = 0.0
    k = problem.straighten_every

    for n in range(1, problem.itermax + 1):
        started = time.perf_counter()
        try:
            if k and n > 1 and (n - 1) % k == 0:
                domain = straighten_folding_lines(domain, coloring)
                previous = None
            fold = fold_step(domain, coloring, problem.vis_pins)
            e = energy(domain, fold.image, coloring)
            row = IterationRow(
                iter=n,
                energy=e,
                loss=loss(domain, fold.image, coloring),
                max_distortion=max_distortion(domain, fold.image, coloring),
                seconds=time.perf_counter() - started,
            )
            log.append(row)
            logger.info(
                "iter %d: energy=%.6e loss=%.6e max_distortion=%.3e (%.3fs)",
                n, row.energy, row.loss, row.max_distortion, row.seconds,
            )
            if problem.dump_every and problem.dump_prefix and n % problem.dump_every == 0:
                _dump(problem, n, domain, fold)
            if (previous is not None and abs(e - previous) <= problem.eps) or n == problem.itermax:
                break
            unfolded = unfold_step(fold, coloring, problem.shape_pins)
            domain = domain.with_vertices(unfolded.image)
            previous = e
        except QCFoldError as exc:
            raise ReinforceError(f"iteration {n} failed: {exc}", log) from exc
    return domain, fold, log
