"""Command line entry points.

Exit codes: 0 success, 1 bad input (files, options, coefficients, pins),
2 numerical failure (singular system, residual over tolerance).
"""
from __future__ import annotations

import logging
import math
from pathlib import Path

import click
import numpy as np

from qcfold.assembly import Mode, assemble_system, dump_matrix_market
from qcfold.coeff import face_coefficients
from qcfold.config import get_settings
from qcfold.errors import InputError, NumericError, ReinforceError
from qcfold.foldconfig import (
    classify_singular_vertices,
    kawasaki_defects,
    max_distortion,
)
from qcfold.log import configure_logging
from qcfold.mesh import TriMesh, load_mesh, read_obj, save_mesh
from qcfold.patterns import MiuraSpec, compose_conformal, fold_pattern, miura_pattern, repair_flat_foldability
from qcfold.reinforce import ReinforceProblem, reinforce
from qcfold.solver import lsqc_solve
from qcfold.store import (
    load_coloring,
    load_field,
    load_pins,
    save_coefficients,
    save_coloring,
    save_log,
    save_report,
)

logger = logging.getLogger(__name__)

existing = click.Path(exists=True, dir_okay=False, path_type=Path)
output = click.Path(dir_okay=False, path_type=Path)


class QCFoldGroup(click.Group):
    """Maps qcfold errors (and click usage errors) onto the exit-code contract."""

    def make_context(self, *args, **kwargs):
        try:
            return super().make_context(*args, **kwargs)
        except click.UsageError as exc:
            exc.exit_code = 1
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as exc:
            exc.exit_code = 1
            raise
        except InputError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(1)
        except NumericError as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            ctx.exit(2)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(1)


def guard_outputs(inputs: list[Path], outputs: list[Path], in_place: bool) -> None:
    resolved_out = [p.resolve() for p in outputs]
    if len(set(resolved_out)) != len(resolved_out):
        raise click.UsageError("output paths must be distinct")
    if in_place:
        return
    clash = set(resolved_out) & {p.resolve() for p in inputs}
    if clash:
        raise click.UsageError(
            f"output would overwrite input {sorted(map(str, clash))[0]}; pass --in-place to allow it"
        )


def parse_poly(text: str) -> list[complex]:
    try:
        return [complex(part.strip().replace(" ", "")) for part in text.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"cannot read {text!r} as comma-separated complex coefficients")


def _load_image(path: Path, mesh: TriMesh) -> np.ndarray:
    image = read_obj(path)
    if image.n_vertices != mesh.n_vertices or not np.array_equal(image.faces, mesh.faces):
        raise InputError(f"{path} does not share the connectivity of the domain mesh")
    return image.vertices


@click.group(cls=QCFoldGroup)
@click.option("--log-level", default=None, help="Logging level (default: QCFOLD_LOG_LEVEL or INFO).")
def cli(log_level: str | None):
    """Folding maps on planar triangle meshes.

    \b
    File formats:
      meshes    OBJ, "v x y 0" and "f i j k" (1-based)
      pins      JSON array [{"vertex": 0, "x": 0.0, "y": 0.0}, ...] (0-based)
      mu        JSON {"format": 1, "faces": [{"face": 0, "mu": [re, im]} | {"face": 0, "mu": "inf"}]}
      coloring  JSON {"format": 1, "faces": [1, -1, ...]}
      logs      CSV iter,energy,loss,max_distortion,seconds
    """
    try:
        settings = get_settings()
    except RuntimeError as exc:
        raise click.UsageError(str(exc))
    configure_logging((log_level or settings.log_level).upper())


@cli.command()
@click.argument("mesh_path", metavar="MESH", type=existing)
@click.argument("mu_path", metavar="MU", type=existing)
@click.argument("pins_path", metavar="PINS", type=existing)
@click.option("--mode", type=click.Choice([m.value for m in Mode]), default=Mode.SIGNED.value, show_default=True)
@click.option("--out", "out_path", type=output, required=True, help="Image mesh (OBJ).")
@click.option("--report", "report_path", type=output, default=None, help="Report JSON (default: OUT with .json suffix).")
@click.option("--dump-matrix", type=output, default=None, help="Also write the system matrix (MatrixMarket).")
@click.option("--in-place", is_flag=True, help="Allow outputs to overwrite inputs.")
def solve(mesh_path, mu_path, pins_path, mode, out_path, report_path, dump_matrix, in_place):
    """Solve the Beltrami system for MESH with per-face MU and PINS.

    \b
    MESH    OBJ, "v x y 0" and "f i j k" (1-based)
    MU      JSON {"format": 1, "faces": [{"face": 0, "mu": [re, im]} | {"face": 0, "mu": "inf"}]}
    PINS    JSON array [{"vertex": 0, "x": 0.0, "y": 0.0}, ...] (0-based)
    Writes the image as OBJ and a JSON report.
    """
    report_path = report_path or out_path.with_suffix(".json")
    outputs = [out_path, report_path] + ([dump_matrix] if dump_matrix else [])
    guard_outputs([mesh_path, mu_path, pins_path], outputs, in_place)

    mesh = load_mesh(mesh_path)
    field = load_field(mu_path, mesh.n_faces)
    pins = load_pins(pins_path)
    result = lsqc_solve(mesh, field, pins, mode)

    save_mesh(result.as_mesh(), out_path)
    save_report(result.report(), report_path)
    if dump_matrix:
        dump_matrix_market(assemble_system(mesh, field, mode), dump_matrix)
    click.echo(f"residual={result.residual:.3e} energy={result.energy:.6g} -> {out_path}")


@cli.command("reinforce")
@click.argument("domain_path", metavar="DOMAIN", type=existing)
@click.argument("coloring_path", metavar="COLORING", type=existing)
@click.argument("vis_pins_path", metavar="VIS_PINS", type=existing)
@click.argument("shape_pins_path", metavar="SHAPE_PINS", type=existing)
@click.option("--eps", type=float, default=1e-8, show_default=True, help="Stop when |dE| <= eps.")
@click.option("--itermax", type=click.IntRange(min=0), default=200, show_default=True)
@click.option("-k", "--straighten-every", type=click.IntRange(min=0), default=25, show_default=True,
              help="Straighten folding lines every k iterations (0 = never).")
@click.option("--dump-every", type=click.IntRange(min=0), default=0, help="Dump domain/fold OBJ every n iterations.")
@click.option("--out-prefix", type=str, required=True,
              help="Writes PREFIX_domain.obj, PREFIX_fold.obj and PREFIX_log.csv.")
@click.option("--in-place", is_flag=True, help="Allow outputs to overwrite inputs.")
def reinforce_cmd(domain_path, coloring_path, vis_pins_path, shape_pins_path, eps, itermax,
                  straighten_every, dump_every, out_prefix, in_place):
    """Recover a flat-foldable domain from partial fold data.

    \b
    DOMAIN    OBJ, "v x y 0" and "f i j k" (1-based)
    COLORING  JSON {"format": 1, "faces": [1, -1, ...]}
    VIS_PINS, SHAPE_PINS
              JSON array [{"vertex": 0, "x": 0.0, "y": 0.0}, ...] (0-based)
    Writes PREFIX_domain.obj, PREFIX_fold.obj and PREFIX_log.csv
    (CSV iter,energy,loss,max_distortion,seconds).
    """
    domain_out = Path(f"{out_prefix}_domain.obj")
    fold_out = Path(f"{out_prefix}_fold.obj")
    log_out = Path(f"{out_prefix}_log.csv")
    guard_outputs([domain_path, coloring_path, vis_pins_path, shape_pins_path],
                  [domain_out, fold_out, log_out], in_place)

    problem = ReinforceProblem(
        domain=load_mesh(domain_path),
        coloring=load_coloring(coloring_path),
        vis_pins=load_pins(vis_pins_path),
        shape_pins=load_pins(shape_pins_path),
        eps=eps,
        itermax=itermax,
        straighten_every=straighten_every,
        dump_every=dump_every,
        dump_prefix=out_prefix,
    )
    try:
        domain, fold, log = reinforce(problem)
    except ReinforceError as exc:
        save_log(exc.log, log_out)
        raise
    save_mesh(domain, domain_out)
    if fold is not None:
        save_mesh(fold.as_mesh(), fold_out)
    save_log(log, log_out)
    if len(log):
        last = log[-1]
        click.echo(f"{len(log)} iterations, loss={last.loss:.6e}, max_distortion={last.max_distortion:.3e}")
    else:
        click.echo("0 iterations")


@cli.command()
@click.argument("rows", type=click.IntRange(min=1))
@click.argument("cols", type=click.IntRange(min=1))
@click.option("--angle", type=float, default=60.0, show_default=True, help="Crease angle in degrees.")
@click.option("--cell-width", type=float, default=1.0, show_default=True)
@click.option("--cell-height", type=float, default=1.0, show_default=True)
@click.option("--compose", "poly", type=str, default=None,
              help='Compose with a polynomial, ascending coefficients, e.g. "10,0.1,0.4".')
@click.option("--out", "out_path", type=output, required=True, help="Pattern mesh (OBJ).")
@click.option("--coloring", "coloring_path", type=output, default=None,
              help="Coloring JSON (default: OUT with _coloring.json suffix).")
def miura(rows, cols, angle, cell_width, cell_height, poly, out_path, coloring_path):
    """Generate a ROWS x COLS Miura-ori pattern (each cell 2 x 2 panels).

    \b
    Writes the pattern as OBJ ("v x y 0", "f i j k", 1-based) and its
    coloring as JSON {"format": 1, "faces": [1, -1, ...]}.
    """
    coloring_path = coloring_path or out_path.with_name(out_path.stem + "_coloring.json")
    guard_outputs([], [out_path, coloring_path], False)
    spec = MiuraSpec(rows, cols, cell_width, cell_height, math.radians(angle))
    mesh, coloring = miura_pattern(spec)
    if poly:
        mesh = compose_conformal(mesh, parse_poly(poly))
    save_mesh(mesh, out_path)
    save_coloring(coloring, coloring_path)
    click.echo(f"{mesh.n_vertices} vertices, {mesh.n_faces} faces -> {out_path}")


@cli.command()
@click.argument("mesh_path", metavar="MESH", type=existing)
@click.argument("coloring_path", metavar="COLORING", type=existing)
@click.option("--image", "image_path", type=existing, default=None,
              help="Folded image OBJ; without it the pattern is folded on an edge pin pair.")
@click.option("--pins", "pins_path", type=existing, default=None, help="Pins for the fold (default: longest boundary edge).")
@click.option("--json", "json_path", type=output, default=None, help="Also write the report as JSON.")
def check(mesh_path, coloring_path, image_path, pins_path, json_path):
    """Classify singular vertices, print Kawasaki defects and the maximal distortion.

    \b
    MESH, IMAGE  OBJ, "v x y 0" and "f i j k" (1-based)
    COLORING     JSON {"format": 1, "faces": [1, -1, ...]}
    PINS         JSON array [{"vertex": 0, "x": 0.0, "y": 0.0}, ...] (0-based)
    """
    mesh = load_mesh(mesh_path)
    coloring = load_coloring(coloring_path)
    coloring.check_faces(mesh.n_faces)
    classes = classify_singular_vertices(mesh, coloring)
    defects = kawasaki_defects(mesh, coloring)
    if image_path:
        image = _load_image(image_path, mesh)
    else:
        pins = load_pins(pins_path) if pins_path else None
        image = fold_pattern(mesh, coloring, pins).image
    distortion = max_distortion(mesh, image, coloring)

    for v in classes.interior:
        click.echo(f"vertex {v}: {classes.kind(v)} defect={defects[v]:.3e} rad")
    if classes.boundary:
        click.echo(f"boundary fold endpoints: {', '.join(map(str, classes.boundary))}")
    worst = max((abs(d) for d in defects.values()), default=0.0)
    click.echo(f"max |defect|={worst:.3e} rad")
    click.echo(f"max_distortion={distortion:.3e}")
    if json_path:
        save_report(
            {
                "classification": classes.as_dict(),
                "kawasaki_defects": {str(v): d for v, d in defects.items()},
                "max_distortion": distortion,
            },
            json_path,
        )


@cli.command()
@click.argument("mesh_path", metavar="MESH", type=existing)
@click.argument("image_path", metavar="IMAGE", type=existing)
@click.option("--out", "out_path", type=output, required=True, help="Beltrami field JSON.")
@click.option("--in-place", is_flag=True, help="Allow outputs to overwrite inputs.")
def mu(mesh_path, image_path, out_path, in_place):
    """Per-face Beltrami coefficients of the map MESH -> IMAGE (same connectivity).

    \b
    MESH, IMAGE  OBJ, "v x y 0" and "f i j k" (1-based)
    Writes JSON {"format": 1, "faces": [{"face": 0, "mu": [re, im]} | {"face": 0, "mu": "inf"}]}.
    """
    guard_outputs([mesh_path, image_path], [out_path], in_place)
    mesh = load_mesh(mesh_path)
    image = _load_image(image_path, mesh)
    values = face_coefficients(mesh.vertices, mesh.faces, image)
    save_coefficients(values, out_path)
    click.echo(f"{mesh.n_faces} coefficients -> {out_path}")


@cli.command()
@click.argument("mesh_path", metavar="MESH", type=existing)
@click.argument("coloring_path", metavar="COLORING", type=existing)
@click.option("--tol", type=click.FloatRange(min=0.0), default=1e-3, show_default=True)
@click.option("--itermax", type=click.IntRange(min=0), default=50, show_default=True)
@click.option("--out-prefix", type=str, required=True, help="Writes PREFIX.obj and PREFIX_log.csv.")
@click.option("--in-place", is_flag=True, help="Allow outputs to overwrite inputs.")
def repair(mesh_path, coloring_path, tol, itermax, out_prefix, in_place):
    """Move the interior of a pattern until it folds flat within TOL.

    \b
    MESH      OBJ, "v x y 0" and "f i j k" (1-based)
    COLORING  JSON {"format": 1, "faces": [1, -1, ...]}
    Writes PREFIX.obj and PREFIX_log.csv (CSV iter,energy,loss,max_distortion,seconds).
    """
    mesh_out = Path(f"{out_prefix}.obj")
    log_out = Path(f"{out_prefix}_log.csv")
    guard_outputs([mesh_path, coloring_path], [mesh_out, log_out], in_place)
    mesh = load_mesh(mesh_path)
    coloring = load_coloring(coloring_path)
    repaired, log = repair_flat_foldability(mesh, coloring, tol, itermax)
    save_mesh(repaired, mesh_out)
    save_log(log, log_out)
    if len(log):
        click.echo(f"{len(log)} iterations, max_distortion={log[-1].max_distortion:.3e}")


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP API under uvicorn."""
    import uvicorn

    uvicorn.run("qcfold.main:app", host=host, port=port)


def main() -> None:
    cli()
