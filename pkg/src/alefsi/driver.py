"""Benchmark time loop: configure, march, record functionals.

Output is gnuplot-ready CSV: '#'-prefixed header lines (run parameters and
the column list), then one comma-separated row per accepted time step,
flushed as soon as it is computed so partial results survive failures.
"""

from __future__ import annotations

import sys

import numpy as np

from .assembly import FsiState, evaluate_drag_lift, evaluate_point
from .config import SolverConfig
from .dofs import DofMap, distribute_dofs
from .elements import ElementPair
from .errors import AlefsiError
from .linsolve import BlockLduGmresSolver, IluGmres, SparseDirect
from .materials import MaterialParams, inflow_profile
from .mesh import build_box3d_mesh, build_fsi2_mesh
from .newton import ThetaScheme, advance

#: displacement evaluation points of the two benchmarks
FSI2_POINT = (0.6, 0.2)
BOX3D_POINTS = (
    (0.4, 0.3, 0.0),
    (0.4, 0.3, -0.2),
    (0.5, 0.3, -0.2),
    (0.5, 0.3, 0.0),
)


def build_problem(config: SolverConfig):
    """Mesh, dof numbering and material data for a validated config."""
    config.validate()
    if config.benchmark == "fsi2":
        mesh = build_fsi2_mesh(config.refine_level)
        points = [FSI2_POINT]
    else:
        mesh = build_box3d_mesh(config.refine_level)
        points = list(BOX3D_POINTS)
    dofmap = distribute_dofs(mesh, ElementPair(config.order, mesh.dim))
    return mesh, dofmap, MaterialParams(), points


def make_inflow(config: SolverConfig):
    if config.inflow_scale == 0.0:
        return None
    case = config.benchmark
    scale = config.inflow_scale

    def inflow(t, x):
        return scale * inflow_profile(t, x, case)

    return inflow


def make_linsolver(config: SolverConfig) -> BlockLduGmresSolver:
    factory = SparseDirect if config.inner_solver == "direct" else IluGmres
    return BlockLduGmresSolver(
        rel_reduction=config.gmres_reduction,
        inner_factory=factory,
        schur_reduction=config.schur_reduction,
    )


def csv_columns(config: SolverConfig) -> list:
    if config.benchmark == "fsi2":
        cols = ["t", "ux", "uy"]
    else:
        cols = ["t"]
        for i in range(1, 5):
            cols += [f"ux_P{i}", f"uy_P{i}", f"uz_P{i}"]
    return cols + ["drag", "lift", "newton_iters", "avg_gmres_iters"]


def run(config: SolverConfig, stream=None, log=None) -> int:
    """Execute the configured benchmark; returns a process exit status.

    Rows are written to ``stream`` (default stdout).  On mesh degeneration
    or Newton failure the rows computed so far remain flushed and status 1
    is returned.
    """
    stream = stream if stream is not None else sys.stdout
    mesh, dofmap, params, points = build_problem(config)
    inflow = make_inflow(config)
    scheme = ThetaScheme(config.theta, config.dt)
    linsolver = make_linsolver(config)

    header = {
        "benchmark": config.benchmark,
        "refine_level": config.refine_level,
        "order": config.order,
        "n_dofs": dofmap.n_dofs,
        "dt": config.dt,
        "theta": scheme.theta,
        "rho_f": params.rho_f,
        "nu_f": params.nu_f,
        "rho_s": params.rho_s,
        "lambda": params.lam,
        "mu": params.mu,
    }
    for key, val in header.items():
        stream.write(f"# {key} = {val}\n")
    cols = csv_columns(config)
    stream.write("# columns: " + ",".join(cols) + "\n")
    stream.flush()

    state = FsiState.zero(dofmap, 0.0)
    n_steps = int(round(config.t_end / config.dt))
    status = 0
    for step in range(1, n_steps + 1):
        t_new = step * config.dt
        try:
            state, stats = advance(
                state,
                t_new,
                scheme,
                params,
                linsolver,
                dofmap,
                inflow=inflow,
                threads=config.threads,
                tol_rel=config.newton_tol,
                qn_factor=config.qn_factor,
            )
        except AlefsiError as exc:
            if log is not None:
                log(f"step {step} (t={t_new:g}) failed: {exc}")
            status = 1
            break
        force = evaluate_drag_lift(state, dofmap, params)
        row = [state.t]
        for p in points:
            row.extend(evaluate_point(state, dofmap, p))
        avg_gmres = float(np.mean(stats.gmres_iters)) if stats.gmres_iters else 0.0
        row += [force[0], force[1], stats.iterations, avg_gmres]
        stream.write(",".join(_fmt(v) for v in row) + "\n")
        stream.flush()
    return status


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def read_timeseries(path):
    """Read a run CSV back: returns (header dict, column names, data array)."""
    header = {}
    cols = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("columns:"):
                    cols = body.split(":", 1)[1].strip().split(",")
                elif "=" in body:
                    key, _, val = body.partition("=")
                    header[key.strip()] = val.strip()
                continue
            rows.append([float(v) for v in line.split(",")])
    data = np.array(rows) if rows else np.zeros((0, len(cols) if cols else 0))
    return header, cols, data
