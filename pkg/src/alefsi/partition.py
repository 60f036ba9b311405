"""Mesh partitioning strategies, ghost layers and the scaling harness.

"Rank" models a thread of a shared-memory run.  Cells are assigned by
deterministic recursive coordinate bisection; the three strategies differ in
how the fluid and solid subdomains are distributed:

* shared:  both subdomains are bisected separately and paired, so every rank
  owns cells of both,
* split:   ranks are dedicated to one subdomain, sized proportionally to the
  cell counts,
* default: bisection of all cells, ignoring subdomains.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dofs import DofMap
from .errors import ConfigError
from .mesh import FLUID, SOLID, Mesh

SHARED = "shared"
SPLIT = "split"
DEFAULT = "default"


@dataclass
class Partition:
    owner: np.ndarray  # rank per cell
    n_parts: int
    strategy: str
    ghost: list = field(default_factory=list)  # per-rank arrays of ghost cells

    def owned_cells(self, rank: int) -> np.ndarray:
        return np.flatnonzero(self.owner == rank)


@dataclass
class ImbalanceReport:
    dofs_per_rank: np.ndarray
    ratio: float  # max over mean owned dofs
    cross_facets: int  # facets whose adjacent cells live on different ranks


def _rcb(ids: np.ndarray, centers: np.ndarray, n_parts: int, out, base_rank: int):
    """Recursive coordinate bisection along the widest axis."""
    if n_parts == 1 or len(ids) == 0:
        out[ids] = base_rank
        return
    n_lo = n_parts // 2
    c = centers[ids]
    axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
    order = ids[np.lexsort((ids, c[:, axis]))]  # ties broken by cell id
    cut = int(round(len(ids) * n_lo / n_parts))
    _rcb(order[:cut], centers, n_lo, out, base_rank)
    _rcb(order[cut:], centers, n_parts - n_lo, out, base_rank + n_lo)


def partition_mesh(mesh: Mesh, n_parts: int, strategy: str = DEFAULT) -> Partition:
    if n_parts < 1:
        raise ConfigError("n_parts must be at least 1")
    if strategy not in (SHARED, SPLIT, DEFAULT):
        raise ConfigError(f"unknown partition strategy {strategy!r}")
    centers = mesh.nodes[mesh.cells].mean(axis=1)
    owner = np.zeros(mesh.n_cells, dtype=np.int64)
    fluid = np.flatnonzero(mesh.cell_subdomain == FLUID)
    solid = np.flatnonzero(mesh.cell_subdomain == SOLID)

    if n_parts == 1:
        pass
    elif strategy == DEFAULT:
        if n_parts > mesh.n_cells:
            raise ConfigError("more parts than cells")
        _rcb(np.arange(mesh.n_cells), centers, n_parts, owner, 0)
    elif strategy == SHARED:
        for subset in (fluid, solid):
            if len(subset) == 0:
                continue
            if n_parts > len(subset):
                raise ConfigError("more parts than cells in a subdomain")
            _rcb(subset, centers, n_parts, owner, 0)
    else:  # split
        if len(solid) == 0 or len(fluid) == 0:
            subset = fluid if len(fluid) else solid
            if n_parts > len(subset):
                raise ConfigError("more parts than cells")
            _rcb(subset, centers, n_parts, owner, 0)
        else:
            n_f = int(round(n_parts * len(fluid) / mesh.n_cells))
            n_f = min(max(n_f, 1), n_parts - 1)
            n_s = n_parts - n_f
            if n_f > len(fluid) or n_s > len(solid):
                raise ConfigError("more parts than cells in a subdomain")
            _rcb(fluid, centers, n_f, owner, 0)
            _rcb(solid, centers, n_s, owner, n_f)

    part = Partition(owner=owner, n_parts=n_parts, strategy=strategy)
    part.ghost = ghost_layer(mesh, part)
    return part


def ghost_layer(mesh: Mesh, partition: Partition) -> list:
    """Per rank: all non-owned cells sharing at least one node with an owned cell."""
    n_nodes = mesh.n_nodes
    cells_of_node = [[] for _ in range(n_nodes)]
    for c, cell in enumerate(mesh.cells):
        for v in cell:
            cells_of_node[v].append(c)
    out = []
    for rank in range(partition.n_parts):
        owned = np.flatnonzero(partition.owner == rank)
        nbrs: set[int] = set()
        for c in owned:
            for v in mesh.cells[c]:
                nbrs.update(cells_of_node[v])
        nbrs.difference_update(owned.tolist())
        out.append(np.array(sorted(nbrs), dtype=np.int64))
    return out


def dof_owner(partition: Partition, dofmap: DofMap) -> np.ndarray:
    """Owning rank per dof; shared nodes go to the lowest adjacent rank."""
    n_fe = dofmap.n_fe
    node_rank = np.full(n_fe, np.iinfo(np.int64).max, dtype=np.int64)
    for c, nodes in enumerate(dofmap.cell_nodes):
        r = partition.owner[c]
        np.minimum.at(node_rank, nodes, r)
    out = np.empty(dofmap.n_dofs, dtype=np.int64)
    d = dofmap.dim
    uv = np.repeat(node_rank, d)
    out[: d * n_fe] = uv
    out[d * n_fe : 2 * d * n_fe] = uv
    p_slice = slice(2 * d * n_fe, None)
    out[p_slice] = partition.owner[dofmap.node_of[p_slice]]
    return out


def imbalance(partition: Partition, dofmap: DofMap) -> ImbalanceReport:
    owner = dof_owner(partition, dofmap)
    counts = np.bincount(owner, minlength=partition.n_parts).astype(np.int64)
    ratio = float(counts.max() / counts.mean()) if counts.mean() > 0 else 1.0
    cross = 0
    for cells in dofmap.mesh.facet_cells().values():
        if len(cells) == 2 and partition.owner[cells[0]] != partition.owner[cells[1]]:
            cross += 1
    return ImbalanceReport(dofs_per_rank=counts, ratio=ratio, cross_facets=cross)


def scaling_run(
    dofmap: DofMap,
    params,
    thread_counts,
    inflow=None,
    t: float = 0.5,
    dt: float = 0.005,
    theta: float = 0.505,
) -> list:
    """Timing table of parallel assembly and one preconditioned solve.

    Returns one row per thread count with wall times for assembly and for a
    linear solve split by preconditioner component.
    """
    from .assembly import FsiState, assemble_jacobian, assemble_residual
    from .linsolve import BlockLduGmresSolver

    state = FsiState.zero(dofmap, t)
    dofmap.inject_dirichlet(state.vec, t, inflow)
    prev = FsiState.zero(dofmap, t - dt)
    dofmap.inject_dirichlet(prev.vec, t - dt, inflow)
    rows = []
    for threads in thread_counts:
        t0 = time.perf_counter()
        A = assemble_jacobian(state, prev, params, dt, theta, dofmap, threads=threads)
        r = assemble_residual(state, prev, params, dt, theta, dofmap, threads=threads)
        t_assemble = time.perf_counter() - t0
        solver = BlockLduGmresSolver()
        solver.setup(A, dofmap)
        t1 = time.perf_counter()
        solver.solve(r)
        t_solve = time.perf_counter() - t1
        rows.append(
            {
                "threads": int(threads),
                "n_dofs": dofmap.n_dofs,
                "t_assemble_s": t_assemble,
                "t_solve_s": t_solve,
                "t_fluid_s": solver.stats["t_fluid"],
                "t_solid_s": solver.stats["t_solid"],
                "t_mesh_s": solver.stats["t_mesh"],
                "gmres_iters": solver.stats["iterations"],
            }
        )
    return rows


SCALING_COLUMNS = (
    "threads",
    "n_dofs",
    "t_assemble_s",
    "t_solve_s",
    "t_fluid_s",
    "t_solid_s",
    "t_mesh_s",
    "gmres_iters",
)


def write_scaling_csv(path, rows):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SCALING_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: row[k] for k in SCALING_COLUMNS})
