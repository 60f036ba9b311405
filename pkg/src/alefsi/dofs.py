"""Global dof numbering, block classification and Dirichlet data.

Displacement u and velocity v are global continuous fields (one set of shape
functions shared by fluid and solid, so the interface continuity conditions
hold by construction); the pressure exists on fluid cells only.

Every dof is classified into exactly one of three blocks:

* mesh block:   u-dofs interior to the fluid domain,
* solid block:  u- and v-dofs on solid cells or on the interface,
* fluid block:  v-dofs interior to the fluid domain and all pressure dofs.

Assigning the interface u/v-dofs to the solid block removes the coupling
from the mesh motion back into the solid equations structurally (the
corresponding block in the system matrix has no entries).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .elements import ElementPair
from .errors import ConfigError
from .mesh import FLUID, SOLID, BoundaryTag, Mesh

MESH_BLOCK = 0
SOLID_BLOCK = 1
FLUID_BLOCK = 2

#: boundary tags with homogeneous velocity Dirichlet conditions
_V_ZERO_TAGS = (
    BoundaryTag.TOP,
    BoundaryTag.BOTTOM,
    BoundaryTag.OBSTACLE,
    BoundaryTag.SOLID_BASE,
)


@dataclass
class DofMap:
    mesh: Mesh
    elements: ElementPair
    fe_coords: np.ndarray  # (n_fe, dim)
    cell_nodes: np.ndarray  # (n_cells, n_loc), lattice order
    cell_pdofs: np.ndarray  # (n_cells, n_p); -1 on solid cells
    n_dofs: int
    block_class: np.ndarray  # (n_dofs,)
    field_of: np.ndarray  # 0=u, 1=v, 2=p
    comp_of: np.ndarray
    node_of: np.ndarray  # fe node (u/v) or owning cell (p)
    dirichlet_dofs: np.ndarray
    inflow_dofs: np.ndarray  # v-dofs on the inflow boundary
    inflow_coords: np.ndarray
    inflow_comps: np.ndarray
    interface_nodes: np.ndarray
    tag_nodes: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @property
    def n_fe(self) -> int:
        return self.fe_coords.shape[0]

    def u_dof(self, node, comp):
        return np.asarray(node) * self.dim + comp

    def v_dof(self, node, comp):
        return self.n_fe * self.dim + np.asarray(node) * self.dim + comp

    def block_dofs(self, block) -> np.ndarray:
        return np.flatnonzero(self.block_class == block)

    def dirichlet_values(self, t, inflow=None) -> np.ndarray:
        """Prescribed values aligned with ``dirichlet_dofs`` (zeros except g)."""
        vals = np.zeros(len(self.dirichlet_dofs))
        if inflow is not None and len(self.inflow_dofs):
            pos = np.searchsorted(self.dirichlet_dofs, self.inflow_dofs)
            g = inflow(t, self.inflow_coords)
            vals[pos] = g[np.arange(len(self.inflow_dofs)), self.inflow_comps]
        return vals

    def inject_dirichlet(self, vec, t, inflow=None):
        """Write the prescribed boundary values into a state vector in place."""
        vec[self.dirichlet_dofs] = self.dirichlet_values(t, inflow)

    def is_dirichlet(self) -> np.ndarray:
        mask = np.zeros(self.n_dofs, dtype=bool)
        mask[self.dirichlet_dofs] = True
        return mask


def _facet_axis_side(local_facet, dim):
    """The (axis, side) a local facet vertex set fixes."""
    for a in range(dim):
        bits = {(v >> a) & 1 for v in local_facet}
        if len(bits) == 1:
            return a, bits.pop()
    raise AssertionError("not a facet")


def _facet_lattice(ep: ElementPair, local_facet):
    """Local lattice node indices lying on a local facet."""
    a, s = _facet_axis_side(local_facet, ep.dim)
    return [i for i, m in enumerate(ep.lattice()) if m[a] == s * ep.order]


def build_fe_nodes(mesh: Mesh, ep: ElementPair):
    """Global Q(k) node coordinates and per-cell connectivity."""
    k = ep.order
    if k == 1:
        return mesh.nodes.copy(), mesh.cells.copy()
    coords = [x for x in mesh.nodes]
    entity: dict[tuple, int] = {}
    lat = ep.lattice()
    cell_nodes = np.empty((mesh.n_cells, ep.n_loc), dtype=np.int64)
    for c, cell in enumerate(mesh.cells):
        for i, m in enumerate(lat):
            support = []
            for combo_bits in range(2**ep.dim):
                ok = True
                for a in range(ep.dim):
                    b = (combo_bits >> a) & 1
                    if (m[a] == 0 and b == 1) or (m[a] == k and b == 0):
                        ok = False
                        break
                if ok:
                    support.append(cell[combo_bits])
            key = tuple(sorted(set(support)))
            if len(key) == 1:
                cell_nodes[c, i] = key[0]
            else:
                if key not in entity:
                    entity[key] = len(coords)
                    coords.append(np.mean([mesh.nodes[v] for v in key], axis=0))
                cell_nodes[c, i] = entity[key]
    return np.array(coords), cell_nodes


def distribute_dofs(mesh: Mesh, elements: ElementPair) -> DofMap:
    """Number all dofs, classify them into blocks and collect Dirichlet data."""
    if elements.dim != mesh.dim:
        raise ConfigError("element dimension does not match mesh")
    fluid_cells = np.flatnonzero(mesh.cell_subdomain == FLUID)
    if len(fluid_cells) == 0:
        raise ConfigError("mesh has no fluid cells")
    d = mesh.dim
    fe_coords, cell_nodes = build_fe_nodes(mesh, elements)
    n_fe = fe_coords.shape[0]

    # pressure dofs on fluid cells only
    n_p = elements.n_p
    cell_pdofs = -np.ones((mesh.n_cells, n_p), dtype=np.int64)
    offset = 2 * d * n_fe
    for rank, c in enumerate(fluid_cells):
        cell_pdofs[c] = offset + rank * n_p + np.arange(n_p)
    n_dofs = offset + len(fluid_cells) * n_p

    # fe nodes per tagged boundary facet
    facet_owner = {k: c for k, c in mesh.boundary_facets().items()}
    tag_nodes: dict[BoundaryTag, set] = {t: set() for t in BoundaryTag}
    for key, tag in mesh.facet_tags.items():
        c = facet_owner[key]
        cell = mesh.cells[c]
        for lf in mesh.local_facets():
            if tuple(sorted(cell[i] for i in lf)) == key:
                tag_nodes[tag].update(cell_nodes[c, _facet_lattice(elements, lf)])
                break

    iface_nodes: set = set()
    for key, cf, _cs in mesh.interface_facets():
        cell = mesh.cells[cf]
        for lf in mesh.local_facets():
            if tuple(sorted(cell[i] for i in lf)) == key:
                iface_nodes.update(cell_nodes[cf, _facet_lattice(elements, lf)])
                break

    solid_nodes = set(np.unique(cell_nodes[mesh.cell_subdomain == SOLID]))
    solidish = np.zeros(n_fe, dtype=bool)
    solidish[list(solid_nodes | iface_nodes)] = True

    block_class = np.empty(n_dofs, dtype=np.int8)
    field_of = np.empty(n_dofs, dtype=np.int8)
    comp_of = np.zeros(n_dofs, dtype=np.int8)
    node_of = np.zeros(n_dofs, dtype=np.int64)
    nodes_rep = np.repeat(np.arange(n_fe), d)
    comps_rep = np.tile(np.arange(d), n_fe)
    # u block
    field_of[: d * n_fe] = 0
    node_of[: d * n_fe] = nodes_rep
    comp_of[: d * n_fe] = comps_rep
    block_class[: d * n_fe] = np.where(solidish[nodes_rep], SOLID_BLOCK, MESH_BLOCK)
    # v block
    field_of[d * n_fe : 2 * d * n_fe] = 1
    node_of[d * n_fe : 2 * d * n_fe] = nodes_rep
    comp_of[d * n_fe : 2 * d * n_fe] = comps_rep
    block_class[d * n_fe : 2 * d * n_fe] = np.where(
        solidish[nodes_rep], SOLID_BLOCK, FLUID_BLOCK
    )
    # p block
    field_of[offset:] = 2
    block_class[offset:] = FLUID_BLOCK
    for rank, c in enumerate(fluid_cells):
        node_of[offset + rank * n_p : offset + (rank + 1) * n_p] = c

    # Dirichlet sets per the benchmark boundary conditions:
    #   v = g on inflow, v = 0 on the walls/obstacle/solid base,
    #   u = 0 on every tagged outer boundary (incl. outflow and solid base).
    dir_set: set[int] = set()
    for tag in BoundaryTag:
        for nd in tag_nodes[tag]:
            for i in range(d):
                dir_set.add(int(nd * d + i))  # u
    for tag in _V_ZERO_TAGS:
        for nd in tag_nodes[tag]:
            for i in range(d):
                dir_set.add(int(n_fe * d + nd * d + i))
    inflow_nodes = sorted(tag_nodes[BoundaryTag.INFLOW])
    inflow_dofs, inflow_comps = [], []
    for nd in inflow_nodes:
        for i in range(d):
            dof = int(n_fe * d + nd * d + i)
            if dof not in dir_set:  # wall corners keep their no-slip zero
                inflow_dofs.append(dof)
                inflow_comps.append(i)
            dir_set.add(dof)
    inflow_dofs = np.array(inflow_dofs, dtype=np.int64)
    order = np.argsort(inflow_dofs) if len(inflow_dofs) else []
    inflow_dofs = inflow_dofs[order] if len(inflow_dofs) else inflow_dofs
    inflow_comps = np.array(inflow_comps, dtype=np.int64)[order]
    inflow_coords = (
        fe_coords[(inflow_dofs - n_fe * d) // d]
        if len(inflow_dofs)
        else np.zeros((0, d))
    )

    return DofMap(
        mesh=mesh,
        elements=elements,
        fe_coords=fe_coords,
        cell_nodes=cell_nodes,
        cell_pdofs=cell_pdofs,
        n_dofs=n_dofs,
        block_class=block_class,
        field_of=field_of,
        comp_of=comp_of,
        node_of=node_of,
        dirichlet_dofs=np.array(sorted(dir_set), dtype=np.int64),
        inflow_dofs=inflow_dofs,
        inflow_coords=inflow_coords,
        inflow_comps=inflow_comps,
        interface_nodes=np.array(sorted(iface_nodes), dtype=np.int64),
        tag_nodes={t: np.array(sorted(s), dtype=np.int64) for t, s in tag_nodes.items()},
    )


def apply_dirichlet(A: sp.csr_matrix, r: np.ndarray, dofmap: DofMap):
    """Replace Dirichlet rows by identity and zero the residual there.

    Boundary values are injected into the state before assembly, so the
    Newton update must vanish at constrained dofs; row replacement with a
    zero right-hand side realizes exactly that.
    """
    mask = dofmap.is_dirichlet()
    keep = sp.diags((~mask).astype(float))
    ident = sp.diags(mask.astype(float))
    A = (keep @ A + ident).tocsr()
    r = r.copy()
    r[mask] = 0.0
    return A, r


def zero_dirichlet_rows(r: np.ndarray, dofmap: DofMap) -> np.ndarray:
    out = r.copy()
    out[dofmap.dirichlet_dofs] = 0.0
    return out
