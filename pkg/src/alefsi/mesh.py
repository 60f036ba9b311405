"""Quad/hex benchmark meshes with subdomain and boundary tagging.

Meshes are built as tensor-product grids whose coordinate lines are chosen so
that the fluid-solid interface always coincides with cell faces.  The rigid
cylinder of the 2D channel benchmark is approximated polygonally: the cells
covering it are removed and the remaining hole-boundary vertices are snapped
radially onto the true circle (and re-snapped after every refinement).
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ResourceError

FLUID = 0
SOLID = 1

#: hard caps on uniform refinement (memory guard, documented in README)
MAX_REFINE_2D = 6
MAX_REFINE_3D = 4

# 2D channel benchmark geometry
CHANNEL_LENGTH = 2.5
CHANNEL_HEIGHT = 0.41
CYLINDER_CENTER = (0.2, 0.2)
CYLINDER_RADIUS = 0.05
BEAM_THICKNESS = 0.02
BEAM_TIP_X = 0.6
#: x-coordinate where the beam meets the circle: 0.2 + sqrt(r^2 - 0.01^2)
BEAM_ATTACH_X = 0.2 + np.sqrt(CYLINDER_RADIUS**2 - (BEAM_THICKNESS / 2) ** 2)

# 3D channel-with-obstacle geometry
BOX_L = 1.5
BOX_H = 0.4
OBSTACLE_X = (0.4, 0.5)
OBSTACLE_H = 0.3
OBSTACLE_Z = (-0.2, 0.2)


class BoundaryTag(enum.Enum):
    INFLOW = "inflow"
    OUTFLOW = "outflow"
    TOP = "top"
    BOTTOM = "bottom"
    OBSTACLE = "obstacle"
    SOLID_BASE = "solid_base"


# local facet vertex indices, tensor vertex ordering
# 2D quad vertices: (0,0) (1,0) (0,1) (1,1)
FACETS_2D = ((0, 1), (1, 3), (2, 3), (0, 2))
# 3D hex vertex index = i + 2j + 4k
FACETS_3D = (
    (0, 2, 4, 6),  # x = 0
    (1, 3, 5, 7),  # x = 1
    (0, 1, 4, 5),  # y = 0
    (2, 3, 6, 7),  # y = 1
    (0, 1, 2, 3),  # z = 0
    (4, 5, 6, 7),  # z = 1
)


@dataclass
class Mesh:
    """Conforming quad/hex mesh with Fluid/Solid cell tags.

    ``cells`` holds vertex indices in tensor ordering.  ``facet_tags`` maps a
    sorted vertex tuple of a boundary facet to its :class:`BoundaryTag`.
    A constructed mesh is treated as immutable and may be shared freely.
    """

    dim: int
    nodes: np.ndarray
    cells: np.ndarray
    cell_subdomain: np.ndarray
    facet_tags: dict = field(default_factory=dict)
    #: (center, radius) of the snapped circular obstacle, 2D meshes only
    circle: tuple | None = None

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def local_facets(self):
        return FACETS_2D if self.dim == 2 else FACETS_3D

    def facet_cells(self) -> dict:
        """Map sorted facet vertex tuple -> list of adjacent cell indices."""
        out: dict[tuple, list[int]] = {}
        for c, cell in enumerate(self.cells):
            for loc in self.local_facets():
                key = tuple(sorted(cell[i] for i in loc))
                out.setdefault(key, []).append(c)
        return out

    def boundary_facets(self) -> dict:
        """Sorted facet tuple -> owning cell, for facets on the boundary."""
        return {k: cs[0] for k, cs in self.facet_cells().items() if len(cs) == 1}

    def interface_facets(self) -> list:
        """Facets shared by exactly one Fluid and one Solid cell.

        Returns (facet_key, fluid_cell, solid_cell) triples.
        """
        sub = self.cell_subdomain
        out = []
        for key, cs in self.facet_cells().items():
            if len(cs) == 2 and sub[cs[0]] != sub[cs[1]]:
                cf, csld = (cs[0], cs[1]) if sub[cs[0]] == FLUID else (cs[1], cs[0])
                out.append((key, cf, csld))
        return out

    def cell_measures(self) -> np.ndarray:
        """Per-cell area/volume of the (multi)linear cells."""
        return _cell_measures(self.nodes, self.cells, self.dim)


def _cell_measures(nodes, cells, dim):
    # 2-point Gauss per direction integrates det(J) of a (multi)linear map
    # exactly in 2D and 3D.
    g = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
    pts = np.stack(np.meshgrid(*([g] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    w = np.full(len(pts), 1.0 / len(pts) * 1.0)
    verts = nodes[cells]  # (nc, 2^d, d)
    meas = np.zeros(len(cells))
    for p, wq in zip(pts, w):
        dN = _lin_shape_grads(p, dim)  # (2^d, d)
        J = np.einsum("cvi,vj->cij", verts, dN)
        meas += wq * np.linalg.det(J)
    return meas


def _lin_shape_grads(p, dim):
    # gradients of the 2^d multilinear vertex shape functions at ref point p
    vals1d = [np.array([1.0 - x, x]) for x in p]
    grads1d = [np.array([-1.0, 1.0]) for _ in p]
    n = 2**dim
    out = np.zeros((n, dim))
    for v in range(n):
        idx = [(v >> a) & 1 for a in range(dim)]
        for a in range(dim):
            g = 1.0
            for b in range(dim):
                g *= grads1d[b][idx[b]] if b == a else vals1d[b][idx[b]]
            out[v, a] = g
    return out


def _tensor_grid(axes, dim):
    """Nodes and tensor-ordered cells of a structured grid."""
    shape = [len(a) for a in axes]
    coords = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    nodes = coords.reshape(-1, dim)

    def nid(idx):
        # row-major flat index matching meshgrid(indexing="ij").reshape(-1, d)
        out = 0
        for a in range(dim):
            out = out * shape[a] + idx[a]
        return out

    cells = []
    ranges = [range(s - 1) for s in shape]

    for idx in itertools.product(*reversed(ranges)):
        idx = tuple(reversed(idx))
        verts = []
        for v in range(2**dim):
            off = [(v >> a) & 1 for a in range(dim)]
            verts.append(nid([idx[a] + off[a] for a in range(dim)]))
        cells.append(verts)
    return nodes, np.array(cells, dtype=np.int64)


def _compress(nodes, cells, keep_cells):
    cells = cells[keep_cells]
    used = np.unique(cells)
    remap = -np.ones(nodes.shape[0], dtype=np.int64)
    remap[used] = np.arange(len(used))
    return nodes[used], remap[cells], remap


def _snap_to_circle(nodes, ids, center, radius):
    c = np.asarray(center)
    for i in ids:
        d = nodes[i] - c
        r = np.linalg.norm(d)
        if r > 0:
            nodes[i] = c + d * (radius / r)


def build_fsi2_mesh(refine_level: int = 0) -> Mesh:
    """Channel [0,2.5]x[0,0.41] with polygonal cylinder and elastic beam.

    The beam occupies [BEAM_ATTACH_X, 0.6] x [0.19, 0.21] and is tagged
    Solid; the attachment facet at x = BEAM_ATTACH_X carries SOLID_BASE,
    the rest of the hole perimeter OBSTACLE.
    """
    if refine_level < 0:
        raise ConfigError("refine_level must be nonnegative")
    if refine_level > MAX_REFINE_2D:
        raise ResourceError(f"refine_level {refine_level} > maximum {MAX_REFINE_2D}")

    xa = BEAM_ATTACH_X
    xs = [0.0, 0.05, 0.1, 0.15, 0.2, xa]
    xs += list(xa + (BEAM_TIP_X - xa) / 7 * np.arange(1, 8))
    xs += list(BEAM_TIP_X + 0.19 * np.arange(1, 11))
    xs = np.array(xs)
    ys = np.array([0.0, 0.05, 0.1, 0.15, 0.19, 0.21, 0.25, 0.3, 0.35, CHANNEL_HEIGHT])

    nodes, cells = _tensor_grid([xs, ys], 2)
    centers = nodes[cells].mean(axis=1)

    hole = (
        (centers[:, 0] > 0.15)
        & (centers[:, 0] < xa)
        & (centers[:, 1] > 0.15)
        & (centers[:, 1] < 0.25)
    )
    hole_nodes = set(np.unique(cells[hole]))
    nodes, cells, _ = _compress(nodes, cells, ~hole)

    centers = nodes[cells].mean(axis=1)
    solid = (
        (centers[:, 0] > xa)
        & (centers[:, 0] < BEAM_TIP_X)
        & (centers[:, 1] > 0.19)
        & (centers[:, 1] < 0.21)
    )
    subdomain = np.where(solid, SOLID, FLUID).astype(np.uint8)

    mesh = Mesh(2, nodes, cells, subdomain, circle=(CYLINDER_CENTER, CYLINDER_RADIUS))

    # snap the hole perimeter onto the circle before tagging
    perim = [
        i
        for i, x in enumerate(nodes)
        if (0.15 - 1e-12 <= x[0] <= xa + 1e-12 and 0.15 - 1e-12 <= x[1] <= 0.25 + 1e-12)
    ]
    _snap_to_circle(nodes, perim, CYLINDER_CENTER, CYLINDER_RADIUS)

    tags = {}
    for key, c in mesh.boundary_facets().items():
        p = nodes[list(key)]
        if np.all(np.abs(p[:, 0]) < 1e-12):
            tags[key] = BoundaryTag.INFLOW
        elif np.all(np.abs(p[:, 0] - CHANNEL_LENGTH) < 1e-12):
            tags[key] = BoundaryTag.OUTFLOW
        elif np.all(np.abs(p[:, 1]) < 1e-12):
            tags[key] = BoundaryTag.BOTTOM
        elif np.all(np.abs(p[:, 1] - CHANNEL_HEIGHT) < 1e-12):
            tags[key] = BoundaryTag.TOP
        elif subdomain[c] == SOLID:
            tags[key] = BoundaryTag.SOLID_BASE
        else:
            tags[key] = BoundaryTag.OBSTACLE
    mesh.facet_tags = tags

    for _ in range(refine_level):
        mesh = refine_uniform(mesh)
    return mesh


def build_box3d_mesh(refine_level: int = 0) -> Mesh:
    """Box (0,1.5)x(0,0.4)x(-0.4,0.4) with solid inclusion on the floor.

    The grid is symmetric under z -> -z; inclusion faces align with cell
    faces.  Channel walls carry TOP except the floor (BOTTOM); the solid
    floor facets carry SOLID_BASE.
    """
    if refine_level < 0:
        raise ConfigError("refine_level must be nonnegative")
    if refine_level > MAX_REFINE_3D:
        raise ResourceError(f"refine_level {refine_level} > maximum {MAX_REFINE_3D}")

    xs = np.array([0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.625, 0.75, 0.875, 1.0, 1.25, 1.5])
    ys = np.array([0.0, 0.1, 0.2, 0.3, 0.4])
    zs = np.array([-0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4])

    nodes, cells = _tensor_grid([xs, ys, zs], 3)
    centers = nodes[cells].mean(axis=1)
    solid = (
        (centers[:, 0] > OBSTACLE_X[0])
        & (centers[:, 0] < OBSTACLE_X[1])
        & (centers[:, 1] < OBSTACLE_H)
        & (centers[:, 2] > OBSTACLE_Z[0])
        & (centers[:, 2] < OBSTACLE_Z[1])
    )
    subdomain = np.where(solid, SOLID, FLUID).astype(np.uint8)
    mesh = Mesh(3, nodes, cells, subdomain)

    tags = {}
    for key, c in mesh.boundary_facets().items():
        p = nodes[list(key)]
        if np.all(np.abs(p[:, 0]) < 1e-12):
            tags[key] = BoundaryTag.INFLOW
        elif np.all(np.abs(p[:, 0] - BOX_L) < 1e-12):
            tags[key] = BoundaryTag.OUTFLOW
        elif np.all(np.abs(p[:, 1]) < 1e-12):
            tags[key] = (
                BoundaryTag.SOLID_BASE if subdomain[c] == SOLID else BoundaryTag.BOTTOM
            )
        else:
            tags[key] = BoundaryTag.TOP
    mesh.facet_tags = tags

    for _ in range(refine_level):
        mesh = refine_uniform(mesh)
    return mesh


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every cell into 2^d children; tags are inherited.

    New nodes are created on edges/faces/cell interiors keyed by their parent
    vertex sets, which keeps the refined mesh conforming.  For meshes with a
    circular obstacle, vertices on OBSTACLE facets are re-snapped.
    """
    dim = mesh.dim
    nodes = [x for x in mesh.nodes]
    entity: dict[tuple, int] = {}

    def node_for(vset):
        vset = tuple(sorted(set(vset)))
        if len(vset) == 1:
            return vset[0]
        if vset not in entity:
            entity[vset] = len(nodes)
            nodes.append(np.mean([mesh.nodes[v] for v in vset], axis=0))
        return entity[vset]


    new_cells = []
    new_sub = []
    # child vertex at grid position g in {0,1,2}^d interpolates the parent
    # vertices whose coordinates bracket g
    def parent_set(cell, grid):
        sets = []
        for a, g in enumerate(grid):
            sets.append((0,) if g == 0 else (1,) if g == 2 else (0, 1))
        vids = []
        for combo in itertools.product(*sets):
            v = sum(b << a for a, b in enumerate(combo))
            vids.append(cell[v])
        return vids

    for c, cell in enumerate(mesh.cells):
        for off in itertools.product(*([range(2)] * dim)):
            verts = []
            for v in range(2**dim):
                grid = tuple(off[a] + ((v >> a) & 1) for a in range(dim))
                verts.append(node_for(parent_set(cell, grid)))
            new_cells.append(verts)
            new_sub.append(mesh.cell_subdomain[c])

    out = Mesh(
        dim,
        np.array(nodes),
        np.array(new_cells, dtype=np.int64),
        np.array(new_sub, dtype=np.uint8),
        circle=mesh.circle,
    )

    # a child boundary facet inherits the tag of the unique parent facet that
    # contains the parent entities of all its vertices
    rev_entity = {nid: vset for vset, nid in entity.items()}
    tags = {}
    for key, _c in out.boundary_facets().items():
        union = set()
        for v in key:
            union.update(rev_entity.get(v, (v,)))
        pkey = tuple(sorted(union))
        if pkey in mesh.facet_tags:
            tags[key] = mesh.facet_tags[pkey]
    out.facet_tags = tags

    if out.circle is not None:
        snap = set()
        for key, tag in tags.items():
            if tag is BoundaryTag.OBSTACLE:
                snap.update(key)
        _snap_to_circle(out.nodes, sorted(snap), *out.circle)
    return out


def check_mesh(mesh: Mesh):
    """Validate the structural mesh invariants; raises AssertionError."""
    fc = mesh.facet_cells()
    for key, cs in fc.items():
        assert len(cs) in (1, 2), f"facet {key} shared by {len(cs)} cells"
        if len(cs) == 1:
            assert key in mesh.facet_tags, f"untagged boundary facet {key}"
    for key, cf, cs in mesh.interface_facets():
        assert mesh.cell_subdomain[cf] == FLUID and mesh.cell_subdomain[cs] == SOLID
    assert np.all(mesh.cell_measures() > 0), "negative cell measure"


def write_mesh_text(mesh: Mesh, path):
    """Plain-text mesh format; see README for the grammar."""
    with open(path, "w") as f:
        f.write(f"{mesh.dim} {mesh.n_nodes} {mesh.n_cells}\n")
        for x in mesh.nodes:
            f.write(" ".join(repr(float(v)) for v in x) + "\n")
        for cell, sub in zip(mesh.cells, mesh.cell_subdomain):
            f.write(" ".join(str(int(v)) for v in cell) + f" {int(sub)}\n")
        f.write(f"{len(mesh.facet_tags)}\n")
        for key, tag in mesh.facet_tags.items():
            f.write(" ".join(str(int(v)) for v in key) + f" {tag.value}\n")


def read_mesh_text(path) -> Mesh:
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    try:
        dim, n_nodes, n_cells = (int(v) for v in lines[0].split())
        nodes = np.array(
            [[float(v) for v in ln.split()] for ln in lines[1 : 1 + n_nodes]]
        )
        pos = 1 + n_nodes
        cells, sub = [], []
        for ln in lines[pos : pos + n_cells]:
            parts = [int(v) for v in ln.split()]
            cells.append(parts[:-1])
            sub.append(parts[-1])
        pos += n_cells
        n_tags = int(lines[pos])
        tags = {}
        for ln in lines[pos + 1 : pos + 1 + n_tags]:
            parts = ln.split()
            key = tuple(sorted(int(v) for v in parts[:-1]))
            tags[key] = BoundaryTag(parts[-1])
    except (ValueError, IndexError) as e:
        raise ConfigError(f"malformed mesh file {path}: {e}") from e
    return Mesh(
        dim,
        nodes,
        np.array(cells, dtype=np.int64),
        np.array(sub, dtype=np.uint8),
        facet_tags=tags,
    )
