"""Shared fixtures and small structured meshes for the test suite."""

import numpy as np
import pytest

from alefsi.elements import ElementPair
from alefsi.dofs import distribute_dofs
from alefsi.mesh import FLUID, BoundaryTag, Mesh, build_fsi2_mesh


def rect_mesh(nx, ny, lx=1.0, ly=1.0):
    """All-fluid channel rectangle: inflow left, outflow right, walls top/bottom."""
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    nodes = np.array([[x, y] for y in ys for x in xs])
    cells = []
    for j in range(ny):
        for i in range(nx):
            n0 = j * (nx + 1) + i
            cells.append([n0, n0 + 1, n0 + nx + 1, n0 + nx + 2])
    mesh = Mesh(
        2,
        nodes,
        np.array(cells, dtype=np.int64),
        np.full(len(cells), FLUID, dtype=np.uint8),
    )
    tags = {}
    for key in mesh.boundary_facets():
        pts = nodes[list(key)]
        if np.allclose(pts[:, 0], 0.0):
            tags[key] = BoundaryTag.INFLOW
        elif np.allclose(pts[:, 0], lx):
            tags[key] = BoundaryTag.OUTFLOW
        elif np.allclose(pts[:, 1], 0.0):
            tags[key] = BoundaryTag.BOTTOM
        else:
            tags[key] = BoundaryTag.TOP
    mesh.facet_tags = tags
    return mesh


@pytest.fixture(scope="session")
def fsi2_mesh():
    return build_fsi2_mesh(0)


@pytest.fixture(scope="session")
def fsi2_dofmap_q1(fsi2_mesh):
    return distribute_dofs(fsi2_mesh, ElementPair(1, 2))


@pytest.fixture(scope="session")
def fsi2_dofmap_q2(fsi2_mesh):
    return distribute_dofs(fsi2_mesh, ElementPair(2, 2))
