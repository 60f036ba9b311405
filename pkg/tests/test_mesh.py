import numpy as np
import pytest

from alefsi.errors import ResourceError
from alefsi.mesh import (
    FLUID,
    SOLID,
    BoundaryTag,
    build_box3d_mesh,
    build_fsi2_mesh,
    check_mesh,
    read_mesh_text,
    refine_uniform,
    write_mesh_text,
)
from conftest import rect_mesh


def polygon_area(pts):
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


class TestFsi2Mesh:
    def test_invariants(self, fsi2_mesh):
        check_mesh(fsi2_mesh)
        sub = fsi2_mesh.cell_subdomain
        assert set(np.unique(sub)) == {FLUID, SOLID}
        for key, cf, cs in fsi2_mesh.interface_facets():
            assert sub[cf] == FLUID and sub[cs] == SOLID

    def test_beam_cells_solid(self, fsi2_mesh):
        # the elastic beam occupies y in [0.19, 0.21] behind the cylinder
        centers = fsi2_mesh.nodes[fsi2_mesh.cells].mean(axis=1)
        solid = fsi2_mesh.cell_subdomain == SOLID
        assert solid.any()
        assert np.all(np.abs(centers[solid, 1] - 0.2) < 0.01 + 1e-12)
        assert np.all(centers[solid, 0] < 0.6)
        # the displacement reference point lies on a solid cell boundary
        verts = fsi2_mesh.nodes[fsi2_mesh.cells[solid]]
        on_cell = np.any(
            (verts[..., 0].min(axis=1) <= 0.6 + 1e-12)
            & (verts[..., 0].max(axis=1) >= 0.6 - 1e-12)
            & (verts[..., 1].min(axis=1) <= 0.2 + 1e-12)
            & (verts[..., 1].max(axis=1) >= 0.2 - 1e-12)
        )
        assert on_cell

    def test_cell_areas_partition_domain(self, fsi2_mesh):
        # total cell area = channel area minus the polygonal cylinder hole
        circle_nodes = set()
        for key, tag in fsi2_mesh.facet_tags.items():
            if tag is BoundaryTag.OBSTACLE:
                circle_nodes.update(key)
        pts = fsi2_mesh.nodes[sorted(circle_nodes)]
        center = np.array(fsi2_mesh.circle[0])
        angles = np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0])
        hole = polygon_area(pts[np.argsort(angles)])
        total = fsi2_mesh.cell_measures().sum()
        assert total == pytest.approx(2.5 * 0.41 - hole, abs=1e-12)

    def test_refine_quadruples_cells(self, fsi2_mesh):
        fine = refine_uniform(fsi2_mesh)
        check_mesh(fine)
        assert fine.n_cells == 4 * fsi2_mesh.n_cells

    def test_refine_inherits_subdomain(self, fsi2_mesh):
        fine = refine_uniform(fsi2_mesh)
        parents = np.repeat(fsi2_mesh.cell_subdomain, 4)
        assert np.array_equal(fine.cell_subdomain, parents)

    def test_refine_doubles_interface_facets(self, fsi2_mesh):
        fine = refine_uniform(fsi2_mesh)
        assert len(fine.interface_facets()) == 2 * len(fsi2_mesh.interface_facets())

    def test_snapped_circle_radius(self, fsi2_mesh):
        center, radius = fsi2_mesh.circle
        nodes = set()
        for key, tag in fsi2_mesh.facet_tags.items():
            if tag is BoundaryTag.OBSTACLE:
                nodes.update(key)
        r = np.linalg.norm(fsi2_mesh.nodes[sorted(nodes)] - center, axis=1)
        assert np.allclose(r, radius, atol=1e-12)

    def test_refine_level_limit(self):
        with pytest.raises(ResourceError):
            build_fsi2_mesh(99)


class TestBox3dMesh:
    def test_invariants(self):
        mesh = build_box3d_mesh(0)
        check_mesh(mesh)

    def test_solid_volume(self):
        mesh = build_box3d_mesh(0)
        vols = mesh.cell_measures()
        solid = mesh.cell_subdomain == SOLID
        assert vols[solid].sum() == pytest.approx(0.1 * 0.3 * 0.4, abs=1e-12)

    def test_z_symmetry(self):
        mesh = build_box3d_mesh(0)
        flipped = mesh.nodes * np.array([1.0, 1.0, -1.0])
        orig = {tuple(np.round(x, 12)) for x in mesh.nodes}
        assert {tuple(np.round(x, 12)) for x in flipped} == orig

    def test_refine_octuples_cells(self):
        mesh = build_box3d_mesh(0)
        fine = refine_uniform(mesh)
        assert fine.n_cells == 8 * mesh.n_cells
        assert len(fine.interface_facets()) == 4 * len(mesh.interface_facets())


class TestRefineUnitSquare:
    def test_counts(self):
        mesh = rect_mesh(1, 1)
        fine = refine_uniform(mesh)
        assert fine.n_cells == 4
        assert fine.n_nodes == 9
        check_mesh(fine)


class TestMeshTextFormat:
    def test_round_trip(self, fsi2_mesh, tmp_path):
        path = tmp_path / "mesh.txt"
        write_mesh_text(fsi2_mesh, path)
        back = read_mesh_text(path)
        assert back.dim == fsi2_mesh.dim
        assert np.array_equal(back.nodes, fsi2_mesh.nodes)
        assert np.array_equal(back.cells, fsi2_mesh.cells)
        assert np.array_equal(back.cell_subdomain, fsi2_mesh.cell_subdomain)
        assert back.facet_tags == fsi2_mesh.facet_tags
