"""Compare domain-partitioning strategies for the 2D benchmark mesh.

Three ways to hand cells to ranks:

* ``shared``  -- every rank gets a slice of the fluid and a slice of the
  solid, so both sub-solves stay parallel (the recommended strategy),
* ``split``   -- fluid-only and solid-only ranks; simple, but the tiny beam
  leaves its ranks starved of work,
* ``default`` -- coordinate bisection ignoring the subdomains entirely.

For each strategy and rank count this prints the dof imbalance (max over
mean) and the number of facets cut by the partition.

Run:  python3 demos/partitioning.py [refine_level]
"""

import sys

from alefsi.dofs import distribute_dofs
from alefsi.elements import ElementPair
from alefsi.errors import ConfigError
from alefsi.mesh import build_fsi2_mesh
from alefsi.partition import DEFAULT, SHARED, SPLIT, imbalance, partition_mesh


def main():
    level = int(sys.argv[1]) if len(sys.argv) > 1 else 1
    mesh = build_fsi2_mesh(level)
    dofmap = distribute_dofs(mesh, ElementPair(2, mesh.dim))
    print(f"fsi2 mesh, level {level}: {mesh.n_cells} cells, {dofmap.n_dofs} dofs")
    print(f"{'strategy':>9} {'ranks':>6} {'imbalance':>10} {'cut facets':>11}")
    for strategy in (SHARED, SPLIT, DEFAULT):
        for n in (2, 4, 8):
            try:
                rep = imbalance(partition_mesh(mesh, n, strategy), dofmap)
            except ConfigError as exc:
                print(f"{strategy:>9} {n:>6}  ({exc})")
                continue
            print(f"{strategy:>9} {n:>6} {rep.ratio:>10.3f} {rep.cross_facets:>11}")


if __name__ == "__main__":
    main()
