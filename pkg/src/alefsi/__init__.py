"""Monolithic fluid-structure interaction solver on moving meshes.

Fluid (incompressible Navier-Stokes), solid (Saint Venant-Kirchhoff) and
mesh-motion equations are assembled as one nonlinear system per time step,
linearized by an analytic Newton method and solved by restarted GMRES with
an approximate block-LDU preconditioner over the mesh/solid/fluid dof
classes.
"""

from .assembly import (
    FsiState,
    assemble_jacobian,
    assemble_residual,
    evaluate_drag_lift,
    evaluate_point,
    min_detF,
)
from .config import SolverConfig, parse_config, read_config
from .dofs import DofMap, distribute_dofs
from .driver import build_problem, read_timeseries, run
from .elements import ElementPair
from .errors import (
    AlefsiError,
    ConfigError,
    FactorizationError,
    MeshDegenerationError,
    NonconvergenceError,
    QueryError,
    ResourceError,
)
from .linsolve import (
    BlockLduGmresSolver,
    BlockSystem,
    DirectLinearSolver,
    apply_block_ldu,
    exact_ldu_reference,
    extract_blocks,
    fluid_schur_solve,
    gmres,
    read_matrix,
    solid_schur_solve,
    write_matrix,
)
from .materials import MaterialParams, inflow_profile, stvk_stress
from .mesh import (
    Mesh,
    build_box3d_mesh,
    build_fsi2_mesh,
    check_mesh,
    read_mesh_text,
    refine_uniform,
    write_mesh_text,
)
from .newton import NewtonStats, ThetaScheme, advance, newton_core, newton_solve
from .partition import (
    Partition,
    imbalance,
    partition_mesh,
    scaling_run,
    write_scaling_csv,
)

__version__ = "1.0.0"
