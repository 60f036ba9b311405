"""Residual and Jacobian assembly of the theta-discretized monolithic system.

The nonlinear system couples, on a fixed reference mesh,

* the incompressible Navier-Stokes equations in ALE form (fluid cells),
* Saint Venant-Kirchhoff elastodynamics (solid cells),
* the nonlinear harmonic mesh motion equation (fluid cells, displacement),

with a do-nothing correction on the outflow boundary.  Momentum and
kinematic equations are scaled by dt; the pressure and the incompressibility
constraint are treated fully implicitly.  The Jacobian is the exact
directional derivative of the residual, evaluated per local basis direction
with the closed-form derivatives of J, F, F^-1 and E.

Assembly is vectorized over cells.  With ``threads > 1`` disjoint cell
chunks are integrated concurrently into private buffers and merged in a
fixed chunk order, so results are reproducible for a given chunk layout.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import elements as el
from .dofs import MESH_BLOCK, DofMap, _facet_axis_side
from .errors import QueryError
from .materials import KinematicState, MaterialParams, deformation_state, stvk_stress
from .mesh import FLUID, SOLID, BoundaryTag


@dataclass
class FsiState:
    """Solution (u, v, p) at one time level, as one flat dof vector."""

    t: float
    vec: np.ndarray

    @classmethod
    def zero(cls, dofmap: DofMap, t: float = 0.0) -> "FsiState":
        return cls(t, np.zeros(dofmap.n_dofs))

    def copy(self) -> "FsiState":
        return FsiState(self.t, self.vec.copy())


# ---------------------------------------------------------------------------
# precomputed geometry / basis data


@dataclass
class FacetBatch:
    cells: np.ndarray  # (nf,)
    N: np.ndarray  # (nloc, nqf)
    gradphi: np.ndarray  # (nf, nqf, nloc, d)
    nds: np.ndarray  # (nf, nqf, d): outward normal * surface weight
    udofs: np.ndarray  # (nf, nloc, d)
    vdofs: np.ndarray
    pdofs: np.ndarray  # (nf, n_p)
    Np: np.ndarray  # (n_p, nqf)


class AssemblyContext:
    """Quadrature, physical gradients and dof index tables for one DofMap."""

    def __init__(self, dofmap: DofMap):
        mesh, ep = dofmap.mesh, dofmap.elements
        d = mesh.dim
        self.dofmap = dofmap
        rule = el.cell_rule(d, ep.quad_degree)
        self.qp, self.qw = rule.points, rule.weights
        self.N, self.dN = el.shape_eval(ep.order, d, self.qp)
        self.Np = el.pressure_eval(ep.order, d, self.qp)

        verts = mesh.nodes[mesh.cells]  # (nc, 2^d, d)
        N1, dN1 = el.shape_eval(1, d, self.qp)
        geoJ = np.einsum("cvi,vqa->cqia", verts, dN1)
        detJ = np.linalg.det(geoJ)
        invJ = np.linalg.inv(geoJ)
        self.detJw = detJ * self.qw[None, :]
        # physical gradients of the Q(k) basis
        self.gradphi = np.einsum("aqr,cqri->cqai", self.dN, invJ)

        n_fe = dofmap.n_fe
        self.udofs = dofmap.cell_nodes[:, :, None] * d + np.arange(d)
        self.vdofs = self.udofs + n_fe * d
        self.pdofs = dofmap.cell_pdofs
        self.fluid_cells = np.flatnonzero(mesh.cell_subdomain == FLUID)
        self.solid_cells = np.flatnonzero(mesh.cell_subdomain == SOLID)

        # the mesh motion equation is tested only with functions vanishing on
        # the interface: drop its contributions to solid-block u rows
        urows = self.udofs.reshape(mesh.n_cells, -1)
        self.mesh_row_keep = (dofmap.block_class[urows] == MESH_BLOCK).astype(float)

        self.outflow = self._facet_batch(self._tagged_facets(BoundaryTag.OUTFLOW))
        drag_facets = self._tagged_facets(BoundaryTag.OBSTACLE)
        drag_facets += [
            (cf, self._local_facet(cf, key)) for key, cf, _ in mesh.interface_facets()
        ]
        self.drag = self._facet_batch(drag_facets)

    def _local_facet(self, c, key):
        mesh = self.dofmap.mesh
        cell = mesh.cells[c]
        for f, lf in enumerate(mesh.local_facets()):
            if tuple(sorted(cell[i] for i in lf)) == key:
                return f
        raise AssertionError("facet not in cell")

    def _tagged_facets(self, tag):
        mesh = self.dofmap.mesh
        owner = mesh.boundary_facets()
        return [
            (owner[key], self._local_facet(owner[key], key))
            for key, t in mesh.facet_tags.items()
            if t is tag
        ]

    def _facet_batch(self, facet_list) -> FacetBatch | None:
        if not facet_list:
            return None
        dofmap, mesh, ep = self.dofmap, self.dofmap.mesh, self.dofmap.elements
        d = mesh.dim
        rule = el.facet_rule(d, ep.quad_degree)
        batches = []
        for lf_id in sorted({f for _, f in facet_list}):
            cells = np.array([c for c, f in facet_list if f == lf_id])
            ref = el.facet_ref_points(d, lf_id, rule.points)
            N, dN = el.shape_eval(ep.order, d, ref)
            Np = el.pressure_eval(ep.order, d, ref)
            verts = mesh.nodes[mesh.cells[cells]]
            N1, dN1 = el.shape_eval(1, d, ref)
            geoJ = np.einsum("cvi,vqa->cqia", verts, dN1)
            invJ = np.linalg.inv(geoJ)
            detJ = np.linalg.det(geoJ)
            axis, side = _facet_axis_side(mesh.local_facets()[lf_id], d)
            nref = np.zeros(d)
            nref[axis] = 1.0 if side else -1.0
            # Nanson: n ds = det(J) J^{-T} n_ref dS
            nds = np.einsum("cqri,r->cqi", invJ, nref) * detJ[..., None]
            nds *= rule.weights[None, :, None]
            gradphi = np.einsum("aqr,cqri->cqai", dN, invJ)
            udofs = dofmap.cell_nodes[cells][:, :, None] * d + np.arange(d)
            batches.append(
                FacetBatch(
                    cells=cells,
                    N=N,
                    gradphi=gradphi,
                    nds=nds,
                    udofs=udofs,
                    vdofs=udofs + dofmap.n_fe * d,
                    pdofs=dofmap.cell_pdofs[cells],
                    Np=Np,
                )
            )
        return batches


_CTX_CACHE: dict[int, AssemblyContext] = {}


def get_context(dofmap: DofMap) -> AssemblyContext:
    key = id(dofmap)
    ctx = _CTX_CACHE.get(key)
    if ctx is None or ctx.dofmap is not dofmap:
        ctx = AssemblyContext(dofmap)
        _CTX_CACHE.clear()
        _CTX_CACHE[key] = ctx
    return ctx


# ---------------------------------------------------------------------------
# point evaluation helpers


def _local_fields(ctx: AssemblyContext, vec, cells):
    """u, gu, v, gv, p at the quadrature points of the given cells."""
    U = vec[ctx.udofs[cells]]  # (nc, nloc, d)
    V = vec[ctx.vdofs[cells]]
    g = ctx.gradphi[cells]
    u = np.einsum("cai,aq->cqi", U, ctx.N)
    v = np.einsum("cai,aq->cqi", V, ctx.N)
    gu = np.einsum("cai,cqak->cqik", U, g)
    gv = np.einsum("cai,cqak->cqik", V, g)
    p = None
    pd = ctx.pdofs[cells]
    if np.all(pd >= 0):
        P = vec[pd]
        p = np.einsum("ck,kq->cq", P, ctx.Np)
    return u, gu, v, gv, p


def _kin(gu, cells, nq) -> KinematicState:
    cell_of_point = np.repeat(cells, nq).reshape(len(cells), nq)
    return deformation_state(gu, cell_of_point)


def _mT(a):
    return np.swapaxes(a, -1, -2)


# ---------------------------------------------------------------------------
# residual


def assemble_residual(
    state: FsiState,
    prev: FsiState,
    params: MaterialParams,
    dt: float,
    theta: float,
    dofmap: DofMap,
    apply_bc: bool = True,
    threads: int = 1,
) -> np.ndarray:
    """Nonlinear residual of one implicit time step.

    ``apply_bc`` zeroes the Dirichlet rows (the prescribed values must
    already be injected into ``state``).
    """
    ctx = get_context(dofmap)
    r = np.zeros(dofmap.n_dofs)
    for chunk_r in _map_chunks(
        ctx, threads, lambda cf, cs: _residual_chunk(ctx, state, prev, params, dt, theta, cf, cs)
    ):
        r += chunk_r
    _residual_outflow(ctx, state, prev, params, dt, theta, r)
    if apply_bc:
        r[dofmap.dirichlet_dofs] = 0.0
    return r


def _map_chunks(ctx, threads, fn):
    nfl, nsl = len(ctx.fluid_cells), len(ctx.solid_cells)
    threads = max(1, int(threads))
    fl = np.array_split(ctx.fluid_cells, threads)
    sl = np.array_split(ctx.solid_cells, threads)
    if threads == 1:
        return [fn(fl[0], sl[0])]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(lambda cs: fn(*cs), zip(fl, sl)))


def _fluid_point_terms(ctx, state, prev, params, cells):
    """Shared kinematic/field data of the fluid cells."""
    nq = len(ctx.qw)
    u, gu, v, gv, p = _local_fields(ctx, state.vec, cells)
    u0, gu0, v0, gv0, _ = _local_fields(ctx, prev.vec, cells)
    kin = _kin(gu, cells, nq)
    kin0 = _kin(gu0, cells, nq)
    conv = gv @ kin.F_inv
    conv0 = gv0 @ kin0.F_inv
    return u, gu, v, gv, p, u0, v0, gv0, kin, kin0, conv, conv0


def _residual_chunk(ctx, state, prev, params, dt, theta, fluid_cells, solid_cells):
    r = np.zeros(ctx.dofmap.n_dofs)
    rho_f, nu_f = params.rho_f, params.nu_f

    if len(fluid_cells):
        u, gu, v, gv, p, u0, v0, gv0, kin, kin0, conv, conv0 = _fluid_point_terms(
            ctx, state, prev, params, fluid_cells
        )
        J, FiT = kin.J, _mT(kin.F_inv)
        J0, Fi0T = kin0.J, _mT(kin0.F_inv)
        Jth = theta * J + (1.0 - theta) * J0

        mv = lambda A, w: np.einsum("cqik,cqk->cqi", A, w)
        av = rho_f * Jth[..., None] * (v - v0)
        av -= rho_f * J[..., None] * mv(conv, u - u0)
        av += dt * theta * rho_f * J[..., None] * mv(conv, v)
        av += dt * (1 - theta) * rho_f * J0[..., None] * mv(conv0, v0)

        sigv = rho_f * nu_f * (conv + _mT(conv))
        sigv0 = rho_f * nu_f * (conv0 + _mT(conv0))
        Gv = dt * theta * J[..., None, None] * (sigv @ FiT)
        Gv += dt * (1 - theta) * J0[..., None, None] * (sigv0 @ Fi0T)
        Gv -= dt * (p * J)[..., None, None] * FiT  # pressure fully implicit

        ap = J * np.trace(conv, axis1=-2, axis2=-1)
        Gu = gu / J[..., None, None]

        _scatter_vec(ctx, r, fluid_cells, ctx.vdofs, av, Gv)
        _scatter_vec(ctx, r, fluid_cells, ctx.udofs, None, Gu, ctx.mesh_row_keep)
        _scatter_p(ctx, r, fluid_cells, ap)

    if len(solid_cells):
        nq = len(ctx.qw)
        u, gu, v, gv, _ = _local_fields(ctx, state.vec, solid_cells)
        u0, gu0, v0, _, _ = _local_fields(ctx, prev.vec, solid_cells)
        kin = _kin(gu, solid_cells, nq)
        kin0 = _kin(gu0, solid_cells, nq)
        Sig = stvk_stress(kin.E, params)
        Sig0 = stvk_stress(kin0.E, params)
        av = params.rho_s * (v - v0)
        Gv = dt * theta * (kin.F @ Sig) + dt * (1 - theta) * (kin0.F @ Sig0)
        au = (u - u0) - dt * theta * v - dt * (1 - theta) * v0
        _scatter_vec(ctx, r, solid_cells, ctx.vdofs, av, Gv)
        _scatter_vec(ctx, r, solid_cells, ctx.udofs, au, None)
    return r


def _scatter_vec(ctx, r, cells, dof_table, a, G, row_keep=None):
    """Accumulate value-flux a and gradient-flux G against the vector basis."""
    w = ctx.detJw[cells]
    loc = 0.0
    if a is not None:
        loc = loc + np.einsum("cq,aq,cqi->cai", w, ctx.N, a)
    if G is not None:
        loc = loc + np.einsum("cq,cqak,cqik->cai", w, ctx.gradphi[cells], G)
    loc = loc.reshape(len(cells), -1)
    if row_keep is not None:
        loc = loc * row_keep[cells]
    np.add.at(r, dof_table[cells].reshape(len(cells), -1), loc)


def _scatter_p(ctx, r, cells, ap):
    w = ctx.detJw[cells]
    loc = np.einsum("cq,kq,cq->ck", w, ctx.Np, ap)
    np.add.at(r, ctx.pdofs[cells], loc)


def _residual_outflow(ctx, state, prev, params, dt, theta, r):
    if ctx.outflow is None:
        return
    for fb in ctx.outflow:
        for st, weight in ((state, dt * theta), (prev, dt * (1 - theta))):
            if weight == 0.0:
                continue
            tr = _outflow_traction(ctx, fb, st, params)
            loc = -weight * np.einsum("aq,cqi->cai", fb.N, tr)
            np.add.at(r, fb.vdofs.reshape(len(fb.cells), -1), loc.reshape(len(fb.cells), -1))


def _outflow_traction(ctx, fb: FacetBatch, st: FsiState, params):
    """rho nu J F^-T grad(v)^T F^-T n, with n ds folded into the weight."""
    U = st.vec[fb.udofs]
    V = st.vec[fb.vdofs]
    gu = np.einsum("cai,cqak->cqik", U, fb.gradphi)
    gv = np.einsum("cai,cqak->cqik", V, fb.gradphi)
    kin = _kin(gu, fb.cells, fb.nds.shape[1])
    FiT = _mT(kin.F_inv)
    M = FiT @ _mT(gv) @ FiT
    return params.rho_f * params.nu_f * kin.J[..., None] * np.einsum(
        "cqik,cqk->cqi", M, fb.nds
    )


# ---------------------------------------------------------------------------
# Jacobian


def assemble_jacobian(
    state: FsiState,
    prev: FsiState,
    params: MaterialParams,
    dt: float,
    theta: float,
    dofmap: DofMap,
    apply_bc: bool = True,
    threads: int = 1,
) -> sp.csr_matrix:
    """Analytic directional derivative of :func:`assemble_residual`."""
    ctx = get_context(dofmap)
    triplets = _map_chunks(
        ctx, threads, lambda cf, cs: _jacobian_chunk(ctx, state, prev, params, dt, theta, cf, cs)
    )
    rows = np.concatenate([t[0] for t in triplets])
    cols = np.concatenate([t[1] for t in triplets])
    vals = np.concatenate([t[2] for t in triplets])
    ro, co, vo = _jacobian_outflow(ctx, state, params, dt, theta)
    rows, cols, vals = (
        np.concatenate([rows, ro]),
        np.concatenate([cols, co]),
        np.concatenate([vals, vo]),
    )
    A = sp.coo_matrix(
        (vals, (rows, cols)), shape=(dofmap.n_dofs, dofmap.n_dofs)
    ).tocsr()
    A.eliminate_zeros()
    if apply_bc:
        mask = dofmap.is_dirichlet()
        A = (sp.diags((~mask).astype(float)) @ A + sp.diags(mask.astype(float))).tocsr()
    A.sort_indices()
    return A


def _direction_tables(ctx, cells):
    """Basis-direction values/gradients for the vector fields.

    Directions are ordered like the local dof tables: node index slow,
    component fast.  Shapes: dval (nq, nj, d), dgrad (nc, nq, nj, d, d).
    """
    d = ctx.dofmap.dim
    eye = np.eye(d)
    dval = np.einsum("aq,li->qali", ctx.N, eye)
    nq, nloc = dval.shape[0], dval.shape[1]
    dval = dval.reshape(nq, nloc * d, d)
    g = ctx.gradphi[cells]
    dgrad = np.einsum("cqak,li->cqalik", g, eye)
    dgrad = dgrad.reshape(len(cells), nq, nloc * d, d, d)
    return dval, dgrad


def _contract_mat(ctx, cells, dav, dGv):
    """Local matrices (nc, n_test, nj) for vector-valued test functions."""
    w = ctx.detJw[cells]
    out = 0.0
    if dav is not None:
        out = out + np.einsum("cq,aq,cqji->caij", w, ctx.N, dav)
    if dGv is not None:
        out = out + np.einsum("cq,cqak,cqjik->caij", w, ctx.gradphi[cells], dGv)
    nc, nloc = out.shape[0], out.shape[1]
    return out.reshape(nc, nloc * out.shape[2], out.shape[3])


def _contract_pressure_test(ctx, cells, dap):
    w = ctx.detJw[cells]
    return np.einsum("cq,kq,cqj->ckj", w, ctx.Np, dap)


def _jacobian_chunk(ctx, state, prev, params, dt, theta, fluid_cells, solid_cells):
    rows, cols, vals = [], [], []
    d = ctx.dofmap.dim
    rho_f, nu_f = params.rho_f, params.nu_f

    def emit(cells, loc, test_table, trial_cols):
        nc = len(cells)
        t = test_table[cells].reshape(nc, -1)
        rows.append(np.repeat(t, trial_cols.shape[1], axis=1).ravel())
        cols.append(np.tile(trial_cols.reshape(nc, 1, -1), (1, t.shape[1], 1)).ravel())
        vals.append(loc.ravel())

    if len(fluid_cells):
        u, gu, v, gv, p, u0, v0, gv0, kin, kin0, conv, conv0 = _fluid_point_terms(
            ctx, state, prev, params, fluid_cells
        )
        J, Fi, FiT = kin.J, kin.F_inv, _mT(kin.F_inv)
        J0 = kin0.J
        Jth = theta * J + (1.0 - theta) * J0
        sigv = rho_f * nu_f * (conv + _mT(conv))
        dval, dgrad = _direction_tables(ctx, fluid_cells)
        ucols = ctx.udofs[fluid_cells].reshape(len(fluid_cells), -1)
        vcols = ctx.vdofs[fluid_cells].reshape(len(fluid_cells), -1)
        pcols = ctx.pdofs[fluid_cells]

        vmw = v - v0
        umw = u - u0
        trconv = np.trace(conv, axis1=-2, axis2=-1)

        # --- u-directions (mesh motion unknowns enter the fluid terms)
        dgu = dgrad
        dJ = J[..., None] * np.einsum("cqik,cqjki->cqj", Fi, dgu)
        dFi = -np.einsum("cqik,cqjkl,cqlm->cqjim", Fi, dgu, Fi)
        dFiT = _mT(dFi)
        dconv = np.einsum("cqik,cqjkl->cqjil", gv, dFi)
        dsig = rho_f * nu_f * (dconv + _mT(dconv))

        dav = rho_f * theta * dJ[..., None] * vmw[:, :, None, :]
        dav -= rho_f * (
            dJ[..., None] * np.einsum("cqik,cqk->cqi", conv, umw)[:, :, None, :]
            + J[..., None, None] * np.einsum("cqjik,cqk->cqji", dconv, umw)
            + J[..., None, None] * np.einsum("cqik,qjk->cqji", conv, dval)
        )
        dav += (
            dt
            * theta
            * rho_f
            * (
                dJ[..., None] * np.einsum("cqik,cqk->cqi", conv, v)[:, :, None, :]
                + J[..., None, None] * np.einsum("cqjik,cqk->cqji", dconv, v)
            )
        )
        dGv = dt * theta * (
            dJ[..., None, None] * (sigv @ FiT)[:, :, None]
            + J[..., None, None, None] * (dsig @ FiT[:, :, None])
            + J[..., None, None, None] * np.einsum("cqik,cqjkl->cqjil", sigv, dFiT)
        )
        dGv -= dt * (
            (p * J)[..., None, None, None] * dFiT
            + (p[..., None] * dJ)[..., None, None] * FiT[:, :, None]
        )
        dap = dJ * trconv[..., None] + J[..., None] * np.einsum(
            "cqjii->cqj", dconv
        )
        dGu = dgu / J[..., None, None, None] - (
            gu[:, :, None] * (dJ / (J[..., None] ** 2))[..., None, None]
        )
        emit(fluid_cells, _contract_mat(ctx, fluid_cells, dav, dGv), ctx.vdofs, ucols)
        loc_uu = _contract_mat(ctx, fluid_cells, None, dGu)
        loc_uu *= ctx.mesh_row_keep[fluid_cells][:, :, None]
        emit(fluid_cells, loc_uu, ctx.udofs, ucols)
        emit(
            fluid_cells,
            _contract_pressure_test(ctx, fluid_cells, dap),
            ctx.pdofs,
            ucols,
        )

        # --- v-directions
        dconv_v = np.einsum("cqjik,cqkl->cqjil", dgrad, Fi)
        dsig_v = rho_f * nu_f * (dconv_v + _mT(dconv_v))
        dav_v = rho_f * Jth[..., None, None] * dval[None, :, :, :]
        dav_v -= rho_f * J[..., None, None] * np.einsum("cqjik,cqk->cqji", dconv_v, umw)
        dav_v += (
            dt
            * theta
            * rho_f
            * J[..., None, None]
            * (
                np.einsum("cqjik,cqk->cqji", dconv_v, v)
                + np.einsum("cqik,qjk->cqji", conv, dval)
            )
        )
        dGv_v = dt * theta * J[..., None, None, None] * (dsig_v @ FiT[:, :, None])
        dap_v = J[..., None] * np.einsum("cqjii->cqj", dconv_v)
        emit(fluid_cells, _contract_mat(ctx, fluid_cells, dav_v, dGv_v), ctx.vdofs, vcols)
        emit(
            fluid_cells,
            _contract_pressure_test(ctx, fluid_cells, dap_v),
            ctx.pdofs,
            vcols,
        )

        # --- p-directions
        dp = ctx.Np.T[None, :, :]  # (1, nq, n_p)
        dGv_p = -dt * (J[..., None])[..., None, None] * dp[..., None, None] * FiT[
            :, :, None
        ]
        emit(fluid_cells, _contract_mat(ctx, fluid_cells, None, dGv_p), ctx.vdofs, pcols)

    if len(solid_cells):
        nq = len(ctx.qw)
        u, gu, v, gv, _ = _local_fields(ctx, state.vec, solid_cells)
        kin = _kin(gu, solid_cells, nq)
        Sig = stvk_stress(kin.E, params)
        dval, dgrad = _direction_tables(ctx, solid_cells)
        ucols = ctx.udofs[solid_cells].reshape(len(solid_cells), -1)
        vcols = ctx.vdofs[solid_cells].reshape(len(solid_cells), -1)

        # u-directions: stress linearization and the kinematic mass
        FT_dF = np.einsum("cqki,cqjkl->cqjil", kin.F, dgrad)
        dE = 0.5 * (FT_dF + _mT(FT_dF))
        trdE = np.einsum("cqjii->cqj", dE)
        eye = np.eye(d)
        dSig = 2.0 * params.mu * dE + params.lam * trdE[..., None, None] * eye
        dGv_u = dt * theta * (
            np.einsum("cqjik,cqkl->cqjil", dgrad, Sig)
            + np.einsum("cqik,cqjkl->cqjil", kin.F, dSig)
        )
        emit(solid_cells, _contract_mat(ctx, solid_cells, None, dGv_u), ctx.vdofs, ucols)
        dau_u = np.broadcast_to(
            dval[None], (len(solid_cells),) + dval.shape
        )
        emit(solid_cells, _contract_mat(ctx, solid_cells, dau_u, None), ctx.udofs, ucols)

        # v-directions: solid mass and kinematic coupling
        dav_v = params.rho_s * np.broadcast_to(dval[None], (len(solid_cells),) + dval.shape)
        emit(solid_cells, _contract_mat(ctx, solid_cells, dav_v, None), ctx.vdofs, vcols)
        dau_v = -dt * theta * dav_v / params.rho_s
        emit(solid_cells, _contract_mat(ctx, solid_cells, dau_v, None), ctx.udofs, vcols)

    return (
        np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64),
        np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64),
        np.concatenate(vals) if vals else np.zeros(0),
    )


def _jacobian_outflow(ctx, state, params, dt, theta):
    rows, cols, vals = [], [], []
    if ctx.outflow is not None and dt * theta != 0.0:
        for fb in ctx.outflow:
            nc = len(fb.cells)
            U = state.vec[fb.udofs]
            V = state.vec[fb.vdofs]
            gu = np.einsum("cai,cqak->cqik", U, fb.gradphi)
            gv = np.einsum("cai,cqak->cqik", V, fb.gradphi)
            kin = _kin(gu, fb.cells, fb.nds.shape[1])
            Fi, FiT, J = kin.F_inv, _mT(kin.F_inv), kin.J
            gvT = _mT(gv)
            d = ctx.dofmap.dim
            eye = np.eye(d)
            dval = np.einsum("aq,li->qali", fb.N, eye).reshape(fb.N.shape[1], -1, d)
            dgrad = np.einsum("cqak,li->cqalik", fb.gradphi, eye).reshape(
                nc, fb.N.shape[1], -1, d, d
            )
            coef = params.rho_f * params.nu_f * dt * theta

            # v-directions
            Mv = np.einsum("cqik,cqjlk,cqlm->cqjim", FiT, dgrad, FiT)
            dtr_v = -coef * J[..., None, None] * np.einsum(
                "cqjik,cqk->cqji", Mv, fb.nds
            )
            # u-directions
            dJ = J[..., None] * np.einsum("cqik,cqjki->cqj", Fi, dgrad)
            dFi = -np.einsum("cqik,cqjkl,cqlm->cqjim", Fi, dgrad, Fi)
            dFiT = _mT(dFi)
            M = FiT @ gvT @ FiT
            dM = (
                np.einsum("cqjik,cqkl,cqlm->cqjim", dFiT, gvT, FiT)
                + np.einsum("cqik,cqkl,cqjlm->cqjim", FiT, gvT, dFiT)
            )
            dtr_u = -coef * (
                dJ[..., None] * np.einsum("cqik,cqk->cqi", M, fb.nds)[:, :, None, :]
                + J[..., None, None] * np.einsum("cqjik,cqk->cqji", dM, fb.nds)
            )
            for dtr, dof_cols in ((dtr_v, fb.vdofs), (dtr_u, fb.udofs)):
                loc = np.einsum("aq,cqji->caij", fb.N, dtr)
                loc = loc.reshape(nc, -1, loc.shape[-1])
                t = fb.vdofs.reshape(nc, -1)
                tc = dof_cols.reshape(nc, -1)
                rows.append(np.repeat(t, tc.shape[1], axis=1).ravel())
                cols.append(np.tile(tc[:, None, :], (1, t.shape[1], 1)).ravel())
                vals.append(loc.ravel())
    if not rows:
        z = np.zeros(0, dtype=np.int64)
        return z, z, np.zeros(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


# ---------------------------------------------------------------------------
# functionals


def evaluate_drag_lift(state: FsiState, dofmap: DofMap, params: MaterialParams):
    """Surface force on the obstacle+beam boundary, reference configuration.

    Integrates J sigma_f F^-T n over the fluid-side facets with n the
    outward normal of the body (pointing into the fluid), which yields the
    physical force the fluid exerts on the obstacle: positive drag for flow
    past the cylinder.  Returns (F_D, F_L) in 2D and (F_D, F_L, F_z) in 3D.
    """
    ctx = get_context(dofmap)
    force = np.zeros(dofmap.dim)
    if ctx.drag is None:
        return tuple(force)
    from .materials import fluid_stress

    for fb in ctx.drag:
        U = state.vec[fb.udofs]
        V = state.vec[fb.vdofs]
        gu = np.einsum("cai,cqak->cqik", U, fb.gradphi)
        gv = np.einsum("cai,cqak->cqik", V, fb.gradphi)
        P = state.vec[fb.pdofs]
        p = np.einsum("ck,kq->cq", P, fb.Np)
        kin = _kin(gu, fb.cells, fb.nds.shape[1])
        sig = fluid_stress(gv, p, kin, params)
        FiT = _mT(kin.F_inv)
        tr = kin.J[..., None, None] * (sig @ FiT)
        # fb.nds is the fluid-cell outward normal; the body normal is its negative
        force -= np.einsum("cqik,cqk->i", tr, fb.nds)
    return tuple(force)


def min_detF(state: FsiState, dofmap: DofMap) -> float:
    """Smallest det(I + grad u) over all cells and quadrature points."""
    ctx = get_context(dofmap)
    cells = np.arange(dofmap.mesh.n_cells)
    U = state.vec[ctx.udofs]
    gu = np.einsum("cai,cqak->cqik", U, ctx.gradphi)
    F = np.broadcast_to(np.eye(dofmap.dim), gu.shape) + gu
    return float(np.linalg.det(F).min())


def evaluate_point(state: FsiState, dofmap: DofMap, point) -> np.ndarray:
    """Displacement u interpolated at a point of the solid reference domain."""
    mesh, ep = dofmap.mesh, dofmap.elements
    point = np.asarray(point, dtype=float)
    d = mesh.dim
    for c in np.flatnonzero(mesh.cell_subdomain == SOLID):
        verts = mesh.nodes[mesh.cells[c]]
        lo, hi = verts.min(axis=0), verts.max(axis=0)
        if np.any(point < lo - 1e-9) or np.any(point > hi + 1e-9):
            continue
        ref = _invert_cell_map(verts, point, d)
        if ref is None:
            continue
        N, _ = el.shape_eval(ep.order, d, ref[None, :])
        U = state.vec[get_context(dofmap).udofs[c]]
        return np.einsum("ai,aq->i", U, N)
    raise QueryError(f"point {point} not found in the solid domain")


def _invert_cell_map(verts, point, d, tol=1e-11):
    """Newton inversion of the multilinear reference-to-physical map."""
    ref = np.full(d, 0.5)
    for _ in range(50):
        N1, dN1 = el.shape_eval(1, d, ref[None, :])
        x = np.einsum("vq,vi->i", N1, verts)
        Jg = np.einsum("vqa,vi->ia", dN1, verts)
        delta = np.linalg.solve(Jg, point - x)
        ref += delta
        if np.linalg.norm(delta) < tol:
            break
    if np.any(ref < -1e-8) or np.any(ref > 1 + 1e-8):
        return None
    return np.clip(ref, 0.0, 1.0)
