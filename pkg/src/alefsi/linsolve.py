"""Sparse block linear algebra for the coupled systems.

The Jacobian is viewed as a 3x3 block matrix over the mesh / solid / fluid
dof classes.  An approximate block-LDU factorization that ignores the
solid-to-mesh coupling and the fluid Schur perturbation serves as a right
preconditioner for restarted GMRES.  The solid diagonal block is solved by
eliminating the velocity through its Schur complement (cheap because the
displacement-displacement block is a mass matrix); the fluid diagonal block
by an Uzawa-like pressure Schur iteration.  An exact dense LDU solver with
all couplings kept acts as the reference oracle in the tests.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dofs import FLUID_BLOCK, MESH_BLOCK, SOLID_BLOCK, DofMap
from .errors import FactorizationError, NonconvergenceError, ResourceError


# ---------------------------------------------------------------------------
# GMRES


def _as_op(operator):
    if callable(operator):
        return operator
    return lambda x: operator @ x


def gmres(
    operator,
    preconditioner,
    b,
    rel_reduction: float = 1.0e3,
    max_iter: int = 1000,
    restart: int = 100,
):
    """Right-preconditioned restarted GMRES.

    Iterates until ``||b - A x||_2 <= ||b||_2 / rel_reduction`` and returns
    ``(x, iterations)``; with right preconditioning the monitored residual is
    the true residual.  Raises :class:`NonconvergenceError` carrying the best
    iterate and the residual history when ``max_iter`` is exhausted.
    """
    A = _as_op(operator)
    M = _as_op(preconditioner) if preconditioner is not None else None
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0
    tol = bnorm / rel_reduction
    x = np.zeros(n)
    history = [bnorm]
    total = 0
    best = (bnorm, x.copy())

    while total < max_iter:
        r = b - A(x)
        beta = np.linalg.norm(r)
        if beta <= tol:
            return x, total
        m = min(restart, max_iter - total)
        V = np.empty((m + 1, n))
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_used = 0
        for k in range(m):
            z = M(V[k]) if M is not None else V[k]
            w = A(z)
            for i in range(k + 1):
                H[i, k] = V[i] @ w
                w -= H[i, k] * V[i]
            h_new = np.linalg.norm(w)
            H[k + 1, k] = h_new
            # Givens rotations keep an incremental residual estimate
            for i in range(k):
                t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = t
            denom = np.hypot(H[k, k], H[k + 1, k])
            if denom == 0.0:
                cs[k], sn[k] = 1.0, 0.0
            else:
                cs[k], sn[k] = H[k, k] / denom, H[k + 1, k] / denom
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            total += 1
            k_used = k + 1
            res_est = abs(g[k + 1])
            history.append(res_est)
            if h_new == 0.0 or res_est <= tol:
                break
            V[k + 1] = w / h_new
        y = scipy.linalg.solve_triangular(H[:k_used, :k_used], g[:k_used])
        dz = V[:k_used].T @ y
        x = x + (M(dz) if M is not None else dz)
        true_res = np.linalg.norm(b - A(x))
        if true_res < best[0]:
            best = (true_res, x.copy())
        if true_res <= tol:
            return x, total
    raise NonconvergenceError(
        f"GMRES did not reach reduction {rel_reduction:g} in {max_iter} iterations",
        best=best[1],
        history=history,
        stats={"iterations": total, "residual": best[0], "target": tol},
    )


# ---------------------------------------------------------------------------
# inner solvers


class SparseDirect:
    """Exact inner solve via sparse LU."""

    def __init__(self, A):
        try:
            self._lu = spla.splu(sp.csc_matrix(A))
        except RuntimeError as exc:
            raise FactorizationError(f"sparse LU failed: {exc}") from exc

    def apply(self, b):
        return self._lu.solve(np.asarray(b, dtype=float))


class IluGmres:
    """Approximate inner solve: ILU-preconditioned GMRES."""

    def __init__(self, A, rel_reduction=1.0e6, max_iter=500, fill_factor=10.0):
        A = sp.csc_matrix(A)
        self._A = A
        self.rel_reduction = rel_reduction
        self.max_iter = max_iter
        try:
            self._ilu = spla.spilu(A, fill_factor=fill_factor)
        except RuntimeError as exc:
            raise FactorizationError(f"ILU failed: {exc}") from exc

    def apply(self, b):
        x, _ = gmres(
            self._A,
            self._ilu.solve,
            b,
            rel_reduction=self.rel_reduction,
            max_iter=self.max_iter,
        )
        return x


class DiagonalJacobi:
    """Diagonal scaling; accuracy is that of one Jacobi sweep (tests only)."""

    def __init__(self, A):
        d = sp.csr_matrix(A).diagonal()
        if np.any(d == 0.0):
            raise FactorizationError("zero diagonal entry in Jacobi inner solver")
        self._dinv = 1.0 / d

    def apply(self, b):
        return self._dinv * b


# ---------------------------------------------------------------------------
# block system


@dataclass
class BlockSystem:
    """3x3 block view {M, C_ms, 0; C_sm, S, C_sf; C_fm, C_fs, F}.

    ``dofs_*`` are the global indices of each class, in ascending order.
    With the default extraction the C_sm slot is structurally empty (the
    coupling is dropped from the preconditioned system); pass
    ``drop_c_sm=False`` to :func:`extract_blocks` for an exact round-trip.
    """

    dofs_m: np.ndarray
    dofs_s: np.ndarray
    dofs_f: np.ndarray
    M: sp.csr_matrix
    S: sp.csr_matrix
    F: sp.csr_matrix
    C_ms: sp.csr_matrix
    C_sm: sp.csr_matrix
    C_sf: sp.csr_matrix
    C_fs: sp.csr_matrix
    C_fm: sp.csr_matrix
    s_u: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    s_v: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    f_v: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    f_p: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def n(self) -> int:
        return len(self.dofs_m) + len(self.dofs_s) + len(self.dofs_f)

    def split(self, vec):
        return vec[self.dofs_m], vec[self.dofs_s], vec[self.dofs_f]

    def join(self, x_m, x_s, x_f):
        out = np.empty(self.n)
        out[self.dofs_m] = x_m
        out[self.dofs_s] = x_s
        out[self.dofs_f] = x_f
        return out

    def merge(self) -> sp.csr_matrix:
        """Reassemble the full matrix in the original global numbering."""
        nm, ns = len(self.dofs_m), len(self.dofs_s)
        perm = np.concatenate([self.dofs_m, self.dofs_s, self.dofs_f])
        B = sp.bmat(
            [
                [self.M, self.C_ms, None],
                [self.C_sm, self.S, self.C_sf],
                [self.C_fm, self.C_fs, self.F],
            ],
            format="coo",
        )
        rows = perm[B.row]
        cols = perm[B.col]
        A = sp.coo_matrix((B.data, (rows, cols)), shape=(self.n, self.n)).tocsr()
        A.sort_indices()
        return A


def extract_blocks(A: sp.csr_matrix, dofmap: DofMap, drop_c_sm: bool = True) -> BlockSystem:
    """Route matrix entries into the 3x3 block layout of the dof classes."""
    m = dofmap.block_dofs(MESH_BLOCK)
    s = dofmap.block_dofs(SOLID_BLOCK)
    f = dofmap.block_dofs(FLUID_BLOCK)
    perm = np.concatenate([m, s, f])
    P = sp.csr_matrix(A)[perm][:, perm].tocsr()
    nm, ns, nf = len(m), len(s), len(f)
    i1, i2 = nm, nm + ns

    def blk(r0, r1, c0, c1):
        B = P[r0:r1, c0:c1].tocsr()
        B.sort_indices()
        return B

    C_sm = blk(i1, i2, 0, i1)
    if drop_c_sm:
        C_sm = sp.csr_matrix((ns, nm))
    fld = dofmap.field_of
    return BlockSystem(
        dofs_m=m,
        dofs_s=s,
        dofs_f=f,
        M=blk(0, i1, 0, i1),
        S=blk(i1, i2, i1, i2),
        F=blk(i2, nm + ns + nf, i2, nm + ns + nf),
        C_ms=blk(0, i1, i1, i2),
        C_sm=C_sm,
        C_sf=blk(i1, i2, i2, nm + ns + nf),
        C_fs=blk(i2, nm + ns + nf, i1, i2),
        C_fm=blk(i2, nm + ns + nf, 0, i1),
        s_u=np.flatnonzero(fld[s] == 0),
        s_v=np.flatnonzero(fld[s] == 1),
        f_v=np.flatnonzero(fld[f] == 1),
        f_p=np.flatnonzero(fld[f] == 2),
    )


# ---------------------------------------------------------------------------
# diagonal-block sub-solvers


class TimedSolver:
    """Wraps an apply() with an accumulated wall-clock counter."""

    def __init__(self):
        self.seconds = 0.0

    def apply(self, b):
        t0 = time.perf_counter()
        out = self._apply(np.asarray(b, dtype=float))
        self.seconds += time.perf_counter() - t0
        return out


class MeshSolver(TimedSolver):
    def __init__(self, M, inner_factory=SparseDirect):
        super().__init__()
        self._inner = inner_factory(M)

    def _apply(self, b):
        return self._inner.apply(b)


class SolidSolver(TimedSolver):
    """Solid block solve by velocity Schur elimination.

    The displacement rows of the solid block form a mass matrix (the
    velocity-displacement relation), so eliminating them leaves the small
    dense Schur complement on the velocities; this mirrors the dedicated
    velocity-elimination solve and is exact.
    """

    def __init__(self, S, s_u, s_v):
        super().__init__()
        self.s_u, self.s_v = s_u, s_v
        A_uu = S[s_u][:, s_u].tocsc()
        self.A_uv = S[s_u][:, s_v].tocsr()
        self.A_vu = S[s_v][:, s_u].tocsr()
        A_vv = S[s_v][:, s_v]
        try:
            self._lu_uu = spla.splu(A_uu)
        except RuntimeError as exc:
            raise FactorizationError(f"solid displacement block singular: {exc}") from exc
        Z = self._lu_uu.solve(self.A_uv.toarray()) if len(s_v) else np.zeros((len(s_u), 0))
        schur = np.asarray(A_vv.todense()) - self.A_vu @ Z
        try:
            self._lu_s = spla.splu(sp.csc_matrix(schur)) if len(s_v) else None
        except RuntimeError as exc:
            raise FactorizationError(f"solid Schur complement singular: {exc}") from exc

    def _apply(self, b):
        r_u, r_v = b[self.s_u], b[self.s_v]
        w = self._lu_uu.solve(r_u)
        out = np.empty_like(b)
        if self._lu_s is not None:
            x_v = self._lu_s.solve(r_v - self.A_vu @ w)
        else:
            x_v = r_v
        out[self.s_v] = x_v
        out[self.s_u] = self._lu_uu.solve(r_u - self.A_uv @ x_v)
        return out


class FluidSolver(TimedSolver):
    """Uzawa-like fluid block solve: velocity solve, pressure Schur GMRES,
    velocity correction."""

    def __init__(
        self,
        F,
        f_v,
        f_p,
        inner_factory=SparseDirect,
        schur_reduction: float = 1.0e2,
        schur_max_iter: int = 200,
    ):
        super().__init__()
        self.f_v, self.f_p = f_v, f_p
        self.A_vv = F[f_v][:, f_v].tocsc()
        self.B = F[f_v][:, f_p].tocsr()
        self.C = F[f_p][:, f_v].tocsr()
        self.schur_reduction = schur_reduction
        self.schur_max_iter = schur_max_iter
        self._vv = inner_factory(self.A_vv)

    def _schur_op(self, x_p):
        return -(self.C @ self._vv.apply(self.B @ x_p))

    def _apply(self, b):
        r_v, r_p = b[self.f_v], b[self.f_p]
        w = self._vv.apply(r_v)
        out = np.empty_like(b)
        if len(self.f_p) == 0 or self.B.nnz == 0:
            out[self.f_v] = w
            out[self.f_p] = 0.0
            return out
        rhs_p = r_p - self.C @ w
        try:
            x_p, _ = gmres(
                self._schur_op,
                None,
                rhs_p,
                rel_reduction=self.schur_reduction,
                max_iter=self.schur_max_iter,
            )
        except NonconvergenceError as exc:
            x_p = exc.best  # best effort is adequate for a preconditioner
        out[self.f_p] = x_p
        out[self.f_v] = w - self._vv.apply(self.B @ x_p)
        return out


def solid_schur_solve(mass, K_vu, rho_s, dt, theta, r_u, r_v, inner_factory=SparseDirect):
    """Velocity-elimination solve of the solid system.

    Solves [[M, -dt*theta*M], [dt*theta*K_vu, rho_s*M]] (x_u, x_v) = (r_u, r_v)
    through the velocity Schur complement rho_s*M + dt^2 theta^2 K_vu:

        x_v = (rho_s M + dt^2 th^2 K_vu)^-1 (r_v - dt th K_vu M^-1 r_u)
        x_u = M^-1 (r_u + dt th M x_v)
    """
    mass = sp.csr_matrix(mass)
    K_vu = sp.csr_matrix(K_vu)
    m_inner = inner_factory(mass)
    schur = (rho_s * mass + dt * dt * theta * theta * K_vu).tocsr()
    s_inner = inner_factory(schur)
    x_v = s_inner.apply(r_v - dt * theta * (K_vu @ m_inner.apply(r_u)))
    x_u = m_inner.apply(r_u + dt * theta * (mass @ x_v))
    return x_u, x_v


def fluid_schur_solve(
    A_vv, B, C, r_v, r_p, inner_factory=SparseDirect, schur_reduction=1.0e2, schur_max_iter=200
):
    """Uzawa-like solve of [[A_vv, B], [C, 0]] (x_v, x_p) = (r_v, r_p)."""
    nv, np_ = len(r_v), len(r_p)
    F = sp.bmat(
        [[sp.csr_matrix(A_vv), sp.csr_matrix(B)], [sp.csr_matrix(C), None]], format="csr"
    )
    fs = FluidSolver(
        F,
        np.arange(nv),
        np.arange(nv, nv + np_),
        inner_factory=inner_factory,
        schur_reduction=schur_reduction,
        schur_max_iter=schur_max_iter,
    )
    out = fs.apply(np.concatenate([r_v, r_p]))
    return out[:nv], out[nv:]


# ---------------------------------------------------------------------------
# Algorithm: approximate block-LDU application


def apply_block_ldu(blocks: BlockSystem, inner: dict, r):
    """One application of the approximate block-LDU preconditioner.

    ``inner`` maps {"mesh", "solid", "fluid"} to solvers with apply().
    ``r`` is a (r_m, r_s, r_f) triple; the five steps in order:
    mesh solve, solid solve, fluid solve with coupled right-hand side,
    solid update, mesh update.  The solid-to-mesh coupling and the fluid
    Schur perturbation are ignored.
    """
    r_m, r_s, r_f = r

    def run(name, fn):
        try:
            return fn()
        except (FactorizationError, NonconvergenceError) as exc:
            raise FactorizationError(f"{name} inner solve failed: {exc}") from exc

    x_m = run("mesh", lambda: inner["mesh"].apply(r_m))
    x_s = run("solid", lambda: inner["solid"].apply(r_s))
    x_f = run(
        "fluid",
        lambda: inner["fluid"].apply(r_f - blocks.C_fm @ x_m - blocks.C_fs @ x_s),
    )
    x_s = x_s - run("solid", lambda: inner["solid"].apply(blocks.C_sf @ x_f))
    x_m = x_m - run("mesh", lambda: inner["mesh"].apply(blocks.C_ms @ x_s))
    return x_m, x_s, x_f


# ---------------------------------------------------------------------------
# dense exact LDU reference


def exact_ldu_reference(blocks: dict, r, size_limit: int = 300):
    """Exact solve through the full dense LDU factorization (oracle only).

    ``blocks`` holds dense arrays M, S, F, C_ms, C_sm, C_sf, C_fs, C_fm;
    ``r`` is the (r_m, r_s, r_f) triple.  Keeps every coupling, including
    C_sm and the fluid Schur perturbation.
    """
    M, S, F = (np.asarray(blocks[k], dtype=float) for k in ("M", "S", "F"))
    C_ms, C_sm = np.asarray(blocks["C_ms"], float), np.asarray(blocks["C_sm"], float)
    C_sf, C_fs = np.asarray(blocks["C_sf"], float), np.asarray(blocks["C_fs"], float)
    C_fm = np.asarray(blocks["C_fm"], float)
    n = M.shape[0] + S.shape[0] + F.shape[0]
    if n > size_limit:
        raise ResourceError(f"dense LDU reference limited to {size_limit} dofs, got {n}")
    r_m, r_s, r_f = (np.asarray(v, dtype=float) for v in r)
    try:
        Minv_Cms = np.linalg.solve(M, C_ms)
        S_t = S - C_sm @ Minv_Cms
        C_fs_t = C_fs - C_fm @ Minv_Cms
        X = F - C_fs_t @ np.linalg.solve(S_t, C_sf)
        # forward substitution with the L factor
        y_m = r_m
        y_s = r_s - C_sm @ np.linalg.solve(M, y_m)
        y_f = r_f - C_fm @ np.linalg.solve(M, y_m) - C_fs_t @ np.linalg.solve(S_t, y_s)
        # diagonal solve and backward substitution with the U factor
        x_f = np.linalg.solve(X, y_f)
        x_s = np.linalg.solve(S_t, y_s - C_sf @ x_f)
        x_m = np.linalg.solve(M, y_m - C_ms @ x_s)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"singular block in dense LDU: {exc}") from exc
    return x_m, x_s, x_f


# ---------------------------------------------------------------------------
# top-level linear solvers with the setup/solve protocol


class DirectLinearSolver:
    """Sparse LU of the full matrix; baseline and small-system fallback."""

    def __init__(self):
        self.stats: dict = {}

    def setup(self, A, dofmap=None):
        t0 = time.perf_counter()
        self._lu = spla.splu(sp.csc_matrix(A))
        self.stats = {"t_setup": time.perf_counter() - t0}

    def solve(self, b):
        t0 = time.perf_counter()
        x = self._lu.solve(np.asarray(b, dtype=float))
        self.stats["t_solve"] = time.perf_counter() - t0
        self.stats["iterations"] = 1
        return x


class BlockLduGmresSolver:
    """GMRES with the approximate block-LDU right preconditioner."""

    def __init__(
        self,
        rel_reduction: float = 1.0e3,
        max_iter: int = 2000,
        restart: int = 100,
        inner_factory=SparseDirect,
        schur_reduction: float = 1.0e2,
        schur_max_iter: int = 200,
    ):
        self.rel_reduction = rel_reduction
        self.max_iter = max_iter
        self.restart = restart
        self.inner_factory = inner_factory
        self.schur_reduction = schur_reduction
        self.schur_max_iter = schur_max_iter
        self.stats: dict = {}

    def setup(self, A, dofmap: DofMap):
        t0 = time.perf_counter()
        self._A = sp.csr_matrix(A)
        bs = extract_blocks(self._A, dofmap)
        self.blocks = bs
        self.inner = {
            "mesh": MeshSolver(bs.M, self.inner_factory),
            "solid": SolidSolver(bs.S, bs.s_u, bs.s_v),
            "fluid": FluidSolver(
                bs.F,
                bs.f_v,
                bs.f_p,
                inner_factory=self.inner_factory,
                schur_reduction=self.schur_reduction,
                schur_max_iter=self.schur_max_iter,
            ),
        }
        self.stats = {"t_setup": time.perf_counter() - t0}

    def _precond(self, r):
        parts = apply_block_ldu(self.blocks, self.inner, self.blocks.split(r))
        return self.blocks.join(*parts)

    def solve(self, b):
        for name in ("mesh", "solid", "fluid"):
            self.inner[name].seconds = 0.0
        t0 = time.perf_counter()
        x, iters = gmres(
            self._A,
            self._precond,
            b,
            rel_reduction=self.rel_reduction,
            max_iter=self.max_iter,
            restart=self.restart,
        )
        self.stats.update(
            t_solve=time.perf_counter() - t0,
            iterations=iters,
            t_mesh=self.inner["mesh"].seconds,
            t_solid=self.inner["solid"].seconds,
            t_fluid=self.inner["fluid"].seconds,
        )
        return x


# ---------------------------------------------------------------------------
# matrix-market io


def write_matrix(path, A):
    """Coordinate-format (1-based) text export."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A))


def read_matrix(path) -> sp.csr_matrix:
    A = sp.csr_matrix(scipy.io.mmread(str(path)))
    A.sort_indices()
    return A
