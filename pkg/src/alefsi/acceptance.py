"""Verification suite: one check per solver guarantee.

Each criterion function returns a :class:`CriterionResult` and draws shared
expensive artifacts (benchmark runs, saved Jacobians) from a cache dict so
the whole suite runs each experiment once.  All random draws use fixed
seeds, so repeated runs produce identical reports.
"""

from __future__ import annotations

import os
import statistics
import tempfile
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import (
    FsiState,
    assemble_jacobian,
    assemble_residual,
    evaluate_point,
    min_detF,
)
from .config import SolverConfig
from .driver import build_problem, make_inflow, make_linsolver
from .errors import AlefsiError, NonconvergenceError
from .linsolve import (
    BlockLduGmresSolver,
    exact_ldu_reference,
    gmres,
    read_matrix,
    solid_schur_solve,
    write_matrix,
)
from .newton import SHIFTED_CN, ThetaScheme, advance
from .partition import SHARED, SPLIT, imbalance, partition_mesh, scaling_run


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    environment_sensitive: bool = False

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        tag = " [environment-sensitive]" if self.environment_sensitive else ""
        return (
            f"criterion {self.number:2d} {status}{tag}  {self.name}: "
            f"{self.detail} ({self.seconds:.1f}s)"
        )


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# ---------------------------------------------------------------------------
# shared experiment artifacts


def fsi2_benchmark_artifacts(cache: dict) -> dict:
    """Coarse channel-flow run: spin up to t=2, then 20 fine steps.

    Records Newton iteration counts, the first Newton system of selected
    steps (matrix and right-hand side), continuity-row residual norms and
    the minimum deformation determinant of every accepted state.
    """
    if "fsi2_run" in cache:
        return cache["fsi2_run"]
    t0 = time.perf_counter()
    cfg = SolverConfig(benchmark="fsi2", refine_level=0, order=2)
    mesh, dofmap, params, _ = build_problem(cfg)
    inflow = make_inflow(cfg)
    linsolver = make_linsolver(cfg)
    p_dofs = np.flatnonzero(dofmap.field_of == 2)

    # spin-up with large steps to reach the developed-flow window
    state = FsiState.zero(dofmap, 0.0)
    coarse = ThetaScheme(SHIFTED_CN, 0.05)
    for step in range(1, 41):
        state, _ = advance(state, step * 0.05, coarse, params, linsolver, dofmap, inflow=inflow)

    dt = 0.005
    fine = ThetaScheme(SHIFTED_CN, dt)
    newton_iters = []
    continuity = []  # (continuity residual inf-norm, initial residual inf-norm)
    min_J = []
    systems = []  # first Newton system (A, b) of selected steps
    save_at = {1, 10, 20}
    for step in range(1, 21):
        t_new = 2.0 + step * dt
        if step in save_at:
            guess = FsiState(t_new, state.vec.copy())
            dofmap.inject_dirichlet(guess.vec, t_new, inflow)
            A = assemble_jacobian(guess, state, params, dt, fine.theta, dofmap)
            b = assemble_residual(guess, state, params, dt, fine.theta, dofmap)
            systems.append((A, b))
        prev = state
        state, stats = advance(state, t_new, fine, params, linsolver, dofmap, inflow=inflow)
        newton_iters.append(stats.iterations)
        r = assemble_residual(state, prev, params, dt, fine.theta, dofmap)
        continuity.append(
            (float(np.linalg.norm(r[p_dofs], ord=np.inf)), float(stats.residuals[0]))
        )
        min_J.append(min_detF(state, dofmap))

    out = {
        "dofmap": dofmap,
        "newton_iters": newton_iters,
        "continuity": continuity,
        "min_J": min_J,
        "systems": systems,
        "seconds": time.perf_counter() - t0,
    }
    cache["fsi2_run"] = out
    return out


def fsi2_level2_dofmap(cache: dict):
    if "level2" not in cache:
        cfg = SolverConfig(benchmark="fsi2", refine_level=2, order=2)
        mesh, dofmap, params, _ = build_problem(cfg)
        cache["level2"] = (mesh, dofmap, params)
    return cache["level2"]


# ---------------------------------------------------------------------------
# criteria


def criterion_1(cache: dict) -> CriterionResult:
    """Exact dense block-LDU solves random coupled systems to round-off."""

    def body():
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(50):
            nm, ns, nf = rng.integers(5, 21, size=3)
            blocks = {}
            for key, (nr, nc) in {
                "M": (nm, nm),
                "S": (ns, ns),
                "F": (nf, nf),
                "C_ms": (nm, ns),
                "C_sm": (ns, nm),
                "C_sf": (ns, nf),
                "C_fs": (nf, ns),
                "C_fm": (nf, nm),
            }.items():
                B = rng.standard_normal((nr, nc))
                if nr == nc:
                    B += (nr + nc) * np.eye(nr)  # keep the pivots well conditioned
                blocks[key] = B
            r = (
                rng.standard_normal(nm),
                rng.standard_normal(ns),
                rng.standard_normal(nf),
            )
            x_m, x_s, x_f = exact_ldu_reference(blocks, r)
            A = np.block(
                [
                    [blocks["M"], blocks["C_ms"], np.zeros((nm, nf))],
                    [blocks["C_sm"], blocks["S"], blocks["C_sf"]],
                    [blocks["C_fm"], blocks["C_fs"], blocks["F"]],
                ]
            )
            rhs = np.concatenate(r)
            res = np.linalg.norm(rhs - A @ np.concatenate([x_m, x_s, x_f]))
            worst = max(worst, res / np.linalg.norm(rhs))
        return worst

    worst, secs = _timed(body)
    passed = worst <= 1.0e-10 and secs < 5.0
    return CriterionResult(
        1,
        "exact block-LDU oracle",
        passed,
        f"max rel residual {worst:.2e} over 50 random systems",
        secs,
    )


def criterion_2(cache: dict) -> CriterionResult:
    """Analytic Jacobian matches central finite differences of the residual."""

    def body():
        cfg = SolverConfig(benchmark="fsi2", refine_level=0, order=2)
        _, dofmap, params, _ = build_problem(cfg)
        rng = np.random.default_rng(7)
        dt, theta = 0.005, 0.505
        # per-field scales keeping the perturbed mesh admissible (det F > 0)
        scale = np.where(dofmap.field_of == 0, 2.0e-4, np.where(dofmap.field_of == 1, 0.1, 1.0))
        worst = 0.0
        h = 1.0e-6
        for _ in range(20):
            x = scale * rng.standard_normal(dofmap.n_dofs)
            prev = FsiState(0.0, scale * rng.standard_normal(dofmap.n_dofs))
            d = rng.standard_normal(dofmap.n_dofs)
            d /= np.linalg.norm(d)
            A = assemble_jacobian(FsiState(dt, x), prev, params, dt, theta, dofmap, apply_bc=False)
            rp = assemble_residual(
                FsiState(dt, x + h * d), prev, params, dt, theta, dofmap, apply_bc=False
            )
            rm = assemble_residual(
                FsiState(dt, x - h * d), prev, params, dt, theta, dofmap, apply_bc=False
            )
            fd = (rp - rm) / (2.0 * h)
            err = np.linalg.norm(A @ d - fd) / np.linalg.norm(fd)
            worst = max(worst, err)
        return worst

    worst, secs = _timed(body)
    passed = worst <= 1.0e-5 and secs < 60.0
    return CriterionResult(
        2,
        "Jacobian vs finite differences",
        passed,
        f"max rel error {worst:.2e} over 20 states/directions",
        secs,
    )


def criterion_3(cache: dict) -> CriterionResult:
    art = fsi2_benchmark_artifacts(cache)
    iters = art["newton_iters"]
    med = statistics.median(iters)
    passed = (
        all(1 <= n <= 12 for n in iters) and 3 <= med <= 10 and art["seconds"] < 600.0
    )
    return CriterionResult(
        3,
        "Newton iteration counts",
        passed,
        f"per-step iterations {min(iters)}..{max(iters)}, median {med:g}",
        art["seconds"],
    )


def criterion_4(cache: dict, workdir=None) -> CriterionResult:
    """Block preconditioning halves (at least) the GMRES iteration count."""
    art = fsi2_benchmark_artifacts(cache)

    def body():
        dofmap = art["dofmap"]
        cap = 2000
        rows = []
        ok = True
        with tempfile.TemporaryDirectory(dir=workdir) as tmp:
            for k, (A, b) in enumerate(art["systems"]):
                path = os.path.join(tmp, f"jacobian_{k}.mtx")
                write_matrix(path, A)
                A = read_matrix(path)
                solver = BlockLduGmresSolver(rel_reduction=1.0e3)
                solver.setup(A, dofmap)
                solver.solve(b)
                n_pre = solver.stats["iterations"]
                try:
                    _, n_plain = gmres(A, None, b, rel_reduction=1.0e3, max_iter=cap)
                except NonconvergenceError:
                    n_plain = cap  # lower bound on the true count
                rows.append((n_pre, n_plain))
                ok = ok and n_pre <= 200 and n_pre <= 0.5 * n_plain
        return ok, rows

    (ok, rows), secs = _timed(body)
    passed = ok and len(rows) >= 3 and secs < 300.0
    detail = ", ".join(f"{a} vs >={b}" for a, b in rows)
    return CriterionResult(
        4,
        "preconditioner effectiveness",
        passed,
        f"preconditioned vs plain GMRES iterations: {detail}",
        secs,
    )


def criterion_5(cache: dict) -> CriterionResult:
    """Zero inflow keeps the state at rest; continuity rows converge."""
    art = fsi2_benchmark_artifacts(cache)

    def body():
        cfg = SolverConfig(benchmark="fsi2", refine_level=0, order=2, inflow_scale=0.0, t_end=0.05)
        _, dofmap, params, _ = build_problem(cfg)
        scheme = ThetaScheme(cfg.theta, cfg.dt)
        linsolver = make_linsolver(cfg)
        state = FsiState.zero(dofmap, 0.0)
        rest_max = 0.0
        for step in range(1, 11):
            state, _ = advance(state, step * cfg.dt, scheme, params, linsolver, dofmap)
            rest_max = max(rest_max, float(np.abs(state.vec).max()))
        cont_ok = all(c <= 1.0e-6 * r0 for c, r0 in art["continuity"])
        worst = max(c / r0 for c, r0 in art["continuity"])
        return rest_max, cont_ok, worst

    (rest_max, cont_ok, worst), secs = _timed(body)
    passed = rest_max == 0.0 and cont_ok
    return CriterionResult(
        5,
        "rest state and incompressibility",
        passed,
        f"zero-inflow max |x| = {rest_max:g}; continuity rows <= {worst:.2e} of r0",
        secs,
    )


def criterion_6(cache: dict) -> CriterionResult:
    art = fsi2_benchmark_artifacts(cache)
    j_min = min(art["min_J"])
    return CriterionResult(
        6,
        "mesh admissibility",
        j_min > 0.0,
        f"min det F over all accepted steps = {j_min:.4f}",
        0.0,
    )


def criterion_7(cache: dict) -> CriterionResult:
    """Channel-around-beam 3D flow stays planar: u_z is negligible."""

    def body():
        # spin up past the initial ramp so the deflection clears the floor of
        # genuinely three-dimensional (lateral-contraction) displacement,
        # then measure a 20-step window at the fine step size
        cfg = SolverConfig(benchmark="box3d", refine_level=0, order=2, dt=0.01)
        mesh, dofmap, params, points = build_problem(cfg)
        inflow = make_inflow(cfg)
        linsolver = make_linsolver(cfg)

        state = FsiState.zero(dofmap, 0.0)
        t_spin, dt_spin = 0.6, 0.05
        coarse = ThetaScheme(SHIFTED_CN, dt_spin)
        for step in range(1, int(round(t_spin / dt_spin)) + 1):
            state, _ = advance(
                state, step * dt_spin, coarse, params, linsolver, dofmap, inflow=inflow
            )

        dt = 0.01
        fine = ThetaScheme(SHIFTED_CN, dt)
        max_ux = max_uz = mid_uz = 0.0
        n_rows = 0
        status = 0
        for step in range(1, 21):
            try:
                state, _ = advance(
                    state, t_spin + step * dt, fine, params, linsolver, dofmap, inflow=inflow
                )
            except AlefsiError:
                status = 1
                break
            for p in points:
                disp = evaluate_point(state, dofmap, p)
                max_ux = max(max_ux, abs(float(disp[0])))
                max_uz = max(max_uz, abs(float(disp[2])))
                if p[2] == 0.0:  # points on the z = 0 symmetry midplane
                    mid_uz = max(mid_uz, abs(float(disp[2])))
            n_rows += 1
        return status, n_rows, max_ux, max_uz, mid_uz

    (status, n_rows, max_ux, max_uz, mid_uz), secs = _timed(body)
    passed = status == 0 and n_rows == 20 and max_uz <= 1.0e-2 * max_ux and secs < 1200.0
    return CriterionResult(
        7,
        "3D planar symmetry",
        passed,
        f"max |u_z| {max_uz:.2e} vs max |u_x| {max_ux:.2e} over {n_rows} steps"
        f" (midplane-point |u_z| {mid_uz:.1e})",
        secs,
    )


def criterion_8(cache: dict) -> CriterionResult:
    def body():
        mesh, dofmap, _ = fsi2_level2_dofmap(cache)
        results = []
        pure = True
        for n in (2, 4):
            shared = imbalance(partition_mesh(mesh, n, SHARED), dofmap)
            split_part = partition_mesh(mesh, n, SPLIT)
            split = imbalance(split_part, dofmap)
            for rank in range(n):
                subs = set(mesh.cell_subdomain[split_part.owned_cells(rank)].tolist())
                pure = pure and len(subs) <= 1
            results.append((n, shared.ratio, split.ratio))
        ok = pure and all(sp_r >= sh_r for _, sh_r, sp_r in results)
        return ok, results, pure

    (ok, results, pure), secs = _timed(body)
    detail = "; ".join(f"n={n}: shared {sh:.3f}, split {spl:.3f}" for n, sh, spl in results)
    return CriterionResult(
        8,
        "partition balance ordering",
        ok and secs < 10.0,
        f"{detail}; split purity {pure}",
        secs,
    )


def criterion_9(cache: dict) -> CriterionResult:
    """Parallel assembly speedup and fluid-dominated preconditioner cost.

    The speedup half needs real hardware parallelism, so the whole criterion
    is flagged environment-sensitive.
    """

    def body():
        mesh, dofmap, params = fsi2_level2_dofmap(cache)
        cfg = SolverConfig(benchmark="fsi2", refine_level=2, order=2)
        rows = scaling_run(dofmap, params, (1, 4), inflow=make_inflow(cfg))
        t1 = rows[0]["t_assemble_s"]
        t4 = rows[1]["t_assemble_s"]
        speedup = t1 / t4 if t4 > 0 else float("inf")
        fluid_dominant = all(
            row["t_fluid_s"] >= max(row["t_solid_s"], row["t_mesh_s"]) for row in rows
        )
        return speedup, fluid_dominant, os.cpu_count()

    (speedup, fluid_dominant, ncpu), secs = _timed(body)
    passed = speedup >= 2.0 and fluid_dominant
    return CriterionResult(
        9,
        "assembly scaling and fluid dominance",
        passed,
        f"1->4 thread assembly speedup {speedup:.2f} on {ncpu} cpu(s); "
        f"fluid sub-solve dominant: {fluid_dominant}",
        secs,
        environment_sensitive=True,
    )


def criterion_10(cache: dict) -> CriterionResult:
    """Velocity-Schur solid solve equals the dense solve of the 2x2 system."""

    def body():
        rng = np.random.default_rng(23)
        rho_s, dt, theta = 1.0e4, 0.005, 0.505
        worst = 0.0
        for _ in range(10):
            n = 10  # 10 displacement + 10 velocity dofs
            R = rng.standard_normal((n, n))
            mass = R @ R.T + n * np.eye(n)
            R = rng.standard_normal((n, n))
            K = R @ R.T + n * np.eye(n)
            r_u = rng.standard_normal(n)
            r_v = rng.standard_normal(n)
            x_u, x_v = solid_schur_solve(mass, K, rho_s, dt, theta, r_u, r_v)
            A = np.block([[mass, -dt * theta * mass], [dt * theta * K, rho_s * mass]])
            ref = np.linalg.solve(A, np.concatenate([r_u, r_v]))
            err = np.linalg.norm(np.concatenate([x_u, x_v]) - ref) / np.linalg.norm(ref)
            worst = max(worst, err)
        return worst

    worst, secs = _timed(body)
    return CriterionResult(
        10,
        "solid velocity-Schur equivalence",
        worst <= 1.0e-10,
        f"max rel error vs dense solve {worst:.2e} over 10 random systems",
        secs,
    )


CRITERIA = (
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
)


def run_all(report=print, cache: dict | None = None) -> list:
    """Evaluate every criterion, printing one pass/fail line each."""
    cache = {} if cache is None else cache
    results = []
    for fn in CRITERIA:
        res = fn(cache)
        results.append(res)
        if report is not None:
            report(res.line())
    return results
