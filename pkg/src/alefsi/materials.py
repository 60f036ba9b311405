"""ALE kinematics, material laws and their directional derivatives.

All functions are vectorized: tensor arguments may carry arbitrary leading
batch axes, with the last two axes forming the d x d tensor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MeshDegenerationError


@dataclass(frozen=True)
class MaterialParams:
    """Fluid density/viscosity and solid density/Lame parameters."""

    rho_f: float = 1.0e3
    nu_f: float = 1.0e-3
    rho_s: float = 1.0e4
    lam: float = 2.0e6
    mu: float = 0.5e6

    def __post_init__(self):
        for name in ("rho_f", "nu_f", "rho_s", "lam", "mu"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"material parameter {name} must be positive")


@dataclass
class KinematicState:
    """Deformation quantities of the ALE map at one (batch of) point(s)."""

    grad_u: np.ndarray
    F: np.ndarray
    J: np.ndarray
    F_inv: np.ndarray
    E: np.ndarray


def _eye_like(a):
    d = a.shape[-1]
    return np.broadcast_to(np.eye(d), a.shape)


def deformation_state(grad_u: np.ndarray, cell_of_point=None) -> KinematicState:
    """F = I + grad(u), J = det F, F^-1 and the Green-Lagrange strain.

    Raises :class:`MeshDegenerationError` when J <= 0 anywhere; if
    ``cell_of_point`` is given it is used to report the offending cell.
    """
    grad_u = np.asarray(grad_u, dtype=float)
    F = _eye_like(grad_u) + grad_u
    J = np.linalg.det(F)
    if np.any(J <= 0):
        idx = int(np.argmax(np.asarray(J <= 0).reshape(-1)))
        cell = -1
        if cell_of_point is not None:
            cell = int(np.asarray(cell_of_point).reshape(-1)[idx])
        raise MeshDegenerationError(cell, float(np.asarray(J).reshape(-1)[idx]))
    F_inv = np.linalg.inv(F)
    gT = np.swapaxes(grad_u, -1, -2)
    E = 0.5 * (grad_u + gT + gT @ grad_u)
    return KinematicState(grad_u=grad_u, F=F, J=J, F_inv=F_inv, E=E)


def stvk_stress(E: np.ndarray, params: MaterialParams) -> np.ndarray:
    """Second Piola-Kirchhoff stress 2*mu*E + lambda*tr(E)*I."""
    trE = np.trace(E, axis1=-2, axis2=-1)
    return 2.0 * params.mu * E + params.lam * trE[..., None, None] * _eye_like(E)


def fluid_stress(grad_v, p, kin: KinematicState, params: MaterialParams):
    """ALE Cauchy stress -p I + rho nu (grad(v) F^-1 + F^-T grad(v)^T)."""
    gvFi = grad_v @ kin.F_inv
    visc = params.rho_f * params.nu_f * (gvFi + np.swapaxes(gvFi, -1, -2))
    return -np.asarray(p)[..., None, None] * _eye_like(grad_v) + visc


def shape_derivatives(kin: KinematicState, grad_du: np.ndarray):
    """Directional derivatives of F, J, F^-1, F^-T and E.

    dF     = grad(du)
    dJ     = J tr(F^-1 grad(du))
    dF^-1  = -F^-1 grad(du) F^-1
    dF^-T  = (dF^-1)^T
    dE     = sym(F^T grad(du))
    """
    dF = np.asarray(grad_du, dtype=float)
    dJ = kin.J * np.trace(kin.F_inv @ dF, axis1=-2, axis2=-1)
    dF_inv = -kin.F_inv @ dF @ kin.F_inv
    dF_invT = np.swapaxes(dF_inv, -1, -2)
    FT_dF = np.swapaxes(kin.F, -1, -2) @ dF
    dE = 0.5 * (FT_dF + np.swapaxes(FT_dF, -1, -2))
    return dF, dJ, dF_inv, dF_invT, dE


def smoothing_factor(t):
    """Inflow ramp: (1 - cos(pi t / 2)) / 2 for t < 2, then 1."""
    t = np.asarray(t, dtype=float)
    return np.where(t < 2.0, 0.5 * (1.0 - np.cos(0.5 * np.pi * t)), 1.0)


def inflow_profile(t, x, case: str = "fsi2", v_mean: float | None = None):
    """Prescribed inflow velocity at points x on the inflow plane.

    2D channel: v_x = 6 y (H - y) / H^2 * s(t) * vbar with H = 0.41,
    vbar = 1.  3D box: v_x = 81/16 y (H - y)(H^2 - z^2) / H^4 * s(t) * vbar
    with H = 0.4, vbar = 3.  Returns (n, d) velocity vectors.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    s = smoothing_factor(t)
    if case == "fsi2":
        H = 0.41
        vbar = 1.0 if v_mean is None else v_mean
        y = x[:, 1]
        vx = 6.0 * y * (H - y) / H**2 * s * vbar
        out = np.zeros_like(x)
        out[:, 0] = vx
        return out
    if case == "box3d":
        H = 0.4
        vbar = 3.0 if v_mean is None else v_mean
        y, z = x[:, 1], x[:, 2]
        vx = 81.0 / 16.0 * y * (H - y) * (H**2 - z**2) / H**4 * s * vbar
        out = np.zeros_like(x)
        out[:, 0] = vx
        return out
    raise ConfigError(f"unknown benchmark case {case!r}")
