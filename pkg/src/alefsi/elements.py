"""Reference elements and quadrature on [0,1]^d.

Continuous Q(k) tensor Lagrange elements carry displacements and velocities;
the pressure lives in discontinuous, element-local P(k-1).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ElementPair:
    """Q(k) displacement/velocity with discontinuous P(k-1) pressure."""

    order: int
    dim: int

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ConfigError(f"element order must be 1 or 2, got {self.order}")
        if self.dim not in (2, 3):
            raise ConfigError(f"dimension must be 2 or 3, got {self.dim}")

    @property
    def n_loc(self) -> int:
        """Local Q(k) nodes per cell."""
        return (self.order + 1) ** self.dim

    @property
    def n_p(self) -> int:
        """Local pressure dofs per cell."""
        return 1 if self.order == 1 else 1 + self.dim

    @property
    def quad_degree(self) -> int:
        return 2 * self.order + 1

    def lattice(self):
        """Local node multi-indices in tensor order (axis 0 fastest)."""
        k = self.order
        # product iterates its last factor fastest; flip to make axis 0 fastest
        return [m[::-1] for m in itertools.product(range(k + 1), repeat=self.dim)]


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int


def gauss_1d(n: int):
    """Gauss-Legendre rule on [0,1], exact to degree 2n-1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def cell_rule(dim: int, degree: int) -> QuadratureRule:
    """Tensor Gauss rule on [0,1]^dim exact for total degree ``degree``."""
    n = degree // 2 + 1
    x, w = gauss_1d(n)
    pts = np.array([p for p in itertools.product(x, repeat=dim)])[:, ::-1]
    wts = np.array([np.prod(c) for c in itertools.product(w, repeat=dim)])
    return QuadratureRule(pts, wts, 2 * n - 1)


def _lagrange_1d(order: int, x: np.ndarray):
    """Values and derivatives of the 1D Lagrange basis at points x."""
    nodes = np.linspace(0.0, 1.0, order + 1)
    n = order + 1
    vals = np.ones((n, len(x)))
    ders = np.zeros((n, len(x)))
    for i in range(n):
        for j in range(n):
            if j != i:
                vals[i] *= (x - nodes[j]) / (nodes[i] - nodes[j])
        for j in range(n):
            if j == i:
                continue
            term = np.ones_like(x) / (nodes[i] - nodes[j])
            for m in range(n):
                if m != i and m != j:
                    term *= (x - nodes[m]) / (nodes[i] - nodes[m])
            ders[i] += term
    return vals, ders


def shape_eval(order: int, dim: int, ref_points: np.ndarray):
    """Q(k) basis values and reference gradients at reference points.

    Returns ``(values, grads)`` with shapes (n_loc, nq) and (n_loc, nq, dim).
    Basis index runs over the tensor lattice with axis 0 fastest.
    """
    ref_points = np.atleast_2d(np.asarray(ref_points, dtype=float))
    if np.any(ref_points < -1e-12) or np.any(ref_points > 1 + 1e-12):
        raise ConfigError("reference point outside [0,1]^d")
    per_axis = [_lagrange_1d(order, ref_points[:, a]) for a in range(dim)]
    lat = ElementPair(order, dim).lattice()
    n_loc, nq = len(lat), ref_points.shape[0]
    vals = np.ones((n_loc, nq))
    grads = np.zeros((n_loc, nq, dim))
    for i, m in enumerate(lat):
        for a in range(dim):
            vals[i] *= per_axis[a][0][m[a]]
        for a in range(dim):
            g = np.ones(nq)
            for b in range(dim):
                g *= per_axis[b][1][m[b]] if b == a else per_axis[b][0][m[b]]
            grads[i, :, a] = g
    return vals, grads


def pressure_eval(order: int, dim: int, ref_points: np.ndarray):
    """Discontinuous P(order-1) basis values at reference points.

    P0 is the constant 1; P1 is {1, x-1/2, y-1/2, (z-1/2)} in reference
    coordinates.  Shape (n_p, nq).
    """
    ref_points = np.atleast_2d(np.asarray(ref_points, dtype=float))
    nq = ref_points.shape[0]
    if order == 1:
        return np.ones((1, nq))
    rows = [np.ones(nq)]
    for a in range(dim):
        rows.append(ref_points[:, a] - 0.5)
    return np.stack(rows)


# reference facet parametrizations matching mesh.FACETS_2D / FACETS_3D
def facet_ref_points(dim: int, facet: int, s: np.ndarray):
    """Map facet-local coordinates s (nq, dim-1) into cell reference coords."""
    s = np.atleast_2d(s)
    if dim == 2:
        t = s[:, 0]
        maps = [
            np.stack([t, np.zeros_like(t)], axis=1),  # (0,1) bottom
            np.stack([np.ones_like(t), t], axis=1),  # (1,3) right
            np.stack([t, np.ones_like(t)], axis=1),  # (2,3) top
            np.stack([np.zeros_like(t), t], axis=1),  # (0,2) left
        ]
        return maps[facet]
    a, b = s[:, 0], s[:, 1]
    zero, one = np.zeros_like(a), np.ones_like(a)
    maps = [
        np.stack([zero, a, b], axis=1),  # x = 0
        np.stack([one, a, b], axis=1),  # x = 1
        np.stack([a, zero, b], axis=1),  # y = 0
        np.stack([a, one, b], axis=1),  # y = 1
        np.stack([a, b, zero], axis=1),  # z = 0
        np.stack([a, b, one], axis=1),  # z = 1
    ]
    return maps[facet]


def facet_rule(dim: int, degree: int):
    """Quadrature on the reference facet [0,1]^(dim-1)."""
    return cell_rule(dim - 1, degree)
