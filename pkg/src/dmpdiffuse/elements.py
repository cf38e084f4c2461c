"""Reference elements: shape functions, quadrature and physical mapping.

Reference domains are [-1, 1] for lines, the unit triangle
{xi >= 0, eta >= 0, xi + eta <= 1} and [-1, 1]^2 for quadrilaterals.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import ElementType, Mesh

_INSIDE_TOL = 1e-12


class DegenerateElementError(ValueError):
    """Raised when an element maps with non-positive Jacobian."""


def _check_inside(etype, pt):
    if etype is ElementType.LINE2:
        if abs(pt[0]) > 1 + _INSIDE_TOL:
            raise ValueError(f"point {pt} outside reference line")
    elif etype is ElementType.TRI3:
        xi, eta = pt
        if xi < -_INSIDE_TOL or eta < -_INSIDE_TOL or xi + eta > 1 + _INSIDE_TOL:
            raise ValueError(f"point {pt} outside reference triangle")
    elif etype is ElementType.QUAD4:
        if max(abs(pt[0]), abs(pt[1])) > 1 + _INSIDE_TOL:
            raise ValueError(f"point {pt} outside reference square")
    else:
        raise ValueError(f"unknown element type {etype}")


def shape_values(etype: ElementType, ref_pt) -> np.ndarray:
    """Shape function values at a reference point; sums to 1."""
    pt = np.atleast_1d(np.asarray(ref_pt, dtype=float))
    _check_inside(etype, pt)
    if etype is ElementType.LINE2:
        xi = pt[0]
        return np.array([(1 - xi) / 2, (1 + xi) / 2])
    if etype is ElementType.TRI3:
        xi, eta = pt
        return np.array([1 - xi - eta, xi, eta])
    xi, eta = pt
    return 0.25 * np.array([(1 - xi) * (1 - eta), (1 + xi) * (1 - eta),
                            (1 + xi) * (1 + eta), (1 - xi) * (1 + eta)])


def shape_gradients(etype: ElementType, ref_pt) -> np.ndarray:
    """(n_nodes, dim) reference-coordinate gradients; columns sum to 0."""
    pt = np.atleast_1d(np.asarray(ref_pt, dtype=float))
    _check_inside(etype, pt)
    if etype is ElementType.LINE2:
        return np.array([[-0.5], [0.5]])
    if etype is ElementType.TRI3:
        return np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    xi, eta = pt
    return 0.25 * np.array([[-(1 - eta), -(1 - xi)],
                            [(1 - eta), -(1 + xi)],
                            [(1 + eta), (1 + xi)],
                            [-(1 + eta), (1 - xi)]])


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (n_q, dim)
    weights: np.ndarray  # (n_q,)


# 1D Gauss-Legendre abscissae/weights on [-1, 1] by point count
_GAUSS_1D = {
    1: (np.array([0.0]), np.array([2.0])),
    2: (np.array([-1 / np.sqrt(3.0), 1 / np.sqrt(3.0)]), np.array([1.0, 1.0])),
    3: (np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)]),
        np.array([5.0, 8.0, 5.0]) / 9.0),
}

# symmetric triangle rules by order: (points, weights) on the unit triangle
_TRI_RULES = {
    1: (np.array([[1 / 3, 1 / 3]]), np.array([0.5])),
    2: (np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]]),
        np.array([1 / 6, 1 / 6, 1 / 6])),
    3: (np.array([[1 / 3, 1 / 3], [0.2, 0.2], [0.6, 0.2], [0.2, 0.6]]),
        np.array([-27 / 96, 25 / 96, 25 / 96, 25 / 96])),
}


@lru_cache(maxsize=None)
def quadrature_rule(etype: ElementType, order: int) -> QuadratureRule:
    """Rule integrating polynomials of degree `order` exactly (1..3).

    Lines and quadrilaterals use (tensor-product) Gauss rules with
    `order` points per direction, exact through degree 2*order - 1.
    The order-3 triangle rule carries one negative centroid weight.
    """
    if order not in (1, 2, 3):
        raise ValueError(f"quadrature order must be 1, 2 or 3, got {order}")
    if etype is ElementType.LINE2:
        x, w = _GAUSS_1D[order]
        return QuadratureRule(x[:, None].copy(), w.copy())
    if etype is ElementType.TRI3:
        pts, w = _TRI_RULES[order]
        return QuadratureRule(pts.copy(), w.copy())
    if etype is ElementType.QUAD4:
        x, w = _GAUSS_1D[order]
        pts = np.array([[xi, eta] for eta in x for xi in x])
        wts = np.array([wy * wx for wy in w for wx in w])
        return QuadratureRule(pts, wts)
    raise ValueError(f"unknown element type {etype}")


@dataclass(frozen=True)
class MappedPoint:
    x: np.ndarray          # physical coordinates (dim,)
    det_jacobian: float
    gradients: np.ndarray  # (n_nodes, dim) physical shape gradients


def map_to_physical(mesh: Mesh, elem: int, ref_pt) -> MappedPoint:
    """Map a reference point into physical space for one element.

    Returns the physical point, Jacobian determinant and physical
    shape-function gradients; raises DegenerateElementError if the
    determinant is not strictly positive.
    """
    etype, conn = mesh.elements[elem]
    X = mesh.coords[list(conn)]           # (n_nodes, dim)
    N = shape_values(etype, ref_pt)
    G0 = shape_gradients(etype, ref_pt)   # (n_nodes, dim)
    J = X.T @ G0                          # J[k, l] = dx_k / dxi_l
    if J.shape == (1, 1):
        det = float(J[0, 0])
    else:
        det = float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])
    if det <= 0.0:
        raise DegenerateElementError(
            f"element {elem} ({etype.value}) has det J = {det:.3e} at {ref_pt}")
    G = G0 @ np.linalg.inv(J)
    return MappedPoint(N @ X, det, G)
