"""Reference elements, quadrature rules and the isoparametric map."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from dmpdiffuse.elements import (DegenerateElementError, map_to_physical,
                                 quadrature_rule, shape_gradients,
                                 shape_values)
from dmpdiffuse.mesh import ElementType, Mesh

ALL_TYPES = [ElementType.LINE2, ElementType.TRI3, ElementType.QUAD4]

# a few interior reference points per element type
_REF_POINTS = {
    ElementType.LINE2: [[-1.0], [0.0], [0.3], [1.0]],
    ElementType.TRI3: [[0.0, 0.0], [1 / 3, 1 / 3], [0.2, 0.5], [1.0, 0.0]],
    ElementType.QUAD4: [[-1.0, -1.0], [0.0, 0.0], [0.4, -0.7], [1.0, 1.0]],
}


@pytest.mark.parametrize("etype", ALL_TYPES)
def test_partition_of_unity(etype):
    for pt in _REF_POINTS[etype]:
        N = shape_values(etype, pt)
        assert_allclose(N.sum(), 1.0, atol=1e-14)
        G = shape_gradients(etype, pt)
        assert_allclose(G.sum(axis=0), 0.0, atol=1e-14)


@pytest.mark.parametrize("etype", ALL_TYPES)
def test_kronecker_at_nodes(etype):
    corners = {
        ElementType.LINE2: [[-1.0], [1.0]],
        ElementType.TRI3: [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        ElementType.QUAD4: [[-1, -1], [1, -1], [1, 1], [-1, 1]],
    }[etype]
    for i, c in enumerate(corners):
        N = shape_values(etype, c)
        expect = np.zeros(len(corners))
        expect[i] = 1.0
        assert_allclose(N, expect, atol=1e-14)


@pytest.mark.parametrize("etype", ALL_TYPES)
def test_outside_reference_point_rejected(etype):
    bad = {ElementType.LINE2: [1.5],
           ElementType.TRI3: [0.7, 0.7],
           ElementType.QUAD4: [0.0, -1.2]}[etype]
    with pytest.raises(ValueError):
        shape_values(etype, bad)
    with pytest.raises(ValueError):
        shape_gradients(etype, bad)


@pytest.mark.parametrize("etype,measure", [
    (ElementType.LINE2, 2.0),
    (ElementType.TRI3, 0.5),
    (ElementType.QUAD4, 4.0),
])
@pytest.mark.parametrize("order", [1, 2, 3])
def test_quadrature_weights_sum_to_measure(etype, measure, order):
    rule = quadrature_rule(etype, order)
    assert_allclose(rule.weights.sum(), measure, rtol=1e-14)


def test_quadrature_positive_weights_low_order():
    # the degree-3 triangle rule legitimately has one negative weight
    for etype in ALL_TYPES:
        for order in (1, 2):
            assert (quadrature_rule(etype, order).weights > 0).all()
    w = quadrature_rule(ElementType.TRI3, 3).weights
    assert w.min() < 0
    assert_allclose(w.min(), -27 / 96)


def _tri_monomial_integral(p, q):
    # int over unit triangle of x^p y^q = p! q! / (p + q + 2)!
    from math import factorial
    return factorial(p) * factorial(q) / factorial(p + q + 2)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_tri_rule_polynomial_exactness(order):
    rule = quadrature_rule(ElementType.TRI3, order)
    for p in range(order + 1):
        for q in range(order + 1 - p):
            got = float(rule.weights @ (rule.points[:, 0] ** p
                                        * rule.points[:, 1] ** q))
            assert_allclose(got, _tri_monomial_integral(p, q), rtol=1e-13,
                            err_msg=f"x^{p} y^{q} at order {order}")


@pytest.mark.parametrize("npts", [1, 2, 3])
def test_gauss_1d_exactness(npts):
    # n-point Gauss is exact through degree 2n - 1 on [-1, 1]
    rule = quadrature_rule(ElementType.LINE2, npts)
    for deg in range(2 * npts):
        exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
        got = float(rule.weights @ rule.points[:, 0] ** deg)
        assert_allclose(got, exact, atol=1e-14)


def test_quad_rule_is_tensor_product():
    rule = quadrature_rule(ElementType.QUAD4, 2)
    assert rule.points.shape == (4, 2)
    # integrate x^2 y^2 over [-1,1]^2 = 4/9
    got = float(rule.weights @ (rule.points[:, 0] ** 2 * rule.points[:, 1] ** 2))
    assert_allclose(got, 4.0 / 9.0, rtol=1e-14)


def test_quadrature_rule_rejects_order():
    with pytest.raises(ValueError):
        quadrature_rule(ElementType.TRI3, 4)
    with pytest.raises(ValueError):
        quadrature_rule(ElementType.QUAD4, 0)


def test_map_unit_square():
    mesh = Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
                [(ElementType.QUAD4, (0, 1, 2, 3))])
    mp = map_to_physical(mesh, 0, [0.0, 0.0])
    assert_allclose(mp.x, [0.5, 0.5])
    assert_allclose(mp.det_jacobian, 0.25)   # area 1 over reference area 4
    # physical gradient of N0 = (1-x)(1-y) at the centre
    assert_allclose(mp.gradients[0], [-0.5, -0.5])


def test_map_line_element():
    mesh = Mesh(np.array([[2.0], [2.5]]), [(ElementType.LINE2, (0, 1))])
    mp = map_to_physical(mesh, 0, [0.0])
    assert_allclose(mp.x, [2.25])
    assert_allclose(mp.det_jacobian, 0.25)   # h/2
    assert_allclose(mp.gradients, [[-2.0], [2.0]])  # +-1/h


def test_map_reproduces_linear_fields():
    # P1/Q1 elements interpolate linears exactly: gradients must agree
    rng = np.random.default_rng(3)
    tri = Mesh(np.array([[0.1, 0.2], [1.3, 0.4], [0.5, 1.7]]),
               [(ElementType.TRI3, (0, 1, 2))])
    quad = Mesh(np.array([[0.0, 0.0], [2.0, 0.2], [2.1, 1.5], [-0.2, 1.2]]),
                [(ElementType.QUAD4, (0, 1, 2, 3))])
    a, bx, by = rng.normal(size=3)
    for mesh, pts in ((tri, [[0.25, 0.25], [0.1, 0.6]]),
                      (quad, [[0.0, 0.0], [0.3, -0.5]])):
        vals = a + bx * mesh.coords[:, 0] + by * mesh.coords[:, 1]
        for pt in pts:
            mp = map_to_physical(mesh, 0, pt)
            etype = mesh.elements[0][0]
            assert_allclose(shape_values(etype, pt) @ vals,
                            a + bx * mp.x[0] + by * mp.x[1], rtol=1e-13)
            assert_allclose(mp.gradients.T @ vals, [bx, by], atol=1e-13)


def test_degenerate_element_detected():
    # clockwise node order flips the Jacobian sign
    mesh = Mesh(np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]),
                [(ElementType.TRI3, (0, 1, 2))])
    with pytest.raises(DegenerateElementError):
        map_to_physical(mesh, 0, [1 / 3, 1 / 3])


def test_zero_length_line_detected():
    mesh = Mesh(np.array([[1.0], [1.0]]), [(ElementType.LINE2, (0, 1))])
    with pytest.raises(DegenerateElementError):
        map_to_physical(mesh, 0, [0.0])
