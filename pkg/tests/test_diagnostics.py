"""Violation reports, monotone-matrix checks, error norms and rates."""
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import sparse

from dmpdiffuse.assembly import assemble_capacity, assemble_stiffness
from dmpdiffuse.diagnostics import (ErrorNorms, convergence_rates,
                                    error_norms, is_monotone_matrix,
                                    violation_report)
from dmpdiffuse.mesh import (generate_interval_mesh,
                             generate_structured_quad_mesh,
                             generate_structured_tri_mesh)
from dmpdiffuse.problems import Isotropic


class FieldStub:
    """Analytic-solution stand-in from value/gradient callables."""

    def __init__(self, value, gradient):
        self._v, self._g = value, gradient

    def values(self, pts, t):
        return np.array([self._v(p) for p in np.atleast_2d(pts)])

    def gradients(self, pts, t):
        return np.array([self._g(p) for p in np.atleast_2d(pts)])


def test_violation_report_counts():
    c = np.array([-0.2, 0.0, 0.5, 1.0, 1.3, 1.4])
    rep = violation_report(c, 0.0, 1.0)
    assert rep.n_below == 1 and rep.n_above == 2
    assert rep.argmin == 0 and rep.argmax == 5
    assert rep.min_value == -0.2 and rep.max_value == 1.4
    assert rep.fraction_below == pytest.approx(1 / 6)
    assert rep.fraction_above == pytest.approx(2 / 6)
    assert not rep.clean


def test_violation_report_tolerance_and_infinite_bounds():
    c = np.array([-5e-10, 1.0 + 5e-10])
    assert violation_report(c, 0.0, 1.0, tol=1e-9).clean
    assert not violation_report(c, 0.0, 1.0, tol=1e-11).clean
    rep = violation_report(np.array([-100.0, 100.0]), 0.0, np.inf)
    assert rep.n_below == 1 and rep.n_above == 0
    rep = violation_report(np.array([-100.0, 100.0]), -np.inf, np.inf)
    assert rep.clean


def test_violation_report_validation():
    with pytest.raises(ValueError):
        violation_report(np.array([]), 0.0, 1.0)
    with pytest.raises(ValueError):
        violation_report(np.array([0.5]), 1.0, 0.0)


def test_monotone_matrix_examples():
    ok, worst = is_monotone_matrix(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    assert ok and worst >= 0
    ok, worst = is_monotone_matrix(np.array([[1.0, 0.5], [0.5, 1.0]]))
    assert not ok
    assert_allclose(worst, -2.0 / 3.0)
    ok, _ = is_monotone_matrix(sparse.eye(4, format="csr"))
    assert ok


def test_monotone_matrix_validation():
    with pytest.raises(ValueError):
        is_monotone_matrix(np.ones((2, 3)))
    with pytest.raises(ValueError):
        is_monotone_matrix(np.eye(501))
    with pytest.raises(np.linalg.LinAlgError):
        is_monotone_matrix(np.zeros((2, 2)))


def test_step_matrix_monotonicity_1d():
    # capacity lumping is what buys the M-matrix structure at small dt
    mesh = generate_interval_mesh(10, 1.0)
    K = assemble_stiffness(mesh, Isotropic(1.0))
    C = assemble_capacity(mesh)
    L = assemble_capacity(mesh, lumped=True)
    for dt in (1e-5, 1e-3, 1e-1):
        ok, _ = is_monotone_matrix(L / dt + K)
        assert ok, f"lumped dt={dt}"
    assert not is_monotone_matrix(C / 1e-5 + K)[0]
    assert not is_monotone_matrix(C / 1e-3 + K)[0]
    assert is_monotone_matrix(C / 1e-1 + K)[0]    # large dt is benign


def test_error_norms_exact_interpolant():
    mesh = generate_structured_tri_mesh(5, 4)
    exact = FieldStub(lambda p: 1.0 + 2.0 * p[0] - 0.5 * p[1],
                      lambda p: [2.0, -0.5])
    c = 1.0 + 2.0 * mesh.coords[:, 0] - 0.5 * mesh.coords[:, 1]
    err = error_norms(mesh, c, exact, t=0.3)
    assert err.l2 <= 1e-13 and err.h1_semi <= 1e-13
    assert err.t == 0.3


def test_error_norms_constant_shift():
    # shifting by s changes only the L2 error, by s * sqrt(area)
    mesh = generate_structured_quad_mesh(4, 5, (0, 0, 2, 1))
    exact = FieldStub(lambda p: 0.0, lambda p: [0.0, 0.0])
    for s in (0.1, 0.2):
        err = error_norms(mesh, np.full(mesh.n_nodes, s), exact, t=0.0)
        assert_allclose(err.l2, s * math.sqrt(2.0), rtol=1e-13)
        assert err.h1_semi <= 1e-13


def test_error_norms_quadratic_hand_values():
    # u = x^2 interpolated by 4 linear elements: per-element error is the
    # bubble x(h-x), giving L2 = h^2/sqrt(30) and H1 = h/sqrt(3)
    mesh = generate_interval_mesh(4, 1.0)
    exact = FieldStub(lambda p: p[0] ** 2, lambda p: [2.0 * p[0]])
    c = mesh.coords[:, 0] ** 2
    err = error_norms(mesh, c, exact, t=0.0)
    h = 0.25
    assert_allclose(err.l2, h ** 2 / math.sqrt(30.0), rtol=1e-12)
    assert_allclose(err.h1_semi, h / math.sqrt(3.0), rtol=1e-12)


def test_error_norms_element_order_invariance():
    from dmpdiffuse.mesh import Mesh
    mesh = generate_structured_tri_mesh(4, 4)
    rev = Mesh(mesh.coords.copy(), list(reversed(mesh.elements)),
               mesh.boundary_edges, mesh.node_tags)
    exact = FieldStub(lambda p: math.sin(p[0]) * p[1],
                      lambda p: [math.cos(p[0]) * p[1], math.sin(p[0])])
    c = np.sin(mesh.coords[:, 0]) * mesh.coords[:, 1]
    a = error_norms(mesh, c, exact, t=0.0)
    b = error_norms(rev, c, exact, t=0.0)
    assert_allclose([a.l2, a.h1_semi], [b.l2, b.h1_semi], rtol=1e-13)


def test_error_norms_shape_check():
    mesh = generate_interval_mesh(4, 1.0)
    exact = FieldStub(lambda p: 0.0, lambda p: [0.0])
    with pytest.raises(ValueError):
        error_norms(mesh, np.zeros(3), exact, t=0.0)


def test_convergence_rates_clean_sequences():
    h = np.array([0.4, 0.2, 0.1, 0.05])
    assert_allclose(convergence_rates(h ** 2, h), 2.0, rtol=1e-13)
    assert_allclose(convergence_rates(3.7 * h, h), 1.0, rtol=1e-13)
    rates = convergence_rates([1.0, 0.25, 0.0], [1.0, 0.5, 0.25])
    assert rates[0] == pytest.approx(2.0)
    assert rates[1] == math.inf


def test_convergence_rates_validation():
    with pytest.raises(ValueError):
        convergence_rates([1.0, 0.5], [0.5, 1.0])      # increasing h
    with pytest.raises(ValueError):
        convergence_rates([1.0, -0.5], [1.0, 0.5])     # negative error
    with pytest.raises(ValueError):
        convergence_rates([1.0], [1.0])                # too short
    with pytest.raises(ValueError):
        convergence_rates([1.0, 0.5], [1.0, 0.5, 0.25])
