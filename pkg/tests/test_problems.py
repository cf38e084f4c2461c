"""Diffusivity models, analytic series solutions and problem specs.

Reference values are precomputed with mpmath at 50 digits; the series
are also recomputed here with mpmath directly, and one case is
cross-checked against an independent finite-difference solve.
"""
import math

import mpmath
import numpy as np
import pytest
from numpy.testing import assert_allclose

from dmpdiffuse.problems import (ConstantTensor, ConstraintMode, Isotropic,
                                 LePotier, NotEllipticError, ProblemSpec,
                                 RotatedAnisotropic, SlabIC1D, SlabIC2D,
                                 UniformIC1D, built_in_problem,
                                 eval_diffusivity, indicator_box,
                                 indicator_interval, validate_ellipticity)

mpmath.mp.dps = 50


def mp_uniform(x, t, n_terms=400):
    """Insulated-left / absorbed-right unit-IC series, 50-digit mpmath."""
    s = mpmath.mpf(0)
    for n in range(n_terms):
        k = (2 * n + 1) * mpmath.pi / 2
        s += (-1) ** n * 4 / (mpmath.pi * (2 * n + 1)) \
            * mpmath.e ** (-k * k * t) * mpmath.cos(k * x)
    return float(s)


def mp_slab(x, t, a="0.4", b="0.6", n_terms=400):
    """Absorbed-both-ends slab-IC series, 50-digit mpmath."""
    a, b = mpmath.mpf(a), mpmath.mpf(b)
    s = mpmath.mpf(0)
    for n in range(1, n_terms + 1):
        c = 2 / (n * mpmath.pi) * (mpmath.cos(n * mpmath.pi * a)
                                   - mpmath.cos(n * mpmath.pi * b))
        s += c * mpmath.e ** (-(n * mpmath.pi) ** 2 * t) \
            * mpmath.sin(n * mpmath.pi * x)
    return float(s)


# ---------------------------------------------------------------------------
# uniform1d series


def test_uniform1d_frozen_values():
    u = UniformIC1D()
    assert_allclose(u.value([0.0], 1.0), 0.10797704444410901349, rtol=1e-14)
    assert_allclose(u.value([0.6], 0.01), 0.99532226501895273416, rtol=1e-14)
    assert_allclose(u.value([0.6], 0.009), 0.99713088720792338425, rtol=1e-14)
    assert_allclose(u.value([0.2], 0.1), 0.91907137217153612376, rtol=1e-14)
    assert_allclose(u.time_derivatives(np.array([[0.6]]), 0.009)[0],
                    -1.5520067215785015709, rtol=1e-13)


def test_uniform1d_matches_live_mpmath():
    u = UniformIC1D()
    for x, t in ((0.0, 1.0), (0.35, 0.02), (0.9, 0.005), (0.5, 0.25)):
        assert_allclose(u.value([x], t), mp_uniform(x, t), rtol=1e-13)


def test_uniform1d_boundary_and_early_time():
    u = UniformIC1D()
    assert abs(u.value([1.0], 0.01)) < 1e-14       # held at zero
    assert abs(u.gradient([0.0], 0.01)[0]) < 1e-12  # insulated end
    assert_allclose(u.value([0.2], 1e-5), 1.0, atol=1e-12)  # still the IC


def test_uniform1d_satisfies_heat_equation():
    # central differences in x and t against the analytic derivatives
    u = UniformIC1D()
    x, t, d = 0.37, 0.02, 1e-5
    u_t = (u.value([x], t + d) - u.value([x], t - d)) / (2 * d)
    u_xx = (u.value([x + d], t) - 2 * u.value([x], t)
            + u.value([x - d], t)) / d ** 2
    assert_allclose(u_t, u_xx, rtol=1e-4)
    assert_allclose(u.time_derivatives(np.array([[x]]), t)[0], u_t, rtol=1e-6)
    u_x = (u.value([x + d], t) - u.value([x - d], t)) / (2 * d)
    assert_allclose(u.gradient([x], t)[0], u_x, rtol=1e-6)


def test_uniform1d_vector_matches_scalar():
    u = UniformIC1D()
    pts = np.array([[0.1], [0.5], [0.9]])
    vals = u.values(pts, 0.03)
    for p, v in zip(pts, vals):
        assert_allclose(u.value(p, 0.03), v, rtol=1e-15)


# ---------------------------------------------------------------------------
# slab1d series


def test_slab1d_frozen_values():
    s = SlabIC1D()
    assert_allclose(s.value([0.5], 0.01), 0.52049987761643785138, rtol=1e-14)
    assert_allclose(s.value([0.3], 0.01), 0.22280226288025026716, rtol=1e-14)
    assert_allclose(s.value([0.5], 0.001), 0.97465268132253173607, rtol=1e-14)
    assert_allclose(s.value([0.25], 0.002), 0.0088530172519763170276, rtol=1e-13)
    assert_allclose(s.gradient([0.3], 0.01)[0], 1.899644218318011697, rtol=1e-13)


def test_slab1d_matches_live_mpmath():
    s = SlabIC1D()
    for x, t in ((0.5, 0.01), (0.15, 0.004), (0.8, 0.02)):
        assert_allclose(s.value([x], t), mp_slab(x, t), rtol=1e-12)


def test_slab1d_symmetry_and_boundaries():
    s = SlabIC1D()
    for d in (0.1, 0.25, 0.4):
        assert_allclose(s.value([0.5 - d], 0.01), s.value([0.5 + d], 0.01),
                        rtol=1e-13)
    assert abs(s.value([0.0], 0.005)) < 1e-14
    assert abs(s.value([1.0], 0.005)) < 1e-14


def test_slab1d_mass_nearly_conserved_early():
    # absorbing ends barely see the pulse at t = 1e-4: mass stays ~ b - a
    s = SlabIC1D()
    xs = np.linspace(0, 1, 20001)[:, None]
    mass = np.trapezoid(s.values(xs, 1e-4), dx=xs[1, 0] - xs[0, 0])
    assert_allclose(mass, 0.2, atol=1e-6)


def test_slab1d_against_finite_differences():
    # independent check: second-order FD in space, Crank-Nicolson in time
    from scipy.linalg import solve_banded

    n, dt, t_end = 800, 1e-5, 0.01
    h = 1.0 / n
    x = np.linspace(0, 1, n + 1)
    # cell-averaged indicator; nodal sampling would carry O(h) extra mass
    u = np.clip((np.minimum(x + h / 2, 0.6) - np.maximum(x - h / 2, 0.4)) / h,
                0.0, 1.0)
    r = dt / (2 * h * h)
    ab = np.zeros((3, n - 1))
    ab[0, 1:] = -r
    ab[1, :] = 1 + 2 * r
    ab[2, :-1] = -r
    for _ in range(round(t_end / dt)):
        rhs = u[1:-1] + r * (u[2:] - 2 * u[1:-1] + u[:-2])
        u[1:-1] = solve_banded((1, 1), ab, rhs)
    s = SlabIC1D()
    assert_allclose(u[n // 2], s.value([0.5], t_end), atol=1e-5)
    assert_allclose(u[int(0.3 * n)], s.value([0.3], t_end), atol=1e-5)


def test_slab1d_custom_interval():
    s = SlabIC1D(0.2, 0.5)
    assert_allclose(s.value([0.35], 0.003), mp_slab(0.35, 0.003, "0.2", "0.5"),
                    rtol=1e-12)
    with pytest.raises(ValueError):
        SlabIC1D(0.6, 0.4)
    with pytest.raises(ValueError):
        SlabIC1D(-0.1, 0.5)


# ---------------------------------------------------------------------------
# slab2d series


def test_slab2d_frozen_value():
    s = SlabIC2D()
    assert_allclose(s.value([0.3, 0.7], 0.01), 0.049640848344560146073,
                    rtol=1e-12)
    assert_allclose(s.value([0.5, 0.5], 1e-4), 0.99999999999692508041,
                    rtol=1e-13)


def test_slab2d_separates_into_1d_product():
    # the double series factors exactly; evaluated independently here
    s2, s1 = SlabIC2D(), SlabIC1D()
    for x, y, t in ((0.3, 0.7, 0.01), (0.5, 0.5, 0.002), (0.45, 0.2, 0.02),
                    (0.1, 0.9, 0.005)):
        assert_allclose(s2.value([x, y], t),
                        s1.value([x], t) * s1.value([y], t), rtol=1e-11)


def test_slab2d_gradient_product_rule():
    s2, s1 = SlabIC2D(), SlabIC1D()
    x, y, t = 0.35, 0.6, 0.008
    g = s2.gradient([x, y], t)
    assert_allclose(g[0], s1.gradient([x], t)[0] * s1.value([y], t), rtol=1e-10)
    assert_allclose(g[1], s1.value([x], t) * s1.gradient([y], t)[0], rtol=1e-10)


def test_slab2d_boundary_zero():
    s = SlabIC2D()
    pts = np.array([[0.0, 0.4], [1.0, 0.6], [0.3, 0.0], [0.7, 1.0]])
    assert_allclose(s.values(pts, 0.005), 0.0, atol=1e-13)


@pytest.mark.parametrize("series", [UniformIC1D(), SlabIC1D(), SlabIC2D()])
def test_series_refuse_nonpositive_time(series):
    pt = np.zeros((1, 2))
    with pytest.raises(ValueError):
        series.values(pt, 0.0)
    with pytest.raises(ValueError):
        series.values(pt, -0.1)


# ---------------------------------------------------------------------------
# diffusivity models


def test_isotropic_tensor():
    assert_allclose(eval_diffusivity(Isotropic(2.5), [0.3, 0.4]),
                    2.5 * np.eye(2))
    assert_allclose(eval_diffusivity(Isotropic(1.0), [0.3]), np.eye(1))
    with pytest.raises(ValueError):
        Isotropic(0.0)
    with pytest.raises(ValueError):
        Isotropic(-1.0)


def test_constant_tensor_symmetry():
    D = ConstantTensor([[2.0, 0.5], [0.5, 1.0]])
    assert_allclose(D.tensor([0, 0]), [[2.0, 0.5], [0.5, 1.0]])
    with pytest.raises(ValueError):
        ConstantTensor([[1.0, 0.2], [0.3, 1.0]])
    with pytest.raises(ValueError):
        ConstantTensor([[1.0, 2.0, 3.0]])
    with pytest.raises(ValueError):
        D.matrix[0, 0] = 9.0


def test_rotated_anisotropic_eigenvalues():
    for theta in (0.0, -math.pi / 6, 1.1):
        D = RotatedAnisotropic(10.0, 1e-3, theta)
        eig = np.linalg.eigvalsh(D.tensor([0, 0]))
        assert_allclose(eig, [1e-3, 10.0], rtol=1e-12)
    # theta = 0 leaves the principal axes alone
    assert_allclose(RotatedAnisotropic(3.0, 2.0, 0.0).tensor([0, 0]),
                    np.diag([3.0, 2.0]), atol=1e-15)
    with pytest.raises(ValueError):
        RotatedAnisotropic(-1.0, 1.0, 0.0)


def test_lepotier_tensor():
    D = LePotier(0.001)
    assert_allclose(D.tensor([1.0, 1.0]),
                    [[1.001, -0.999], [-0.999, 1.001]], rtol=1e-14)
    # symmetric everywhere, positive definite away from the axes
    M = D.tensor([0.3, 0.8])
    assert_allclose(M, M.T)
    assert np.linalg.eigvalsh(M)[0] > 0
    with pytest.raises(ValueError):
        LePotier(0.0)


def test_validate_ellipticity():
    pts = [[0.25, 0.25], [0.5, 0.9], [0.99, 0.01]]
    lo, hi = validate_ellipticity(LePotier(0.001), pts)
    assert 0 < lo < hi
    with pytest.raises(NotEllipticError) as err:
        validate_ellipticity(LePotier(0.001), [[0.5, 0.5], [0.0, 0.0]])
    assert_allclose(err.value.point, [0.0, 0.0])
    assert err.value.eigenvalue <= 0


# ---------------------------------------------------------------------------
# indicators and problem construction


def test_indicator_interval_closed():
    chi = indicator_interval(0.4, 0.6)
    assert chi([0.4]) == 1.0 and chi([0.6]) == 1.0 and chi([0.5]) == 1.0
    assert chi([0.39]) == 0.0 and chi([0.61]) == 0.0


def test_indicator_box_closed():
    chi = indicator_box(3 / 8, 5 / 8)
    assert chi([3 / 8, 5 / 8]) == 1.0 and chi([0.5, 0.5]) == 1.0
    assert chi([0.5, 0.7]) == 0.0 and chi([0.2, 0.5]) == 0.0


def test_built_in_problems_construct():
    names = ("uniform1d", "slab1d", "slab2d", "plate_hole", "hetero")
    for name in names:
        p = built_in_problem(name)
        assert p.name == name
        assert p.end_time > 0
    assert built_in_problem("hetero").constraint_mode is ConstraintMode.NON_NEGATIVE
    assert built_in_problem("slab2d").constraint_mode is ConstraintMode.MAX_PRINCIPLE


def test_built_in_overrides():
    p = built_in_problem("slab1d", end_time=0.2, a=0.3, b=0.7)
    assert p.end_time == 0.2
    assert p.analytic.a == 0.3 and p.analytic.b == 0.7
    p = built_in_problem("uniform1d", constraint_mode="unconstrained")
    assert p.constraint_mode is ConstraintMode.UNCONSTRAINED
    p = built_in_problem("uniform1d", k=2.0)
    assert p.analytic is None            # series assumes unit diffusivity
    with pytest.raises(ValueError):
        built_in_problem("nonesuch")
    with pytest.raises(ValueError, match="seed"):
        built_in_problem("slab1d", seed=41)
    with pytest.raises(ValueError):
        built_in_problem("uniform1d", end_time=-1.0)


def test_hetero_source_is_the_centre_box():
    p = built_in_problem("hetero")
    assert p.source([0.5, 0.5], 0.0) == 1.0
    assert p.source([3 / 8, 3 / 8], 1.0) == 1.0
    assert p.source([0.2, 0.5], 0.0) == 0.0


def test_problem_spec_validation():
    with pytest.raises(ValueError, match="repeated"):
        ProblemSpec("p", Isotropic(1.0), None,
                    [("left", None), ("left", None)], [], None, 1.0)
    with pytest.raises(ValueError, match="both"):
        ProblemSpec("p", Isotropic(1.0), None,
                    [("left", None)], [("left", None)], None, 1.0)
    with pytest.raises(ValueError, match="end_time"):
        ProblemSpec("p", Isotropic(1.0), None, [], [], None, 0.0)
