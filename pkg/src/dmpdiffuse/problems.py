"""Problem definitions: diffusivity models, analytic solutions, benchmarks.

A ProblemSpec bundles everything the steppers need: the diffusion
tensor, volumetric source, boundary data, initial condition and the
constraint mode that applies when bounds are enforced.  Five built-in
benchmark problems are provided through built_in_problem().
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

_EDGE_TOL = 1e-12   # indicator initial data includes interval endpoints
_MAX_TERMS = 200000


class NotEllipticError(ValueError):
    """Diffusion tensor loses positive definiteness at some point."""

    def __init__(self, point, eigenvalue):
        super().__init__(
            f"diffusivity not positive definite at {np.asarray(point)} "
            f"(min eigenvalue {eigenvalue:.3e})")
        self.point = np.asarray(point)
        self.eigenvalue = eigenvalue


# ---------------------------------------------------------------------------
# diffusivity models


@dataclass(frozen=True)
class Isotropic:
    """k times the identity, in whatever dimension the point has."""

    k: float

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"isotropic diffusivity must be positive, got {self.k}")

    def tensor(self, x) -> np.ndarray:
        return self.k * np.eye(len(np.atleast_1d(x)))


class ConstantTensor:
    """A fixed symmetric matrix (positive definiteness is not implied;
    use validate_ellipticity to check it where it matters)."""

    def __init__(self, matrix):
        mat = np.asarray(matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("diffusivity matrix must be square")
        if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-13):
            raise ValueError("diffusivity matrix must be symmetric")
        self.matrix = 0.5 * (mat + mat.T)
        self.matrix.flags.writeable = False

    def tensor(self, x) -> np.ndarray:
        return self.matrix


class RotatedAnisotropic(ConstantTensor):
    """Principal diffusivities k1, k2 with axes rotated by theta."""

    def __init__(self, k1: float, k2: float, theta: float):
        if not (k1 > 0 and k2 > 0):
            raise ValueError("principal diffusivities must be positive")
        c, s = math.cos(theta), math.sin(theta)
        R = np.array([[c, -s], [s, c]])
        super().__init__(R @ np.diag([k1, k2]) @ R.T)
        self.k1, self.k2, self.theta = k1, k2, theta


@dataclass(frozen=True)
class LePotier:
    """Smoothly varying anisotropic tensor on the open unit square.

    D(x, y) = [[y^2 + eps*x^2, -(1-eps)*x*y], [-(1-eps)*x*y, eps*y^2 + x^2]].
    Positive definite for 0 < eps on (0,1)^2; degenerates at the origin.
    """

    eps: float = 0.001

    def __post_init__(self):
        if not 0 < self.eps:
            raise ValueError("eps must be positive")

    def tensor(self, x) -> np.ndarray:
        px, py = np.atleast_1d(x)[:2]
        off = -(1.0 - self.eps) * px * py
        return np.array([[py * py + self.eps * px * px, off],
                         [off, self.eps * py * py + px * px]])


def eval_diffusivity(model, x) -> np.ndarray:
    """Evaluate a diffusivity model at a physical point."""
    return model.tensor(np.atleast_1d(np.asarray(x, dtype=float)))


def validate_ellipticity(model, points):
    """Check positive definiteness at sample points.

    Returns (lambda_min, lambda_max) over all points; raises
    NotEllipticError at the first failing point.
    """
    lo, hi = math.inf, -math.inf
    for p in np.atleast_2d(points):
        eig = np.linalg.eigvalsh(eval_diffusivity(model, p))
        if eig[0] <= 0:
            raise NotEllipticError(p, eig[0])
        lo, hi = min(lo, eig[0]), max(hi, eig[-1])
    return lo, hi


# ---------------------------------------------------------------------------
# analytic solutions (separated-variables series, truncated by envelope)


def _require_positive_time(t):
    if not t > 0:
        raise ValueError(f"analytic series require t > 0, got {t}")


class UniformIC1D:
    """Decay of a unit initial state on (0, 1), insulated at x = 0,
    zero concentration at x = 1, unit isotropic diffusivity."""

    def __init__(self, tail_tol: float = 1e-15):
        self.tail_tol = tail_tol

    def _modes(self, t):
        _require_positive_time(t)
        ks, coefs = [], []
        n = 0
        while n < _MAX_TERMS:
            k = (2 * n + 1) * math.pi / 2.0
            amp = (4.0 / math.pi) / (2 * n + 1) * math.exp(-k * k * t)
            if amp < self.tail_tol and n > 0:
                break
            coefs.append((-1.0) ** n * amp)
            ks.append(k)
            n += 1
        else:
            raise RuntimeError("series did not converge; t too small")
        return np.array(ks), np.array(coefs)

    def values(self, points, t) -> np.ndarray:
        xs = np.atleast_2d(points)[:, 0]
        ks, coefs = self._modes(t)
        return np.cos(np.outer(ks, xs)).T @ coefs

    def gradients(self, points, t) -> np.ndarray:
        xs = np.atleast_2d(points)[:, 0]
        ks, coefs = self._modes(t)
        return (np.sin(np.outer(ks, xs)).T @ (-coefs * ks))[:, None]

    def time_derivatives(self, points, t) -> np.ndarray:
        xs = np.atleast_2d(points)[:, 0]
        ks, coefs = self._modes(t)
        return np.cos(np.outer(ks, xs)).T @ (-coefs * ks * ks)

    def value(self, x, t) -> float:
        return float(self.values(np.atleast_1d(x)[None, :1], t)[0])

    def gradient(self, x, t) -> np.ndarray:
        return self.gradients(np.atleast_1d(x)[None, :1], t)[0]


class SlabIC1D:
    """Decay of the indicator of [a, b] on (0, 1) with both ends held
    at zero and unit isotropic diffusivity."""

    def __init__(self, a: float = 0.4, b: float = 0.6, tail_tol: float = 1e-15):
        if not 0 <= a < b <= 1:
            raise ValueError(f"need 0 <= a < b <= 1, got a={a}, b={b}")
        self.a, self.b = a, b
        self.tail_tol = tail_tol

    def _modes(self, t):
        _require_positive_time(t)
        ks, coefs = [], []
        n = 1
        while n < _MAX_TERMS:
            decay = math.exp(-n * n * math.pi * math.pi * t)
            if (4.0 / math.pi) / n * decay < self.tail_tol and n > 1:
                break
            c = (2.0 / math.pi) / n * (
                math.cos(n * math.pi * self.a) - math.cos(n * math.pi * self.b))
            ks.append(n * math.pi)
            coefs.append(c * decay)
            n += 1
        else:
            raise RuntimeError("series did not converge; t too small")
        return np.array(ks), np.array(coefs)

    def values(self, points, t) -> np.ndarray:
        xs = np.atleast_2d(points)[:, 0]
        ks, coefs = self._modes(t)
        return np.sin(np.outer(ks, xs)).T @ coefs

    def gradients(self, points, t) -> np.ndarray:
        xs = np.atleast_2d(points)[:, 0]
        ks, coefs = self._modes(t)
        return (np.cos(np.outer(ks, xs)).T @ (coefs * ks))[:, None]

    def value(self, x, t) -> float:
        return float(self.values(np.atleast_1d(x)[None, :1], t)[0])

    def gradient(self, x, t) -> np.ndarray:
        return self.gradients(np.atleast_1d(x)[None, :1], t)[0]


class SlabIC2D:
    """Decay of the indicator of [a, b]^2 on the unit square with the
    whole boundary held at zero and unit isotropic diffusivity.

    Evaluated as the genuine double series over (m, n) modes; factored
    shortcuts are deliberately not taken so the tensor-product identity
    with SlabIC1D stays an independent check.
    """

    def __init__(self, a: float = 0.4, b: float = 0.6, tail_tol: float = 1e-15):
        if not 0 <= a < b <= 1:
            raise ValueError(f"need 0 <= a < b <= 1, got a={a}, b={b}")
        self.a, self.b = a, b
        self.tail_tol = tail_tol

    def _n_terms(self, t):
        _require_positive_time(t)
        n = 1
        while n < _MAX_TERMS:
            if 8.0 / (math.pi ** 2) * math.exp(-(n * n + 1) * math.pi ** 2 * t) \
                    < 0.01 * self.tail_tol and n > 1:
                return n
            n += 1
        raise RuntimeError("series did not converge; t too small")

    def _sum(self, points, t, deriv=None):
        pts = np.atleast_2d(points)
        xs, ys = pts[:, 0], pts[:, 1]
        N = self._n_terms(t)
        n = np.arange(1, N + 1)
        dcos = np.cos(n * math.pi * self.a) - np.cos(n * math.pi * self.b)
        sin_x = np.sin(np.outer(n, xs * math.pi))   # (N, P)
        sin_y = np.sin(np.outer(n, ys * math.pi))
        cos_x = np.cos(np.outer(n, xs * math.pi))
        acc = np.zeros(len(pts))
        for m in range(1, N + 1):
            decay = np.exp(-(m * m + n * n) * math.pi ** 2 * t)  # (N,)
            cn = dcos / n * decay
            if deriv is None:
                row = (cn @ sin_x) * (dcos[m - 1] / m)
            elif deriv == "x":
                row = ((cn * n * math.pi) @ cos_x) * (dcos[m - 1] / m)
            else:  # deriv == "y": swap roles, differentiate the y factor
                row = (cn @ sin_x) * (dcos[m - 1] * math.pi)
            y_fac = np.cos(m * math.pi * ys) if deriv == "y" else sin_y[m - 1]
            acc += row * y_fac
        return 4.0 / math.pi ** 2 * acc

    def values(self, points, t) -> np.ndarray:
        return self._sum(points, t)

    def gradients(self, points, t) -> np.ndarray:
        return np.column_stack([self._sum(points, t, "x"),
                                self._sum(points, t, "y")])

    def value(self, x, t) -> float:
        return float(self.values(np.atleast_2d(x)[:, :2], t)[0])

    def gradient(self, x, t) -> np.ndarray:
        return self.gradients(np.atleast_2d(x)[:, :2], t)[0]


# ---------------------------------------------------------------------------
# problem specification


class ConstraintMode(Enum):
    MAX_PRINCIPLE = "max_principle"   # bounds from initial/boundary data
    NON_NEGATIVE = "non_negative"     # lower bound 0 only
    UNCONSTRAINED = "unconstrained"


@dataclass
class ProblemSpec:
    """Everything a time stepper needs to march one diffusion problem.

    dirichlet/neumann are lists of (boundary tag, data function); data
    functions and the source take (point, time).  steady_data marks
    source and boundary data as time-independent so assembled vectors
    can be reused across steps.
    """

    name: str
    diffusivity: object
    source: object
    dirichlet: list
    neumann: list
    initial: object
    end_time: float
    analytic: object = None
    constraint_mode: ConstraintMode = ConstraintMode.MAX_PRINCIPLE
    steady_data: bool = True

    def __post_init__(self):
        if not self.end_time > 0:
            raise ValueError("end_time must be positive")
        dtags = [tag for tag, _ in self.dirichlet]
        ntags = [tag for tag, _ in self.neumann]
        if len(set(dtags)) != len(dtags):
            raise ValueError(f"repeated Dirichlet tag in {dtags}")
        overlap = set(dtags) & set(ntags)
        if overlap:
            raise ValueError(f"tags {sorted(overlap)} carry both Dirichlet "
                             "and Neumann data")


def indicator_interval(a, b):
    """Characteristic function of [a, b] with a small edge tolerance."""
    def chi(x):
        v = np.atleast_1d(x)[0]
        return 1.0 if a - _EDGE_TOL <= v <= b + _EDGE_TOL else 0.0
    return chi


def indicator_box(a, b):
    """Characteristic function of [a, b]^2 with a small edge tolerance."""
    def chi(x):
        px, py = np.atleast_1d(x)[:2]
        return 1.0 if (a - _EDGE_TOL <= px <= b + _EDGE_TOL
                       and a - _EDGE_TOL <= py <= b + _EDGE_TOL) else 0.0
    return chi


def _const(value):
    return lambda x, t: value


_BUILT_IN = ("uniform1d", "slab1d", "slab2d", "plate_hole", "hetero")


def built_in_problem(name: str, **overrides) -> ProblemSpec:
    """One of the five benchmark problems, optionally customised.

    Recognised overrides (checked per problem): end_time,
    constraint_mode, a/b (slab problems), k (uniform1d),
    k1/k2/theta (plate_hole), eps (hetero).
    """
    if name not in _BUILT_IN:
        raise ValueError(f"unknown problem {name!r}; choose from {_BUILT_IN}")
    mode = overrides.pop("constraint_mode", None)
    end_time = overrides.pop("end_time", None)

    if name == "uniform1d":
        k = overrides.pop("k", 1.0)
        _reject_extras(name, overrides)
        spec = ProblemSpec(
            name, Isotropic(k), _const(0.0),
            dirichlet=[("right", _const(0.0))],
            neumann=[("left", _const(0.0))],
            initial=lambda x: 1.0,
            end_time=0.5,
            analytic=UniformIC1D() if k == 1.0 else None)
    elif name == "slab1d":
        a, b = overrides.pop("a", 0.4), overrides.pop("b", 0.6)
        _reject_extras(name, overrides)
        spec = ProblemSpec(
            name, Isotropic(1.0), _const(0.0),
            dirichlet=[("left", _const(0.0)), ("right", _const(0.0))],
            neumann=[],
            initial=indicator_interval(a, b),
            end_time=0.05,
            analytic=SlabIC1D(a, b))
    elif name == "slab2d":
        a, b = overrides.pop("a", 0.4), overrides.pop("b", 0.6)
        _reject_extras(name, overrides)
        spec = ProblemSpec(
            name, Isotropic(1.0), _const(0.0),
            dirichlet=[(tag, _const(0.0)) for tag in
                       ("left", "right", "bottom", "top")],
            neumann=[],
            initial=indicator_box(a, b),
            end_time=0.01,
            analytic=SlabIC2D(a, b))
    elif name == "plate_hole":
        k1 = overrides.pop("k1", 10.0)
        k2 = overrides.pop("k2", 1e-3)
        theta = overrides.pop("theta", -math.pi / 6.0)
        _reject_extras(name, overrides)
        spec = ProblemSpec(
            name, RotatedAnisotropic(k1, k2, theta), _const(0.0),
            dirichlet=[("outer", _const(0.0)), ("hole", _const(1.0))],
            neumann=[],
            initial=lambda x: 0.0,
            end_time=0.05)
    else:  # hetero
        eps = overrides.pop("eps", 0.001)
        _reject_extras(name, overrides)
        chi = indicator_box(3.0 / 8.0, 5.0 / 8.0)
        spec = ProblemSpec(
            name, LePotier(eps), lambda x, t: chi(x),
            dirichlet=[(tag, _const(0.0)) for tag in
                       ("left", "right", "bottom", "top")],
            neumann=[],
            initial=lambda x: 0.0,
            end_time=2.0,
            constraint_mode=ConstraintMode.NON_NEGATIVE)

    if mode is not None:
        spec.constraint_mode = (ConstraintMode(mode)
                                if not isinstance(mode, ConstraintMode) else mode)
    if end_time is not None:
        if not end_time > 0:
            raise ValueError("end_time must be positive")
        spec.end_time = float(end_time)
    return spec


def _reject_extras(name, overrides):
    if overrides:
        raise ValueError(f"unknown overrides for {name!r}: {sorted(overrides)}")
