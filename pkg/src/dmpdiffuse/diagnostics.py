"""Run diagnostics: bound-violation reports, matrix monotonicity,
discretisation error norms and observed convergence rates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import elements as el
from .assembly import _mapped, _tables
from .mesh import Mesh

_MONOTONE_SIZE_LIMIT = 500


@dataclass
class ViolationReport:
    """How a nodal field sits relative to a pair of bounds."""

    min_value: float
    max_value: float
    argmin: int
    argmax: int
    n_below: int
    n_above: int
    fraction_below: float
    fraction_above: float
    lower: float
    upper: float
    tol: float

    @property
    def clean(self) -> bool:
        return self.n_below == 0 and self.n_above == 0


def violation_report(c, lower: float, upper: float, tol: float = 1e-9) -> ViolationReport:
    """Count entries outside [lower - tol, upper + tol]; infinite
    bounds disable the corresponding side."""
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        raise ValueError("empty field")
    if not lower <= upper:
        raise ValueError(f"lower {lower} exceeds upper {upper}")
    below = int(np.sum(c < lower - tol))
    above = int(np.sum(c > upper + tol))
    return ViolationReport(
        min_value=float(c.min()), max_value=float(c.max()),
        argmin=int(c.argmin()), argmax=int(c.argmax()),
        n_below=below, n_above=above,
        fraction_below=below / c.size, fraction_above=above / c.size,
        lower=lower, upper=upper, tol=tol)


def is_monotone_matrix(A, tol: float = 1e-12):
    """Whether A has an entrywise non-negative inverse.

    Returns (verdict, most negative inverse entry).  Dense inversion,
    so matrix size is capped; numpy raises LinAlgError on singular
    input.
    """
    A = A.toarray() if sparse.issparse(A) else np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    if A.shape[0] > _MONOTONE_SIZE_LIMIT:
        raise ValueError(f"matrix of size {A.shape[0]} exceeds the "
                         f"{_MONOTONE_SIZE_LIMIT} limit for dense inversion")
    inv = np.linalg.inv(A)
    worst = float(inv.min())
    return worst >= -tol * max(1.0, float(np.abs(inv).max())), worst


@dataclass
class ErrorNorms:
    l2: float
    h1_semi: float
    t: float


def error_norms(mesh: Mesh, c, exact, t: float, quad_order: int = 3) -> ErrorNorms:
    """Global L2 and H1-seminorm errors of a nodal field against an
    analytic solution with value/gradient evaluators."""
    c = np.asarray(c, dtype=float)
    if c.shape != (mesh.n_nodes,):
        raise ValueError(f"field has shape {c.shape}, mesh has {mesh.n_nodes} nodes")
    pts, u_h, grad_h, wdet = [], [], [], []
    for etype, conn in mesh.elements:
        idx = np.asarray(conn)
        X = mesh.coords[idx]
        ce = c[idx]
        rule, Ns, G0s = _tables(etype, quad_order)
        for q, w in enumerate(rule.weights):
            det, G = _mapped(X, G0s[q])
            pts.append(Ns[q] @ X)
            u_h.append(Ns[q] @ ce)
            grad_h.append(G.T @ ce)
            wdet.append(w * det)
    pts = np.array(pts)
    u_h = np.array(u_h)
    grad_h = np.array(grad_h)
    wdet = np.array(wdet)
    du = u_h - exact.values(pts, t)
    dg = grad_h - exact.gradients(pts, t)
    l2 = math.sqrt(float(wdet @ du ** 2))
    h1 = math.sqrt(float(wdet @ np.sum(dg ** 2, axis=1)))
    return ErrorNorms(l2, h1, t)


def convergence_rates(errors, spacings) -> np.ndarray:
    """Observed rates log(e_k/e_{k+1}) / log(h_k/h_{k+1}).

    A zero error yields +inf at that position (already exact).
    """
    e = np.asarray(errors, dtype=float)
    h = np.asarray(spacings, dtype=float)
    if e.shape != h.shape or e.ndim != 1 or e.size < 2:
        raise ValueError("need matching 1D arrays of at least 2 entries")
    if np.any(h <= 0) or np.any(np.diff(h) >= 0):
        raise ValueError("spacings must be positive and strictly decreasing")
    if np.any(e < 0):
        raise ValueError("errors must be non-negative")
    rates = np.empty(e.size - 1)
    for k in range(e.size - 1):
        if e[k + 1] == 0.0:
            rates[k] = math.inf
        elif e[k] == 0.0:
            rates[k] = -math.inf
        else:
            rates[k] = math.log(e[k] / e[k + 1]) / math.log(h[k] / h[k + 1])
    return rates
