"""Assembly of global finite element operators on a Mesh.

Produces the diffusion stiffness matrix, the capacity (mass) matrix in
consistent or row-sum lumped form, load vectors from volumetric and
boundary-flux data, and the symmetric reduction of a linear system to
the free degrees of freedom once Dirichlet values are pinned.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse

from . import elements as el
from .mesh import ElementType, Mesh


@lru_cache(maxsize=None)
def _tables(etype: ElementType, order: int):
    """Quadrature points with pretabulated shape values/gradients."""
    rule = el.quadrature_rule(etype, order)
    N = [el.shape_values(etype, p) for p in rule.points]
    G0 = [el.shape_gradients(etype, p) for p in rule.points]
    return rule, N, G0


def _mapped(X, G0):
    """Jacobian determinant and physical gradients for one point."""
    J = X.T @ G0
    if J.shape == (1, 1):
        det = J[0, 0]
        Ginv = 1.0 / det
        G = G0 * Ginv
    else:
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        inv = np.array([[J[1, 1], -J[0, 1]], [-J[1, 0], J[0, 0]]]) / det
        G = G0 @ inv
    if det <= 0.0:
        raise el.DegenerateElementError(f"non-positive det J = {det:.3e}")
    return det, G


def _accumulate(mesh, quad_order, kernel):
    """Run `kernel(etype, X, conn)` over elements, collecting triplets."""
    rows, cols, vals = [], [], []
    for etype, conn in mesh.elements:
        idx = np.asarray(conn)
        ke = kernel(etype, mesh.coords[idx], conn)
        rows.append(np.repeat(idx, idx.size))
        cols.append(np.tile(idx, idx.size))
        vals.append(ke.ravel())
    n = mesh.n_nodes
    A = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n)).tocsr()
    A.eliminate_zeros()
    return A


def assemble_stiffness(mesh: Mesh, diffusivity, quad_order: int = 2):
    """Global diffusion stiffness matrix (CSR, symmetric)."""
    def kernel(etype, X, conn):
        rule, Ns, G0s = _tables(etype, quad_order)
        ke = np.zeros((len(conn), len(conn)))
        for q, w in enumerate(rule.weights):
            det, G = _mapped(X, G0s[q])
            D = diffusivity.tensor(Ns[q] @ X)
            ke += (w * det) * (G @ D @ G.T)
        return ke

    return _accumulate(mesh, quad_order, kernel)


def assemble_capacity(mesh: Mesh, lumped: bool = False, quad_order: int = 2):
    """Capacity (mass) matrix; `lumped` takes row sums onto the diagonal."""
    def kernel(etype, X, conn):
        rule, Ns, G0s = _tables(etype, quad_order)
        me = np.zeros((len(conn), len(conn)))
        for q, w in enumerate(rule.weights):
            det, _ = _mapped(X, G0s[q])
            me += (w * det) * np.outer(Ns[q], Ns[q])
        return me

    M = _accumulate(mesh, quad_order, kernel)
    if lumped:
        M = sparse.diags(np.asarray(M.sum(axis=1)).ravel(), format="csr")
    return M


def assemble_load(mesh: Mesh, source=None, neumann=(), quad_order: int = 2):
    """Load vector from a volumetric source and boundary-flux data.

    `source` maps a physical point to a value (time already bound by
    the caller); `neumann` lists (boundary tag, flux function) pairs.
    In 2D fluxes integrate along tagged boundary edges; in 1D they are
    point contributions at the tagged nodes.
    """
    b = np.zeros(mesh.n_nodes)
    if source is not None:
        for etype, conn in mesh.elements:
            idx = np.asarray(conn)
            X = mesh.coords[idx]
            rule, Ns, G0s = _tables(etype, quad_order)
            be = np.zeros(idx.size)
            for q, w in enumerate(rule.weights):
                det, _ = _mapped(X, G0s[q])
                be += (w * det * float(source(Ns[q] @ X))) * Ns[q]
            b[idx] += be

    if not neumann:
        return b
    edge_tags = {}
    for (a, c), tag in mesh.boundary_edges:
        edge_tags.setdefault(tag, []).append((a, c))
    gauss_x, gauss_w = np.array([-1, 1]) / np.sqrt(3.0), np.array([1.0, 1.0])
    for tag, flux in neumann:
        if mesh.dim == 1:
            for node in mesh.node_tags[tag]:  # KeyError on unknown tag
                b[node] += float(flux(mesh.coords[node]))
        else:
            if tag not in edge_tags:
                raise KeyError(f"no boundary edges tagged {tag!r}")
            for a, c in edge_tags[tag]:
                xa, xc = mesh.coords[a], mesh.coords[c]
                half_len = 0.5 * float(np.hypot(*(xc - xa)))
                for xi, w in zip(gauss_x, gauss_w):
                    N = np.array([(1 - xi) / 2, (1 + xi) / 2])
                    q = float(flux(N[0] * xa + N[1] * xc))
                    b[a] += w * half_len * N[0] * q
                    b[c] += w * half_len * N[1] * q
    return b


@dataclass
class ReducedSystem:
    """A symmetric system restricted to free DOFs after pinning.

    matrix is A[free, free]; coupling is A[free, pinned] so right-hand
    sides reduce as b[free] - coupling @ pinned_values.
    """

    matrix: sparse.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    pinned: np.ndarray
    pinned_values: np.ndarray
    coupling: sparse.csr_matrix
    n_full: int

    def reduce_rhs(self, b_full, pinned_values=None) -> np.ndarray:
        vals = self.pinned_values if pinned_values is None else pinned_values
        return b_full[self.free] - self.coupling @ vals

    def expand(self, x_free, pinned_values=None) -> np.ndarray:
        x = np.empty(self.n_full)
        x[self.free] = x_free
        x[self.pinned] = self.pinned_values if pinned_values is None else pinned_values
        return x


def apply_dirichlet(A, b, pinned) -> ReducedSystem:
    """Eliminate pinned DOFs from A x = b, keeping symmetry.

    `pinned` is a mapping node -> value or an iterable of (node, value)
    pairs; repeating a node with conflicting values is an error.
    """
    values = {}
    items = pinned.items() if hasattr(pinned, "items") else pinned
    for node, val in items:
        node, val = int(node), float(val)
        if node in values and abs(values[node] - val) > 1e-12 * max(1.0, abs(val)):
            raise ValueError(
                f"conflicting Dirichlet values at node {node}: "
                f"{values[node]!r} vs {val!r}")
        values[node] = val
    n = A.shape[0]
    pinned_idx = np.array(sorted(values), dtype=int)
    if pinned_idx.size and (pinned_idx[0] < 0 or pinned_idx[-1] >= n):
        raise ValueError("pinned node index out of range")
    mask = np.ones(n, dtype=bool)
    mask[pinned_idx] = False
    free = np.nonzero(mask)[0]
    vals = np.array([values[i] for i in pinned_idx])
    A = A.tocsr()
    A_ff = A[free][:, free].tocsr()
    A_fp = A[free][:, pinned_idx].tocsr()
    rhs = b[free] - A_fp @ vals
    return ReducedSystem(A_ff, rhs, free, pinned_idx, vals, A_fp, n)
