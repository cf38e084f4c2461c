"""Box-constrained convex quadratic programming.

Minimises 0.5 x.K x - f.x subject to lo <= x <= hi with K symmetric
positive definite, by a primal active-set method: solve on the current
free set, walk to the first blocking bound, and release the active
bound with the most negative multiplier once stationary.  Sparse
factorisations of the free-set submatrices are cached so repeated
solves against the same matrix (time stepping) stay cheap.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu


class NotSPDError(ValueError):
    """The quadratic term is not symmetric positive definite."""


class QPNoConvergenceError(RuntimeError):
    """Active-set iteration cap reached; carries the best iterate."""

    def __init__(self, msg, best, iterations):
        super().__init__(msg)
        self.best = best
        self.iterations = iterations


@dataclass
class BoxQP:
    """Problem data; bounds may be -inf/+inf where no bound applies."""

    K: object
    f: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        n = self.f.shape[0]
        self.lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (n,)).copy()
        self.hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (n,)).copy()
        if self.K.shape != (n, n):
            raise ValueError(f"K is {self.K.shape}, f has {n} entries")
        if np.any(self.lo > self.hi):
            raise ValueError("lower bound exceeds upper bound")
        if np.isnan(self.lo).any() or np.isnan(self.hi).any():
            raise ValueError("NaN bound")

    @property
    def n(self) -> int:
        return self.f.shape[0]


@dataclass
class QPResult:
    x: np.ndarray
    active_lower: np.ndarray        # indices at the lower bound
    active_upper: np.ndarray
    multipliers_lower: np.ndarray   # (K x - f) on active_lower, >= -tol
    multipliers_upper: np.ndarray   # (K x - f) on active_upper, <= +tol
    kkt_residual: float
    iterations: int


def objective(K, f, x) -> float:
    return 0.5 * float(x @ (K @ x)) - float(f @ x)


def kkt_residual(prob: BoxQP, x) -> float:
    """Worst violation of feasibility, stationarity and multiplier signs.

    A component within 1e-12*(1 + |bound|) of a bound counts as active;
    free components must have zero gradient, actives the right sign.
    """
    x = np.asarray(x, dtype=float)
    g = prob.K @ x - prob.f
    res = max(0.0, float(np.max(prob.lo - x, initial=0.0)),
              float(np.max(x - prob.hi, initial=0.0)))
    at_lo = x - prob.lo <= 1e-12 * (1.0 + np.abs(prob.lo))
    at_hi = prob.hi - x <= 1e-12 * (1.0 + np.abs(prob.hi))
    lo_only = at_lo & ~at_hi          # components pinned both ways are exempt
    hi_only = at_hi & ~at_lo
    free = ~(at_lo | at_hi)
    if lo_only.any():
        res = max(res, float(np.max(-g[lo_only])))
    if hi_only.any():
        res = max(res, float(np.max(g[hi_only])))
    if free.any():
        res = max(res, float(np.max(np.abs(g[free]))))
    return float(res)


class BoxQPSolver:
    """Active-set solver bound to one SPD matrix, reusable across
    right-hand sides and bounds (with factorisation caching)."""

    _CACHE_SIZE = 8

    def __init__(self, K):
        K = sparse.csr_matrix(K) if not sparse.issparse(K) else K.tocsr()
        if K.shape[0] != K.shape[1]:
            raise NotSPDError(f"matrix is {K.shape}, not square")
        scale = abs(K).max() or 1.0
        asym = abs(K - K.T).max()
        if asym > 1e-10 * scale:
            raise NotSPDError(f"matrix not symmetric (|K - K^T| = {asym:.3e})")
        if K.shape[0] and K.diagonal().min() <= 0.0:
            raise NotSPDError("matrix has a non-positive diagonal entry")
        self.K = K
        self.n = K.shape[0]
        self._factors = OrderedDict()   # free-mask bytes -> splu factor

    def _solve_free(self, free, rhs):
        key = free.tobytes()
        factor = self._factors.get(key)
        if factor is None:
            idx = np.nonzero(free)[0]
            sub = self.K[idx][:, idx].tocsc()
            try:
                factor = splu(sub)
            except RuntimeError as exc:
                raise NotSPDError(f"free-set factorisation failed: {exc}") from exc
            self._factors[key] = factor
            if len(self._factors) > self._CACHE_SIZE:
                self._factors.popitem(last=False)
        else:
            self._factors.move_to_end(key)
        out = factor.solve(rhs)
        if not np.all(np.isfinite(out)):
            raise NotSPDError("free-set solve produced non-finite values")
        return out

    def solve(self, f, lo, hi, warm_start=None, tol: float = 1e-10,
              max_iter: int = None) -> QPResult:
        prob = BoxQP(self.K, f, lo, hi)
        n = self.n
        if max_iter is None:
            max_iter = 10 * n + 100
        margin = tol * (1.0 + float(np.max(np.abs(prob.f), initial=0.0)))
        lo, hi = prob.lo, prob.hi
        fixed = lo == hi

        if warm_start is not None:
            x = np.clip(np.asarray(warm_start, dtype=float), lo, hi)
        else:
            x = np.clip(self._solve_free(np.ones(n, dtype=bool), prob.f), lo, hi)
        act_lo = (x <= lo) & np.isfinite(lo)
        act_hi = (x >= hi) & np.isfinite(hi) & ~act_lo

        obj_prev = np.inf
        iterations = 0
        while iterations < max_iter:
            iterations += 1
            free = ~(act_lo | act_hi)
            target = x.copy()
            if free.any():
                pinned_part = np.where(free, 0.0, x)
                rhs = prob.f[free] - (self.K @ pinned_part)[free]
                target[free] = self._solve_free(free, rhs)
            step = target - x

            if np.max(np.abs(step)) > 1e-14 * (1.0 + np.max(np.abs(x))):
                # ratio test: stop at the first bound the step crosses
                with np.errstate(divide="ignore", invalid="ignore"):
                    a = np.full(n, np.inf)
                    dn = free & (step < 0) & np.isfinite(lo)
                    up = free & (step > 0) & np.isfinite(hi)
                    a[dn] = (lo[dn] - x[dn]) / step[dn]
                    a[up] = (hi[up] - x[up]) / step[up]
                alpha = float(a.min(initial=np.inf))
                if alpha < 1.0:
                    blocker = int(np.argmin(a))   # lowest index on ties
                    x = x + max(alpha, 0.0) * step
                    if step[blocker] < 0:
                        x[blocker] = lo[blocker]
                        act_lo[blocker] = True
                    else:
                        x[blocker] = hi[blocker]
                        act_hi[blocker] = True
                    continue
                x = target

            obj = objective(self.K, prob.f, x)
            if obj > obj_prev + 1e-8 * (1.0 + abs(obj_prev)):
                raise NotSPDError(
                    f"objective increased ({obj_prev:.6e} -> {obj:.6e}); "
                    "quadratic term is not positive definite")
            obj_prev = obj

            # stationary on the free set; check multiplier signs
            g = self.K @ x - prob.f
            margins = np.where(act_lo, g, np.where(act_hi, -g, np.inf))
            margins[fixed] = np.inf   # equal bounds never release
            worst = int(np.argmin(margins))
            if margins[worst] >= -margin:
                act = act_lo | act_hi
                res = kkt_residual(prob, x)
                return QPResult(
                    x=x,
                    active_lower=np.nonzero(act_lo & ~fixed)[0],
                    active_upper=np.nonzero(act_hi & ~fixed)[0],
                    multipliers_lower=g[act_lo & ~fixed],
                    multipliers_upper=g[act_hi & ~fixed],
                    kkt_residual=res,
                    iterations=iterations)
            act_lo[worst] = False
            act_hi[worst] = False

        raise QPNoConvergenceError(
            f"active-set iteration cap {max_iter} reached", x, max_iter)


def solve_box_qp(prob: BoxQP, warm_start=None, tol: float = 1e-10) -> QPResult:
    """One-shot convenience wrapper around BoxQPSolver."""
    return BoxQPSolver(prob.K).solve(prob.f, prob.lo, prob.hi,
                                     warm_start=warm_start, tol=tol)


def brute_force_box_qp(prob: BoxQP) -> np.ndarray:
    """Exhaustive reference solver for tiny problems (n <= 12).

    Enumerates every lower/free/upper assignment, solves the equality-
    constrained subproblem, and returns the best KKT-consistent
    feasible candidate (best feasible candidate if roundoff spoils all
    KKT checks).  Exponential cost; for testing only.
    """
    n = prob.n
    if n > 12:
        raise ValueError(f"brute force is limited to n <= 12, got {n}")
    K = prob.K.toarray() if sparse.issparse(prob.K) else np.asarray(prob.K, dtype=float)
    scale = 1.0 + float(np.max(np.abs(prob.f), initial=0.0))
    feas_tol, kkt_tol = 1e-9 * scale, 1e-8 * scale

    dense_prob = BoxQP(K, prob.f, prob.lo, prob.hi)
    best = None          # (objective, x) among KKT-consistent candidates
    best_feasible = None
    for assign in product((0, 1, 2), repeat=n):
        x = np.empty(n)
        free = []
        ok = True
        for i, a in enumerate(assign):
            if a == 0:
                if not np.isfinite(prob.lo[i]):
                    ok = False
                    break
                x[i] = prob.lo[i]
            elif a == 2:
                if not np.isfinite(prob.hi[i]):
                    ok = False
                    break
                x[i] = prob.hi[i]
            else:
                free.append(i)
        if not ok:
            continue
        if free:
            F = np.array(free)
            pinned = np.ones(n, dtype=bool)
            pinned[F] = False
            rhs = prob.f[F] - K[np.ix_(F, pinned)] @ x[pinned]
            try:
                x[F] = np.linalg.solve(K[np.ix_(F, F)], rhs)
            except np.linalg.LinAlgError:
                continue
        if np.any(x < prob.lo - feas_tol) or np.any(x > prob.hi + feas_tol):
            continue
        obj = objective(K, prob.f, x)
        if best_feasible is None or obj < best_feasible[0]:
            best_feasible = (obj, x.copy())
        if (best is None or obj < best[0]) \
                and kkt_residual(dense_prob, x) <= kkt_tol:
            best = (obj, x.copy())
    chosen = best if best is not None else best_feasible
    if chosen is None:
        raise RuntimeError("no feasible candidate found")
    return chosen[1]
