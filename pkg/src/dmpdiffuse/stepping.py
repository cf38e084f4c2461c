"""Time integration of transient diffusion problems.

Two families are provided.  ProposedRothe discretises time first and
solves each implicit step as a box-constrained QP, which keeps nodal
values inside physically justified bounds by construction.
WeightedRothe is its variant marching states at intermediate weighted
levels (one bootstrap plus one transition solve ahead of the uniform
recursion).  SingleField is the classical trapezoidal family on the
semi-discrete system (consistent or lumped capacity) and enforces no
bounds; it is the comparison scheme whose violations the diagnostics
measure.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import splu

from .assembly import (apply_dirichlet, assemble_capacity, assemble_load,
                       assemble_stiffness)
from .boxqp import BoxQPSolver
from .mesh import Mesh
from .problems import ConstraintMode, ProblemSpec


# ---------------------------------------------------------------------------
# scheme descriptions


@dataclass(frozen=True)
class ProposedRothe:
    """Implicit step of the time-discretised equation solved as a QP.

    gamma only affects how rates are recovered afterwards;
    rate_method is "direct" (recursion) or "weighted" (blend of
    difference quotients, one step lagged).
    """

    gamma: float = 1.0
    rate_method: str = "weighted"

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.rate_method not in ("direct", "weighted"):
            raise ValueError(f"unknown rate_method {self.rate_method!r}")


@dataclass(frozen=True)
class WeightedRothe:
    """Variant marching at weighted levels n + gamma between steps."""

    gamma: float

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")


@dataclass(frozen=True)
class SingleField:
    """Classical one-field trapezoidal family on the semi-discrete
    system; gamma = 1 is backward Euler, gamma = 0.5 the midpoint rule.
    No bounds are enforced."""

    gamma: float = 1.0
    lumped: bool = False

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1]; the explicit "
                             f"gamma = 0 member is not supported (got {self.gamma})")


@dataclass(frozen=True)
class SchemeConfig:
    """A scheme plus the numerical knobs shared by all of them."""

    scheme: object
    dt: float
    constraint_mode: ConstraintMode = None   # None: use the problem's mode
    quad_order: int = 2

    def __post_init__(self):
        if not isinstance(self.scheme, (ProposedRothe, WeightedRothe, SingleField)):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.quad_order not in (1, 2, 3):
            raise ValueError(f"quad_order must be 1, 2 or 3, got {self.quad_order}")


@dataclass
class TimeState:
    """Discrete trajectory point: field c and rate v at step `step`.

    c_weighted carries the most recent weighted-level field of
    WeightedRothe (None for the other schemes and at step 0).
    """

    step: int
    t: float
    c: np.ndarray
    v: np.ndarray
    c_weighted: np.ndarray = None


@dataclass
class StepRecord:
    step: int
    time: float
    min_c: float
    max_c: float
    n_below: int
    n_above: int
    qp_iters: int
    wall_ms: float


@dataclass
class TimeHistory:
    """Per-step summaries plus requested field/rate snapshots."""

    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)        # (t, c) pairs
    rate_snapshots: list = field(default_factory=list)   # (t, v) pairs
    flags: list = field(default_factory=list)
    final_state: TimeState = None

    def times(self):
        return np.array([r.time for r in self.records])

    def min_values(self):
        return np.array([r.min_c for r in self.records])

    def max_values(self):
        return np.array([r.max_c for r in self.records])


# ---------------------------------------------------------------------------
# bounds and rate recovery


def compute_bounds(problem: ProblemSpec, mesh: Mesh, time_level: float,
                   mode: ConstraintMode):
    """Box bounds for one solve at the given time level.

    MAX_PRINCIPLE takes the extrema of the initial nodal values and of
    all Dirichlet data evaluated at the level; with no Dirichlet data
    the initial extrema alone are used.
    """
    if mode is ConstraintMode.UNCONSTRAINED:
        return -math.inf, math.inf
    if mode is ConstraintMode.NON_NEGATIVE:
        return 0.0, math.inf
    ic = [float(problem.initial(x)) for x in mesh.coords]
    lo, hi = min(ic), max(ic)
    _, dvals = _dirichlet_map(problem, mesh, time_level)
    if dvals.size:
        lo = min(lo, float(dvals.min()))
        hi = max(hi, float(dvals.max()))
    return lo, hi


def recover_rates_direct(c_next, c_prev, v_prev, gamma: float, dt: float):
    """Rate at the new step from the trapezoidal update relation.

    Rearranges c_next = c_prev + dt*((1-gamma)*v_prev + gamma*v_next);
    ill-posed at gamma = 0 and noise-amplifying for gamma < 1/2.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive; the update relation "
                         "cannot be inverted at gamma = 0")
    return (c_next - c_prev - (1.0 - gamma) * dt * v_prev) / (gamma * dt)


def recover_rates_weighted(c_next, c_prev, v_weighted_next, gamma: float,
                           dt: float, v_prev=None):
    """Rates from difference quotients at weighted levels.

    Returns (rate at the weighted level between the two states, rate at
    the c_next step).  The latter blends with v_weighted_next -- the
    quotient one interval later -- so it lags one step behind the
    march; pass v_prev to fall back to the direct relation when that
    quotient does not exist (final step).
    """
    v_w = (c_next - c_prev) / dt
    if v_weighted_next is None:
        if v_prev is None:
            raise ValueError("need v_weighted_next, or v_prev for the "
                             "final-step fallback")
        return v_w, recover_rates_direct(c_next, c_prev, v_prev, gamma, dt)
    return v_w, gamma * v_w + (1.0 - gamma) * v_weighted_next


# ---------------------------------------------------------------------------
# shared per-run machinery


def _dirichlet_map(problem, mesh, t):
    """Sorted pinned node indices and their values at time t."""
    values = {}
    for tag, fn in problem.dirichlet:
        if tag not in mesh.node_tags:
            raise KeyError(f"problem pins unknown boundary tag {tag!r}")
        for node in mesh.node_tags[tag]:
            v = float(fn(mesh.coords[node], t))
            old = values.get(node)
            if old is not None and abs(old - v) > 1e-12 * (1.0 + abs(v)):
                raise ValueError(f"conflicting Dirichlet values at node "
                                 f"{node}: {old!r} vs {v!r}")
            values[node] = v
    idx = np.array(sorted(values), dtype=int)
    return idx, np.array([values[i] for i in idx])


class _StepOperator:
    """Assembled matrices, reduction and solver for one (mesh, problem,
    scheme, dt) combination, reused across all steps of a run."""

    def __init__(self, mesh, problem, config, dt, coeff=None):
        scheme = config.scheme
        self.mesh, self.problem, self.config, self.dt = mesh, problem, config, dt
        self.scheme = scheme
        self.mode = config.constraint_mode or problem.constraint_mode
        order = config.quad_order
        self.stiffness = assemble_stiffness(mesh, problem.diffusivity, order)
        lumped = isinstance(scheme, SingleField) and scheme.lumped
        self.capacity = assemble_capacity(mesh, lumped=lumped, quad_order=order)
        if coeff is None:
            if isinstance(scheme, SingleField):
                coeff = 1.0 / (scheme.gamma * dt)
            else:
                coeff = 1.0 / dt
        self.coeff = coeff
        A = (coeff * self.capacity + self.stiffness).tocsr()
        idx, vals = _dirichlet_map(problem, mesh, t=dt)
        self.reduced = apply_dirichlet(A, np.zeros(mesh.n_nodes),
                                       dict(zip(idx, vals)))
        if isinstance(scheme, SingleField):
            self.qp = None
            self.direct = splu(self.reduced.matrix.tocsc())
        else:
            self.qp = BoxQPSolver(self.reduced.matrix)
            self.direct = None
        self._load_cache = {}
        self._pin_cache = {}
        self._ic_extrema = None

    def load(self, t):
        key = 0.0 if self.problem.steady_data else t
        if key not in self._load_cache:
            if not self.problem.steady_data:
                self._load_cache.clear()   # keep at most one entry
            src = self.problem.source
            self._load_cache[key] = assemble_load(
                self.mesh, lambda x: src(x, t),
                [(tag, (lambda fn: lambda x: fn(x, t))(fn))
                 for tag, fn in self.problem.neumann],
                self.config.quad_order)
        return self._load_cache[key]

    def pinned_values(self, t):
        key = 0.0 if self.problem.steady_data else t
        if key not in self._pin_cache:
            if not self.problem.steady_data:
                self._pin_cache.clear()
            _, vals = _dirichlet_map(self.problem, self.mesh, t)
            self._pin_cache[key] = vals
        return self._pin_cache[key]

    def bounds(self, t, mode=None):
        mode = mode or self.mode
        if mode is ConstraintMode.UNCONSTRAINED:
            return -math.inf, math.inf
        if mode is ConstraintMode.NON_NEGATIVE:
            return 0.0, math.inf
        if self._ic_extrema is None:
            ic = [float(self.problem.initial(x)) for x in self.mesh.coords]
            self._ic_extrema = (min(ic), max(ic))
        lo, hi = self._ic_extrema
        dvals = self.pinned_values(t)
        if dvals.size:
            lo, hi = min(lo, float(dvals.min())), max(hi, float(dvals.max()))
        return lo, hi

    def _qp_step(self, rhs_full, t_level, warm_from):
        """Reduce, solve the box QP at the given level, expand."""
        pv = self.pinned_values(t_level)
        rhs = self.reduced.reduce_rhs(rhs_full, pv)
        lo, hi = self.bounds(t_level)
        warm = np.clip(warm_from[self.reduced.free], lo, hi)
        res = self.qp.solve(rhs, lo, hi, warm_start=warm)
        return self.reduced.expand(res.x, pv), res


def initial_state(mesh: Mesh, problem: ProblemSpec, config: SchemeConfig,
                  project_initial: bool = False) -> TimeState:
    """Initial field plus a rate consistent with the equation.

    The field samples the initial data at the nodes; with
    project_initial it is the L2 projection instead, which keeps the
    optimal approximation order when the data is discontinuous (error
    studies) at the price of over/undershoots near jumps.  The rate
    solves capacity * v0 = load(0) - stiffness * c0 on free DOFs (zero
    at pinned nodes), with the capacity form the scheme actually uses.
    """
    scheme = config.scheme
    order = config.quad_order
    if project_initial:
        M3 = assemble_capacity(mesh, quad_order=3)
        b3 = assemble_load(mesh, problem.initial, quad_order=3)
        c0 = splu(M3.tocsc()).solve(b3)
    else:
        c0 = np.array([float(problem.initial(x)) for x in mesh.coords])
    K = assemble_stiffness(mesh, problem.diffusivity, order)
    lumped = isinstance(scheme, SingleField) and scheme.lumped
    C = assemble_capacity(mesh, lumped=lumped, quad_order=order)
    src = problem.source
    b0 = assemble_load(mesh, lambda x: src(x, 0.0),
                       [(tag, (lambda fn: lambda x: fn(x, 0.0))(fn))
                        for tag, fn in problem.neumann], order)
    idx, _ = _dirichlet_map(problem, mesh, t=0.0)
    v0 = np.zeros(mesh.n_nodes)
    mask = np.ones(mesh.n_nodes, dtype=bool)
    mask[idx] = False
    free = np.nonzero(mask)[0]
    if free.size:
        rhs = (b0 - K @ c0)[free]
        C_ff = C[free][:, free].tocsc()
        v0[free] = splu(C_ff).solve(rhs)
    return TimeState(0, 0.0, c0, v0)


# ---------------------------------------------------------------------------
# single-step advances


def _advance_proposed(op, state):
    t1 = state.t + op.dt
    rhs_full = op.load(t1) + op.coeff * (op.capacity @ state.c)
    c1, res = op._qp_step(rhs_full, t1, state.c)
    v1 = recover_rates_direct(c1, state.c, state.v, op.scheme.gamma, op.dt)
    return TimeState(state.step + 1, t1, c1, v1), res


def _advance_single_field(op, state):
    gamma = op.scheme.gamma
    t1 = state.t + op.dt
    pred = state.c + (1.0 - gamma) * op.dt * state.v
    rhs_full = op.load(t1) + op.coeff * (op.capacity @ pred)
    pv = op.pinned_values(t1)
    rhs = op.reduced.reduce_rhs(rhs_full, pv)
    c1 = op.reduced.expand(op.direct.solve(rhs), pv)
    v1 = recover_rates_direct(c1, state.c, state.v, gamma, op.dt)
    return TimeState(state.step + 1, t1, c1, v1), None


def _advance_weighted(op, op_transition, state):
    gamma = op.scheme.gamma
    dt = op.dt
    if state.c_weighted is None:
        if state.step != 0:
            raise ValueError("weighted-level state missing after step 0")
        # bootstrap: one backward-Euler step to t1 ...
        t1 = dt
        rhs_full = op.load(t1) + op.coeff * (op.capacity @ state.c)
        c1, res1 = op._qp_step(rhs_full, t1, state.c)
        # ... then a transition solve up to the first weighted level
        tw = t1 + gamma * dt
        rhs_full = op_transition.load(tw) \
            + op_transition.coeff * (op_transition.capacity @ c1)
        cw, res2 = op_transition._qp_step(rhs_full, tw, c1)
        v1 = recover_rates_direct(c1, state.c, state.v, gamma, dt)
        res = res1 if res1.iterations >= res2.iterations else res2
        return TimeState(1, t1, c1, v1, cw), res
    tw_next = state.t + dt + gamma * dt
    rhs_full = op.load(tw_next) + op.coeff * (op.capacity @ state.c_weighted)
    cw_next, res = op._qp_step(rhs_full, tw_next, state.c_weighted)
    c1 = gamma * state.c_weighted + (1.0 - gamma) * cw_next
    v1 = recover_rates_direct(c1, state.c, state.v, gamma, dt)
    return TimeState(state.step + 1, state.t + dt, c1, v1, cw_next), res


def _make_operators(mesh, problem, config, dt):
    op = _StepOperator(mesh, problem, config, dt)
    op_tr = None
    if isinstance(config.scheme, WeightedRothe):
        op_tr = _StepOperator(mesh, problem, config, dt,
                              coeff=1.0 / (config.scheme.gamma * dt))
    return op, op_tr


def _advance(op, op_tr, state):
    if isinstance(op.scheme, ProposedRothe):
        return _advance_proposed(op, state)
    if isinstance(op.scheme, SingleField):
        return _advance_single_field(op, state)
    return _advance_weighted(op, op_tr, state)


# public single-step entry points (convenience around the operators)

def step_proposed(state: TimeState, mesh: Mesh, problem: ProblemSpec,
                  config: SchemeConfig) -> TimeState:
    """Advance one implicit bound-constrained step."""
    if not isinstance(config.scheme, ProposedRothe):
        raise ValueError("config.scheme must be ProposedRothe")
    return _advance_proposed(_StepOperator(mesh, problem, config, config.dt),
                             state)[0]


def step_single_field(state: TimeState, mesh: Mesh, problem: ProblemSpec,
                      config: SchemeConfig) -> TimeState:
    """Advance one unconstrained trapezoidal step."""
    if not isinstance(config.scheme, SingleField):
        raise ValueError("config.scheme must be SingleField")
    return _advance_single_field(_StepOperator(mesh, problem, config, config.dt),
                                 state)[0]


def step_weighted_rothe(state: TimeState, mesh: Mesh, problem: ProblemSpec,
                        config: SchemeConfig) -> TimeState:
    """Advance one weighted-level step (two solves when leaving step 0)."""
    if not isinstance(config.scheme, WeightedRothe):
        raise ValueError("config.scheme must be WeightedRothe")
    op, op_tr = _make_operators(mesh, problem, config, config.dt)
    return _advance_weighted(op, op_tr, state)[0]


# ---------------------------------------------------------------------------
# full transient drive


def run_transient(mesh: Mesh, problem: ProblemSpec, config: SchemeConfig, *,
                  t_end: float = None, snapshot_times=(),
                  rate_snapshot_times=(), violation_tol: float = 1e-9,
                  project_initial: bool = False) -> TimeHistory:
    """March from t = 0 to t_end, recording per-step summaries.

    Records always measure violations against the problem's own
    constraint mode, whatever mode the scheme enforces, so that
    constrained and unconstrained runs are compared on the same scale.
    A non-integer t_end/dt ends with one shortened step (not supported
    for WeightedRothe, whose level structure assumes a uniform dt).
    """
    if t_end is None:
        t_end = problem.end_time
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    dt = config.dt
    n_steps = int(round(t_end / dt))
    short = None
    if n_steps == 0 or abs(n_steps * dt - t_end) > 1e-9 * max(dt, t_end):
        n_steps = int(math.floor(t_end / dt + 1e-12))
        short = t_end - n_steps * dt
        if short < 1e-12 * t_end:
            short = None
    if short is not None and isinstance(config.scheme, WeightedRothe):
        raise ValueError("WeightedRothe needs t_end to be a whole number "
                         f"of steps; {t_end}/{dt} is not")

    op, op_tr = _make_operators(mesh, problem, config, dt)
    state = initial_state(mesh, problem, config, project_initial)
    history = TimeHistory()
    report_mode = problem.constraint_mode
    if report_mode is ConstraintMode.MAX_PRINCIPLE and not problem.dirichlet:
        history.flags.append("bounds-from-initial-data-only")
    if short is not None:
        history.flags.append("short-final-step")

    want_rates = isinstance(config.scheme, (ProposedRothe, WeightedRothe)) \
        and getattr(config.scheme, "rate_method", "weighted") == "weighted"
    rate_times = sorted(rate_snapshot_times)
    snap_times = sorted(snapshot_times)
    trail = [(state.t, state.c)]   # last few integral-level fields

    total = n_steps + (1 if short is not None else 0)
    for k in range(1, total + 1):
        if k == n_steps + 1:       # shortened final step
            op, op_tr = _make_operators(mesh, problem, config, short)
        tick = time.perf_counter()
        state, res = _advance(op, op_tr, state)
        wall_ms = (time.perf_counter() - tick) * 1e3
        lo_r, hi_r = op.bounds(state.t, report_mode)
        c = state.c
        history.records.append(StepRecord(
            step=k, time=state.t,
            min_c=float(c.min()), max_c=float(c.max()),
            n_below=int(np.sum(c < lo_r - violation_tol)),
            n_above=int(np.sum(c > hi_r + violation_tol)),
            qp_iters=res.iterations if res is not None else 0,
            wall_ms=wall_ms))

        tol_t = dt * 1e-6
        for s in snap_times:
            if abs(state.t - s) <= tol_t:
                history.snapshots.append((state.t, c.copy()))
        if rate_times:
            gamma = op.scheme.gamma
            if want_rates:
                # the rate at step k-1 becomes computable once c_k exists
                t_prev, c_prev = trail[-1]
                if len(trail) >= 2 and any(abs(t_prev - s) <= tol_t for s in rate_times):
                    _, v_prev = recover_rates_weighted(
                        c_prev, trail[-2][1], (c - c_prev) / op.dt, gamma, op.dt)
                    history.rate_snapshots.append((t_prev, v_prev))
                if k == total and any(abs(state.t - s) <= tol_t for s in rate_times):
                    history.rate_snapshots.append((state.t, state.v.copy()))
                    history.flags.append("rate-fallback-direct-final")
            else:
                if any(abs(state.t - s) <= tol_t for s in rate_times):
                    history.rate_snapshots.append((state.t, state.v.copy()))
        trail.append((state.t, c))
        if len(trail) > 3:
            trail.pop(0)

    history.final_state = state
    return history
