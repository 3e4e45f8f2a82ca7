"""Exact 0-1 linear programming.

Every lineup problem in this package is a small binary program: maximize a
linear objective subject to linear rows over 0-1 variables.  The builtin
solver is a depth-first branch and bound that prunes with

* bound propagation on every row (activity-based variable fixing),
* a density-sorted fractional knapsack bound over the nonnegative ``<=`` rows,
* the linear relaxation of the node, solved with HiGHS through ``scipy``.

An alternative backend hands the whole program to ``scipy.optimize.milp``.
The backend is picked per call or through ``TOPHEAVY_SOLVER``.
"""
from __future__ import annotations

import logging
import math
import os
import re
import time
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .exceptions import InputError

logger = logging.getLogger(__name__)

LE, GE, EQ = "<=", ">=", "=="
SENSES = (LE, GE, EQ)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
TIME_LIMIT = "time-limit-best"

FEAS_TOL = 1e-9
GAP_TOL = 1e-9
# LP bounds come back with solver tolerances; never prune on less than this.
_LP_SLACK = 1e-7

BACKEND_ENV = "TOPHEAVY_SOLVER"
# feasible points kept per search for warm-starting the next one
POOL_SIZE = 50


@dataclass
class Row:
    coefs: dict[int, float]
    sense: str
    rhs: float
    name: str = ""

    def activity(self, x) -> float:
        return math.fsum(c * x[j] for j, c in self.coefs.items())

    def slack(self, x) -> float:
        """Signed slack; negative means violated."""
        act = self.activity(x)
        if self.sense == LE:
            return self.rhs - act
        if self.sense == GE:
            return act - self.rhs
        return -abs(act - self.rhs)


@dataclass
class BinaryProgram:
    """Maximize ``objective @ x`` over ``x`` in {0,1}^n subject to ``rows``."""

    objective: np.ndarray
    rows: list[Row] = field(default_factory=list)
    fixings: dict[int, int] = field(default_factory=dict)
    names: list[str] | None = None
    # higher-priority variables are branched on first when fractional
    priority: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.ndim != 1 or self.objective.size < 1:
            raise InputError("objective must be a nonempty vector", "objective")
        if not np.all(np.isfinite(self.objective)):
            raise InputError("objective coefficients must be finite", "objective")
        n = self.n
        for i, row in enumerate(self.rows):
            if row.sense not in SENSES:
                raise InputError(f"unknown relation {row.sense!r}", f"rows[{i}]")
            if not math.isfinite(row.rhs):
                raise InputError("rhs must be finite", f"rows[{i}]")
            for j, c in row.coefs.items():
                if not 0 <= j < n:
                    raise InputError(f"variable {j} out of range", f"rows[{i}]")
                if not math.isfinite(c):
                    raise InputError("coefficients must be finite", f"rows[{i}]")
        for j, v in self.fixings.items():
            if not 0 <= j < n or v not in (0, 1):
                raise InputError(f"bad fixing {j}={v}", "fixings")
        if self.names is not None and len(self.names) != n:
            raise InputError("names must match variable count", "names")

    @property
    def n(self) -> int:
        return self.objective.size

    def var_name(self, j: int) -> str:
        return self.names[j] if self.names is not None else f"x{j}"

    def with_rows(self, extra: Iterable[Row]) -> "BinaryProgram":
        return BinaryProgram(
            self.objective, self.rows + list(extra), dict(self.fixings), self.names,
            dict(self.priority),
        )


class ProgramBuilder:
    """Incrementally assemble a :class:`BinaryProgram` with named variables."""

    def __init__(self):
        self._obj: list[float] = []
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        self.rows: list[Row] = []
        self.fixings: dict[int, int] = {}
        self.priority: dict[int, int] = {}

    def add_var(self, name: str, obj: float = 0.0, priority: int = 0) -> int:
        if name in self._index:
            raise InputError(f"duplicate variable {name!r}", "name")
        j = len(self._obj)
        self._obj.append(float(obj))
        self._names.append(name)
        self._index[name] = j
        if priority:
            self.priority[j] = priority
        return j

    def var(self, name: str) -> int:
        return self._index[name]

    @property
    def n(self) -> int:
        return len(self._obj)

    def add_row(self, coefs, sense, rhs, name=""):
        merged: dict[int, float] = {}
        for j, c in dict(coefs).items():
            if c != 0:
                merged[j] = merged.get(j, 0.0) + float(c)
        self.rows.append(Row(merged, sense, float(rhs), name))

    def fix(self, j: int, value: int):
        self.fixings[j] = int(value)

    def build(self) -> BinaryProgram:
        return BinaryProgram(
            np.array(self._obj), list(self.rows), dict(self.fixings), list(self._names),
            dict(self.priority),
        )


@dataclass
class SolveResult:
    status: str
    assignment: np.ndarray | None
    objective: float
    nodes: int = 0
    wall_time: float = 0.0
    # other feasible points met during the search, best first
    pool: list = field(default_factory=list)

    @property
    def has_solution(self) -> bool:
        return self.assignment is not None


@dataclass
class Violation:
    row: int
    name: str
    slack: float


def validate(program: BinaryProgram, assignment) -> list[Violation]:
    """List every row (and fixing) the assignment violates.

    Rows with all-integer coefficients are checked exactly; others allow a
    ``1e-9`` feasibility tolerance.
    """
    x = np.asarray(assignment)
    if x.shape != (program.n,):
        raise InputError(f"expected {program.n} values, got {x.shape}", "assignment")
    if not np.all((x == 0) | (x == 1)):
        raise InputError("assignment must be 0-1", "assignment")
    x = x.astype(int)
    out = []
    for i, row in enumerate(program.rows):
        integral = float(row.rhs).is_integer() and all(
            float(c).is_integer() for c in row.coefs.values()
        )
        if integral:
            act = sum(int(c) * int(x[j]) for j, c in row.coefs.items())
            rhs = int(row.rhs)
            if row.sense == LE:
                s = rhs - act
            elif row.sense == GE:
                s = act - rhs
            else:
                s = -abs(act - rhs)
            if s < 0:
                out.append(Violation(i, row.name, float(s)))
        else:
            s = row.slack(x)
            if s < -FEAS_TOL:
                out.append(Violation(i, row.name, s))
    for j, v in program.fixings.items():
        if x[j] != v:
            out.append(Violation(-1, f"fix:{program.var_name(j)}", -1.0))
    return out


class _Dense:
    """Row data in ``<=`` form for vectorised propagation and bounding."""

    def __init__(self, program: BinaryProgram):
        n = program.n
        le_rows, le_rhs = [], []
        eq_rows, eq_rhs = [], []
        ub_rows, ub_rhs = [], []
        for row in program.rows:
            a = np.zeros(n)
            for j, c in row.coefs.items():
                a[j] = c
            if row.sense == LE:
                le_rows.append(a)
                le_rhs.append(row.rhs)
                ub_rows.append(a)
                ub_rhs.append(row.rhs)
            elif row.sense == GE:
                le_rows.append(-a)
                le_rhs.append(-row.rhs)
                ub_rows.append(-a)
                ub_rhs.append(-row.rhs)
            else:
                le_rows += [a, -a]
                le_rhs += [row.rhs, -row.rhs]
                eq_rows.append(a)
                eq_rhs.append(row.rhs)
        self.A = np.array(le_rows).reshape(-1, n)
        self.b = np.array(le_rhs, dtype=float)
        S = sparse.csr_matrix(self.A)
        self.S = S
        self.S_pos = sparse.csr_matrix(np.maximum(self.A, 0.0))
        self.S_neg = sparse.csr_matrix(np.minimum(self.A, 0.0))
        coo = S.tocoo()
        self.nz_rows, self.nz_cols, self.nz_vals = coo.row, coo.col, coo.data
        self.A_ub = sparse.csr_matrix(np.array(ub_rows).reshape(-1, n)) if ub_rows else None
        self.b_ub = np.array(ub_rhs, dtype=float) if ub_rows else None
        self.A_eq = sparse.csr_matrix(np.array(eq_rows).reshape(-1, n)) if eq_rows else None
        self.b_eq = np.array(eq_rhs, dtype=float) if eq_rows else None
        # knapsack rows: nonnegative coefficients in <= form
        self.knap = [i for i in range(len(self.b)) if np.all(self.A[i] >= 0)]


def _propagate(d: _Dense, lb: np.ndarray, ub: np.ndarray) -> bool:
    """Tighten ``lb``/``ub`` in place; return False if the node is infeasible."""
    if d.A.shape[0] == 0:
        return True
    tol = FEAS_TOL
    rows, cols, vals = d.nz_rows, d.nz_cols, d.nz_vals
    n = lb.size
    while True:
        minact = d.S_pos @ lb + d.S_neg @ ub
        slack = d.b - minact
        if np.any(slack < -tol):
            return False
        free = lb < ub
        live = free[cols]
        lim = slack[rows] + tol
        hit0 = live & (vals > lim)
        hit1 = live & (-vals > lim)
        if not (hit0.any() or hit1.any()):
            return True
        force0 = np.zeros(n, dtype=bool)
        force1 = np.zeros(n, dtype=bool)
        force0[cols[hit0]] = True
        force1[cols[hit1]] = True
        if np.any(force0 & force1):
            return False
        ub[force0] = 0.0
        lb[force1] = 1.0


def _fractional_bound(c: np.ndarray, d: _Dense, lb: np.ndarray, ub: np.ndarray) -> float:
    """Objective bound from single knapsack rows, relaxed to fractions."""
    fixed = float(c @ lb)
    free = (lb < ub) & (c > 0)
    gain = c[free]
    best = fixed + float(gain.sum())
    if gain.size == 0:
        return fixed
    for i in d.knap:
        w = d.A[i, free]
        cap = d.b[i] - float(d.A[i] @ lb)
        if w.sum() <= cap:
            continue
        zero = w <= 0
        val = float(gain[zero].sum())
        ww, gg = w[~zero], gain[~zero]
        order = np.argsort(-gg / ww, kind="stable")
        ww, gg = ww[order], gg[order]
        cum = np.cumsum(ww)
        k = int(np.searchsorted(cum, cap, side="right"))
        val += float(gg[:k].sum())
        if k < ww.size:
            used = cum[k - 1] if k > 0 else 0.0
            val += gg[k] * max(cap - used, 0.0) / ww[k]
        best = min(best, fixed + val)
    return best


class _Relaxation:
    """Linear relaxation kept alive across nodes so HiGHS can warm start.

    Falls back to ``scipy.optimize.linprog`` when ``highspy`` is missing.
    """

    def __init__(self, program: BinaryProgram, d: _Dense):
        self.c = program.objective
        self.d = d
        self.n = program.n
        self.h = None
        try:
            import highspy
        except ImportError:  # pragma: no cover - exercised only without highspy
            return
        inf = highspy.kHighsInf
        lo, hi, cols = [], [], []
        for row in program.rows:
            lo.append(-inf if row.sense == LE else row.rhs)
            hi.append(inf if row.sense == GE else row.rhs)
        A = sparse.lil_matrix((len(program.rows), self.n))
        for i, row in enumerate(program.rows):
            for j, c in row.coefs.items():
                A[i, j] = c
        A = A.tocsc()
        lp = highspy.HighsLp()
        lp.num_col_ = self.n
        lp.num_row_ = A.shape[0]
        lp.col_cost_ = -self.c
        lp.col_lower_ = np.zeros(self.n)
        lp.col_upper_ = np.ones(self.n)
        lp.row_lower_ = np.array(lo, dtype=float)
        lp.row_upper_ = np.array(hi, dtype=float)
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr
        lp.a_matrix_.index_ = A.indices
        lp.a_matrix_.value_ = A.data
        lp.a_matrix_.num_col_ = self.n
        lp.a_matrix_.num_row_ = A.shape[0]
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("presolve", "off")
        h.passModel(lp)
        self.h = h
        self._optimal = highspy.HighsModelStatus.kOptimal
        self._infeasible = highspy.HighsModelStatus.kInfeasible
        self._idx = np.arange(self.n, dtype=np.int32)

    def solve(self, lb, ub):
        """Return ``(bound, x)``; ``bound is None`` when the node LP is infeasible.

        On solver trouble the bound is ``inf`` (never prunes) and ``x`` is None.
        """
        if self.h is None:
            return self._solve_scipy(lb, ub)
        self.h.changeColsBounds(self.n, self._idx, lb, ub)
        self.h.run()
        status = self.h.getModelStatus()
        if status == self._infeasible:
            return None, None
        if status != self._optimal:
            return math.inf, None
        sol = self.h.getSolution()
        x = np.array(sol.col_value)
        self.reduced = np.array(sol.col_dual)
        return float(self.c @ x), x

    def _solve_scipy(self, lb, ub):
        d = self.d
        res = linprog(-self.c, A_ub=d.A_ub, b_ub=d.b_ub, A_eq=d.A_eq, b_eq=d.b_eq,
                      bounds=np.column_stack([lb, ub]), method="highs")
        if res.status == 2:
            return None, None
        if res.status != 0:
            return math.inf, None
        return -res.fun, res.x


def objective_step(c: np.ndarray, max_digits: int = 6) -> float:
    """Largest ``10**-d`` dividing every coefficient, or 0.0 if there is none."""
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        return 0.0
    for dgt in range(max_digits + 1):
        scaled = c * 10.0 ** dgt
        if np.all(np.abs(scaled - np.rint(scaled)) <= 1e-9 * np.maximum(1.0, np.abs(scaled))):
            return 10.0 ** -dgt
    return 0.0


class BranchAndBound:
    """Depth-first branch and bound for a single :class:`BinaryProgram`.

    Every node runs activity-based bound propagation. ``bound="lp"`` then
    solves the linear relaxation (HiGHS, warm started between nodes), fixes
    variables by reduced cost and branches on the most fractional variable of
    the highest priority class. ``bound="fractional"`` uses only the
    density-sorted knapsack bound and branches on the largest objective
    coefficient.

    When every objective coefficient is a multiple of ``10**-d`` (d <= 6), a
    better solution must gain at least that step, and nodes are pruned
    accordingly.

    ``hints`` are candidate assignments tried before the search; feasible ones
    seed the incumbent. Up to ``pool_size`` of the best feasible points seen
    are returned in :attr:`SolveResult.pool`, which is what a sequence of
    closely related programs can pass on as hints.

    Instances hold mutable search state; use one per program and thread.
    """

    def __init__(self, program: BinaryProgram, time_budget: float = 60.0, bound: str = "lp",
                 hints=(), pool_size: int = POOL_SIZE):
        if bound not in ("lp", "fractional"):
            raise InputError(f"unknown bound {bound!r}", "bound")
        self.hints = list(hints)
        self.pool_size = pool_size
        self._pool: dict[bytes, tuple[float, np.ndarray]] = {}
        self.program = program
        self.time_budget = time_budget
        self.bound = bound
        self.incumbent: np.ndarray | None = None
        self.best = -math.inf
        self.nodes = 0
        # objective values of every accepted incumbent, in order
        self.trace: list[float] = []

    def _accept(self, x: np.ndarray, d: "_Dense") -> bool:
        """Offer an integral point; True when it is feasible."""
        xi = np.rint(x).astype(int)
        if d.A.shape[0] and np.any(d.S @ xi > d.b + FEAS_TOL):
            return False
        val = float(self.program.objective @ xi)
        self._remember(val, xi)
        if val > self.best + GAP_TOL:
            # exact check only for points that would become the incumbent
            if validate(self.program, xi):
                return False
            self.best = val
            self.incumbent = xi
            self.trace.append(val)
        return True

    def _remember(self, val, xi):
        if self.pool_size <= 0:
            return
        key = np.packbits(xi.astype(np.uint8)).tobytes()
        if key in self._pool:
            return
        if len(self._pool) >= self.pool_size:
            worst = min(self._pool, key=lambda k: self._pool[k][0])
            if self._pool[worst][0] >= val:
                return
            del self._pool[worst]
        self._pool[key] = (val, xi)

    def _pool_list(self):
        return [x for _, x in sorted(self._pool.values(), key=lambda t: -t[0])]

    def _try_hints(self, d):
        for h in self.hints:
            x = np.asarray(h)
            if x.shape != (self.program.n,) or not np.all((x == 0) | (x == 1)):
                continue
            if any(x[j] != v for j, v in self.program.fixings.items()):
                continue
            self._accept(x, d)

    def solve(self) -> SolveResult:
        start = time.perf_counter()
        prog = self.program
        c = prog.objective
        d = _Dense(prog)
        relax = _Relaxation(prog, d) if self.bound == "lp" else None
        n = prog.n
        prio = np.zeros(n)
        for j, v in prog.priority.items():
            prio[j] = v
        lb = np.zeros(n)
        ub = np.ones(n)
        for j, v in prog.fixings.items():
            lb[j] = ub[j] = v
        step = objective_step(c)
        # a node must promise at least this much over the incumbent
        margin = step - _LP_SLACK if step > 0 else _LP_SLACK
        self._d = d
        self._try_hints(d)
        stack = [(lb, ub)]
        timed_out = False
        while stack:
            if time.perf_counter() - start > self.time_budget:
                timed_out = True
                break
            lb, ub = stack.pop()
            self.nodes += 1
            if not _propagate(d, lb, ub):
                continue
            free = np.flatnonzero(lb < ub)
            if free.size == 0:
                self._accept(lb, d)
                continue
            if self.bound == "lp":
                # the relaxation contains every knapsack row, so it dominates
                # the fractional bound
                val, x = relax.solve(lb, ub)
                if val is None or val <= self.best + margin:
                    continue
                if x is not None:
                    if np.all(np.abs(x - np.rint(x)) <= 1e-6) and self._accept(x, d):
                        continue
                    n_free = free.size
                    if self.incumbent is not None:
                        free = self._reduced_cost_fix(relax.reduced, x, val, margin, lb, ub, free)
                        if free is None:
                            continue
                        if free.size == 0:
                            self._accept(lb, d)
                            continue
                    frac = np.abs(np.minimum(x[free] - lb[free], ub[free] - x[free]))
                    if frac.max() <= 1e-6 and free.size < n_free:
                        # x is stale: what was fractional got fixed, so re-solve
                        stack.append((lb, ub))
                        continue
                    j = self._pick_fractional(free, frac, prio)
                else:
                    j = self._pick_by_objective(c, free)
            else:
                if _fractional_bound(c, d, lb, ub) <= self.best + margin:
                    continue
                j = self._pick_by_objective(c, free)
            lo_ub = ub.copy()
            lo_ub[j] = 0.0
            hi_lb = lb.copy()
            hi_lb[j] = 1.0
            # the 1-branch is explored first
            stack.append((lb, lo_ub))
            stack.append((hi_lb, ub))
        elapsed = time.perf_counter() - start
        pool = self._pool_list()
        if timed_out:
            return SolveResult(TIME_LIMIT, self.incumbent, self.best, self.nodes, elapsed, pool)
        if self.incumbent is None:
            return SolveResult(INFEASIBLE, None, -math.inf, self.nodes, elapsed, pool)
        return SolveResult(OPTIMAL, self.incumbent, self.best, self.nodes, elapsed, pool)

    def _reduced_cost_fix(self, rc, x, val, margin, lb, ub, free):
        """Fix free variables whose reduced cost rules out an improving flip.

        ``rc`` are HiGHS duals of the minimization of ``-c``. Bounds are
        tightened in place (they belong to this node only); returns the new
        free set, or None if propagation then proves the node infeasible.
        """
        room = val - self.best - margin
        at0 = (x[free] <= 1e-9) & (rc[free] > room)
        at1 = (x[free] >= 1 - 1e-9) & (-rc[free] > room)
        if not (at0.any() or at1.any()):
            return free
        ub[free[at0]] = 0.0
        lb[free[at1]] = 1.0
        if not _propagate(self._d, lb, ub):
            return None
        return np.flatnonzero(lb < ub)

    @staticmethod
    def _pick_fractional(free, frac, prio):
        """Most fractional variable within the top priority class that is fractional."""
        cand = frac > 1e-6
        if not cand.any():
            return int(free[np.argmax(frac)])
        p = prio[free]
        top = p[cand].max()
        score = np.where(cand & (p == top), frac, -1.0)
        return int(free[np.argmax(score)])

    @staticmethod
    def _pick_by_objective(c, free):
        return int(free[np.argmax(c[free])])


def sample_feasible(program: BinaryProgram, rng, max_nodes: int = 20_000,
                    variables=None, dive_nodes: int = 200, p_one: float = 0.3) -> np.ndarray | None:
    """A random feasible point, or None if none turns up within ``max_nodes``.

    Repeated depth-first dives with propagation: a random free variable (from
    ``variables`` while any of those are free, highest priority first) is
    fixed to 1 with probability ``p_one`` (else 0), the other value being
    the backtrack. A dive
    that spends ``dive_nodes`` nodes is abandoned for a fresh one. Not
    uniform over feasible points; meant for stress-testing formulations.
    """
    rng = np.random.default_rng(rng)
    d = _Dense(program)
    n = program.n
    prio = np.zeros(n)
    for j, v in program.priority.items():
        prio[j] = v
    first = np.zeros(n, dtype=bool)
    if variables is not None:
        first[list(variables)] = True
    lb0 = np.zeros(n)
    ub0 = np.ones(n)
    for j, v in program.fixings.items():
        lb0[j] = ub0[j] = v
    nodes = 0
    while nodes < max_nodes:
        stack = [(lb0.copy(), ub0.copy())]
        spent = 0
        while stack and spent < dive_nodes:
            lb, ub = stack.pop()
            spent += 1
            if not _propagate(d, lb, ub):
                continue
            free = np.flatnonzero(lb < ub)
            if free.size == 0:
                x = lb.astype(int)
                if not validate(program, x):
                    return x
                continue
            pick = free[first[free]] if first[free].any() else free
            top = pick[prio[pick] == prio[pick].max()]
            j = int(rng.choice(top))
            lo_ub = ub.copy()
            lo_ub[j] = 0.0
            hi_lb = lb.copy()
            hi_lb[j] = 1.0
            # the stack pops the last entry first
            order = [(lb, lo_ub), (hi_lb, ub)]
            if rng.random() >= p_one:
                order.reverse()
            stack += order
        nodes += spent
        if not stack:
            # the whole tree was exhausted: infeasible
            return None
    return None


def solve_highs(program: BinaryProgram, time_budget: float = 60.0) -> SolveResult:
    """Solve with HiGHS' MILP solver (``scipy.optimize.milp``)."""
    start = time.perf_counter()
    d = _Dense(program)
    n = program.n
    lb = np.zeros(n)
    ub = np.ones(n)
    for j, v in program.fixings.items():
        lb[j] = ub[j] = v
    cons = []
    if d.A_ub is not None:
        cons.append(LinearConstraint(d.A_ub, -np.inf, d.b_ub))
    if d.A_eq is not None:
        cons.append(LinearConstraint(d.A_eq, d.b_eq, d.b_eq))
    opts = {"time_limit": float(time_budget), "mip_rel_gap": 0.0}
    res = milp(-program.objective, integrality=np.ones(n), bounds=Bounds(lb, ub),
               constraints=cons, options=opts)
    if res.status == 2:
        # HiGHS presolve has been seen to misreport small feasible programs
        # as infeasible; confirm without it
        left = max(float(time_budget) - (time.perf_counter() - start), 0.0)
        res = milp(-program.objective, integrality=np.ones(n), bounds=Bounds(lb, ub),
                   constraints=cons, options={**opts, "time_limit": left, "presolve": False})
    elapsed = time.perf_counter() - start
    x = None if res.x is None else np.rint(res.x).astype(int)
    if x is not None and validate(program, x):
        x = None
    if res.status == 0 and x is not None:
        return SolveResult(OPTIMAL, x, float(program.objective @ x), 0, elapsed)
    if res.status == 2:
        return SolveResult(INFEASIBLE, None, -math.inf, 0, elapsed)
    if x is not None:
        return SolveResult(TIME_LIMIT, x, float(program.objective @ x), 0, elapsed)
    if res.status == 1:
        return SolveResult(TIME_LIMIT, None, -math.inf, 0, elapsed)
    return SolveResult(INFEASIBLE, None, -math.inf, 0, elapsed)


def solve(program: BinaryProgram, time_budget: float = 60.0, backend: str | None = None,
          bound: str = "lp", hints=()) -> SolveResult:
    """Solve ``program`` to optimality or until ``time_budget`` seconds pass.

    ``backend`` is ``"builtin"`` (default) or ``"highs"``; when omitted the
    ``TOPHEAVY_SOLVER`` environment variable decides.  The builtin search is
    deterministic, so identical inputs give identical results. ``hints``
    only reach the builtin search.
    """
    backend = backend or os.environ.get(BACKEND_ENV, "builtin")
    if backend == "builtin":
        return BranchAndBound(program, time_budget, bound, hints).solve()
    if backend == "highs":
        return solve_highs(program, time_budget)
    raise InputError(f"unknown backend {backend!r}", "backend")


def _lp_term(coef: float, name: str, first: bool) -> str:
    sign = "-" if coef < 0 else ("" if first else "+")
    mag = abs(coef)
    num = "" if mag == 1 else f"{mag:.17g} "
    return f"{sign} {num}{name}".strip() if first else f"{sign} {num}{name}"


def _lp_names(raw) -> list[str]:
    """Legal, unique LP identifiers derived from ``raw``."""
    out, seen = [], set()
    for j, name in enumerate(raw):
        s = re.sub(r"[^A-Za-z0-9_.]", "_", str(name))[:200] or f"x{j}"
        if s[0].isdigit() or s[0] == "." or s[0] in "eE" and s[1:2].isdigit():
            s = "v" + s
        base, k = s, 1
        while s in seen:
            s = f"{base}_{k}"
            k += 1
        seen.add(s)
        out.append(s)
    return out


def to_lp_format(program: BinaryProgram, title: str = "topheavy") -> str:
    """Render the program in CPLEX LP text format.

    Variable and row names are sanitized into legal, unique identifiers.
    """
    names = _lp_names(program.var_name(j) for j in range(program.n))
    labels = _lp_names(row.name or f"r{i}" for i, row in enumerate(program.rows))
    out = [f"\\ {title}", "Maximize"]
    terms = [
        _lp_term(c, names[j], i == 0)
        for i, (j, c) in enumerate((j, c) for j, c in enumerate(program.objective) if c != 0)
    ]
    out.append(" obj: " + (" ".join(terms) if terms else "0 " + names[0]))
    out.append("Subject To")
    op = {LE: "<=", GE: ">=", EQ: "="}
    for i, row in enumerate(program.rows):
        label = labels[i]
        items = sorted(row.coefs.items())
        if not items:
            body = "0 " + names[0]
        else:
            body = " ".join(_lp_term(c, names[j], k == 0) for k, (j, c) in enumerate(items))
        out.append(f" {label}: {body} {op[row.sense]} {row.rhs:.17g}")
    if program.fixings:
        out.append("Bounds")
        for j, v in sorted(program.fixings.items()):
            out.append(f" {names[j]} = {v}")
    out.append("Binary")
    for k in range(0, len(names), 8):
        out.append(" " + " ".join(names[k:k + 8]))
    out.append("End")
    return "\n".join(out) + "\n"
