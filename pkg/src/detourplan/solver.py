"""Backend-neutral MILP solve with in-house verification of every returned assignment."""
from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .milp import CONTINUOUS, EQ, GE, LE, MilpInstance

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
TIME_LIMIT = "time_limit"
ERROR = "error"

TOL = 1e-6


class BackendUnavailable(RuntimeError):
    pass


@dataclass
class SolveLimits:
    time_limit: float | None = None
    gap: float = 0.0


@dataclass
class SolveResult:
    status: str
    objective: float | None = None
    values: list[float] | None = None
    wall_time: float = 0.0
    backend: str = ""
    message: str = ""
    violations: list[str] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def assignment(self, inst: MilpInstance) -> dict[str, float]:
        if self.values is None:
            return {}
        return {v.name: x for v, x in zip(inst.variables, self.values)}


def row_activity(row, values) -> float:
    return row.constant + sum(c * values[k] for k, c in row.coeffs.items())


def verify(inst: MilpInstance, values, tol: float = TOL) -> list[str]:
    """Every bound, integrality and row violation beyond ``tol``; empty means feasible."""
    problems = []
    for v, x in zip(inst.variables, values):
        if not math.isfinite(x):
            problems.append(f"{v.name} = {x}")
            continue
        if x < v.lb - tol or x > v.ub + tol:
            problems.append(f"{v.name} = {x} outside [{v.lb}, {v.ub}]")
        if v.is_integral and abs(x - round(x)) > tol:
            problems.append(f"{v.name} = {x} not integral")
    for row in inst.constraints:
        act = row_activity(row, values)
        if row.sense == LE and act > row.rhs + tol:
            problems.append(f"{row.name}: {act} > {row.rhs}")
        elif row.sense == GE and act < row.rhs - tol:
            problems.append(f"{row.name}: {act} < {row.rhs}")
        elif row.sense == EQ and abs(act - row.rhs) > tol:
            problems.append(f"{row.name}: {act} != {row.rhs}")
    return problems


def to_arrays(inst: MilpInstance):
    """Objective vector, sparse row matrix, row bounds, variable bounds and integrality mask."""
    n = len(inst.variables)
    c = np.zeros(n)
    for k, coef in inst.objective:
        c[k] += coef
    rows, cols, data = [], [], []
    lo = np.empty(len(inst.constraints))
    hi = np.empty(len(inst.constraints))
    for r, row in enumerate(inst.constraints):
        for k, coef in row.coeffs.items():
            rows.append(r)
            cols.append(k)
            data.append(coef)
        rhs = row.rhs - row.constant
        lo[r] = rhs if row.sense in (GE, EQ) else -np.inf
        hi[r] = rhs if row.sense in (LE, EQ) else np.inf
    a = sparse.csr_matrix((data, (rows, cols)), shape=(len(inst.constraints), n))
    lb = np.array([v.lb for v in inst.variables])
    ub = np.array([v.ub for v in inst.variables])
    integral = np.array([v.is_integral for v in inst.variables], dtype=bool)
    return c, a, lo, hi, lb, ub, integral


def _solve_highs(inst: MilpInstance, limits: SolveLimits, start=None):
    try:
        import highspy
    except ImportError:  # scipy ships its own HiGHS, without warm starts
        return _solve_scipy(inst, limits, start)
    c, a, lo, hi, lb, ub, integral = to_arrays(inst)
    a = a.tocsc()
    inf = highspy.kHighsInf
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", float(limits.gap))
    h.setOptionValue("threads", 1)
    if limits.time_limit is not None:
        h.setOptionValue("time_limit", float(limits.time_limit))
    lp = highspy.HighsLp()
    lp.num_col_, lp.num_row_ = len(c), a.shape[0]
    lp.col_cost_ = c
    lp.col_lower_ = lb
    lp.col_upper_ = np.where(np.isinf(ub), inf, ub)
    lp.row_lower_ = np.where(np.isinf(lo), -inf, lo)
    lp.row_upper_ = np.where(np.isinf(hi), inf, hi)
    lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    lp.a_matrix_.start_ = a.indptr
    lp.a_matrix_.index_ = a.indices
    lp.a_matrix_.value_ = a.data
    lp.integrality_ = [highspy.HighsVarType.kInteger if x else highspy.HighsVarType.kContinuous for x in integral]
    h.passModel(lp)
    if start:
        idx = sorted(start)
        h.setSolution(len(idx), np.array(idx, dtype=np.int32), np.array([start[k] for k in idx], dtype=float))
    h.run()
    ms = h.getModelStatus()
    info = h.getInfo()
    values = None
    if info.primal_solution_status == 2:  # kSolutionStatusFeasible
        values = list(map(float, h.getSolution().col_value))
    if ms == highspy.HighsModelStatus.kOptimal:
        status = OPTIMAL
    elif ms == highspy.HighsModelStatus.kInfeasible:
        status = INFEASIBLE
    elif ms in (highspy.HighsModelStatus.kTimeLimit, highspy.HighsModelStatus.kIterationLimit,
                highspy.HighsModelStatus.kSolutionLimit):
        status = TIME_LIMIT if values is not None else ERROR
    else:
        status = ERROR
    if status == INFEASIBLE:
        values = None
    obj = None if values is None else float(info.objective_function_value)
    return status, obj, values, h.modelStatusToString(ms)


def _solve_scipy(inst: MilpInstance, limits: SolveLimits, start=None):
    c, a, lo, hi, lb, ub, integral = to_arrays(inst)
    options = {"disp": False, "mip_rel_gap": limits.gap, "presolve": True}
    if limits.time_limit is not None:
        options["time_limit"] = float(limits.time_limit)
    constraints = [LinearConstraint(a, lo, hi)] if a.shape[0] else []
    res = milp(c, integrality=integral.astype(int), bounds=Bounds(lb, ub), constraints=constraints, options=options)
    values = None if res.x is None else list(map(float, res.x))
    if res.status == 0:
        status = OPTIMAL
    elif res.status == 1:
        status = TIME_LIMIT if values is not None else ERROR
    elif res.status == 2:
        status = INFEASIBLE
    else:
        status = ERROR
    obj = None if values is None else float(res.fun)
    return status, obj, values, str(res.message)


def _solve_cbc(inst: MilpInstance, limits: SolveLimits, start=None):
    try:
        import pulp
    except ImportError:
        raise BackendUnavailable("the 'cbc' backend needs the pulp package") from None
    # PuLP 3.x deprecates the calls used here (direct LpVariable, bundled CBC command) ahead of 4.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        return _cbc_model(pulp, inst, limits)


def _cbc_model(pulp, inst: MilpInstance, limits: SolveLimits):
    prob = pulp.LpProblem(inst.name.replace("-", "_"), pulp.LpMinimize)
    xs = []
    for k, v in enumerate(inst.variables):
        cat = pulp.LpContinuous if v.kind == CONTINUOUS else pulp.LpInteger
        ub = None if math.isinf(v.ub) else v.ub
        xs.append(pulp.LpVariable(f"v{k}", lowBound=v.lb, upBound=ub, cat=cat))
    prob += pulp.lpSum(coef * xs[k] for k, coef in inst.objective_coeffs().items())
    for r, row in enumerate(inst.constraints):
        expr = pulp.lpSum(coef * xs[k] for k, coef in row.coeffs.items())
        rhs = row.rhs - row.constant
        if row.sense == LE:
            prob += expr <= rhs, f"r{r}"
        elif row.sense == GE:
            prob += expr >= rhs, f"r{r}"
        else:
            prob += expr == rhs, f"r{r}"
    cmd = pulp.PULP_CBC_CMD(msg=False, timeLimit=limits.time_limit, gapRel=limits.gap)
    if not cmd.available():
        raise BackendUnavailable("CBC binary not found")
    prob.solve(cmd)
    name = pulp.LpStatus[prob.status]
    values = None
    if prob.sol_status in (pulp.LpSolutionOptimal, pulp.LpSolutionIntegerFeasible):
        values = [float(x.value() or 0.0) for x in xs]
    if name == "Optimal" and prob.sol_status == pulp.LpSolutionOptimal:
        status = OPTIMAL
    elif name == "Infeasible":
        status = INFEASIBLE
    elif values is not None:
        status = TIME_LIMIT
    else:
        status = ERROR
    obj = None if values is None else float(pulp.value(prob.objective) or 0.0)
    return status, obj, values, name


BACKENDS = {"highs": _solve_highs, "scipy": _solve_scipy, "cbc": _solve_cbc}


def _polish(inst: MilpInstance, values: list[float]) -> list[float]:
    """Round integer variables, then re-optimize the continuous ones with integers fixed."""
    out = list(values)
    for k, v in enumerate(inst.variables):
        if v.is_integral:
            out[k] = float(round(out[k]))
    cont = [k for k, v in enumerate(inst.variables) if not v.is_integral]
    if not cont:
        return out
    c, a, lo, hi, lb, ub, _ = to_arrays(inst)
    fixed = np.array(out)
    fixed[cont] = 0.0
    shift = a @ fixed
    sub = a[:, cont]
    touched = np.asarray(abs(sub).sum(axis=1)).ravel() > 0
    lo_s, hi_s = lo - shift, hi - shift
    eq = touched & (lo_s == hi_s)
    upper = touched & ~eq & np.isfinite(hi_s)
    lower = touched & ~eq & np.isfinite(lo_s)
    a_ub = sparse.vstack([sub[upper], -sub[lower]]).tocsr()
    b_ub = np.concatenate([hi_s[upper], -lo_s[lower]])
    res = linprog(
        c[cont],
        A_ub=a_ub if a_ub.shape[0] else None,
        b_ub=b_ub if a_ub.shape[0] else None,
        A_eq=sub[eq] if eq.any() else None,
        b_eq=lo_s[eq] if eq.any() else None,
        bounds=list(zip(lb[cont], [None if math.isinf(u) else u for u in ub[cont]])),
        method="highs",
    )
    if res.status != 0:
        return out
    for k, x in zip(cont, res.x):
        out[k] = float(x)
    return out


def solve(inst: MilpInstance, limits: SolveLimits | None = None, backend: str = "highs",
          start: dict[str, float] | None = None) -> SolveResult:
    """Solve ``inst`` and independently re-check feasibility and objective of the answer.

    ``start`` maps variable names to a (possibly partial) starting point; names
    the instance does not know are ignored. Only the highs backend uses it.
    """
    limits = limits or SolveLimits()
    if backend not in BACKENDS:
        raise BackendUnavailable(f"unknown backend {backend!r}; available: {sorted(BACKENDS)}")
    hint = None
    if start:
        pos = {v.name: k for k, v in enumerate(inst.variables)}
        hint = {pos[n]: x for n, x in start.items() if n in pos}
    t0 = time.perf_counter()
    try:
        status, obj, values, message = BACKENDS[backend](inst, limits, hint)
    except BackendUnavailable:
        raise
    except Exception as exc:  # numeric trouble inside a backend
        log.exception("backend %s failed", backend)
        return SolveResult(ERROR, wall_time=time.perf_counter() - t0, backend=backend, message=str(exc))
    result = SolveResult(status, obj, values, 0.0, backend, message)

    if values is not None:
        raw_obj = inst.objective_value(values)
        if obj is not None and abs(raw_obj - obj) > TOL * (1 + abs(obj)):
            result.violations.append(f"backend objective {obj} != recomputed {raw_obj}")
        values = _polish(inst, values)
        result.values = values
        result.violations += verify(inst, values)
        result.objective = inst.objective_value(values)
        if result.violations and status in (OPTIMAL, TIME_LIMIT):
            result.status = ERROR
            result.message = f"in-house verification failed: {result.violations[:5]}"
    elif status == INFEASIBLE and hint is not None and len(hint) == len(inst.variables):
        full = [hint[k] for k in range(len(inst.variables))]
        if not verify(inst, full):
            result.status = ERROR
            result.message = f"{backend} reported infeasible, but the start point satisfies every row"
    result.wall_time = time.perf_counter() - t0
    log.info("%s via %s: %s obj=%s in %.1fs", inst.name, backend, result.status, result.objective, result.wall_time)
    return result
