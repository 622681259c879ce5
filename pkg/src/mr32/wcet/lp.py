"""Exact integer linear programming: rational simplex plus branch and bound.

All arithmetic is over Fractions, so optima are exact and never hinge on a
floating-point tolerance. The simplex is a dense two-phase tableau with
largest-coefficient pivoting and a Bland's-rule fallback against cycling.
Branch and bound explores depth-first, branching on the lowest-index
fractional variable, floor branch first; with an all-integer objective the
bound is floored before pruning. Problem sizes here are small (a few hundred
variables), so a dense tableau is the simple, predictable choice.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..errors import IlpInfeasible, IlpUnbounded

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

Constraint = tuple[dict, str, object]  # coeffs, "<=" | ">=" | "=", rhs


@dataclass
class LpResult:
    status: str
    values: dict[str, Fraction]
    objective: Fraction


@dataclass
class IlpResult:
    status: str
    values: dict[str, int]
    objective: Fraction
    nodes: int = 1


def _flip(sense: str) -> str:
    return {"<=": ">=", ">=": "<=", "=": "="}[sense]


class _Tableau:
    def __init__(self, var_names: list[str], constraints: list[Constraint]):
        self.var_names = var_names
        n = len(var_names)
        index = {v: i for i, v in enumerate(var_names)}
        rows: list[tuple[list[Fraction], str, Fraction]] = []
        for coeffs, sense, rhs in constraints:
            row = [Fraction(0)] * n
            for v, a in coeffs.items():
                row[index[v]] += Fraction(a)
            frhs = Fraction(rhs)
            if frhs < 0:
                row = [-a for a in row]
                frhs = -frhs
                sense = _flip(sense)
            rows.append((row, sense, frhs))

        n_slack = sum(1 for _, s, _ in rows if s != "=")
        n_art = sum(1 for _, s, _ in rows if s in (">=", "="))
        self.n = n
        self.ncols = n + n_slack + n_art
        self.art_cols = set(range(n + n_slack, self.ncols))
        self.T: list[list[Fraction]] = []
        self.basis: list[int] = []
        si = n
        ai = n + n_slack
        for row, sense, rhs in rows:
            full = row + [Fraction(0)] * (self.ncols - n) + [rhs]
            if sense == "<=":
                full[si] = Fraction(1)
                self.basis.append(si)
                si += 1
            elif sense == ">=":
                full[si] = Fraction(-1)
                si += 1
                full[ai] = Fraction(1)
                self.basis.append(ai)
                ai += 1
            else:
                full[ai] = Fraction(1)
                self.basis.append(ai)
                ai += 1
            self.T.append(full)
        self.excluded: set[int] = set()

    def _pivot(self, objs: list[list[Fraction]], r: int, c: int) -> None:
        T = self.T
        prow = T[r]
        inv = Fraction(1) / prow[c]
        if inv != 1:
            T[r] = prow = [a * inv for a in prow]
        for row in T:
            if row is prow:
                continue
            f = row[c]
            if f:
                for j in range(len(row)):
                    row[j] -= f * prow[j]
        for obj in objs:
            f = obj[c]
            if f:
                for j in range(len(obj)):
                    obj[j] -= f * prow[j]
        self.basis[r] = c

    def _iterate(self, objs: list[list[Fraction]]) -> str:
        """Maximize objs[0] (reduced-cost row); returns OPTIMAL or UNBOUNDED."""
        obj = objs[0]
        stall = 0
        bland = False
        last = obj[-1]
        guard = 0
        max_iters = 500 * (len(self.T) + self.ncols + 10)
        while True:
            guard += 1
            if guard > max_iters:
                raise IlpUnbounded("simplex iteration guard tripped")
            c = -1
            if bland:
                for j in range(self.ncols):
                    if j not in self.excluded and obj[j] > 0:
                        c = j
                        break
            else:
                best = Fraction(0)
                for j in range(self.ncols):
                    if j not in self.excluded and obj[j] > best:
                        best = obj[j]
                        c = j
            if c < 0:
                return OPTIMAL
            r = -1
            best_ratio = None
            for i, row in enumerate(self.T):
                a = row[c]
                if a > 0:
                    ratio = row[-1] / a
                    if best_ratio is None or ratio < best_ratio or (
                        ratio == best_ratio and self.basis[i] < self.basis[r]
                    ):
                        best_ratio = ratio
                        r = i
            if r < 0:
                return UNBOUNDED
            self._pivot(objs, r, c)
            if obj[-1] == last:
                stall += 1
                if stall > 2 * len(self.T) + 8:
                    bland = True
            else:
                stall = 0
                last = obj[-1]

    def solve(self, objective_coeffs: list[Fraction]) -> tuple[str, Fraction]:
        """Two-phase maximization; returns (status, objective value).

        Objective rows are kept in c - z (reduced cost) form, so after each
        pivot row[-1] equals minus the current objective value.
        """
        obj2 = list(objective_coeffs) + [Fraction(0)] * (self.ncols - self.n) + [Fraction(0)]
        if self.art_cols:
            # Phase 1: maximize -sum(artificials); c_B is nonzero for the
            # starting basis, so fold the artificial rows into the row.
            obj1 = [Fraction(0)] * (self.ncols + 1)
            for a in self.art_cols:
                obj1[a] = Fraction(-1)
            for i, b in enumerate(self.basis):
                if b in self.art_cols:
                    for j in range(self.ncols + 1):
                        obj1[j] += self.T[i][j]
            status = self._iterate([obj1, obj2])
            if status != OPTIMAL or obj1[-1] != 0:
                return INFEASIBLE, Fraction(0)
            # Drive remaining artificials out of the basis where possible.
            for i, b in enumerate(self.basis):
                if b in self.art_cols:
                    for j in range(self.ncols):
                        if j not in self.art_cols and self.T[i][j] != 0:
                            self._pivot([obj1, obj2], i, j)
                            break
            self.excluded |= self.art_cols
        status = self._iterate([obj2])
        if status != OPTIMAL:
            return status, Fraction(0)
        return OPTIMAL, -obj2[-1]

    def values(self) -> dict[int, Fraction]:
        out: dict[int, Fraction] = {}
        for i, b in enumerate(self.basis):
            if b < self.n:
                out[b] = self.T[i][-1]
        return out


def solve_lp(
    var_names: list[str],
    objective: dict,
    constraints: list[Constraint],
) -> LpResult:
    """Maximize objective subject to constraints, variables >= 0."""
    tab = _Tableau(var_names, constraints)
    coeffs = [Fraction(0)] * tab.n
    index = {v: i for i, v in enumerate(var_names)}
    for v, a in objective.items():
        coeffs[index[v]] += Fraction(a)
    status, value = tab.solve(coeffs)
    if status != OPTIMAL:
        return LpResult(status, {}, Fraction(0))
    vals = tab.values()
    return LpResult(
        OPTIMAL,
        {v: vals.get(i, Fraction(0)) for v, i in index.items()},
        value,
    )


def solve_ilp(
    var_names: list[str],
    objective: dict,
    constraints: list[Constraint],
) -> IlpResult:
    """Maximize over nonnegative integers; exact branch and bound.

    Raises IlpInfeasible / IlpUnbounded instead of truncating silently.
    """
    integral_obj = all(Fraction(a).denominator == 1 for a in objective.values())

    best_val: Fraction | None = None
    best_sol: dict[str, int] = {}
    nodes = 0
    stack: list[list[Constraint]] = [[]]
    while stack:
        extra = stack.pop()
        res = solve_lp(var_names, objective, constraints + extra)
        nodes += 1
        if res.status == UNBOUNDED:
            raise IlpUnbounded("ILP unbounded")
        if res.status != OPTIMAL:
            if nodes == 1:
                raise IlpInfeasible("ILP infeasible")
            continue
        bound = res.objective
        if integral_obj:
            bound = Fraction(bound.numerator // bound.denominator)
        if best_val is not None and bound <= best_val:
            continue
        frac_var = None
        frac_val = None
        for v in var_names:
            x = res.values[v]
            if x.denominator != 1:
                frac_var, frac_val = v, x
                break
        if frac_var is None:
            if best_val is None or res.objective > best_val:
                best_val = res.objective
                best_sol = {v: int(res.values[v]) for v in var_names}
            continue
        k = frac_val.numerator // frac_val.denominator
        stack.append(extra + [({frac_var: 1}, ">=", k + 1)])
        stack.append(extra + [({frac_var: 1}, "<=", k)])
    if best_val is None:
        raise IlpInfeasible("no integer point found")
    return IlpResult(OPTIMAL, best_sol, best_val, nodes)
