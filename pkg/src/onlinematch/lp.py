"""Sparse LP models, pluggable solve backends, row generation and the offline optimum.

Backends:

``highs``
    scipy's HiGHS interface (default).
``simplex``
    the bundled dense tableau simplex; small models only.
``external``
    a command read from ``ONLINEMATCH_LP_SOLVER``. The command is formatted
    with ``{lp}`` (path of the exported LP file) and ``{sol}`` (path where
    the solver must write the solution JSON ``{status, objective, values}``);
    if neither placeholder occurs both paths are appended.

``auto`` picks ``external`` when the environment variable is set, else ``highs``.
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from . import simplex

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
OPT_RTOL = 1e-6
SOLVER_ENV = "ONLINEMATCH_LP_SOLVER"

LE, EQ, GE = "<=", "=", ">="
_REL_CODE = {LE: 0, EQ: 1, GE: 2, "<": 0, ">": 2, "=<": 0, "=>": 2, "==": 1}
_REL_TEXT = (LE, EQ, GE)


class LPError(RuntimeError):
    pass


class LPSolveError(LPError):
    """The backend failed numerically; ``diagnostics`` holds what it reported."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class RowGenerationLimitError(LPError):
    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


@dataclass
class RowBlock:
    """Constraint rows in CSR form (columns index the LP's variables)."""

    matrix: sp.csr_matrix
    relations: np.ndarray
    rhs: np.ndarray

    def __len__(self):
        return self.matrix.shape[0]

    @classmethod
    def from_rows(cls, rows, num_vars):
        """``rows`` is an iterable of ``(coeffs, relation, rhs)`` with coeffs a dict or pairs."""
        r, c, v, rel, rhs = [], [], [], [], []
        for k, (coeffs, relation, b) in enumerate(rows):
            items = coeffs.items() if isinstance(coeffs, dict) else coeffs
            for j, a in items:
                r.append(k)
                c.append(j)
                v.append(a)
            rel.append(_REL_CODE[relation])
            rhs.append(b)
        mat = sp.csr_matrix((v, (r, c)), shape=(len(rel), num_vars))
        return cls(mat, np.asarray(rel, dtype=np.int8), np.asarray(rhs, dtype=float))


class LinearProgram:
    """Variables with bounds, a sparse objective and sparse constraint rows."""

    def __init__(self, sense: str = "max", name: str = "lp"):
        if sense not in ("max", "min"):
            raise ValueError("sense must be 'max' or 'min'")
        self.sense = sense
        self.name = name
        self.names: list[str] = []
        self._index: dict[str, int] = {}
        self._lb: list[float] = []
        self._ub: list[float] = []
        self.objective: dict[int, float] = {}
        self._blocks: list[RowBlock] = []
        self._pending: list = []
        self.row_names: list[Optional[str]] = []

    # -- variables ---------------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.names)

    def add_variable(self, name: str, lb: float = 0.0, ub: float = math.inf) -> int:
        if name in self._index:
            raise ValueError(f"duplicate variable {name!r}")
        if lb > ub:
            raise ValueError(f"variable {name!r}: lower bound above upper bound")
        self._index[name] = len(self.names)
        self.names.append(name)
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        return len(self.names) - 1

    def var(self, name: str) -> int:
        return self._index[name]

    def set_bounds(self, j: int, lb: float, ub: float) -> None:
        if lb > ub:
            raise ValueError("lower bound above upper bound")
        self._lb[j] = float(lb)
        self._ub[j] = float(ub)

    @property
    def lb(self) -> np.ndarray:
        return np.asarray(self._lb)

    @property
    def ub(self) -> np.ndarray:
        return np.asarray(self._ub)

    def set_objective(self, coeffs: dict, sense: Optional[str] = None) -> None:
        if sense is not None:
            if sense not in ("max", "min"):
                raise ValueError("sense must be 'max' or 'min'")
            self.sense = sense
        self.objective = {int(j): float(a) for j, a in coeffs.items()}

    # -- constraints -------------------------------------------------------
    def add_constraint(self, coeffs, relation: str, rhs: float, name: Optional[str] = None) -> None:
        items = list(coeffs.items() if isinstance(coeffs, dict) else coeffs)
        for j, _ in items:
            if not 0 <= j < self.num_vars:
                raise ValueError(f"constraint references unknown variable {j}")
        self._pending.append((items, relation, float(rhs)))
        self.row_names.append(name)

    def add_block(self, block: RowBlock) -> None:
        self._flush()
        if block.matrix.shape[1] != self.num_vars:
            block = RowBlock(sp.csr_matrix(block.matrix, shape=(block.matrix.shape[0], self.num_vars)),
                             block.relations, block.rhs)
        self._blocks.append(block)
        self.row_names.extend([None] * len(block))

    def add_rows(self, rows) -> None:
        if isinstance(rows, RowBlock):
            self.add_block(rows)
        else:
            self.add_block(RowBlock.from_rows(rows, self.num_vars))

    def _flush(self):
        if self._pending:
            pending, self._pending = self._pending, []
            self._blocks.append(RowBlock.from_rows(pending, self.num_vars))

    @property
    def num_rows(self) -> int:
        return sum(len(b) for b in self._blocks) + len(self._pending)

    def constraint_arrays(self):
        """``(A, relations, rhs)`` with A as CSR over all rows."""
        self._flush()
        n = self.num_vars
        if not self._blocks:
            return sp.csr_matrix((0, n)), np.zeros(0, np.int8), np.zeros(0)
        mats = [sp.csr_matrix(b.matrix, shape=(b.matrix.shape[0], n)) for b in self._blocks]
        A = sp.vstack(mats, format="csr")
        rel = np.concatenate([b.relations for b in self._blocks])
        rhs = np.concatenate([b.rhs for b in self._blocks])
        if len(self._blocks) > 1:
            self._blocks = [RowBlock(A, rel, rhs)]
        return A, rel, rhs

    def copy(self) -> "LinearProgram":
        other = LinearProgram(self.sense, self.name)
        other.names = list(self.names)
        other._index = dict(self._index)
        other._lb = list(self._lb)
        other._ub = list(self._ub)
        other.objective = dict(self.objective)
        self._flush()
        other._blocks = list(self._blocks)
        other.row_names = list(self.row_names)
        return other

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.num_vars)
        for j, a in self.objective.items():
            c[j] = a
        return c

    # -- checks ------------------------------------------------------------
    def max_violation(self, x) -> float:
        """Largest constraint or bound violation of ``x``.

        Row activities are summed row by row with ``math.fsum`` so the check
        shares no code with the backends.
        """
        x = np.asarray(x, dtype=float)
        worst = max(0.0, float(np.max(self.lb - x, initial=0.0)), float(np.max(x - self.ub, initial=0.0)))
        A, rel, rhs = self.constraint_arrays()
        indptr, indices, data = A.indptr, A.indices, A.data
        for r in range(A.shape[0]):
            lo, hi = indptr[r], indptr[r + 1]
            act = math.fsum((data[lo:hi] * x[indices[lo:hi]]).tolist())
            if rel[r] == 0:
                worst = max(worst, act - rhs[r])
            elif rel[r] == 2:
                worst = max(worst, rhs[r] - act)
            else:
                worst = max(worst, abs(act - rhs[r]))
        return worst

    # -- LP text format ----------------------------------------------------
    def to_lp_text(self) -> str:
        return write_lp(self)

    @classmethod
    def from_lp_text(cls, text: str) -> "LinearProgram":
        return read_lp(text)


@dataclass
class LPSolution:
    status: str
    values: Optional[np.ndarray]
    objective_value: Optional[float]
    backend: str = ""
    message: str = ""
    iterations: int = 0
    solve_seconds: float = 0.0
    names: Optional[list[str]] = field(default=None, repr=False)
    rounds: int = 0
    rows_added: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def value(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def to_dict(self) -> dict:
        vals = None
        if self.values is not None:
            vals = {n: float(v) for n, v in zip(self.names, self.values)}
        return {"status": self.status, "objective": self.objective_value, "values": vals}

    @classmethod
    def from_dict(cls, d: dict, lp: LinearProgram, backend: str = "import") -> "LPSolution":
        values = None
        if d.get("values") is not None:
            values = np.zeros(lp.num_vars)
            for name, v in d["values"].items():
                values[lp.var(name)] = float(v)
        obj = d.get("objective")
        return cls(d["status"], values, None if obj is None else float(obj), backend=backend,
                   names=lp.names)


# -- backends ---------------------------------------------------------------

def _solve_highs(lp: LinearProgram, time_limit=None) -> LPSolution:
    A, rel, rhs = lp.constraint_arrays()
    c = lp.objective_vector()
    if lp.sense == "max":
        c = -c
    le = rel == 0
    ge = rel == 2
    eq = rel == 1
    A_ub = sp.vstack([A[le], -A[ge]], format="csr") if (le.any() or ge.any()) else None
    b_ub = np.concatenate([rhs[le], -rhs[ge]]) if A_ub is not None else None
    A_eq = A[eq] if eq.any() else None
    b_eq = rhs[eq] if eq.any() else None
    bounds = np.column_stack([lp.lb, lp.ub])
    bounds = [(None if not np.isfinite(l) else l, None if not np.isfinite(u) else u) for l, u in bounds]
    options = {"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9}
    if time_limit is not None:
        options["time_limit"] = float(time_limit)
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs", options=options)
    status = {0: "optimal", 1: "limit", 2: "infeasible", 3: "unbounded"}.get(res.status)
    if status is None:
        raise LPSolveError(f"HiGHS failed: {res.message}", {"status": res.status, "message": res.message})
    values = res.x if status == "optimal" else None
    obj = None
    if status == "optimal":
        obj = float(-res.fun if lp.sense == "max" else res.fun)
    return LPSolution(status, values, obj, backend="highs", message=res.message,
                      iterations=int(getattr(res, "nit", 0) or 0), names=lp.names)


def _solve_simplex(lp: LinearProgram, max_iter=50_000) -> LPSolution:
    if lp.num_vars > 20_000:
        raise LPSolveError("model too large for the dense simplex; plug an external backend",
                           {"num_vars": lp.num_vars})
    A, rel, rhs = lp.constraint_arrays()
    status, x, obj, it = simplex.solve_dense(
        lp.objective_vector(), A.toarray(), [_REL_TEXT[r] for r in rel], rhs,
        lp.lb, lp.ub, maximize=lp.sense == "max", max_iter=max_iter)
    return LPSolution(status, x, obj, backend="simplex", iterations=it, names=lp.names)


def _solve_external(lp: LinearProgram, command: Optional[str] = None) -> LPSolution:
    command = command or os.environ.get(SOLVER_ENV)
    if not command:
        raise LPSolveError(f"no external solver configured (set {SOLVER_ENV})")
    with tempfile.TemporaryDirectory() as tmp:
        lp_path = Path(tmp) / "model.lp"
        sol_path = Path(tmp) / "solution.json"
        lp_path.write_text(lp.to_lp_text())
        if "{lp}" in command or "{sol}" in command:
            cmd = command.format(lp=shlex.quote(str(lp_path)), sol=shlex.quote(str(sol_path)))
        else:
            cmd = f"{command} {shlex.quote(str(lp_path))} {shlex.quote(str(sol_path))}"
        proc = subprocess.run(cmd, shell=True, capture_output=True, text=True)
        if proc.returncode != 0 or not sol_path.exists():
            raise LPSolveError("external solver failed",
                               {"returncode": proc.returncode, "stdout": proc.stdout[-2000:],
                                "stderr": proc.stderr[-2000:]})
        sol = LPSolution.from_dict(json.loads(sol_path.read_text()), lp, backend="external")
    return sol


_BACKENDS = {"highs": _solve_highs, "simplex": _solve_simplex, "external": _solve_external}


def solve(lp: LinearProgram, backend: str = "auto", check: bool = True, **options) -> LPSolution:
    """Solve ``lp``; optimal solutions are re-checked for feasibility within 1e-7."""
    if backend == "auto":
        backend = "external" if os.environ.get(SOLVER_ENV) else "highs"
    try:
        fn = _BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown LP backend {backend!r}") from None
    t0 = time.perf_counter()
    sol = fn(lp, **options)
    sol.solve_seconds = time.perf_counter() - t0
    if check and sol.optimal:
        viol = lp.max_violation(sol.values)
        if viol > FEAS_TOL:
            raise LPSolveError(f"{backend} returned a solution violating constraints by {viol:.3g}",
                               {"max_violation": viol})
    return sol


Separator = Callable[[LPSolution], object]


def solve_with_row_generation(master: LinearProgram, separator: Separator, max_rounds: int = 100,
                              backend: str = "auto", on_round=None) -> LPSolution:
    """Solve ``master``, ask ``separator`` for violated rows, add them and repeat.

    ``separator`` returns a RowBlock or a list of ``(coeffs, relation, rhs)``;
    an empty result ends the loop.
    """
    lp = master.copy()
    added = 0
    sol = None
    for rnd in range(1, max_rounds + 1):
        sol = solve(lp, backend=backend)
        sol.rounds = rnd
        sol.rows_added = added
        if not sol.optimal:
            return sol
        cuts = separator(sol)
        ncuts = 0 if cuts is None else len(cuts)
        if on_round is not None:
            on_round(rnd, sol, ncuts)
        log.info("row generation round %d: objective %.9f, %d new rows", rnd, sol.objective_value, ncuts)
        if ncuts == 0:
            return sol
        lp.add_rows(cuts)
        added += ncuts
    raise RowGenerationLimitError(f"no convergence within {max_rounds} rounds", sol)


# -- offline optimum --------------------------------------------------------

def fractional_matching_lp(edges: Iterable[tuple[int, int]]) -> tuple[LinearProgram, list]:
    edges = sorted({(min(u, v), max(u, v)) for u, v in edges})
    lp = LinearProgram("max", "fractional_matching")
    incident: dict[int, list[int]] = {}
    for k, (u, v) in enumerate(edges):
        if u == v:
            raise ValueError("self-loops are not allowed")
        j = lp.add_variable(f"x_{u}_{v}", 0.0, math.inf)
        incident.setdefault(u, []).append(j)
        incident.setdefault(v, []).append(j)
    lp.set_objective({j: 1.0 for j in range(len(edges))})
    for u in sorted(incident):
        lp.add_constraint({j: 1.0 for j in incident[u]}, LE, 1.0, name=f"deg_{u}")
    return lp, edges


def offline_fractional_optimum(edges: Iterable[tuple[int, int]], backend: str = "highs") -> float:
    """Optimum of the degree-constrained fractional matching LP (no odd-set rows)."""
    lp, edges = fractional_matching_lp(edges)
    if not edges:
        return 0.0
    sol = solve(lp, backend=backend)
    if not sol.optimal:
        raise LPSolveError(f"matching LP not solved: {sol.status}")
    return float(sol.objective_value)


# -- LP file format ---------------------------------------------------------

def _num(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def _terms(pairs, names) -> list[str]:
    out = []
    for j, a in pairs:
        sign = "-" if a < 0 else "+"
        out.append(f"{sign} {_num(abs(a))} {names[j]}")
    return out


def _wrap(prefix: str, terms: list[str], suffix: str = "") -> list[str]:
    lines, cur = [], prefix
    for t in terms:
        if len(cur) + len(t) + 1 > 200 and cur.strip():
            lines.append(cur)
            cur = "   "
        cur += " " + t
    if not terms:
        cur += " 0"
    cur += suffix
    lines.append(cur)
    return lines


def write_lp(lp: LinearProgram) -> str:
    """Export in the CPLEX LP text format. Numbers use ``repr`` so import is exact."""
    A, rel, rhs = lp.constraint_arrays()
    names = lp.names
    out = [f"\\ {lp.name}", "Maximize" if lp.sense == "max" else "Minimize"]
    out += _wrap(" obj:", _terms(sorted(lp.objective.items()), names))
    out.append("Subject To")
    for r in range(A.shape[0]):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        pairs = list(zip(A.indices[lo:hi].tolist(), A.data[lo:hi].tolist()))
        rname = lp.row_names[r] if r < len(lp.row_names) and lp.row_names[r] else f"c{r}"
        out += _wrap(f" {rname}:", _terms(pairs, names), f" {_REL_TEXT[rel[r]]} {_num(rhs[r])}")
    out.append("Bounds")
    for j, name in enumerate(names):
        l, u = lp._lb[j], lp._ub[j]
        if l == 0.0 and u == math.inf:
            continue
        if l == -math.inf and u == math.inf:
            out.append(f" {name} free")
        elif l == u:
            out.append(f" {name} = {_num(l)}")
        else:
            out.append(f" {_num(l)} <= {name} <= {_num(u)}")
    out.append("End")
    return "\n".join(out) + "\n"


_SECTION = re.compile(r"^\s*(maximize|maximum|max|minimize|minimum|min|subject to|such that|st|s\.t\.|bounds|end)\s*$",
                      re.IGNORECASE)


def _parse_float(tok: str) -> float:
    t = tok.lower()
    if t in ("inf", "+inf", "infinity", "+infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    return float(tok)


def _parse_expr(tokens: list[str]) -> list[tuple[float, str]]:
    terms, sign, coef = [], 1.0, None
    for tok in tokens:
        if tok in ("+", "-"):
            sign = 1.0 if tok == "+" else -1.0
            continue
        try:
            coef = float(tok)
            continue
        except ValueError:
            pass
        if tok == "0" and coef is None:
            continue
        terms.append((sign * (1.0 if coef is None else coef), tok))
        sign, coef = 1.0, None
    return terms


def read_lp(text: str) -> LinearProgram:
    """Parse the LP subset written by :func:`write_lp` (plus common free-form variants)."""
    section = None
    obj_lines, con_lines, bound_lines = [], [], []
    name = "lp"
    sense = "max"
    for raw in text.splitlines():
        if raw.startswith("\\"):
            if name == "lp" and raw[1:].strip():
                name = raw[1:].strip()
            continue
        line = raw.split("\\", 1)[0]
        if not line.strip():
            continue
        m = _SECTION.match(line)
        if m:
            key = m.group(1).lower()
            if key.startswith("max"):
                section, sense = "obj", "max"
            elif key.startswith("min"):
                section, sense = "obj", "min"
            elif key == "bounds":
                section = "bounds"
            elif key == "end":
                section = "end"
            else:
                section = "st"
            continue
        {"obj": obj_lines, "st": con_lines, "bounds": bound_lines}.get(section, []).append(line)

    lp = LinearProgram(sense, name)
    declared: list[str] = []

    def ensure(v):
        if v not in lp._index:
            lp.add_variable(v)
            declared.append(v)
        return lp._index[v]

    def split_tokens(s):
        s = re.sub(r"(<=|>=|=<|=>|<|>|=)", r" \1 ", s)
        s = re.sub(r"(?<![eE])([+-])", r" \1 ", s)
        return s.split()

    obj_text = " ".join(obj_lines)
    if ":" in obj_text:
        obj_text = obj_text.split(":", 1)[1]
    obj_terms = _parse_expr(split_tokens(obj_text))

    # constraints may span several lines; a row ends once its relation and rhs are seen
    rows = []
    buf = ""
    for line in con_lines:
        buf += " " + line
        toks = split_tokens(buf.split(":", 1)[1] if ":" in buf.split("<")[0].split(">")[0].split("=")[0] else buf)
        rel_pos = [k for k, t in enumerate(toks) if t in _REL_CODE]
        if rel_pos and rel_pos[-1] < len(toks) - 1:
            rname = None
            head = buf
            lhs_part = buf
            pre = buf.split("<")[0].split(">")[0].split("=")[0]
            if ":" in pre:
                rname, lhs_part = buf.split(":", 1)
                rname = rname.strip()
            toks = split_tokens(lhs_part)
            k = [i for i, t in enumerate(toks) if t in _REL_CODE][-1]
            rhs_toks = toks[k + 1:]
            rhs_val = _parse_float("".join(rhs_toks))
            rows.append((rname, _parse_expr(toks[:k]), toks[k], rhs_val))
            buf = ""
            del head

    bounds = {}
    for line in bound_lines:
        toks = split_tokens(line)
        if len(toks) == 2 and toks[1].lower() == "free":
            bounds[toks[0]] = (-math.inf, math.inf)
            continue
        # rebuild signed numbers
        joined, k = [], 0
        while k < len(toks):
            if toks[k] in ("+", "-") and k + 1 < len(toks):
                joined.append(toks[k] + toks[k + 1] if toks[k] == "-" else toks[k + 1])
                k += 2
            else:
                joined.append(toks[k])
                k += 1
        toks = joined
        if len(toks) == 5:
            lo, _, v, _, hi = toks
            bounds[v] = (_parse_float(lo), _parse_float(hi))
        elif len(toks) == 3:
            a, rel, b = toks
            try:
                val, var, flip = _parse_float(a), b, True
            except ValueError:
                var, val, flip = a, _parse_float(b), False
            lo, hi = bounds.get(var, (0.0, math.inf))
            r = _REL_CODE[rel]
            if r == 1:
                lo = hi = val
            elif (r == 0) != flip:
                hi = val
            else:
                lo = val
            bounds[var] = (lo, hi)
        else:
            raise ValueError(f"cannot parse bound line {line!r}")

    # variable order: first appearance in objective, constraints, bounds
    for _, v in obj_terms:
        ensure(v)
    for _, terms, _, _ in rows:
        for _, v in terms:
            ensure(v)
    for v in bounds:
        ensure(v)
    for v, (lo, hi) in bounds.items():
        lp.set_bounds(lp._index[v], lo, hi)
    coeffs = {}
    for a, v in obj_terms:
        coeffs[lp._index[v]] = coeffs.get(lp._index[v], 0.0) + a
    lp.objective = coeffs
    for rname, terms, rel, b in rows:
        lp.add_constraint([(lp._index[v], a) for a, v in terms], rel, b, name=rname)
    return lp
