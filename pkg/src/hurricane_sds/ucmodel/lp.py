"""A small linear/mixed-integer model container with free-format MPS I/O.

Rows are ranged (``lo <= a.x <= hi``); the MPS writer maps them to E/L/G rows
plus RANGES. Output is deterministic: variables and rows are written in
creation order and numbers use ``repr`` so that files are bit-identical for
identical inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

INF = math.inf


@dataclass
class LinearModel:
    name: str = "model"
    var_names: list = field(default_factory=list)
    lb: list = field(default_factory=list)
    ub: list = field(default_factory=list)
    obj: list = field(default_factory=list)
    integer: list = field(default_factory=list)
    row_names: list = field(default_factory=list)
    row_class: list = field(default_factory=list)
    row_lo: list = field(default_factory=list)
    row_hi: list = field(default_factory=list)
    _rows_i: list = field(default_factory=list)
    _cols_j: list = field(default_factory=list)
    _vals: list = field(default_factory=list)
    index: dict = field(default_factory=dict)
    instance: object = None  # set by builders that know their structure

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    @property
    def n_int(self) -> int:
        return sum(self.integer)

    def add_var(self, name, lb=0.0, ub=INF, obj=0.0, integer=False) -> int:
        if name in self.index:
            raise ValueError(f"duplicate variable {name}")
        j = len(self.var_names)
        self.index[name] = j
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.obj.append(float(obj))
        self.integer.append(bool(integer))
        return j

    def add_row(self, name, coefs, lo=-INF, hi=INF, cls=None) -> int:
        """Add ``lo <= sum(c * x[j]) <= hi``; ``coefs`` maps column index to coefficient."""
        i = len(self.row_names)
        self.row_names.append(name)
        self.row_class.append(cls or name.split("[", 1)[0])
        self.row_lo.append(float(lo))
        self.row_hi.append(float(hi))
        for j, c in coefs.items():
            if c != 0.0:
                self._rows_i.append(i)
                self._cols_j.append(j)
                self._vals.append(float(c))
        return i

    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self._vals, (self._rows_i, self._cols_j)), shape=(self.n_rows, self.n_vars)
        )

    def arrays(self):
        return (
            np.array(self.obj),
            self.matrix(),
            np.array(self.row_lo),
            np.array(self.row_hi),
            np.array(self.lb),
            np.array(self.ub),
            np.array(self.integer, dtype=np.uint8),
        )

    def objective_value(self, x) -> float:
        return float(np.dot(self.obj, x))

    def max_violation(self, x) -> float:
        x = np.asarray(x, dtype=float)
        ax = self.matrix() @ x
        lo = np.array(self.row_lo)
        hi = np.array(self.row_hi)
        v = np.concatenate(
            [
                np.maximum(lo - ax, 0.0),
                np.maximum(ax - hi, 0.0),
                np.maximum(np.array(self.lb) - x, 0.0),
                np.maximum(x - np.array(self.ub), 0.0),
            ]
        )
        return float(v.max(initial=0.0))

    def copy_with_bounds(self, fixes: dict) -> "LinearModel":
        """Shallow copy with some variables fixed (name -> value)."""
        m = LinearModel(
            name=self.name,
            var_names=self.var_names,
            lb=list(self.lb),
            ub=list(self.ub),
            obj=self.obj,
            integer=list(self.integer),
            row_names=self.row_names,
            row_class=self.row_class,
            row_lo=self.row_lo,
            row_hi=self.row_hi,
            _rows_i=self._rows_i,
            _cols_j=self._cols_j,
            _vals=self._vals,
            index=self.index,
            instance=self.instance,
        )
        for name, v in fixes.items():
            j = self.index[name]
            m.lb[j] = m.ub[j] = float(v)
        return m

    def relaxed(self) -> "LinearModel":
        m = self.copy_with_bounds({})
        m.integer = [False] * self.n_vars
        return m

    # --- MPS ------------------------------------------------------------------

    def to_mps(self) -> str:
        out = [f"NAME {self.name}", "ROWS", " N obj"]
        kinds = []
        for name, lo, hi in zip(self.row_names, self.row_lo, self.row_hi):
            if lo == hi:
                k = "E"
            elif lo == -INF and hi == INF:
                k = "N"
            elif lo == -INF:
                k = "L"
            elif hi == INF:
                k = "G"
            else:
                k = "R"
            kinds.append(k)
            out.append(f" {'E' if k == 'R' else k} {name}")
        by_col = [[] for _ in range(self.n_vars)]
        for i, j, v in zip(self._rows_i, self._cols_j, self._vals):
            by_col[j].append((i, v))
        out.append("COLUMNS")
        in_int = False
        for j, name in enumerate(self.var_names):
            if self.integer[j] and not in_int:
                out.append(" MARKER 'MARKER' 'INTORG'")
                in_int = True
            elif not self.integer[j] and in_int:
                out.append(" MARKER 'MARKER' 'INTEND'")
                in_int = False
            out.append(f" {name} obj {_num(self.obj[j])}")
            for i, v in sorted(by_col[j]):
                out.append(f" {name} {self.row_names[i]} {_num(v)}")
        if in_int:
            out.append(" MARKER 'MARKER' 'INTEND'")
        out.append("RHS")
        ranges = []
        for name, k, lo, hi in zip(self.row_names, kinds, self.row_lo, self.row_hi):
            if k in ("E", "L"):
                rhs = hi
            elif k == "G":
                rhs = lo
            elif k == "R":
                # E row with a positive range R covers [rhs, rhs + R]
                rhs = lo
                ranges.append(f" rng {name} {_num(hi - lo)}")
            else:
                continue
            if rhs != 0.0:
                out.append(f" rhs {name} {_num(rhs)}")
        if ranges:
            out.append("RANGES")
            out.extend(ranges)
        out.append("BOUNDS")
        for j, name in enumerate(self.var_names):
            lo, hi = self.lb[j], self.ub[j]
            if lo == hi:
                out.append(f" FX bnd {name} {_num(lo)}")
                continue
            if lo == -INF and hi == INF:
                out.append(f" FR bnd {name}")
                continue
            if lo == -INF:
                out.append(f" MI bnd {name}")
            elif lo != 0.0 or self.integer[j]:
                out.append(f" LO bnd {name} {_num(lo)}")
            if hi != INF:
                out.append(f" UP bnd {name} {_num(hi)}")
            elif self.integer[j]:
                out.append(f" PL bnd {name}")
        out.append("ENDATA")
        return "\n".join(out) + "\n"

    def write_mps(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_mps())
        return path


def _num(v: float) -> str:
    if v == INF:
        return "1e+30"
    if v == -INF:
        return "-1e+30"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _parse_num(s: str) -> float:
    v = float(s)
    if v >= 1e30:
        return INF
    if v <= -1e30:
        return -INF
    return v


def read_mps(text_or_path) -> LinearModel:
    """Parse free-format MPS as written by :meth:`LinearModel.to_mps`."""
    text = text_or_path
    if isinstance(text_or_path, Path) or (isinstance(text_or_path, str) and "\n" not in text_or_path):
        text = Path(text_or_path).read_text()
    m = LinearModel()
    section = None
    row_kind = {}
    row_idx = {}
    obj_row = None
    coefs = {}
    rhs = {}
    rng = {}
    in_int = False
    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            parts = raw.split()
            section = parts[0]
            if section == "NAME" and len(parts) > 1:
                m.name = parts[1]
            continue
        tok = raw.split()
        if section == "ROWS":
            kind, name = tok
            if kind == "N" and obj_row is None:
                obj_row = name
                continue
            row_kind[name] = kind
            row_idx[name] = len(row_idx)
            coefs[name] = {}
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1] == "'MARKER'":
                in_int = tok[2] == "'INTORG'"
                continue
            col = tok[0]
            if col not in m.index:
                m.add_var(col, 0.0, INF, 0.0, in_int)
            j = m.index[col]
            for r, v in zip(tok[1::2], tok[2::2]):
                if r == obj_row:
                    m.obj[j] = _parse_num(v)
                else:
                    coefs[r][j] = _parse_num(v)
        elif section == "RHS":
            for r, v in zip(tok[1::2], tok[2::2]):
                rhs[r] = _parse_num(v)
        elif section == "RANGES":
            for r, v in zip(tok[1::2], tok[2::2]):
                rng[r] = _parse_num(v)
        elif section == "BOUNDS":
            kind, _, col = tok[:3]
            j = m.index[col]
            v = _parse_num(tok[3]) if len(tok) > 3 else None
            if kind == "UP":
                m.ub[j] = v
            elif kind == "LO":
                m.lb[j] = v
            elif kind == "FX":
                m.lb[j] = m.ub[j] = v
            elif kind == "FR":
                m.lb[j], m.ub[j] = -INF, INF
            elif kind == "MI":
                m.lb[j] = -INF
            elif kind == "PL":
                m.ub[j] = INF
    for name in row_idx:
        k = row_kind[name]
        b = rhs.get(name, 0.0)
        if name in rng:
            r = rng[name]
            lo, hi = (b, b + abs(r)) if k == "E" and r >= 0 else (b - abs(r), b) if k == "E" else (
                (b - abs(r), b) if k == "L" else (b, b + abs(r))
            )
        elif k == "E":
            lo = hi = b
        elif k == "L":
            lo, hi = -INF, b
        elif k == "G":
            lo, hi = b, INF
        else:
            lo, hi = -INF, INF
        m.add_row(name, coefs[name], lo, hi)
    return m
