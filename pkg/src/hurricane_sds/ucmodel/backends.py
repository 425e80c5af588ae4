"""Solver backends.

``highs``   writes the model as MPS and solves the file with HiGHS (highspy).
``scipy``   passes the arrays to :func:`scipy.optimize.milp` in memory.
``oracle``  exhaustive enumeration of commitments (see :mod:`.oracle`).
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import SolverError
from .lp import LinearModel


@dataclass
class RawSolution:
    x: np.ndarray
    objective: float
    status: str  # "optimal" | "time_limit" | "infeasible"
    gap: float = 0.0
    backend: str = ""


class Backend:
    name = "base"

    def solve(self, model: LinearModel, gap: float = 1e-3, time_limit: float = 600.0) -> RawSolution:
        raise NotImplementedError


class HighsFileBackend(Backend):
    name = "highs"

    def __init__(self, workdir=None, keep_files=False, threads=1):
        self.workdir = workdir
        self.keep_files = keep_files
        self.threads = threads

    def solve(self, model, gap=1e-3, time_limit=600.0):
        import highspy

        with tempfile.TemporaryDirectory(dir=self.workdir) as tmp:
            path = Path(self.workdir or tmp) / f"{model.name}.mps"
            model.write_mps(path)
            h = highspy.Highs()
            h.setOptionValue("output_flag", False)
            h.setOptionValue("mip_rel_gap", float(gap))
            h.setOptionValue("time_limit", float(time_limit))
            h.setOptionValue("threads", int(self.threads))
            h.setOptionValue("random_seed", 0)
            if h.readModel(str(path)) != highspy.HighsStatus.kOk:
                raise SolverError(f"HiGHS could not read {path}")
            h.run()
            if not self.keep_files:
                path.unlink(missing_ok=True)
            status = h.getModelStatus()
            MS = highspy.HighsModelStatus
            info = h.getInfo()
            if status in (MS.kInfeasible, MS.kUnboundedOrInfeasible):
                return RawSolution(np.empty(0), np.nan, "infeasible", np.inf, self.name)
            sol = h.getSolution()
            x = np.array(sol.col_value)
            if status == MS.kOptimal:
                state = "optimal"
            elif status == MS.kTimeLimit and x.size == model.n_vars and info.primal_solution_status == 2:
                state = "time_limit"
            else:
                raise SolverError(f"HiGHS ended with status {h.modelStatusToString(status)}")
            # HiGHS reads columns in file order, which is creation order
            mip_gap = float(info.mip_gap) if model.n_int else 0.0
            return RawSolution(x, float(info.objective_function_value), state, mip_gap, self.name)


class ScipyBackend(Backend):
    name = "scipy"

    def solve(self, model, gap=1e-3, time_limit=600.0):
        from scipy.optimize import Bounds, LinearConstraint, milp

        c, A, lo, hi, lb, ub, integ = model.arrays()
        cons = LinearConstraint(A, lo, hi) if model.n_rows else None
        res = milp(
            c,
            constraints=cons,
            integrality=integ,
            bounds=Bounds(lb, ub),
            options={"mip_rel_gap": gap, "time_limit": time_limit, "disp": False},
        )
        if res.status == 2:
            return RawSolution(np.empty(0), np.nan, "infeasible", np.inf, self.name)
        if res.x is None:
            raise SolverError(f"scipy milp failed: {res.message}")
        state = "optimal" if res.status == 0 else "time_limit"
        mip_gap = float(getattr(res, "mip_gap", 0.0) or 0.0)
        return RawSolution(np.asarray(res.x), float(res.fun), state, mip_gap, self.name)


class OracleBackend(Backend):
    name = "oracle"

    def solve(self, model, gap=1e-3, time_limit=600.0):
        from .oracle import brute_force_solution

        if model.instance is None:
            raise SolverError("oracle backend needs a model built by build_suc")
        return brute_force_solution(model)


BACKENDS = {"highs": HighsFileBackend, "scipy": ScipyBackend, "oracle": OracleBackend}


def get_backend(backend) -> Backend:
    if isinstance(backend, Backend):
        return backend
    try:
        return BACKENDS[backend]()
    except KeyError:
        raise SolverError(f"unknown backend {backend!r}; choose from {', '.join(BACKENDS)}") from None
