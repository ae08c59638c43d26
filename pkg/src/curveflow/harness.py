"""Error norms against manufactured solutions and convergence studies."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CurveFlowError, InvalidArgumentError
from .manufactured import ManufacturedFamily
from .mesh import ERROR_QUADRATURE_POINTS, NodalField, uniform_partition
from .stepper import CurveState, FlowKind, FlowSpec, initial_position, initial_state, step

logger = logging.getLogger(__name__)

NORM_NAMES = ("e_x_L2", "e_x_H1", "e_y_L2", "e_y_H1")


def _norms(vh: NodalField, values: np.ndarray, derivs: np.ndarray, s, wts) -> tuple[float, float]:
    J, n = wts.shape
    diff = values.reshape(J, n, -1) - vh.at_local(s)
    ddiff = derivs.reshape(J, n, -1) - vh.derivative()[:, None, :]
    l2 = float(np.sum(wts * np.sum(diff**2, axis=2)))
    semi = float(np.sum(wts * np.sum(ddiff**2, axis=2)))
    return math.sqrt(l2), math.sqrt(l2 + semi)


def field_errors(vh: NodalField, exact: Callable, exact_rho: Callable,
                 n: int = ERROR_QUADRATURE_POINTS) -> tuple[float, float]:
    """L2 norm and full H1 norm of ``exact - vh`` by an n-point Gauss rule per element.

    ``exact`` and ``exact_rho`` map a flat array of parameter values to (m, d) arrays.
    """
    s, rho, wts = vh.partition.quadrature(n)
    flat = rho.ravel()
    return _norms(vh, np.asarray(exact(flat)), np.asarray(exact_rho(flat)), s, wts)


def error_norms(state: CurveState, fam: ManufacturedFamily,
                n: int = ERROR_QUADRATURE_POINTS) -> tuple[float, float, float, float]:
    """``(|x - x_h|_0, |x - x_h|_1, |y - y_h|_0, |y - y_h|_1)`` at time ``state.t``."""
    s, rho, wts = state.partition.quadrature(n)
    ex = fam.state(rho.ravel(), state.t)
    return (_norms(state.x, ex.x, ex.x_rho, s, wts)
            + _norms(state.y, ex.y, ex.y_rho, s, wts))


def eoc(coarse: float, fine: float) -> float:
    """Order for a halved mesh size."""
    return math.log2(coarse / fine)


@dataclass
class ErrorTable:
    family: str
    levels: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def add(self, J: int, errs: Sequence[float]):
        self.levels.append(int(J))
        self.errors.append(tuple(float(e) for e in errs))

    def column(self, name: str) -> np.ndarray:
        return np.array([row[NORM_NAMES.index(name)] for row in self.errors])

    def eocs(self, name: str) -> list:
        """EOCs between consecutive rows; ``None`` for the first row or non-halved steps."""
        col = self.column(name)
        out = [None]
        for k in range(1, len(col)):
            halved = self.levels[k] == 2 * self.levels[k - 1]
            out.append(eoc(col[k - 1], col[k]) if halved else None)
        return out

    def rows(self) -> list:
        table = []
        eocs = {name: self.eocs(name) for name in NORM_NAMES}
        for k, J in enumerate(self.levels):
            row = [J]
            for i, name in enumerate(NORM_NAMES):
                row += [self.errors[k][i], eocs[name][k]]
            table.append(row)
        return table

    def write_csv(self, path):
        header = ["J"]
        for name in NORM_NAMES:
            header += [name, "eoc"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in self.rows():
                writer.writerow(["" if v is None else repr(v) for v in row])

    def format(self) -> str:
        lines = [f"{'J':>5} " + " ".join(f"{n:>11} {'EOC':>5}" for n in NORM_NAMES)]
        for row in self.rows():
            parts = [f"{row[0]:>5}"]
            for i in range(4):
                err, rate = row[1 + 2 * i], row[2 + 2 * i]
                parts.append(f"{err:11.4e} " + ("  ---" if rate is None else f"{rate:5.2f}"))
            lines.append(" ".join(parts))
        return "\n".join(lines)


def flow_spec_for(fam: ManufacturedFamily, dt: float, forcing_time: str = "old",
                  solver: str = "block") -> FlowSpec:
    kind = FlowKind.CURVE_DIFFUSION if fam.kind == "cd" else FlowKind.ELASTIC
    return FlowSpec(kind, dt, lam=fam.lam, forcing=fam.forcing,
                    forcing_time=forcing_time, solver=solver)


def n_steps(T: float, dt: float) -> int:
    """Number of steps until ``t_m >= T`` (tolerating rounding in ``T / dt``)."""
    return max(0, math.ceil(T / dt - 1e-9))


def run_level(fam: ManufacturedFamily, J: int, T: float = 1.0, init: str = "projected",
              dt: Optional[float] = None, forcing_time: str = "old",
              solver: str = "block") -> tuple[float, float, float, float]:
    """Run one refinement level with ``dt = h^2`` and return the max-in-time errors."""
    if J < 3:
        raise InvalidArgumentError("levels must be >= 3")
    p = uniform_partition(J)
    dt = p.h**2 if dt is None else dt
    x0 = initial_position(lambda q: fam.position(q, 0.0), p, init,
                          y0=lambda q: fam.curvature_variable(q, 0.0),
                          x0_rho=lambda q: fam.state(q, 0.0).x_rho)
    state = initial_state(x0)
    spec = flow_spec_for(fam, dt, forcing_time, solver)
    worst = np.array(error_norms(state, fam))
    M = n_steps(T, dt)
    for _ in range(M):
        try:
            state = step(state, spec)
        except CurveFlowError as exc:
            raise type(exc)(f"level J={J}: {exc}") from exc
        np.maximum(worst, error_norms(state, fam), out=worst)
    logger.info("J=%d done: %s", J, worst)
    return tuple(float(v) for v in worst)


def _run_level_star(args):
    return run_level(*args)


def run_convergence(fam: ManufacturedFamily, levels: Sequence[int], T: float = 1.0,
                    init: str = "projected", jobs: int = 1,
                    forcing_time: str = "old") -> ErrorTable:
    """Errors and EOCs over a list of levels; levels may run in parallel processes."""
    if T <= 0:
        raise InvalidArgumentError("T must be positive")
    levels = [int(J) for J in levels]
    args = [(fam, J, T, init, None, forcing_time) for J in levels]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_level_star, args))
    else:
        results = [_run_level_star(a) for a in args]
    table = ErrorTable(fam.kind)
    for J, errs in zip(levels, results):
        table.add(J, errs)
    return table
