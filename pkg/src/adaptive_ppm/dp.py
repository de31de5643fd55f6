"""Backward induction over the discretized ``(p_hat, p_tail)`` state space.

Stage ``k`` means ``k`` slots have already been measured. ``J*_{M-1}`` has a
closed form (one binary discrimination left); earlier tables come from
maximizing, per cell, the sum over outcomes of the better of the two
leader-bookkeeping children. The first slot is optimized separately from
the equiprobable start ``(1/M, 1/M)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import _backend
from .model import Association, GeneralizedKennedy, ModulationConfig, Projective
from .search import scan_then_refine
from .tables import Family, GridSpec, RewardTable

__all__ = [
    "DpResult",
    "SearchSettings",
    "PROJECTIVE_SEARCH",
    "GK_SEARCH",
    "last_stage_table",
    "backward_step",
    "run_backward",
    "first_slot",
    "optimize_at_state",
    "reuse_tables",
    "InvalidGridError",
]

log = logging.getLogger(__name__)

Control = Union[Projective, GeneralizedKennedy]


class InvalidGridError(ValueError):
    """The grid does not cover the states a computation needs."""


@dataclass(frozen=True)
class SearchSettings:
    """Per-cell control search: uniform scan, then golden refinement."""

    n_scan: int
    tol: float

    def interval(self, family: Family, cfg: ModulationConfig) -> tuple[float, float, bool]:
        if family is Family.PROJECTIVE:
            return -0.5 * math.pi, 0.5 * math.pi, True
        return -cfg.alpha, 2.0 * cfg.alpha, False


PROJECTIVE_SEARCH = SearchSettings(n_scan=720, tol=1e-8)
GK_SEARCH = SearchSettings(n_scan=600, tol=1e-8)

_FAMILY_CODE = {Family.PROJECTIVE: 0, Family.GK: 1}
_BACKWARD, _LEAF = 0, 1


def default_search(family: Family) -> SearchSettings:
    return PROJECTIVE_SEARCH if family is Family.PROJECTIVE else GK_SEARCH


@dataclass(frozen=True, eq=False)
class DpResult:
    """Output of a backward pass.

    ``tables`` is ordered from ``J*_{M-1}`` down to ``J*_1``; ``control0`` is
    the first-slot measurement and ``pc`` the optimized correct-decision
    probability.
    """

    cfg: ModulationConfig
    grid: GridSpec
    family: Family
    pc: float
    control0: Control
    tables: tuple
    n_clamped: int = 0
    search: Optional[SearchSettings] = None
    meta: dict = field(default_factory=dict)

    @property
    def pe(self) -> float:
        return 1.0 - self.pc

    def table(self, stage: int) -> RewardTable:
        """``J*_stage`` for ``1 <= stage <= M-1``."""
        return self.tables[self.cfg.M - 1 - stage]


def _stage(next_table, cfg, grid, family, objective, search, backend):
    kern = _backend.get(backend)
    lo, hi, periodic = search.interval(family, cfg)
    return kern.stage_update(
        None if next_table is None else next_table.values,
        grid.du, grid.dv, grid.n_u, grid.n_v, grid.nearest,
        _FAMILY_CODE[family], objective, cfg.theta, cfg.alpha,
        lo, hi, search.n_scan, periodic, search.tol)


def last_stage_table(cfg: ModulationConfig, grid: GridSpec, stage: Optional[int] = None,
                     family: Family = Family.PROJECTIVE,
                     search: Optional[SearchSettings] = None, backend=None) -> RewardTable:
    """``J*_{M-1}``: one binary discrimination between leader and last slot.

    Projective measurements admit the closed form
    ``(u + v + sqrt((u+v)^2 - 4 u v gamma)) / 2`` with the matching angle;
    GK measurements are maximized numerically over displacement and
    association. Outcome 0 keeps the leader and outcome 1 elects the last
    slot, which is branch ``B`` everywhere.
    """
    stage = cfg.M - 1 if stage is None else stage
    if family is Family.GK:
        from .gk import gk_last_stage_table
        return gk_last_stage_table(cfg, grid, stage=stage, search=search, backend=backend)
    u, v = grid.axes()
    uu, vv = np.meshgrid(u, v, indexing="ij")
    s = uu + vv
    values = 0.5 * (s + np.sqrt(np.maximum(0.0, s * s - 4.0 * uu * vv * cfg.gamma)))
    controls = 0.5 * np.arctan2(math.sin(2 * cfg.theta) * s, math.cos(2 * cfg.theta) * (uu - vv))
    branch = np.ones(values.shape, dtype=np.int8)
    return RewardTable(stage, grid, Family.PROJECTIVE, values, controls, branch)


def backward_step(next_table: RewardTable, cfg: ModulationConfig,
                  grid: Optional[GridSpec] = None, search: Optional[SearchSettings] = None,
                  backend=None) -> RewardTable:
    """``J*_k`` from ``J*_{k+1}`` by per-cell maximization over the control.

    Children falling outside the grid are clamped to its edge and counted
    in ``RewardTable.clamped``.
    """
    grid = grid or next_table.grid
    if next_table.stage < 2:
        raise ValueError("backward_step needs a successor table with stage >= 2")
    family = next_table.family
    search = search or default_search(family)
    values, controls, branch, assoc, clamped = _stage(
        next_table, cfg, grid, family, _BACKWARD, search, backend)
    return RewardTable(next_table.stage - 1, grid, family, values, controls, branch,
                       assoc if family is Family.GK else None, clamped)


def _kernel_arrays(family: Family, cfg: ModulationConfig, x, assoc: int):
    x = np.asarray(x, dtype=float)
    if family is Family.PROJECTIVE:
        return np.cos(cfg.theta - x) ** 2, np.cos(cfg.theta + x) ** 2
    vac = np.exp(-x * x)
    pulse = np.exp(-(cfg.alpha - x) ** 2)
    return (vac, pulse) if assoc == 0 else (1.0 - pulse, 1.0 - vac)


def _make_control(family: Family, x: float, assoc: int) -> Control:
    if family is Family.PROJECTIVE:
        return Projective(x)
    return GeneralizedKennedy(float(x), Association.DIRECT if assoc == 0 else Association.INVERTED)


def _best_control(objective, family, cfg, search):
    """Scan-then-golden over the control for a vectorized ``objective(p00, p01)``."""
    lo, hi, periodic = search.interval(family, cfg)
    best = None
    for assoc in range(2 if family is Family.GK else 1):
        def f(x, assoc=assoc):
            p00, p01 = _kernel_arrays(family, cfg, x, assoc)
            return float(objective(p00, p01))
        x, val = scan_then_refine(f, lo, hi, search.n_scan, search.tol, periodic)
        if best is None or val > best[0]:
            best = (val, x, assoc)
    val, x, assoc = best
    return _make_control(family, x, assoc), val


def first_slot(table: RewardTable, cfg: ModulationConfig, start: float,
               search: Optional[SearchSettings] = None) -> tuple[Control, float]:
    """Optimize the first measurement from the uniform state ``(start, start)``.

    After slot 1 the leader is symbol 1 with joint ``p(z|g1) start`` and the
    tail has ``p(z|g0) start``.
    """
    search = search or default_search(table.family)

    def objective(p00, p01):
        return (table(p01 * start, p00 * start) + table((1 - p01) * start, (1 - p00) * start))

    return _best_control(objective, table.family, cfg, search)


def optimize_at_state(table: Optional[RewardTable], cfg: ModulationConfig, family: Family,
                      u: float, v: float, search: Optional[SearchSettings] = None):
    """Best control at the exact state ``(u, v)`` given the successor table.

    With ``table=None`` the last-slot reward ``p00 u + p11 v`` is maximized.
    Returns ``(control, value)``.
    """
    search = search or default_search(family)
    if table is None:
        def objective(p00, p01):
            return p00 * u + (1.0 - p01) * v
    else:
        def objective(p00, p01):
            p10, p11 = 1.0 - p00, 1.0 - p01
            return (np.maximum(table(p00 * u, p00 * v), table(p01 * v, p00 * v))
                    + np.maximum(table(p10 * u, p10 * v), table(p11 * v, p10 * v)))
    return _best_control(objective, family, cfg, search)


def run_backward(cfg: ModulationConfig, grid: Optional[GridSpec] = None,
                 family: Family = Family.PROJECTIVE, search: Optional[SearchSettings] = None,
                 backend=None, cache=None) -> DpResult:
    """Full backward pass: ``J*_{M-1}`` down to ``J*_1`` and the first slot.

    Parameters
    ----------
    cfg : ModulationConfig
    grid : GridSpec, optional
        Defaults to ``[0, 1/M]^2`` with 1000 points per axis.
    family : Family
        Projective measurements or Generalized Kennedy receivers.
    cache : TableCache, optional
        Tables are loaded from and stored to this cache.
    """
    grid = grid or GridSpec.for_cardinality(cfg.M)
    search = search or default_search(family)
    start = 1.0 / cfg.M
    if grid.u_max < start * (1 - 1e-12) or grid.v_max < start * (1 - 1e-12):
        raise InvalidGridError(f"grid [0,{grid.u_max}]x[0,{grid.v_max}] misses the start state {start}")
    if cache is not None:
        hit = cache.load(cfg, grid, family, search)
        if hit is not None:
            return hit

    table = last_stage_table(cfg, grid, family=family, search=search, backend=backend)
    tables = [table]
    for _ in range(cfg.M - 2):
        table = backward_step(table, cfg, grid, search, backend)
        tables.append(table)
        log.debug("stage %d done (%d clamped)", table.stage, table.clamped)
    control0, pc = first_slot(table, cfg, start, search)
    n_clamped = sum(t.clamped for t in tables)
    if n_clamped:
        log.warning("%d grid cells had children outside the grid (clamped)", n_clamped)
    result = DpResult(cfg, grid, family, pc, control0, tuple(tables), n_clamped, search)
    if cache is not None:
        cache.store(result)
    return result


def reuse_tables(result: DpResult, M_i: int) -> float:
    """Correct-decision probability for cardinality ``M_i`` from a larger run.

    Tables depend only on the number of slots still to measure, so
    ``J*_{M~ - M_i + 1}`` of an ``M~``-slot run is the ``J*_1`` of an
    ``M_i``-slot problem, provided the grid covers ``1/M_i``.
    """
    M_big = result.cfg.M
    if not 2 <= M_i <= M_big:
        raise ValueError(f"M_i must lie in [2, {M_big}], got {M_i}")
    start = 1.0 / M_i
    if result.grid.u_max < start * (1 - 1e-12) or result.grid.v_max < start * (1 - 1e-12):
        raise InvalidGridError(f"grid bound {result.grid.u_max} does not cover 1/{M_i}")
    table = result.table(M_big - M_i + 1)
    _, pc = first_slot(table, result.cfg.with_cardinality(M_i), start, result.search)
    return pc
