"""Dynamic programming with Generalized Kennedy slot measurements.

The control of each slot is a real displacement ``beta`` together with the
outcome association; the backward recursion is otherwise unchanged.
"""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from . import _backend
from .dp import DpResult, GK_SEARCH, SearchSettings, backward_step, run_backward
from .model import ModulationConfig
from .tables import Family, GridSpec, RewardTable

__all__ = ["gk_last_stage_table", "gk_backward_step", "gk_run_backward",
           "gk_closed_form_last_stage", "closed_form_discrepancy"]

log = logging.getLogger(__name__)

_LEAF = 1


def gk_closed_form_last_stage(cfg: ModulationConfig, u, v, beta):
    """Published closed form of the last-slot GK reward (direct association).

    ``v + [(u+v) sinh(a b) + (u-v) cosh(a b)] exp(-b^2 - a^2/4)``.
    It equals the kernel-built reward ``u q00 + v q1a`` at displacement
    ``alpha/2 - b``, i.e. its argument is measured from half the amplitude.
    """
    a = cfg.alpha
    ab = a * np.asarray(beta, float)
    return v + ((u + v) * np.sinh(ab) + (u - v) * np.cosh(ab)) * np.exp(-np.square(beta) - a * a / 4)


def gk_last_stage_table(cfg: ModulationConfig, grid: GridSpec, stage: Optional[int] = None,
                        search: Optional[SearchSettings] = None, backend=None) -> RewardTable:
    """``J*_{M-1}`` for GK measurements, maximized over ``beta`` and association.

    The published closed form is evaluated at the optimal controls as a
    cross-check; the discrepancies are stored in ``meta`` and logged.
    """
    stage = cfg.M - 1 if stage is None else stage
    search = search or GK_SEARCH
    lo, hi, periodic = search.interval(Family.GK, cfg)
    values, controls, branch, assoc, clamped = _backend.get(backend).stage_update(
        None, grid.du, grid.dv, grid.n_u, grid.n_v, grid.nearest, 1, _LEAF,
        cfg.theta, cfg.alpha, lo, hi, search.n_scan, periodic, search.tol)
    table = RewardTable(stage, grid, Family.GK, values, controls, branch, assoc, clamped)
    literal, shifted = closed_form_discrepancy(table, cfg)
    table.meta.update(closed_form_literal=literal, closed_form_shifted=shifted)
    if shifted > 1e-9:
        log.warning("GK closed form (shifted) disagrees with kernel reward by %.3g", shifted)
    log.info("GK closed form: literal-argument discrepancy %.3g, shifted %.3g", literal, shifted)
    return table


def closed_form_discrepancy(table: RewardTable, cfg: ModulationConfig) -> tuple[float, float]:
    """Max deviation of the closed form from the kernel reward on direct cells.

    Returns ``(literal, shifted)``: the closed form evaluated at the table's
    ``beta`` as printed, and at ``alpha/2 - beta``.
    """
    u, v = table.grid.axes()
    uu, vv = np.meshgrid(u, v, indexing="ij")
    direct = table.association == 0
    if not direct.any():
        return 0.0, 0.0
    beta = table.controls[direct]
    kernel_val = uu[direct] * np.exp(-beta**2) + vv[direct] * (1 - np.exp(-(cfg.alpha - beta) ** 2))
    lit = gk_closed_form_last_stage(cfg, uu[direct], vv[direct], beta)
    sh = gk_closed_form_last_stage(cfg, uu[direct], vv[direct], 0.5 * cfg.alpha - beta)
    return float(np.max(np.abs(lit - kernel_val))), float(np.max(np.abs(sh - kernel_val)))


def gk_backward_step(next_table: RewardTable, cfg: ModulationConfig,
                     grid: Optional[GridSpec] = None,
                     search: Optional[SearchSettings] = None, backend=None) -> RewardTable:
    if next_table.family is not Family.GK:
        raise ValueError("gk_backward_step needs a GK successor table")
    return backward_step(next_table, cfg, grid, search or GK_SEARCH, backend)


def gk_run_backward(cfg: ModulationConfig, grid: Optional[GridSpec] = None,
                    search: Optional[SearchSettings] = None, backend=None, cache=None) -> DpResult:
    return run_backward(cfg, grid, Family.GK, search or GK_SEARCH, backend, cache)

