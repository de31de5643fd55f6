"""Reference receivers and binary-discrimination primitives.

Closed forms for the Helstrom limit, direct detection and conditional
nulling; numerically optimized improved conditional nulling (ICN) in its
unit-gain (Type I) and amplified (Type II) versions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .model import ModulationConfig
from .search import golden_max, scan_then_refine_min

__all__ = [
    "Scheme",
    "IcnParams",
    "BaselineResult",
    "pe_helstrom",
    "pe_direct_detection",
    "pe_conditional_nulling",
    "icn_transitions",
    "pe_icn",
    "optimize_icn",
    "binary_pc_optimal",
    "binary_optimal_angle",
    "binary_pc_at_angle",
]


class Scheme(Enum):
    HELSTROM = "theory"
    DIRECT_DETECTION = "dd"
    CONDITIONAL_NULLING = "cn"
    ICN_TYPE_I = "icn1"
    ICN_TYPE_II = "icn2"
    GK_BINARY = "gk-binary"


@dataclass(frozen=True)
class IcnParams:
    beta: float
    gain: float = 1.0

    def __post_init__(self):
        if not self.gain >= 1.0:
            raise ValueError(f"amplifier gain must be >= 1, got {self.gain!r}")


@dataclass(frozen=True)
class BaselineResult:
    scheme: Scheme
    pe: float
    params: Optional[IcnParams] = None


def pe_helstrom(cfg: ModulationConfig) -> float:
    M, g = cfg.M, cfg.gamma
    return (M - 1) / M**2 * (math.sqrt(1 + (M - 1) * g) - math.sqrt(1 - g)) ** 2


def pe_direct_detection(cfg: ModulationConfig) -> float:
    return (cfg.M - 1) / cfg.M * math.exp(-cfg.mean_photons)


def pe_conditional_nulling(cfg: ModulationConfig) -> float:
    M, g = cfg.M, cfg.gamma
    # (1-g)^M - 1 + M g loses every digit for small g; expm1/log1p keep them.
    return (math.expm1(M * math.log1p(-g)) + M * g) / M if g < 1 else (M - 1) / M


def icn_transitions(mean_photons: float, params: IcnParams) -> tuple[float, float]:
    """``(q00, q1a)``: no-click on vacuum, click on the pulse.

    The squeezed-state expressions are used exactly as published, without
    re-deriving the amplified overlap.
    """
    G = params.gain
    sg, sg1 = math.sqrt(G), math.sqrt(G - 1.0)
    c = (sg + sg1) ** 2 / (1.0 + sg1 * (sg + sg1))
    alpha = math.sqrt(mean_photons)
    q00 = math.exp(-c * params.beta**2) / sg
    q1a = 1.0 - math.exp(-c * (alpha - params.beta) ** 2) / sg
    return q00, q1a


def pe_icn(cfg: ModulationConfig, params: IcnParams) -> float:
    if params.gain < 1.0:
        raise ValueError("amplifier gain must be >= 1")
    q00, q1a = icn_transitions(cfg.mean_photons, params)
    if q00 <= 0.0:
        raise ZeroDivisionError("no-click probability on vacuum vanished; displacement too large")
    M = cfg.M
    miss = 1.0 - q00
    num = q1a * (1.0 - miss ** (M - 1)) + cfg.gamma * (M * q00 - 1.0 + miss**M)
    return num / (M * q00)


def _icn_beta_search(cfg: ModulationConfig, gain: float, n_scan: int, tol: float):
    hi = 2.0 * cfg.alpha
    if hi == 0.0:
        return 0.0, pe_icn(cfg, IcnParams(0.0, gain))
    return scan_then_refine_min(lambda b: pe_icn(cfg, IcnParams(b, gain)), 0.0, hi, n_scan, tol)


def optimize_icn(cfg: ModulationConfig, type_two: bool = False, n_scan: int = 2000,
                 tol: float = 1e-10, gain_max: float = 10.0) -> BaselineResult:
    """Minimize the ICN error over the displacement (and the gain for Type II).

    Displacements are searched on ``[0, 2 alpha]`` and gains on
    ``[1, gain_max]`` by a coarse scan followed by golden-section refinement.
    The exact-nulling point ``beta = alpha, G = 1`` is always a candidate,
    so the result never exceeds conditional nulling.
    """
    nulling = IcnParams(cfg.alpha, 1.0)
    best = (pe_icn(cfg, nulling), nulling)

    b1, pe1 = _icn_beta_search(cfg, 1.0, n_scan, tol)
    if pe1 < best[0]:
        best = (pe1, IcnParams(b1, 1.0))
    if not type_two:
        return BaselineResult(Scheme.ICN_TYPE_I, best[0], best[1])

    if cfg.alpha > 0:
        betas = np.linspace(0.0, 2.0 * cfg.alpha, n_scan)[:, None]
        gains = np.linspace(1.0, gain_max, n_scan)[None, :]
        surface = _pe_icn_grid(cfg, betas, gains)
        _, jg = np.unravel_index(np.nanargmin(surface), surface.shape)
        dg = (gain_max - 1.0) / (n_scan - 1)
        lo, hi = max(1.0, gains[0, jg] - dg), min(gain_max, gains[0, jg] + dg)

        def neg_inner(G):
            return -_icn_beta_search(cfg, G, n_scan // 10, tol)[1]

        g_opt, neg = golden_max(neg_inner, lo, hi, tol)
        b_opt, pe2 = _icn_beta_search(cfg, g_opt, n_scan, tol)
        if pe2 < best[0]:
            best = (pe2, IcnParams(b_opt, g_opt))
    return BaselineResult(Scheme.ICN_TYPE_II, best[0], best[1])


def _pe_icn_grid(cfg: ModulationConfig, beta: np.ndarray, gain: np.ndarray) -> np.ndarray:
    sg, sg1 = np.sqrt(gain), np.sqrt(gain - 1.0)
    c = (sg + sg1) ** 2 / (1.0 + sg1 * (sg + sg1))
    q00 = np.exp(-c * beta**2) / sg
    q1a = 1.0 - np.exp(-c * (cfg.alpha - beta) ** 2) / sg
    M, miss = cfg.M, 1.0 - q00
    with np.errstate(divide="ignore", invalid="ignore"):
        return (q1a * (1.0 - miss ** (M - 1)) + cfg.gamma * (M * q00 - 1.0 + miss**M)) / (M * q00)


def binary_pc_optimal(p0: float, p1: float, cfg_or_gamma) -> float:
    """Best correct-decision probability between ``|g0>`` (weight p0) and ``|g1>`` (p1).

    ``cfg_or_gamma`` is a :class:`ModulationConfig` or the overlap itself.
    """
    g = cfg_or_gamma.gamma if isinstance(cfg_or_gamma, ModulationConfig) else cfg_or_gamma
    s = p0 + p1
    return 0.5 * (s + math.sqrt(max(0.0, s * s - 4.0 * p0 * p1 * g)))


def binary_optimal_angle(p0: float, p1: float, theta: float) -> float:
    return 0.5 * math.atan2(math.sin(2 * theta) * (p0 + p1), math.cos(2 * theta) * (p0 - p1))


def binary_pc_at_angle(p0, p1, theta, phi):
    """Correct-decision probability of the projector at ``phi`` (outcome 0 -> p0).

    Accepts arrays for any argument.
    """
    return (0.5 * (1 + np.cos(2 * theta - 2 * phi)) * p0
            + 0.5 * (1 - np.cos(2 * theta + 2 * phi)) * p1)
