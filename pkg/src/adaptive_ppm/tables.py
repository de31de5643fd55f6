"""Discretized state grids and per-stage reward-to-go tables.

A table holds, for every grid cell ``(u, v) = (p_hat, p_tail)``, the optimal
reward-to-go, the maximizing control and which of the four leader-update
branches attained it.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from . import _backend

__all__ = ["Interpolation", "Branch", "Family", "GridSpec", "RewardTable",
           "write_table_csv", "read_table_csv"]


class Interpolation(Enum):
    NEAREST = "nearest"
    BILINEAR = "bilinear"


class Branch(Enum):
    """Leader bookkeeping per outcome: keep the incumbent or switch to the new slot.

    A = (keep, keep), B = (keep, switch), C = (switch, keep), D = (switch, switch),
    listed as (outcome 0, outcome 1).
    """

    A = 0
    B = 1
    C = 2
    D = 3

    @property
    def switches(self) -> tuple[bool, bool]:
        return bool(self.value & 2), bool(self.value & 1)


class Family(Enum):
    PROJECTIVE = "projective"
    GK = "gk"


@dataclass(frozen=True)
class GridSpec:
    u_max: float
    v_max: float
    n_u: int
    n_v: int
    interpolation: Interpolation = Interpolation.BILINEAR

    def __post_init__(self):
        if self.n_u < 2 or self.n_v < 2:
            raise ValueError("a grid needs at least two points per axis")
        if not (self.u_max > 0 and self.v_max > 0):
            raise ValueError("grid bounds must be positive")

    @classmethod
    def square(cls, side: float, n: int = 1000,
               interpolation: Interpolation = Interpolation.BILINEAR) -> "GridSpec":
        return cls(side, side, n, n, interpolation)

    @classmethod
    def for_cardinality(cls, M: int, n: int = 1000,
                        interpolation: Interpolation = Interpolation.BILINEAR) -> "GridSpec":
        """The reachable domain ``[0, 1/M]^2`` from the equiprobable start."""
        return cls.square(1.0 / M, n, interpolation)

    @classmethod
    def unit_step(cls, M: int, step: float = 1e-3,
                  interpolation: Interpolation = Interpolation.BILINEAR) -> "GridSpec":
        """``[0, 1/M]^2`` sampled no coarser than ``step`` (in probability units)."""
        n = int(np.ceil(1.0 / (M * step) - 1e-9)) + 1
        return cls.square(1.0 / M, max(n, 2), interpolation)

    @property
    def du(self) -> float:
        return self.u_max / (self.n_u - 1)

    @property
    def dv(self) -> float:
        return self.v_max / (self.n_v - 1)

    @property
    def nearest(self) -> bool:
        return self.interpolation is Interpolation.NEAREST

    def axes(self):
        return np.arange(self.n_u) * self.du, np.arange(self.n_v) * self.dv

    def contains(self, u, v, slack: float = 1e-12) -> np.ndarray:
        u, v = np.asarray(u), np.asarray(v)
        return (u <= self.u_max * (1 + slack)) & (v <= self.v_max * (1 + slack))

    def digest(self) -> str:
        key = f"{self.u_max!r}|{self.v_max!r}|{self.n_u}|{self.n_v}|{self.interpolation.value}"
        return hashlib.sha256(key.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class RewardTable:
    """Reward-to-go ``J*_k`` on a grid, with the maximizing controls.

    For the projective family ``controls`` holds the angle; for the
    Generalized Kennedy family it holds the displacement and
    ``association`` the outcome association (0 direct, 1 inverted).
    """

    stage: int
    grid: GridSpec
    family: Family
    values: np.ndarray
    controls: np.ndarray
    branch: np.ndarray
    association: Optional[np.ndarray] = None
    clamped: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("values", "controls", "branch", "association"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    def __call__(self, u, v, interpolation: Optional[Interpolation] = None):
        """Interpolated value at ``(u, v)`` (scalars or arrays)."""
        interpolation = interpolation or self.grid.interpolation
        kern = _backend.get()
        out = kern.lookup_many(self.values, self.grid.du, self.grid.dv,
                               interpolation is Interpolation.NEAREST,
                               np.atleast_1d(np.asarray(u, float)),
                               np.atleast_1d(np.asarray(v, float)))
        return float(out[0]) if np.ndim(u) == 0 and np.ndim(v) == 0 else out

    def nearest_index(self, u: float, v: float) -> tuple[int, int]:
        i = int(np.clip(np.floor(u / self.grid.du + 0.5), 0, self.grid.n_u - 1))
        j = int(np.clip(np.floor(v / self.grid.dv + 0.5), 0, self.grid.n_v - 1))
        return i, j

    def same_as(self, other: "RewardTable") -> bool:
        return (self.stage == other.stage and self.grid == other.grid
                and self.family == other.family
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.controls, other.controls)
                and np.array_equal(self.branch, other.branch)
                and (self.association is None) == (other.association is None)
                and (self.association is None or np.array_equal(self.association, other.association)))


_PROJ_HEADER = "stage,u,v,value,control,branch"
_GK_HEADER = "stage,u,v,value,beta,association,branch"
_ASSOC_NAMES = ("direct", "inverted")


def write_table_csv(table: RewardTable, path) -> None:
    """Write one table as CSV with round-trip float precision.

    Projective tables: ``stage,u,v,value,control,branch``; GK tables:
    ``stage,u,v,value,beta,association,branch``. Branch is one of A-D.
    """
    u, v = table.grid.axes()
    uu, vv = np.meshgrid(u, v, indexing="ij")
    letters = np.array([b.name for b in Branch])[table.branch.ravel()]
    gk = table.family is Family.GK
    assoc = (np.array(_ASSOC_NAMES)[table.association.ravel()] if gk
             else [None] * uu.size)
    rows = zip(uu.ravel().tolist(), vv.ravel().tolist(), table.values.ravel().tolist(),
               table.controls.ravel().tolist(), assoc, letters.tolist())
    if gk:
        line = f"{table.stage},%.17g,%.17g,%.17g,%.17g,%s,%s\n"
        body = "".join(line % r for r in rows)
    else:
        line = f"{table.stage},%.17g,%.17g,%.17g,%.17g,%s\n"
        body = "".join(line % (a, b, c, d, e) for a, b, c, d, _, e in rows)
    with open(path, "w") as fh:
        fh.write((_GK_HEADER if gk else _PROJ_HEADER) + "\n")
        fh.write(body)


def read_table_csv(path, grid: GridSpec) -> RewardTable:
    """Read a table written by :func:`write_table_csv` for the given grid."""
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip()
    if header == _PROJ_HEADER:
        family = Family.PROJECTIVE
    elif header == _GK_HEADER:
        family = Family.GK
    else:
        raise ValueError(f"{path}: unrecognized table header {header!r}")
    numeric = np.loadtxt(path, delimiter=",", skiprows=1, usecols=(0, 1, 2, 3, 4), ndmin=2)
    tags = np.loadtxt(path, delimiter=",", skiprows=1, dtype=str, ndmin=2,
                      usecols=(5, 6) if family is Family.GK else (5,))
    n = grid.n_u * grid.n_v
    if numeric.shape[0] != n:
        raise ValueError(f"{path}: expected {n} rows for the grid, found {numeric.shape[0]}")
    shape = (grid.n_u, grid.n_v)
    names = {b.name: b.value for b in Branch}
    try:
        branch = np.array([names[b] for b in tags[:, -1]], dtype=np.int8).reshape(shape)
        assoc = None
        if family is Family.GK:
            amap = {name: i for i, name in enumerate(_ASSOC_NAMES)}
            assoc = np.array([amap[a] for a in tags[:, 0]], dtype=np.int8).reshape(shape)
    except KeyError as exc:
        raise ValueError(f"{path}: unknown tag {exc.args[0]!r}") from None
    return RewardTable(int(numeric[0, 0]), grid, family, numeric[:, 3].reshape(shape),
                       numeric[:, 4].reshape(shape), branch, assoc)
