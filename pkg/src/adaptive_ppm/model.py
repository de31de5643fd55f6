"""Qubit model of a PPM slot and single-slot measurement statistics.

Each slot of a PPM symbol carries either the vacuum or the pulse, mapped to
the qubit pair

    |g0> = cos(theta)|X> + sin(theta)|Y>,   |g1> = cos(theta)|X> - sin(theta)|Y>

with overlap ``gamma = |<g0|g1>|^2 = cos^2(2 theta) = exp(-|alpha|^2)``.
A binary measurement on the slot is fully described by its transition
kernel ``p[i, j] = P(outcome i | slot qubit j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

__all__ = [
    "ModulationConfig",
    "config_from_mean_photons",
    "config_from_gamma",
    "Association",
    "Projective",
    "Povm",
    "GeneralizedKennedy",
    "LocalMeasurement",
    "TransitionKernel",
    "SpectralDecomposition",
    "projector_kernel",
    "povm_kernel",
    "povm_decompose",
    "gk_kernel",
    "relabel_kernel",
    "slot_states",
    "wrap_angle",
    "InvalidPovmError",
]

_POVM_SLACK = 1e-12


class InvalidPovmError(ValueError):
    """Raised for POVM parameters outside the unit disk."""


@dataclass(frozen=True)
class ModulationConfig:
    """A PPM problem instance.

    Build it with :func:`config_from_mean_photons` or
    :func:`config_from_gamma`; the remaining fields are derived.
    """

    M: int
    mean_photons: float
    gamma: float
    theta: float

    @property
    def alpha(self) -> float:
        """Real, nonnegative coherent amplitude."""
        return math.sqrt(self.mean_photons)

    def with_cardinality(self, M: int) -> "ModulationConfig":
        return ModulationConfig(M, self.mean_photons, self.gamma, self.theta)


def _theta_from_gamma(gamma: float) -> float:
    return 0.5 * math.acos(min(1.0, math.sqrt(gamma)))


def config_from_mean_photons(M: int, mean_photons: float) -> ModulationConfig:
    if int(M) != M or M < 2:
        raise ValueError(f"cardinality M must be an integer >= 2, got {M!r}")
    if not mean_photons >= 0 or not math.isfinite(mean_photons):
        raise ValueError(f"mean photon number must be finite and >= 0, got {mean_photons!r}")
    gamma = math.exp(-mean_photons)
    return ModulationConfig(int(M), float(mean_photons), gamma, _theta_from_gamma(gamma))


def config_from_gamma(M: int, gamma: float) -> ModulationConfig:
    if int(M) != M or M < 2:
        raise ValueError(f"cardinality M must be an integer >= 2, got {M!r}")
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"overlap gamma must lie in (0, 1], got {gamma!r}")
    return ModulationConfig(int(M), -math.log(gamma), float(gamma), _theta_from_gamma(gamma))


def wrap_angle(phi):
    """Reduce a projector angle to [-pi/2, pi/2) (projectors are pi-periodic)."""
    return np.mod(np.asarray(phi, dtype=float) + 0.5 * np.pi, np.pi) - 0.5 * np.pi


class Association(Enum):
    """Outcome/qubit association of a Generalized Kennedy slot measurement."""

    DIRECT = "direct"
    INVERTED = "inverted"


@dataclass(frozen=True)
class TransitionKernel:
    """Conditional outcome probabilities of one slot measurement.

    ``p[i, j]`` is the probability of outcome ``i`` when the slot holds
    qubit ``|g_j>``; each column sums to one.
    """

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float).reshape(2, 2)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    def __getitem__(self, ij):
        return self.p[ij]

    def column_sums(self) -> np.ndarray:
        return self.p.sum(axis=0)


@dataclass(frozen=True)
class Projective:
    """Rank-1 projective measurement along angle ``phi``."""

    phi: float

    def __post_init__(self):
        object.__setattr__(self, "phi", float(wrap_angle(self.phi)))

    def kernel(self, cfg: ModulationConfig) -> TransitionKernel:
        return projector_kernel(cfg.theta, self.phi)


@dataclass(frozen=True)
class Povm:
    """General binary POVM with Bloch-like parameters ``(a, b)``."""

    a: float
    b: float

    def __post_init__(self):
        _check_povm(self.a, self.b)

    def kernel(self, cfg: ModulationConfig) -> TransitionKernel:
        return povm_kernel(cfg.theta, self.a, self.b)


@dataclass(frozen=True)
class GeneralizedKennedy:
    """Fixed displacement ``beta`` followed by photon counting."""

    beta: float
    association: Association

    def __post_init__(self):
        if not math.isfinite(self.beta):
            raise ValueError("displacement must be finite")
        if not isinstance(self.association, Association):
            raise TypeError("association must be an Association member")

    def kernel(self, cfg: ModulationConfig) -> TransitionKernel:
        return gk_kernel(cfg.mean_photons, self.beta, self.association)


LocalMeasurement = Union[Projective, Povm, GeneralizedKennedy]


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigen-decomposition of a POVM pair as a projector plus relabeling.

    The projector pair is the projective measurement at ``projector_angle``;
    outcome ``0^`` is reported as 0 with probability ``relabel_lambda0`` and
    as 1 otherwise (mirrored for ``1^``).
    """

    projector_angle: float
    relabel_lambda0: float
    relabel_lambda1: float


def slot_states(theta: float) -> np.ndarray:
    """Rows are the real 2-vectors of ``|g0>`` and ``|g1>``."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [c, -s]])


def projector_kernel(theta: float, phi: float) -> TransitionKernel:
    """Transition kernel of the projective measurement at angle ``phi``.

    ``p[i, j] = cos^2(theta - (-1)^j phi + i pi/2)``.
    """
    p = np.empty((2, 2))
    for j, sign in enumerate((1.0, -1.0)):
        arg = theta - sign * phi
        c2 = math.cos(arg) ** 2
        p[0, j] = c2
        p[1, j] = 1.0 - c2
    return TransitionKernel(p)


def _check_povm(a: float, b: float) -> None:
    if a * a + b * b > 1.0 + _POVM_SLACK:
        raise InvalidPovmError(f"POVM parameters outside the unit disk: a={a}, b={b}")


def povm_kernel(theta: float, a: float, b: float) -> TransitionKernel:
    """Transition kernel ``p[i, j] = tr(Pi_i |g_j><g_j|)`` of a POVM pair.

    ``Pi_0 = (I + a Z + b X) / 2`` in the ``{|X>, |Y>}`` basis, which gives
    ``p[i, j] = [1 + (-1)^i a cos 2theta + (-1)^(i+j) b sin 2theta] / 2``.
    """
    _check_povm(a, b)
    c2, s2 = math.cos(2 * theta), math.sin(2 * theta)
    p = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            p[i, j] = 0.5 * (1.0 + (-1) ** i * a * c2 + (-1) ** (i + j) * b * s2)
    return TransitionKernel(p)


def povm_decompose(a: float, b: float) -> SpectralDecomposition:
    _check_povm(a, b)
    r = min(1.0, math.hypot(a, b))
    return SpectralDecomposition(
        projector_angle=0.5 * math.atan2(b, a),
        relabel_lambda0=0.5 * (1.0 + r),
        relabel_lambda1=0.5 * (1.0 - r),
    )


def relabel_kernel(theta: float, dec: SpectralDecomposition) -> TransitionKernel:
    """Kernel obtained by measuring the eigenprojectors then relabeling."""
    proj = projector_kernel(theta, dec.projector_angle).p
    mix = np.array([[dec.relabel_lambda0, dec.relabel_lambda1],
                    [dec.relabel_lambda1, dec.relabel_lambda0]])
    return TransitionKernel(mix @ proj)


def gk_kernel(mean_photons: float, beta: float, association: Association) -> TransitionKernel:
    """Kernel of a Generalized Kennedy measurement (unit gain).

    ``q00 = exp(-beta^2)`` is the no-click probability on vacuum and
    ``q1a = 1 - exp(-(alpha - beta)^2)`` the click probability on the pulse.
    The inverted association swaps which outcome is credited to which qubit.
    """
    if mean_photons < 0:
        raise ValueError("mean photon number must be >= 0")
    alpha = math.sqrt(mean_photons)
    q00 = math.exp(-beta * beta)
    q1a = 1.0 - math.exp(-(alpha - beta) ** 2)
    if association is Association.DIRECT:
        p00, p11 = q00, q1a
    elif association is Association.INVERTED:
        p00, p11 = q1a, q00
    else:
        raise TypeError(f"unknown association {association!r}")
    return TransitionKernel([[p00, 1.0 - p11], [1.0 - p00, p11]])
