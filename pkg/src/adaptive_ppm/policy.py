"""Explicit receiver strategies as perfect binary trees.

Level ``k`` of a :class:`PolicyTree` holds the ``2^k`` measurements of slot
``k+1``, indexed by the outcome prefix read as a binary number (first
outcome most significant). Leaves hold the symbol decisions.

Trees come from the forward retrace of a DP run or are hand-built
(direct detection, conditional nulling). :func:`exact_pc` enumerates all
``M 2^M`` (symbol, outcome sequence) pairs and is the reference evaluator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .dp import DpResult, optimize_at_state
from .model import Association, GeneralizedKennedy, ModulationConfig, Projective
from .tables import Family, RewardTable

__all__ = [
    "SystemState",
    "Node",
    "PolicyTree",
    "ExactEvaluation",
    "ControlMode",
    "TreeTooLargeError",
    "TreeParseError",
    "grow_tree",
    "retrace_forward",
    "exact_pc",
    "simulate",
    "path_joints",
    "joint_trajectory",
    "dd_tree",
    "cn_tree",
    "export_tree",
    "import_tree",
    "MAX_EXACT_M",
]

MAX_EXACT_M = 20
TREE_FORMAT_VERSION = 1


class TreeTooLargeError(ValueError):
    pass


class TreeParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class SystemState:
    """Joint probabilities of the leader and of each tail symbol with the prefix.

    ``hat_label`` is the 1-based leader symbol, or ``None`` before any slot
    has been measured.
    """

    p_hat: float
    p_tail: float
    hat_label: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "p_hat", float(self.p_hat))
        object.__setattr__(self, "p_tail", float(self.p_tail))
        if self.p_hat + self.p_tail > 1 + 1e-12:
            raise ValueError("joint probabilities of leader and tail exceed one")


@dataclass(frozen=True)
class Node:
    level: int
    path: int
    control: object
    state: SystemState


@dataclass(frozen=True, eq=False)
class PolicyTree:
    M: int
    family: Family
    levels: tuple  # levels[k][path] -> Node
    decisions: tuple  # 1-based symbol per leaf, indexed by path
    meta: Optional[dict] = None

    def __post_init__(self):
        if len(self.levels) != self.M:
            raise ValueError(f"a depth-{self.M} tree needs {self.M} internal levels")
        for k, level in enumerate(self.levels):
            if len(level) != 2**k:
                raise ValueError(f"level {k} must hold {2**k} nodes, has {len(level)}")
        if len(self.decisions) != 2**self.M:
            raise ValueError(f"a depth-{self.M} tree needs {2**self.M} leaves")
        if any(not 1 <= d <= self.M for d in self.decisions):
            raise ValueError("leaf decisions must be symbols 1..M")

    def node(self, level: int, path: int) -> Node:
        return self.levels[level][path]

    def kernels(self, cfg: ModulationConfig) -> list:
        """Per level, an array ``(2^k, 2, 2)`` of node transition kernels."""
        return [np.array([n.control.kernel(cfg).p for n in level]) for level in self.levels]

    def structurally_equal(self, other: "PolicyTree") -> bool:
        return (self.M == other.M and self.family == other.family
                and self.decisions == other.decisions and self.levels == other.levels)


@dataclass(frozen=True)
class ExactEvaluation:
    """Exact outcome statistics of a tree.

    ``joint[x, path]`` is the joint probability of symbol ``x+1`` and the
    full outcome sequence ``path``.
    """

    pc: float
    joint: np.ndarray
    per_symbol_pc: np.ndarray
    map_pc: float


class ControlMode(Enum):
    """How the retrace picks a node's control.

    ``LOOKUP`` reads the stored optimal control of the stage table at the
    node's exact state (interpolated per the grid's mode); ``REOPTIMIZE``
    re-maximizes the one-step objective at the exact state using the
    successor table's values.
    """

    LOOKUP = "lookup"
    REOPTIMIZE = "reoptimize"


def _children(state: SystemState, kern: np.ndarray, k: int, M: int):
    """States after measuring slot ``k+1`` (0-based level ``k``) with kernel ``kern``."""
    out = []
    for z in (0, 1):
        if state.hat_label is None:
            out.append(SystemState(kern[z, 1] / M, kern[z, 0] / M, 1))
            continue
        keep, switch = kern[z, 0] * state.p_hat, kern[z, 1] * state.p_tail
        # MAP leader update; ties keep the incumbent
        if switch > keep:
            out.append(SystemState(switch, kern[z, 0] * state.p_tail, k + 1))
        else:
            out.append(SystemState(keep, kern[z, 0] * state.p_tail, state.hat_label))
    return out


def grow_tree(cfg: ModulationConfig, family: Family,
              control_fn: Callable[[int, int, SystemState], object],
              decide_fn: Optional[Callable[[int, SystemState], int]] = None,
              meta: Optional[dict] = None) -> PolicyTree:
    """Build a tree level by level from a control rule.

    ``control_fn(level, path, state)`` returns the node measurement. States
    follow the MAP leader update. Leaves use ``decide_fn(path, last_state)``
    if given, else the rule: a final outcome 1 elects slot ``M``, otherwise
    the leader stands.
    """
    M = cfg.M
    levels = []
    frontier = [SystemState(1.0 / M, 1.0 / M, None)]
    for k in range(M):
        nodes, nxt = [], []
        for path, state in enumerate(frontier):
            control = control_fn(k, path, state)
            nodes.append(Node(k, path, control, state))
            if k < M - 1:
                nxt.extend(_children(state, control.kernel(cfg).p, k, M))
        levels.append(tuple(nodes))
        frontier = nxt
    decisions = []
    for node in levels[-1]:
        for z in (0, 1):
            path = 2 * node.path + z
            if decide_fn is not None:
                decisions.append(int(decide_fn(path, node.state)))
            else:
                decisions.append(M if z == 1 or node.state.hat_label is None else node.state.hat_label)
    return PolicyTree(M, family, tuple(levels), tuple(decisions), meta)


def _lookup_control(table: RewardTable, u: float, v: float):
    grid = table.grid
    fx = min(max(u / grid.du, 0.0), grid.n_u - 1)
    fy = min(max(v / grid.dv, 0.0), grid.n_v - 1)
    i0, j0 = table.nearest_index(u, v)
    if grid.nearest:
        x = float(table.controls[i0, j0])
        assoc = int(table.association[i0, j0]) if table.association is not None else 0
        return x, assoc
    i = min(int(fx), grid.n_u - 2)
    j = min(int(fy), grid.n_v - 2)
    t, s = fx - i, fy - j
    idx = [(i, j), (i, j + 1), (i + 1, j), (i + 1, j + 1)]
    w = np.array([(1 - t) * (1 - s), (1 - t) * s, t * (1 - s), t * s])
    ctrl = np.array([table.controls[a, b] for a, b in idx])
    if table.family is Family.PROJECTIVE:
        # angles live on a circle of period pi: average the doubled-angle unit vectors
        c = np.dot(w, np.cos(2 * ctrl))
        sn = np.dot(w, np.sin(2 * ctrl))
        return 0.5 * math.atan2(sn, c), 0
    assoc0 = int(table.association[i0, j0])
    same = np.array([table.association[a, b] == assoc0 for a, b in idx])
    w = w * same
    return float(np.dot(w, ctrl) / w.sum()), assoc0


def _as_control(family: Family, x: float, assoc: int):
    if family is Family.PROJECTIVE:
        return Projective(x)
    return GeneralizedKennedy(x, Association.DIRECT if assoc == 0 else Association.INVERTED)


def retrace_forward(result: DpResult, mode: ControlMode = ControlMode.LOOKUP) -> PolicyTree:
    """Rebuild the explicit strategy tree from a backward pass.

    The root uses the first-slot control; deeper nodes take their control
    from ``J*_k`` at the node's exact (unclamped) state, per ``mode``.
    States out of the table domain are clamped and counted in ``meta``.
    """
    cfg, family, grid = result.cfg, result.family, result.grid
    clamped = [0]

    def control_fn(level, path, state):
        if level == 0:
            return result.control0
        if not grid.contains(state.p_hat, state.p_tail):
            clamped[0] += 1
        if mode is ControlMode.LOOKUP:
            x, assoc = _lookup_control(result.table(level), state.p_hat, state.p_tail)
            return _as_control(family, x, assoc)
        successor = None if level == cfg.M - 1 else result.table(level + 1)
        control, _ = optimize_at_state(successor, cfg, family, state.p_hat, state.p_tail,
                                       result.search)
        return control

    tree = grow_tree(cfg, family, control_fn, meta={"mode": mode.value})
    tree.meta["clamped"] = clamped[0]
    return tree


def _joint(tree: PolicyTree, cfg: ModulationConfig) -> np.ndarray:
    M = tree.M
    probs = np.full((M, 1), 1.0 / M)
    symbols = np.arange(M)
    for k, kern in enumerate(tree.kernels(cfg)):
        qubit = (symbols == k).astype(np.intp)
        # step[x, path, z] = P(z | qubit of symbol x in slot k+1) at node `path`
        step = np.transpose(kern[:, :, qubit], (2, 0, 1))
        probs = (probs[:, :, None] * step).reshape(M, -1)
    return probs


def exact_pc(tree: PolicyTree, cfg: ModulationConfig) -> ExactEvaluation:
    """Exact correct-decision probability by full enumeration."""
    if tree.M > MAX_EXACT_M:
        raise TreeTooLargeError(f"exact enumeration limited to M <= {MAX_EXACT_M}")
    if cfg.M != tree.M:
        raise ValueError(f"tree depth {tree.M} does not match M={cfg.M}")
    joint = _joint(tree, cfg)
    dec = np.asarray(tree.decisions) - 1
    paths = np.arange(joint.shape[1])
    hit = joint[dec, paths]
    per_symbol = np.array([tree.M * hit[dec == x].sum() for x in range(tree.M)])
    return ExactEvaluation(float(hit.sum()), joint, per_symbol, float(joint.max(axis=0).sum()))


def simulate(tree: PolicyTree, cfg: ModulationConfig, trials: int, seed: int = 0,
             chunk: int = 1_000_000) -> tuple[float, float]:
    """Monte Carlo estimate of the correct-decision rate and its standard error."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    kernels = tree.kernels(cfg)
    decisions = np.asarray(tree.decisions)
    correct = 0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        x = rng.integers(0, tree.M, size=n)
        node = np.zeros(n, dtype=np.intp)
        for k, kern in enumerate(kernels):
            p0 = kern[node, 0, (x == k).astype(np.intp)]
            z = (rng.random(n) >= p0).astype(np.intp)
            node = 2 * node + z
        correct += int(np.count_nonzero(decisions[node] - 1 == x))
        done += n
    p = correct / trials
    return p, math.sqrt(p * (1 - p) / trials)


def path_joints(kernels: Sequence[np.ndarray], outcomes: Sequence[int], M: int) -> np.ndarray:
    """Joint probabilities of every symbol with each prefix of ``outcomes``.

    ``kernels[k]`` is the 2x2 kernel applied in slot ``k+1``. Row ``k`` of
    the result holds ``p(x, z_1..z_k)`` for ``x = 1..M``.
    """
    out = np.empty((len(outcomes) + 1, M))
    out[0] = 1.0 / M
    for k, (kern, z) in enumerate(zip(kernels, outcomes)):
        qubit = (np.arange(M) == k).astype(np.intp)
        out[k + 1] = out[k] * np.asarray(kern)[z, qubit]
    return out


def joint_trajectory(tree: PolicyTree, cfg: ModulationConfig, path: int) -> np.ndarray:
    """:func:`path_joints` along the tree path with leaf index ``path``."""
    M = tree.M
    bits = [(path >> (M - 1 - k)) & 1 for k in range(M)]
    kernels = [tree.node(k, path >> (M - k)).control.kernel(cfg).p for k in range(M)]
    return path_joints(kernels, bits, M)


def dd_tree(cfg: ModulationConfig) -> PolicyTree:
    """Direct detection: every slot measured along ``|g0>``; decide the clicking slot.

    Without any click all symbols tie and the lowest index is chosen.
    """
    def decide(path, _state):
        for k in range(cfg.M - 1, -1, -1):
            if (path >> (cfg.M - 1 - k)) & 1:
                return k + 1
        return 1

    return grow_tree(cfg, Family.PROJECTIVE, lambda *_: Projective(cfg.theta), decide)


def cn_tree(cfg: ModulationConfig) -> PolicyTree:
    """Conditional nulling.

    The hypothesis starts at symbol 1 and its slot is nulled. A click moves
    the hypothesis to the next slot, which is nulled in turn; no click
    confirms it and the remaining slots are direct-detected, a click there
    replacing the hypothesis with the clicking slot.
    """
    M = cfg.M

    def nulling(level, path):
        return path == 2**level - 1  # every earlier outcome clicked

    def control(level, path, _state):
        return Projective(-cfg.theta if nulling(level, path) else cfg.theta)

    def decide(path, _state):
        bits = [(path >> (M - 1 - k)) & 1 for k in range(M)]
        hyp = None
        for k, z in enumerate(bits):
            if hyp is None:
                if z == 0:
                    hyp = k + 1
            elif z == 1:
                hyp = k + 1
        return M if hyp is None else hyp

    return grow_tree(cfg, Family.PROJECTIVE, control, decide)


# ---------------------------------------------------------------- text format

_HEADER = "adaptive-ppm-tree"


def export_tree(tree: PolicyTree) -> str:
    """Versioned line format: a header, then one line per node and per leaf."""
    lines = [f"{_HEADER} {TREE_FORMAT_VERSION}", f"M={tree.M} family={tree.family.value}"]
    for level in tree.levels:
        for n in level:
            bits = format(n.path, f"0{n.level}b") if n.level else "-"
            c = n.control
            if isinstance(c, Projective):
                ctrl = f"phi={c.phi!r}"
            else:
                ctrl = f"beta={c.beta!r} assoc={c.association.value}"
            label = n.state.hat_label if n.state.hat_label is not None else "unset"
            lines.append(f"node level={n.level} path={bits} {ctrl} p_hat={n.state.p_hat!r} "
                         f"p_tail={n.state.p_tail!r} label={label}")
    for path, d in enumerate(tree.decisions):
        lines.append(f"leaf level={tree.M} path={format(path, f'0{tree.M}b')} decision={d}")
    return "\n".join(lines) + "\n"


def _fields(tokens, lineno):
    out = {}
    for tok in tokens:
        key, sep, val = tok.partition("=")
        if not sep:
            raise TreeParseError(lineno, f"expected key=value, got {tok!r}")
        out[key] = val
    return out


def import_tree(text: str) -> PolicyTree:
    """Parse the output of :func:`export_tree`."""
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise TreeParseError(1, "empty tree document")
    lineno, head = lines[0]
    parts = head.split()
    if len(parts) != 2 or parts[0] != _HEADER:
        raise TreeParseError(lineno, f"expected '{_HEADER} <version>' header")
    if parts[1] != str(TREE_FORMAT_VERSION):
        raise TreeParseError(lineno, f"unsupported format version {parts[1]!r}")
    if len(lines) < 2:
        raise TreeParseError(lineno, "missing M/family line")
    lineno, spec = lines[1]
    f = _fields(spec.split(), lineno)
    try:
        M = int(f["M"])
        family = Family(f["family"])
    except (KeyError, ValueError) as exc:
        raise TreeParseError(lineno, f"bad tree description: {exc}") from None
    levels = [dict() for _ in range(M)]
    decisions = {}
    for lineno, ln in lines[2:]:
        kind, *rest = ln.split()
        f = _fields(rest, lineno)
        try:
            level = int(f["level"])
            path = 0 if f["path"] == "-" else int(f["path"], 2)
            if kind == "node":
                if not 0 <= level < M:
                    raise ValueError(f"level {level} out of range")
                if family is Family.PROJECTIVE:
                    control = Projective(float(f["phi"]))
                else:
                    control = GeneralizedKennedy(float(f["beta"]), Association(f["assoc"]))
                label = None if f["label"] == "unset" else int(f["label"])
                state = SystemState(float(f["p_hat"]), float(f["p_tail"]), label)
                levels[level][path] = Node(level, path, control, state)
            elif kind == "leaf":
                if level != M:
                    raise ValueError(f"leaf level must be {M}")
                decisions[path] = int(f["decision"])
            else:
                raise ValueError(f"unknown record kind {kind!r}")
        except (KeyError, ValueError) as exc:
            raise TreeParseError(lineno, str(exc)) from None
    try:
        lv = tuple(tuple(level[p] for p in range(2**k)) for k, level in enumerate(levels))
        dec = tuple(decisions[p] for p in range(2**M))
    except KeyError as exc:
        raise TreeParseError(lines[-1][0], f"incomplete tree: missing path {exc.args[0]}") from None
    try:
        return PolicyTree(M, family, lv, dec)
    except ValueError as exc:
        raise TreeParseError(lines[-1][0], str(exc)) from None
