import math

import numpy as np
import pytest

from adaptive_ppm import config_from_gamma, config_from_mean_photons
from adaptive_ppm.baselines import pe_conditional_nulling, pe_direct_detection
from adaptive_ppm.dp import run_backward
from adaptive_ppm.gk import gk_run_backward
from adaptive_ppm.model import Projective, projector_kernel
from adaptive_ppm.policy import (
    ControlMode,
    PolicyTree,
    TreeParseError,
    TreeTooLargeError,
    cn_tree,
    dd_tree,
    exact_pc,
    export_tree,
    grow_tree,
    import_tree,
    joint_trajectory,
    path_joints,
    retrace_forward,
    simulate,
)
from adaptive_ppm.tables import Family, GridSpec


@pytest.fixture(scope="module")
def retraced3():
    cfg = config_from_mean_photons(3, 1.0)
    res = run_backward(cfg, GridSpec.for_cardinality(3, 150))
    return cfg, res, retrace_forward(res)


def test_tree_structure():
    cfg = config_from_mean_photons(2, 1.0)
    res = run_backward(cfg, GridSpec.for_cardinality(2, 50))
    tree = retrace_forward(res)
    assert [len(level) for level in tree.levels] == [1, 2]
    assert len(tree.decisions) == 4
    assert tree.node(0, 0).control == res.control0
    assert tree.node(0, 0).state.hat_label is None
    # leaf rule: a final click elects slot M, otherwise the leader stands
    for path, d in enumerate(tree.decisions):
        if path & 1:
            assert d == 2
        else:
            assert d == tree.node(1, path >> 1).state.hat_label
    with pytest.raises(ValueError):
        PolicyTree(2, Family.PROJECTIVE, tree.levels[:1], tree.decisions)


def test_labels_resolved_and_updated_only_to_current_slot(retraced3):
    _, _, tree = retraced3
    for k in range(1, tree.M):
        for node in tree.levels[k]:
            assert node.state.hat_label is not None
            parent = tree.node(k - 1, node.path >> 1)
            if k > 1 and node.state.hat_label != parent.state.hat_label:
                assert node.state.hat_label == k


def test_identical_states_tree_guesses_first_symbol():
    cfg = config_from_gamma(3, 1.0)
    res = run_backward(cfg, GridSpec.for_cardinality(3, 30))
    tree = retrace_forward(res)
    for path, d in enumerate(tree.decisions):
        if not path & 1:
            assert d == 1
    assert exact_pc(tree, cfg).pc == pytest.approx(1 / 3, abs=1e-12)


@pytest.mark.parametrize("M", [2, 3, 4, 8])
@pytest.mark.parametrize("n", [0.5, 1.0, 2.0])
def test_hand_built_trees_match_closed_forms(M, n):
    cfg = config_from_mean_photons(M, n)
    assert exact_pc(dd_tree(cfg), cfg).pc == pytest.approx(1 - pe_direct_detection(cfg), abs=1e-12)
    assert exact_pc(cn_tree(cfg), cfg).pc == pytest.approx(1 - pe_conditional_nulling(cfg), abs=1e-12)


def test_exact_evaluation_fields():
    cfg = config_from_mean_photons(4, 1.0)
    ev = exact_pc(cn_tree(cfg), cfg)
    assert ev.joint.shape == (4, 16)
    assert ev.joint.sum() == pytest.approx(1.0, abs=1e-12)
    assert ev.per_symbol_pc.mean() == pytest.approx(ev.pc, abs=1e-12)
    assert ev.map_pc >= ev.pc - 1e-15
    assert exact_pc(dd_tree(config_from_gamma(2, 1.0)), config_from_gamma(2, 1.0)).pc == \
        pytest.approx(0.5)


def test_exact_guard():
    cfg = config_from_mean_photons(21, 1.0)
    fake = PolicyTree.__new__(PolicyTree)
    object.__setattr__(fake, "M", 21)
    with pytest.raises(TreeTooLargeError):
        exact_pc(fake, cfg)


def test_simulation_dd_and_determinism():
    cfg = config_from_mean_photons(4, 1.0)
    tree = dd_tree(cfg)
    p, se = simulate(tree, cfg, 200_000, seed=7)
    assert abs(p - (1 - pe_direct_detection(cfg))) <= 3 * se
    assert simulate(tree, cfg, 200_000, seed=7) == (p, se)
    with pytest.raises(ValueError):
        simulate(tree, cfg, 0)


def test_simulation_orthogonal_states():
    cfg = config_from_mean_photons(3, 800.0)
    p, se = simulate(cn_tree(cfg), cfg, 10_000, seed=1)
    assert p == 1.0 and se == 0.0


def test_retrace_gap_and_cn_dominance(retraced3):
    cfg, res, tree = retraced3
    ev = exact_pc(tree, cfg)
    assert abs(res.pc - ev.pc) <= 1e-3
    assert ev.pc >= exact_pc(cn_tree(cfg), cfg).pc
    assert tree.meta["clamped"] == 0
    re = exact_pc(retrace_forward(res, ControlMode.REOPTIMIZE), cfg)
    assert abs(res.pc - re.pc) <= 1e-3


def test_gk_retrace():
    cfg = config_from_mean_photons(3, 1.0)
    res = gk_run_backward(cfg, GridSpec.for_cardinality(3, 80))
    ev = exact_pc(retrace_forward(res), cfg)
    assert abs(res.pc - ev.pc) <= 1e-3


def _random_kernels(rng, M):
    return [projector_kernel(rng.uniform(0, math.pi / 4), rng.uniform(-2, 2)).p
            if rng.random() < 0.5 else _random_povm(rng) for _ in range(M)]


def _random_povm(rng):
    # a POVM kernel on random slot states
    from adaptive_ppm.model import povm_kernel
    r, a = math.sqrt(rng.random()), rng.uniform(-math.pi, math.pi)
    return povm_kernel(rng.uniform(0, math.pi / 4), r * math.cos(a), r * math.sin(a)).p


def test_lemma_properties_random_paths(rng):
    for _ in range(2000):
        M = int(rng.integers(2, 9))
        kernels = _random_kernels(rng, M)
        z = rng.integers(0, 2, M)
        J = path_joints(kernels, z, M)
        for k in range(M + 1):
            # symbols not yet measured share the same joint probability
            tail = J[k, k:]
            if tail.size:
                assert np.ptp(tail) <= 1e-12
            # joint probabilities never increase
            if k:
                assert (J[k] <= J[k - 1] + 1e-12).all()
                assert (J[k] <= 1 / M + 1e-12).all()
            # ordering among already measured symbols is preserved
            for later in range(k + 1, M + 1):
                a, b = J[k, :k], J[later, :k]
                sa = np.sign(a[:, None] - a[None, :])
                sb = np.sign(b[:, None] - b[None, :])
                strict = sa != 0
                assert (sb[strict] == sa[strict]).all() | (np.abs(b[:, None] - b[None, :])[strict] <= 1e-12).all()


def test_tree_trajectories_respect_lemmas(retraced3):
    cfg, _, tree = retraced3
    for path in range(2**cfg.M):
        J = joint_trajectory(tree, cfg, path)
        assert (np.diff(J, axis=0) <= 1e-12).all()
        # node states track the joint of their leader and of the tail
        for k in range(1, cfg.M):
            node = tree.node(k, path >> (cfg.M - k))
            assert node.state.p_hat == pytest.approx(J[k, node.state.hat_label - 1], abs=1e-12)
            assert node.state.p_tail == pytest.approx(J[k, -1], abs=1e-12)


def test_export_import_roundtrip(retraced3):
    _, _, tree = retraced3
    text = export_tree(tree)
    assert text.startswith("adaptive-ppm-tree 1\n")
    back = import_tree(text)
    assert back.structurally_equal(tree)
    cfg = config_from_mean_photons(3, 0.7)
    res = gk_run_backward(cfg, GridSpec.for_cardinality(3, 20))
    gk_tree = retrace_forward(res)
    assert import_tree(export_tree(gk_tree)).structurally_equal(gk_tree)


CN_M2_FIXTURE = """\
adaptive-ppm-tree 1
M=2 family=projective
# conditional nulling for M=2 at |alpha|^2 = 1: null slot 1, then
# null slot 2 after a click or direct-detect it after no click
node level=0 path=- phi=-0.4595533286467942 p_hat=0.5 p_tail=0.5 label=unset
node level=1 path=0 phi=0.4595533286467942 p_hat=0.5 p_tail=0.18393972058572117 label=1
node level=1 path=1 phi=-0.4595533286467942 p_hat=0.0 p_tail=0.3160602794142788 label=1
leaf level=2 path=00 decision=1
leaf level=2 path=01 decision=2
leaf level=2 path=10 decision=2
leaf level=2 path=11 decision=2
"""


def test_cn_fixture_imports():
    tree = import_tree(CN_M2_FIXTURE)
    cfg = config_from_mean_photons(2, 1.0)
    assert exact_pc(tree, cfg).pc == pytest.approx(1 - pe_conditional_nulling(cfg), abs=1e-12)


@pytest.mark.parametrize("text,line", [
    ("", 1),
    ("something else 1\n", 1),
    ("adaptive-ppm-tree 9\n", 1),
    ("adaptive-ppm-tree 1\nM=2 family=projective\nnode level=0 path=- phi=x p_hat=0 p_tail=0 label=unset\n", 3),
    ("adaptive-ppm-tree 1\nM=2 family=projective\nbogus level=0\n", 3),
    ("adaptive-ppm-tree 1\nM=2 family=projective\nnode level=0 path=- phi=0.1 p_hat=0.5 p_tail=0.5 label=unset\n", 3),
])
def test_import_errors_report_line(text, line):
    with pytest.raises(TreeParseError) as info:
        import_tree(text)
    assert info.value.lineno == line


def test_grow_tree_custom_rule():
    cfg = config_from_mean_photons(3, 1.0)
    tree = grow_tree(cfg, Family.PROJECTIVE, lambda *_: Projective(cfg.theta))
    # with the default leaf rule direct detection loses nothing to MAP
    ev = exact_pc(tree, cfg)
    assert ev.pc == pytest.approx(ev.map_pc, abs=1e-15)
