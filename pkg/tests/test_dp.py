import math

import numpy as np
import pytest

from adaptive_ppm import config_from_gamma, config_from_mean_photons
from adaptive_ppm.baselines import (
    binary_optimal_angle,
    binary_pc_optimal,
    optimize_icn,
    pe_helstrom,
)
from adaptive_ppm.dp import (
    InvalidGridError,
    backward_step,
    last_stage_table,
    optimize_at_state,
    reuse_tables,
    run_backward,
)
from adaptive_ppm.tables import Branch, Family, GridSpec, Interpolation


@pytest.fixture(scope="module")
def run4():
    cfg = config_from_mean_photons(4, 1.0)
    return run_backward(cfg, GridSpec.for_cardinality(4, 120))


def test_last_stage_matches_binary_lemma():
    cfg = config_from_mean_photons(3, 0.8)
    t = last_stage_table(cfg, GridSpec.for_cardinality(3, 31))
    u, v = t.grid.axes()
    for i in range(0, 31, 5):
        for j in range(0, 31, 6):
            assert t.values[i, j] == pytest.approx(binary_pc_optimal(u[i], v[j], cfg), abs=1e-15)
            if u[i] + v[j] > 0:
                assert t.controls[i, j] == pytest.approx(
                    binary_optimal_angle(u[i], v[j], cfg.theta), abs=1e-12)
    assert t.values[0, 0] == 0.0
    assert np.allclose(t.values[:, 0], u, atol=1e-15)
    assert (t.branch == Branch.B.value).all()


def test_last_stage_is_homogeneous():
    cfg = config_from_mean_photons(4, 1.0)
    t = last_stage_table(cfg, GridSpec.for_cardinality(4, 101))
    # J(u/2, v/2) = J(u, v) / 2: even-indexed nodes halve exactly
    assert np.allclose(t.values[:51:1, :51:1] * 2, t.values[::2, ::2], atol=1e-15)


def test_table_invariants(run4):
    u, v = run4.grid.axes()
    uu, vv = np.meshgrid(u, v, indexing="ij")
    for t in run4.tables:
        assert t.values.min() >= -1e-15 and t.values.max() <= 1 + 1e-12
        assert (np.diff(t.values, axis=0) >= -1e-12).all()
        assert (np.diff(t.values, axis=1) >= -1e-12).all()
        assert (t.values >= np.maximum(uu, vv) - 1e-12).all()
        assert t.clamped == 0
    # an extra adaptive slot never hurts
    for later, earlier in zip(run4.tables, run4.tables[1:]):
        assert (earlier.values >= later.values - 1e-12).all()
    assert run4.n_clamped == 0


def test_zero_tail_row_keeps_leader(run4):
    u, _ = run4.grid.axes()
    for t in run4.tables:
        assert np.allclose(t.values[:, 0], u, atol=1e-12)


def test_extra_slot_strictly_helps_at_start(run4):
    s = 0.25
    assert run4.table(1)(s, s) > run4.table(3)(s, s) + 1e-4


@pytest.mark.parametrize("M", [2, 3])
def test_indistinguishable_states_give_prior_guessing(M):
    cfg = config_from_gamma(M, 1.0)
    # lookups overshoot the kink of max(u, v) by at most a grid step per stage;
    # for M = 2 the nearest lookups stay on the diagonal, where they are exact
    near = run_backward(cfg, GridSpec.for_cardinality(M, 40, Interpolation.NEAREST))
    res = run_backward(cfg, GridSpec.for_cardinality(M, 40))
    for r in (near, res):
        assert 1 / M - 1e-12 <= r.pc <= 1 / M + (M - 1) * r.grid.du
    if M == 2:
        assert near.pc == pytest.approx(0.5, abs=1e-12)
    fine = run_backward(cfg, GridSpec.for_cardinality(M, 1000))
    assert fine.pc == pytest.approx(1 / M, abs=(M - 1) * fine.grid.du)
    u, v = res.grid.axes()
    uu, vv = np.meshgrid(u, v, indexing="ij")
    assert np.allclose(res.tables[0].values, np.maximum(uu, vv), atol=1e-12)
    assert np.allclose(res.tables[-1].values, np.maximum(uu, vv), atol=(M - 1) * res.grid.du)


def test_m2_reaches_helstrom_small_grid():
    cfg = config_from_mean_photons(2, 1.0)
    res = run_backward(cfg, GridSpec.for_cardinality(2, 200))
    assert res.pe == pytest.approx(pe_helstrom(cfg), abs=5e-4)
    assert 1 - res.pc >= pe_helstrom(cfg) - 1e-5


def test_m4_between_helstrom_and_icn(run4):
    cfg = run4.cfg
    assert pe_helstrom(cfg) < run4.pe < optimize_icn(cfg, True).pe


def test_grid_convergence():
    cfg = config_from_mean_photons(3, 1.0)
    pcs = [run_backward(cfg, GridSpec.for_cardinality(3, n)).pc for n in (60, 120, 240)]
    assert abs(pcs[2] - pcs[1]) <= abs(pcs[1] - pcs[0]) + 1e-6
    assert abs(pcs[2] - pcs[1]) <= 5e-4


def test_backward_step_needs_successor():
    cfg = config_from_mean_photons(3, 1.0)
    t = last_stage_table(cfg, GridSpec.for_cardinality(3, 10), stage=1)
    with pytest.raises(ValueError):
        backward_step(t, cfg)


def test_reuse_tables_identity_and_grid_check(run4):
    assert reuse_tables(run4, 4) == pytest.approx(run4.pc, abs=1e-15)
    with pytest.raises(InvalidGridError):
        reuse_tables(run4, 2)
    with pytest.raises(InvalidGridError):
        run_backward(run4.cfg, GridSpec.for_cardinality(5, 20))


def test_reuse_tables_small():
    cfg8 = config_from_mean_photons(5, 1.0)
    big = run_backward(cfg8, GridSpec.square(1 / 3, 150))
    direct = run_backward(config_from_mean_photons(3, 1.0), GridSpec.for_cardinality(3, 150))
    assert reuse_tables(big, 3) == pytest.approx(direct.pc, abs=1e-3)


def test_optimize_at_state_reproduces_table(run4):
    t2, t3 = run4.table(2), run4.table(3)
    u, v = t2.grid.axes()
    for i, j in [(30, 50), (100, 20), (119, 119)]:
        _, val = optimize_at_state(t3, run4.cfg, Family.PROJECTIVE, u[i], v[j])
        assert val == pytest.approx(t2.values[i, j], abs=1e-12)
    ctrl, val = optimize_at_state(None, run4.cfg, Family.PROJECTIVE, 0.1, 0.05)
    assert val == pytest.approx(binary_pc_optimal(0.1, 0.05, run4.cfg), abs=1e-12)
    assert math.isclose(ctrl.phi, binary_optimal_angle(0.1, 0.05, run4.cfg.theta), abs_tol=1e-6)
