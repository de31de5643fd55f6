import math

import numpy as np
import pytest

from adaptive_ppm.baselines import (
    IcnParams,
    Scheme,
    binary_optimal_angle,
    binary_pc_at_angle,
    binary_pc_optimal,
    optimize_icn,
    pe_conditional_nulling,
    pe_direct_detection,
    pe_helstrom,
    pe_icn,
)
from adaptive_ppm.model import config_from_gamma, config_from_mean_photons


def test_helstrom_examples():
    assert pe_helstrom(config_from_mean_photons(2, 0.0)) == pytest.approx(0.5)
    assert pe_helstrom(config_from_mean_photons(5, 800.0)) == pytest.approx(0.0, abs=1e-15)
    # M = 2 simplifies to (1 - sqrt(1 - gamma^2)) / 2
    assert pe_helstrom(config_from_mean_photons(2, 1.0)) == pytest.approx(
        (1 - math.sqrt(1 - math.exp(-2))) / 2, abs=1e-15)
    assert pe_helstrom(config_from_mean_photons(2, 1.0)) == pytest.approx(0.03506325, abs=1e-8)


def test_direct_detection_and_nulling_examples():
    assert pe_direct_detection(config_from_mean_photons(4, 1.0)) == pytest.approx(0.27590958, abs=1e-8)
    assert pe_direct_detection(config_from_mean_photons(6, 0.0)) == pytest.approx(5 / 6)
    assert pe_conditional_nulling(config_from_mean_photons(4, 1.0)) == pytest.approx(
        ((1 - math.exp(-1)) ** 4 - 1 + 4 * math.exp(-1)) / 4, abs=1e-15)
    assert pe_conditional_nulling(config_from_mean_photons(4, 900.0)) == 0.0


def test_nulling_small_gamma_keeps_precision():
    g = 1e-9
    M = 8
    # series: (M(M-1)/2) g^2 / M to leading order
    assert pe_conditional_nulling(config_from_gamma(M, g)) == pytest.approx(
        (M - 1) / 2 * g * g, rel=1e-6)


def test_icn_validation():
    with pytest.raises(ValueError):
        IcnParams(0.3, 0.5)
    cfg = config_from_mean_photons(3, 1.0)
    with pytest.raises(ZeroDivisionError):
        pe_icn(cfg, IcnParams(40.0, 1.0))
    assert 0 <= pe_icn(cfg, IcnParams(0.0, 1.0)) <= 1


def test_icn_optimizers():
    cfg = config_from_mean_photons(4, 1.0)
    t1 = optimize_icn(cfg)
    t2 = optimize_icn(cfg, type_two=True)
    assert t1.scheme is Scheme.ICN_TYPE_I and t1.params.gain == 1.0
    assert t2.pe <= t1.pe + 1e-12
    assert t1.pe < pe_conditional_nulling(cfg)
    assert optimize_icn(config_from_mean_photons(3, 0.0)).pe == pytest.approx(2 / 3)


def test_icn_type_one_is_a_local_minimum():
    cfg = config_from_mean_photons(2, 1.0)
    res = optimize_icn(cfg)
    for db in (-1e-3, 1e-3):
        assert res.pe <= pe_icn(cfg, IcnParams(res.params.beta + db)) + 1e-15


@pytest.mark.parametrize("M", [2, 3, 4, 8])
@pytest.mark.parametrize("n", [0.25, 0.5, 1.0, 2.0, 3.0])
def test_baseline_ordering(M, n):
    cfg = config_from_mean_photons(M, n)
    hel = pe_helstrom(cfg)
    i2 = optimize_icn(cfg, True).pe
    i1 = optimize_icn(cfg).pe
    cn = pe_conditional_nulling(cfg)
    dd = pe_direct_detection(cfg)
    assert hel <= i2 <= i1 <= cn <= dd
    for pe in (hel, i2, i1, cn, dd):
        assert 0 <= pe <= 1 - 1 / M


def test_binary_examples():
    assert binary_pc_optimal(0.5, 0.5, 0.0) == 1.0
    assert binary_pc_optimal(0.3, 0.0, 0.7) == pytest.approx(0.3)
    # two PPM symbols overlap like one slot at twice the photon number
    cfg = config_from_mean_photons(2, 1.0)
    doubled = config_from_mean_photons(2, 2.0)
    assert binary_pc_optimal(0.5, 0.5, doubled) == pytest.approx(1 - pe_helstrom(cfg), abs=1e-15)
    assert binary_pc_optimal(0.5, 0.5, cfg) == pytest.approx(0.5 * (1 + math.sqrt(1 - math.exp(-1))))
    assert binary_optimal_angle(0.4, 0.4, 0.3) == pytest.approx(math.pi / 4)
    assert binary_optimal_angle(0.4, 0.0, 0.3) == pytest.approx(0.3)


def test_binary_angle_is_scan_optimal():
    theta = 0.5
    phi = np.linspace(-math.pi / 2, math.pi / 2, 100_001)
    best = binary_pc_at_angle(0.7, 0.3, theta, phi).max()
    star = binary_optimal_angle(0.7, 0.3, theta)
    assert binary_pc_at_angle(0.7, 0.3, theta, star) >= best - 1e-15


def test_corollary_identical_states(rng):
    for p0, p1 in rng.random((200, 2)) / 2:
        assert binary_pc_optimal(p0, p1, 1.0) == pytest.approx(max(p0, p1), abs=1e-12)
