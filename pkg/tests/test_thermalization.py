import json
import math

import numpy as np
import pytest

from shell_lab.drivers import AlphaStable, Brownian, CompoundPoisson, GaussOU, StableOU
from shell_lab.lattice import LatticeParams, unit_vector
from shell_lab.thermalization import (REPORT_COLUMNS, ConstraintError, CutoffConfig, bound_report, cutoff_time,
                                      scaled_driver, small_noise_profile, window_scan)


def gaussian_cfg(**kw):
    base = dict(epsilons=[0.1], offsets_r=[0.0], p=2, norm_samples=4000)
    return CutoffConfig(LatticeParams(1.0, 48), Brownian(1.0), unit_vector(1, 48), **{**base, **kw})


def empirical_cfg(spec, **kw):
    base = dict(epsilons=[0.3], offsets_r=[0.0, 1.0], p=1, mc_samples=128, dt=4e-3)
    return CutoffConfig(LatticeParams(1.0, 16), spec, unit_vector(1, 16), **{**base, **kw})


def test_cutoff_time_examples():
    assert cutoff_time(1.0, 0.7) == 0.0
    assert cutoff_time(math.exp(-1), 1.0) == pytest.approx(1.0)
    assert cutoff_time(0.01, 2.0) == pytest.approx(2.302585, abs=1e-6)
    with pytest.raises(ValueError):
        cutoff_time(0.0, 1.0)


def test_gaussian_example_row():
    rep = bound_report(gaussian_cfg())
    (row,) = rep.rows
    assert row.lower == 1.0
    assert row.upper == pytest.approx(1 + rep.mean_limit_norm)
    assert row.lower < row.measured < row.upper
    assert rep.passed


def test_zero_state_only_upper_bound():
    cfg = gaussian_cfg(offsets_r=[0.0, 1.0])
    cfg.x0 = np.zeros(48)
    rep = bound_report(cfg)
    for row in rep.rows:
        assert row.lower == 0.0
        assert row.measured <= math.exp(-row.r) * rep.mean_limit_norm + 3 * row.mc_error


def test_lower_bound_linear_in_state():
    a = bound_report(gaussian_cfg(offsets_r=[0.0, 1.0]))
    cfg = gaussian_cfg(offsets_r=[0.0, 1.0])
    cfg.x0 = 2 * cfg.x0
    b = bound_report(cfg)
    for ra, rb in zip(a.rows, b.rows):
        assert rb.lower == 2 * ra.lower


def test_lower_bound_ignores_amplitude():
    a = bound_report(gaussian_cfg())
    b = bound_report(CutoffConfig(LatticeParams(1.0, 48), Brownian(3.0), unit_vector(1, 48), epsilons=[0.1],
                                  offsets_r=[0.0], p=2, norm_samples=4000))
    assert a.rows[0].lower == b.rows[0].lower


@pytest.mark.parametrize("spec", [AlphaStable(1.5, 1.0), GaussOU(1.0, 1.0), StableOU(1.5, 1.0, 1.0),
                                  CompoundPoisson(2.0, 0.5)], ids=lambda s: s.variant)
def test_empirical_sandwich_small(spec):
    rep = bound_report(empirical_cfg(spec))
    assert rep.passed, rep.to_csv()
    for row in rep.rows:
        assert row.tail >= -1e-12


def test_report_deterministic_and_worker_invariant():
    a = bound_report(empirical_cfg(GaussOU(1.0, 1.0), workers=1))
    b = bound_report(empirical_cfg(GaussOU(1.0, 1.0), workers=2))
    assert a.to_csv() == b.to_csv()
    assert a.to_csv() != bound_report(empirical_cfg(GaussOU(1.0, 1.0), seed=1)).to_csv()


def test_report_serialisation():
    rep = bound_report(gaussian_cfg(offsets_r=[0.0, 1.0]))
    lines = rep.to_csv().splitlines()
    assert lines[0] == ",".join(REPORT_COLUMNS) and len(lines) == 3
    doc = json.loads(rep.to_json())
    assert doc["columns"] == list(REPORT_COLUMNS)
    assert doc["rows"][1]["measured"] == rep.rows[1].measured


def test_constraints():
    with pytest.raises(ConstraintError):
        gaussian_cfg(epsilons=[0.1], offsets_r=[-3.0])  # t_eps = 2.30
    with pytest.raises(ConstraintError):
        empirical_cfg(AlphaStable(1.5, 1.0), p=1.5)
    with pytest.raises(ConstraintError):
        gaussian_cfg(p=3)
    with pytest.raises(ConstraintError):
        empirical_cfg(GaussOU(), mc_samples=127)
    with pytest.raises(ConstraintError):
        gaussian_cfg(epsilons=[1.5])
    with pytest.raises(ConstraintError):
        gaussian_cfg(leading_modes=0)


def test_gaussian_measured_stabilises_over_time_grid():
    # measured / exp(-nu r) at fixed r tends to a limit as eps -> 0
    rep = bound_report(gaussian_cfg(epsilons=[0.1, 0.01, 0.001], offsets_r=[0.0]))
    vals = [r.measured for r in rep.rows]
    assert abs(vals[2] - vals[1]) < abs(vals[1] - vals[0])
    assert all(1.0 <= v for v in vals)


def test_window_scan_edges():
    s = window_scan(gaussian_cfg(epsilons=[0.01], offsets_r=[-1.0, 1.0]))
    assert s.passed and s.monotone
    assert s.spread >= s.spread_bound * (1 - 1e-6)
    assert s.ratios[s.offsets.index(0.0)] == 1.0


def test_small_noise_profile():
    cfg = gaussian_cfg(epsilons=[1e-1, 1e-2, 1e-3], offsets_r=[-1.0, 0.0, 1.0])
    prof = small_noise_profile(cfg)
    assert prof.passed
    row = next(r for r in prof.rows if r.epsilon == 1e-3 and r.r == 0.0)
    assert 1.0 <= row.value <= 1.0 + 1e-3 * prof.mean_limit_norm + 1e-6
    with pytest.raises(ConstraintError):
        small_noise_profile(empirical_cfg(GaussOU()))


def test_small_noise_zero_state():
    cfg = gaussian_cfg(epsilons=[1e-2], offsets_r=[0.0])
    cfg.x0 = np.zeros(48)
    prof = small_noise_profile(cfg)
    assert prof.rows[0].limit == 0.0 and prof.rows[0].value <= prof.rows[0].gap + 1e-6


def test_scaled_driver():
    assert scaled_driver(Brownian(2.0), 0.5) == Brownian(1.0)
    assert scaled_driver(CompoundPoisson(2.0, 0.5), 0.1).magnitude == pytest.approx(0.05)
