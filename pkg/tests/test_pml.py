import numpy as np
import pytest

from helmsweep.pml import (
    PmlConfig,
    default_damping_amplitude,
    ramp,
    sigma_profile,
    stretch_factor,
)


def test_two_sided_plateau_is_zero():
    cfg = PmlConfig(eta=0.05, C=10.0, b=2)
    assert sigma_profile(0.5, cfg, "two-sided") == 0.0
    t = np.linspace(0.05, 0.95, 33)
    assert np.all(sigma_profile(t, cfg, "two-sided") == 0.0)


def test_boundary_value_matches_quadratic_ramp():
    cfg = PmlConfig(eta=0.05, C=10.0, b=2)
    # C/eta * ((0 - eta)/eta)^2 = 10 / 0.05 = 200
    assert sigma_profile(0.0, cfg, "two-sided") == pytest.approx(200.0)
    assert sigma_profile(1.0, cfg, "two-sided") == pytest.approx(200.0)


def test_one_sided_has_no_damping_at_far_end():
    cfg = PmlConfig(eta=0.05, C=10.0, b=2)
    assert sigma_profile(1.0, cfg, "one-sided") == 0.0
    assert sigma_profile(0.0, cfg, "one-sided") == pytest.approx(200.0)


def test_profile_continuous_at_eta():
    cfg = PmlConfig(eta=0.1, C=5.0, b=4)
    eps = 1e-9
    for kind in ("two-sided", "one-sided"):
        below = sigma_profile(cfg.eta - eps, cfg, kind)
        assert below == pytest.approx(0.0, abs=1e-12)
    below = sigma_profile(1.0 - cfg.eta - eps, cfg, "two-sided")
    assert below == pytest.approx(0.0, abs=1e-12)


def test_domain_error_outside_unit_interval():
    cfg = PmlConfig(eta=0.05, C=10.0, b=2)
    with pytest.raises(ValueError):
        sigma_profile(-0.01, cfg)
    with pytest.raises(ValueError):
        sigma_profile(1.01, cfg)


def test_unknown_kind_rejected():
    cfg = PmlConfig(eta=0.05, C=10.0, b=2)
    with pytest.raises(ValueError):
        sigma_profile(0.5, cfg, "sideways")


def test_stretch_factor_trivial_and_derived():
    assert stretch_factor(0.0, 3.7) == pytest.approx(1.0)
    # sigma = omega (real): 1/(1+i) = (1-i)/2
    omega = 5.0
    assert stretch_factor(omega, omega) == pytest.approx(0.5 - 0.5j)


def test_stretch_factor_contractive_for_real_frequency():
    rng = np.random.default_rng(0)
    sig = rng.uniform(0.0, 50.0, size=200)
    vals = stretch_factor(sig, 7.0)
    assert np.all(np.abs(vals) <= 1.0 + 1e-15)


def test_stretch_factor_rejects_zero_frequency():
    with pytest.raises(ValueError):
        stretch_factor(1.0, 0.0)


def test_default_amplitude_attenuates_to_target():
    C = default_damping_amplitude(1e-3)
    # one pass through the ramp integrates sigma to C/3
    assert np.exp(-C / 3.0) == pytest.approx(1e-3)


def test_ramp_zero_width_is_zero():
    assert np.all(ramp(np.linspace(0, 1, 5), 0.0, 10.0) == 0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        PmlConfig(eta=0.1, C=10.0, b=1)
    with pytest.raises(ValueError):
        PmlConfig(eta=0.1, C=-1.0, b=2)
    with pytest.raises(ValueError):
        PmlConfig(eta=0.0, C=10.0, b=2)
    cfg = PmlConfig.from_layers(4, 1.0 / 32)
    assert cfg.eta == pytest.approx(4 / 32)
    assert cfg.b == 4
