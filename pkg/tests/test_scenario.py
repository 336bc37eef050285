"""World generation: profile sampling, round sampling, determinism."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fusionattack.errors import ConfigurationError
from fusionattack.rng import substream
from fusionattack.scenario import (
    ScenarioConfig,
    generate_profiles,
    generate_rounds,
    profile_arrays,
    validate_scenario,
)


def test_point_interval_ranges_pin_every_profile():
    cfg = ScenarioConfig(
        n_devices=3,
        mean_range_class0=(-1.0, -1.0),
        mean_range_class1=(1.0, 1.0),
        std_range=(0.5, 0.5),
    )
    profiles = generate_profiles(cfg, substream(0, "profiles"))
    assert len(profiles) == 3
    for i, p in enumerate(profiles):
        assert p.device_id == i
        assert p.mean_per_class == (-1.0, 1.0)
        assert p.std_per_class == (0.5, 0.5)


def test_profiles_are_deterministic_given_seed():
    cfg = ScenarioConfig()
    a = generate_profiles(cfg, substream(5, "profiles"))
    b = generate_profiles(cfg, substream(5, "profiles"))
    assert a == b


def test_sampled_means_concentrate_on_range_midpoints():
    # Law of large numbers against the uniform-sampling distribution:
    # over 10**6 devices the empirical mean of sampled means lands
    # within 1% of each range's midpoint.
    cfg = ScenarioConfig(n_devices=1_000_000)
    profiles = generate_profiles(cfg, substream(3, "profiles"))
    means, stds = profile_arrays(profiles)
    assert abs(means[0].mean() - (-1.0)) < 0.01
    assert abs(means[1].mean() - 1.0) < 0.01
    assert abs(stds.mean() - 1.0) < 0.01


def test_zero_std_rounds_equal_class_means():
    cfg = ScenarioConfig(n_devices=4, std_range=(0.0, 0.0), n_rounds=50)
    profiles = generate_profiles(cfg, substream(1, "profiles"))
    rounds = generate_rounds(profiles, cfg, substream(1, "timeline"))
    means, _ = profile_arrays(profiles)
    for r in rounds:
        np.testing.assert_allclose(r.readings, means[r.true_label], atol=1e-6)


def test_degenerate_priors_fix_all_labels():
    cfg0 = ScenarioConfig(n_devices=2, class_prior=0.0, n_rounds=200)
    profiles = generate_profiles(cfg0, substream(2, "profiles"))
    rounds = generate_rounds(profiles, cfg0, substream(2, "timeline"))
    assert all(r.true_label == 0 for r in rounds)
    cfg1 = ScenarioConfig(n_devices=2, class_prior=1.0, n_rounds=200)
    rounds = generate_rounds(profiles, cfg1, substream(2, "timeline"))
    assert all(r.true_label == 1 for r in rounds)


def test_round_sample_matches_profiles_within_three_standard_errors():
    cfg = ScenarioConfig()
    profiles = generate_profiles(cfg, substream(11, "profiles"))
    rounds = generate_rounds(profiles, cfg, substream(11, "timeline"))
    readings = np.stack([r.readings for r in rounds])
    labels = np.array([r.true_label for r in rounds])
    means, stds = profile_arrays(profiles)
    for k in (0, 1):
        sample = readings[labels == k]
        count = sample.shape[0]
        assert count >= 1000
        se = stds[k] / np.sqrt(count)
        assert np.all(np.abs(sample.mean(axis=0) - means[k]) <= 3.0 * se)


def test_rounds_are_deterministic_and_well_formed():
    cfg = ScenarioConfig(n_devices=5, n_rounds=300)
    profiles = generate_profiles(cfg, substream(4, "profiles"))
    a = generate_rounds(profiles, cfg, substream(4, "timeline"))
    b = generate_rounds(profiles, cfg, substream(4, "timeline"))
    for ra, rb in zip(a, b):
        assert ra.round_id == rb.round_id
        assert ra.true_label == rb.true_label
        np.testing.assert_array_equal(ra.readings, rb.readings)
    for i, r in enumerate(a):
        assert r.round_id == i
        assert r.true_label in (0, 1)
        assert r.readings.shape == (5,)
        assert np.all(np.isfinite(r.readings))


def test_label_stream_is_independent_of_device_count():
    cfg_small = ScenarioConfig(n_devices=2, n_rounds=100)
    cfg_large = ScenarioConfig(n_devices=9, n_rounds=100)
    labels = {}
    for cfg in (cfg_small, cfg_large):
        profiles = generate_profiles(cfg, substream(6, "profiles"))
        rounds = generate_rounds(profiles, cfg, substream(6, "timeline"))
        labels[cfg.n_devices] = [r.true_label for r in rounds]
    assert labels[2] == labels[9]


def test_n_rounds_override_controls_length():
    cfg = ScenarioConfig(n_devices=3, n_rounds=500)
    profiles = generate_profiles(cfg, substream(8, "profiles"))
    rounds = generate_rounds(profiles, cfg, substream(8, "x"), n_rounds=37)
    assert len(rounds) == 37


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_devices": 0},
        {"n_rounds": 0},
        {"class_prior": -0.1},
        {"class_prior": 1.5},
        {"mean_range_class0": (2.0, 1.0)},
        {"std_range": (1.0, 0.5)},
        {"std_range": (-1.0, 1.0)},
        {"mean_range_class1": (float("nan"), 1.0)},
    ],
)
def test_invalid_configs_are_rejected(kwargs):
    with pytest.raises(ConfigurationError):
        validate_scenario(ScenarioConfig(**kwargs))


def test_empty_profile_list_is_rejected():
    with pytest.raises(ConfigurationError):
        generate_rounds([], ScenarioConfig(), substream(0, "x"))


@given(
    prior=st.floats(min_value=0.0, max_value=1.0),
    n_devices=st.integers(min_value=1, max_value=8),
    seed=st.integers(min_value=0, max_value=2**32),
)
@settings(max_examples=25, deadline=None)
def test_generated_rounds_respect_shape_and_label_domain(prior, n_devices, seed):
    cfg = ScenarioConfig(n_devices=n_devices, class_prior=prior, n_rounds=40)
    profiles = generate_profiles(cfg, substream(seed, "profiles"))
    rounds = generate_rounds(profiles, cfg, substream(seed, "timeline"))
    assert len(rounds) == 40
    for r in rounds:
        assert r.readings.shape == (n_devices,)
        assert r.true_label in (0, 1)
