"""Adversary: observation log, surrogate fit, gating, crafting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fusionattack.adversary import (
    GATE_BELOW,
    AdversaryConfig,
    SurrogateModel,
    SurrogateTrainConfig,
    craft,
    craft_batch,
    decide,
    fit_surrogate,
    gate,
    gate_batch,
    new_log,
    observe,
    validate_adversary,
)
from fusionattack.errors import ConfigurationError, InputError, TrainingError
from fusionattack.neuralnet import (
    Mlp,
    MlpSpec,
    forward,
    forward_batch,
    init_mlp,
    input_gradient_batch,
)


def surrogate_spec(m, seed=0):
    return MlpSpec(layer_sizes=(m, 8, 2), activation="Tanh", rng_seed=seed)


def sign_task_surrogate(entries=2000, m=3, seed=0):
    """Log labeled by the sign of the first reading, plus its fit."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2.0, 2.0, (entries, m))
    log = new_log(m)
    for row in X:
        observe(log, row, int(row[0] > 0))
    model, agreement = fit_surrogate(log, surrogate_spec(m, seed), SurrogateTrainConfig())
    return model, agreement, X


def linear_surrogate(weight=2.0, lo=-1.0, hi=1.0):
    """1-input net whose class-1 logit grows with the input."""
    spec = MlpSpec(layer_sizes=(1, 2), rng_seed=0)
    net = Mlp(
        spec=spec,
        weights=(np.array([[-weight], [weight]]),),
        biases=(np.zeros(2),),
    )
    return SurrogateModel(net=net, observed_min=np.array([lo]), observed_max=np.array([hi]))


# ---------------------------------------------------------------- observe


def test_observe_appends_in_order():
    log = new_log(2)
    observe(log, np.array([1.0, 2.0]), 0)
    assert len(log) == 1
    for i in range(1999):
        observe(log, np.array([float(i), -float(i)]), i % 2)
    assert len(log) == 2000
    np.testing.assert_array_equal(log.entries[0][0], [1.0, 2.0])
    assert [e[1] for e in log.entries[:5]] == [0, 0, 1, 0, 1]


def test_observe_validates_entries():
    log = new_log(2)
    with pytest.raises(InputError):
        observe(log, np.array([1.0]), 0)
    with pytest.raises(InputError):
        observe(log, np.array([1.0, 2.0]), 2)
    with pytest.raises(ConfigurationError):
        new_log(0)


def test_observed_box_matches_brute_force_fold():
    rng = np.random.default_rng(3)
    X = rng.normal(0.0, 5.0, (500, 4))
    log = new_log(4)
    for i, row in enumerate(X):
        observe(log, row, int(i % 2))
    model, _ = fit_surrogate(
        log, surrogate_spec(4, 1), SurrogateTrainConfig(epochs=1)
    )
    np.testing.assert_array_equal(model.observed_min, X.min(axis=0))
    np.testing.assert_array_equal(model.observed_max, X.max(axis=0))


# ---------------------------------------------------------------- surrogate


def test_sign_task_is_imitated_with_high_agreement():
    _, agreement, _ = sign_task_surrogate()
    assert agreement >= 0.95


def test_constant_log_fits_a_confident_constant():
    log = new_log(2)
    for _ in range(10):
        observe(log, np.array([0.4, -0.2]), 1)
    model, agreement = fit_surrogate(
        log, surrogate_spec(2, 5), SurrogateTrainConfig(epochs=300)
    )
    assert agreement == 1.0
    probs = forward(model.net, np.array([0.4, -0.2]))
    assert probs.argmax() == 1
    assert probs[1] > 0.9


def test_fit_surrogate_validates_inputs():
    with pytest.raises(TrainingError):
        fit_surrogate(new_log(2), surrogate_spec(2), SurrogateTrainConfig())
    log = new_log(2)
    observe(log, np.zeros(2), 0)
    with pytest.raises(ConfigurationError):
        fit_surrogate(log, surrogate_spec(3), SurrogateTrainConfig())


def test_fit_is_deterministic():
    a, agr_a, _ = sign_task_surrogate(entries=300, seed=7)
    b, agr_b, _ = sign_task_surrogate(entries=300, seed=7)
    assert agr_a == agr_b
    for Wa, Wb in zip(a.net.weights, b.net.weights):
        np.testing.assert_array_equal(Wa, Wb)


# ---------------------------------------------------------------- gate


def test_gate_threshold_hand_cases():
    # Logit gap at input x is 2*w*x, so w = ln(2) puts confidence at
    # sigma(ln 4) = 0.8 for x = 1.
    s = linear_surrogate(weight=np.log(2.0))
    high = gate(s, np.array([1.0]), 0.75)
    assert high.launched and high.inferred_label == 1
    assert high.confidence == pytest.approx(0.8)
    low = gate(s, np.array([0.1]), 0.75)
    assert not low.launched
    assert low.crafted_readings is None


def test_gate_tie_at_threshold_launches():
    s = linear_surrogate(weight=np.log(2.0))
    conf = gate(s, np.array([1.0]), 0.75).confidence
    launched, _, _ = gate_batch(s, np.array([[1.0]]), float(conf))
    assert bool(launched[0])


def test_gate_never_launches_at_full_confidence_threshold():
    s = linear_surrogate(weight=1.0)
    X = np.linspace(-1, 1, 21)[:, None]
    launched, _, conf = gate_batch(s, X, 1.0)
    assert np.all(conf < 1.0)
    assert not launched.any()


def test_gate_direction_below_inverts_selection():
    s = linear_surrogate(weight=np.log(2.0))
    X = np.array([[1.0], [0.1]])
    above, _, conf = gate_batch(s, X, 0.75)
    below, _, _ = gate_batch(s, X, 0.75, direction=GATE_BELOW)
    np.testing.assert_array_equal(above, [True, False])
    np.testing.assert_array_equal(below, [False, True])


def test_temperature_rescales_confidence_but_not_labels():
    s = linear_surrogate(weight=np.log(2.0))
    X = np.linspace(-1.5, 1.5, 11)[:, None]
    _, labels_raw, conf_raw = gate_batch(s, X, 0.75)
    _, labels_hot, conf_hot = gate_batch(s, X, 0.75, temperature=2.0)
    np.testing.assert_array_equal(labels_raw, labels_hot)
    interior = (conf_raw > 0.5 + 1e-9) & (conf_raw < 1.0)
    assert np.all(conf_hot[interior] < conf_raw[interior])


@given(
    x=st.floats(min_value=-3, max_value=3),
    tau1=st.floats(min_value=0.51, max_value=1.0),
    tau2=st.floats(min_value=0.51, max_value=1.0),
)
@settings(max_examples=150, deadline=None)
def test_gate_is_monotone_in_threshold(x, tau1, tau2):
    if tau2 > tau1:
        tau1, tau2 = tau2, tau1
    s = linear_surrogate(weight=1.7)
    if gate(s, np.array([x]), tau1).launched:
        assert gate(s, np.array([x]), tau2).launched


def test_gate_validates_inputs():
    s = linear_surrogate()
    with pytest.raises(ConfigurationError):
        gate(s, np.array([0.0]), 0.5)
    with pytest.raises(InputError):
        gate(s, np.zeros((2, 1)), 0.75)
    with pytest.raises(ConfigurationError):
        gate_batch(s, np.zeros((1, 1)), 0.75, direction="sideways")


# ---------------------------------------------------------------- craft


def test_zero_iteration_budget_is_identity():
    s = linear_surrogate()
    cfg = AdversaryConfig(controlled_ids=(0,), craft_iters=0)
    x = np.array([0.3])
    np.testing.assert_array_equal(craft(s, x, 1, cfg), x)


def test_one_dimensional_linear_surrogate_moves_toward_other_class():
    # Class-1 logit rises with the input, so an inferred label of 1
    # must push the value down, and clipping pins it at observed_min.
    s = linear_surrogate(weight=2.0, lo=-1.0, hi=1.0)
    cfg = AdversaryConfig(controlled_ids=(0,), craft_step=0.25, craft_iters=30)
    start = np.array([0.8])
    crafted = craft(s, start, 1, cfg)
    assert crafted[0] < start[0]
    assert crafted[0] == -1.0
    up = craft(s, np.array([-0.8]), 0, cfg)
    assert up[0] == 1.0


def test_crafted_values_stay_inside_the_observed_box():
    model, _, X = sign_task_surrogate(entries=400, m=3, seed=9)
    cfg = AdversaryConfig(controlled_ids=(0, 1, 2), craft_step=0.5, craft_iters=40)
    block = X[:100]
    inferred = forward_batch(model.net, block).argmax(axis=1)
    crafted, _ = craft_batch(model, block, inferred, cfg)
    assert np.all(crafted >= model.observed_min - 1e-12)
    assert np.all(crafted <= model.observed_max + 1e-12)


def test_unclipped_crafting_may_leave_the_box():
    s = linear_surrogate(weight=2.0, lo=-0.5, hi=0.5)
    cfg = AdversaryConfig(
        controlled_ids=(0,), craft_step=0.25, craft_iters=30, clip_to_observed_range=False
    )
    crafted = craft(s, np.array([0.4]), 1, cfg)
    assert crafted[0] < -0.5


def naive_craft_reference(surrogate, X, inferred, cfg):
    """Craft every row for the full budget with no skipping."""
    X = X.copy()
    targets = 1 - np.asarray(inferred)
    lo, hi = surrogate.observed_min, surrogate.observed_max
    for _ in range(cfg.craft_iters):
        g = input_gradient_batch(surrogate.net, X, targets)
        X = X - cfg.craft_step * np.sign(g)
        if cfg.clip_to_observed_range:
            X = np.clip(X, lo, hi)
    flipped = forward_batch(surrogate.net, X).argmax(axis=1) == targets
    return X, flipped


def test_craft_batch_matches_the_naive_full_budget_reference():
    # The production path skips rows once an update leaves them fixed;
    # the result must stay bit-identical to crafting every row for the
    # full budget.
    model, _, X = sign_task_surrogate(entries=600, m=3, seed=13)
    cfg = AdversaryConfig(controlled_ids=(0, 1, 2), craft_step=0.3, craft_iters=25)
    block = X[:200]
    inferred = forward_batch(model.net, block).argmax(axis=1)
    got, got_flipped = craft_batch(model, block, inferred, cfg)
    want, want_flipped = naive_craft_reference(model, block, inferred, cfg)
    np.testing.assert_array_equal(got, want)
    np.testing.assert_array_equal(got_flipped, want_flipped)


def test_craft_batch_agrees_with_single_row_craft():
    model, _, X = sign_task_surrogate(entries=300, m=3, seed=17)
    for stop in (False, True):
        cfg = AdversaryConfig(
            controlled_ids=(0, 1, 2),
            craft_step=0.2,
            craft_iters=12,
            stop_on_surrogate_flip=stop,
        )
        block = X[:30]
        inferred = forward_batch(model.net, block).argmax(axis=1)
        batch, _ = craft_batch(model, block, inferred, cfg)
        for i in range(30):
            np.testing.assert_array_equal(
                batch[i], craft(model, block[i], int(inferred[i]), cfg)
            )


def test_early_stop_freezes_after_margin_push():
    # With stop_on_surrogate_flip, a row that flips takes exactly one
    # more step and then ignores any remaining budget.
    s = linear_surrogate(weight=2.0, lo=-10.0, hi=10.0)
    cfg_short = AdversaryConfig(
        controlled_ids=(0,), craft_step=0.25, craft_iters=6, stop_on_surrogate_flip=True
    )
    cfg_long = AdversaryConfig(
        controlled_ids=(0,), craft_step=0.25, craft_iters=50, stop_on_surrogate_flip=True
    )
    start = np.array([0.6])  # boundary at 0: flips on the 3rd step
    short = craft(s, start, 1, cfg_short)
    long = craft(s, start, 1, cfg_long)
    np.testing.assert_array_equal(short, long)
    full = craft(
        s, start, 1, AdversaryConfig(controlled_ids=(0,), craft_step=0.25, craft_iters=50)
    )
    assert full[0] < long[0]


def test_craft_flips_the_surrogate_on_a_crossable_box():
    model, _, X = sign_task_surrogate(entries=500, m=3, seed=19)
    cfg = AdversaryConfig(controlled_ids=(0, 1, 2), craft_step=0.25, craft_iters=30)
    block = X[:150]
    inferred = forward_batch(model.net, block).argmax(axis=1)
    _, flipped = craft_batch(model, block, inferred, cfg)
    assert flipped.mean() >= 0.9


def test_craft_validates_shapes():
    model, _, _ = sign_task_surrogate(entries=100, m=3, seed=21)
    cfg = AdversaryConfig(controlled_ids=(0, 1, 2))
    with pytest.raises(InputError):
        craft_batch(model, np.zeros((4, 2)), np.zeros(4, dtype=int), cfg)
    with pytest.raises(InputError):
        craft_batch(model, np.zeros((4, 3)), np.zeros(3, dtype=int), cfg)


# ---------------------------------------------------------------- decide


def test_decide_attaches_crafted_readings_only_when_launched():
    s = linear_surrogate(weight=np.log(2.0))
    cfg = AdversaryConfig(
        controlled_ids=(0,), confidence_threshold=0.75, craft_step=0.25, craft_iters=10
    )
    hot = decide(s, np.array([1.0]), cfg)
    assert hot.launched and hot.crafted_readings is not None
    assert hot.crafted_readings[0] < 1.0
    cold = decide(s, np.array([0.05]), cfg)
    assert not cold.launched and cold.crafted_readings is None


# ---------------------------------------------------------------- config


def test_adversary_config_validation():
    validate_adversary(AdversaryConfig(), n_devices=20)
    cases = [
        AdversaryConfig(controlled_ids=(1, 1)),
        AdversaryConfig(controlled_ids=(-1,)),
        AdversaryConfig(confidence_threshold=0.5),
        AdversaryConfig(confidence_threshold=1.1),
        AdversaryConfig(craft_step=0.0),
        AdversaryConfig(craft_iters=-1),
        AdversaryConfig(confidence_temperature=0.0),
        AdversaryConfig(gate_direction="diagonal"),
    ]
    for cfg in cases:
        with pytest.raises(ConfigurationError):
            validate_adversary(cfg, n_devices=20)
    with pytest.raises(ConfigurationError):
        validate_adversary(AdversaryConfig(controlled_ids=(25,)), n_devices=20)
