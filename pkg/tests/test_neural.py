import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sglab.errors import EmptyBatch, ShapeMismatch, TrainingDiverged
from sglab.message import Source, Verbosity
from sglab.neural import (
    DEFAULT_LAYER_DIMS,
    AdamState,
    Batch,
    InputScaling,
    MLPParams,
    StopReason,
    TrainingConfig,
    adam_step,
    adam_update,
    envelope_is_monotone,
    forward,
    grad,
    gradient_check,
    init_params,
    loss,
    loss_and_grad,
    loss_components,
    train,
)
from sglab.renderer import RecordingRenderer

SMALL_DIMS = (3, 8, 8, 2)


def random_batch(n: int = 20, seed: int = 0) -> Batch:
    rng = np.random.default_rng(seed)
    return Batch(inputs=rng.uniform(-1, 1, size=(n, 3)), targets=rng.normal(size=(n, 2)))


def hand_net(w0: float, b0: float, w1: float, b1: float) -> MLPParams:
    return MLPParams.from_arrays(
        weights=[np.array([[w0]]), np.array([[w1]])],
        biases=[np.array([b0]), np.array([b1])],
    )


def test_init_is_deterministic() -> None:
    a = init_params(7)
    b = init_params(7)

    for x, y in zip(a.arrays(), b.arrays()):
        assert np.array_equal(x, y)


def test_init_depends_on_seed() -> None:
    assert not np.array_equal(init_params(1).weights[0], init_params(2).weights[0])


def test_init_shapes_and_bounds() -> None:
    p = init_params(0)

    assert p.layer_dims == DEFAULT_LAYER_DIMS
    assert p.n_layers == 5
    for (fan_in, fan_out), w, b in zip(
        zip(DEFAULT_LAYER_DIMS[:-1], DEFAULT_LAYER_DIMS[1:]), p.weights, p.biases
    ):
        assert w.shape == (fan_in, fan_out)
        assert np.all(np.abs(w) <= math.sqrt(6 / (fan_in + fan_out)))
        assert np.all(b == 0)


def test_params_reject_mismatched_shapes() -> None:
    with pytest.raises(ShapeMismatch):
        MLPParams(
            layer_dims=(1, 2),
            weights=(np.zeros((2, 2)),),
            biases=(np.zeros(2),),
        )


def test_zero_weights_output_final_bias() -> None:
    p = init_params(0, SMALL_DIMS)
    p = p.with_arrays([np.zeros_like(a) for a in p.arrays()])
    p = replace(p, biases=(*p.biases[:-1], np.array([0.25, -1.5])))

    out = forward(p, np.array([[0.1, 0.2, 0.3], [5.0, -3.0, 2.0]]))

    assert out.tolist() == [[0.25, -1.5], [0.25, -1.5]]


@pytest.mark.parametrize(
    "x, expected",
    [
        (1.0, 10.0),
        (-1.0, 1.0),
        (-3.0, 1.0),
    ],
)
def test_hand_computed_network(x: float, expected: float) -> None:
    # 1 -> relu(2x + 1) -> 3h + 1
    p = hand_net(2, 1, 3, 1)

    assert forward(p, np.array([x])) == pytest.approx([expected])


def test_input_scaling_maps_bounds_to_unit_interval() -> None:
    scaling = InputScaling.from_bounds([(-13, 13), (0.5, 1.5), (0, 20)])

    assert scaling.apply(np.array([-13, 0.5, 0])) == pytest.approx([-1, -1, -1])
    assert scaling.apply(np.array([13, 1.5, 20])) == pytest.approx([1, 1, 1])
    assert scaling.apply(np.array([0, 1.0, 10])) == pytest.approx([0, 0, 0])


def test_input_scaling_rejects_empty_interval() -> None:
    with pytest.raises(ValueError):
        InputScaling.from_bounds([(1, 1)])


def test_batched_forward_matches_rows() -> None:
    p = init_params(3, SMALL_DIMS)
    b = random_batch()

    batched = forward(p, b.inputs)

    for row, out in zip(b.inputs, batched):
        assert forward(p, row) == pytest.approx(out, rel=1e-12, abs=1e-12)


def test_batch_shape_checks() -> None:
    with pytest.raises(ShapeMismatch):
        Batch(inputs=np.zeros((3, 3)), targets=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        Batch(inputs=np.full((1, 3), np.nan), targets=np.zeros((1, 2)))


def test_loss_of_exact_fit_is_zero() -> None:
    p = hand_net(2, 1, 3, 1)
    b = Batch(inputs=np.array([[1.0], [-1.0]]), targets=np.array([[10.0], [1.0]]))

    assert loss(p, b) == 0


def test_loss_components_are_per_output_mse() -> None:
    p = init_params(0, SMALL_DIMS)
    b = random_batch()
    residual = forward(p, b.inputs) - b.targets

    components = loss_components(p, b)

    assert components == pytest.approx(np.mean(residual**2, axis=0))
    assert loss(p, b) == pytest.approx(components.sum())


def test_empty_batch() -> None:
    p = init_params(0, SMALL_DIMS)
    empty = Batch(inputs=np.zeros((0, 3)), targets=np.zeros((0, 2)))

    with pytest.raises(EmptyBatch):
        loss(p, empty)
    with pytest.raises(EmptyBatch):
        grad(p, empty)
    with pytest.raises(EmptyBatch):
        train(empty, TrainingConfig(max_epochs=10, layer_dims=SMALL_DIMS))


def test_hand_computed_gradient() -> None:
    # f(1) = 3 relu(3) + 1 = 10 against target 0
    p = hand_net(2, 1, 3, 1)
    b = Batch(inputs=np.array([[1.0]]), targets=np.array([[0.0]]))

    value, g = loss_and_grad(p, b)

    assert value == 100
    assert g.weights[1] == pytest.approx(np.array([[60.0]]))
    assert g.biases[1] == pytest.approx([20])
    assert g.weights[0] == pytest.approx(np.array([[60.0]]))
    assert g.biases[0] == pytest.approx([60])


def test_relu_derivative_at_zero_is_zero() -> None:
    # pre-activation 2 * (-0.5) + 1 = 0 exactly
    p = hand_net(2, 1, 3, 1)
    b = Batch(inputs=np.array([[-0.5]]), targets=np.array([[0.0]]))

    g = grad(p, b)

    assert g.weights[0] == pytest.approx(np.array([[0.0]]))
    assert g.biases[0] == pytest.approx([0])


def test_gradient_matches_finite_differences() -> None:
    p = init_params(0, SMALL_DIMS)

    check = gradient_check(p, random_batch(), n_coordinates=150)

    assert np.count_nonzero(check.smooth) >= 100
    assert check.max_relative_error < 1e-5


def test_gradient_of_duplicated_batch_is_unchanged() -> None:
    p = init_params(0, SMALL_DIMS)
    b = random_batch()
    doubled = Batch(
        inputs=np.concatenate([b.inputs, b.inputs]),
        targets=np.concatenate([b.targets, b.targets]),
    )

    for x, y in zip(grad(p, b).arrays(), grad(p, doubled).arrays()):
        assert x == pytest.approx(y, rel=1e-12, abs=1e-14)


def test_adam_with_zero_gradient_only_counts() -> None:
    arrays = [np.array([1.0, -2.0]), np.array([[3.0]])]
    s = AdamState.fresh(arrays)

    updated, s = adam_update(arrays, [np.zeros(2), np.zeros((1, 1))], s)

    assert s.step_count == 1
    for a, b in zip(arrays, updated):
        assert np.array_equal(a, b)


def test_adam_first_step_moves_by_learning_rate() -> None:
    arrays = [np.array([1.0, -1.0])]
    s = AdamState.fresh(arrays, lr=0.01)

    updated, _ = adam_update(arrays, [np.array([4.0, -0.5])], s)

    assert updated[0] == pytest.approx([0.99, -0.99], rel=1e-6)


def test_adam_rejects_shape_mismatch() -> None:
    s = AdamState.fresh([np.zeros(2)])

    with pytest.raises(ShapeMismatch):
        adam_update([np.zeros(2)], [np.zeros(3)], s)


def test_adam_minimizes_a_square() -> None:
    arrays = [np.array([1.0])]
    s = AdamState.fresh(arrays, lr=0.01)

    for _ in range(2000):
        arrays, s = adam_update(arrays, [2 * arrays[0]], s)

    assert s.step_count == 2000
    assert abs(arrays[0][0]) < 0.05


def test_adam_step_updates_params() -> None:
    p = init_params(0, SMALL_DIMS)
    b = random_batch()
    s = AdamState.fresh(p.arrays())

    stepped, s = adam_step(p, grad(p, b), s)

    assert s.step_count == 1
    assert stepped.layer_dims == p.layer_dims
    assert loss(stepped, b) < loss(p, b)


def test_training_on_zero_targets_reaches_threshold() -> None:
    rng = np.random.default_rng(0)
    b = Batch(inputs=rng.uniform(-1, 1, size=(30, 3)), targets=np.zeros((30, 2)))
    cfg = TrainingConfig(max_epochs=5000, loss_threshold=1e-4, layer_dims=SMALL_DIMS)

    result = train(b, cfg)

    assert result.stop_reason is StopReason.THRESHOLD
    assert result.final_loss < 1e-4
    assert result.epochs < 5000


def test_training_is_deterministic() -> None:
    b = random_batch()
    cfg = TrainingConfig(max_epochs=200, layer_dims=SMALL_DIMS, seed=11)

    a, c = train(b, cfg), train(b, cfg)

    assert np.array_equal(a.history, c.history)
    for x, y in zip(a.params.arrays(), c.params.arrays()):
        assert np.array_equal(x, y)


def test_training_stops_at_max_epochs() -> None:
    cfg = TrainingConfig(max_epochs=50, loss_threshold=0, layer_dims=SMALL_DIMS)

    result = train(random_batch(), cfg)

    assert result.stop_reason is StopReason.MAX_EPOCHS
    assert result.epochs == 50


def test_training_stops_on_plateau() -> None:
    # zero inputs and zero-mean targets give a zero gradient at initialization
    b = Batch(inputs=np.zeros((4, 3)), targets=np.array([[1.0, 0], [-1, 0], [1, 0], [-1, 0]]))
    cfg = TrainingConfig(
        max_epochs=20_000, loss_threshold=0, plateau_window=200, layer_dims=SMALL_DIMS
    )

    result = train(b, cfg)

    assert result.stop_reason is StopReason.PLATEAU
    assert result.final_loss == pytest.approx(1, rel=1e-3)


def test_training_reports_progress() -> None:
    renderer = RecordingRenderer(verbosity=Verbosity.DEBUG)
    cfg = TrainingConfig(max_epochs=30, log_every=10, layer_dims=SMALL_DIMS)

    train(random_batch(), cfg, renderer=renderer)

    assert all(m.source is Source.TRAINING for m in renderer.messages)
    assert sum(m.text.startswith("epoch") for m in renderer.messages) == 3


def test_training_diverges(mocker) -> None:  # type: ignore[no-untyped-def]
    mocker.patch("sglab.neural.loss_and_grad", side_effect=lambda p, b: (math.nan, None))

    with pytest.raises(TrainingDiverged) as exc_info:
        train(random_batch(), TrainingConfig(max_epochs=10, layer_dims=SMALL_DIMS))

    assert exc_info.value.epoch == 0
    assert len(exc_info.value.history) == 1


@pytest.mark.parametrize(
    "history, monotone",
    [
        ([5, 4, 3, 2, 1, 0], True),
        ([5, 4, 1, 3, 2, 2], False),
        ([1, 2, 3], True),
    ],
)
def test_envelope(history: list, monotone: bool) -> None:
    assert envelope_is_monotone(np.array(history, dtype=float), 2) is monotone


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=200))
def test_envelope_of_sorted_history_is_monotone(values: list) -> None:
    assert envelope_is_monotone(np.array(sorted(values, reverse=True)), 10)
