import numpy as np
import pytest

from evprep import PatchGrid, sample_tube_mask
from evprep.errors import FormatError
from evprep.toymodel import (
    ToyModelConfig,
    backward_sequence,
    deserialize_params,
    flatten_params,
    forward_sequence,
    forward_stage,
    init_model,
    reset_memory,
    serialize_params,
    unflatten_params,
)


def small_config(recurrent=True, seed=0):
    return ToyModelConfig(
        patch_size=4, embed_dim=3, in_channels=5, recurrent=recurrent, seed=seed
    )


def random_inputs(rng, config, grid, stages):
    return [
        rng.normal(size=(config.in_channels, grid.height, grid.width)) for _ in range(stages)
    ]


def test_zero_input_zero_memory_zero_bias_gives_zero():
    state = init_model(small_config())
    state.params["rec_bias"][:] = 0.0
    pred = forward_stage(state, np.zeros((5, 8, 8)))
    assert not pred.any()


def test_hand_computed_single_patch():
    cfg = ToyModelConfig(patch_size=2, embed_dim=1, in_channels=1, recurrent=True, seed=0)
    state = init_model(cfg)
    state.params["embed"][:] = np.array([[0.1], [0.2], [-0.3], [0.4]])
    state.params["rec_c"][:] = 0.5
    state.params["rec_f"][:] = 2.0
    state.params["rec_bias"][:] = 0.1
    state.params["decode"][:] = np.array([[1.0, -1.0, 0.5, 2.0]])
    x = np.array([[[1.0, 2.0], [3.0, -1.0]]])
    f = 0.1 * 1 + 0.2 * 2 - 0.3 * 3 + 0.4 * -1  # -0.8
    h = np.tanh(2.0 * f + 0.1)
    expected = h * np.array([[1.0, -1.0], [0.5, 2.0]])
    pred = forward_stage(state, x)
    np.testing.assert_allclose(pred, expected, rtol=1e-12)
    # second stage now carries memory through rec_c
    pred2 = forward_stage(state, x)
    h2 = np.tanh(0.5 * h + 2.0 * f + 0.1)
    np.testing.assert_allclose(pred2, h2 * np.array([[1.0, -1.0], [0.5, 2.0]]), rtol=1e-12)


def test_feedforward_ignores_history(rng):
    cfg = small_config(recurrent=False)
    grid = PatchGrid(cfg.patch_size, 8, 8)
    state = init_model(cfg)
    current = rng.normal(size=(5, 8, 8))
    history_a = rng.normal(size=(5, 8, 8))
    history_b = rng.normal(size=(5, 8, 8))
    out_a = forward_sequence(state, [history_a, current])[-1]
    out_b = forward_sequence(state, [history_b, current])[-1]
    np.testing.assert_array_equal(out_a, out_b)


def test_recurrent_uses_history(rng):
    cfg = small_config(recurrent=True)
    state = init_model(cfg)
    current = rng.normal(size=(5, 8, 8))
    out_a = forward_sequence(state, [rng.normal(size=(5, 8, 8)), current])[-1]
    out_b = forward_sequence(state, [rng.normal(size=(5, 8, 8)), current])[-1]
    assert not np.array_equal(out_a, out_b)


def test_memory_reset_equivalence(rng):
    cfg = small_config()
    state = init_model(cfg)
    seq = [rng.normal(size=(5, 8, 8)) for _ in range(3)]
    first = forward_sequence(state, seq)
    again = forward_sequence(state, seq)
    for a, b in zip(first, again):
        np.testing.assert_array_equal(a, b)


def test_backward_loss_matches_forward_recomputation(rng):
    from evprep.losses import sequence_loss

    cfg = small_config()
    grid = PatchGrid(cfg.patch_size, 8, 8)
    mask = sample_tube_mask(grid, 0.5, seed=4)
    inputs = random_inputs(rng, cfg, grid, 3)
    targets = [rng.normal(size=(8, 8)) for _ in range(3)]
    state = init_model(cfg)
    loss, _ = backward_sequence(state, inputs, targets, mask, grid)
    preds = forward_sequence(state, inputs)
    assert loss == pytest.approx(sequence_loss(preds, targets, mask, grid).loss, rel=1e-12)


def test_zero_learning_signal():
    cfg = small_config()
    grid = PatchGrid(cfg.patch_size, 8, 8)
    mask = sample_tube_mask(grid, 1.0, seed=0)
    state = init_model(cfg)
    inputs = [np.zeros((5, 8, 8))]
    # zero bias + zero input makes prediction and normalized target both zero
    state.params["rec_bias"][:] = 0.0
    target = forward_sequence(state, inputs)[0]
    loss, grads = backward_sequence(state, inputs, [target], mask, grid)
    assert loss == pytest.approx(0.0, abs=1e-24)
    assert all(np.abs(g).max() < 1e-12 for g in grads.values())


@pytest.mark.parametrize("stages", [1, 3])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradients_match_finite_differences(seed, stages):
    rng = np.random.default_rng(seed + 100)
    cfg = small_config(seed=seed)
    grid = PatchGrid(cfg.patch_size, 8, 8)
    mask = sample_tube_mask(grid, 0.5, seed=seed)
    inputs = random_inputs(rng, cfg, grid, stages)
    targets = [rng.normal(size=(8, 8)) for _ in range(stages)]
    state = init_model(cfg)
    _, grads = backward_sequence(state, inputs, targets, mask, grid)

    vec = flatten_params(state.params)
    gvec = flatten_params(grads)

    def loss_at(v):
        probe = init_model(cfg)
        probe.params = unflatten_params(v, state.params)
        l, _ = backward_sequence(probe, inputs, targets, mask, grid)
        return l

    h = 1e-5
    idx = rng.choice(vec.size, size=min(80, vec.size), replace=False)
    for i in idx:
        vp = vec.copy()
        vp[i] += h
        vm = vec.copy()
        vm[i] -= h
        fd = (loss_at(vp) - loss_at(vm)) / (2 * h)
        denom = max(abs(fd), abs(gvec[i]), 1e-8)
        assert abs(fd - gvec[i]) / denom < 1e-4, f"param {i}: {fd} vs {gvec[i]}"


def test_param_blob_roundtrip():
    cfg = small_config()
    state = init_model(cfg)
    blob = serialize_params(state)
    back = deserialize_params(blob)
    assert back.config.patch_size == cfg.patch_size
    assert back.config.recurrent == cfg.recurrent
    for k in state.params:
        np.testing.assert_array_equal(back.params[k], state.params[k])


def test_param_blob_rejects_garbage():
    with pytest.raises(FormatError):
        deserialize_params(b"XXXX" + b"\x00" * 32)
