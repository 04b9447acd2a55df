"""Unit tests for the LSTM layer function."""

import numpy as np

from src.tools.core.gradcheck import grad_check
from src.tools.core.tensor import Tensor
from src.tools.models.lstm import LstmLayerParams, lstm_forward, lstm_layer
from src.tests.shared.utils import build_tiny_model


def _params(seed: int, d_in: int, width: int) -> LstmLayerParams:
    gen = np.random.default_rng(seed)
    return LstmLayerParams(
        w_input=Tensor(gen.normal(scale=0.5, size=(d_in, 4 * width)), requires_grad=True),
        w_recurrent=Tensor(gen.normal(scale=0.5, size=(width, 4 * width)), requires_grad=True),
        bias=Tensor(gen.normal(scale=0.1, size=4 * width), requires_grad=True),
    )


def _reference(x: np.ndarray, params: LstmLayerParams) -> np.ndarray:
    width = params.width
    sig = lambda a: 1.0 / (1.0 + np.exp(-a))  # noqa: E731
    h = np.zeros((x.shape[0], width))
    c = np.zeros_like(h)
    outputs = []
    for t in range(x.shape[1]):
        z = x[:, t] @ params.w_input.data + h @ params.w_recurrent.data + params.bias.data
        i, f, g, o = np.split(z, 4, axis=-1)
        c = sig(f) * c + sig(i) * np.tanh(g)
        h = sig(o) * np.tanh(c)
        outputs.append(h)
    return np.stack(outputs, axis=1)


def test_layer_matches_step_by_step_recurrence():
    params = _params(0, d_in=3, width=4)
    x = np.random.default_rng(1).normal(size=(2, 5, 3))
    np.testing.assert_allclose(lstm_layer(Tensor(x), params).data, _reference(x, params), atol=1e-12)


def test_states_start_at_zero_for_every_sequence():
    params = _params(2, d_in=3, width=2)
    x = np.random.default_rng(3).normal(size=(1, 4, 3))
    batched = lstm_layer(Tensor(np.concatenate([x, x])), params).data
    np.testing.assert_array_equal(batched[0], batched[1])


def _squared_sum(y: Tensor) -> Tensor:
    return (y * y).sum()


def test_backpropagation_through_time_with_recurrent_mask():
    params = _params(4, d_in=2, width=3)
    x = Tensor(np.random.default_rng(5).normal(size=(2, 4, 2)), requires_grad=True)
    mask = np.array([[2.0, 0.0, 2.0], [0.0, 2.0, 2.0]])

    report = grad_check(
        lambda: _squared_sum(lstm_layer(x, params, recurrent_mask=mask)),
        [x, params.w_input, params.w_recurrent, params.bias],
        names=["x", "w_input", "w_recurrent", "bias"],
    )
    assert report.passed, report.errors


def test_forget_gate_bias_starts_at_one():
    model = build_tiny_model("lstm")
    bias = model.parameters()["lstm.0.bias"].data
    d = model.config.d_model
    np.testing.assert_array_equal(bias[d : 2 * d], np.ones(d))
    np.testing.assert_array_equal(bias[:d], np.zeros(d))


def test_all_zero_parameters_give_the_output_bias_everywhere():
    model = build_tiny_model("lstm", seed=1)
    bias = np.random.default_rng(6).normal(size=model.config.vocab_size + 1)
    for name, param in model.parameters().items():
        param.data[...] = bias if name == "output.bias" else 0.0

    logits = lstm_forward(model, np.array([[1, 4, 2, 0], [3, 3, 5, 6]])).data
    np.testing.assert_allclose(logits, np.broadcast_to(bias, logits.shape), atol=0.0)
