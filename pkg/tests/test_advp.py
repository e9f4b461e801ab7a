import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from dspnet.advp import advp, advp_gate, advp_project, gate_values, init_advp_params
from dspnet.errors import DimensionError
from dspnet.gradsuite import advp_case
from dspnet.tensorcore import ParamSet, Tensor, grad_check


def make(rng, d_i=3, d_p=4, d_m=5):
    params = ParamSet()
    init_advp_params(params, d_i, d_p, d_m, rng)
    return params.scope("advp")


def zero_gate(params):
    for name in ("gate.0.weight", "gate.0.bias", "gate.1.weight", "gate.1.bias"):
        params[name].data[:] = 0.0


def naive_sigmoid(x):
    return np.vectorize(lambda v: 1.0 / (1.0 + math.exp(-v)))(x)


def test_parameter_extents(rng):
    params = make(rng, 3, 4, 5)
    assert params["gate.0.weight"].shape == (7, 7)
    assert params["gate.1.weight"].shape == (7, 7)
    assert params["out.weight"].shape == (7, 5) and params["out.bias"].shape == (5,)


def test_zero_gate_halves_input(rng):
    params = make(rng)
    zero_gate(params)
    z_i, z_p = rng.normal(size=(6, 3)), rng.normal(size=(6, 4))
    z_h = advp_gate(Tensor(z_i), Tensor(z_p), params).data
    assert np.array_equal(z_h, 0.5 * np.concatenate([z_i, z_p], axis=1))


def test_large_preactivation_passes_channel(rng):
    params = make(rng)
    zero_gate(params)
    params["gate.1.bias"].data[0] = 10.0
    z_i, z_p = rng.normal(size=(4, 3)), rng.normal(size=(4, 4))
    gates, _ = gate_values(Tensor(z_i), Tensor(z_p), params)
    # 1 / (1 + e^-10) at 40 digits
    assert np.max(np.abs(gates.data[:, 0] - 0.99995460213129756561)) <= 1e-15
    z_h = advp_gate(Tensor(z_i), Tensor(z_p), params).data
    assert np.max(np.abs(z_h[:, 0] - z_i[:, 0])) <= 1e-4 * np.max(np.abs(z_i[:, 0]))


def test_invalid_point_image_half_is_zero(rng):
    params = make(rng)
    z_h = advp_gate(Tensor(np.zeros((5, 3))), Tensor(rng.normal(size=(5, 4))), params).data
    assert np.all(z_h[:, :3] == 0.0)


def test_gate_matches_naive_evaluation(rng):
    params = make(rng)
    w = {k: params[k].data for k in params}
    z_i, z_p = rng.normal(size=(6, 3)), rng.normal(size=(6, 4))
    c = np.concatenate([z_i, z_p], axis=1)
    expected = naive_sigmoid(oracles.mlp2(c, w, "gate")) * c
    assert np.max(np.abs(advp_gate(Tensor(z_i), Tensor(z_p), params).data - expected)) <= 1e-12


def test_row_count_mismatch(rng):
    params = make(rng)
    for gated in (True, False):
        with pytest.raises(DimensionError):
            advp_gate(Tensor(np.zeros((3, 3))), Tensor(np.zeros((4, 4))), params, gated=gated)


def test_project_identity(rng):
    params = make(rng, 2, 3, 5)
    params["out.weight"].data[:] = np.eye(5)
    params["out.bias"].data[:] = 0.0
    z_h = rng.normal(size=(4, 5))
    assert np.array_equal(advp_project(Tensor(z_h), params).data, z_h)


def test_project_zero_weights_give_bias(rng):
    params = make(rng)
    params["out.weight"].data[:] = 0.0
    out = advp_project(Tensor(rng.normal(size=(6, 7))), params).data
    assert np.array_equal(out, np.tile(params["out.bias"].data, (6, 1)))


def test_project_matches_loop_oracle(rng):
    params = make(rng)
    w, b = params["out.weight"].data, params["out.bias"].data
    z_h = rng.normal(size=(3, 7))
    expected = np.array([[sum(z_h[n, i] * w[i, j] for i in range(7)) + b[j] for j in range(5)] for n in range(3)])
    assert np.max(np.abs(advp_project(Tensor(z_h), params).data - expected)) <= 1e-12


def test_project_width_mismatch(rng):
    with pytest.raises(DimensionError):
        advp_project(Tensor(np.zeros((2, 6))), make(rng))


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 20.0))
def test_gates_strictly_inside_unit_interval(seed, scale):
    rng = np.random.default_rng(seed)
    params = make(rng)
    gates, _ = gate_values(Tensor(scale * rng.normal(size=(5, 3))), Tensor(scale * rng.normal(size=(5, 4))), params)
    assert np.all(gates.data > 0.0) and np.all(gates.data < 1.0)


@given(st.integers(0, 2**32 - 1), st.integers(0, 6), st.floats(0.0, 10.0))
def test_gate_monotone_in_preactivation(seed, channel, bump):
    rng = np.random.default_rng(seed)
    params = make(rng)
    # non-negative input so |Z_h| on the channel moves with the gate
    z_i, z_p = Tensor(np.abs(rng.normal(size=(5, 3)))), Tensor(np.abs(rng.normal(size=(5, 4))))
    before = advp_gate(z_i, z_p, params).data[:, channel]
    params["gate.1.bias"].data[channel] += bump
    after = advp_gate(z_i, z_p, params).data[:, channel]
    assert np.all(np.abs(after) >= np.abs(before))


def test_ungated_is_concat_then_project(rng):
    params = make(rng)
    z_i, z_p = rng.normal(size=(6, 3)), rng.normal(size=(6, 4))
    c = np.concatenate([z_i, z_p], axis=1)
    expected = c @ params["out.weight"].data + params["out.bias"].data
    out = advp(Tensor(z_i), Tensor(z_p), params, gated=False).data
    assert np.max(np.abs(out - expected)) <= 1e-12


def test_advp_path_gradients():
    for seed in range(10):
        case = advp_case(seed)
        assert grad_check(case.fn, case.inputs) <= 1e-6
