"""Architecture construction, forward-pass contracts, checkpoints."""

import numpy as np
import pytest

from knfu.errors import InputError, NumericError, ParseError
from knfu.nn import (
    build_model,
    forward,
    load_checkpoint,
    m1_spec,
    m2_spec,
    mlp_spec,
    save_checkpoint,
)
from knfu.nn.model import forward_logits


def test_m1_layer_flow():
    spec = m1_spec()
    assert spec.arch_id == "M1"
    assert spec.input_shape == (28, 28, 1)
    model = build_model(spec, 0)
    out = forward(model, np.zeros((2, 28, 28, 1)))
    assert out.shape == (2, 10)


def test_m2_layer_flow():
    spec = m2_spec()
    assert spec.input_shape == (32, 32, 3)
    model = build_model(spec, 0)
    out = forward(model, np.zeros((2, 32, 32, 3)))
    assert out.shape == (2, 10)


def test_final_layer_width_equals_classes():
    for spec in (m1_spec(10), m2_spec(10), mlp_spec(5, (4,), 3)):
        dense_widths = [l.width for l in spec.layers if hasattr(l, "width")]
        assert dense_widths[-1] == spec.num_classes


def test_param_count_is_pure_function_of_spec():
    a = build_model(mlp_spec(6, (5, 4), 3), 1)
    b = build_model(mlp_spec(6, (5, 4), 3), 99)
    assert a.params.size == b.params.size == 6 * 5 + 5 + 5 * 4 + 4 + 4 * 3 + 3


def test_init_deterministic_per_seed():
    spec = mlp_spec(4, (3,), 2)
    np.testing.assert_array_equal(build_model(spec, 5).params,
                                  build_model(spec, 5).params)
    assert not np.array_equal(build_model(spec, 5).params,
                              build_model(spec, 6).params)


def test_init_scale_within_fan_in_bound():
    spec = mlp_spec(16, (8,), 4)
    model = build_model(spec, 2)
    first_w = model.param_views()[0][0]
    assert np.abs(first_w).max() <= 1.0 / np.sqrt(16)


def test_forward_rows_on_simplex():
    spec = mlp_spec(6, (5,), 4)
    model = build_model(spec, 3)
    x = np.random.default_rng(0).normal(size=(32, 6)) * 5
    out = forward(model, x, temperature=0.5)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-9)
    assert out.min() >= 0.0


def test_equal_logit_input_gives_uniform_row():
    # zero-weight model: logits all zero regardless of input
    spec = mlp_spec(3, (), 5)
    model = build_model(spec, 0)
    model.params[:] = 0.0
    out = forward(model, np.random.default_rng(1).normal(size=(4, 3)), 2.5)
    np.testing.assert_allclose(out, 0.2, atol=1e-12)


def test_shape_mismatch_rejected():
    model = build_model(mlp_spec(4, (3,), 2), 0)
    with pytest.raises(InputError):
        forward(model, np.zeros((2, 5)))


def test_nonfinite_activation_names_layer():
    model = build_model(mlp_spec(2, (3,), 2), 0)
    model.params[0] = np.inf
    with pytest.raises(NumericError, match="layer 0"):
        forward_logits(model, np.ones((1, 2)))


def test_param_views_alias_flat_vector():
    model = build_model(mlp_spec(3, (2,), 2), 4)
    views = model.param_views()
    views[0][0][0, 0] = 123.0
    assert model.params[0] == 123.0


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        spec = mlp_spec(5, (4,), 3)
        model = build_model(spec, 7)
        path = tmp_path / "model.knfu"
        save_checkpoint(model, path)
        restored = load_checkpoint(path, spec)
        np.testing.assert_allclose(restored.params, model.params, atol=1e-6)

    def test_magic_bytes(self, tmp_path):
        model = build_model(mlp_spec(2, (), 2), 0)
        path = tmp_path / "m.knfu"
        save_checkpoint(model, path)
        assert path.read_bytes()[:4] == b"KNFU"

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.knfu"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ParseError):
            load_checkpoint(path, mlp_spec(2, (), 2))

    def test_spec_mismatch_rejected(self, tmp_path):
        model = build_model(mlp_spec(2, (), 2), 0)
        path = tmp_path / "m.knfu"
        save_checkpoint(model, path)
        with pytest.raises(ParseError):
            load_checkpoint(path, m1_spec())
