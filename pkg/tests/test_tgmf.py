import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from builders import fusion_instance, permute_views
from dspnet.config import RunConfig
from dspnet.errors import ArgumentError, DimensionError
from dspnet.geometry import BackProjectionResult
from dspnet.scenegen.encoders import ImageFeatures, init_encoder_params
from dspnet.tensorcore import ParamSet, Tensor, grad_check
from dspnet.tgmf import fuse_views, global_pool_text, global_pool_views, masked_mean_views, view_logits, view_weights
from dspnet.gradsuite import tgmf_case


def tgmf_path(inst):
    h_s = view_logits(global_pool_views(inst["maps"]), global_pool_text(inst["z_t"], inst["mask"]), inst["params"])
    return h_s, fuse_views(inst["bp"], h_s)


def fixed_params(w_q, w_k):
    return ParamSet({"w_q": Tensor(w_q), "w_k": Tensor(w_k)})


# -- pooling ---------------------------------------------------------------------------


def test_pool_constant_map():
    out = global_pool_views(Tensor(np.full((2, 3, 4, 5), 1.75)))
    assert np.array_equal(out.data, np.full((2, 5), 1.75))


def test_pool_two_by_two_mean():
    maps = np.arange(1.0, 5.0).reshape(1, 2, 2, 1).repeat(3, axis=3)
    assert np.array_equal(global_pool_views(Tensor(maps)).data, np.full((1, 3), 2.5))


def test_pool_single_pixel_identity(rng):
    maps = rng.normal(size=(3, 1, 1, 4))
    assert np.array_equal(global_pool_views(Tensor(maps)).data, maps[:, 0, 0])


def test_factorized_pool_matches_materialized(rng):
    config = RunConfig(d_i=5, n_classes=3, n_colors=4)
    params = ParamSet()
    init_encoder_params(params, config, rng)
    pix = rng.integers(-1, 4, size=(3, 6, 7))
    feats = ImageFeatures(pix, [0, 2, 1, 2], [3, 0, 1, 1], params.scope("enc"))
    dense = global_pool_views(feats.materialize()).data
    assert np.max(np.abs(global_pool_views(feats).data - dense)) <= 1e-12


def test_text_pool_examples():
    z = Tensor([[1.0, 5.0], [3.0, -1.0]])
    assert global_pool_text(Tensor([[4.0, 2.0]]), [True]).data.tolist() == [[4.0, 2.0]]
    assert global_pool_text(z, [True, True]).data.tolist() == [[2.0, 2.0]]
    assert global_pool_text(z, [True, False]).data.tolist() == [[1.0, 5.0]]


def test_text_pool_all_masked():
    with pytest.raises(ArgumentError):
        global_pool_text(Tensor(np.ones((2, 3))), [False, False])


# -- view logits ---------------------------------------------------------------------------


def test_view_logits_hand_value():
    h = view_logits(Tensor([[2.0], [0.0]]), Tensor([[3.0]]), fixed_params([[1.0]], [[1.0]]))
    assert h.data.tolist() == [6.0, 0.0]


def test_view_logits_zero_query_projection(rng):
    h = view_logits(Tensor(rng.normal(size=(4, 3))), Tensor(rng.normal(size=(1, 5))),
                    fixed_params(np.zeros((3, 2)), rng.normal(size=(5, 2))))
    assert np.array_equal(h.data, np.zeros(4))


def test_view_logits_scaled_by_root_dk(rng):
    for d_k in (1, 2, 3, 7):
        g_i, g_t = rng.normal(size=(4, 3)), rng.normal(size=(1, 5))
        w_q, w_k = rng.normal(size=(3, d_k)), rng.normal(size=(5, d_k))
        unscaled = np.array([sum((g_i[m] @ w_q)[c] * (g_t[0] @ w_k)[c] for c in range(d_k)) for m in range(4)])
        h = view_logits(Tensor(g_i), Tensor(g_t), fixed_params(w_q, w_k)).data
        assert np.max(np.abs(h - unscaled / np.sqrt(d_k))) <= 1e-12


def test_view_logits_width_mismatch(rng):
    with pytest.raises(DimensionError):
        view_logits(Tensor(np.ones((2, 3))), Tensor(np.ones((1, 4))), fixed_params(np.ones((2, 1)), np.ones((4, 1))))


# -- fusion ----------------------------------------------------------------------------------


def test_single_view_copies_features(rng):
    feats = rng.normal(size=(5, 1, 3))
    z, ok = fuse_views(BackProjectionResult(Tensor(feats), np.ones((5, 1), dtype=bool)), Tensor([0.7]))
    assert np.array_equal(z.data, feats[:, 0]) and ok.all()


def test_equal_logits_give_view_mean(rng):
    feats = rng.normal(size=(4, 3, 2))
    z, _ = fuse_views(BackProjectionResult(Tensor(feats), np.ones((4, 3), dtype=bool)), Tensor([1.0, 1.0, 1.0]))
    assert np.max(np.abs(z.data - feats.mean(axis=1))) <= 1e-12


def test_two_view_exp_normalize_value():
    feats = np.zeros((1, 2, 3))
    feats[0, 0] = 1.0
    z, _ = fuse_views(BackProjectionResult(Tensor(feats), np.ones((1, 2), dtype=bool)), Tensor([6.0, 0.0]))
    # e^6 / (e^6 + 1) at 40 digits
    assert np.max(np.abs(z.data - 0.99752737684336522567)) <= 1e-15


def test_partially_valid_point_renormalizes():
    feats = np.array([[[1.0], [0.0], [4.0]]])
    valid = np.array([[True, False, True]])
    z, _ = fuse_views(BackProjectionResult(Tensor(feats), valid), Tensor([0.0, 9.0, 0.0]))
    assert abs(z.data[0, 0] - 2.5) <= 1e-15


def test_view_count_mismatch(rng):
    bp = BackProjectionResult(Tensor(np.zeros((2, 3, 1))), np.ones((2, 3), dtype=bool))
    with pytest.raises(DimensionError):
        fuse_views(bp, Tensor([0.0, 1.0]))


@given(st.integers(0, 2**32 - 1))
def test_weights_are_a_distribution_over_valid_views(seed):
    inst = fusion_instance(np.random.default_rng(seed))
    h_s, _ = tgmf_path(inst)
    s = view_weights(inst["bp"], h_s).data
    valid = inst["bp"].valid
    assert np.all(s[~valid] == 0.0)
    seen = valid.any(axis=1)
    assert np.max(np.abs(s[seen].sum(axis=1) - 1.0), initial=0.0) <= 1e-12


@given(st.integers(0, 2**32 - 1))
def test_unseen_points_get_zero_rows(seed):
    inst = fusion_instance(np.random.default_rng(seed))
    _, (z, ok) = tgmf_path(inst)
    assert np.array_equal(ok, inst["bp"].valid.any(axis=1))
    assert np.all(z.data[~ok] == 0.0)


@given(st.integers(0, 2**32 - 1))
def test_view_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    inst = fusion_instance(rng)
    perm = rng.permutation(inst["bp"].valid.shape[1])
    h_a, (z_a, _) = tgmf_path(inst)
    h_b, (z_b, _) = tgmf_path(permute_views(inst, perm))
    assert np.max(np.abs(h_b.data - h_a.data[perm])) <= 1e-12
    assert np.max(np.abs(z_b.data - z_a.data)) <= 1e-12


@given(st.integers(0, 2**32 - 1))
def test_zero_query_projection_is_masked_mean(seed):
    inst = fusion_instance(np.random.default_rng(seed))
    inst["params"]["w_q"].data[:] = 0.0
    _, (z, _) = tgmf_path(inst)
    mean, _ = masked_mean_views(inst["bp"])
    assert np.max(np.abs(z.data - mean.data)) <= 1e-12


@given(st.integers(0, 2**32 - 1))
def test_reference_centred_sum_equals_plain_weighted_sum(seed):
    inst = fusion_instance(np.random.default_rng(seed))
    h_s, (z, _) = tgmf_path(inst)
    s = view_weights(inst["bp"], h_s).data
    plain = np.einsum("nm,nmd->nd", s, inst["bp"].features.data)
    assert np.max(np.abs(z.data - plain)) <= 1e-12


@given(st.integers(0, 2**32 - 1), st.floats(-100, 100))
def test_top_view_stable_under_logit_shift(seed, shift):
    inst = fusion_instance(np.random.default_rng(seed))
    h_s, _ = tgmf_path(inst)
    shifted = Tensor(h_s.data + shift)
    assert np.argmax(h_s.data) == np.argmax(shifted.data)
    a = view_weights(inst["bp"], h_s).data
    b = view_weights(inst["bp"], shifted).data
    assert np.max(np.abs(a - b)) <= 1e-12


def test_masked_mean_baseline(rng):
    feats = rng.normal(size=(3, 4, 2))
    valid = np.array([[1, 0, 1, 0], [0, 0, 0, 0], [1, 1, 1, 1]], dtype=bool)
    feats[~valid] = 0.0
    z, ok = masked_mean_views(BackProjectionResult(Tensor(feats), valid))
    assert np.allclose(z.data[0], feats[0, [0, 2]].mean(axis=0), atol=1e-15)
    assert np.all(z.data[1] == 0.0) and ok.tolist() == [True, False, True]
    assert np.allclose(z.data[2], feats[2].mean(axis=0), atol=1e-15)


def test_tgmf_path_gradients():
    for seed in range(10):
        case = tgmf_case(seed)
        assert grad_check(case.fn, case.inputs) <= 1e-6
