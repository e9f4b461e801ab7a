import itertools
import json

import numpy as np
import pytest

from dspnet.advp import advp
from dspnet.config import RunConfig, smoke_config
from dspnet.errors import ConfigError
from dspnet.geometry import back_project
from dspnet.heads import fusion_head
from dspnet.mcgr import mcgr_forward
from dspnet.model import forward, init_params
from dspnet.scenegen import generate_split
from dspnet.scenegen.encoders import encode_text, encode_views, seed_point_features
from dspnet.tensorcore import Tensor, checkpoint
from dspnet.tgmf import fuse_views, global_pool_text, global_pool_views, masked_mean_views, view_logits
from dspnet.training import bench_latency, evaluate, inspect_views, load_checkpoint, save_checkpoint, train


@pytest.fixture(scope="module")
def samples():
    return generate_split(smoke_config(), "train")


def answer_logits(config, samples, fuse="tgmf", gated=True, cross=True):
    """Pipeline assembled by hand with an explicit choice of each stage."""
    params = init_params(config)
    enc = params.scope("enc")
    sample = samples[0]
    z_t, mask = encode_text(sample.tokens, enc, config.max_tokens)
    z_p, coords, _ = seed_point_features(sample.points, config, enc)
    if fuse == "none":
        z_i = Tensor(np.zeros((config.n_p, config.d_i)))
    else:
        feats = encode_views(sample, enc)
        bp = back_project(coords, sample.views, config.depth_tol, feature_maps=feats)
        if fuse == "tgmf":
            h_s = view_logits(global_pool_views(feats), global_pool_text(z_t, mask), params.scope("tgmf"))
            z_i, _ = fuse_views(bp, h_s)
        else:
            z_i, _ = masked_mean_views(bp)
    z_v = advp(z_i, z_p, params.scope("advp"), gated=gated)
    out = mcgr_forward(z_v, coords, z_t, mask, params.scope("mcgr"), config.k, heads=config.n_heads,
                       cross_attention=cross)
    return fusion_head(out.e_t, out.e_c, mask, params.scope("head")).answer_logits.data


@pytest.mark.parametrize("toggle, stage", [
    ({}, {}),
    ({"tgmf": False}, {"fuse": "mean"}),
    ({"advp": False}, {"gated": False}),
    ({"mcgr": False}, {"cross": False}),
    ({"images": False}, {"fuse": "none"}),
])
def test_toggles_select_baseline_stage(samples, toggle, stage):
    config = smoke_config(**toggle)
    got = forward(init_params(config), samples[0], config).outputs.answer_logits.data
    assert np.array_equal(got, answer_logits(config, samples, **stage))


@pytest.mark.parametrize("tgmf, advp_on, mcgr", list(itertools.product([True, False], repeat=3)))
def test_ablation_grid_runs(samples, tgmf, advp_on, mcgr):
    config = smoke_config(tgmf=tgmf, advp=advp_on, mcgr=mcgr)
    result = train(config, samples=samples[:2])
    assert np.isfinite(result.metrics[-1]["train_loss"])


def test_zero_epochs_keeps_initialization(tmp_path, samples):
    config = smoke_config(epochs=0)
    result = train(config, tmp_path, samples)
    assert result.metrics == []
    state, _ = checkpoint.load(result.checkpoint)
    init = init_params(config).state()
    assert all(np.array_equal(state[k], init[k]) for k in init)


def test_same_seed_bitwise_identical_runs(tmp_path, samples):
    config = smoke_config(epochs=2)
    a = train(config, tmp_path / "a", samples)
    b = train(config, tmp_path / "b", samples)
    assert a.checkpoint.read_bytes() == b.checkpoint.read_bytes()
    assert (tmp_path / "a" / "metrics.json").read_bytes() == (tmp_path / "b" / "metrics.json").read_bytes()


def test_different_seed_changes_weights(tmp_path, samples):
    a = train(smoke_config(seed=0), tmp_path / "a", samples)
    b = train(smoke_config(seed=1), tmp_path / "b", samples)
    assert a.checkpoint.read_bytes() != b.checkpoint.read_bytes()


def test_checkpoint_round_trip_reproduces_evaluation(tmp_path, samples):
    config = smoke_config(epochs=2)
    result = train(config, tmp_path, samples)
    params, loaded = load_checkpoint(result.checkpoint)
    assert loaded == config
    assert json.dumps(evaluate(params, loaded, samples)) == json.dumps(evaluate(result.params, config, samples))


def test_evaluating_train_split_matches_training_report(samples):
    config = smoke_config(epochs=3)
    result = train(config, samples=samples)
    assert evaluate(result.params, config, samples)["em"] == result.metrics[-1]["train"]["em"]


def test_top_k_over_all_answers_is_one(samples):
    config = smoke_config()
    report = evaluate(init_params(config), config, samples, ks=(1, config.n_answers))
    assert report["em"][f"em@{config.n_answers}"] == 1.0
    assert set(report["per_type"]) <= {"What", "How", "Which", "Is"}
    assert sum(v["n"] for v in report["per_type"].values()) == report["n"] == len(samples)


def test_mismatched_dims_rejected(tmp_path):
    path = save_checkpoint(tmp_path / "c.dspn", init_params(smoke_config()), smoke_config())
    with pytest.raises(ConfigError):
        load_checkpoint(path, smoke_config(d_m=16))


def test_stop_at_target_ends_early(samples):
    config = smoke_config(epochs=50, stop_at_em1=0.0)
    assert len(train(config, samples=samples).metrics) == 1


def test_learning_rate_warms_up(samples):
    config = smoke_config(epochs=4, batch_size=2, warmup_steps=6)
    lrs = [r["lr"] for r in train(config, samples=samples).metrics]
    assert lrs[0] < lrs[1] < lrs[2]


# -- view inspection ------------------------------------------------------------------------


def test_zero_query_projection_gives_uniform_weights(samples):
    config = smoke_config()
    params = init_params(config)
    params["tgmf.w_q"].data[:] = 0.0
    record = inspect_views(params, config, samples[0])
    assert np.allclose(record["weights"], 1 / 3, rtol=0, atol=1e-15)
    assert sum(record["points_by_valid_view_count"]) == record["n_points"] == config.n_p


def test_single_view_weight_is_one():
    config = smoke_config(m=1)
    sample = generate_split(config, "test")[0]
    assert inspect_views(init_params(config), config, sample)["weights"] == [1.0]


def test_inspection_repeatable(samples):
    config = smoke_config()
    params = init_params(config)
    assert inspect_views(params, config, samples[1]) == inspect_views(params, config, samples[1])


def test_inspection_needs_fusion(samples):
    config = smoke_config(tgmf=False)
    with pytest.raises(ConfigError):
        inspect_views(init_params(config), config, samples[0])


# -- latency ----------------------------------------------------------------------------------


def test_single_repetition_has_zero_spread():
    config = smoke_config()
    record = bench_latency(init_params(config), config, [2, 3], repetitions=1)
    assert [r["std_ms"] for r in record["results"]] == [0.0, 0.0]


def test_repeated_count_is_stable():
    config = smoke_config()
    rows = bench_latency(init_params(config), config, [3, 3], repetitions=15)["results"]
    a, b = rows
    assert abs(a["mean_ms"] - b["mean_ms"]) <= 3 * (a["std_ms"] + b["std_ms"]) + 0.05 * a["mean_ms"]


def test_bench_rejects_bad_counts():
    config = smoke_config()
    with pytest.raises(ConfigError):
        bench_latency(init_params(config), config, [0])
    with pytest.raises(ConfigError):
        bench_latency(init_params(config), config, [2], repetitions=0)


# -- configuration --------------------------------------------------------------------------------


def test_config_validation():
    for bad in ({"k": 600}, {"d_m": 0}, {"task": "x"}, {"templates": ("nope",)}, {"d_m": 48, "heads": 5}):
        with pytest.raises(ConfigError):
            RunConfig(**bad)
    assert RunConfig().n_answers == 16 and RunConfig().n_heads == 2


def test_config_file_round_trip(tmp_path):
    config = smoke_config(task="sqa", templates=("is_there",))
    config.save(tmp_path / "c.json")
    assert RunConfig.load(tmp_path / "c.json") == config
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"bogus": 1})
