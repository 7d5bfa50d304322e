import json

import pytest

from energynorm.archcost import (
    STATED_MODEL_COUNT,
    ArchitectureConfig,
    ConfigError,
    SpatialCollapseError,
    conv_cost,
    count_cost,
    enumerate_study_configs,
    enumeration_report,
    gru_cost,
    gru_stack,
    conv_stack,
    head,
    load_configs,
    training_flops,
)


def test_mlp_single_layer_hand_count():
    rep = count_cost(ArchitectureConfig("MLP", linear_layers=1, linear_hidden=512))
    assert rep.params == 8192 * 512 + 512 + 512 * 10 + 10 == 4_199_946
    assert rep.flops_forward == 2 * 8192 * 512 + 2 * 512 * 10 == 8_398_848


def test_gru_layer_hand_count():
    params, flops = gru_cost(128, 128, 64)
    assert params == 3 * ((128 + 128) * 128 + 2 * 128) == 99_072
    assert flops == 2 * 3 * 128 * 256 * 64


def test_first_conv_layer_hand_count():
    assert conv_cost(1, 128, 128, 64) == (1_280, 18_874_368)


def test_rnn_first_layer_in_report():
    rep = count_cost(ArchitectureConfig("RNN", recurrent_layers=1, recurrent_hidden=128))
    assert rep.per_layer[0].params == 99_072
    assert rep.params == 99_072 + 128 * 10 + 10


@pytest.mark.parametrize("model_id, config", enumerate_study_configs())
def test_totals_are_sums_of_layers(model_id, config):
    rep = count_cost(config)
    assert rep.model_id == model_id
    assert rep.params == sum(layer.params for layer in rep.per_layer)
    assert rep.flops_forward == sum(layer.flops for layer in rep.per_layer)
    assert isinstance(rep.params, int) and isinstance(rep.flops_forward, int)


def test_enumeration_counts():
    configs = enumerate_study_configs()
    kinds = [c.kind for _, c in configs]
    assert kinds.count("MLP") == 10
    assert kinds.count("CNN") == 12
    assert len(configs) == 45
    assert len({mid for mid, _ in configs}) == 45
    rep = enumeration_report()
    assert rep["expanded_count"] == 45 and rep["stated_count"] == STATED_MODEL_COUNT == 43
    assert "43" in rep["note"]


def test_literal_728_kept():
    assert "crnn_c2_r2_h728_256" in {mid for mid, _ in enumerate_study_configs()}


def test_crnn_decomposes_into_stacks():
    cfg = ArchitectureConfig("CRNN", conv_layers=2, recurrent_layers=1, conv_channels=256, recurrent_hidden=64)
    convs, (c, h, w) = conv_stack(2, 256, (128, 64))
    grus = gru_stack(1, 64, c * h, w)
    cls = head(64, 10)
    rep = count_cost(cfg)
    assert rep.params == sum(x.params for x in convs + grus) + cls.params
    assert rep.flops_forward == sum(x.flops for x in convs + grus) + cls.flops


@pytest.mark.parametrize("kind, key", [("MLP", "linear"), ("CNN", "conv"), ("RNN", "recurrent")])
def test_width_monotone(kind, key):
    prev = None
    for width in (64, 128, 256, 512):
        kw = {f"{key}_layers": 2, ("conv_channels" if key == "conv" else f"{key}_hidden"): width}
        rep = count_cost(ArchitectureConfig(kind, **kw))
        if prev:
            assert rep.params > prev.params and rep.flops_forward > prev.flops_forward
        prev = rep


@pytest.mark.parametrize("kind, key, width", [("MLP", "linear_hidden", 1024), ("RNN", "recurrent_hidden", 256)])
def test_depth_monotone_dense_and_recurrent(kind, key, width):
    layers = "linear_layers" if kind == "MLP" else "recurrent_layers"
    prev = None
    for depth in (1, 2, 4, 8):
        rep = count_cost(ArchitectureConfig(kind, **{layers: depth, key: width}))
        if prev:
            assert rep.params > prev.params and rep.flops_forward > prev.flops_forward
        prev = rep


def test_conv_depth_raises_flops_but_pooling_can_shrink_params():
    one = count_cost(ArchitectureConfig("CNN", conv_layers=1, conv_channels=128))
    two = count_cost(ArchitectureConfig("CNN", conv_layers=2, conv_channels=128))
    assert two.flops_forward > one.flops_forward
    # the flattened head shrinks 4x per pooled layer and dominates the parameter count
    assert two.params < one.params


def test_spatial_collapse():
    count_cost(ArchitectureConfig("CNN", conv_layers=6, conv_channels=8))
    with pytest.raises(SpatialCollapseError):
        count_cost(ArchitectureConfig("CNN", conv_layers=7, conv_channels=8))


@pytest.mark.parametrize("kw", [
    dict(kind="MLP", linear_layers=1, linear_hidden=0),
    dict(kind="MLP", linear_layers=0, linear_hidden=8),
    dict(kind="CNN", conv_layers=1, conv_channels=8, recurrent_layers=1, recurrent_hidden=8),
    dict(kind="CRNN", conv_layers=1, conv_channels=8),
    dict(kind="TRANSFORMER", linear_layers=1, linear_hidden=8),
])
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        count_cost(ArchitectureConfig(**kw))


def test_training_flops():
    assert training_flops(10, 100, 10) == 3 * 10 * 100 * 10


def test_load_configs_roundtrip(tmp_path):
    configs = [c for _, c in enumerate_study_configs()[:5]]
    p = tmp_path / "c.json"
    p.write_text(json.dumps([c.to_dict() for c in configs]))
    assert load_configs(p) == configs
