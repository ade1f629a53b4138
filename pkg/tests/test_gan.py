import json
import math

import numpy as np
import pytest

from dggan.codec import BlockLayout, EncodedMatrix, decode_matrix, encode_table
from dggan.errors import CheckpointFormatError, ConfigError, NumericError, ScheduleError, ShapeError
from dggan.gan import (
    CHECKPOINT_MAGIC,
    Checkpoint,
    GanConfig,
    GanState,
    checkpoint_bytes,
    discriminator_step,
    generator_forward,
    generator_loss_and_grads,
    generator_step,
    head_kinds,
    init_networks,
    load_checkpoint,
    sample,
    save_checkpoint,
    train_with_generation,
    tune_schedule,
    write_epoch_log,
)
from dggan.kernel import MlpParams, gradient_check
from dggan.schedule import build_schedule
from dggan.table import CATEGORICAL, CONTINUOUS, ColumnSpec
from dggan.toy import imbalanced_table

SMALL = dict(noise_dim=4, gen_hidden=8, disc_hidden=8, batch_size=16, epochs=3, seed=7)

SCHEMA = [
    ColumnSpec("x", CONTINUOUS),
    ColumnSpec("c", CATEGORICAL, ("a", "b", "c")),
    ColumnSpec("y", CONTINUOUS),
    ColumnSpec("z", CONTINUOUS),
]
LAYOUT = BlockLayout.from_schema(SCHEMA)
HEADS = {"x": "sigmoid", "y": "tanh", "z": "identity"}


# -- config -------------------------------------------------------------------


def test_config_defaults():
    c = GanConfig()
    assert (c.gen_slope, c.disc_slope, c.lr) == (0.8, 0.1, 1e-4)
    assert c.disc_steps_per_gen_step == 1 and c.normalization == "min_max"


@pytest.mark.parametrize("bad", [dict(lr=0.0), dict(gen_slope=0.0), dict(disc_slope=1.5),
                                 dict(batch_size=0), dict(epochs=0), dict(normalization="log")])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        GanConfig(**bad)


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="dropout"):
        GanConfig.from_json({"dropout": 0.5})
    assert GanConfig.from_json(GanConfig(**SMALL).to_json()) == GanConfig(**SMALL)


# -- networks -----------------------------------------------------------------


def test_init_determinism_and_shapes():
    cfg = GanConfig(**SMALL)
    g1, d1 = init_networks(cfg, 6, np.random.default_rng(3))
    g2, d2 = init_networks(cfg, 6, np.random.default_rng(3))
    for a, b in zip(list(g1.tensors().values()) + list(d1.tensors().values()),
                    list(g2.tensors().values()) + list(d2.tensors().values())):
        assert np.array_equal(a, b)
    assert (g1.in_dim, g1.hidden_dim, g1.out_dim) == (4, 8, 6)
    assert (d1.in_dim, d1.hidden_dim, d1.out_dim) == (6, 8, 1)
    assert not g1.b1.any() and not d1.b2.any()
    assert (g1.negative_slope, d1.negative_slope) == (0.8, 0.1)


def test_init_weight_statistics():
    cfg = GanConfig(noise_dim=100, gen_hidden=100)
    g, _ = init_networks(cfg, 3, np.random.default_rng(0))
    assert g.w1.size == 10_000
    assert -0.01 < g.w1.mean() < 0.01
    assert g.w1.std() == pytest.approx(0.02, rel=0.05)


def test_init_rejects_zero_width():
    with pytest.raises(ShapeError):
        init_networks(GanConfig(**SMALL), 0, np.random.default_rng(0))


def zero_gen(width=6, noise_dim=4):
    return MlpParams(np.zeros((noise_dim, 5)), np.zeros(5), np.zeros((5, width)), np.zeros(width), 0.8)


def test_zero_generator_outputs_uniform_blocks():
    out = generator_forward(zero_gen(), np.ones((3, 4)), LAYOUT, HEADS)
    assert np.allclose(out[:, 1:4], 1 / 3, atol=1e-15)
    assert np.allclose(out[:, 0], 0.5) and np.allclose(out[:, 4:], 0.0)


def test_generator_heads_ranges():
    rng = np.random.default_rng(2)
    gen = MlpParams(rng.normal(0, 1, (4, 5)), rng.normal(size=5), rng.normal(0, 1, (5, 6)),
                    rng.normal(size=6), 0.8)
    out = generator_forward(gen, rng.standard_normal((200, 4)), LAYOUT, HEADS)
    assert np.max(np.abs(out[:, 1:4].sum(axis=1) - 1)) <= 1e-12
    assert ((out[:, 0] > 0) & (out[:, 0] < 1)).all()
    assert ((out[:, 4] >= -1) & (out[:, 4] <= 1)).all()
    assert out[:, 5].min() < 0 or out[:, 5].max() > 1  # identity head is unbounded


def test_generator_forward_shape_errors():
    with pytest.raises(ShapeError):
        generator_forward(zero_gen(), np.ones((2, 3)), LAYOUT)
    with pytest.raises(ShapeError):
        generator_forward(zero_gen(width=5), np.ones((2, 4)), LAYOUT)


def test_head_kinds_follow_normalizer():
    t = imbalanced_table(50)
    for method, head in (("min_max", "sigmoid"), ("max_absolute", "tanh"), ("standardization", "identity")):
        m, params = encode_table(t, method)
        assert head_kinds(m.layout, params) == {"value": head}


# -- adversarial steps --------------------------------------------------------


def toy_state(**kw):
    t = imbalanced_table(200, seed=1)
    m, params = encode_table(t)
    cfg = GanConfig(**{**SMALL, **kw})
    return GanState.create(cfg, m.layout, head_kinds(m.layout, params)), m.data


def test_discriminator_step_updates_only_discriminator():
    state, data = toy_state()
    gen_before = state.gen.copy()
    disc_before = state.disc.copy()
    loss = discriminator_step(state, data[:16])
    assert abs(loss - math.log(2)) < 0.2
    assert all(np.array_equal(a, b) for a, b in zip(gen_before.tensors().values(), state.gen.tensors().values()))
    assert not np.array_equal(disc_before.w1, state.disc.w1)
    assert state.disc_opt.t == 1 and state.gen_opt.t == 0


def test_generator_step_updates_only_generator():
    state, _ = toy_state()
    disc_before = state.disc.copy()
    gen_before = state.gen.copy()
    loss = generator_step(state, 16)
    assert abs(loss - math.log(2)) < 0.2
    assert all(np.array_equal(a, b) for a, b in zip(disc_before.tensors().values(), state.disc.tensors().values()))
    assert not np.array_equal(gen_before.w2, state.gen.w2)


def test_step_preconditions():
    state, data = toy_state()
    with pytest.raises(ValueError):
        discriminator_step(state, data[:0])
    with pytest.raises(ValueError):
        generator_step(state, 0)


def test_non_finite_loss_aborts():
    state, data = toy_state()
    d = state.disc
    state.disc = MlpParams(d.w1, d.b1, np.full_like(d.w2, np.nan), d.b2, d.negative_slope)
    with pytest.raises(NumericError, match="discriminator"):
        discriminator_step(state, data[:8])


def _gen_fd_case(seed, noise_dim=2, hidden=5):
    rng = np.random.default_rng(seed)
    gen = MlpParams(rng.normal(0, 0.7, (noise_dim, hidden)), rng.normal(0, 0.3, hidden),
                    rng.normal(0, 0.7, (hidden, LAYOUT.width)), rng.normal(0, 0.3, LAYOUT.width), 0.8)
    disc = MlpParams(rng.normal(0, 0.7, (LAYOUT.width, 7)), rng.normal(0, 0.3, 7),
                     rng.normal(0, 0.7, (7, 1)), rng.normal(0, 0.3, 1), 0.1)
    noise = rng.standard_normal((6, noise_dim))
    return gen, disc, noise


@pytest.mark.parametrize("seed", range(3))
def test_generator_gradient_through_discriminator_matches_fd(seed):
    gen, disc, noise = _gen_fd_case(seed)
    _, grads = generator_loss_and_grads(gen, disc, noise, LAYOUT, HEADS)

    def loss(g):
        return generator_loss_and_grads(g, disc, noise, LAYOUT, HEADS)[0]

    res = gradient_check(gen, loss, grads, tolerance=1e-5)
    assert res.passed, res


def test_thousand_steps_stay_finite():
    state, data = toy_state()
    rng = np.random.default_rng(0)
    for _ in range(500):
        batch = data[rng.integers(0, len(data), 16)]
        assert math.isfinite(discriminator_step(state, batch))
        assert math.isfinite(generator_step(state, 16))


# -- checkpoints --------------------------------------------------------------


@pytest.fixture(scope="module")
def trained():
    t = imbalanced_table(120, seed=2)
    cfg = GanConfig(**SMALL)
    return t, cfg, train_with_generation(t, cfg, build_schedule("uniform", 60, 3))


def test_checkpoint_fixpoint(tmp_path, trained):
    _, _, res = trained
    save_checkpoint(res.checkpoint, tmp_path / "a.ck")
    ck = load_checkpoint(tmp_path / "a.ck")
    save_checkpoint(ck, tmp_path / "b.ck")
    assert (tmp_path / "a.ck").read_bytes() == (tmp_path / "b.ck").read_bytes()
    assert np.array_equal(ck.generator.w1, res.checkpoint.generator.w1)
    assert ck.config == res.checkpoint.config and ck.schema == res.checkpoint.schema


def test_checkpoint_layout_on_disk(trained):
    _, _, res = trained
    raw = checkpoint_bytes(res.checkpoint)
    assert raw[:8] == CHECKPOINT_MAGIC
    n = int.from_bytes(raw[8:12], "little")
    header = json.loads(raw[12 : 12 + n].decode("utf-8"))
    assert header["version"] == 1
    floats = sum(math.prod(e["shape"]) for e in header["tensors"])
    assert len(raw) == 12 + n + 8 * floats


def test_corrupt_magic_and_truncation(tmp_path, trained):
    _, _, res = trained
    raw = checkpoint_bytes(res.checkpoint)
    (tmp_path / "bad.ck").write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(tmp_path / "bad.ck")
    (tmp_path / "short.ck").write_bytes(raw[:-5])
    with pytest.raises(OSError):
        load_checkpoint(tmp_path / "short.ck")


def test_sampling_same_before_and_after_reload(tmp_path, trained):
    _, _, res = trained
    before = sample(res.checkpoint, 100, seed=11)
    save_checkpoint(res.checkpoint, tmp_path / "m.ck")
    after = sample(load_checkpoint(tmp_path / "m.ck"), 100, seed=11)
    assert before.equals(after)
    assert sample(res.checkpoint, 5).equals(sample(load_checkpoint(tmp_path / "m.ck"), 5))


# -- training -----------------------------------------------------------------


def test_training_outputs(trained):
    t, _, res = trained
    assert res.synthetic.n_rows == 60
    assert res.synthetic.schema == t.schema
    assert [e["quota"] for e in res.log] == [20, 20, 20]
    assert [e["cumulative_quota"] for e in res.log] == [20, 40, 60]
    assert all(math.isfinite(e["disc_loss"]) and math.isfinite(e["gen_loss"]) for e in res.log)
    assert np.isfinite(res.synthetic.column("value")).all()


def test_training_is_deterministic(trained):
    t, cfg, res = trained
    again = train_with_generation(t, cfg, build_schedule("uniform", 60, 3))
    assert again.synthetic.equals(res.synthetic)
    assert checkpoint_bytes(again.checkpoint) == checkpoint_bytes(res.checkpoint)


@pytest.mark.parametrize("mode", ["all_at_end", "uniform", "geometric"])
def test_row_count_for_every_mode(mode):
    t = imbalanced_table(64)
    cfg = GanConfig(**SMALL)
    sched = build_schedule(mode, 37, 3, 10.0 if mode == "geometric" else None)
    assert train_with_generation(t, cfg, sched).synthetic.n_rows == 37


def test_untrained_anchor_matches_decoded_initial_samples():
    t = imbalanced_table(64)
    cfg = GanConfig(**SMALL)
    res = train_with_generation(t, cfg, build_schedule("all_at_end", 25, 3), update=False)
    m, params = encode_table(t)
    rng = np.random.default_rng(cfg.seed)
    gen, _ = init_networks(cfg, m.layout.width, rng)
    out = generator_forward(gen, rng.standard_normal((25, cfg.noise_dim)), m.layout,
                            head_kinds(m.layout, params))
    expected = decode_matrix(EncodedMatrix(m.layout, out), t.schema, params)
    assert res.synthetic.equals(expected)


def test_schedule_epoch_mismatch():
    with pytest.raises(ScheduleError):
        train_with_generation(imbalanced_table(32), GanConfig(**SMALL), build_schedule("uniform", 5, 4))


def test_small_table_uses_whole_table_batch():
    t = imbalanced_table(10)
    res = train_with_generation(t, GanConfig(**SMALL), build_schedule("uniform", 6, 3))
    assert all(e["disc_loss"] is not None for e in res.log)


def test_epoch_log_jsonl(tmp_path, trained):
    _, _, res = trained
    write_epoch_log(res.log, tmp_path / "log.jsonl")
    lines = (tmp_path / "log.jsonl").read_text().splitlines()
    assert len(lines) == 3
    assert set(json.loads(lines[0])) == {"epoch", "disc_loss", "gen_loss", "quota", "cumulative_quota"}


def test_on_epoch_callback():
    seen = []
    train_with_generation(imbalanced_table(32), GanConfig(**SMALL), build_schedule("uniform", 3, 3),
                          on_epoch=seen.append)
    assert [e["epoch"] for e in seen] == [1, 2, 3]


# -- tuning -------------------------------------------------------------------


def test_tune_single_cell():
    t = imbalanced_table(48)
    res = tune_schedule(t, GanConfig(**SMALL), [2], [20.0])
    assert res.scores.shape == (1, 1)
    assert (res.best_epochs, res.best_first_item) == (2, 20.0)
    assert 0 <= res.best_score <= 1


def test_tune_grid_shape_and_tie_break():
    t = imbalanced_table(48)
    res = tune_schedule(t, GanConfig(**SMALL), [3, 2], [10.0, 20.0, 30.0], evaluator=lambda r, s: 0.5)
    assert res.scores.shape == (2, 3)
    assert (res.best_epochs, res.best_first_item) == (2, 10.0)
    assert json.loads(json.dumps(res.to_json()))["best"]["epochs"] == 2


def test_tune_empty_grid():
    with pytest.raises(ValueError):
        tune_schedule(imbalanced_table(16), GanConfig(**SMALL), [], [1.0])


def test_checkpoint_object_roundtrip_fields(trained):
    _, _, res = trained
    ck = res.checkpoint
    assert isinstance(ck, Checkpoint)
    assert set(ck.codec_params) == {"value"}
