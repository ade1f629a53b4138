"""
Generator/discriminator pair, adversarial training, and train-with-generation.

The generator maps ``N(0, I)`` noise through one leaky-ReLU hidden layer to
the encoded row width, then applies per-block output heads: a softmax over
every one-hot block and a squashing (or identity) head on each continuous
entry. The discriminator maps an encoded row through one leaky-ReLU hidden
layer to a single logit read through a sigmoid.

``train_with_generation`` draws a quota of synthetic rows after every
epoch's updates instead of only at the end, following a
:class:`~dggan.schedule.GenerationSchedule`.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import codec
from .codec import BlockLayout, EncodedMatrix, NormalizerParams
from .errors import CheckpointFormatError, ConfigError, NumericError, ScheduleError, ShapeError
from .kernel import (
    AdamState,
    MlpParams,
    adam_step,
    backward_mlp,
    bce_logit_grad,
    bce_loss,
    forward_mlp,
    sigmoid,
    softmax,
)
from .schedule import GenerationSchedule, build_schedule
from .table import ColumnSpec, DataTable, schema_from_json, schema_to_json

CHECKPOINT_MAGIC = b"DGGANCK1"
CHECKPOINT_VERSION = 1

SIGMOID_HEAD = "sigmoid"
TANH_HEAD = "tanh"
IDENTITY_HEAD = "identity"


@dataclass
class GanConfig:
    noise_dim: int = 128
    gen_hidden: int = 256
    disc_hidden: int = 256
    gen_slope: float = 0.8
    disc_slope: float = 0.1
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 512
    epochs: int = 50
    disc_steps_per_gen_step: int = 1
    seed: int = 0
    init_std: float = 0.02
    normalization: str = codec.DEFAULT_METHOD

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("noise_dim", "gen_hidden", "disc_hidden", "batch_size", "epochs",
                     "disc_steps_per_gen_step"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {v!r}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        for name in ("gen_slope", "disc_slope"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ConfigError(f"{name} must be in (0, 1], got {v}")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1 or not self.epsilon > 0:
            raise ConfigError("Adam betas must be in [0, 1) and epsilon positive")
        if not self.init_std > 0:
            raise ConfigError(f"init_std must be positive, got {self.init_std}")
        if self.normalization not in codec.METHODS:
            raise ConfigError(f"unknown normalization {self.normalization!r}")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "GanConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ConfigError(f"unknown GAN config keys: {unknown}")
        return cls(**obj)


# ---------------------------------------------------------------------------
# Networks


def head_kinds(layout: BlockLayout, params: dict[str, NormalizerParams]) -> dict[str, str]:
    """Output head of each continuous column, chosen from its normalizer's range."""
    heads = {}
    for b in layout.continuous():
        method = params[b.name].method
        if method == codec.MIN_MAX:
            heads[b.name] = SIGMOID_HEAD
        elif method == codec.MAX_ABSOLUTE:
            heads[b.name] = TANH_HEAD
        else:
            heads[b.name] = IDENTITY_HEAD
    return heads


def _init_mlp(rng, in_dim, hidden, out_dim, slope, std):
    w1 = rng.normal(0.0, std, size=(in_dim, hidden))
    w2 = rng.normal(0.0, std, size=(hidden, out_dim))
    return MlpParams(w1, np.zeros(hidden), w2, np.zeros(out_dim), slope)


def init_networks(config: GanConfig, encoded_width: int, rng: np.random.Generator):
    """Generator ``noise_dim -> gen_hidden -> width`` and discriminator ``width -> disc_hidden -> 1``."""
    if encoded_width < 1:
        raise ShapeError(f"encoded width must be >= 1, got {encoded_width}")
    gen = _init_mlp(rng, config.noise_dim, config.gen_hidden, encoded_width,
                    config.gen_slope, config.init_std)
    disc = _init_mlp(rng, encoded_width, config.disc_hidden, 1,
                     config.disc_slope, config.init_std)
    return gen, disc


@dataclass
class _GenCache:
    mlp: object
    output: np.ndarray


def _apply_heads(raw: np.ndarray, layout: BlockLayout, heads: dict[str, str]) -> np.ndarray:
    out = np.empty_like(raw)
    for b in layout.blocks:
        part = raw[:, b.offset : b.stop]
        if b.kind == codec.CATEGORICAL:
            out[:, b.offset : b.stop] = softmax(part, axis=1)
        elif heads.get(b.name, SIGMOID_HEAD) == SIGMOID_HEAD:
            out[:, b.offset : b.stop] = sigmoid(part)
        elif heads[b.name] == TANH_HEAD:
            out[:, b.offset : b.stop] = np.tanh(part)
        else:
            out[:, b.offset : b.stop] = part
    return out


def _heads_backward(grad_out, out, layout, heads):
    grad = np.empty_like(grad_out)
    for b in layout.blocks:
        sl = slice(b.offset, b.stop)
        g, y = grad_out[:, sl], out[:, sl]
        if b.kind == codec.CATEGORICAL:
            grad[:, sl] = y * (g - (g * y).sum(axis=1, keepdims=True))
        elif heads.get(b.name, SIGMOID_HEAD) == SIGMOID_HEAD:
            grad[:, sl] = g * y * (1.0 - y)
        elif heads[b.name] == TANH_HEAD:
            grad[:, sl] = g * (1.0 - y * y)
        else:
            grad[:, sl] = g
    return grad


def _generator_forward_cached(gen, noise, layout, heads):
    cache = forward_mlp(gen, noise)
    if cache.output_pre.shape[1] != layout.width:
        raise ShapeError(
            f"generator emits {cache.output_pre.shape[1]} columns, layout width is {layout.width}"
        )
    return _GenCache(cache, _apply_heads(cache.output_pre, layout, heads))


def generator_forward(gen: MlpParams, noise, layout: BlockLayout, heads: dict[str, str] | None = None):
    """Encoded synthetic rows for a batch of noise vectors.

    ``heads`` maps continuous column names to ``"sigmoid"``, ``"tanh"`` or
    ``"identity"``; unlisted columns use the sigmoid head.
    """
    noise = np.asarray(noise, dtype=np.float64)
    if noise.ndim != 2 or noise.shape[1] != gen.in_dim:
        raise ShapeError(f"noise shape {noise.shape} does not match noise_dim={gen.in_dim}")
    return _generator_forward_cached(gen, noise, layout, heads or {}).output


def discriminator_loss_and_grads(disc: MlpParams, real: np.ndarray, fake: np.ndarray):
    """BCE with target 1 on ``real`` rows and 0 on ``fake`` rows, plus its gradients."""
    x = np.vstack([real, fake])
    y = np.concatenate([np.ones(real.shape[0]), np.zeros(fake.shape[0])])[:, None]
    cache = forward_mlp(disc, x)
    logits = cache.output_pre
    loss = bce_loss(sigmoid(logits), y)
    grads = backward_mlp(disc, cache, bce_logit_grad(logits, y))
    return loss, grads


def generator_loss_and_grads(gen: MlpParams, disc: MlpParams, noise, layout, heads):
    """Non-saturating generator loss ``BCE(D(G(z)), 1)`` and its generator gradients."""
    gcache = _generator_forward_cached(gen, noise, layout, heads)
    dcache = forward_mlp(disc, gcache.output)
    logits = dcache.output_pre
    y = np.ones_like(logits)
    loss = bce_loss(sigmoid(logits), y)
    dgrads = backward_mlp(disc, dcache, bce_logit_grad(logits, y))
    d_raw = _heads_backward(dgrads.input, gcache.output, layout, heads)
    return loss, backward_mlp(gen, gcache.mlp, d_raw)


@dataclass
class GanState:
    """Mutable training state: both networks, their optimizers and the RNG."""

    config: GanConfig
    layout: BlockLayout
    heads: dict[str, str]
    gen: MlpParams
    disc: MlpParams
    gen_opt: AdamState
    disc_opt: AdamState
    rng: np.random.Generator

    @classmethod
    def create(cls, config: GanConfig, layout: BlockLayout, heads=None, rng=None) -> "GanState":
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        gen, disc = init_networks(config, layout.width, rng)
        opt = dict(lr=config.lr, beta1=config.beta1, beta2=config.beta2, epsilon=config.epsilon)
        return cls(config, layout, dict(heads or {}), gen, disc,
                   AdamState.zeros_like(gen, **opt), AdamState.zeros_like(disc, **opt), rng)

    def noise(self, n: int) -> np.ndarray:
        return self.rng.standard_normal((n, self.config.noise_dim))


def _finite(loss, who):
    if not math.isfinite(loss):
        raise NumericError(f"{who} loss became non-finite ({loss})")
    return loss


def discriminator_step(state: GanState, real_batch) -> float:
    """One Adam step on the discriminator against an equal-sized fake batch."""
    real_batch = np.asarray(real_batch, dtype=np.float64)
    if real_batch.shape[0] == 0:
        raise ValueError("real batch is empty")
    fake = generator_forward(state.gen, state.noise(real_batch.shape[0]), state.layout, state.heads)
    loss, grads = discriminator_loss_and_grads(state.disc, real_batch, fake)
    _finite(loss, "discriminator")
    state.disc, state.disc_opt = adam_step(state.disc, grads, state.disc_opt)
    return loss


def generator_step(state: GanState, batch_size: int) -> float:
    """One Adam step on the generator through a frozen discriminator."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    loss, grads = generator_loss_and_grads(
        state.gen, state.disc, state.noise(batch_size), state.layout, state.heads
    )
    _finite(loss, "generator")
    state.gen, state.gen_opt = adam_step(state.gen, grads, state.gen_opt)
    return loss


# ---------------------------------------------------------------------------
# Checkpoints


@dataclass
class Checkpoint:
    config: GanConfig
    generator: MlpParams
    discriminator: MlpParams
    codec_params: dict[str, NormalizerParams]
    schema: list[ColumnSpec]
    rng_state: dict = field(default_factory=dict)

    @property
    def layout(self) -> BlockLayout:
        return BlockLayout.from_schema(self.schema)

    @property
    def heads(self) -> dict[str, str]:
        return head_kinds(self.layout, self.codec_params)


def _tensors(ck: Checkpoint):
    for prefix, net in (("generator", ck.generator), ("discriminator", ck.discriminator)):
        for name, t in net.tensors().items():
            yield f"{prefix}.{name}", t


def checkpoint_bytes(ck: Checkpoint) -> bytes:
    manifest = [{"name": n, "shape": list(t.shape)} for n, t in _tensors(ck)]
    header = {
        "version": CHECKPOINT_VERSION,
        "config": ck.config.to_json(),
        "schema": schema_to_json(ck.schema),
        "codec": {k: v.to_json() for k, v in sorted(ck.codec_params.items())},
        "slopes": {"generator": ck.generator.negative_slope,
                   "discriminator": ck.discriminator.negative_slope},
        "rng_state": ck.rng_state,
        "tensors": manifest,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = b"".join(np.ascontiguousarray(t, dtype="<f8").tobytes() for _, t in _tensors(ck))
    return CHECKPOINT_MAGIC + struct.pack("<I", len(head)) + head + body


def save_checkpoint(ck: Checkpoint, path) -> None:
    Path(path).write_bytes(checkpoint_bytes(ck))


def load_checkpoint(path) -> Checkpoint:
    """Read a checkpoint written by :func:`save_checkpoint`.

    Raises :class:`CheckpointFormatError` for a bad magic or version and
    :class:`OSError` for a truncated file.
    """
    data = Path(path).read_bytes()
    if len(data) < 12:
        if CHECKPOINT_MAGIC.startswith(data[:8]):
            raise OSError(f"{path}: truncated checkpoint ({len(data)} bytes)")
        raise CheckpointFormatError(f"{path}: not a checkpoint file (bad magic)")
    if data[:8] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path}: not a checkpoint file (bad magic {data[:8]!r})")
    (hlen,) = struct.unpack("<I", data[8:12])
    if len(data) < 12 + hlen:
        raise OSError(f"{path}: truncated checkpoint header")
    try:
        header = json.loads(data[12 : 12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"{path}: corrupt header: {exc}") from exc
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"{path}: unsupported checkpoint version {header.get('version')!r}")

    pos = 12 + hlen
    tensors = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        if pos + nbytes > len(data):
            raise OSError(f"{path}: truncated tensor data for {entry['name']}")
        tensors[entry["name"]] = np.frombuffer(data[pos : pos + nbytes], dtype="<f8").reshape(shape).astype(np.float64)
        pos += nbytes
    if pos != len(data):
        raise CheckpointFormatError(f"{path}: {len(data) - pos} trailing bytes after tensor data")

    def net(prefix):
        return MlpParams(
            negative_slope=header["slopes"][prefix],
            **{n: tensors[f"{prefix}.{n}"] for n in ("w1", "b1", "w2", "b2")},
        )

    return Checkpoint(
        config=GanConfig.from_json(header["config"]),
        generator=net("generator"),
        discriminator=net("discriminator"),
        codec_params={k: NormalizerParams.from_json(v) for k, v in header["codec"].items()},
        schema=schema_from_json(header["schema"]),
        rng_state=header["rng_state"],
    )


def sample(ck: Checkpoint, n: int, seed: int | None = None, sample_categories: bool = False) -> DataTable:
    """Decode ``n`` fresh synthetic rows from a checkpoint.

    With ``seed=None`` the RNG resumes from the state stored in the checkpoint.
    """
    if seed is not None:
        rng = np.random.default_rng(seed)
    else:
        rng = np.random.default_rng()
        rng.bit_generator.state = ck.rng_state
    return _sample_rows(ck.generator, ck.layout, ck.heads, ck.schema, ck.codec_params,
                        ck.config.noise_dim, n, rng, sample_categories)


def _sample_rows(gen, layout, heads, schema, params, noise_dim, n, rng, sample_categories=False):
    noise = rng.standard_normal((n, noise_dim))
    out = generator_forward(gen, noise, layout, heads)
    return codec.decode_matrix(EncodedMatrix(layout, out), schema, params,
                               sample=sample_categories, rng=rng)


# ---------------------------------------------------------------------------
# Training


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    synthetic: DataTable
    log: list[dict]


def concat_tables(schema: Sequence[ColumnSpec], parts: Sequence[DataTable]) -> DataTable:
    if not parts:
        cols = [np.zeros(0, dtype=np.int64 if s.is_categorical else np.float64) for s in schema]
        return DataTable(schema, cols)
    return DataTable(schema, [np.concatenate(c) for c in zip(*(p.columns for p in parts))])


def train_with_generation(
    table: DataTable,
    config: GanConfig,
    schedule: GenerationSchedule,
    update: bool = True,
    on_epoch: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Train the GAN and pool the per-epoch synthetic quotas.

    Each epoch shuffles the real rows, runs ``disc_steps_per_gen_step``
    discriminator steps and one generator step per full batch (the trailing
    partial batch is dropped; a table smaller than one batch is used whole),
    then draws that epoch's quota from the updated generator. ``update=False``
    skips shuffling and all parameter updates.
    """
    if schedule.epochs != config.epochs:
        raise ScheduleError(f"schedule has {schedule.epochs} epochs, config has {config.epochs}")
    if len(schedule.quotas) != schedule.epochs or sum(schedule.quotas) != schedule.n_target:
        raise ScheduleError("schedule quotas do not cover the synthetic row target")
    if table.n_rows == 0:
        raise ValueError("cannot train on an empty table")

    encoded, params = codec.encode_table(table, config.normalization)
    data = encoded.data
    layout = encoded.layout
    heads = head_kinds(layout, params)
    state = GanState.create(config, layout, heads)

    batch = min(config.batch_size, data.shape[0])
    n_batches = data.shape[0] // batch
    parts, log, cumulative = [], [], 0
    for epoch, quota in enumerate(schedule.quotas, start=1):
        d_losses, g_losses = [], []
        if update:
            order = state.rng.permutation(data.shape[0])
            for k in range(n_batches):
                real = data[order[k * batch : (k + 1) * batch]]
                for _ in range(config.disc_steps_per_gen_step):
                    d_losses.append(discriminator_step(state, real))
                g_losses.append(generator_step(state, batch))
        if quota:
            parts.append(_sample_rows(state.gen, layout, heads, table.schema, params,
                                      config.noise_dim, quota, state.rng))
        cumulative += quota
        entry = {
            "epoch": epoch,
            "disc_loss": float(np.mean(d_losses)) if d_losses else None,
            "gen_loss": float(np.mean(g_losses)) if g_losses else None,
            "quota": quota,
            "cumulative_quota": cumulative,
        }
        log.append(entry)
        if on_epoch is not None:
            on_epoch(entry)

    ck = Checkpoint(config, state.gen, state.disc, params, list(table.schema),
                    _jsonable(state.rng.bit_generator.state))
    return TrainResult(ck, concat_tables(table.schema, parts), log)


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=int))


def write_epoch_log(log: Sequence[dict], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for entry in log:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Grid search


@dataclass
class TuneResult:
    epoch_grid: list[int]
    first_item_grid: list[float]
    scores: np.ndarray
    best_epochs: int
    best_first_item: float
    best_score: float

    def to_json(self) -> dict:
        return {
            "epoch_grid": list(self.epoch_grid),
            "first_item_grid": list(self.first_item_grid),
            "scores": self.scores.tolist(),
            "best": {"epochs": self.best_epochs, "first_item": self.best_first_item,
                     "score": self.best_score},
        }


def tune_schedule(
    table: DataTable,
    config: GanConfig,
    epoch_grid: Sequence[int],
    first_item_grid: Sequence[float],
    evaluator: Callable[[DataTable, DataTable], float] | None = None,
    total: float = 100.0,
    n_target: int | None = None,
) -> TuneResult:
    """Score a geometric schedule for every (epochs, first item) cell.

    ``evaluator(real, synth)`` defaults to the overall fidelity score. The
    best cell maximizes the score; ties go to fewer epochs, then to the
    smaller first item.
    """
    from .metrics import overall_score

    if not epoch_grid or not first_item_grid:
        raise ValueError("both grids must be non-empty")
    evaluator = evaluator or overall_score
    n_target = table.n_rows if n_target is None else n_target
    scores = np.zeros((len(epoch_grid), len(first_item_grid)))
    for i, E in enumerate(epoch_grid):
        for j, a in enumerate(first_item_grid):
            cfg = GanConfig.from_json({**config.to_json(), "epochs": int(E)})
            sched = build_schedule("geometric", n_target, int(E), a, total)
            synth = train_with_generation(table, cfg, sched).synthetic
            scores[i, j] = evaluator(table, synth)
    cells = sorted(
        ((i, j) for i in range(len(epoch_grid)) for j in range(len(first_item_grid))),
        key=lambda c: (-scores[c], epoch_grid[c[0]], first_item_grid[c[1]]),
    )
    bi, bj = cells[0]
    return TuneResult(list(epoch_grid), list(first_item_grid), scores,
                      int(epoch_grid[bi]), float(first_item_grid[bj]), float(scores[bi, bj]))
