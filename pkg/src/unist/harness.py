"""Run orchestration behind the CLI: training, evaluation, prediction and
the per-block gradient-check suite."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .config import RunConfig
from .data.dataset import ClipRecord, load_clip, load_dataset
from .data.pnm import write_f32, write_pgm
from .decoders import VSODDecoder, VSPDecoder
from .encoder import EncoderConfig, PyramidEncoder, VideoClip
from .engine import (
    Adam,
    Tensor,
    backward,
    dtype_scope,
    finite_difference_check,
    load_state,
    mul,
    no_grad,
    reduce_sum,
    save_state,
)
from .errors import ConfigError, DataError
from .metrics import (
    VSOD_METRICS,
    VSP_METRICS,
    MetricReport,
    auc_judd,
    cc_metric,
    mae,
    max_f,
    nss,
    s_measure,
    sim_metric,
)
from .model import UniSTModel
from .objectives import LossWeights, cc_loss, kl_loss, sim_loss, vsod_bce, vsp_loss
from .transformer import (
    AttentionScore,
    MultiScaleAggregate,
    SalAttention,
    SaliencyTransformer,
    SemanticGuidedBlock,
    StageConfig,
    TokenSequence,
    UpEmbedding,
    kv_pool_for_level,
    save_attention_score,
)

GRADCHECK_TOL = 1e-2


def build_model(config: RunConfig) -> UniSTModel:
    rng = np.random.default_rng(config.seed)
    return UniSTModel(
        task=config.task,
        channels=config.channels,
        clip_len=config.resolved_clip_len(),
        rng=rng,
        heads=config.heads,
        num_stages=config.num_stages,
        blocks_per_stage=config.blocks_per_stage,
        use_semantic_guided=not config.disable_semantic_guided,
        use_saliency_transfer=not config.disable_saliency_transfer,
        aggregate_kernel=config.aggregate_kernel,
    )


def _np_dtype(config: RunConfig):
    return np.float64 if config.dtype == "float64" else np.float32


def _check_record(config: RunConfig, record: ClipRecord) -> None:
    t, h, w, _ = record.frames.shape
    if (h, w) != (config.height, config.width):
        raise ConfigError(
            f"height/width: clip {record.clip_id!r} is {h}x{w}, config expects {config.height}x{config.width}"
        )
    if t != config.resolved_clip_len():
        raise ConfigError(
            f"clip_len: clip {record.clip_id!r} has T={t}, config expects {config.resolved_clip_len()}"
        )
    if config.task == "vsp" and (record.fixation is None or record.dense is None):
        raise DataError(f"clip {record.clip_id!r} has no VSP targets")
    if config.task == "vsod" and record.masks is None:
        raise DataError(f"clip {record.clip_id!r} has no VSOD masks")


def _format_row(values) -> str:
    return ",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in values)


def run_train(config: RunConfig, out_dir=None) -> dict:
    """Train on the configured dataset; writes loss.csv and checkpoints.

    Returns a summary dict with the final loss and artifact paths.
    """
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with dtype_scope(_np_dtype(config)):
        records = load_dataset(config.dataset_root, config.task)
        if not records:
            raise DataError(f"dataset root {config.dataset_root} contains no clips")
        for record in records:
            _check_record(config, record)

        model = build_model(config)
        optimizer = Adam(model.parameters(), lr=config.lr, betas=(config.beta1, config.beta2), eps=config.adam_eps)
        weights = LossWeights(config.lambda1, config.lambda2)
        dtype = _np_dtype(config)

        header = ["step", "loss"] + (["kl", "cc", "sim"] if config.task == "vsp" else [])
        loss_path = out / "loss.csv"
        final_loss = float("nan")
        with open(loss_path, "w") as log:
            log.write(",".join(header) + "\n")
            for step in range(1, config.steps + 1):
                record = records[(step - 1) % len(records)]
                frames = Tensor(record.frames.astype(dtype))
                if config.task == "vsp":
                    prediction = model(frames, out_size=record.dense.shape)
                    total, parts = vsp_loss(prediction, Tensor(record.dense.astype(dtype)), weights)
                    row = [step, float(total.data), parts["kl"], parts["cc"], parts["sim"]]
                else:
                    prediction = model(frames)
                    total = vsod_bce(prediction, Tensor(record.masks.astype(dtype)))
                    row = [step, float(total.data)]
                optimizer.zero_grad()
                backward(total)
                optimizer.step()
                final_loss = float(row[1])
                log.write(_format_row(row) + "\n")
                if config.checkpoint_every and step % config.checkpoint_every == 0:
                    save_state(out / f"checkpoint_step{step:07d}.ustc", model.state_arrays())
        checkpoint_path = out / "checkpoint_final.ustc"
        save_state(checkpoint_path, model.state_arrays())
    return {
        "final_loss": final_loss,
        "checkpoint": checkpoint_path,
        "loss_csv": loss_path,
        "steps": config.steps,
    }


def _load_model(config: RunConfig, checkpoint_path) -> UniSTModel:
    model = build_model(config)
    model.load_state_arrays(load_state(checkpoint_path))
    model.eval()
    return model


def run_eval(config: RunConfig, checkpoint_path, out_dir=None) -> MetricReport:
    """Evaluate a checkpoint over the dataset; writes report.csv + summary.json."""
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with dtype_scope(_np_dtype(config)):
        records = load_dataset(config.dataset_root, config.task)
        if not records:
            raise DataError(f"dataset root {config.dataset_root} contains no clips")
        for record in records:
            _check_record(config, record)
        model = _load_model(config, checkpoint_path)
        dtype = _np_dtype(config)

        report = MetricReport(VSP_METRICS if config.task == "vsp" else VSOD_METRICS)
        for record in records:
            frames = Tensor(record.frames.astype(dtype))
            with no_grad():
                if config.task == "vsp":
                    prediction = model(frames, out_size=record.dense.shape)
                else:
                    prediction = model(frames)
            p = np.asarray(prediction.data, dtype=np.float64)
            if config.task == "vsp":
                fix = record.fixation > 0.5
                report.add_sample(
                    record.clip_id,
                    {
                        "auc_judd": auc_judd(p, fix),
                        "nss": nss(p, fix),
                        "cc": cc_metric(p, record.dense),
                        "sim": sim_metric(p, record.dense),
                    },
                )
            else:
                g = record.masks
                report.add_sample(
                    record.clip_id,
                    {"mae": mae(p, g), "max_f": max_f(p, g), "s_measure": s_measure(p, g)},
                )
        report.write_csv(out / "report.csv")
        report.write_json(out / "summary.json")
    return report


def run_predict(config: RunConfig, checkpoint_path, clip_dir, out_dir=None, dump_scores: bool = False) -> list:
    """Predict on one clip directory; writes PGM maps plus float32 sidecars.

    Returns the list of written paths.
    """
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    with dtype_scope(_np_dtype(config)):
        record = load_clip(clip_dir, task=None)
        _check_record_frames_only(config, record)
        model = _load_model(config, checkpoint_path)
        frames = Tensor(record.frames.astype(_np_dtype(config)))
        with no_grad():
            prediction, scores = model.forward_with_scores(frames, out_size=(config.height, config.width))
        p = np.asarray(prediction.data, dtype=np.float64)
        if config.task == "vsp":
            base = out / f"{record.clip_id}_vsp"
            write_pgm(base.with_suffix(".pgm"), p)
            write_f32(base.with_suffix(".f32"), p)
            written += [base.with_suffix(".pgm"), base.with_suffix(".f32")]
        else:
            for t in range(p.shape[0]):
                base = out / f"{record.clip_id}_vsod_{t:05d}"
                write_pgm(base.with_suffix(".pgm"), p[t])
                write_f32(base.with_suffix(".f32"), p[t])
                written += [base.with_suffix(".pgm"), base.with_suffix(".f32")]
        if dump_scores:
            for stage_idx, score in enumerate(scores, start=1):
                for head in range(score.heads):
                    path = out / f"{record.clip_id}_scores_stage{stage_idx}_head{head}.usat"
                    save_attention_score(path, score, head)
                    written.append(path)
    return written


def _check_record_frames_only(config: RunConfig, record: ClipRecord) -> None:
    t, h, w, _ = record.frames.shape
    if (h, w) != (config.height, config.width) or t != config.resolved_clip_len():
        raise ConfigError(
            f"clip {record.clip_id!r} is T={t} {h}x{w}, config expects "
            f"T={config.resolved_clip_len()} {config.height}x{config.width}"
        )


# ---------------------------------------------------------------------------
# gradient-check suite


def _wsum(x: Tensor, rng: np.random.Generator) -> Tensor:
    """Scalar probe: weighted sum with fixed random weights (sensitive to
    every output coordinate), scaled so the scalar stays O(1) and the
    finite-difference noise floor stays far below real gradients."""
    probe = rng.standard_normal(x.shape) / np.sqrt(x.size)
    return reduce_sum(mul(x, Tensor(probe)))


def _gradcheck_blocks(config: RunConfig):
    """Yield (name, build) pairs; build() returns (loss_fn, checked_tensors)."""
    t = config.resolved_clip_len()
    h, w = config.height, config.width
    c1, c2, c3, c4 = config.channels
    heads = config.heads
    grids = {i: (h // 2 ** (i + 1), w // 2 ** (i + 1)) for i in (1, 2, 3, 4)}

    def rng_for(tag):
        return np.random.default_rng([config.seed, sum(map(ord, tag))])

    def encoder():
        rng = rng_for("encoder")
        module = PyramidEncoder(EncoderConfig(channels=config.channels), rng)
        frames = Tensor(rng.uniform(0.0, 1.0, size=(t, h, w, 3)), requires_grad=True)
        probes = []
        for i, c in enumerate(config.channels):
            shape = (t,) + grids[i + 1] + (c,)
            probes.append(rng.standard_normal(shape) / np.sqrt(np.prod(shape)))

        def loss_fn():
            pyramid = module(VideoClip(frames=frames))
            total = None
            for level, probe in zip(pyramid.levels, probes):
                term = reduce_sum(mul(level, Tensor(probe)))
                total = term if total is None else total + term
            return total

        return loss_fn, [("frames", frames)] + list(module.named_parameters())

    def semantic_guided():
        rng = rng_for("semantic_guided")
        module = SemanticGuidedBlock(c4, rng)
        x = Tensor(rng.standard_normal((t,) + grids[4] + (c4,)), requires_grad=True)
        return (lambda: _wsum(module(x).tokens, np.random.default_rng([config.seed, 2]))), \
            [("input", x)] + list(module.named_parameters())

    def up_embedding():
        rng = rng_for("up_embedding")
        module = UpEmbedding(c4, c3, rng)
        tokens = Tensor(rng.standard_normal((t * grids[4][0] * grids[4][1], c4)), requires_grad=True)
        skip = Tensor(rng.standard_normal((t,) + grids[3] + (c3,)), requires_grad=True)
        seq = TokenSequence(tokens, (t,) + grids[4] + (c4,))

        def loss_fn():
            return _wsum(module(seq, skip).tokens, np.random.default_rng([config.seed, 3]))

        return loss_fn, [("tokens", tokens), ("skip", skip)] + list(module.named_parameters())

    def sal_attention():
        rng = rng_for("sal_attention")
        module = SalAttention(StageConfig(channels=c4, kv_pool=kv_pool_for_level(4), heads=heads), rng)
        tokens = Tensor(rng.standard_normal((t * grids[4][0] * grids[4][1], c4)), requires_grad=True)
        seq = TokenSequence(tokens, (t,) + grids[4] + (c4,))

        def loss_fn():
            out, _ = module(seq, None)
            return _wsum(out.tokens, np.random.default_rng([config.seed, 4]))

        return loss_fn, [("tokens", tokens)] + list(module.named_parameters())

    def sal_attention_transfer():
        rng = rng_for("sal_attention_transfer")
        module = SalAttention(StageConfig(channels=c3, kv_pool=kv_pool_for_level(3), heads=heads), rng)
        tokens = Tensor(rng.standard_normal((t * grids[3][0] * grids[3][1], c3)), requires_grad=True)
        seq = TokenSequence(tokens, (t,) + grids[3] + (c3,))
        key_layout = (t, grids[4][0] // 2, grids[4][1] // 2)
        nk = t * key_layout[1] * key_layout[2]
        prev_scores = Tensor(
            rng.standard_normal((heads, t * grids[4][0] * grids[4][1], nk)), requires_grad=True
        )
        incoming = AttentionScore(prev_scores, (t,) + grids[4], key_layout)

        def loss_fn():
            out, _ = module(seq, incoming)
            return _wsum(out.tokens, np.random.default_rng([config.seed, 5]))

        return loss_fn, [("tokens", tokens), ("prev_scores", prev_scores)] + list(module.named_parameters())

    def aggregation():
        rng = rng_for("aggregation")
        module = MultiScaleAggregate([c4, c3, c2, c1], c1, rng, final_kernel=config.aggregate_kernel)
        volumes = [
            Tensor(rng.standard_normal((t,) + grids[level] + (config.channels[level - 1],)), requires_grad=True)
            for level in (4, 3, 2, 1)
        ]

        def loss_fn():
            return _wsum(module(volumes, grids[1]), np.random.default_rng([config.seed, 6]))

        return loss_fn, [(f"level{4 - i}", v) for i, v in enumerate(volumes)] + list(module.named_parameters())

    def vsp_decoder():
        rng = rng_for("vsp_decoder")
        module = VSPDecoder(c1, t, rng)
        fx = Tensor(rng.standard_normal((t,) + grids[1] + (c1,)), requires_grad=True)

        def loss_fn():
            return _wsum(module(fx, (h, w)), np.random.default_rng([config.seed, 7]))

        return loss_fn, [("features", fx)] + list(module.named_parameters())

    def vsod_decoder():
        rng = rng_for("vsod_decoder")
        module = VSODDecoder(c1, rng)
        fx = Tensor(rng.standard_normal((t,) + grids[1] + (c1,)), requires_grad=True)

        def loss_fn():
            return _wsum(module(fx, (h, w)), np.random.default_rng([config.seed, 8]))

        return loss_fn, [("features", fx)] + list(module.named_parameters())

    def _loss_pair(tag):
        rng = rng_for(tag)
        p = Tensor(rng.uniform(0.05, 0.95, size=(12, 16)), requires_grad=True)
        g = Tensor(rng.uniform(0.05, 1.0, size=(12, 16)))
        return p, g

    def kl_block():
        p, g = _loss_pair("kl")
        return (lambda: kl_loss(p, g)), [("prediction", p)]

    def cc_block():
        p, g = _loss_pair("cc")
        return (lambda: cc_loss(p, g)), [("prediction", p)]

    def sim_block():
        p, g = _loss_pair("sim")
        return (lambda: sim_loss(p, g)), [("prediction", p)]

    def bce_block():
        rng = rng_for("bce")
        p = Tensor(rng.uniform(0.05, 0.95, size=(t, 12, 16)), requires_grad=True)
        g = Tensor((rng.uniform(size=(t, 12, 16)) > 0.5).astype(np.float64))
        return (lambda: vsod_bce(p, g)), [("prediction", p)]

    yield "encoder", encoder
    yield "semantic_guided", semantic_guided
    yield "up_embedding", up_embedding
    yield "sal_attention", sal_attention
    yield "sal_attention_transfer", sal_attention_transfer
    yield "aggregation", aggregation
    yield "vsp_decoder", vsp_decoder
    yield "vsod_decoder", vsod_decoder
    yield "kl_loss", kl_block
    yield "cc_loss", cc_block
    yield "sim_loss", sim_block
    yield "vsod_bce", bce_block


def run_gradcheck(config: RunConfig, max_coords: int = 12, tol: float = GRADCHECK_TOL, echo=None) -> list:
    """Finite-difference check of every block in 64-bit mode.

    Returns a list of dicts (block, max_rel_error, passed); ``echo`` (if
    given) receives one formatted line per block.
    """
    results = []
    with dtype_scope(np.float64):
        for name, build in _gradcheck_blocks(config):
            loss_fn, tensors = build()
            report = finite_difference_check(
                loss_fn,
                tensors,
                max_coords_per_tensor=max_coords,
                rng=np.random.default_rng([config.seed, 97, len(name)]),
            )
            passed = report.passed(tol)
            results.append(
                {
                    "block": name,
                    "max_rel_error": report.max_rel_error,
                    "coords": report.coords_checked,
                    "passed": passed,
                }
            )
            if echo is not None:
                status = "PASS" if passed else "FAIL"
                echo(f"{name:24s} max_rel={report.max_rel_error:.3e}  coords={report.coords_checked:4d}  {status}")
    return results
