"""End-to-end training of a transceiver through the channel model."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import checkpoint
from .channel import ChannelConfig, transmit_vjp
from .estimator import sliding_estimate, sliding_vjp
from .numerics import (
    ConfigurationError,
    RngStream,
    Streams,
    adam_step,
    cross_entropy,
    cross_entropy_backward,
    derive_seed,
    softmax,
    softmax_cross_entropy_backward,
)

log = logging.getLogger(__name__)

CSV_SCHEMA = "# schema: fiberae-train-report v1"


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    seed: int = 1
    batch_size: int = 64
    seq_len: int = 10
    edge_exclusion: int = 2
    iterations: int = 5000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    eval_interval: int = 100
    window: int | None = None
    heldout_size: int = 256
    channel: ChannelConfig = field(default_factory=ChannelConfig)

    def validate(self):
        if self.iterations < 0:
            raise ConfigurationError("train.iterations must be >= 0")
        if self.batch_size < 1:
            raise ConfigurationError("train.batch_size must be >= 1")
        if self.edge_exclusion < 0 or self.seq_len <= 2 * self.edge_exclusion:
            raise ConfigurationError("train.seq_len must exceed 2 * train.edge_exclusion")
        if self.eval_interval < 1:
            raise ConfigurationError("train.eval_interval must be >= 1")
        if self.heldout_size < 1:
            raise ConfigurationError("train.heldout_size must be >= 1")
        if not self.lr >= 0:
            raise ConfigurationError("train.lr must be >= 0")
        self.channel.validate()
        return self


@dataclass
class TrainReport:
    records: list = field(default_factory=list)  # (iteration, mean CE, held-out block error rate)
    losses: list = field(default_factory=list)  # training CE of every iteration
    checkpoint_path: str | None = None
    wall_time: float = 0.0

    @property
    def initial_loss(self):
        return self.losses[0] if self.losses else math.nan

    @property
    def final_loss(self):
        return self.records[-1][1] if self.records else math.nan

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(CSV_SCHEMA + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "loss", "block_error_rate"])
            for it, loss, bler in self.records:
                w.writerow([it, repr(float(loss)), repr(float(bler))])

    def summary(self, cfg: TrainConfig | None = None):
        out = {
            "iterations": len(self.losses),
            "initial_loss": self.initial_loss,
            "final_loss": self.final_loss,
            "final_block_error_rate": self.records[-1][2] if self.records else None,
            "checkpoint": self.checkpoint_path,
        }
        if cfg is not None:
            out["config"] = asdict(cfg)
        return out


def sample_batch(rng: RngStream, batch_size, T, M):
    """``(batch_size, T)`` message indices, i.i.d. uniform on [0, M)."""
    return rng.integers(batch_size * T, M).reshape(batch_size, T)


def loss_mask(T, edge_exclusion):
    mask = np.zeros(T, dtype=bool)
    mask[edge_exclusion:T - edge_exclusion] = True
    return mask


def e2e_loss(model, batch, channel: ChannelConfig, rng=None, edge_exclusion=2, noise=None,
             backward=True, window=None):
    """Mean cross-entropy over non-edge blocks; accumulates gradients.

    encode -> guard-padded channel -> decode (per block for FFNN, over the
    whole sequence for BRNN) -> softmax -> CE.  Gradients are added to the
    parameters' ``grad`` (callers reset them).  ``noise`` freezes the
    receiver noise over the guard-padded time axis.
    """
    batch = np.asarray(batch)
    T = batch.shape[-1]
    mask = loss_mask(T, edge_exclusion)
    if not mask.any():
        raise ConfigurationError("edge exclusion leaves no blocks in the loss")
    wave, pb_tx = model.encode_vjp(batch)
    rx, pb_ch = transmit_vjp(wave, channel, model.n, rng, noise)
    if window is None or model.kind == "ffnn":
        logits, pb_rx = model.decode_logits_vjp(rx)
        p = softmax(logits)
    else:
        p, pb_rx = sliding_vjp(rx, model, window)
    ce = cross_entropy(p, batch)
    count = ce[..., mask].size
    loss = float(ce[..., mask].sum() / count)
    if not math.isfinite(loss):
        raise TrainingDiverged(f"non-finite loss {loss}")
    if backward:
        gl = np.broadcast_to(mask / count, ce.shape)
        if window is None or model.kind == "ffnn":
            g = softmax_cross_entropy_backward(gl, p, batch)
        else:
            g = cross_entropy_backward(gl, p, batch)
        pb_tx(pb_ch(pb_rx(g)))
    return loss


def block_error_rate(model, batch, channel, rng=None, edge_exclusion=2, window=None):
    rx, _ = transmit_vjp(model.encode(batch), channel, model.n, rng)
    if window is None or model.kind == "ffnn":
        decided = model.decode(rx).argmax(axis=-1)
    else:
        decided = sliding_estimate(rx, model, window).argmax(axis=-1)
    mask = loss_mask(batch.shape[-1], edge_exclusion)
    return float(np.mean(decided[..., mask] != batch[..., mask]))


def train(model, cfg: TrainConfig, checkpoint_path=None, divergence_patience=100):
    """Run ``cfg.iterations`` Adam steps on fresh batches and noise.

    Returns a :class:`TrainReport`; writes the final checkpoint when a path
    is given.
    """
    cfg.validate()
    start = time.perf_counter()
    report = TrainReport()
    msg_rng = RngStream(derive_seed(cfg.seed, Streams.MESSAGES))
    noise_rng = RngStream(derive_seed(cfg.seed, Streams.NOISE))
    held_seed = derive_seed(cfg.seed, Streams.HELDOUT)
    heldout = sample_batch(RngStream(held_seed), cfg.heldout_size, cfg.seq_len, model.M)
    params = model.parameters()
    names = [n for n, _ in model.named_parameters()]
    recent = []
    bad_evals = 0
    for it in range(1, cfg.iterations + 1):
        model.zero_grad()
        batch = sample_batch(msg_rng, cfg.batch_size, cfg.seq_len, model.M)
        loss = e2e_loss(model, batch, cfg.channel, noise_rng, cfg.edge_exclusion, window=cfg.window)
        adam_step(params, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, it, names)
        report.losses.append(loss)
        recent.append(loss)
        if it % cfg.eval_interval == 0 or it == cfg.iterations:
            # same held-out noise realization at every evaluation
            bler = block_error_rate(model, heldout, cfg.channel, RngStream(held_seed).spawn(1),
                                    cfg.edge_exclusion, cfg.window)
            mean_loss = float(np.mean(recent))
            report.records.append((it, mean_loss, bler))
            recent = []
            log.info("iter %d  loss %.5f  held-out BLER %.4g", it, mean_loss, bler)
            bad_evals = bad_evals + 1 if mean_loss > 10 * report.initial_loss else 0
            if bad_evals >= divergence_patience:
                raise TrainingDiverged(f"loss above 10x its initial value for {bad_evals} evaluations")
    model.zero_grad()
    if checkpoint_path is not None:
        checkpoint.save(model, checkpoint_path, cfg.channel, training_meta(cfg))
        report.checkpoint_path = str(checkpoint_path)
    report.wall_time = time.perf_counter() - start
    log.info("training finished in %.1f s", report.wall_time)
    return report


def training_meta(cfg: TrainConfig):
    """Training facts the evaluator needs to decode the way the model was trained."""
    return {"seed": cfg.seed, "iterations": cfg.iterations, "seq_len": cfg.seq_len,
            "edge_exclusion": cfg.edge_exclusion, "window": cfg.window}


def write_report(report: TrainReport, cfg: TrainConfig, out_dir):
    out = Path(out_dir)
    report.write_csv(out / "train_report.csv")
    (out / "train_summary.json").write_text(
        json.dumps(report.summary(cfg), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
