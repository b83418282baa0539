"""BER-versus-distance sweeps and their CSV format."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, fields
from pathlib import Path

from . import checkpoint
from .channel import ChannelConfig
from .config import ConfigError, RunConfig
from .evaluation import HD_FEC_BER, evaluate_ber
from .numerics import Streams, derive_seed
from .trainer import train, training_meta
from .transceiver import build_model

log = logging.getLogger(__name__)

SCHEMA = "# schema: fiberae-sweep v1"
DEFAULT_SEQ_BLOCKS = 20


@dataclass
class SweepRow:
    kind: str
    distance_km: float
    window: int
    ber: float
    ci95_lo: float
    ci95_hi: float
    bit_errors: int
    bits_total: int
    blocks: int
    seed: int
    status: str = "ok"

    @property
    def below_hd_fec(self):
        return self.ber < HD_FEC_BER


COLUMNS = [f.name for f in fields(SweepRow)]
_TYPES = {f.name: f.type for f in fields(SweepRow)}
_PARSE = {"str": str, "float": float, "int": int}


def sort_rows(rows):
    return sorted(rows, key=lambda r: (r.kind, r.distance_km))


def write_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(SCHEMA + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in sort_rows(rows):
            w.writerow([repr(float(v)) if isinstance(v, float) else v
                        for v in (getattr(r, c) for c in COLUMNS)])


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != SCHEMA:
            raise ValueError(f"unexpected schema line {first!r}")
        reader = csv.DictReader(fh)
        if reader.fieldnames != COLUMNS:
            raise ValueError(f"unexpected columns {reader.fieldnames}")
        return [SweepRow(**{k: _PARSE[_TYPES[k]](v) for k, v in rec.items()}) for rec in reader]


def cell_seed(root, index):
    """Evaluation seed of sweep cell ``index`` (position in the sorted grid)."""
    return derive_seed(derive_seed(root, Streams.SWEEP), index)


def channel_for(cfg: RunConfig, header, distance=None):
    """Training channel from the checkpoint, then explicit config keys, then distance."""
    base = ChannelConfig(**header["channel"]) if header.get("channel") else ChannelConfig()
    explicit = {k.split(".", 1)[1]: getattr(cfg.channel, k.split(".", 1)[1])
                for k in cfg.given if k.startswith("channel.")}
    chan = base.replace(**explicit)
    if distance is not None:
        chan = chan.replace(distance=float(distance))
    return chan.validate()


def eval_settings(cfg: RunConfig, model, header, window=None):
    """(window, seq_blocks, edge_exclusion) for evaluating a checkpointed model."""
    meta = header.get("meta", {})
    if model.kind == "ffnn":
        w = 1
    else:
        w = window or cfg.window.window_size
    seq = cfg.eval.seq_blocks or meta.get("seq_len") or DEFAULT_SEQ_BLOCKS
    edge = meta.get("edge_exclusion", cfg.train.edge_exclusion)
    return w, max(seq, w), edge


def evaluate_cell(cfg, model, header, distance, seed, window=None):
    w, seq, edge = eval_settings(cfg, model, header, window)
    res = evaluate_ber(model, channel_for(cfg, header, distance), window=w, seed=seed,
                       min_errors=cfg.eval.min_errors, max_blocks=cfg.eval.max_blocks,
                       seq_blocks=seq, edge_exclusion=edge, batch=cfg.eval.batch)
    return w, res


def _failed(kind, distance, seed, exc):
    msg = f"failed: {type(exc).__name__}: {exc}".replace("\n", " ")
    return SweepRow(kind, float(distance), 0, math.nan, math.nan, math.nan, 0, 0, 0, seed, msg)


def run(cfg: RunConfig, out_dir=None, retrain=None):
    """Evaluate every (kind, distance) cell; failures become rows, never exceptions.

    Without ``retrain`` the checkpoints listed in ``[sweep] checkpoints`` are
    evaluated across all distances.  With it, one model per cell is trained
    at that cell's distance (checkpoints go to ``out_dir``).
    """
    retrain = cfg.sweep.retrain if retrain is None else retrain
    distances = sorted(float(d) for d in cfg.sweep.distances)
    if not distances:
        raise ConfigError("sweep.distances", "required field missing")
    if retrain:
        models = {k: None for k in cfg.sweep.models}
    else:
        if not cfg.sweep.checkpoints:
            raise ConfigError("sweep.checkpoints", "required unless sweep.retrain is set")
        models = {}
        for path in cfg.sweep.checkpoints:
            model, header = checkpoint.load(path)
            if model.kind in models:
                raise ConfigError("sweep.checkpoints", f"two checkpoints of kind {model.kind}")
            models[model.kind] = (model, header)
    grid = sorted((kind, d) for kind in models for d in distances)
    rows = []
    for index, (kind, d) in enumerate(grid):
        seed = cell_seed(cfg.run.seed, index)
        try:
            if retrain:
                model, header = _train_cell(cfg, kind, d, out_dir)
            else:
                model, header = models[kind]
            w, res = evaluate_cell(cfg, model, header, d, seed)
            rows.append(SweepRow(kind, d, w, res.ber, res.ci95[0], res.ci95[1], res.bit_errors,
                                 res.bits_total, res.blocks_total, seed))
            log.info("%s @ %g km: BER %.3g (%d blocks)", kind, d, res.ber, res.blocks_total)
        except Exception as exc:  # a failed cell must not end the sweep
            log.warning("%s @ %g km failed: %s", kind, d, exc)
            rows.append(_failed(kind, d, seed, exc))
    return sort_rows(rows)


def _train_cell(cfg: RunConfig, kind, distance, out_dir):
    tcfg = cfg.train_config(kind, distance)
    model = build_model(kind, cfg.model.M, cfg.model.n, seed=derive_seed(cfg.run.seed, Streams.INIT),
                        zero_output=cfg.model.zero_output, **cfg.model.arch(kind))
    path = None
    if out_dir is not None:
        path = Path(out_dir) / f"{kind}_{distance:g}km.faec"
    train(model, tcfg, path)
    return model, {"channel": tcfg.channel.to_dict(), "meta": training_meta(tcfg)}
