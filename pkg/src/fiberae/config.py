"""Run configuration: profiles plus a sectioned ``key = value`` text file.

Example::

    [run]
    profile = desk
    seed = 1

    [model]
    kind = brnn

    [channel]
    distance = 50

Sections and keys mirror the config dataclasses (``[train]`` ->
:class:`TrainConfig`, ``[channel]`` -> :class:`ChannelConfig`, ...).
Unknown sections or keys are errors.  Values given in the file override the
profile, and command-line flags override the file.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

from .channel import ChannelConfig
from .numerics import ConfigurationError
from .trainer import TrainConfig

PROFILES = ("desk", "full")


class ConfigError(ConfigurationError):
    """Invalid or incomplete run configuration; ``field`` names the culprit."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunSection:
    profile: str = "desk"
    seed: int = 1
    out: str = "runs/out"


@dataclass
class ModelSection:
    kind: str = ""
    M: int = 16
    n: int = 12
    ffnn_hidden: tuple = (128, 128)
    brnn_hidden: int = 64
    merge_tx: str = "average"
    merge_rx: str = "concat"
    activation: str = "relu"
    zero_output: bool = True

    def arch(self, kind=None):
        if (kind or self.kind) == "ffnn":
            return {"hidden": tuple(self.ffnn_hidden)}
        return {"hidden": self.brnn_hidden, "merge_tx": self.merge_tx,
                "merge_rx": self.merge_rx, "activation": self.activation}


@dataclass
class TrainSection:
    batch_size: int = 64
    seq_len: int = 0  # 0: per-kind default
    edge_exclusion: int = 2
    iterations: int = 5000
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    eval_interval: int = 100
    heldout_size: int = 256
    train_window: int = 0  # 0: per-kind default; BRNN receivers train through the estimator


@dataclass
class WindowSection:
    window_size: int = 10
    stride: int = 1


@dataclass
class EvalSection:
    min_errors: int = 100
    max_blocks: int = 100_000
    seq_blocks: int = 0  # 0: the checkpoint's training sequence length
    batch: int = 16


@dataclass
class SweepSection:
    distances: tuple = ()
    checkpoints: tuple = ()
    models: tuple = ("ffnn", "brnn")
    retrain: bool = False


SECTIONS = {
    "run": RunSection,
    "model": ModelSection,
    "train": TrainSection,
    "channel": ChannelConfig,
    "window": WindowSection,
    "eval": EvalSection,
    "sweep": SweepSection,
}

# Defaults per kind for the desk profile: the BRNN trains on longer sequences
# through a sliding-window receiver.
KIND_DEFAULTS = {
    "ffnn": {"seq_len": 10, "train_window": 0},
    "brnn": {"seq_len": 20, "train_window": 10},
}

PROFILE_OVERRIDES = {
    "desk": {},
    "full": {"model": {"M": 64}, "train": {"iterations": 50_000}, "eval": {"max_blocks": 1_000_000}},
}


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    window: WindowSection = field(default_factory=WindowSection)
    eval: EvalSection = field(default_factory=EvalSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    given: set = field(default_factory=set)  # "section.key" entries set explicitly

    def seq_len(self, kind=None):
        kind = kind or self.model.kind
        return self.train.seq_len or KIND_DEFAULTS[kind]["seq_len"]

    def train_window(self, kind=None):
        kind = kind or self.model.kind
        w = self.train.train_window if "train.train_window" in self.given else KIND_DEFAULTS[kind]["train_window"]
        return w or None

    def train_config(self, kind=None, distance=None):
        t = self.train
        chan = self.channel if distance is None else self.channel.replace(distance=distance)
        return TrainConfig(
            seed=self.run.seed, batch_size=t.batch_size, seq_len=self.seq_len(kind),
            edge_exclusion=t.edge_exclusion, iterations=t.iterations, lr=t.lr, beta1=t.beta1,
            beta2=t.beta2, eps=t.eps, eval_interval=t.eval_interval,
            window=self.train_window(kind), heldout_size=t.heldout_size, channel=chan,
        )


def _convert(raw, default, name):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if default and isinstance(default[0], int):
                return tuple(int(s) for s in items)
            return tuple(items)
        return raw
    except ValueError as exc:
        raise ConfigError(name, str(exc)) from None


# tuple-typed fields whose items are numbers even when the default is empty
_NUMERIC_TUPLES = {"sweep.distances": float}


def _set(cfg: RunConfig, section, key, value):
    obj = getattr(cfg, section)
    names = {f.name for f in dataclasses.fields(obj)}
    name = f"{section}.{key}"
    if key not in names:
        raise ConfigError(name, "unknown key")
    if isinstance(value, str):
        value = _convert(value, getattr(obj, key), name)
        if name in _NUMERIC_TUPLES:
            try:
                value = tuple(_NUMERIC_TUPLES[name](v) for v in value)
            except ValueError as exc:
                raise ConfigError(name, str(exc)) from None
    setattr(obj, key, value)
    cfg.given.add(name)


def apply_profile(cfg: RunConfig, profile):
    if profile not in PROFILES:
        raise ConfigError("run.profile", f"must be one of {PROFILES}, got {profile!r}")
    for section, values in PROFILE_OVERRIDES[profile].items():
        obj = getattr(cfg, section)
        for k, v in values.items():
            setattr(obj, k, v)
    cfg.run.profile = profile


def parse_text(text, profile=None, overrides=None) -> RunConfig:
    """Build a validated RunConfig from config text, a profile and overrides.

    ``overrides`` maps ``"section.key"`` to already-typed values.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(section, "unknown section")
    chosen = profile or parser.get("run", "profile", fallback="desk").strip()
    cfg = RunConfig()
    apply_profile(cfg, chosen)
    for section in parser.sections():
        for key, raw in parser.items(section):
            _set(cfg, section, key, raw)
    cfg.run.profile = chosen
    for name, value in (overrides or {}).items():
        if value is not None:
            section, key = name.split(".", 1)
            _set(cfg, section, key, value)
    validate(cfg)
    return cfg


def load(path, profile=None, overrides=None) -> RunConfig:
    if path is None:
        return parse_text("", profile, overrides)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    return parse_text(text, profile, overrides)


def _check(cond, name, message):
    if not cond:
        raise ConfigError(name, message)


def validate(cfg: RunConfig):
    m = cfg.model
    _check(m.kind in ("", "ffnn", "brnn"), "model.kind", "must be ffnn or brnn")
    _check(m.M >= 2 and m.M & (m.M - 1) == 0, "model.M", "must be a power of two >= 2")
    _check(m.n >= 1, "model.n", "must be >= 1")
    _check(m.merge_tx in ("concat", "average"), "model.merge_tx", "must be concat or average")
    _check(m.merge_rx in ("concat", "average"), "model.merge_rx", "must be concat or average")
    _check(m.activation in ("relu", "clipped_relu01", "identity"), "model.activation", "unsupported activation")
    _check(m.brnn_hidden >= 1, "model.brnn_hidden", "must be >= 1")
    _check(len(m.ffnn_hidden) >= 1 and min(m.ffnn_hidden) >= 1, "model.ffnn_hidden", "needs positive widths")
    t = cfg.train
    _check(t.iterations >= 0, "train.iterations", "must be >= 0")
    _check(t.batch_size >= 1, "train.batch_size", "must be >= 1")
    _check(t.seq_len >= 0, "train.seq_len", "must be >= 0")
    _check(t.edge_exclusion >= 0, "train.edge_exclusion", "must be >= 0")
    for kind in ("ffnn", "brnn"):
        T = cfg.seq_len(kind)
        _check(T > 2 * t.edge_exclusion, "train.seq_len", "must exceed 2 * train.edge_exclusion")
        w = cfg.train_window(kind)
        _check(w is None or 1 <= w <= T, "train.train_window", "must lie in [0, seq_len]")
    _check(t.lr >= 0, "train.lr", "must be >= 0")
    _check(0 <= t.beta1 < 1, "train.beta1", "must lie in [0, 1)")
    _check(0 <= t.beta2 < 1, "train.beta2", "must lie in [0, 1)")
    _check(t.eps > 0, "train.eps", "must be > 0")
    _check(t.eval_interval >= 1, "train.eval_interval", "must be >= 1")
    _check(t.heldout_size >= 1, "train.heldout_size", "must be >= 1")
    c = cfg.channel
    _check(c.sample_rate > 0, "channel.sample_rate", "must be > 0")
    _check(c.distance >= 0, "channel.distance", "must be >= 0")
    _check(c.atten_db_per_km >= 0, "channel.atten_db_per_km", "must be >= 0")
    _check(0 < c.lpf_bandwidth < c.sample_rate / 2, "channel.lpf_bandwidth", "must lie in (0, sample_rate/2)")
    _check(c.noise_sigma >= 0, "channel.noise_sigma", "must be >= 0")
    _check(c.guard_blocks >= 0, "channel.guard_blocks", "must be >= 0")
    _check(cfg.window.window_size >= 1, "window.window_size", "must be >= 1")
    _check(cfg.window.stride == 1, "window.stride", "only stride 1 is supported")
    e = cfg.eval
    _check(e.min_errors >= 0, "eval.min_errors", "must be >= 0")
    _check(e.max_blocks >= 1, "eval.max_blocks", "must be >= 1")
    _check(e.seq_blocks >= 0, "eval.seq_blocks", "must be >= 0")
    _check(e.batch >= 1, "eval.batch", "must be >= 1")
    s = cfg.sweep
    _check(all(d >= 0 for d in s.distances), "sweep.distances", "must be >= 0")
    _check(all(k in ("ffnn", "brnn") for k in s.models), "sweep.models", "must list ffnn and/or brnn")
    _check(cfg.run.seed >= 0, "run.seed", "must be >= 0")
    return cfg
