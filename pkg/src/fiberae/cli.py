"""Command-line entry point: ``fiberae {train,evaluate,sweep,gradcheck}``.

Exit codes: 0 success, 1 runtime failure (gradient check breach, unreadable
checkpoint, diverged training), 2 invalid configuration or usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import checkpoint, config, gradsuite, sweep
from .evaluation import HD_FEC_BER, HD_FEC_LABEL
from .numerics import Streams, derive_seed
from .trainer import TrainingDiverged, train, write_report
from .transceiver import build_model

log = logging.getLogger("fiberae")

CHECKPOINT_NAME = "checkpoint.faec"


def _common(p):
    p.add_argument("--config", metavar="PATH", help="key=value config file")
    p.add_argument("--profile", choices=config.PROFILES, help="default values (desk or full)")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--window", type=int, metavar="N", help="sliding window size in blocks")
    p.add_argument("--distance", type=float, metavar="KM", help="fiber length override")
    p.add_argument("--min-errors", type=int, metavar="N")
    p.add_argument("--max-blocks", type=int, metavar="N")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser():
    parser = argparse.ArgumentParser(prog="fiberae", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", help="train a transceiver end to end")
    _common(p)
    p = sub.add_parser("evaluate", help="Monte-Carlo BER of a checkpoint")
    p.add_argument("checkpoint", help="checkpoint file written by 'train'")
    _common(p)
    p = sub.add_parser("sweep", help="BER versus distance for several models")
    _common(p)
    p.add_argument("--retrain", action="store_true", help="train one model per distance")
    p = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    p.add_argument("--scope", choices=("ops", "chain", "e2e", "all"), default="all")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _load_config(args):
    overrides = {
        "run.seed": args.seed,
        "run.out": args.out,
        "window.window_size": args.window,
        "channel.distance": args.distance,
        "eval.min_errors": args.min_errors,
        "eval.max_blocks": args.max_blocks,
    }
    return config.load(args.config, args.profile, overrides)


def _out_dir(cfg):
    out = Path(cfg.run.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise config.ConfigError("run.out", f"cannot create {out}: {exc}") from None
    return out


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_train(args):
    cfg = _load_config(args)
    if not cfg.model.kind:
        raise config.ConfigError("model.kind", "required field missing (ffnn or brnn)")
    tcfg = cfg.train_config()
    model = build_model(cfg.model.kind, cfg.model.M, cfg.model.n,
                        seed=derive_seed(cfg.run.seed, Streams.INIT),
                        zero_output=cfg.model.zero_output, **cfg.model.arch())
    out = _out_dir(cfg)
    report = train(model, tcfg, out / CHECKPOINT_NAME)
    report.checkpoint_path = CHECKPOINT_NAME  # relative, so outputs do not depend on cwd
    write_report(report, tcfg, out)
    print(f"initial loss {report.initial_loss:.6f}  final loss {report.final_loss:.6f}")
    print(f"wrote {out / CHECKPOINT_NAME}, train_report.csv, train_summary.json")
    return 0


def cmd_evaluate(args):
    cfg = _load_config(args)
    model, header = checkpoint.load(args.checkpoint)
    distance = args.distance  # otherwise the checkpoint's (or config's) distance
    window = args.window
    w, res = sweep.evaluate_cell(cfg, model, header, distance, derive_seed(cfg.run.seed, Streams.EVAL), window)
    chan = sweep.channel_for(cfg, header, distance)
    out = res.to_dict()
    out.update({
        "kind": model.kind,
        "distance_km": chan.distance,
        "window": w,
        "hd_fec_threshold": HD_FEC_BER,
        "hd_fec_label": HD_FEC_LABEL,
        "below_hd_fec": res.ber < HD_FEC_BER,
    })
    text = _dump(out)
    if args.out is not None:
        (_out_dir(cfg) / "evaluation.json").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_sweep(args):
    cfg = _load_config(args)
    retrain = True if args.retrain else None
    if not cfg.sweep.distances:
        raise config.ConfigError("sweep.distances", "required field missing")
    out = _out_dir(cfg)
    rows = sweep.run(cfg, out, retrain)
    path = out / "sweep.csv"
    sweep.write_csv(rows, path)
    print(f"{'kind':6} {'km':>6} {'W':>3} {'BER':>10}  status")
    for r in rows:
        print(f"{r.kind:6} {r.distance_km:6g} {r.window:3d} {r.ber:10.3e}  {r.status}")
    print(f"HD-FEC threshold {HD_FEC_BER} ({HD_FEC_LABEL}); wrote {path}")
    return 0


def cmd_gradcheck(args):
    scopes = ("ops", "chain", "e2e") if args.scope == "all" else (args.scope,)
    results = gradsuite.run(scopes)
    for r in results:
        print(f"{'ok  ' if r.passed else 'FAIL'} {r.scope:5} {r.name:24} {r.error:.3e} < {r.threshold:g}")
    failed = [r for r in results if not r.passed]
    if failed:
        worst = max(failed, key=lambda r: r.error / r.threshold)
        print(f"gradient check failed: worst offender {worst.name} "
              f"(rel. err {worst.error:.3e}, threshold {worst.threshold:g})", file=sys.stderr)
        return 1
    print(f"all {len(results)} gradient checks passed")
    return 0


COMMANDS = {"train": cmd_train, "evaluate": cmd_evaluate, "sweep": cmd_sweep, "gradcheck": cmd_gradcheck}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except config.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except checkpoint.CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return 1
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
