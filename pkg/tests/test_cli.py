import json
import subprocess
import sys

import numpy as np
import pytest

from fiberae import channel as ch
from fiberae import config, sweep
from fiberae.cli import main

TINY = """
[model]
kind = {kind}
ffnn_hidden = 32, 32
brnn_hidden = 12

[train]
iterations = {iterations}
eval_interval = 50

[channel]
distance = {distance}
noise_sigma = {sigma}
"""


def write_config(path, kind="ffnn", iterations=60, distance=20.0, sigma=0.1, extra=""):
    path.write_text(TINY.format(kind=kind, iterations=iterations, distance=distance, sigma=sigma) + extra)
    return str(path)


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """Small FFNN and BRNN checkpoints trained through the CLI."""
    root = tmp_path_factory.mktemp("trained")
    out = {}
    for kind in ("ffnn", "brnn"):
        cfg = write_config(root / f"{kind}.ini", kind, iterations=60)
        assert main(["train", "--config", cfg, "--out", str(root / kind)]) == 0
        out[kind] = root / kind / "checkpoint.faec"
    return out


# -------------------------------------------------------------------- train

def test_train_writes_three_artifacts(trained):
    d = trained["ffnn"].parent
    assert sorted(p.name for p in d.iterdir()) == ["checkpoint.faec", "train_report.csv", "train_summary.json"]
    summary = json.loads((d / "train_summary.json").read_text())
    assert summary["iterations"] == 60 and summary["checkpoint"] == "checkpoint.faec"


def test_train_rerun_is_byte_identical(tmp_path, trained):
    cfg = write_config(tmp_path / "c.ini", iterations=60)
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "again")]) == 0
    for name in ("checkpoint.faec", "train_report.csv", "train_summary.json"):
        assert (tmp_path / "again" / name).read_bytes() == (trained["ffnn"].parent / name).read_bytes()


def test_missing_required_field_exits_2(tmp_path, capsys):
    (tmp_path / "c.ini").write_text("[train]\niterations = 5\n")
    code = main(["train", "--config", str(tmp_path / "c.ini"), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "model.kind" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("text,field", [
    ("[model]\nkind = ffnn\nwidth = 3\n", "model.width"),
    ("[model]\nkind = ffnn\n[fiber]\nx = 1\n", "fiber"),
    ("[model]\nkind = ffnn\nM = 12\n", "model.M"),
    ("[model]\nkind = ffnn\n[channel]\nlpf_bandwidth = 50e9\n", "channel.lpf_bandwidth"),
    ("[model]\nkind = ffnn\n[train]\nlr = fast\n", "train.lr"),
    ("[model]\nkind = ffnn\n[train]\nseq_len = 4\n", "train.seq_len"),
    ("[model]\nkind = rnn\n", "model.kind"),
])
def test_invalid_config_names_field_and_writes_nothing(tmp_path, capsys, text, field):
    (tmp_path / "c.ini").write_text(text)
    code = main(["train", "--config", str(tmp_path / "c.ini"), "--out", str(tmp_path / "o")])
    assert code == 2
    assert field in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_unknown_profile_rejected_by_parser():
    with pytest.raises(SystemExit) as exc:
        main(["train", "--profile", "huge"])
    assert exc.value.code == 2


def test_profiles():
    desk = config.parse_text("[model]\nkind = brnn\n")
    full = config.parse_text("[model]\nkind = brnn\n", profile="full")
    assert (desk.model.M, desk.train.iterations) == (16, 5000)
    assert (full.model.M, full.train.iterations) == (64, 50_000)
    assert desk.train_config().seq_len == 20 and desk.train_config().window == 10
    assert desk.train_config("ffnn").seq_len == 10 and desk.train_config("ffnn").window is None


def test_flags_override_file(tmp_path):
    cfg = config.load(write_config(tmp_path / "c.ini"), overrides={"channel.distance": 70.0, "run.seed": 9})
    assert cfg.channel.distance == 70.0 and cfg.run.seed == 9


# ----------------------------------------------------------------- evaluate

def run_json(argv, capsys):
    assert main(argv) == 0
    return json.loads(capsys.readouterr().out)


def test_evaluate_exact_block_budget(trained, capsys):
    res = run_json(["evaluate", str(trained["ffnn"]), "--min-errors", "0", "--max-blocks", "500"], capsys)
    assert res["blocks_total"] == 500 and res["bits_total"] == 2000
    assert res["ci95"][0] <= res["ber"] <= res["ci95"][1]
    assert res["hd_fec_threshold"] == 4.5e-3 and res["hd_fec_label"] == "6.7% HD-FEC"


def test_evaluate_distance_override(trained, capsys):
    res = run_json(["evaluate", str(trained["brnn"]), "--distance", "60", "--window", "3",
                    "--min-errors", "0", "--max-blocks", "200"], capsys)
    assert res["distance_km"] == 60.0 and res["window"] == 3 and res["kind"] == "brnn"


def test_evaluate_seeds_give_overlapping_intervals(trained, capsys):
    a = run_json(["evaluate", str(trained["ffnn"]), "--seed", "1", "--max-blocks", "4000"], capsys)
    b = run_json(["evaluate", str(trained["ffnn"]), "--seed", "2", "--max-blocks", "4000"], capsys)
    assert a != b
    assert a["ci95"][0] <= b["ci95"][1] and b["ci95"][0] <= a["ci95"][1]


def test_evaluate_noiseless_back_to_back_is_error_free(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.ini", iterations=400, distance=0.0, sigma=0.0)
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "m")]) == 0
    capsys.readouterr()
    res = run_json(["evaluate", str(tmp_path / "m" / "checkpoint.faec"), "--max-blocks", "20000"], capsys)
    assert res["bit_errors"] == 0 and res["blocks_total"] == 20000


def test_evaluate_bad_checkpoint_fails_cleanly(tmp_path, trained, capsys):
    broken = tmp_path / "broken.faec"
    broken.write_bytes(trained["ffnn"].read_bytes()[:-16])
    assert main(["evaluate", str(broken)]) == 1
    assert "checkpoint error" in capsys.readouterr().err


# -------------------------------------------------------------------- sweep

def sweep_config(tmp_path, trained, distances="20, 40, 60, 80"):
    extra = (f"\n[sweep]\ndistances = {distances}\ncheckpoints = {trained['ffnn']}, {trained['brnn']}\n"
             "\n[eval]\nmax_blocks = 300\n\n[window]\nwindow_size = 3\n")
    return write_config(tmp_path / "s.ini", extra=extra)


def test_sweep_rows_sorted_and_roundtrip(tmp_path, trained):
    cfg = sweep_config(tmp_path, trained)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "s")]) == 0
    path = tmp_path / "s" / "sweep.csv"
    text = path.read_text()
    assert text.startswith(sweep.SCHEMA + "\n" + ",".join(sweep.COLUMNS) + "\n")
    rows = sweep.read_csv(path)
    assert len(rows) == 8
    assert [(r.kind, r.distance_km) for r in rows] == sorted((k, d) for k in ("brnn", "ffnn") for d in (20., 40., 60., 80.))
    assert all(r.status == "ok" and r.ci95_lo <= r.ber <= r.ci95_hi for r in rows)
    assert {r.window for r in rows if r.kind == "ffnn"} == {1} and {r.window for r in rows if r.kind == "brnn"} == {3}
    assert len({r.seed for r in rows}) == 8
    sweep.write_csv(rows, tmp_path / "copy.csv")
    assert (tmp_path / "copy.csv").read_text() == text


def test_sweep_twice_is_byte_identical(tmp_path, trained):
    cfg = sweep_config(tmp_path, trained, "30, 70")
    for d in ("a", "b"):
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_sweep_failed_cell_is_recorded(tmp_path, trained, monkeypatch):
    real = sweep.evaluate_ber

    def flaky(model, channel, **kw):
        if channel.distance == 40.0 and model.kind == "ffnn":
            raise RuntimeError("simulated failure")
        return real(model, channel, **kw)

    monkeypatch.setattr(sweep, "evaluate_ber", flaky)
    cfg = config.load(sweep_config(tmp_path, trained, "20, 40"))
    rows = sweep.run(cfg)
    bad = [r for r in rows if r.status != "ok"]
    assert len(rows) == 4 and len(bad) == 1
    assert (bad[0].kind, bad[0].distance_km) == ("ffnn", 40.0) and "simulated failure" in bad[0].status
    sweep.write_csv(rows, tmp_path / "f.csv")
    again = sweep.read_csv(tmp_path / "f.csv")
    assert again[3].status == bad[0].status and np.isnan(again[3].ber)


def test_sweep_requires_distances(tmp_path, capsys):
    (tmp_path / "c.ini").write_text("[sweep]\ncheckpoints = x.faec\n")
    assert main(["sweep", "--config", str(tmp_path / "c.ini"), "--out", str(tmp_path / "o")]) == 2
    assert "sweep.distances" in capsys.readouterr().err


def test_sweep_retrain_trains_per_distance(tmp_path):
    extra = "\n[sweep]\ndistances = 10, 30\nmodels = ffnn\nretrain = true\n[eval]\nmax_blocks = 100\n"
    cfg = write_config(tmp_path / "r.ini", iterations=5, extra=extra)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "r")]) == 0
    assert sorted(p.name for p in (tmp_path / "r").glob("*.faec")) == ["ffnn_10km.faec", "ffnn_30km.faec"]
    assert len(sweep.read_csv(tmp_path / "r" / "sweep.csv")) == 2


# ---------------------------------------------------------------- gradcheck

def test_gradcheck_ops_passes(capsys):
    assert main(["gradcheck", "--scope", "ops"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_gradcheck_chain_passes():
    assert main(["gradcheck", "--scope", "chain"]) == 0


def test_gradcheck_corrupted_adjoint_is_named(monkeypatch, capsys):
    monkeypatch.setattr(ch, "disperse_backward", lambda g, L, b2, fs=84e9: ch.disperse(g, L, b2, fs))
    assert main(["gradcheck", "--scope", "ops"]) == 1
    err = capsys.readouterr().err
    assert "worst offender disperse" in err


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "fiberae", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("train", "evaluate", "sweep", "gradcheck"):
        assert cmd in out.stdout
