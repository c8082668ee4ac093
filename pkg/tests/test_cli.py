import csv
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from streamsparse import cli
from streamsparse.config import parse_config
from streamsparse.engine import AdIhtLearner
from streamsparse.errors import ConfigError, DivergenceError
from streamsparse.metrics import CSV_COLUMNS

MINIMAL = {"family": "gaussian", "p": 10, "s": 3, "batch_size": 50, "num_batches": 2}


def write_config(tmp_path, **overrides):
    doc = {**MINIMAL, "output_dir": "out", **overrides}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_minimal_config_two_rows(tmp_path):
    assert cli.main(["simulate", str(write_config(tmp_path))]) == 0
    out = tmp_path / "out" / "adiht_0.csv"
    assert out.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    rows = read_rows(out)
    assert [r["b"] for r in rows] == ["1", "2"]
    assert [r["N_b"] for r in rows] == ["50", "100"]
    assert all(r["wall_ms"] == "" for r in rows)
    svg = (tmp_path / "out" / "error_curve.svg").read_text()
    assert svg.startswith("<?xml") and "<polyline" in svg


def test_five_line_config_defaults(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"family": "logistic",\n "p": 8,\n "s": 2,\n "batch_size": 40,\n "num_batches": 2}\n')
    assert cli.main(["simulate", str(path)]) == 0
    assert len(read_rows(tmp_path / "results" / "adiht_0.csv")) == 2


def test_repeated_runs_byte_identical(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, seeds=[3, 4], method="both", num_batches=4, compute_oracle=True)
    outputs = []
    for threads in ("1", "4"):
        monkeypatch.setenv(cli.THREADS_ENV, threads)
        assert cli.main(["simulate", str(cfg)]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted((tmp_path / "out").iterdir())})
        shutil.rmtree(tmp_path / "out")
    assert outputs[0] == outputs[1]
    assert "error_curve.svg" in outputs[0] and "renewable_4.csv" in outputs[0]


def test_record_timing_fills_wall_ms(tmp_path):
    assert cli.main(["simulate", str(write_config(tmp_path, record_timing=True))]) == 0
    assert all(float(r["wall_ms"]) >= 0 for r in read_rows(tmp_path / "out" / "adiht_0.csv"))


@pytest.mark.parametrize(
    "overrides, key",
    [
        ({"adiht": {"kappa": 1.5}}, "kappa"),
        ({"bogus": 1}, "bogus"),
        ({"adiht": {"eta_const": -1}}, "eta_const"),
        ({"method": "lasso"}, "method"),
        ({"seeds": []}, "seeds"),
        ({"s": 20}, "s"),
        ({"renewable": {"lambda_const": 0}}, "lambda_const"),
    ],
)
def test_config_errors_exit_2(tmp_path, capsys, overrides, key):
    assert cli.main(["simulate", str(write_config(tmp_path, **overrides))]) == 2
    assert key in capsys.readouterr().err


def test_invalid_json_and_missing_key(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["simulate", str(bad)]) == 2
    path = tmp_path / "c.json"
    path.write_text('{"p": 5, "s": 1}')
    assert cli.main(["simulate", str(path)]) == 2
    assert "num_batches" in capsys.readouterr().err


def test_bad_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "zero")
    assert cli.main(["simulate", str(write_config(tmp_path))]) == 2


def test_divergence_exit_3(tmp_path):
    cfg = write_config(tmp_path, adiht={"eta_const": 50.0})
    assert cli.main(["simulate", str(cfg)]) == 3


def test_divergence_keeps_earlier_rows(tmp_path, monkeypatch):
    original = AdIhtLearner.partial_fit

    def flaky(self, batch):
        if batch.batch_index == 3:
            raise DivergenceError("forced", iteration=1)
        return original(self, batch)

    monkeypatch.setattr(AdIhtLearner, "partial_fit", flaky)
    assert cli.main(["simulate", str(write_config(tmp_path, num_batches=5))]) == 3
    assert [r["b"] for r in read_rows(tmp_path / "out" / "adiht_0.csv")] == ["1", "2"]


@pytest.mark.parametrize("method", ["adiht", "renewable"])
@pytest.mark.parametrize("family", ["gaussian", "logistic", "poisson"])
def test_resume_matches_uninterrupted(tmp_path, family, method):
    cfg = write_config(
        tmp_path, family=family, method=method, num_batches=10, checkpoint_at=[5], seeds=[11],
        truth={"value": 0.3}, adiht={"eta_rule": "calibrated"}, renewable={"inner_iters": 50},
    )
    assert cli.main(["simulate", str(cfg)]) == 0
    out = tmp_path / "out"
    assert cli.main(["resume", str(out / f"{method}_11_b5.ckpt"), str(cfg)]) == 0
    full = (out / f"{method}_11.csv").read_text().splitlines()
    resumed = (out / f"{method}_11_resumed.csv").read_text().splitlines()
    assert resumed[0] == full[0]
    assert resumed[1:] == full[6:]


def test_resume_from_initial_checkpoint(tmp_path):
    cfg = write_config(tmp_path, num_batches=4, checkpoint_at=[0])
    assert cli.main(["simulate", str(cfg)]) == 0
    out = tmp_path / "out"
    assert cli.main(["resume", str(out / "adiht_0_b0.ckpt"), str(cfg)]) == 0
    assert (out / "adiht_0.csv").read_bytes() == (out / "adiht_0_resumed.csv").read_bytes()


def test_resume_explicit_method_and_seed(tmp_path):
    cfg = write_config(tmp_path, num_batches=3, checkpoint_at=[2], seeds=[5])
    assert cli.main(["simulate", str(cfg)]) == 0
    renamed = tmp_path / "state.bin"
    shutil.copy(tmp_path / "out" / "adiht_5_b2.ckpt", renamed)
    assert cli.main(["resume", str(renamed), str(cfg)]) == 2
    assert cli.main(["resume", str(renamed), str(cfg), "--method", "adiht", "--seed", "5"]) == 0


def test_resume_dimension_mismatch(tmp_path, capsys):
    cfg = write_config(tmp_path, num_batches=3, checkpoint_at=[2])
    assert cli.main(["simulate", str(cfg)]) == 0
    other = tmp_path / "other.json"
    other.write_text(json.dumps({**MINIMAL, "p": 12, "num_batches": 3, "output_dir": "out"}))
    assert cli.main(["resume", str(tmp_path / "out" / "adiht_0_b2.ckpt"), str(other)]) == 4
    assert "dimension" in capsys.readouterr().err


def test_resume_bad_checkpoint(tmp_path):
    cfg = write_config(tmp_path)
    bad = tmp_path / "adiht_0_b1.ckpt"
    bad.write_bytes(b"XXXX" + bytes(40))
    assert cli.main(["resume", str(bad), str(cfg)]) == 4
    truncated = tmp_path / "adiht_0_b2.ckpt"
    assert cli.main(["simulate", str(write_config(tmp_path, checkpoint_at=[1]))]) == 0
    truncated.write_bytes((tmp_path / "out" / "adiht_0_b1.ckpt").read_bytes()[:-3])
    assert cli.main(["resume", str(truncated), str(cfg)]) == 4


def _write_data(path, n=250, p=4, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = X @ np.array([1.0, 0, 0, -1.0]) + 0.1 * rng.standard_normal(n)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "y", "x3", "x4"])
        for i in range(n):
            w.writerow([X[i, 0], X[i, 1], y[i], X[i, 2], X[i, 3]])


def test_ingest_chunks_rows(tmp_path):
    data = tmp_path / "data.csv"
    _write_data(data)
    cfg = write_config(tmp_path)
    assert cli.main(["ingest", str(data), "--response", "y", "--batch-size", "100", str(cfg)]) == 0
    rows = read_rows(tmp_path / "out" / "adiht_ingest.csv")
    assert [r["N_b"] for r in rows] == ["100", "200", "250"]
    assert all(r["fp"] == r["fn"] == r["l2_error"] == "" for r in rows)
    assert rows[-1]["support_size"] == "2"


def test_ingest_missing_response(tmp_path):
    data = tmp_path / "data.csv"
    _write_data(data, n=10)
    assert cli.main(["ingest", str(data), "--response", "target", "--batch-size", "5", str(write_config(tmp_path))]) == 2


def test_ingest_non_numeric_cell(tmp_path, capsys):
    data = tmp_path / "data.csv"
    data.write_text("a,y\n1.0,2.0\n0.5,abc\n")
    assert cli.main(["ingest", str(data), "--response", "y", "--batch-size", "5", str(write_config(tmp_path))]) == 5
    err = capsys.readouterr().err
    assert "line 3" in err and "'y'" in err


def test_compare_writes_joined_csv(tmp_path):
    cfg = write_config(tmp_path, num_batches=3, seeds=[1, 2])
    assert cli.main(["compare", str(cfg)]) == 0
    rows = read_rows(tmp_path / "out" / "comparison.csv")
    assert len(rows) == 6
    assert all(float(r["oracle_l2_error"]) > 0 and float(r["adiht_oracle_ratio"]) > 0 for r in rows)
    assert all(r["renewable_l2_error"] != "" for r in rows)


def test_config_parse_defaults(tmp_path):
    cfg = parse_config(dict(MINIMAL), tmp_path)
    assert cfg.methods == ("adiht",) and cfg.seeds == (0,)
    assert cfg.output_dir == tmp_path / "results"
    with pytest.raises(ConfigError, match="kappa"):
        parse_config({**MINIMAL, "adiht": {"kappa": 0}})


def test_console_script(tmp_path):
    cfg = write_config(tmp_path)
    proc = subprocess.run([sys.executable, "-m", "streamsparse.cli", "simulate", str(cfg)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "adiht_0.csv" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "streamsparse.cli"], capture_output=True, text=True)
    assert proc.returncode == 2
