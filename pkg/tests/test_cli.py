import csv
import io
import json

import numpy as np
import pytest
import yaml

from picketcs.cli import ExperimentConfig, UsageError, main, read_signal_csv
from picketcs.recovery import MeasurementVector


def run(argv):
    buf = io.StringIO()
    code = main(argv, out=buf)
    return code, buf.getvalue()


def write_config(tmp_path, **cfg):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def test_design_json_roundtrip(tmp_path):
    target = tmp_path / "sol.json"
    code, text = run(["design", "--n", "30", "--D", "2", "--no-timing", "--json", str(target)])
    assert code == 0
    d = json.loads(text)
    assert d["s"] == [5, 6] and d["fourier_samples"] == 10
    assert json.loads(target.read_text())["m"] == 11
    assert "wall_ms" not in d


def test_design_bad_alpha_exits_1():
    code, text = run(["design", "--n", "1024", "--k", "3", "--alpha", "99"])
    assert code == 1
    assert json.loads(text)["status"] == "infeasible"


def test_usage_errors_exit_2():
    assert run(["design"])[0] == 2
    assert run(["design", "--n", "30", "--variant", "nope", "--D", "2"])[0] == 2
    assert run(["matrix", "--moduli", "2,x", "--n", "6"])[0] == 2
    # constraint violation while constructing the matrix
    assert run(["matrix", "--moduli", "2,4,5", "--n", "6"])[0] == 2


def test_matrix_report_and_csv(tmp_path):
    target = tmp_path / "m.csv"
    code, text = run(["matrix", "--moduli", "2,3,5", "--n", "6", "--csv", str(target)])
    assert code == 0
    d = json.loads(text)
    assert d["m"] == 10 and d["fourier_columns"] == {"predicted": 8, "verified": 8}
    assert d["checks"]["disjunct"] is True
    rows = list(csv.reader(target.open()))
    assert len(rows) >= 10


@pytest.mark.parametrize("content", ["0,1\n", "0,a,b\n", "999,1,0\n", "x,y\n1,2\n"])
def test_malformed_signal_exits_2(tmp_path, content):
    path = tmp_path / "sig.csv"
    path.write_text(content)
    code, _ = run(["recover", "--moduli", "11,13,17", "--n", "100", "--k", "1", "--signal", str(path)])
    assert code == 2


def test_signal_csv_header_and_accumulate(tmp_path):
    path = tmp_path / "sig.csv"
    path.write_text("index,re,im\n3,1,0\n3,0,2\n\n7,-1.5,0\n")
    x = read_signal_csv(str(path), 10)
    assert x[3] == 1 + 2j and x[7] == -1.5 and np.count_nonzero(x) == 2


def test_recover_planted_spike(tmp_path):
    sig = tmp_path / "sig.csv"
    sig.write_text("42,1,2\n")
    mv = tmp_path / "y.bin"
    code, text = run([
        "recover", "--moduli", "11,13,17,19,23,29,31", "--n", "100", "--k", "1",
        "--signal", str(sig), "--measurements", str(mv),
    ])
    assert code == 0
    d = json.loads(text)
    assert [e["index"] for e in d["entries"]] == [42]
    assert d["report"]["error_l2"] < 1e-9
    y = MeasurementVector.load(str(mv))
    assert y.N == 100 and y.m == 143


def test_recover_synthetic_is_seeded():
    argv = ["recover", "--moduli", "11,13,17,19,23,29,31", "--n", "100", "--k", "1",
            "--spikes", "9:3", "--noise", "0.01", "--seed", "5"]
    a, b = run(argv), run(argv)
    assert a == b and a[0] == 0


def test_bad_spike_exits_2():
    code, _ = run(["recover", "--moduli", "11,13", "--n", "100", "--k", "1", "--spikes", "9"])
    assert code == 2


def test_baseline_csv(tmp_path):
    target = tmp_path / "b.csv"
    code, text = run(["baseline", "--n", "64", "--k", "2", "--trials", "4", "--seed", "3", "--csv", str(target)])
    assert code == 0
    assert json.loads(text)["trials"] == 4
    assert len(target.read_text().splitlines()) == 5


def test_export_ilp_file_and_manifest(tmp_path):
    lp, man = tmp_path / "p.lp", tmp_path / "p.json"
    code, text = run(["export-ilp", "--n", "30", "--D", "2", "--alpha", "1", "--out", str(lp), "--manifest", str(man)])
    assert code == 0
    assert json.loads(text)["binaries"] == 22
    assert json.loads(man.read_text())["B"] == 11
    assert lp.read_text().rstrip().endswith("End")


def test_export_ilp_needs_alpha():
    assert run(["export-ilp", "--n", "30", "--D", "2"])[0] == 2


def test_experiment_rows_and_determinism(tmp_path):
    cfg = write_config(tmp_path, N=1024, k={"start": 2, "stop": 5}, seed=1)
    outs = []
    for name in ("a", "b"):
        out_dir = tmp_path / name
        code, _ = run(["experiment", "--config", cfg, "--out-dir", str(out_dir)])
        assert code == 0
        outs.append(((out_dir / "sweep.csv").read_bytes(), (out_dir / "plot.dat").read_bytes()))
    assert outs[0] == outs[1]
    rows = list(csv.DictReader(io.StringIO(outs[0][0].decode())))
    assert len(rows) == 12
    assert {r["variant"] for r in rows} == {"relprime", "prime_powers", "primes"}
    assert all(r["status"] == "optimal" for r in rows)
    assert (tmp_path / "a" / "timings.csv").exists()


def test_experiment_empty_k_range_gives_header_only(tmp_path):
    cfg = write_config(tmp_path, N=64, k=[])
    code, _ = run(["experiment", "--config", cfg, "--out-dir", str(tmp_path / "o")])
    assert code == 0
    assert (tmp_path / "o" / "sweep.csv").read_text() == "N,k,epsilon,variant,alpha,m,fourier_samples,status\n"


def test_experiment_baseline_rows(tmp_path):
    cfg = write_config(tmp_path, N=64, k=[2, 3], trials=3, variants=["primes"])
    code, _ = run(["experiment", "--config", cfg, "--out-dir", str(tmp_path / "o"), "--baseline"])
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "o" / "sweep.csv").open()))
    assert [r["variant"] for r in rows] == ["primes", "primes", "random", "random"]


def test_experiment_svg(tmp_path):
    pytest.importorskip("matplotlib")
    cfg = write_config(tmp_path, N=64, k=[2, 3], variants=["primes"], svg=True)
    assert run(["experiment", "--config", cfg, "--out-dir", str(tmp_path / "o")])[0] == 0
    assert (tmp_path / "o" / "plot.svg").read_text().lstrip().startswith("<?xml")


def test_config_rejects_unknown_keys(tmp_path):
    cfg = write_config(tmp_path, N=64, k=[2], colour="red")
    assert run(["experiment", "--config", cfg])[0] == 2
    with pytest.raises(UsageError):
        ExperimentConfig.from_mapping({"N": 64, "k": {"start": 2, "end": 3}})
    with pytest.raises(UsageError):
        ExperimentConfig.from_mapping({"N": 64})


def test_config_range_expands():
    cfg = ExperimentConfig.from_mapping({"N": [64, 128], "k": {"start": 2, "stop": 4}, "variants": ["primes"]})
    assert cfg.N == [64, 128] and cfg.k == [2, 3, 4] and cfg.variants == ["primes"]


@pytest.mark.parametrize("variant,m", [("relprime", 11), ("primes", 12)])
def test_design_from_k_and_eps(variant, m):
    code, text = run(["design", "--n", "30", "--k", "2", "--eps", "0.5", "--variant", variant])
    assert code == 0 and json.loads(text)["m"] == m


def test_recover_zero_signal(tmp_path):
    sig = tmp_path / "zero.csv"
    sig.write_text("index,re,im\n")
    code, text = run(["recover", "--moduli", "11,13,17,19,23,29,31", "--n", "100", "--k", "1", "--signal", str(sig)])
    assert code == 0 and json.loads(text)["entries"] == []


def test_experiment_seed_flag_is_deterministic(tmp_path):
    cfg = write_config(tmp_path, N=64, k=[3], trials=2, variants=[])
    outs = []
    for seed in ("1", "1", "2"):
        out_dir = tmp_path / seed / str(len(outs))
        assert run(["experiment", "--config", cfg, "--out-dir", str(out_dir), "--baseline", "--seed", seed])[0] == 0
        outs.append((out_dir / "sweep.csv").read_text())
    assert outs[0] == outs[1]
