import json

import numpy as np
import pytest

from robustkc.cli import main
from robustkc.fileio import read_csv


def _cluster(tmp_path, csv_text, *flags):
    p = tmp_path / "in.csv"
    p.write_text(csv_text)
    out = tmp_path / "out.json"
    code = main(["cluster", str(p), "-o", str(out), *flags])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_two_identical_points(tmp_path):
    code, out = _cluster(tmp_path, "0,0\n0,0\n", "--r", "1")
    assert code == 0
    assert [(r["label"], r["is_outlier"]) for r in out["rows"]] == [(1, False), (1, False)]
    assert out["r_hat"] == 1


def test_output_keys_stable(tmp_path):
    _, out = _cluster(tmp_path, "0,0\n0,1\n5,5\n5,6\n", "--r", "2")
    assert list(out) == ["theta", "gamma", "tau", "r_hat", "n_outliers", "rows", "eval", "eigengap", "solver", "run_record"]
    assert list(out["rows"][0]) == ["index", "label", "is_outlier", "degree"]
    assert list(out["run_record"]) == ["config", "dataset_fingerprint", "timings_ms", "tool_version"]


def test_malformed_row_exit_2(tmp_path, capsys):
    code, _ = _cluster(tmp_path, "x,y\n1,2\n3,abc\n", "--r", "1")
    assert code == 2
    assert "line 3" in capsys.readouterr().err


def test_pipeline_error_exit_3(tmp_path, capsys):
    code, _ = _cluster(tmp_path, "0,0\n1,1\n", "--r", "5")
    assert code == 3
    assert "modelselect" in capsys.readouterr().err


def test_bad_parameter_exit_2(tmp_path):
    code, _ = _cluster(tmp_path, "0,0\n1,1\n", "--alpha", "2")
    assert code == 2


def test_synth_then_cluster_with_truth(tmp_path):
    assert main(["synth", "--preset", "table1-balanced", "--seed", "0", "--out-dir", str(tmp_path)]) == 0
    data, header = read_csv(str(tmp_path / "data.csv"))
    assert data.shape == (500, 2) and header == ["x1", "x2"]
    out = tmp_path / "o.json"
    code = main(["cluster", str(tmp_path / "data.csv"), "--truth", str(tmp_path / "truth.csv"), "--r", "3", "-o", str(out)])
    assert code == 0
    rec = json.loads(out.read_text())
    assert rec["eval"]["overall_accuracy"] >= 0.95


def test_truth_column_flag(tmp_path):
    main(["synth", "--preset", "fig1", "--out-dir", str(tmp_path)])
    d, _ = read_csv(str(tmp_path / "data.csv"))
    t, _ = read_csv(str(tmp_path / "truth.csv"))
    joined = "\n".join(",".join("%.17g" % v for v in row) for row in np.column_stack([d, t])) + "\n"
    code, out = _cluster(tmp_path, joined, "--truth-column", "--r", "2")
    assert code == 0 and out["eval"]["inlier_accuracy"] >= 0.99


def test_synth_bytes_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["synth", "--preset", "fig1", "--seed", "4", "--out-dir", str(a)])
    main(["synth", "--preset", "fig1", "--seed", "4", "--out-dir", str(b)])
    assert (a / "data.csv").read_bytes() == (b / "data.csv").read_bytes()
    assert (a / "truth.csv").read_bytes() == (b / "truth.csv").read_bytes()
    assert len((a / "data.csv").read_text().splitlines()) == 306


def test_synth_from_spec_file(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"means": [[0, 0], [8, 0]], "counts": [20, 30], "m": 4}))
    assert main(["synth", str(spec), "--out-dir", str(tmp_path)]) == 0
    d, _ = read_csv(str(tmp_path / "data.csv"))
    assert d.shape == (54, 2)
    assert main(["synth", "--out-dir", str(tmp_path)]) == 2


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"r": 3, "seed": 4, "params": {"alpha": 0.3}}))
    csv = "\n".join(f"{i % 7},{(i * 3) % 5}" for i in range(30)) + "\n"
    code, out = _cluster(tmp_path, csv, "--config", str(cfg), "--r", "2")
    assert code == 0
    snap = out["run_record"]["config"]
    assert snap["r"] == 2 and snap["seed"] == 4 and snap["params"]["alpha"] == 0.3
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _ = _cluster(tmp_path, csv, "--config", str(cfg))
    assert code == 2


def test_replay_reproduces_labels(tmp_path):
    main(["synth", "--preset", "table1-ellipsoidal", "--seed", "1", "--out-dir", str(tmp_path)])
    first = tmp_path / "1.json"
    main(["cluster", str(tmp_path / "data.csv"), "--r", "2", "--seed", "9", "-o", str(first)])
    rec = json.loads(first.read_text())
    cfg = tmp_path / "replay.json"
    cfg.write_text(json.dumps(rec["run_record"]["config"]))
    second = tmp_path / "2.json"
    main(["cluster", str(tmp_path / "data.csv"), "--config", str(cfg), "-o", str(second)])
    rec2 = json.loads(second.read_text())
    assert [r["label"] for r in rec["rows"]] == [r["label"] for r in rec2["rows"]]
    assert rec["run_record"]["dataset_fingerprint"] == rec2["run_record"]["dataset_fingerprint"]


def test_bench_unknown_suite_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["bench", "table9"])
    assert exc.value.code == 2


def test_bench_table3_cheap_algorithms(tmp_path):
    code = main(["bench", "table3", "--seeds", "0,1", "--algorithms", "robust-sc,kmeans++", "--out-dir", str(tmp_path), "--workers", "1"])
    assert code == 0
    lines = (tmp_path / "results.csv").read_text().splitlines()
    assert len(lines) == 1 + 3 * 2 * 2
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["suite"] == "table3" and len(summary["groups"]) == 6
