import json
import shlex
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from conftest import fixture_cmd
from tsxplain import make_synthetic, save_dataset
from tsxplain.cli import DEMO_FILES, main, parse_model_spec
from tsxplain.core import LabeledDataset


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    save_dataset(make_synthetic("bump_uni", 40, 1, 30, seed=2), d / "uni.csv")
    save_dataset(make_synthetic("channel_multi", 40, 3, 30, seed=2), d / "multi.jsonl")
    single = LabeledDataset(np.random.default_rng(0).normal(size=(5, 2, 10)), [0] * 5, 2)
    save_dataset(single, d / "single.jsonl")
    return d


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def error_of(err):
    return json.loads(err.strip().splitlines()[-1])


def test_predict(data_dir, capsys):
    code, out, _ = run(["predict", "--data", data_dir / "uni.csv", "--model", "knn:k=3", "--index", 0], capsys)
    assert code == 0
    probs = json.loads(out)
    assert len(probs) == 2 and abs(sum(probs) - 1) < 1e-12


def test_predict_unknown_model(data_dir, capsys):
    code, _, err = run(["predict", "--data", data_dir / "uni.csv", "--model", "svm", "--index", 0], capsys)
    assert code == 2 and error_of(err)["error"] == "UsageError"


def test_predict_bad_index(data_dir, capsys):
    code, _, err = run(["predict", "--data", data_dir / "uni.csv", "--model", "knn:k=1", "--index", 400], capsys)
    assert code == 3 and error_of(err)["error"] == "IndexOutOfRange"


def test_missing_data_file(tmp_path, capsys):
    code, _, _ = run(["predict", "--data", tmp_path / "nope.csv", "--model", "knn:k=1", "--index", 0], capsys)
    assert code == 3


def test_bad_knn_k_is_model_error(data_dir, capsys):
    code, _, _ = run(["predict", "--data", data_dir / "uni.csv", "--model", "knn:k=999", "--index", 0], capsys)
    assert code == 4


def test_parse_model_spec():
    assert parse_model_spec("knn:k=1") == ("knn", {"k": "1"})
    assert parse_model_spec("linear") == ("linear", {})
    assert parse_model_spec('stdio:cmd="a b, c"') == ("stdio", {"cmd": "a b, c"})


@pytest.mark.parametrize(
    "method, data, extra, kind",
    [
        ("nun-cf", "uni.csv", ["--variant", "barycenter"], "counterfactual"),
        ("comte", "multi.jsonl", ["--seed", 3], "counterfactual"),
        ("leftist", "uni.csv", ["--seed", 3, "--samples", 200], "attribution"),
        ("tsr", "multi.jsonl", [], "attribution"),
    ],
)
def test_explain_writes_json_and_svg(data_dir, tmp_path, capsys, method, data, extra, kind):
    out, svg = tmp_path / "e.json", tmp_path / "e.svg"
    model = "linear:epochs=50" if method == "tsr" else "knn:k=1"
    code, _, err = run(["explain", "--data", data_dir / data, "--model", model, "--index", 1, "--method", method,
                        "--out", out, "--svg", svg, *extra], capsys)
    assert code == 0, err
    rec = json.loads(out.read_text())
    assert list(rec) == ["method", "kind", "range", "scores", "cf", "label", "changed_channels", "params", "seed"]
    assert rec["method"] == method and rec["kind"] == kind
    assert rec["params"]["model"] == model and rec["params"]["index"] == 1
    if kind == "counterfactual":
        assert rec["range"] is None and rec["scores"] is None and isinstance(rec["label"], int)
    else:
        assert rec["range"] == ("signed" if method == "leftist" else "unit") and rec["cf"] is None
    ET.parse(svg)


def test_explain_params_echoed(data_dir, tmp_path, capsys):
    out = tmp_path / "e.json"
    run(["explain", "--data", data_dir / "uni.csv", "--model", "knn:k=1", "--index", 0, "--method", "leftist",
         "--seed", 5, "--segments", 5, "--samples", 100, "--out", out], capsys)
    rec = json.loads(out.read_text())
    assert rec["seed"] == 5
    p = rec["params"]
    assert (p["n_segments"], p["n_samples"], p["transform"], p["seed"]) == (5, 100, "uniform", 5)


def test_comte_single_class(data_dir, tmp_path, capsys):
    code, _, err = run(["explain", "--data", data_dir / "single.jsonl", "--model", "knn:k=1", "--index", 0,
                        "--method", "comte", "--seed", 0, "--out", tmp_path / "e.json"], capsys)
    assert code == 5 and error_of(err)["error"] == "NoDistractor"


def test_nun_cf_single_class(data_dir, tmp_path, capsys):
    code, _, err = run(["explain", "--data", data_dir / "single.jsonl", "--model", "knn:k=1", "--index", 0,
                        "--method", "nun-cf", "--out", tmp_path / "e.json"], capsys)
    assert code == 5 and error_of(err)["error"] == "NoUnlikeNeighbor"


def test_leftist_multivariate_fails(data_dir, tmp_path, capsys):
    code, _, err = run(["explain", "--data", data_dir / "multi.jsonl", "--model", "knn:k=1", "--index", 0,
                        "--method", "leftist", "--seed", 0, "--out", tmp_path / "e.json"], capsys)
    assert code == 5 and error_of(err)["error"] == "MultivariateUnsupported"


@pytest.mark.parametrize("method", ["comte", "leftist"])
def test_seed_required(data_dir, tmp_path, capsys, method):
    code, _, _ = run(["explain", "--data", data_dir / "uni.csv", "--model", "knn:k=1", "--index", 0,
                      "--method", method, "--out", tmp_path / "e.json"], capsys)
    assert code == 2


def test_demo_requires_outdir(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["demo"])
    assert exc.value.code == 2


def test_demo_writes_files(tmp_path, capsys):
    assert main(["demo", "--outdir", str(tmp_path)]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == sorted(DEMO_FILES)


def test_demo_io_failure(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = run(["demo", "--outdir", blocker / "sub"], capsys)
    assert code == 1 and "error" in error_of(err)


def test_stdio_model_via_cli(data_dir, capsys):
    cmd = shlex.join(fixture_cmd("uniform", 2, 1, 30))
    code, out, err = run(["predict", "--data", data_dir / "uni.csv", "--model", f'stdio:cmd="{cmd}"',
                          "--index", 0], capsys)
    assert code == 0, err
    assert json.loads(out) == [0.5, 0.5]


def test_stdio_protocol_error_is_model_error(data_dir, capsys):
    cmd = shlex.join(fixture_cmd("malformed", 2, 1, 30))
    code, _, err = run(["predict", "--data", data_dir / "uni.csv", "--model", f'stdio:cmd="{cmd}"',
                        "--index", 0], capsys)
    assert code == 4 and error_of(err)["error"] == "ProtocolError"


def test_fit_then_load(data_dir, tmp_path, capsys):
    w = tmp_path / "w.json"
    assert main(["fit", "--data", str(data_dir / "multi.jsonl"), "--epochs", "20", "--out", str(w)]) == 0
    code, out, _ = run(["predict", "--data", data_dir / "multi.jsonl", "--model", f"linear:path={w}",
                        "--index", 2], capsys)
    assert code == 0 and len(json.loads(out)) == 2


def test_module_entry_point(tmp_path):
    p = tmp_path / "s.csv"
    r = subprocess.run([sys.executable, "-m", "tsxplain", "synth", "--kind", "bump_uni", "--n", "10",
                        "--t", "20", "--out", str(p)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert len(p.read_text().splitlines()) == 10
