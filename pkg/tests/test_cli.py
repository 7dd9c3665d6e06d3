import json
import subprocess
import sys

import numpy as np
import pytest

from phaseless.cli import build_parser, dispatch, parse_mu_policy, parse_snr_range


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def files(tmp_path):
    return {
        "frame": write(tmp_path / "f.json", {"n": 2, "m": 3, "vectors": [[1, 0], [0, 1], [1, 1]]}),
        "signal": write(tmp_path / "x.json", {"coords": [1, 0]}),
        "y": write(tmp_path / "y.json", {"values": [1, 0, 1]}),
        "dir": tmp_path,
    }


def run(argv, capsys):
    code = dispatch(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_snr_range():
    assert parse_snr_range("-20:10:80") == tuple(float(s) for s in range(-20, 81, 10))
    assert parse_snr_range("0:0.5:1") == (0.0, 0.5, 1.0)
    assert parse_snr_range("5,7") == (5.0, 7.0)
    for bad in ("1:0:5", "5:1:0", "a:b:c", "1:2"):
        with pytest.raises(Exception):
            parse_snr_range(bad)


def test_parse_mu_policy():
    assert parse_mu_policy("max1") == {"mu_policy": "max_one_lambda"}
    assert parse_mu_policy("lambda") == {"mu_policy": "equal_lambda"}
    assert parse_mu_policy("const:2.5") == {"mu_policy": "constant", "mu_constant": 2.5}
    with pytest.raises(Exception):
        parse_mu_policy("const:x")


def test_gen_frame(tmp_path, capsys):
    out = tmp_path / "f.json"
    sig = tmp_path / "x.json"
    code, _, _ = run(["gen-frame", "--n", "3", "--m", "9", "--seed", "4", "--out", str(out),
                      "--signal-out", str(sig)], capsys)
    assert code == 0
    d = json.loads(out.read_text())
    assert (d["n"], d["m"]) == (3, 9) and np.shape(d["vectors"]) == (9, 3)
    assert json.loads(sig.read_text())["coords"][0] > 0
    first = out.read_bytes()
    run(["gen-frame", "--n", "3", "--m", "9", "--seed", "4", "--out", str(out)], capsys)
    assert out.read_bytes() == first


def test_analyze(files, capsys):
    code, out, _ = run(["analyze", "--frame", files["frame"], "--signal", files["signal"]], capsys)
    assert code == 0 and json.loads(out) == {"values": [1.0, 0.0, 1.0]}


def test_check_fstar(files, capsys):
    code, out, _ = run(["check", "--frame", files["frame"]], capsys)
    assert code == 0
    assert out.strip() == "injective: true (partition), full-spark: true, a0≈0.3333"
    code, out, _ = run(["check", "--frame", files["frame"], "--format", "json", "--a0-samples", "50"], capsys)
    d = json.loads(out)
    assert d["full_spark"] is True and d["partition"]["injective"] is True
    assert d["a0"] == pytest.approx(1 / 3, abs=1e-6)


def test_check_non_injective(tmp_path, capsys):
    f = write(tmp_path / "f.json", {"n": 2, "m": 2, "vectors": [[1, 0], [0, 1]]})
    code, out, _ = run(["check", "--frame", f, "--format", "json", "--a0-samples", "20"], capsys)
    d = json.loads(out)
    assert code == 0 and d["partition"] == {"injective": False, "witness": [0]}


def test_solve_noiseless(files, capsys):
    trace = files["dir"] / "trace.csv"
    code, out, _ = run(["solve", "--frame", files["frame"], "--measurements", files["y"],
                        "--algorithm", "2", "--trace", str(trace)], capsys)
    assert code == 0
    d = json.loads(out)
    est = np.array(d["coords"])
    assert min(np.linalg.norm(est - [1, 0]), np.linalg.norm(est + [1, 0])) <= 1e-6
    assert d["config"]["alpha"] == 0.9 and d["algorithm"] == 2
    lines = trace.read_text().splitlines()
    assert lines[0] == "t,lambda,mu,j,L" and len(lines) == d["iterations"] + 1


def test_solve_flags_reach_config(files, capsys):
    code, out, _ = run(["solve", "--frame", files["frame"], "--measurements", files["y"],
                        "--algorithm", "1", "--alpha", "0.5", "--decay", "1.1", "--eps", "1e-6",
                        "--tmax", "50", "--mu-policy", "const:3"], capsys)
    d = json.loads(out)
    assert code == 0 and d["iterations"] == 50 and d["stop_reason"] == "max_iters"
    assert d["config"] == {"alpha": 0.5, "lambda_decay": 1.1, "mu_policy": "constant", "mu_constant": 3.0,
                           "eps": 1e-6, "t_max": 50, "min_steps": 100, "relative_stall": False}


def test_solve_nonpositive_e1_exits_2(files, capsys):
    y = write(files["dir"] / "neg.json", {"values": [-1, -1, -1]})
    code, out, err = run(["solve", "--frame", files["frame"], "--measurements", y], capsys)
    assert code == 2
    assert json.loads(out)["coords"] == [0.0, 0.0]
    assert json.loads(err)["error"] == "nonpositive_e1"


def test_crlb(files, capsys):
    code, out, _ = run(["crlb", "--frame", files["frame"], "--signal", files["signal"],
                        "--sigma", "1", "--lifted", "--mle"], capsys)
    d = json.loads(out)
    assert code == 0
    assert d["crlb_trace"] == pytest.approx(0.75)
    assert d["lifted_bound"] == pytest.approx(2.0)
    assert d["mle_mse_bound"] == pytest.approx(0.9375)
    assert d["delta"] == pytest.approx([1, 0])
    code, out, _ = run(["crlb", "--frame", files["frame"], "--signal", files["signal"], "--sigma", "1"], capsys)
    assert "lifted_bound" not in json.loads(out) and "mle_mse_bound" not in json.loads(out)


def test_crlb_singular_exits_2(tmp_path, files, capsys):
    f = write(tmp_path / "g.json", {"n": 2, "m": 2, "vectors": [[1, 0], [0, 1]]})
    code, out, err = run(["crlb", "--frame", f, "--signal", files["signal"], "--sigma", "1"], capsys)
    payload = json.loads(err)
    assert code == 2 and out == ""
    assert payload["error"] == "unidentifiable"
    assert np.abs(payload["null_vector"]) == pytest.approx([0, 1])


@pytest.mark.parametrize("argv, needle", [
    (["solve", "--bogus"], "--bogus"),
    (["crlb", "--frame", "F", "--signal", "X"], "--sigma"),
    (["bench", "--snr-db", "1:0:5"], "--snr-db"),
    (["bench", "--mu-policy", "sometimes"], "--mu-policy"),
    (["analyze", "--frame", "/nonexistent.json", "--signal", "x"], "--frame"),
    (["frobnicate"], "frobnicate"),
])
def test_usage_errors_exit_1(argv, needle, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1
    assert needle in err and len(err.strip().splitlines()) == 1


def test_malformed_inputs(files, capsys):
    bad = files["dir"] / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(["analyze", "--frame", str(bad), "--signal", files["signal"]], capsys)
    assert code == 1 and "--frame" in err
    wrong = write(files["dir"] / "w.json", {"coords": [1, 0, 0]})
    code, _, err = run(["analyze", "--frame", files["frame"], "--signal", wrong], capsys)
    assert code == 1 and "--signal" in err
    short = write(files["dir"] / "s.json", {"values": [1, 0]})
    code, _, err = run(["solve", "--frame", files["frame"], "--measurements", short], capsys)
    assert code == 1 and "--measurements" in err
    missing = write(files["dir"] / "m.json", {"n": 2, "vectors": [[1, 0]]})
    code, _, err = run(["check", "--frame", missing], capsys)
    assert code == 1 and "'m'" in err


def test_json_diagnostics(files, capsys):
    code, _, err = run(["solve", "--bogus", "--format", "json"], capsys)
    assert code == 1 and json.loads(err)["error"] == "usage"


def test_bench_small(files, capsys):
    out = files["dir"] / "r.csv"
    plots = files["dir"] / "plots"
    argv = ["bench", "--n", "3", "--snr-db", "-10:10:10", "--trials", "3", "--sign", "oracle",
            "--out", str(out), "--plots", str(plots), "--seed", "2"]
    assert run(argv, capsys)[0] == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("n,m,snr_db,sigma") and len(lines) == 4
    assert [float(l.split(",")[2]) for l in lines[1:]] == [-10, 0, 10]
    assert (plots / "mse_vs_snr_n3.svg").exists()
    first = out.read_bytes()
    assert run(argv + ["--jobs", "2"], capsys)[0] == 0
    assert out.read_bytes() == first


def test_bench_json_stdout(capsys):
    code, out, _ = run(["bench", "--n", "2", "--snr-db", "30:10:40", "--trials", "2", "--format", "json"], capsys)
    rows = json.loads(out)
    assert code == 0 and [r["snr_db"] for r in rows] == [30, 40]


def test_bench_defaults_reproduce_grid():
    args = build_parser().parse_args(["bench"])
    assert parse_snr_range(args.snr_db) == tuple(range(-20, 81, 10))
    assert len(parse_snr_range(args.snr_db)) == 11
    assert (args.n, args.redundancy, args.algorithm, args.alpha, args.decay, args.eps) == (10, 3, 2, 0.9, 1.05, 1e-8)
    assert args.trials is None          # resolved to 100 / 1000 by algorithm


@pytest.mark.parametrize("cmd", ["gen-frame", "analyze", "check", "solve", "crlb", "bench"])
def test_help_documents_every_flag(cmd, capsys):
    assert dispatch([cmd, "--help"]) == 0
    text = capsys.readouterr().out
    sub = build_parser()._subparsers._group_actions[0].choices[cmd]
    for action in sub._actions:
        for opt in action.option_strings:
            assert opt in text
        if action.default not in (None, False) and action.dest != "help":
            assert "default" in (action.help or "")
    if cmd in ("solve", "bench"):
        assert "0.9" in text and "1.05" in text
    if cmd == "bench":
        assert "100 for algorithm 1, 1000 for 2" in " ".join(text.split())


def test_console_entry_point(files):
    r = subprocess.run([sys.executable, "-m", "phaseless", "analyze", "--frame", files["frame"],
                        "--signal", files["signal"]], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["values"] == [1.0, 0.0, 1.0]
    r = subprocess.run([sys.executable, "-m", "phaseless", "crlb"], capture_output=True, text=True)
    assert r.returncode == 1
