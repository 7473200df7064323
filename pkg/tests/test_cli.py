import json
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from splinediff import cli


def run(args, stdin=None, cwd=None):
    return subprocess.run([sys.executable, "-m", "splinediff", *args], input=stdin,
                          capture_output=True, text=True, cwd=cwd, timeout=120)


@pytest.fixture
def samples(tmp_path):
    path = tmp_path / "samples.csv"
    assert cli.main(["simulate", "--n", "600", "--sigma2", "5e-5", "-o", str(path)]) == 0
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def test_simulate_format(samples):
    lines = samples.read_text().splitlines()
    assert lines[0] == "x,y"
    assert len(lines) == 601
    x, y = map(float, lines[1].split(","))
    assert 0 <= x <= 1 and np.isfinite(y)


def test_fit_reference_config(samples, tmp_path):
    out = tmp_path / "out"
    assert cli.main(["fit", str(samples), "--sigma2", "5e-5", "--out-dir", str(out), "--truth"]) == 0
    coeffs = read_json(out / "coefficients.json")
    assert coeffs["M"] == 40 and coeffs["n"] == 600
    assert coeffs["alpha"] == pytest.approx(3.72e-6, rel=0.01)
    assert len(coeffs["lambda"]) == 43
    header = (out / "evaluation.csv").read_text().splitlines()
    assert header[0] == "x,f,f_prime,f_true,f_prime_true"
    assert len(header) == 1002
    hist = (out / "histogram.csv").read_text().splitlines()
    assert hist[0] == "bin_index,left_edge,right_edge,count,rho"
    assert sum(int(r.split(",")[3]) for r in hist[1:]) == 600
    regions = read_json(out / "regions.json")
    assert regions["threshold"] == 0.1
    assert regions["regions"] and regions["regions"][0]["p"] == 0


def test_fixed_alpha_flag(samples, tmp_path):
    cli.main(["fit", str(samples), "--sigma2", "5e-5", "--alpha", "1e-3", "--out-dir", str(tmp_path)])
    assert read_json(tmp_path / "coefficients.json")["alpha"] == 1e-3


def test_empty_input_is_degenerate(tmp_path, capsys):
    path = tmp_path / "empty.csv"
    path.write_text("x,y\n")
    assert cli.main(["fit", str(path), "--sigma2", "1e-4", "--out-dir", str(tmp_path)]) == 3
    assert "need at least 2 samples" in capsys.readouterr().err
    assert not (tmp_path / "coefficients.json").exists()


def test_out_of_range_names_line(tmp_path, capsys):
    rows = ["x,y"] + [f"0.{i},1.0" for i in range(1, 6)] + ["1.5,2.0", "0.9,1.0"]
    path = tmp_path / "bad.csv"
    path.write_text("\n".join(rows) + "\n")
    assert cli.main(["fit", str(path), "--sigma2", "1e-4", "--out-dir", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "line 7" in err and "1.5" in err


def test_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n0.1,0.2\n")
    assert cli.main(["fit", str(path), "--sigma2", "1e-4", "--out-dir", str(tmp_path)]) == 2


def test_stream_matches_fit(samples, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["fit", str(samples), "--sigma2", "5e-5", "--out-dir", str(a)])
    proc = run(["stream", "--sigma2", "5e-5", "--out-dir", str(b), "--refit-every", "100"],
               stdin=samples.read_text())
    assert proc.returncode == 0, proc.stderr
    assert (a / "coefficients.json").read_text() == (b / "coefficients.json").read_text()
    assert (a / "evaluation.csv").read_text() == (b / "evaluation.csv").read_text()


def test_stream_resume_is_bit_exact(samples, tmp_path):
    lines = samples.read_text().splitlines()
    full, split = tmp_path / "full", tmp_path / "split"
    ck = tmp_path / "state.ckpt"
    run(["stream", "--sigma2", "5e-5", "--out-dir", str(full)], stdin="\n".join(lines) + "\n")
    first = run(["stream", "--sigma2", "5e-5", "--out-dir", str(split), "--checkpoint", str(ck)],
                stdin="\n".join(lines[:250]) + "\n")
    assert first.returncode == 0 and ck.exists()
    second = run(["stream", "--sigma2", "5e-5", "--out-dir", str(split), "--checkpoint", str(ck)],
                 stdin="\n".join(lines[250:]) + "\n")
    assert second.returncode == 0, second.stderr
    assert (full / "coefficients.json").read_text() == (split / "coefficients.json").read_text()


def test_stream_rejects_mismatched_checkpoint(samples, tmp_path):
    ck = tmp_path / "state.ckpt"
    run(["stream", "--sigma2", "5e-5", "--out-dir", str(tmp_path), "--checkpoint", str(ck)],
        stdin=samples.read_text())
    proc = run(["stream", "--m", "20", "--sigma2", "5e-5", "--out-dir", str(tmp_path),
                "--checkpoint", str(ck)], stdin="")
    assert proc.returncode == 2


def test_stream_skips_malformed_and_advises_once(tmp_path):
    rng = np.random.default_rng(3)
    rows = ["x,y"] + [f"{x!r},{math.sin(x)!r}" for x in rng.random(200).tolist()]
    rows.insert(10, "garbage")
    rows.insert(20, "2.0,1.0")
    proc = run(["stream", "--m", "10", "--sigma2", "1e-4", "--out-dir", str(tmp_path)],
               stdin="\n".join(rows) + "\n")
    assert proc.returncode == 0
    assert proc.stderr.count("advisory:") == 1
    assert "2 malformed line(s) skipped" in proc.stderr
    assert read_json(tmp_path / "coefficients.json")["n"] == 200


def test_convergence_single_m(tmp_path):
    assert cli.main(["convergence", "--m-list", "20", "--reps", "1", "--out-dir", str(tmp_path)]) == 0
    rows = (tmp_path / "convergence.csv").read_text().splitlines()
    assert rows[0] == "M,N,rep,e_l2,eprime_l2" and len(rows) == 2
    summary = read_json(tmp_path / "convergence_summary.json")
    assert "slope_f" not in summary and len(summary["table"]) == 1


def test_convergence_is_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        cli.main(["convergence", "--m-list", "20,25", "--reps", "2", "--seed", "4", "--out-dir", str(out)])
    for name in ("convergence.csv", "convergence_summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert "slope_f" in read_json(a / "convergence_summary.json")


def test_convergence_cap(tmp_path, capsys):
    code = cli.main(["convergence", "--m-list", "50", "--cap-samples", "1000", "--out-dir", str(tmp_path)])
    assert code == 4
    assert "--cap-samples" in capsys.readouterr().err
    assert not (tmp_path / "convergence.csv").exists()


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "x.json"
    target.write_text("old")
    cli.atomic_write(target, "new")
    assert target.read_text() == "new"
    assert os.listdir(tmp_path) == ["x.json"]


def test_atomic_write_keeps_old_file_on_failure(tmp_path):
    target = tmp_path / "x.json"
    target.write_text("old")
    with pytest.raises(TypeError):
        cli.atomic_write(target, 12345)
    assert target.read_text() == "old"
    assert os.listdir(tmp_path) == ["x.json"]
