import subprocess
import sys

import numpy as np
import pytest

from hippm.cli import main
from hippm.instances import canonical_qp, random_quad_box, skew2, spread_skew, write_instance
from hippm.tracecsv import COLUMNS, read_trace


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, inst in [("skew", skew2()), ("spread", spread_skew()), ("qp", canonical_qp()),
                       ("quadbox", random_quad_box(4, seed=1))]:
        p = tmp_path / f"{name}.txt"
        write_instance(inst, p)
        paths[name] = str(p)
    return paths


def test_solve_inclusion_skew(files, tmp_path):
    out = tmp_path / "skew.csv"
    assert main(["solve-inclusion", files["skew"], "--max-iter", "10001", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# ") and "seed=0" in lines[0]
    assert lines[1] == ",".join(COLUMNS)
    t = read_trace(out)
    assert len(t) == 10001
    assert t["residual"][10000] < t["residual"][1]
    # feasibility columns do not apply to inclusions and stay empty
    assert lines[2].split(",")[6:8] == ["", ""]


def test_csv_number_format(files, tmp_path):
    out = tmp_path / "f.csv"
    main(["solve-inclusion", files["skew"], "--max-iter", "3", "--out", str(out)])
    field = out.read_text().splitlines()[3].split(",")[1]
    mantissa = field.split("e")[0].replace("-", "").replace(".", "")
    assert len(mantissa) == 17


def test_classical_residuals_decay_slower(files, tmp_path):
    for m in ("halpern", "classical"):
        assert main(["solve-inclusion", files["spread"], "--method", m, "--exact", "--max-iter", "3000",
                     "--out", str(tmp_path / f"{m}.csv")]) == 0
    h = read_trace(tmp_path / "halpern.csv")["residual"]
    c = read_trace(tmp_path / "classical.csv")["residual"]
    assert np.all(h[500:] < c[500:])


def test_determinism_byte_identical(files, tmp_path):
    args = ["solve-inclusion", files["quadbox"], "--max-iter", "200", "--error-mode", "adversarial",
            "--seed", "7", "--criterion", "B"]
    main(args + ["--out", str(tmp_path / "a.csv")])
    main(args + ["--out", str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert "seed=7" in (tmp_path / "a.csv").read_text().splitlines()[0]


def test_malformed_instance_exit3_no_output(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("kind: inclusion\nfamily: scaled_skew\ndim: 2\n")
    out = tmp_path / "o.csv"
    assert main(["solve-inclusion", str(bad), "--out", str(out)]) == 3
    assert not out.exists()
    assert "error" in capsys.readouterr().err


def test_wrong_kind_exit3(files, tmp_path):
    assert main(["solve-inclusion", files["qp"], "--out", str(tmp_path / "o.csv")]) == 3
    assert main(["solve-alm", files["skew"], "--out", str(tmp_path / "o.csv")]) == 3


def test_solve_alm_and_verify(files, tmp_path, capsys):
    outs = {}
    for s in ("constant", "linear"):
        outs[s] = tmp_path / f"alm_{s}.csv"
        assert main(["solve-alm", files["qp"], "--schedule", s, "--max-outer", "1000",
                     "--out", str(outs[s])]) == 0
        assert main(["verify-bounds", str(outs[s]), files["qp"]]) == 0
        assert "ALL-PASS" in capsys.readouterr().out
    tc, tl = read_trace(outs["constant"]), read_trace(outs["linear"])
    assert abs(tl["obj_gap"][-1]) < abs(tc["obj_gap"][-1])
    assert tc["feas_max"][-1] < tc["feas_max"][10]
    assert np.all(np.isnan(tc["residual"]))


def test_solve_alm_dimension_mismatch_exit3(tmp_path):
    text = write_instance(canonical_qp()).replace("n: 2", "n: 3")
    p = tmp_path / "qp.txt"
    p.write_text(text)
    assert main(["solve-alm", str(p), "--out", str(tmp_path / "o.csv")]) == 3


def test_solve_alm_inner_abort_exit2(tmp_path):
    # a semidefinite Q has no gap certificate
    text = write_instance(canonical_qp()).replace("[Q]\n1 0\n0 1", "[Q]\n1 0\n0 0")
    p = tmp_path / "qp.txt"
    p.write_text(text)
    assert main(["solve-alm", str(p), "--out", str(tmp_path / "o.csv")]) == 2


def test_verify_exact_run_all_pass(files, tmp_path, capsys):
    out = tmp_path / "x.csv"
    main(["solve-inclusion", files["skew"], "--exact", "--max-iter", "2000", "--out", str(out)])
    report = tmp_path / "r.txt"
    assert main(["verify-bounds", str(out), files["skew"], "--report", str(report)]) == 0
    assert "ALL-PASS" in capsys.readouterr().out
    text = report.read_text()
    assert "exact_envelope" in text and text.rstrip().endswith("ALL-PASS")


def test_verify_delta3_and_corrupted_row(files, tmp_path, capsys):
    out = tmp_path / "d3.csv"
    main(["solve-inclusion", files["skew"], "--delta", "3", "--error-mode", "adversarial",
          "--max-iter", "500", "--out", str(out)])
    assert main(["verify-bounds", str(out), files["skew"]]) == 0
    lines = out.read_text().splitlines()
    row = lines[2 + 120].split(",")
    row[3] = format(float(row[3]) * 10 * 1e3, ".16e")
    lines[2 + 120] = ",".join(row)
    out.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["verify-bounds", str(out), files["skew"]]) == 2
    assert "k=120" in capsys.readouterr().out


def test_verify_mismatch_exit4(files, tmp_path):
    out = tmp_path / "s.csv"
    main(["solve-inclusion", files["skew"], "--max-iter", "50", "--out", str(out)])
    assert main(["verify-bounds", str(out), files["spread"]]) == 4
    assert main(["verify-bounds", str(out), files["qp"]]) == 4


def test_rates_synthetic_and_converged(tmp_path, capsys):
    k = np.arange(20001)
    from hippm.tracecsv import write_trace
    rows = ([str(i), "", "", format(1.0 / (i + 1), ".16e"), "", "", "", "", "", ""] for i in k)
    path = tmp_path / "syn.csv"
    write_trace(path, {"kind": "inclusion"}, rows)
    assert main(["rates", str(path), "--k-min", "100", "--k-max", "20000"]) == 0
    out = capsys.readouterr().out
    assert "slope -1.0000" in out and "delta>=2" in out

    rows = ([str(i), "", "", "0" if i > 50 else "1", "", "", "", "", "", ""] for i in range(200))
    write_trace(path, {}, rows)
    assert main(["rates", str(path)]) == 0
    assert "converged before window" in capsys.readouterr().out


def test_rates_on_natural_delta1_run(files, tmp_path, capsys):
    out = tmp_path / "n.csv"
    main(["solve-inclusion", files["skew"], "--max-iter", "10001", "--out", str(out)])
    capsys.readouterr()
    assert main(["rates", str(out)]) == 0
    text = capsys.readouterr().out
    slope = float(text.split()[1])
    assert slope <= -0.45
    assert "at least as fast as predicted" in text


def test_compare(files, capsys, tmp_path):
    assert main(["compare", files["spread"], "--out-prefix", str(tmp_path / "cmp")]) == 0
    assert "halpern below classical for every k >= 500" in capsys.readouterr().out
    assert (tmp_path / "cmp_halpern.csv").exists() and (tmp_path / "cmp_classical.csv").exists()


def test_batch_jobs(files, tmp_path):
    outdir = tmp_path / "batch"
    rc = main(["solve-inclusion", files["skew"], files["quadbox"], "--max-iter", "100",
               "--jobs", "2", "--out", str(outdir)])
    assert rc == 0
    assert sorted(p.name for p in outdir.iterdir()) == ["quadbox.csv", "skew.csv"]


def test_module_entry_point(files, tmp_path):
    r = subprocess.run([sys.executable, "-m", "hippm", "solve-inclusion", files["skew"],
                        "--max-iter", "10", "--out", str(tmp_path / "m.csv")],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
