import csv
import io
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from bkappa import fractal as fr
from bkappa.cli import main
from oracles import NINETEEN_ROOTS, expand_roots, matched_distance


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_roots_quadratic(capsys):
    code, out, _ = run(capsys, "roots", "--coeffs", "2,-3,1")
    assert code == 0
    rep = json.loads(out)
    assert [(r["re"], r["multiplicity"]) for r in rep["roots"]] == [(pytest.approx(1, abs=1e-10), 1),
                                                                   (pytest.approx(2, abs=1e-10), 1)]
    assert rep["partial"] is False and rep["seed"] == 0 and rep["steps"] == 2667


def test_roots_unperturbed_is_partial(capsys):
    code, out, err = run(capsys, "roots", "--coeffs", "2,-3,1", "--no-perturb")
    assert code == 2
    assert json.loads(out)["partial"] is True
    assert "partial" in err


def test_roots_complex_literals_and_origin(capsys):
    code, out, _ = run(capsys, "roots", "--coeffs", "0,-1-1i,1")
    assert code == 0
    rep = json.loads(out)
    assert rep["origin_multiplicity"] == 1
    vals = [complex(r["re"], r["im"]) for r in rep["roots"]]
    assert matched_distance(vals, [0, 1 + 1j]) <= 1e-12


@pytest.mark.parametrize("argv", [
    ["roots"],
    ["roots", "--coeffs", "a,b"],
    ["roots", "--coeffs", "0,0"],
    ["roots", "--coeffs", "1,1", "--dkappa", "-1"],
    ["partition", "-3"],
    ["partition", "3000"],
    ["partition", "12", "--multiplicative", "--from", "5"],
    ["fractal", "--mother", "exp", "--n", "0", "--x", "0:1:3"],
    ["fractal", "--mother", "sin", "--n", "0"],
    ["fractal", "--mother", "sin", "--n", "0", "--check", "--x", "0:1:3"],
    ["fractal", "--mother", "sin", "--n", "5", "--x", "0:1:3"],
    ["embed", "--parts", "3,x"],
    ["embed"],
    ["nosuchcommand"],
])
def test_usage_errors_exit_1(capsys, argv):
    try:
        code = main(argv)
    except SystemExit as e:
        code = e.code
    assert code == 1
    assert capsys.readouterr().err


def test_roots_input_file_and_outputs(tmp_path, capsys):
    c = expand_roots(NINETEEN_ROOTS)
    src = tmp_path / "p19.json"
    src.write_text(json.dumps({"coeffs": [[z.real, z.imag] for z in c]}))
    out, trace = tmp_path / "r.json", tmp_path / "t.csv"
    code, stdout, _ = run(capsys, "roots", "--input", str(src), "--out", str(out), "--trace", str(trace),
                          "--seed", "4")
    assert code == 0 and stdout == ""
    rep = json.loads(out.read_text())
    vals = [complex(r["re"], r["im"]) for r in rep["roots"] for _ in range(r["multiplicity"])]
    assert matched_distance(vals, NINETEEN_ROOTS) <= 1e-8
    with open(trace) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["step", "kappa", "m", "re", "im"]
    assert {int(r[2]) for r in rows[1:]} == set(range(19))
    assert rows[1][:3] == ["0", "0", "0"]


def test_roots_determinism_with_workers(tmp_path, capsys):
    outs = []
    for i, workers in enumerate(("1", "1", "4")):
        j, t = tmp_path / f"r{i}.json", tmp_path / f"t{i}.csv"
        main(["roots", "--coeffs", "1,0.5-2i,3,0,-1i,2", "--seed", "99", "--out", str(j), "--trace", str(t),
              "--workers", workers])
        outs.append((j.read_bytes(), t.read_bytes()))
    capsys.readouterr()
    assert outs[0] == outs[1] == outs[2]


def test_seed_from_environment(tmp_path):
    env = dict(os.environ, BKAPPA_SEED="1234")
    cmd = [sys.executable, "-m", "bkappa", "roots", "--coeffs", "2,-3,1"]
    res = subprocess.run(cmd, capture_output=True, text=True, env=env)
    assert res.returncode == 0
    assert json.loads(res.stdout)["seed"] == 1234
    res = subprocess.run(cmd + ["--seed", "5"], capture_output=True, text=True, env=env)
    assert json.loads(res.stdout)["seed"] == 5


def test_partition_commands(capsys):
    code, out, _ = run(capsys, "partition", "100")
    assert code == 0 and json.loads(out)["p"] == 190569292
    d = json.loads(run(capsys, "partition", "100", "--hrr")[1])
    assert d["hrr_rounded"] == 190569292 and d["terms"] == 20
    d = json.loads(run(capsys, "partition", "8", "--from", "3")[1])
    assert abs(d["entropy_change"] - 1.99243) <= 1e-5
    d = json.loads(run(capsys, "partition", "12", "--multiplicative")[1])
    assert d["m"] == 4
    d = json.loads(run(capsys, "partition", "12", "--multiplicative", "--from", "2")[1])
    assert d["entropy_change"] == pytest.approx(math.log(4))


def test_fractal_check(capsys):
    code, out, _ = run(capsys, "fractal", "--mother", "log1p", "--p", "3", "--lambda", "3", "--all", "--check",
                       "--x", "0:10:1000")
    d = json.loads(out)
    assert code == 0 and d["ok"] and d["max_residual"] <= 1e-10


def test_fractal_csv_table(capsys):
    code, out, _ = run(capsys, "fractal", "--mother", "tan", "--n", "1", "--square", "-2-2i:2+2i:16")
    assert code == 0
    x, y, v = fr.read_csv_table(io.StringIO(out))
    assert v.size == 256
    ref = fr.FractalSpec(3, 3, 1, fr.MOTHERS["tan"]).sample(fr.Grid.square("-2-2i:2+2i:16").points(),
                                                             complex_plane=True)
    np.testing.assert_array_equal(v.reshape(16, 16), ref)


def test_fractal_binary_and_all(tmp_path, capsys):
    out = tmp_path / "tan.bin"
    code = main(["fractal", "--mother", "tan", "--all", "--square", "-2-2i:2+2i:8", "--format", "binary",
                 "--out", str(out)])
    assert code == 0
    total = 0
    for n in range(3):
        header, vals = fr.read_binary_table((tmp_path / f"tan_n{n}.bin").read_bytes())
        assert header[:2] == (8.0, 8.0)
        total = total + vals
    z = fr.Grid.square("-2-2i:2+2i:8").points()
    assert np.max(np.abs(total - np.tan(z))) <= 1e-10


def test_fractal_singular_grid(capsys):
    argv = ["fractal", "--mother", "log1p", "--n", "0", "--x", "-1:0:3"]
    assert main(argv) == 1
    code = main(argv + ["--allow-nan"])
    out = capsys.readouterr().out
    assert code == 0
    assert "nan" in out.splitlines()[1]


def test_fractal_embedding_sample(capsys):
    code, out, _ = run(capsys, "fractal", "--mother", "tan", "--kappa", "5", "--m", "0", "--square",
                       "-2-2i:2+2i:8")
    assert code == 0
    _, _, v = fr.read_csv_table(io.StringIO(out))
    z = fr.Grid.square("-2-2i:2+2i:8").points().ravel()
    assert np.max(np.abs(v - np.tan(z)) / np.abs(np.tan(z))) <= 0.1


def test_embed_parts(capsys):
    code, out, _ = run(capsys, "embed", "--parts", "3,5", "--branches", "1,2")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["kappa", "n", "value"]
    first = {r["n"]: float(r["value"]) for r in rows if float(r["kappa"]) == 0}
    last = {r["n"]: float(r["value"]) for r in rows if r["kappa"] == "inf"}
    assert first == {"1": 3.0, "2": 5.0} and last == {"1": 8.0, "2": 8.0}


def test_embed_loop_and_demos(capsys):
    rows = list(csv.DictReader(io.StringIO(run(capsys, "embed", "--parts", "7")[1])))
    assert {float(r["value"]) for r in rows if r["kappa"] in ("0.0", "inf")} == {7.0}
    code, out, _ = run(capsys, "embed", "--demo", "rke2", "--x", "0:1:3", "--kpoints", "3")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and list(rows[0]) == ["kappa", "n", "x", "value"]
    at0 = [r for r in rows if float(r["kappa"]) == 0 and r["n"] == "1"]
    assert [float(r["value"]) for r in at0] == pytest.approx([5 * math.sin(float(r["x"])) for r in at0])
    code, out, _ = run(capsys, "embed", "--demo", "disks", "--square", "-1-2i:5+3i:4", "--kpoints", "2")
    assert code == 0 and out.splitlines()[0] == "kappa,n,x,y,value"
