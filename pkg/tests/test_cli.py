import re

import numpy as np
import pytest

from faustkit import io
from faustkit.cli import main, svd_baseline_rows
from faustkit.datasets import planted_faust


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def metrics(out):
    return {k: float(v.rstrip("s")) for k, v in re.findall(r"(\w+)=([^\s]+)", out)}


def test_hadamard_demo(capsys, tmp_path):
    code, out, _ = run(capsys, "factorize", "--demo", "hadamard", "--n", 32,
                       "--out", tmp_path / "h.json")
    assert code == 0
    got = metrics(out)
    assert got["RC"] == pytest.approx(0.3125) and got["RE"] < 1e-10 and got["J"] == 5
    assert io.read_faust(tmp_path / "h.json").shape == (32, 32)


def test_tiny_matrix_rejected(capsys, tmp_path):
    np.savetxt(tmp_path / "one.txt", [[3.0]])
    code, _, err = run(capsys, "factorize", tmp_path / "one.txt", "--level", "sp:1;sp:1")
    assert code == 2 and "matrix too small" in err


def test_factorize_then_apply(capsys, tmp_path, rng):
    A = planted_faust(8, 12, 2, 2, 8, seed=3).toarray()
    io.write_matrix(tmp_path / "a.mtx", A)
    code, out, _ = run(capsys, "factorize", tmp_path / "a.mtx", "--level", "sp:64;sp:96",
                       "--out", tmp_path / "f.json", "--trace", tmp_path / "t.csv")
    assert code == 0 and (tmp_path / "t.csv").exists()
    F = io.read_faust(tmp_path / "f.json")
    x = rng.standard_normal(12)
    io.write_vector(tmp_path / "x.txt", x)
    code, _, _ = run(capsys, "apply", tmp_path / "f.json", tmp_path / "x.txt",
                     "--out", tmp_path / "y.txt")
    assert code == 0
    np.testing.assert_allclose(io.read_vector(tmp_path / "y.txt"), F.toarray() @ x, atol=1e-12)
    assert metrics(out)["RE"] == pytest.approx(
        np.linalg.norm(A - F.toarray(), 2) / np.linalg.norm(A, 2), rel=1e-4)


def test_apply_transpose_and_flops(capsys, tmp_path, rng):
    F = planted_faust(6, 9, 3, 2, 6, seed=1)
    io.write_faust(tmp_path / "f.json", F)
    y = rng.standard_normal(6)
    io.write_vector(tmp_path / "y.txt", y)
    code, out, err = run(capsys, "apply", tmp_path / "f.json", tmp_path / "y.txt",
                         "--transpose", "--count-flops")
    assert code == 0
    np.testing.assert_allclose(np.array(out.split(), dtype=float), F.toarray().T @ y, atol=1e-12)
    assert f"flops={2 * F.s_tot} " in err


def test_apply_dimension_mismatch(capsys, tmp_path):
    io.write_faust(tmp_path / "f.json", planted_faust(4, 5, 2, 1, 4))
    io.write_vector(tmp_path / "x.txt", np.ones(4))
    code, _, _ = run(capsys, "apply", tmp_path / "f.json", tmp_path / "x.txt")
    assert code == 2


def test_svd_baseline(capsys, tmp_path, rng):
    A = rng.standard_normal((6, 8))
    rows = svd_baseline_rows(A, [1, 2, 3, 6])
    assert rows[-1][1] < 1e-12
    res = [r[1] for r in rows]
    assert all(b <= a + 1e-12 for a, b in zip(res, res[1:]))
    assert [r[2] for r in rows] == [15, 30, 45, 90]
    u, v = rng.standard_normal(6), rng.standard_normal(8)
    assert svd_baseline_rows(np.outer(u, v), [1])[0][1] < 1e-12
    io.write_matrix(tmp_path / "a.mtx", A)
    code, out, _ = run(capsys, "svd-baseline", tmp_path / "a.mtx", "--ranks", "1,6")
    assert code == 0 and out.splitlines()[0] == "rank,re,params"
    code, _, _ = run(capsys, "svd-baseline", tmp_path / "a.mtx", "--ranks", "7")
    assert code == 2


def test_config_file(capsys, tmp_path):
    (tmp_path / "c.ini").write_text("[factorize]\ndemo = hadamard\nn = 8\n")
    code, out, _ = run(capsys, "factorize", "--config", tmp_path / "c.ini")
    assert code == 0 and metrics(out)["RE"] < 1e-10
    (tmp_path / "bad.ini").write_text("[factorize]\ncolour = red\n")
    assert run(capsys, "factorize", "--config", tmp_path / "bad.ini")[0] == 2


def test_config_levels(capsys, tmp_path):
    io.write_matrix(tmp_path / "a.mtx", planted_faust(6, 6, 2, 2, 6, seed=0).toarray())
    (tmp_path / "c.ini").write_text(
        f"[factorize]\ninput = {tmp_path / 'a.mtx'}\nlevels =\n    sp:36;sp:12\n")
    code, out, _ = run(capsys, "factorize", "--config", tmp_path / "c.ini")
    assert code == 0 and metrics(out)["J"] == 2


@pytest.mark.parametrize("argv", [
    ["factorize"],
    ["factorize", "--demo", "hadamard", "--n", "12"],
    ["factorize", "--demo", "hadamard", "--n", "8", "--J", "3"],
    ["factorize", "missing.mtx", "--level", "sp:1;sp:1"],
    ["apply"],
    ["localize", "--m", "4", "--k", "8"],
    ["--threads", "0", "localize"],
    ["denoise", "--sigma", "-1"],
    ["nonsense"],
])
def test_bad_arguments_exit_2(capsys, argv):
    assert main(argv) == 2


def test_seed_determinism(capsys):
    argv = ["--seed", 4, "factorize", "--demo", "hadamard", "--n", 8]
    a = run(capsys, *argv)[1]
    b = run(capsys, *argv)[1]
    assert a.split("time=")[0] == b.split("time=")[0]


def test_localize_smoke(capsys, tmp_path):
    code, out, _ = run(capsys, "localize", "--m", 8, "--n", 24, "--trials", 10, "--k", 2,
                       "--out", tmp_path / "r.csv")
    assert code == 0
    lines = out.splitlines()
    assert [ln.split(":")[0] for ln in lines] == ["dense", "exact", "approx", "zero"]
    assert "recovery=0.000" in lines[-1]
    assert len((tmp_path / "r.csv").read_text().splitlines()) == 1 + 4 * 10


def test_denoise_smoke(capsys, tmp_path):
    img = np.tile(np.linspace(0, 255, 24), (24, 1))
    io.write_pgm(tmp_path / "i.pgm", img)
    code, out, _ = run(capsys, "denoise", tmp_path / "i.pgm", "--sigma", 10, "--atoms", 32,
                       "--patches", 200, "--ksvd-iters", 2, "--iters", 5, "--J", 2,
                       "--out", tmp_path / "o.pgm", "--report", tmp_path / "r.csv")
    assert code == 0 and "PSNR_out" in out
    assert io.read_pgm(tmp_path / "o.pgm").shape == (24, 24)
    assert (tmp_path / "r.csv").exists()
