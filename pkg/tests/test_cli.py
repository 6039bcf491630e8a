import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

import qcert.cli as cli
from conftest import FIG1
from qcert.config import FeasibilityError
from qcert.linalg import matrix_from_json, matrix_to_json
from qcert.numrange import RangeSet

FIG1_P2 = (0.5 * math.sqrt(0.95) - math.sqrt(0.75) * math.sqrt(0.05)) ** 2
HAD_P2 = (math.sqrt(0.95) - math.sqrt(0.05)) ** 2 / 2
FIG1_NU_Q = math.sqrt(0.95) * 0.5 - math.sqrt(0.05) * math.sqrt(0.75)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if code == 0 and out else None), err


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


class TestCertify:
    def test_povm_hadamard(self, capsys):
        code, out, _ = run(capsys, "certify", "povm", "--u", "hadamard", "--delta", "0.05")
        assert code == 0
        assert out["schema"] == "qcert/1" and out["command"] == "certify"
        assert out["p2"] == pytest.approx(HAD_P2, abs=1e-12)
        assert out["strategy"]["branch"] == "dephased"

    def test_unitary_from_file(self, capsys, tmp_path):
        path = write(tmp_path, "fig1.json", matrix_to_json(FIG1))
        code, out, _ = run(capsys, "certify", "unitary", "--u", path, "--delta", "0.05")
        assert code == 0
        assert out["p2"] == pytest.approx(FIG1_P2, abs=1e-12)
        assert np.array_equal(matrix_from_json(out["problem"]["u"]), FIG1)

    def test_state_files(self, capsys, tmp_path):
        e0 = write(tmp_path, "e0.json", {"rows": 2, "cols": 1, "entries": [[1, 0], [0, 0]]})
        e1 = write(tmp_path, "e1.json", {"rows": 1, "cols": 2, "entries": [[0, 0], [1, 0]]})
        code, out, _ = run(capsys, "certify", "state", "--psi", e0, "--phi", e1, "--delta", "0.3")
        assert code == 0 and out["p2"] == 0.0 and out["p1"] == 0.0

    def test_copies(self, capsys):
        code, out, _ = run(capsys, "certify", "unitary", "--u", "fig2", "--delta", "0.7", "--copies", "2")
        assert code == 0 and out["p2"] == pytest.approx(0, abs=1e-14)

    def test_out_file(self, capsys, tmp_path):
        dest = tmp_path / "res.json"
        code, out, _ = run(capsys, "certify", "state", "--psi", "ket0", "--phi", "plus", "--delta", "0.05",
                           "--out", str(dest))
        assert code == 0 and out is None
        assert json.loads(dest.read_text())["p2"] == pytest.approx(HAD_P2, abs=1e-12)


class TestSimulate:
    def test_h0(self, capsys):
        code, out, _ = run(capsys, "simulate", "povm", "--u", "hadamard", "--delta", "0.05", "--truth", "h0",
                           "--shots", "1000000", "--seed", "7")
        r = out["report"]
        assert code == 0 and r["empirical_p2"] is None
        assert abs(r["empirical_p1"] - 0.05) <= r["ci_halfwidth_p1"]

    def test_h1(self, capsys):
        code, out, _ = run(capsys, "simulate", "povm", "--u", "hadamard", "--delta", "0.05", "--truth", "h1",
                           "--shots", "1000000", "--seed", "7")
        r = out["report"]
        assert abs(r["empirical_p2"] - HAD_P2) <= r["ci_halfwidth_p2"]

    def test_single_shot_replay(self, capsys):
        args = ("simulate", "povm", "--u", "hadamard", "--delta", "0.05", "--shots", "1", "--seed", "7")
        cli.main(list(args))
        first = capsys.readouterr().out
        cli.main(list(args))
        assert capsys.readouterr().out == first

    def test_env_seed(self, capsys, monkeypatch):
        monkeypatch.setenv("QCERT_SEED", "123")
        code, out, _ = run(capsys, "simulate", "unitary", "--u", "fig1", "--delta", "0.05", "--shots", "10")
        assert code == 0 and out["report"]["seed"] == 123

    def test_bad_env_seed(self, capsys, monkeypatch):
        monkeypatch.setenv("QCERT_SEED", "abc")
        code, _, err = run(capsys, "simulate", "unitary", "--u", "fig1", "--delta", "0.05", "--shots", "10")
        assert code == 2 and "QCERT_SEED" in err


class TestEmitRange:
    def test_fig1(self, capsys, tmp_path):
        dest = tmp_path / "fig1.csv"
        code, out, _ = run(capsys, "emit-range", "--u", "fig1", "--delta", "0.05", "--csv", str(dest))
        assert code == 0
        (s,) = out["sets"]
        hull = RangeSet.from_json(s["hull"])
        assert np.array_equal(hull.points, np.diag(FIG1))
        (oval,) = s["ranges"]
        assert oval["q"] == math.sqrt(0.95)
        assert oval["dist_to_zero"] == pytest.approx(FIG1_NU_Q, abs=1e-4)
        rows = list(csv.DictReader(dest.open()))
        assert rows[0]["kind"] == "hull-polygon"
        assert float(rows[-1]["dist_to_zero"]) == oval["dist_to_zero"]

    def test_fig2_sequence(self, capsys):
        code, out, _ = run(capsys, "emit-range", "--u", "fig2", "--delta", "0.7", "--copies", "1..4",
                           "--n-dirs", "16")
        dists = [s["ranges"][0]["dist_to_zero"] for s in out["sets"]]
        assert [s["copies"] for s in out["sets"]] == [1, 2, 3, 4]
        assert dists[0] > 0 and dists[1:] == [0.0, 0.0, 0.0]

    def test_q_zero_contains_origin(self, capsys):
        code, out, _ = run(capsys, "emit-range", "--u", "fig1", "--q-grid", "0", "--copies", "1,2",
                           "--n-dirs", "8")
        assert all(r["dist_to_zero"] == 0.0 for s in out["sets"] for r in s["ranges"])

    def test_round_trip_bit_exact(self, capsys):
        cli.main(["emit-range", "--u", "fig1", "--q-grid", "0.5,0.9", "--n-dirs", "8"])
        text = capsys.readouterr().out
        obj = json.loads(text)
        for rs in obj["sets"][0]["ranges"]:
            back = RangeSet.from_json(rs)
            assert back.to_json() == rs
        assert json.dumps(obj, indent=2) + "\n" == text

    def test_needs_q(self, capsys):
        code, _, err = run(capsys, "emit-range", "--u", "fig1")
        assert code == 2 and "--delta or --q-grid" in err


class TestExitCodes:
    @pytest.mark.parametrize("content, needle", [
        ('{"rows": 2,\n "cols" 2}', "line 2"),
        ({"rows": 2, "cols": 2}, "missing field 'entries'"),
        ({"rows": 2, "cols": 2, "entries": [[1, 0], [0, 0], [0, 0], "x"]}, "entries[3]"),
        ({"rows": 2, "cols": 2, "entries": [[1, 0], [1, 0], [0, 0], [1, 0]]}, "not unitary"),
    ])
    def test_malformed_matrix(self, capsys, tmp_path, content, needle):
        path = write(tmp_path, "bad.json", content)
        for cmd in (["certify", "unitary"], ["simulate", "povm"]):
            code, _, err = run(capsys, *cmd, "--u", path, "--delta", "0.1")
            assert code == 2 and needle in err
        code, _, err = run(capsys, "emit-range", "--u", path, "--delta", "0.1")
        assert code == 2 and needle in err

    @pytest.mark.parametrize("argv", [
        ["certify", "unitary", "--u", "fig1", "--delta", "1.5"],
        ["certify", "unitary", "--u", "fig1", "--delta", "x"],
        ["certify", "unitary", "--delta", "0.1"],
        ["certify", "state", "--psi", "ket0", "--delta", "0.1"],
        ["certify", "unitary", "--u", "no/such/file.json", "--delta", "0.1"],
        ["certify", "povm", "--u", "fig1", "--delta", "0.1", "--copies", "0"],
        ["simulate", "state", "--psi", "ket0", "--phi", "ket1", "--delta", "0.1", "--seed", "-3"],
        ["emit-range", "--u", "fig1", "--q-grid", "1.2"],
        ["emit-range", "--u", "fig1", "--delta", "0.1", "--copies", "0..2"],
        ["frobnicate"],
    ])
    def test_validation_errors(self, capsys, argv):
        with pytest.raises(SystemExit) as exc:
            if cli.main(argv) == 2:
                raise SystemExit(2)
        assert exc.value.code == 2

    def test_state_shape(self, capsys, tmp_path):
        path = write(tmp_path, "m.json", matrix_to_json(np.eye(2)))
        code, _, err = run(capsys, "certify", "state", "--psi", path, "--phi", "ket0", "--delta", "0.1")
        assert code == 2 and "single row or column" in err

    def test_optimizer_failure(self, capsys, monkeypatch):
        def boom(*a, **k):
            raise FeasibilityError(1e-3)

        monkeypatch.setattr(cli, "assemble_povm_strategy", boom)
        code, _, err = run(capsys, "certify", "povm", "--u", "hadamard", "--delta", "0.05")
        assert code == 3 and "feasibility" in err

    def test_unwritable_output(self, capsys, tmp_path):
        code, _, err = run(capsys, "certify", "unitary", "--u", "fig1", "--delta", "0.1",
                           "--out", str(tmp_path / "missing" / "x.json"))
        assert code == 2 and "cannot write" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "qcert", "certify", "state", "--psi", "ket0", "--phi", "ket1",
                          "--delta", "0.3"], capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["p2"] == 0.0
