import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from centroaffine.body import load_body, validate
from centroaffine.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def ellipse_file(tmp_path, capsys):
    path = tmp_path / "e.json"
    code, out, _ = run(["body", "make", "--dim", "2", "--shape", "ellipse", "--axes", "2,1", "--grid", "512", "--out", str(path)], capsys)
    assert code == 0 and "valid=True" in out
    return path


class TestBodyMake:
    def test_round_trip(self, ellipse_file):
        body = load_body(ellipse_file)
        theta = body.grid.theta
        assert np.allclose(body.h, np.sqrt(4 * np.cos(theta) ** 2 + np.sin(theta) ** 2), atol=1e-15)
        text = ellipse_file.read_text()
        assert load_body(ellipse_file).h.tobytes() == body.h.tobytes()
        assert json.loads(text)

    def test_perturbed_matches_report(self, tmp_path, capsys):
        path = tmp_path / "p.json"
        code, out, _ = run(
            ["body", "make", "--dim", "2", "--shape", "ball", "--perturb", "3,0.01", "--seed", "7", "--grid", "256", "--out", str(path)],
            capsys,
        )
        assert code == 0
        rep = validate(load_body(path))
        assert f"min_eig={rep.min_eig:.6g}" in out

    def test_sphere(self, tmp_path, capsys):
        path = tmp_path / "s.json"
        code, _, _ = run(
            ["body", "make", "--dim", "3", "--shape", "ellipsoid", "--axes", "1.5,1,0.8", "--grid", "16,32", "--out", str(path)],
            capsys,
        )
        assert code == 0 and load_body(path).dim == 3

    @pytest.mark.parametrize(
        "extra",
        [
            ["--dim", "2", "--shape", "ellipse", "--axes", "2", "--grid", "64"],
            ["--dim", "2", "--shape", "ball", "--grid", "7"],
            ["--dim", "3", "--shape", "ball", "--grid", "64"],
            ["--dim", "2", "--shape", "ball", "--axes", "-1", "--grid", "64"],
            ["--dim", "2", "--shape", "ball", "--perturb", "1.5,0.1", "--grid", "64"],
        ],
    )
    def test_bad_flags(self, extra, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["body", "make", *extra, "--out", str(tmp_path / "x.json")])
        assert exc.value.code == 2

    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["body", "make", "--bogus"])
        assert exc.value.code == 2


class TestInvariants:
    def test_ellipse_closed_form(self, ellipse_file, capsys):
        code, out, _ = run(["invariants", "--body", str(ellipse_file), "--p", "1,2", "--omega2"], capsys)
        assert code == 0
        table = rows(out)
        assert list(table[0]) == ["p", "e", "omega_p", "omega_2p", "iso_ratio"]
        assert abs(float(table[0]["omega_p"]) - 2 * math.pi * 2 ** (1 / 3)) <= 1e-6
        assert float(table[0]["omega_2p"]) == pytest.approx(-(2 * math.pi / 3) * 2 ** (2 / 3), rel=1e-8)
        assert float(table[1]["iso_ratio"]) == pytest.approx(1.0, abs=1e-8)

    def test_phi_column_and_file(self, ellipse_file, tmp_path, capsys):
        out_path = tmp_path / "inv.csv"
        code, _, _ = run(["invariants", "--body", str(ellipse_file), "--p=-0.5,inf", "--phi", "0.25", "--out", str(out_path)], capsys)
        assert code == 0
        table = rows(out_path.read_text())
        assert float(table[0]["omega_phi"]) == pytest.approx(2 * math.pi * math.sqrt(2), rel=1e-9)
        assert table[0]["iso_ratio"] == "" and table[1]["omega_2p"] == ""

    def test_twelve_digits(self, ellipse_file, capsys):
        _, out, _ = run(["invariants", "--body", str(ellipse_file), "--p", "1"], capsys)
        assert rows(out)[0]["omega_p"] == f"{float(rows(out)[0]['omega_p']):.12g}"
        assert len(rows(out)[0]["omega_p"].replace(".", "")) == 12

    @pytest.mark.parametrize("p", ["0", "-2", "x"])
    def test_excluded_index(self, ellipse_file, p, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["invariants", "--body", str(ellipse_file), "--p", p])
        assert exc.value.code == 2
        if p != "x":
            assert "excluded index" in capsys.readouterr().err

    def test_missing_body(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["invariants", "--body", str(tmp_path / "nope.json"), "--p", "1"])
        assert exc.value.code == 2

    def test_invalid_body_exit_1(self, tmp_path, capsys):
        from centroaffine.body import ConvexBody, save_body
        from centroaffine.spherical import make_grid

        g = make_grid(2, 64)
        path = tmp_path / "bad.json"
        save_body(ConvexBody(g, 1 + 0.5 * np.cos(2 * g.theta)), path)
        code, _, err = run(["invariants", "--body", str(path), "--p", "1"], capsys)
        assert code == 1 and "InvalidBody" in err


class TestEvolve:
    def test_circle(self, tmp_path, capsys):
        body = tmp_path / "b.json"
        traj = tmp_path / "t.jsonl"
        run(["body", "make", "--dim", "2", "--shape", "ball", "--grid", "128", "--out", str(body)], capsys)
        code, out, _ = run(["evolve", "--body", str(body), "--p", "1", "--t-max", "0.3", "--safety", "0.25", "--stride", "1000000", "--out", str(traj)], capsys)
        assert code == 0 and "stop=Completed" in out
        last = json.loads(traj.read_text().splitlines()[-1])
        assert last["t"] == pytest.approx(0.3)
        assert np.max(np.abs(np.array(last["body"]["h"]) - 0.6**0.75)) <= 1e-4

    def test_phi_driver(self, tmp_path, capsys):
        body = tmp_path / "b.json"
        run(["body", "make", "--dim", "2", "--shape", "ball", "--grid", "64", "--out", str(body)], capsys)
        code, _, _ = run(["evolve", "--body", str(body), "--phi", "0.5", "--t-max", "0.01", "--out", str(tmp_path / "t.jsonl")], capsys)
        assert code == 0

    def test_needs_driver(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["evolve", "--body", "x.json", "--t-max", "1", "--out", str(tmp_path / "t")])
        assert exc.value.code == 2


class TestFloating:
    def test_disk(self, tmp_path, capsys):
        body = tmp_path / "b.json"
        run(["body", "make", "--dim", "2", "--shape", "ball", "--grid", "256", "--out", str(body)], capsys)
        code, out, _ = run(["floating", "--body", str(body), "--phi", "0.5", "--t-list", "0.04,0.02,0.01"], capsys)
        assert code == 0
        table = rows(out)
        assert list(table[0]) == ["t", "slope", "extrapolated", "omega_phi_direct", "ratio"]
        assert float(table[-1]["ratio"]) == pytest.approx((81 / 1024) ** (1 / 3), rel=1e-4)

    def test_increasing_t_list(self, ellipse_file):
        with pytest.raises(SystemExit) as exc:
            main(["floating", "--body", str(ellipse_file), "--phi", "0.5", "--t-list", "0.01,0.02"])
        assert exc.value.code == 2


class TestVerify:
    def test_five_trials(self, tmp_path, capsys):
        report = tmp_path / "r.json"
        code, out, _ = run(["verify", "--seed", "42", "--trials", "5", "--dims", "2", "--out", str(report)], capsys)
        assert code == 0
        obj = json.loads(report.read_text())
        assert obj["summary"]["failed"] == 0
        assert "c2" in out

    def test_empty_p_set(self, capsys):
        code, out, _ = run(["verify", "--seed", "1", "--trials", "1", "--p-set", ""], capsys)
        assert code == 0 and "first_variation" not in out

    def test_bad_dims(self):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "--seed", "1", "--trials", "1", "--dims", "4"])
        assert exc.value.code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "centroaffine", "invariants", "--body", "none.json", "--p", "0"], capture_output=True, text=True)
    assert res.returncode == 2
