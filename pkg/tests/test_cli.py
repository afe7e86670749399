import csv
import json
from fractions import Fraction

import numpy as np
import pytest

from crystalmeasure import measure as ms
from crystalmeasure import serialize as ser
from crystalmeasure.cli import main, parse_levels, read_config
from crystalmeasure.measure import Atom, Interval


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    out = tmp_path_factory.mktemp("default")
    assert main(["build", "--out", str(out)]) == 0
    assert main(["verify", "--measure", str(out / "measure.json")]) == 0
    return out


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_meyer_m32(tmp_path):
    assert main(["meyer", "--M", "32", "--alpha", "1/8", "--out", str(tmp_path)]) == 0
    cert = json.loads((tmp_path / "meyer_M32_certificate.json").read_text())
    assert cert["passed"]
    mc = ser.load_meyer(tmp_path / "meyer_M32.json")
    assert mc.M == 32 and len(mc.c) == 1024


def test_meyer_m4_nullspace(tmp_path):
    assert main(["meyer", "--M", "4", "--alpha", "1/8", "--method", "nullspace", "--out", str(tmp_path)]) == 0
    mc = ser.load_meyer(tmp_path / "meyer_M4.json")
    assert len(mc.c) == 16
    assert np.flatnonzero(mc.c == 0).tolist()[:3] == [0, 1, 2]
    assert np.all(mc.c[[0, 1, 2, 14, 15]] == 0)


def test_meyer_infeasible(tmp_path, capsys):
    assert main(["meyer", "--M", "2", "--alpha", "1/2", "--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_build_default(built):
    cert = json.loads((built / "certificates.json").read_text())
    assert cert["passed"]
    assert (built / "meyer_M32.json").exists() and (built / "meyer_M1024.json").exists()


def test_build_empty(tmp_path):
    assert main(["build", "--levels", "none", "--out", str(tmp_path)]) == 0
    fm = ser.load_measure(tmp_path / "measure.json")
    assert fm.levels == ()
    # a zero measure cannot show blow-up, so the verdict is not the headline one
    assert main(["verify", "--measure", str(tmp_path / "measure.json")]) == 1


def test_build_q1(tmp_path, capsys):
    assert main(["build", "--q", "1", "--out", str(tmp_path)]) == 2
    assert "smallest valid n: 6" in capsys.readouterr().err


def test_verify_outputs(built):
    verdict = json.loads((built / "verdict.json").read_text())
    assert verdict["verdict"] == "crystalline: pass, quasicrystal: fail"
    b = rows(built / "blowup.csv")
    assert b[0] == ["n", "t_n", "abs_F", "L_n", "threshold"]
    assert [r[1] for r in b[1:]] == ["128", str(2**31)]
    assert float(b[1][2]) >= 4.23 and float(b[2][2]) >= 1075
    assert len(rows(built / "growth.csv")) == 3
    assert all(r[2] == "True" for r in rows(built / "poisson.csv")[1:])
    for n in (1, 2):
        plot = rows(built / f"plot_F_level{n}.csv")
        assert len(plot) == 130


def test_verify_single_level(tmp_path):
    assert main(["build", "--levels", "1", "--out", str(tmp_path)]) == 0
    assert main(["verify", "--measure", str(tmp_path / "measure.json")]) == 0
    assert len(rows(tmp_path / "blowup.csv")) == 2
    assert len(rows(tmp_path / "growth.csv")) == 2


def test_verify_tampered_atoms(tmp_path, capsys):
    assert main(["build", "--levels", "1", "--out", str(tmp_path)]) == 0
    f = tmp_path / "atoms_windows.csv"
    atoms = ser.atoms_from_csv(f.read_text())
    atoms[0] = Atom(atoms[0].position, atoms[0].weight * 1.5)
    f.write_text(ser.atoms_to_csv(atoms))
    assert main(["verify", "--measure", str(tmp_path / "measure.json")]) == 1
    assert "certificate failure" in capsys.readouterr().err


def test_verify_requires_measure():
    assert main(["verify"]) == 2


def test_export_lambda_window(built, tmp_path):
    fm = ser.load_measure(built / "measure.json", certify=False)
    lam = fm.levels[0].placement.lam
    w = lam + 1 / (2 * lam)
    out = tmp_path / "a.csv"
    W = f"[{lam - 1 / (2 * lam)}, {w}]"
    assert main(["export", "--measure", str(built / "measure.json"), "--window", W, "--out", str(out)]) == 0
    got = ser.atoms_from_csv(out.read_text())
    assert [a.position for a in got] == [lam, lam + Fraction(1, 256)]


def test_export_near_origin_empty(built, capsys):
    assert main(["export", "--measure", str(built / "measure.json"), "--window", "[-1, 1]"]) == 0
    text = capsys.readouterr().out
    assert ser.atoms_from_csv(text) == []


def test_export_roundtrip_json_and_hat(built, tmp_path):
    m = str(built / "measure.json")
    out = tmp_path / "hat.json"
    assert main(["export", "--measure", m, "--window", "[1000, 1010]", "--side", "mu_hat",
                 "--format", "json", "--out", str(out)]) == 0
    fm = ser.load_measure(m, certify=False)
    want = ms.atoms_in(fm.mu_hat, Interval.closed(1000, 1010))
    got = ser.atoms_from_json(out.read_text())
    assert want and got == want


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# single level\nlevels = 1\nalpha = 1/8\nout = " + str(tmp_path / "x") + "\n")
    assert read_config(cfg)["levels"] == "1"
    assert main(["build", "--config", str(cfg)]) == 0
    assert len(ser.load_measure(tmp_path / "x" / "measure.json").levels) == 1
    assert main(["build", "--config", str(cfg), "--levels", "none"]) == 0
    assert ser.load_measure(tmp_path / "x" / "measure.json").levels == ()


def test_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    with pytest.raises(ValueError):
        read_config(cfg)
    assert main(["build", "--config", str(cfg)]) == 2


def test_parse_levels():
    assert parse_levels("1:2") == (1, 2)
    assert parse_levels("1,2") == (1, 2)
    assert parse_levels("3") == (3, 3)
    assert parse_levels("none") == (1, 0)
    with pytest.raises(ValueError):
        parse_levels("1,3")


def test_meyer_roundtrip_bit_exact(sigma32, tmp_path):
    ser.save_meyer(tmp_path / "m.json", sigma32)
    back = ser.load_meyer(tmp_path / "m.json")
    assert np.array_equal(back.c.view(np.float64), sigma32.c.view(np.float64))
    assert back.j_star == sigma32.j_star and back.alpha == sigma32.alpha


def test_measure_roundtrip(default_build, tmp_path):
    path = ser.save_measure(tmp_path, default_build)
    back = ser.load_measure(path)
    assert ser.dumps(ser.measure_to_dict(back)) == ser.dumps(ser.measure_to_dict(default_build))


def test_load_measure_detects_mismatch(default_build, tmp_path):
    path = ser.save_measure(tmp_path, default_build)
    d = json.loads(path.read_text())
    d["levels"][0]["j_star"] += 1
    path.write_text(json.dumps(d))
    with pytest.raises(ValueError):
        ser.load_measure(path)
