import json

import pytest

from nlthin.runner import main


def write(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def run(args):
    return main([str(a) for a in args])


def test_oracle_theta_prints_value(capsys):
    assert run(["oracle", "--theta", "1", "1"]) == 0
    assert capsys.readouterr().out.strip() == "3.0"


def test_oracle_pure_conv(capsys):
    assert run(["oracle", "--pure-conv", "zero", "2", "2"]) == 0
    assert float(capsys.readouterr().out.strip()) == pytest.approx(128.0 / 3.0)
    assert run(["oracle", "--pure-conv", "delta", "1", "2", "--delta", "1"]) == 0
    assert float(capsys.readouterr().out.strip()) == pytest.approx(2.0)
    # delta regime without --delta is a usage error
    assert run(["oracle", "--pure-conv", "delta", "1", "2"]) == 2


def test_audit_cylinder_all_pass(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = write(tmp_path, "audit.json",
                {"kernel": {"family": "cylinder_indicator", "r": 1.0}, "p": 2.0})
    assert run(["audit", cfg]) == 0
    out = capsys.readouterr().out
    assert "audit passed" in out
    csv = (tmp_path / "nlthin_audit.csv").read_text()
    assert csv.splitlines()[0] == "# nlthin-v1"


def test_missing_field_names_path(tmp_path, capsys):
    cfg = write(tmp_path, "cell.json",
                {"density": {"family": "pure_convolution", "r": 2.0},
                 "regime": "delta", "delta": 1.0, "M": [[1.0]]})
    assert run(["cell", cfg]) == 2
    assert "density.p" in capsys.readouterr().err


def test_unknown_family_lists_alternatives(tmp_path, capsys):
    cfg = write(tmp_path, "cell.json",
                {"density": {"family": "bogus"}, "regime": "delta",
                 "delta": 1.0, "M": [[1.0]]})
    assert run(["cell", cfg]) == 2
    err = capsys.readouterr().err
    assert "density.family" in err
    assert "pure_convolution" in err


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["bogus", "x"])
    assert exc.value.code == 2


def test_invalid_json_exits_2(tmp_path, capsys):
    bad = tmp_path / "broken.json"
    bad.write_text("{ not json", encoding="utf-8")
    assert run(["cell", str(bad)]) == 2


def test_cell_csv_deterministic(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = write(tmp_path, "cell.json",
                {"density": {"family": "pure_convolution", "r": 1.0, "p": 2.0},
                 "regime": "delta", "delta": 1.0, "M": [[1.0]],
                 "resolutions": [4, 8]})
    assert run(["-o", "a", "cell", cfg]) == 0
    assert run(["-o", "b", "cell", cfg]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_scaling_subcommand(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    cfg = write(tmp_path, "scaling.json",
                {"kernel": {"family": "cylinder_indicator", "r": 1.0}, "p": 2.0,
                 "pairs": [[0.125, 0.125], [0.125, 0.03125]]})
    assert run(["scaling", cfg]) == 0
    lines = (tmp_path / "nlthin_scaling.csv").read_text().splitlines()
    assert lines[0] == "# nlthin-v1"
    assert lines[1].split(",")[0] == "eps"
    assert len(lines) == 4


def test_energy_subcommand(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    cfg = write(tmp_path, "energy.json", {
        "density": {"family": "pure_convolution", "r": 1.0, "p": 2.0},
        "scale": {"eps": 0.25, "gamma": 0.25},
        "domain": {"planar_box": [[0.0, 1.0]], "resolution": [9, 5]},
        "field": {"kind": "affine", "M": [[1.0]]},
    })
    assert run(["energy", cfg]) == 0
    payload = json.loads((tmp_path / "nlthin_energy.json").read_text())
    assert payload["total"] > 0.0


def test_gamma_min_subcommand_zero_slope(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    cfg = write(tmp_path, "gm.json", {
        "density": {"family": "pure_convolution", "r": 1.0, "p": 2.0},
        "M": [[0.0]], "trajectory": "constant", "delta": 1.0,
        "eps_list": [0.25], "xi_spacing": 0.125,
    })
    assert run(["gamma-min", cfg]) == 0
    rows = json.loads((tmp_path / "nlthin_gamma_min.json").read_text())["rows"]
    assert rows[0]["min_per_area"] == 0.0
    assert rows[0]["gap"] == 0.0


def test_gamma_min_rejects_unknown_trajectory(tmp_path, capsys):
    cfg = write(tmp_path, "gm.json", {
        "density": {"family": "pure_convolution", "r": 1.0, "p": 2.0},
        "M": [[1.0]], "trajectory": "sideways", "eps_list": [0.25],
    })
    assert run(["gamma-min", cfg]) == 2
    assert "trajectory" in capsys.readouterr().err


def test_seed_must_be_integer(tmp_path, capsys):
    cfg = write(tmp_path, "audit.json",
                {"kernel": {"family": "cylinder_indicator", "r": 1.0},
                 "p": 2.0, "seed": "zero"})
    assert run(["audit", cfg]) == 2
    assert "seed" in capsys.readouterr().err
