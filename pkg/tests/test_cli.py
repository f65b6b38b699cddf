import csv
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from periodica.cli import fmt, main, parse_sweep
from periodica.config import ConfigError, load_config
from periodica.verify import SUITES, TRACEABILITY

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def rows(path):
    with open(path) as f:
        return list(csv.reader(f))


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def base2d(**extra):
    cfg = json.loads((CONFIGS / "synthetic2d.json").read_text())
    cfg.update(extra)
    return cfg


def test_fmt_round_trip():
    for v in (0.1, 1 / 3, -2.5e-300, 12345.678901234567):
        assert float(fmt(v)) == v
    assert fmt(float("nan")) == "nan"


def test_parse_sweep():
    assert parse_sweep(["resolution", "16..256"]) == ("resolution", [16, 32, 64, 128, 256])
    assert parse_sweep(["nmax", "1,2,3"]) == ("nmax", [1, 2, 3])


def test_greens_csv(tmp_path):
    assert main(["greens", "--config", str(CONFIGS / "synthetic2d.json"), "--out", str(tmp_path)]) == 0
    r = rows(tmp_path / "greens.csv")
    assert r[0] == ["x1", "x2", "value", "grad1", "grad2", "trunc_err"]
    assert len(r) == 1 + 16


def test_potential_csv_with_residuals(tmp_path):
    cfg = base2d(evaluation={"points": [[0.5, 0.5], [0.1, 0.2]], "margin": 0.05})
    assert main(["potential", "--config", write(tmp_path, cfg), "--out", str(tmp_path), "--deriv", "0"]) == 0
    r = rows(tmp_path / "potential.csv")
    assert r[0][:3] == ["x1", "x2", "value"] and "residual_AB" in r[0]
    assert all(float(v) <= 1e-4 for v in (row[r[0].index("residual_AB")] for row in r[1:]))


def test_potential_points_file_and_minus(tmp_path):
    pts = tmp_path / "pts.csv"
    pts.write_text("x1,x2\n0.1,0.2\n0.9,0.85\n")
    cfg = write(tmp_path, base2d())
    assert main(["potential", "--config", cfg, "--out", str(tmp_path), "--side", "minus", "--points", str(pts)]) == 0
    r = rows(tmp_path / "potential.csv")
    assert len(r) == 3 and r[0] == ["x1", "x2", "value"]


def test_touching_domain_exit_2(tmp_path, capsys):
    assert main(["verify", "--config", str(CONFIGS / "touching_cell.json"), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "cl(Omega) ⊂ Q" in err


@pytest.mark.parametrize("patch, text", [
    ({"kernel": {"kind": "synthetic_power", "lambda": 2.5}}, "lambda"),
    ({"evaluation": {"margin": 0.0}}, "margin"),
    ({"operator": {"coeffs": [{"alpha": [2, 0], "re": 1}, {"alpha": [0, 2], "re": -1}]}}, "strongly elliptic"),
    ({"bogus": 1}, "unknown config keys"),
    ({"kernel": {"kind": "laplace_ewald"}, "operator": {"kind": "modified_helmholtz", "kappa": 1.0}}, "Laplace"),
])
def test_invalid_configs(tmp_path, capsys, patch, text):
    assert main(["greens", "--config", write(tmp_path, base2d(**patch)), "--out", str(tmp_path)]) == 2
    assert text in capsys.readouterr().err


def test_unreadable_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["greens", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "invalid configuration" in capsys.readouterr().err


def test_failed_check_exit_1(tmp_path, capsys):
    cfg = base2d(quadrature={"resolution": 8, "boundary_resolution": 16})
    assert main(["verify", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    report = json.loads((tmp_path / "report.json").read_text())
    failed = [k for k, v in report["checks"].items() if not v["pass"]]
    assert failed and all(k in err for k in failed)


def test_verify_report_schema(tmp_path):
    assert main(["verify", "--config", str(CONFIGS / "synthetic2d.json"), "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert {"config_echo", "checks", "timing", "traceability"} <= set(report)
    assert report["config_echo"] == json.loads((CONFIGS / "synthetic2d.json").read_text())
    for name, c in report["checks"].items():
        assert set(c) == {"lhs", "rhs", "residual", "pass"}
        assert report["traceability"][name] == TRACEABILITY[name]


def test_norms_json(tmp_path):
    assert main(["norms", "--config", str(CONFIGS / "synthetic2d.json"), "--out", str(tmp_path)]) == 0
    r = json.loads((tmp_path / "norms.json").read_text())
    assert {"a0", "a1", "roumieu"} <= set(r)
    assert set(r["roumieu"]) >= {"rho", "order", "value", "beta"}
    assert r["a0"] == pytest.approx((np.pi / 2) ** 0.5, rel=1e-12)


def test_convergence_nmax(tmp_path):
    cfg = {"cell": {"periods": [1.0, 1.0, 1.0]}, "operator": {"kind": "modified_helmholtz", "kappa": 2.0},
           "kernel": {"kind": "yukawa"}, "domain": {"kind": "empty"},
           "evaluation": {"points": [[0.3, 0.1, 0.2], [0.45, -0.2, 0.1]]}}
    assert main(["convergence", "--config", write(tmp_path, cfg), "--out", str(tmp_path),
                 "--sweep", "nmax", "1,2,3,4"]) == 0
    err = [float(r[2]) for r in rows(tmp_path / "convergence.csv")[1:]]
    assert all(b < a for a, b in zip(err, err[1:]))


def test_convergence_resolution(tmp_path):
    assert main(["convergence", "--config", str(CONFIGS / "convergence2d.json"), "--out", str(tmp_path),
                 "--sweep", "resolution", "16..256"]) == 0
    r = rows(tmp_path / "convergence.csv")
    assert r[0] == ["resolution", "value", "error"]
    assert [int(x[0]) for x in r[1:6]] == [16, 32, 64, 128, 256]


def test_determinism(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        main(["verify", "--config", str(CONFIGS / "synthetic2d.json"), "--out", str(d), "--suite", "roumieu"])
        outs.append((d / "report.json").read_bytes())
    assert outs[0] == outs[1]


def test_traceability_complete():
    for names in SUITES.values():
        assert all(n in TRACEABILITY for n in names)


def test_load_config_defaults():
    cfg = load_config({"cell": {"periods": [1.0, 1.0]}, "domain": {"kind": "ball", "center": [0.5, 0.5],
                                                                   "radius": 0.2}})
    assert cfg.kernel().name == "laplace_ewald"
    assert cfg.points().shape == (16, 2)
    with pytest.raises(ConfigError):
        load_config({"operator": {"kind": "laplace"}})
